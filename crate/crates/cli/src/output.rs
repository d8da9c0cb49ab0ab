//! Deterministic result formatting: fixed 12-significant-digit numbers,
//! "." decimal separator, "," field separator, LF line endings, so repeated
//! runs with identical configs are byte-identical.

use std::io::Write;

use crate::CliError;

/// 12 significant digits in scientific notation.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes to the given path, or to stdout when no path is set.
pub fn emit(path: Option<&str>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::validation("OutputWrite", &format!("cannot write {p}: {e}"))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::validation("OutputWrite", &e.to_string()))
        }
    }
}

/// Builds one CSV document: a header, the rows, and optional `# key=value`
/// footer lines.
pub fn csv_document(header: &str, rows: &[String], footer: &[(String, String)]) -> String {
    let mut doc = String::new();
    doc.push_str(header);
    doc.push('\n');
    for row in rows {
        doc.push_str(row);
        doc.push('\n');
    }
    for (key, value) in footer {
        doc.push_str(&format!("# {key}={value}\n"));
    }
    doc
}

/// A flat JSON object with fields in insertion order.
pub fn json_object(fields: &[(&str, String)]) -> String {
    let mut doc = String::from("{");
    for (i, (key, value)) in fields.iter().enumerate() {
        if i > 0 {
            doc.push(',');
        }
        doc.push_str(&format!("\"{key}\":{value}"));
    }
    doc.push_str("}\n");
    doc
}

/// JSON array of fixed-format numbers.
pub fn json_number_array(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|&v| fmt12(v)).collect();
    format!("[{}]", items.join(","))
}
