//! Locale-independent number formatting and CSV output.

use std::io::Write;

/// C-style `%.12e`: twelve fraction digits and a signed, at least two-digit
/// exponent (`1.234567890123e-04`).
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Joins values with `;` (for list-valued CSV cells).
pub fn sci_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| sci(x)).collect::<Vec<_>>().join(";")
}

/// A CSV table buffered in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())
    }
}

/// Writes `bytes` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&str>, bytes: &[u8]) -> std::io::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = std::path::Path::new(p).parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, bytes)
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()
        }
    }
}
