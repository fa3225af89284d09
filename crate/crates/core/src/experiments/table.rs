use std::path::Path;

use crate::error::{Error, Result};

/// A CSV table with a fixed header; rows are kept in insertion order.
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

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("fields are UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Measured quantities: scientific notation, 10 significant digits.
pub fn fmt_value(x: f64) -> String {
    format!("{x:.9e}")
}

/// Sweep keys such as SNR in dB.
pub fn fmt_key(x: f64) -> String {
    format!("{x:.3}")
}

pub fn fmt_flag(b: bool) -> String {
    u8::from(b).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["snr_db", "ber"]);
        t.push(vec![fmt_key(100.0), fmt_value(1.5e-3)]);
        t.push(vec![fmt_key(102.5), fmt_value(0.0)]);
        assert_eq!(
            t.to_csv().unwrap(),
            "snr_db,ber\n100.000,1.500000000e-3\n102.500,0.000000000e0\n"
        );
        assert_eq!(t.column("ber"), Some(1));
    }
}
