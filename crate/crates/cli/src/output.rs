//! CSV output tables: constant column count, LF line endings, `.` decimal
//! separator (plain Rust float formatting).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct OutputTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    filename: String,
}

impl OutputTable {
    pub fn new(filename: &str, header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            filename: filename.to_string(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Write under `dir`, creating it if needed; returns the full path.
    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(&self.filename);
        fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}

/// Write raw text (reports, pre-rendered CSV) under `dir`.
pub fn write_text(dir: &Path, filename: &str, text: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(filename);
    fs::write(&path, text)?;
    Ok(path)
}
