//! Tab-separated output tables with a '#'-prefixed self-describing header.

use std::io::Write;
use std::path::Path;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Labeled, timestamped numeric columns; the universal output record.
pub struct TimeSeriesTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TimeSeriesTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "rectangular table required");
        self.rows.push(row);
    }

    /// Serialize; numbers round-trip exactly at 17 significant digits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# cwmeter {ARTIFACT_VERSION}\n"));
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push('#');
        for (i, c) in self.columns.iter().enumerate() {
            out.push(if i == 0 { ' ' } else { '\t' });
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push('\t');
                }
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.render().as_bytes())
    }
}
