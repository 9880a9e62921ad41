use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::eventlog::VERSION;

use super::histogram::Histogram;

/// One data table with columns `x, y, y_err`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub config_hash: String,
    pub description: String,
    pub rows: Vec<[f64; 3]>,
}

impl Table {
    pub fn new(name: impl Into<String>, config_hash: impl Into<String>, description: impl Into<String>) -> Self {
        Table {
            name: name.into(),
            config_hash: config_hash.into(),
            description: description.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64, y: f64, y_err: f64) {
        self.rows.push([x, y, y_err]);
    }

    pub fn from_histogram(
        name: impl Into<String>,
        config_hash: impl Into<String>,
        description: impl Into<String>,
        h: &Histogram,
    ) -> Self {
        let mut t = Table::new(name, config_hash, description);
        let (v, e) = (h.values(), h.errors());
        for (i, x) in h.centers().into_iter().enumerate() {
            t.push(x, v[i], e[i]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# condmem {VERSION} config_hash={} {}\nx,y,y_err\n",
            self.config_hash, self.description
        );
        for [x, y, e] in &self.rows {
            let _ = writeln!(s, "{x},{y},{e}");
        }
        s
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}
