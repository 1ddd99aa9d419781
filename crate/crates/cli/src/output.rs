use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Empty field for `None`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Header plus pre-formatted rows.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields);
    }

    pub fn write_to<W: Write>(&self, sink: W) -> Result<W, CliError> {
        let io = |e: csv::Error| CliError::Io {
            path: "<csv>".into(),
            source: e.into(),
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(sink);
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: "<csv>".into(),
            source: e.into_error(),
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<(), CliError> {
        let io = |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io)?;
        let mut w = self.write_to(BufWriter::new(file)).map_err(|e| match e {
            CliError::Io { source, .. } => io(source),
            other => other,
        })?;
        w.flush().map_err(io)
    }
}
