//! Report emission: JSON documents and CSV matrix mirrors, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use utilprice_core::DMatrix;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "UTILPRICE_OUT_DIR";

/// Tolerances pinned by the checks; echoed into every report.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Tolerances {
    pub foc: f64,
    pub inverse_identity: f64,
    pub symmetry: f64,
    pub p_prime: f64,
    pub probe: f64,
    pub theorem8_match: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            foc: 1e-11,
            inverse_identity: 1e-8,
            symmetry: 1e-8,
            p_prime: 1e-7,
            probe: 1e-8,
            theorem8_match: 1e-7,
            fd_step: 1e-4,
        }
    }
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|r| json!(m.row(r).iter().collect::<Vec<_>>())).collect())
}

pub fn opt_matrix(m: Option<&DMatrix<f64>>) -> Value {
    m.map_or(Value::Null, matrix)
}

/// Where reports go: no directory means standard output only.
#[derive(Debug, Clone, Default)]
pub struct Sink {
    pub dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(flag: Option<PathBuf>) -> Self {
        Sink { dir: flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) }
    }

    pub fn json(&self, name: &str, value: &Value) -> CliResult<()> {
        if let Some(dir) = &self.dir {
            let text = serde_json::to_vec_pretty(value).expect("reports serialize");
            write_atomic(&dir.join(format!("{name}.json")), &text)?;
        }
        Ok(())
    }

    pub fn csv_matrix(&self, name: &str, m: &DMatrix<f64>) -> CliResult<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in 0..m.nrows() {
            w.write_record(m.row(r).iter().map(|v| format!("{v:.17e}")))?;
        }
        self.csv_bytes(name, w)
    }

    pub fn csv_table<R: Serialize>(&self, name: &str, rows: &[R]) -> CliResult<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        self.csv_bytes(name, w)
    }

    fn csv_bytes(&self, name: &str, w: csv::Writer<Vec<u8>>) -> CliResult<()> {
        let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
        let dir = self.dir.as_ref().expect("checked by caller");
        write_atomic(&dir.join(format!("{name}.csv")), &bytes)
    }
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(matrix(&m), json!([[1.0, 2.0], [3.0, 4.0]]));
    }

    #[test]
    fn atomic_write_and_csv() {
        let dir = std::env::temp_dir().join(format!("utilprice-report-{}", std::process::id()));
        let sink = Sink { dir: Some(dir.clone()) };
        sink.csv_matrix("m", &DMatrix::from_row_slice(1, 2, &[0.5, -1.0])).unwrap();
        let text = std::fs::read_to_string(dir.join("m.csv")).unwrap();
        let vals: Vec<f64> = text.trim().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.5, -1.0]);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
