//! Reading and validating input files.

use std::path::Path;

use chaining_core::apps::recovery::RecoveryInstance;
use chaining_core::metric::FiniteMetricSpace;
use chaining_core::sim::{ModelSpec, ProcessModel};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// CSV, one vector per row.
    Points,
    /// CSV square distance matrix.
    Distances,
    /// JSON list of equally shaped matrices.
    Matrices,
    /// JSON recovery instance.
    Instance,
    /// JSON list of process models.
    Models,
}

#[derive(Debug, Clone)]
pub enum Loaded {
    Space(FiniteMetricSpace),
    Matrices(Vec<DMatrix<f64>>),
    Instance(RecoveryInstance),
    Models(Vec<ProcessModel>),
}

/// Numeric CSV rows. An all-text first row is taken as a header; `#` starts a comment.
pub fn read_csv_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse { path: path.to_path_buf(), line, column: 0, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if k == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: col as u64 + 1,
                message: format!("expected a number, found {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: col as u64 + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::validation("nonempty input", format!("{} has no data rows", path.display())));
    }
    Ok(rows)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })
}

fn check_distances(rows: &[Vec<f64>]) -> CliResult<()> {
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CliError::validation("square matrix", format!("row {i} has {} entries, expected {n}", row.len())));
        }
    }
    for i in 0..n {
        if rows[i][i] != 0.0 {
            return Err(CliError::validation("zero diagonal", format!("d({i},{i}) = {}", rows[i][i])));
        }
        for j in 0..n {
            let (a, b) = (rows[i][j], rows[j][i]);
            if a < 0.0 {
                return Err(CliError::validation("nonnegativity", format!("d({i},{j}) = {a}")));
            }
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(CliError::validation("symmetry", format!("d({i},{j}) = {a} but d({j},{i}) = {b}")));
            }
        }
    }
    Ok(())
}

pub fn load_inputs(path: &Path, kind: InputKind) -> CliResult<Loaded> {
    match kind {
        InputKind::Points => {
            let rows = read_csv_rows(path)?;
            let dim = rows[0].len();
            if let Some(i) = rows.iter().position(|r| r.len() != dim) {
                return Err(CliError::validation("equal dimensions", format!("row {i} has {} coordinates, expected {dim}", rows[i].len())));
            }
            FiniteMetricSpace::from_vectors(rows)
                .map(Loaded::Space)
                .map_err(|e| CliError::validation("metric", e.to_string()))
        }
        InputKind::Distances => {
            let rows = read_csv_rows(path)?;
            check_distances(&rows)?;
            FiniteMetricSpace::from_matrix(rows)
                .map(Loaded::Space)
                .map_err(|e| CliError::validation("metric", e.to_string()))
        }
        InputKind::Matrices => {
            let raw: Vec<Vec<Vec<f64>>> = read_json(path)?;
            let first = raw.first().ok_or_else(|| CliError::validation("nonempty input", "no matrices"))?;
            let (r, c) = (first.len(), first.first().map_or(0, |row| row.len()));
            if r == 0 || c == 0 {
                return Err(CliError::validation("matrix shape", "matrices must be nonempty"));
            }
            let mut out = Vec::with_capacity(raw.len());
            for (k, m) in raw.iter().enumerate() {
                if m.len() != r || m.iter().any(|row| row.len() != c) {
                    return Err(CliError::validation("matrix shape", format!("matrix {k} is not {r}×{c}")));
                }
                if m.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(CliError::validation("finite entries", format!("matrix {k} has a non-finite entry")));
                }
                out.push(DMatrix::from_fn(r, c, |i, j| m[i][j]));
            }
            Ok(Loaded::Matrices(out))
        }
        InputKind::Instance => {
            let inst: RecoveryInstance = read_json(path)?;
            inst.validate().map_err(|e| CliError::validation("‖y − Φx*‖₂ ≤ η", e.to_string()))?;
            Ok(Loaded::Instance(inst))
        }
        InputKind::Models => {
            let specs: Vec<ModelSpec> = read_json(path)?;
            if specs.is_empty() {
                return Err(CliError::validation("nonempty input", "no models"));
            }
            specs
                .iter()
                .enumerate()
                .map(|(k, s)| ProcessModel::from_spec(s).map_err(|e| CliError::validation("model", format!("model {k}: {e}"))))
                .collect::<CliResult<Vec<_>>>()
                .map(Loaded::Models)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_points() {
        let f = file("x,y\n0,0\n1,0\n0,2\n", ".csv");
        match load_inputs(f.path(), InputKind::Points).unwrap() {
            Loaded::Space(s) => assert_eq!(s.n_points(), 3),
            other => panic!("{other:?}"),
        }
        let bad = file("0,0\n1,abc\n", ".csv");
        match load_inputs(bad.path(), InputKind::Points) {
            Err(CliError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymmetric_distances_name_the_pair() {
        let f = file("0,1,2\n1,0,1\n2,1.5,0\n", ".csv");
        match load_inputs(f.path(), InputKind::Distances) {
            Err(CliError::Validation { invariant, message }) => {
                assert_eq!(invariant, "symmetry");
                assert!(message.contains("d(1,2)"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_instance_is_rejected() {
        let f = file(r#"{"phi":[[1,0],[0,1]],"x_star":[1,0],"e":[0,0],"y":[1.5,0],"eta":0.1}"#, ".json");
        assert!(matches!(load_inputs(f.path(), InputKind::Instance), Err(CliError::Validation { .. })));
        let broken = file("{\"phi\": [[1,\n", ".json");
        assert!(matches!(load_inputs(broken.path(), InputKind::Instance), Err(CliError::Parse { line: 2, .. })));
    }
}
