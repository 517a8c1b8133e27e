//! Plain-text field snapshots.
//!
//! The first line holds four whitespace-separated values `dim N h time`.
//! Every following line is one cell in storage order: the one-based cell
//! indices (`i j` in 2D, `i j k` in 3D) followed by the value. Reals are
//! written with 17 significant digits so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{CellField, Grid};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

/// Renders a snapshot into a string.
pub fn format_snapshot(field: &CellField, time: f64) -> String {
    let grid = field.grid();
    let mut out = String::with_capacity(field.len() * 32);
    writeln!(out, "{} {} {:.16e} {:.16e}", grid.dim(), grid.n(), grid.h(), time).unwrap();
    for (idx, v) in field.values().iter().enumerate() {
        let [i, j, k] = grid.coords(idx);
        if grid.dim() == 3 {
            writeln!(out, "{} {} {} {:.16e}", i + 1, j + 1, k + 1, v).unwrap();
        } else {
            writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v).unwrap();
        }
    }
    out
}

pub fn write_snapshot(field: &CellField, time: f64, path: &Path) -> Result<(), SnapshotError> {
    fs::write(path, format_snapshot(field, time))
        .map_err(|source| SnapshotError::Io { path: path.to_path_buf(), source })
}

/// Reads a snapshot back. The grid origin is not stored and is taken as 0.
pub fn read_snapshot(path: &Path) -> Result<(CellField, f64), SnapshotError> {
    let text = fs::read_to_string(path)
        .map_err(|source| SnapshotError::Io { path: path.to_path_buf(), source })?;
    parse_snapshot(&text).map_err(|(line, message)| SnapshotError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses snapshot text; errors carry a one-based line number.
pub fn parse_snapshot(text: &str) -> Result<(CellField, f64), (usize, String)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or((1, "empty snapshot".to_string()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 {
        return Err((1, format!("header must be `dim N h time`, got `{header}`")));
    }
    let bad = |what: &str| (1, format!("bad {what} in header"));
    let dim: usize = head[0].parse().map_err(|_| bad("dim"))?;
    let n: usize = head[1].parse().map_err(|_| bad("N"))?;
    let h: f64 = head[2].parse().map_err(|_| bad("h"))?;
    let time: f64 = head[3].parse().map_err(|_| bad("time"))?;
    let grid = Grid::new(dim, n, &vec![0.0; dim], h * n as f64).map_err(|e| (1, e.to_string()))?;
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != dim + 1 {
            return Err((line_no, format!("expected {} columns, got {}", dim + 1, tok.len())));
        }
        let mut c = [0usize; 3];
        for d in 0..dim {
            let v: usize = tok[d].parse().map_err(|_| (line_no, format!("bad index `{}`", tok[d])))?;
            if v == 0 || v > n {
                return Err((line_no, format!("index {v} out of range 1..={n}")));
            }
            c[d] = v - 1;
        }
        let value: f64 =
            tok[dim].parse().map_err(|_| (line_no, format!("bad value `{}`", tok[dim])))?;
        values[grid.index(c[0], c[1], c[2])] = value;
        seen += 1;
    }
    if seen != grid.len() {
        return Err((text.lines().count(), format!("expected {} cells, got {seen}", grid.len())));
    }
    let field = CellField::from_values(grid, values).map_err(|e| (0, e.to_string()))?;
    Ok((field, time))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_carries_dim_n_h_time() {
        let g = Grid::unit_square(4).unwrap();
        let text = format_snapshot(&CellField::constant(g, 1.5), 0.12);
        let header: Vec<f64> =
            text.lines().next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
        assert_eq!(header, vec![2.0, 4.0, 0.25, 0.12]);
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::unit_cube(3).unwrap();
        let f = CellField::from_fn(g, |x| (x[0] * 7.1).exp() / 3.0 - x[1] * x[2] * 1e-17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho_T0.1.snap");
        write_snapshot(&f, 0.1, &path).unwrap();
        let (back, t) = read_snapshot(&path).unwrap();
        assert_eq!(t, 0.1);
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let err = parse_snapshot("2 2 0.5 0\n1 1 1.0\n1 2\n").unwrap_err();
        assert_eq!(err.0, 3);
        assert!(parse_snapshot("2 2 0.5\n").is_err());
    }
}
