//! MatrixMarket coordinate files and the jump-matrix sidecar header.
//!
//! Files use the `coordinate real general` flavour with 1-based indices, as
//! the format requires. Values are written in shortest round-trip form, so a
//! write/read cycle reproduces every entry bit for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ajc_core::{CsrMatrix, JumpMatrix, SparseRateMatrix, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const BANNER: &str = "%%MatrixMarket matrix coordinate real general";

/// Parsed coordinate file: dimensions and 0-based triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn write_coordinate(
    path: &Path,
    rows: usize,
    cols: usize,
    entries: impl ExactSizeIterator<Item = (usize, usize, f64)>,
    comment: Option<&str>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    let body = || -> std::io::Result<()> {
        writeln!(w, "{BANNER}")?;
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(w, "% {line}")?;
            }
        }
        writeln!(w, "{rows} {cols} {}", entries.len())?;
        for (r, c, v) in entries {
            writeln!(w, "{} {} {v:e}", r + 1, c + 1)?;
        }
        w.flush()
    };
    body().map_err(CliError::io(path))
}

pub fn read_coordinate(path: &Path) -> Result<Coordinate> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |line: usize, what: &str| CliError::format(path, format!("line {line}: {what}"));
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let banner_words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if banner_words != ["%%matrixmarket", "matrix", "coordinate", "real", "general"] {
        return Err(bad(1, "expected `%%MatrixMarket matrix coordinate real general`"));
    }
    let mut data = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (n, size) = data.next().ok_or_else(|| bad(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(n + 1, "size line must be three integers"))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(bad(n + 1, "size line must be three integers"));
    };
    let mut entries = Vec::with_capacity(nnz);
    for (n, line) in data {
        let mut it = line.split_whitespace();
        let (Some(r), Some(c), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(bad(n + 1, "entry must be `row col value`"));
        };
        let r: usize = r.parse().map_err(|_| bad(n + 1, "bad row index"))?;
        let c: usize = c.parse().map_err(|_| bad(n + 1, "bad column index"))?;
        let v: f64 = v.parse().map_err(|_| bad(n + 1, "bad value"))?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(bad(n + 1, "index out of range (indices are 1-based)"));
        }
        entries.push((r - 1, c - 1, v));
    }
    if entries.len() != nnz {
        return Err(CliError::format(
            path,
            format!("size line declares {nnz} entries, found {}", entries.len()),
        ));
    }
    Ok(Coordinate { rows, cols, entries })
}

/// Reads a generator; diagonal entries in the file are ignored and recomputed.
pub fn read_rate_matrix(path: &Path) -> Result<SparseRateMatrix> {
    let coo = read_coordinate(path)?;
    if coo.rows != coo.cols {
        return Err(CliError::format(path, "generator must be square"));
    }
    SparseRateMatrix::from_off_diagonal(coo.rows, coo.entries)
        .map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_rate_matrix(path: &Path, q: &SparseRateMatrix) -> Result<()> {
    let n = q.dim();
    let entries: Vec<_> = q
        .off_diagonal_entries()
        .chain((0..n).map(|i| (i, i, q.diagonal(i))))
        .collect();
    write_coordinate(path, n, n, entries.into_iter(), None)
}

/// Sidecar metadata stored next to a jump-matrix coordinate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpMatrixHeader {
    /// Number of states `N`.
    pub n: usize,
    /// Number of time cells `M`.
    pub m: usize,
    pub time_edges: Vec<f64>,
    pub nnz: usize,
    /// Per cell, flat index `k·N + i`: probability of no jump before the horizon.
    pub survival_mass: Vec<f64>,
    /// Per cell, flat index `k·N + i`: outbound rate `q_i` on cell `k`.
    pub outbound_rates: Vec<f64>,
}

/// Paths of a jump matrix on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMatrixPaths {
    pub matrix: PathBuf,
    pub header: PathBuf,
}

impl JumpMatrixPaths {
    /// `<dir>/<stem>.mtx` and `<dir>/<stem>.json`.
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            matrix: dir.join(format!("{stem}.mtx")),
            header: dir.join(format!("{stem}.json")),
        }
    }
}

pub fn write_jump_matrix(paths: &JumpMatrixPaths, j: &JumpMatrix) -> Result<()> {
    let idx = j.indexer();
    let comment = format!(
        "augmented jump chain: {} states x {} time cells, flat index = block * N + state",
        idx.num_states(),
        idx.num_blocks()
    );
    let triplets: Vec<_> = j.matrix().triplets().collect();
    write_coordinate(&paths.matrix, idx.len(), idx.len(), triplets.into_iter(), Some(&comment))?;
    let header = JumpMatrixHeader {
        n: idx.num_states(),
        m: idx.num_blocks(),
        time_edges: j.grid().edges().to_vec(),
        nnz: j.nnz(),
        survival_mass: j.survival_masses().to_vec(),
        outbound_rates: j.outbound_rates().to_vec(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&paths.header, text + "\n").map_err(CliError::io(&paths.header))
}

pub fn read_jump_matrix(paths: &JumpMatrixPaths) -> Result<JumpMatrix> {
    let text = fs::read_to_string(&paths.header).map_err(CliError::io(&paths.header))?;
    let header: JumpMatrixHeader =
        serde_json::from_str(&text).map_err(|e| CliError::format(&paths.header, e.to_string()))?;
    let grid = TimeGrid::new(header.time_edges.clone()).map_err(|e| CliError::format(&paths.header, e.to_string()))?;
    if grid.len() != header.m {
        return Err(CliError::format(&paths.header, "`m` does not match `time_edges`"));
    }
    let coo = read_coordinate(&paths.matrix)?;
    let dim = header.n * header.m;
    if coo.rows != dim || coo.cols != dim {
        return Err(CliError::format(&paths.matrix, format!("expected a {dim}x{dim} matrix")));
    }
    if coo.entries.len() != header.nnz {
        return Err(CliError::format(&paths.matrix, "entry count disagrees with the header"));
    }
    let csr = CsrMatrix::from_triplets(dim, dim, coo.entries).map_err(|e| CliError::format(&paths.matrix, e.to_string()))?;
    JumpMatrix::from_parts(grid, header.n, csr, header.outbound_rates)
        .map_err(|e| CliError::format(&paths.matrix, e.to_string()))
}
