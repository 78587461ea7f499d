//! Multiplex graph directory format and CSV helpers.
//!
//! A dataset directory holds:
//!
//! * `meta.json`: `{"num_nodes": N, "num_dims": D, "num_features": F}`
//! * `dim_<k>.tsv` for `k = 0..D`: one `u<TAB>v` edge per line, 0-based
//! * `features.csv`: `N` rows of `F` comma-separated values
//! * `labels.csv` (optional): `N` rows of `;`-separated class ids
//!
//! Edges are read as undirected. Floats are written with the shortest
//! representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultiplexGraph;
use crate::sparse::SparseAdjacency;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub num_nodes: usize,
    pub num_dims: usize,
    pub num_features: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn dim_file(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("dim_{k}.tsv"))
}

pub fn load_multiplex(dir: impl AsRef<Path>) -> Result<MultiplexGraph> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&read(&meta_path)?)
        .map_err(|e| Error::load(&meta_path, e.to_string()))?;
    let n = meta.num_nodes;

    // A dim file beyond the declared count means the header is stale.
    if dim_file(dir, meta.num_dims).exists() {
        return Err(Error::load(
            &meta_path,
            format!(
                "found more than the declared {} dimension files",
                meta.num_dims
            ),
        ));
    }
    let mut dimensions = Vec::with_capacity(meta.num_dims);
    for k in 0..meta.num_dims {
        let path = dim_file(dir, k);
        if !path.exists() {
            return Err(Error::load(
                &path,
                format!("missing; header declares {} dimensions", meta.num_dims),
            ));
        }
        let edges = parse_edges(&path, &read(&path)?, n)?;
        dimensions.push(
            SparseAdjacency::from_undirected_edges(n, &edges)
                .map_err(|e| Error::load(&path, e.to_string()))?,
        );
    }

    let feat_path = dir.join("features.csv");
    let features = parse_matrix(&feat_path, &read(&feat_path)?)?;
    if features.dim() != (n, meta.num_features) {
        return Err(Error::load(
            &feat_path,
            format!(
                "expected {n}x{} features, found {}x{}",
                meta.num_features,
                features.nrows(),
                features.ncols()
            ),
        ));
    }

    let label_path = dir.join("labels.csv");
    let labels = if label_path.exists() {
        Some(parse_labels(&label_path, &read(&label_path)?, n)?)
    } else {
        None
    };

    MultiplexGraph::new(dimensions, features, labels).map_err(|e| Error::load(dir, e.to_string()))
}

fn parse_edges(path: &Path, text: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::load(path, format!("line {}: expected `u<TAB>v`", lineno + 1));
        let mut parts = line.split('\t');
        let u: usize = parts
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let v: usize = parts
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        if u >= n || v >= n {
            return Err(Error::load(
                path,
                format!("line {}: node index out of range for {n} nodes", lineno + 1),
            ));
        }
        if u == v {
            return Err(Error::load(
                path,
                format!("line {}: self-loop on node {u}", lineno + 1),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_labels(path: &Path, text: &str, n: usize) -> Result<Vec<Vec<usize>>> {
    let rows: Vec<&str> = text.lines().collect();
    if rows.len() != n {
        return Err(Error::load(
            path,
            format!("expected {n} label rows, found {}", rows.len()),
        ));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row.trim();
            if row.is_empty() {
                return Ok(Vec::new());
            }
            let mut set: Vec<usize> = row
                .split(';')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::load(path, format!("line {}: bad class id", i + 1)))
                })
                .collect::<Result<_>>()?;
            set.sort_unstable();
            set.dedup();
            Ok(set)
        })
        .collect()
}

/// Parses comma-separated rows into a dense matrix.
pub fn parse_matrix(path: &Path, text: &str) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::load(path, format!("line {}: bad number `{field}`", lineno + 1))
            })?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::load(
                    path,
                    format!("line {}: {width} columns, expected {c}", lineno + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data)
        .map_err(|e| Error::load(path, e.to_string()))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    parse_matrix(path, &read(path)?)
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 12);
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    write(path.as_ref(), &format_matrix(m))
}

pub fn save_multiplex(graph: &MultiplexGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let meta = Meta {
        num_nodes: graph.num_nodes(),
        num_dims: graph.num_dims(),
        num_features: graph.num_features(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write(&dir.join("meta.json"), &meta_json)?;
    for (k, a) in graph.dimensions().iter().enumerate() {
        let mut text = String::new();
        for (u, v) in a.upper_edges() {
            let _ = writeln!(text, "{u}\t{v}");
        }
        write(&dim_file(dir, k), &text)?;
    }
    write_matrix_csv(dir.join("features.csv"), graph.features())?;
    if let Some(labels) = graph.labels() {
        let mut text = String::new();
        for set in labels {
            let ids: Vec<String> = set.iter().map(usize::to_string).collect();
            text.push_str(&ids.join(";"));
            text.push('\n');
        }
        write(&dir.join("labels.csv"), &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MultiplexGraph {
        let dims = vec![
            SparseAdjacency::from_undirected_edges(3, &[(0, 1)]).unwrap(),
            SparseAdjacency::from_undirected_edges(3, &[(1, 2), (2, 0)]).unwrap(),
        ];
        let x = Array2::from_shape_vec((3, 1), vec![0.1, -2.5e-17, 1.0 / 3.0]).unwrap();
        MultiplexGraph::new(dims, x, Some(vec![vec![0], vec![1, 2], vec![]])).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = sample();
        save_multiplex(&g, dir.path()).unwrap();
        let back = load_multiplex(dir.path()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.num_nodes(), 3);
        assert_eq!(back.num_dims(), 2);
        assert_eq!(back.num_features(), 1);
    }

    #[test]
    fn single_listing_is_symmetrized() {
        let dir = tempfile::tempdir().unwrap();
        save_multiplex(&sample(), dir.path()).unwrap();
        write(&dim_file(dir.path(), 0), "1\t0\n").unwrap();
        let g = load_multiplex(dir.path()).unwrap();
        assert_eq!(g.dimensions()[0].get(0, 1), 1.0);
        assert_eq!(g.dimensions()[0].get(1, 0), 1.0);
    }

    #[test]
    fn out_of_range_node_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_multiplex(&sample(), dir.path()).unwrap();
        write(&dim_file(dir.path(), 1), "0\t3\n").unwrap();
        let err = load_multiplex(dir.path()).unwrap_err().to_string();
        assert!(err.contains("out of range"), "{err}");
    }

    #[test]
    fn self_loop_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_multiplex(&sample(), dir.path()).unwrap();
        write(&dim_file(dir.path(), 1), "2\t2\n").unwrap();
        assert!(load_multiplex(dir.path()).is_err());
    }

    #[test]
    fn dimension_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_multiplex(&sample(), dir.path()).unwrap();
        fs::remove_file(dim_file(dir.path(), 1)).unwrap();
        assert!(load_multiplex(dir.path()).is_err());

        let dir = tempfile::tempdir().unwrap();
        save_multiplex(&sample(), dir.path()).unwrap();
        write(&dim_file(dir.path(), 2), "").unwrap();
        assert!(load_multiplex(dir.path()).is_err());
    }

    #[test]
    fn missing_directory_is_an_error() {
        assert!(load_multiplex("/nonexistent/hmge-dataset").is_err());
    }

    #[test]
    fn unwritable_destination_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(save_multiplex(&sample(), blocker.join("sub")).is_err());
    }
}
