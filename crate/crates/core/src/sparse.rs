//! Compressed sparse row storage for adjacency matrices and the
//! sparse-dense kernels used by graph convolutions.

use std::sync::{Arc, OnceLock};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::par;

/// Column structure of a CSR matrix. Values live elsewhere so that several
/// matrices (and autodiff nodes) can share one pattern.
#[derive(Debug)]
pub struct SparsePattern {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    transposed: OnceLock<Transposed>,
}

/// CSC view of a pattern: for every column, the rows holding an entry and the
/// position of that entry in the CSR value array.
#[derive(Debug)]
pub struct Transposed {
    pub indptr: Vec<usize>,
    pub rows: Vec<usize>,
    pub positions: Vec<usize>,
}

impl Clone for SparsePattern {
    fn clone(&self) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            transposed: OnceLock::new(),
        }
    }
}

impl PartialEq for SparsePattern {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }
}

impl SparsePattern {
    /// Builds a pattern from raw CSR arrays, checking that every row is
    /// strictly increasing and in bounds.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indptr[0] != 0 || indptr[n_rows] != indices.len() {
            return Err(Error::invalid("malformed CSR row pointer"));
        }
        for r in 0..n_rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::invalid("CSR row pointer is not monotone"));
            }
            let row = &indices[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "row {r} has unsorted or duplicate column indices"
                )));
            }
            if row.last().is_some_and(|&c| c >= n_cols) {
                return Err(Error::invalid(format!("row {r} has a column out of range")));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            transposed: OnceLock::new(),
        })
    }

    /// Builds a pattern from unordered coordinates; duplicates collapse.
    pub fn from_coords(n_rows: usize, n_cols: usize, coords: &[(usize, usize)]) -> Result<Self> {
        let mut sorted = coords.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        for &(r, c) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            indptr[r + 1] += 1;
            indices.push(c);
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self::from_csr(n_rows, n_cols, indptr, indices)
    }

    pub fn empty(n: usize) -> Self {
        Self::from_csr(n, n, vec![0; n + 1], Vec::new()).expect("empty pattern is valid")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.indptr[r];
        self.row(r).binary_search(&c).ok().map(|k| lo + k)
    }

    /// Iterates `(row, col, position)` over all stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], k))
        })
    }

    pub fn transposed(&self) -> &Transposed {
        self.transposed.get_or_init(|| {
            let mut indptr = vec![0usize; self.n_cols + 1];
            for &c in &self.indices {
                indptr[c + 1] += 1;
            }
            for c in 0..self.n_cols {
                indptr[c + 1] += indptr[c];
            }
            let mut next = indptr.clone();
            let mut rows = vec![0usize; self.nnz()];
            let mut positions = vec![0usize; self.nnz()];
            for (r, c, k) in self.entries() {
                let slot = next[c];
                rows[slot] = r;
                positions[slot] = k;
                next[c] += 1;
            }
            Transposed {
                indptr,
                rows,
                positions,
            }
        })
    }

    pub fn has_diagonal_entries(&self) -> bool {
        (0..self.n_rows.min(self.n_cols)).any(|r| self.position(r, r).is_some())
    }
}

/// A sparse square matrix with real values over a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SparseAdjacency {
    pub fn new(pattern: Arc<SparsePattern>, values: Vec<f64>) -> Result<Self> {
        if pattern.n_rows() != pattern.n_cols() {
            return Err(Error::invalid("adjacency matrices must be square"));
        }
        if values.len() != pattern.nnz() {
            return Err(Error::invalid(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                pattern.nnz()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite adjacency value {v}")));
        }
        Ok(Self { pattern, values })
    }

    /// Unweighted adjacency with both `(u, v)` and `(v, u)` for every edge.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut coords = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            coords.push((u, v));
            coords.push((v, u));
        }
        let pattern = SparsePattern::from_coords(n, n, &coords)?;
        let nnz = pattern.nnz();
        Self::new(Arc::new(pattern), vec![1.0; nnz])
    }

    pub fn from_dense(dense: ArrayView2<f64>) -> Result<Self> {
        let (n, m) = dense.dim();
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for r in 0..n {
            for c in 0..m {
                if dense[[r, c]] != 0.0 {
                    coords.push((r, c));
                    values.push(dense[[r, c]]);
                }
            }
        }
        let pattern = SparsePattern::from_coords(n, m, &coords)?;
        Self::new(Arc::new(pattern), values)
    }

    pub fn n(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, n));
        for (r, c, k) in self.pattern.entries() {
            out[[r, c]] = self.values[k];
        }
        out
    }

    /// Largest `|A[u][v] - A[v][u]|` over all stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.pattern
            .entries()
            .map(|(r, c, k)| (self.values[k] - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Undirected edges `(u, v)` with `u < v`, in row-major order.
    pub fn upper_edges(&self) -> Vec<(usize, usize)> {
        self.pattern
            .entries()
            .filter(|&(r, c, _)| r < c)
            .map(|(r, c, _)| (r, c))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let ptr = self.pattern.indptr();
        (0..self.n())
            .map(|r| self.values[ptr[r]..ptr[r + 1]].iter().sum())
            .collect()
    }

    pub fn spmm(&self, x: ArrayView2<f64>) -> Array2<f64> {
        spmm(&self.pattern, &self.values, x)
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D = diag((A + I) 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(SparseAdjacency);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseAdjacency {
        &self.0
    }

    pub fn into_inner(self) -> SparseAdjacency {
        self.0
    }
}

impl std::ops::Deref for NormalizedAdjacency {
    type Target = SparseAdjacency;
    fn deref(&self) -> &SparseAdjacency {
        &self.0
    }
}

/// Symmetric GCN normalization of `a` (self-loops are added here).
pub fn normalize_adjacency(a: &SparseAdjacency) -> Result<NormalizedAdjacency> {
    if let Some(v) = a.values().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!(
            "cannot normalize an adjacency holding {v}"
        )));
    }
    let layout = SelfLoopLayout::new(a.pattern());
    let (values, _) = layout.normalize(a.values());
    Ok(NormalizedAdjacency(SparseAdjacency::new(
        layout.pattern.clone(),
        values,
    )?))
}

/// Maps a pattern onto the same pattern with every diagonal entry present.
#[derive(Debug)]
pub struct SelfLoopLayout {
    pub pattern: Arc<SparsePattern>,
    /// Output position of every input entry.
    pub source_pos: Vec<usize>,
    /// Output position of `(r, r)` for every row.
    pub diag_pos: Vec<usize>,
}

impl SelfLoopLayout {
    pub fn new(input: &SparsePattern) -> Self {
        let n = input.n_rows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(input.nnz() + n);
        let mut source_pos = vec![0usize; input.nnz()];
        let mut diag_pos = vec![0usize; n];
        indptr.push(0);
        for (r, diag) in diag_pos.iter_mut().enumerate() {
            let lo = input.indptr()[r];
            let mut placed = false;
            for (offset, &c) in input.row(r).iter().enumerate() {
                if !placed && c >= r {
                    *diag = indices.len();
                    if c != r {
                        indices.push(r);
                    }
                    placed = true;
                }
                source_pos[lo + offset] = indices.len();
                if c == r {
                    *diag = indices.len();
                }
                indices.push(c);
            }
            if !placed {
                *diag = indices.len();
                indices.push(r);
            }
            indptr.push(indices.len());
        }
        let pattern = SparsePattern::from_csr(n, n, indptr, indices)
            .expect("self-loop layout preserves CSR invariants");
        Self {
            pattern: Arc::new(pattern),
            source_pos,
            diag_pos,
        }
    }

    /// Returns the normalized values over `self.pattern` and the degrees of
    /// `A + I`.
    pub fn normalize(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.diag_pos.len();
        let mut out = vec![0.0; self.pattern.nnz()];
        for (k, &v) in values.iter().enumerate() {
            out[self.source_pos[k]] += v;
        }
        for &p in &self.diag_pos {
            out[p] += 1.0;
        }
        let ptr = self.pattern.indptr();
        let degree: Vec<f64> = (0..n)
            .map(|r| out[ptr[r]..ptr[r + 1]].iter().sum())
            .collect();
        for (r, c, k) in self.pattern.entries() {
            out[k] /= (degree[r] * degree[c]).sqrt();
        }
        (out, degree)
    }
}

/// Union of several patterns plus, for every input, the position of each of
/// its entries inside the union.
#[derive(Debug)]
pub struct UnionLayout {
    pub pattern: Arc<SparsePattern>,
    pub maps: Vec<Vec<usize>>,
}

impl UnionLayout {
    pub fn new(inputs: &[&SparsePattern]) -> Result<Self> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::invalid("union of zero patterns"))?;
        let (n, m) = (first.n_rows(), first.n_cols());
        if inputs.iter().any(|p| p.n_rows() != n || p.n_cols() != m) {
            return Err(Error::invalid("union of patterns with different shapes"));
        }
        if inputs.iter().all(|p| **p == **first) {
            let pattern = Arc::new((*first).clone());
            let maps = inputs.iter().map(|p| (0..p.nnz()).collect()).collect();
            return Ok(Self { pattern, maps });
        }
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut row_buf = Vec::new();
        for r in 0..n {
            row_buf.clear();
            for p in inputs {
                row_buf.extend_from_slice(p.row(r));
            }
            row_buf.sort_unstable();
            row_buf.dedup();
            indices.extend_from_slice(&row_buf);
            indptr.push(indices.len());
        }
        let pattern = SparsePattern::from_csr(n, m, indptr, indices)?;
        let maps = inputs
            .iter()
            .map(|p| {
                p.entries()
                    .map(|(r, c, _)| pattern.position(r, c).expect("entry is in the union"))
                    .collect()
            })
            .collect();
        Ok(Self {
            pattern: Arc::new(pattern),
            maps,
        })
    }
}

/// `out = A x` for `A` given by `pattern` and `values`.
pub fn spmm(pattern: &SparsePattern, values: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
    let (rows, width) = x.dim();
    assert_eq!(rows, pattern.n_cols(), "spmm inner dimension");
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut out = Array2::<f64>::zeros((pattern.n_rows(), width));
    let ptr = pattern.indptr();
    let idx = pattern.indices();
    par::rows_mut(
        out.as_slice_mut().expect("fresh array"),
        width,
        |r, orow| {
            for k in ptr[r]..ptr[r + 1] {
                let a = values[k];
                let c = idx[k];
                let xrow = &xs[c * width..(c + 1) * width];
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o += a * xv;
                }
            }
        },
    );
    out
}

/// Dot product with eight independent partial sums; the summation order is
/// fixed, so results do not depend on threading.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let (x, y) = (&a[i * 8..i * 8 + 8], &b[i * 8..i * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Stored values in transposed order.
fn transposed_values(t: &Transposed, values: &[f64]) -> Vec<f64> {
    t.positions.iter().map(|&k| values[k]).collect()
}

/// `out = A^T g`, walking the cached transpose so rows are independent.
pub fn spmm_transpose(pattern: &SparsePattern, values: &[f64], g: ArrayView2<f64>) -> Array2<f64> {
    let (rows, width) = g.dim();
    assert_eq!(rows, pattern.n_rows(), "spmm_transpose inner dimension");
    let g = g.as_standard_layout();
    let gs = g.as_slice().expect("standard layout");
    let t = pattern.transposed();
    let tv = transposed_values(t, values);
    let mut out = Array2::<f64>::zeros((pattern.n_cols(), width));
    par::rows_mut(
        out.as_slice_mut().expect("fresh array"),
        width,
        |c, orow| {
            let span = t.indptr[c]..t.indptr[c + 1];
            for (&a, &r) in tv[span.clone()].iter().zip(&t.rows[span]) {
                let grow = &gs[r * width..(r + 1) * width];
                for (o, &gv) in orow.iter_mut().zip(grow) {
                    *o += a * gv;
                }
            }
        },
    );
    out
}

/// Gradient of `sum(G ⊙ (A x))` with respect to the stored values of `A`:
/// `dA[k] = g[row_k] · x[col_k]`.
pub fn spmm_value_grad(
    pattern: &SparsePattern,
    g: ArrayView2<f64>,
    x: ArrayView2<f64>,
) -> Vec<f64> {
    let width = g.ncols();
    assert_eq!(width, x.ncols(), "spmm_value_grad widths");
    let g = g.as_standard_layout();
    let x = x.as_standard_layout();
    let gs = g.as_slice().expect("standard layout");
    let xs = x.as_slice().expect("standard layout");
    let idx = pattern.indices();
    let mut out = vec![0.0; pattern.nnz()];
    par::segments_mut(&mut out, pattern.indptr(), |r, seg| {
        let grow = &gs[r * width..(r + 1) * width];
        let base = pattern.indptr()[r];
        for (off, o) in seg.iter_mut().enumerate() {
            let c = idx[base + off];
            *o = dot(grow, &xs[c * width..(c + 1) * width]);
        }
    });
    out
}

/// Both gradients of `sum(G ⊙ (A x))` in one pass over the transpose:
/// the stored-value gradient and `A^T G`.
pub fn spmm_backward(
    pattern: &SparsePattern,
    values: &[f64],
    g: ArrayView2<f64>,
    x: ArrayView2<f64>,
) -> (Vec<f64>, Array2<f64>) {
    let width = g.ncols();
    assert_eq!(width, x.ncols(), "spmm_backward widths");
    assert_eq!(g.nrows(), pattern.n_rows(), "spmm_backward rows");
    assert_eq!(x.nrows(), pattern.n_cols(), "spmm_backward columns");
    let g = g.as_standard_layout();
    let x = x.as_standard_layout();
    let gs = g.as_slice().expect("standard layout");
    let xs = x.as_slice().expect("standard layout");
    let t = pattern.transposed();
    let tv = transposed_values(t, values);
    let mut dx = Array2::<f64>::zeros((pattern.n_cols(), width));
    let mut dvt = vec![0.0; pattern.nnz()];
    par::rows_segments_mut(
        dx.as_slice_mut().expect("fresh array"),
        width,
        &mut dvt,
        &t.indptr,
        |c, orow, seg| {
            let xrow = &xs[c * width..(c + 1) * width];
            let base = t.indptr[c];
            for (off, dv) in seg.iter_mut().enumerate() {
                let s = base + off;
                let r = t.rows[s];
                let grow = &gs[r * width..(r + 1) * width];
                *dv = dot(grow, xrow);
                let a = tv[s];
                for (o, &gv) in orow.iter_mut().zip(grow) {
                    *o += a * gv;
                }
            }
        },
    );
    let mut dv = vec![0.0; pattern.nnz()];
    for (s, &k) in t.positions.iter().enumerate() {
        dv[k] = dvt[s];
    }
    (dv, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path3() -> SparseAdjacency {
        SparseAdjacency::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn single_node_normalizes_to_one() {
        let a = SparseAdjacency::from_undirected_edges(1, &[]).unwrap();
        let n = normalize_adjacency(&a).unwrap();
        assert_eq!(n.to_dense(), array![[1.0]]);
    }

    #[test]
    fn edgeless_normalizes_to_identity() {
        let a = SparseAdjacency::from_undirected_edges(3, &[]).unwrap();
        let n = normalize_adjacency(&a).unwrap();
        assert_eq!(n.to_dense(), Array2::<f64>::eye(3));
    }

    #[test]
    fn single_edge_normalizes_to_halves() {
        let a = SparseAdjacency::from_undirected_edges(2, &[(0, 1)]).unwrap();
        let n = normalize_adjacency(&a).unwrap();
        assert_eq!(n.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn normalized_diagonal_is_inverse_degree() {
        let n = normalize_adjacency(&path3()).unwrap();
        let d = n.to_dense();
        assert!((d[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((d[[1, 1]] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(n.max_asymmetry(), 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let p = Arc::new(SparsePattern::from_coords(2, 2, &[(0, 1)]).unwrap());
        assert!(SparseAdjacency::new(p, vec![f64::NAN]).is_err());
    }

    #[test]
    fn from_csr_rejects_unsorted_rows() {
        assert!(SparsePattern::from_csr(2, 2, vec![0, 2, 2], vec![1, 0]).is_err());
        assert!(SparsePattern::from_csr(2, 2, vec![0, 2, 2], vec![1, 1]).is_err());
    }

    #[test]
    fn self_loop_layout_keeps_existing_diagonal() {
        let p = SparsePattern::from_coords(2, 2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let layout = SelfLoopLayout::new(&p);
        assert_eq!(layout.pattern.nnz(), 4);
        assert_eq!(layout.source_pos[0], layout.diag_pos[0]);
    }

    #[test]
    fn union_maps_point_at_matching_entries() {
        let a = SparsePattern::from_coords(3, 3, &[(0, 1), (1, 0)]).unwrap();
        let b = SparsePattern::from_coords(3, 3, &[(1, 2), (2, 1), (0, 1)]).unwrap();
        let u = UnionLayout::new(&[&a, &b]).unwrap();
        assert_eq!(u.pattern.nnz(), 4);
        for (p, map) in [&a, &b].iter().zip(&u.maps) {
            for (r, c, k) in p.entries() {
                assert_eq!(u.pattern.position(r, c), Some(map[k]));
            }
        }
    }

    #[test]
    fn kernels_match_dense() {
        let a = normalize_adjacency(&path3()).unwrap();
        let dense = a.to_dense();
        let x = array![[1.0, -2.0], [0.5, 3.0], [-1.0, 0.25]];
        let g = array![[0.3, 0.1], [-0.7, 2.0], [1.5, -0.5]];
        let y = a.spmm(x.view());
        assert!((&y - &dense.dot(&x)).iter().all(|v| v.abs() < 1e-12));
        let yt = spmm_transpose(a.pattern(), a.values(), g.view());
        assert!((&yt - &dense.t().dot(&g)).iter().all(|v| v.abs() < 1e-12));
        let dv = spmm_value_grad(a.pattern(), g.view(), x.view());
        let full = g.dot(&x.t());
        for (r, c, k) in a.pattern().entries() {
            assert!((dv[k] - full[[r, c]]).abs() < 1e-12);
        }
    }

    #[test]
    fn fused_backward_matches_separate_kernels() {
        let coords = [(0, 1), (0, 3), (1, 1), (2, 0), (3, 2), (3, 3), (1, 2)];
        let p = SparsePattern::from_coords(4, 4, &coords).unwrap();
        let vals: Vec<f64> = (0..p.nnz()).map(|k| 0.3 * k as f64 - 0.7).collect();
        let x = Array2::from_shape_fn((4, 11), |(i, j)| (i * 11 + j) as f64 * 0.01 - 0.2);
        let g = Array2::from_shape_fn((4, 11), |(i, j)| ((i + 2 * j) % 7) as f64 - 3.0);
        let (dv, dx) = spmm_backward(&p, &vals, g.view(), x.view());
        let dv_ref = spmm_value_grad(&p, g.view(), x.view());
        let dx_ref = spmm_transpose(&p, &vals, g.view());
        for (a, b) in dv.iter().zip(&dv_ref) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((&dx - &dx_ref).iter().all(|v| v.abs() < 1e-12));
        let a = SparseAdjacency::new(Arc::new(p), vals).unwrap();
        let full = g.dot(&x.t());
        for (r, c, k) in a.pattern().entries() {
            assert!((dv[k] - full[[r, c]]).abs() < 1e-12);
        }
        assert!((&dx - &a.to_dense().t().dot(&g))
            .iter()
            .all(|v| v.abs() < 1e-12));
    }
}
