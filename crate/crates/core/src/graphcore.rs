//! Graph representation and Laplacian/incidence algebra, including
//! multiplier-parameterized perturbations.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Above this vertex count the largest eigenpairs are found by Lanczos
/// iteration instead of a dense symmetric eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 4000;

/// An undirected weighted graph with a fixed edge orientation.
///
/// Edges are stored as `(tail, head)` with `tail < head`; weights are strictly
/// positive. No self-loops, no duplicate undirected edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    w: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, w: Vec<f64>) -> Result<Self> {
        if edges.len() != w.len() {
            return Err(Error::Dimension(format!(
                "{} edges but {} weights",
                edges.len(),
                w.len()
            )));
        }
        let mut seen = HashSet::new();
        let mut oriented = Vec::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {i} is a self-loop ({u},{v})")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} = ({u},{v}) has a vertex outside [0,{n})"
                )));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} = ({u},{v}) duplicates an earlier undirected edge"
                )));
            }
            oriented.push(key);
        }
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi <= 0.0 {
                return Err(Error::InvalidGraph(format!("weight {i} = {wi} is not positive")));
            }
        }
        Ok(Self { n, edges: oriented, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Weighted degree of each vertex.
    pub fn degrees(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            d[u] += self.w[e];
            d[v] += self.w[e];
        }
        d
    }

    pub fn min_degree(&self) -> f64 {
        self.degrees().iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// `L(γ)·x` without forming the matrix, in O(m).
    pub fn laplacian_apply(&self, gamma: &Multipliers, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_gamma(gamma)?;
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "vector has length {} but graph has {} vertices",
                x.len(),
                self.n
            )));
        }
        let mut out = DVector::zeros(self.n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let c = self.w[e] * gamma.as_slice()[e] * (x[u] - x[v]);
            out[u] += c;
            out[v] -= c;
        }
        Ok(out)
    }

    fn check_gamma(&self, gamma: &Multipliers) -> Result<()> {
        if gamma.len() != self.m() {
            return Err(Error::Dimension(format!(
                "multiplier vector has length {} but graph has {} edges",
                gamma.len(),
                self.m()
            )));
        }
        Ok(())
    }

    /// Number of connected components (unit-weight reachability).
    pub fn component_count(&self) -> usize {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            count += 1;
            stack.push(s);
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.component_count() == 1
    }

    /// Serialize as a whitespace edge list `u v w`, one edge per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let _ = writeln!(s, "{u} {v} {:.17e}", self.w[e]);
        }
        s
    }
}

/// Per-edge nonnegative scale factors on the original weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers(Vec<f64>);

impl Multipliers {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &g) in values.iter().enumerate() {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "multiplier {i} = {g} is not finite and nonnegative"
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn ones(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn uniform(m: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// New weights `w̄ = diag(w)·γ̄`.
    pub fn scaled_weights(&self, g: &WeightedGraph) -> Result<Vec<f64>> {
        if self.len() != g.m() {
            return Err(Error::Dimension(format!(
                "multiplier vector has length {} but graph has {} edges",
                self.len(),
                g.m()
            )));
        }
        Ok(g.weights().iter().zip(&self.0).map(|(w, g)| w * g).collect())
    }
}

impl From<DVector<f64>> for Multipliers {
    /// Clamps tiny negative round-off to zero; use [`Multipliers::new`] when
    /// strict validation is wanted.
    fn from(v: DVector<f64>) -> Self {
        Self(v.iter().map(|&g| g.max(0.0)).collect())
    }
}

/// Signed (`B`) and unsigned (`Q`) incidence matrices, stored as the edge list.
///
/// Row `e` of `B` has `+1` at the tail (smaller index) and `-1` at the head.
#[derive(Debug, Clone)]
pub struct IncidencePair {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl IncidencePair {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `B·x ∈ R^m`.
    pub fn apply_b(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|&(u, v)| x[u] - x[v]))
    }

    /// `Bᵀ·y ∈ R^n`.
    pub fn apply_bt(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            out[u] += y[e];
            out[v] -= y[e];
        }
        out
    }

    /// `Q·x ∈ R^m`.
    pub fn apply_q(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|&(u, v)| x[u] + x[v]))
    }

    /// `Qᵀ·y ∈ R^n`.
    pub fn apply_qt(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            out[u] += y[e];
            out[v] += y[e];
        }
        out
    }

    pub fn dense_b(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.edges.len(), self.n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            b[(e, u)] = 1.0;
            b[(e, v)] = -1.0;
        }
        b
    }

    pub fn dense_q(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.edges.len(), self.n);
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            q[(e, u)] = 1.0;
            q[(e, v)] = 1.0;
        }
        q
    }
}

/// Builds the incidence pair for a graph. Validity of the edge set is enforced
/// by [`WeightedGraph::new`]; this re-checks it so a hand-built edge list fails
/// loudly with the offending index.
pub fn build_incidence(g: &WeightedGraph) -> Result<IncidencePair> {
    let mut seen = HashSet::new();
    for (i, &(u, v)) in g.edges().iter().enumerate() {
        if u == v {
            return Err(Error::InvalidGraph(format!("edge {i} is a self-loop")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::InvalidGraph(format!("edge {i} is a duplicate")));
        }
    }
    Ok(IncidencePair { n: g.n(), edges: g.edges().to_vec() })
}

/// Dense perturbed Laplacian `L(γ̄) = Bᵀ W^{1/2} diag(γ̄) W^{1/2} B`, assembled
/// entrywise (degree/adjacency form — algebraically identical).
pub fn laplacian(g: &WeightedGraph, gamma: &Multipliers) -> Result<DMatrix<f64>> {
    if gamma.len() != g.m() {
        return Err(Error::Dimension(format!(
            "multiplier vector has length {} but graph has {} edges",
            gamma.len(),
            g.m()
        )));
    }
    let mut l = DMatrix::zeros(g.n(), g.n());
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let wbar = g.weights()[e] * gamma.as_slice()[e];
        l[(u, u)] += wbar;
        l[(v, v)] += wbar;
        l[(u, v)] -= wbar;
        l[(v, u)] -= wbar;
    }
    Ok(l)
}

/// The preserved spectral data of the original Laplacian: the `n_p` largest
/// eigenpairs, plus the Fiedler value `λ₂` and the largest eigenvalue `λ_n`.
#[derive(Debug, Clone)]
pub struct SpectralReference {
    /// Largest eigenvalues, sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors matching `eigenvalues`; sign fixed so the
    /// largest-magnitude component is positive.
    pub eigenvectors: Vec<DVector<f64>>,
    pub lambda_2: f64,
    pub lambda_n: f64,
    pub n: usize,
}

impl SpectralReference {
    pub fn n_p(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Flips `v` in place so that its largest-magnitude component is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.neg_mut();
    }
}

/// Full dense symmetric eigendecomposition, eigenvalues ascending.
pub fn dense_symmetric_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let eig = a
        .clone()
        .try_symmetric_eigen(1e-13, 10_000)
        .ok_or_else(|| Error::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<DVector<f64>> = order
        .iter()
        .map(|&i| {
            let mut v = eig.eigenvectors.column(i).clone_owned();
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Computes the `n_p` largest eigenpairs of the unperturbed Laplacian.
///
/// Dense decomposition for `n <= DENSE_EIGEN_LIMIT`; Lanczos with full
/// reorthogonalization above that (in which case `λ₂` comes from a Lanczos run
/// on the deflated nullspace complement, adequate at that scale).
pub fn spectral_reference(g: &WeightedGraph, n_p: usize) -> Result<SpectralReference> {
    if n_p == 0 || n_p > g.n() {
        return Err(Error::InvalidArgument(format!(
            "n_p = {n_p} out of range [1, {}]",
            g.n()
        )));
    }
    let gamma = Multipliers::ones(g.m());
    if g.n() <= DENSE_EIGEN_LIMIT {
        let l = laplacian(g, &gamma)?;
        let (values, vectors) = dense_symmetric_eigen(&l)?;
        let n = g.n();
        let lambda_n = values[n - 1];
        let lambda_2 = if n >= 2 { values[1] } else { values[0] };
        let eigenvalues: Vec<f64> = values.iter().rev().take(n_p).copied().collect();
        let eigenvectors: Vec<DVector<f64>> = vectors.iter().rev().take(n_p).cloned().collect();
        Ok(SpectralReference { eigenvalues, eigenvectors, lambda_2, lambda_n, n })
    } else {
        let apply = |x: &DVector<f64>| g.laplacian_apply(&gamma, x).expect("dims checked");
        let (vals, vecs) = lanczos_largest(g.n(), apply, n_p, 1)?;
        let lambda_n = vals[0];
        // λ₂ = smallest nonzero eigenvalue: run Lanczos on λ_n·I − L restricted
        // to the complement of 1.
        let ones = DVector::from_element(g.n(), 1.0 / (g.n() as f64).sqrt());
        let shifted = |x: &DVector<f64>| {
            let y = x - &ones * ones.dot(x);
            let ly = g.laplacian_apply(&gamma, &y).expect("dims checked");
            &y * lambda_n - ly
        };
        let (svals, _) = lanczos_largest(g.n(), shifted, 1, 2)?;
        let lambda_2 = (lambda_n - svals[0]).max(0.0);
        let (eigenvalues, eigenvectors) = (vals, vecs);
        Ok(SpectralReference { eigenvalues, eigenvectors, lambda_2, lambda_n, n: g.n() })
    }
}

/// Lanczos with full reorthogonalization for the `k` largest eigenpairs of a
/// symmetric PSD operator.
fn lanczos_largest(
    n: usize,
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    k: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (4 * k + 40).min(n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut q = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    q /= q.norm();
    basis.push(q.clone());
    for j in 0..steps {
        let mut v = apply(&basis[j]);
        let alpha = basis[j].dot(&v);
        alphas.push(alpha);
        // full reorthogonalization (twice for stability)
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let beta = v.norm();
        if beta < 1e-12 || j + 1 == steps {
            break;
        }
        betas.push(beta);
        basis.push(v / beta);
    }
    let t_dim = alphas.len();
    let mut t = DMatrix::zeros(t_dim, t_dim);
    for i in 0..t_dim {
        t[(i, i)] = alphas[i];
        if i + 1 < t_dim {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let (tvals, tvecs) = dense_symmetric_eigen(&t)?;
    if t_dim < k {
        return Err(Error::Eigensolver(format!(
            "Lanczos basis collapsed at dimension {t_dim} < requested {k}"
        )));
    }
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for i in 0..k {
        let idx = t_dim - 1 - i;
        values.push(tvals[idx]);
        let mut v = DVector::zeros(n);
        for (j, b) in basis.iter().enumerate() {
            v += b * tvecs[idx][j];
        }
        v /= v.norm();
        fix_sign(&mut v);
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// Erdős–Rényi G(n, p) with unit weights, deterministic under `seed`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let m = edges.len();
    WeightedGraph::new(n, edges, vec![1.0; m])
}

// ---------------------------------------------------------------------------
// Graph ingestion
// ---------------------------------------------------------------------------

/// Parses a whitespace-separated edge list `u v w` (weight optional, default 1).
/// 0- or 1-based indexing is autodetected from the minimum vertex index.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing tail", lineno + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let v: usize = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing head", lineno + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let w: f64 = match parts.next() {
            Some(t) => t.parse().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
            None => 1.0,
        };
        raw.push((u, v, w));
    }
    if raw.is_empty() {
        return Err(Error::Parse("edge list is empty".into()));
    }
    let min_idx = raw.iter().map(|&(u, v, _)| u.min(v)).min().unwrap();
    let base = if min_idx >= 1 { 1 } else { 0 };
    let n = raw.iter().map(|&(u, v, _)| u.max(v)).max().unwrap() + 1 - base;
    let edges: Vec<(usize, usize)> = raw.iter().map(|&(u, v, _)| (u - base, v - base)).collect();
    let w: Vec<f64> = raw.iter().map(|&(_, _, w)| w).collect();
    WeightedGraph::new(n, edges, w)
}

/// Parses a symmetric coordinate Matrix Market file: weights from the entries,
/// diagonal ignored, only one triangle read.
pub fn parse_matrix_market(text: &str) -> Result<WeightedGraph> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix-market file".into()))?;
    if !header.starts_with("%%MatrixMarket") || !header.contains("coordinate") {
        return Err(Error::Parse("expected a MatrixMarket coordinate header".into()));
    }
    if !header.contains("symmetric") {
        return Err(Error::Parse("only symmetric coordinate matrices are supported".into()));
    }
    let pattern = header.contains("pattern");
    let mut data = lines.filter(|l| !l.trim_start().starts_with('%'));
    let size_line = data.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .take(2)
        .map(|t| t.parse().map_err(|e| Error::Parse(format!("size line: {e}"))))
        .collect::<Result<_>>()?;
    if dims.len() < 2 || dims[0] != dims[1] {
        return Err(Error::Parse("matrix must be square".into()));
    }
    let n = dims[0];
    let mut edges = Vec::new();
    let mut w = Vec::new();
    let mut seen = HashSet::new();
    for line in data {
        let mut parts = line.split_whitespace();
        let i: usize = parts
            .next()
            .ok_or_else(|| Error::Parse("missing row index".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("row index: {e}")))?;
        let j: usize = parts
            .next()
            .ok_or_else(|| Error::Parse("missing column index".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("column index: {e}")))?;
        let val: f64 = if pattern {
            1.0
        } else {
            parts
                .next()
                .ok_or_else(|| Error::Parse("missing value".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("value: {e}")))?
        };
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            continue;
        }
        edges.push((key.0 - 1, key.1 - 1));
        w.push(val);
    }
    WeightedGraph::new(n, edges, w)
}

/// Loads a graph from a file, dispatching on the `%%MatrixMarket` header or
/// `.mtx` extension, otherwise treating it as a plain edge list.
pub fn load_graph(path: &Path) -> Result<WeightedGraph> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read graph file {}: {e}", path.display())))?;
    let is_mm = text.trim_start().starts_with("%%MatrixMarket")
        || path.extension().is_some_and(|e| e == "mtx");
    if is_mm {
        parse_matrix_market(&text)
    } else {
        parse_edge_list(&text)
    }
}

/// The complete graph K3 with unit weights; the standing worked example.
pub fn k3() -> WeightedGraph {
    WeightedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)], vec![1.0; 3]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path3() -> WeightedGraph {
        WeightedGraph::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_self_loop_and_duplicate() {
        let err = WeightedGraph::new(3, vec![(1, 1)], vec![1.0]).unwrap_err();
        assert!(err.to_string().contains("edge 0"));
        let err = WeightedGraph::new(3, vec![(0, 1), (1, 0)], vec![1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("edge 1"));
        assert!(WeightedGraph::new(2, vec![(0, 1)], vec![0.0]).is_err());
    }

    #[test]
    fn single_edge_incidence() {
        let g = WeightedGraph::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let inc = build_incidence(&g).unwrap();
        let b = inc.dense_b();
        assert_eq!(b, DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
        assert_eq!(inc.dense_q(), DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    }

    #[test]
    fn k3_laplacian_matches_reference() {
        let g = k3();
        let l = laplacian(&g, &Multipliers::ones(3)).unwrap();
        let expect =
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_abs_diff_eq!(l, expect, epsilon = 1e-14);
        // B^T diag(w) B route agrees
        let inc = build_incidence(&g).unwrap();
        let b = inc.dense_b();
        let bt_w_b = b.transpose() * &b;
        assert_abs_diff_eq!(l, bt_w_b, epsilon = 1e-14);
    }

    #[test]
    fn path_degree_vector() {
        let g = path3();
        let inc = build_incidence(&g).unwrap();
        let q1 = inc.apply_qt(&DVector::from_element(2, 1.0));
        assert_eq!(q1, DVector::from_column_slice(&[1.0, 2.0, 1.0]));
    }

    #[test]
    fn k3_perturbed_eigenvalues() {
        let g = k3();
        let gamma = Multipliers::new(vec![1.2, 1.4, 1.0]).unwrap();
        let l = laplacian(&g, &gamma).unwrap();
        let (vals, _) = dense_symmetric_eigen(&l).unwrap();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.2536, epsilon = 1e-3);
        assert_abs_diff_eq!(vals[2], 3.9464, epsilon = 1e-3);
    }

    #[test]
    fn zero_multipliers_zero_laplacian() {
        let g = k3();
        let l = laplacian(&g, &Multipliers::uniform(3, 0.0).unwrap()).unwrap();
        assert_eq!(l, DMatrix::zeros(3, 3));
    }

    #[test]
    fn negative_multiplier_rejected() {
        assert!(Multipliers::new(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn spectral_reference_k3() {
        let r = spectral_reference(&k3(), 2).unwrap();
        assert_abs_diff_eq!(r.eigenvalues[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.eigenvalues[1], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.lambda_2, 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.lambda_n, 3.0, epsilon = 1e-10);
        let ones = DVector::from_element(3, 1.0);
        for (i, v) in r.eigenvectors.iter().enumerate() {
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(v.dot(&ones), 0.0, epsilon = 1e-10);
            for u in &r.eigenvectors[..i] {
                assert_abs_diff_eq!(v.dot(u), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn spectral_reference_k2_closed_form() {
        let g = WeightedGraph::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let r = spectral_reference(&g, 1).unwrap();
        assert_abs_diff_eq!(r.eigenvalues[0], 2.0, epsilon = 1e-12);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let v = &r.eigenvectors[0];
        assert_abs_diff_eq!(v[0].abs(), inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0] * v[1], -0.5, epsilon = 1e-12);
        // sign convention: largest-magnitude component positive
        assert!(v[0] > 0.0 || v[1] > 0.0);
    }

    #[test]
    fn spectral_reference_edgeless() {
        let g = WeightedGraph::new(2, vec![], vec![]).unwrap();
        let r = spectral_reference(&g, 1).unwrap();
        assert_abs_diff_eq!(r.eigenvalues[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn perturbation_identity() {
        let g = erdos_renyi(12, 0.4, 7).unwrap();
        let gamma =
            Multipliers::new((0..g.m()).map(|e| 0.5 + 0.1 * (e as f64 % 7.0)).collect()).unwrap();
        let l1 = laplacian(&g, &gamma).unwrap();
        let l0 = laplacian(&g, &Multipliers::ones(g.m())).unwrap();
        let inc = build_incidence(&g).unwrap();
        let b = inc.dense_b();
        let mut d = DMatrix::zeros(g.m(), g.m());
        for e in 0..g.m() {
            d[(e, e)] = g.weights()[e] * (gamma.as_slice()[e] - 1.0);
        }
        let e_mat = b.transpose() * d * &b;
        assert_abs_diff_eq!(&l1 - &l0, e_mat, epsilon = 1e-12);
    }

    #[test]
    fn theorem2_non_orthogonality() {
        // K5 has minimum degree 4 > 2
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in (u + 1)..5 {
                edges.push((u, v));
            }
        }
        let g = WeightedGraph::new(5, edges.clone(), vec![1.0; edges.len()]).unwrap();
        let l = laplacian(&g, &Multipliers::ones(g.m())).unwrap();
        let eye = DMatrix::identity(5, 5);
        for p in [-1.0, 0.0, 1.0] {
            let m = &l - &eye * p;
            let gap = (m.transpose() * &m - &eye).norm();
            assert!(gap > 0.1, "p = {p}: gap = {gap}");
        }
    }

    #[test]
    fn edge_list_roundtrip_and_base_detection() {
        let g = parse_edge_list("1 2 0.5\n2 3 1.5\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let g0 = parse_edge_list("0 1\n1 2\n").unwrap();
        assert_eq!(g0.n(), 3);
        let text = g0.to_edge_list();
        let g2 = parse_edge_list(&text).unwrap();
        assert_eq!(g0, g2);
    }

    #[test]
    fn matrix_market_parse() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 9.0\n2 1 0.5\n3 2 1.5\n3 1 2.0\n";
        let g = parse_matrix_market(text).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.m(), 3);
        assert_eq!(g.weights(), &[0.5, 1.5, 2.0]);
    }

    #[test]
    fn lanczos_matches_dense_on_small_graph() {
        let g = erdos_renyi(40, 0.2, 3).unwrap();
        let gamma = Multipliers::ones(g.m());
        let l = laplacian(&g, &gamma).unwrap();
        let (dense_vals, _) = dense_symmetric_eigen(&l).unwrap();
        let apply = |x: &DVector<f64>| g.laplacian_apply(&gamma, x).unwrap();
        let (vals, vecs) = lanczos_largest(g.n(), apply, 3, 11).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(vals[i], dense_vals[g.n() - 1 - i], epsilon = 1e-8);
            let res = (g.laplacian_apply(&gamma, &vecs[i]).unwrap() - &vecs[i] * vals[i]).norm();
            assert!(res < 1e-7, "mode {i} residual {res}");
        }
    }
}
