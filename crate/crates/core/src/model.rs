//! Ising model representation and parameter-space diagnostics.
//!
//! A model over spins `x ∈ {−1,+1}ⁿ` has energy
//! `θ·f(x) = Σ_{(i,j)∈E} β_ij x_i x_j + Σ_i α_i x_i`,
//! i.e. it is an exponential-family member with features
//! `f(x) = {x_i x_j ∀(i,j)∈E} ∪ {x_i ∀i}`.
//!
//! The canonical feature (and parameter) layout used everywhere in this crate
//! is: edge coordinates in lexicographic order over pairs `(i, j)` with
//! `i < j`, followed by the `n` node coordinates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::rng::Seed;
use crate::{Error, Result};

/// Sign convention for randomly drawn interaction strengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interaction {
    /// `β_ij ~ unif(−d_e, d_e)`
    Mixed,
    /// `β_ij ~ unif(0, d_e)`
    Attractive,
}

impl std::str::FromStr for Interaction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mixed" => Ok(Interaction::Mixed),
            "attractive" => Ok(Interaction::Attractive),
            other => Err(format!("unknown interaction kind `{other}`")),
        }
    }
}

/// A pairwise binary MRF over spins ±1: symmetric interactions `β`, fields `α`
/// and a declared edge set. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n: usize,
    edges: Vec<(usize, usize)>,
    beta: DMatrix<f64>,
    alpha: DVector<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl IsingModel {
    /// Builds a model, validating symmetry, zero diagonal and graph support.
    ///
    /// `edges` must be lexicographically sorted pairs `(i, j)` with `i < j`.
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        beta: DMatrix<f64>,
        alpha: DVector<f64>,
    ) -> Result<Self> {
        if beta.nrows() != n || beta.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: beta.nrows(),
            });
        }
        if alpha.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: alpha.len(),
            });
        }
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j) in &edges {
            if i >= j || j >= n {
                return Err(Error::InvalidModel(format!("bad edge ({i}, {j})")));
            }
            if let Some(p) = prev {
                if p >= (i, j) {
                    return Err(Error::InvalidModel(
                        "edges must be lexicographically sorted and unique".into(),
                    ));
                }
            }
            prev = Some((i, j));
        }
        let on_edge = |i: usize, j: usize| edges.binary_search(&(i.min(j), i.max(j))).is_ok();
        for i in 0..n {
            if beta[(i, i)] != 0.0 {
                return Err(Error::InvalidModel(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                if beta[(i, j)] != beta[(j, i)] {
                    return Err(Error::InvalidModel(format!(
                        "beta not symmetric at ({i}, {j})"
                    )));
                }
                if beta[(i, j)] != 0.0 && !on_edge(i, j) {
                    return Err(Error::InvalidModel(format!(
                        "nonzero weight off the declared graph at ({i}, {j})"
                    )));
                }
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push((j, beta[(i, j)]));
            neighbors[j].push((i, beta[(i, j)]));
        }
        Ok(Self {
            n,
            edges,
            beta,
            alpha,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Neighbors of `i` with their interaction weights.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// `α_i + Σ_j β_ij x_j`, the field felt by spin `i` in configuration `x`.
    pub fn local_field(&self, x: &SpinConfig, i: usize) -> f64 {
        let mut h = self.alpha[i];
        for &(j, w) in &self.neighbors[i] {
            h += w * f64::from(x.spin(j));
        }
        h
    }

    /// `θ·f(x)` evaluated directly.
    pub fn energy(&self, x: &SpinConfig) -> f64 {
        let mut e = 0.0;
        for &(i, j) in &self.edges {
            e += self.beta[(i, j)] * f64::from(x.spin(i)) * f64::from(x.spin(j));
        }
        for i in 0..self.n {
            e += self.alpha[i] * f64::from(x.spin(i));
        }
        e
    }

    /// The 0/1 mask of forbidden (non-edge) entries for this model's graph.
    pub fn mask(&self) -> GraphMask {
        GraphMask::from_edges(self.n, &self.edges)
    }

    /// Rebuilds a model with the same graph but new parameters taken from a
    /// flat vector in canonical layout (edges then nodes).
    pub fn with_params(&self, params: &[f64]) -> Result<IsingModel> {
        let expected = self.edges.len() + self.n;
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut beta = DMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            beta[(i, j)] = params[k];
            beta[(j, i)] = params[k];
        }
        let alpha = DVector::from_iterator(self.n, params[self.edges.len()..].iter().copied());
        IsingModel::new(self.n, self.edges.clone(), beta, alpha)
    }

    /// Replaces the interaction matrix, keeping graph and fields.
    pub fn with_beta(&self, beta: DMatrix<f64>) -> Result<IsingModel> {
        IsingModel::new(self.n, self.edges.clone(), beta, self.alpha.clone())
    }
}

/// Binary matrix marking forbidden entries: `z_ij = 0` on edges, 1 otherwise
/// (diagonal always 1).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphMask {
    z: DMatrix<f64>,
}

impl GraphMask {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut z = DMatrix::from_element(n, n, 1.0);
        for &(i, j) in edges {
            z[(i, j)] = 0.0;
            z[(j, i)] = 0.0;
        }
        Self { z }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.z[(i, j)] == 0.0
    }
}

/// A configuration of ±1 spins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidModel("spins must be ±1".into()));
        }
        Ok(Self { spins })
    }

    /// All spins up.
    pub fn all_plus(n: usize) -> Self {
        Self { spins: vec![1; n] }
    }

    /// Independent uniform ±1 draws.
    pub fn uniform(n: usize, rng: &mut ChaCha12Rng) -> Self {
        let spins = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        Self { spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn set(&mut self, i: usize, s: i8) {
        debug_assert!(s == 1 || s == -1);
        self.spins[i] = s;
    }

    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.spins
    }
}

/// Feature values `f(x)` in canonical layout; all entries are ±1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    edge_count: usize,
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn edge_part(&self) -> &[f64] {
        &self.values[..self.edge_count]
    }

    pub fn node_part(&self) -> &[f64] {
        &self.values[self.edge_count..]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `f(x)` for the model's graph: `x_i x_j` per edge, then `x_i` per node.
pub fn features(m: &IsingModel, x: &SpinConfig) -> Result<FeatureVector> {
    if x.len() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            got: x.len(),
        });
    }
    let mut values = Vec::with_capacity(m.edges().len() + m.n());
    for &(i, j) in m.edges() {
        values.push(f64::from(x.spin(i) * x.spin(j)));
    }
    for i in 0..m.n() {
        values.push(f64::from(x.spin(i)));
    }
    Ok(FeatureVector {
        values,
        edge_count: m.edges().len(),
    })
}

/// The parameter vector θ in canonical layout (edge weights then fields).
pub fn param_vector(m: &IsingModel) -> Vec<f64> {
    let mut theta = Vec::with_capacity(m.edges().len() + m.n());
    for &(i, j) in m.edges() {
        theta.push(m.beta()[(i, j)]);
    }
    theta.extend(m.alpha().iter().copied());
    theta
}

/// Plain dot product with a dimension check.
pub fn dot(theta: &[f64], f: &[f64]) -> Result<f64> {
    if theta.len() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: f.len(),
        });
    }
    Ok(theta.iter().zip(f).map(|(a, b)| a * b).sum())
}

/// Edge set of a `rows × cols` 4-connected grid, nodes numbered row-major.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Recovers `(rows, cols)` if the model's edge set is exactly a row-major
/// 4-connected grid. Returns the factorization with the smallest row count.
pub fn detect_grid_shape(m: &IsingModel) -> Option<(usize, usize)> {
    let n = m.n();
    (1..=n)
        .filter(|r| n % r == 0)
        .find(|&r| grid_edges(r, n / r) == m.edges())
        .map(|r| (r, n / r))
}

fn draw_unif(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn draw_params(
    n: usize,
    edges: &[(usize, usize)],
    d_n: f64,
    d_e: f64,
    interaction: Interaction,
    rng: &mut ChaCha12Rng,
) -> (DMatrix<f64>, DVector<f64>) {
    let alpha = DVector::from_iterator(n, (0..n).map(|_| draw_unif(rng, -d_n, d_n)));
    let mut beta = DMatrix::zeros(n, n);
    for &(i, j) in edges {
        let w = match interaction {
            Interaction::Mixed => draw_unif(rng, -d_e, d_e),
            Interaction::Attractive => draw_unif(rng, 0.0, d_e),
        };
        beta[(i, j)] = w;
        beta[(j, i)] = w;
    }
    (beta, alpha)
}

/// Random 4-connected grid model. Fields `α_i ~ unif(−d_n, d_n)`; edge weights
/// `unif(−d_e, d_e)` (mixed) or `unif(0, d_e)` (attractive). Bit-reproducible
/// for a fixed seed.
pub fn make_grid(
    rows: usize,
    cols: usize,
    d_n: f64,
    d_e: f64,
    interaction: Interaction,
    seed: u64,
) -> IsingModel {
    assert!(rows >= 1 && cols >= 1, "grid must be at least 1×1");
    assert!(d_n >= 0.0 && d_e >= 0.0, "strengths must be nonnegative");
    let n = rows * cols;
    let edges = grid_edges(rows, cols);
    let mut rng = Seed(seed).stream(&[]);
    let (beta, alpha) = draw_params(n, &edges, d_n, d_e, interaction, &mut rng);
    IsingModel::new(n, edges, beta, alpha).expect("grid construction is always valid")
}

/// Erdős–Rényi-style random model: each unordered pair is independently an
/// edge with probability `p_e`; parameters drawn as in [`make_grid`].
pub fn make_random_graph(
    n: usize,
    p_e: f64,
    d_n: f64,
    d_e: f64,
    interaction: Interaction,
    seed: u64,
) -> IsingModel {
    assert!((0.0..=1.0).contains(&p_e), "p_e must be in [0, 1]");
    assert!(d_n >= 0.0 && d_e >= 0.0, "strengths must be nonnegative");
    let mut rng = Seed(seed).stream(&[]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p_e {
                edges.push((i, j));
            }
        }
    }
    let (beta, alpha) = draw_params(n, &edges, d_n, d_e, interaction, &mut rng);
    IsingModel::new(n, edges, beta, alpha).expect("random graph construction is always valid")
}

/// Entrywise `tanh|β_ij|` — a bound on how much the conditional of spin `i`
/// can move when only spin `j` changes. Symmetric, zero diagonal.
pub fn dependency_bound(m: &IsingModel) -> DMatrix<f64> {
    m.beta().map(|b| b.abs().tanh())
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.iter().fold(1.0_f64, |s, &v| s.max(v.abs()));
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return false;
            }
        }
    }
    true
}

/// Largest singular value. Symmetric inputs use an eigendecomposition
/// (max |eigenvalue|); general inputs fall back to a full SVD.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.is_square() && is_symmetric(a) {
        let eig = a.clone().symmetric_eigen();
        eig.eigenvalues.iter().fold(0.0_f64, |s, &v| s.max(v.abs()))
    } else {
        a.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0_f64, |s, &v| s.max(v))
    }
}

/// Sweep-count bound for Gibbs sampling to come within total variation `ε`
/// of stationarity: `n/(1−‖R‖₂)·ln(n/ε)` where `R` is [`dependency_bound`].
/// Returns `+∞` when `‖R‖₂ ≥ 1` (the bound is inapplicable).
pub fn mixing_time_bound(m: &IsingModel, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
    let r = dependency_bound(m);
    let norm = spectral_norm(&r);
    if norm < 1.0 {
        let n = m.n() as f64;
        n / (1.0 - norm) * (n / epsilon).ln()
    } else {
        f64::INFINITY
    }
}
