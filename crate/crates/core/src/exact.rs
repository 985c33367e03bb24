//! Ground-truth inference: brute-force enumeration for small models and
//! variable elimination for bounded-width graphs, plus the exact
//! KL-divergence between two models.
//!
//! All accumulation is done with per-factor scaling (log-domain max
//! subtraction) so that strongly coupled models do not overflow doubles.

use nalgebra::DVector;

use crate::model::{IsingModel, SpinConfig};
use crate::{Error, Result};

/// Enumeration refuses models larger than this.
pub const ENUMERATION_NODE_LIMIT: usize = 20;
/// Variable elimination refuses orders with larger induced width.
pub const WIDTH_LIMIT: usize = 12;

/// Exact marginals, pairwise moments (aligned with the model's edge list) and
/// log-partition value.
#[derive(Clone, Debug)]
pub struct ExactMarginals {
    /// `P(x_i = +1)` per node.
    pub p_plus: Vec<f64>,
    /// `E[x_i x_j]` per declared edge, in edge-list order.
    pub edge_moments: Vec<f64>,
    /// `A(θ) = ln Σ_x exp(θ·f(x))`.
    pub log_partition: f64,
}

impl ExactMarginals {
    /// The mean parameter vector `μ(θ) = ∇A(θ)` in canonical layout:
    /// edge moments, then node means `2p−1`.
    pub fn mean_vector(&self) -> Vec<f64> {
        self.edge_moments
            .iter()
            .copied()
            .chain(self.p_plus.iter().map(|p| 2.0 * p - 1.0))
            .collect()
    }
}

pub(crate) struct ExactStats {
    pub p_plus: Vec<f64>,
    pub pair_moments: Vec<f64>,
    pub log_partition: f64,
}

/// Walks all 2ⁿ configurations in Gray-code order, calling `visit` with the
/// energy of each configuration.
fn gray_walk(m: &IsingModel, mut visit: impl FnMut(f64, &SpinConfig)) {
    let n = m.n();
    let mut x = SpinConfig::new(vec![-1; n]).expect("valid spins");
    let mut e = m.energy(&x);
    visit(e, &x);
    for t in 1u64..(1u64 << n) {
        let i = t.trailing_zeros() as usize;
        // Flipping spin i changes the energy by −2·x_i·(α_i + Σ_j β_ij x_j).
        e -= 2.0 * f64::from(x.spin(i)) * m.local_field(&x, i);
        x.flip(i);
        visit(e, &x);
    }
}

fn enumerate_stats(m: &IsingModel, pairs: &[(usize, usize)]) -> Result<ExactStats> {
    let n = m.n();
    if n > ENUMERATION_NODE_LIMIT {
        return Err(Error::TooManyNodes {
            n,
            limit: ENUMERATION_NODE_LIMIT,
        });
    }
    let mut e_max = f64::NEG_INFINITY;
    gray_walk(m, |e, _| e_max = e_max.max(e));

    let mut z = 0.0;
    let mut node_sums = vec![0.0; n];
    let mut pair_sums = vec![0.0; pairs.len()];
    gray_walk(m, |e, x| {
        let w = (e - e_max).exp();
        z += w;
        for i in 0..n {
            node_sums[i] += w * f64::from(x.spin(i));
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            pair_sums[k] += w * f64::from(x.spin(i) * x.spin(j));
        }
    });

    Ok(ExactStats {
        p_plus: node_sums.iter().map(|s| 0.5 * (1.0 + s / z)).collect(),
        pair_moments: pair_sums.iter().map(|s| s / z).collect(),
        log_partition: e_max + z.ln(),
    })
}

/// Sums over all 2ⁿ configurations. Refuses `n > 20`.
pub fn enumerate_exact(m: &IsingModel) -> Result<ExactMarginals> {
    let stats = enumerate_stats(m, m.edges())?;
    Ok(ExactMarginals {
        p_plus: stats.p_plus,
        edge_moments: stats.pair_moments,
        log_partition: stats.log_partition,
    })
}

/// A table over a sorted scope of binary variables, stored with a separate
/// log-scale so products of many strong factors stay in range.
#[derive(Clone, Debug)]
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
    log_scale: f64,
}

impl Factor {
    fn node(i: usize, alpha: f64) -> Self {
        let mut f = Factor {
            vars: vec![i],
            table: vec![(-alpha).exp(), alpha.exp()],
            log_scale: 0.0,
        };
        f.rescale();
        f
    }

    fn edge(i: usize, j: usize, beta: f64) -> Self {
        debug_assert!(i < j);
        let agree = beta.exp();
        let disagree = (-beta).exp();
        // bit 0 ↔ var i, bit 1 ↔ var j; bit set means spin +1
        let mut f = Factor {
            vars: vec![i, j],
            table: vec![agree, disagree, disagree, agree],
            log_scale: 0.0,
        };
        f.rescale();
        f
    }

    fn constant() -> Self {
        Factor {
            vars: vec![],
            table: vec![1.0],
            log_scale: 0.0,
        }
    }

    fn rescale(&mut self) {
        let m = self.table.iter().cloned().fold(f64::MIN, f64::max);
        if m > 0.0 && m.is_finite() {
            for v in &mut self.table {
                *v /= m;
            }
            self.log_scale += m.ln();
        }
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        // For every union variable, its bit position in each operand (if any).
        let pos = |f: &Factor, v: usize| f.vars.iter().position(|&u| u == v);
        let map_a: Vec<Option<usize>> = vars.iter().map(|&v| pos(self, v)).collect();
        let map_b: Vec<Option<usize>> = vars.iter().map(|&v| pos(other, v)).collect();
        let mut table = vec![0.0; 1 << vars.len()];
        for (idx, slot) in table.iter_mut().enumerate() {
            let mut ia = 0usize;
            let mut ib = 0usize;
            for (k, (a, b)) in map_a.iter().zip(&map_b).enumerate() {
                let bit = (idx >> k) & 1;
                if let Some(p) = a {
                    ia |= bit << p;
                }
                if let Some(p) = b {
                    ib |= bit << p;
                }
            }
            *slot = self.table[ia] * other.table[ib];
        }
        Factor {
            vars,
            table,
            log_scale: self.log_scale + other.log_scale,
        }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let p = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable in scope");
        let vars: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        let mut table = vec![0.0; 1 << vars.len()];
        let low_mask = (1usize << p) - 1;
        for (idx, slot) in table.iter_mut().enumerate() {
            let base = (idx & low_mask) | ((idx & !low_mask) << 1);
            *slot = self.table[base] + self.table[base | (1 << p)];
        }
        Factor {
            vars,
            table,
            log_scale: self.log_scale,
        }
    }
}

fn validate_order(n: usize, order: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: order.len(),
        });
    }
    for &v in order {
        if v >= n || seen[v] {
            return Err(Error::InvalidModel(format!(
                "order is not a permutation (offending entry {v})"
            )));
        }
        seen[v] = true;
    }
    Ok(())
}

/// The induced width of an elimination order: the largest number of live
/// neighbors any node has at the moment it is eliminated.
pub fn induced_width(n: usize, edges: &[(usize, usize)], order: &[usize]) -> usize {
    let mut adj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for &(i, j) in edges {
        adj[i].insert(j);
        adj[j].insert(i);
    }
    let mut width = 0;
    let mut eliminated = vec![false; n];
    for &v in order {
        let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !eliminated[u]).collect();
        width = width.max(nbrs.len());
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        eliminated[v] = true;
    }
    width
}

/// Min-degree elimination order (ties broken toward the lowest index).
pub fn greedy_order(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for &(i, j) in edges {
        adj[i].insert(j);
        adj[j].insert(i);
    }
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| adj[v].iter().filter(|&&u| !eliminated[u]).count())
            .expect("nodes remain");
        let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !eliminated[u]).collect();
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        eliminated[v] = true;
        order.push(v);
    }
    order
}

/// Eliminates every variable not in `keep`, returning the unnormalized joint
/// factor over `keep`.
fn run_elimination(m: &IsingModel, order: &[usize], keep: &[usize]) -> Factor {
    let mut factors: Vec<Factor> = Vec::with_capacity(m.n() + m.edges().len());
    for i in 0..m.n() {
        factors.push(Factor::node(i, m.alpha()[i]));
    }
    for &(i, j) in m.edges() {
        factors.push(Factor::edge(i, j, m.beta()[(i, j)]));
    }
    for &v in order {
        if keep.contains(&v) {
            continue;
        }
        let (mut bucket, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        let mut combined = bucket.pop().unwrap_or_else(Factor::constant);
        for f in bucket {
            combined = combined.product(&f);
        }
        let mut summed = combined.sum_out(v);
        summed.rescale();
        factors.push(summed);
    }
    let mut joint = Factor::constant();
    for f in factors {
        joint = joint.product(&f);
    }
    joint
}

fn eliminate_stats(
    m: &IsingModel,
    order: &[usize],
    pairs: &[(usize, usize)],
) -> Result<ExactStats> {
    validate_order(m.n(), order)?;
    let width = induced_width(m.n(), m.edges(), order);
    if width > WIDTH_LIMIT {
        return Err(Error::WidthTooLarge {
            width,
            limit: WIDTH_LIMIT,
        });
    }

    let z_factor = run_elimination(m, order, &[]);
    let log_partition = z_factor.table[0].ln() + z_factor.log_scale;

    let mut p_plus = Vec::with_capacity(m.n());
    for i in 0..m.n() {
        let f = run_elimination(m, order, &[i]);
        debug_assert_eq!(f.vars, vec![i]);
        p_plus.push(f.table[1] / (f.table[0] + f.table[1]));
    }

    let mut pair_moments = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let f = run_elimination(m, order, &[i, j]);
        debug_assert_eq!(f.vars, vec![i.min(j), j.max(i)]);
        let t = &f.table;
        let total: f64 = t.iter().sum();
        pair_moments.push((t[0] - t[1] - t[2] + t[3]) / total);
    }

    Ok(ExactStats {
        p_plus,
        pair_moments,
        log_partition,
    })
}

/// Variable elimination along `order`. Agrees with [`enumerate_exact`] on the
/// overlapping domain; refuses orders of induced width above 12.
pub fn eliminate_exact(m: &IsingModel, order: &[usize]) -> Result<ExactMarginals> {
    let stats = eliminate_stats(m, order, m.edges())?;
    Ok(ExactMarginals {
        p_plus: stats.p_plus,
        edge_moments: stats.pair_moments,
        log_partition: stats.log_partition,
    })
}

/// Picks a route automatically: elimination along a min-degree order when its
/// width allows, enumeration otherwise.
pub(crate) fn auto_stats(m: &IsingModel, pairs: &[(usize, usize)]) -> Result<ExactStats> {
    let order = greedy_order(m.n(), m.edges());
    if induced_width(m.n(), m.edges(), &order) <= WIDTH_LIMIT {
        eliminate_stats(m, &order, pairs)
    } else {
        enumerate_stats(m, pairs)
    }
}

/// Exact marginals via whichever route is tractable.
pub fn exact_marginals(m: &IsingModel) -> Result<ExactMarginals> {
    let stats = auto_stats(m, m.edges())?;
    Ok(ExactMarginals {
        p_plus: stats.p_plus,
        edge_moments: stats.pair_moments,
        log_partition: stats.log_partition,
    })
}

/// `μ(θ) = ∇A(θ)` in the model's canonical layout.
pub fn mean_parameters(m: &IsingModel) -> Result<Vec<f64>> {
    let stats = auto_stats(m, m.edges())?;
    Ok(stats
        .pair_moments
        .iter()
        .copied()
        .chain(stats.p_plus.iter().map(|p| 2.0 * p - 1.0))
        .collect())
}

/// `A(θ)` alone.
pub fn log_partition(m: &IsingModel) -> Result<f64> {
    Ok(auto_stats(m, &[])?.log_partition)
}

/// `KL(θ‖ψ) = (θ−ψ)·μ(θ) + A(ψ) − A(θ)`.
///
/// The two models may have different edge sets; missing edges count as zero
/// weight.
pub fn exact_kl(theta: &IsingModel, psi: &IsingModel) -> Result<f64> {
    if theta.n() != psi.n() {
        return Err(Error::DimensionMismatch {
            expected: theta.n(),
            got: psi.n(),
        });
    }
    let mut pairs: Vec<(usize, usize)> =
        theta.edges().iter().chain(psi.edges()).copied().collect();
    pairs.sort_unstable();
    pairs.dedup();

    let stats = auto_stats(theta, &pairs)?;
    let a_psi = log_partition(psi)?;

    let mut dot = 0.0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        dot += (theta.beta()[(i, j)] - psi.beta()[(i, j)]) * stats.pair_moments[k];
    }
    let d_alpha: DVector<f64> = theta.alpha() - psi.alpha();
    for i in 0..theta.n() {
        dot += d_alpha[i] * (2.0 * stats.p_plus[i] - 1.0);
    }
    Ok(dot + a_psi - stats.log_partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_grid, make_random_graph, param_vector, Interaction};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn single_node(alpha: f64) -> IsingModel {
        IsingModel::new(
            1,
            vec![],
            DMatrix::zeros(1, 1),
            DVector::from_element(1, alpha),
        )
        .unwrap()
    }

    fn pair_model(beta: f64, alpha: (f64, f64)) -> IsingModel {
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = beta;
        b[(1, 0)] = beta;
        IsingModel::new(2, vec![(0, 1)], b, DVector::from_vec(vec![alpha.0, alpha.1])).unwrap()
    }

    #[test]
    fn single_node_enumeration() {
        let free = enumerate_exact(&single_node(0.0)).unwrap();
        assert_relative_eq!(free.p_plus[0], 0.5);
        assert_relative_eq!(free.log_partition, 2.0_f64.ln());

        let biased = enumerate_exact(&single_node(1.0)).unwrap();
        // P(+) = e¹/(e¹+e⁻¹), the logistic of 2α
        assert_relative_eq!(biased.p_plus[0], 0.880797, epsilon = 1e-6);
        assert_relative_eq!(
            biased.log_partition,
            (1.0_f64.exp() + (-1.0_f64).exp()).ln()
        );
    }

    #[test]
    fn pair_moment_matches_four_term_sum() {
        // Oracle: the 4-configuration sum done by hand.
        let b: f64 = 0.5;
        let z = 2.0 * b.exp() + 2.0 * (-b).exp();
        let expected = (2.0 * b.exp() - 2.0 * (-b).exp()) / z;
        let m = pair_model(b, (0.0, 0.0));
        let ex = enumerate_exact(&m).unwrap();
        assert_relative_eq!(ex.edge_moments[0], expected, epsilon = 1e-12);
        assert_relative_eq!(expected, b.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn enumeration_refuses_large_models() {
        let m = make_random_graph(21, 0.1, 1.0, 1.0, Interaction::Mixed, 0);
        assert!(matches!(
            enumerate_exact(&m),
            Err(Error::TooManyNodes { .. })
        ));
    }

    #[test]
    fn elimination_matches_enumeration_on_grids() {
        for (rows, cols, seed) in [(3, 3, 1u64), (4, 4, 2), (2, 8, 3), (3, 5, 4)] {
            let m = make_grid(rows, cols, 1.0, 1.5, Interaction::Mixed, seed);
            let order: Vec<usize> = (0..m.n()).collect();
            let by_ve = eliminate_exact(&m, &order).unwrap();
            let by_enum = enumerate_exact(&m).unwrap();
            for i in 0..m.n() {
                assert_relative_eq!(by_ve.p_plus[i], by_enum.p_plus[i], epsilon = 1e-10);
            }
            for k in 0..m.edges().len() {
                assert_relative_eq!(
                    by_ve.edge_moments[k],
                    by_enum.edge_moments[k],
                    epsilon = 1e-10
                );
            }
            assert_relative_eq!(by_ve.log_partition, by_enum.log_partition, epsilon = 1e-10);
        }
    }

    #[test]
    fn free_grid_marginals_are_uniform() {
        let m = make_grid(8, 8, 0.0, 0.0, Interaction::Mixed, 0);
        let order: Vec<usize> = (0..64).collect();
        let ex = eliminate_exact(&m, &order).unwrap();
        for p in ex.p_plus {
            assert_relative_eq!(p, 0.5, epsilon = 1e-12);
        }
        assert_relative_eq!(ex.log_partition, 64.0 * 2.0_f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn chain_moment_is_tanh_beta() {
        // Transfer-matrix result for a zero-field chain: E[x_i x_{i+1}] = tanh β.
        let mut b = DMatrix::zeros(3, 3);
        for (i, j) in [(0usize, 1usize), (1, 2)] {
            b[(i, j)] = 1.0;
            b[(j, i)] = 1.0;
        }
        let m = IsingModel::new(3, vec![(0, 1), (1, 2)], b, DVector::zeros(3)).unwrap();
        let ex = eliminate_exact(&m, &[0, 1, 2]).unwrap();
        assert_relative_eq!(ex.edge_moments[0], 1.0_f64.tanh(), epsilon = 1e-12);
        assert_relative_eq!(ex.edge_moments[1], 1.0_f64.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn strong_couplings_do_not_overflow() {
        let m = make_grid(8, 8, 1.0, 4.0, Interaction::Attractive, 9);
        let order: Vec<usize> = (0..64).collect();
        let ex = eliminate_exact(&m, &order).unwrap();
        assert!(ex.log_partition.is_finite());
        assert!(ex.p_plus.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn width_guard_trips() {
        let m = make_random_graph(16, 1.0, 1.0, 1.0, Interaction::Mixed, 0);
        let order: Vec<usize> = (0..16).collect();
        assert!(matches!(
            eliminate_exact(&m, &order),
            Err(Error::WidthTooLarge { .. })
        ));
    }

    #[test]
    fn kl_of_identical_models_is_zero() {
        let m = make_random_graph(6, 0.5, 1.0, 2.0, Interaction::Mixed, 7);
        assert_eq!(exact_kl(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn kl_is_nonnegative_on_random_pairs() {
        for seed in 0..1000 {
            let a = make_random_graph(6, 0.5, 1.0, 1.5, Interaction::Mixed, seed);
            let b = make_random_graph(6, 0.5, 1.0, 1.5, Interaction::Mixed, seed + 5000);
            assert!(exact_kl(&a, &b).unwrap() > -1e-12, "seed {seed}");
        }
    }

    #[test]
    fn single_node_kl_matches_two_term_sum() {
        let theta = single_node(1.0);
        let psi = single_node(0.0);
        let p = 2.0_f64.exp() / (2.0_f64.exp() + 1.0); // σ(2)
        let expected = p * (p / 0.5).ln() + (1.0 - p) * ((1.0 - p) / 0.5).ln();
        assert_relative_eq!(exact_kl(&theta, &psi).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn mean_vector_matches_log_partition_gradient() {
        // Central differences of A(θ) against μ(θ), h = 1e−5.
        let h = 1e-5;
        for seed in [1u64, 2, 3] {
            let m = make_random_graph(6, 0.5, 1.0, 1.5, Interaction::Mixed, seed);
            let mu = mean_parameters(&m).unwrap();
            let theta = param_vector(&m);
            for k in 0..theta.len() {
                let mut up = theta.clone();
                up[k] += h;
                let mut dn = theta.clone();
                dn[k] -= h;
                let fd = (log_partition(&m.with_params(&up).unwrap()).unwrap()
                    - log_partition(&m.with_params(&dn).unwrap()).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(fd, mu[k], max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn greedy_order_width_on_structured_graphs() {
        let chain = make_grid(1, 10, 1.0, 1.0, Interaction::Mixed, 0);
        let order = greedy_order(10, chain.edges());
        assert_eq!(induced_width(10, chain.edges(), &order), 1);

        let grid = make_grid(4, 4, 1.0, 1.0, Interaction::Mixed, 0);
        let order = greedy_order(16, grid.edges());
        assert!(induced_width(16, grid.edges(), &order) <= 5);
    }
}
