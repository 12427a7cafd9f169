//! Block-coordinate solver for the regularized tri-factorization
//!
//! ```text
//! J = sum_{h<l} ||R_hl - G_h S_hl G_l^T||_F^2 - 2 delta Tr(G_h^T Q_hl G_l)
//!   + sum_h Tr(G_h^T Q_h G_h)
//! ```
//!
//! with `G_h >= 0` and rows of `G_h` summing to one. Each outer iteration
//! sets every `S_hl` to its closed-form least-squares optimum, then updates
//! each `G_h` in ascending order with a square-root multiplicative rule and
//! renormalizes its rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{MultiAspectDataset, TypePair};
use crate::error::{Error, Result};
use crate::graphs::{type_feature_rows, GraphSet, ManifoldAggregates};
use crate::kmeans::{self, kmeans, labels_to_indicator};
use crate::linalg::{pos_neg_split, ridge_inverse, trace_product, DenseMatrix, SparseMatrix};
use crate::metrics::MetricReport;
use crate::seeds;

/// Added to every entry of the k-means indicator before normalization.
/// Exact zeros would stay zero forever under multiplicative updates.
pub const INIT_SMOOTHING: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of clusters `c`.
    pub clusters: usize,
    /// Intra-type (kNN Laplacian) weight.
    pub lambda: f64,
    /// Inter-type (pNN) weight.
    pub delta: f64,
    /// Intra neighborhood size.
    pub k: usize,
    /// Inter neighborhood size.
    pub p: usize,
    pub max_iters: usize,
    /// Stop once the relative change of the total objective drops below this.
    pub rel_tol: f64,
    /// Floor applied to the denominator of the `G` update.
    pub zero_floor: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            lambda: 10.0,
            delta: 1.0,
            k: 5,
            p: 5,
            max_iters: 500,
            rel_tol: 1e-6,
            zero_floor: 1e-12,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Contract(msg));
        if self.clusters < 2 {
            return fail(format!("clusters must be >= 2, got {}", self.clusters));
        }
        if !(self.lambda >= 0.0) || !(self.delta >= 0.0) {
            return fail(format!(
                "lambda and delta must be >= 0, got {} and {}",
                self.lambda, self.delta
            ));
        }
        if self.k == 0 || self.p == 0 {
            return fail("k and p must be >= 1".into());
        }
        if !(self.rel_tol > 0.0) {
            return fail(format!("rel_tol must be > 0, got {}", self.rel_tol));
        }
        if !(self.zero_floor >= 0.0) {
            return fail(format!("zero_floor must be >= 0, got {}", self.zero_floor));
        }
        Ok(())
    }
}

/// Current factors: `G_h` (`n_h x c`) per type and `S_hl` (`c x c`) per
/// related pair `h < l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub g: Vec<DenseMatrix>,
    pub s: BTreeMap<TypePair, DenseMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `sum ||R_hl - G_h S_hl G_l^T||^2`
    pub reconstruction: f64,
    /// `sum Tr(G_h^T Q_h G_h)`; holds both the Laplacian and the pNN degree part.
    pub intra: f64,
    /// `-2 delta sum Tr(G_h^T Q_hl G_l)`
    pub inter: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub state: FactorState,
    /// One entry for the initial state, then one per iteration.
    pub trace: Vec<ObjectiveBreakdown>,
    pub iterations: usize,
    pub converged: bool,
}

/// Inverse of a Gram matrix, retrying with a tiny ridge if it is singular.
fn gram_inverse(gram: &DenseMatrix) -> Result<DenseMatrix> {
    match ridge_inverse(gram, 0.0) {
        Ok(inv) => Ok(inv),
        Err(Error::Singular(_)) => {
            let mean_diag = gram.trace() / gram.rows().max(1) as f64;
            let ridge = 1e-10 * if mean_diag > 0.0 { mean_diag } else { 1.0 };
            ridge_inverse(gram, ridge)
        }
        Err(e) => Err(e),
    }
}

/// Closed-form minimizer of `||R - G_h S G_l^T||^2` over `S`:
/// `(G_h^T G_h)^-1 G_h^T R G_l (G_l^T G_l)^-1`. Entries may be negative.
pub fn update_s(g_h: &DenseMatrix, g_l: &DenseMatrix, r: &SparseMatrix) -> Result<DenseMatrix> {
    if r.shape() != (g_h.rows(), g_l.rows()) || g_h.cols() != g_l.cols() {
        return Err(Error::contract(format!(
            "update_s: R is {:?}, G_h {:?}, G_l {:?}",
            r.shape(),
            g_h.shape(),
            g_l.shape()
        )));
    }
    let inv_h = gram_inverse(&g_h.t_matmul(g_h)?)?;
    let inv_l = gram_inverse(&g_l.t_matmul(g_l)?)?;
    let cross = g_h.t_matmul(&r.mul_dense(g_l)?)?;
    inv_h.matmul(&cross)?.matmul(&inv_l)
}

/// Sets every `S_hl` to its closed-form optimum for the current `G`.
pub fn update_all_s(state: &mut FactorState, dataset: &MultiAspectDataset) -> Result<()> {
    for (&(h, l), r) in dataset.relations() {
        let s = update_s(&state.g[h], &state.g[l], r)?;
        state.s.insert((h, l), s);
    }
    Ok(())
}

/// `A_h` and `B_h` of the `G_h` subproblem.
///
/// ```text
/// A_h = sum_{l>h} (R_hl G_l S_hl^T + delta Q_hl G_l)
///     + sum_{l<h} (R_lh^T G_l S_lh + delta Q_lh^T G_l)
/// B_h = sum_{l>h} S_hl G_l^T G_l S_hl^T + sum_{l<h} S_lh^T G_l^T G_l S_lh
/// ```
///
/// so that the gradient of the objective in `G_h` is
/// `2 (Q_h G_h - A_h + G_h B_h)`.
pub fn compute_ab(
    h: usize,
    state: &FactorState,
    dataset: &MultiAspectDataset,
    aggregates: &ManifoldAggregates,
    delta: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let c = state.g[h].cols();
    let mut a = DenseMatrix::zeros(state.g[h].rows(), c);
    let mut b = DenseMatrix::zeros(c, c);
    for l in dataset.neighbors(h) {
        let g_l = &state.g[l];
        let gram_l = g_l.t_matmul(g_l)?;
        if h < l {
            let r = &dataset.relations()[&(h, l)];
            let s = state.s.get(&(h, l)).ok_or_else(|| missing_s(h, l))?;
            a.add_assign(&r.mul_dense(g_l)?.matmul_t(s)?)?;
            if delta != 0.0 {
                a.axpy(delta, &aggregates.q_pair[&(h, l)].mul_dense(g_l)?)?;
            }
            b.add_assign(&s.matmul(&gram_l)?.matmul_t(s)?)?;
        } else {
            let r = &dataset.relations()[&(l, h)];
            let s = state.s.get(&(l, h)).ok_or_else(|| missing_s(l, h))?;
            a.add_assign(&r.t_mul_dense(g_l)?.matmul(s)?)?;
            if delta != 0.0 {
                a.axpy(delta, &aggregates.q_pair[&(l, h)].t_mul_dense(g_l)?)?;
            }
            b.add_assign(&s.t_matmul(&gram_l)?.matmul(s)?)?;
        }
    }
    Ok((a, b))
}

fn missing_s(h: usize, l: usize) -> Error {
    Error::contract(format!("S_{h}{l} has not been initialized"))
}

/// One multiplicative step:
///
/// ```text
/// G_ij <- G_ij * sqrt( (Q^- G + A^+ + G B^-)_ij / max((Q^+ G + A^- + G B^+)_ij, eps) )
/// ```
pub fn update_g(
    g: &DenseMatrix,
    q: &SparseMatrix,
    a: &DenseMatrix,
    b: &DenseMatrix,
    eps: f64,
) -> Result<DenseMatrix> {
    let (q_pos, q_neg) = q.pos_neg_split();
    let (a_pos, a_neg) = pos_neg_split(a);
    let (b_pos, b_neg) = pos_neg_split(b);

    let mut num = q_neg.mul_dense(g)?;
    num.add_assign(&a_pos)?;
    num.add_assign(&g.matmul(&b_neg)?)?;

    let mut den = q_pos.mul_dense(g)?;
    den.add_assign(&a_neg)?;
    den.add_assign(&g.matmul(&b_pos)?)?;

    let mut out = DenseMatrix::zeros(g.rows(), g.cols());
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let gij = g[(i, j)];
            out[(i, j)] = if gij == 0.0 {
                0.0
            } else {
                gij * (num[(i, j)] / den[(i, j)].max(eps)).sqrt()
            };
        }
    }
    if !out.is_finite() {
        return Err(Error::contract(
            "G update produced a non-finite value; try a larger zero floor",
        ));
    }
    Ok(out)
}

/// Divides every row by its l1 norm; all-zero rows become uniform.
pub fn normalize_g(g: &DenseMatrix) -> DenseMatrix {
    let c = g.cols();
    let mut out = g.clone();
    for i in 0..g.rows() {
        let row = out.row_mut(i);
        let sum: f64 = row.iter().map(|v| v.abs()).sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|v| *v /= sum);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / c as f64);
        }
    }
    out
}

/// `||R - G_h S G_l^T||_F^2`, evaluated entry by entry.
fn residual_sq(r: &SparseMatrix, g_h: &DenseMatrix, s: &DenseMatrix, g_l: &DenseMatrix) -> Result<f64> {
    let gs = g_h.matmul(s)?;
    let mut total = 0.0;
    for i in 0..r.rows() {
        let (idx, vals) = r.row(i);
        let u = gs.row(i);
        let mut p = 0;
        for j in 0..r.cols() {
            let pred: f64 = u.iter().zip(g_l.row(j)).map(|(x, y)| x * y).sum();
            let rij = if p < idx.len() && idx[p] == j {
                p += 1;
                vals[p - 1]
            } else {
                0.0
            };
            let d = rij - pred;
            total += d * d;
        }
    }
    Ok(total)
}

pub fn objective(
    state: &FactorState,
    dataset: &MultiAspectDataset,
    aggregates: &ManifoldAggregates,
    delta: f64,
) -> Result<ObjectiveBreakdown> {
    let mut reconstruction = 0.0;
    let mut inter = 0.0;
    for (&(h, l), r) in dataset.relations() {
        let s = state.s.get(&(h, l)).ok_or_else(|| missing_s(h, l))?;
        reconstruction += residual_sq(r, &state.g[h], s, &state.g[l])?;
        if delta != 0.0 {
            let qg = aggregates.q_pair[&(h, l)].mul_dense(&state.g[l])?;
            inter += trace_product(&state.g[h], &qg)?;
        }
    }
    let inter = -2.0 * delta * inter;
    let mut intra = 0.0;
    for (g, q) in state.g.iter().zip(&aggregates.q) {
        intra += trace_product(g, &q.mul_dense(g)?)?;
    }
    Ok(ObjectiveBreakdown {
        reconstruction,
        intra,
        inter,
        total: reconstruction + intra + inter,
    })
}

/// Gradient of the objective with respect to `G_h`.
pub fn gradient_g(
    h: usize,
    state: &FactorState,
    dataset: &MultiAspectDataset,
    aggregates: &ManifoldAggregates,
    delta: f64,
) -> Result<DenseMatrix> {
    let (a, b) = compute_ab(h, state, dataset, aggregates, delta)?;
    let g = &state.g[h];
    let mut grad = aggregates.q[h].mul_dense(g)?;
    grad.axpy(-1.0, &a)?;
    grad.add_assign(&g.matmul(&b)?)?;
    Ok(grad.scale(2.0))
}

/// Element-wise ratio inside the square root of the `G_h` update; equals
/// one wherever `G_h` is at a fixed point.
pub fn update_ratio(
    h: usize,
    state: &FactorState,
    dataset: &MultiAspectDataset,
    aggregates: &ManifoldAggregates,
    delta: f64,
    eps: f64,
) -> Result<DenseMatrix> {
    let (a, b) = compute_ab(h, state, dataset, aggregates, delta)?;
    let g = &state.g[h];
    let (q_pos, q_neg) = aggregates.q[h].pos_neg_split();
    let (a_pos, a_neg) = pos_neg_split(&a);
    let (b_pos, b_neg) = pos_neg_split(&b);
    let mut num = q_neg.mul_dense(g)?;
    num.add_assign(&a_pos)?;
    num.add_assign(&g.matmul(&b_neg)?)?;
    let mut den = q_pos.mul_dense(g)?;
    den.add_assign(&a_neg)?;
    den.add_assign(&g.matmul(&b_pos)?)?;
    num.zip_map(&den, "ratio", |n, d| n / d.max(eps))
}

/// Ranking term `Y_it = sum_l sum_j (Q_hl)_ij (G_l)_jt` over every type
/// related to `h` (using `Q_lh^T` when `l < h`).
pub fn ranking_term(
    h: usize,
    state: &FactorState,
    dataset: &MultiAspectDataset,
    aggregates: &ManifoldAggregates,
) -> Result<DenseMatrix> {
    let mut y = DenseMatrix::zeros(state.g[h].rows(), state.g[h].cols());
    for l in dataset.neighbors(h) {
        let part = if h < l {
            aggregates.q_pair[&(h, l)].mul_dense(&state.g[l])?
        } else {
            aggregates.q_pair[&(l, h)].t_mul_dense(&state.g[l])?
        };
        y.add_assign(&part)?;
    }
    Ok(y)
}

/// k-means on each type's features, smoothed one-hot `G_h`, then optimal `S`.
pub fn init_factors(dataset: &MultiAspectDataset, config: &SolverConfig) -> Result<FactorState> {
    config.validate()?;
    let c = config.clusters;
    let mut g = Vec::with_capacity(dataset.m());
    for h in 0..dataset.m() {
        let features = type_feature_rows(dataset, h);
        if features.rows() < c {
            return Err(Error::Init(format!(
                "type {h} has {} objects, fewer than {c} clusters",
                features.rows()
            )));
        }
        let seed = seeds::derive(config.seed, seeds::KMEANS_INIT, h as u64);
        let km = kmeans(&features, c, seed, kmeans::DEFAULT_MAX_ITERS)
            .map_err(|e| Error::Init(format!("type {h}: {e}")))?;
        let indicator = labels_to_indicator(&km.labels, c)?;
        g.push(normalize_g(&indicator.map(|v| v + INIT_SMOOTHING)));
    }
    let mut state = FactorState {
        g,
        s: BTreeMap::new(),
    };
    update_all_s(&mut state, dataset)?;
    Ok(state)
}

fn check_participation(dataset: &MultiAspectDataset) -> Result<()> {
    for h in 0..dataset.m() {
        if dataset.neighbors(h).is_empty() {
            return Err(Error::contract(format!(
                "type {h} takes part in no relation"
            )));
        }
    }
    Ok(())
}

/// Builds the graphs, then runs [`solve_with_graphs`].
pub fn solve(dataset: &MultiAspectDataset, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let graphs = GraphSet::build(dataset, config.k, config.p, config.lambda, config.delta)?;
    solve_with_graphs(dataset, &graphs, config)
}

/// Runs the iterations on prebuilt graphs.
pub fn solve_with_graphs(
    dataset: &MultiAspectDataset,
    graphs: &GraphSet,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    check_participation(dataset)?;
    let state = init_factors(dataset, config)?;
    iterate(dataset, graphs, config, state)
}

/// Runs the outer iterations starting from `state`.
pub fn iterate(
    dataset: &MultiAspectDataset,
    graphs: &GraphSet,
    config: &SolverConfig,
    mut state: FactorState,
) -> Result<SolveReport> {
    let agg = &graphs.aggregates;
    let mut trace = vec![objective(&state, dataset, agg, config.delta)?];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        update_all_s(&mut state, dataset)?;
        for h in 0..dataset.m() {
            let (a, b) = compute_ab(h, &state, dataset, agg, config.delta)?;
            let g = update_g(&state.g[h], &agg.q[h], &a, &b, config.zero_floor)?;
            state.g[h] = normalize_g(&g);
        }
        let current = objective(&state, dataset, agg, config.delta)?;
        let previous = trace.last().expect("trace starts non-empty").total;
        trace.push(current);
        let change = (previous - current.total).abs();
        if change <= config.rel_tol * previous.abs() {
            converged = true;
            break;
        }
    }

    Ok(SolveReport {
        state,
        trace,
        iterations,
        converged,
    })
}

/// Hard labels per type from seeded k-means on the rows of each `G_h`.
pub fn extract_labels(state: &FactorState, config: &SolverConfig) -> Result<Vec<Vec<usize>>> {
    state
        .g
        .iter()
        .enumerate()
        .map(|(h, g)| {
            let seed = seeds::derive(config.seed, seeds::KMEANS_EXTRACT, h as u64);
            Ok(kmeans(g, config.clusters, seed, kmeans::DEFAULT_MAX_ITERS)?.labels)
        })
        .collect()
}

/// Labels, solver report and (where ground truth exists) metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSolution {
    pub labels: Vec<Vec<usize>>,
    pub report: SolveReport,
    pub metrics: BTreeMap<usize, MetricReport>,
}

pub fn cluster(dataset: &MultiAspectDataset, config: &SolverConfig) -> Result<ClusterSolution> {
    let graphs = GraphSet::build(dataset, config.k, config.p, config.lambda, config.delta)?;
    cluster_with_graphs(dataset, &graphs, config)
}

pub fn cluster_with_graphs(
    dataset: &MultiAspectDataset,
    graphs: &GraphSet,
    config: &SolverConfig,
) -> Result<ClusterSolution> {
    let report = solve_with_graphs(dataset, graphs, config)?;
    let labels = extract_labels(&report.state, config)?;
    let mut metrics = BTreeMap::new();
    for (&h, truth) in dataset.truth() {
        metrics.insert(h, MetricReport::evaluate(&labels[h], truth, None)?);
    }
    Ok(ClusterSolution {
        labels,
        report,
        metrics,
    })
}
