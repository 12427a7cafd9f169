//! Graph-derived matrices of the regularizer.
//!
//! Per type `h`: a cosine kNN affinity `W_h`, its degree `D_h` and Laplacian
//! `L_h = D_h - W_h`. Per ordered pair `(h, l)`: the pNN affinity `Z_hl`
//! selected directly from the relation values, with row/column degree
//! diagonals. Aggregated into `T_h`, `Q_hl = Z_hl + Z_lh^T` and
//! `Q_h = lambda L_h + delta T_h`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::data::{MultiAspectDataset, TypePair};
use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, DiagMatrix, SparseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct IntraGraph {
    pub type_index: usize,
    pub w: SparseMatrix,
    pub degree: DiagMatrix,
    pub laplacian: SparseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterGraph {
    pub pair: (usize, usize),
    pub z: SparseMatrix,
    pub row_degree: DiagMatrix,
    pub col_degree: DiagMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldAggregates {
    /// `T_h` per type.
    pub t: Vec<DiagMatrix>,
    /// `Q_h = lambda L_h + delta T_h` per type, sparse.
    pub q: Vec<SparseMatrix>,
    /// `Q_hl` for `h < l`.
    pub q_pair: BTreeMap<TypePair, SparseMatrix>,
}

/// Everything graph-derived that the solver needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    pub intra: Vec<IntraGraph>,
    pub inter: BTreeMap<TypePair, InterGraph>,
    pub aggregates: ManifoldAggregates,
}

impl GraphSet {
    pub fn build(
        dataset: &MultiAspectDataset,
        k: usize,
        p: usize,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        let mut intra = Vec::with_capacity(dataset.m());
        for h in 0..dataset.m() {
            let mut g = build_intra_knn(&type_feature_rows(dataset, h), k)?;
            g.type_index = h;
            intra.push(g);
        }
        let mut inter = BTreeMap::new();
        for (h, l) in dataset.pairs() {
            for (a, b) in [(h, l), (l, h)] {
                let r = dataset.relation(a, b).expect("stored pair");
                let mut g = build_inter_pnn(&r, p)?;
                g.pair = (a, b);
                inter.insert((a, b), g);
            }
        }
        let aggregates = assemble_aggregates(dataset.m(), &inter, &intra, lambda, delta)?;
        Ok(Self {
            intra,
            inter,
            aggregates,
        })
    }
}

/// Feature representation of the objects of type `h`: row `i` concatenates
/// row `i` of every `R_hl` (l > h) and column `i` of every `R_lh` (l < h),
/// in ascending `l`.
pub fn type_feature_rows(dataset: &MultiAspectDataset, h: usize) -> DenseMatrix {
    let n = dataset.sizes()[h];
    let parts: Vec<_> = (0..dataset.m())
        .filter(|&l| l != h)
        .filter_map(|l| dataset.relation(h, l))
        .collect();
    let width: usize = parts.iter().map(|r| r.cols()).sum();
    let mut out = DenseMatrix::zeros(n, width);
    let mut offset = 0;
    for r in &parts {
        for (i, j, v) in r.triplets() {
            out[(i, offset + j)] = v;
        }
        offset += r.cols();
    }
    out
}

/// Descending by score, ascending by index on ties.
fn by_score_then_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Keeps the `k` best `(index, score)` candidates.
fn top_k(mut candidates: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, by_score_then_index);
        candidates.truncate(k);
    }
    candidates
}

/// Like [`top_k`] but also keeps every candidate tied with the `k`-th score.
fn top_k_with_ties(mut candidates: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if candidates.len() > k {
        candidates.sort_by(by_score_then_index);
        let cutoff = candidates[k - 1].1;
        let end = candidates[k..]
            .iter()
            .position(|c| c.1 < cutoff)
            .map_or(candidates.len(), |p| k + p);
        candidates.truncate(end);
    }
    candidates
}

/// Symmetric cosine kNN affinity over the rows of `features`.
///
/// `w_ij = cos(x_i, x_j)` when `j` is among the `k` most similar rows to `i`
/// or `i` among those of `j`; zero otherwise. Rows tied with the `k`-th
/// most similar one are all neighbors. `k` larger than `n - 1` is clamped.
/// Zero rows are isolated.
pub fn build_intra_knn(features: &DenseMatrix, k: usize) -> Result<IntraGraph> {
    if k == 0 {
        return Err(Error::contract("intra neighborhood size k must be >= 1"));
    }
    let n = features.rows();
    let k = k.min(n.saturating_sub(1));

    // Unit rows make every similarity a single dot product, so
    // sim(i, j) and sim(j, i) are bitwise equal.
    let mut unit = features.clone();
    for i in 0..n {
        let row = unit.row_mut(i);
        let norm = dot(row, row).sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let zero_row: Vec<bool> = unit.row_iter().map(|r| r.iter().all(|&v| v == 0.0)).collect();

    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    if k > 0 {
        for i in 0..n {
            if zero_row[i] {
                continue;
            }
            let candidates: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i && !zero_row[j])
                .map(|j| (j, dot(unit.row(i), unit.row(j))))
                .collect();
            for (j, s) in top_k_with_ties(candidates, k) {
                if s > 0.0 {
                    edges.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    let mut triplets = Vec::with_capacity(2 * edges.len());
    for &(i, j) in &edges {
        let s = dot(unit.row(i), unit.row(j));
        triplets.push((i, j, s));
        triplets.push((j, i, s));
    }
    let w = SparseMatrix::from_triplets(n, n, triplets)?;
    let (degree, laplacian) = build_laplacian(&w)?;
    Ok(IntraGraph {
        type_index: 0,
        w,
        degree,
        laplacian,
    })
}

/// Degree diagonal and Laplacian `L = D - W` of a symmetric affinity.
pub fn build_laplacian(w: &SparseMatrix) -> Result<(DiagMatrix, SparseMatrix)> {
    if !w.is_symmetric() {
        return Err(Error::contract("Laplacian requires a symmetric affinity matrix"));
    }
    if w.triplets().any(|(_, _, v)| v < 0.0) {
        return Err(Error::contract("Laplacian requires a non-negative affinity matrix"));
    }
    let degree = DiagMatrix::new(w.row_sums());
    let laplacian = degree.to_sparse().linear_combination(1.0, w, -1.0)?;
    Ok((degree, laplacian))
}

/// pNN affinity of a relation matrix, using the relation values themselves
/// as closeness: `z_ij = r_ij` when `r_ij` is among the `p` largest entries
/// of row `i` or among the `p` largest of column `j`. Ties go to the lower
/// index.
pub fn build_inter_pnn(r: &SparseMatrix, p: usize) -> Result<InterGraph> {
    if p == 0 {
        return Err(Error::contract("inter neighborhood size p must be >= 1"));
    }
    if r.triplets().any(|(_, _, v)| v < 0.0) {
        return Err(Error::contract("pNN graph requires a non-negative relation"));
    }
    let (rows, cols) = r.shape();
    let mut keep: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..rows {
        let (idx, vals) = r.row(i);
        let cand = idx.iter().copied().zip(vals.iter().copied()).collect();
        keep.extend(top_k(cand, p).into_iter().map(|(j, _)| (i, j)));
    }
    let rt = r.transpose();
    for j in 0..cols {
        let (idx, vals) = rt.row(j);
        let cand = idx.iter().copied().zip(vals.iter().copied()).collect();
        keep.extend(top_k(cand, p).into_iter().map(|(i, _)| (i, j)));
    }
    let z = SparseMatrix::from_triplets(
        rows,
        cols,
        keep.into_iter().map(|(i, j)| (i, j, r.get(i, j))).collect(),
    )?;
    Ok(InterGraph {
        pair: (0, 1),
        row_degree: DiagMatrix::new(z.row_sums()),
        col_degree: DiagMatrix::new(z.col_sums()),
        z,
    })
}

/// Builds `T_h`, `Q_h` and `Q_hl` from the per-type and per-pair graphs.
///
/// `inter` must hold both orientations of every related pair.
pub fn assemble_aggregates(
    m: usize,
    inter: &BTreeMap<TypePair, InterGraph>,
    intra: &[IntraGraph],
    lambda: f64,
    delta: f64,
) -> Result<ManifoldAggregates> {
    if intra.len() != m {
        return Err(Error::contract(format!(
            "{} intra graphs for {m} types",
            intra.len()
        )));
    }
    if !(lambda >= 0.0 && delta >= 0.0) {
        return Err(Error::contract(format!(
            "lambda and delta must be >= 0, got {lambda} and {delta}"
        )));
    }
    for &(h, l) in inter.keys() {
        if h == l || h >= m || l >= m {
            return Err(Error::contract(format!("invalid inter pair {h}-{l}")));
        }
        if !inter.contains_key(&(l, h)) {
            return Err(Error::contract(format!(
                "inter graph {l}-{h} missing for pair {h}-{l}"
            )));
        }
    }

    let mut t: Vec<DiagMatrix> = intra
        .iter()
        .map(|g| DiagMatrix::zeros(g.w.rows()))
        .collect();
    for (&(h, l), g) in inter {
        t[h] = t[h].add(&g.row_degree)?;
        t[l] = t[l].add(&g.col_degree)?;
    }

    let q = intra
        .iter()
        .zip(&t)
        .map(|(g, th)| {
            g.laplacian
                .linear_combination(lambda, &th.to_sparse(), delta)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut q_pair = BTreeMap::new();
    for (&(h, l), g) in inter {
        if h < l {
            let back = &inter[&(l, h)].z;
            q_pair.insert((h, l), g.z.add(&back.transpose())?);
        }
    }
    Ok(ManifoldAggregates { t, q, q_pair })
}
