//! Clustering quality: NMI, best-match accuracy and cosine cohesiveness.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Co-occurrence counts of predicted clusters (rows) and true classes
/// (columns). Label values are compacted in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub n: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0usize);
    }
    for (k, v) in ids.values_mut().enumerate() {
        *v = k;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::contract(format!(
                "label lengths differ: {} predicted, {} true",
                pred.len(),
                truth.len()
            )));
        }
        let (p, np) = compact(pred);
        let (t, nt) = compact(truth);
        let mut counts = vec![vec![0u64; nt]; np];
        for (&a, &b) in p.iter().zip(&t) {
            counts[a][b] += 1;
        }
        let row_totals = counts.iter().map(|r| r.iter().sum()).collect();
        let col_totals = (0..nt).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            row_totals,
            col_totals,
            n: pred.len() as u64,
        })
    }
}

fn entropy(totals: &[u64], n: f64) -> f64 {
    totals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, `I(P;T) / sqrt(H(P) H(T))`, natural logs.
///
/// Two single-cluster partitions score 1; if only one side has zero entropy
/// the score is 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::contract("nmi of empty label sequences"));
    }
    let t = ContingencyTable::new(pred, truth)?;
    let n = t.n as f64;
    let hp = entropy(&t.row_totals, n);
    let ht = entropy(&t.col_totals, n);
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (c * n / (t.row_totals[i] as f64 * t.col_totals[j] as f64)).ln();
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// algorithm with potentials). Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; index 0 is a sentinel column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of objects correctly labelled under the best one-to-one
/// cluster-to-class mapping.
pub fn matched_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::contract("accuracy of empty label sequences"));
    }
    let t = ContingencyTable::new(pred, truth)?;
    let k = t.counts.len().max(t.col_totals.len());
    let cost: Vec<Vec<i64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    -(t.counts
                        .get(i)
                        .and_then(|r| r.get(j))
                        .copied()
                        .unwrap_or(0) as i64)
                })
                .collect()
        })
        .collect();
    let assignment = min_cost_assignment(&cost);
    let correct: i64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| -cost[i][j])
        .sum();
    Ok(correct as f64 / t.n as f64)
}

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Mean pairwise cosine similarity over all ordered pairs of member rows,
/// self-pairs included. Zero vectors contribute 0.
pub fn cluster_cohesiveness(members: &DenseMatrix) -> Result<f64> {
    let n = members.rows();
    if n == 0 {
        return Err(Error::contract("cohesiveness of an empty cluster"));
    }
    let norms: Vec<f64> = members.row_iter().map(|r| dot(r, r).sqrt()).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += cosine(members.row(i), members.row(j), norms[i], norms[j]);
        }
    }
    Ok(total / (n * n) as f64)
}

/// Sum over non-empty clusters of `cohesiveness(c_i) / |c_i|`.
pub fn solution_cohesiveness(labels: &[usize], data: &DenseMatrix) -> Result<f64> {
    if labels.len() != data.rows() {
        return Err(Error::contract(format!(
            "{} labels for {} data rows",
            labels.len(),
            data.rows()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut total = 0.0;
    for members in groups.values() {
        let rows: Vec<&[f64]> = members.iter().map(|&i| data.row(i)).collect();
        let sub = DenseMatrix::from_rows(&rows)?;
        total += cluster_cohesiveness(&sub)? / members.len() as f64;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmi: f64,
    pub accuracy: f64,
    pub cohesiveness: Option<f64>,
}

impl MetricReport {
    pub fn evaluate(pred: &[usize], truth: &[usize], data: Option<&DenseMatrix>) -> Result<Self> {
        Ok(Self {
            nmi: nmi(pred, truth)?,
            accuracy: matched_accuracy(pred, truth)?,
            cohesiveness: data.map(|d| solution_cohesiveness(pred, d)).transpose()?,
        })
    }

    pub const CSV_HEADER: &'static str = "nmi,ac,cohesiveness";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{}",
            self.nmi,
            self.accuracy,
            self.cohesiveness.map(|c| c.to_string()).unwrap_or_default()
        )
    }
}

/// `key=value` lines.
impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nmi={:.6}", self.nmi)?;
        write!(f, "ac={:.6}", self.accuracy)?;
        if let Some(c) = self.cohesiveness {
            write!(f, "\ncohesiveness={c:.6}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&[3, 3], &[1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(matched_accuracy(&[2, 2, 0, 1], &[0, 0, 1, 2]).unwrap(), 1.0);
        assert_eq!(matched_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(matched_accuracy(&[5], &[0]).unwrap(), 1.0);
        // more predicted clusters than classes
        assert_eq!(matched_accuracy(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.5);
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = min_cost_assignment(&cost);
        let total: i64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn cohesiveness_examples() {
        assert_eq!(cluster_cohesiveness(&m(&[&[3.0, 4.0]])).unwrap(), 1.0);
        assert!((cluster_cohesiveness(&m(&[&[1.0, 2.0], &[1.0, 2.0]])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cluster_cohesiveness(&m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap(), 0.5);
        assert_eq!(cluster_cohesiveness(&m(&[&[0.0, 0.0]])).unwrap(), 0.0);

        let single = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        assert_eq!(solution_cohesiveness(&[0, 1], &single).unwrap(), 2.0);
        let pair = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!((solution_cohesiveness(&[4, 4], &pair).unwrap() - 0.5).abs() < 1e-15);
        let composed = m(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0]]);
        let c = solution_cohesiveness(&[0, 0, 1], &composed).unwrap();
        assert!((c - 1.25).abs() < 1e-12);
    }

    #[test]
    fn report_formats() {
        let r = MetricReport::evaluate(&[0, 0, 1, 1], &[1, 1, 0, 0], None).unwrap();
        assert_eq!(r.to_string(), "nmi=1.000000\nac=1.000000");
        assert_eq!(r.csv_row(), "1,1,");
    }
}
