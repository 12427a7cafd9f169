use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MultiAspectDataset;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Planted-partition generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Objects per type; `m = sizes.len()`.
    pub sizes: Vec<usize>,
    pub clusters: usize,
    /// Value of an in-block entry, in (0, 1].
    pub block_strength: f64,
    /// Off-block entries are `noise * U(0,1)`; in [0, 1).
    pub noise: f64,
    /// Probability that an entry is left empty; in [0, 1).
    pub sparsity: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::contract(msg));
        if self.sizes.len() < 2 {
            return fail(format!("need at least 2 types, got {}", self.sizes.len()));
        }
        if self.clusters < 1 {
            return fail("clusters must be >= 1".into());
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < self.clusters) {
            return fail(format!("type size {n} below cluster count {}", self.clusters));
        }
        if !(self.block_strength > 0.0 && self.block_strength <= 1.0) {
            return fail(format!("block strength {} not in (0, 1]", self.block_strength));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return fail(format!("noise {} not in [0, 1)", self.noise));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return fail(format!("sparsity {} not in [0, 1)", self.sparsity));
        }
        Ok(())
    }
}

/// Generates a dataset with balanced ground-truth clusters on every type and
/// block-structured relations between every pair of types.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiAspectDataset> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.clusters;

    let truth: Vec<Vec<usize>> = spec
        .sizes
        .iter()
        .map(|&n| {
            let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
            labels.shuffle(&mut rng);
            labels
        })
        .collect();

    let m = spec.sizes.len();
    let keep = 1.0 - spec.sparsity;
    let mut relations = BTreeMap::new();
    for h in 0..m {
        for l in h + 1..m {
            let mut triplets = Vec::new();
            for (i, &ci) in truth[h].iter().enumerate() {
                for (j, &cj) in truth[l].iter().enumerate() {
                    if rng.random::<f64>() >= keep {
                        continue;
                    }
                    let v = if ci == cj {
                        spec.block_strength
                    } else {
                        spec.noise * rng.random::<f64>()
                    };
                    if v > 0.0 {
                        triplets.push((i, j, v));
                    }
                }
            }
            relations.insert(
                (h, l),
                SparseMatrix::from_triplets(spec.sizes[h], spec.sizes[l], triplets)?,
            );
        }
    }

    let mut ds = MultiAspectDataset::new(spec.sizes.clone(), relations)?;
    for (h, labels) in truth.into_iter().enumerate() {
        ds = ds.with_truth(h, labels)?;
    }
    Ok(ds)
}
