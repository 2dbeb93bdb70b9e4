use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fractions for the first training set, the second training set and the
/// test set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fractions: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(fractions: [f64; 3], seed: u64) -> Self {
        Self { fractions, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::Config(format!(
                "split fractions must be positive, got {:?}",
                self.fractions
            )));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {total}"
            )));
        }
        Ok(())
    }
}

/// Seeded permutation of `0..n` cut into three contiguous parts.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::Config(format!("cannot split {n} items three ways")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let [a, b, _] = spec.fractions;
    let cut1 = (a * n as f64).round() as usize;
    let cut2 = (((a + b) * n as f64).round() as usize).min(n);
    if cut1 == 0 || cut2 <= cut1 || cut2 >= n {
        return Err(Error::Config(format!(
            "fractions {:?} leave an empty part for {n} items",
            spec.fractions
        )));
    }
    let test = idx.split_off(cut2);
    let second = idx.split_off(cut1);
    Ok([idx, second, test])
}

/// Splits `items` per [`split_indices`].
pub fn split<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let [a, b, c] = split_indices(items.len(), spec)?;
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| items[i].clone()).collect();
    Ok((pick(a), pick(b), pick(c)))
}
