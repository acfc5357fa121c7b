use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::genvar::{fnv1a64, splitmix64_next};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let r = SplitRatios { train, val, test };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(DatasetError::BadRatios(format!("split ratios must be positive, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadRatios(format!("split ratios must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` records: floors for val and test,
    /// the remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = (n as f64 * self.val).floor() as usize;
        let test = (n as f64 * self.test).floor() as usize;
        (n - val - test, val, test)
    }
}

/// Ordering key of a record within the split permutation.
pub fn split_key(record_id: &str, seed: u64) -> u64 {
    splitmix64_next(fnv1a64(record_id) ^ seed)
}

/// Assigns each id (in input order) to a partition. Records are ranked by
/// [`split_key`]; the first `train` ranks go to train, then val, then test.
/// The result depends only on the id set, not on its order.
pub fn split<S: AsRef<str>>(record_ids: &[S], ratios: SplitRatios, seed: u64) -> Result<Vec<Partition>, DatasetError> {
    ratios.check()?;
    let n = record_ids.len();
    let (n_train, n_val, _) = ratios.sizes(n);
    let mut order: Vec<(u64, &str, usize)> =
        record_ids.iter().enumerate().map(|(i, id)| (split_key(id.as_ref(), seed), id.as_ref(), i)).collect();
    order.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out = vec![Partition::Train; n];
    for (rank, &(_, _, i)) in order.iter().enumerate() {
        out[i] = if rank < n_train {
            Partition::Train
        } else if rank < n_train + n_val {
            Partition::Val
        } else {
            Partition::Test
        };
    }
    Ok(out)
}
