use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quorum thresholds for one replica group: `wt` acknowledgements complete a
/// put, `rt` replicas are sampled on a get. Reads and writes intersect as
/// long as `wt + rt > n`; physical timestamps order concurrent writes, so no
/// `2*wt > n` constraint is needed.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct QuorumConfig {
    pub n: usize,
    pub wt: usize,
    pub rt: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuorumError {
    #[error("replica group size must be at least 1")]
    EmptyGroup,
    #[error("invalid quorum config n={n} wt={wt} rt={rt}")]
    Invalid { n: usize, wt: usize, rt: usize },
}

impl QuorumConfig {
    pub fn new(n: usize, wt: usize, rt: usize) -> Result<Self, QuorumError> {
        if n == 0 {
            return Err(QuorumError::EmptyGroup);
        }
        if wt == 0 || wt > n || rt == 0 || rt > n || wt + rt <= n {
            return Err(QuorumError::Invalid { n, wt, rt });
        }
        Ok(QuorumConfig { n, wt, rt })
    }

    /// Majority thresholds for a group of `n`.
    pub fn majority(n: usize) -> Result<Self, QuorumError> {
        quorum_thresholds(n)
    }
}

/// Both thresholds are the majority, ceil((n+1)/2).
pub fn quorum_thresholds(n: usize) -> Result<QuorumConfig, QuorumError> {
    if n == 0 {
        return Err(QuorumError::EmptyGroup);
    }
    let m = n / 2 + 1;
    QuorumConfig::new(n, m, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_examples() {
        assert_eq!(quorum_thresholds(3).unwrap(), QuorumConfig { n: 3, wt: 2, rt: 2 });
        assert_eq!(quorum_thresholds(1).unwrap(), QuorumConfig { n: 1, wt: 1, rt: 1 });
        assert_eq!(quorum_thresholds(5).unwrap(), QuorumConfig { n: 5, wt: 3, rt: 3 });
        assert_eq!(quorum_thresholds(4).unwrap(), QuorumConfig { n: 4, wt: 3, rt: 3 });
    }

    #[test]
    fn zero_group_is_rejected() {
        assert_eq!(quorum_thresholds(0).unwrap_err(), QuorumError::EmptyGroup);
    }

    #[test]
    fn majority_matches_ceiling_formula_and_intersects() {
        for n in 1..=64usize {
            let q = quorum_thresholds(n).unwrap();
            let ceil = (n + 1).div_ceil(2);
            assert_eq!(q.wt, ceil, "n={n}");
            assert_eq!(q.rt, ceil, "n={n}");
            assert!(q.wt + q.rt > n, "n={n}");
        }
    }
}
