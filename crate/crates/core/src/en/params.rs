use serde::{Deserialize, Serialize};

use crate::func::FunctionSpec;
use crate::world::{ErrorSet, FakingSet, LeakageSelector};

/// Required number of analyst authorizations as a function of how many users
/// have shared exposure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// `ceil(n / 2)`
    #[default]
    Majority,
    /// A constant, capped at `n`.
    Fixed(u64),
}

impl ThresholdPolicy {
    pub fn required(&self, n: usize) -> u64 {
        let n = n as u64;
        match *self {
            Self::Majority => n.div_ceil(2),
            Self::Fixed(k) => k.min(n),
        }
    }
}

/// Parameters of the default risk estimator: the number of ticks in the last
/// `tau` during which the user was within `d_max` meters of someone who has
/// shared exposure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub d_max: f64,
    pub tau: u64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            d_max: 2.0,
            tau: 14 * 24,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.d_max.is_nan() || self.d_max <= 0.0 || self.tau < 1 {
            return Err(format!(
                "risk parameters out of range: d_max {}, tau {}",
                self.d_max, self.tau
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnParams {
    pub risk: RiskParams,
    pub threshold: ThresholdPolicy,
    pub errors: ErrorSet,
    pub faking: FakingSet,
    pub leakage: LeakageSelector,
    /// Analysis functions an analyst may register for.
    pub analyses: Vec<FunctionSpec>,
}

impl EnParams {
    pub fn allows(&self, alpha: &FunctionSpec) -> bool {
        self.analyses.contains(alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn majority_values() {
        let k: Vec<u64> = (0..6)
            .map(|n| ThresholdPolicy::Majority.required(n))
            .collect();
        assert_eq!(k, [0, 1, 1, 2, 2, 3]);
        assert_eq!(ThresholdPolicy::Fixed(3).required(2), 2);
    }

    proptest! {
        #[test]
        fn policy_within_bounds(n in 0usize..10_000, k in 0u64..20_000) {
            for p in [ThresholdPolicy::Majority, ThresholdPolicy::Fixed(k)] {
                prop_assert!(p.required(n) <= n as u64);
                prop_assert!(p.required(n) <= p.required(n + 1));
            }
        }
    }
}
