//! Numeric knobs for the constants the algorithm leaves as "large" or "small".
//!
//! Every bucket count, round count and sample count in the pipeline is a formula
//! in (k0, k1, delta, p) times one of these scales. [`Tuning::paper`] uses the
//! formulas as stated; [`Tuning::desk`] shrinks them so that laptop-sized inputs
//! (n around 2^14..2^20) are read only partially.

use serde::{Deserialize, Serialize};

use crate::filters::{order_for, DEFAULT_WIDTH_CONSTANT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    /// C in B' = 8 C B for hashing filters.
    pub filter_width: f64,
    /// F = scale * ceil(log2(1/delta)) for hashing filters.
    pub hash_order_scale: f64,
    /// Multiplies 4 k0 / delta^2.
    pub energy_bucket_scale: f64,
    /// Multiplies the 10 log2(1/p) energy/budget rounds of the locator.
    pub energy_rounds_scale: f64,
    /// Multiplies the (10/delta) k0 log2(1/p) budget draws.
    pub budget_sample_scale: f64,
    /// Budgets are `budget_unit * 2^q`.
    pub budget_unit: usize,
    /// Outer decoding trials: c1 log2(2/p).
    pub c1: f64,
    /// Reduced bucket count per unit of budget.
    pub c2: f64,
    /// Phase-test pairs: c3 log2 log2 m.
    pub c3: f64,
    /// Digit base for location decoding; `None` uses 2^floor(log2 log2 m / 2).
    pub digit_base: Option<usize>,
    /// Multiplies 160 k0 k1 / delta.
    pub prune_bucket_scale: f64,
    /// Multiplies 10 log2(1/(delta p)).
    pub prune_rounds_scale: f64,
    /// Multiplies 1200 k0 k1 / delta.
    pub estimate_bucket_scale: f64,
    /// Multiplies 10 log2(2/p).
    pub estimate_rounds_scale: f64,
    /// Highest budget level drawn; None keeps the full range.
    pub max_budget_level: Option<usize>,
    /// Extra factor on the bucket and draw counts of the clean-up pass.
    pub cleanup_scale: f64,
}

impl Default for Tuning {
    fn default() -> Self {
        Self::paper()
    }
}

fn ceil_at_least_one(x: f64) -> usize {
    (x.ceil() as usize).max(1)
}

/// Smallest power of two >= x, clamped to [2, len / 2].
pub fn pow2_buckets(x: f64, len: usize) -> usize {
    let cap = (len / 2).max(2);
    let want = x.ceil().max(2.0);
    if want >= cap as f64 {
        return cap;
    }
    (want as usize).next_power_of_two().min(cap)
}

impl Tuning {
    pub fn paper() -> Self {
        Self {
            filter_width: DEFAULT_WIDTH_CONSTANT,
            hash_order_scale: 10.0,
            energy_bucket_scale: 1.0,
            energy_rounds_scale: 1.0,
            budget_sample_scale: 1.0,
            budget_unit: 10,
            c1: 4.0,
            c2: 8.0,
            c3: 8.0,
            digit_base: None,
            prune_bucket_scale: 1.0,
            prune_rounds_scale: 1.0,
            estimate_bucket_scale: 1.0,
            estimate_rounds_scale: 1.0,
            max_budget_level: None,
            cleanup_scale: 1.0,
        }
    }

    pub fn desk() -> Self {
        Self {
            filter_width: 0.25,
            hash_order_scale: 0.2,
            energy_bucket_scale: 2e-4,
            energy_rounds_scale: 0.005,
            budget_sample_scale: 2e-4,
            budget_unit: 10,
            c1: 0.06,
            c2: 0.4,
            c3: 0.8,
            digit_base: Some(128),
            prune_bucket_scale: 1e-3,
            prune_rounds_scale: 0.01,
            estimate_bucket_scale: 2.7e-4,
            estimate_rounds_scale: 0.014,
            max_budget_level: Some(4),
            cleanup_scale: 1.0 / 16.0,
        }
    }

    /// Copy with the clean-up factor folded into the bucket and draw scales.
    pub fn for_cleanup(&self) -> Self {
        let c = self.cleanup_scale;
        Self {
            energy_bucket_scale: self.energy_bucket_scale * c,
            budget_sample_scale: self.budget_sample_scale * c,
            prune_bucket_scale: self.prune_bucket_scale * c,
            estimate_bucket_scale: self.estimate_bucket_scale * c,
            ..self.clone()
        }
    }

    pub fn hash_order(&self, delta: f64) -> usize {
        order_for(delta, self.hash_order_scale)
    }

    pub fn energy_buckets(&self, k0: usize, delta: f64, m: usize) -> usize {
        pow2_buckets(
            self.energy_bucket_scale * 4.0 * k0 as f64 / (delta * delta),
            m,
        )
    }

    pub fn energy_rounds(&self, p: f64) -> usize {
        ceil_at_least_one(self.energy_rounds_scale * 10.0 * (1.0 / p).log2())
    }

    pub fn budget_levels(&self, k0: usize, delta: f64) -> usize {
        let q = crate::location::budget_levels(k0, delta);
        self.max_budget_level.map_or(q, |cap| q.min(cap.max(1)))
    }

    pub fn budget_samples(&self, k0: usize, delta: f64, p: f64) -> usize {
        ceil_at_least_one(self.budget_sample_scale * 10.0 / delta * k0 as f64 * (1.0 / p).log2())
    }

    pub fn locate_trials(&self, p: f64) -> usize {
        ceil_at_least_one(self.c1 * (2.0 / p).log2())
    }

    pub fn phase_pairs(&self, m: usize) -> usize {
        let ll = (m as f64).log2().max(2.0).log2();
        ceil_at_least_one(self.c3 * ll)
    }

    pub fn reduced_buckets(&self, budget: usize, m: usize) -> usize {
        if budget == 0 {
            0
        } else {
            pow2_buckets(self.c2 * budget as f64, m)
        }
    }

    pub fn prune_buckets(&self, k0: usize, k1: usize, delta: f64, n: usize) -> usize {
        pow2_buckets(
            self.prune_bucket_scale * 160.0 * (k0 * k1) as f64 / delta,
            n,
        )
    }

    pub fn prune_rounds(&self, delta: f64, p: f64) -> usize {
        ceil_at_least_one(self.prune_rounds_scale * 10.0 * (1.0 / (delta * p)).log2())
    }

    pub fn estimate_buckets(&self, k0: usize, k1: usize, delta: f64, n: usize) -> usize {
        pow2_buckets(
            self.estimate_bucket_scale * 1200.0 * (k0 * k1) as f64 / delta,
            n,
        )
    }

    pub fn estimate_rounds(&self, p: f64) -> usize {
        ceil_at_least_one(self.estimate_rounds_scale * 10.0 * (2.0 / p).log2())
    }
}
