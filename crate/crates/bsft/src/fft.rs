//! Power-of-two FFT plans on top of `rustfft`, cached per length.
//!
//! `forward` and `inverse` are unnormalized; `dft` and `idft` in [`crate::signal`]
//! apply the 1/n convention on top of these.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

pub struct FftPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(invalid(format!("length {n} is not a power of two")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In place: a_k <- sum_t a_t e^{-2 pi i k t / n}.
    pub fn forward(&self, a: &mut [Complex64]) {
        assert_eq!(a.len(), self.n, "buffer length does not match plan");
        self.fwd.process(a);
    }

    /// In place: a_t <- sum_k a_k e^{+2 pi i k t / n}.
    pub fn inverse(&self, a: &mut [Complex64]) {
        assert_eq!(a.len(), self.n, "buffer length does not match plan");
        self.inv.process(a);
    }
}

type PlanCache = RwLock<HashMap<usize, Arc<FftPlan>>>;

fn cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Shared plan for length `n`, built once per process.
pub fn plan(n: usize) -> Result<Arc<FftPlan>> {
    if let Some(p) = cache().read().expect("fft cache poisoned").get(&n) {
        return Ok(p.clone());
    }
    let p = Arc::new(FftPlan::new(n)?);
    let mut w = cache().write().expect("fft cache poisoned");
    Ok(w.entry(n).or_insert(p).clone())
}

/// Unnormalized forward transform of a copy.
pub fn forward(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut v = a.to_vec();
    plan(v.len())?.forward(&mut v);
    Ok(v)
}

/// Unnormalized inverse transform of a copy.
pub fn inverse(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut v = a.to_vec();
    plan(v.len())?.inverse(&mut v);
    Ok(v)
}
