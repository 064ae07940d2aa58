//! Budget allocation over the reduced signals and the digit-by-digit locator.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::downsampling::{DownsampleView, ReducedSpectra};
use crate::error::{invalid, BsftError, Result};
use crate::hashing::{estimate_energies, hash_to_bins_reduced, FilterShape};
use crate::rng::Stream;
use crate::signal::{canon, SparseSpectrum, TimeSamples};
use crate::tuning::Tuning;

/// Per-shift sparsity budgets; each entry is 0 or `unit * 2^q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub s: Vec<usize>,
}

impl Budgets {
    pub fn zeros(rows: usize) -> Self {
        Self { s: vec![0; rows] }
    }

    pub fn total(&self) -> usize {
        self.s.iter().sum()
    }

    pub fn max_with(&mut self, other: &Budgets) {
        for (a, &b) in self.s.iter_mut().zip(&other.s) {
            *a = (*a).max(b);
        }
    }
}

/// Number of geometric levels, ceil(log2(10 k0 / delta)).
pub fn budget_levels(k0: usize, delta: f64) -> usize {
    ((10.0 * k0 as f64 / delta).log2().ceil() as usize).max(1)
}

/// Sampling weights w^r_q proportional to 2^{-q} gamma^r, normalised to sum 1.
/// Row-major over (r, q), q = 1..=Q.
pub fn budget_weights(gamma: &[f64], q_max: usize) -> Result<Vec<f64>> {
    if gamma.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(invalid("energy estimates must be finite and nonnegative"));
    }
    let total: f64 = gamma.iter().sum();
    if total <= 0.0 {
        return Err(BsftError::NoEnergy);
    }
    let mut w = Vec::with_capacity(gamma.len() * q_max);
    for g in gamma {
        for q in 1..=q_max {
            w.push(g / total * 0.5f64.powi(q as i32));
        }
    }
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    Ok(w)
}

/// Importance-samples (r, q) pairs and sets s^r = unit * 2^{max q drawn for r}.
pub fn budget_allocation(
    gamma: &[f64],
    k0: usize,
    delta: f64,
    p: f64,
    tuning: &Tuning,
    rng: &mut impl Rng,
) -> Result<Budgets> {
    if !(p > 0.0 && p < 0.5) {
        return Err(invalid(format!("p = {p} outside (0, 1/2)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta = {delta} outside (0, 1)")));
    }
    let q_max = tuning.budget_levels(k0, delta);
    let w = budget_weights(gamma, q_max)?;
    let dist = WeightedAliasIndex::new(w).map_err(|e| invalid(format!("budget weights: {e}")))?;
    let mut best = vec![0usize; gamma.len()];
    for _ in 0..tuning.budget_samples(k0, delta, p) {
        let idx = dist.sample(rng);
        let (r, q) = (idx / q_max, idx % q_max + 1);
        best[r] = best[r].max(q);
    }
    Ok(Budgets {
        s: best
            .into_iter()
            .map(|q| if q == 0 { 0 } else { tuning.budget_unit << q })
            .collect(),
    })
}

/// j with sum_r |Z^r_j|^2 gamma^r / ||Z^r||^2 >= delta sum_r ||Z^r||^2 / k0.
pub fn active_set(
    zhat_all: &[Vec<Complex64>],
    gamma: &[f64],
    k0: usize,
    delta: f64,
) -> BTreeSet<i64> {
    let energies: Vec<f64> = zhat_all
        .iter()
        .map(|z| z.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let total: f64 = energies.iter().sum();
    let m = zhat_all.first().map_or(0, |z| z.len());
    let bar = delta * total / k0 as f64;
    (0..m)
        .filter(|&s| {
            let score: f64 = zhat_all
                .iter()
                .zip(&energies)
                .zip(gamma)
                .filter(|((_, &e), _)| e > 0.0)
                .map(|((z, &e), &g)| z[s].norm_sqr() * g / e)
                .sum();
            score >= bar && score > 0.0
        })
        .map(|s| canon(s as i64, m))
        .collect()
}

/// Digit base, number of digits and phase-test pairs for one reduced length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub base: usize,
    pub digits: usize,
    /// N = base^digits >= m.
    pub span: u64,
    pub pairs: usize,
}

impl DecoderConfig {
    pub fn new(m: usize, tuning: &Tuning) -> Result<Self> {
        let lg = (m as f64).log2();
        let base = match tuning.digit_base {
            Some(b) => {
                if !b.is_power_of_two() || b < 2 {
                    return Err(invalid(format!(
                        "digit base {b} must be a power of two >= 2"
                    )));
                }
                b
            }
            None => 1usize << ((0.5 * lg.max(2.0).log2()).floor() as u32).max(1),
        };
        let bits = base.trailing_zeros() as usize;
        let digits = (m.trailing_zeros() as usize).div_ceil(bits).max(1);
        let span = 1u64 << (bits * digits);
        Ok(Self {
            base,
            digits,
            span,
            pairs: tuning.phase_pairs(m),
        })
    }

    /// Number of pairs that must pass the phase test.
    pub fn quorum(&self) -> usize {
        (3 * self.pairs).div_ceil(5)
    }
}

/// e^{2 pi i num / den} for a power-of-two den, exact reduction.
fn unit(num: u64, den: u64) -> Complex64 {
    let r = num & (den - 1);
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r as f64 / den as f64)
}

/// Picks the digit whose phase test passes on the most pairs; ties go to the
/// smallest summed deviation. `ratios[a]` is U(alpha_a + w beta_a) / U(alpha_a).
fn decode_digit(
    ratios: &[Complex64],
    betas: &[u64],
    w: u64,
    known: u64,
    cfg: &DecoderConfig,
) -> Option<u64> {
    let lam_den = cfg.base as u64;
    let mut best: Option<(usize, f64, u64)> = None;
    let corrected: Vec<Complex64> = ratios
        .iter()
        .zip(betas)
        .map(|(q, &b)| {
            q * unit(
                cfg.span - (w.wrapping_mul(known).wrapping_mul(b) & (cfg.span - 1)),
                cfg.span,
            )
        })
        .collect();
    for lam in 0..lam_den {
        let mut pass = 0;
        let mut dev = 0.0;
        for (c, &b) in corrected.iter().zip(betas) {
            let d =
                (c * unit(lam_den - (lam.wrapping_mul(b) & (lam_den - 1)), lam_den) - 1.0).norm();
            if d < 1.0 / 3.0 {
                pass += 1;
                dev += d;
            }
        }
        let better = match best {
            None => true,
            Some((bp, bd, _)) => pass > bp || (pass == bp && dev < bd),
        };
        if better {
            best = Some((pass, dev, lam));
        }
    }
    best.filter(|&(pass, _, _)| pass >= cfg.quorum())
        .map(|(_, _, lam)| lam)
}

/// Locates heavy entries of every reduced residual with the given budgets.
///
/// All shifts share sigma and the phase-test pairs of a trial.
#[allow(clippy::too_many_arguments)]
pub fn locate_reduced_signals<S: TimeSamples>(
    view: &DownsampleView<'_, S>,
    chi: &ReducedSpectra,
    budgets: &Budgets,
    delta: f64,
    p: f64,
    tuning: &Tuning,
    stream: &Stream,
) -> Result<BTreeSet<i64>> {
    let rows = view.count();
    if budgets.s.len() != rows {
        return Err(invalid(format!(
            "expected {rows} budgets, got {}",
            budgets.s.len()
        )));
    }
    let mut out = BTreeSet::new();
    if budgets.s.iter().all(|&s| s == 0) {
        return Ok(out);
    }
    let m = view.m();
    let cfg = DecoderConfig::new(m, tuning)?;
    let buckets: Vec<usize> = budgets
        .s
        .iter()
        .map(|&s| tuning.reduced_buckets(s, m))
        .collect();
    let shape = FilterShape::for_delta(delta, tuning);
    let m64 = m as u64;
    for trial in 0..tuning.locate_trials(p) {
        let mut rng = stream.index(trial as u64).rng();
        let sigma = 2 * rng.random_range(0..(m as i64 / 2).max(1)) + 1;
        let pairs: Vec<(u64, u64)> = (0..cfg.pairs)
            .map(|_| (rng.random_range(0..m64), rng.random_range(0..m64)))
            .collect();
        // hashed[a][g]: g = 0 is the base shift alpha, g >= 1 uses w_g = N / base^g
        let mut hashed: Vec<Vec<Option<Vec<Option<Vec<Complex64>>>>>> =
            Vec::with_capacity(pairs.len());
        for &(alpha, beta) in &pairs {
            let mut per_level = Vec::with_capacity(cfg.digits + 1);
            for g in 0..=cfg.digits {
                let w = if g == 0 {
                    0
                } else {
                    cfg.span / (cfg.base as u64).pow(g as u32)
                };
                if g > 0 && w % m64 == 0 {
                    per_level.push(None);
                    continue;
                }
                let shift = (alpha + w.wrapping_mul(beta)) % m64;
                per_level.push(Some(hash_to_bins_reduced(
                    view,
                    chi,
                    &buckets,
                    shape,
                    sigma,
                    shift as i64,
                )?));
            }
            hashed.push(per_level);
        }
        let sigma_inv = crate::hashing::HashParams::new(m, 2, sigma, 0)?.sigma_inverse();
        let betas: Vec<u64> = pairs.iter().map(|&(_, b)| b).collect();
        for r in 0..rows {
            let b_r = buckets[r];
            if b_r == 0 {
                continue;
            }
            'bucket: for b in 0..b_r {
                let base: Vec<Complex64> = hashed
                    .iter()
                    .map(|lv| {
                        lv[0].as_ref().expect("base level")[r]
                            .as_ref()
                            .expect("active row")[b]
                    })
                    .collect();
                if base.iter().any(|v| v.norm_sqr() == 0.0) {
                    continue;
                }
                let mut known = 0u64;
                let mut place = 1u64;
                for g in 1..=cfg.digits {
                    let w = cfg.span / (cfg.base as u64).pow(g as u32);
                    if hashed[0][g].is_some() {
                        let ratios: Vec<Complex64> = hashed
                            .iter()
                            .zip(&base)
                            .map(|(lv, u0)| {
                                lv[g].as_ref().expect("level")[r]
                                    .as_ref()
                                    .expect("active row")[b]
                                    / u0
                            })
                            .collect();
                        match decode_digit(&ratios, &betas, w, known, &cfg) {
                            Some(lam) => known += lam * place,
                            None => continue 'bucket,
                        }
                    }
                    place *= cfg.base as u64;
                }
                // known approximates pi(j) * N / m
                let scale = cfg.span / m64;
                let pi = (known + scale / 2) / scale;
                let j = canon(
                    (sigma_inv as i128 * pi as i128).rem_euclid(m as i128) as i64,
                    m,
                );
                out.insert(j);
            }
        }
    }
    Ok(out)
}

/// Diagnostics of one locator call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocateOutcome {
    pub blocks: BTreeSet<i64>,
    pub budgets: Budgets,
    pub energy_rounds: usize,
}

/// Energy estimation, budget allocation and location on the residual X - chi.
#[allow(clippy::too_many_arguments)]
pub fn multi_block_locate<S: TimeSamples>(
    x: &S,
    chihat: &SparseSpectrum,
    k0: usize,
    k1: usize,
    delta: f64,
    p: f64,
    tuning: &Tuning,
    stream: &Stream,
) -> Result<LocateOutcome> {
    let view = DownsampleView::new(x, k1, delta.min(0.05))?;
    let chi = ReducedSpectra::new(chihat, view.filter(), k1)?;
    let rounds = tuning.energy_rounds(p);
    let inner_p = delta * p / 2.0;
    let mut budgets = Budgets::zeros(view.count());
    let energy_stream = stream.child("energy");
    let alloc_stream = stream.child("budget");
    for t in 0..rounds {
        let gamma = estimate_energies(
            &view,
            &chi,
            k0,
            delta,
            tuning,
            &mut energy_stream.index(t as u64).rng(),
        )?;
        match budget_allocation(
            &gamma,
            k0,
            delta,
            inner_p,
            tuning,
            &mut alloc_stream.index(t as u64).rng(),
        ) {
            Ok(s) => budgets.max_with(&s),
            Err(BsftError::NoEnergy) => {}
            Err(e) => return Err(e),
        }
    }
    let blocks = locate_reduced_signals(
        &view,
        &chi,
        &budgets,
        delta,
        inner_p,
        tuning,
        &stream.child("decode"),
    )?;
    Ok(LocateOutcome {
        blocks,
        budgets,
        energy_rounds: rounds,
    })
}
