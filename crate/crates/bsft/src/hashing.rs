//! Permuted, filtered bucket hashing of full and downsampled signals.
//!
//! A hashing with (sigma, shift) into B buckets has spectrum
//! U^_b = sum_f X^_f G^_{sigma f - b m / B} w^{sigma shift f}.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::downsampling::{DownsampleView, ReducedSpectra};
use crate::error::{invalid, BsftError, Result};
use crate::fft;
use crate::filters::{flat_filter, FlatFilter};
use crate::semi_equi::{default_zeta, semi_equi_inverse_fft, Targets};
use crate::signal::{canon, check_pow2, slot, SparseSpectrum, TimeSamples};
use crate::tuning::Tuning;

/// Modular inverse of an odd number modulo 2^64.
fn inverse_odd(a: u64) -> u64 {
    let mut x = a;
    for _ in 0..6 {
        x = x.wrapping_mul(2u64.wrapping_sub(a.wrapping_mul(x)));
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashParams {
    m: usize,
    buckets: usize,
    sigma: i64,
    shift: i64,
}

impl HashParams {
    pub fn new(m: usize, buckets: usize, sigma: i64, shift: i64) -> Result<Self> {
        check_pow2(m, "m")?;
        check_pow2(buckets, "B")?;
        if buckets > m {
            return Err(invalid(format!("B = {buckets} exceeds m = {m}")));
        }
        if sigma.rem_euclid(2) == 0 {
            return Err(invalid("sigma must be odd"));
        }
        Ok(Self {
            m,
            buckets,
            sigma: canon(sigma, m),
            shift: canon(shift, m),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn buckets(&self) -> usize {
        self.buckets
    }
    pub fn sigma(&self) -> i64 {
        self.sigma
    }
    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Same permutation with another time shift.
    pub fn with_shift(&self, shift: i64) -> Self {
        Self {
            shift: canon(shift, self.m),
            ..*self
        }
    }

    /// Same permutation and shift with another bucket count.
    pub fn with_buckets(&self, buckets: usize) -> Result<Self> {
        Self::new(self.m, buckets, self.sigma, self.shift)
    }

    /// pi(f) = sigma f mod m.
    pub fn permute(&self, f: i64) -> i64 {
        canon(
            (self.sigma as i128 * f as i128).rem_euclid(self.m as i128) as i64,
            self.m,
        )
    }

    fn rounded(&self, f: i64) -> i64 {
        let pi = self.permute(f);
        let w = (self.m / self.buckets) as i64;
        // round to nearest multiple of w, halves away from zero
        let q = pi.div_euclid(w);
        let r = pi.rem_euclid(w);
        if 2 * r > w || (2 * r == w && pi > 0) {
            q + 1
        } else {
            q
        }
    }

    /// h(f) = round(pi(f) B / m) mod B, canonical.
    pub fn bucket(&self, f: i64) -> i64 {
        canon(self.rounded(f), self.buckets)
    }

    /// o_f(f') = pi(f') - h(f) m / B, measured from the bucket centre.
    pub fn offset(&self, f: i64) -> i64 {
        self.permute(f) - self.rounded(f) * (self.m / self.buckets) as i64
    }

    /// sigma^{-1} mod m.
    pub fn sigma_inverse(&self) -> i64 {
        let inv = inverse_odd(self.sigma.rem_euclid(self.m as i64) as u64);
        canon((inv % self.m as u64) as i64, self.m)
    }
}

/// Uniform odd sigma and uniform shift in [m].
pub fn random_hash_params(m: usize, buckets: usize, rng: &mut impl Rng) -> Result<HashParams> {
    check_pow2(m, "m")?;
    let sigma = 2 * rng.random_range(0..(m as i64 / 2).max(1)) + 1;
    let shift = rng.random_range(0..m as i64);
    HashParams::new(m, buckets, sigma, shift)
}

/// Position sigma (shift + t) mod m.
#[inline]
fn position(p: &HashParams, t: i64) -> i64 {
    ((p.sigma as i128 * (p.shift + t) as i128).rem_euclid(p.m as i128)) as i64
}

/// Time-domain hashing U (slot-indexed, length B) over the filter window.
pub fn hash_time_domain<S: TimeSamples>(
    x: &S,
    g: &FlatFilter,
    p: &HashParams,
) -> Result<Vec<Complex64>> {
    check_domain(x.len(), g, p)?;
    let b = p.buckets;
    let mut u = vec![Complex64::new(0.0, 0.0); b];
    let (lo, hi) = g.support();
    for (t, &w) in (lo..=hi).zip(g.time_values()) {
        if w != 0.0 {
            u[slot(t, b)] += x.read(position(p, t)) * w;
        }
    }
    let scale = b as f64 / p.m as f64;
    u.iter_mut().for_each(|v| *v *= scale);
    Ok(u)
}

/// U^ = FFT(U) / B, slot-indexed by bucket.
pub fn bins_from_time(mut u: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let b = u.len();
    fft::plan(b)?.forward(&mut u);
    let s = 1.0 / b as f64;
    u.iter_mut().for_each(|v| *v *= s);
    Ok(u)
}

fn check_domain(len: usize, g: &FlatFilter, p: &HashParams) -> Result<()> {
    if len != p.m || g.n() != p.m {
        return Err(invalid(format!(
            "length mismatch: signal {len}, filter {}, params {}",
            g.n(),
            p.m
        )));
    }
    if g.buckets() != p.buckets {
        return Err(invalid("filter bucket count differs from hash parameters"));
    }
    Ok(())
}

fn ensure_finite(u: &[Complex64], at: i64) -> Result<()> {
    if u.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(BsftError::NonFiniteSample(at))
    }
}

/// How values of the running estimate are evaluated at the hashed positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ChiEvaluation {
    /// Cheaper of the two, by operation count.
    #[default]
    Auto,
    /// Direct sum over the estimate's support for each position.
    Direct,
    /// One semi-equispaced inverse transform over the window.
    SemiEquispaced,
}

fn use_semi_equi(mode: ChiEvaluation, nnz: usize, window: usize, m: usize) -> bool {
    match mode {
        ChiEvaluation::Direct => false,
        ChiEvaluation::SemiEquispaced => true,
        ChiEvaluation::Auto => {
            let k = window.max(nnz).next_power_of_two();
            if 2 * k >= m {
                return false;
            }
            let lg = (m as f64 / default_zeta(m)).log2();
            let semi = nnz as f64 * 4.0 * lg + 2.0 * k as f64 * (2.0 * k as f64).log2();
            semi < (nnz * window) as f64
        }
    }
}

/// Values of a sparse spectrum at sigma (shift + t) for t in [lo, hi].
fn window_values(
    spec: &SparseSpectrum,
    p: &HashParams,
    lo: i64,
    hi: i64,
    mode: ChiEvaluation,
) -> Result<Vec<Complex64>> {
    let m = p.m;
    let len = (hi - lo + 1) as usize;
    if spec.is_empty() {
        return Ok(vec![Complex64::new(0.0, 0.0); len]);
    }
    let reach = lo.abs().max(hi.abs()) as usize;
    if use_semi_equi(mode, spec.len(), 2 * reach + 1, m) {
        let k = (2 * reach).max(spec.len()).max(2).next_power_of_two();
        let tg = Targets {
            sigma: p.sigma,
            shift: canon(p.sigma.wrapping_mul(p.shift), m),
        };
        let y = semi_equi_inverse_fft(spec, k, default_zeta(m), tg)?;
        let half = (k / 2) as i64;
        return Ok((lo..=hi).map(|t| y[(t + half) as usize]).collect());
    }
    let entries: Vec<(i64, Complex64)> = spec.iter().collect();
    Ok((lo..=hi)
        .map(|t| {
            let q = position(p, t);
            entries
                .iter()
                .map(|&(f, v)| v * crate::signal::root(f * q, m))
                .sum()
        })
        .collect())
}

/// Hashing of the residual X - chi: U^ = FFT(U_X - U_chi) / B.
pub fn hash_to_bins<S: TimeSamples>(
    x: &S,
    chihat: &SparseSpectrum,
    g: &FlatFilter,
    p: &HashParams,
) -> Result<Vec<Complex64>> {
    hash_to_bins_with(x, chihat, g, p, ChiEvaluation::Auto)
}

pub fn hash_to_bins_with<S: TimeSamples>(
    x: &S,
    chihat: &SparseSpectrum,
    g: &FlatFilter,
    p: &HashParams,
    mode: ChiEvaluation,
) -> Result<Vec<Complex64>> {
    check_domain(x.len(), g, p)?;
    if chihat.n() != p.m {
        return Err(invalid("estimate length differs from signal length"));
    }
    let mut u = hash_time_domain(x, g, p)?;
    ensure_finite(&u, p.shift)?;
    if !chihat.is_empty() {
        let (lo, hi) = g.support();
        let chi = window_values(chihat, p, lo, hi, mode)?;
        let b = p.buckets;
        let scale = b as f64 / p.m as f64;
        for ((t, &w), c) in (lo..=hi).zip(g.time_values()).zip(chi) {
            u[slot(t, b)] -= c * (w * scale);
        }
    }
    bins_from_time(u)
}

/// Filter shape shared by the reduced hashings: order and width constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterShape {
    pub order: usize,
    pub width: f64,
}

impl FilterShape {
    pub fn for_delta(delta: f64, tuning: &Tuning) -> Self {
        Self {
            order: tuning.hash_order(delta),
            width: tuning.filter_width,
        }
    }

    pub fn build(&self, m: usize, buckets: usize) -> Result<Arc<FlatFilter>> {
        flat_filter(m, buckets, self.order, self.width)
    }

}

/// Per-r hashings of the downsampled residual Z^r_X - Z^r_chi with one shared
/// (sigma, shift). `buckets[r] == 0` skips r (its entry is `None`).
pub fn hash_to_bins_reduced<S: TimeSamples>(
    view: &DownsampleView<'_, S>,
    chi: &ReducedSpectra,
    buckets: &[usize],
    shape: FilterShape,
    sigma: i64,
    shift: i64,
) -> Result<Vec<Option<Vec<Complex64>>>> {
    hash_to_bins_reduced_with(view, chi, buckets, shape, sigma, shift, ChiEvaluation::Auto)
}

pub fn hash_to_bins_reduced_with<S: TimeSamples>(
    view: &DownsampleView<'_, S>,
    chi: &ReducedSpectra,
    buckets: &[usize],
    shape: FilterShape,
    sigma: i64,
    shift: i64,
    mode: ChiEvaluation,
) -> Result<Vec<Option<Vec<Complex64>>>> {
    let rows = view.count();
    let m = view.m();
    if buckets.len() != rows {
        return Err(invalid(format!(
            "expected {rows} bucket counts, got {}",
            buckets.len()
        )));
    }
    if chi.m() != m {
        return Err(invalid("reduced estimate length differs from view"));
    }
    let mut filters: Vec<Option<(Arc<FlatFilter>, HashParams)>> = Vec::with_capacity(rows);
    for &b in buckets {
        if b == 0 {
            filters.push(None);
        } else {
            filters.push(Some((
                shape.build(m, b)?,
                HashParams::new(m, b, sigma, shift)?,
            )));
        }
    }
    let window = filters
        .iter()
        .flatten()
        .map(|(g, _)| g.support())
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
    let Some((lo, hi)) = window else {
        return Ok(vec![None; rows]);
    };
    let params = HashParams::new(m, 2, sigma, shift)?;
    let mut u: Vec<Vec<Complex64>> = buckets
        .iter()
        .map(|&b| vec![Complex64::new(0.0, 0.0); b])
        .collect();
    let mut active = vec![false; rows];
    let mut zx = vec![Complex64::new(0.0, 0.0); rows];
    for t in lo..=hi {
        let mut any = false;
        for (r, f) in filters.iter().enumerate() {
            active[r] = f.as_ref().is_some_and(|(g, _)| g.time(t) != 0.0);
            any |= active[r];
        }
        if !any {
            continue;
        }
        let q = position(&params, t);
        view.z_x_at(q, &active, &mut zx);
        for r in 0..rows {
            if active[r] {
                let (g, p) = filters[r].as_ref().expect("active row has a filter");
                u[r][slot(t, p.buckets)] += zx[r] * g.time(t);
            }
        }
    }
    for (r, f) in filters.iter().enumerate() {
        let Some((g, p)) = f else { continue };
        ensure_finite(&u[r], shift)?;
        let spec = chi.spectrum(r);
        if !spec.is_empty() {
            let (lo, hi) = g.support();
            let vals = window_values(&spec, p, lo, hi, mode)?;
            for ((t, &w), c) in (lo..=hi).zip(g.time_values()).zip(vals) {
                u[r][slot(t, p.buckets)] -= c * w;
            }
        }
    }
    u.into_iter()
        .zip(buckets)
        .map(|(mut v, &b)| {
            if b == 0 {
                return Ok(None);
            }
            let scale = b as f64 / m as f64;
            v.iter_mut().for_each(|c| *c *= scale);
            bins_from_time(v).map(Some)
        })
        .collect()
}

/// gamma^r = ||U^r||^2 for one shared random hashing of every reduced residual.
pub fn estimate_energies<S: TimeSamples>(
    view: &DownsampleView<'_, S>,
    chi: &ReducedSpectra,
    k0: usize,
    delta: f64,
    tuning: &Tuning,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let m = view.m();
    let b = tuning.energy_buckets(k0, delta, m);
    let p = random_hash_params(m, b, rng)?;
    let shape = FilterShape::for_delta(delta, tuning);
    let out = hash_to_bins_reduced(view, chi, &vec![b; view.count()], shape, p.sigma, p.shift)?;
    Ok(out
        .into_iter()
        .map(|u| u.map_or(0.0, |u| u.iter().map(|v| v.norm_sqr()).sum()))
        .collect())
}
