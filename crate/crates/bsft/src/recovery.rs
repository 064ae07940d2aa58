//! The outer pipeline: locate, prune and estimate in a loop that halves the
//! residual bound, then one clean-up pass at accuracy eps.

use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hashing::{hash_to_bins, random_hash_params, FilterShape, HashParams};
use crate::location::multi_block_locate;
use crate::rng::Stream;
use crate::signal::{block_frequencies, check_pow2, root, slot, SparseSpectrum, TimeSamples};
use crate::tuning::Tuning;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
    /// Upper bound on the SNR.
    pub snr_prime: f64,
    /// Upper bound on the per-block tail energy.
    pub nu2: f64,
    pub eps: f64,
    pub delta_const: f64,
    pub eta_const: f64,
    /// Jitter the DC estimate by a relative 1e-12 after every update.
    pub perturb_dc: bool,
    pub tuning: Tuning,
}

impl RecoveryParams {
    pub fn new(n: usize, k0: usize, k1: usize, snr_prime: f64, nu2: f64, eps: f64) -> Self {
        Self {
            n,
            k0,
            k1,
            snr_prime,
            nu2,
            eps,
            delta_const: 0.01,
            eta_const: 0.01,
            perturb_dc: false,
            tuning: Tuning::paper(),
        }
    }

    pub fn with_tuning(mut self, tuning: Tuning) -> Self {
        self.tuning = tuning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_pow2(self.n, "n")?;
        check_pow2(self.k1, "k1")?;
        if self.k0 == 0 || self.k0 * self.k1 > self.n {
            return Err(invalid(format!(
                "k0 = {} blocks of width {} exceed n",
                self.k0, self.k1
            )));
        }
        if 2 * self.k1 > self.n {
            return Err(invalid("k1 must be at most n/2"));
        }
        if !(self.snr_prime >= 2.0) || !self.snr_prime.is_finite() {
            return Err(invalid(format!(
                "SNR bound {} must be finite and at least 2",
                self.snr_prime
            )));
        }
        if !(self.nu2 > 0.0) || !self.nu2.is_finite() {
            return Err(invalid("nu2 must be positive"));
        }
        if !(self.eps > 1.0 / self.n as f64 && self.eps <= 0.05) {
            return Err(invalid(format!("eps = {} outside (1/n, 1/20]", self.eps)));
        }
        if !(self.delta_const > 0.0 && self.delta_const <= 0.05) {
            return Err(invalid("delta_const outside (0, 1/20]"));
        }
        if !(self.eta_const > 0.0 && self.eta_const < 1.0) {
            return Err(invalid("eta_const outside (0, 1)"));
        }
        Ok(())
    }
}

/// One locate/prune/estimate pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub iteration: usize,
    pub theta: f64,
    pub located: usize,
    pub kept: usize,
    pub estimated: usize,
    pub budget_total: usize,
    pub reads_after_locate: u64,
    pub reads_after_prune: u64,
    pub reads_after: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub params: RecoveryParams,
    /// (f, re, im) for every nonzero entry, ascending f.
    pub spectrum: Vec<(i64, f64, f64)>,
    /// Distinct time indices read.
    pub samples_used: u64,
    /// Reads including repeats.
    pub reads_total: u64,
    pub stage_log: Vec<StageRecord>,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

impl RecoveryReport {
    pub fn chihat(&self) -> SparseSpectrum {
        let mut s = SparseSpectrum::new(self.params.n);
        for &(f, re, im) in &self.spectrum {
            s.insert(f, Complex64::new(re, im));
        }
        s
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-frequency estimates of X^ - chi^ on the blocks of `blocks` from one hashing.
fn bucket_estimates(
    u: &[Complex64],
    g: &crate::filters::FlatFilter,
    p: &HashParams,
    freqs: &[i64],
) -> Vec<Complex64> {
    let n = p.m();
    freqs
        .iter()
        .map(|&f| {
            let h = p.bucket(f);
            let o = p.offset(f);
            let phase = root(-(p.permute(f) * p.shift()).rem_euclid(n as i64), n);
            u[slot(h, p.buckets())] * phase / g.freq(o)
        })
        .collect()
}

fn frequencies_of(blocks: &BTreeSet<i64>, k1: usize, n: usize) -> Vec<i64> {
    blocks
        .iter()
        .flat_map(|&j| block_frequencies(j, k1, n))
        .collect()
}

/// Keeps the blocks whose median hashed energy reaches `theta`.
#[allow(clippy::too_many_arguments)]
pub fn prune_location<S: TimeSamples>(
    x: &S,
    chihat: &SparseSpectrum,
    blocks: &BTreeSet<i64>,
    k0: usize,
    k1: usize,
    delta: f64,
    p: f64,
    theta: f64,
    tuning: &Tuning,
    stream: &Stream,
) -> Result<BTreeSet<i64>> {
    if theta <= 0.0 || blocks.is_empty() {
        return Ok(blocks.clone());
    }
    let n = x.len();
    let b = tuning.prune_buckets(k0, k1, delta, n);
    let g = FilterShape::for_delta(delta, tuning).build(n, b)?;
    let rounds = tuning.prune_rounds(delta, p);
    let freqs = frequencies_of(blocks, k1, n);
    let mut energies: Vec<Vec<f64>> = vec![Vec::with_capacity(rounds); blocks.len()];
    for t in 0..rounds {
        let params = random_hash_params(n, b, &mut stream.index(t as u64).rng())?;
        let u = hash_to_bins(x, chihat, &g, &params)?;
        let est = bucket_estimates(&u, &g, &params, &freqs);
        for (i, chunk) in est.chunks(k1).enumerate() {
            energies[i].push(chunk.iter().map(|v| v.norm_sqr()).sum());
        }
    }
    Ok(blocks
        .iter()
        .zip(energies.iter_mut())
        .filter_map(|(&j, e)| (median(e) >= theta).then_some(j))
        .collect())
}

/// Coordinate-wise median estimates of X^ - chi^ on the blocks of `blocks`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_values<S: TimeSamples>(
    x: &S,
    chihat: &SparseSpectrum,
    blocks: &BTreeSet<i64>,
    k0: usize,
    k1: usize,
    delta: f64,
    p: f64,
    tuning: &Tuning,
    stream: &Stream,
) -> Result<SparseSpectrum> {
    let n = x.len();
    let mut w = SparseSpectrum::new(n);
    if blocks.is_empty() {
        return Ok(w);
    }
    let b = tuning.estimate_buckets(k0, k1, delta, n);
    let g = FilterShape::for_delta(delta, tuning).build(n, b)?;
    let rounds = tuning.estimate_rounds(p);
    let freqs = frequencies_of(blocks, k1, n);
    let mut re: Vec<Vec<f64>> = vec![Vec::with_capacity(rounds); freqs.len()];
    let mut im = re.clone();
    for t in 0..rounds {
        let params = random_hash_params(n, b, &mut stream.index(t as u64).rng())?;
        let u = hash_to_bins(x, chihat, &g, &params)?;
        for (i, v) in bucket_estimates(&u, &g, &params, &freqs)
            .into_iter()
            .enumerate()
        {
            re[i].push(v.re);
            im[i].push(v.im);
        }
    }
    for ((&f, r), i) in freqs.iter().zip(re.iter_mut()).zip(im.iter_mut()) {
        w.insert(f, Complex64::new(median(r), median(i)));
    }
    Ok(w)
}

fn perturb(chi: &mut SparseSpectrum, stream: &Stream) {
    let v = chi.get(0);
    if v != Complex64::new(0.0, 0.0) {
        let u: f64 = stream.rng().random_range(-1.0..1.0);
        chi.insert(0, v * (1.0 + 1e-12 * u));
    }
}

fn reads<S: TimeSamples>(x: &S) -> u64 {
    x.counter().map_or(0, |c| c.distinct())
}

/// Iterative SNR reduction: log2(SNR') rounds with geometrically falling thresholds.
pub fn reduce_snr<S: TimeSamples>(
    x: &S,
    params: &RecoveryParams,
    stream: &Stream,
    log: &mut Vec<StageRecord>,
) -> Result<SparseSpectrum> {
    params.validate()?;
    if x.len() != params.n {
        return Err(invalid("signal length differs from n"));
    }
    let (k0, k1) = (params.k0, params.k1);
    let delta = params.delta_const;
    let lg_snr = params.snr_prime.log2();
    let rounds = lg_snr.ceil().max(1.0) as usize;
    let p = (delta / ((k0 as f64 / delta).log2().powi(2) * lg_snr.powi(4))).min(0.49);
    let mut chi = SparseSpectrum::new(params.n);
    for t in 1..=rounds {
        let st = stream.index(t as u64);
        let loc = multi_block_locate(
            x,
            &chi,
            k0,
            k1,
            delta,
            p,
            &params.tuning,
            &st.child("locate"),
        )?;
        let reads_after_locate = reads(x);
        let theta = 10.0 * 0.5f64.powi(t as i32) * params.nu2 * params.snr_prime;
        let kept = prune_location(
            x,
            &chi,
            &loc.blocks,
            k0,
            k1,
            delta,
            p,
            theta,
            &params.tuning,
            &st.child("prune"),
        )?;
        let reads_after_prune = reads(x);
        let w = estimate_values(
            x,
            &chi,
            &kept,
            k0,
            k1,
            delta,
            p,
            &params.tuning,
            &st.child("estimate"),
        )?;
        chi.add_all(&w);
        if params.perturb_dc {
            perturb(&mut chi, &st.child("perturb"));
        }
        log.push(StageRecord {
            stage: "reduce".into(),
            iteration: t,
            theta,
            located: loc.blocks.len(),
            kept: kept.len(),
            estimated: w.len(),
            budget_total: loc.budgets.total(),
            reads_after_locate,
            reads_after_prune,
            reads_after: reads(x),
        });
    }
    Ok(chi)
}

/// Final clean-up at accuracy eps on top of an estimate with constant SNR.
pub fn recover_at_const_snr<S: TimeSamples>(
    x: &S,
    chihat: &SparseSpectrum,
    params: &RecoveryParams,
    stream: &Stream,
    log: &mut Vec<StageRecord>,
) -> Result<SparseSpectrum> {
    params.validate()?;
    let (k0, k1, eps) = (params.k0, params.k1, params.eps);
    let tuning = params.tuning.for_cleanup();
    let p = (params.eta_const * eps / (k0 as f64 / eps).log2().powi(2)).min(0.49);
    let loc = multi_block_locate(
        x,
        chihat,
        k0,
        k1,
        eps * eps,
        p,
        &tuning,
        &stream.child("locate"),
    )?;
    let reads_after_locate = reads(x);
    let theta = 200.0 * eps * params.nu2;
    let kept = prune_location(
        x,
        chihat,
        &loc.blocks,
        k0,
        k1,
        eps,
        p,
        theta,
        &tuning,
        &stream.child("prune"),
    )?;
    let reads_after_prune = reads(x);
    let wide = (3.0 * k0 as f64 / eps).ceil() as usize;
    let w = estimate_values(
        x,
        chihat,
        &kept,
        wide,
        k1,
        eps,
        p,
        &tuning,
        &stream.child("estimate"),
    )?;
    let mut out = chihat.clone();
    out.add_all(&w);
    if params.perturb_dc {
        perturb(&mut out, &stream.child("perturb"));
    }
    log.push(StageRecord {
        stage: "cleanup".into(),
        iteration: 1,
        theta,
        located: loc.blocks.len(),
        kept: kept.len(),
        estimated: w.len(),
        budget_total: loc.budgets.total(),
        reads_after_locate,
        reads_after_prune,
        reads_after: reads(x),
    });
    Ok(out)
}

/// Full recovery: SNR reduction followed by the clean-up pass.
pub fn block_sparse_ft<S: TimeSamples>(
    x: &S,
    params: &RecoveryParams,
    stream: &Stream,
) -> Result<RecoveryReport> {
    let start = Instant::now();
    let mut log = Vec::new();
    let chi = reduce_snr(x, params, &stream.child("reduce"), &mut log)?;
    let chi = recover_at_const_snr(x, &chi, params, &stream.child("cleanup"), &mut log)?;
    Ok(RecoveryReport {
        params: params.clone(),
        spectrum: chi.iter().map(|(f, v)| (f, v.re, v.im)).collect(),
        samples_used: reads(x),
        reads_total: x.counter().map_or(0, |c| c.total()),
        stage_log: log,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
