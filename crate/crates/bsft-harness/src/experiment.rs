//! Trial execution and result files: JSON-lines records, a CSV summary and a
//! timing sidecar kept apart so the records stay byte-stable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use bsft::recovery::{block_sparse_ft, RecoveryParams, StageRecord};
use bsft::rng::Stream;
use bsft::signal::{index_range, slot, tail_error, CountedSignal, SampleCounter};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::generators::gen_signal;

/// Crate version plus `git describe`, fixed at build time.
pub const VERSION: &str = env!("BSFT_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub kind: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub sizes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub kind: &'static str,
    pub trial: usize,
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
    pub eps: f64,
    /// Measured SNR; null when the signal has no tail.
    pub snr: Option<f64>,
    pub mu2: f64,
    pub nu2: f64,
    pub snr_prime: f64,
    /// ||X^ - chi^||^2.
    pub error2: f64,
    pub k0mu2: f64,
    /// Error of the best k0-block approximation from a dense FFT.
    pub baseline_error2: f64,
    /// (error2 - k0 mu^2) / (eps k0 nu^2).
    pub excess_constant: f64,
    pub success: bool,
    pub samples_used: u64,
    pub samples_fraction: f64,
    pub reads_total: u64,
    pub nonzeros: usize,
    pub stage_log: Vec<StageRecord>,
    pub failure: Option<String>,
}

/// Per-configuration aggregate, one CSV row.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
    pub snr: f64,
    pub eps: f64,
    pub generator: String,
    pub noise: String,
    pub preset: String,
    pub trials: usize,
    pub failures: usize,
    pub success_constant: f64,
    pub success_rate: f64,
    /// Smallest C at which 80% of trials meet the threshold.
    pub c_meas: f64,
    pub excess_mean: f64,
    pub excess_median: f64,
    pub error_ratio_median: f64,
    pub samples_fraction_mean: f64,
    pub samples_fraction_median: f64,
    pub samples_fraction_q10: f64,
    pub samples_fraction_q90: f64,
    pub reads_total_median: f64,
}

/// Nearest-rank quantile; NaN for an empty slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Generates and recovers one trial. Returns the record and the wall time in ms.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<(TrialRecord, f64)> {
    let stream = Stream::new(cfg.seed).index(trial as u64);
    let g = gen_signal(&cfg.signal_spec(), &stream.child("gen"))?;
    let n = cfg.n;
    let total: f64 = g.spectrum.iter().map(|v| v.norm_sqr()).sum();
    let finite = g.snr.is_finite() && g.mu2 > 0.0;
    let (snr_prime, nu2) = if finite {
        (g.snr.max(2.0), g.mu2)
    } else {
        (cfg.noiseless_snr, total / (cfg.k0 as f64 * cfg.noiseless_snr))
    };
    let params = RecoveryParams::new(n, cfg.k0, cfg.k1, snr_prime, nu2, cfg.eps)
        .with_tuning(cfg.preset.tuning());
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&g.signal, &counter);
    let start = Instant::now();
    let outcome = block_sparse_ft(&src, &params, &stream.child("recover"));
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let k0mu2 = cfg.k0 as f64 * g.mu2;
    let baseline = tail_error(&g.spectrum, cfg.k0, cfg.k1)?;
    let scale = cfg.eps * cfg.k0 as f64 * nu2;
    let mut rec = TrialRecord {
        kind: "trial",
        trial,
        n,
        k0: cfg.k0,
        k1: cfg.k1,
        eps: cfg.eps,
        snr: g.snr.is_finite().then_some(g.snr),
        mu2: g.mu2,
        nu2,
        snr_prime,
        error2: total,
        k0mu2,
        baseline_error2: baseline,
        excess_constant: f64::INFINITY,
        success: false,
        samples_used: counter.distinct(),
        samples_fraction: counter.distinct() as f64 / n as f64,
        reads_total: counter.total(),
        nonzeros: 0,
        stage_log: Vec::new(),
        failure: None,
    };
    match outcome {
        Ok(report) => {
            let chi = report.chihat();
            let err: f64 = index_range(n).map(|f| (g.spectrum[slot(f, n)] - chi.get(f)).norm_sqr()).sum();
            rec.error2 = err;
            rec.excess_constant = (err - k0mu2) / scale;
            rec.success = err <= k0mu2 + cfg.success_constant * scale;
            rec.nonzeros = chi.len();
            rec.stage_log = report.stage_log;
        }
        Err(e) => rec.failure = Some(e.to_string()),
    }
    Ok((rec, wall))
}

/// All trials of one configuration, in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<(TrialRecord, f64)>> {
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
}

pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Summary {
    let excess: Vec<f64> = records.iter().map(|r| r.excess_constant).collect();
    let frac: Vec<f64> = records.iter().map(|r| r.samples_fraction).collect();
    let ratio: Vec<f64> = records.iter().map(|r| r.error2 / r.baseline_error2.max(f64::MIN_POSITIVE)).collect();
    let reads: Vec<f64> = records.iter().map(|r| r.reads_total as f64).collect();
    let finite: Vec<f64> = excess.iter().copied().filter(|c| c.is_finite()).collect();
    Summary {
        n: cfg.n,
        k0: cfg.k0,
        k1: cfg.k1,
        snr: cfg.snr,
        eps: cfg.eps,
        generator: cfg.generator.name().into(),
        noise: cfg.noise.name().into(),
        preset: cfg.preset.name().into(),
        trials: records.len(),
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        success_constant: cfg.success_constant,
        success_rate: if records.is_empty() {
            f64::NAN
        } else {
            records.iter().filter(|r| r.success).count() as f64 / records.len() as f64
        },
        c_meas: quantile(&excess, 0.8),
        excess_mean: mean(&finite),
        excess_median: quantile(&excess, 0.5),
        error_ratio_median: quantile(&ratio, 0.5),
        samples_fraction_mean: mean(&frac),
        samples_fraction_median: quantile(&frac, 0.5),
        samples_fraction_q10: quantile(&frac, 0.1),
        samples_fraction_q90: quantile(&frac, 0.9),
        reads_total_median: quantile(&reads, 0.5),
    }
}

/// Paths written for an output stem: records, summary, timings.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (out.with_extension("jsonl"), out.with_extension("csv"), out.with_extension("timing.csv"))
}

/// Everything a run produced.
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<Summary>,
    pub wall_ms: Vec<f64>,
}

/// Runs `cfg` once per size in `sizes` (just `cfg.n` when empty) and writes the
/// result files under `cfg.out` when set.
pub fn run_experiment(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<RunOutput> {
    cfg.validate()?;
    let sizes: Vec<usize> = if sizes.is_empty() { vec![cfg.n] } else { sizes.to_vec() };
    let mut out = RunOutput { records: Vec::new(), summaries: Vec::new(), wall_ms: Vec::new() };
    for &n in &sizes {
        let c = ExperimentConfig { n, ..cfg.clone() };
        c.validate()?;
        let (records, wall): (Vec<_>, Vec<_>) = run_trials(&c)?.into_iter().unzip();
        out.summaries.push(summarize(&c, &records));
        out.records.extend(records);
        out.wall_ms.extend(wall);
    }
    if let Some(path) = &cfg.out {
        write_outputs(path, cfg, &sizes, &out)?;
    }
    Ok(out)
}

pub fn write_outputs(path: &Path, cfg: &ExperimentConfig, sizes: &[usize], out: &RunOutput) -> Result<()> {
    let (jsonl, csv_path, timing) = output_paths(path);
    if let Some(dir) = jsonl.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let header = Header { kind: "header", version: VERSION, config: cfg.clone(), sizes: sizes.to_vec() };
    let mut w = BufWriter::new(File::create(&jsonl).with_context(|| format!("creating {}", jsonl.display()))?);
    writeln!(w, "{}", serde_json::to_string(&header)?).with_context(|| format!("writing {}", jsonl.display()))?;
    for r in &out.records {
        writeln!(w, "{}", serde_json::to_string(r)?).with_context(|| format!("writing {}", jsonl.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", jsonl.display()))?;

    let mut c = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    for s in &out.summaries {
        c.serialize(s).with_context(|| format!("writing {}", csv_path.display()))?;
    }
    c.flush().with_context(|| format!("writing {}", csv_path.display()))?;

    let mut t = csv::Writer::from_path(&timing).with_context(|| format!("creating {}", timing.display()))?;
    t.write_record(["n", "trial", "wall_ms"])?;
    for (r, ms) in out.records.iter().zip(&out.wall_ms) {
        t.write_record([r.n.to_string(), r.trial.to_string(), format!("{ms:.3}")])?;
    }
    t.flush().with_context(|| format!("writing {}", timing.display()))?;
    Ok(())
}
