mod common;

use std::collections::BTreeSet;

use bsft::error::BsftError;
use bsft::recovery::*;
use bsft::rng::Stream;
use bsft::signal::*;
use bsft::tuning::Tuning;
use bsft::Complex64;
use common::*;
use rand::Rng;

fn energy_of(xhat: &[Complex64], chi: &SparseSpectrum) -> f64 {
    let n = xhat.len();
    index_range(n)
        .map(|f| (xhat[slot(f, n)] - chi.get(f)).norm_sqr())
        .sum()
}

fn noiseless_params(xhat: &[Complex64], k0: usize, k1: usize) -> RecoveryParams {
    let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
    let snr = 1024.0;
    RecoveryParams::new(xhat.len(), k0, k1, snr, total / (k0 as f64 * snr), 0.05)
        .with_tuning(Tuning::desk())
}

#[test]
fn zero_threshold_keeps_everything() {
    let n = 1024;
    let x = random_signal(n, &mut rng(70));
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let blocks: BTreeSet<i64> = [-3, 0, 7].into();
    let kept = prune_location(
        &src,
        &SparseSpectrum::new(n),
        &blocks,
        2,
        4,
        0.05,
        0.1,
        0.0,
        &Tuning::desk(),
        &Stream::new(1),
    )
    .unwrap();
    assert_eq!(kept, blocks);
    assert_eq!(counter.total(), 0);
}

fn one_block(n: usize, k1: usize, j: i64, scale: f64, xhat: &mut [Complex64], r: &mut rand_chacha::ChaCha8Rng) {
    for f in block_frequencies(j, k1, n) {
        xhat[slot(f, n)] = gauss(r) * scale;
    }
}

#[test]
fn pruning_separates_heavy_blocks_from_decoys() {
    let (n, k0, k1, delta, p) = (1usize << 16, 1usize, 4usize, 0.05, 0.1);
    let m = (n / k1) as i64;
    let tuning = Tuning::paper();
    let (mut big_kept, mut decoys_kept, mut decoys_seen) = (0usize, 0usize, 0usize);
    let trials = 300;
    for trial in 0..trials {
        let mut r = rng(7000 + trial);
        let big = r.random_range(0..m) - m / 2 + 1;
        let mut xhat = vec![c(0.0, 0.0); n];
        one_block(n, k1, big, 1.0, &mut xhat, &mut r);
        let big_energy: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
        let mut blocks: BTreeSet<i64> = [big].into();
        while blocks.len() < 11 {
            let j = r.random_range(0..m) - m / 2 + 1;
            if blocks.insert(j) {
                one_block(n, k1, j, 1e-3, &mut xhat, &mut r);
            }
        }
        let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
        let decoy_max = blocks
            .iter()
            .filter(|&&j| j != big)
            .map(|&j| block_frequencies(j, k1, n).map(|f| xhat[slot(f, n)].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
        let margin = 2.0 * (delta / k0 as f64).sqrt() * total.sqrt();
        let theta = 0.5 * big_energy;
        assert!(theta - decoy_max >= margin && big_energy - theta >= margin);
        let x = idft(&xhat).unwrap();
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let kept = prune_location(&src, &SparseSpectrum::new(n), &blocks, k0, k1, delta, p, theta, &tuning, &Stream::new(trial)).unwrap();
        assert!(kept.is_subset(&blocks));
        big_kept += usize::from(kept.contains(&big));
        decoys_kept += kept.len() - usize::from(kept.contains(&big));
        decoys_seen += blocks.len() - 1;
    }
    let survive = decoys_kept as f64 / decoys_seen as f64;
    assert!(survive <= delta * p * 1.5, "decoy survival {survive}");
    assert!(big_kept as f64 >= (1.0 - delta * p) * trials as f64, "big kept {big_kept}/{trials}");
}

#[test]
fn estimation_of_an_exact_residual() {
    let (n, k0, k1) = (4096usize, 2usize, 8usize);
    let mut r = rng(71);
    let (xhat, blocks) = block_sparse(n, k0, k1, &mut r);
    let x = idft(&xhat).unwrap();
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let chi = SparseSpectrum::from_dense(&xhat);
    let set: BTreeSet<i64> = blocks.iter().copied().collect();
    let w = estimate_values(&src, &chi, &set, k0, k1, 0.05, 0.1, &Tuning::desk(), &Stream::new(3)).unwrap();
    let scale = chi.energy().sqrt();
    assert!(w.iter().all(|(_, v)| v.norm() <= 1e-8 * scale));

    let mut extra = set.clone();
    extra.insert(canon(blocks[0] + 17, n / k1));
    let w = estimate_values(&src, &SparseSpectrum::new(n), &extra, k0, k1, 0.05, 0.1, &Tuning::desk(), &Stream::new(4)).unwrap();
    for (f, _) in w.iter() {
        assert!(extra.contains(&block_of(f, k1, n)), "f {f} outside the listed blocks");
    }
}

#[test]
fn estimation_error_is_small_on_block_sparse_residuals() {
    let (n, k0, k1, delta, p) = (1usize << 16, 1usize, 4usize, 0.05, 0.1);
    let m = (n / k1) as i64;
    let runs = 300;
    let mut good = 0;
    for run in 0..runs {
        let mut r = rng(7200 + run);
        let (xhat, blocks) = block_sparse(n, k0, k1, &mut r);
        let x = idft(&xhat).unwrap();
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let mut set: BTreeSet<i64> = blocks.iter().copied().collect();
        set.insert(canon(blocks[0] + r.random_range(2..m / 2), m as usize));
        let w = estimate_values(&src, &SparseSpectrum::new(n), &set, k0, k1, delta, p, &Tuning::paper(), &Stream::new(run)).unwrap();
        let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
        let worst = w.iter().map(|(f, v)| (v - xhat[slot(f, n)]).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-6 * total.sqrt(), "run {run}: per-frequency error {worst:e}");
        let err = energy_of(&xhat, &w);
        good += usize::from(err <= delta * (set.len() as f64 / (3.0 * k0 as f64)) * total);
    }
    assert!(good as f64 >= (1.0 - p) * runs as f64, "{good}/{runs}");
}

#[test]
fn noiseless_block_sparse_signals_are_recovered() {
    let (n, k0, k1) = (1usize << 14, 4usize, 8usize);
    let runs = 100;
    let mut exact = 0;
    let mut sparse_enough = 0;
    for run in 0..runs {
        let (xhat, _) = block_sparse(n, k0, k1, &mut rng(7400 + run));
        let x = idft(&xhat).unwrap();
        let params = noiseless_params(&xhat, k0, k1);
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let mut log = Vec::new();
        let chi = reduce_snr(&src, &params, &Stream::new(run).child("reduce"), &mut log).unwrap();
        sparse_enough += usize::from(chi.blocks(k1).len() <= 3 * k0);
        let report = block_sparse_ft(&src, &params, &Stream::new(run)).unwrap();
        let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
        exact += usize::from(energy_of(&xhat, &report.chihat()) <= 1e-6 * total);
        assert_eq!(report.samples_used, counter.distinct());
    }
    assert!(exact >= 80, "{exact}/{runs} exact");
    assert!(
        sparse_enough >= 90,
        "{sparse_enough}/{runs} within 3 k0 blocks"
    );
}

#[test]
fn two_iterations_at_snr_bound_four() {
    let (n, k0, k1) = (1usize << 14, 4usize, 8usize);
    let mut ok = 0;
    for run in 0..10u64 {
        let (xhat, _) = block_sparse(n, k0, k1, &mut rng(7600 + run));
        let x = idft(&xhat).unwrap();
        let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
        let nu2 = total / (4.0 * k0 as f64);
        let params = RecoveryParams::new(n, k0, k1, 4.0, nu2, 0.05).with_tuning(Tuning::desk());
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let mut log = Vec::new();
        let chi = reduce_snr(&src, &params, &Stream::new(run), &mut log).unwrap();
        assert_eq!(log.iter().filter(|s| s.stage == "reduce").count(), 2);
        ok += usize::from(energy_of(&xhat, &chi) <= 100.0 * k0 as f64 * nu2 && chi.blocks(k1).len() <= 3 * k0);
    }
    assert!(ok >= 8, "{ok}/10");
}

#[test]
fn zero_signal_gives_zero_estimate() {
    let n = 1 << 12;
    let x = Signal::zeros(n).unwrap();
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let params = RecoveryParams::new(n, 2, 8, 16.0, 1.0, 0.05).with_tuning(Tuning::desk());
    let report = block_sparse_ft(&src, &params, &Stream::new(5)).unwrap();
    assert!(report.spectrum.is_empty());
    assert!(report.samples_used <= n as u64);
}

#[test]
fn cleanup_of_a_perfect_estimate_stays_within_bound() {
    let (n, k0, k1, eps) = (1usize << 14, 4usize, 8usize, 0.05);
    let runs = 20;
    let mut ok = 0;
    for run in 0..runs {
        let mut r = rng(7800 + run);
        let (head, _) = block_sparse(n, k0, k1, &mut r);
        let mut xhat = head.clone();
        let sd = 0.02;
        for v in xhat.iter_mut() {
            *v += gauss(&mut r) * sd;
        }
        let tail = tail_error(&xhat, k0, k1).unwrap();
        let mu2 = tail / k0 as f64;
        let chi = SparseSpectrum::from_dense(&head);
        let mut chi_exact = SparseSpectrum::new(n);
        for (f, _) in chi.iter() {
            chi_exact.insert(f, xhat[slot(f, n)]);
        }
        let x = idft(&xhat).unwrap();
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let params = RecoveryParams::new(n, k0, k1, 16.0, mu2, eps).with_tuning(Tuning::desk());
        let mut log = Vec::new();
        let out =
            recover_at_const_snr(&src, &chi_exact, &params, &Stream::new(run), &mut log).unwrap();
        let err = energy_of(&xhat, &out);
        ok += usize::from(err <= k0 as f64 * mu2 + 4e5 * eps * k0 as f64 * mu2);
        let added: BTreeSet<i64> = out
            .blocks(k1)
            .difference(&chi_exact.blocks(k1))
            .copied()
            .collect();
        assert!(added.len() as f64 <= 3.0 * k0 as f64 / eps);
    }
    assert!(ok as f64 >= 0.9 * runs as f64, "{ok}/{runs}");
}

struct Poisoned<'a>(CountedSignal<'a>, i64);

impl TimeSamples for Poisoned<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn read(&self, t: i64) -> Complex64 {
        if slot(t, self.len()) as i64 % self.1 == 0 {
            Complex64::new(f64::NAN, 0.0)
        } else {
            self.0.read(t)
        }
    }
}

#[test]
fn non_finite_samples_stop_the_pipeline() {
    let (n, k0, k1) = (1usize << 12, 2usize, 8usize);
    let (xhat, _) = block_sparse(n, k0, k1, &mut rng(80));
    let x = idft(&xhat).unwrap();
    let counter = SampleCounter::new(n);
    let src = Poisoned(CountedSignal::new(&x, &counter), 3);
    let err = block_sparse_ft(&src, &noiseless_params(&xhat, k0, k1), &Stream::new(1)).unwrap_err();
    assert!(matches!(err, BsftError::NonFiniteSample(_)), "{err}");
}

#[test]
fn parameters_are_validated() {
    let ok = RecoveryParams::new(1024, 2, 8, 16.0, 1.0, 0.05);
    assert!(ok.validate().is_ok());
    for bad in [
        RecoveryParams {
            n: 1000,
            ..ok.clone()
        },
        RecoveryParams {
            k0: 0,
            ..ok.clone()
        },
        RecoveryParams {
            k0: 200,
            ..ok.clone()
        },
        RecoveryParams {
            snr_prime: 1.5,
            ..ok.clone()
        },
        RecoveryParams {
            snr_prime: f64::INFINITY,
            ..ok.clone()
        },
        RecoveryParams {
            nu2: 0.0,
            ..ok.clone()
        },
        RecoveryParams {
            eps: 0.06,
            ..ok.clone()
        },
        RecoveryParams {
            eps: 1.0 / 1024.0,
            ..ok.clone()
        },
        RecoveryParams {
            delta_const: 0.2,
            ..ok.clone()
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
    let x = Signal::zeros(512).unwrap();
    let counter = SampleCounter::new(512);
    assert!(block_sparse_ft(&CountedSignal::new(&x, &counter), &ok, &Stream::new(1)).is_err());
}

#[test]
fn runs_are_reproducible() {
    let (n, k0, k1) = (1usize << 13, 2usize, 8usize);
    let (xhat, _) = block_sparse(n, k0, k1, &mut rng(81));
    let x = idft(&xhat).unwrap();
    let params = noiseless_params(&xhat, k0, k1);
    let run = || {
        let counter = SampleCounter::new(n);
        let mut r =
            block_sparse_ft(&CountedSignal::new(&x, &counter), &params, &Stream::new(9)).unwrap();
        r.wall_time_ms = 0.0;
        r
    };
    assert_eq!(run(), run());
}
