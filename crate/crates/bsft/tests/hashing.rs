mod common;

use bsft::downsampling::{DownsampleView, ReducedSpectra};
use bsft::filters::make_flat_filter;
use bsft::hashing::*;
use bsft::oracles::{exact_hashed_spectrum, exact_reduced_spectra};
use bsft::signal::*;
use bsft::tuning::Tuning;
use bsft::Complex64;
use common::*;
use proptest::prelude::*;

fn residual(xhat: &[Complex64], chi: &SparseSpectrum) -> Vec<Complex64> {
    let n = xhat.len();
    let mut res = xhat.to_vec();
    for (f, v) in chi.iter() {
        res[slot(f, n)] -= v;
    }
    res
}

#[test]
fn permutation_is_approximately_pairwise_independent() {
    let m = 16usize;
    for i in 0..m as i64 {
        for i2 in 0..m as i64 {
            if i == i2 {
                continue;
            }
            for t in 0..=4i64 {
                let close = (1..m as i64)
                    .step_by(2)
                    .filter(|&s| {
                        let p = HashParams::new(m, 4, s, 0).unwrap();
                        canon(p.permute(i) - p.permute(i2), m).abs() <= t
                    })
                    .count();
                assert!(
                    close as f64 / (m / 2) as f64 <= 4.0 * t as f64 / m as f64,
                    "i {i} i' {i2} t {t}"
                );
            }
        }
    }
}

#[test]
fn hashed_bins_match_dense_formula() {
    let (n, b) = (256usize, 16usize);
    let mut rng = rng(31);
    for _ in 0..10 {
        let x = random_signal(n, &mut rng);
        let xhat = dft(&x);
        let g = make_flat_filter(n, b, 6).unwrap();
        let p = random_hash_params(n, b, &mut rng).unwrap();
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let u = bins_from_time(hash_time_domain(&src, &g, &p).unwrap()).unwrap();
        let want = exact_hashed_spectrum(&xhat, &g, &p);
        assert!(max_diff(&u, &want) <= 1e-9 * norm(&xhat));
        assert_eq!(
            counter.total(),
            g.time_values().iter().filter(|w| **w != 0.0).count() as u64
        );
    }
}

#[test]
fn zero_signal_hashes_to_zero() {
    let x = Signal::zeros(128).unwrap();
    let counter = SampleCounter::new(128);
    let src = CountedSignal::new(&x, &counter);
    let g = make_flat_filter(128, 8, 4).unwrap();
    let p = HashParams::new(128, 8, 3, 5).unwrap();
    assert!(hash_to_bins(&src, &SparseSpectrum::new(128), &g, &p)
        .unwrap()
        .iter()
        .all(|v| v.norm() == 0.0));
}

#[test]
fn empty_estimate_is_plain_hashing() {
    let n = 256;
    let mut rng = rng(32);
    let x = random_signal(n, &mut rng);
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let g = make_flat_filter(n, 16, 4).unwrap();
    let p = random_hash_params(n, 16, &mut rng).unwrap();
    let plain = bins_from_time(hash_time_domain(&src, &g, &p).unwrap()).unwrap();
    assert_eq!(
        hash_to_bins(&src, &SparseSpectrum::new(n), &g, &p).unwrap(),
        plain
    );
}

#[test]
fn exact_estimate_leaves_nothing() {
    let n = 128;
    let mut rng = rng(33);
    let x = random_signal(n, &mut rng);
    let xhat = dft(&x);
    let chi = SparseSpectrum::from_dense(&xhat);
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let g = make_flat_filter(n, 8, 4).unwrap();
    let p = random_hash_params(n, 8, &mut rng).unwrap();
    for mode in [
        ChiEvaluation::Direct,
        ChiEvaluation::SemiEquispaced,
        ChiEvaluation::Auto,
    ] {
        let u = hash_to_bins_with(&src, &chi, &g, &p, mode).unwrap();
        assert!(u.iter().all(|v| v.norm() <= 1e-8 * norm(&xhat)), "{mode:?}");
    }
}

#[test]
fn residual_hashing_matches_dense_formula() {
    let (n, b) = (512usize, 16usize);
    let mut rng = rng(34);
    for case in 0..10 {
        let x = random_signal(n, &mut rng);
        let chi = random_sparse(n, 5 + case, &mut rng);
        let want_res = residual(&dft(&x), &chi);
        let g = make_flat_filter(n, b, 8).unwrap();
        let p = random_hash_params(n, b, &mut rng).unwrap();
        let want = exact_hashed_spectrum(&want_res, &g, &p);
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        for mode in [ChiEvaluation::Direct, ChiEvaluation::SemiEquispaced] {
            let u = hash_to_bins_with(&src, &chi, &g, &p, mode).unwrap();
            assert!(
                max_diff(&u, &want) <= 1e-8 * chi.energy().sqrt(),
                "{mode:?}"
            );
        }
    }
}

#[test]
fn mismatched_shapes_are_rejected() {
    let x = Signal::zeros(128).unwrap();
    let counter = SampleCounter::new(128);
    let src = CountedSignal::new(&x, &counter);
    let g = make_flat_filter(128, 8, 4).unwrap();
    assert!(hash_to_bins(
        &src,
        &SparseSpectrum::new(128),
        &g,
        &HashParams::new(128, 16, 1, 0).unwrap()
    )
    .is_err());
    assert!(hash_to_bins(
        &src,
        &SparseSpectrum::new(64),
        &g,
        &HashParams::new(128, 8, 1, 0).unwrap()
    )
    .is_err());
    assert!(HashParams::new(128, 8, 4, 0).is_err());
}

fn reduced_setup(seed: u64, chi_terms: usize) -> (Signal, Vec<Complex64>, SparseSpectrum) {
    let n = 1024;
    let mut rng = rng(seed);
    let x = random_signal(n, &mut rng);
    let chi = if chi_terms == 0 {
        SparseSpectrum::new(n)
    } else {
        random_sparse(n, chi_terms, &mut rng)
    };
    let res = residual(&dft(&x), &chi);
    (x, res, chi)
}

#[test]
fn reduced_hashing_matches_each_shift() {
    let k1 = 4;
    for (seed, terms) in [(35u64, 0usize), (36, 9), (37, 20)] {
        let (x, res, chi) = reduced_setup(seed, terms);
        let n = x.len();
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let view = DownsampleView::new(&src, k1, 0.05).unwrap();
        let m = view.m();
        let reduced = ReducedSpectra::new(&chi, view.filter(), k1).unwrap();
        let exact = exact_reduced_spectra(&res, view.filter(), k1);
        let buckets: Vec<usize> = if terms == 0 {
            vec![16; 2 * k1]
        } else {
            (0..2 * k1).map(|r| [0usize, 4, 8, 32][r % 4]).collect()
        };
        let shape = FilterShape {
            order: 4,
            width: 1.0,
        };
        let p = HashParams::new(m, 4, 77, 19).unwrap();
        let out =
            hash_to_bins_reduced(&view, &reduced, &buckets, shape, p.sigma(), p.shift()).unwrap();
        let scale = if terms == 0 { 1.0 } else { chi.energy().sqrt() };
        for r in 0..2 * k1 {
            match (&out[r], buckets[r]) {
                (None, 0) => {}
                (Some(u), b) => {
                    let g = shape.build(m, b).unwrap();
                    let want = exact_hashed_spectrum(&exact[r], &g, &p.with_buckets(b).unwrap());
                    assert!(max_diff(u, &want) <= 1e-8 * scale, "seed {seed} r {r}");
                }
                (None, _) => panic!("shift {r} was skipped"),
            }
        }
    }
}

#[test]
fn skipped_shifts_cost_nothing() {
    let (x, _, _) = reduced_setup(38, 0);
    let n = x.len();
    let k1 = 4;
    let shape = FilterShape {
        order: 4,
        width: 1.0,
    };
    let reads = |b: usize| {
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let view = DownsampleView::new(&src, k1, 0.05).unwrap();
        let chi = ReducedSpectra::new(&SparseSpectrum::new(n), view.filter(), k1).unwrap();
        let mut buckets = vec![0; 2 * k1];
        buckets[3] = b;
        let out = hash_to_bins_reduced(&view, &chi, &buckets, shape, 5, 0).unwrap();
        assert_eq!(out.iter().filter(|u| u.is_some()).count(), 1);
        assert!(out[3].is_some());
        (
            counter.total(),
            shape.build(n / k1, b).unwrap().support_len() as u64,
        )
    };
    for b in [4usize, 16] {
        let (total, window) = reads(b);
        assert!(
            total <= k1 as u64 * window,
            "B {b}: {total} reads for a window of {window}"
        );
    }
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let view = DownsampleView::new(&src, k1, 0.05).unwrap();
    let chi = ReducedSpectra::new(&SparseSpectrum::new(n), view.filter(), k1).unwrap();
    let out = hash_to_bins_reduced(&view, &chi, &vec![0; 2 * k1], shape, 5, 0).unwrap();
    assert!(out.iter().all(|u| u.is_none()));
    assert_eq!(counter.total(), 0);
}

#[test]
fn energy_estimates() {
    let (n, k1, k0, delta) = (1024usize, 4usize, 2usize, 0.05);
    let tuning = Tuning {
        energy_bucket_scale: 0.01,
        ..Tuning::desk()
    };
    let mut rng = rng(39);
    let x = random_signal(n, &mut rng);
    let xhat = dft(&x);

    let exact_chi = SparseSpectrum::from_dense(&xhat);
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let view = DownsampleView::new(&src, k1, delta).unwrap();
    let chi = ReducedSpectra::new(&exact_chi, view.filter(), k1).unwrap();
    let gamma = estimate_energies(&view, &chi, k0, delta, &tuning, &mut rng).unwrap();
    let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
    assert!(gamma.iter().all(|g| *g <= 1e-16 * total), "{gamma:?}");

    let chi = ReducedSpectra::new(&SparseSpectrum::new(n), view.filter(), k1).unwrap();
    let mut mean = vec![0.0; 2 * k1];
    let trials = 200;
    for _ in 0..trials {
        let g = estimate_energies(&view, &chi, k0, delta, &tuning, &mut rng).unwrap();
        for (acc, v) in mean.iter_mut().zip(g) {
            *acc += v / trials as f64;
        }
    }
    for (r, z) in exact_reduced_spectra(&xhat, view.filter(), k1)
        .iter()
        .enumerate()
    {
        let e: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        assert!(mean[r] <= 3.0 * e * 1.2, "r {r}: {} vs {e}", mean[r]);
        assert!(mean[r] >= 0.1 * e, "r {r}: {} vs {e}", mean[r]);
    }
}

proptest! {
    #[test]
    fn permutation_is_a_bijection(log_m in 2u32..12, half in 0i64..2048, shift in 0i64..4096) {
        let m = 1usize << log_m;
        let sigma = 2 * (half % (m as i64 / 2).max(1)) + 1;
        let p = HashParams::new(m, 2.min(m), sigma, shift).unwrap();
        let mut seen = vec![false; m];
        for f in index_range(m) {
            let s = slot(p.permute(f), m);
            prop_assert!(!seen[s]);
            seen[s] = true;
        }
        prop_assert_eq!(canon(p.sigma() * p.sigma_inverse(), m), 1);
    }

    #[test]
    fn offsets_stay_within_half_a_bucket(log_m in 4u32..11, log_b in 1u32..4, sigma in 0i64..1000, f in -2000i64..2000) {
        let m = 1usize << log_m;
        let b = 1usize << log_b;
        let p = HashParams::new(m, b, 2 * sigma + 1, 0).unwrap();
        let w = (m / b) as i64;
        prop_assert!(2 * p.offset(f).abs() <= w);
        prop_assert_eq!(canon(p.bucket(f) * w + p.offset(f), m), p.permute(f));
    }
}
