mod common;

use bsft::downsampling::*;
use bsft::oracles::exact_reduced_spectra;
use bsft::signal::*;
use bsft::Complex64;
use common::*;
use proptest::prelude::*;

fn time_z(view: &DownsampleView<'_, CountedSignal<'_>>, r: usize) -> Vec<Complex64> {
    let m = view.m();
    (0..m)
        .map(|s| view.z_entry_x(r, s as i64).unwrap())
        .collect()
}

#[test]
fn entries_match_convolution_formula() {
    let (n, k1) = (256usize, 4usize);
    let mut rng = rng(21);
    let x = random_signal(n, &mut rng);
    let xhat = dft(&x);
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let view = DownsampleView::new(&src, k1, 0.05).unwrap();
    assert_eq!(view.count(), 2 * k1);
    for r in 0..view.count() {
        let want = idft(&z_spectrum_exact(&xhat, view.filter(), k1, r)).unwrap();
        let got = time_z(&view, r);
        assert!(
            max_diff(&got, want.values()) <= 1e-9 * norm(want.values()),
            "r = {r}"
        );
        let spectrum = dft(&Signal::new(got).unwrap());
        let exact = z_spectrum_exact(&xhat, view.filter(), k1, r);
        assert!(max_diff(&spectrum, &exact) <= 1e-9 * norm(&exact));
    }
}

#[test]
fn zero_residual_when_estimate_is_exact() {
    let (n, k1) = (512usize, 8usize);
    let mut rng = rng(22);
    let sparse = random_sparse(n, 12, &mut rng);
    let x = idft(&sparse.to_dense()).unwrap();
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let view = DownsampleView::new(&src, k1, 0.05).unwrap();
    let chi = ReducedSpectra::new(&sparse, view.filter(), k1).unwrap();
    let scale = norm(x.values());
    for r in 0..view.count() {
        for j in -31..=32 {
            let z = view.z_entry(r, j, chi.value(r, j)).unwrap();
            assert!(z.norm() <= 1e-9 * scale, "r {r} j {j}: {z}");
        }
    }
    let exact = exact_reduced_spectra(&sparse.to_dense(), view.filter(), k1);
    for (r, row) in exact.iter().enumerate() {
        let dense = chi.spectrum(r).to_dense();
        assert!(max_diff(&dense, row) <= 1e-12 * norm(&sparse.to_dense()));
    }
}

#[test]
fn pure_tone_lands_in_its_block() {
    let (n, k1) = (1024usize, 8usize);
    let f0 = 201i64;
    let mut xhat = vec![c(0.0, 0.0); n];
    xhat[slot(f0, n)] = c(1.0, 0.0);
    let x = idft(&xhat).unwrap();
    let counter = SampleCounter::new(n);
    let src = CountedSignal::new(&x, &counter);
    let view = DownsampleView::new(&src, k1, 0.05).unwrap();
    let m = view.m();
    let j0 = (f0 as f64 / k1 as f64).round() as i64;
    for r in 0..view.count() {
        let zhat = dft(&Signal::new(time_z(&view, r)).unwrap());
        let peak = (0..m)
            .max_by(|&a, &b| zhat[a].norm().total_cmp(&zhat[b].norm()))
            .unwrap();
        assert_eq!(canon(peak as i64, m), j0);
        let a = (n / (2 * k1) * r) as i64;
        let want = view.filter().freq(f0 - k1 as i64 * j0) * root(a * f0, n);
        assert!((zhat[slot(j0, m)] - want).norm() <= 1e-9);
    }
}

#[test]
fn energy_sandwich() {
    let (n, k1, delta) = (1024usize, 4usize, 0.05);
    let mut rng = rng(23);
    for case in 0..50 {
        let xhat: Vec<Complex64> = if case % 2 == 0 {
            (0..n).map(|_| gauss(&mut rng)).collect()
        } else {
            block_sparse(n, 3, k1, &mut rng).0
        };
        let x = idft(&xhat).unwrap();
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let view = DownsampleView::new(&src, k1, delta).unwrap();
        let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
        let rows = exact_reduced_spectra(&xhat, view.filter(), k1);
        let avg = rows
            .iter()
            .map(|z| z.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / rows.len() as f64;
        assert!(
            (1.0 - 12.0 * delta) * total <= avg && avg <= 6.0 * total,
            "case {case}: {avg} vs {total}"
        );
    }
}

#[test]
fn coverage_matches_direct_inequality() {
    let mut rng = rng(24);
    let z: Vec<Complex64> = (0..32).map(|_| gauss(&mut rng)).collect();
    let total: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    for j in -15..=16 {
        for s in [1.0, 2.0, 5.0, 10.0, 32.0, 100.0] {
            assert_eq!(is_covered(&z, j, s), z[slot(j, 32)].norm_sqr() >= total / s);
        }
    }
    let mut delta = vec![c(0.0, 0.0); 16];
    delta[slot(-3, 16)] = c(0.0, 1.0);
    assert!(is_covered(&delta, -3, 1.0));
    assert!(!is_covered(&delta, 2, 1.0));
}

#[test]
fn rejects_bad_parameters() {
    let x = Signal::zeros(64).unwrap();
    let counter = SampleCounter::new(64);
    let src = CountedSignal::new(&x, &counter);
    assert!(DownsampleView::new(&src, 3, 0.05).is_err());
    assert!(DownsampleView::new(&src, 64, 0.05).is_err());
    assert!(DownsampleView::new(&src, 4, 0.5).is_err());
    assert!(DownsampleView::new(&src, 4, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn an_entry_reads_at_most_k1_samples(seed in 0u64..500, r in 0usize..8, j in -63i64..=64) {
        let (n, k1) = (512usize, 4usize);
        let x = random_signal(n, &mut rng(seed));
        let counter = SampleCounter::new(n);
        let src = CountedSignal::new(&x, &counter);
        let view = DownsampleView::new(&src, k1, 0.05).unwrap();
        view.z_entry_x(r, j).unwrap();
        prop_assert!(counter.distinct() <= k1 as u64);
    }
}
