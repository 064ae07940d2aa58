//! Cross-oracle agreement suite: every fast routine against its dense reference.

use anyhow::{bail, Result};
use bsft::downsampling::{z_spectrum_exact, DownsampleView, ReducedSpectra};
use bsft::filters::{check_flat_bounds, make_flat_filter};
use bsft::hashing::{hash_to_bins_reduced_with, hash_to_bins_with, random_hash_params, ChiEvaluation, FilterShape};
use bsft::oracles::exact_hashed_spectrum;
use bsft::rng::Stream;
use bsft::semi_equi::{semi_equi_inverse_block_fft, semi_equi_inverse_fft, Targets};
use bsft::signal::{dft, idft, slot, CountedSignal, SampleCounter, Signal, SparseSpectrum};
use bsft::Complex64;
use rand::Rng;
use serde::Serialize;

/// Largest n the suite accepts; every check reads the whole signal.
pub const MAX_ORACLE_N: usize = 4096;

#[derive(Clone, Debug)]
pub struct OracleSuite {
    pub n: usize,
    pub k1: usize,
    pub cases: usize,
    pub seed: u64,
    /// Multiplies every tolerance; 0 makes any rounding error a failure.
    pub tolerance_scale: f64,
    /// Flat filter order used by the filter and hashing checks.
    pub filter_order: usize,
}

impl Default for OracleSuite {
    fn default() -> Self {
        Self { n: 1024, k1: 4, cases: 10, seed: 1, tolerance_scale: 1.0, filter_order: 8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl Check {
    fn new(name: &str, max_error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), max_error, tolerance, pass: max_error <= tolerance, note: None }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Self {
            name: name.into(),
            max_error: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
            note: Some(err.to_string()),
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn random_signal(n: usize, rng: &mut impl Rng) -> Signal {
    Signal::new((0..n).map(|_| gaussian(rng)).collect()).expect("power-of-two length")
}

fn random_sparse(n: usize, k: usize, rng: &mut impl Rng) -> SparseSpectrum {
    let mut s = SparseSpectrum::new(n);
    while s.len() < k {
        s.insert(rng.random_range(0..n as i64) - n as i64 / 2 + 1, gaussian(rng));
    }
    s
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

impl OracleSuite {
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() || self.n < 64 || self.n > MAX_ORACLE_N {
            bail!("oracle checks need a power-of-two n in [64, {MAX_ORACLE_N}], got {}", self.n);
        }
        if !self.k1.is_power_of_two() || 8 * self.k1 > self.n {
            bail!("k1 = {} must be a power of two with 8 k1 <= n", self.k1);
        }
        if !(self.tolerance_scale >= 0.0) {
            bail!("tolerance scale must be nonnegative");
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Vec<Check>> {
        self.validate()?;
        let stream = Stream::new(self.seed).child("oracle-check");
        let mut out = self.filter_checks();
        out.push(self.capture("downsampling", |s| s.downsampling(&stream.child("down"))));
        out.push(self.capture("downsampling-energy", |s| s.downsampling_energy(&stream.child("down"))));
        for (name, mode) in [("hashing-direct", ChiEvaluation::Direct), ("hashing-semi-equispaced", ChiEvaluation::SemiEquispaced)] {
            out.push(self.capture(name, |s| s.hashing(&stream.child(name), mode)));
        }
        for (name, mode) in [
            ("reduced-hashing-direct", ChiEvaluation::Direct),
            ("reduced-hashing-semi-equispaced", ChiEvaluation::SemiEquispaced),
        ] {
            out.push(self.capture(name, |s| s.reduced_hashing(&stream.child(name), mode)));
        }
        out.push(self.capture("semi-equispaced", |s| s.semi_equi(&stream.child("semi"))));
        out.push(self.capture("semi-equispaced-block", |s| s.semi_equi_block(&stream.child("semi-block"))));
        Ok(out)
    }

    fn capture(&self, name: &str, f: impl FnOnce(&Self) -> Result<(f64, f64)>) -> Check {
        match f(self) {
            Ok((err, tol)) => Check::new(name, err, tol * self.tolerance_scale),
            Err(e) => Check::failed(name, e),
        }
    }

    /// Counts bound violations over every bucket count B in [4, 64]; tolerance 0.
    fn filter_checks(&self) -> Vec<Check> {
        let mut violations = 0usize;
        let mut worst_energy: f64 = 0.0;
        let mut b = 4;
        while b <= 64 && b < self.n {
            match make_flat_filter(self.n, b, self.filter_order) {
                Ok(g) => {
                    let r = check_flat_bounds(&g);
                    violations += r.range_violations + r.pass_violations + r.stop_violations + r.asymmetric;
                    worst_energy = worst_energy.max(r.energy / r.energy_limit);
                }
                Err(e) => return vec![Check::failed("filter-construction", e)],
            }
            b *= 2;
        }
        vec![
            Check::new("filter-bounds", violations as f64, 0.0),
            Check::new("filter-energy", worst_energy, 1.0),
        ]
    }

    /// Relative max error of FFT(Z^r) against the convolution formula.
    fn downsampling(&self, stream: &Stream) -> Result<(f64, f64)> {
        let n = self.n;
        let mut rng = stream.rng();
        let mut worst: f64 = 0.0;
        for _ in 0..self.cases {
            let x = random_signal(n, &mut rng);
            let xhat = dft(&x);
            let c = SampleCounter::new(n);
            let src = CountedSignal::new(&x, &c);
            let view = DownsampleView::new(&src, self.k1, 0.05)?;
            let m = view.m();
            for r in 0..view.count() {
                let z: Vec<Complex64> = (0..m)
                    .map(|s| view.z_entry_x(r, bsft::signal::canon(s as i64, m)))
                    .collect::<bsft::Result<_>>()?;
                let got = dft(&Signal::new(z)?);
                let want = z_spectrum_exact(&xhat, view.filter(), self.k1, r);
                let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                worst = worst.max(max_diff(&got, &want) / scale);
            }
        }
        Ok((worst, 1e-9))
    }

    /// Largest violation of the sandwich (1 - 12 delta)||X||^2 <= avg_r ||Z^r||^2 <= 6 ||X||^2,
    /// as a ratio to the nearer bound (at most 1 when it holds).
    fn downsampling_energy(&self, stream: &Stream) -> Result<(f64, f64)> {
        let n = self.n;
        let delta = 0.05;
        let mut rng = stream.rng();
        let mut worst: f64 = 0.0;
        for case in 0..self.cases {
            let xhat: Vec<Complex64> = if case % 2 == 0 {
                (0..n).map(|_| gaussian(&mut rng)).collect()
            } else {
                random_sparse(n, 8, &mut rng).to_dense()
            };
            let x = idft(&xhat)?;
            let c = SampleCounter::new(n);
            let src = CountedSignal::new(&x, &c);
            let view = DownsampleView::new(&src, self.k1, delta)?;
            let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
            let rows = view.count();
            let avg = (0..rows)
                .map(|r| z_spectrum_exact(&xhat, view.filter(), self.k1, r).iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                / rows as f64;
            worst = worst.max((1.0 - 12.0 * delta) * total / avg).max(avg / (6.0 * total));
        }
        Ok((worst, 1.0))
    }

    /// HashToBins on a residual X - chi against the dense hashed spectrum, relative to ||chi||.
    fn hashing(&self, stream: &Stream, mode: ChiEvaluation) -> Result<(f64, f64)> {
        let n = self.n;
        let mut rng = stream.rng();
        let mut worst: f64 = 0.0;
        for case in 0..self.cases {
            let x = random_signal(n, &mut rng);
            let xhat = dft(&x);
            let chi = random_sparse(n, 4 + case % 16, &mut rng);
            let mut res = xhat.clone();
            for (f, v) in chi.iter() {
                res[slot(f, n)] -= v;
            }
            let b = [8usize, 16, 32, 64][case % 4].min(n / 4);
            let g = make_flat_filter(n, b, self.filter_order)?;
            let p = random_hash_params(n, b, &mut rng)?;
            let c = SampleCounter::new(n);
            let src = CountedSignal::new(&x, &c);
            let got = hash_to_bins_with(&src, &chi, &g, &p, mode)?;
            let want = exact_hashed_spectrum(&res, &g, &p);
            worst = worst.max(max_diff(&got, &want) / chi.energy().sqrt());
        }
        Ok((worst, 1e-8))
    }

    /// Every r of the reduced hashing against the dense hashed spectrum of Z^r.
    fn reduced_hashing(&self, stream: &Stream, mode: ChiEvaluation) -> Result<(f64, f64)> {
        let n = self.n;
        let k1 = self.k1;
        let mut rng = stream.rng();
        let mut worst: f64 = 0.0;
        for case in 0..self.cases {
            let x = random_signal(n, &mut rng);
            let xhat = dft(&x);
            let chi = random_sparse(n, 4 + case % 16, &mut rng);
            let mut res = xhat.clone();
            for (f, v) in chi.iter() {
                res[slot(f, n)] -= v;
            }
            let c = SampleCounter::new(n);
            let src = CountedSignal::new(&x, &c);
            let view = DownsampleView::new(&src, k1, 0.05)?;
            let m = view.m();
            let reduced = ReducedSpectra::new(&chi, view.filter(), k1)?;
            let buckets: Vec<usize> = (0..view.count())
                .map(|r| if r == case % view.count() { 0 } else { [4usize, 8, 16][r % 3].min(m / 4) })
                .collect();
            let shape = FilterShape { order: 2 + 2 * (case % 3), width: 2.0 };
            let p = random_hash_params(m, 4, &mut rng)?;
            let out = hash_to_bins_reduced_with(&view, &reduced, &buckets, shape, p.sigma(), p.shift(), mode)?;
            for (r, u) in out.iter().enumerate() {
                match (u, buckets[r]) {
                    (None, 0) => {}
                    (Some(u), b) if b > 0 => {
                        let g = shape.build(m, b)?;
                        let want = exact_hashed_spectrum(&z_spectrum_exact(&res, view.filter(), k1, r), &g, &p.with_buckets(b)?);
                        worst = worst.max(max_diff(u, &want) / chi.energy().sqrt());
                    }
                    _ => bail!("shift {r} skipped or hashed against its budget"),
                }
            }
        }
        Ok((worst, 1e-8))
    }

    fn targets(&self, rng: &mut impl Rng, case: usize) -> Targets {
        if case % 2 == 0 {
            Targets::IDENTITY
        } else {
            Targets { sigma: 2 * rng.random_range(0..self.n as i64 / 2) + 1, shift: rng.random_range(0..self.n as i64) }
        }
    }

    /// max |Y_j - X_{target(j)}| / ||X||_2 against a dense inverse transform.
    fn semi_equi(&self, stream: &Stream) -> Result<(f64, f64)> {
        let n = self.n;
        let zeta = 1e-9;
        let mut rng = stream.rng();
        let mut worst: f64 = 0.0;
        for case in 0..self.cases {
            let k = [16usize, 32, 64][case % 3];
            let xhat = random_sparse(n, k, &mut rng);
            let tg = self.targets(&mut rng, case);
            let y = semi_equi_inverse_fft(&xhat, k, zeta, tg)?;
            let x = idft(&xhat.to_dense())?;
            let half = (k / 2) as i64;
            let err = (-half..=half)
                .zip(&y)
                .map(|(j, v)| (v - x.at(tg.at(j, n))).norm())
                .fold(0.0, f64::max);
            worst = worst.max(err / norm(x.values()));
        }
        Ok((worst, zeta))
    }

    /// Block variant: Y^r_j against X at target(j) + n r / (2 k1).
    fn semi_equi_block(&self, stream: &Stream) -> Result<(f64, f64)> {
        let n = self.n;
        let k1 = self.k1;
        let zeta = 1e-9;
        let mut rng = stream.rng();
        let mut worst: f64 = 0.0;
        for case in 0..self.cases {
            let k = [16usize, 32, 64][case % 3];
            let xhat = random_sparse(n, k, &mut rng);
            let tg = self.targets(&mut rng, case);
            let ys = semi_equi_inverse_block_fft(&xhat, k1, k, zeta, tg)?;
            let x = idft(&xhat.to_dense())?;
            let half = (k / 2) as i64;
            let step = (n / (2 * k1)) as i64;
            for (r, y) in ys.iter().enumerate() {
                let err = (-half..=half)
                    .zip(y)
                    .map(|(j, v)| (v - x.at(tg.at(j, n) + step * r as i64)).norm())
                    .fold(0.0, f64::max);
                worst = worst.max(err / norm(x.values()));
            }
        }
        Ok((worst, zeta))
    }
}
