#![allow(dead_code)]

use bsft::signal::{slot, Signal, SparseSpectrum};
use bsft::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gauss(rng: &mut impl Rng) -> Complex64 {
    let d = rand_distr::StandardNormal;
    Complex64::new(rng.sample::<f64, _>(d), rng.sample::<f64, _>(d))
}

pub fn random_signal(n: usize, rng: &mut impl Rng) -> Signal {
    Signal::new((0..n).map(|_| gauss(rng)).collect()).unwrap()
}

pub fn random_sparse(n: usize, k: usize, rng: &mut impl Rng) -> SparseSpectrum {
    let mut s = SparseSpectrum::new(n);
    while s.len() < k {
        s.insert(rng.random_range(0..n as i64) - n as i64 / 2 + 1, gauss(rng));
    }
    s
}

/// Dense spectrum with `k0` distinct random blocks of width `k1` filled with Gaussians.
pub fn block_sparse(
    n: usize,
    k0: usize,
    k1: usize,
    rng: &mut impl Rng,
) -> (Vec<Complex64>, Vec<i64>) {
    let m = (n / k1) as i64;
    let mut blocks = Vec::new();
    while blocks.len() < k0 {
        let j = rng.random_range(0..m) - m / 2 + 1;
        if !blocks.contains(&j) {
            blocks.push(j);
        }
    }
    let mut xhat = vec![Complex64::new(0.0, 0.0); n];
    for &j in &blocks {
        for f in bsft::signal::block_frequencies(j, k1, n) {
            xhat[slot(f, n)] = gauss(rng);
        }
    }
    (xhat, blocks)
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// O(n^2) forward transform with the 1/n factor, slot-indexed.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n as i64)
        .map(|f| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * bsft::signal::root(-f * t as i64, n))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// O(n^2) inverse transform without a factor.
pub fn naive_idft(xhat: &[Complex64]) -> Vec<Complex64> {
    let n = xhat.len();
    (0..n as i64)
        .map(|t| {
            xhat.iter()
                .enumerate()
                .map(|(f, &v)| v * bsft::signal::root(f as i64 * t, n))
                .sum()
        })
        .collect()
}
