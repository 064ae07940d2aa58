//! Test signals: random blocks, flat-spectrum and single-spike blocks, the
//! geometric staircase, pure tones, plus Gaussian tail noise at a target SNR.

use std::collections::BTreeSet;

use bsft::rng::Stream;
use bsft::signal::{dft, idft, index_range, root, slot, snr, tail_error, top_blocks, Signal};
use bsft::{BsftError, Complex64, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    BlockRandom,
    SincBlocks,
    RectBlocks,
    Staircase,
    Tone,
}

impl Generator {
    pub const ALL: [Generator; 5] =
        [Self::BlockRandom, Self::SincBlocks, Self::RectBlocks, Self::Staircase, Self::Tone];

    pub fn name(&self) -> &'static str {
        match self {
            Self::BlockRandom => "block-random",
            Self::SincBlocks => "sinc-blocks",
            Self::RectBlocks => "rect-blocks",
            Self::Staircase => "staircase",
            Self::Tone => "tone",
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown generator '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    GaussianTail,
    None,
}

impl Noise {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianTail => "gaussian-tail",
            Self::None => "none",
        }
    }
}

impl std::str::FromStr for Noise {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian-tail" => Ok(Self::GaussianTail),
            "none" => Ok(Self::None),
            _ => Err(format!("unknown noise model '{s}'")),
        }
    }
}

/// What a generator needs to know.
#[derive(Clone, Copy, Debug)]
pub struct SignalSpec {
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
    pub snr: f64,
    pub generator: Generator,
    pub noise: Noise,
}

/// A generated signal with its dense spectrum and tail statistics.
pub struct Generated {
    pub signal: Signal,
    pub spectrum: Vec<Complex64>,
    /// Err^2 / k0.
    pub mu2: f64,
    /// ||X^||^2 / Err^2, infinite without a tail.
    pub snr: f64,
}

fn invalid(msg: impl Into<String>) -> BsftError {
    BsftError::InvalidInput(msg.into())
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// k0 distinct blocks, no two adjacent (cyclically).
fn pick_blocks(m: usize, k0: usize, rng: &mut impl Rng) -> Result<Vec<i64>> {
    if 2 * k0 > m {
        return Err(invalid(format!("{k0} non-adjacent blocks do not fit in {m}")));
    }
    let mut taken = BTreeSet::new();
    let mut out = Vec::with_capacity(k0);
    while out.len() < k0 {
        let j = rng.random_range(0..m);
        let near = [j, (j + 1) % m, (j + m - 1) % m];
        if near.iter().any(|s| taken.contains(s)) {
            continue;
        }
        taken.insert(j);
        out.push(bsft::signal::canon(j as i64, m));
    }
    Ok(out)
}

fn place(spec: &mut [Complex64], f: i64, v: Complex64) {
    let n = spec.len();
    spec[slot(f, n)] += v;
}

fn block_signal(s: &SignalSpec, rng: &mut impl Rng) -> Result<Vec<Complex64>> {
    let n = s.n;
    let m = n / s.k1;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for j in pick_blocks(m, s.k0, rng)? {
        let freqs: Vec<i64> = bsft::signal::block_frequencies(j, s.k1, n).collect();
        match s.generator {
            Generator::BlockRandom => freqs.iter().for_each(|&f| place(&mut spec, f, gaussian(rng))),
            Generator::SincBlocks => {
                let a = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
                freqs.iter().for_each(|&f| place(&mut spec, f, a));
            }
            Generator::RectBlocks => {
                let a = Complex64::from_polar((s.k1 as f64).sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                place(&mut spec, j * s.k1 as i64, a);
            }
            Generator::Tone => {
                let f = freqs[rng.random_range(0..freqs.len())];
                place(&mut spec, f, Complex64::new(1.0, 0.0));
            }
            Generator::Staircase => unreachable!("staircase is built in time"),
        }
    }
    Ok(spec)
}

/// Ratio k1 / k0 used by the staircase.
pub const STAIRCASE_RATIO: usize = 4;

/// Sum of k0 time-shifted, modulated copies of a staircase W with L = log2 k0
/// levels: level l has magnitude sqrt(2^{L-l}) on
/// (2^{l-1} - 1) C n / (2 k1) < |t| <= (2^l - 1) C n / (2 k1). Copies sit at
/// multiples of C n / k1 in time and at evenly spread block centres.
pub fn staircase(n: usize, k0: usize, k1: usize) -> Result<Signal> {
    if k0 < 2 || !k0.is_power_of_two() || k1 != STAIRCASE_RATIO * k0 || n < 4 * k1 * k0 {
        return Err(invalid(format!(
            "staircase needs power-of-two k0 >= 2, k1 = {STAIRCASE_RATIO} k0 and n >= 4 k0 k1 (got n={n}, k0={k0}, k1={k1})"
        )));
    }
    let levels = k0.trailing_zeros() as i64;
    let unit = (STAIRCASE_RATIO * n / k1) as i64; // C n / k1
    let base = |t: i64| -> f64 {
        let a = 2 * t.abs();
        for l in 1..=levels {
            if a <= ((1 << l) - 1) * unit {
                return 2f64.powi((levels - l) as i32).sqrt();
            }
        }
        0.0
    };
    let m = (n / k1) as i64;
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..k0 as i64 {
        let centre = c * unit;
        let freq = bsft::signal::canon(c * (m / k0 as i64), m as usize) * k1 as i64;
        for t in index_range(n) {
            let w = base(bsft::signal::canon(t - centre, n));
            if w != 0.0 {
                x[slot(t, n)] += root(freq * t, n) * w;
            }
        }
    }
    Signal::new(x)
}

/// Adds iid complex Gaussian noise to every frequency, scaled so the SNR
/// (total over tail energy) lands on `target`.
fn add_tail_noise(spec: &mut [Complex64], k0: usize, k1: usize, target: f64, rng: &mut impl Rng) -> Result<()> {
    if !(target > 1.0) {
        return Err(invalid(format!("target SNR {target} must exceed 1")));
    }
    let n = spec.len();
    let noise: Vec<Complex64> = (0..n).map(|_| gaussian(rng)).collect();
    let head: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
    let blocks: BTreeSet<i64> = top_blocks(spec, k0, k1).into_iter().collect();
    let mut tail = 0.0;
    let mut all = 0.0;
    for f in index_range(n) {
        let e = noise[slot(f, n)].norm_sqr();
        all += e;
        if !blocks.contains(&bsft::signal::block_of(f, k1, n)) {
            tail += e;
        }
    }
    let denom = target * tail - all;
    if !(denom > 0.0) {
        return Err(invalid("target SNR unreachable for this signal size"));
    }
    let c = (head / denom).sqrt();
    for (s, z) in spec.iter_mut().zip(noise) {
        *s += z * c;
    }
    Ok(())
}

/// Generates one signal from the named stream.
pub fn gen_signal(s: &SignalSpec, stream: &Stream) -> Result<Generated> {
    bsft::signal::check_pow2(s.n, "n")?;
    bsft::signal::check_pow2(s.k1, "k1")?;
    if s.k0 == 0 || s.k0 * s.k1 > s.n {
        return Err(invalid("k0 * k1 must be between 1 and n"));
    }
    let mut rng = stream.child("signal").rng();
    let mut spectrum = match s.generator {
        Generator::Staircase => dft(&staircase(s.n, s.k0, s.k1)?),
        _ => block_signal(s, &mut rng)?,
    };
    if s.noise == Noise::GaussianTail {
        add_tail_noise(&mut spectrum, s.k0, s.k1, s.snr, &mut stream.child("noise").rng())?;
    }
    let signal = idft(&spectrum)?;
    let tail = tail_error(&spectrum, s.k0, s.k1)?;
    Ok(Generated { signal, mu2: tail / s.k0 as f64, snr: snr(&spectrum, s.k0, s.k1)?, spectrum })
}
