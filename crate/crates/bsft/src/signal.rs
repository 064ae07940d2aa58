//! Dense signals, the exact transform pair, block metrics and counted sample access.
//!
//! Indices live on the cyclic group of order n with canonical representatives in
//! (-n/2, n/2]. Dense vectors are stored by slot `i mod n`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::error::{invalid, BsftError, Result};
use crate::fft;

/// Canonical representative of `i` modulo `n` in (-n/2, n/2].
#[inline]
pub fn canon(i: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = i.rem_euclid(n);
    if r > n / 2 {
        r - n
    } else {
        r
    }
}

/// Storage slot of `i` modulo `n`.
#[inline]
pub fn slot(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Iterator over the canonical index set (-n/2, n/2].
pub fn index_range(n: usize) -> impl Iterator<Item = i64> {
    let h = (n / 2) as i64;
    (-h + 1)..=h
}

/// exp(2 pi i k / n) with the exponent reduced exactly first.
#[inline]
pub fn root(k: i64, n: usize) -> Complex64 {
    let r = k.rem_euclid(n as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / n as f64)
}

pub fn check_pow2(n: usize, what: &str) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid(format!(
            "{what} = {n} must be a positive power of two"
        )));
    }
    Ok(())
}

/// Dense complex time-domain signal of power-of-two length.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    values: Vec<Complex64>,
}

impl Signal {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        check_pow2(values.len(), "signal length")?;
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unrestricted access for oracles and generators.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, t: i64) -> Complex64 {
        self.values[slot(t, self.len())]
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }
}

/// X^_f = (1/n) sum_i X_i w^{-fi}, returned by slot.
pub fn dft(x: &Signal) -> Vec<Complex64> {
    let n = x.len();
    let mut v = x.values.clone();
    fft::plan(n)
        .expect("length checked at construction")
        .forward(&mut v);
    let s = 1.0 / n as f64;
    v.iter_mut().for_each(|c| *c *= s);
    v
}

/// Inverse of [`dft`]: X_i = sum_f X^_f w^{fi}.
pub fn idft(xhat: &[Complex64]) -> Result<Signal> {
    check_pow2(xhat.len(), "spectrum length")?;
    Signal::new(fft::inverse(xhat)?)
}

/// Sparse frequency map with canonical keys; zero entries are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSpectrum {
    n: usize,
    entries: BTreeMap<i64, Complex64>,
}

impl SparseSpectrum {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_dense(xhat: &[Complex64]) -> Self {
        let n = xhat.len();
        let mut s = Self::new(n);
        for f in index_range(n) {
            s.insert(f, xhat[slot(f, n)]);
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, f: i64) -> Complex64 {
        self.entries
            .get(&canon(f, self.n))
            .copied()
            .unwrap_or_default()
    }

    /// Sets the entry at `f`, removing it when `v` is zero.
    pub fn insert(&mut self, f: i64, v: Complex64) {
        let f = canon(f, self.n);
        if v.re == 0.0 && v.im == 0.0 {
            self.entries.remove(&f);
        } else {
            self.entries.insert(f, v);
        }
    }

    pub fn add(&mut self, f: i64, v: Complex64) {
        let cur = self.get(f);
        self.insert(f, cur + v);
    }

    pub fn add_all(&mut self, other: &SparseSpectrum) {
        for (&f, &v) in &other.entries {
            self.add(f, v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.entries.iter().map(|(&f, &v)| (f, v))
    }

    pub fn energy(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum()
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.n];
        for (&f, &c) in &self.entries {
            v[slot(f, self.n)] = c;
        }
        v
    }

    /// Canonical block indices touched by the support.
    pub fn blocks(&self, k1: usize) -> BTreeSet<i64> {
        self.entries
            .keys()
            .map(|&f| block_of(f, k1, self.n))
            .collect()
    }
}

/// Index j of the interval I_j = ((j - 1/2) k1, (j + 1/2) k1] holding `f`.
pub fn block_of(f: i64, k1: usize, n: usize) -> i64 {
    let k1 = k1 as i64;
    let f = canon(f, n);
    canon((2 * f + k1 - 1).div_euclid(2 * k1), n / k1 as usize)
}

/// Frequencies of block `j`, in increasing order before reduction.
pub fn block_frequencies(j: i64, k1: usize, n: usize) -> impl Iterator<Item = i64> {
    let k1 = k1 as i64;
    let lo = ((2 * j - 1) * k1).div_euclid(2) + 1;
    (lo..lo + k1).map(move |f| canon(f, n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
}

impl BlockStructure {
    pub fn new(n: usize, k0: usize, k1: usize) -> Result<Self> {
        check_pow2(n, "n")?;
        check_pow2(k1, "k1")?;
        if k1 > n {
            return Err(invalid(format!("k1 = {k1} exceeds n = {n}")));
        }
        if k0 == 0 {
            return Err(invalid("k0 must be positive"));
        }
        Ok(Self { n, k0, k1 })
    }

    pub fn blocks(&self) -> usize {
        self.n / self.k1
    }
}

/// Energy of each block, indexed by block slot.
pub fn block_energies(xhat: &[Complex64], k1: usize) -> Vec<f64> {
    let n = xhat.len();
    let m = n / k1;
    let mut e = vec![0.0; m];
    for f in index_range(n) {
        e[slot(block_of(f, k1, n), m)] += xhat[slot(f, n)].norm_sqr();
    }
    e
}

/// Err^2: energy outside the best k0 blocks.
pub fn tail_error(xhat: &[Complex64], k0: usize, k1: usize) -> Result<f64> {
    let n = xhat.len();
    check_pow2(n, "n")?;
    check_pow2(k1, "k1")?;
    let mut e = block_energies(xhat, k1);
    if k0 >= e.len() {
        return Ok(0.0);
    }
    e.sort_by(|a, b| b.total_cmp(a));
    Ok(e[k0..].iter().sum())
}

/// Indices (canonical) of the `k0` highest-energy blocks, ties broken by index.
pub fn top_blocks(xhat: &[Complex64], k0: usize, k1: usize) -> Vec<i64> {
    let n = xhat.len();
    let m = n / k1;
    let e = block_energies(xhat, k1);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| e[b].total_cmp(&e[a]).then(a.cmp(&b)));
    idx.into_iter()
        .take(k0)
        .map(|s| canon(s as i64, m))
        .collect()
}

/// ||X^||^2 / Err^2; `f64::INFINITY` when the tail is empty.
pub fn snr(xhat: &[Complex64], k0: usize, k1: usize) -> Result<f64> {
    let tail = tail_error(xhat, k0, k1)?;
    let total: f64 = xhat.iter().map(|v| v.norm_sqr()).sum();
    if tail == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(total / tail)
}

/// Noise description handed to the recovery pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub mu2: f64,
    pub snr_bound: f64,
    pub eps: f64,
}

impl NoiseModel {
    pub fn new(mu2: f64, snr_bound: f64, eps: f64, n: usize) -> Result<Self> {
        if !(mu2 >= 0.0) {
            return Err(invalid("mu2 must be nonnegative"));
        }
        if !(snr_bound >= 2.0) {
            return Err(invalid(format!("SNR bound {snr_bound} must be at least 2")));
        }
        if !(eps > 1.0 / n as f64 && eps <= 1.0 / 20.0) {
            return Err(invalid(format!("eps = {eps} outside (1/n, 1/20]")));
        }
        Ok(Self {
            mu2,
            snr_bound,
            eps,
        })
    }
}

/// Records which time indices have been read.
#[derive(Debug)]
pub struct SampleCounter {
    n: usize,
    bits: Vec<AtomicU64>,
    distinct: AtomicU64,
    total: AtomicU64,
    cap: Option<u64>,
}

impl SampleCounter {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            bits: (0..n.div_ceil(64)).map(|_| AtomicU64::new(0)).collect(),
            distinct: AtomicU64::new(0),
            total: AtomicU64::new(0),
            cap: None,
        }
    }

    /// Counter that reports `over_budget` once more than `cap` reads happen.
    pub fn with_cap(n: usize, cap: u64) -> Self {
        Self {
            cap: Some(cap),
            ..Self::new(n)
        }
    }

    pub fn record(&self, t: i64) {
        let s = slot(t, self.n);
        let mask = 1u64 << (s % 64);
        let prev = self.bits[s / 64].fetch_or(mask, Ordering::Relaxed);
        if prev & mask == 0 {
            self.distinct.fetch_add(1, Ordering::Relaxed);
        }
        self.total.fetch_add(1, Ordering::Relaxed);
    }

    /// |accessed|: number of distinct indices read.
    pub fn distinct(&self) -> u64 {
        self.distinct.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::Relaxed)
    }

    pub fn contains(&self, t: i64) -> bool {
        let s = slot(t, self.n);
        self.bits[s / 64].load(Ordering::Relaxed) & (1u64 << (s % 64)) != 0
    }

    pub fn over_budget(&self) -> bool {
        self.cap.is_some_and(|c| self.total() > c)
    }
}

/// Time-domain access used by every sublinear routine.
pub trait TimeSamples {
    fn len(&self) -> usize;
    fn read(&self, t: i64) -> Complex64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Counter recording the reads, if any.
    fn counter(&self) -> Option<&SampleCounter> {
        None
    }
}

/// A signal bound to a counter; the only sample path for sublinear code.
pub struct CountedSignal<'a> {
    signal: &'a Signal,
    counter: &'a SampleCounter,
}

impl<'a> CountedSignal<'a> {
    pub fn new(signal: &'a Signal, counter: &'a SampleCounter) -> Self {
        Self { signal, counter }
    }
}

impl TimeSamples for CountedSignal<'_> {
    fn len(&self) -> usize {
        self.signal.len()
    }

    fn read(&self, t: i64) -> Complex64 {
        counted_read(self.signal, self.counter, t)
    }

    fn counter(&self) -> Option<&SampleCounter> {
        Some(self.counter)
    }
}

/// X_t (index mod n), recording t in the counter.
pub fn counted_read(x: &Signal, counter: &SampleCounter, t: i64) -> Complex64 {
    counter.record(t);
    x.at(t)
}

const MAGIC: &[u8; 5] = b"BSFT1";

pub fn write_signal(x: &Signal, w: &mut impl Write) -> Result<()> {
    let io = |e: std::io::Error| BsftError::Io(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(x.len() as u64).to_le_bytes()).map_err(io)?;
    for v in x.values() {
        w.write_all(&v.re.to_le_bytes()).map_err(io)?;
        w.write_all(&v.im.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_signal(r: &mut impl Read) -> Result<Signal> {
    let io = |e: std::io::Error| BsftError::Io(e.to_string());
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(invalid("missing BSFT1 header"));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8) as usize;
    check_pow2(n, "signal length")?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8).map_err(io)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(io)?;
        values.push(Complex64::new(re, f64::from_le_bytes(b8)));
    }
    Signal::new(values)
}

pub fn save_signal(x: &Signal, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)
        .map_err(|e| BsftError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(f);
    write_signal(x, &mut w)?;
    w.flush()
        .map_err(|e| BsftError::Io(format!("{}: {e}", path.display())))
}

pub fn load_signal(path: &Path) -> Result<Signal> {
    let f =
        std::fs::File::open(path).map_err(|e| BsftError::Io(format!("{}: {e}", path.display())))?;
    read_signal(&mut std::io::BufReader::new(f))
}

/// Two-column `re,im` text; blank lines and lines starting with `#` are skipped.
pub fn read_csv_signal(r: impl BufRead) -> Result<Signal> {
    let mut values = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line.map_err(|e| BsftError::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| invalid(format!("line {}: expected re,im", no + 1)))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("line {}: {e}", no + 1)))
        };
        let re = match parse(parts.next()) {
            Ok(v) => v,
            Err(_) if values.is_empty() => continue, // header row
            Err(e) => return Err(e),
        };
        let im = parse(parts.next())?;
        values.push(Complex64::new(re, im));
    }
    Signal::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_range() {
        assert_eq!(canon(8, 16), 8);
        assert_eq!(canon(9, 16), -7);
        assert_eq!(canon(-8, 16), 8);
        assert_eq!(canon(-7, 16), -7);
        assert_eq!(slot(-1, 16), 15);
    }

    #[test]
    fn blocks_partition() {
        let (n, k1) = (64usize, 4usize);
        let m = n / k1;
        let mut seen = vec![0usize; n];
        for j in index_range(m) {
            for f in block_frequencies(j, k1, n) {
                assert_eq!(block_of(f, k1, n), j);
                seen[slot(f, n)] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(block_of(2, 4, 64), 0);
        assert_eq!(block_of(-2, 4, 64), -1);
        assert_eq!(block_of(3, 4, 64), 1);
    }

    #[test]
    fn sparse_drops_zeros() {
        let mut s = SparseSpectrum::new(16);
        s.insert(3, Complex64::new(1.0, 0.0));
        s.add(3, Complex64::new(-1.0, 0.0));
        assert!(s.is_empty());
        s.insert(19, Complex64::new(0.0, 2.0));
        assert_eq!(s.get(3), Complex64::new(0.0, 2.0));
    }

    #[test]
    fn counter_modular_indexing() {
        let x = Signal::new((0..8).map(|i| Complex64::new(i as f64, 0.0)).collect()).unwrap();
        let c = SampleCounter::new(8);
        assert_eq!(counted_read(&x, &c, 3), counted_read(&x, &c, 11));
        assert_eq!(c.distinct(), 1);
        assert_eq!(c.total(), 2);
        let capped = SampleCounter::with_cap(8, 1);
        capped.record(0);
        assert!(!capped.over_budget());
        capped.record(1);
        assert!(capped.over_budget());
    }

    #[test]
    fn binary_round_trip() {
        let x = Signal::new(
            (0..16)
                .map(|i| Complex64::new(i as f64, -(i as f64)))
                .collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_signal(&x, &mut buf).unwrap();
        assert_eq!(buf.len(), 5 + 8 + 16 * 16);
        assert_eq!(read_signal(&mut buf.as_slice()).unwrap(), x);
    }

    #[test]
    fn csv_with_header() {
        let text = "re,im\n1,0\n0,1\n-1,0\n0,-1\n";
        let x = read_csv_signal(text.as_bytes()).unwrap();
        assert_eq!(x.len(), 4);
        assert_eq!(x.at(1), Complex64::new(0.0, 1.0));
    }
}
