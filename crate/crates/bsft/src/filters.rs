//! Flat filters (rect-convolved boxcar powers) and sharp Gaussian-windowed filters.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::{invalid, BsftError, Result};
use crate::signal::{canon, check_pow2, slot};

/// Default ratio C in B' = 8 C B.
pub const DEFAULT_WIDTH_CONSTANT: f64 = 2.0;
/// Times B' may be doubled after a failed bound check.
pub const MAX_RETRIES: usize = 3;
/// Frequency responses below this are treated as zero by sparse convolutions.
pub const FREQ_FLOOR: f64 = 1e-18;

/// An (n, B, F)-flat filter with its exact frequency response and compact time window.
#[derive(Debug)]
pub struct FlatFilter {
    n: usize,
    buckets: usize,
    order: usize,
    b_prime: usize,
    freq: Vec<f64>,
    lo: i64,
    hi: i64,
    time: Vec<f64>,
    freq_radius: i64,
}

impl FlatFilter {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn buckets(&self) -> usize {
        self.buckets
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn b_prime(&self) -> usize {
        self.b_prime
    }

    /// G^_f, any integer f.
    #[inline]
    pub fn freq(&self, f: i64) -> f64 {
        self.freq[slot(f, self.n)]
    }

    /// G_t, zero outside the support window.
    #[inline]
    pub fn time(&self, t: i64) -> f64 {
        let t = canon(t, self.n);
        if t < self.lo || t > self.hi {
            0.0
        } else {
            self.time[(t - self.lo) as usize]
        }
    }

    /// Inclusive canonical time window holding the support.
    pub fn support(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn support_len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    /// G_t for t in `support()`, in order.
    pub fn time_values(&self) -> &[f64] {
        &self.time
    }

    /// Slot-indexed frequency response.
    pub fn freq_values(&self) -> &[f64] {
        &self.freq
    }

    /// Largest |f| with G^_f above [`FREQ_FLOOR`].
    pub fn freq_radius(&self) -> i64 {
        self.freq_radius
    }

    /// Dense slot-indexed time-domain filter.
    pub fn time_dense(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.n];
        for t in self.lo..=self.hi {
            v[slot(t, self.n)] = Complex64::new(self.time(t), 0.0);
        }
        v
    }
}

/// Outcome of checking the flat-filter bounds over every frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatBoundReport {
    pub range_violations: usize,
    pub pass_violations: usize,
    pub stop_violations: usize,
    pub asymmetric: usize,
    pub energy: f64,
    pub energy_limit: f64,
}

impl FlatBoundReport {
    pub fn ok(&self) -> bool {
        self.range_violations == 0
            && self.pass_violations == 0
            && self.stop_violations == 0
            && self.asymmetric == 0
            && self.energy <= self.energy_limit
    }
}

pub fn check_flat_bounds(g: &FlatFilter) -> FlatBoundReport {
    let n = g.n as i64;
    let b = g.buckets as f64;
    let nf = g.n as f64;
    let quarter = 0.25f64.powi(g.order as i32 - 1);
    let mut rep = FlatBoundReport {
        range_violations: 0,
        pass_violations: 0,
        stop_violations: 0,
        asymmetric: 0,
        energy: 0.0,
        energy_limit: 3.0 * nf / b,
    };
    for f in (-n / 2 + 1)..=(n / 2) {
        let v = g.freq(f);
        rep.energy += v * v;
        if !(0.0..=1.0).contains(&v) {
            rep.range_violations += 1;
        }
        if v != g.freq(-f) {
            rep.asymmetric += 1;
        }
        let af = f.unsigned_abs() as f64;
        if af <= nf / (2.0 * b) && v < 1.0 - quarter {
            rep.pass_violations += 1;
        }
        if af >= nf / b {
            let bound = (0.25 * nf / (b * af)).powi(g.order as i32 - 1);
            if v > bound {
                rep.stop_violations += 1;
            }
        }
    }
    rep
}

/// Boxcar power W^_f in closed form.
fn boxcar_power(f: i64, n: usize, b_prime: usize, order: usize) -> f64 {
    if f.rem_euclid(n as i64) == 0 {
        return 1.0;
    }
    let w = (b_prime - 1) as i64;
    let num_arg = (w * f).rem_euclid(2 * n as i64) as f64;
    let num = (PI * num_arg / n as f64).sin();
    let den = w as f64 * (PI * f as f64 / n as f64).sin();
    (num / den).powi(order as i32)
}

struct TailSums {
    n: usize,
    // tail[a] = sum_{h=a}^{n/2} W^_h, a in 1..=n/2+1
    tail: Vec<f64>,
}

impl TailSums {
    fn abs_range(&self, a: i64, b: i64) -> f64 {
        self.tail[a as usize] - self.tail[b as usize + 1]
    }

    /// Sum of W^ over an integer range with fewer than n terms and no multiple of n.
    fn range(&self, lo: i64, hi: i64) -> f64 {
        let half = (self.n / 2) as i64;
        let mut sum = 0.0;
        let mut cur = lo;
        while cur <= hi {
            let c = canon(cur, self.n);
            debug_assert!(c != 0, "range passes through zero frequency");
            let step = if c > 0 {
                let end = (c + (hi - cur)).min(half);
                sum += self.abs_range(c, end);
                end - c + 1
            } else {
                let end = (c + (hi - cur)).min(-1);
                sum += self.abs_range(-end, -c);
                end - c + 1
            };
            cur += step;
        }
        sum.max(0.0)
    }
}

fn flat_response(n: usize, buckets: usize, b_prime: usize, order: usize) -> Vec<f64> {
    let half = n / 2;
    let w: Vec<f64> = (0..=half)
        .map(|h| boxcar_power(h as i64, n, b_prime, order))
        .collect();
    let mut tail = vec![0.0; half + 2];
    for a in (1..=half).rev() {
        tail[a] = tail[a + 1] + w[a];
    }
    let z = 1.0 + 2.0 * tail[1] - w[half];
    let sums = TailSums { n, tail };
    let d = (3 * n / (4 * buckets)) as i64;
    let width = 2 * d + 1;
    let mut freq = vec![0.0; n];
    for f in 0..=half as i64 {
        let v = if f <= d {
            if width >= n as i64 {
                1.0
            } else {
                1.0 - sums.range(f + d + 1, f - d - 1 + n as i64) / z
            }
        } else {
            sums.range(f - d, f + d) / z
        };
        let v = v.clamp(0.0, 1.0);
        freq[slot(f, n)] = v;
        freq[slot(-f, n)] = v;
    }
    freq
}

fn build_flat(n: usize, buckets: usize, order: usize, b_prime: usize) -> Result<FlatFilter> {
    let freq = flat_response(n, buckets, b_prime, order);
    let spec: Vec<Complex64> = freq.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let dense = crate::fft::inverse(&spec)?;
    let half = (n / 2) as i64;
    let reach = (order as i64) * (b_prime as i64 / 2 - 1);
    let (lo, hi) = if reach >= half {
        (-half + 1, half)
    } else {
        (-reach, reach)
    };
    let time = (lo..=hi).map(|t| dense[slot(t, n)].re).collect();
    let freq_radius = (0..=half)
        .rev()
        .find(|&f| freq[slot(f, n)] > FREQ_FLOOR)
        .unwrap_or(0);
    Ok(FlatFilter {
        n,
        buckets,
        order,
        b_prime,
        freq,
        lo,
        hi,
        time,
        freq_radius,
    })
}

/// (n, B, F)-flat filter with B' = 8 C B (C = 2), verified, widening B' on failure.
pub fn make_flat_filter(n: usize, buckets: usize, order: usize) -> Result<FlatFilter> {
    make_flat_filter_with(n, buckets, order, DEFAULT_WIDTH_CONSTANT)
}

/// As [`make_flat_filter`] with an explicit width constant C.
pub fn make_flat_filter_with(
    n: usize,
    buckets: usize,
    order: usize,
    width_constant: f64,
) -> Result<FlatFilter> {
    check_pow2(n, "n")?;
    check_pow2(buckets, "B")?;
    if buckets > n {
        return Err(invalid(format!("B = {buckets} exceeds n = {n}")));
    }
    if order < 2 || order % 2 != 0 {
        return Err(invalid(format!(
            "filter order F = {order} must be even and at least 2"
        )));
    }
    if !(width_constant > 0.0) {
        return Err(invalid("width constant must be positive"));
    }
    let target = (8.0 * width_constant * buckets as f64).ceil().max(2.0) as usize;
    let mut b_prime = target.next_power_of_two().min(n).max(2);
    let mut last = None;
    for _ in 0..=MAX_RETRIES {
        let g = build_flat(n, buckets, order, b_prime)?;
        let rep = check_flat_bounds(&g);
        if rep.ok() {
            return Ok(g);
        }
        last = Some(rep);
        if b_prime >= n {
            break;
        }
        b_prime = (b_prime * 2).min(n);
    }
    Err(BsftError::Construction(format!(
        "(n={n}, B={buckets}, F={order}) fails flat bounds: {last:?}"
    )))
}

/// Sharp filter: time response ~1 on |t| <= n/(2k), ~0 on |t| >= n/k; compact spectrum.
#[derive(Debug)]
pub struct SharpFilter {
    n: usize,
    k: usize,
    zeta: f64,
    radius: i64,
    // G^_f for f in [-radius, radius]
    freq: Vec<f64>,
    time: Vec<f64>,
    ideal_distance: f64,
}

/// Constant bounding the spectral support by C k log2(n / zeta).
pub const SHARP_SUPPORT_CONSTANT: f64 = 4.0;

impl SharpFilter {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    /// Spectrum is zero for |f| > radius.
    pub fn radius(&self) -> i64 {
        self.radius
    }
    #[inline]
    pub fn freq(&self, f: i64) -> f64 {
        let f = canon(f, self.n);
        if f.abs() > self.radius {
            0.0
        } else {
            self.freq[(f + self.radius) as usize]
        }
    }
    #[inline]
    pub fn time(&self, t: i64) -> f64 {
        self.time[slot(t, self.n)]
    }
    /// Measured l2 distance to the closest admissible ideal filter.
    pub fn ideal_distance(&self) -> f64 {
        self.ideal_distance
    }
    pub fn support_len(&self) -> usize {
        2 * self.radius as usize + 1
    }
}

/// Distance to the ideal class: 1 on the pass band, 0 on the stop band, [0,1] between.
fn ideal_gap(time: &[f64], n: usize, k: usize) -> f64 {
    let pass = n as f64 / (2.0 * k as f64);
    let stop = n as f64 / k as f64;
    let mut acc = 0.0;
    for (s, &g) in time.iter().enumerate() {
        let t = canon(s as i64, n).unsigned_abs() as f64;
        let d = if t <= pass {
            g - 1.0
        } else if t >= stop {
            g
        } else {
            g - g.clamp(0.0, 1.0)
        };
        acc += d * d;
    }
    acc.sqrt()
}

/// Smallest tolerance a length-n transform can honour in double precision.
pub fn precision_floor(n: usize) -> f64 {
    1e-13 * (n as f64).sqrt()
}

pub fn make_sharp_filter(n: usize, k: usize, zeta: f64) -> Result<SharpFilter> {
    check_pow2(n, "n")?;
    if k == 0 || k >= n {
        return Err(invalid(format!(
            "sharp filter needs 0 < k < n, got k = {k}"
        )));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(invalid(format!("zeta = {zeta} outside (0, 1)")));
    }
    if zeta < precision_floor(n) {
        return Err(BsftError::InfeasibleTolerance { n, zeta });
    }
    let nf = n as f64;
    let pass = nf / (2.0 * k as f64);
    let stop = nf / k as f64;
    // rect half-width halfway through the transition band
    let half_width = ((pass + stop) / 2.0).floor() as i64;
    let gap = (stop - pass) / 2.0;
    let max_radius = (n / 2 - 1) as i64;
    let mut z = 6.0;
    loop {
        let tau = gap / z;
        let spread = nf / (2.0 * PI * tau);
        let cut = (2.0 * (1.0 / (zeta * 1e-3)).ln()).sqrt();
        let radius = ((spread * cut).ceil() as i64).min(max_radius);
        let freq: Vec<f64> = (-radius..=radius)
            .map(|f| {
                let dirichlet = if f == 0 {
                    (2 * half_width + 1) as f64 / nf
                } else {
                    let a = PI * f as f64 / nf;
                    let num_arg = ((2 * half_width + 1) * f).rem_euclid(2 * n as i64) as f64;
                    (PI * num_arg / nf).sin() / (nf * a.sin())
                };
                let gauss = (-0.5 * (f as f64 / spread).powi(2)).exp();
                dirichlet * gauss
            })
            .collect();
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for (i, &v) in freq.iter().enumerate() {
            spec[slot(i as i64 - radius, n)] = Complex64::new(v, 0.0);
        }
        let time: Vec<f64> = crate::fft::inverse(&spec)?.iter().map(|c| c.re).collect();
        let gap_l2 = ideal_gap(&time, n, k);
        if gap_l2 <= zeta {
            let support = 2.0 * radius as f64 + 1.0;
            let bound = SHARP_SUPPORT_CONSTANT * k as f64 * (nf / zeta).log2();
            if support > bound {
                return Err(BsftError::Construction(format!(
                    "sharp filter support {support} exceeds {bound:.0}"
                )));
            }
            return Ok(SharpFilter {
                n,
                k,
                zeta,
                radius,
                freq,
                time,
                ideal_distance: gap_l2,
            });
        }
        if z > 40.0 || radius == max_radius && z > 12.0 {
            return Err(BsftError::InfeasibleTolerance { n, zeta });
        }
        z += 1.0;
    }
}

type FlatKey = (usize, usize, usize, u64);
type SharpKey = (usize, usize, u64);

fn flat_cache() -> &'static RwLock<HashMap<FlatKey, Arc<FlatFilter>>> {
    static C: OnceLock<RwLock<HashMap<FlatKey, Arc<FlatFilter>>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

fn sharp_cache() -> &'static RwLock<HashMap<SharpKey, Arc<SharpFilter>>> {
    static C: OnceLock<RwLock<HashMap<SharpKey, Arc<SharpFilter>>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

/// Memoized [`make_flat_filter_with`].
pub fn flat_filter(
    n: usize,
    buckets: usize,
    order: usize,
    width_constant: f64,
) -> Result<Arc<FlatFilter>> {
    let key = (n, buckets, order, width_constant.to_bits());
    if let Some(g) = flat_cache()
        .read()
        .expect("filter cache poisoned")
        .get(&key)
    {
        return Ok(g.clone());
    }
    let g = Arc::new(make_flat_filter_with(n, buckets, order, width_constant)?);
    let mut w = flat_cache().write().expect("filter cache poisoned");
    Ok(w.entry(key).or_insert(g).clone())
}

/// Memoized [`make_sharp_filter`].
pub fn sharp_filter(n: usize, k: usize, zeta: f64) -> Result<Arc<SharpFilter>> {
    let key = (n, k, zeta.to_bits());
    if let Some(g) = sharp_cache()
        .read()
        .expect("filter cache poisoned")
        .get(&key)
    {
        return Ok(g.clone());
    }
    let g = Arc::new(make_sharp_filter(n, k, zeta)?);
    let mut w = sharp_cache().write().expect("filter cache poisoned");
    Ok(w.entry(key).or_insert(g).clone())
}

/// F = `scale` * ceil(log2(1/delta)), rounded up to even, at least 2.
/// Non-positive delta is treated as the smallest positive double.
pub fn order_for(delta: f64, scale: f64) -> usize {
    let base = (1.0 / delta).log2().ceil().clamp(1.0, 1075.0);
    let f = (scale * base).ceil().max(2.0) as usize;
    f + f % 2
}
