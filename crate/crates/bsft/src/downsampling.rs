//! (k1, delta)-downsampling: 2k1 filtered, shifted and aliased copies of the
//! input, each of length m = n / k1.
//!
//! Z^r_j = (1/k1) sum_i G_{j + m i} X_{j + m i + a_r}, a_r = n r / (2 k1), whose
//! spectrum is Z^r_j = sum_f G^_{f - k1 j} X^_f w^{a_r f}.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fft;
use crate::filters::{flat_filter, order_for, FlatFilter, DEFAULT_WIDTH_CONSTANT};
use crate::signal::{canon, check_pow2, root, slot, SparseSpectrum, TimeSamples};

/// Order scale for the downsampling filter: F = scale * ceil(log2(1/delta)).
pub const DOWNSAMPLE_ORDER_SCALE: f64 = 10.0;

/// Read-only downsampled view of a time-domain source.
pub struct DownsampleView<'a, S: TimeSamples> {
    x: &'a S,
    k1: usize,
    m: usize,
    delta: f64,
    filter: Arc<FlatFilter>,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.05) {
        return Err(invalid(format!("delta = {delta} outside (0, 1/20]")));
    }
    Ok(())
}

impl<'a, S: TimeSamples> DownsampleView<'a, S> {
    pub fn new(x: &'a S, k1: usize, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Self::with_order(x, k1, delta, order_for(delta, DOWNSAMPLE_ORDER_SCALE))
    }

    pub fn with_order(x: &'a S, k1: usize, delta: f64, order: usize) -> Result<Self> {
        let n = x.len();
        check_pow2(n, "n")?;
        check_pow2(k1, "k1")?;
        if 2 * k1 > n {
            return Err(invalid(format!("k1 = {k1} too large for n = {n}")));
        }
        check_delta(delta)?;
        let m = n / k1;
        let filter = flat_filter(n, m, order, DEFAULT_WIDTH_CONSTANT)?;
        Ok(Self {
            x,
            k1,
            m,
            delta,
            filter,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
    pub fn k1(&self) -> usize {
        self.k1
    }
    /// Length of each reduced signal.
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn filter(&self) -> &FlatFilter {
        &self.filter
    }
    pub fn source(&self) -> &S {
        self.x
    }
    /// Number of reduced signals, 2k1.
    pub fn count(&self) -> usize {
        2 * self.k1
    }

    /// a_r = n r / (2 k1).
    pub fn shift(&self, r: usize) -> i64 {
        (self.n() / (2 * self.k1) * r) as i64
    }

    fn check(&self, r: usize) -> Result<()> {
        if r >= 2 * self.k1 {
            return Err(invalid(format!("r = {r} outside [0, {})", 2 * self.k1)));
        }
        Ok(())
    }

    /// Contribution of X to Z^r_j.
    pub fn z_entry_x(&self, r: usize, j: i64) -> Result<Complex64> {
        self.check(r)?;
        let n = self.n();
        let m = self.m as i64;
        let a = self.shift(r);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.k1 as i64 {
            let t = j + m * i;
            let g = self.filter.time(t);
            if g != 0.0 {
                acc += self.x.read(canon(t + a, n)) * g;
            }
        }
        Ok(acc / self.k1 as f64)
    }

    /// Z^r_j of the residual X - chi, given chi's part (see [`ReducedSpectra::value`]).
    pub fn z_entry(&self, r: usize, j: i64, chi_part: Complex64) -> Result<Complex64> {
        Ok(self.z_entry_x(r, j)? - chi_part)
    }

    /// X parts of Z^r_p for every r with `active[r]`, sharing reads between shifts.
    ///
    /// Even shifts read X at p + m u, odd shifts at p + m/2 + m u.
    pub(crate) fn z_x_at(&self, p: i64, active: &[bool], out: &mut [Complex64]) {
        let n = self.n();
        let k1 = self.k1;
        let m = self.m as i64;
        let mut even: Vec<Option<Complex64>> = vec![None; k1];
        let mut odd: Vec<Option<Complex64>> = vec![None; k1];
        let weights: Vec<f64> = (0..k1 as i64)
            .map(|i| self.filter.time(p + m * i))
            .collect();
        let scale = 1.0 / k1 as f64;
        for (r, (&on, o)) in active.iter().zip(out.iter_mut()).enumerate() {
            if !on {
                continue;
            }
            let (cache, base, off) = if r % 2 == 0 {
                (&mut even, p, r / 2)
            } else {
                (&mut odd, p + m / 2, (r - 1) / 2)
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &g) in weights.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let u = (i + off) % k1;
                let v = *cache[u].get_or_insert_with(|| self.x.read(canon(base + m * u as i64, n)));
                acc += v * g;
            }
            *o = acc * scale;
        }
    }
}

/// Exact spectra of the downsampled estimate chi, one sparse map per shift.
#[derive(Clone, Debug)]
pub struct ReducedSpectra {
    m: usize,
    // per r: (j, value) with j canonical in [m]
    rows: Vec<Vec<(i64, Complex64)>>,
}

impl ReducedSpectra {
    /// Downsamples a sparse spectrum through `filter` for every r in [2k1].
    pub fn new(chihat: &SparseSpectrum, filter: &FlatFilter, k1: usize) -> Result<Self> {
        let n = chihat.n();
        check_pow2(k1, "k1")?;
        if filter.n() != n {
            return Err(invalid("filter length differs from spectrum length"));
        }
        let m = n / k1;
        let rows_len = 2 * k1;
        let rad = filter.freq_radius();
        let mut grid: std::collections::BTreeMap<i64, Vec<Complex64>> = Default::default();
        for (f, v) in chihat.iter() {
            let f = canon(f, n);
            let b = slot(f, rows_len);
            let k = k1 as i64;
            let (lo, hi) = if 2 * rad + 1 >= n as i64 {
                (-(m as i64) / 2 + 1, m as i64 / 2)
            } else {
                (
                    (f - rad).div_euclid(k) + ((f - rad).rem_euclid(k) != 0) as i64,
                    (f + rad).div_euclid(k),
                )
            };
            let hi = hi.min(lo + m as i64 - 1);
            for j in lo..=hi {
                let g = filter.freq(f - k * j);
                if g == 0.0 {
                    continue;
                }
                let cell = grid
                    .entry(canon(j, m))
                    .or_insert_with(|| vec![Complex64::new(0.0, 0.0); rows_len]);
                cell[b] += v * g;
            }
        }
        let plan = fft::plan(rows_len)?;
        let mut rows = vec![Vec::with_capacity(grid.len()); rows_len];
        for (j, mut cell) in grid {
            plan.inverse(&mut cell);
            for (r, c) in cell.into_iter().enumerate() {
                if c != Complex64::new(0.0, 0.0) {
                    rows[r].push((j, c));
                }
            }
        }
        Ok(Self { m, rows })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Nonzero entries of the r-th reduced spectrum.
    pub fn row(&self, r: usize) -> &[(i64, Complex64)] {
        &self.rows[r]
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }

    /// Time value of the r-th reduced estimate at p, by direct summation.
    pub fn value(&self, r: usize, p: i64) -> Complex64 {
        self.rows[r]
            .iter()
            .map(|&(j, c)| c * root(j * p, self.m))
            .sum()
    }

    /// The r-th reduced spectrum as a sparse map on [m].
    pub fn spectrum(&self, r: usize) -> SparseSpectrum {
        let mut s = SparseSpectrum::new(self.m);
        for &(j, c) in &self.rows[r] {
            s.insert(j, c);
        }
        s
    }
}

/// Dense Z^r from a dense spectrum by direct convolution (reads everything).
pub fn z_spectrum_exact(
    xhat: &[Complex64],
    filter: &FlatFilter,
    k1: usize,
    r: usize,
) -> Vec<Complex64> {
    let n = xhat.len();
    let m = n / k1;
    let a = (n / (2 * k1) * r) as i64;
    let rad = filter.freq_radius().min(n as i64 / 2);
    (0..m)
        .map(|s| {
            let j = canon(s as i64, m);
            let c = j * k1 as i64;
            let lo = if 2 * rad + 1 >= n as i64 {
                -(n as i64) / 2 + 1
            } else {
                -rad
            };
            let hi = if 2 * rad + 1 >= n as i64 {
                n as i64 / 2
            } else {
                rad
            };
            (lo..=hi)
                .map(|d| {
                    let f = c + d;
                    xhat[slot(f, n)] * filter.freq(d) * root(a * canon(f, n), n)
                })
                .sum()
        })
        .collect()
}

/// |Z_j|^2 >= ||Z||^2 / s.
pub fn is_covered(zhat: &[Complex64], j: i64, s: f64) -> bool {
    let total: f64 = zhat.iter().map(|v| v.norm_sqr()).sum();
    zhat[slot(j, zhat.len())].norm_sqr() >= total / s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{CountedSignal, SampleCounter, Signal};

    #[test]
    fn zero_signal_gives_zero_entries() {
        let x = Signal::zeros(256).unwrap();
        let c = SampleCounter::new(256);
        let src = CountedSignal::new(&x, &c);
        let v = DownsampleView::new(&src, 4, 0.04).unwrap();
        for r in 0..8 {
            for j in [-31, 0, 5, 32] {
                assert_eq!(v.z_entry_x(r, j).unwrap(), Complex64::new(0.0, 0.0));
            }
        }
        assert!(v.z_entry_x(8, 0).is_err());
    }

    #[test]
    fn covered_examples() {
        let mut z = vec![Complex64::new(0.0, 0.0); 8];
        z[3] = Complex64::new(2.0, 0.0);
        assert!(is_covered(&z, 3, 1.0));
        assert!(!is_covered(&z, 2, 1.0));
        let flat = vec![Complex64::new(1.0, 0.0); 8];
        assert!(is_covered(&flat, 0, 8.0));
        assert!(!is_covered(&flat, 0, 7.9));
    }
}
