//! Semi-equispaced inverse transforms of sparse spectra.
//!
//! Values X_j on |j| <= k/2 (optionally at sigma*j + shift) are read off a
//! length-2k inverse FFT of the sharp-filtered spectrum sampled every n/(2k).

use num_complex::Complex64;

use std::sync::Arc;

use crate::error::{invalid, BsftError, Result};
use crate::fft;
use crate::filters::{precision_floor, sharp_filter, SharpFilter};
use crate::signal::{check_pow2, root, slot, SparseSpectrum};

/// Target map j' -> sigma * j' + shift (mod n).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Targets {
    pub sigma: i64,
    pub shift: i64,
}

impl Targets {
    pub const IDENTITY: Targets = Targets { sigma: 1, shift: 0 };

    pub fn at(&self, j: i64, n: usize) -> i64 {
        (self.sigma.wrapping_mul(j) + self.shift).rem_euclid(n as i64)
    }
}

/// Default accuracy for internal calls, kept above the double-precision floor.
pub fn default_zeta(n: usize) -> f64 {
    1e-10f64.max(1e-12 * (n as f64).sqrt())
}

/// Moves the spectrum so that plain targets |j'| <= k/2 give the requested ones.
fn transformed(xhat: &SparseSpectrum, tg: Targets) -> Vec<(i64, i64, Complex64)> {
    let n = xhat.n();
    xhat.iter()
        .map(|(f, v)| {
            let g = (tg.sigma.wrapping_mul(f)).rem_euclid(n as i64);
            (
                f,
                g,
                v * root(f.wrapping_mul(tg.shift.rem_euclid(n as i64)), n),
            )
        })
        .collect()
}

/// Sharp filter for the grid, or None when the dense transform is the only
/// way to reach `zeta` (grid as large as the spectrum, or filter spectrum wider than n).
fn grid_filter(n: usize, k: usize, zeta: f64) -> Result<Option<Arc<SharpFilter>>> {
    if zeta / 2.0 < precision_floor(n) {
        return Err(BsftError::InfeasibleTolerance { n, zeta });
    }
    if 2 * k >= n {
        return Ok(None);
    }
    match sharp_filter(n, n / k, zeta / 2.0) {
        Ok(g) => Ok(Some(g)),
        Err(BsftError::InfeasibleTolerance { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn validate(xhat: &SparseSpectrum, k: usize, tg: Targets) -> Result<()> {
    let n = xhat.n();
    check_pow2(n, "n")?;
    check_pow2(k, "k")?;
    if xhat.len() > k {
        return Err(invalid(format!(
            "spectrum has {} entries, more than k = {k}",
            xhat.len()
        )));
    }
    if tg.sigma % 2 == 0 {
        return Err(invalid("sigma must be odd"));
    }
    Ok(())
}

/// Y_j ~ X_{sigma j + shift} for j = -k/2 ..= k/2, returned in that order.
pub fn semi_equi_inverse_fft(
    xhat: &SparseSpectrum,
    k: usize,
    zeta: f64,
    tg: Targets,
) -> Result<Vec<Complex64>> {
    validate(xhat, k, tg)?;
    let n = xhat.n();
    let half = (k / 2) as i64;
    let moved = transformed(xhat, tg);
    let Some(g) = grid_filter(n, k, zeta)? else {
        let mut dense = vec![Complex64::new(0.0, 0.0); n];
        for &(_, g, v) in &moved {
            dense[slot(g, n)] += v;
        }
        let x = fft::inverse(&dense)?;
        return Ok((-half..=half).map(|j| x[slot(j, n)]).collect());
    };
    let len = 2 * k;
    let spacing = (n / len) as i64;
    let mut yhat = vec![Complex64::new(0.0, 0.0); len];
    accumulate(
        &mut yhat,
        moved.iter().map(|&(_, g, v)| (g, v)),
        &g,
        spacing,
        n,
    );
    let mut y = yhat;
    fft::plan(len)?.inverse(&mut y);
    let s = spacing as f64;
    Ok((-half..=half).map(|j| y[slot(j, len)] * s).collect())
}

/// Adds v * G^_{i*spacing - f} into bins i for every grid point within the filter radius.
fn accumulate(
    bins: &mut [Complex64],
    entries: impl Iterator<Item = (i64, Complex64)>,
    g: &crate::filters::SharpFilter,
    spacing: i64,
    n: usize,
) {
    let len = bins.len();
    let rad = g.radius();
    for (f, v) in entries {
        let f = crate::signal::canon(f, n);
        let first = (f - rad).div_euclid(spacing) + 1;
        let last = (f + rad).div_euclid(spacing);
        for i in first..=last {
            let w = g.freq(i * spacing - f);
            if w != 0.0 {
                bins[slot(i, len)] += v * w;
            }
        }
    }
}

/// Y^r_j ~ X_{sigma j + shift + n r / (2 k1)} for r in [2k1] (slot order) and |j| <= k/2.
///
/// Entries are grouped by residue mod 2k1; a length-2k1 inverse FFT per grid point
/// turns the residue sums into all 2k1 shifted spectra at once.
pub fn semi_equi_inverse_block_fft(
    xhat: &SparseSpectrum,
    k1: usize,
    k: usize,
    zeta: f64,
    tg: Targets,
) -> Result<Vec<Vec<Complex64>>> {
    validate(xhat, k, tg)?;
    check_pow2(k1, "k1")?;
    let n = xhat.n();
    let rows = 2 * k1;
    if rows > n {
        return Err(invalid("2k1 exceeds n"));
    }
    let half = (k / 2) as i64;
    let moved = transformed(xhat, tg);
    let row_plan = fft::plan(rows)?;
    let Some(g) = grid_filter(n, k, zeta)? else {
        let mut grid = vec![vec![Complex64::new(0.0, 0.0); rows]; n];
        for &(f, g, v) in &moved {
            grid[slot(g, n)][slot(f, rows)] += v;
        }
        let mut per_r = vec![vec![Complex64::new(0.0, 0.0); n]; rows];
        for (gi, mut col) in grid.into_iter().enumerate() {
            row_plan.inverse(&mut col);
            for (r, c) in col.into_iter().enumerate() {
                per_r[r][gi] = c;
            }
        }
        return per_r
            .into_iter()
            .map(|spec| {
                let x = fft::inverse(&spec)?;
                Ok((-half..=half).map(|j| x[slot(j, n)]).collect())
            })
            .collect();
    };
    let len = 2 * k;
    let spacing = (n / len) as i64;
    let rad = g.radius();
    let mut grid = vec![vec![Complex64::new(0.0, 0.0); rows]; len];
    for &(f, gf, v) in &moved {
        let b = slot(f, rows);
        let gf = crate::signal::canon(gf, n);
        let first = (gf - rad).div_euclid(spacing) + 1;
        let last = (gf + rad).div_euclid(spacing);
        for i in first..=last {
            let w = g.freq(i * spacing - gf);
            if w != 0.0 {
                grid[slot(i, len)][b] += v * w;
            }
        }
    }
    let mut per_r = vec![vec![Complex64::new(0.0, 0.0); len]; rows];
    for (i, mut col) in grid.into_iter().enumerate() {
        row_plan.inverse(&mut col);
        for (r, c) in col.into_iter().enumerate() {
            per_r[r][i] = c;
        }
    }
    let plan = fft::plan(len)?;
    let s = spacing as f64;
    Ok(per_r
        .into_iter()
        .map(|mut y| {
            plan.inverse(&mut y);
            (-half..=half).map(|j| y[slot(j, len)] * s).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spectrum_gives_zero() {
        let x = SparseSpectrum::new(1024);
        let y = semi_equi_inverse_fft(&x, 8, 1e-9, Targets::IDENTITY).unwrap();
        assert_eq!(y.len(), 9);
        assert!(y.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_tone() {
        let n = 1024;
        let f0 = 37;
        let mut x = SparseSpectrum::new(n);
        x.insert(f0, Complex64::new(1.0, 0.0));
        let y = semi_equi_inverse_fft(&x, 8, 1e-9, Targets::IDENTITY).unwrap();
        let norm = (n as f64).sqrt();
        for (idx, v) in y.iter().enumerate() {
            let j = idx as i64 - 4;
            assert!((v - root(f0 * j, n)).norm() <= 1e-9 * norm);
        }
    }

    #[test]
    fn rejects_overfull_spectrum() {
        let mut x = SparseSpectrum::new(64);
        for f in 0..5 {
            x.insert(f, Complex64::new(1.0, 0.0));
        }
        assert!(semi_equi_inverse_fft(&x, 4, 1e-9, Targets::IDENTITY).is_err());
    }
}
