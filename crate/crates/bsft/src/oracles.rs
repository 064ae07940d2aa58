//! Dense reference computations. These read the whole signal and exist only to
//! check the sublinear routines.

use num_complex::Complex64;

use crate::downsampling::z_spectrum_exact;
use crate::error::{invalid, BsftError, Result};
use crate::filters::FlatFilter;
use crate::hashing::HashParams;
use crate::signal::{block_energies, canon, index_range, root, slot};

/// U*_b = sum_f X^_f G^_{sigma f - b m / B} w^{sigma shift f}, by direct summation.
pub fn exact_hashed_spectrum(xhat: &[Complex64], g: &FlatFilter, p: &HashParams) -> Vec<Complex64> {
    let m = xhat.len();
    let b = p.buckets();
    let w = (m / b) as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); b];
    for f in index_range(m) {
        let v = xhat[slot(f, m)];
        if v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let pi = p.permute(f);
        let phase = root(canon(pi * p.shift(), m), m);
        for c in index_range(b) {
            let gv = g.freq(pi - c * w);
            if gv != 0.0 {
                out[slot(c, b)] += v * gv * phase;
            }
        }
    }
    out
}

/// All 2k1 downsampled spectra of a dense spectrum.
pub fn exact_reduced_spectra(
    xhat: &[Complex64],
    filter: &FlatFilter,
    k1: usize,
) -> Vec<Vec<Complex64>> {
    (0..2 * k1)
        .map(|r| z_spectrum_exact(xhat, filter, k1, r))
        .collect()
}

/// Result of the covering search. `total` is the best budget found and
/// `lower_bound` a proven bound on the optimum; they agree when `exact`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringBudget {
    pub total: u64,
    /// Per-row budgets achieving `total`.
    pub budgets: Vec<u64>,
    pub lower_bound: u64,
    pub exact: bool,
    pub nodes: usize,
}

pub const COVERING_NODE_LIMIT: usize = 50_000;

/// Smallest sum of per-row budgets s^r such that the blocks j with
/// |Z^r_j|^2 >= ||Z^r||^2 / s^r for some r carry at least (1 - alpha) of the
/// top-k0 block energy of `xhat`.
pub fn optimal_covering_budget(
    zhat_all: &[Vec<Complex64>],
    xhat: &[Complex64],
    k0: usize,
    alpha: f64,
) -> Result<CoveringBudget> {
    optimal_covering_budget_with(zhat_all, xhat, k0, alpha, COVERING_NODE_LIMIT)
}

pub fn optimal_covering_budget_with(
    zhat_all: &[Vec<Complex64>],
    xhat: &[Complex64],
    k0: usize,
    alpha: f64,
    node_limit: usize,
) -> Result<CoveringBudget> {
    if zhat_all.is_empty() || zhat_all.len() % 2 != 0 {
        return Err(invalid("need an even, nonzero number of reduced spectra"));
    }
    let k1 = zhat_all.len() / 2;
    let n = xhat.len();
    if n % k1 != 0 {
        return Err(invalid("spectrum length is not a multiple of k1"));
    }
    let m = n / k1;
    if m > 64 {
        return Err(invalid(format!(
            "exhaustive covering needs n/k1 <= 64, got {m}"
        )));
    }
    if zhat_all.iter().any(|z| z.len() != m) {
        return Err(invalid("reduced spectra must have length n/k1"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid(format!("alpha = {alpha} outside [0, 1)")));
    }
    let weights = block_energies(xhat, k1);
    let mut sorted = weights.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let head: f64 = sorted.iter().take(k0).sum();
    let need = (1.0 - alpha) * head * (1.0 - 1e-12);

    let rows: Vec<Vec<(u64, u64)>> = zhat_all.iter().map(|z| row_options(z)).collect();
    let reachable = rows
        .iter()
        .fold(0u64, |acc, r| acc | r.last().map_or(0, |o| o.1));
    if gain(reachable, &weights) < need {
        return Err(BsftError::Infeasible(format!(
            "alpha = {alpha} cannot be met even covering every row fully"
        )));
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    let slope = |r: usize| {
        rows[r]
            .iter()
            .map(|&(c, mask)| gain(mask, &weights) / c as f64)
            .fold(0.0, f64::max)
    };
    order.sort_by(|&a, &b| slope(b).total_cmp(&slope(a)));
    let rows: Vec<Vec<(u64, u64)>> = order.iter().map(|&r| rows[r].clone()).collect();

    let mut search = Search {
        rows: &rows,
        weights: &weights,
        need,
        best: u64::MAX,
        best_choice: vec![0; rows.len()],
        choice: vec![0; rows.len()],
        nodes: 0,
        limit: node_limit,
    };
    search.greedy();
    let root = search.bound(0, 0).unwrap_or(u64::MAX);
    search.descend(0, 0, 0);
    let exact = search.nodes <= search.limit;
    let mut budgets = vec![0; rows.len()];
    for (i, &r) in order.iter().enumerate() {
        budgets[r] = search.best_choice[i];
    }
    Ok(CoveringBudget {
        total: search.best,
        budgets,
        lower_bound: if exact {
            search.best
        } else {
            root.min(search.best)
        },
        exact,
        nodes: search.nodes,
    })
}

/// (budget, covered-block mask) pairs with strictly growing coverage.
fn row_options(z: &[Complex64]) -> Vec<(u64, u64)> {
    let total: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    let mut need: Vec<(u64, usize)> = z
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(j, v)| {
            (
                ((total / v.norm_sqr()) * (1.0 - 1e-12)).ceil().max(1.0) as u64,
                j,
            )
        })
        .collect();
    need.sort();
    let mut out: Vec<(u64, u64)> = Vec::new();
    let mut mask = 0u64;
    for (c, j) in need {
        mask |= 1 << j;
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 = mask,
            _ => out.push((c, mask)),
        }
    }
    out
}

fn gain(mask: u64, w: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut b = mask;
    while b != 0 {
        s += w[b.trailing_zeros() as usize];
        b &= b - 1;
    }
    s
}

struct Search<'a> {
    rows: &'a [Vec<(u64, u64)>],
    weights: &'a [f64],
    need: f64,
    best: u64,
    best_choice: Vec<u64>,
    choice: Vec<u64>,
    nodes: usize,
    limit: usize,
}

impl Search<'_> {
    /// Upgrades one row at a time by best marginal gain per unit budget.
    fn greedy(&mut self) {
        let mut level = vec![0u64; self.rows.len()];
        let mut covered = 0u64;
        while gain(covered, self.weights) < self.need {
            let mut pick: Option<(f64, usize, u64, u64)> = None;
            for (r, opts) in self.rows.iter().enumerate() {
                for &(c, mask) in opts.iter().filter(|o| o.0 > level[r]) {
                    let g = gain(mask & !covered, self.weights);
                    let rate = g / (c - level[r]) as f64;
                    if g > 0.0 && pick.is_none_or(|p| rate > p.0) {
                        pick = Some((rate, r, c, mask));
                    }
                }
            }
            let Some((_, r, c, mask)) = pick else { return };
            level[r] = c;
            covered |= mask;
        }
        self.best = level.iter().sum();
        self.best_choice = level;
    }

    /// Linear-relaxation bound on the extra budget rows `from..` need, counting
    /// blocks covered by several rows once per row.
    fn bound(&self, from: usize, covered: u64) -> Option<u64> {
        let rest = self.need - gain(covered, self.weights);
        if rest <= 0.0 {
            return Some(0);
        }
        let mut segs: Vec<(f64, f64, f64)> = Vec::new();
        for opts in &self.rows[from..] {
            let mut hull: Vec<(f64, f64)> = vec![(0.0, 0.0)];
            for &(c, mask) in opts {
                let pt = (c as f64, gain(mask & !covered, self.weights));
                if pt.1 <= hull.last().unwrap().1 {
                    continue;
                }
                while hull.len() >= 2 {
                    let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                    if (b.1 - a.1) * (pt.0 - a.0) <= (pt.1 - a.1) * (b.0 - a.0) {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(pt);
            }
            for w in hull.windows(2) {
                let (dc, dg) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                segs.push((dg / dc, dc, dg));
            }
        }
        segs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut left = rest;
        let mut cost = 0.0;
        for (rate, dc, dg) in segs {
            if dg >= left {
                cost += left / rate;
                return Some((cost - 1e-9).ceil().max(0.0) as u64);
            }
            left -= dg;
            cost += dc;
        }
        None
    }

    fn descend(&mut self, row: usize, covered: u64, cost: u64) {
        self.nodes += 1;
        if self.nodes > self.limit {
            return;
        }
        if gain(covered, self.weights) >= self.need {
            if cost < self.best {
                self.best = cost;
                self.best_choice.clone_from(&self.choice);
                self.best_choice[row..].iter_mut().for_each(|c| *c = 0);
            }
            return;
        }
        if row == self.rows.len() {
            return;
        }
        match self.bound(row, covered) {
            Some(extra) if cost + extra < self.best => {}
            _ => return,
        }
        let opts = &self.rows[row];
        for i in (0..opts.len()).rev() {
            let (c, mask) = opts[i];
            if mask & !covered == 0 || cost + c >= self.best {
                continue;
            }
            self.choice[row] = c;
            self.descend(row + 1, covered | mask, cost + c);
        }
        self.choice[row] = 0;
        self.descend(row + 1, covered, cost);
    }
}
