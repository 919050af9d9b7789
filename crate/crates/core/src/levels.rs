//! Adiabatic tracking of dressed levels along the drive amplitude and
//! anti-crossing measurements.

use std::io::Write;

use faer::c64;
use rayon::prelude::*;

use crate::dissipators::{diagonalize_h, EigenSystem};
use crate::error::{invalid, Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::model::{hamiltonian_for, jc_reference_states, LevelLabel, SystemParams};

const MIN_OVERLAP: f64 = 0.5;
const MAX_BISECTIONS: usize = 12;

#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub nu_grid: Vec<f64>,
    /// Column labels, anchored at ν = 0.
    pub labels: Vec<LevelLabel>,
    /// `energies[k][i]`: rotating-frame energy of `labels[i]` at `nu_grid[k]`.
    pub energies: Vec<Vec<f64>>,
    /// `order[k][i]`: eigenvalue index (ascending order) carrying `labels[i]`.
    pub order: Vec<Vec<usize>>,
    /// Smallest accepted overlap on each step `k → k+1`, bisections included.
    pub overlaps: Vec<f64>,
}

impl LevelTrace {
    pub fn column(&self, label: LevelLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn series(&self, label: LevelLabel) -> Option<Vec<f64>> {
        let c = self.column(label)?;
        Some(self.energies.iter().map(|row| row[c]).collect())
    }

    pub fn min_overlap(&self) -> f64 {
        self.overlaps.iter().copied().fold(1.0, f64::min)
    }

    /// CSV with header `nu,E_GS,E_LP1,E_UP1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let header: Vec<String> =
            std::iter::once("nu".to_string()).chain(self.labels.iter().map(|l| format!("E_{l}"))).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut w = CsvWriter::new(out, &header)?;
        for (nu, row) in self.nu_grid.iter().zip(&self.energies) {
            let fields: Vec<String> = std::iter::once(fmt_f64(*nu)).chain(row.iter().map(|e| fmt_f64(*e))).collect();
            w.row(&fields)?;
        }
        w.finish()
    }
}

fn eigensystem_at(params: &SystemParams, nu: f64) -> Result<EigenSystem> {
    let (_, h) = hamiltonian_for(&params.with_nu(nu))?;
    diagonalize_h(&h)
}

/// Columns of `eig` as vectors.
fn columns(eig: &EigenSystem) -> Vec<Vec<c64>> {
    let d = eig.dim();
    (0..d).map(|c| (0..d).map(|r| eig.states[(r, c)]).collect()).collect()
}

fn overlap(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<c64>().norm()
}

/// Greedy assignment of tracked vectors to new eigenvectors by largest
/// overlap. Returns the new index per tracked vector and the smallest
/// overlap accepted.
fn greedy_match(tracked: &[Vec<c64>], next: &[Vec<c64>]) -> (Vec<usize>, f64) {
    let n = tracked.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, t) in tracked.iter().enumerate() {
        for (j, v) in next.iter().enumerate() {
            pairs.push((overlap(t, v), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut worst = 1.0f64;
    let mut left = n;
    for (o, i, j) in pairs {
        if assign[i] == usize::MAX && !taken[j] {
            assign[i] = j;
            taken[j] = true;
            worst = worst.min(o);
            left -= 1;
            if left == 0 {
                break;
            }
        }
    }
    (assign, worst)
}

/// Follows `tracked` from `nu_lo` to the eigensystem `hi` at `nu_hi`,
/// bisecting while the matching is ambiguous.
fn advance(
    params: &SystemParams,
    tracked: &[Vec<c64>],
    nu_lo: f64,
    nu_hi: f64,
    hi: &EigenSystem,
    depth: usize,
) -> Result<(Vec<usize>, f64)> {
    let next = columns(hi);
    let (assign, worst) = greedy_match(tracked, &next);
    if worst >= MIN_OVERLAP {
        return Ok((assign, worst));
    }
    if depth >= MAX_BISECTIONS {
        return Err(Error::TrackingFailure { nu_lo, nu_hi, overlap: worst });
    }
    let mid = 0.5 * (nu_lo + nu_hi);
    let mid_eig = eigensystem_at(params, mid)?;
    let (to_mid, w1) = advance(params, tracked, nu_lo, mid, &mid_eig, depth + 1)?;
    let mid_cols = columns(&mid_eig);
    let at_mid: Vec<Vec<c64>> = to_mid.iter().map(|&j| mid_cols[j].clone()).collect();
    let (to_hi, w2) = advance(params, &at_mid, mid, nu_hi, hi, depth + 1)?;
    Ok((to_hi, w1.min(w2)))
}

/// Tracks every dressed level from ν = 0 along `nu_grid`, labelling each by
/// the undriven Jaynes–Cummings state it starts from.
pub fn trace_levels(params: &SystemParams, nu_grid: &[f64]) -> Result<LevelTrace> {
    params.validate()?;
    if nu_grid.first() != Some(&0.0) {
        return invalid("level tracking grid must start at nu = 0");
    }
    if nu_grid.windows(2).any(|w| w[1] <= w[0]) || nu_grid.iter().any(|x| !x.is_finite()) {
        return invalid("level tracking grid must be strictly ascending");
    }
    let eigs: Vec<EigenSystem> =
        nu_grid.par_iter().map(|&nu| eigensystem_at(params, nu)).collect::<Result<Vec<_>>>()?;

    // Anchor: match the exact undriven states against the ν = 0 eigenvectors.
    let reference = jc_reference_states(&params.with_nu(0.0));
    let labels: Vec<LevelLabel> = reference.iter().map(|(l, _, _)| *l).collect();
    let ref_vecs: Vec<Vec<c64>> = reference.into_iter().map(|(_, _, v)| v).collect();
    let (mut current, worst) = greedy_match(&ref_vecs, &columns(&eigs[0]));
    if worst < MIN_OVERLAP {
        return Err(Error::TrackingFailure { nu_lo: 0.0, nu_hi: 0.0, overlap: worst });
    }

    let mut order = vec![current.clone()];
    let mut overlaps = Vec::with_capacity(nu_grid.len().saturating_sub(1));
    for k in 1..nu_grid.len() {
        let cols = columns(&eigs[k - 1]);
        let tracked: Vec<Vec<c64>> = current.iter().map(|&j| cols[j].clone()).collect();
        let (next, worst) = advance(params, &tracked, nu_grid[k - 1], nu_grid[k], &eigs[k], 0)?;
        overlaps.push(worst);
        current = next;
        order.push(current.clone());
    }
    let energies = order
        .iter()
        .zip(&eigs)
        .map(|(ord, eig)| ord.iter().map(|&j| eig.energies[j]).collect())
        .collect();
    Ok(LevelTrace { nu_grid: nu_grid.to_vec(), labels, energies, order, overlaps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapResult {
    pub nu_star: f64,
    pub gap_min: f64,
    /// Length of the contiguous interval around `nu_star` where the gap stays
    /// at or below twice its minimum.
    pub width_at_twice: f64,
    pub interval: (f64, f64),
}

/// Minimum of `|E_a − E_b|` along the trace, refined by a parabola through
/// the smallest grid value and its neighbours.
pub fn min_gap(trace: &LevelTrace, a: LevelLabel, b: LevelLabel) -> Result<GapResult> {
    let (Some(ea), Some(eb)) = (trace.series(a), trace.series(b)) else {
        return invalid(format!("level {a} or {b} is not part of the trace"));
    };
    let nu = &trace.nu_grid;
    let g: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).collect();
    let k = (0..g.len()).fold(0, |best, i| if g[i] < g[best] { i } else { best });
    let (mut nu_star, mut gap_min) = (nu[k], g[k]);
    if k > 0 && k + 1 < g.len() {
        // y = A u² + B u + g[k] with u = ν − nu[k].
        let (u0, u2) = (nu[k - 1] - nu[k], nu[k + 1] - nu[k]);
        let (d0, d2) = (g[k - 1] - g[k], g[k + 1] - g[k]);
        let det = u0 * u2 * (u0 - u2);
        let qa = (d0 * u2 - d2 * u0) / det;
        let qb = (u0 * u0 * d2 - u2 * u2 * d0) / det;
        if qa > 0.0 {
            let uv = -qb / (2.0 * qa);
            if uv > u0 && uv < u2 {
                nu_star = nu[k] + uv;
                gap_min = (g[k] - qb * qb / (4.0 * qa)).clamp(0.0, g[k]);
            }
        }
    }
    let limit = 2.0 * gap_min;
    let cross = |i: usize, j: usize| {
        // Point between grid nodes i and j where g reaches `limit`.
        let (gi, gj) = (g[i], g[j]);
        if gj == gi {
            nu[j]
        } else {
            nu[i] + (limit - gi) / (gj - gi) * (nu[j] - nu[i])
        }
    };
    let mut lo_i = k;
    while lo_i > 0 && g[lo_i - 1] <= limit {
        lo_i -= 1;
    }
    let mut hi_i = k;
    while hi_i + 1 < g.len() && g[hi_i + 1] <= limit {
        hi_i += 1;
    }
    let lo = if lo_i > 0 && g[lo_i] <= limit { cross(lo_i, lo_i - 1) } else { nu[lo_i] };
    let hi = if hi_i + 1 < g.len() && g[hi_i] <= limit { cross(hi_i, hi_i + 1) } else { nu[hi_i] };
    let (lo, hi) = if g[k] > limit { (nu_star, nu_star) } else { (lo.min(nu_star), hi.max(nu_star)) };
    Ok(GapResult { nu_star, gap_min, width_at_twice: hi - lo, interval: (lo, hi) })
}
