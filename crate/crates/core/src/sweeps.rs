//! Parameter sweeps over the drive amplitude and frequency, truncation
//! control and peak/ridge detection on the results.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::liouvillian::{assemble_liouvillian, steady_state};
use crate::model::SystemParams;
use crate::observables::{default_spectrum_grid, emission_flux, emission_spectrum, excitation_number, spectral_width};
use crate::space::build_operators;

/// Largest truncation `converge_truncation` will compare against.
pub const N_MAX_CEILING: usize = 60;
pub const N_MAX_STEP: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RowStatus::Ok)
    }

    fn csv_field(&self) -> String {
        match self {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n', '\r'], ";")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nu: f64,
    pub omega: f64,
    pub n_st: f64,
    pub photon_rate: f64,
    pub energy_flux: f64,
    pub spectral_width: Option<f64>,
    pub n_max_used: usize,
    pub residual: f64,
    pub status: RowStatus,
}

pub const SWEEP_CSV_HEADER: [&str; 9] =
    ["nu", "omega", "n_st", "photon_rate", "energy_flux", "spectral_width", "n_max_used", "residual", "status"];

/// Sweep/map CSV. Missing spectral widths are left empty; failed rows carry
/// `nan` values and the failure message in `status`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &SWEEP_CSV_HEADER)?;
    for r in rows {
        w.row(&[
            fmt_f64(r.nu),
            fmt_f64(r.omega),
            fmt_f64(r.n_st),
            fmt_f64(r.photon_rate),
            fmt_f64(r.energy_flux),
            r.spectral_width.map(fmt_f64).unwrap_or_default(),
            r.n_max_used.to_string(),
            fmt_f64(r.residual),
            r.status.csv_field(),
        ])?;
    }
    w.finish()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOptions {
    pub with_spectra: bool,
    /// Spectrum grid for the width column; the default grid when `None`.
    pub spectrum_grid: Option<Vec<f64>>,
    /// Run `converge_truncation` with this tolerance at the largest ν first
    /// and use the result for every point.
    pub auto_converge: Option<f64>,
}

/// Steady state and observables at one parameter point. Solver failures are
/// recorded in the row.
pub fn evaluate_point(params: &SystemParams, opts: &SweepOptions) -> SweepRow {
    match try_point(params, opts) {
        Ok(row) => row,
        Err(e) => SweepRow {
            nu: params.nu,
            omega: params.omega,
            n_st: f64::NAN,
            photon_rate: f64::NAN,
            energy_flux: f64::NAN,
            spectral_width: None,
            n_max_used: params.n_max,
            residual: f64::NAN,
            status: RowStatus::Failed(e.to_string()),
        },
    }
}

fn try_point(params: &SystemParams, opts: &SweepOptions) -> Result<SweepRow> {
    let (l, channels, _) = assemble_liouvillian(params)?;
    let ss = steady_state(&l)?;
    let ops = build_operators(l.space());
    let n_st = excitation_number(&ss.rho, &ops)?;
    let flux = emission_flux(&ss.rho, &channels)?;
    let spectral_width = if opts.with_spectra {
        let grid = opts.spectrum_grid.clone().unwrap_or_else(|| default_spectrum_grid(params));
        let s = emission_spectrum(&l, &ss, &ops, params, &grid)?;
        Some(spectral_width(&s)?)
    } else {
        None
    };
    Ok(SweepRow {
        nu: params.nu,
        omega: params.omega,
        n_st,
        photon_rate: flux.photon_rate,
        energy_flux: flux.energy_flux,
        spectral_width,
        n_max_used: params.n_max,
        residual: ss.residual,
        status: RowStatus::Ok,
    })
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return invalid(format!("{name} grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("{name} grid must be finite and strictly ascending"));
    }
    Ok(())
}

/// One row per ν, in grid order.
pub fn sweep_nu(params: &SystemParams, nu_grid: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    params.validate()?;
    check_grid("nu", nu_grid)?;
    let mut base = params.clone();
    if let Some(tol) = opts.auto_converge {
        base.n_max = converge_truncation(&base.with_nu(*nu_grid.last().unwrap()), tol)?;
    }
    Ok(nu_grid.par_iter().map(|&nu| evaluate_point(&base.with_nu(nu), opts)).collect())
}

/// Full ν × ω grid, ω-major: rows `[iω · len(ν) + iν]`. With auto-converge
/// the largest truncation needed by any ω at the largest ν is used everywhere.
pub fn map_nu_omega(
    params: &SystemParams,
    nu_grid: &[f64],
    omega_grid: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    params.validate()?;
    check_grid("nu", nu_grid)?;
    check_grid("omega", omega_grid)?;
    let mut base = params.clone();
    if let Some(tol) = opts.auto_converge {
        let top = *nu_grid.last().unwrap();
        let needed = omega_grid
            .par_iter()
            .map(|&omega| converge_truncation(&SystemParams { omega, ..base.with_nu(top) }, tol))
            .collect::<Result<Vec<usize>>>()?;
        base.n_max = needed.into_iter().max().unwrap();
    }
    let cells: Vec<(f64, f64)> =
        omega_grid.iter().flat_map(|&omega| nu_grid.iter().map(move |&nu| (omega, nu))).collect();
    Ok(cells
        .par_iter()
        .map(|&(omega, nu)| evaluate_point(&SystemParams { omega, ..base.with_nu(nu) }, opts))
        .collect())
}

fn n_st_at(params: &SystemParams) -> Result<f64> {
    let (l, _, _) = assemble_liouvillian(params)?;
    let ss = steady_state(&l)?;
    excitation_number(&ss.rho, &build_operators(l.space()))
}

/// Smallest `n_max` (from `params.n_max` in steps of 4) whose photon number
/// changes by at most `tol · max(n_st, 1e-6)` when the truncation grows by 4.
pub fn converge_truncation(params: &SystemParams, tol: f64) -> Result<usize> {
    params.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return invalid("convergence tolerance must be positive");
    }
    let mut n = params.n_max;
    let mut current = n_st_at(params)?;
    let mut change = f64::NAN;
    while n + N_MAX_STEP <= N_MAX_CEILING {
        let next = n_st_at(&params.with_n_max(n + N_MAX_STEP))?;
        change = (next - current).abs();
        if change <= tol * current.max(1e-6) {
            return Ok(n);
        }
        n += N_MAX_STEP;
        current = next;
    }
    Err(Error::TruncationFailure { n_max: n, change })
}

/// Interior indices `i` with `v[i−1] < v[i] ≥ v[i+1]`. Non-finite values
/// never count.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| {
            let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
            a.is_finite() && b.is_finite() && c.is_finite() && b > a && b >= c
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeParams {
    /// Largest shift, in grid steps along the row, between linked peaks of
    /// neighbouring rows.
    pub max_shift: usize,
    /// Rows a chain must span to count as a ridge.
    pub min_rows: usize,
}

impl Default for RidgeParams {
    fn default() -> Self {
        RidgeParams { max_shift: 2, min_rows: 20 }
    }
}

/// A chain of per-row peaks: `(row, column)` pairs with consecutive rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub points: Vec<(usize, usize)>,
}

/// Links peak columns of consecutive rows into chains. Each open chain takes
/// the nearest unclaimed peak within `max_shift` of its last column; nearest
/// pairs are linked first. Chains shorter than `min_rows` are dropped.
pub fn find_ridges(row_peaks: &[Vec<usize>], rp: RidgeParams) -> Vec<Ridge> {
    let mut open: Vec<Ridge> = Vec::new();
    let mut done: Vec<Ridge> = Vec::new();
    for (r, peaks) in row_peaks.iter().enumerate() {
        let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
        for (ci, chain) in open.iter().enumerate() {
            let last = chain.points.last().unwrap().1;
            for (pi, &p) in peaks.iter().enumerate() {
                let dist = last.abs_diff(p);
                if dist <= rp.max_shift {
                    pairs.push((dist, ci, pi));
                }
            }
        }
        pairs.sort();
        let mut chain_used = vec![false; open.len()];
        let mut peak_used = vec![false; peaks.len()];
        for (_, ci, pi) in pairs {
            if !chain_used[ci] && !peak_used[pi] {
                chain_used[ci] = true;
                peak_used[pi] = true;
                open[ci].points.push((r, peaks[pi]));
            }
        }
        let mut still_open = Vec::new();
        for (ci, chain) in open.into_iter().enumerate() {
            if chain_used[ci] {
                still_open.push(chain);
            } else {
                done.push(chain);
            }
        }
        for (pi, &p) in peaks.iter().enumerate() {
            if !peak_used[pi] {
                still_open.push(Ridge { points: vec![(r, p)] });
            }
        }
        open = still_open;
    }
    done.extend(open);
    done.retain(|c| c.points.len() >= rp.min_rows);
    done.sort_by_key(|c| c.points[0]);
    done
}

/// Ridges of `n_st` in an ω-major map with `n_nu` points per ω row. Peaks
/// are found along ω at each fixed ν and linked across consecutive ν.
pub fn map_ridges(rows: &[SweepRow], n_nu: usize, rp: RidgeParams) -> Vec<Ridge> {
    if n_nu == 0 {
        return Vec::new();
    }
    let n_omega = rows.len() / n_nu;
    let peaks: Vec<Vec<usize>> = (0..n_nu)
        .map(|j| local_maxima(&(0..n_omega).map(|i| rows[i * n_nu + j].n_st).collect::<Vec<_>>()))
        .collect();
    find_ridges(&peaks, rp)
}
