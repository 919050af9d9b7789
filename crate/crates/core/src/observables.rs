//! Stationary observables: photon number, emitted flux, cavity emission
//! spectrum and the dressed-level transition graph.

use std::collections::BTreeMap;
use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use rayon::prelude::*;

use crate::dissipators::{ChannelKind, ChannelSet, EigenSystem};
use crate::error::{invalid, Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::la::{self, ZERO};
use crate::liouvillian::{SteadyState, Superoperator};
use crate::model::SystemParams;
use crate::space::{expectation, DensityMatrix, Operator, OperatorSet};

/// `Tr(a†a ρ)`.
pub fn excitation_number(rho: &DensityMatrix, ops: &OperatorSet) -> Result<f64> {
    Ok(expectation(&ops.n_phot, rho)?.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionFlux {
    /// `Σ Γ ⟨A†A⟩` over cavity channels.
    pub photon_rate: f64,
    /// Same sum weighted by each channel's lab-frame frequency.
    pub energy_flux: f64,
}

pub fn emission_flux(rho: &DensityMatrix, channels: &ChannelSet) -> Result<EmissionFlux> {
    if rho.space() != channels.eig.space {
        return invalid("density matrix and channels come from different truncations");
    }
    let rho_e = channels.eig.to_dressed(rho.matrix());
    let mut photon_rate = 0.0;
    let mut energy_flux = 0.0;
    for ch in channels.of_kind(ChannelKind::Cavity) {
        let occ = ch.rate * ch.occupation(rho_e.as_ref());
        photon_rate += occ;
        energy_flux += occ * ch.lab_freq;
    }
    Ok(EmissionFlux { photon_rate, energy_flux })
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Lab-frame frequencies, ascending.
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub params: SystemParams,
}

impl Spectrum {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.freqs, &self.values)
    }

    pub fn peak(&self) -> (f64, f64) {
        let i = (0..self.values.len()).fold(0, |b, i| if self.values[i] > self.values[b] { i } else { b });
        (self.freqs[i], self.values[i])
    }

    /// CSV with header `omega_s,S`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["omega_s", "S"])?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            w.row(&[fmt_f64(*f), fmt_f64(*v)])?;
        }
        w.finish()
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Uniform step `2e-5` over `ω₀ ± 0.15`, continued by geometric tails out to
/// `ω₀ ± 50` so that the integral captures Lorentzian wings.
pub fn default_spectrum_grid(params: &SystemParams) -> Vec<f64> {
    let center = params.omega0;
    let (half, step, reach, ratio): (f64, f64, f64, f64) = (0.15, 2e-5, 50.0, 1.05);
    let n = (2.0 * half / step).round() as usize;
    let core: Vec<f64> = (0..=n).map(|i| center - half + i as f64 * step).collect();
    let mut tail = Vec::new();
    let mut off = half;
    let mut h = step;
    while off < reach {
        h *= ratio;
        off += h;
        tail.push(off.min(reach));
    }
    let mut grid: Vec<f64> = tail.iter().rev().map(|o| center - o).collect();
    grid.extend(core);
    grid.extend(tail.iter().map(|o| center + o));
    grid
}

/// Blocks up to this size are solved directly at every frequency; larger ones
/// are diagonalized once.
const DIRECT_BLOCK_LIMIT: usize = 160;

/// Incoherent cavity emission spectrum by quantum regression.
///
/// With `δa = a − ⟨a⟩`, `S(ω_s) = 2 Re Tr(δa† X)` where
/// `(L − i(ω_s − ω)) X = −δa ρ_st`. The stationary mode is deflated, so the
/// coherent line at `ω_s = ω` is absent.
pub fn emission_spectrum(
    l: &Superoperator,
    ss: &SteadyState,
    ops: &OperatorSet,
    params: &SystemParams,
    freq_grid: &[f64],
) -> Result<Spectrum> {
    emission_spectrum_with(l, ss, ops, params, freq_grid, DIRECT_BLOCK_LIMIT)
}

pub(crate) fn emission_spectrum_with(
    l: &Superoperator,
    ss: &SteadyState,
    ops: &OperatorSet,
    params: &SystemParams,
    freq_grid: &[f64],
    direct_limit: usize,
) -> Result<Spectrum> {
    if ss.rho.space() != l.space() || ops.a.space() != l.space() {
        return invalid("steady state, operators and generator disagree on the truncation");
    }
    if freq_grid.iter().any(|f| !f.is_finite()) {
        return invalid("frequency grid contains non-finite values");
    }
    let d = l.dim();
    let eig = l.eig();
    let mean_a = expectation(&ops.a, &ss.rho)?;
    let da = Operator::from_parts(
        l.space(),
        Mat::from_fn(d, d, |i, j| ops.a.matrix()[(i, j)] - if i == j { mean_a } else { ZERO }),
    );
    let da_e = eig.to_dressed(da.matrix());
    let rho_e = eig.to_dressed(ss.rho.matrix());
    let rhs = la::vec_col((&da_e * &rho_e).as_ref());
    let weights = la::vec_col(da_e.as_ref());
    let rho_vec = la::vec_col(rho_e.as_ref());
    let pop_block = l.population_blocks();
    let shift = -l.norm().max(1e-300);

    let mut terms: Vec<BlockTerm> = Vec::new();
    for (b, block) in l.blocks().iter().enumerate() {
        let bv: Vec<c64> = block.iter().map(|&i| -rhs[i]).collect();
        let cv: Vec<c64> = block.iter().map(|&i| weights[i].conj()).collect();
        if bv.iter().all(|v| *v == ZERO) || cv.iter().all(|v| *v == ZERO) {
            continue;
        }
        let mut lb = l.dense_block(block);
        if pop_block.contains(&b) {
            // L + s |ρ⟩⟨I|: same action on traceless vectors, stationary mode moved to s.
            for (p, &i) in block.iter().enumerate() {
                for (q, &j) in block.iter().enumerate() {
                    if j % d == j / d {
                        lb[(p, q)] += rho_vec[i] * shift;
                    }
                }
            }
        }
        terms.push(if block.len() <= direct_limit {
            BlockTerm::Direct { lb, bv, cv }
        } else {
            BlockTerm::modal(&lb, &bv, &cv)?
        });
    }

    let values: Vec<Result<f64>> = freq_grid
        .par_iter()
        .map(|&ws| {
            let z = c64::new(0.0, ws - params.omega);
            let mut acc = ZERO;
            for t in &terms {
                acc += t.eval(z).ok_or(Error::SingularShift { omega_s: ws })?;
            }
            Ok(2.0 * acc.re)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(Spectrum { freqs: freq_grid.to_vec(), values, params: params.clone() })
}

enum BlockTerm {
    /// Solves `(L_b − z) x = b` at each frequency and returns `c·x`.
    Direct { lb: Mat<c64>, bv: Vec<c64>, cv: Vec<c64> },
    /// `Σ_m r_m / (λ_m − z)`.
    Modal { lambda: Vec<c64>, residue: Vec<c64> },
}

impl BlockTerm {
    fn modal(lb: &Mat<c64>, bv: &[c64], cv: &[c64]) -> Result<Self> {
        let m = lb.nrows();
        let e = lb.eigen().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let v = e.U();
        let s = e.S();
        let bmat = Mat::from_fn(m, 1, |i, _| bv[i]);
        let y = v.partial_piv_lu().solve(&bmat);
        let mut lambda = Vec::with_capacity(m);
        let mut residue = Vec::with_capacity(m);
        for k in 0..m {
            let left: c64 = (0..m).map(|i| cv[i] * v[(i, k)]).sum();
            lambda.push(s[k]);
            residue.push(left * y[(k, 0)]);
        }
        Ok(BlockTerm::Modal { lambda, residue })
    }

    fn eval(&self, z: c64) -> Option<c64> {
        let out = match self {
            BlockTerm::Direct { lb, bv, cv } => {
                let m = lb.nrows();
                if m == 1 {
                    let den = lb[(0, 0)] - z;
                    cv[0] * bv[0] / den
                } else {
                    let a = Mat::from_fn(m, m, |i, j| lb[(i, j)] - if i == j { z } else { ZERO });
                    let rhs = Mat::from_fn(m, 1, |i, _| bv[i]);
                    let x = a.partial_piv_lu().solve(&rhs);
                    (0..m).map(|i| cv[i] * x[(i, 0)]).sum()
                }
            }
            BlockTerm::Modal { lambda, residue } => {
                lambda.iter().zip(residue).map(|(l, r)| r / (l - z)).sum()
            }
        };
        (out.re.is_finite() && out.im.is_finite()).then_some(out)
    }
}

/// Equivalent width `∫S / max S`.
pub fn spectral_width(s: &Spectrum) -> Result<f64> {
    if s.values.is_empty() {
        return invalid("empty spectrum");
    }
    let (_, top) = s.peak();
    if !(top > 0.0) {
        return Err(Error::UndefinedWidth);
    }
    Ok(s.integral() / top)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: ChannelKind,
    /// `Σ Γ |A_to,from|²` over the channels of this kind.
    pub rate: f64,
    /// `rate · p_from`.
    pub flux: f64,
}

#[derive(Debug, Clone)]
pub struct TransitionGraph {
    /// Dressed-state populations, indexed like `EigenSystem::energies`.
    pub populations: Vec<f64>,
    pub energies: Vec<f64>,
    /// Sorted by `(kind, from, to)`.
    pub edges: Vec<Edge>,
    /// Population gain per node supplied by dressed-basis coherences; zero in
    /// the full secular limit. At stationarity `in − out + coherent_drift = 0`.
    pub coherent_drift: Vec<f64>,
}

impl TransitionGraph {
    /// Total in-flux minus out-flux over all edges at `node`.
    pub fn net_flux(&self, node: usize) -> f64 {
        self.edges
            .iter()
            .map(|e| if e.to == node { e.flux } else if e.from == node { -e.flux } else { 0.0 })
            .sum()
    }

    /// CSV with header `from,to,kind,rate,flux`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["from", "to", "kind", "rate", "flux"])?;
        for e in &self.edges {
            w.row(&[e.from.to_string(), e.to.to_string(), e.kind.to_string(), fmt_f64(e.rate), fmt_f64(e.flux)])?;
        }
        w.finish()
    }
}

pub fn transition_graph(rho: &DensityMatrix, channels: &ChannelSet, eig: &EigenSystem) -> Result<TransitionGraph> {
    if rho.space() != eig.space || channels.eig.space != eig.space {
        return invalid("density matrix, channels and eigensystem disagree on the truncation");
    }
    let d = eig.dim();
    let rho_e = eig.to_dressed(rho.matrix());
    let populations: Vec<f64> = (0..d).map(|j| rho_e[(j, j)].re).collect();

    let mut rates: BTreeMap<(ChannelKind, usize, usize), f64> = BTreeMap::new();
    let mut gain = vec![ZERO; d];
    let mut kmat = Mat::<c64>::zeros(d, d);
    for ch in channels.channels.iter().filter(|c| c.rate > 0.0) {
        let comps = &ch.components;
        for c in comps.iter().filter(|c| c.to != c.from) {
            *rates.entry((ch.kind, c.from, c.to)).or_insert(0.0) += ch.rate * c.amp.norm_sqr();
        }
        let mut start = 0;
        while start < comps.len() {
            let j = comps[start].to;
            let end = start + comps[start..].iter().take_while(|c| c.to == j).count();
            for x in &comps[start..end] {
                for y in &comps[start..end] {
                    kmat[(x.from, y.from)] += x.amp.conj() * y.amp * ch.rate;
                    if x.from != y.from {
                        // (A ρ A†)_jj from coherences ρ_kk'.
                        gain[j] += x.amp * rho_e[(x.from, y.from)] * y.amp.conj() * ch.rate;
                    }
                }
            }
            start = end;
        }
    }
    let coherent_drift = (0..d)
        .map(|j| {
            let anti: c64 = (0..d).filter(|&l| l != j).map(|l| kmat[(j, l)] * rho_e[(l, j)]).sum();
            gain[j].re - anti.re
        })
        .collect();
    let edges = rates
        .into_iter()
        .map(|((kind, from, to), rate)| Edge { from, to, kind, rate, flux: rate * populations[from] })
        .collect();
    Ok(TransitionGraph { populations, energies: eig.energies.clone(), edges, coherent_drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{assemble_liouvillian, steady_state};
    use crate::space::build_operators;

    #[test]
    fn direct_and_modal_paths_agree() {
        let p = SystemParams { n_max: 3, nu: 4e-3, delta_secular: 5e-3, ..Default::default() };
        let (l, _, _) = assemble_liouvillian(&p).unwrap();
        let ss = steady_state(&l).unwrap();
        let ops = build_operators(l.space());
        let grid: Vec<f64> = (0..200).map(|i| 0.97 + i as f64 * 3e-4).collect();
        let a = emission_spectrum_with(&l, &ss, &ops, &p, &grid, usize::MAX).unwrap();
        let b = emission_spectrum_with(&l, &ss, &ops, &p, &grid, 0).unwrap();
        let top = a.peak().1;
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-8 * top, "{x} vs {y}");
        }
    }

    #[test]
    fn width_of_spike_and_flat() {
        let p = SystemParams::default();
        let freqs: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let mut values = vec![0.0; 11];
        values[5] = 3.0;
        let s = Spectrum { freqs: freqs.clone(), values, params: p.clone() };
        assert!((spectral_width(&s).unwrap() - 0.1).abs() < 1e-12);
        let s = Spectrum { freqs, values: vec![2.0; 11], params: p.clone() };
        assert!((spectral_width(&s).unwrap() - 1.0).abs() < 1e-12);
        let s = Spectrum { freqs: vec![0.0, 1.0], values: vec![0.0, 0.0], params: p };
        assert_eq!(spectral_width(&s), Err(Error::UndefinedWidth));
    }

    #[test]
    fn default_grid_is_ascending_and_wide() {
        let g = default_spectrum_grid(&SystemParams::default());
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[0] <= -49.0 && *g.last().unwrap() >= 51.0);
    }

    #[test]
    fn ground_state_has_no_flux() {
        let p = SystemParams { n_max: 4, ..Default::default() };
        let (_, ch, _) = assemble_liouvillian(&p).unwrap();
        let f = emission_flux(&DensityMatrix::ground(ch.eig.space), &ch).unwrap();
        assert!(f.photon_rate.abs() < 1e-15 && f.energy_flux.abs() < 1e-15);
    }
}
