//! Dressed basis and global-approach jump channels.
//!
//! Each bare jump operator (a, σ, σ†σ) is projected on pairs of eigenstates of
//! the system Hamiltonian, `A_jk = ⟨j|A|k⟩`, and the components are grouped by
//! Bohr frequency `ω_b = E_k − E_j`. Every group becomes one channel with its
//! own rate.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::la::{self, ZERO};
use crate::model::{ElasticRatePolicy, SystemParams};
use crate::space::{Operator, OperatorSet, SpaceConfig};

/// Bohr frequencies closer than this are treated as exactly degenerate.
pub const BOHR_TIE_TOL: f64 = 1e-11;
/// Components with `|A_jk|` below this fraction of the largest one are dropped.
pub const COMPONENT_CUTOFF: f64 = 1e-14;

const HERMITIAN_INPUT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending rotating-frame energies.
    pub energies: Vec<f64>,
    /// Column `i` is the eigenvector of `energies[i]`.
    pub states: Mat<c64>,
    pub space: SpaceConfig,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `U† M U`: product basis to dressed basis.
    pub fn to_dressed(&self, m: faer::MatRef<'_, c64>) -> Mat<c64> {
        la::similarity_dag(self.states.as_ref(), m)
    }

    /// `U M U†`: dressed basis to product basis.
    pub fn to_product(&self, m: faer::MatRef<'_, c64>) -> Mat<c64> {
        la::similarity(self.states.as_ref(), m)
    }
}

/// Diagonalizes a Hermitian operator. Eigenvectors are normalized so that
/// their largest-magnitude entry is real and positive; equal energies are
/// ordered by the first differing eigenvector component, larger first.
pub fn diagonalize_h(h: &Operator) -> Result<EigenSystem> {
    let m = h.matrix();
    let scale = la::max_abs(m).max(1.0);
    let defect = la::hermiticity_defect(m);
    if defect > HERMITIAN_INPUT_TOL * scale {
        return invalid(format!("Hamiltonian is not Hermitian (defect {defect:e})"));
    }
    let herm = la::hermitian_part(m);
    let eig = herm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let d = m.nrows();
    let u = eig.U();
    let s = eig.S();

    let mut cols: Vec<(f64, Vec<c64>)> = (0..d)
        .map(|c| {
            let mut v: Vec<c64> = (0..d).map(|r| u[(r, c)]).collect();
            fix_phase(&mut v);
            (s[c].re, v)
        })
        .collect();
    cols.sort_by(|(ea, va), (eb, vb)| {
        ea.partial_cmp(eb).unwrap_or(Ordering::Equal).then_with(|| {
            for (x, y) in va.iter().zip(vb) {
                let ord = y.re.partial_cmp(&x.re).unwrap_or(Ordering::Equal).then(
                    y.im.partial_cmp(&x.im).unwrap_or(Ordering::Equal),
                );
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    });

    let states = Mat::from_fn(d, d, |r, c| cols[c].1[r]);
    let energies = cols.into_iter().map(|(e, _)| e).collect();
    Ok(EigenSystem { energies, states, space: h.space() })
}

fn fix_phase(v: &mut [c64]) {
    let big = v.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    // First entry within rounding of the maximum, so near-ties resolve by index.
    let Some(pivot) = v.iter().position(|x| x.norm() >= big * (1.0 - 1e-12)) else {
        return;
    };
    let p = v[pivot];
    if p.norm() == 0.0 {
        return;
    }
    let phase = p.conj() / p.norm();
    for x in v.iter_mut() {
        *x *= phase;
    }
    v[pivot] = c64::new(v[pivot].norm(), 0.0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Cavity,
    Molecule,
    Dephasing,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Cavity => "cavity",
            ChannelKind::Molecule => "molecule",
            ChannelKind::Dephasing => "dephasing",
        })
    }
}

/// `amp = ⟨to|A|from⟩` in the dressed basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub to: usize,
    pub from: usize,
    pub amp: c64,
}

#[derive(Debug, Clone)]
pub struct JumpChannel {
    pub kind: ChannelKind,
    /// Mean of `E_from − E_to` over the cluster; exactly 0 for the elastic cluster.
    pub bohr_freq: f64,
    pub lab_freq: f64,
    pub rate: f64,
    pub elastic: bool,
    /// Sorted by `(to, from)`.
    pub components: Vec<Component>,
}

impl JumpChannel {
    /// The component operator in the dressed basis.
    pub fn dressed_matrix(&self, dim: usize) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(dim, dim);
        for c in &self.components {
            m[(c.to, c.from)] += c.amp;
        }
        m
    }

    /// Frobenius norm of the component operator (rate not included).
    pub fn frobenius_norm(&self) -> f64 {
        self.components.iter().map(|c| c.amp.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Tr(A ρ A†)` for a dressed-basis density matrix.
    pub fn occupation(&self, rho_dressed: faer::MatRef<'_, c64>) -> f64 {
        // Components are grouped by `to`: Σ_j Σ_{k,k'} A_jk ρ_kk' conj(A_jk').
        let mut acc = ZERO;
        let comps = &self.components;
        let mut start = 0;
        while start < comps.len() {
            let j = comps[start].to;
            let end = start + comps[start..].iter().take_while(|c| c.to == j).count();
            for x in &comps[start..end] {
                for y in &comps[start..end] {
                    acc += x.amp * rho_dressed[(x.from, y.from)] * y.amp.conj();
                }
            }
            start = end;
        }
        acc.re
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub channels: Vec<JumpChannel>,
    pub eig: EigenSystem,
    pub params: SystemParams,
}

impl ChannelSet {
    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    pub fn of_kind(&self, kind: ChannelKind) -> impl Iterator<Item = &JumpChannel> {
        self.channels.iter().filter(move |c| c.kind == kind)
    }

    /// Component operator of `ch` mapped back to the product basis.
    pub fn operator(&self, ch: &JumpChannel) -> Operator {
        let m = self.eig.to_product(ch.dressed_matrix(self.dim()).as_ref());
        Operator::from_parts(self.eig.space, m)
    }

    /// Sum of all component operators of one kind, in the product basis.
    pub fn reconstruct(&self, kind: ChannelKind) -> Operator {
        let d = self.dim();
        let mut m = Mat::<c64>::zeros(d, d);
        for ch in self.of_kind(kind) {
            for c in &ch.components {
                m[(c.to, c.from)] += c.amp;
            }
        }
        Operator::from_parts(self.eig.space, self.eig.to_product(m.as_ref()))
    }

    /// CSV with header `kind,bohr_freq,lab_freq,rate,frobenius_norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["kind", "bohr_freq", "lab_freq", "rate", "frobenius_norm"])?;
        for ch in &self.channels {
            w.row(&[
                ch.kind.to_string(),
                fmt_f64(ch.bohr_freq),
                fmt_f64(ch.lab_freq),
                fmt_f64(ch.rate),
                fmt_f64(ch.frobenius_norm()),
            ])?;
        }
        w.finish()
    }
}

/// Mean thermal occupation `1/(exp(x/T) − 1)`; zero at `T = 0`.
pub fn bose_occupation(x: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / (x.abs() / temperature).exp_m1()
    }
}

/// Splits frequencies into clusters anchored at zero.
///
/// Entries with `|w| < delta/2` (or within [`BOHR_TIE_TOL`] of zero) form the
/// elastic cluster, returned first. Each side is then swept outward; a cluster
/// is closed once the next value lies `delta` or more beyond its first member,
/// unless it ties with the previous value. Returns index lists; the flag marks
/// the elastic cluster.
pub fn cluster_frequencies(freqs: &[f64], delta: f64) -> Vec<(bool, Vec<usize>)> {
    let is_elastic = |w: f64| w.abs() <= BOHR_TIE_TOL || w.abs() < 0.5 * delta;
    let mut elastic = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, &w) in freqs.iter().enumerate() {
        if is_elastic(w) {
            elastic.push(i);
        } else if w > 0.0 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    let sweep = |mut idx: Vec<usize>, sign: f64| -> Vec<Vec<usize>> {
        let key = |i: usize| sign * freqs[i];
        idx.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut start = f64::NAN;
        let mut prev = f64::NAN;
        for i in idx {
            let w = key(i);
            let tied = w - prev <= BOHR_TIE_TOL;
            if out.is_empty() || (!tied && w - start >= delta && w - start > BOHR_TIE_TOL) {
                out.push(Vec::new());
                start = w;
            }
            out.last_mut().unwrap().push(i);
            prev = w;
        }
        out
    };
    let mut clusters = Vec::new();
    let mut negs = sweep(neg, -1.0);
    negs.reverse();
    clusters.extend(negs.into_iter().map(|c| (false, c)));
    if !elastic.is_empty() {
        clusters.push((true, elastic));
    }
    clusters.extend(sweep(pos, 1.0).into_iter().map(|c| (false, c)));
    clusters
}

fn channel_rate(kind: ChannelKind, params: &SystemParams, bohr: f64, elastic: bool) -> f64 {
    match kind {
        ChannelKind::Cavity => params.gamma_a,
        ChannelKind::Molecule => params.gamma_d,
        ChannelKind::Dephasing => {
            let g = params.gamma_ph;
            if elastic {
                match params.elastic_rate_policy {
                    ElasticRatePolicy::Bare => g,
                    ElasticRatePolicy::Scaled { omega_ref } => g * params.temperature / omega_ref,
                }
            } else {
                let nbar = bose_occupation(bohr, params.temperature);
                if bohr > 0.0 {
                    g * (nbar + 1.0)
                } else {
                    g * nbar
                }
            }
        }
    }
}

/// Builds the global jump channels for `a` (cavity), `σ` (molecule) and
/// `σ†σ` (dephasing) on the dressed basis `eig`.
pub fn decompose_channels(params: &SystemParams, eig: &EigenSystem, ops: &OperatorSet) -> Result<ChannelSet> {
    params.validate()?;
    if ops.a.space() != eig.space || eig.space.n_max() != params.n_max {
        return invalid("eigensystem, operators and params disagree on the truncation");
    }
    let d = eig.dim();
    let mut channels = Vec::new();
    for (kind, op) in [
        (ChannelKind::Cavity, &ops.a),
        (ChannelKind::Molecule, &ops.sigma),
        (ChannelKind::Dephasing, &ops.n_mol),
    ] {
        let ae = eig.to_dressed(op.matrix());
        let biggest = la::max_abs(ae.as_ref());
        if biggest == 0.0 {
            continue;
        }
        let mut comps = Vec::new();
        let mut freqs = Vec::new();
        for to in 0..d {
            for from in 0..d {
                let amp = ae[(to, from)];
                if amp.norm() > COMPONENT_CUTOFF * biggest {
                    comps.push(Component { to, from, amp });
                    freqs.push(eig.energies[from] - eig.energies[to]);
                }
            }
        }
        for (elastic, idx) in cluster_frequencies(&freqs, params.delta_secular) {
            let bohr = if elastic { 0.0 } else { idx.iter().map(|&i| freqs[i]).sum::<f64>() / idx.len() as f64 };
            let mut components: Vec<Component> = idx.iter().map(|&i| comps[i]).collect();
            components.sort_by_key(|c| (c.to, c.from));
            let lab_freq = match kind {
                ChannelKind::Dephasing => bohr.abs(),
                _ => params.omega + bohr,
            };
            channels.push(JumpChannel {
                kind,
                bohr_freq: bohr,
                lab_freq,
                rate: channel_rate(kind, params, bohr, elastic),
                elastic,
                components,
            });
        }
    }
    Ok(ChannelSet { channels, eig: eig.clone(), params: params.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hamiltonian_for;

    #[test]
    fn identity_diagonalizes_to_unit_vectors() {
        let s = crate::space::build_space(3).unwrap();
        let eig = diagonalize_h(&Operator::identity(s)).unwrap();
        assert!(eig.energies.iter().all(|&e| (e - 1.0).abs() < 1e-15));
        assert_eq!(la::max_abs_diff(eig.states.as_ref(), Operator::identity(s).matrix()), 0.0);
    }

    #[test]
    fn rejects_non_hermitian() {
        let s = crate::space::build_space(2).unwrap();
        let mut m = Mat::<c64>::zeros(s.dim(), s.dim());
        m[(0, 1)] = c64::new(1.0, 0.0);
        assert!(diagonalize_h(&Operator::new(s, m).unwrap()).unwrap_err().is_validation());
    }

    #[test]
    fn polariton_levels_present_at_zero_drive() {
        let (_, h) = hamiltonian_for(&SystemParams::default()).unwrap();
        let eig = diagonalize_h(&h).unwrap();
        for want in [-0.0201, -0.0204] {
            assert!(eig.energies.iter().any(|e| (e - want).abs() < 1e-12), "{want}");
        }
    }

    #[test]
    fn phase_convention() {
        let p = SystemParams { nu: 4e-3, n_max: 6, ..Default::default() };
        let (_, h) = hamiltonian_for(&p).unwrap();
        let eig = diagonalize_h(&h).unwrap();
        for c in 0..eig.dim() {
            let col: Vec<c64> = (0..eig.dim()).map(|r| eig.states[(r, c)]).collect();
            let big = col.iter().map(|x| x.norm()).fold(0.0, f64::max);
            let p = col.iter().position(|x| x.norm() >= big * (1.0 - 1e-12)).unwrap();
            assert!(col[p].im == 0.0 && col[p].re > 0.0);
        }
    }

    #[test]
    fn clustering_zero_delta_keeps_ties_only() {
        let w = [0.0, 1e-13, 0.1, 0.1 + 1e-13, 0.2, -0.1, -0.1 - 1e-13];
        let cl = cluster_frequencies(&w, 0.0);
        let sets: Vec<Vec<usize>> = cl.iter().map(|(_, c)| c.clone()).collect();
        assert_eq!(sets, vec![vec![5, 6], vec![0, 1], vec![2, 3], vec![4]]);
        assert!(cl[1].0);
    }

    #[test]
    fn clustering_window_and_mirror() {
        let w = [0.001, 0.004, 0.0065, 0.011, -0.001, -0.004, -0.0065, -0.011, 0.0];
        let cl = cluster_frequencies(&w, 5e-3);
        let sets: Vec<Vec<usize>> = cl.iter().map(|(_, c)| c.clone()).collect();
        assert_eq!(sets, vec![vec![7], vec![5, 6], vec![0, 4, 8], vec![1, 2], vec![3]]);
        assert!(cl[2].0);
    }

    #[test]
    fn bose_factor() {
        assert_eq!(bose_occupation(0.5, 0.0), 0.0);
        let n = bose_occupation(0.02, 0.02);
        assert!((n / (n + 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }
}
