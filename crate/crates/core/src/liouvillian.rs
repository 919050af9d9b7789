//! Master-equation generator, stationary state and time propagation.
//!
//! The generator is stored sparse in the dressed (eigen) basis of the system
//! Hamiltonian, where the coherent part is diagonal. Vectorization is
//! column-stacking: entry `(j, k)` of ρ sits at flat index `k·D + j`.
//! Product-basis quantities go through the eigenvector matrix `U`.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};
use serde::Serialize;

use crate::dissipators::{decompose_channels, diagonalize_h, ChannelSet, EigenSystem};
use crate::error::{invalid, Error, Result};
use crate::la::{self, ONE, ZERO};
use crate::model::{hamiltonian_for, SystemParams};
use crate::space::{DensityMatrix, SpaceConfig};

#[derive(Debug, Clone)]
pub struct Superoperator {
    d: usize,
    eig: EigenSystem,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
    blocks: Vec<Vec<usize>>,
    norm: f64,
}

impl Superoperator {
    /// Builds `−i[H, ·] + Σ Γ (A·A† − ½{A†A, ·})` in the dressed basis from the
    /// channels; `H` is diagonal there with entries `eig.energies`.
    pub fn from_channels(channels: &ChannelSet) -> Self {
        let eig = &channels.eig;
        let d = eig.dim();
        let mut entries: Vec<(usize, usize, c64)> = Vec::new();
        for k in 0..d {
            for j in 0..d {
                let w = eig.energies[j] - eig.energies[k];
                entries.push((k * d + j, k * d + j, c64::new(0.0, -w)));
            }
        }
        let mut kmat = Mat::<c64>::zeros(d, d);
        for ch in channels.channels.iter().filter(|c| c.rate > 0.0) {
            let r = ch.rate;
            let comps = &ch.components;
            // A ρ A†: [j' D + j, k' D + k] += r A_jk conj(A_j'k')
            for x in comps {
                for y in comps {
                    entries.push((y.to * d + x.to, y.from * d + x.from, x.amp * y.amp.conj() * r));
                }
            }
            // A†A, grouped by the shared `to` index.
            let mut start = 0;
            while start < comps.len() {
                let j = comps[start].to;
                let end = start + comps[start..].iter().take_while(|c| c.to == j).count();
                for x in &comps[start..end] {
                    for y in &comps[start..end] {
                        kmat[(x.from, y.from)] += x.amp.conj() * y.amp * r;
                    }
                }
                start = end;
            }
        }
        for a in 0..d {
            for b in 0..d {
                let kv = kmat[(a, b)];
                if kv == ZERO {
                    continue;
                }
                let half = kv * -0.5;
                // K ρ: [k D + a, k D + b] += −½ K_ab
                // ρ K: [a D + j, b D + j] += −½ K_ba, here with (a, b) swapped
                for k in 0..d {
                    entries.push((k * d + a, k * d + b, half));
                    entries.push((b * d + k, a * d + k, half));
                }
            }
        }
        Self::from_entries(d, eig.clone(), entries)
    }

    fn from_entries(d: usize, eig: EigenSystem, mut entries: Vec<(usize, usize, c64)>) -> Self {
        let n = d * d;
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<c64> = Vec::with_capacity(entries.len());
        let mut rows_of: Vec<usize> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&lr), Some(&lc)) = (rows_of.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows_of.push(r);
            cols.push(c);
            vals.push(v);
        }
        // Drop exact cancellations so the block structure is not blurred.
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] != ZERO).collect();
        let (rows_of, cols, vals): (Vec<usize>, Vec<usize>, Vec<c64>) = (
            keep.iter().map(|&i| rows_of[i]).collect(),
            keep.iter().map(|&i| cols[i]).collect(),
            keep.iter().map(|&i| vals[i]).collect(),
        );
        for &r in &rows_of {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let norm = vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

        let mut uf = UnionFind::new(n);
        for (&r, &c) in rows_of.iter().zip(&cols) {
            uf.union(r, c);
        }
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        let mut first_of_root = vec![usize::MAX; n];
        for i in 0..n {
            let root = uf.find(i);
            if first_of_root[root] == usize::MAX {
                first_of_root[root] = i;
            }
            by_root.entry(first_of_root[root]).or_default().push(i);
        }
        let blocks = by_root.into_values().collect();
        Superoperator { d, eig, row_ptr, cols, vals, blocks, norm }
    }

    /// Hilbert-space dimension `D`; the superoperator acts on `D²` vectors.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn space(&self) -> SpaceConfig {
        self.eig.space
    }

    pub fn eig(&self) -> &EigenSystem {
        &self.eig
    }

    /// Frobenius norm (basis independent).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Index sets of the invariant blocks, each sorted ascending.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Sparse matrix–vector product on a dressed-basis vectorized operator.
    pub fn apply_dressed(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![ZERO; x.len()];
        self.apply_dressed_into(x, &mut y);
        y
    }

    fn apply_dressed_into(&self, x: &[c64], y: &mut [c64]) {
        assert_eq!(x.len(), self.d * self.d);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *out = acc;
        }
    }

    /// `L(ρ)` for a product-basis operator.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Mat<c64> {
        let re = self.eig.to_dressed(rho);
        let out = self.apply_dressed(&la::vec_col(re.as_ref()));
        self.eig.to_product(la::unvec_col(&out, self.d).as_ref())
    }

    /// Dense `D² × D²` matrix in the product basis, column-stacked. Meant for
    /// small spaces and cross-checks.
    pub fn to_dense(&self) -> Mat<c64> {
        let d = self.d;
        let n = d * d;
        let mut out = Mat::<c64>::zeros(n, n);
        for col in 0..n {
            let mut e = Mat::<c64>::zeros(d, d);
            e[(col % d, col / d)] = ONE;
            let v = la::vec_col(self.apply(e.as_ref()).as_ref());
            for (row, x) in v.into_iter().enumerate() {
                out[(row, col)] = x;
            }
        }
        out
    }

    /// Dense restriction of the dressed-basis matrix to `idx` (rows and columns).
    pub fn dense_block(&self, idx: &[usize]) -> Mat<c64> {
        let m = idx.len();
        let mut pos = std::collections::HashMap::with_capacity(m);
        for (p, &i) in idx.iter().enumerate() {
            pos.insert(i, p);
        }
        let mut out = Mat::<c64>::zeros(m, m);
        for (p, &r) in idx.iter().enumerate() {
            for q in self.row_ptr[r]..self.row_ptr[r + 1] {
                if let Some(&c) = pos.get(&self.cols[q]) {
                    out[(p, c)] += self.vals[q];
                }
            }
        }
        out
    }

    fn is_population(&self, i: usize) -> bool {
        i % self.d == i / self.d
    }

    /// Indices of blocks that contain at least one population `(k, k)`.
    pub fn population_blocks(&self) -> Vec<usize> {
        (0..self.blocks.len())
            .filter(|&b| self.blocks[b].iter().any(|&i| self.is_population(i)))
            .collect()
    }

    /// The `count` smallest singular values over all blocks, ascending.
    pub fn smallest_singular_values(&self, count: usize) -> Result<Vec<f64>> {
        let mut all = Vec::new();
        for block in &self.blocks {
            let m = self.dense_block(block);
            if block.len() == 1 {
                all.push(m[(0, 0)].norm());
                continue;
            }
            let s = m.singular_values().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            all.extend(s);
        }
        all.sort_by(f64::total_cmp);
        all.truncate(count);
        Ok(all)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Hamiltonian → dressed basis → channels → generator.
pub fn assemble_liouvillian(params: &SystemParams) -> Result<(Superoperator, ChannelSet, EigenSystem)> {
    let (ops, h) = hamiltonian_for(params)?;
    let eig = diagonalize_h(&h)?;
    let channels = decompose_channels(params, &eig, &ops)?;
    let l = Superoperator::from_channels(&channels);
    Ok((l, channels, eig))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyStateMethod {
    ConstrainedSolve,
    NullspaceSvd,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `‖L vec(ρ)‖₂`.
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub method: SteadyStateMethod,
}

const KERNEL_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-8;

/// Unique unit-trace kernel element of `L`.
///
/// Only the block containing the populations is solved: every other block
/// is invertible and carries no trace. The first population row of that
/// block is replaced by the trace row and the system is solved by LU. If
/// that solve is unreliable, the right singular vector of the smallest
/// singular value is used instead.
pub fn steady_state(l: &Superoperator) -> Result<SteadyState> {
    let d = l.dim();
    let scale = l.norm().max(f64::MIN_POSITIVE);
    let pops = l.population_blocks();
    if pops.len() != 1 {
        return Err(Error::DegenerateSteadyState { first: 0.0, second: 0.0 });
    }
    for block in l.blocks().iter().filter(|b| b.len() == 1) {
        let v = l.dense_block(block)[(0, 0)].norm();
        if v < KERNEL_TOL * scale && !l.is_population(block[0]) {
            return Err(Error::DegenerateSteadyState { first: 0.0, second: v });
        }
    }
    let block = &l.blocks()[pops[0]];
    let m = block.len();
    let lb = l.dense_block(block);

    let mut method = SteadyStateMethod::ConstrainedSolve;
    let mut x = constrained_solve(&lb, block, d);
    let ok = x.as_ref().is_some_and(|x| {
        let r = block_residual(&lb, x);
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        r.is_finite() && r <= 1e-3 * RESIDUAL_TOL * scale * xn.max(1.0)
    });
    if !ok || m <= 2 {
        // Tiny blocks are cheap enough to always confirm the kernel is one-dimensional.
        let (v, s_min, s_next) = null_vector(&lb)?;
        if s_next < KERNEL_TOL * scale {
            return Err(Error::DegenerateSteadyState { first: s_min, second: s_next });
        }
        if !ok {
            method = SteadyStateMethod::NullspaceSvd;
            x = Some(v);
        }
    }
    let x = x.expect("set above");

    let mut rho_e = Mat::<c64>::zeros(d, d);
    for (&i, &v) in block.iter().zip(&x) {
        rho_e[(i % d, i / d)] = v;
    }
    let tr = la::trace(rho_e.as_ref());
    if tr.norm() == 0.0 || !tr.re.is_finite() {
        return Err(Error::InvalidSteadyState("kernel vector has zero trace".into()));
    }
    let inv = ONE / tr;
    let rho_e = Mat::from_fn(d, d, |i, j| (rho_e[(i, j)] * inv + (rho_e[(j, i)] * inv).conj()) * 0.5);
    let residual = la::norm2(&l.apply_dressed(&la::vec_col(rho_e.as_ref())));
    let rho = la::hermitian_part(l.eig().to_product(rho_e.as_ref()).as_ref());
    let rho = DensityMatrix::new_unchecked(l.space(), rho)?;
    let min_eigenvalue = rho.min_eigenvalue()?;
    if residual > RESIDUAL_TOL * scale {
        return Err(Error::InvalidSteadyState(format!("residual {residual:e} exceeds {:e}", RESIDUAL_TOL * scale)));
    }
    if (rho.trace() - ONE).norm() > 1e-10 {
        return Err(Error::InvalidSteadyState("trace differs from 1".into()));
    }
    if min_eigenvalue < PSD_TOL {
        return Err(Error::InvalidSteadyState(format!("negative eigenvalue {min_eigenvalue:e}")));
    }
    Ok(SteadyState { rho, residual, min_eigenvalue, method })
}

fn constrained_solve(lb: &Mat<c64>, block: &[usize], d: usize) -> Option<Vec<c64>> {
    let m = block.len();
    let is_pop: Vec<bool> = block.iter().map(|&i| i % d == i / d).collect();
    let row = is_pop.iter().position(|&p| p)?;
    let mut a = lb.clone();
    for c in 0..m {
        a[(row, c)] = if is_pop[c] { ONE } else { ZERO };
    }
    let mut rhs = Mat::<c64>::zeros(m, 1);
    rhs[(row, 0)] = ONE;
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<c64> = (0..m).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(out)
}

fn block_residual(lb: &Mat<c64>, x: &[c64]) -> f64 {
    let m = x.len();
    let mut acc = 0.0;
    for i in 0..m {
        let mut s = ZERO;
        for j in 0..m {
            s += lb[(i, j)] * x[j];
        }
        acc += s.norm_sqr();
    }
    acc.sqrt()
}

/// Right singular vector of the smallest singular value, with the two
/// smallest singular values.
fn null_vector(a: &Mat<c64>) -> Result<(Vec<c64>, f64, f64)> {
    let m = a.nrows();
    if m == 1 {
        return Ok((vec![ONE], a[(0, 0)].norm(), f64::INFINITY));
    }
    let svd = a.svd().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let v = svd.V();
    // Singular values come in non-increasing order.
    let last = m - 1;
    let vec = (0..m).map(|i| v[(i, last)]).collect();
    Ok((vec, s[last].re, s[last - 1].re))
}

const DP_RTOL: f64 = 1e-9;
const DP_MAX_STEPS: usize = 20_000_000;

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// `exp(L t) ρ₀` by adaptive Dormand–Prince stepping with norm-wise local
/// relative error at most 1e-9.
pub fn propagate(l: &Superoperator, rho0: &DensityMatrix, t_final: f64) -> Result<DensityMatrix> {
    if rho0.space() != l.space() {
        return invalid("initial state and generator live on different spaces");
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return invalid("t_final must be positive and finite");
    }
    let d = l.dim();
    let n = d * d;
    let mut y = la::vec_col(l.eig().to_dressed(rho0.matrix()).as_ref());
    let mut k: Vec<Vec<c64>> = vec![vec![ZERO; n]; 7];
    let mut tmp = vec![ZERO; n];
    let mut t = 0.0;
    let mut h = (0.01 / max_row_sum(l)).min(t_final);
    let mut steps = 0usize;
    l.apply_dressed_into(&y, &mut k[0]);
    while t < t_final {
        if t + h > t_final {
            h = t_final - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += kj[i] * (h * A[s][j]);
                    }
                }
                tmp[i] = acc;
            }
            l.apply_dressed_into(&tmp, &mut k[s]);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL), which is `tmp`.
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = ZERO;
            for s in 0..7 {
                e += k[s][i] * (h * (B5[s] - B4[s]));
            }
            err_sq += e.norm_sqr();
        }
        let scale = la::norm2(&y).max(la::norm2(&tmp));
        let err = err_sq.sqrt() / (DP_RTOL * scale);
        steps += 1;
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut tmp);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-13 * t.max(1.0) || steps > DP_MAX_STEPS {
            return Err(Error::Stiffness { t, step: h, steps });
        }
    }
    let rho_e = la::unvec_col(&y, d);
    let rho = la::hermitian_part(l.eig().to_product(rho_e.as_ref()).as_ref());
    DensityMatrix::new_unchecked(l.space(), rho)
}

fn max_row_sum(l: &Superoperator) -> f64 {
    let mut best = 0.0f64;
    for r in 0..l.d * l.d {
        let s: f64 = (l.row_ptr[r]..l.row_ptr[r + 1]).map(|p| l.vals[p].norm()).sum();
        best = best.max(s);
    }
    best.max(1e-300)
}
