//! Truncated Fock ⊗ two-level Hilbert space and the elementary operators
//! acting on it.
//!
//! Basis ordering is photon-major: the state `|n, s⟩` (photon number `n`,
//! molecule state `s ∈ {g = 0, e = 1}`) sits at index `2n + s`. The photon
//! truncation therefore occupies the trailing 2×2 block of every operator.

use std::ops::{Add, Mul, Sub};

use faer::{c64, Mat, MatRef};

use crate::error::{invalid, Result};
use crate::la::{self, ONE, ZERO};

/// Molecule basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Molecule {
    Ground = 0,
    Excited = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceConfig {
    n_max: usize,
    dim: usize,
}

/// Builds the truncated space keeping photon numbers `0..=n_max`.
pub fn build_space(n_max: usize) -> Result<SpaceConfig> {
    if n_max < 1 {
        return invalid(format!("n_max must be >= 1, got {n_max}"));
    }
    Ok(SpaceConfig { n_max, dim: 2 * (n_max + 1) })
}

impl SpaceConfig {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, photons: usize, molecule: Molecule) -> usize {
        debug_assert!(photons <= self.n_max);
        2 * photons + molecule as usize
    }

    /// Inverse of [`SpaceConfig::index`].
    pub fn state(&self, index: usize) -> (usize, Molecule) {
        let s = if index % 2 == 0 { Molecule::Ground } else { Molecule::Excited };
        (index / 2, s)
    }
}

/// Dense operator on a [`SpaceConfig`].
#[derive(Debug, Clone)]
pub struct Operator {
    space: SpaceConfig,
    matrix: Mat<c64>,
}

impl Operator {
    pub fn new(space: SpaceConfig, matrix: Mat<c64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return invalid(format!(
                "operator is {}x{}, space dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            ));
        }
        Ok(Operator { space, matrix })
    }

    pub(crate) fn from_parts(space: SpaceConfig, matrix: Mat<c64>) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim());
        Operator { space, matrix }
    }

    pub fn zeros(space: SpaceConfig) -> Self {
        Operator { space, matrix: Mat::zeros(space.dim(), space.dim()) }
    }

    pub fn identity(space: SpaceConfig) -> Self {
        Operator { space, matrix: Mat::identity(space.dim(), space.dim()) }
    }

    pub fn space(&self) -> SpaceConfig {
        self.space
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn dagger(&self) -> Operator {
        Operator { space: self.space, matrix: la::dagger(self.matrix.as_ref()) }
    }

    pub fn scale(&self, factor: f64) -> Operator {
        let m = &self.matrix;
        Operator {
            space: self.space,
            matrix: Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * factor),
        }
    }

    /// Largest entry-wise modulus of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        la::hermiticity_defect(self.matrix.as_ref())
    }

    fn check_same_space(&self, other: &Operator) {
        assert_eq!(self.space, other.space, "operators live on different spaces");
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.check_same_space(rhs);
        Operator { space: self.space, matrix: &self.matrix * &rhs.matrix }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.check_same_space(rhs);
        Operator { space: self.space, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.check_same_space(rhs);
        Operator { space: self.space, matrix: &self.matrix - &rhs.matrix }
    }
}

/// Hermitian tolerance for a valid density matrix.
pub const RHO_HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for a valid density matrix.
pub const RHO_TRACE_TOL: f64 = 1e-10;
/// Numerical slack on positivity.
pub const RHO_PSD_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    space: SpaceConfig,
    matrix: Mat<c64>,
}

impl DensityMatrix {
    /// Validating constructor: Hermitian, unit trace and positive semidefinite
    /// within the crate tolerances.
    pub fn new(space: SpaceConfig, matrix: Mat<c64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape check only. Used for propagated or intermediate states whose
    /// numerical defects are reported separately.
    pub fn new_unchecked(space: SpaceConfig, matrix: Mat<c64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return invalid(format!(
                "density matrix is {}x{}, space dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            ));
        }
        Ok(DensityMatrix { space, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = la::hermiticity_defect(self.matrix.as_ref());
        if herm > RHO_HERMITIAN_TOL {
            return invalid(format!("density matrix not Hermitian (defect {herm:e})"));
        }
        let tr = la::trace(self.matrix.as_ref());
        if (tr - ONE).norm() > RHO_TRACE_TOL {
            return invalid(format!("density matrix trace is {tr}"));
        }
        let min = self.min_eigenvalue()?;
        if min < -RHO_PSD_SLACK {
            return invalid(format!("density matrix has eigenvalue {min:e}"));
        }
        Ok(())
    }

    /// Projector onto a single basis vector.
    pub fn basis_projector(space: SpaceConfig, index: usize) -> Result<Self> {
        if index >= space.dim() {
            return invalid(format!("basis index {index} out of range"));
        }
        let mut m = Mat::zeros(space.dim(), space.dim());
        m[(index, index)] = ONE;
        Ok(DensityMatrix { space, matrix: m })
    }

    pub fn fock(space: SpaceConfig, photons: usize, molecule: Molecule) -> Result<Self> {
        if photons > space.n_max() {
            return invalid(format!("photon number {photons} exceeds n_max"));
        }
        Self::basis_projector(space, space.index(photons, molecule))
    }

    pub fn ground(space: SpaceConfig) -> Self {
        Self::basis_projector(space, 0).expect("index 0 always exists")
    }

    pub fn maximally_mixed(space: SpaceConfig) -> Self {
        let d = space.dim();
        let w = 1.0 / d as f64;
        DensityMatrix { space, matrix: Mat::from_fn(d, d, |i, j| if i == j { la::cplx(w) } else { ZERO }) }
    }

    /// `|ψ⟩⟨ψ|` for a normalized column.
    pub fn pure(space: SpaceConfig, psi: &[c64]) -> Result<Self> {
        if psi.len() != space.dim() {
            return invalid("state vector has wrong length");
        }
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return invalid("zero state vector");
        }
        let m = Mat::from_fn(space.dim(), space.dim(), |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(DensityMatrix { space, matrix: m })
    }

    pub fn space(&self) -> SpaceConfig {
        self.space
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn trace(&self) -> c64 {
        la::trace(self.matrix.as_ref())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(la::hermitian_eigenvalues(self.matrix.as_ref())?.first().copied().unwrap_or(0.0))
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.space != other.space {
            return invalid("density matrices live on different spaces");
        }
        la::trace_distance(self.matrix.as_ref(), other.matrix.as_ref())
    }
}

/// The ladder operators of the model and the number operators derived from them.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub a: Operator,
    pub a_dag: Operator,
    pub sigma: Operator,
    pub sigma_dag: Operator,
    /// `a†a`
    pub n_phot: Operator,
    /// `σ†σ`
    pub n_mol: Operator,
    /// `a†a + σ†σ`
    pub n_tot: Operator,
}

pub fn build_operators(space: SpaceConfig) -> OperatorSet {
    let d = space.dim();
    let mut a = Mat::<c64>::zeros(d, d);
    let mut sigma = Mat::<c64>::zeros(d, d);
    for n in 0..=space.n_max() {
        for s in [Molecule::Ground, Molecule::Excited] {
            if n >= 1 {
                a[(space.index(n - 1, s), space.index(n, s))] = la::cplx((n as f64).sqrt());
            }
        }
        sigma[(space.index(n, Molecule::Ground), space.index(n, Molecule::Excited))] = ONE;
    }
    let a = Operator::from_parts(space, a);
    let sigma = Operator::from_parts(space, sigma);
    let a_dag = a.dagger();
    let sigma_dag = sigma.dagger();
    // Diagonal number operators are set exactly rather than as products, so
    // their entries carry no rounding from sqrt(n)².
    let n_phot = Operator::from_parts(space, Mat::from_fn(d, d, |i, j| {
        if i == j { la::cplx(space.state(i).0 as f64) } else { ZERO }
    }));
    let n_mol = Operator::from_parts(space, Mat::from_fn(d, d, |i, j| {
        if i == j && space.state(i).1 == Molecule::Excited { ONE } else { ZERO }
    }));
    let n_tot = &n_phot + &n_mol;
    OperatorSet { a, a_dag, sigma, sigma_dag, n_phot, n_mol, n_tot }
}

/// `Tr(ρ · op)`.
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<c64> {
    if op.space() != rho.space() {
        return invalid(format!(
            "operator dimension {} does not match density matrix dimension {}",
            op.space().dim(),
            rho.space().dim()
        ));
    }
    let (o, r) = (op.matrix(), rho.matrix());
    let d = o.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += r[(i, k)] * o[(k, i)];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(op: &Operator, i: usize, j: usize) -> c64 {
        op.matrix()[(i, j)]
    }

    #[test]
    fn space_dimensions() {
        assert_eq!(build_space(1).unwrap().dim(), 4);
        assert_eq!(build_space(14).unwrap().dim(), 30);
        assert!(build_space(0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let s = build_space(3).unwrap();
        for i in 0..s.dim() {
            let (n, m) = s.state(i);
            assert_eq!(s.index(n, m), i);
        }
    }

    #[test]
    fn annihilation_entries_n_max_1() {
        let s = build_space(1).unwrap();
        let ops = build_operators(s);
        let g0 = s.index(0, Molecule::Ground);
        let g1 = s.index(1, Molecule::Ground);
        let e0 = s.index(0, Molecule::Excited);
        let e1 = s.index(1, Molecule::Excited);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i, j) == (g0, g1) || (i, j) == (e0, e1) { ONE } else { ZERO };
                assert_eq!(entry(&ops.a, i, j), expected, "a[{i},{j}]");
            }
        }
    }

    #[test]
    fn closed_form_entries_up_to_n_max_3() {
        for n_max in 1..=3 {
            let s = build_space(n_max).unwrap();
            let ops = build_operators(s);
            for i in 0..s.dim() {
                for j in 0..s.dim() {
                    let (ni, si) = s.state(i);
                    let (nj, sj) = s.state(j);
                    let a = if si == sj && nj >= 1 && ni == nj - 1 { (nj as f64).sqrt() } else { 0.0 };
                    let sig = if ni == nj && si == Molecule::Ground && sj == Molecule::Excited { 1.0 } else { 0.0 };
                    let nphot = if i == j { ni as f64 } else { 0.0 };
                    let nmol = if i == j && si == Molecule::Excited { 1.0 } else { 0.0 };
                    assert_eq!(entry(&ops.a, i, j), la::cplx(a));
                    assert_eq!(entry(&ops.a_dag, j, i), la::cplx(a));
                    assert_eq!(entry(&ops.sigma, i, j), la::cplx(sig));
                    assert_eq!(entry(&ops.sigma_dag, j, i), la::cplx(sig));
                    assert_eq!(entry(&ops.n_phot, i, j), la::cplx(nphot));
                    assert_eq!(entry(&ops.n_mol, i, j), la::cplx(nmol));
                    assert_eq!(entry(&ops.n_tot, i, j), la::cplx(nphot + nmol));
                }
            }
        }
    }

    #[test]
    fn commutator_truncation_identity() {
        let s = build_space(5).unwrap();
        let ops = build_operators(s);
        let comm = &(&ops.a * &ops.a_dag) - &(&ops.a_dag * &ops.a);
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                let (n, _) = s.state(i);
                let expected = if i != j {
                    0.0
                } else if n < s.n_max() {
                    1.0
                } else {
                    1.0 - (s.n_max() + 1) as f64
                };
                assert!((entry(&comm, i, j) - la::cplx(expected)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn two_level_algebra() {
        let s = build_space(4).unwrap();
        let ops = build_operators(s);
        let anti = &(&ops.sigma_dag * &ops.sigma) + &(&ops.sigma * &ops.sigma_dag);
        assert_eq!(la::max_abs_diff(anti.matrix(), Operator::identity(s).matrix()), 0.0);
        let sq = &ops.sigma * &ops.sigma;
        assert_eq!(la::max_abs(sq.matrix()), 0.0);
    }

    #[test]
    fn deterministic_construction() {
        let s = build_space(6).unwrap();
        let (x, y) = (build_operators(s), build_operators(s));
        assert_eq!(la::max_abs_diff(x.a.matrix(), y.a.matrix()), 0.0);
        assert_eq!(la::max_abs_diff(x.n_tot.matrix(), y.n_tot.matrix()), 0.0);
    }

    #[test]
    fn expectation_basics() {
        let s = build_space(3).unwrap();
        let ops = build_operators(s);
        let rho = DensityMatrix::maximally_mixed(s);
        let one = expectation(&Operator::identity(s), &rho).unwrap();
        assert!((one - ONE).norm() < 1e-14);
        let fock = DensityMatrix::fock(s, 1, Molecule::Ground).unwrap();
        assert_eq!(expectation(&ops.n_phot, &fock).unwrap(), ONE);
        let other = build_space(2).unwrap();
        assert!(expectation(&Operator::identity(other), &rho).is_err());
    }

    #[test]
    fn density_validation() {
        let s = build_space(1).unwrap();
        let mut m = Mat::<c64>::zeros(4, 4);
        m[(0, 0)] = la::cplx(0.5);
        assert!(DensityMatrix::new(s, m.clone()).is_err());
        m[(1, 1)] = la::cplx(0.5);
        assert!(DensityMatrix::new(s, m.clone()).is_ok());
        m[(0, 1)] = c64::new(0.0, 0.1);
        assert!(DensityMatrix::new(s, m).is_err());
    }
}
