//! Independent dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use faer::{c64, Mat, MatRef};
use fp_core::{build_operators, build_space, DensityMatrix, SystemParams};

pub fn defaults() -> SystemParams {
    SystemParams::default()
}

pub fn at(nu: f64) -> SystemParams {
    SystemParams { nu, ..SystemParams::default() }
}

pub fn dag(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn max_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `Σ_ij |m_ij|` bounds the trace norm from above and is cheap.
pub fn entry_l1(m: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm();
        }
    }
    s
}

/// `(Bᵀ ⊗ A)` so that `vec(A X B) = (Bᵀ ⊗ A) vec(X)` for column stacking.
fn kron_t(b: MatRef<'_, c64>, a: MatRef<'_, c64>) -> Mat<c64> {
    let (n, m) = (a.nrows(), b.nrows());
    Mat::from_fn(n * m, n * m, |r, c| {
        let (i, k) = (r % n, r / n);
        let (j, l) = (c % n, c / n);
        b[(l, k)] * a[(i, j)]
    })
}

fn bose(x: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        1.0 / ((x.abs() / t).exp() - 1.0)
    }
}

/// Rotating-frame Hamiltonian built entry by entry in the `|n, s⟩` basis.
pub fn hamiltonian(p: &SystemParams) -> Mat<c64> {
    let d = 2 * (p.n_max + 1);
    let delta = p.omega0 - p.omega;
    let mut h = Mat::<c64>::zeros(d, d);
    let idx = |n: usize, s: usize| 2 * n + s;
    for n in 0..=p.n_max {
        for s in 0..2 {
            h[(idx(n, s), idx(n, s))] = c64::new(delta * (n + s) as f64, 0.0);
        }
        if n >= 1 {
            // a†σ and its conjugate couple |n−1, e⟩ and |n, g⟩.
            h[(idx(n, 0), idx(n - 1, 1))] += c64::new(p.omega_r * (n as f64).sqrt(), 0.0);
            h[(idx(n - 1, 1), idx(n, 0))] += c64::new(p.omega_r * (n as f64).sqrt(), 0.0);
            for s in 0..2 {
                let v = c64::new(p.nu * (n as f64).sqrt(), 0.0);
                h[(idx(n - 1, s), idx(n, s))] += v;
                h[(idx(n, s), idx(n - 1, s))] += v;
            }
        }
    }
    h
}

/// Dense global Lindblad generator in the product basis.
///
/// Components `⟨j|A|k⟩|j⟩⟨k|` are grouped only when their Bohr frequencies
/// coincide to `tie`; each group gets the rate of its mean frequency.
pub fn dense_generator(p: &SystemParams, tie: f64) -> Mat<c64> {
    let h = hamiltonian(p);
    let d = h.nrows();
    let evd = h.as_ref().self_adjoint_eigen(faer::Side::Lower).unwrap();
    let u = evd.U().to_owned();
    let e: Vec<f64> = (0..d).map(|i| evd.S()[i].re).collect();
    let ops = build_operators(build_space(p.n_max).unwrap());
    let id = Mat::<c64>::identity(d, d);

    let mut l = kron_t(id.as_ref(), h.as_ref()) - kron_t(h.as_ref(), id.as_ref());
    l = Mat::from_fn(d * d, d * d, |i, j| c64::new(0.0, -1.0) * l[(i, j)]);

    let chans: [(&Mat<c64>, u8); 3] = [
        (&ops.a.matrix().to_owned(), 0),
        (&ops.sigma.matrix().to_owned(), 1),
        (&ops.n_mol.matrix().to_owned(), 2),
    ];
    for (op, kind) in chans {
        let ae = dag(u.as_ref()) * op * &u;
        let mut comps: Vec<(f64, usize, usize)> = Vec::new();
        let big = max_abs(ae.as_ref());
        for j in 0..d {
            for k in 0..d {
                if ae[(j, k)].norm() > 1e-14 * big {
                    comps.push((e[k] - e[j], j, k));
                }
            }
        }
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<Vec<(f64, usize, usize)>> = Vec::new();
        for c in comps {
            match groups.last_mut() {
                Some(g) if c.0 - g.last().unwrap().0 <= tie => g.push(c),
                _ => groups.push(vec![c]),
            }
        }
        for g in groups {
            let w = g.iter().map(|c| c.0).sum::<f64>() / g.len() as f64;
            let elastic = g.iter().any(|c| c.0.abs() <= tie);
            let rate = match kind {
                0 => p.gamma_a,
                1 => p.gamma_d,
                _ if elastic => p.gamma_ph,
                _ if w > 0.0 => p.gamma_ph * (bose(w, p.temperature) + 1.0),
                _ => p.gamma_ph * bose(w, p.temperature),
            };
            if rate == 0.0 {
                continue;
            }
            let mut a_e = Mat::<c64>::zeros(d, d);
            for &(_, j, k) in &g {
                a_e[(j, k)] = ae[(j, k)];
            }
            let a = &u * &a_e * dag(u.as_ref());
            let ad = dag(a.as_ref());
            let ada = &ad * &a;
            let half = c64::new(0.5 * rate, 0.0);
            let r = c64::new(rate, 0.0);
            let t1 = kron_t(ad.as_ref(), a.as_ref());
            let t2 = kron_t(id.as_ref(), ada.as_ref());
            let t3 = kron_t(ada.as_ref(), id.as_ref());
            l = Mat::from_fn(d * d, d * d, |i, j| l[(i, j)] + r * t1[(i, j)] - half * (t2[(i, j)] + t3[(i, j)]));
        }
    }
    l
}

pub fn vec_col(m: MatRef<'_, c64>) -> Vec<c64> {
    let d = m.nrows();
    (0..d * d).map(|i| m[(i % d, i / d)]).collect()
}

/// Random full-rank density matrix from a seeded Gaussian Ginibre matrix.
pub fn random_rho(n_max: usize, seed: u64) -> DensityMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let space = build_space(n_max).unwrap();
    let d = space.dim();
    let g = Mat::from_fn(d, d, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &g * dag(g.as_ref());
    let t = trace(m.as_ref()).re;
    let m = Mat::from_fn(d, d, |i, j| {
        let x = m[(i, j)] / t;
        if i == j { c64::new(x.re, 0.0) } else { x }
    });
    let m = Mat::from_fn(d, d, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)].conj() });
    DensityMatrix::new(space, m).unwrap()
}

/// Local maxima `v[i−1] < v[i] ≥ v[i+1]`, written out again for the tests.
pub fn peaks(v: &[f64]) -> Vec<usize> {
    (1..v.len() - 1).filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1]).collect()
}
