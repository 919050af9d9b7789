//! Physical parameters, the rotating-frame Hamiltonian and the undriven
//! Jaynes–Cummings reference ladder.
//!
//! Units: ħ = ω₀ = 1, so every frequency, rate and energy is a multiple of ω₀.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::space::{build_operators, build_space, Operator, OperatorSet};

/// Cavity and molecular transition frequency; the unit of every quantity.
pub const OMEGA0: f64 = 1.0;

/// Rate assigned to the elastic (zero Bohr frequency) dephasing component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticRatePolicy {
    /// Flat `γ_ph`.
    Bare,
    /// `γ_ph · T / omega_ref`; sensitivity studies only.
    Scaled { omega_ref: f64 },
}

impl fmt::Display for ElasticRatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElasticRatePolicy::Bare => write!(f, "bare"),
            ElasticRatePolicy::Scaled { omega_ref } => write!(f, "scaled:{omega_ref}"),
        }
    }
}

impl FromStr for ElasticRatePolicy {
    type Err = String;

    /// `bare` or `scaled:<omega_ref>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "bare" => Ok(ElasticRatePolicy::Bare),
            Some(("scaled", v)) => v
                .parse::<f64>()
                .map(|omega_ref| ElasticRatePolicy::Scaled { omega_ref })
                .map_err(|e| format!("bad omega_ref in '{s}': {e}")),
            _ => Err(format!("unknown elastic rate policy '{s}' (expected bare or scaled:<omega_ref>)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Fixed at 1; present so configs can state it explicitly.
    pub omega0: f64,
    /// Drive frequency ω.
    pub omega: f64,
    /// Cavity–molecule coupling Ω_R.
    pub omega_r: f64,
    /// Drive amplitude ν.
    pub nu: f64,
    /// Cavity relaxation rate γ_a.
    pub gamma_a: f64,
    /// Molecular longitudinal relaxation rate γ_D.
    pub gamma_d: f64,
    /// Dephasing rate γ_ph.
    pub gamma_ph: f64,
    /// Bath temperature in units of ω₀.
    pub temperature: f64,
    /// Photon-number truncation.
    pub n_max: usize,
    /// Bohr-frequency clustering window; 0 keeps only exactly degenerate
    /// frequencies together (full secular form).
    pub delta_secular: f64,
    pub elastic_rate_policy: ElasticRatePolicy,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            omega0: OMEGA0,
            omega: 1.0101,
            omega_r: 0.01,
            nu: 0.0,
            gamma_a: 1e-3,
            gamma_d: 1e-5,
            gamma_ph: 5e-3,
            temperature: 0.02,
            n_max: 14,
            delta_secular: 0.0,
            elastic_rate_policy: ElasticRatePolicy::Bare,
        }
    }
}

impl SystemParams {
    /// Detuning Δ = ω₀ − ω.
    pub fn delta(&self) -> f64 {
        self.omega0 - self.omega
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega0", self.omega0),
            ("omega", self.omega),
            ("omega_r", self.omega_r),
            ("nu", self.nu),
            ("gamma_a", self.gamma_a),
            ("gamma_d", self.gamma_d),
            ("gamma_ph", self.gamma_ph),
            ("temperature", self.temperature),
            ("delta_secular", self.delta_secular),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return invalid(format!("{name} must be finite"));
            }
        }
        if self.omega0 != OMEGA0 {
            return invalid("omega0 is the unit of frequency and must equal 1");
        }
        for (name, v) in [("gamma_a", self.gamma_a), ("gamma_d", self.gamma_d), ("gamma_ph", self.gamma_ph)] {
            if v < 0.0 {
                return invalid(format!("{name} must be >= 0"));
            }
        }
        if self.temperature < 0.0 {
            return invalid("temperature must be >= 0");
        }
        if self.omega_r < 0.0 {
            return invalid("omega_r must be >= 0");
        }
        if self.delta_secular < 0.0 {
            return invalid("delta_secular must be >= 0");
        }
        if self.n_max < 1 {
            return invalid("n_max must be >= 1");
        }
        if let ElasticRatePolicy::Scaled { omega_ref } = self.elastic_rate_policy {
            if !(omega_ref > 0.0 && omega_ref.is_finite()) {
                return invalid("scaled elastic policy needs omega_ref > 0");
            }
        }
        Ok(())
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        SystemParams { nu, ..self.clone() }
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        SystemParams { n_max, ..self.clone() }
    }
}

/// `Δ a†a + Δ σ†σ + Ω_R (a†σ + aσ†) + ν (a† + a)`.
pub fn build_h_system(params: &SystemParams, ops: &OperatorSet) -> Result<Operator> {
    if ops.a.space().n_max() != params.n_max {
        return invalid(format!(
            "operators built for n_max = {}, params ask for {}",
            ops.a.space().n_max(),
            params.n_max
        ));
    }
    let space = ops.a.space();
    let d = space.dim();
    let delta = params.delta();
    let (nt, ad_s, a_sd, drive) = (
        ops.n_tot.matrix(),
        (&ops.a_dag * &ops.sigma).into_matrix(),
        (&ops.a * &ops.sigma_dag).into_matrix(),
        (&ops.a_dag + &ops.a).into_matrix(),
    );
    let h = Mat::from_fn(d, d, |i, j| {
        nt[(i, j)] * delta + (ad_s[(i, j)] + a_sd[(i, j)]) * params.omega_r + drive[(i, j)] * params.nu
    });
    Operator::new(space, h)
}

/// Convenience: build space, operators and Hamiltonian in one go.
pub fn hamiltonian_for(params: &SystemParams) -> Result<(OperatorSet, Operator)> {
    params.validate()?;
    let ops = build_operators(build_space(params.n_max)?);
    let h = build_h_system(params, &ops)?;
    Ok((ops, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LevelLabel {
    Ground,
    Lower(usize),
    Upper(usize),
    /// `|n_max, e⟩`: its partner `|n_max + 1, g⟩` is cut off by the truncation.
    Edge(usize),
}

impl LevelLabel {
    /// Excitation number of the undriven manifold.
    pub fn manifold(&self) -> usize {
        match *self {
            LevelLabel::Ground => 0,
            LevelLabel::Lower(n) | LevelLabel::Upper(n) | LevelLabel::Edge(n) => n,
        }
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelLabel::Ground => write!(f, "GS"),
            LevelLabel::Lower(n) => write!(f, "LP{n}"),
            LevelLabel::Upper(n) => write!(f, "UP{n}"),
            LevelLabel::Edge(n) => write!(f, "EDGE{n}"),
        }
    }
}

impl FromStr for LevelLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |rest: &str| rest.parse::<usize>().map_err(|_| format!("bad level label '{s}'"));
        if s == "GS" {
            Ok(LevelLabel::Ground)
        } else if let Some(rest) = s.strip_prefix("LP") {
            Ok(LevelLabel::Lower(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("UP") {
            Ok(LevelLabel::Upper(num(rest)?))
        } else if let Some(rest) = s.strip_prefix("EDGE") {
            Ok(LevelLabel::Edge(num(rest)?))
        } else {
            Err(format!("bad level label '{s}'"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcLevel {
    pub label: LevelLabel,
    pub energy_rot: f64,
    pub energy_lab: f64,
}

/// GS followed by (LPn, UPn) for n = 1..=n_max. The drive amplitude is ignored.
pub fn jc_reference_levels(params: &SystemParams) -> Vec<JcLevel> {
    let delta = params.delta();
    let mut out = Vec::with_capacity(2 * params.n_max + 1);
    out.push(JcLevel { label: LevelLabel::Ground, energy_rot: 0.0, energy_lab: 0.0 });
    for n in 1..=params.n_max {
        let nf = n as f64;
        let split = nf.sqrt() * params.omega_r;
        for (label, e) in [(LevelLabel::Lower(n), nf * delta - split), (LevelLabel::Upper(n), nf * delta + split)] {
            out.push(JcLevel { label, energy_rot: e, energy_lab: e + nf * params.omega });
        }
    }
    out
}

/// Exact undriven eigenvectors, one per basis dimension:
/// GS = |0,g⟩, LPn/UPn = (|n,g⟩ ∓ |n−1,e⟩)/√2 and the edge state |n_max,e⟩.
pub fn jc_reference_states(params: &SystemParams) -> Vec<(LevelLabel, f64, Vec<c64>)> {
    let space = build_space(params.n_max).expect("validated n_max");
    let d = space.dim();
    let unit = |i: usize| {
        let mut v = vec![c64::new(0.0, 0.0); d];
        v[i] = c64::new(1.0, 0.0);
        v
    };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d);
    for level in jc_reference_levels(params) {
        let vec = match level.label {
            LevelLabel::Ground => unit(0),
            LevelLabel::Lower(n) | LevelLabel::Upper(n) => {
                let sign = if matches!(level.label, LevelLabel::Upper(_)) { 1.0 } else { -1.0 };
                let mut v = vec![c64::new(0.0, 0.0); d];
                v[2 * n] = c64::new(h, 0.0);
                v[2 * (n - 1) + 1] = c64::new(sign * h, 0.0);
                v
            }
            LevelLabel::Edge(_) => unreachable!(),
        };
        out.push((level.label, level.energy_rot, vec));
    }
    let top = params.n_max;
    out.push((LevelLabel::Edge(top + 1), (top + 1) as f64 * params.delta(), unit(2 * top + 1)));
    out
}
