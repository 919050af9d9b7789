//! Run configuration: a flat JSON object holding the physical parameters,
//! plus an optional `command` block and `workers`.

use std::path::Path;

use fp_core::SystemParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandBlock {
    pub nu_min: f64,
    pub nu_max: f64,
    pub nu_step: f64,
    /// Drive-frequency window of `map`; centred on ω₀ + Ω_R ± 2e-3 when unset.
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_step: f64,
    pub with_spectra: bool,
    pub auto_converge: bool,
    pub converge_tol: f64,
    /// Emission-frequency window of `spectrum`; the built-in grid when unset.
    pub omega_s_min: Option<f64>,
    pub omega_s_max: Option<f64>,
    pub omega_s_points: usize,
    /// Level pair for `gap`, e.g. `LP1:UP4`.
    pub pair: String,
    /// ν step for `levels` and `gap`.
    pub levels_nu_step: f64,
    pub out: Option<String>,
    /// Transition-graph CSV written by `steady`.
    pub graph_out: Option<String>,
}

impl Default for CommandBlock {
    fn default() -> Self {
        CommandBlock {
            nu_min: 0.0,
            nu_max: 0.012,
            nu_step: 1e-4,
            omega_min: None,
            omega_max: None,
            omega_step: 1e-4,
            with_spectra: false,
            auto_converge: true,
            converge_tol: 1e-3,
            omega_s_min: None,
            omega_s_max: None,
            omega_s_points: 4001,
            pair: "LP1:UP4".to_string(),
            levels_nu_step: 1e-5,
            out: None,
            graph_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub params: SystemParams,
    pub command: CommandBlock,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self, String> {
        let Value::Object(mut map) = value else {
            return Err("config must be a JSON object".into());
        };
        let command = match map.remove("command") {
            Some(v) => serde_json::from_value(v).map_err(|e| format!("command block: {e}"))?,
            None => CommandBlock::default(),
        };
        let workers = match map.remove("workers") {
            None | Some(Value::Null) => None,
            Some(v) => Some(serde_json::from_value(v).map_err(|e| format!("workers: {e}"))?),
        };
        let params = serde_json::from_value(Value::Object(map)).map_err(|e| format!("parameters: {e}"))?;
        Ok(RunConfig { params, command, workers })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_value(value)
    }

    pub fn to_value(&self) -> Value {
        let Value::Object(mut map) = serde_json::to_value(&self.params).expect("params serialize") else {
            unreachable!("params serialize to an object")
        };
        map.insert("command".into(), serde_json::to_value(&self.command).expect("command serializes"));
        map.insert("workers".into(), self.workers.map_or(Value::Null, Value::from));
        Value::Object(Map::from_iter(map))
    }
}

/// `min, min + step, …` up to `max` inclusive (to rounding).
pub fn linear_grid(name: &str, min: f64, max: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(format!("{name} grid bounds must be finite"));
    }
    if step <= 0.0 || max < min {
        return Err(format!("{name} grid needs step > 0 and max >= min"));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}
