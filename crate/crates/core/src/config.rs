//! Run configuration in TOML.
//!
//! ```toml
//! duration_s = 1800
//!
//! [reaction]
//! completion_fraction = 0.95   # or: rate_constant = 1.664e-3
//! completion_time_s = 1800
//!
//! [probe]
//! mean_pairs_per_window = 250
//! seed = 7
//!
//! [drift]
//! kind = "linear"
//! v0 = 0.85
//! v_end = 0.80
//!
//! [grid]
//! n_phi = 1024
//! n_vis = 512
//!
//! [calibration]
//! cycles = 20
//! ```
//!
//! Every table rejects unknown keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::GridSpec;
use crate::kinetics::{rate_from_completion, ReactionParams};
use crate::simulator::{DriftKind, ProbeConfig, VisibilityDrift};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration_s: f64,
    pub reaction: ReactionSection,
    #[serde(default)]
    pub probe: ProbeConfig,
    pub drift: DriftSection,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Reaction parameters; the rate is given directly or as a completion
/// fraction reached at a given time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSection {
    pub rate_constant: Option<f64>,
    pub completion_fraction: Option<f64>,
    pub completion_time_s: Option<f64>,
    pub initial_sucrose: Option<f64>,
    pub path_dm: Option<f64>,
    pub rot_sucrose: Option<f64>,
    pub rot_glucose: Option<f64>,
    pub rot_fructose: Option<f64>,
    pub molar_mass_sucrose: Option<f64>,
    pub molar_mass_monomer: Option<f64>,
    pub rotation_to_phase_factor: Option<f64>,
}

impl ReactionSection {
    pub fn params(&self) -> Result<ReactionParams> {
        let k = match (self.rate_constant, self.completion_fraction, self.completion_time_s) {
            (Some(k), None, None) => k,
            (None, Some(f), Some(t)) => rate_from_completion(f, t)?,
            _ => {
                return Err(Error::Config(
                    "reaction: give either rate_constant or both completion_fraction and completion_time_s"
                        .into(),
                ))
            }
        };
        let mut p = ReactionParams::with_rate(k);
        let overrides = [
            (self.initial_sucrose, &mut p.initial_sucrose),
            (self.path_dm, &mut p.path_dm),
            (self.rot_sucrose, &mut p.rot_sucrose),
            (self.rot_glucose, &mut p.rot_glucose),
            (self.rot_fructose, &mut p.rot_fructose),
            (self.molar_mass_sucrose, &mut p.molar_mass_sucrose),
            (self.molar_mass_monomer, &mut p.molar_mass_monomer),
            (self.rotation_to_phase_factor, &mut p.rotation_to_phase_factor),
        ];
        for (value, slot) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        p.validate().map_err(|e| Error::Config(format!("reaction: {e}")))?;
        Ok(p)
    }
}

/// Visibility drift; a linear ramp takes either `slope` (per s) or `v_end`
/// (reached at the end of the run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub kind: DriftKind,
    pub v0: f64,
    pub slope: Option<f64>,
    pub v_end: Option<f64>,
    pub step_std: Option<f64>,
    pub floor: Option<f64>,
    pub ceil: Option<f64>,
}

impl DriftSection {
    pub fn constant(v0: f64) -> Self {
        DriftSection {
            kind: DriftKind::Constant,
            v0,
            slope: None,
            v_end: None,
            step_std: None,
            floor: None,
            ceil: None,
        }
    }

    pub fn drift(&self, duration: f64) -> Result<VisibilityDrift> {
        let slope = match (self.kind, self.slope, self.v_end) {
            (DriftKind::Linear, Some(s), None) => s,
            (DriftKind::Linear, None, Some(v1)) => (v1 - self.v0) / duration,
            (DriftKind::Linear, _, _) => {
                return Err(Error::Config("drift: linear drift needs exactly one of slope, v_end".into()))
            }
            (_, None, None) => 0.0,
            (kind, _, _) => {
                return Err(Error::Config(format!(
                    "drift: slope/v_end only apply to kind = \"linear\", not {kind:?}"
                )))
            }
        };
        if self.step_std.is_some() && self.kind != DriftKind::RandomWalk {
            return Err(Error::Config("drift: step_std only applies to kind = \"random-walk\"".into()));
        }
        let d = VisibilityDrift {
            kind: self.kind,
            v0: self.v0,
            slope,
            step_std: self.step_std.unwrap_or(0.0),
            floor: self.floor.unwrap_or(0.0),
            ceil: self.ceil.unwrap_or(1.0),
        };
        d.validate().map_err(|e| Error::Config(format!("drift: {e}")))?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default = "CalibrationSection::default_cycles")]
    pub cycles: usize,
    /// Water-run visibility; defaults to the drift's starting value.
    pub visibility: Option<f64>,
}

impl CalibrationSection {
    fn default_cycles() -> usize {
        20
    }
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            cycles: Self::default_cycles(),
            visibility: None,
        }
    }
}

/// File names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub water: String,
    pub records: String,
    pub truth: String,
    pub estimates: String,
    pub kinetics: String,
    pub report: String,
    /// Sampling step of the kinetics table, s; defaults to the cycle length.
    pub kinetics_step_s: Option<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            water: "water.csv".into(),
            records: "records.csv".into(),
            truth: "truth.csv".into(),
            estimates: "estimates.csv".into(),
            kinetics: "kinetics.csv".into(),
            report: "report.json".into(),
            kinetics_step_s: None,
        }
    }
}

/// Fully resolved, validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub duration: f64,
    pub reaction: ReactionParams,
    pub probe: ProbeConfig,
    pub drift: VisibilityDrift,
    pub grid: GridSpec,
    pub calibration_cycles: usize,
    pub calibration_visibility: f64,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Check every section and derive the run parameters.
    pub fn resolve(&self) -> Result<Run> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config(format!("duration_s must be positive, got {}", self.duration_s)));
        }
        let reaction = self.reaction.params()?;
        self.probe.validate().map_err(|e| Error::Config(format!("probe: {e}")))?;
        let drift = self.drift.drift(self.duration_s)?;
        self.grid.validate().map_err(|e| Error::Config(format!("grid: {e}")))?;
        if self.calibration.cycles == 0 {
            return Err(Error::Config("calibration: cycles must be at least 1".into()));
        }
        let calibration_visibility = self.calibration.visibility.unwrap_or(drift.v0);
        if !(0.0..=1.0).contains(&calibration_visibility) {
            return Err(Error::Config(format!(
                "calibration: visibility must lie in [0, 1], got {calibration_visibility}"
            )));
        }
        if let Some(step) = self.output.kinetics_step_s {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Config(format!("output: kinetics_step_s must be positive, got {step}")));
            }
        }
        Ok(Run {
            duration: self.duration_s,
            reaction,
            probe: self.probe.clone(),
            drift,
            grid: self.grid,
            calibration_cycles: self.calibration.cycles,
            calibration_visibility,
            output: self.output.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const BASE: &str = r#"
duration_s = 1800

[reaction]
completion_fraction = 0.95
completion_time_s = 1800

[probe]
seed = 7

[drift]
kind = "linear"
v0 = 0.85
v_end = 0.80
"#;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let run = RunConfig::from_toml(BASE).unwrap().resolve().unwrap();
        assert_relative_eq!(run.reaction.rate_constant, 20f64.ln() / 1800.0, max_relative = 1e-12);
        assert_eq!(run.probe.seed, 7);
        assert_eq!(run.probe.mean_pairs_per_window, 250.0);
        assert_eq!(run.grid, GridSpec::default());
        assert_relative_eq!(run.drift.slope, -0.05 / 1800.0, max_relative = 1e-12);
        assert_eq!(run.calibration_visibility, 0.85);
        assert_eq!(run.output.records, "records.csv");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = BASE.replace("v0 = 0.85", "visibilty = 0.85");
        let msg = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains("visibilty"), "{msg}");
        assert!(msg.contains("line 13"), "{msg}");
    }

    #[test]
    fn conflicting_rate_specifications() {
        let text = BASE.replace("[reaction]", "[reaction]\nrate_constant = 1e-3");
        let err = RunConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_duration_is_rejected() {
        let text = BASE.replace("duration_s = 1800", "duration_s = 0");
        assert!(RunConfig::from_toml(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn invalid_visibility_is_rejected() {
        let text = BASE.replace("v0 = 0.85", "v0 = 1.2");
        let msg = RunConfig::from_toml(&text).unwrap().resolve().unwrap_err().to_string();
        assert!(msg.contains("drift"), "{msg}");
    }

    #[test]
    fn slope_on_constant_drift_is_rejected() {
        let text = BASE.replace("kind = \"linear\"", "kind = \"constant\"");
        assert!(RunConfig::from_toml(&text).unwrap().resolve().is_err());
    }
}
