//! Pseudo-first-order acid hydrolysis of sucrose and the optical rotation of
//! the evolving mixture.
//!
//! Sucrose decays as `s0·e^(−kt)`; each hydrolysed molecule yields one glucose
//! and one fructose. Concentrations are mass concentrations (g/mL), so the
//! monomers carry the water taken up by the hydrolysis through the molar-mass
//! ratio. Rotation follows `α = l · Σ [α]_i c_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROT_SUCROSE: f64 = 66.4;
pub const ROT_GLUCOSE: f64 = 52.7;
pub const ROT_FRUCTOSE: f64 = -92.3;
pub const SUCROSE_G_PER_ML: f64 = 0.3;
pub const PATH_DM: f64 = 0.2;
pub const MOLAR_MASS_SUCROSE: f64 = 342.30;
pub const MOLAR_MASS_MONOMER: f64 = 180.16;

/// Parameters of one hydrolysis run and of the sample cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionParams {
    /// Pseudo-first-order rate constant, 1/s.
    pub rate_constant: f64,
    /// Initial sucrose concentration, g/mL.
    #[serde(default = "defaults::s0")]
    pub initial_sucrose: f64,
    /// Optical path, dm.
    #[serde(default = "defaults::path")]
    pub path_dm: f64,
    /// Specific rotations, deg·mL/(g·dm).
    #[serde(default = "defaults::rot_sucrose")]
    pub rot_sucrose: f64,
    #[serde(default = "defaults::rot_glucose")]
    pub rot_glucose: f64,
    #[serde(default = "defaults::rot_fructose")]
    pub rot_fructose: f64,
    /// g/mol.
    #[serde(default = "defaults::mm_sucrose")]
    pub molar_mass_sucrose: f64,
    #[serde(default = "defaults::mm_monomer")]
    pub molar_mass_monomer: f64,
    /// Radians of probe phase per radian of optical rotation.
    #[serde(default = "defaults::factor")]
    pub rotation_to_phase_factor: f64,
}

mod defaults {
    pub fn s0() -> f64 {
        super::SUCROSE_G_PER_ML
    }
    pub fn path() -> f64 {
        super::PATH_DM
    }
    pub fn rot_sucrose() -> f64 {
        super::ROT_SUCROSE
    }
    pub fn rot_glucose() -> f64 {
        super::ROT_GLUCOSE
    }
    pub fn rot_fructose() -> f64 {
        super::ROT_FRUCTOSE
    }
    pub fn mm_sucrose() -> f64 {
        super::MOLAR_MASS_SUCROSE
    }
    pub fn mm_monomer() -> f64 {
        super::MOLAR_MASS_MONOMER
    }
    pub fn factor() -> f64 {
        1.0
    }
}

impl ReactionParams {
    /// 0.3 g/mL sucrose in a 2 cm cell, tabulated specific rotations.
    pub fn with_rate(rate_constant: f64) -> Self {
        ReactionParams {
            rate_constant,
            initial_sucrose: SUCROSE_G_PER_ML,
            path_dm: PATH_DM,
            rot_sucrose: ROT_SUCROSE,
            rot_glucose: ROT_GLUCOSE,
            rot_fructose: ROT_FRUCTOSE,
            molar_mass_sucrose: MOLAR_MASS_SUCROSE,
            molar_mass_monomer: MOLAR_MASS_MONOMER,
            rotation_to_phase_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rate_constant", self.rate_constant),
            ("initial_sucrose", self.initial_sucrose),
            ("path_dm", self.path_dm),
            ("molar_mass_sucrose", self.molar_mass_sucrose),
            ("molar_mass_monomer", self.molar_mass_monomer),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {x}")));
            }
        }
        let finite = [
            ("rot_sucrose", self.rot_sucrose),
            ("rot_glucose", self.rot_glucose),
            ("rot_fructose", self.rot_fructose),
            ("rotation_to_phase_factor", self.rotation_to_phase_factor),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {x}")));
            }
        }
        Ok(())
    }

    /// Mass of each monomer produced per gram of sucrose hydrolysed.
    fn monomer_yield(&self) -> f64 {
        self.molar_mass_monomer / self.molar_mass_sucrose
    }

    /// Rotation carried by the unreacted sucrose at t = 0, per unit path (deg/dm).
    fn initial_term(&self) -> f64 {
        self.rot_sucrose * self.initial_sucrose
    }

    /// Magnitude of the rotation (per unit path) contributed by full conversion
    /// to products, with sign chosen so a levorotatory product mix gives B > 0.
    fn product_term(&self) -> f64 {
        -(self.rot_glucose + self.rot_fructose) * self.initial_sucrose * self.monomer_yield()
    }
}

/// Mass concentrations (g/mL) at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Composition {
    pub t: f64,
    pub sucrose: f64,
    pub glucose: f64,
    pub fructose: f64,
}

impl Composition {
    /// Sucrose-equivalent mass concentration; equals `s0` at every time.
    pub fn sucrose_equivalent(&self, params: &ReactionParams) -> f64 {
        self.sucrose
            + params.molar_mass_sucrose / (2.0 * params.molar_mass_monomer)
                * (self.glucose + self.fructose)
    }
}

pub fn composition_at(t: f64, params: &ReactionParams) -> Result<Composition> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let remaining = (-params.rate_constant * t).exp();
    let converted = -(-params.rate_constant * t).exp_m1();
    let monomer = params.initial_sucrose * converted * params.monomer_yield();
    Ok(Composition {
        t,
        sucrose: params.initial_sucrose * remaining,
        glucose: monomer,
        fructose: monomer,
    })
}

/// Optical rotation in degrees.
pub fn optical_rotation(c: &Composition, params: &ReactionParams) -> f64 {
    params.path_dm
        * (params.rot_sucrose * c.sucrose
            + params.rot_glucose * c.glucose
            + params.rot_fructose * c.fructose)
}

/// Probe phase (radians) imparted by the sample at time `t`.
///
/// Not wrapped: a trajectory is reported on the real line.
pub fn phase_at(t: f64, params: &ReactionParams) -> Result<f64> {
    let c = composition_at(t, params)?;
    Ok(params.rotation_to_phase_factor * optical_rotation(&c, params).to_radians())
}

/// Time at which the rotation passes through zero, `ln((A + B)/B)/k`.
pub fn zero_crossing_time(params: &ReactionParams) -> Result<f64> {
    let a = params.initial_term();
    let b = params.product_term();
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::NoCrossing {
            initial: params.path_dm * a,
            final_: -params.path_dm * b,
        });
    }
    Ok(((a + b) / b).ln() / params.rate_constant)
}

/// Rate constant for which `fraction` of the sucrose is gone after `t` seconds.
pub fn rate_from_completion(fraction: f64, t: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!(
            "completion fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("completion time must be positive, got {t}")));
    }
    Ok(-(-fraction).ln_1p() / t)
}

/// One row of a kinetics trajectory table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub composition: Composition,
    pub rotation_deg: f64,
    pub phase_rad: f64,
}

/// Trajectory sampled at `0, step, 2·step, …` up to and including `duration`.
pub fn trajectory(params: &ReactionParams, duration: f64, step: f64) -> Result<Vec<TrajectoryPoint>> {
    params.validate()?;
    if !(duration >= 0.0 && duration.is_finite()) || !(step > 0.0) {
        return Err(Error::Domain(format!(
            "invalid trajectory span: duration {duration}, step {step}"
        )));
    }
    let n = (duration / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * step;
            let composition = composition_at(t, params)?;
            let rotation_deg = optical_rotation(&composition, params);
            Ok(TrajectoryPoint {
                composition,
                rotation_deg,
                phase_rad: params.rotation_to_phase_factor * rotation_deg.to_radians(),
            })
        })
        .collect()
}
