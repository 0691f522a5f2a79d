//! Outcome-probability model of the four-setting polarimetric measurement.
//!
//! The two-photon (N00N) probe registers a coincidence behind the analyser at
//! wave-plate angle `θ` with probability
//!
//! ```text
//! p(θ | φ, v) = ¼ · (1 + v · cos(8θ − 2φ))
//! ```
//!
//! The classical benchmark is a single-photon binary measurement with the
//! phase entering at half the rate, `½ · (1 + v · cos(4θ − φ))`.
//!
//! Both models are periodic in `φ`; the two-photon model has period `π`, so
//! phases are canonicalised to `[−π/2, π/2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wrap an angle onto the half-period interval `[−π/2, π/2)`.
pub fn wrap_half_period(x: f64) -> f64 {
    let y = (x + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    // rem_euclid can round up to exactly π
    if y >= FRAC_PI_2 {
        y - PI
    } else {
        y
    }
}

/// Probe phase in radians, stored as its canonical representative in `[−π/2, π/2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Phase(f64);

impl Phase {
    pub fn new(radians: f64) -> Self {
        Phase(wrap_half_period(radians))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Phase {
    fn from(x: f64) -> Self {
        Phase::new(x)
    }
}

impl From<Phase> for f64 {
    fn from(p: Phase) -> f64 {
        p.0
    }
}

/// Fringe visibility, constrained to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(into = "f64")]
pub struct Visibility(f64);

impl Visibility {
    pub const ONE: Visibility = Visibility(1.0);
    pub const ZERO: Visibility = Visibility(0.0);

    pub fn new(v: f64) -> Result<Self> {
        if v.is_finite() && (0.0..=1.0).contains(&v) {
            Ok(Visibility(v))
        } else {
            Err(Error::Domain(format!("visibility {v} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Visibility> for f64 {
    fn from(v: Visibility) -> f64 {
        v.0
    }
}

impl<'de> Deserialize<'de> for Visibility {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Visibility::new(v).map_err(serde::de::Error::custom)
    }
}

/// Angle of the analysing half-wave plate, radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SettingAngle(f64);

impl SettingAngle {
    pub const fn new(radians: f64) -> Self {
        SettingAngle(radians)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Same setting up to the rounding introduced by text serialisation.
    pub fn matches(self, other: SettingAngle) -> bool {
        (self.0 - other.0).abs() <= 1e-6
    }
}

/// Four-setting protocol of the two-photon probe: fringe phases `8θ` of
/// 0, π/2, π and 3π/2.
pub const CANONICAL_SETTINGS: [SettingAngle; 4] = [
    SettingAngle::new(0.0),
    SettingAngle::new(PI / 16.0),
    SettingAngle::new(PI / 8.0),
    SettingAngle::new(3.0 * PI / 16.0),
];

/// Settings giving the classical model the same fringe phases `4θ` as the
/// two-photon protocol.
pub const CLASSICAL_SETTINGS: [SettingAngle; 4] = [
    SettingAngle::new(0.0),
    SettingAngle::new(PI / 8.0),
    SettingAngle::new(PI / 4.0),
    SettingAngle::new(3.0 * PI / 8.0),
];

/// Partial derivatives of an outcome probability with respect to (φ, v).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub dp_dphi: f64,
    pub dp_dv: f64,
}

/// Which measurement model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeModel {
    /// Two-photon N00N probe with coincidence detection.
    Quantum,
    /// Single-photon binary polarimetry.
    Classical,
}

impl ProbeModel {
    /// Argument of the fringe cosine.
    #[inline]
    pub fn fringe_phase(self, setting: f64, phase: f64) -> f64 {
        match self {
            ProbeModel::Quantum => 8.0 * setting - 2.0 * phase,
            ProbeModel::Classical => 4.0 * setting - phase,
        }
    }

    /// `(sin, cos)` of the fringe phase. Arguments within a few ulps of a
    /// multiple of `π/2` give exact zeros, so nulls and quadratures are exact
    /// at the canonical settings.
    #[inline]
    pub fn fringe_sin_cos(self, setting: f64, phase: f64) -> (f64, f64) {
        let x = self.fringe_phase(setting, phase);
        let q = (x / FRAC_PI_2).round();
        let r = x - q * FRAC_PI_2;
        if r.abs() > 8.0 * f64::EPSILON * x.abs().max(1.0) {
            return x.sin_cos();
        }
        match (q as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    }

    /// Photons detected per recorded event.
    pub fn photons_per_event(self) -> f64 {
        match self {
            ProbeModel::Quantum => 2.0,
            ProbeModel::Classical => 1.0,
        }
    }

    pub fn canonical_settings(self) -> &'static [SettingAngle; 4] {
        match self {
            ProbeModel::Quantum => &CANONICAL_SETTINGS,
            ProbeModel::Classical => &CLASSICAL_SETTINGS,
        }
    }

    #[inline]
    pub(crate) fn probability_raw(self, setting: f64, phase: f64, v: f64) -> f64 {
        let (_, c) = self.fringe_sin_cos(setting, phase);
        match self {
            ProbeModel::Quantum => 0.25 * (1.0 + v * c),
            ProbeModel::Classical => 0.5 * (1.0 + v * c),
        }
    }

    #[inline]
    pub(crate) fn derivatives_raw(self, setting: f64, phase: f64, v: f64) -> Derivatives {
        let (s, c) = self.fringe_sin_cos(setting, phase);
        match self {
            ProbeModel::Quantum => Derivatives {
                dp_dphi: 0.5 * v * s,
                dp_dv: 0.25 * c,
            },
            ProbeModel::Classical => Derivatives {
                dp_dphi: 0.5 * v * s,
                dp_dv: 0.5 * c,
            },
        }
    }
}

/// Coincidence probability `¼(1 + v·cos(8θ − 2φ))`.
pub fn coincidence_probability(setting: SettingAngle, phase: Phase, visibility: Visibility) -> f64 {
    ProbeModel::Quantum.probability_raw(setting.0, phase.0, visibility.0)
}

/// [`coincidence_probability`] evaluated at every setting.
pub fn probability_vector(
    phase: Phase,
    visibility: Visibility,
    settings: &[SettingAngle],
) -> Result<Vec<f64>> {
    if settings.is_empty() {
        return Err(Error::Domain("empty settings list".into()));
    }
    Ok(settings
        .iter()
        .map(|&s| coincidence_probability(s, phase, visibility))
        .collect())
}

/// Single-photon benchmark probability `½(1 + v·cos(4θ − φ))`.
pub fn classical_probability(setting: SettingAngle, phase: Phase, visibility: Visibility) -> f64 {
    ProbeModel::Classical.probability_raw(setting.0, phase.0, visibility.0)
}

/// `(∂p/∂φ, ∂p/∂v)` of the coincidence probability.
pub fn model_derivatives(setting: SettingAngle, phase: Phase, visibility: Visibility) -> Derivatives {
    ProbeModel::Quantum.derivatives_raw(setting.0, phase.0, visibility.0)
}

/// `(∂p/∂φ, ∂p/∂v)` of the classical benchmark probability.
pub fn classical_derivatives(
    setting: SettingAngle,
    phase: Phase,
    visibility: Visibility,
) -> Derivatives {
    ProbeModel::Classical.derivatives_raw(setting.0, phase.0, visibility.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn vis(v: f64) -> Visibility {
        Visibility::new(v).unwrap()
    }

    #[test]
    fn fringe_trig_is_exact_at_canonical_settings() {
        let expect = [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)];
        for (s, e) in CANONICAL_SETTINGS.iter().zip(expect) {
            assert_eq!(ProbeModel::Quantum.fringe_sin_cos(s.value(), 0.0), e);
        }
        for (s, e) in CLASSICAL_SETTINGS.iter().zip(expect) {
            assert_eq!(ProbeModel::Classical.fringe_sin_cos(s.value(), 0.0), e);
        }
    }

    #[test]
    fn probability_examples() {
        let p = |t, ph, v| coincidence_probability(SettingAngle::new(t), Phase::new(ph), vis(v));
        assert_abs_diff_eq!(p(0.0, 0.0, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p(PI / 8.0, 0.0, 1.0), 0.0, epsilon = 1e-15);
        // ¼(1 + 0.8·sin 0.2)
        assert_abs_diff_eq!(p(PI / 16.0, 0.1, 0.8), 0.2897338662, epsilon = 1e-9);
    }

    #[test]
    fn probability_vector_examples() {
        let pv = probability_vector(Phase::new(0.0), vis(1.0), &CANONICAL_SETTINGS).unwrap();
        for (got, want) in pv.iter().zip([0.5, 0.25, 0.0, 0.25]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let pv = probability_vector(Phase::new(PI / 8.0), vis(0.9), &CANONICAL_SETTINGS).unwrap();
        for (got, want) in pv.iter().zip([0.409099, 0.409099, 0.090901, 0.090901]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
        assert!(probability_vector(Phase::new(0.0), vis(1.0), &[]).is_err());
    }

    #[test]
    fn classical_examples() {
        let p = |t, ph, v| classical_probability(SettingAngle::new(t), Phase::new(ph), vis(v));
        assert_abs_diff_eq!(p(0.0, 0.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p(PI / 4.0, 0.0, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p(PI / 8.0, 0.2, 0.9), 0.5894011989, epsilon = 1e-9);
    }

    #[test]
    fn derivative_examples() {
        let d = model_derivatives(SettingAngle::new(0.0), Phase::new(0.0), vis(1.0));
        assert_abs_diff_eq!(d.dp_dphi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dp_dv, 0.25, epsilon = 1e-15);
        let d = model_derivatives(SettingAngle::new(PI / 16.0), Phase::new(0.0), vis(1.0));
        assert_abs_diff_eq!(d.dp_dphi, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dp_dv, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn visibility_domain() {
        assert!(Visibility::new(-0.01).is_err());
        assert!(Visibility::new(1.0 + 1e-12).is_err());
        assert!(Visibility::new(f64::NAN).is_err());
        assert!(Visibility::new(0.0).is_ok());
        assert!(Visibility::new(1.0).is_ok());
    }

    #[test]
    fn phase_wrapping() {
        assert_abs_diff_eq!(Phase::new(PI / 2.0).value(), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Phase::new(-PI / 2.0).value(), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Phase::new(3.0).value(), 3.0 - PI, epsilon = 1e-15);
        assert_abs_diff_eq!(Phase::new(-1.7).value(), -1.7 + PI, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn fringe_trig_matches_sin_cos(theta in -1.0f64..1.0, phi in -2.0f64..2.0) {
            let (s, c) = ProbeModel::Quantum.fringe_sin_cos(theta, phi);
            let (s0, c0) = (8.0 * theta - 2.0 * phi).sin_cos();
            prop_assert!((s - s0).abs() < 1e-14 && (c - c0).abs() < 1e-14);
        }

        #[test]
        fn canonical_settings_normalise(phi in -10.0f64..10.0, v in 0.0f64..=1.0) {
            let pv = probability_vector(Phase::new(phi), vis(v), &CANONICAL_SETTINGS).unwrap();
            prop_assert!((pv.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for p in pv {
                prop_assert!(p >= -1e-16 && p <= (1.0 + v) / 4.0 + 1e-16);
            }
        }

        #[test]
        fn periodic_in_pi(theta in 0.0f64..PI, phi in -3.0f64..3.0, v in 0.0f64..=1.0) {
            let m = ProbeModel::Quantum;
            let a = m.probability_raw(theta, phi, v);
            let b = m.probability_raw(theta, phi + PI, v);
            prop_assert!((a - b).abs() < 1e-14);
        }

        #[test]
        fn zero_visibility_is_flat(theta in 0.0f64..PI, phi in -3.0f64..3.0) {
            let p = coincidence_probability(SettingAngle::new(theta), Phase::new(phi), Visibility::ZERO);
            prop_assert_eq!(p, 0.25);
        }

        #[test]
        fn quarter_period_shift_flips_visibility(theta in 0.0f64..PI, phi in -3.0f64..3.0, v in 0.0f64..=1.0) {
            let m = ProbeModel::Quantum;
            let a = m.probability_raw(theta, phi, v);
            let b = m.probability_raw(theta, phi + FRAC_PI_2, -v);
            prop_assert!((a - b).abs() < 1e-14);
        }

        #[test]
        fn derivatives_match_finite_differences(
            theta in 0.0f64..PI, phi in -1.5f64..1.5, v in 0.0f64..=1.0,
            classical in any::<bool>(),
        ) {
            let m = if classical { ProbeModel::Classical } else { ProbeModel::Quantum };
            let h = 1e-5;
            let d = m.derivatives_raw(theta, phi, v);
            let fd_phi = (m.probability_raw(theta, phi + h, v) - m.probability_raw(theta, phi - h, v)) / (2.0 * h);
            let fd_v = (m.probability_raw(theta, phi, v + h) - m.probability_raw(theta, phi, v - h)) / (2.0 * h);
            prop_assert!((d.dp_dphi - fd_phi).abs() < 1e-8);
            prop_assert!((d.dp_dv - fd_v).abs() < 1e-8);
        }
    }
}
