//! Weighted circular statistics for angles of period `π`.
//!
//! Angles are doubled onto the full circle, averaged as unit vectors, and the
//! mean direction halved. Dispersion uses the circular standard deviation
//! `sqrt(−2 ln R)` of the doubled angle, halved; for concentrated
//! distributions this tends to the ordinary standard deviation of the angle.

use std::f64::consts::PI;

use crate::model::wrap_half_period;

/// Standard deviation of a uniform distribution over one half-period.
pub const UNIFORM_HALF_PERIOD_STD: f64 = PI / 3.464_101_615_137_754_6; // π/√12

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxialMean {
    /// Mean resultant length of the doubled angles, in `[0, 1]`.
    pub resultant: f64,
    /// Mean angle in `[−π/2, π/2)`.
    pub mean: f64,
    /// Halved circular standard deviation, uncapped.
    pub std: f64,
}

/// Mean direction of `angles` weighted by `weights` (need not be normalised).
pub fn axial_mean(angles: &[f64], weights: &[f64]) -> AxialMean {
    let (mut c, mut s, mut w) = (0.0, 0.0, 0.0);
    for (&a, &m) in angles.iter().zip(weights) {
        let (sn, cs) = (2.0 * a).sin_cos();
        c += m * cs;
        s += m * sn;
        w += m;
    }
    if w <= 0.0 {
        return AxialMean { resultant: 0.0, mean: 0.0, std: f64::INFINITY };
    }
    let (c, s) = (c / w, s / w);
    let resultant = c.hypot(s).min(1.0);
    let std = if resultant > 0.0 {
        0.5 * (-2.0 * resultant.ln()).max(0.0).sqrt()
    } else {
        f64::INFINITY
    };
    AxialMean {
        resultant,
        mean: wrap_half_period(0.5 * s.atan2(c)),
        std,
    }
}
