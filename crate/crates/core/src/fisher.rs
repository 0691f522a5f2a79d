//! Fisher information and Cramér-Rao bounds for joint (φ, v) estimation.
//!
//! The two-photon information is the multinomial information of one
//! coincidence spread over the settings, `F_ij = Σθ ∂_i p ∂_j p / p`. The
//! classical benchmark is the binary-outcome information of one photon,
//! averaged over settings with equal weight.
//!
//! At unit visibility an outcome can have zero probability. The density
//! `∂p ∂p / p` is then `0/0` and the visibility information diverges: the null
//! outcome pins `v` exactly. [`FisherMode::Limit`] substitutes the analytic
//! limit of the phase entry for such outcomes and records the pinning so that
//! [`crb`] can take the matching limit of `F⁻¹`, which is continuous even
//! though `f_pp` itself jumps (`2v² → 2` as `v → 1`, but exactly 4 at `v = 1`
//! for the two-photon probe at `φ = 0`).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Phase, ProbeModel, SettingAngle, Visibility};

/// Largest visibility accepted by [`FisherMode::Strict`].
pub const STRICT_VISIBILITY_MAX: f64 = 1.0 - 1e-9;

/// Determinant below which an information matrix counts as singular.
pub const SINGULAR_DET: f64 = 1e-14;

// 1 ± v·cos below this is a null outcome
const NULL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FisherMode {
    /// Generic evaluation; visibility must not exceed [`STRICT_VISIBILITY_MAX`].
    #[default]
    Strict,
    /// Accepts `v = 1` and replaces null-outcome terms by their limits.
    Limit,
}

/// Per-event information matrix for `(φ, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherMatrix {
    pub f_pp: f64,
    pub f_pv: f64,
    pub f_vv: f64,
    /// Present when a null outcome pins the visibility (limit mode only). In
    /// that case `f_vv` is infinite, `f_pp` includes the limit of the null
    /// outcomes' phase terms and `f_pv` holds the finite part from the other
    /// outcomes.
    pub null_limit: Option<NullLimit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullLimit {
    /// Phase information from the outcomes with non-vanishing probability.
    pub residual_pp: f64,
}

impl FisherMatrix {
    pub fn det(&self) -> f64 {
        self.f_pp * self.f_vv - self.f_pv * self.f_pv
    }

    /// Fraction of the phase information that survives when `v` is estimated
    /// jointly: `(1/[F⁻¹]_φφ) / F_φφ = 1 − F_φv² / (F_φφ F_vv)`.
    pub fn phase_information_retained(&self) -> f64 {
        match self.null_limit {
            Some(n) => n.residual_pp / self.f_pp,
            None => 1.0 - self.f_pv * self.f_pv / (self.f_pp * self.f_vv),
        }
    }

    fn scaled(self, k: f64) -> Self {
        FisherMatrix {
            f_pp: self.f_pp * k,
            f_pv: self.f_pv * k,
            f_vv: self.f_vv * k,
            null_limit: self.null_limit.map(|n| NullLimit {
                residual_pp: n.residual_pp * k,
            }),
        }
    }
}

/// Covariance lower bound for `n_events` independent events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub var_phase: f64,
    pub var_vis: f64,
    pub covar: f64,
}

/// A bound tabulated at one `(φ, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrbPoint {
    pub phase: f64,
    pub visibility: f64,
    pub var_phase: f64,
    pub var_vis: f64,
    pub covar: f64,
}

/// Two-photon information per coincidence (strict mode).
pub fn fisher_matrix(
    phase: Phase,
    visibility: Visibility,
    settings: &[SettingAngle],
) -> Result<FisherMatrix> {
    information(ProbeModel::Quantum, phase, visibility, settings, FisherMode::Strict)
}

/// Classical information per photon (strict mode).
pub fn classical_fisher(
    phase: Phase,
    visibility: Visibility,
    settings: &[SettingAngle],
) -> Result<FisherMatrix> {
    information(ProbeModel::Classical, phase, visibility, settings, FisherMode::Strict)
}

/// Per-event information of either model.
pub fn information(
    model: ProbeModel,
    phase: Phase,
    visibility: Visibility,
    settings: &[SettingAngle],
    mode: FisherMode,
) -> Result<FisherMatrix> {
    if settings.is_empty() {
        return Err(Error::Domain("empty settings list".into()));
    }
    let v = visibility.value();
    if mode == FisherMode::Strict && v > STRICT_VISIBILITY_MAX {
        return Err(Error::VisibilityAtLimit(v));
    }
    let phi = phase.value();

    let (mut pp, mut pv, mut vv) = (0.0, 0.0, 0.0);
    let mut null_pp = 0.0;
    let mut pinned = false;

    for s in settings {
        let (_, c) = model.fringe_sin_cos(s.value(), phi);
        let d = model.derivatives_raw(s.value(), phi, v);
        match model {
            ProbeModel::Quantum => {
                let q = 1.0 + v * c;
                if q <= NULL_TOLERANCE {
                    // s²/(1+c) → 1 − c along the fringe
                    pinned = true;
                    null_pp += v * v * (1.0 - c);
                    continue;
                }
                let p = 0.25 * q;
                pp += d.dp_dphi * d.dp_dphi / p;
                pv += d.dp_dphi * d.dp_dv / p;
                vv += d.dp_dv * d.dp_dv / p;
            }
            ProbeModel::Classical => {
                let q = 1.0 - v * v * c * c;
                if q <= NULL_TOLERANCE {
                    // s²/(1 − c²) → 1
                    pinned = true;
                    null_pp += v * v;
                    continue;
                }
                // 1/p + 1/(1 − p) = 1/(p(1 − p)) with p(1 − p) = ¼(1 − v²c²)
                let w = 4.0 / q;
                pp += d.dp_dphi * d.dp_dphi * w;
                pv += d.dp_dphi * d.dp_dv * w;
                vv += d.dp_dv * d.dp_dv * w;
            }
        }
    }

    let f = if pinned {
        FisherMatrix {
            f_pp: pp + null_pp,
            f_pv: pv,
            f_vv: f64::INFINITY,
            null_limit: Some(NullLimit { residual_pp: pp }),
        }
    } else {
        FisherMatrix {
            f_pp: pp,
            f_pv: pv,
            f_vv: vv,
            null_limit: None,
        }
    };
    Ok(match model {
        ProbeModel::Quantum => f,
        ProbeModel::Classical => f.scaled(1.0 / settings.len() as f64),
    })
}

/// Cramér-Rao bound `F⁻¹ / n_events`.
pub fn crb(f: &FisherMatrix, n_events: f64) -> Result<Bound> {
    if !(n_events > 0.0) {
        return Err(Error::Domain(format!("n_events must be positive, got {n_events}")));
    }
    if let Some(n) = f.null_limit {
        // visibility pinned: only the residual phase information counts
        if !(n.residual_pp > SINGULAR_DET) {
            return Err(Error::SingularInformation(n.residual_pp));
        }
        return Ok(Bound {
            var_phase: 1.0 / (n.residual_pp * n_events),
            var_vis: 0.0,
            covar: 0.0,
        });
    }
    let det = f.det();
    if !(det > SINGULAR_DET) {
        return Err(Error::SingularInformation(det));
    }
    let k = 1.0 / (det * n_events);
    Ok(Bound {
        var_phase: f.f_vv * k,
        var_vis: f.f_pp * k,
        covar: -f.f_pv * k,
    })
}

/// Bound versus phase at fixed visibility over the model's canonical
/// settings. `n_events` counts coincidences for the two-photon probe and
/// photons for the classical one.
pub fn crb_curve(
    model: ProbeModel,
    visibility: Visibility,
    phase_grid: &[f64],
    n_events: f64,
) -> Result<Vec<CrbPoint>> {
    if phase_grid.is_empty() {
        return Err(Error::Domain("empty phase grid".into()));
    }
    phase_grid
        .par_iter()
        .map(|&phi| {
            let f = information(
                model,
                Phase::new(phi),
                visibility,
                model.canonical_settings(),
                FisherMode::Limit,
            )?;
            let b = crb(&f, n_events)?;
            Ok(CrbPoint {
                phase: phi,
                visibility: visibility.value(),
                var_phase: b.var_phase,
                var_vis: b.var_vis,
                covar: b.covar,
            })
        })
        .collect()
}

/// `[F⁻¹]_φφ` per detected photon over the model's canonical settings.
pub fn per_photon_phase_bound(model: ProbeModel, phase: Phase, visibility: Visibility) -> Result<f64> {
    let f = information(
        model,
        phase,
        visibility,
        model.canonical_settings(),
        FisherMode::Limit,
    )?;
    Ok(crb(&f, 1.0)?.var_phase * model.photons_per_event())
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// The probe matches the reference at this visibility.
    At(f64),
    /// The probe never reaches the reference on `(0, 1]`.
    None,
}

/// Visibility above which the two-photon probe beats ideal (`v = 1`)
/// classical light in per-photon phase variance.
pub fn advantage_threshold(phase: Phase) -> Result<Threshold> {
    advantage_threshold_between(phase, ProbeModel::Quantum, ProbeModel::Classical)
}

/// Bisection for the visibility at which `probe`'s per-photon phase bound
/// equals that of `reference` at unit visibility.
pub fn advantage_threshold_between(
    phase: Phase,
    probe: ProbeModel,
    reference: ProbeModel,
) -> Result<Threshold> {
    let target = per_photon_phase_bound(reference, phase, Visibility::ONE)?;
    let excess = |v: f64| -> Result<f64> {
        match per_photon_phase_bound(probe, phase, Visibility::new(v)?) {
            Ok(b) => Ok(b - target),
            Err(Error::SingularInformation(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let tie = 1e-9 * target;

    let mut hi = 1.0;
    if excess(hi)? > tie {
        return Ok(Threshold::None);
    }
    let mut lo = 1e-6;
    if excess(lo)? <= tie {
        return Ok(Threshold::At(lo));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > tie {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold::At(0.5 * (lo + hi)))
}

/// One phase row of the bound comparison table: two-photon bounds at two
/// visibilities and the ideal classical phase bound for the same number of
/// detected photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsRow {
    pub phi: f64,
    pub var_phi_q_vmin: f64,
    pub var_phi_q_vmax: f64,
    pub var_phi_classical: f64,
    pub var_vis_q_vmin: f64,
    pub var_vis_q_vmax: f64,
    pub cov_q_vmin: f64,
    pub cov_q_vmax: f64,
}

/// Bounds for `n_events` coincidences on `n_grid` phases over `[−π/2, π/2)`;
/// the classical column uses `2 · n_events` photons.
pub fn bounds_table(v_min: f64, v_max: f64, n_grid: usize, n_events: f64) -> Result<Vec<BoundsRow>> {
    if !(0.0 <= v_min && v_min <= v_max && v_max <= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 <= v_min <= v_max <= 1, got v_min = {v_min}, v_max = {v_max}"
        )));
    }
    if n_grid == 0 {
        return Err(Error::Domain("phase grid must have at least one point".into()));
    }
    if !(n_events > 0.0) {
        return Err(Error::Domain(format!("n_events must be positive, got {n_events}")));
    }
    let (v_lo, v_hi) = (Visibility::new(v_min)?, Visibility::new(v_max)?);
    // zero information (v = 0) is reported as an unbounded variance
    let bound = |model: ProbeModel, phi: f64, v: Visibility, n: f64| -> Result<Bound> {
        let f = information(model, Phase::new(phi), v, model.canonical_settings(), FisherMode::Limit)?;
        match crb(&f, n) {
            Err(Error::SingularInformation(_)) => Ok(Bound {
                var_phase: f64::INFINITY,
                var_vis: f64::INFINITY,
                covar: 0.0,
            }),
            other => other,
        }
    };
    crate::estimator::phase_axis(n_grid)
        .into_par_iter()
        .map(|phi| {
            let l = bound(ProbeModel::Quantum, phi, v_lo, n_events)?;
            let h = bound(ProbeModel::Quantum, phi, v_hi, n_events)?;
            let c = bound(ProbeModel::Classical, phi, Visibility::ONE, 2.0 * n_events)?;
            Ok(BoundsRow {
                phi,
                var_phi_q_vmin: l.var_phase,
                var_phi_q_vmax: h.var_phase,
                var_phi_classical: c.var_phase,
                var_vis_q_vmin: l.var_vis,
                var_vis_q_vmax: h.var_vis,
                cov_q_vmin: l.covar,
                cov_q_vmax: h.covar,
            })
        })
        .collect()
}
