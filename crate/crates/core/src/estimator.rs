//! Bayesian joint estimation of phase and visibility on a grid.
//!
//! The likelihood of one cycle is multinomial in the per-setting counts,
//! `Πθ p(θ | φ, v)^{n_θ}`, conditioned on the realised total. It is
//! accumulated in log space over a `φ × v` grid, shifted by its maximum,
//! exponentiated and normalised.
//!
//! Point estimates: the phase is the axial (doubled-angle) circular mean of
//! the phase marginal, its uncertainty the halved circular standard deviation
//! capped at `π/√12`; visibility mean and standard deviation are ordinary
//! moments of the visibility marginal.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{axial_mean, UNIFORM_HALF_PERIOD_STD};
use crate::error::{Error, Result};
use crate::model::{wrap_half_period, SettingAngle};
use crate::simulator::MeasurementRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_n_phi")]
    pub n_phi: usize,
    #[serde(default = "GridSpec::default_n_vis")]
    pub n_vis: usize,
    /// Feed each cycle's posterior forward as the next cycle's prior.
    #[serde(default)]
    pub sequential: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_phi: Self::default_n_phi(),
            n_vis: Self::default_n_vis(),
            sequential: false,
        }
    }
}

impl GridSpec {
    fn default_n_phi() -> usize {
        1024
    }
    fn default_n_vis() -> usize {
        512
    }

    pub fn new(n_phi: usize, n_vis: usize) -> Self {
        GridSpec { n_phi, n_vis, sequential: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phi < 2 || self.n_vis < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 points per axis, got {} × {}",
                self.n_phi, self.n_vis
            )));
        }
        Ok(())
    }

    /// `n_phi` equally spaced phases over `[−π/2, π/2)`.
    pub fn phi_axis(&self) -> Vec<f64> {
        phase_axis(self.n_phi)
    }

    /// `n_vis` equally spaced visibilities over `[0, 1]`.
    pub fn vis_axis(&self) -> Vec<f64> {
        let last = (self.n_vis - 1) as f64;
        (0..self.n_vis).map(|j| j as f64 / last).collect()
    }
}

/// `n` equally spaced phases over `[−π/2, π/2)`; includes 0 exactly when `n` is even.
pub fn phase_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 / n as f64 - 0.5) * PI).collect()
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct EstimateFlags: u8 {
        /// No counts in the cycle; the posterior is the prior.
        const NO_COUNTS = 1;
        /// Phase marginal has no preferred direction.
        const UNDEFINED_PHASE = 1 << 1;
        /// Phase uncertainty capped at the uniform-distribution value.
        const STD_CAPPED = 1 << 2;
    }
}

impl EstimateFlags {
    /// Either failure mode that leaves the phase without information.
    pub fn is_degenerate(self) -> bool {
        self.intersects(EstimateFlags::NO_COUNTS | EstimateFlags::UNDEFINED_PHASE)
    }
}

const FLAG_NAMES: [(EstimateFlags, &str); 3] = [
    (EstimateFlags::NO_COUNTS, "no_counts"),
    (EstimateFlags::UNDEFINED_PHASE, "undefined_phase"),
    (EstimateFlags::STD_CAPPED, "std_capped"),
];

impl fmt::Display for EstimateFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = FLAG_NAMES
            .iter()
            .filter(|(flag, _)| self.contains(*flag))
            .map(|(_, name)| *name)
            .collect();
        f.write_str(&names.join("|"))
    }
}

impl FromStr for EstimateFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = EstimateFlags::empty();
        for name in s.split('|').filter(|n| !n.is_empty()) {
            let (flag, _) = FLAG_NAMES
                .iter()
                .find(|(_, n)| *n == name)
                .ok_or_else(|| Error::Input(format!("unknown estimate flag {name:?}")))?;
            flags |= *flag;
        }
        Ok(flags)
    }
}

/// Normalised joint density over `(φ, v)`, row-major in `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub phi_axis: Vec<f64>,
    pub vis_axis: Vec<f64>,
    pub density: Vec<f64>,
    /// Coincidences that informed this grid.
    pub total_counts: u64,
    pub flags: EstimateFlags,
}

impl PosteriorGrid {
    pub fn uniform(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_phi * spec.n_vis;
        Ok(PosteriorGrid {
            phi_axis: spec.phi_axis(),
            vis_axis: spec.vis_axis(),
            density: vec![1.0 / n as f64; n],
            total_counts: 0,
            flags: EstimateFlags::empty(),
        })
    }

    /// Grid from explicit axes and an unnormalised density.
    pub fn from_parts(phi_axis: Vec<f64>, vis_axis: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if phi_axis.is_empty() || vis_axis.is_empty() || density.len() != phi_axis.len() * vis_axis.len() {
            return Err(Error::Input("posterior grid dimensions do not match".into()));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Input("posterior density must be finite and non-negative".into()));
        }
        let mass: f64 = density.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::Input("posterior density has zero mass".into()));
        }
        Ok(PosteriorGrid {
            phi_axis,
            vis_axis,
            density: density.into_iter().map(|d| d / mass).collect(),
            total_counts: 0,
            flags: EstimateFlags::empty(),
        })
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum()
    }

    pub fn phi_marginal(&self) -> Vec<f64> {
        self.density
            .chunks(self.vis_axis.len())
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn vis_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vis_axis.len()];
        for row in self.density.chunks(self.vis_axis.len()) {
            for (acc, d) in m.iter_mut().zip(row) {
                *acc += d;
            }
        }
        m
    }

    /// Grid cell `(i_phi, i_vis)` of largest density.
    pub fn mode(&self) -> (usize, usize) {
        let (k, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &d)| if d > best.1 { (k, d) } else { best });
        (k / self.vis_axis.len(), k % self.vis_axis.len())
    }
}

/// Prior for one update.
#[derive(Debug, Clone, Copy)]
pub enum Prior<'a> {
    Uniform,
    Grid(&'a PosteriorGrid),
}

fn check_counts(counts: &[u64], settings: &[SettingAngle]) -> Result<()> {
    if settings.is_empty() || counts.len() != settings.len() {
        return Err(Error::Input(format!(
            "{} counts for {} settings",
            counts.len(),
            settings.len()
        )));
    }
    Ok(())
}

/// Posterior over the grid given one set of per-setting counts.
pub fn posterior(
    counts: &[u64],
    settings: &[SettingAngle],
    spec: &GridSpec,
    prior: Prior<'_>,
) -> Result<PosteriorGrid> {
    spec.validate()?;
    check_counts(counts, settings)?;
    let base = match prior {
        Prior::Uniform => PosteriorGrid::uniform(spec)?,
        Prior::Grid(g) => {
            if g.phi_axis.len() != spec.n_phi || g.vis_axis.len() != spec.n_vis {
                return Err(Error::Input("prior grid does not match the grid spec".into()));
            }
            g.clone()
        }
    };
    let total: u64 = counts.iter().sum();
    if total == 0 {
        let mut out = base;
        out.total_counts = 0;
        out.flags |= EstimateFlags::NO_COUNTS;
        return Ok(out);
    }
    let prior_density = match prior {
        Prior::Uniform => None,
        Prior::Grid(g) => Some(g.density.as_slice()),
    };
    let mut out = update(base.phi_axis, base.vis_axis, counts, settings, prior_density)?;
    out.total_counts = total;
    Ok(out)
}

/// Posterior over phase alone with the visibility held at `visibility`.
pub fn posterior_fixed_visibility(
    counts: &[u64],
    settings: &[SettingAngle],
    visibility: f64,
    n_phi: usize,
) -> Result<PosteriorGrid> {
    check_counts(counts, settings)?;
    if n_phi < 2 || !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Domain("fixed-visibility grid needs n_phi ≥ 2 and v in [0, 1]".into()));
    }
    let phi_axis = phase_axis(n_phi);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        let mut g = PosteriorGrid::from_parts(phi_axis, vec![visibility], vec![1.0; n_phi])?;
        g.flags |= EstimateFlags::NO_COUNTS;
        return Ok(g);
    }
    let mut g = update(phi_axis, vec![visibility], counts, settings, None)?;
    g.total_counts = total;
    Ok(g)
}

fn update(
    phi_axis: Vec<f64>,
    vis_axis: Vec<f64>,
    counts: &[u64],
    settings: &[SettingAngle],
    prior: Option<&[f64]>,
) -> Result<PosteriorGrid> {
    let n_vis = vis_axis.len();
    let mut log_density = vec![0.0; phi_axis.len() * n_vis];
    log_density
        .par_chunks_mut(n_vis)
        .zip(phi_axis.par_iter())
        .enumerate()
        .for_each(|(i, (row, &phi))| {
            let fringe: Vec<(f64, f64)> = settings
                .iter()
                .zip(counts)
                .filter(|(_, &n)| n > 0)
                .map(|(s, &n)| (n as f64, (8.0 * s.value() - 2.0 * phi).cos()))
                .collect();
            for (j, (cell, &v)) in row.iter_mut().zip(&vis_axis).enumerate() {
                // the constant ¼ per event drops out on normalisation
                let mut ll: f64 = fringe.iter().map(|&(n, c)| n * (v * c).ln_1p()).sum();
                if let Some(p) = prior {
                    ll += p[i * n_vis + j].ln();
                }
                *cell = ll;
            }
        });

    let max = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Input("counts are impossible under every grid point".into()));
    }
    log_density.par_iter_mut().for_each(|x| *x = (*x - max).exp());
    let mass: f64 = log_density.iter().sum();
    for x in &mut log_density {
        *x /= mass;
    }
    Ok(PosteriorGrid {
        phi_axis,
        vis_axis,
        density: log_density,
        total_counts: 0,
        flags: EstimateFlags::empty(),
    })
}

/// Summary of one cycle's posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeEstimate {
    pub t: f64,
    pub phi_mean: f64,
    pub phi_std: f64,
    pub vis_mean: f64,
    pub vis_std: f64,
    pub total_counts: u64,
    #[serde(skip)]
    pub flags: EstimateFlags,
}

pub fn point_estimate(g: &PosteriorGrid, t: f64) -> ProbeEstimate {
    let mut flags = g.flags;
    let phi = axial_mean(&g.phi_axis, &g.phi_marginal());
    let (phi_mean, phi_std) = if phi.resultant < 1e-12 {
        flags |= EstimateFlags::UNDEFINED_PHASE;
        let lo = g.phi_axis.first().copied().unwrap_or(-FRAC_PI_2);
        (wrap_half_period(lo + FRAC_PI_2), UNIFORM_HALF_PERIOD_STD)
    } else if phi.std > UNIFORM_HALF_PERIOD_STD {
        flags |= EstimateFlags::STD_CAPPED;
        (phi.mean, UNIFORM_HALF_PERIOD_STD)
    } else {
        (phi.mean, phi.std)
    };

    let vm = g.vis_marginal();
    let mass: f64 = vm.iter().sum();
    let vis_mean = g.vis_axis.iter().zip(&vm).map(|(v, m)| v * m).sum::<f64>() / mass;
    let vis_var = g
        .vis_axis
        .iter()
        .zip(&vm)
        .map(|(v, m)| (v - vis_mean).powi(2) * m)
        .sum::<f64>()
        / mass;

    ProbeEstimate {
        t,
        phi_mean,
        phi_std,
        vis_mean: vis_mean.clamp(0.0, 1.0),
        vis_std: vis_var.max(0.0).sqrt(),
        total_counts: g.total_counts,
        flags,
    }
}

/// Complete protocol cycle assembled from consecutive records.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub t: f64,
    pub settings: Vec<SettingAngle>,
    pub counts: Vec<u64>,
}

/// Group records into complete cycles in protocol order. Partial cycles are
/// dropped with a warning; records must not go backwards in time.
pub fn group_cycles(
    records: &[MeasurementRecord],
    settings: &[SettingAngle],
) -> Result<(Vec<Cycle>, Vec<String>)> {
    if settings.is_empty() {
        return Err(Error::Input("empty settings list".into()));
    }
    for w in records.windows(2) {
        if w[1].t < w[0].t {
            return Err(Error::Input(format!(
                "records out of time order: t = {} follows t = {}",
                w[1].t, w[0].t
            )));
        }
    }

    let mut cycles = Vec::new();
    let mut warnings = Vec::new();
    let mut current: Vec<&MeasurementRecord> = Vec::with_capacity(settings.len());
    let drop_partial = |current: &mut Vec<&MeasurementRecord>, warnings: &mut Vec<String>| {
        if let Some(first) = current.first() {
            warnings.push(format!(
                "dropped incomplete cycle at t = {} ({} of {} settings)",
                first.t,
                current.len(),
                settings.len()
            ));
        }
        current.clear();
    };

    // inside a broken cycle whose loss has already been reported
    let mut orphaned = false;
    for r in records {
        if !r.setting.matches(settings[current.len()]) {
            if !current.is_empty() {
                drop_partial(&mut current, &mut warnings);
                orphaned = true;
            }
            if !r.setting.matches(settings[0]) {
                if !orphaned {
                    warnings.push(format!(
                        "skipped record at t = {} with unexpected setting {}",
                        r.t,
                        r.setting.value()
                    ));
                    orphaned = true;
                }
                continue;
            }
        }
        orphaned = false;
        current.push(r);
        if current.len() == settings.len() {
            cycles.push(Cycle {
                t: current[0].t,
                settings: current.iter().map(|r| r.setting).collect(),
                counts: current.iter().map(|r| r.counts).collect(),
            });
            current.clear();
        }
    }
    drop_partial(&mut current, &mut warnings);
    Ok((cycles, warnings))
}

/// Pooled water-reference estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub phi_ref: f64,
    pub phi_std: f64,
    pub vis_mean: f64,
    pub total_counts: u64,
}

/// Phase reference from water records, pooling counts per setting over all
/// cycles.
pub fn calibrate(
    water_records: &[MeasurementRecord],
    settings: &[SettingAngle],
    spec: &GridSpec,
) -> Result<Calibration> {
    if water_records.is_empty() {
        return Err(Error::CalibrationFailed("no water records".into()));
    }
    let mut pooled = vec![0u64; settings.len()];
    for r in water_records {
        let k = settings
            .iter()
            .position(|s| s.matches(r.setting))
            .ok_or_else(|| Error::Input(format!("water record with unknown setting {}", r.setting.value())))?;
        pooled[k] += r.counts;
    }
    let g = posterior(&pooled, settings, spec, Prior::Uniform)?;
    let est = point_estimate(&g, water_records[0].t);
    if est.flags.is_degenerate() {
        return Err(Error::CalibrationFailed(format!("degenerate water posterior ({})", est.flags)));
    }
    Ok(Calibration {
        phi_ref: est.phi_mean,
        phi_std: est.phi_std,
        vis_mean: est.vis_mean,
        total_counts: est.total_counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub estimates: Vec<ProbeEstimate>,
    pub warnings: Vec<String>,
}

/// Per-cycle estimates, calibrated by `phi_ref` and unwrapped into a
/// continuous series.
pub fn track(
    records: &[MeasurementRecord],
    phi_ref: f64,
    settings: &[SettingAngle],
    spec: &GridSpec,
) -> Result<Track> {
    spec.validate()?;
    let (cycles, warnings) = group_cycles(records, settings)?;

    let raw: Vec<ProbeEstimate> = if spec.sequential {
        let mut out = Vec::with_capacity(cycles.len());
        let mut prior: Option<PosteriorGrid> = None;
        for c in &cycles {
            let p = match &prior {
                Some(g) => Prior::Grid(g),
                None => Prior::Uniform,
            };
            let g = posterior(&c.counts, &c.settings, spec, p)?;
            out.push(point_estimate(&g, c.t));
            prior = Some(g);
        }
        out
    } else {
        cycles
            .par_iter()
            .map(|c| {
                posterior(&c.counts, &c.settings, spec, Prior::Uniform).map(|g| point_estimate(&g, c.t))
            })
            .collect::<Result<_>>()?
    };

    Ok(Track {
        estimates: unwrap_series(raw, phi_ref),
        warnings,
    })
}

/// Subtract the reference and shift each estimate by the multiple of `π`
/// that brings it within `π/2` of the last informative one.
pub fn unwrap_series(raw: Vec<ProbeEstimate>, phi_ref: f64) -> Vec<ProbeEstimate> {
    let mut last: Option<f64> = None;
    raw.into_iter()
        .map(|mut e| {
            let x = e.phi_mean - phi_ref;
            e.phi_mean = match last {
                None => wrap_half_period(x),
                Some(prev) => x + ((prev - x) / PI).round() * PI,
            };
            if !e.flags.is_degenerate() {
                last = Some(e.phi_mean);
            }
            e
        })
        .collect()
}
