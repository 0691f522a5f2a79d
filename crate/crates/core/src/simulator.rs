//! Synthetic coincidence records for a reaction run and for the water
//! reference.
//!
//! Each protocol cycle acquires the settings in order, one window each, and
//! holds the sample phase fixed for the whole cycle. Counts per window are
//! independent Poisson draws with mean `4 · mean_pairs_per_window · p(θ)`.
//!
//! Random streams: counts of a sample run use stream 0 of the seeded ChaCha
//! generator, the visibility random walk stream 1, water runs stream 2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{phase_at, ReactionParams};
use crate::model::{ProbeModel, SettingAngle, CANONICAL_SETTINGS};

const COUNTS_STREAM: u64 = 0;
const DRIFT_STREAM: u64 = 1;
const WATER_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Expected coincidences in one window at `p = ¼`.
    #[serde(default = "defaults::mean_pairs")]
    pub mean_pairs_per_window: f64,
    #[serde(default = "defaults::window")]
    pub window_s: f64,
    #[serde(default = "defaults::cycle")]
    pub cycle_s: f64,
    #[serde(default = "defaults::settings")]
    pub settings: Vec<SettingAngle>,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Instrumental phase added to every measured phase; recovered by the
    /// water calibration.
    #[serde(default)]
    pub instrument_phase: f64,
}

mod defaults {
    use super::*;
    pub fn mean_pairs() -> f64 {
        250.0
    }
    pub fn window() -> f64 {
        2.0
    }
    pub fn cycle() -> f64 {
        30.0
    }
    pub fn settings() -> Vec<SettingAngle> {
        CANONICAL_SETTINGS.to_vec()
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn ceil() -> f64 {
        1.0
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            mean_pairs_per_window: defaults::mean_pairs(),
            window_s: defaults::window(),
            cycle_s: defaults::cycle(),
            settings: defaults::settings(),
            seed: defaults::seed(),
            instrument_phase: 0.0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_pairs_per_window > 0.0 && self.mean_pairs_per_window.is_finite()) {
            return Err(Error::Domain(format!(
                "mean_pairs_per_window must be positive, got {}",
                self.mean_pairs_per_window
            )));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(Error::Domain(format!("window_s must be positive, got {}", self.window_s)));
        }
        if self.settings.is_empty() {
            return Err(Error::Domain("settings must not be empty".into()));
        }
        let busy = self.settings.len() as f64 * self.window_s;
        if !(self.cycle_s >= busy && self.cycle_s.is_finite()) {
            return Err(Error::Domain(format!(
                "cycle_s = {} is shorter than {} settings × {} s",
                self.cycle_s,
                self.settings.len(),
                self.window_s
            )));
        }
        if !self.instrument_phase.is_finite() {
            return Err(Error::Domain("instrument_phase must be finite".into()));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    Constant,
    Linear,
    RandomWalk,
}

/// Time dependence of the probe visibility over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityDrift {
    pub kind: DriftKind,
    pub v0: f64,
    /// Per second, for [`DriftKind::Linear`].
    #[serde(default)]
    pub slope: f64,
    /// Per cycle, for [`DriftKind::RandomWalk`].
    #[serde(default)]
    pub step_std: f64,
    #[serde(default)]
    pub floor: f64,
    #[serde(default = "defaults::ceil")]
    pub ceil: f64,
}

impl VisibilityDrift {
    pub fn constant(v0: f64) -> Self {
        VisibilityDrift {
            kind: DriftKind::Constant,
            v0,
            slope: 0.0,
            step_std: 0.0,
            floor: 0.0,
            ceil: 1.0,
        }
    }

    /// Linear ramp from `v_start` at t = 0 to `v_end` at `duration`.
    pub fn linear(v_start: f64, v_end: f64, duration: f64) -> Self {
        VisibilityDrift {
            kind: DriftKind::Linear,
            slope: (v_end - v_start) / duration,
            ..Self::constant(v_start)
        }
    }

    pub fn random_walk(v0: f64, step_std: f64, floor: f64, ceil: f64) -> Self {
        VisibilityDrift {
            kind: DriftKind::RandomWalk,
            v0,
            slope: 0.0,
            step_std,
            floor,
            ceil,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.floor
            && self.floor <= self.ceil
            && self.ceil <= 1.0
            && (0.0..=1.0).contains(&self.v0)
            && self.slope.is_finite()
            && self.step_std >= 0.0
            && self.step_std.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid visibility drift {self:?}")))
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.floor, self.ceil)
    }

    /// Visibility at each cycle start time.
    pub fn trajectory<R: Rng + ?Sized>(&self, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self.kind {
            DriftKind::Constant => vec![self.clamp(self.v0); times.len()],
            DriftKind::Linear => times.iter().map(|t| self.clamp(self.v0 + self.slope * t)).collect(),
            DriftKind::RandomWalk => {
                let step = Normal::new(0.0, self.step_std)
                    .map_err(|e| Error::Domain(format!("random-walk step: {e}")))?;
                let mut v = self.clamp(self.v0);
                let mut out = Vec::with_capacity(times.len());
                for _ in times {
                    out.push(v);
                    v = self.clamp(v + step.sample(rng));
                }
                out
            }
        })
    }
}

/// Coincidences registered in one acquisition window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    /// Start of the window, s.
    pub t: f64,
    pub setting: SettingAngle,
    pub window_s: f64,
    pub counts: u64,
}

/// True sample phase and visibility at a cycle start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub t: f64,
    pub phi: f64,
    pub vis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub records: Vec<MeasurementRecord>,
    pub truth: Vec<TruthRow>,
}

/// One Poisson draw per setting.
pub fn sample_counts<R: Rng + ?Sized>(
    phase: f64,
    visibility: f64,
    cfg: &ProbeConfig,
    rng: &mut R,
) -> Vec<u64> {
    cfg.settings
        .iter()
        .map(|s| {
            let p = ProbeModel::Quantum.probability_raw(s.value(), phase, visibility);
            let mean = 4.0 * cfg.mean_pairs_per_window * p;
            // Poisson rejects a zero mean
            if mean > 0.0 {
                Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
            } else {
                0
            }
        })
        .collect()
}

/// Exactly `total` coincidences shared among `settings` in proportion to
/// their probabilities (a multinomial draw by conditional binomials).
pub fn sample_fixed_total<R: Rng + ?Sized>(
    phase: f64,
    visibility: f64,
    settings: &[SettingAngle],
    total: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let p: Vec<f64> = settings
        .iter()
        .map(|s| ProbeModel::Quantum.probability_raw(s.value(), phase, visibility))
        .collect();
    let mut mass: f64 = p.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Domain("settings carry no probability".into()));
    }
    let mut left = total;
    let mut out = Vec::with_capacity(p.len());
    for (i, &pi) in p.iter().enumerate() {
        let n = if i + 1 == p.len() {
            left
        } else if left == 0 || pi <= 0.0 {
            0
        } else {
            let q = (pi / mass).clamp(0.0, 1.0);
            Binomial::new(left, q)
                .map_err(|e| Error::Domain(format!("binomial draw: {e}")))?
                .sample(rng)
        };
        out.push(n);
        left -= n;
        mass -= pi;
    }
    Ok(out)
}

fn cycle_starts(cycle_s: f64, duration: f64) -> Vec<f64> {
    (0..)
        .map(|i| i as f64 * cycle_s)
        .take_while(|&t| t < duration)
        .collect()
}

fn push_cycle(records: &mut Vec<MeasurementRecord>, probe: &ProbeConfig, t: f64, counts: Vec<u64>) {
    for (k, (s, n)) in probe.settings.iter().zip(counts).enumerate() {
        records.push(MeasurementRecord {
            t: t + k as f64 * probe.window_s,
            setting: *s,
            window_s: probe.window_s,
            counts: n,
        });
    }
}

/// Full reaction run: one cycle every `cycle_s` for `duration` seconds.
pub fn simulate_run(
    reaction: &ReactionParams,
    probe: &ProbeConfig,
    drift: &VisibilityDrift,
    duration: f64,
) -> Result<SimulatedRun> {
    reaction.validate()?;
    probe.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    let starts = cycle_starts(probe.cycle_s, duration);
    let vis = drift.trajectory(&starts, &mut probe.rng(DRIFT_STREAM))?;

    let mut rng = probe.rng(COUNTS_STREAM);
    let mut records = Vec::with_capacity(starts.len() * probe.settings.len());
    let mut truth = Vec::with_capacity(starts.len());
    for (&t, &v) in starts.iter().zip(&vis) {
        let phi = phase_at(t, reaction)?;
        let counts = sample_counts(phi + probe.instrument_phase, v, probe, &mut rng);
        push_cycle(&mut records, probe, t, counts);
        truth.push(TruthRow { t, phi, vis: v });
    }
    Ok(SimulatedRun { records, truth })
}

/// Reference run with only water in the cell: the measured phase is the
/// instrumental offset alone.
pub fn water_run(
    probe: &ProbeConfig,
    visibility: f64,
    n_cycles: usize,
    phase_offset: f64,
) -> Result<Vec<MeasurementRecord>> {
    probe.validate()?;
    if n_cycles == 0 {
        return Err(Error::Domain("water run needs at least one cycle".into()));
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Domain(format!("visibility {visibility} outside [0, 1]")));
    }
    let mut rng = probe.rng(WATER_STREAM);
    let mut records = Vec::with_capacity(n_cycles * probe.settings.len());
    for i in 0..n_cycles {
        let counts = sample_counts(phase_offset, visibility, probe, &mut rng);
        push_cycle(&mut records, probe, i as f64 * probe.cycle_s, counts);
    }
    Ok(records)
}
