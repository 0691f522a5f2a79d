//! End-to-end run: water calibration, reaction simulation, tracking, kinetics
//! truth and a comparison report.

use std::path::Path;

use serde::Serialize;

use crate::config::Run;
use crate::crossing::fit_decay;
use crate::error::{Error, Result};
use crate::estimator::{calibrate, track, Calibration, ProbeEstimate};
use crate::fisher::{crb, information, FisherMode};
use crate::io;
use crate::kinetics::{trajectory, zero_crossing_time, TrajectoryPoint};
use crate::model::{Phase, ProbeModel, Visibility};
use crate::simulator::{simulate_run, water_run, MeasurementRecord, TruthRow};

/// Estimates paired with the truth of the same cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub estimate: ProbeEstimate,
    pub truth: TruthRow,
    /// Phase standard deviation at the bound for this cycle's counts.
    pub crb_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub phi_ref_rad: f64,
    pub phi_ref_std_rad: f64,
    pub cycles: usize,
    pub cycles_dropped: usize,
    pub rmse_rad: f64,
    pub mean_crb_sigma_rad: f64,
    pub rmse_over_crb: f64,
    pub coverage_2sigma: f64,
    pub true_crossing_s: Option<f64>,
    pub true_crossing_cycle: Option<f64>,
    pub estimated_crossing_s: Option<f64>,
    pub estimated_crossing_cycle: Option<f64>,
    pub crossing_error_cycles: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub water: Vec<MeasurementRecord>,
    pub calibration: Calibration,
    pub records: Vec<MeasurementRecord>,
    pub truth: Vec<TruthRow>,
    pub estimates: Vec<ProbeEstimate>,
    pub warnings: Vec<String>,
    pub kinetics: Vec<TrajectoryPoint>,
    pub comparison: Vec<Comparison>,
    pub report: Report,
}

/// Pair each estimate with the truth row that starts the same cycle.
fn pair(estimates: &[ProbeEstimate], truth: &[TruthRow]) -> Vec<(ProbeEstimate, TruthRow)> {
    let mut out = Vec::with_capacity(estimates.len());
    let mut j = 0;
    for e in estimates {
        while j < truth.len() && truth[j].t < e.t - 1e-6 {
            j += 1;
        }
        if j < truth.len() && (truth[j].t - e.t).abs() <= 1e-6 {
            out.push((*e, truth[j]));
        }
    }
    out
}

/// Crossing time of the weighted decay fit through the informative estimates.
pub fn estimated_crossing(estimates: &[ProbeEstimate]) -> Option<f64> {
    let usable: Vec<&ProbeEstimate> = estimates
        .iter()
        .filter(|e| !e.flags.is_degenerate() && e.phi_std > 0.0)
        .collect();
    let t: Vec<f64> = usable.iter().map(|e| e.t).collect();
    let y: Vec<f64> = usable.iter().map(|e| e.phi_mean).collect();
    let w: Vec<f64> = usable.iter().map(|e| e.phi_std.powi(-2)).collect();
    fit_decay(&t, &y, &w)?.zero_crossing()
}

fn compare(run: &Run, estimates: &[ProbeEstimate], truth: &[TruthRow]) -> Result<Vec<Comparison>> {
    let settings = &run.probe.settings;
    pair(estimates, truth)
        .into_iter()
        .map(|(estimate, truth)| {
            let f = information(
                ProbeModel::Quantum,
                Phase::new(truth.phi + run.probe.instrument_phase),
                Visibility::new(truth.vis)?,
                settings,
                FisherMode::Limit,
            )?;
            let crb_sigma = match crb(&f, estimate.total_counts as f64) {
                Ok(b) => b.var_phase.sqrt(),
                Err(Error::SingularInformation(_)) | Err(Error::Domain(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok(Comparison {
                estimate,
                truth,
                crb_sigma,
            })
        })
        .collect()
}

fn report(run: &Run, calibration: &Calibration, comparison: &[Comparison], n_cycles: usize) -> Report {
    let informative: Vec<&Comparison> = comparison
        .iter()
        .filter(|c| !c.estimate.flags.is_degenerate() && c.crb_sigma.is_finite())
        .collect();
    let n = informative.len() as f64;
    let mean = |f: &dyn Fn(&Comparison) -> f64| informative.iter().map(|c| f(c)).sum::<f64>() / n;
    let rmse_rad = mean(&|c| (c.estimate.phi_mean - c.truth.phi).powi(2)).sqrt();
    let mean_crb_sigma_rad = mean(&|c| c.crb_sigma);
    let coverage_2sigma = mean(&|c| {
        f64::from((c.estimate.phi_mean - c.truth.phi).abs() <= 2.0 * c.estimate.phi_std)
    });

    let cycle = run.probe.cycle_s;
    let true_crossing_s = zero_crossing_time(&run.reaction).ok();
    let estimates: Vec<ProbeEstimate> = comparison.iter().map(|c| c.estimate).collect();
    let estimated_crossing_s = estimated_crossing(&estimates);
    Report {
        seed: run.probe.seed,
        phi_ref_rad: calibration.phi_ref,
        phi_ref_std_rad: calibration.phi_std,
        cycles: comparison.len(),
        cycles_dropped: n_cycles.saturating_sub(comparison.len()),
        rmse_rad,
        mean_crb_sigma_rad,
        rmse_over_crb: rmse_rad / mean_crb_sigma_rad,
        coverage_2sigma,
        true_crossing_s,
        true_crossing_cycle: true_crossing_s.map(|t| t / cycle),
        estimated_crossing_s,
        estimated_crossing_cycle: estimated_crossing_s.map(|t| t / cycle),
        crossing_error_cycles: true_crossing_s
            .zip(estimated_crossing_s)
            .map(|(a, b)| (b - a) / cycle),
    }
}

/// Run every stage in memory.
pub fn execute(run: &Run) -> Result<PipelineOutput> {
    let settings = &run.probe.settings;
    let water = water_run(
        &run.probe,
        run.calibration_visibility,
        run.calibration_cycles,
        run.probe.instrument_phase,
    )
    .map_err(|e| e.in_stage("water run"))?;
    let calibration = calibrate(&water, settings, &run.grid).map_err(|e| e.in_stage("calibration"))?;

    let sim = simulate_run(&run.reaction, &run.probe, &run.drift, run.duration)
        .map_err(|e| e.in_stage("simulation"))?;
    let tracked = track(&sim.records, calibration.phi_ref, settings, &run.grid)
        .map_err(|e| e.in_stage("estimation"))?;

    let step = run.output.kinetics_step_s.unwrap_or(run.probe.cycle_s);
    let kinetics = trajectory(&run.reaction, run.duration, step).map_err(|e| e.in_stage("kinetics"))?;

    let comparison = compare(run, &tracked.estimates, &sim.truth).map_err(|e| e.in_stage("report"))?;
    let report = report(run, &calibration, &comparison, sim.truth.len());
    Ok(PipelineOutput {
        water,
        calibration,
        records: sim.records,
        truth: sim.truth,
        estimates: tracked.estimates,
        warnings: tracked.warnings,
        kinetics,
        comparison,
        report,
    })
}

/// Run every stage and write all artifacts into `out_dir`.
pub fn run_to_dir(run: &Run, out_dir: &Path) -> Result<PipelineOutput> {
    let out = execute(run)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e).in_stage("output"))?;
    let o = &run.output;
    let write = || -> Result<()> {
        io::write_records(&out_dir.join(&o.water), &out.water)?;
        io::write_records(&out_dir.join(&o.records), &out.records)?;
        io::write_truth(&out_dir.join(&o.truth), &out.truth)?;
        io::write_estimates(&out_dir.join(&o.estimates), &out.estimates)?;
        io::write_kinetics(&out_dir.join(&o.kinetics), &out.kinetics)?;
        io::write_json(&out_dir.join(&o.report), &out.report)
    };
    write().map_err(|e| e.in_stage("output"))?;
    Ok(out)
}
