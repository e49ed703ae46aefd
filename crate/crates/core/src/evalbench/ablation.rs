use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::filter::{run_filter, ConstitutionEvaluator, FilterConfig, Measurement};
use crate::geometry::Point2;
use crate::ingest::TrackSample;
use crate::trust::{calibrate, CalibrationReport, CalibrationTrack, TrustFeatures};
use crate::{par, seed, Error};

use super::metric::{mae, summarize, Summary};
use super::scenario::Scenario;

/// Bucket used for every synthetic agent.
pub fn synthetic_bucket() -> TrustFeatures {
    TrustFeatures::new("synthetic", true, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub index: usize,
    pub seed: u64,
    pub compliant: bool,
    pub baseline_mae: Option<f64>,
    /// MAE of each arm, in the order of [`MetricReport::taus`].
    pub cofi_mae: Vec<Option<f64>>,
    /// `MAE_CoFi / MAE_baseline` per arm.
    pub relative_mae: Vec<Option<f64>>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub tau: f64,
    pub mae: Summary,
    pub relative_mae: Summary,
}

/// Relative MAE is the ratio `MAE_CoFi / MAE_baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub taus: Vec<f64>,
    pub calibrated_tau: Option<f64>,
    pub baseline: Summary,
    pub arms: Vec<ArmSummary>,
    pub rows: Vec<SeedRow>,
    pub calibration: Option<CalibrationReport>,
}

impl MetricReport {
    /// Per-seed rows: one line per (seed, arm).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed_index,seed,compliant,tau,baseline_mae,cofi_mae,relative_mae\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            for (k, &tau) in self.taus.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.index,
                    r.seed,
                    r.compliant,
                    tau,
                    f(r.baseline_mae),
                    f(r.cofi_mae[k]),
                    f(r.relative_mae[k])
                );
            }
        }
        s
    }

    pub fn arm(&self, tau: f64) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.tau == tau)
    }
}

fn positions(t: &[TrackSample]) -> Vec<Point2> {
    t.iter().map(|s| s.p).collect()
}

fn run_mae(
    cfg: &FilterConfig,
    z: &[Measurement],
    truth: &[Point2],
    ev: Option<&dyn ConstitutionEvaluator>,
    tau: f64,
    seed: u64,
) -> Result<f64, String> {
    run_filter(cfg, z, ev, tau, seed).map(|r| mae(&r.positions(), truth)).map_err(|e| e.to_string())
}

/// Calibrates τ on `n` training agents drawn from the scenario.
pub fn calibrate_scenario(scenario: &Scenario, n: usize, tau_grid: &[f64]) -> Result<(f64, CalibrationReport), Error> {
    let tracks = (0..n as u64)
        .map(|i| {
            let (truth, measurements) = scenario.agent("calibration", i)?;
            Ok(CalibrationTrack { id: format!("calibration-{i}"), features: synthetic_bucket(), truth: positions(&truth), measurements })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let (table, report) = calibrate(
        &tracks,
        &scenario.spec.filter,
        scenario.evaluator(),
        tau_grid,
        seed::derive(scenario.spec.seed, "calibration-filter", 0),
    )?;
    Ok((table.lookup(&synthetic_bucket()), report))
}

/// Baseline versus CoFi arms over `n_seeds` evaluation agents.
///
/// Every arm of a seed consumes the same measurements and the same filter
/// seed, so the initial particle clouds are identical.
pub fn run_ablation(scenario: &Scenario, taus: &[f64], n_seeds: usize) -> Result<MetricReport, Error> {
    if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("taus must lie in [0, 1]".into()));
    }
    let cfg = &scenario.spec.filter;
    let ev = scenario.evaluator();
    let agents = (0..n_seeds as u64).map(|i| scenario.agent("evaluation", i)).collect::<Result<Vec<_>, Error>>()?;
    let jobs: Vec<(usize, Option<usize>)> =
        (0..n_seeds).flat_map(|i| std::iter::once((i, None)).chain((0..taus.len()).map(move |k| (i, Some(k))))).collect();
    let results = par::map_slice(&jobs, |&(i, arm)| {
        let (truth, z) = &agents[i];
        let fseed = seed::derive(scenario.spec.seed, "evaluation-filter", i as u64);
        match arm {
            None => run_mae(cfg, z, &positions(truth), None, 0.0, fseed),
            Some(k) => run_mae(cfg, z, &positions(truth), Some(ev), taus[k], fseed),
        }
    });
    let per = taus.len() + 1;
    let rows: Vec<SeedRow> = (0..n_seeds)
        .map(|i| {
            let r = &results[i * per..(i + 1) * per];
            let errors = r.iter().filter_map(|x| x.as_ref().err().cloned()).collect();
            let baseline_mae = r[0].as_ref().ok().copied();
            let cofi_mae: Vec<Option<f64>> = r[1..].iter().map(|x| x.as_ref().ok().copied()).collect();
            let relative_mae = cofi_mae
                .iter()
                .map(|c| match (c, baseline_mae) {
                    (Some(c), Some(b)) if b > 0.0 => Some(c / b),
                    _ => None,
                })
                .collect();
            SeedRow {
                index: i,
                seed: seed::derive(scenario.spec.seed, "evaluation-filter", i as u64),
                compliant: scenario.is_compliant("evaluation", i as u64),
                baseline_mae,
                cofi_mae,
                relative_mae,
                errors,
            }
        })
        .collect();
    let col = |f: &dyn Fn(&SeedRow) -> Option<f64>| rows.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect::<Vec<_>>();
    let baseline = summarize(&col(&|r| r.baseline_mae));
    let arms = taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| ArmSummary {
            tau,
            mae: summarize(&col(&|r| r.cofi_mae[k])),
            relative_mae: summarize(&col(&|r| r.relative_mae[k])),
        })
        .collect();
    Ok(MetricReport { taus: taus.to_vec(), calibrated_tau: None, baseline, arms, rows, calibration: None })
}

/// Full benchmark: optional calibration, then the ablation over the fixed
/// taus plus the calibrated one.
pub fn run_benchmark(scenario: &Scenario) -> Result<MetricReport, Error> {
    let spec = &scenario.spec;
    let mut taus = spec.taus.clone();
    let mut calibrated = None;
    if let Some(cal) = &spec.calibration {
        let (tau, report) = calibrate_scenario(scenario, cal.tracks, &cal.tau_grid)?;
        if !taus.contains(&tau) {
            taus.push(tau);
        }
        calibrated = Some((tau, report));
    }
    let mut report = run_ablation(scenario, &taus, spec.seeds)?;
    if let Some((tau, cal)) = calibrated {
        report.calibrated_tau = Some(tau);
        report.calibration = Some(cal);
    }
    Ok(report)
}
