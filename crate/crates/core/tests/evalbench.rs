use proptest::prelude::*;

use rulefilter::constitution::ConstitutionField;
use rulefilter::evalbench::{
    mae, run_ablation, simulate_agent, ComplianceMode, Dynamics, Scenario, ScenarioSpec, StarMapSpec,
};
use rulefilter::filter::{run_filter, FilterConfig, Measurement, State};
use rulefilter::{seed, BBox, GridSpec, Point2};

fn small_spec() -> ScenarioSpec {
    ScenarioSpec {
        starmap: StarMapSpec { rows: 40, cols: 40, samples: 30, ..StarMapSpec::default() },
        filter: FilterConfig { particles: 300, dt: 10.0, ..FilterConfig::default() },
        seeds: 4,
        calibration: None,
        ..ScenarioSpec::default()
    }
}

/// 1 on cell centers with |y| <= 40 and 0 elsewhere; centers sit every 10 m
/// in y, so the interpolated field is 1 for |y| <= 40 and 0 for |y| >= 50.
fn corridor_field() -> ConstitutionField {
    let grid = GridSpec::new(BBox::new(-505.0, -505.0, 10_505.0, 505.0), 101, 551);
    ConstitutionField::from_fn(grid, |p| if p.y.abs() <= 40.0 + 1e-6 { 1.0 } else { 0.0 })
}

/// Where the field is positive.
fn in_support(p: Point2) -> bool {
    p.y.abs() < 50.0
}

/// Where the field is exactly one.
fn in_core(p: Point2) -> bool {
    p.y.abs() <= 40.0
}

const AGENT: Dynamics = Dynamics { dt: 10.0, sigma_a: 0.01, damping: 0.05 };

#[test]
fn compliant_agents_stay_in_the_corridor() {
    let field = corridor_field();
    for i in 0..10 {
        let start = State::new(Point2::ZERO, Point2::new(5.0, 0.0));
        let truth = simulate_agent(&field, start, 150, AGENT, ComplianceMode::Compliant, &mut seed::rng(i)).unwrap();
        assert_eq!(truth.len(), 151);
        assert!(truth.iter().all(|s| in_support(s.p)), "agent {i} left the corridor");
    }
}

#[test]
fn incompliant_agents_leave_the_corridor() {
    let field = corridor_field();
    for i in 0..10 {
        let start = State::new(Point2::new(0.0, 30.0), Point2::new(5.0, 2.0));
        let truth = simulate_agent(&field, start, 50, AGENT, ComplianceMode::Incompliant, &mut seed::rng(i)).unwrap();
        assert!(truth.iter().skip(1).all(|s| !in_core(s.p)), "agent {i} re-entered the corridor");
        assert!(!in_support(truth.last().unwrap().p));
    }
}

#[test]
fn an_unreachable_acceptance_region_is_reported_as_stuck() {
    let grid = GridSpec::new(BBox::new(-100.0, -100.0, 100.0, 100.0), 4, 4);
    let field = ConstitutionField::constant(grid, 0.0);
    let start = State::new(Point2::ZERO, Point2::ZERO);
    let dynamics = Dynamics { dt: 1.0, sigma_a: 0.1, damping: 0.0 };
    assert!(simulate_agent(&field, start, 5, dynamics, ComplianceMode::Compliant, &mut seed::rng(1)).is_err());
}

#[test]
fn zero_trust_arm_equals_the_baseline_bit_for_bit() {
    let scenario = Scenario::build(&small_spec()).unwrap();
    let report = run_ablation(&scenario, &[0.0, 1.0], 4).unwrap();
    for row in &report.rows {
        let b = row.baseline_mae.unwrap();
        assert_eq!(row.cofi_mae[0].unwrap().to_bits(), b.to_bits());
        assert_eq!(row.relative_mae[0], Some(1.0));
        assert!(row.cofi_mae[1].unwrap() >= 0.0);
    }
    assert_eq!(report.to_csv().lines().count(), 1 + 4 * 2);
}

#[test]
fn ablation_reports_are_reproducible() {
    let scenario = Scenario::build(&small_spec()).unwrap();
    let a = run_ablation(&scenario, &[0.5], 3).unwrap();
    let b = run_ablation(&Scenario::build(&small_spec()).unwrap(), &[0.5], 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn noise_free_measurements_give_matching_arms() {
    let spec = ScenarioSpec {
        filter: FilterConfig { particles: 2000, measurement_std: 1.0, ..small_spec().filter },
        ..small_spec()
    };
    let scenario = Scenario::build(&spec).unwrap();
    let (mut base_sum, mut cofi_sum) = (0.0, 0.0);
    for i in 0..8 {
        let truth = scenario.ground_truth("noise-free", i).unwrap();
        let z: Vec<Measurement> = truth.iter().map(|s| Measurement { t: s.t, z: s.p }).collect();
        let tp: Vec<Point2> = truth.iter().map(|s| s.p).collect();
        let fseed = seed::derive(9, "noise-free", i);
        let base = mae(&run_filter(&spec.filter, &z, None, 0.0, fseed).unwrap().positions(), &tp);
        let cofi = mae(&run_filter(&spec.filter, &z, Some(scenario.evaluator()), 1.0, fseed).unwrap().positions(), &tp);
        assert!(base < 1.0 && cofi < 1.0, "seed {i}: {base} / {cofi}");
        base_sum += base;
        cofi_sum += cofi;
    }
    let relative = cofi_sum / base_sum;
    assert!((relative - 1.0).abs() <= 0.05, "relative MAE {relative}");
}

#[test]
fn mae_examples() {
    let a: Vec<Point2> = (0..10).map(|i| Point2::new(i as f64, -(i as f64))).collect();
    assert_eq!(mae(&a, &a), 0.0);
    let shifted: Vec<Point2> = a.iter().map(|p| Point2::new(p.x, p.y + 3.0)).collect();
    assert!((mae(&shifted, &a) - 3.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn mae_matches_two_pass_oracle(
        pairs in prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64, -1e4..1e4f64, -1e4..1e4f64), 1..200),
    ) {
        let est: Vec<Point2> = pairs.iter().map(|p| Point2::new(p.0, p.1)).collect();
        let truth: Vec<Point2> = pairs.iter().map(|p| Point2::new(p.2, p.3)).collect();
        let dists: Vec<f64> = pairs.iter().map(|p| ((p.0 - p.2).powi(2) + (p.1 - p.3).powi(2)).sqrt()).collect();
        let oracle = dists.iter().sum::<f64>() / dists.len() as f64;
        let got = mae(&est, &truth);
        prop_assert!(got >= 0.0);
        prop_assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }
}
