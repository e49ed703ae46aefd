use proptest::prelude::*;
use rand::Rng;

use rulefilter::geo_map::{
    build_starmap, eval_relation, estimate_moments, FeaturePerturbation, MapBuilder, PerturbationSet, RelationKind,
    StarMap, StarMapLayer, VectorMap,
};
use rulefilter::{seed, BBox, GridSpec, Point2};

fn harbor() -> VectorMap {
    let mut b = MapBuilder::new();
    let square = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1000.0, 0.0),
        Point2::new(1000.0, 1000.0),
        Point2::new(0.0, 1000.0),
    ];
    b.add_polygon(&[square], &["water"]);
    b.add_polyline(&[Point2::new(200.0, 300.0), Point2::new(700.0, 650.0)], &["pier"]);
    for (i, x) in [100.0, 400.0, 700.0, 900.0].into_iter().enumerate() {
        for (j, y) in [150.0, 500.0, 850.0].into_iter().enumerate() {
            b.add_point(Point2::new(x, y), &["sounding"], Some(5.0 + (i * 3 + j) as f64));
        }
    }
    b.build().unwrap()
}

fn layers() -> Vec<(RelationKind, String)> {
    vec![
        (RelationKind::Over, "water".into()),
        (RelationKind::Distance, "pier".into()),
        (RelationKind::Depth, "sounding".into()),
    ]
}

#[test]
fn zero_spread_reproduces_the_map_exactly() {
    let map = harbor();
    let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::identity()).unwrap();
    let grid = GridSpec::new(BBox::new(-100.0, -100.0, 1100.0, 1100.0), 12, 12);
    let sm = build_starmap(&map, &perturb, &layers(), grid, 8, 3).unwrap();
    for layer in &sm.layers {
        for idx in 0..grid.len() {
            let m = layer.cell(idx).unwrap();
            let base = eval_relation(&map, layer.relation, grid.center_of(idx), &layer.tag).unwrap().as_f64();
            assert_eq!(m.std, 0.0, "{}({}) cell {idx}", layer.relation, layer.tag);
            assert!((m.mean - base).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }
}

#[test]
fn translated_line_has_gaussian_distance_moments() {
    let mut b = MapBuilder::new();
    b.add_polyline(&[Point2::new(-1.0e6, 0.0), Point2::new(1.0e6, 0.0)], &["line"]);
    let map = b.build().unwrap();
    let sigma = 10.0;
    let d = 500.0;
    let n = 10_000;
    let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(sigma)).unwrap();
    let m = estimate_moments(&map, &perturb, RelationKind::Distance, "line", Point2::new(0.0, d), n, 11).unwrap();
    let tol = 3.0 * sigma / (n as f64).sqrt();
    assert!((m.mean - d).abs() < tol, "mean {} vs {d}", m.mean);
    assert!((m.std - sigma).abs() < tol, "std {} vs {sigma}", m.std);
}

#[test]
fn mean_distance_stays_within_expected_displacement() {
    // distance is 1-Lipschitz in each vertex, so E|d' - d| <= E|t| = sigma * sqrt(pi / 2)
    let map = harbor();
    let sigma = 25.0;
    let n = 400;
    let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(sigma)).unwrap();
    let grid = GridSpec::new(BBox::new(0.0, 0.0, 1000.0, 1000.0), 8, 8);
    let sm = build_starmap(&map, &perturb, &[(RelationKind::Distance, "pier".into())], grid, n, 5).unwrap();
    let bound = sigma * (std::f64::consts::PI / 2.0).sqrt();
    let slack = 4.0 * sigma / (n as f64).sqrt();
    for idx in 0..grid.len() {
        let base = eval_relation(&map, RelationKind::Distance, grid.center_of(idx), "pier").unwrap().as_f64();
        let mean = sm.layers[0].cell(idx).unwrap().mean;
        assert!((mean - base).abs() <= bound + slack, "cell {idx}: {mean} vs {base}");
    }
}

#[test]
fn deep_inside_a_polygon_is_almost_surely_over() {
    let map = harbor();
    let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(10.0)).unwrap();
    let grid = GridSpec::new(BBox::new(-200.0, -200.0, 1200.0, 1200.0), 28, 28);
    let sm = build_starmap(&map, &perturb, &[(RelationKind::Over, "water".into())], grid, 200, 9).unwrap();
    let layer = &sm.layers[0];
    for idx in 0..grid.len() {
        let p = grid.center_of(idx);
        let margin = p.x.min(p.y).min(1000.0 - p.x).min(1000.0 - p.y);
        let m = layer.cell(idx).unwrap();
        assert!((0.0..=1.0).contains(&m.mean));
        if margin > 50.0 {
            assert!(m.mean >= 0.99, "cell at {p:?} has mean {}", m.mean);
        }
        if margin < -50.0 {
            assert!(m.mean <= 0.01, "cell at {p:?} has mean {}", m.mean);
        }
    }
}

#[test]
fn builds_are_reproducible_and_survive_serialisation() {
    let map = harbor();
    let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(15.0)).unwrap();
    let grid = GridSpec::new(BBox::new(0.0, 0.0, 1000.0, 1000.0), 10, 10);
    let a = build_starmap(&map, &perturb, &layers(), grid, 30, 21).unwrap();
    let b = build_starmap(&map, &perturb, &layers(), grid, 30, 21).unwrap();
    assert_eq!(a, b);
    let json = a.to_json().unwrap();
    assert_eq!(json, b.to_json().unwrap());
    let back = StarMap::from_json(&json).unwrap();
    assert_eq!(back.to_json().unwrap(), json);
    let c = build_starmap(&map, &perturb, &layers(), grid, 30, 22).unwrap();
    assert_ne!(a, c);
}

#[test]
fn grid_cells_agree_with_direct_estimates() {
    let map = harbor();
    let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(15.0)).unwrap();
    let grid = GridSpec::new(BBox::new(0.0, 0.0, 1000.0, 1000.0), 5, 5);
    let sm = build_starmap(&map, &perturb, &layers(), grid, 40, 8).unwrap();
    for layer in &sm.layers {
        for idx in [0, 7, 12, 24] {
            let direct = estimate_moments(&map, &perturb, layer.relation, &layer.tag, grid.center_of(idx), 40, 8).unwrap();
            assert_eq!(layer.cell(idx).unwrap(), direct);
        }
    }
}

fn random_layer(seed_value: u64, rows: usize, cols: usize) -> StarMapLayer {
    let mut rng = seed::rng(seed_value);
    let grid = GridSpec::new(BBox::new(-50.0, 20.0, 250.0, 170.0), rows, cols);
    StarMapLayer {
        relation: RelationKind::Distance,
        tag: "x".into(),
        grid,
        sample_count: 2,
        mean: (0..grid.len()).map(|_| rng.random_range(0.0..100.0)).collect(),
        std: (0..grid.len()).map(|_| rng.random_range(0.0..10.0)).collect(),
        flags: vec![None; grid.len()],
    }
}

/// Bilinear interpolation written directly from the four surrounding cell centers.
fn bilinear_oracle(layer: &StarMapLayer, values: &[f64], p: Point2) -> f64 {
    let g = &layer.grid;
    let cx = |c: usize| g.bbox.min_x + (c as f64 + 0.5) * g.cell_width();
    let cy = |r: usize| g.bbox.min_y + (r as f64 + 0.5) * g.cell_height();
    let x = p.x.clamp(cx(0), cx(g.cols - 1));
    let y = p.y.clamp(cy(0), cy(g.rows - 1));
    let c0 = (0..g.cols - 1).rev().find(|&c| cx(c) <= x).unwrap_or(0);
    let r0 = (0..g.rows - 1).rev().find(|&r| cy(r) <= y).unwrap_or(0);
    let tx = (x - cx(c0)) / (cx(c0 + 1) - cx(c0));
    let ty = (y - cy(r0)) / (cy(r0 + 1) - cy(r0));
    let v = |r: usize, c: usize| values[r * g.cols + c];
    let bottom = v(r0, c0) * (1.0 - tx) + v(r0, c0 + 1) * tx;
    let top = v(r0 + 1, c0) * (1.0 - tx) + v(r0 + 1, c0 + 1) * tx;
    bottom * (1.0 - ty) + top * ty
}

proptest! {
    #[test]
    fn interpolation_matches_bilinear_oracle(
        s in any::<u64>(),
        rows in 2usize..9,
        cols in 2usize..9,
        u in 0.0..=1.0f64,
        v in 0.0..=1.0f64,
    ) {
        let layer = random_layer(s, rows, cols);
        let b = layer.grid.bbox;
        let p = Point2::new(b.min_x + u * b.width(), b.min_y + v * b.height());
        let m = layer.interpolate(p).unwrap();
        prop_assert!((m.mean - bilinear_oracle(&layer, &layer.mean, p)).abs() < 1e-9);
        prop_assert!((m.std - bilinear_oracle(&layer, &layer.std, p)).abs() < 1e-9);
    }

    #[test]
    fn interpolation_is_exact_at_cell_centers(s in any::<u64>(), rows in 2usize..9, cols in 2usize..9) {
        let layer = random_layer(s, rows, cols);
        for idx in 0..layer.grid.len() {
            let m = layer.interpolate(layer.grid.center_of(idx)).unwrap();
            prop_assert!((m.mean - layer.mean[idx]).abs() < 1e-9);
            prop_assert!((m.std - layer.std[idx]).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// With shared variants each sample is 1-Lipschitz in the query point, so the mean is too
    /// and the standard deviation moves by at most sqrt(N / (N - 1)) times the step.
    #[test]
    fn distance_moments_are_lipschitz(s in 0u64..1000, sigma in 0.0..40.0f64) {
        let map = harbor();
        let n = 25;
        let perturb = PerturbationSet::uniform(&map, FeaturePerturbation::translation(sigma)).unwrap();
        let grid = GridSpec::new(BBox::new(-100.0, -100.0, 1100.0, 1100.0), 9, 9);
        let sm = build_starmap(&map, &perturb, &[(RelationKind::Distance, "pier".into())], grid, n, s).unwrap();
        let layer = &sm.layers[0];
        let k = (n as f64 / (n - 1) as f64).sqrt();
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                let step = grid.center_of(i).distance(grid.center_of(j));
                let (a, b) = (layer.cell(i).unwrap(), layer.cell(j).unwrap());
                prop_assert!((a.mean - b.mean).abs() <= step + 1e-9);
                prop_assert!((a.std - b.std).abs() <= k * step + 1e-9);
            }
        }
    }
}
