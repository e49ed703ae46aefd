mod common;

use std::fs;

use common::{asset, p, pipeline, run, run_ok, same_outputs, small_filter};

#[test]
fn every_subcommand_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let fa = pipeline(&a, 5);
    let fb = pipeline(&b, 5);
    let n = same_outputs(&a, &fa, &b, &fb).unwrap();
    assert!(n >= 20, "only {n} files");
    for name in ["track/summary.json", "calibrate/trust_table.json", "calibrate/tau_histogram.csv", "bench/per_seed.csv"] {
        assert!(a.join(name).exists(), "{name} missing");
    }
}

#[test]
fn a_different_master_seed_changes_random_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let starmap = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        run_ok(&[
            "--seed", seed, "build-starmap", "--map", p(&asset("harbor.geojson")), "--perturb", p(&asset("perturb.json")),
            "--rows", "10", "--cols", "10", "--samples", "5", "--out", p(&out),
        ]);
        fs::read(out).unwrap()
    };
    assert_ne!(starmap("a.json", "1"), starmap("b.json", "2"));
}

#[test]
fn malformed_geojson_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.geojson");
    fs::write(&bad, r#"{"type": "FeatureCollection", "features": [{"type": "Feature""#).unwrap();
    let out = run(&["build-starmap", "--map", p(&bad), "--perturb", p(&asset("perturb.json")), "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GeoJSON"));
}

#[test]
fn missing_input_and_bad_flags_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.geojson");
    let out = run(&["build-starmap", "--map", p(&missing), "--perturb", p(&asset("perturb.json")), "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["track", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

fn starmap(dir: &std::path::Path) -> std::path::PathBuf {
    let out = dir.join("starmap.json");
    run_ok(&[
        "build-starmap", "--map", p(&asset("harbor.geojson")), "--perturb", p(&asset("perturb.json")), "--rows", "20",
        "--cols", "20", "--samples", "8", "--out", p(&out),
    ]);
    out
}

#[test]
fn constant_constitution_gives_an_all_ones_field() {
    let dir = tempfile::tempdir().unwrap();
    let sm = starmap(dir.path());
    let cst = dir.path().join("one.cst");
    fs::write(&cst, "constitution(X, Z).\n").unwrap();
    let out = dir.path().join("field.json");
    run_ok(&["field", "--constitution", p(&cst), "--starmap", p(&sm), "--out", p(&out)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 400);
    assert!(values.iter().all(|x| x.as_f64() == Some(1.0)));
}

#[test]
fn field_values_are_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let sm = starmap(dir.path());
    let out = dir.path().join("field.json");
    run_ok(&[
        "field", "--constitution", p(&asset("marine.cst")), "--include", p(&asset("vessel.cst")), "--starmap", p(&sm),
        "--out", p(&out),
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    for x in v["values"].as_array().unwrap().iter().filter_map(|x| x.as_f64()) {
        assert!((0.0..=1.0).contains(&x));
    }
}

#[test]
fn a_missing_layer_names_the_atom() {
    let dir = tempfile::tempdir().unwrap();
    let sm = starmap(dir.path());
    let cst = dir.path().join("reef.cst");
    fs::write(&cst, "constitution(X, Z) :- over(X, reef).\n").unwrap();
    let out = run(&["field", "--constitution", p(&cst), "--starmap", p(&sm), "--out", p(&dir.path().join("f.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("over(X, reef)"));
}

#[test]
fn bad_filter_config_and_empty_tracks_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sm = starmap(dir.path());
    let tracks = dir.path().join("tracks.json");
    run_ok(&["ingest", "--csv", p(&asset("ais_sample.csv")), "--out", p(&tracks)]);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"particles": 0}"#).unwrap();
    let (marine, t_out, c_out) = (asset("marine.cst"), dir.path().join("t"), dir.path().join("c"));
    let base = ["--constitution", p(&marine), "--starmap", p(&sm)];
    let mut args = vec!["track", "--tracks", p(&tracks)];
    args.extend(base);
    args.extend(["--config", p(&cfg), "--out-dir", p(&t_out)]);
    assert_eq!(run(&args).status.code(), Some(2));

    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"projection": null, "tracks": []}"#).unwrap();
    let mut args = vec!["calibrate", "--tracks", p(&empty)];
    args.extend(base);
    args.extend(["--out-dir", p(&c_out)]);
    assert_eq!(run(&args).status.code(), Some(2));
}

/// Estimates and MAEs of a `track` run.
fn track_outputs(dir: &std::path::Path) -> (Vec<serde_json::Value>, Vec<Option<f64>>) {
    let summary: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let mut estimates = Vec::new();
    for s in &summary {
        let Some(name) = s["log"].as_str() else {
            estimates.push(s["error"].clone());
            continue;
        };
        let log = fs::read_to_string(dir.join(name)).unwrap();
        for line in log.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            estimates.push(v["estimate"].clone());
        }
    }
    (estimates, summary.iter().map(|s| s["mae_m"].as_f64()).collect())
}

#[test]
fn zero_trust_matches_the_plain_filter() {
    let dir = tempfile::tempdir().unwrap();
    let sm = starmap(dir.path());
    let tracks = dir.path().join("tracks.json");
    run_ok(&["ingest", "--csv", p(&asset("ais_sample.csv")), "--out", p(&tracks)]);
    let cfg = small_filter(dir.path());
    let (marine, vessel) = (asset("marine.cst"), asset("vessel.cst"));
    let cst = ["--constitution", p(&marine), "--include", p(&vessel), "--starmap", p(&sm)];
    let (zero, plain, half) = (dir.path().join("zero"), dir.path().join("plain"), dir.path().join("half"));
    for (out, extra) in [(&zero, vec!["--tau", "0"]), (&plain, vec!["--no-constitution"]), (&half, vec!["--tau", "0.5"])] {
        let mut args = vec!["--seed", "4", "track", "--tracks", p(&tracks)];
        args.extend(cst);
        args.extend(["--config", p(&cfg), "--out-dir", p(out)]);
        args.extend(extra);
        run_ok(&args);
    }
    let (a, b, c) = (track_outputs(&zero), track_outputs(&plain), track_outputs(&half));
    assert!(!a.0.is_empty());
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}
