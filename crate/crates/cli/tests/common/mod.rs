#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn asset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulefilter")).args(args).env_remove("RULEFILTER_LOG").output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A filter config small enough for quick end-to-end runs.
pub fn small_filter(dir: &Path) -> PathBuf {
    let path = dir.join("filter.json");
    fs::write(&path, r#"{"particles": 200, "dt": 10.0, "measurement_std": 50.0, "tau": {"fixed": 0.5}, "mode": "field"}"#)
        .unwrap();
    path
}

/// A scaled-down corridor scenario.
pub fn small_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(
        &path,
        r#"{
  "seed": 3,
  "starmap": {"rows": 30, "cols": 30, "samples": 20},
  "agent": {"steps": 40},
  "filter": {"particles": 200, "dt": 10.0},
  "seeds": 2,
  "taus": [1.0],
  "calibration": {"tracks": 2, "tau_grid": [0.0, 1.0]}
}"#,
    )
    .unwrap();
    path
}

/// Runs every subcommand into `out` and returns the files they wrote.
pub fn pipeline(out: &Path, seed: u64) -> Vec<PathBuf> {
    fs::create_dir_all(out).unwrap();
    let seed = seed.to_string();
    let starmap = out.join("starmap.json");
    let pgm = out.join("pgm");
    let tracks = out.join("tracks.json");
    let field = out.join("field.json");
    let field_pgm = out.join("field.pgm");
    let filter = small_filter(out);
    let scenario = small_scenario(out);
    let (track_dir, cal_dir, bench_dir) = (out.join("track"), out.join("calibrate"), out.join("bench"));
    let (map, perturb, marine, vessel, ais) =
        (asset("harbor.geojson"), asset("perturb.json"), asset("marine.cst"), asset("vessel.cst"), asset("ais_sample.csv"));

    run_ok(&[
        "--seed", &seed, "build-starmap", "--map", p(&map), "--perturb", p(&perturb), "--rows", "30", "--cols", "30",
        "--samples", "12", "--out", p(&starmap), "--pgm-dir", p(&pgm),
    ]);
    run_ok(&["--seed", &seed, "ingest", "--csv", p(&ais), "--out", p(&tracks)]);
    let cst = ["--constitution", p(&marine), "--include", p(&vessel), "--starmap", p(&starmap)];
    let mut args = vec!["--seed", &seed, "field"];
    args.extend(cst);
    args.extend(["--out", p(&field), "--pgm", p(&field_pgm)]);
    run_ok(&args);
    let mut args = vec!["--seed", &seed, "track", "--tracks", p(&tracks)];
    args.extend(cst);
    args.extend(["--config", p(&filter), "--field", p(&field), "--out-dir", p(&track_dir)]);
    run_ok(&args);
    let mut args = vec!["--seed", &seed, "calibrate", "--tracks", p(&tracks)];
    args.extend(cst);
    args.extend(["--config", p(&filter), "--field", p(&field), "--tau-grid", "0,0.5,1", "--out-dir", p(&cal_dir)]);
    run_ok(&args);
    run_ok(&["--seed", &seed, "bench", "--scenario", p(&scenario), "--out-dir", p(&bench_dir)]);

    let mut files = Vec::new();
    collect(out, &mut files);
    files.sort();
    files
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            collect(&path, out);
        } else {
            out.push(path);
        }
    }
}

/// Whether two pipeline runs wrote the same set of byte-identical files.
pub fn same_outputs(a_root: &Path, a: &[PathBuf], b_root: &Path, b: &[PathBuf]) -> Result<usize, String> {
    let rel = |root: &Path, v: &[PathBuf]| v.iter().map(|f| f.strip_prefix(root).unwrap().to_path_buf()).collect::<Vec<_>>();
    let (ra, rb) = (rel(a_root, a), rel(b_root, b));
    if ra != rb {
        return Err(format!("file sets differ: {ra:?} vs {rb:?}"));
    }
    for r in &ra {
        if fs::read(a_root.join(r)).unwrap() != fs::read(b_root.join(r)).unwrap() {
            return Err(format!("{} differs between reruns", r.display()));
        }
    }
    Ok(ra.len())
}
