use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rulefilter::constitution::{parse, precompute_field, Constitution, ConstitutionField, MeasurementPolicy, Program};
use rulefilter::evalbench::{mae, measure, run_benchmark, Scenario, ScenarioSpec};
use rulefilter::filter::{run_filter, Measurement, MeasurementModel, ConstitutionEvaluator, ConstitutionMode, FilterConfig, TauSource};
use rulefilter::geo_map::{build_starmap, load_geojson, Coordinates, PerturbationConfig, RelationKind, StarMap};
use rulefilter::ingest::{read_ais_csv, resample_track, segment_tracks, projection_for, ColumnMap, TangentProjection, TrackSet};
use rulefilter::trust::{calibrate, default_tau_grid, extract_features, CalibrationTrack, TrustTable};
use rulefilter::ingest::Track;
use rulefilter::{seed, BBox, Error, GridSpec};

/// Tracking of rule-compliant agents with constitution-aware particle filters.
#[derive(Parser)]
#[command(name = "rulefilter", version, about)]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output (repeatable). RULEFILTER_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build StaR map layers from a GeoJSON map.
    BuildStarmap(BuildStarmapArgs),
    /// Tabulate the constitution probability over a grid.
    Field(FieldArgs),
    /// Run the filter over recorded tracks.
    Track(TrackArgs),
    /// Calibrate the trust ratio per trust-feature bucket.
    Calibrate(CalibrateArgs),
    /// Run the synthetic baseline-versus-constitution ablation.
    Bench(BenchArgs),
    /// Convert an AIS CSV file into resampled tracks.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Grid bounds `min_x,min_y,max_x,max_y` in meters.
    #[arg(long, value_parser = parse_bbox)]
    bbox: Option<BBox>,
    #[arg(long, default_value_t = 100)]
    rows: usize,
    #[arg(long, default_value_t = 100)]
    cols: usize,
}

#[derive(Args)]
struct BuildStarmapArgs {
    /// GeoJSON FeatureCollection.
    #[arg(long)]
    map: PathBuf,
    /// Perturbation config: tag pattern → spreads.
    #[arg(long)]
    perturb: PathBuf,
    /// Coordinates are meters in the local frame instead of lon/lat.
    #[arg(long)]
    meters: bool,
    /// Projection origin `lat,lon` for lon/lat input; defaults to the map center.
    #[arg(long, value_parser = parse_pair)]
    origin: Option<(f64, f64)>,
    /// Layers as `relation:tag`; defaults to over and distance for every tag
    /// plus depth for tags with soundings.
    #[arg(long = "layer", value_parser = parse_layer)]
    layers: Vec<(RelationKind, String)>,
    #[command(flatten)]
    grid: GridArgs,
    /// Number of map variants.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
    /// Directory for one PGM per layer mean.
    #[arg(long)]
    pgm_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConstitutionArgs {
    /// Constitution program (.cst).
    #[arg(long)]
    constitution: PathBuf,
    /// Additional programs appended to the constitution, e.g. perception facts.
    #[arg(long = "include")]
    includes: Vec<PathBuf>,
    /// StaR map JSON.
    #[arg(long)]
    starmap: PathBuf,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    constitution: ConstitutionArgs,
    /// Grid bounds; defaults to the StaR map grid.
    #[arg(long, value_parser = parse_bbox)]
    bbox: Option<BBox>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Fixed measurement location `x,y`; by default z equals the state.
    #[arg(long, value_parser = parse_pair)]
    measurement: Option<(f64, f64)>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Field,
}

#[derive(Args)]
struct FilterArgs {
    /// Filter config JSON; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the constitution mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Precomputed field JSON for field mode; computed on the StaR map grid otherwise.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Use the recorded positions as measurements instead of adding held-out noise.
    #[arg(long)]
    raw_measurements: bool,
}

#[derive(Args)]
struct TrackArgs {
    /// Track JSON as written by `ingest`.
    #[arg(long)]
    tracks: PathBuf,
    #[command(flatten)]
    constitution: ConstitutionArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Fixed trust ratio.
    #[arg(long, conflicts_with_all = ["trust_table", "no_constitution"])]
    tau: Option<f64>,
    /// Calibrated trust table.
    #[arg(long, conflicts_with = "no_constitution")]
    trust_table: Option<PathBuf>,
    /// Run the plain particle filter.
    #[arg(long)]
    no_constitution: bool,
    /// Output directory for step logs and the summary.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[command(flatten)]
    constitution: ConstitutionArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Comma-separated τ values; must contain 0.
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the number of evaluation seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// AIS CSV file.
    #[arg(long)]
    csv: PathBuf,
    /// Column mapping JSON; NOAA names by default.
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Gap (s) that starts a new track.
    #[arg(long, default_value_t = rulefilter::ingest::DEFAULT_GAP_S)]
    gap: f64,
    /// Resampling step (s).
    #[arg(long, default_value_t = rulefilter::ingest::DEFAULT_DT_S)]
    dt: f64,
    /// Projection origin `lat,lon`; defaults to the center of the records.
    #[arg(long, value_parser = parse_pair)]
    origin: Option<(f64, f64)>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got '{s}'")),
    }
}

fn parse_bbox(s: &str) -> Result<BBox, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v.as_slice() {
        [a, b, c, d] => Ok(BBox::new(*a, *b, *c, *d)),
        _ => Err(format!("expected min_x,min_y,max_x,max_y, got '{s}'")),
    }
}

fn parse_layer(s: &str) -> Result<(RelationKind, String), String> {
    let (rel, tag) = s.split_once(':').ok_or_else(|| format!("expected relation:tag, got '{s}'"))?;
    Ok((rel.parse().map_err(|e| format!("{e}"))?, tag.to_string()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())).into())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable output") + "\n"
}

fn load_program(args: &ConstitutionArgs) -> Result<(Program, Arc<StarMap>)> {
    let mut program = parse(&read(&args.constitution)?).map_err(|e| Error::from(e))
        .with_context(|| format!("in {}", args.constitution.display()))?;
    for inc in &args.includes {
        let extra = parse(&read(inc)?).map_err(Error::from).with_context(|| format!("in {}", inc.display()))?;
        program.extend(extra);
    }
    let starmap = StarMap::from_json(&read(&args.starmap)?).map_err(Error::from)?;
    Ok((program, Arc::new(starmap)))
}

fn cmd_build_starmap(a: &BuildStarmapArgs, master: u64) -> Result<()> {
    let coords = if a.meters {
        Coordinates::Meters
    } else {
        Coordinates::LonLat { origin: a.origin.map(|(lat, lon)| TangentProjection::new(lat, lon)) }
    };
    let loaded = load_geojson(&read(&a.map)?, coords).map_err(Error::from)?;
    let map = loaded.map;
    let perturb = PerturbationConfig::from_json(&read(&a.perturb)?).and_then(|c| c.resolve(&map)).map_err(Error::from)?;
    let layers = if a.layers.is_empty() {
        let mut l = Vec::new();
        for tag in map.tags() {
            l.push((RelationKind::Over, tag.to_string()));
            l.push((RelationKind::Distance, tag.to_string()));
            if map.has_soundings(tag) {
                l.push((RelationKind::Depth, tag.to_string()));
            }
        }
        l
    } else {
        a.layers.clone()
    };
    let bbox = match a.grid.bbox {
        Some(b) => b,
        None => map.bounds().ok_or_else(|| Error::Config("map has no vertices".into()))?,
    };
    let grid = GridSpec::new(bbox, a.grid.rows, a.grid.cols);
    let started = Instant::now();
    let sm = build_starmap(&map, &perturb, &layers, grid, a.samples, seed::derive(master, "starmap", 0)).map_err(Error::from)?;
    eprintln!("built {} layers on a {}x{} grid with N = {} in {:.2?}", sm.layers.len(), grid.rows, grid.cols, a.samples, started.elapsed());
    for l in &sm.layers {
        if l.flagged_count() > 0 {
            log::warn!("layer {}({}): {} flagged cells", l.relation, l.tag, l.flagged_count());
        }
    }
    write(&a.out, sm.to_json().map_err(Error::from)? + "\n")?;
    if let Some(dir) = &a.pgm_dir {
        for l in &sm.layers {
            let (lo, hi) = rulefilter::raster::finite_range(&l.mean);
            let mut buf = Vec::new();
            rulefilter::raster::write_pgm(&mut buf, &grid, &l.mean, lo, hi)?;
            write(&dir.join(format!("{}_{}.pgm", l.relation, l.tag)), buf)?;
        }
    }
    if let Some(p) = loaded.projection {
        log::info!("projection origin: lat {}, lon {}", p.lat0, p.lon0);
    }
    Ok(())
}

fn cmd_field(a: &FieldArgs) -> Result<()> {
    let (program, starmap) = load_program(&a.constitution)?;
    let base = starmap.grid;
    let grid = GridSpec::new(a.bbox.unwrap_or(base.bbox), a.rows.unwrap_or(base.rows), a.cols.unwrap_or(base.cols));
    let constitution = Constitution::new(&program, starmap).map_err(Error::from)?;
    let policy = match a.measurement {
        Some((x, y)) => MeasurementPolicy::Fixed { x, y },
        None => MeasurementPolicy::SameAsState,
    };
    let started = Instant::now();
    let field = precompute_field(&constitution, grid, policy).map_err(Error::from)?;
    eprintln!("evaluated {} cells in {:.2?}", grid.len(), started.elapsed());
    if field.values.iter().zip(&field.flags).any(|(v, f)| f.is_none() && !(0.0..=1.0).contains(v)) {
        return Err(Error::Internal("field value outside [0, 1]".into()).into());
    }
    if field.flagged_count() > 0 {
        log::warn!("{} of {} field cells are flagged", field.flagged_count(), grid.len());
    }
    write(&a.out, field.to_json().map_err(Error::from)? + "\n")?;
    if let Some(p) = &a.pgm {
        let mut buf = Vec::new();
        field.write_pgm(&mut buf)?;
        write(p, buf)?;
    }
    Ok(())
}

fn filter_config(f: &FilterArgs) -> Result<FilterConfig> {
    let mut cfg = match &f.config {
        Some(p) => FilterConfig::from_json(&read(p)?).map_err(Error::from)?,
        None => FilterConfig::default(),
    };
    if let Some(m) = f.mode {
        cfg.mode = match m {
            ModeArg::Direct => ConstitutionMode::Direct,
            ModeArg::Field => ConstitutionMode::Field,
        };
    }
    Ok(cfg)
}

/// The evaluator for the configured mode, owned so it outlives the borrow.
enum Evaluator {
    Direct(Constitution),
    Field(ConstitutionField),
}

impl Evaluator {
    fn build(cfg: &FilterConfig, f: &FilterArgs, program: &Program, starmap: Arc<StarMap>) -> Result<Self> {
        let constitution = Constitution::new(program, starmap.clone()).map_err(Error::from)?;
        Ok(match cfg.mode {
            ConstitutionMode::Direct => Evaluator::Direct(constitution),
            ConstitutionMode::Field => match &f.field {
                Some(p) => Evaluator::Field(ConstitutionField::from_json(&read(p)?).map_err(Error::from)?),
                None => Evaluator::Field(
                    precompute_field(&constitution, starmap.grid, MeasurementPolicy::SameAsState).map_err(Error::from)?,
                ),
            },
        })
    }

    fn as_dyn(&self) -> &dyn ConstitutionEvaluator {
        match self {
            Evaluator::Direct(c) => c,
            Evaluator::Field(f) => f,
        }
    }
}

fn load_tracks(path: &Path) -> Result<TrackSet> {
    let set = TrackSet::read(path).map_err(Error::from)?;
    if set.tracks.is_empty() {
        return Err(Error::Config(format!("{} contains no tracks", path.display())).into());
    }
    Ok(set)
}

#[derive(Serialize)]
struct TrackSummary {
    index: usize,
    vessel_id: String,
    features: String,
    tau: Option<f64>,
    steps: usize,
    mae_m: Option<f64>,
    error: Option<String>,
    log: Option<String>,
}

/// Measurements for a recorded track: the positions themselves, or the
/// positions with held-out noise drawn from the filter's measurement model.
fn track_measurements(track: &Track, raw: bool, model: &MeasurementModel, master: u64, index: usize) -> Vec<Measurement> {
    if raw {
        track.samples.iter().map(|s| Measurement { t: s.t, z: s.p }).collect()
    } else {
        measure(&track.samples, model, &mut seed::rng(seed::derive(master, "track-noise", index as u64)))
    }
}

fn cmd_track(a: &TrackArgs, master: u64) -> Result<()> {
    let cfg = filter_config(&a.filter)?;
    let set = load_tracks(&a.tracks)?;
    let (program, starmap) = load_program(&a.constitution)?;
    let evaluator = if a.no_constitution { None } else { Some(Evaluator::build(&cfg, &a.filter, &program, starmap)?) };
    let table = match (&a.trust_table, &cfg.tau) {
        (Some(p), _) | (None, TauSource::TrustTable(p)) if a.tau.is_none() => Some(TrustTable::from_json(&read(p)?)?),
        _ => None,
    };
    let meas_model = cfg.measurement_model().map_err(Error::from)?;
    let mut summaries = Vec::new();
    for (i, tr) in set.tracks.iter().enumerate() {
        let features = extract_features(tr);
        let tau = match (&evaluator, a.tau, &table, &cfg.tau) {
            (None, ..) => None,
            (Some(_), Some(t), ..) => Some(t),
            (Some(_), None, Some(t), _) => Some(t.lookup(&features)),
            (Some(_), None, None, TauSource::Fixed(t)) => Some(*t),
            (Some(_), None, None, TauSource::TrustTable(_)) => unreachable!("trust table loaded above"),
        };
        let truth = tr.positions();
        let measurements = track_measurements(tr, a.filter.raw_measurements, &meas_model, master, i);
        let ev = evaluator.as_ref().map(Evaluator::as_dyn);
        let run = run_filter(&cfg, &measurements, ev, tau.unwrap_or(0.0), seed::derive(master, "track-filter", i as u64));
        let summary = match run {
            Ok(run) => {
                let name = format!("track_{i:04}.jsonl");
                let mut buf = Vec::new();
                run.write_jsonl(&mut buf)?;
                write(&a.out_dir.join(&name), buf)?;
                TrackSummary {
                    index: i,
                    vessel_id: tr.vessel_id.clone(),
                    features: features.to_string(),
                    tau,
                    steps: run.steps.len(),
                    mae_m: Some(mae(&run.positions(), &truth)),
                    error: None,
                    log: Some(name),
                }
            }
            Err(e) => {
                log::warn!("track {} ({}) failed: {e}", i, tr.vessel_id);
                TrackSummary {
                    index: i,
                    vessel_id: tr.vessel_id.clone(),
                    features: features.to_string(),
                    tau,
                    steps: 0,
                    mae_m: None,
                    error: Some(e.to_string()),
                    log: None,
                }
            }
        };
        summaries.push(summary);
    }
    write(&a.out_dir.join("summary.json"), to_json(&summaries))?;
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, master: u64) -> Result<()> {
    let cfg = filter_config(&a.filter)?;
    let set = load_tracks(&a.tracks)?;
    let (program, starmap) = load_program(&a.constitution)?;
    let evaluator = Evaluator::build(&cfg, &a.filter, &program, starmap)?;
    let meas_model = cfg.measurement_model().map_err(Error::from)?;
    let tracks: Vec<CalibrationTrack> = set
        .tracks
        .iter()
        .enumerate()
        .map(|(i, tr)| CalibrationTrack {
            id: format!("{}#{i}", tr.vessel_id),
            features: extract_features(tr),
            truth: tr.positions(),
            measurements: track_measurements(tr, a.filter.raw_measurements, &meas_model, master, i),
        })
        .collect();
    let grid = a.tau_grid.clone().unwrap_or_else(default_tau_grid);
    let started = Instant::now();
    let (table, report) = calibrate(&tracks, &cfg, evaluator.as_dyn(), &grid, seed::derive(master, "calibrate", 0))?;
    eprintln!("calibrated {} buckets from {} tracks in {:.2?}", report.buckets.len(), tracks.len(), started.elapsed());
    write(&a.out_dir.join("trust_table.json"), table.to_json() + "\n")?;
    write(&a.out_dir.join("calibration_report.json"), to_json(&report))?;
    write(&a.out_dir.join("tau_histogram.csv"), report.histogram_csv())?;
    Ok(())
}

fn cmd_bench(a: &BenchArgs, master: u64) -> Result<()> {
    let mut spec = ScenarioSpec::from_json(&read(&a.scenario)?)?;
    if let Some(n) = a.seeds {
        spec.seeds = n;
    }
    if master != 0 {
        spec.seed = seed::derive(spec.seed, "cli-master", master);
    }
    let started = Instant::now();
    let scenario = Scenario::build(&spec)?;
    let report = run_benchmark(&scenario)?;
    eprintln!("ran {} seeds x {} arms in {:.2?}", spec.seeds, report.taus.len() + 1, started.elapsed());
    for arm in &report.arms {
        eprintln!("tau {:.2}: median relative MAE {:.3}", arm.tau, arm.relative_mae.median);
    }
    write(&a.out_dir.join("metric_report.json"), to_json(&report))?;
    write(&a.out_dir.join("per_seed.csv"), report.to_csv())?;
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let columns = match &a.columns {
        Some(p) => serde_json::from_str::<ColumnMap>(&read(p)?).map_err(|e| Error::Config(format!("column map: {e}")))?,
        None => ColumnMap::default(),
    };
    let result = read_ais_csv(&a.csv, &columns).map_err(Error::from)?;
    let projection = match a.origin {
        Some((lat, lon)) => TangentProjection::new(lat, lon),
        None => projection_for(&result.records).ok_or_else(|| Error::Config("no valid AIS records".into()))?,
    };
    let tracks = segment_tracks(&result.records, a.gap, &projection)
        .iter()
        .map(|t| resample_track(t, a.dt))
        .filter_map(|r| match r {
            Ok(t) => Some(t),
            Err(e) => {
                log::info!("skipping track: {e}");
                None
            }
        })
        .collect::<Vec<_>>();
    eprintln!(
        "read {} rows: {} kept, {} dropped ({} duplicates); {} tracks",
        result.rows,
        result.records.len(),
        result.dropped,
        result.duplicates,
        tracks.len()
    );
    write(&a.out, TrackSet { projection: Some(projection), tracks }.to_json() + "\n")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    log::info!("master seed {}", cli.seed);
    match &cli.command {
        Command::BuildStarmap(a) => cmd_build_starmap(a, cli.seed),
        Command::Field(a) => cmd_field(a),
        Command::Track(a) => cmd_track(a, cli.seed),
        Command::Calibrate(a) => cmd_calibrate(a, cli.seed),
        Command::Bench(a) => cmd_bench(a, cli.seed),
        Command::Ingest(a) => cmd_ingest(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_user_error() { 2 } else { 3 };
        }
    }
    // I/O failures on user-provided paths are user errors too
    if err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RULEFILTER_LOG", level)).init();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal invariant violated");
            ExitCode::from(3)
        }
    }
}

