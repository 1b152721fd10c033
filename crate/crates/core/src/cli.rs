//! Command-line front end. Every subcommand writes CSV outputs plus a
//! `manifest.json` holding the fully resolved configuration.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::collision::{self, CollisionParams, ControlSign, SweepGrid};
use crate::estimator::{self, MlpModel, TrainConfig};
use crate::geometry::Aabb;
use crate::latency::{self, synth, LatencyOptions, TimeSeries, TransitionOptions};
use crate::mapping::{self, scenes, ProximityLayout};
use crate::numfmt::sig9;
use crate::reactive::{self, Behavior, Scenario, Sensing, SensingConfig};
use crate::sensor::{self, DatasetSpec, PatchGrid, Split};

/// Exit code for runtime and numeric failures.
pub const EXIT_RUNTIME: i32 = 1;
/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "tipsense", version, about = "Fingertip sensor simulation and analysis")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// TOML file whose `[<subcommand>]` table overrides flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Impulse-ratio sweeps over stiffness/latency and velocity/latency.
    Collide(CollideArgs),
    /// Generate a labeled synthetic pressure dataset.
    Dataset(DatasetArgs),
    /// Train the estimator on a dataset.
    Train(TrainArgs),
    /// Evaluate a model on a dataset.
    Eval(EvalArgs),
    /// Estimate latency between a ground-truth and a measured series.
    Latency(LatencyArgs),
    /// Build a coarse map from pose, proximity and contact logs.
    Map(MapArgs),
    /// Run a reactive-behavior scenario.
    Sim(SimArgs),
    /// Reproduce the collision, latency and mapping figures in one run.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollideArgs {
    /// Fingertip mass (kg).
    #[arg(long, default_value_t = 0.005)]
    pub mf: f64,
    /// Finger mass (kg).
    #[arg(long, default_value_t = 0.1)]
    pub mr: f64,
    /// Control force magnitude (N).
    #[arg(long, default_value_t = 10.0)]
    pub fin: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Retract)]
    pub sign: SignArg,
    /// Fix stiffness (N/m) and collapse the stiffness axis.
    #[arg(long)]
    pub k: Option<f64>,
    /// Fix latency (s) and collapse the latency axis.
    #[arg(long)]
    pub tl: Option<f64>,
    /// Fix approach velocity (m/s) and collapse the velocity axis.
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub k_min: f64,
    #[arg(long, default_value_t = 1e5)]
    pub k_max: f64,
    #[arg(long, default_value_t = 61)]
    pub k_points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tl_min: f64,
    #[arg(long, default_value_t = 0.025)]
    pub tl_max: f64,
    #[arg(long, default_value_t = 51)]
    pub tl_points: usize,
    #[arg(long, default_value_t = 0.01)]
    pub v0_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub v0_max: f64,
    #[arg(long, default_value_t = 51)]
    pub v0_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    Retract,
    Press,
}

impl From<SignArg> for ControlSign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Retract => ControlSign::Retract,
            SignArg::Press => ControlSign::Press,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetArgs {
    /// Pressure noise standard deviation (normalized units).
    #[arg(long, default_value_t = sensor::DEFAULT_NOISE_STD)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 4)]
    pub theta_points: usize,
    #[arg(long, default_value_t = 4)]
    pub phi_points: usize,
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    #[arg(long, default_value_t = 8)]
    pub rays: usize,
    #[arg(long, default_value_t = 18)]
    pub points_per_ray: usize,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    #[arg(long, default_value = "dataset.jsonl")]
    pub name: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// Dataset file (JSON lines with a `.meta.json` sidecar).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model file; omit together with `--zero-model` to score the all-zero predictor.
    #[arg(long, required_unless_present = "zero_model")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub zero_model: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyArgs {
    /// Ground-truth series, `t_s,value`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Sensor series, `t_s,value`.
    #[arg(long)]
    pub measured: PathBuf,
    /// Sample rate of both files (Hz); inferred from the time column when omitted.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub max_lag: f64,
    /// Parabolic sub-sample refinement.
    #[arg(long)]
    #[serde(default)]
    pub refine: bool,
    /// Zero-phase moving-average window applied to the measured series.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapArgs {
    /// Pose log `t_s,qw,qx,qy,qz,tx,ty,tz`.
    #[arg(long)]
    pub poses: PathBuf,
    /// Proximity log `t_s,d1..d5` (mm, -1 out of range).
    #[arg(long)]
    pub proximity: PathBuf,
    /// Contact log `t_s,fx,fy,fz,theta,phi`.
    #[arg(long)]
    pub contacts: Option<PathBuf>,
    /// Cell edge (m).
    #[arg(long, default_value_t = mapping::DEFAULT_CELL)]
    pub cell: f64,
    #[arg(long, default_value_t = mapping::DEFAULT_CONTACT_THRESHOLD)]
    pub contact_threshold: f64,
    /// Grid bounds `xmin,ymin,zmin,xmax,ymax,zmax` (m).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])]
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorArg {
    None,
    ContactFollowing,
    PotentialField,
    CollisionReflex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneArg {
    /// Plane bobbing and tilting under the fingertip.
    MovingPlane,
    /// Block driven toward the fingertip.
    Approach,
    /// One-dimensional collision with a wall.
    Collision,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimArgs {
    /// Scenario TOML; replaces the built-in scene.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SceneArg::MovingPlane)]
    pub scene: SceneArg,
    #[arg(long, value_enum)]
    pub behavior: Option<BehaviorArg>,
    /// Contact-following force (N).
    #[arg(long, default_value_t = 2.0)]
    pub f_des: f64,
    /// Potential-field threshold (mm).
    #[arg(long, default_value_t = 80.0)]
    pub d_thresh: f64,
    /// Potential-field gain (N/m).
    #[arg(long, default_value_t = 50.0)]
    pub k_field: f64,
    /// Reflex force (N).
    #[arg(long, default_value_t = 10.0)]
    pub fin: f64,
    /// Sensing-to-command latency (s).
    #[arg(long)]
    pub latency: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproArgs {
    /// Grid points per collision axis.
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    format: Format,
    config: &'a T,
    outputs: Vec<String>,
    created_unix_s: u64,
}

struct Run {
    out: PathBuf,
    seed: u64,
    format: Format,
    verbose: bool,
    outputs: Vec<String>,
}

impl Run {
    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
        }
        self.outputs.push(name.to_string());
        File::create(&path).map(BufWriter::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
        let mut w = self.create(name)?;
        f(&mut w).and_then(|_| w.flush()).map_err(|e| runtime(format!("{name}: {e}")))
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn finish<T: Serialize>(&mut self, command: &str, config: &T) -> CliResult<()> {
        let manifest = Manifest {
            tool: "tipsense",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: self.seed,
            format: self.format,
            config,
            outputs: self.outputs.clone(),
            created_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
        std::fs::write(self.out.join("manifest.json"), json + "\n").map_err(runtime)
    }
}

/// Overlay the `[section]` table of a TOML config onto flag values.
fn apply_config<T: Serialize + DeserializeOwned>(args: T, config: Option<&Path>, section: &str) -> CliResult<T> {
    let Some(path) = config else { return Ok(args) };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let Some(overrides) = table.get(section) else { return Ok(args) };
    let overrides = overrides
        .as_table()
        .ok_or_else(|| usage(format!("{}: [{section}] must be a table", path.display())))?;
    let mut merged = toml::Table::try_from(&args).map_err(runtime)?;
    for (k, v) in overrides {
        merged.insert(k.clone(), v.clone());
    }
    merged
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("{}: [{section}] {}", path.display(), e.message())))
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    std::fs::create_dir_all(&cli.out).map_err(|e| runtime(format!("{}: {e}", cli.out.display())))?;
    let mut run = Run { out: cli.out.clone(), seed: cli.seed, format: cli.format, verbose: cli.verbose, outputs: vec![] };
    let config = cli.config.as_deref();
    match cli.command {
        Command::Collide(a) => {
            let a = apply_config(a, config, "collide")?;
            cmd_collide(&mut run, &a)?;
            run.finish("collide", &a)
        }
        Command::Dataset(a) => {
            let a = apply_config(a, config, "dataset")?;
            cmd_dataset(&mut run, &a)?;
            run.finish("dataset", &a)
        }
        Command::Train(a) => {
            let a = apply_config(a, config, "train")?;
            cmd_train(&mut run, &a)?;
            run.finish("train", &a)
        }
        Command::Eval(a) => {
            let a = apply_config(a, config, "eval")?;
            cmd_eval(&mut run, &a)?;
            run.finish("eval", &a)
        }
        Command::Latency(a) => {
            let a = apply_config(a, config, "latency")?;
            cmd_latency(&mut run, &a)?;
            run.finish("latency", &a)
        }
        Command::Map(a) => {
            let a = apply_config(a, config, "map")?;
            cmd_map(&mut run, &a)?;
            run.finish("map", &a)
        }
        Command::Sim(a) => {
            let a = apply_config(a, config, "sim")?;
            let scenario = cmd_sim(&mut run, &a)?;
            run.finish("sim", &scenario)
        }
        Command::Repro(a) => {
            let a = apply_config(a, config, "repro")?;
            cmd_repro(&mut run, &a)?;
            run.finish("repro", &a)
        }
    }
}

fn axis(fixed: Option<f64>, lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    match fixed {
        Some(v) => vec![v],
        None if log => collision::logspace(lo, hi, n),
        None => collision::linspace(lo, hi, n),
    }
}

fn cmd_collide(run: &mut Run, a: &CollideArgs) -> CliResult<()> {
    let nominal = CollisionParams::nominal();
    let fixed = CollisionParams {
        m_f: a.mf,
        m_r: a.mr,
        k: a.k.unwrap_or(nominal.k),
        v0: a.v0.unwrap_or(nominal.v0),
        t_l: a.tl.unwrap_or(nominal.t_l),
        f_in: a.fin,
        control_sign: a.sign.into(),
    };
    fixed.validate().map_err(usage)?;
    let tl = axis(a.tl, a.tl_min, a.tl_max, a.tl_points, false);
    let surfaces = [
        ("eta_k_tl.csv", SweepGrid { k: axis(a.k, a.k_min, a.k_max, a.k_points, true), t_l: tl.clone(), v0: vec![fixed.v0] }),
        ("eta_v0_tl.csv", SweepGrid { k: vec![fixed.k], t_l: tl, v0: axis(a.v0, a.v0_min, a.v0_max, a.v0_points, false) }),
    ];
    for (name, grid) in surfaces {
        grid.validate().map_err(usage)?;
        let rows = collision::sweep_eta(&grid, &fixed).map_err(usage)?;
        let failed = rows.iter().filter(|r| r.status() != "ok").count();
        run.log(format!("{name}: {} rows, {failed} not ok", rows.len()));
        run.write_with(name, |w| collision::write_sweep_csv(w, &rows))?;
    }
    Ok(())
}

fn dataset_spec(seed: u64, a: &DatasetArgs) -> DatasetSpec {
    let mut spec = DatasetSpec { noise_std: a.noise_std, seed, train_fraction: a.train_fraction, ..DatasetSpec::default() };
    spec.patches = PatchGrid { theta_points: a.theta_points, phi_points: a.phi_points, ..PatchGrid::default() };
    spec.protocol.layers = a.layers;
    spec.protocol.rays = a.rays;
    spec.protocol.points_per_ray = a.points_per_ray;
    spec
}

fn cmd_dataset(run: &mut Run, a: &DatasetArgs) -> CliResult<()> {
    let spec = dataset_spec(run.seed, a);
    let ds = sensor::generate_dataset(&spec).map_err(|e| match e {
        sensor::SensorError::Io(_) => runtime(e),
        _ => usage(e),
    })?;
    let path = run.out.join(&a.name);
    sensor::write_dataset(&ds, &path).map_err(runtime)?;
    run.outputs.push(a.name.clone());
    run.outputs.push(sensor::meta_path(Path::new(&a.name)).display().to_string());
    println!("records: {} (train {}, test {})", ds.len(), ds.count(Split::Train), ds.count(Split::Test));
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<sensor::LabeledDataset> {
    sensor::read_dataset(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn report_table(train: &estimator::RmseReport, test: &estimator::RmseReport) -> String {
    format!(
        "              Train            Test\n          Forces  Angles  Forces  Angles\nRMSE     {:>7.3} {:>7.4} {:>7.3} {:>7.4}\n",
        train.force_rmse, train.angle_rmse, test.force_rmse, test.angle_rmse
    )
}

fn cmd_train(run: &mut Run, a: &TrainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let mut cfg = TrainConfig { epochs: a.epochs, batch_size: a.batch_size, seed: run.seed, ..TrainConfig::default() };
    cfg.adam.lr = a.lr;
    let out = estimator::train(&ds, &cfg).map_err(|e| match e {
        estimator::EstimatorError::Config(_) => usage(e),
        _ => runtime(e),
    })?;
    let training = serde_json::json!({ "config": cfg, "dataset": a.dataset, "history": out.history });
    let model_path = run.out.join("model.json");
    estimator::save_model(&out.model, training, &model_path).map_err(runtime)?;
    run.outputs.push("model.json".into());
    let report = serde_json::json!({ "train": out.train, "test": out.test });
    run.write_with("report.json", |w| writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes")))?;
    run.write_with("history.csv", |w| {
        writeln!(w, "epoch,train_loss,test_force_rmse,test_angle_rmse")?;
        for h in &out.history {
            writeln!(w, "{},{},{},{}", h.epoch, sig9(h.train_loss), sig9(h.test_force_rmse), sig9(h.test_angle_rmse))?;
        }
        Ok(())
    })?;
    print!("{}", report_table(&out.train, &out.test));
    Ok(())
}

fn cmd_eval(run: &mut Run, a: &EvalArgs) -> CliResult<()> {
    let ds = load_dataset(&a.dataset)?;
    let model = match (&a.model, a.zero_model) {
        (Some(p), false) => estimator::load_model(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?,
        (None, true) => MlpModel::zeros(),
        _ => return Err(usage("give exactly one of --model and --zero-model")),
    };
    let train = estimator::evaluate(&model, &ds, Split::Train).map_err(runtime)?;
    let test = estimator::evaluate(&model, &ds, Split::Test).map_err(runtime)?;
    let report = serde_json::json!({ "train": train, "test": test });
    run.write_with("report.json", |w| writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes")))?;
    print!("{}", report_table(&train, &test));
    Ok(())
}

fn read_series(path: &Path, rate: Option<f64>) -> CliResult<TimeSeries> {
    let f = File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    TimeSeries::read_csv(f, rate).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn cmd_latency(run: &mut Run, a: &LatencyArgs) -> CliResult<()> {
    let truth = read_series(&a.truth, a.rate)?;
    let mut measured = read_series(&a.measured, a.rate)?;
    if let Some(w) = a.window {
        measured = latency::zero_phase_moving_average(&measured, w).map_err(usage)?;
    }
    let est = latency::estimate_latency(&truth, &measured, &LatencyOptions { max_lag_s: a.max_lag, refine: a.refine })
        .map_err(runtime)?;
    if est.ambiguous {
        eprintln!("warning: correlation peak is ambiguous (second peak within 1%)");
    }
    run.write_with("latency.csv", |w| {
        writeln!(w, "latency_s,peak,ambiguous")?;
        writeln!(w, "{},{},{}", sig9(est.latency_s), sig9(est.peak), est.ambiguous)
    })?;
    println!("latency_ms: {:.3}", est.latency_s * 1000.0);
    Ok(())
}

fn open_log(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_map(run: &mut Run, prefix: &str, points: &[mapping::MapPoint], bounds: Aabb, cell: f64) -> CliResult<mapping::CoarseGrid> {
    let grid = mapping::rasterize(points, bounds, cell).map_err(usage)?;
    run.write_with(&format!("{prefix}cells.csv"), |w| grid.write_cells_csv(w))?;
    run.write_with(&format!("{prefix}points.csv"), |w| mapping::write_points_csv(w, points))?;
    if grid.out_of_bounds > 0 {
        eprintln!("warning: {} points fell outside the grid bounds", grid.out_of_bounds);
    }
    Ok(grid)
}

fn cmd_map(run: &mut Run, a: &MapArgs) -> CliResult<()> {
    let b = &a.bounds;
    if b.len() != 6 {
        return Err(usage("--bounds needs six values"));
    }
    let bounds = Aabb::new([b[0], b[1], b[2]], [b[3], b[4], b[5]]);
    let poses = mapping::read_pose_log(open_log(&a.poses)?, &a.poses.display().to_string()).map_err(runtime)?;
    let prox = mapping::read_proximity_log(open_log(&a.proximity)?, &a.proximity.display().to_string()).map_err(runtime)?;
    let contacts = match &a.contacts {
        Some(p) => mapping::read_contact_log(open_log(p)?, &p.display().to_string()).map_err(runtime)?,
        None => vec![],
    };
    let points = mapping::build_points(&poses, &prox, &contacts, &ProximityLayout::default(), a.contact_threshold);
    let grid = write_map(run, "", &points, bounds, a.cell)?;
    println!("points: {}, occupied cells: {}, out of bounds: {}", points.len(), grid.cells.len(), grid.out_of_bounds);
    Ok(())
}

fn cmd_sim(run: &mut Run, a: &SimArgs) -> CliResult<Scenario> {
    let mut scenario = match &a.scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            Scenario::from_toml(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => {
            let behavior = a.behavior.unwrap_or(match a.scene {
                SceneArg::MovingPlane => BehaviorArg::ContactFollowing,
                SceneArg::Approach => BehaviorArg::PotentialField,
                SceneArg::Collision => BehaviorArg::CollisionReflex,
            });
            let behavior = match behavior {
                BehaviorArg::None => Behavior::None,
                BehaviorArg::ContactFollowing => Behavior::ContactFollowing { f_des: a.f_des },
                BehaviorArg::PotentialField => Behavior::PotentialField { d_thresh_mm: a.d_thresh, k_field: a.k_field },
                BehaviorArg::CollisionReflex => Behavior::CollisionReflex { f_in: a.fin, sign: ControlSign::Retract },
            };
            let mut s = match a.scene {
                SceneArg::MovingPlane => reactive::contact_following_scenario(a.f_des),
                SceneArg::Approach => reactive::approach_scenario(behavior),
                SceneArg::Collision => reactive::collision_scenario(&CollisionParams { f_in: a.fin, ..CollisionParams::nominal() }, 1e-5),
            };
            s.behavior = behavior;
            s
        }
    };
    if let Some(l) = a.latency {
        scenario.latency_s = l;
    }
    if let Some(d) = a.duration {
        scenario.duration_s = d;
    }
    scenario.seed = run.seed;
    scenario.validate().map_err(usage)?;

    let model;
    let sensing = match &scenario.sensing {
        SensingConfig::Oracle => Sensing::Oracle,
        SensingConfig::Estimated { model: path, noise_std } => {
            model = estimator::load_model(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            Sensing::Estimated {
                model: &model,
                layout: Default::default(),
                transfer: Default::default(),
                noise_std: *noise_std,
            }
        }
    };
    let out = reactive::simulate(&scenario, &sensing).map_err(runtime)?;
    run.write_with("trajectory.csv", |w| reactive::write_trajectory_csv(w, &out.log))?;
    println!(
        "steps: {}, contact impulse: {} N s, min clearance: {} m",
        out.log.len(),
        sig9(out.contact_impulse),
        sig9(out.min_clearance)
    );
    Ok(scenario)
}

fn cmd_repro(run: &mut Run, a: &ReproArgs) -> CliResult<()> {
    // Collision impulse surfaces.
    let collide = CollideArgs {
        mf: 0.005,
        mr: 0.1,
        fin: 10.0,
        sign: SignArg::Retract,
        k: None,
        tl: None,
        v0: None,
        k_min: 100.0,
        k_max: 1e5,
        k_points: a.points,
        tl_min: 0.0,
        tl_max: 0.025,
        tl_points: a.points,
        v0_min: 0.01,
        v0_max: 1.0,
        v0_points: a.points,
    };
    let base = run.out.clone();
    run.out = base.join("collision");
    cmd_collide(run, &collide)?;
    run.outputs.iter_mut().for_each(|o| *o = format!("collision/{o}"));

    // Latency and contact transition.
    run.out = base.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut lines = vec!["signal,rate_hz,injected_ms,estimated_ms".to_string()];
    for (rate, shift) in [(1000.0, 0.007), (2000.0, 0.004)] {
        let sig = synth::BandLimited::random(&mut rng, 20.0, 24);
        let n = (2.0 * rate) as usize;
        let truth = TimeSeries::new(rate, 0.0, sig.sample(rate, n, 0.0)).map_err(runtime)?;
        let measured = TimeSeries::new(rate, 0.0, sig.sample(rate, n, shift)).map_err(runtime)?;
        let est = latency::estimate_latency(&truth, &measured, &LatencyOptions::default()).map_err(runtime)?;
        lines.push(format!("band_limited,{rate},{},{:.3}", shift * 1000.0, est.latency_s * 1000.0));
    }
    run.write_with("latency/recovery.csv", |w| writeln!(w, "{}", lines.join("\n")))?;
    let profile = synth::ApproachPress {
        rate_hz: 200.0,
        duration_s: 2.0,
        contact_s: 1.0,
        start_mm: 120.0,
        floor_mm: 10.0,
        peak_n: 8.0,
        ramp_s: 0.3,
    };
    let prox = TimeSeries::new(200.0, 0.0, profile.proximity_mm()).map_err(runtime)?;
    let force = TimeSeries::new(200.0, 0.0, profile.force_n()).map_err(runtime)?;
    let force_filtered = latency::zero_phase_moving_average(&force, 7).map_err(runtime)?;
    let prox_filtered = latency::zero_phase_moving_average(&prox, 15).map_err(runtime)?;
    let event = latency::detect_transition(&prox, &force, &TransitionOptions::default()).map_err(runtime)?;
    run.write_with("latency/transition.csv", |w| {
        writeln!(w, "t_s,proximity_mm,proximity_filtered_mm,force_n,force_filtered_n")?;
        for i in 0..prox.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                sig9(prox.time(i)),
                sig9(prox.values[i]),
                sig9(prox_filtered.values[i]),
                sig9(force.values[i]),
                sig9(force_filtered.values[i])
            )?;
        }
        Ok(())
    })?;
    println!("contact detected at {:.3} s", event.contact_time_s);

    // Room map with objects removed one at a time, and the box tap.
    let scene = scenes::RoomScene::standard();
    let layout = ProximityLayout::default();
    let bounds = scenes::RoomScene::map_bounds();
    for (tag, present) in [("both", vec![0, 1]), ("without_0", vec![1]), ("without_both", vec![])] {
        let points = scenes::sweep_points(&scene, &present, &layout);
        let grid = write_map(run, &format!("map/room_{tag}_"), &points, bounds, mapping::DEFAULT_CELL)?;
        println!("room {tag}: {} occupied cells", grid.cells.len());
    }
    let poses = scenes::sweep_poses();
    let readings = scenes::sweep_readings(&scene, &[0, 1], &layout);
    run.write_with("map/room_poses.csv", |w| mapping::write_pose_log(w, &poses))?;
    run.write_with("map/room_proximity.csv", |w| mapping::write_proximity_log(w, &readings))?;
    let tap = scenes::box_tap(&layout);
    run.write_with("map/box_poses.csv", |w| mapping::write_pose_log(w, &tap.poses))?;
    run.write_with("map/box_proximity.csv", |w| mapping::write_proximity_log(w, &tap.proximity))?;
    run.write_with("map/box_contacts.csv", |w| mapping::write_contact_log(w, &tap.contacts))?;
    let points = mapping::build_points(&tap.poses, &tap.proximity, &tap.contacts, &layout, mapping::DEFAULT_CONTACT_THRESHOLD);
    write_map(run, "map/box_", &points, Aabb::new([-0.2; 3], [0.2; 3]), 0.005)?;
    Ok(())
}
