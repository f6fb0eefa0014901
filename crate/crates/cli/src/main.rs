//! `orientbot`: generate data, train and evaluate the orientation network,
//! plan viewpoints and run simulations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use orientbot_core::data::{generate_synthetic, load_dataset, save_dataset, StyleParams};
use orientbot_core::eval::{confusion, ConfusionMatrix};
use orientbot_core::labels::import_joint_csv;
use orientbot_core::nnet::{build_paper_model, load_model, predict_samples, save_model, train, TrainConfig};
use orientbot_core::parallel::Exec;
use orientbot_core::planner::{load_grid, plan, PlannerConfig, Point2, Pose2D};
use orientbot_core::sim::{load_scenario, run_scenario};
use orientbot_core::OrientationClass;

#[derive(Parser)]
#[command(name = "orientbot", version, about = "Body-orientation estimation and orientation-aware repositioning")]
struct Cli {
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic labeled dataset.
    GenData(GenData),
    /// Train the network on a dataset file.
    Train(TrainArgs),
    /// Confusion matrix and error metrics for a model or a predictions file.
    Eval(EvalArgs),
    /// Score viewpoints around a person on an occupancy grid.
    Plan(PlanArgs),
    /// Run a follow / dwell / reposition scenario.
    Simulate(SimulateArgs),
    /// Label joint-coordinate rows with orientation angle and class.
    LabelJoints(LabelJointsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    Default,
    Alternate,
}

#[derive(Args)]
struct GenData {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "default")]
    style: Style,
    /// Illumination range as `lo,hi`.
    #[arg(long, value_parser = parse_pair)]
    illumination: Option<(f64, f64)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 30)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    minibatches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop once validation accuracy reaches this value.
    #[arg(long)]
    stop_at: Option<f64>,
    /// Continue training this model instead of starting fresh.
    #[arg(long)]
    init_model: Option<PathBuf>,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, requires = "data", conflicts_with = "pred_csv")]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// CSV with `true,predicted` class indices.
    #[arg(long, required_unless_present = "model")]
    pred_csv: Option<PathBuf>,
    /// Directory for `metrics.json` and `confusion.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    grid: PathBuf,
    /// `x,y` in metres.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    robot: (f64, f64),
    /// `x,y,heading` in metres and degrees.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    target: (f64, f64, f64),
    #[arg(long, default_value_t = 16)]
    bearings: usize,
    /// Reward blocked lines of sight, as the formula is literally written.
    #[arg(long)]
    literal_obstacle: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelJointsArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let v = parse_floats(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn gen_data(a: GenData, exec: Exec) -> Result<()> {
    let mut style = match a.style {
        Style::Default => StyleParams::default(),
        Style::Alternate => StyleParams::alternate(),
    };
    if let Some(range) = a.illumination {
        style.illumination = range;
    }
    let ds = generate_synthetic(a.n as usize, a.seed, &style, exec)?;
    save_dataset(&ds, &a.out)?;
    println!("wrote {} samples to {}", ds.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs, exec: Exec) -> Result<()> {
    if !(a.val_frac > 0.0 && a.val_frac < 1.0) {
        bail!("--val-frac must be in (0, 1), got {}", a.val_frac);
    }
    let ds = load_dataset(&a.data)?;
    let (train_set, val_set) = ds.split(a.val_frac, a.seed)?;
    let mut model = match &a.init_model {
        Some(p) => load_model(p)?,
        None => build_paper_model(a.seed),
    };
    let cfg = TrainConfig {
        learning_rate: a.lr,
        minibatch_size: a.batch,
        minibatches_per_step: a.minibatches,
        steps: a.steps,
        seed: a.seed,
        stop_at_val_accuracy: a.stop_at,
        exec,
        ..Default::default()
    };
    let report = train(&mut model, &train_set.samples, &cfg, &val_set.samples)?;
    save_model(&model, &a.out_model)?;

    let preds = predict_samples(&model, &val_set.samples, cfg.chunk_size, exec)?;
    let preds = preds.into_iter().map(OrientationClass::new).collect::<Result<Vec<_>, _>>()?;
    let truth: Vec<_> = val_set.samples.iter().map(|s| s.label).collect();
    let cm = confusion(&preds, &truth)?;
    write_json(
        &a.report,
        &json!({
            "config": cfg,
            "train_samples": train_set.len(),
            "validation_samples": val_set.len(),
            "steps": report.steps,
            "stopped_early": report.stopped_early,
            "validation": cm.metrics()?,
            "confusion": cm.counts,
        }),
    )?;
    for s in &report.steps {
        println!("step {:>3}  loss {:.4}  val {:.4}", s.step, s.mean_loss, s.val_accuracy.unwrap_or(f64::NAN));
    }
    Ok(())
}

fn read_predictions(path: &Path) -> Result<(Vec<OrientationClass>, Vec<OrientationClass>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let (mut truth, mut preds) = (Vec::new(), Vec::new());
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() != 2 {
            bail!("{}: row {} has {} fields, expected 2", path.display(), i + 2, row.len());
        }
        let class = |s: &str| -> Result<OrientationClass> {
            let v: usize = s.parse().with_context(|| format!("row {}: {s:?} is not a class index", i + 2))?;
            Ok(OrientationClass::new(v)?)
        };
        truth.push(class(&row[0])?);
        preds.push(class(&row[1])?);
    }
    Ok((truth, preds))
}

fn eval_cmd(a: EvalArgs, exec: Exec) -> Result<()> {
    let cm: ConfusionMatrix = match (&a.pred_csv, &a.model, &a.data) {
        (Some(p), _, _) => {
            let (truth, preds) = read_predictions(p)?;
            confusion(&preds, &truth)?
        }
        (None, Some(m), Some(d)) => {
            let model = load_model(m)?;
            let ds = load_dataset(d)?;
            let preds = predict_samples(&model, &ds.samples, 32, exec)?;
            let preds = preds.into_iter().map(OrientationClass::new).collect::<Result<Vec<_>, _>>()?;
            let truth: Vec<_> = ds.samples.iter().map(|s| s.label).collect();
            confusion(&preds, &truth)?
        }
        _ => bail!("give either --pred-csv, or --model with --data"),
    };
    let metrics = cm.metrics()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(&a.out.join("metrics.json"), &metrics)?;
    fs::write(a.out.join("confusion.csv"), cm.to_csv())?;
    println!("samples {}", metrics.total);
    println!("accuracy {}", metrics.accuracy);
    println!("mean orientation error {}", metrics.mean_orientation_error_degrees);
    if let Some(f) = metrics.nearest_label_fraction {
        println!("errors in an adjacent sector {f:.4}");
    }
    Ok(())
}

fn plan_cmd(a: PlanArgs, exec: Exec) -> Result<()> {
    let grid = load_grid(&a.grid)?;
    let robot = Point2::new(a.robot.0, a.robot.1);
    let target = Pose2D::new(a.target.0, a.target.1, a.target.2);
    let cfg = PlannerConfig { bearings_per_ring: a.bearings, literal_obstacle: a.literal_obstacle, ..Default::default() };
    let trace = plan(robot, &target, &grid, cfg, exec)?;
    write_json(&a.out, &trace)?;
    match trace.selection() {
        Some(s) => println!(
            "selected ({:.3}, {:.3}) radius {} bearing {} class {} utility {:.6}",
            s.candidate.position.x,
            s.candidate.position.y,
            s.candidate.radius,
            s.candidate.bearing,
            s.observed_class.index(),
            s.breakdown.total
        ),
        None => println!("no viable candidate"),
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let trace = run_scenario(&scenario)?;
    fs::write(&a.out, trace.to_json()? + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    for ev in &trace.plans {
        let after = ev.face_after.map_or("-".to_string(), |f| f.to_string());
        println!("t={:.1}s plan: face before {} after {}", ev.t, ev.face_before, after);
    }
    Ok(())
}

fn label_joints(a: LabelJointsArgs) -> Result<()> {
    let file = fs::File::open(&a.csv).with_context(|| format!("reading {}", a.csv.display()))?;
    let records = import_joint_csv(file)?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    w.write_record(["frame_id", "angle_deg", "class"])?;
    for r in &records {
        w.write_record([r.frame_id.clone(), r.angle.degrees().to_string(), r.class.index().to_string()])?;
    }
    w.flush()?;
    println!("labeled {} frames", records.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::GenData(a) => gen_data(a, exec),
        Command::Train(a) => train_cmd(a, exec),
        Command::Eval(a) => eval_cmd(a, exec),
        Command::Plan(a) => plan_cmd(a, exec),
        Command::Simulate(a) => simulate_cmd(a),
        Command::LabelJoints(a) => label_joints(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
