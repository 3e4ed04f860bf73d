//! Command-line front end. Exit codes: 0 success, 1 planning or refinement
//! failure, 2 bad input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use demotamp::demo::{load_demonstration, save_demonstration};
use demotamp::ocp::{refine, verify_trajectory, OcpWeights, RefineSettings, Trajectory, VerifyReport};
use demotamp::planner::{Path, PlanReport};
use serde::{Deserialize, Serialize};

use crate::generalize::Scenario;
use crate::harness::{run_bench, run_query, BenchSpec, ExperimentSpec, Method, ResultRow};
use crate::scene::{Scene, Task, SCENE_FORMAT};
use crate::tasks::default_robot;

pub const PATH_FORMAT: &str = "demotamp-path/1";
pub const TRAJECTORY_FORMAT: &str = "demotamp-trajectory/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "demotamp", version, about = "Demonstration-guided pick-and-place planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan one query and write the path with its report.
    Plan(PlanArgs),
    /// Refine a planned path into a dynamically feasible trajectory.
    Refine(RefineArgs),
    /// Run an experiment spec and write results.csv and results.json.
    Bench(BenchArgs),
    /// Write scene.json and demo.json of a task.
    Gen(GenArgs),
    /// Check a demo, scene, path or trajectory file.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    task: String,
    /// Robot model (default: panda7, kmr for the waiter).
    #[arg(long)]
    robot: Option<String>,
    #[arg(long, default_value = "none")]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value = "guided")]
    method: String,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "path.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RefineArgs {
    /// Path file written by `plan`.
    #[arg(long)]
    path: PathBuf,
    #[arg(long, default_value = "trajectory.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides every experiment's time limit.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    file: PathBuf,
}

/// A planned path with everything needed to rebuild its scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub format: String,
    pub task: Task,
    pub robot: String,
    pub method: Method,
    pub scenario: Scenario,
    pub seed: u64,
    pub eta: f64,
    pub delta: f64,
    pub report: PlanReport,
    pub result: ResultRow,
    pub path: Option<Path>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub format: String,
    pub task: Task,
    pub robot: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub planned_len_rad: f64,
    pub refined_len_rad: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
    pub cost_history: Vec<f64>,
    pub verify: VerifyReport,
    pub trajectory: Trajectory,
}

#[derive(Debug)]
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type CliResult = Result<i32, InputError>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
    }
}

fn parse_query(q: &QueryArgs) -> Result<(Task, String, Scenario), InputError> {
    let task = Task::parse(&q.task)?;
    let robot = q.robot.clone().unwrap_or_else(|| default_robot(task).into());
    let scenario = Scenario::parse(&q.scenario).ok_or_else(|| InputError(format!("unknown scenario `{}`", q.scenario)))?;
    Ok((task, robot, scenario))
}

fn write(path: &FsPath, contents: &str) -> Result<(), InputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn read(path: &FsPath) -> Result<Vec<u8>, InputError> {
    fs::read(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn cmd_plan(a: PlanArgs) -> CliResult {
    let (task, robot, scenario) = parse_query(&a.query)?;
    let method = Method::parse(&a.method).ok_or_else(|| InputError(format!("unknown method `{}`", a.method)))?;
    let mut spec = ExperimentSpec::new(task, &robot, method, vec![a.query.seed], a.time_limit);
    spec.scenario = scenario;
    spec.eta = a.eta;
    spec.delta = a.delta;
    spec.validate()?;
    let outcome = run_query(&spec, a.query.seed);
    let Some(report) = outcome.report else {
        return Err(InputError(outcome.row.message.unwrap_or_else(|| "query failed".into())));
    };
    let params = spec.params(a.query.seed);
    let file = PathFile {
        format: PATH_FORMAT.into(),
        task,
        robot,
        method,
        scenario,
        seed: a.query.seed,
        eta: params.eta,
        delta: params.delta,
        report,
        result: outcome.row.clone(),
        path: outcome.path,
    };
    write(&a.out, &serde_json::to_string_pretty(&file)?)?;
    let r = &outcome.row;
    println!(
        "{} {} {} seed {}: {} in {:.3} s, length {}, grasps {}",
        r.task,
        r.robot,
        r.method,
        r.seed,
        r.status.as_str(),
        file.report.time_s,
        r.path_len_rad.map_or("NA".into(), |l| format!("{l:.4} rad")),
        r.grasps.map_or("NA".into(), |g| g.to_string()),
    );
    Ok(if r.is_success() { EXIT_OK } else { EXIT_FAILURE })
}

/// Rebuilds the space of a (task, robot, scenario, seed) instance.
fn rebuild_space(task: Task, robot: &str, scenario: Scenario, seed: u64) -> Result<demotamp::cspace::Space, InputError> {
    let mut spec = ExperimentSpec::new(task, robot, Method::Guided, vec![seed], 1.0);
    spec.scenario = scenario;
    let v = crate::harness::instance(&spec, seed)?;
    Ok(v.scene.space(&v.demo)?)
}

/// Only guided paths are reproducible from the file: unguided runs add
/// states that are not stored.
fn path_space(file: &PathFile) -> Result<demotamp::cspace::Space, InputError> {
    if !file.method.is_guided() {
        return Err(InputError("only guided paths can be reloaded (unguided states are not stored)".into()));
    }
    rebuild_space(file.task, &file.robot, file.scenario, file.seed)
}

fn load_path_file(bytes: &[u8]) -> Result<PathFile, InputError> {
    let file: PathFile = serde_json::from_slice(bytes)?;
    if file.format != PATH_FORMAT {
        return Err(InputError(format!("format `{}`, expected `{PATH_FORMAT}`", file.format)));
    }
    Ok(file)
}

fn cmd_refine(a: RefineArgs) -> CliResult {
    let file = load_path_file(&read(&a.path)?)?;
    let path = file.path.clone().ok_or_else(|| InputError("path file holds no path".into()))?;
    let space = path_space(&file)?;
    path.check(&space, file.delta).map_err(|e| InputError(format!("path is invalid: {e}")))?;
    let sol = match refine(&path, &space, &OcpWeights::default(), &RefineSettings::default()) {
        Ok(s) => s,
        Err(demotamp::ocp::OcpError::InvalidInput(m)) => return Err(InputError(m)),
        Err(e) => {
            eprintln!("refinement failed: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let verify = verify_trajectory(&sol.trajectory, &space);
    let out = TrajectoryFile {
        format: TRAJECTORY_FORMAT.into(),
        task: file.task,
        robot: file.robot.clone(),
        scenario: file.scenario,
        seed: file.seed,
        planned_len_rad: path.length(),
        refined_len_rad: sol.trajectory.length(),
        iterations: sol.iterations,
        converged: sol.converged,
        warning: sol.warning.clone(),
        cost_history: sol.cost_history.clone(),
        verify,
        trajectory: sol.trajectory,
    };
    write(&a.out, &serde_json::to_string_pretty(&out)?)?;
    println!(
        "refined {:.4} rad -> {:.4} rad in {} iterations, min clearance {:.4} m",
        out.planned_len_rad, out.refined_len_rad, out.iterations, out.verify.min_clearance
    );
    Ok(if out.verify.is_collision_free() { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let mut spec = BenchSpec::from_json(&read(&a.spec)?)?;
    if let Some(t) = a.time_limit {
        for e in &mut spec.experiments {
            e.time_limit = t;
            e.validate()?;
        }
    }
    let result = run_bench(&spec);
    fs::create_dir_all(&a.out)?;
    write(&a.out.join("results.csv"), &result.to_csv())?;
    write(&a.out.join("results.json"), &result.to_json())?;
    for g in &result.aggregates {
        println!(
            "{} {} {} {}: success {}/{}",
            g.task, g.robot, g.method, g.scenario, g.successes, g.seeds
        );
    }
    Ok(EXIT_OK)
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let (task, robot, scenario) = parse_query(&a.query)?;
    let mut spec = ExperimentSpec::new(task, &robot, Method::Guided, vec![a.query.seed], 1.0);
    spec.scenario = scenario;
    spec.validate()?;
    let v = crate::harness::instance(&spec, a.query.seed)?;
    fs::create_dir_all(&a.out)?;
    write(&a.out.join("scene.json"), &v.scene.to_json())?;
    write(&a.out.join("demo.json"), &save_demonstration(&v.demo))?;
    println!("wrote {} and {}", a.out.join("scene.json").display(), a.out.join("demo.json").display());
    Ok(EXIT_OK)
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let bytes = read(&a.file)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let format = value.get("format").and_then(|f| f.as_str()).unwrap_or_default().to_string();
    match format.as_str() {
        SCENE_FORMAT => {
            let scene = Scene::from_json(&bytes)?;
            // A demo next to the scene supplies the anchor frames.
            let demo_path = a.file.with_file_name("demo.json");
            if demo_path.exists() {
                let demo = load_demonstration(&read(&demo_path)?)?;
                let space = scene.space(&demo)?;
                let (start, goal) = scene.query(&space);
                if !space.is_free(&start) || !space.is_free(&goal) {
                    return Err(InputError("start or goal configuration is not free".into()));
                }
                println!("scene ok ({} furniture bodies, checked against {})", scene.furniture.len(), demo_path.display());
            } else {
                scene.robot_model()?;
                println!("scene ok ({} furniture bodies, no demo.json to check frames)", scene.furniture.len());
            }
        }
        PATH_FORMAT => {
            let file = load_path_file(&bytes)?;
            let path = file.path.clone().ok_or_else(|| InputError("path file holds no path".into()))?;
            let space = path_space(&file)?;
            path.check(&space, file.delta).map_err(|e| InputError(format!("path is invalid: {e}")))?;
            println!("path ok ({} waypoints, {:.4} rad)", path.len(), path.length());
        }
        TRAJECTORY_FORMAT => {
            let file: TrajectoryFile = serde_json::from_value(value)?;
            let space = rebuild_space(file.task, &file.robot, file.scenario, file.seed)?;
            let report = verify_trajectory(&file.trajectory, &space);
            let worst_key = report.keyframe_errors.iter().cloned().fold(0.0, f64::max);
            if report.rollout_error > 1e-9 || !report.is_collision_free() || worst_key >= 5e-3 {
                return Err(InputError(format!(
                    "trajectory is invalid: rollout error {:.3e}, min clearance {:.4}, keyframe error {:.3e}",
                    report.rollout_error, report.min_clearance, worst_key
                )));
            }
            println!("trajectory ok (horizon {}, {:.4} rad)", file.trajectory.horizon(), file.trajectory.length());
        }
        _ => {
            let demo = load_demonstration(&bytes)?;
            println!("demo ok ({} objects, {} events)", demo.objects.len(), demo.event_count());
        }
    }
    Ok(EXIT_OK)
}
