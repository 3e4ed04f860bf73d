//! Experiment sweeps: spec files, one result row per seed, aggregates, CSV
//! and JSON output.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use demotamp::ocp::{refine, OcpWeights, RefineSettings};
use demotamp::planner::{plan, plan_unguided, shortcut, Path, PlanReport, PlanStatus, PlannerParams};
use demotamp::robot::RobotModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generalize::{sample_variation, Bounds, Scenario, Variation};
use crate::scene::Task;

pub const RESULTS_FORMAT: &str = "demotamp-results/1";
pub const CSV_HEADER: &str = "task,robot,method,scenario,seed,status,time_s,path_len_rad,grasps";
pub const DEFAULT_SHORTCUT_ATTEMPTS: usize = 200;

/// Random streams of one seed: the planner uses the seed directly, these
/// feed the variation sampler and the shortcut pass.
const VARIATION_STREAM: u64 = 1;
const SHORTCUT_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid experiment spec: {0}")]
    Invalid(String),
    #[error("cannot parse spec: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "guided")]
    Guided,
    #[serde(rename = "guided+shortcut")]
    GuidedShortcut,
    #[serde(rename = "unguided")]
    Unguided,
    #[serde(rename = "unguided+shortcut")]
    UnguidedShortcut,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Guided, Method::GuidedShortcut, Method::Unguided, Method::UnguidedShortcut];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Guided => "guided",
            Method::GuidedShortcut => "guided+shortcut",
            Method::Unguided => "unguided",
            Method::UnguidedShortcut => "unguided+shortcut",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn is_guided(&self) -> bool {
        matches!(self, Method::Guided | Method::GuidedShortcut)
    }

    pub fn shortcuts(&self) -> bool {
        matches!(self, Method::GuidedShortcut | Method::UnguidedShortcut)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_shortcut_attempts() -> usize {
    DEFAULT_SHORTCUT_ATTEMPTS
}

/// One cell of a sweep: a task, a robot and a method, run once per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub task: Task,
    pub robot: String,
    pub method: Method,
    #[serde(default)]
    pub refine: bool,
    pub seeds: Vec<u64>,
    /// Seconds per planning query.
    pub time_limit: f64,
    /// Iteration cap per query; runs that stop on it instead of the clock
    /// are reproducible on any machine.
    #[serde(default)]
    pub max_iterations: Option<u64>,
    #[serde(default)]
    pub scenario: Scenario,
    /// Variation bounds; the task defaults when absent.
    #[serde(default)]
    pub bounds: Option<Bounds>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_shortcut_attempts")]
    pub shortcut_attempts: usize,
}

impl ExperimentSpec {
    pub fn new(task: Task, robot: &str, method: Method, seeds: Vec<u64>, time_limit: f64) -> Self {
        Self {
            task,
            robot: robot.into(),
            method,
            refine: false,
            seeds,
            time_limit,
            max_iterations: None,
            scenario: Scenario::None,
            bounds: None,
            eta: None,
            delta: None,
            shortcut_attempts: DEFAULT_SHORTCUT_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let invalid = |m: String| Err(SpecError::Invalid(m));
        if !RobotModel::builtin_names().contains(&self.robot.as_str()) {
            return invalid(format!("unknown robot `{}`", self.robot));
        }
        if self.task == Task::Waiter && self.robot != "kmr" {
            return invalid(format!("the waiter task needs the kmr robot, not `{}`", self.robot));
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return invalid(format!("time limit {} must be > 0", self.time_limit));
        }
        self.params(0).validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn params(&self, seed: u64) -> PlannerParams {
        let d = PlannerParams::default();
        PlannerParams {
            eta: self.eta.unwrap_or(d.eta),
            delta: self.delta.unwrap_or(d.delta),
            max_time: self.time_limit,
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            seed,
        }
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds.unwrap_or_else(|| Bounds::for_task(self.task))
    }
}

/// A spec file: a list of cells plus output options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub experiments: Vec<ExperimentSpec>,
    /// When false, `time_s` is written as `NA` so output depends only on
    /// the experiment file.
    #[serde(default = "yes")]
    pub record_time: bool,
}

fn yes() -> bool {
    true
}

impl BenchSpec {
    /// Accepts a `BenchSpec` or a single bare `ExperimentSpec`.
    pub fn from_json(bytes: &[u8]) -> Result<Self, SpecError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Bench(BenchSpec),
            Single(ExperimentSpec),
        }
        let spec = match serde_json::from_slice::<Either>(bytes) {
            Ok(Either::Bench(b)) => b,
            Ok(Either::Single(e)) => BenchSpec {
                experiments: vec![e],
                record_time: true,
            },
            // Re-parse strictly for a useful message.
            Err(_) => serde_json::from_slice::<BenchSpec>(bytes)?,
        };
        for e in &spec.experiments {
            e.validate()?;
        }
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Success,
    Timeout,
    IterationLimit,
    /// The plan succeeded but trajectory refinement diverged.
    RefineFailed,
    /// Scene or query was unusable (e.g. the start is in collision).
    Error,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Success => "success",
            RowStatus::Timeout => "timeout",
            RowStatus::IterationLimit => "iteration-limit",
            RowStatus::RefineFailed => "refine-failed",
            RowStatus::Error => "error",
        }
    }
}

impl From<PlanStatus> for RowStatus {
    fn from(s: PlanStatus) -> Self {
        match s {
            PlanStatus::Success => RowStatus::Success,
            PlanStatus::Timeout => RowStatus::Timeout,
            PlanStatus::IterationLimit => RowStatus::IterationLimit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineSummary {
    pub planned_len_rad: f64,
    pub refined_len_rad: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_clearance: f64,
    pub max_keyframe_error: f64,
}

/// Outcome of one seed. On success `path_len_rad` is the final path's
/// length: after shortcutting, and after refinement when enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: Task,
    pub robot: String,
    pub method: Method,
    pub scenario: Scenario,
    pub seed: u64,
    pub status: RowStatus,
    pub time_s: Option<f64>,
    pub path_len_rad: Option<f64>,
    pub grasps: Option<usize>,
    pub iterations: Option<u64>,
    /// Variation draws until one passed the graspability test.
    pub variation_draws: usize,
    pub graspable: bool,
    pub refine: Option<RefineSummary>,
    pub message: Option<String>,
}

impl ResultRow {
    fn new(spec: &ExperimentSpec, seed: u64) -> Self {
        Self {
            task: spec.task,
            robot: spec.robot.clone(),
            method: spec.method,
            scenario: spec.scenario,
            seed,
            status: RowStatus::Error,
            time_s: None,
            path_len_rad: None,
            grasps: None,
            iterations: None,
            variation_draws: 0,
            graspable: false,
            refine: None,
            message: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == RowStatus::Success
    }
}

/// Success rate and means over successful seeds of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub task: Task,
    pub robot: String,
    pub method: Method,
    pub scenario: Scenario,
    pub refine: bool,
    pub seeds: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_time_s: Option<f64>,
    pub mean_path_len_rad: Option<f64>,
    pub mean_grasps: Option<f64>,
}

pub fn aggregate(spec: &ExperimentSpec, rows: &[ResultRow]) -> Aggregate {
    let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.is_success()).collect();
    let mean = |f: &dyn Fn(&ResultRow) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Aggregate {
        task: spec.task,
        robot: spec.robot.clone(),
        method: spec.method,
        scenario: spec.scenario,
        refine: spec.refine,
        seeds: rows.len(),
        successes: ok.len(),
        success_rate: if rows.is_empty() {
            0.0
        } else {
            ok.len() as f64 / rows.len() as f64
        },
        mean_time_s: mean(&|r| r.time_s),
        mean_path_len_rad: mean(&|r| r.path_len_rad),
        mean_grasps: mean(&|r| r.grasps.map(|g| g as f64)),
    }
}

/// Everything a single query produced, for the CLI.
pub struct QueryOutcome {
    pub row: ResultRow,
    pub variation: Option<Variation>,
    pub path: Option<Path>,
    pub report: Option<PlanReport>,
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// The (possibly varied) scene of one seed.
pub fn instance(spec: &ExperimentSpec, seed: u64) -> Result<Variation, crate::scene::SceneError> {
    let mut rng = stream(seed, VARIATION_STREAM);
    sample_variation(spec.task, &spec.robot, spec.scenario, &spec.bounds(), &mut rng)
}

/// Builds the seed's scene, plans, shortcuts and refines as the experiment asks.
pub fn run_query(spec: &ExperimentSpec, seed: u64) -> QueryOutcome {
    let mut row = ResultRow::new(spec, seed);
    let fail = |mut row: ResultRow, msg: String, variation: Option<Variation>| {
        row.message = Some(msg);
        QueryOutcome {
            row,
            variation,
            path: None,
            report: None,
        }
    };
    let variation = match instance(spec, seed) {
        Ok(v) => v,
        Err(e) => return fail(row, e.to_string(), None),
    };
    row.variation_draws = variation.draws;
    row.graspable = variation.graspable;
    let mut space = match variation.scene.space(&variation.demo) {
        Ok(s) => s,
        Err(e) => return fail(row, e.to_string(), Some(variation)),
    };
    let (start, goal) = variation.scene.query(&space);
    let params = spec.params(seed);
    let result = if spec.method.is_guided() {
        plan(&space, &start, &goal, &params)
    } else {
        let regions = match variation.scene.surface_regions(&variation.demo) {
            Ok(r) => r,
            Err(e) => return fail(row, e.to_string(), Some(variation)),
        };
        plan_unguided(&mut space, &regions, &start, &goal, &params)
    };
    let (path, report) = match result {
        Ok(r) => r,
        Err(e) => return fail(row, e.to_string(), Some(variation)),
    };
    row.status = report.status.into();
    row.time_s = Some(report.time_s);
    row.iterations = Some(report.iterations);
    let path = path.map(|p| {
        if spec.method.shortcuts() {
            let mut rng = stream(seed, SHORTCUT_STREAM);
            shortcut(&p, spec.shortcut_attempts, &mut rng, &space, params.delta)
        } else {
            p
        }
    });
    if let Some(p) = &path {
        row.path_len_rad = Some(p.length());
        row.grasps = Some(p.grasp_count(&space.graph));
        if spec.refine {
            match refine(p, &space, &OcpWeights::default(), &RefineSettings::default()) {
                Ok(sol) => {
                    let verify = demotamp::ocp::verify_trajectory(&sol.trajectory, &space);
                    let refined = sol.trajectory.length();
                    row.refine = Some(RefineSummary {
                        planned_len_rad: p.length(),
                        refined_len_rad: refined,
                        iterations: sol.iterations,
                        converged: sol.converged,
                        min_clearance: verify.min_clearance,
                        max_keyframe_error: verify.keyframe_errors.iter().cloned().fold(0.0, f64::max),
                    });
                    row.path_len_rad = Some(refined);
                }
                Err(e) => {
                    row.status = RowStatus::RefineFailed;
                    row.message = Some(e.to_string());
                }
            }
        }
    }
    QueryOutcome {
        row,
        variation: Some(variation),
        path,
        report: Some(report),
    }
}

/// Runs `jobs` on all available cores; results come back in job order.
fn parallel_map<T: Sync, R: Send>(jobs: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                out.lock().expect("collector lock")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("collector lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// One row per seed, in seed order.
pub fn run_experiment(spec: &ExperimentSpec) -> Vec<ResultRow> {
    parallel_map(&spec.seeds, |&seed| run_query(spec, seed).row)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub format: String,
    /// Robots stand at one fixed base pose per task; no base-pose sweep.
    pub base_pose: String,
    pub record_time: bool,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs every (experiment, seed) cell of the sweep in parallel.
pub fn run_bench(bench: &BenchSpec) -> BenchResult {
    let jobs: Vec<(usize, u64)> = bench
        .experiments
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut rows = parallel_map(&jobs, |&(i, seed)| run_query(&bench.experiments[i], seed).row);
    if !bench.record_time {
        for r in &mut rows {
            r.time_s = None;
        }
    }
    let mut aggregates = Vec::new();
    let mut offset = 0;
    for e in &bench.experiments {
        aggregates.push(aggregate(e, &rows[offset..offset + e.seeds.len()]));
        offset += e.seeds.len();
    }
    BenchResult {
        format: RESULTS_FORMAT.into(),
        base_pose: "fixed: one base pose per robot and task".into(),
        record_time: bench.record_time,
        rows,
        aggregates,
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.decimals$}"))
}

/// Fixed formatting: times to 1 ms, lengths to 1e-4 rad, `NA` when absent.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.task,
            r.robot,
            r.method,
            r.scenario,
            r.seed,
            r.status.as_str(),
            opt(r.time_s, 3),
            opt(r.path_len_rad, 4),
            r.grasps.map_or_else(|| "NA".into(), |g| g.to_string()),
        );
    }
    out
}

impl BenchResult {
    pub fn to_csv(&self) -> String {
        to_csv(&self.rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }
}
