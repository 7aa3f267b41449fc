//! Experiment plumbing behind `dqnlab`: run config files, per-run outputs,
//! sweep manifests, aggregate CSVs and report tables.
//!
//! Config files are line oriented, `key = value`, with `#` comments. Every
//! key has a default; defaults for budget-like keys depend on `env`.

use crate::adapt::{self, AdaptError, Checkpoint, Provenance, TaskSpec, GRID_DIMS};
use crate::envs::{GridTask, GridWorld, Intersection, IntersectionParams, StartMode, NUM_FEATURES};
use crate::metrics::{MetricsError, OptimalSet, QProbe};
use crate::nnet::{BiasInit, Network};
use crate::oracle::{solve_grid_q, GridExpert, IntersectionExpert, OracleError, OracleVariant};
use crate::qlearn::{self, Algorithm, MseProbe, RunRecord, TrainConfig, TrainError};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

pub const INTERSECTION_DIMS: [usize; 3] = [NUM_FEATURES, 1024, 2];
pub const INTERSECTION_EPISODES: usize = 100_000;
pub const INTERSECTION_LONG_EPISODES: usize = 1_500_000;
pub const INTERSECTION_LR: f64 = 1e-6;

pub const EVALS_HEADER: &str = "episode,accuracy,mse_optimal,mse_all";
pub const AGGREGATE_HEADER: &str = "algorithm,base,seed,acc_final,mse_optimal,mse_all,settle_episode";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {msg}")]
    Config { path: String, line: usize, msg: String },
    #[error("{path}:{line}: {msg}")]
    Csv { path: String, line: usize, msg: String },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} runs failed:\n{list}")]
    SweepFailed { failed: usize, total: usize, list: String },
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    /// 1 for usage and input errors, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Csv { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a user-supplied input file; failure is a usage error.
pub fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Grid,
    Intersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Original,
    Adapted,
}

impl FromStr for TaskKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "original" => Ok(Self::Original),
            "adapted" => Ok(Self::Adapted),
            _ => Err(format!("unknown task `{s}` (expected original or adapted)")),
        }
    }
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::Adapted => "adapted",
        }
    }
}

pub fn grid_task(task: TaskKind) -> GridTask {
    match task {
        TaskKind::Original => GridTask::ORIGINAL,
        TaskKind::Adapted => GridTask::ORIGINAL.adapted(),
    }
}

fn intersection_gap(task: TaskKind) -> f64 {
    match task {
        TaskKind::Original => adapt::ORIGINAL_GAP,
        TaskKind::Adapted => match adapt::adapt_task(TaskSpec::Intersection(adapt::ORIGINAL_GAP)) {
            TaskSpec::Intersection(g) => g,
            TaskSpec::Grid(_) => unreachable!(),
        },
    }
}

fn start_mode_str(m: StartMode) -> &'static str {
    match m {
        StartMode::Fixed => "fixed",
        StartMode::Random => "random",
        StartMode::AllCells => "all_cells",
    }
}

fn optimal_set_str(s: OptimalSet) -> &'static str {
    match s {
        OptimalSet::PathActions => "path_actions",
        OptimalSet::PathStates => "path_states",
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub task: TaskKind,
    pub train: TrainConfig,
    pub bias_init: BiasInit,
    pub start_mode: StartMode,
    /// `None` means: on for the grid, off for the intersection.
    pub mse: Option<bool>,
    pub oracle_variant: OracleVariant,
    pub optimal_set: OptimalSet,
    /// Overrides the task's gap (intersection only).
    pub required_gap: Option<f64>,
    pub intersection: IntersectionParams,
    pub outdir: PathBuf,
}

/// Caller-side defaults that are not config keys.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub task: TaskKind,
    /// Use the full intersection budget.
    pub long: bool,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            task: TaskKind::Original,
            long: false,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "env",
    "task",
    "algorithm",
    "episodes",
    "lr",
    "gamma",
    "eval_every",
    "eval_rollouts",
    "seed",
    "update_rule",
    "update_timing",
    "reward_scale",
    "bias_init",
    "start_mode",
    "mse",
    "oracle_variant",
    "optimal_set",
    "required_gap",
    "spawn_prob",
    "min_spawn_gap",
    "max_steps",
    "ego_start_x",
    "ego_velocity",
    "ado_velocity",
    "input_center",
    "input_scale",
    "outdir",
];

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits config text into entries. Rejects malformed lines and duplicate
/// keys; does not check key names.
pub fn parse_entries(text: &str, path: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CliError::Config {
            path: path.to_string(),
            line: i + 1,
            msg,
        };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(err(format!("expected `key = value`, got `{line}`")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == k) {
            return Err(err(format!("duplicate key `{k}` (first set on line {})", prev.line)));
        }
        out.push(Entry {
            line: i + 1,
            key: k.to_string(),
            value: v.to_string(),
        });
    }
    Ok(out)
}

impl RunConfig {
    pub fn defaults(env: EnvKind, d: Defaults) -> Self {
        let mut train = TrainConfig::default();
        if env == EnvKind::Intersection {
            train.episodes = if d.long { INTERSECTION_LONG_EPISODES } else { INTERSECTION_EPISODES };
            train.lr = INTERSECTION_LR;
            train.eval_every = 1000;
            train.eval_rollouts = 100;
            train.reward_scale = 1e-3;
        }
        Self {
            env,
            task: d.task,
            train,
            bias_init: BiasInit::Uniform,
            start_mode: StartMode::Fixed,
            mse: None,
            oracle_variant: OracleVariant::Stationary,
            optimal_set: OptimalSet::PathActions,
            required_gap: None,
            intersection: IntersectionParams::default(),
            outdir: PathBuf::from("out"),
        }
    }

    pub fn from_entries(entries: &[Entry], path: &str, d: Defaults) -> Result<Self> {
        let err = |line: usize, msg: String| CliError::Config {
            path: path.to_string(),
            line,
            msg,
        };
        let env = match entries.iter().find(|e| e.key == "env") {
            None => EnvKind::Grid,
            Some(e) => match e.value.as_str() {
                "grid" => EnvKind::Grid,
                "intersection" => EnvKind::Intersection,
                v => return Err(err(e.line, format!("unknown env `{v}` (expected grid or intersection)"))),
            },
        };
        let mut c = Self::defaults(env, d);
        for e in entries {
            c.set(&e.key, &e.value).map_err(|m| err(e.line, m))?;
        }
        c.train.validate().map_err(|m| err(0, m.to_string()))?;
        Ok(c)
    }

    pub fn parse(text: &str, path: &str, d: Defaults) -> Result<Self> {
        Self::from_entries(&parse_entries(text, path)?, path, d)
    }

    pub fn load(path: &Path, d: Defaults) -> Result<Self> {
        let text = read_input(path)?;
        Self::parse(&text, &path.display().to_string(), d)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
        }
        let p = &mut self.intersection;
        match key {
            "env" => {}
            "task" => self.task = v.parse()?,
            "algorithm" => self.train.algorithm = v.parse()?,
            "episodes" => self.train.episodes = num(key, v)?,
            "lr" => self.train.lr = num(key, v)?,
            "gamma" => self.train.gamma = num(key, v)?,
            "eval_every" => self.train.eval_every = num(key, v)?,
            "eval_rollouts" => self.train.eval_rollouts = num(key, v)?,
            "seed" => self.train.seed = num(key, v)?,
            "update_rule" => self.train.update_rule = v.parse()?,
            "update_timing" => self.train.update_timing = v.parse()?,
            "reward_scale" => self.train.reward_scale = num(key, v)?,
            "bias_init" => self.bias_init = v.parse()?,
            "start_mode" => {
                self.start_mode = match v {
                    "fixed" => StartMode::Fixed,
                    "random" => StartMode::Random,
                    "all_cells" => StartMode::AllCells,
                    _ => return Err(format!("unknown start_mode `{v}` (expected fixed, random or all_cells)")),
                }
            }
            "mse" => {
                self.mse = match v {
                    "auto" => None,
                    "true" => Some(true),
                    "false" => Some(false),
                    _ => return Err(format!("`mse` must be auto, true or false, got `{v}`")),
                }
            }
            "oracle_variant" => self.oracle_variant = v.parse().map_err(|e: OracleError| e.to_string())?,
            "optimal_set" => {
                self.optimal_set = match v {
                    "path_actions" => OptimalSet::PathActions,
                    "path_states" => OptimalSet::PathStates,
                    _ => return Err(format!("unknown optimal_set `{v}` (expected path_actions or path_states)")),
                }
            }
            "required_gap" => self.required_gap = if v == "auto" { None } else { Some(num(key, v)?) },
            "spawn_prob" => p.spawn_prob = num(key, v)?,
            "min_spawn_gap" => p.min_spawn_gap = num(key, v)?,
            "max_steps" => p.max_steps = num(key, v)?,
            "ego_start_x" => p.ego_start_x = num(key, v)?,
            "ego_velocity" => p.ego_velocity = num(key, v)?,
            "ado_velocity" => p.ado_velocity = num(key, v)?,
            "input_center" => p.input_center = num(key, v)?,
            "input_scale" => p.input_scale = num(key, v)?,
            "outdir" => self.outdir = PathBuf::from(v),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        let t = &self.train;
        let p = &self.intersection;
        match key {
            "env" => match self.env {
                EnvKind::Grid => "grid".into(),
                EnvKind::Intersection => "intersection".into(),
            },
            "task" => self.task.as_str().into(),
            "algorithm" => t.algorithm.id().into(),
            "episodes" => t.episodes.to_string(),
            "lr" => t.lr.to_string(),
            "gamma" => t.gamma.to_string(),
            "eval_every" => t.eval_every.to_string(),
            "eval_rollouts" => t.eval_rollouts.to_string(),
            "seed" => t.seed.to_string(),
            "update_rule" => t.update_rule.as_str().into(),
            "update_timing" => t.update_timing.as_str().into(),
            "reward_scale" => t.reward_scale.to_string(),
            "bias_init" => self.bias_init.as_str().into(),
            "start_mode" => start_mode_str(self.start_mode).into(),
            "mse" => match self.mse {
                None => "auto".into(),
                Some(b) => b.to_string(),
            },
            "oracle_variant" => self.oracle_variant.as_str().into(),
            "optimal_set" => optimal_set_str(self.optimal_set).into(),
            "required_gap" => self.required_gap.map_or("auto".into(), |g| g.to_string()),
            "spawn_prob" => p.spawn_prob.to_string(),
            "min_spawn_gap" => p.min_spawn_gap.to_string(),
            "max_steps" => p.max_steps.to_string(),
            "ego_start_x" => p.ego_start_x.to_string(),
            "ego_velocity" => p.ego_velocity.to_string(),
            "ado_velocity" => p.ado_velocity.to_string(),
            "input_center" => p.input_center.to_string(),
            "input_scale" => p.input_scale.to_string(),
            "outdir" => self.outdir.display().to_string(),
            _ => unreachable!("every key in CONFIG_KEYS is rendered"),
        }
    }

    /// Every key with its resolved value, one `key = value` per line. Parses
    /// back to an identical config.
    pub fn canonical(&self) -> String {
        CONFIG_KEYS.iter().map(|k| format!("{k} = {}\n", self.value_of(k))).collect()
    }

    /// SHA-256 of the canonical form without `outdir`.
    pub fn hash(&self) -> String {
        let text: String = self.canonical().lines().filter(|l| !l.starts_with("outdir ")).map(|l| format!("{l}\n")).collect();
        adapt::sha256_hex(&text)
    }

    pub fn mse_enabled(&self) -> Result<bool> {
        match (self.env, self.mse) {
            (EnvKind::Intersection, Some(true)) => Err(MetricsError::UnsupportedEnvironment.into()),
            (EnvKind::Intersection, _) => Ok(false),
            (EnvKind::Grid, m) => Ok(m.unwrap_or(true)),
        }
    }

    pub fn dims(&self) -> &'static [usize] {
        match self.env {
            EnvKind::Grid => &GRID_DIMS,
            EnvKind::Intersection => &INTERSECTION_DIMS,
        }
    }

    pub fn required_gap(&self) -> f64 {
        self.required_gap.unwrap_or_else(|| intersection_gap(self.task))
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.hash(),
            env: self.value_of("env"),
            task: self.value_of("task"),
            algorithm: self.train.algorithm.id().into(),
            episodes: self.train.episodes as u64,
            seed: self.train.seed,
        }
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub base_id: Option<String>,
    pub provenance: Provenance,
}

/// Trains from a fresh network, or from `base` when given.
pub fn execute(cfg: &RunConfig, base: Option<&Checkpoint>) -> Result<RunOutput> {
    let mse = cfg.mse_enabled()?;
    let record = match cfg.env {
        EnvKind::Grid => {
            let task = grid_task(cfg.task);
            let env = GridWorld::new(task, cfg.start_mode);
            let expert = GridExpert::new(task);
            let probe = if mse {
                let table = solve_grid_q(task, cfg.train.gamma, cfg.oracle_variant)?;
                Some(QProbe::new(&table, &env, cfg.optimal_set))
            } else {
                None
            };
            let f = probe.as_ref().map(|p| move |n: &Network| p.both(n));
            let probe_fn: Option<MseProbe<'_>> = f.as_ref().map(|f| f as MseProbe<'_>);
            run_on(&env, cfg, base, &expert, probe_fn)?
        }
        EnvKind::Intersection => {
            let env = Intersection::new(cfg.intersection.clone(), cfg.required_gap());
            let expert = IntersectionExpert::new(env.clone());
            run_on(&env, cfg, base, &expert, None)?
        }
    };
    Ok(RunOutput {
        record,
        base_id: base.map(|b| b.provenance.id()),
        provenance: cfg.provenance(),
    })
}

fn run_on<E: qlearn::SupervisedSampling>(
    env: &E,
    cfg: &RunConfig,
    base: Option<&Checkpoint>,
    expert: &dyn crate::oracle::Expert<E::State>,
    probe: Option<MseProbe<'_>>,
) -> Result<RunRecord> {
    Ok(match base {
        Some(b) => adapt::retrain(b, cfg.dims(), env, &cfg.train, Some(expert), probe)?.run,
        None => {
            let net = qlearn::init_for_run(cfg.dims(), cfg.train.seed, cfg.bias_init)?;
            qlearn::train(env, net, &cfg.train, Some(expert), probe)?
        }
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn evals_csv(record: &RunRecord, base_id: Option<&str>) -> String {
    let mut out = String::from(EVALS_HEADER);
    if base_id.is_some() {
        out.push_str(",base_id");
    }
    out.push('\n');
    for e in &record.evals {
        let _ = write!(out, "{},{},{},{}", e.episode, e.accuracy, opt(e.mse_optimal), opt(e.mse_all));
        if let Some(b) = base_id {
            let _ = write!(out, ",{b}");
        }
        out.push('\n');
    }
    out
}

/// Writes `evals.csv`, `config.txt` and `model.ckpt` into the config's
/// output directory.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    let dir = &cfg.outdir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let evals = dir.join("evals.csv");
    fs::write(&evals, evals_csv(&out.record, out.base_id.as_deref())).map_err(io_err(&evals))?;
    let config = dir.join("config.txt");
    let mut text = cfg.canonical();
    if let Some(b) = &out.base_id {
        let _ = writeln!(text, "# base_id = {b}");
    }
    fs::write(&config, text).map_err(io_err(&config))?;
    adapt::save_checkpoint(&out.record.network, &out.provenance, &dir.join("model.ckpt"))?;
    Ok(())
}

pub fn summary_line(out: &RunOutput) -> String {
    let r = &out.record;
    let last = r.final_eval();
    let mut s = format!("{} episodes={} acc_final={:.4}", r.config.algorithm, r.config.episodes, last.accuracy);
    if let (Some(a), Some(b)) = (last.mse_optimal, last.mse_all) {
        let _ = write!(s, " mse_optimal={a:.4} mse_all={b:.4}");
    }
    match r.settle_episode() {
        Some(e) => {
            let _ = write!(s, " settle_episode={e}");
        }
        None => {
            let _ = write!(s, " settle_episode=none plateau={:.4}", crate::metrics::plateau(&r.evals));
        }
    }
    if let Some(b) = &out.base_id {
        let _ = write!(s, " base_id={b}");
    }
    s
}

// ---------------------------------------------------------------- sweeps

/// A sweep manifest: shared config entries, named bases, and run tuples.
///
/// ```text
/// env = grid                       # any config key, applied to every run
/// outdir = sweeps/table2
/// base onehot = bases/onehot.ckpt  # relative to the manifest
/// run supervised onehot 0 1 2 3 4
/// run 6 fresh 0 1 2 3 4            # `fresh` = new network
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<Entry>,
    pub bases: Vec<(String, PathBuf)>,
    pub runs: Vec<SweepRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub algorithm: Algorithm,
    pub base: String,
    pub seeds: Vec<u64>,
}

pub const FRESH: &str = "fresh";

impl Manifest {
    pub fn parse(text: &str, path: &str, dir: &Path) -> Result<Self> {
        let mut config_lines = String::new();
        let mut bases: Vec<(String, PathBuf)> = Vec::new();
        let mut runs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let err = |msg: String| CliError::Config {
                path: path.to_string(),
                line: i + 1,
                msg,
            };
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.first() {
                Some(&"base") => {
                    let [_, name, "=", file] = words[..] else {
                        return Err(err("expected `base NAME = PATH`".into()));
                    };
                    if name == FRESH || bases.iter().any(|(n, _)| n == name) {
                        return Err(err(format!("base name `{name}` is reserved or repeated")));
                    }
                    bases.push((name.to_string(), dir.join(file)));
                    config_lines.push('\n');
                }
                Some(&"run") => {
                    if words.len() < 4 {
                        return Err(err("expected `run ALGORITHM BASE SEED...`".into()));
                    }
                    let algorithm = words[1].parse().map_err(err)?;
                    let base = words[2].to_string();
                    if base != FRESH && !bases.iter().any(|(n, _)| *n == base) {
                        return Err(err(format!("base `{base}` is not declared above")));
                    }
                    let seeds = words[3..]
                        .iter()
                        .map(|s| s.parse().map_err(|_| err(format!("bad seed `{s}`"))))
                        .collect::<Result<Vec<u64>>>()?;
                    runs.push(SweepRun { algorithm, base, seeds });
                    config_lines.push('\n');
                }
                _ => {
                    config_lines.push_str(raw);
                    config_lines.push('\n');
                }
            }
        }
        let entries = parse_entries(&config_lines, path)?;
        for e in &entries {
            if !CONFIG_KEYS.contains(&e.key.as_str()) || e.key == "algorithm" || e.key == "seed" {
                return Err(CliError::Config {
                    path: path.to_string(),
                    line: e.line,
                    msg: format!("key `{}` cannot be set in a manifest", e.key),
                });
            }
        }
        if runs.is_empty() {
            return Err(CliError::Usage(format!("{path}: manifest lists no runs")));
        }
        Ok(Self { entries, bases, runs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_input(path)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), dir)
    }

    pub fn run_count(&self) -> usize {
        self.runs.iter().map(|r| r.seeds.len()).sum()
    }
}

/// One line of `aggregate.csv`; `seed` is `None` on seed-mean rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub base: String,
    pub seed: Option<u64>,
    pub acc_final: f64,
    pub mse_optimal: Option<f64>,
    pub mse_all: Option<f64>,
    pub settle_episode: Option<f64>,
}

fn mean_of(v: &[Option<f64>]) -> Option<f64> {
    if v.is_empty() || v.iter().any(Option::is_none) {
        return None;
    }
    Some(v.iter().flatten().sum::<f64>() / v.len() as f64)
}

/// Seed-mean of per-seed rows. Optional columns average only when every seed
/// has a value; a run that never settled makes the mean settle empty.
pub fn mean_row(rows: &[AggregateRow]) -> AggregateRow {
    let col = |f: fn(&AggregateRow) -> Option<f64>| mean_of(&rows.iter().map(f).collect::<Vec<_>>());
    AggregateRow {
        algorithm: rows[0].algorithm,
        base: rows[0].base.clone(),
        seed: None,
        acc_final: rows.iter().map(|r| r.acc_final).sum::<f64>() / rows.len() as f64,
        mse_optimal: col(|r| r.mse_optimal),
        mse_all: col(|r| r.mse_all),
        settle_episode: col(|r| r.settle_episode),
    }
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        let seed = r.seed.map_or("mean".to_string(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.algorithm,
            r.base,
            seed,
            r.acc_final,
            opt(r.mse_optimal),
            opt(r.mse_all),
            opt(r.settle_episode)
        );
    }
    out
}

pub fn parse_aggregate(text: &str, path: &str) -> Result<Vec<AggregateRow>> {
    let err = |line: usize, msg: String| CliError::Csv {
        path: path.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, h)) if h.trim_end() == AGGREGATE_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("expected header `{AGGREGATE_HEADER}`, got `{h}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 7 {
            return Err(err(n, format!("expected 7 fields, got {}", f.len())));
        }
        let num = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| err(n, format!("{name}: cannot parse `{s}`")))
        };
        let optn = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, name).map(Some)
            }
        };
        rows.push(AggregateRow {
            algorithm: f[0].parse().map_err(|m| err(n, m))?,
            base: f[1].to_string(),
            seed: match f[2] {
                "mean" => None,
                s => Some(s.parse().map_err(|_| err(n, format!("seed: cannot parse `{s}`")))?),
            },
            acc_final: num(f[3], "acc_final")?,
            mse_optimal: optn(f[4], "mse_optimal")?,
            mse_all: optn(f[5], "mse_all")?,
            settle_episode: optn(f[6], "settle_episode")?,
        });
    }
    Ok(rows)
}

/// Outcome of a sweep: aggregate rows and failed runs (`subdir: error`).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<AggregateRow>,
    pub failures: Vec<String>,
}

pub fn run_dir_name(run: &SweepRun, seed: u64) -> String {
    format!("{}__{}__seed{}", run.algorithm, run.base, seed)
}

/// Runs every tuple sequentially, writing one subdirectory per run and
/// `aggregate.csv` at the end. Failed runs are skipped and reported.
pub fn sweep(manifest: &Manifest, path: &str, long: bool, mut progress: impl FnMut(&str)) -> Result<SweepResult> {
    let base_cfg = RunConfig::from_entries(&manifest.entries, path, Defaults { long, ..Defaults::default() })?;
    let root = base_cfg.outdir.clone();
    fs::create_dir_all(&root).map_err(io_err(&root))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut loaded: Vec<(String, std::result::Result<Checkpoint, String>)> = Vec::new();
    for run in &manifest.runs {
        let base = if run.base == FRESH {
            None
        } else {
            if !loaded.iter().any(|(n, _)| *n == run.base) {
                let file = &manifest.bases.iter().find(|(n, _)| *n == run.base).expect("checked at parse").1;
                loaded.push((run.base.clone(), adapt::load_checkpoint(file).map_err(|e| e.to_string())));
            }
            Some(&loaded.iter().find(|(n, _)| *n == run.base).expect("just loaded").1)
        };
        let defaults = Defaults {
            long,
            task: if base.is_some() { TaskKind::Adapted } else { TaskKind::Original },
        };
        let mut seed_rows = Vec::new();
        for &seed in &run.seeds {
            let name = run_dir_name(run, seed);
            progress(&name);
            let result = (|| -> Result<AggregateRow> {
                let mut cfg = RunConfig::from_entries(&manifest.entries, path, defaults)?;
                cfg.train.algorithm = run.algorithm;
                cfg.train.seed = seed;
                cfg.outdir = root.join(&name);
                let b = match base {
                    None => None,
                    Some(Ok(ck)) => Some(ck),
                    Some(Err(e)) => return Err(CliError::Usage(e.clone())),
                };
                let out = execute(&cfg, b)?;
                write_outputs(&cfg, &out)?;
                let last = out.record.final_eval();
                Ok(AggregateRow {
                    algorithm: run.algorithm,
                    base: run.base.clone(),
                    seed: Some(seed),
                    acc_final: last.accuracy,
                    mse_optimal: last.mse_optimal,
                    mse_all: last.mse_all,
                    settle_episode: out.record.settle_episode().map(|e| e as f64),
                })
            })();
            match result {
                Ok(r) => seed_rows.push(r),
                Err(e) => failures.push(format!("{name}: {e}")),
            }
        }
        if !seed_rows.is_empty() {
            let mean = mean_row(&seed_rows);
            rows.extend(seed_rows);
            rows.push(mean);
        }
    }
    let agg = root.join("aggregate.csv");
    fs::write(&agg, aggregate_csv(&rows)).map_err(io_err(&agg))?;
    Ok(SweepResult { rows, failures })
}

// ---------------------------------------------------------------- report

/// One rendered table row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub base: String,
    pub algorithm: Algorithm,
    pub acc: f64,
    pub settle: Option<f64>,
    pub mse_optimal: Option<f64>,
    pub mse_all: Option<f64>,
    /// Columns holding the best value within this row's base group.
    pub best: Vec<&'static str>,
}

/// Seed-mean rows grouped by base (first appearance order), algorithms in
/// table order. Mean rows missing from the CSV are recomputed from seeds.
pub fn report_rows(rows: &[AggregateRow]) -> Vec<ReportRow> {
    let mut bases: Vec<&str> = Vec::new();
    for r in rows {
        if !bases.contains(&r.base.as_str()) {
            bases.push(&r.base);
        }
    }
    let mut out = Vec::new();
    for base in bases {
        let mut group = Vec::new();
        for alg in Algorithm::ALL {
            let of: Vec<&AggregateRow> = rows.iter().filter(|r| r.base == base && r.algorithm == alg).collect();
            if of.is_empty() {
                continue;
            }
            let mean = match of.iter().find(|r| r.seed.is_none()) {
                Some(m) => (*m).clone(),
                None => mean_row(&of.into_iter().cloned().collect::<Vec<_>>()),
            };
            group.push(ReportRow {
                base: base.to_string(),
                algorithm: alg,
                acc: mean.acc_final,
                settle: mean.settle_episode,
                mse_optimal: mean.mse_optimal,
                mse_all: mean.mse_all,
                best: Vec::new(),
            });
        }
        mark_best(&mut group);
        out.extend(group);
    }
    out
}

fn mark_best(group: &mut [ReportRow]) {
    let fmax = |v: Vec<Option<f64>>| v.into_iter().flatten().fold(f64::NEG_INFINITY, f64::max);
    let fmin = |v: Vec<Option<f64>>| v.into_iter().flatten().fold(f64::INFINITY, f64::min);
    let acc = fmax(group.iter().map(|r| Some(r.acc)).collect());
    let settle = fmin(group.iter().map(|r| r.settle).collect());
    let mo = fmin(group.iter().map(|r| r.mse_optimal).collect());
    let ma = fmin(group.iter().map(|r| r.mse_all).collect());
    for r in group.iter_mut() {
        if r.acc == acc {
            r.best.push("acc");
        }
        if r.settle == Some(settle) {
            r.best.push("epi");
        }
        if r.mse_optimal == Some(mo) {
            r.best.push("mse_optimal");
        }
        if r.mse_all == Some(ma) {
            r.best.push("mse_all");
        }
    }
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |x| format!("{x:.prec$}"))
}

/// Aligned text table (best values marked `*`) followed by a blank line and
/// the same rows as CSV.
pub fn render_report(rows: &[ReportRow]) -> String {
    let head = ["base", "algorithm", "ACC", "EPI", "MSE*", "MSEq"];
    let keys = ["", "", "acc", "epi", "mse_optimal", "mse_all"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let mut c = [
                r.base.clone(),
                r.algorithm.label().to_string(),
                format!("{:.3}", r.acc),
                cell(r.settle, 0),
                cell(r.mse_optimal, 4),
                cell(r.mse_all, 4),
            ];
            for (i, k) in keys.iter().enumerate().skip(2) {
                if r.best.contains(k) {
                    c[i].push('*');
                }
            }
            c
        })
        .collect();
    let mut width = head.map(str::len);
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i < 2 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&head.map(String::from), &mut out);
    line(&width.map(|w| "-".repeat(w)), &mut out);
    for row in &body {
        line(row, &mut out);
    }
    out.push_str("\nbase,algorithm,acc,settle_episode,mse_optimal,mse_all,best\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.base,
            r.algorithm,
            r.acc,
            opt(r.settle),
            opt(r.mse_optimal),
            opt(r.mse_all),
            r.best.join(";")
        );
    }
    out
}
