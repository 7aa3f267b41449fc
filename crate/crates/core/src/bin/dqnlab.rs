use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use dqn_adapt::adapt::{self, Provenance};
use dqn_adapt::cli::{self, CliError, Defaults, Manifest, RunConfig, TaskKind};
use dqn_adapt::nnet::BiasInit;
use dqn_adapt::oracle::{solve_grid_q, OracleVariant};
use dqn_adapt::qlearn::TrainConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dqnlab", version, about = "DQN training-trajectory and task-adaptation experiments")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the exact grid Q-table as text, then CSV.
    Oracle {
        #[arg(long, default_value = "original")]
        task: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// stationary or step_augmented
        #[arg(long, default_value = "stationary")]
        variant: String,
        /// Also list the obstacle cell in the CSV.
        #[arg(long)]
        include_obstacle: bool,
    },
    /// Train from a fresh network.
    Train {
        config: PathBuf,
        /// Full 1.5M-episode intersection budget.
        #[arg(long)]
        long: bool,
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Retrain a saved base model (task defaults to `adapted`).
    Adapt {
        #[arg(long)]
        base: PathBuf,
        config: PathBuf,
        #[arg(long)]
        long: bool,
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Run every (algorithm, base, seed) tuple of a manifest.
    Sweep {
        manifest: PathBuf,
        #[arg(long)]
        long: bool,
    },
    /// Render an aggregate.csv as a table.
    Report { aggregate: PathBuf },
    /// Build a grid base model for retraining.
    Base {
        #[arg(long, value_enum)]
        kind: BaseKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// dqn: stop once MSEq drops below this.
        #[arg(long, default_value_t = 50.0)]
        threshold: f64,
        #[arg(long, default_value_t = 2000)]
        chunk: usize,
        #[arg(long, default_value_t = 200_000)]
        max_episodes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseKind {
    Onehot,
    Dqn,
}

fn train_like(config: PathBuf, long: bool, outdir: Option<PathBuf>, base: Option<PathBuf>) -> Result<()> {
    // Load the base first so a bad path leaves no outputs behind.
    let base = base.map(|p| adapt::load_checkpoint(&p)).transpose()?;
    let task = if base.is_some() { TaskKind::Adapted } else { TaskKind::Original };
    let mut cfg = RunConfig::load(&config, Defaults { task, long })?;
    if let Some(d) = outdir {
        cfg.outdir = d;
    }
    let out = cli::execute(&cfg, base.as_ref())?;
    cli::write_outputs(&cfg, &out)?;
    println!("{}", cli::summary_line(&out));
    Ok(())
}

fn run(args: Args) -> Result<()> {
    match args.cmd {
        Cmd::Oracle {
            task,
            gamma,
            variant,
            include_obstacle,
        } => {
            let task: TaskKind = task.parse().map_err(CliError::Usage)?;
            let variant: OracleVariant = variant.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            let table = solve_grid_q(cli::grid_task(task), gamma, variant).map_err(|e| CliError::Usage(e.to_string()))?;
            print!("{}\n{}", table.to_text(), table.to_csv(include_obstacle));
        }
        Cmd::Train { config, long, outdir } => train_like(config, long, outdir, None)?,
        Cmd::Adapt {
            base,
            config,
            long,
            outdir,
        } => train_like(config, long, outdir, Some(base))?,
        Cmd::Sweep { manifest, long } => {
            let m = Manifest::load(&manifest)?;
            let total = m.run_count();
            let mut i = 0;
            let res = cli::sweep(&m, &manifest.display().to_string(), long, |name| {
                i += 1;
                eprintln!("[{i}/{total}] {name}");
            })?;
            if !res.failures.is_empty() {
                return Err(CliError::SweepFailed {
                    failed: res.failures.len(),
                    total,
                    list: res.failures.join("\n"),
                }
                .into());
            }
        }
        Cmd::Report { aggregate } => {
            let text = cli::read_input(&aggregate)?;
            let rows = cli::parse_aggregate(&text, &aggregate.display().to_string())?;
            print!("{}", cli::render_report(&cli::report_rows(&rows)));
        }
        Cmd::Base {
            kind,
            seed,
            out,
            threshold,
            chunk,
            max_episodes,
        } => {
            let config = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let (net, algorithm, episodes, summary) = match kind {
                BaseKind::Onehot => {
                    let r = adapt::build_onehot_base(&config, BiasInit::Uniform)?;
                    let s = format!("acc_final={}", r.final_eval().accuracy);
                    (r.network, "supervised", config.episodes, s)
                }
                BaseKind::Dqn => {
                    let b = adapt::build_dqn_base(&config, BiasInit::Uniform, threshold, chunk, max_episodes)?;
                    let s = format!("mse_optimal={:.4} mse_all={:.4}", b.mse_optimal, b.mse_all);
                    (b.network, "alt_random_expert", b.episodes, s)
                }
            };
            let provenance = Provenance {
                config_hash: adapt::sha256_hex(&format!("base {algorithm} seed={seed} threshold={threshold} chunk={chunk}")),
                env: "grid".into(),
                task: "original".into(),
                algorithm: algorithm.into(),
                episodes: episodes as u64,
                seed,
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            adapt::save_checkpoint(&net, &provenance, &out)?;
            println!("{algorithm} base episodes={episodes} {summary} base_id={}", provenance.id());
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<CliError>() {
        Some(c) => c.exit_code() as u8,
        None => 2,
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
