use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use prefstack::cluster::Linkage;
use prefstack::distance::Metric;
use prefstack::eval::{export_report, loocv, paired_t_test, report_csv, Method};
use prefstack::infer::{Engine, Resolution};
use prefstack::io::{load_demos, load_model, load_task, save_demos, save_model, save_task};
use prefstack::synth::{bookcase_task, generate, preset};
use prefstack::train::{train, TrainConfig};
use prefstack::TaskDefinition;
use prefstack_server::console::run_console;
use prefstack_server::{serve, AppState, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "prefstack", version, about = "Learn assembly preferences and predict assistive actions")]
struct Cli {
    /// Default seed for training, evaluation, generation and sessions.
    #[arg(long, global = true, env = "PREFSTACK_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainOpts {
    #[arg(long, default_value = "average")]
    linkage: Linkage,
    #[arg(long, default_value = "mod")]
    metric: Metric,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a directory of demonstrations.
    Train {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Leave-one-out evaluation of one or more methods.
    Eval {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        demos: PathBuf,
        /// two-stage, event-only or primary; repeat for several (default: all).
        #[arg(long = "method")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Per-step accuracy CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Generate a synthetic corpus from a preset.
    Gen {
        /// Task definition; the built-in bookcase task when omitted.
        #[arg(long)]
        task: Option<PathBuf>,
        #[arg(long, default_value = "fig4-like")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the task definition used.
        #[arg(long)]
        task_out: Option<PathBuf>,
    },
    /// Interactive prediction loop on stdin/stdout.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "two-stage")]
        resolution: String,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        model_dir: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Require explicit feedback before every primary action.
        #[arg(long)]
        strict: bool,
    },
}

fn init_logging(default: &str) {
    let filter = EnvFilter::try_from_env("PREFSTACK_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr)
        .init();
}

fn parse_resolution(s: &str) -> Result<Resolution> {
    match s {
        "two-stage" => Ok(Resolution::TwoStage),
        "event-only" => Ok(Resolution::EventOnly),
        other => bail!("unknown resolution `{other}` (expected two-stage or event-only)"),
    }
}

fn load_task_or_builtin(path: Option<&PathBuf>) -> Result<TaskDefinition> {
    match path {
        Some(p) => Ok(load_task(p)?),
        None => Ok(bookcase_task()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let seed = cli.seed;
    match cli.command {
        Command::Train {
            task,
            demos,
            out,
            opts,
        } => {
            init_logging("warn");
            let task = load_task(&task)?;
            let demos = load_demos(&demos, &task)?;
            let config = TrainConfig {
                linkage: opts.linkage,
                metric: opts.metric,
                seed,
            };
            let model = train(&demos, &task, &config)?;
            save_model(&out, &model)?;
            println!(
                "trained on {} users: {} high-level clusters ({} with 2+ members), {} event identities",
                demos.len(),
                model.high_clusters.len(),
                model.dominant_high_clusters(),
                model.low_clusters.len()
            );
        }
        Command::Eval {
            task,
            demos,
            methods,
            trials,
            out,
            opts,
        } => {
            init_logging("warn");
            let task = load_task(&task)?;
            let demos = load_demos(&demos, &task)?;
            let config = TrainConfig {
                linkage: opts.linkage,
                metric: opts.metric,
                seed,
            };
            let methods = if methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                methods
            };
            let mut reports = Vec::new();
            for m in &methods {
                let r = loocv(&demos, &task, *m, trials, seed, &config)?;
                println!("{:<12} mean {:.4}  stderr {:.4}", m.tag(), r.mean(), r.stderr());
                reports.push(r);
            }
            for i in 0..reports.len() {
                for j in i + 1..reports.len() {
                    let t = paired_t_test(&reports[i].per_user_means(), &reports[j].per_user_means());
                    match t {
                        Ok(t) => println!(
                            "{} vs {}: t({}) = {:.4}, p = {:.4}",
                            reports[i].method, reports[j].method, t.df, t.t, t.p
                        ),
                        Err(e) => println!("{} vs {}: {e}", reports[i].method, reports[j].method),
                    }
                }
            }
            match out {
                Some(path) => export_report(&reports, &path)?,
                None => print!("{}", report_csv(&reports)?),
            }
        }
        Command::Gen {
            task,
            preset: name,
            out,
            task_out,
        } => {
            init_logging("warn");
            let task = load_task_or_builtin(task.as_ref())?;
            let preset = preset(&name).with_context(|| format!("unknown preset `{name}`"))?;
            let corpus = generate(&preset, &task, seed)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            save_demos(&out, &corpus.demos)?;
            if let Some(path) = task_out {
                save_task(&path, &task)?;
            }
            println!("wrote {} demonstrations to {}", corpus.demos.len(), out.display());
        }
        Command::Predict { model, resolution } => {
            init_logging("warn");
            let resolution = parse_resolution(&resolution)?;
            let engine = Arc::new(Engine::new(load_model(&model)?)?);
            let stdin = io::stdin();
            let stdout = io::stdout();
            run_console(engine, resolution, seed, stdin.lock(), stdout.lock())?;
            io::stdout().flush()?;
        }
        Command::Serve {
            model_dir,
            addr,
            strict,
        } => {
            init_logging("info");
            let state = AppState::new(ServiceConfig {
                model_dir,
                auto_resolve: !strict,
                default_seed: seed,
            })?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                serve(listener, Arc::new(state)).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}
