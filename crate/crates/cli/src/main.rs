use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use bumprl::config::RunConfig;
use bumprl::harness::{
    compare_rewards, evaluate, sweep_velocities, train, velocity_grid, ConstantVelocity, EvalReport, Policy,
};
use bumprl::protocol::Server;
use bumprl::{BumpEnv, DdpgAgent};

/// Half-car bump crossing: train, evaluate and serve velocity-modulation policies.
#[derive(Debug, Parser)]
#[command(name = "bumprl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a DDPG agent and write its checkpoint and per-episode metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a constant command on the evaluation track.
    Eval(EvalArgs),
    /// Peak acceleration against constant commanded velocity over a single bump.
    Sweep(SweepArgs),
    /// Train every reward variant on every seed and compare them on the held-out track.
    Compare(CompareArgs),
    /// Expose the simulator over TCP until a client sends close.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: the config's output.dir]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Master seed [default: the config's train.seed]
    #[arg(long)]
    seed: Option<u64>,
    /// Number of episodes [default: the config's train.episodes]
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Open-loop baseline command in m/s.
    #[arg(long)]
    constant_velocity: Option<f64>,
    /// Number of evaluation episodes [default: the config's train.eval_episodes]
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    min: f64,
    #[arg(long, default_value_t = 1.0)]
    max: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// Episodes per training run [default: the config's train.episodes]
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Listen address; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
}

/// Resolve, validate and echo the config.
fn prepare(mut cfg: RunConfig, out: &Path) -> Result<RunConfig> {
    cfg.output.dir = out.to_path_buf();
    cfg.validate()?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    cfg.write_resolved(out)?;
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(args.common.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(n) = args.episodes {
        cfg.train.episodes = n;
    }
    let out = out_dir(&args.common, &cfg);
    let cfg = prepare(cfg, &out)?;
    let tc = cfg.train_config();
    let mut env = BumpEnv::new(tc.env.clone())?;
    let report = train(&tc, &mut env, Some(&out))?;
    let last = report.episodes.last().expect("episodes > 0");
    println!(
        "trained {} episodes; last return {:.3}, peak {:.4} m/s^2, mean velocity {:.3} m/s; outputs in {}",
        report.episodes.len(),
        last.episode_return,
        last.peak_abs_acc_dev,
        last.mean_velocity,
        out.display()
    );
    Ok(())
}

/// The evaluation track: the configured fixed track if any, else the held-out one.
fn eval_env(cfg: &RunConfig) -> Result<BumpEnv> {
    let tc = cfg.train_config();
    if cfg.terrain.fixed_track.is_some() {
        let mut env_cfg = tc.env;
        env_cfg.episode.randomize_track = false;
        Ok(BumpEnv::new(env_cfg)?)
    } else {
        Ok(tc.held_out_env()?)
    }
}

fn print_metrics(report: &EvalReport) {
    let m = &report.metrics;
    println!(
        "{}: peak_abs_acc_dev {:.4} m/s^2, rmse_acc_dev {:.4} m/s^2, rmse_vel_tracking {:.4} m/s, mean_velocity {:.4} m/s, return {:.3}",
        report.label, m.peak_abs_acc_dev, m.rmse_acc_dev, m.rmse_vel_tracking, m.mean_velocity, m.episode_return
    );
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let policy: Box<dyn Policy> = match (&args.checkpoint, args.constant_velocity) {
        (Some(_), Some(_)) => bail!("give exactly one of --checkpoint and --constant-velocity, not both"),
        (None, None) => bail!("give exactly one of --checkpoint and --constant-velocity"),
        (Some(path), None) => {
            let agent = DdpgAgent::load_checkpoint(path)
                .with_context(|| format!("cannot load checkpoint {}", path.display()))?;
            Box::new(agent)
        }
        (None, Some(v)) => {
            if !v.is_finite() || v < 0.0 {
                bail!("--constant-velocity must be a finite value >= 0, got {v}");
            }
            Box::new(ConstantVelocity(v))
        }
    };
    let mut cfg = load_config(args.common.config.as_deref())?;
    if let Some(n) = args.episodes {
        cfg.train.eval_episodes = n;
    }
    let out = out_dir(&args.common, &cfg);
    let cfg = prepare(cfg, &out)?;
    let mut env = eval_env(&cfg)?;
    let report = evaluate(policy.as_ref(), &mut env, cfg.train.eval_episodes, cfg.reward.x_dot_d, cfg.terrain.held_out_seed)?;
    report.write(&out)?;
    print_metrics(&report);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let grid = velocity_grid(args.min, args.max, args.step)?;
    let cfg = load_config(args.common.config.as_deref())?;
    let out = out_dir(&args.common, &cfg);
    let cfg = prepare(cfg, &out)?;
    let rows = sweep_velocities(&cfg.env_config(), &cfg.terrain.sweep_track, &grid, Some(&out))?;
    for r in &rows {
        println!("v = {:.3} m/s: peak_abs_acc_dev {:.4} m/s^2", r.velocity, r.metrics.peak_abs_acc_dev);
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    if args.seeds.is_empty() {
        bail!("--seeds needs at least one seed");
    }
    let mut cfg = load_config(args.common.config.as_deref())?;
    if let Some(n) = args.episodes {
        cfg.train.episodes = n;
    }
    let out = out_dir(&args.common, &cfg);
    let cfg = prepare(cfg, &out)?;
    let report = compare_rewards(&cfg.train_config(), &args.seeds)?;
    report.write(&out)?;
    print!("{}", report.text_table());
    if !report.seed_audit_ok {
        bail!("seed audit failed: variants saw different episode seeds");
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.validate()?;
    let env_cfg = cfg.env_config();
    let server = Server::bind(&args.addr)?;
    let addr: SocketAddr = server.local_addr()?;
    // scripts read the bound address from the first stdout line
    println!("listening on {addr}");
    info!("serving {} reward", env_cfg.reward.variant.name());
    server.serve(|| BumpEnv::new(env_cfg.clone()))?;
    println!("session closed");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
