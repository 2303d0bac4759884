//! Command-line entry point: `igrl <subcommand> [flags]`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::agent::{train, write_log, TrainConfig};
use crate::baselines::{load_marl, marl_train, save_marl, FixedTime, Greedy, MarlPolicy};
use crate::eval::{
    emit_report, evaluate, load_results, paired_differences, save_results, summarize, EvalError,
    EpisodeResult, LearnedPolicy, Policy, Regime, DEFAULT_EVAL_SEEDS,
};
use crate::graphenc::{GraphEncoder, GraphMode};
use crate::nn::{load_params, save_params};
use crate::scenario::{
    generate_demand, generate_network, load_network, save_network, save_trips, GenerationParams, RoadNetwork,
};
use crate::sim::{SimState, TscAction};

#[derive(Debug, Parser)]
#[command(name = "igrl", version, about = "Graph reinforcement learning for traffic signal control")]
pub struct Cli {
    /// Seed of the subcommand's random choices (default 0; for `train`,
    /// overrides the config's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random road network.
    GenNet {
        /// Number of intersections (default: drawn from 2..=6).
        #[arg(long)]
        intersections: Option<usize>,
        /// Network file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a trip table for a network.
    GenDemand {
        /// Network file.
        #[arg(long)]
        network: PathBuf,
        /// Traffic regime: `default` (1 departure/s) or `heavy` (2/s).
        #[arg(long, default_value = "default")]
        regime: Regime,
        /// Expected departures per second; overrides the regime.
        #[arg(long)]
        rate: Option<f64>,
        /// Trips depart during this many seconds.
        #[arg(long, default_value_t = 3600.0)]
        horizon: f64,
        /// Trip file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model (or the per-intersection MARL baseline).
    Train {
        /// Training config (TOML); defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Environment steps, overriding the config.
        #[arg(long)]
        steps: Option<u64>,
        /// Train independent per-intersection learners instead.
        #[arg(long)]
        marl: bool,
        /// Output directory for parameters, logs and checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a policy on a network.
    Eval {
        /// `fixed`, `greedy`, a model checkpoint path, or `marl:<path>`.
        #[arg(long)]
        policy: String,
        /// Network file.
        #[arg(long)]
        network: PathBuf,
        /// Traffic regime: `default` (1 departure/s) or `heavy` (2/s).
        #[arg(long, default_value = "default")]
        regime: Regime,
        /// Number of scenario seeds, starting at --seed.
        #[arg(long, default_value_t = DEFAULT_EVAL_SEEDS)]
        seeds: usize,
        /// Report directory; also receives `<policy>.results`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired comparison of two results files.
    Compare {
        /// First `.results` file; deltas are a − b.
        #[arg(long)]
        a: PathBuf,
        /// Second `.results` file.
        #[arg(long)]
        b: PathBuf,
        /// Report directory (optional).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the observation graph of a network state.
    InspectGraph {
        /// Network file.
        #[arg(long)]
        network: PathBuf,
        /// Observation mode: `lane` or `vehicle`.
        #[arg(long, default_value = "lane")]
        mode: GraphMode,
        /// Simulated seconds (fixed-time control, default demand) before
        /// the snapshot.
        #[arg(long, default_value_t = 0)]
        steps: u64,
        /// Dump every node and edge.
        #[arg(long)]
        full: bool,
    },
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn jobs(j: Option<usize>) -> usize {
    j.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
}

fn network(path: &Path) -> Result<Arc<RoadNetwork>> {
    Ok(Arc::new(load_network(path).with_context(|| format!("loading network {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let jobs = jobs(cli.jobs);
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::GenNet { intersections, out: path } => {
            let params = intersections.map_or_else(GenerationParams::default, GenerationParams::with_intersections);
            let net = generate_network(seed, &params)?;
            save_network(&net, &path)?;
            writeln!(out, "{}: {} intersections, {} lanes, {} connections", path.display(), net.tsc_count(), net.lanes.len(), net.connections.len())?;
        }
        Command::GenDemand { network: n, regime, rate, horizon, out: path } => {
            let net = network(&n)?;
            let trips = generate_demand(seed, &net, rate.unwrap_or(regime.rate()), horizon)?;
            save_trips(&trips, &path)?;
            writeln!(out, "{}: {} trips", path.display(), trips.len())?;
        }
        Command::Train { config, steps, marl, out: dir } => {
            let mut cfg = match &config {
                Some(p) => TrainConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
                None => TrainConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.jobs.is_some() {
                cfg.jobs = jobs;
            }
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            std::fs::create_dir_all(&dir)?;
            let (log, rewards) = if marl {
                let (params, log, rewards) = marl_train(&cfg)?;
                save_marl(&params, dir.join("marl.bin"))?;
                (log, rewards)
            } else {
                let o = train(&cfg, Some(&dir))?;
                save_params(&o.params, dir.join("model.bin"))?;
                (o.log, o.episode_rewards)
            };
            write_log(create(&dir.join("train_log.csv"))?, &log)?;
            let mut w = create(&dir.join("episode_rewards.csv"))?;
            writeln!(w, "episode,reward")?;
            for (i, r) in rewards.iter().enumerate() {
                writeln!(w, "{i},{r}")?;
            }
            w.flush()?;
            writeln!(out, "trained {} environment steps, {} episodes -> {}", cfg.total_steps, rewards.len(), dir.display())?;
        }
        Command::Eval { policy, network: n, regime, seeds, out: dir } => {
            let net = network(&n)?;
            let policy = AnyPolicy::parse(&policy)?;
            let seeds: Vec<u64> = (0..seeds as u64).map(|k| seed + k).collect();
            let results = policy.evaluate(&net, regime, &seeds, jobs)?;
            std::fs::create_dir_all(&dir)?;
            save_results(dir.join(format!("{}.results", policy.name())), &results)?;
            emit_report(&dir, &results, &[])?;
            print_summary(out, &results)?;
        }
        Command::Compare { a, b, out: dir } => {
            let (ra, rb) = (load_results(&a)?, load_results(&b)?);
            let p = paired_differences(&ra, &rb)?;
            let mut all = ra;
            all.extend(rb);
            print_summary(out, &all)?;
            let fmt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
            writeln!(out, "paired {} - {}: {} pairs, {} excluded (censored)", p.a, p.b, p.deltas.len(), p.excluded)?;
            writeln!(out, "  mean {:.3} s, median {:.3} s, sd {:.3} s, t {}, p {}", p.mean, p.median, p.sd, fmt(p.t), fmt(p.p))?;
            if let Some(d) = dir {
                std::fs::create_dir_all(&d)?;
                emit_report(&d, &all, std::slice::from_ref(&p))?;
            }
        }
        Command::InspectGraph { network: n, mode, steps, full } => {
            let net = network(&n)?;
            let trips = Arc::new(generate_demand(seed, &net, Regime::Default.rate(), steps as f64)?);
            let mut state = SimState::reset(net.clone(), trips, seed)?;
            let mut fixed = FixedTime;
            for _ in 0..steps {
                let a = fixed.act(&state)?;
                state.step(&a)?;
            }
            let g = GraphEncoder::new(net, mode, Default::default()).encode(&state);
            if full {
                write!(out, "{}", g.edge_list_text())?;
            } else {
                writeln!(out, "mode {} at t={} s: {} nodes", mode.as_str(), state.clock(), g.node_count())?;
                for &t in mode.node_types() {
                    writeln!(out, "  nodes {:<11} {}", t.as_str(), g.count(t))?;
                }
                for &e in mode.edge_types() {
                    writeln!(out, "  edges {:<22} {}", format!("{e:?}"), g.edge_count(e))?;
                }
            }
        }
    }
    Ok(())
}

fn print_summary(out: &mut dyn Write, results: &[EpisodeResult]) -> Result<()> {
    writeln!(out, "{:<16} {:>7} {:>4} {:>9} {:>8} {:>9} {:>9}", "policy", "regime", "runs", "completed", "censored", "mean_s", "median_s")?;
    for s in summarize(results) {
        writeln!(
            out,
            "{:<16} {:>7} {:>4} {:>9} {:>8} {:>9.2} {:>9.2}",
            s.policy, s.regime, s.runs, s.completed, s.censored, s.mean, s.median
        )?;
    }
    Ok(())
}

/// Every policy the command line can name.
#[derive(Clone)]
pub enum AnyPolicy {
    Fixed,
    Greedy,
    Learned(LearnedPolicy),
    Marl(MarlPolicy),
}

impl AnyPolicy {
    /// `fixed`, `greedy`, `marl:<path>` or a model checkpoint path.
    pub fn parse(spec: &str) -> Result<Self> {
        let label = |p: &Path| p.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
        Ok(match spec {
            "fixed" => AnyPolicy::Fixed,
            "greedy" => AnyPolicy::Greedy,
            _ => match spec.strip_prefix("marl:") {
                Some(path) => {
                    let p = Path::new(path);
                    let params = load_marl(p).with_context(|| format!("loading MARL parameters {path}"))?;
                    AnyPolicy::Marl(MarlPolicy::new(format!("marl-{}", label(p)), params))
                }
                None => {
                    let p = Path::new(spec);
                    if !p.exists() {
                        bail!("unknown policy `{spec}` (expected fixed, greedy, marl:<path> or a checkpoint file)");
                    }
                    let params = load_params(p, None).with_context(|| format!("loading checkpoint {spec}"))?;
                    AnyPolicy::Learned(LearnedPolicy::new(label(p), params))
                }
            },
        })
    }

    pub fn evaluate(&self, net: &Arc<RoadNetwork>, regime: Regime, seeds: &[u64], jobs: usize) -> Result<Vec<EpisodeResult>, EvalError> {
        match self {
            AnyPolicy::Fixed => evaluate(&FixedTime, net, regime, seeds, jobs),
            AnyPolicy::Greedy => evaluate(&Greedy, net, regime, seeds, jobs),
            AnyPolicy::Learned(p) => evaluate(p, net, regime, seeds, jobs),
            AnyPolicy::Marl(p) => evaluate(p, net, regime, seeds, jobs),
        }
    }
}

impl Policy for AnyPolicy {
    fn name(&self) -> String {
        match self {
            AnyPolicy::Fixed => FixedTime.name(),
            AnyPolicy::Greedy => Greedy.name(),
            AnyPolicy::Learned(p) => p.name(),
            AnyPolicy::Marl(p) => p.name(),
        }
    }

    fn prepare(&mut self, net: &Arc<RoadNetwork>) -> Result<(), EvalError> {
        match self {
            AnyPolicy::Fixed | AnyPolicy::Greedy => Ok(()),
            AnyPolicy::Learned(p) => p.prepare(net),
            AnyPolicy::Marl(p) => p.prepare(net),
        }
    }

    fn act(&mut self, state: &SimState) -> Result<Vec<TscAction>, EvalError> {
        match self {
            AnyPolicy::Fixed => FixedTime.act(state),
            AnyPolicy::Greedy => Greedy.act(state),
            AnyPolicy::Learned(p) => p.act(state),
            AnyPolicy::Marl(p) => p.act(state),
        }
    }
}
