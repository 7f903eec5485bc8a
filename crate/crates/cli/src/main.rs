//! `packetize`: delay- and energy-optimal packetization intervals from the
//! command line.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 unstable, 4 infeasible delay
//! budget, 5 simulated divergence under `--require-stable`.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use packetize::{CodingProfile, Mode, SimConfig};

use config::{parse_coding, Command, Format, RunConfig, Scale, SweepSpec, SweepVar, DEFAULT_SEED, DEFAULT_SYMBOLS};
use error::CliError;

#[derive(Parser)]
#[command(name = "packetize", version, about = "Delay- and energy-optimal packetization intervals")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Delay breakdown, moments and stability at one parameter point.
    Analyze(CommonArgs),
    /// One row per value of T, beta, H or R.
    Sweep(SweepArgs),
    /// Delay-optimal interval, or energy-optimal under --dmax.
    Optimize(OptimizeArgs),
    /// Discrete-event simulation with analytic comparison.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Efficient,
    Slotted,
}

/// Parameter flags; each overrides the config file. Without a file the
/// defaults are N=16, H=30, lambda=10, R=300, beta=1e-3, T=1, efficient mode, Pt=1.
#[derive(Args)]
struct CommonArgs {
    /// Bits per symbol.
    #[arg(long = "n")]
    n: Option<u32>,
    /// Header bits per packet.
    #[arg(long)]
    header: Option<u32>,
    /// Symbol arrival rate in symbols/s.
    #[arg(long)]
    lambda: Option<f64>,
    /// Channel rate in bit/s.
    #[arg(long)]
    rate: Option<f64>,
    /// Bit error probability.
    #[arg(long)]
    ber: Option<f64>,
    /// Packetization interval in seconds.
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Transmit power in watts.
    #[arg(long)]
    power: Option<f64>,
    /// Channel codes as `rd,rh,bd,bh`: payload and header code rates, then their bit error probabilities.
    #[arg(long, value_parser = parse_coding)]
    coding: Option<CodingProfile>,
    /// JSON run configuration, or a JSON document previously written by this tool.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SimArgs {
    /// Symbols to simulate, warmup included.
    #[arg(long)]
    symbols: Option<u64>,
    /// Warmup symbols discarded from the statistics; 10% by default.
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent random stream for the same seed.
    #[arg(long)]
    replication: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Swept variable.
    #[arg(long, value_enum)]
    var: Option<SweepVar>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    /// Number of points, 50 by default.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
    /// Use the delay-optimal T at every point.
    #[arg(long)]
    optimize: bool,
    /// Add simulated columns.
    #[arg(long)]
    simulate: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mean-delay budget in seconds; switches to energy optimization.
    #[arg(long)]
    dmax: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Exit with code 5 if the queue diverges.
    #[arg(long)]
    require_stable: bool,
    /// Write the per-packet trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn base_config(command: Command, common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::defaults(command),
    };
    cfg.command = command;
    let p = &mut cfg.params;
    if let Some(v) = common.n {
        p.symbol_bits = v;
    }
    if let Some(v) = common.header {
        p.header_bits = v;
    }
    if let Some(v) = common.lambda {
        p.arrival_rate = v;
    }
    if let Some(v) = common.rate {
        p.channel_rate = v;
    }
    if let Some(v) = common.ber {
        p.bit_error_prob = v;
    }
    if let Some(v) = common.interval {
        p.interval = v;
    }
    if let Some(m) = common.mode {
        p.mode = match m {
            ModeArg::Efficient => Mode::Efficient,
            ModeArg::Slotted => Mode::Slotted,
        };
    }
    if let Some(v) = common.power {
        p.transmit_power = v;
    }
    if let Some(c) = common.coding {
        p.coding = Some(c);
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    if common.out.is_some() {
        cfg.output_path = common.out.clone();
    }
    Ok(cfg)
}

fn apply_sim(cfg: &mut RunConfig, args: &SimArgs) {
    let any = args.symbols.is_some() || args.warmup.is_some() || args.seed.is_some() || args.replication.is_some();
    if cfg.sim.is_none() && !any {
        return;
    }
    let base = cfg.sim_or_default();
    let symbols = args.symbols.unwrap_or(base.num_symbols);
    let mut sim = SimConfig::new(symbols, args.seed.unwrap_or(base.seed));
    sim.max_retransmissions_guard = base.max_retransmissions_guard;
    sim.replication = args.replication.unwrap_or(base.replication);
    // a new symbol count resets the warmup to its default share
    if let Some(w) = args.warmup.or((args.symbols.is_none()).then_some(base.warmup_symbols)) {
        sim.warmup_symbols = w;
    }
    cfg.sim = Some(sim);
}

fn build(cmd: &Cmd) -> Result<RunConfig, CliError> {
    let cfg = match cmd {
        Cmd::Analyze(common) => base_config(Command::Analyze, common)?,
        Cmd::Sweep(a) => {
            let mut cfg = base_config(Command::Sweep, &a.common)?;
            apply_sim(&mut cfg, &a.sim);
            let prior = cfg.sweep;
            let variable = a.var.or(prior.map(|s| s.variable));
            let from = a.from.or(prior.map(|s| s.from));
            let to = a.to.or(prior.map(|s| s.to));
            if let (Some(variable), Some(from), Some(to)) = (variable, from, to) {
                cfg.sweep = Some(SweepSpec {
                    variable,
                    from,
                    to,
                    points: a.points.or(prior.map(|s| s.points)).unwrap_or(50),
                    scale: a.scale.or(prior.map(|s| s.scale)).unwrap_or_default(),
                    optimize: a.optimize || prior.is_some_and(|s| s.optimize),
                    simulate: a.simulate || prior.is_some_and(|s| s.simulate),
                });
            } else {
                cfg.sweep = None;
            }
            cfg
        }
        Cmd::Optimize(a) => {
            let mut cfg = base_config(Command::Optimize, &a.common)?;
            if a.dmax.is_some() {
                cfg.d_max = a.dmax;
            }
            cfg
        }
        Cmd::Simulate(a) => {
            let mut cfg = base_config(Command::Simulate, &a.common)?;
            apply_sim(&mut cfg, &a.sim);
            if cfg.sim.is_none() {
                cfg.sim = Some(SimConfig::new(DEFAULT_SYMBOLS, DEFAULT_SEED));
            }
            cfg.require_stable |= a.require_stable;
            if a.trace.is_some() {
                cfg.trace_path = a.trace.clone();
            }
            cfg
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cmd: &Cmd) -> Result<(), CliError> {
    let cfg = build(cmd)?;
    let (report, deferred) = match cfg.command {
        Command::Analyze => (commands::analyze(&cfg)?, None),
        Command::Sweep => (commands::sweep(&cfg)?, None),
        Command::Optimize => (commands::optimize(&cfg)?, None),
        Command::Simulate => commands::simulate(&cfg)?,
    };
    output::emit(&cfg, &report)?;
    deferred.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("packetize: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
