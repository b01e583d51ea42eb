use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qubitenc::experiment::{
    cmd_landscape, cmd_qaoa, cmd_solve, cmd_sweep_depth, load_problem, run_oracle, Evaluation, ExperimentConfig,
    LandscapeSection, NoisePreset, OracleConfig, OracleKind, ProblemSpec, QaoaSection, WORKERS_ENV,
};
use qubitenc::graphs::PairGraph;
use qubitenc::optimizer::Method;
use qubitenc::Error;

#[derive(Parser)]
#[command(name = "qubitenc", version, about = "Qubit-efficient QUBO encodings on a simulated quantum device")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance and write it as JSON.
    Generate(GenerateArgs),
    /// Compute the reference minimum and maximum of an instance.
    Oracle(OracleArgs),
    /// Optimize one encoding with multi-start and sample solutions.
    Solve(RunArgs),
    /// Repeat `solve` over several ansatz depths.
    SweepDepth(SweepArgs),
    /// Cost along one parameter around the optimum, exact and with shots.
    Landscape(LandscapeArgs),
    /// Layer-wise QAOA grid search on the complete encoding.
    Qaoa(QaoaArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Maxcut,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n_c: usize,
    /// Graph degree for max-cut instances.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleMethod {
    Auto,
    Exhaustive,
    Heuristic,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    method: OracleMethod,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Noiseless,
    Current,
    Improved,
    Optimistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptMethod {
    Cobyla,
    NelderMead,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Ansatz depth; replaces the configured depth list.
    #[arg(long)]
    depth: Option<usize>,
    /// Evaluate with this many shots instead of the configured evaluation.
    #[arg(long)]
    n_meas: Option<u64>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<OptMethod>,
    #[arg(long, value_enum)]
    noise_preset: Option<Preset>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated depths.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
}

#[derive(Args)]
struct LandscapeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    theta_index: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated shot counts.
    #[arg(long, value_delimiter = ',')]
    shots: Option<Vec<u64>>,
}

#[derive(Args)]
struct QaoaArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    p_max: Option<usize>,
}

fn load_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::load(&a.config)?;
    if let Some(d) = &a.output_dir {
        c.output_dir = d.clone();
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(r) = a.restarts {
        c.restarts = r;
    }
    if let Some(l) = a.depth {
        c.depths = vec![l];
    }
    if let Some(m) = a.n_meas {
        c.evaluation = Evaluation::Shots { n_meas: m };
    }
    if let Some(m) = a.max_evals {
        c.optimizer.max_evals = m;
    }
    if let Some(m) = a.method {
        c.optimizer.method = match m {
            OptMethod::Cobyla => Method::CobylaStyle,
            OptMethod::NelderMead => Method::NelderMead,
        };
    }
    if let Some(p) = a.noise_preset {
        c.noise = None;
        c.noise_preset = Some(match p {
            Preset::Noiseless => NoisePreset::Noiseless,
            Preset::Current => NoisePreset::Current,
            Preset::Improved => NoisePreset::Improved,
            Preset::Optimistic => NoisePreset::Optimistic,
        });
    }
    c.validate()?;
    Ok(c)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let spec = match a.kind {
                Kind::Random => ProblemSpec::Random { n_c: a.n_c, seed: Some(a.seed) },
                Kind::Maxcut => {
                    let d = a.d.ok_or_else(|| Error::InvalidParameter("--d is required for max-cut".into()))?;
                    ProblemSpec::Maxcut { n_c: a.n_c, d, seed: Some(a.seed) }
                }
            };
            let inst = load_problem(&spec, a.seed)?;
            std::fs::write(&a.out, inst.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
            if matches!(a.kind, Kind::Maxcut) {
                let g = PairGraph::from_instance(&inst)?;
                let path = a.out.with_extension("graph.json");
                std::fs::write(&path, serde_json::to_string_pretty(&g)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Oracle(a) => {
            let text = std::fs::read_to_string(&a.instance)
                .map_err(|e| Error::InvalidParameter(format!("cannot read instance {}: {e}", a.instance.display())))?;
            let inst = qubitenc::qubo::QuboInstance::from_json(&text)?;
            let method = match a.method {
                OracleMethod::Auto => OracleKind::Auto,
                OracleMethod::Exhaustive => OracleKind::Exhaustive,
                OracleMethod::Heuristic => OracleKind::Heuristic,
            };
            let summary = run_oracle(&inst, &OracleConfig { method, budget: a.budget }, a.seed)?;
            let json = serde_json::to_string_pretty(&summary)?;
            match a.out {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{json}"),
            }
        }
        Command::Solve(a) => {
            let r = cmd_solve(&load_config(&a)?)?;
            print_json(&r.aggregate)?;
        }
        Command::SweepDepth(a) => {
            let mut c = load_config(&a.run)?;
            if let Some(d) = a.depths {
                c.depths = d;
            }
            print_json(&cmd_sweep_depth(&c)?)?;
        }
        Command::Landscape(a) => {
            let mut c = load_config(&a.run)?;
            let mut s = c.landscape.clone().unwrap_or(LandscapeSection { theta_index: 0, grid: 50, n_meas: Vec::new() });
            if let Some(t) = a.theta_index {
                s.theta_index = t;
            }
            if let Some(g) = a.grid {
                s.grid = g;
            }
            if let Some(m) = a.shots {
                s.n_meas = m;
            }
            c.landscape = Some(s);
            let r = cmd_landscape(&c)?;
            print_json(&r.theta_opt)?;
        }
        Command::Qaoa(a) => {
            let mut c = load_config(&a.run)?;
            let mut s = c.qaoa.clone().unwrap_or(QaoaSection { p_max: 3, grid: (50, 50), refine: true });
            if let Some(p) = a.p_max {
                s.p_max = p;
            }
            c.qaoa = Some(s);
            print_json(&cmd_qaoa(&c)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {WORKERS_ENV} must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let core = e.downcast_ref::<Error>();
            match core {
                Some(c) => eprintln!("error: {c}"),
                None => eprintln!("error: {e:#}"),
            }
            let config = core.is_some_and(Error::is_config_error);
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
