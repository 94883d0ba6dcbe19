use std::fs;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hypforge_core::compile::{compile, export_pddl};
use hypforge_core::eval::{render_table, run_benchmark, BenchConfig, Noise};
use hypforge_core::lts::{lint, parse_named};
use hypforge_core::model::{CostParams, Hypothesis, ModelSpec, Step, Trace};
use hypforge_core::search::{find_top_k, SearchConfig};
use hypforge_core::Diagnostic;
use hypforge_service::store::ModelStore;
use hypforge_service::{AppState, Env, ServiceConfig};

#[derive(Parser)]
#[command(name = "hypforge", version, about = "Plausible hypotheses for observation traces over LTS++ models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and print its diagnostics.
    Parse { model: PathBuf },
    /// Parse plus lint warnings.
    Lint { model: PathBuf },
    /// Print the top-k hypotheses for a trace (one observation per line).
    Solve(SolveArgs),
    /// Write the compiled planning problem as PDDL domain and problem files.
    ExportPddl {
        model: PathBuf,
        trace: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Run the random-model ground-truth benchmark.
    Bench(BenchArgs),
    /// Start the HTTP service (HYPFORGE_PORT, HYPFORGE_STORE).
    Serve,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long, default_value_t = CostParams::default().discard_cost)]
    discard_cost: u64,
    #[arg(long, default_value_t = CostParams::default().good_entry_cost)]
    good_cost: u64,
    #[arg(long, default_value_t = CostParams::default().bad_entry_cost)]
    bad_cost: u64,
    #[arg(long, default_value_t = CostParams::default().unobserved_step_cost)]
    unobserved_cost: u64,
}

impl CostArgs {
    fn params(&self) -> Result<CostParams> {
        Ok(CostParams::new(self.discard_cost, self.good_cost, self.bad_cost, self.unobserved_cost)?)
    }
}

#[derive(Args)]
struct SolveArgs {
    model: PathBuf,
    trace: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Search time limit, e.g. 60s, 5m, 500ms.
    #[arg(long, default_value = "300s", value_parser = parse_duration)]
    budget: Duration,
    /// Print the result set as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    costs: CostArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated model sizes.
    #[arg(long, value_delimiter = ',', default_values_t = BenchConfig::default().state_counts)]
    states: Vec<usize>,
    /// Comma-separated trace lengths.
    #[arg(long, value_delimiter = ',', default_values_t = BenchConfig::default().obs_counts)]
    obs: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "300s", value_parser = parse_duration)]
    budget: Duration,
    /// Hypotheses requested per instance.
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 0.6)]
    bad_fraction: f64,
    #[arg(long, default_value_t = Noise::default().p_missing)]
    p_missing: f64,
    #[arg(long, default_value_t = Noise::default().p_inconsistent)]
    p_inconsistent: f64,
    /// Also run the bundled malware model.
    #[arg(long)]
    handcrafted: bool,
    /// Parallel instances; 0 uses every CPU.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_duration(s: &str) -> Result<Duration, String> {
    let s = s.trim();
    let (num, unit) = s.split_at(s.find(|c: char| !c.is_ascii_digit() && c != '.').unwrap_or(s.len()));
    let n: f64 = num.parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let secs = match unit {
        "" | "s" => n,
        "ms" => n / 1000.0,
        "m" => n * 60.0,
        "h" => n * 3600.0,
        _ => return Err(format!("unknown duration unit `{unit}` (use ms, s, m or h)")),
    };
    Duration::try_from_secs_f64(secs).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn print_diagnostics(path: &Path, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}:{d}", path.display());
    }
}

fn load_model(path: &Path) -> Result<ModelSpec> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    parse_named(name, &read(path)?).map_err(|diags| {
        print_diagnostics(path, &diags);
        let errors = diags.iter().filter(|d| d.is_error()).count();
        anyhow::anyhow!("{} has {errors} error(s)", path.display())
    })
}

fn load_trace(path: &Path, model: &ModelSpec) -> Result<Trace> {
    let trace = Trace::parse_lines(&read(path)?);
    if let Some((i, s)) = trace.unknown_symbols(model).first() {
        bail!("{}: observation {} (`{s}`) is not in the model vocabulary", path.display(), i + 1);
    }
    Ok(trace)
}

fn describe(h: &Hypothesis, trace: &Trace) -> String {
    let mut parts = Vec::new();
    let mut discarded = Vec::new();
    for step in &h.steps {
        match step {
            Step::EnterState { state, explained } if explained.is_empty() && !parts.is_empty() => {
                parts.push(format!("({state})"))
            }
            Step::EnterState { state, explained } if explained.is_empty() => parts.push(state.clone()),
            Step::EnterState { state, explained } => {
                let obs: Vec<&str> = explained.iter().map(|&i| trace.symbol(i)).collect();
                parts.push(format!("{state}[{}]", obs.join(", ")));
            }
            Step::EnterHyperstate { hyper } => parts.push(format!("({hyper})")),
            Step::Discard { index } => discarded.push(trace.symbol(*index)),
        }
    }
    let mut line = parts.join(" -> ");
    if !discarded.is_empty() {
        line.push_str(&format!("  discarded: {}", discarded.join(", ")));
    }
    line
}

fn solve(args: &SolveArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let trace = load_trace(&args.trace, &model)?;
    let problem = compile(&model, &trace, &args.costs.params()?)?;
    let result = find_top_k(&problem, &SearchConfig::new(args.k, args.budget))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
        return Ok(());
    }
    for h in &result.hypotheses {
        println!("{:>4}  cost {:>5}  {}", h.rank, h.total_cost, describe(h, &trace));
    }
    let note = if result.exhausted { ", no further hypotheses exist" } else { "" };
    eprintln!("{} hypotheses in {:.3}s{note}", result.len(), result.elapsed.as_secs_f64());
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let config = BenchConfig {
        state_counts: args.states.clone(),
        obs_counts: args.obs.clone(),
        instances_per_cell: args.instances,
        bad_fraction: args.bad_fraction,
        noise: Noise { p_missing: args.p_missing, p_inconsistent: args.p_inconsistent },
        seed: args.seed,
        time_budget: args.budget,
        k: args.k,
        handcrafted: args.handcrafted,
        workers: args.workers,
        ..BenchConfig::default()
    };
    let report = run_benchmark(&config)?;
    print!("{}", render_table(&report));
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&report)?).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(())
}

fn serve() -> Result<()> {
    let env = Env::from_env().map_err(anyhow::Error::msg)?;
    let store = ModelStore::open(&env.store)?;
    let state = AppState::new(store, ServiceConfig::default());
    let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, env.port));
    eprintln!("listening on {addr}, models in {}", env.store.display());
    tokio::runtime::Runtime::new()?.block_on(hypforge_service::serve(addr, state))?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Parse { model } => {
            let m = load_model(&model)?;
            let groups = m.hyperstates.iter().filter(|h| h.is_group()).count();
            println!("{}: {} states, {groups} hyperstates, start {}", model.display(), m.state_count(), m.start);
        }
        Command::Lint { model } => {
            let warnings = lint(&load_model(&model)?);
            print_diagnostics(&model, &warnings);
            return Ok(warnings.is_empty());
        }
        Command::Solve(args) => solve(&args)?,
        Command::ExportPddl { model, trace, out, costs } => {
            let m = load_model(&model)?;
            let t = load_trace(&trace, &m)?;
            let files = export_pddl(&compile(&m, &t, &costs.params()?)?);
            fs::create_dir_all(&out)?;
            for (name, text) in [("domain.pddl", &files.domain), ("problem.pddl", &files.problem)] {
                let path = out.join(name);
                fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
                println!("{}", path.display());
            }
        }
        Command::Bench(args) => bench(&args)?,
        Command::Serve => serve()?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
