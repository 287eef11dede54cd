use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use capmap::error::{Error, ErrorKind, Result};
use capmap::formats;
use capmap::learning::{learn_from_traces, simulate_traces, DEFAULT_MAX_UNKNOWN};
use capmap::mapmm::{astar_plan_with, SearchOptions, DEFAULT_MAX_EXPANSIONS};
use capmap::mapmmi::{plan_conditional_with, CondOptions, DEFAULT_MAX_DEPTH};
use capmap::model::{build_model, build_model_breaking_loops, validate_model, BetaParam, VarId};
use capmap::oracle;
use capmap::query_capability;

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NO_PLAN: u8 = 3;

/// Learn, query and plan with agent capability models.
#[derive(Parser)]
#[command(name = "capmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or validate capability models
    #[command(subcommand)]
    Model(ModelCommand),
    /// Update a model from execution traces
    Learn(LearnArgs),
    /// Probability that an agent has a capability
    Query(QueryArgs),
    /// Most probable linear plan
    Plan(PlanArgs),
    /// Conditional plan under a request budget
    PlanCond(PlanCondArgs),
    /// Sample traces from a model
    Simulate(SimulateArgs),
    /// Slow reference computations for small instances
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Build a model with uniform rows from variable and edge lists
    Build(BuildArgs),
    /// Check a model document and list every violation
    Validate { file: PathBuf },
}

#[derive(Args)]
struct BuildArgs {
    /// Variables: JSON array or one per line
    #[arg(long)]
    vars: PathBuf,
    /// Causal edges: JSON array of pairs or `from to` per line
    #[arg(long)]
    edges: PathBuf,
    /// Beta prior for every row, as `A,B`
    #[arg(long, default_value = "1,1", value_parser = parse_prior)]
    prior: BetaParam,
    #[arg(long, default_value = "agent")]
    agent: String,
    /// Remove edges to break cycles, using this seed
    #[arg(long)]
    break_loops: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSON-Lines trace file
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_UNKNOWN)]
    max_unknown: usize,
    /// Skip malformed trace lines instead of failing
    #[arg(long)]
    lenient: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    model: PathBuf,
    /// Inline JSON or a path to a JSON file
    #[arg(long)]
    spec: String,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Add a singleton operation for every proposition of every human
    #[arg(long)]
    auto_ops: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_EXPANSIONS)]
    max_expansions: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PlanCondArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Requests allowed per execution path; defaults to the problem's threshold
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: u32,
    #[arg(long, default_value_t = DEFAULT_MAX_EXPANSIONS)]
    max_expansions: usize,
    #[arg(long)]
    auto_ops: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    /// Chance that each variable is observed
    #[arg(long, default_value_t = 1.0)]
    observability: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Query by enumerating the full joint distribution
    Query(QueryArgs),
    /// Best linear plan probability by exhaustive search
    Plan {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_depth: u32,
    },
    /// Best conditional plan probability by exhaustive search
    PlanCond {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        budget: u32,
        #[arg(long, default_value_t = 8)]
        max_depth: u32,
    },
}

fn parse_prior(s: &str) -> std::result::Result<BetaParam, String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    BetaParam::new(a, b).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn bad_input(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn read_vars(path: &Path) -> Result<Vec<VarId>> {
    let text = read(path)?;
    if text.trim_start().starts_with('[') {
        let names: Vec<String> =
            serde_json::from_str(&text).map_err(|e| bad_input(path, e.to_string()))?;
        return names.iter().map(VarId::new).collect();
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            VarId::new(l.trim()).map_err(|e| bad_input(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn read_edges(path: &Path) -> Result<Vec<(VarId, VarId)>> {
    let text = read(path)?;
    if text.trim_start().starts_with('[') {
        let pairs: Vec<(String, String)> =
            serde_json::from_str(&text).map_err(|e| bad_input(path, e.to_string()))?;
        return pairs
            .iter()
            .map(|(a, b)| Ok((VarId::new(a)?, VarId::new(b)?)))
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().filter(|t| *t != "->").collect();
        if parts.len() != 2 {
            return Err(bad_input(
                path,
                format!("line {}: expected `from to`", i + 1),
            ));
        }
        let edge = (VarId::new(parts[0]), VarId::new(parts[1]));
        match edge {
            (Ok(a), Ok(b)) => out.push((a, b)),
            (Err(e), _) | (_, Err(e)) => {
                return Err(bad_input(path, format!("line {}: {e}", i + 1)))
            }
        }
    }
    Ok(out)
}

fn read_spec(arg: &str) -> Result<capmap::CapabilitySpec> {
    if arg.trim_start().starts_with('{') {
        formats::parse_spec(arg, "--spec")
    } else {
        let path = Path::new(arg);
        formats::parse_spec(&read(path)?, &path.display().to_string())
    }
}

fn emit(output: Option<&Path>, json: &str, text: &str) -> Result<()> {
    if let Some(path) = output {
        write(path, json)?;
    }
    print!("{text}");
    std::io::stdout().flush().ok();
    Ok(())
}

/// Returns the process exit code for a successful run.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Model(ModelCommand::Build(args)) => {
            let vars = read_vars(&args.vars)?;
            let edges = read_edges(&args.edges)?;
            let model = match args.break_loops {
                Some(seed) => {
                    let out =
                        build_model_breaking_loops(&args.agent, &vars, &edges, args.prior, seed)?;
                    for (from, to) in &out.removed_edges {
                        eprintln!("removed edge {from} -> {to}");
                    }
                    out.model
                }
                None => build_model(&args.agent, &vars, &edges, args.prior)?,
            };
            formats::save_model(&model, &args.output)?;
            println!(
                "{} nodes, {} edges -> {}",
                model.node_count(),
                model.edge_count(),
                args.output.display()
            );
        }
        Command::Model(ModelCommand::Validate { file }) => {
            let model = formats::parse_model_unchecked(&read(&file)?, &file.display().to_string())?;
            let violations = validate_model(&model);
            if violations.is_empty() {
                println!(
                    "ok: {} nodes, {} edges",
                    model.node_count(),
                    model.edge_count()
                );
            } else {
                for v in &violations {
                    println!("{}: {v}", file.display());
                }
                return Ok(EXIT_INVALID);
            }
        }
        Command::Learn(args) => {
            let model = formats::load_model(&args.model)?;
            let (traces, bad) = formats::load_traces(&args.traces, args.lenient)?;
            for b in &bad {
                eprintln!("{}: skipped {}", args.traces.display(), b.error);
            }
            let (learned, report) = learn_from_traces(&model, &traces, args.max_unknown)?;
            formats::save_model(&learned, &args.output)?;
            println!(
                "{} traces, {} transitions, {} completions, {} skipped",
                traces.len(),
                report.transitions,
                report.completions,
                report.skipped.len()
            );
        }
        Command::Query(args) => {
            let model = formats::load_model(&args.model)?;
            let spec = read_spec(&args.spec)?;
            for notice in spec.check(&model)? {
                eprintln!("note: {notice}");
            }
            let p = query_capability(&model, &spec)?;
            println!("spec: {spec}");
            println!("probability: {p}");
        }
        Command::Plan(args) => {
            let problem = formats::load_problem(&args.problem)?;
            let options = SearchOptions {
                auto_ops: args.auto_ops,
                max_expansions: args.max_expansions,
            };
            let plan = astar_plan_with(&problem, &options)?;
            emit(
                args.output.as_deref(),
                &formats::plan_to_string(&plan),
                &plan.to_string(),
            )?;
        }
        Command::PlanCond(args) => {
            let problem = formats::load_problem(&args.problem)?;
            let budget = args
                .budget
                .or(problem.communication_threshold)
                .ok_or_else(|| {
                    bad_input(
                        &args.problem,
                        "no --budget given and no communication_threshold set",
                    )
                })?;
            let options = CondOptions {
                budget,
                max_depth: args.max_depth,
                max_expansions: args.max_expansions,
                auto_ops: args.auto_ops,
            };
            let plan = plan_conditional_with(&problem, &options)?;
            emit(
                args.output.as_deref(),
                &formats::conditional_plan_to_string(&plan),
                &plan.to_string(),
            )?;
            if plan.success_probability == 0.0 {
                eprintln!("no conditional plan reaches the goal within budget {budget}");
                return Ok(EXIT_NO_PLAN);
            }
        }
        Command::Simulate(args) => {
            let model = formats::load_model(&args.model)?;
            let traces = simulate_traces(&model, args.count, args.seed, args.observability)?;
            formats::save_traces(&traces, &args.output)?;
            println!("{} traces -> {}", traces.len(), args.output.display());
        }
        Command::Oracle(OracleCommand::Query(args)) => {
            let model = formats::load_model(&args.model)?;
            let spec = read_spec(&args.spec)?;
            let p = oracle::joint_enumeration_query(&model, &spec)?;
            println!("spec: {spec}");
            println!("probability: {p}");
        }
        Command::Oracle(OracleCommand::Plan { problem, max_depth }) => {
            let problem = formats::load_problem(&problem)?;
            let p = oracle::brute_force_optimal_plan(&problem, max_depth)?;
            println!("success probability: {p}");
        }
        Command::Oracle(OracleCommand::PlanCond {
            problem,
            budget,
            max_depth,
        }) => {
            let problem = formats::load_problem(&problem)?;
            let p = oracle::brute_force_conditional(&problem, budget, max_depth)?;
            println!("success probability: {p}");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CAPMAP_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::NoPlan => EXIT_NO_PLAN,
                ErrorKind::Validation | ErrorKind::Io => EXIT_INVALID,
            })
        }
    }
}
