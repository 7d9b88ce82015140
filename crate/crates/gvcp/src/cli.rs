//! The `gvcp` command line: instance generation, exact and GA solving,
//! GA-versus-oracle verification, and a worker-scaling benchmark.
//!
//! Exit codes: 0 success, 1 verification below threshold, 2 bad flags or
//! input, 3 instance too large for exact enumeration, 4 internal job
//! failure, 5 benchmark output divergence across worker counts.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::driver::{evolve, evolve_traced, DriverError, EvolveResult};
use crate::exact::{solve_exact_with_cap, ExactError, DEFAULT_VERTEX_CAP};
use crate::ga::{GaConfig, GaError};
use crate::instance::{generate_instance, parse_instance, GvcpInstance, InstanceError};
use crate::report::{sha256_hex, RunReport};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    TooLarge(String),
    #[error("{0}")]
    Internal(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::TooLarge(_) => 3,
            CliError::Internal(_) => 4,
            CliError::Divergence(_) => 5,
        }
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<GaError> for CliError {
    fn from(e: GaError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError::TooLarge(e.to_string())
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "gvcp",
    version,
    about = "Minimum generalized vertex cover solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file
    Gen(GenArgs),
    /// Solve an instance exactly or with the genetic algorithm
    Solve(SolveArgs),
    /// Compare the genetic algorithm against the exact optimum on generated instances
    Verify(VerifyArgs),
    /// Time the genetic algorithm across reduce worker counts
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Vertex count
    #[arg(long)]
    n: usize,
    /// Edge probability in (0, 1]
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    /// Costs are uniform integers in [0, cost-max]
    #[arg(long = "cost-max", default_value_t = 100)]
    cost_max: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output instance file
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Exact,
    Ga,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Genetic algorithm flags shared by `solve` and `verify`.
#[derive(Args, Clone)]
struct GaFlags {
    /// Population size Z
    #[arg(long = "pop", default_value_t = 150)]
    pop: usize,
    /// Elite count E
    #[arg(long = "elite", default_value_t = 50)]
    elite: usize,
    /// Average tournament size (may be fractional)
    #[arg(long = "tsize", default_value_t = 5.4)]
    tsize: f64,
    /// Crossover probability
    #[arg(long = "pcross", default_value_t = 0.85)]
    pcross: f64,
    /// Maximum generations
    #[arg(long = "gens", default_value_t = 500)]
    gens: usize,
    /// Stop after this many generations without improvement
    #[arg(long = "stall", default_value_t = 100)]
    stall: usize,
    /// Master seed
    #[arg(long = "seed", default_value_t = 1)]
    seed: u64,
    /// Reduce worker count
    #[arg(long = "workers", default_value_t = 4)]
    workers: usize,
    /// Override the frozen-gene mutation rate (default 1/n)
    #[arg(long = "mutation-frozen")]
    mutation_frozen: Option<f64>,
    /// Override the non-frozen mutation rate (default 0.4/n)
    #[arg(long = "mutation-normal")]
    mutation_normal: Option<f64>,
}

impl GaFlags {
    fn to_config(&self) -> GaConfig {
        GaConfig {
            population_size: self.pop,
            elite_count: self.elite,
            tournament_size: self.tsize,
            crossover_prob: self.pcross,
            mutation_rate_frozen: self.mutation_frozen,
            mutation_rate_normal: self.mutation_normal,
            max_generations: self.gens,
            stall_generations: self.stall,
            master_seed: self.seed,
            worker_count: self.workers,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Solver to run
    #[arg(long, value_enum)]
    algo: Algo,
    /// Instance file
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[command(flatten)]
    ga: GaFlags,
    /// Vertex cap for exact enumeration
    #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
    cap: usize,
    /// Also write the JSON report here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format on standard output
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of generated instances
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long = "n-min", default_value_t = 6)]
    n_min: usize,
    #[arg(long = "n-max", default_value_t = 14)]
    n_max: usize,
    /// Edge probabilities cycled across instances
    #[arg(long = "p-list", default_value = "0.3,0.6", value_delimiter = ',')]
    p_list: Vec<f64>,
    #[arg(long = "cost-max", default_value_t = 100)]
    cost_max: u64,
    /// Minimum fraction of instances where the GA must hit the optimum
    #[arg(long = "min-hit-rate", default_value_t = 0.95)]
    min_hit_rate: f64,
    #[command(flatten)]
    ga: GaFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance file; mutually exclusive with --n
    #[arg(long = "in", value_name = "PATH", conflicts_with = "n")]
    input: Option<PathBuf>,
    /// Generate an instance with this many vertices
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    p: f64,
    #[arg(long = "cost-max", default_value_t = 100)]
    cost_max: u64,
    /// Worker counts to time
    #[arg(
        long = "workers-list",
        default_value = "1,2,4,8",
        value_delimiter = ','
    )]
    workers_list: Vec<usize>,
    /// Generations per run
    #[arg(long, default_value_t = 20)]
    gens: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Population size Z
    #[arg(long = "pop", default_value_t = 512)]
    pop: usize,
    /// Elite count E
    #[arg(long = "elite", default_value_t = 50)]
    elite: usize,
    /// Append per-job engine traces to this file
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

/// Parses arguments and runs the requested command; returns the process
/// exit code.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CliError> {
    let instance = generate_instance(args.n, args.p, args.cost_max, args.seed)?;
    fs::write(&args.out, crate::instance::write_instance(&instance))?;
    println!("n={} m={}", instance.vertex_count(), instance.edge_count());
    Ok(ExitCode::SUCCESS)
}

fn load_instance(path: &PathBuf) -> Result<(GvcpInstance, String), CliError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Usage(format!("{}: not UTF-8", path.display())))?;
    let instance = parse_instance(&text)?;
    Ok((instance, sha256_hex(text.as_bytes())))
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, CliError> {
    let (instance, hash) = load_instance(&args.input)?;
    let start = Instant::now();
    let report = match args.algo {
        Algo::Exact => {
            let result = solve_exact_with_cap(&instance, args.cap)?;
            RunReport {
                instance_path: args.input.display().to_string(),
                instance_sha256: hash,
                algorithm: "exact".into(),
                ga_config: None,
                exact_cap: Some(args.cap),
                best_cost: result.best_cost,
                best_vertices: result.best_subset.members().iter().map(|v| v + 1).collect(),
                best_bitstring: result.best_subset.to_bitstring(),
                generations_run: 0,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                worker_count: 1,
                master_seed: 0,
                history: Vec::new(),
            }
        }
        Algo::Ga => {
            let config = args.ga.to_config();
            config.validate()?;
            let result = evolve(&instance, &config)?;
            let subset = result.best_chromosome.to_subset();
            RunReport {
                instance_path: args.input.display().to_string(),
                instance_sha256: hash,
                algorithm: "ga".into(),
                worker_count: config.worker_count,
                master_seed: config.master_seed,
                ga_config: Some(config),
                exact_cap: None,
                best_cost: result.best_cost,
                best_vertices: subset.members().iter().map(|v| v + 1).collect(),
                best_bitstring: subset.to_bitstring(),
                generations_run: result.generations_run,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                history: result.history,
            }
        }
    };
    match args.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => print!("{}", report.history_csv()),
    }
    if let Some(path) = &args.out {
        fs::write(path, report.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    if args.n_min == 0 || args.n_min > args.n_max {
        return Err(CliError::Usage("need 1 <= n-min <= n-max".into()));
    }
    if args.n_max > DEFAULT_VERTEX_CAP {
        return Err(CliError::Usage(format!(
            "n-max is capped at {DEFAULT_VERTEX_CAP} for the oracle"
        )));
    }
    if args.p_list.is_empty() {
        return Err(CliError::Usage("p-list must not be empty".into()));
    }
    let base = args.ga.to_config();
    base.validate()?;

    let mut meta_rng = ChaCha8Rng::seed_from_u64(args.ga.seed);
    let mut hits = 0usize;
    println!("idx\tn\tm\tp\toptimum\tga_best\tgap");
    for i in 0..args.count {
        let n = meta_rng.gen_range(args.n_min..=args.n_max);
        let instance_seed = meta_rng.gen::<u64>();
        let ga_seed = meta_rng.gen::<u64>();
        let p = args.p_list[i % args.p_list.len()];
        let instance = generate_instance(n, p, args.cost_max, instance_seed)?;
        let exact = solve_exact_with_cap(&instance, DEFAULT_VERTEX_CAP)?;
        let config = GaConfig {
            master_seed: ga_seed,
            ..base.clone()
        };
        let ga = evolve(&instance, &config)?;
        let gap = ga.best_cost - exact.best_cost;
        if gap < 0.0 {
            return Err(CliError::Internal(format!(
                "GA beat the exhaustive optimum on instance {i} (gap {gap}); this is a bug"
            )));
        }
        if gap == 0.0 {
            hits += 1;
        }
        println!(
            "{i}\t{n}\t{}\t{p}\t{}\t{}\t{gap}",
            instance.edge_count(),
            exact.best_cost,
            ga.best_cost
        );
    }
    let hit_rate = hits as f64 / args.count as f64;
    println!(
        "hit_rate={hit_rate} hits={hits}/{} min_hit_rate={}",
        args.count, args.min_hit_rate
    );
    if hit_rate >= args.min_hit_rate {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

/// Fields that must not vary with worker count: everything except wall times.
fn same_bench_outcome(a: &EvolveResult, b: &EvolveResult) -> bool {
    a.best_cost == b.best_cost
        && a.best_chromosome == b.best_chromosome
        && a.generations_run == b.generations_run
        && a.history.len() == b.history.len()
        && a.history.iter().zip(&b.history).all(|(x, y)| {
            x.generation == y.generation
                && x.best_cost == y.best_cost
                && x.mean_cost == y.mean_cost
                && x.frozen_count == y.frozen_count
        })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    if args.workers_list.is_empty() || args.workers_list.contains(&0) {
        return Err(CliError::Usage(
            "workers-list needs positive worker counts".into(),
        ));
    }
    let instance = match (&args.input, args.n) {
        (Some(path), _) => load_instance(path)?.0,
        (None, Some(n)) => generate_instance(n, args.p, args.cost_max, args.seed)?,
        (None, None) => return Err(CliError::Usage("give either --in or --n".into())),
    };

    let mut trace_file = match &args.trace {
        Some(path) => Some(fs::File::create(path)?),
        None => None,
    };
    let mut results: Vec<(usize, f64, EvolveResult)> = Vec::new();
    for &workers in &args.workers_list {
        let config = GaConfig {
            population_size: args.pop,
            elite_count: args.elite,
            max_generations: args.gens,
            stall_generations: args.gens,
            master_seed: args.seed,
            worker_count: workers,
            ..GaConfig::default()
        };
        config.validate()?;
        let start = Instant::now();
        let result = evolve_traced(&instance, &config, |generation, trace| {
            if let Some(file) = &mut trace_file {
                let mut block = String::new();
                for line in trace.tsv().lines() {
                    let _ = writeln!(block, "{workers}\t{generation}\t{line}");
                }
                let _ = file.write_all(block.as_bytes());
            }
        })?;
        results.push((workers, start.elapsed().as_secs_f64() * 1e3, result));
    }

    for (workers, _, result) in &results[1..] {
        if !same_bench_outcome(&results[0].2, result) {
            return Err(CliError::Divergence(format!(
                "outputs with {workers} workers differ from {} workers; engine determinism bug",
                results[0].0
            )));
        }
    }

    println!("workers\ttotal_ms\tmean_gen_ms\tbest_cost");
    for (workers, total_ms, result) in &results {
        let gen_ms: f64 = result.history.iter().map(|h| h.elapsed_ms).sum();
        let mean = if result.history.is_empty() {
            0.0
        } else {
            gen_ms / result.history.len() as f64
        };
        println!("{workers}\t{total_ms:.1}\t{mean:.2}\t{}", result.best_cost);
    }
    if results.len() > 1 {
        let base = results[0].1;
        for (workers, total_ms, _) in &results[1..] {
            eprintln!(
                "speedup workers={workers} vs {}: {:.2}x",
                results[0].0,
                base / total_ms
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
