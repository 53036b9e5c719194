//! Command-line front end: `generate`, `embed`, `solve`, `sweep`, `report`.
//!
//! Settings come from an optional TOML file (`--config`) and are overridden
//! by flags. Every command that writes output also persists the effective
//! settings as `run_config.toml`, which re-executes to identical outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::anneal::{
    bits_to_hex, default_schedule, hex_to_bits, load_schedule, EngineConfig, Schedule,
};
use crate::bench::{
    aggregate, generate_ensemble, parse_results_csv, sweep, table2_grid, write_report,
    EngineSampler, EnsembleConfig, ParameterGrid, ProtocolKind, Registry, DEFAULT_ALPHA,
};
use crate::chimera::{build_chimera, clique_embed, embed_ising, ChimeraGraph, DEFAULT_GRID};
use crate::error::Error;
use crate::market::GbmParams;
use crate::qubo::{
    exact_solve_capped, qubo_to_ising, BucketMap, QuboInstance, Selection, DEFAULT_EXACT_CAP,
};
use crate::solvers::{
    anneal_solve, cardinality_search, ga_solve, greedy_selection, hybrid_reverse_solve,
    AnnealParams, ExactSolver, GaConfig, GaSolver, GreedySolver, QuboSolver, SolverResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "portfolio-anneal",
    version,
    about = "Portfolio QUBO generation, embedding, annealing and benchmarking"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance ensemble into a registry directory.
    Generate(GenerateArgs),
    /// Embed one instance on a Chimera graph.
    Embed(EmbedArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Sweep annealing parameters over a registry and write a report.
    Sweep(SweepArgs),
    /// Rebuild report files from a results table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Comma-separated problem sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Instances per size.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    /// Largest size whose best-known value comes from the exact solver.
    #[arg(long)]
    pub exact_cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub chain_strength: Option<f64>,
    /// Chimera grid dimension `m` (an `m x m` array of unit cells).
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Comma-separated defective qubit ids.
    #[arg(long, value_delimiter = ',')]
    pub defects: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Greedy,
    Ga,
    Forward,
    Reverse,
    Hybrid,
}

impl SolverKind {
    fn name(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Greedy => "greedy",
            SolverKind::Ga => "ga",
            SolverKind::Forward => "forward",
            SolverKind::Reverse => "reverse",
            SolverKind::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "registry")]
    pub instance: Option<PathBuf>,
    /// Registry directory; use with `--id`.
    #[arg(long, requires = "id")]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Initial logical state for reverse annealing, as hex (MSB first).
    /// Defaults to the greedy solution.
    #[arg(long)]
    pub seed_state: Option<String>,
    /// Stop once a selection with value <= target is found.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<f64>,
    /// Enforce this many selected assets via the shift search.
    #[arg(long)]
    pub cardinality: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chain_strength: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub s_p: Option<f64>,
    #[arg(long)]
    pub reads: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Record wall-clock time in the result (makes output non-reproducible).
    #[arg(long)]
    pub wall_clock: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Grid preset, e.g. `table2:48`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Option<ProtocolKind>,
    /// Comma-separated annealing times in microseconds.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    /// Reads per grid point.
    #[arg(long)]
    pub reads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory containing `results.csv`.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Output directory (defaults to the results directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSection {
    pub sizes: Vec<usize>,
    pub count: usize,
    pub exact_cap: usize,
    pub ga_restarts: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        EnsembleSection {
            sizes: d.sizes,
            count: d.per_size,
            exact_cap: d.exact_cap,
            ga_restarts: d.ga_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChimeraSection {
    pub grid_size: usize,
    pub defects: Vec<usize>,
}

impl Default for ChimeraSection {
    fn default() -> Self {
        ChimeraSection {
            grid_size: DEFAULT_GRID,
            defects: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    /// Preset name such as `table2:48`.
    pub preset: Option<String>,
    /// Explicit grid, used when no preset is given.
    pub grid: Option<ParameterGrid>,
    pub protocol: Option<ProtocolKind>,
    pub reads: usize,
    pub alpha: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            preset: None,
            grid: None,
            protocol: None,
            reads: 1500,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveSection {
    pub solver: Option<SolverKind>,
    pub seed_state: Option<String>,
    pub target: Option<f64>,
    pub cardinality: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub instance: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub id: Option<String>,
    pub results: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// CSV schedule with columns `s,A,B`; the built-in schedule when unset.
    pub schedule: Option<PathBuf>,
}

/// Full, serializable settings of one command invocation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; feeds the ensemble, GA and engine streams.
    pub seed: u64,
    pub paths: Paths,
    pub ensemble: EnsembleSection,
    pub gbm: GbmParams,
    pub buckets: BucketMap,
    pub ga: GaConfig,
    pub engine: EngineConfig,
    pub anneal: AnnealParams,
    pub solve: SolveSection,
    pub sweep: SweepSection,
    pub chimera: ChimeraSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, Error> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    fn persist(&self, dir: &Path) -> Result<(), Error> {
        let path = dir.join("run_config.toml");
        std::fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))
    }

    fn schedule(&self) -> Result<Schedule, Error> {
        match &self.paths.schedule {
            Some(p) => load_schedule(p),
            None => Ok(default_schedule()),
        }
    }

    fn graph(&self) -> Result<ChimeraGraph, Error> {
        build_chimera(self.chimera.grid_size, &self.chimera.defects)
    }

    fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig {
            sizes: self.ensemble.sizes.clone(),
            per_size: self.ensemble.count,
            gbm: self.gbm.clone(),
            buckets: self.buckets.clone(),
            seed: self.seed,
            exact_cap: self.ensemble.exact_cap,
            ga: GaConfig {
                seed: self.seed,
                ..self.ga.clone()
            },
            ga_restarts: self.ensemble.ga_restarts,
        }
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig {
            seed: self.seed,
            ..self.engine.clone()
        }
    }
}

/// Error reported by the CLI, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            kind: "invalid_argument",
            message: message.into(),
        }
    }

    /// Single machine-parsable line for standard error.
    pub fn line(&self) -> String {
        format!(
            "error kind={} exit={} message={:?}",
            self.kind, self.code, self.message
        )
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            },
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn info(msg: &str) {
    eprintln!("info {msg}");
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::validation(format!("missing required --{flag}")))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn write_file(path: &Path, body: &str) -> CliResult {
    std::fs::write(path, body).map_err(|e| Error::io(path, e).into())
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            if code == EXIT_OK {
                print!("{e}");
            } else {
                eprintln!(
                    "error kind=usage exit={code} message={:?}",
                    e.to_string().lines().next().unwrap_or_default()
                );
            }
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError {
            code: EXIT_RUNTIME,
            kind: "thread_pool",
            message: e.to_string(),
        })?;
    pool.install(|| match cli.command {
        Command::Generate(a) => cmd_generate(&mut cfg, a),
        Command::Embed(a) => cmd_embed(&mut cfg, a),
        Command::Solve(a) => cmd_solve(&mut cfg, a),
        Command::Sweep(a) => cmd_sweep(&mut cfg, a),
        Command::Report(a) => cmd_report(&mut cfg, a),
    })
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn cmd_generate(cfg: &mut RunConfig, a: GenerateArgs) -> CliResult {
    set(&mut cfg.ensemble.sizes, a.sizes);
    set(&mut cfg.ensemble.count, a.count);
    set(&mut cfg.ensemble.exact_cap, a.exact_cap);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.gbm.rho, a.rho);
    set(&mut cfg.gbm.mu, a.mu);
    set(&mut cfg.gbm.sigma, a.sigma);
    set(&mut cfg.gbm.r0, a.r0);
    if a.out.is_some() {
        cfg.paths.out = a.out;
    }
    let out = required(&cfg.paths.out, "out")?;
    let reg = generate_ensemble(&cfg.ensemble())?;
    reg.save(&out)?;
    cfg.persist(&out)?;
    println!(
        "generated {} instances in {}",
        reg.entries.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EmbeddedFile {
    n_logical: usize,
    chain_length: usize,
    chain_strength: f64,
    /// Physical qubit ids, chain by chain.
    qubits: Vec<usize>,
    h: Vec<f64>,
    /// `[qubit_a, qubit_b, J]` with physical ids.
    couplers: Vec<(usize, usize, f64)>,
    logical_offset: f64,
}

fn cmd_embed(cfg: &mut RunConfig, a: EmbedArgs) -> CliResult {
    set(&mut cfg.anneal.chain_strength, a.chain_strength);
    set(&mut cfg.chimera.grid_size, a.grid_size);
    set(&mut cfg.chimera.defects, a.defects);
    if a.instance.is_some() {
        cfg.paths.instance = a.instance;
    }
    if a.out.is_some() {
        cfg.paths.out = a.out;
    }
    let inst = required(&cfg.paths.instance, "instance")?;
    let out = required(&cfg.paths.out, "out")?;
    let q = QuboInstance::load(&inst)?;
    let graph = cfg.graph()?;
    let emb = clique_embed(&graph, q.n())?;
    let e = embed_ising(&graph, &qubo_to_ising(&q), &emb, cfg.anneal.chain_strength)?;
    create_dir(&out)?;
    write_file(&out.join("embedding.json"), &(emb.to_json()? + "\n"))?;
    let file = EmbeddedFile {
        n_logical: q.n(),
        chain_length: e.chain_length(),
        chain_strength: e.chain_strength,
        qubits: e.qubits.clone(),
        h: e.h.clone(),
        couplers: e
            .couplers
            .iter()
            .map(|&(x, y, j)| (e.qubits[x], e.qubits[y], j))
            .collect(),
        logical_offset: e.logical.offset,
    };
    write_file(
        &out.join("embedded.json"),
        &(serde_json::to_string_pretty(&file).map_err(Error::from)? + "\n"),
    )?;
    cfg.persist(&out)?;
    println!(
        "n={} chain_length={} qubits={} couplers={}",
        q.n(),
        e.chain_length(),
        e.n_qubits(),
        e.couplers.len()
    );
    Ok(())
}

/// JSON written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub solver: String,
    pub instance_id: Option<String>,
    /// Selected assets as hex, most significant bit = asset 0.
    pub bitstring: String,
    pub bits: Vec<u8>,
    pub value: f64,
    pub cardinality: usize,
    pub objective_calls: u64,
    pub elapsed_model_time: f64,
    pub trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality_attained: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_us: Option<f64>,
}

fn single(sel: Selection, calls: u64) -> SolverResult {
    SolverResult {
        trace: vec![sel.value],
        best: sel,
        objective_calls: calls,
        elapsed_model_time: 0.0,
        wall_clock_us: None,
    }
}

fn cmd_solve(cfg: &mut RunConfig, a: SolveArgs) -> CliResult {
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.anneal.chain_strength, a.chain_strength);
    set(&mut cfg.anneal.tau, a.tau);
    set(&mut cfg.anneal.rho, a.rho);
    set(&mut cfg.anneal.s_p, a.s_p);
    set(&mut cfg.anneal.max_reads, a.reads);
    set(&mut cfg.ga.max_iterations, a.max_iterations);
    if a.solver.is_some() {
        cfg.solve.solver = a.solver;
    }
    if a.seed_state.is_some() {
        cfg.solve.seed_state = a.seed_state;
    }
    if a.target.is_some() {
        cfg.solve.target = a.target;
    }
    if a.cardinality.is_some() {
        cfg.solve.cardinality = a.cardinality;
    }
    if a.instance.is_some() {
        cfg.paths.instance = a.instance;
        cfg.paths.registry = None;
    }
    if a.registry.is_some() {
        cfg.paths.registry = a.registry;
        cfg.paths.instance = None;
    }
    if a.id.is_some() {
        cfg.paths.id = a.id;
    }
    if a.out.is_some() {
        cfg.paths.out = a.out;
    }
    let solver = required(&cfg.solve.solver, "solver")?;

    let mut registry = None;
    let q = match (&cfg.paths.instance, &cfg.paths.registry) {
        (Some(p), _) => QuboInstance::load(p)?,
        (None, Some(dir)) => {
            let id = required(&cfg.paths.id, "id")?;
            let reg = Registry::load(dir)?;
            let idx =
                reg.entries.iter().position(|e| e.id == id).ok_or_else(|| {
                    CliError::validation(format!("no instance {id:?} in registry"))
                })?;
            let q = reg.entries[idx].instance().clone();
            registry = Some((dir.clone(), reg, idx));
            q
        }
        (None, None) => {
            return Err(CliError::validation(
                "missing required --instance or --registry",
            ))
        }
    };

    let mut seed_state = None;
    if matches!(solver, SolverKind::Reverse) {
        seed_state = Some(match &cfg.solve.seed_state {
            Some(hex) => hex.clone(),
            None => {
                let g = bits_to_hex(&greedy_selection(&q).bits);
                info(&format!("seed_state=greedy value={hex}", hex = g));
                g
            }
        });
    } else if cfg.solve.seed_state.is_some() {
        return Err(CliError::validation(format!(
            "--seed-state only applies to --solver reverse, not {}",
            solver.name()
        )));
    }
    if cfg.solve.cardinality.is_some()
        && !matches!(
            solver,
            SolverKind::Exact | SolverKind::Greedy | SolverKind::Ga
        )
    {
        return Err(CliError::validation(
            "--cardinality needs an exact, greedy or ga inner solver",
        ));
    }

    let ga = GaConfig {
        seed: cfg.seed,
        target_value: cfg.solve.target,
        ..cfg.ga.clone()
    };
    let anneal = AnnealParams {
        target: cfg.solve.target,
        ..cfg.anneal.clone()
    };
    let started = Instant::now();
    let mut reads_csv = None;
    let mut delta = None;
    let mut attained = None;
    let result = if let Some(m) = cfg.solve.cardinality {
        let inner: Box<dyn QuboSolver> = match solver {
            SolverKind::Exact => Box::new(ExactSolver {
                max_n: cfg.ensemble.exact_cap.max(DEFAULT_EXACT_CAP),
            }),
            SolverKind::Greedy => Box::new(GreedySolver),
            _ => Box::new(GaSolver {
                config: ga,
                greedy_seed: true,
            }),
        };
        let c = cardinality_search(&q, m, inner.as_ref())?;
        delta = Some(c.delta);
        attained = Some(c.attained);
        single(c.selection, c.rounds as u64)
    } else {
        match solver {
            SolverKind::Exact => single(
                exact_solve_capped(&q, cfg.ensemble.exact_cap.max(DEFAULT_EXACT_CAP))?,
                0,
            ),
            SolverKind::Greedy => single(greedy_selection(&q), 1),
            SolverKind::Ga => ga_solve(&q, &ga, None)?,
            SolverKind::Forward | SolverKind::Reverse | SolverKind::Hybrid => {
                let graph = cfg.graph()?;
                let schedule = cfg.schedule()?;
                let engine = cfg.engine();
                let out = match solver {
                    SolverKind::Forward => {
                        anneal_solve(&q, &graph, &anneal, None, &schedule, &engine)?
                    }
                    SolverKind::Reverse => {
                        let bits = hex_to_bits(seed_state.as_deref().unwrap_or_default(), q.n())?;
                        anneal_solve(&q, &graph, &anneal, Some(&bits), &schedule, &engine)?
                    }
                    _ => hybrid_reverse_solve(&q, &graph, &anneal, &schedule, &engine)?,
                };
                reads_csv = Some(out.reads.to_csv());
                out.result
            }
        }
    };
    let wall = a.wall_clock.then(|| started.elapsed().as_secs_f64() * 1e6);

    let output = SolveOutput {
        solver: solver.name().to_string(),
        instance_id: q.metadata.id.clone(),
        bitstring: bits_to_hex(&result.best.bits),
        bits: result.best.bits.clone(),
        value: result.best.value,
        cardinality: result.best.cardinality,
        objective_calls: result.objective_calls,
        elapsed_model_time: result.elapsed_model_time,
        trace: result.trace.clone(),
        seed_state,
        delta_shift: delta,
        cardinality_attained: attained,
        wall_clock_us: wall.or(result.wall_clock_us),
    };
    println!(
        "value={} cardinality={} bitstring={}",
        output.value, output.cardinality, output.bitstring
    );

    if let (Some((dir, mut reg, idx)), None) = (registry, cfg.solve.cardinality) {
        if reg.entries[idx].refresh(&result.best, solver.name()) {
            info(&format!(
                "best_known_updated id={} value={}",
                reg.entries[idx].id, result.best.value
            ));
            reg.save(&dir)?;
        }
    }

    if let Some(out) = cfg.paths.out.clone() {
        create_dir(&out)?;
        write_file(
            &out.join("result.json"),
            &(serde_json::to_string_pretty(&output).map_err(Error::from)? + "\n"),
        )?;
        if let Some(csv) = reads_csv {
            write_file(&out.join("reads.csv"), &csv)?;
        }
        cfg.persist(&out)?;
    }
    Ok(())
}

/// Resolve a grid preset name such as `table2:48`.
pub fn grid_preset(name: &str) -> Result<(usize, ParameterGrid), Error> {
    let n = name
        .strip_prefix("table2:")
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| Error::InvalidConfig(format!("unknown grid preset {name:?}")))?;
    let grid = table2_grid(n)
        .ok_or_else(|| Error::InvalidConfig(format!("no table2 preset for N={n}")))?;
    Ok((n, grid))
}

fn cmd_sweep(cfg: &mut RunConfig, a: SweepArgs) -> CliResult {
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.sweep.reads, a.reads);
    set(&mut cfg.sweep.alpha, a.alpha);
    if a.grid.is_some() {
        cfg.sweep.preset = a.grid;
    }
    if a.protocol.is_some() {
        cfg.sweep.protocol = a.protocol;
    }
    if a.registry.is_some() {
        cfg.paths.registry = a.registry;
    }
    if a.out.is_some() {
        cfg.paths.out = a.out;
    }
    let (size, mut grid) = match (&cfg.sweep.preset, &cfg.sweep.grid) {
        (Some(p), _) => {
            let (n, g) = grid_preset(p)?;
            (Some(n), g)
        }
        (None, Some(g)) => (None, g.clone()),
        (None, None) => return Err(CliError::validation("missing required --grid")),
    };
    if let Some(t) = a.tau {
        grid.tau = t;
    }
    cfg.sweep.grid = Some(grid.clone());
    let kind = cfg.sweep.protocol.unwrap_or(if grid.s_p.is_some() {
        ProtocolKind::Reverse
    } else {
        ProtocolKind::Forward
    });
    cfg.sweep.protocol = Some(kind);
    grid.validate(kind)?;
    let dir = required(&cfg.paths.registry, "registry")?;
    let out = required(&cfg.paths.out, "out")?;

    let reg = Registry::load(&dir)?;
    let entries: Vec<_> = reg
        .entries
        .into_iter()
        .filter(|e| size.is_none_or(|n| e.n == n))
        .collect();
    if entries.is_empty() {
        return Err(CliError::validation(
            "registry has no instances for this grid",
        ));
    }
    let sampler = EngineSampler {
        graph: cfg.graph()?,
        schedule: cfg.schedule()?,
        engine: cfg.engine(),
        reads: cfg.sweep.reads,
    };
    let report = sweep(&entries, &grid, kind, &sampler, cfg.sweep.alpha)?;
    write_report(&report, &out)?;
    cfg.persist(&out)?;
    for s in &report.sizes {
        println!(
            "N={} solver={} median_tts_us={} {}",
            s.n,
            s.solver,
            s.median_tts.map_or_else(|| "inf".into(), |v| v.to_string()),
            s.unsolved_note()
        );
    }
    Ok(())
}

fn cmd_report(cfg: &mut RunConfig, a: ReportArgs) -> CliResult {
    set(&mut cfg.sweep.alpha, a.alpha);
    if a.results.is_some() {
        cfg.paths.results = a.results;
    }
    if a.out.is_some() {
        cfg.paths.out = a.out;
    }
    let dir = required(&cfg.paths.results, "results")?;
    let out = cfg.paths.out.clone().unwrap_or_else(|| dir.clone());
    let path = dir.join("results.csv");
    let rows = match std::fs::read_to_string(&path) {
        Ok(text) => parse_results_csv(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => vec![],
        Err(e) => return Err(Error::io(&path, e).into()),
    };
    let report = aggregate(rows, cfg.sweep.alpha);
    write_report(&report, &out)?;
    println!("{} rows, {} sizes", report.points.len(), report.sizes.len());
    Ok(())
}
