use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dvqe::bench::{bench_mpi, BenchSpec};
use dvqe::config::RunConfig;
use dvqe::run::{build_circuit, hamiltonian_from_fcidump, local_vqe, run_vqe};
use dvqe::worker::{default_listen_addr, serve_worker, ProblemStore};
use dvqe_core::cutoff::cutoff_scan;
use dvqe_core::partition::min_workers;
use dvqe_core::planner::{choose_plan, feasible_plans, heatmap_csv, BenchTable, EfficiencyModel};
use dvqe_core::OptimizerConfig;

#[derive(Parser)]
#[command(name = "dvqe", version, about = "Distributed VQE simulation driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full VQE run from a config file, with per-key overrides.
    Run(Box<RunArgs>),
    /// Choose (partitions, servers) from a benchmark table.
    Plan(PlanArgs),
    /// Time one circuit execution per partition count.
    BenchMpi(BenchArgs),
    /// Scan retained fractions on a small problem, optionally transfer to a large one.
    CutoffScan(ScanArgs),
    /// Serve evaluation jobs until a Shutdown frame arrives.
    Worker(WorkerArgs),
    /// Write the sorted qubit Hamiltonian of an FCIDUMP.
    Transform(TransformArgs),
}

/// Each flag overrides the config key of the same name.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fcidump: Option<String>,
    #[arg(long)]
    hamiltonian: Option<String>,
    #[arg(long)]
    electrons: Option<String>,
    #[arg(long)]
    th1: Option<String>,
    #[arg(long)]
    retained_fraction: Option<String>,
    #[arg(long)]
    th2: Option<String>,
    #[arg(long)]
    energy_tolerance: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    finite_difference_step: Option<String>,
    #[arg(long)]
    line_search_max_evals: Option<String>,
    /// `auto` or `<p>,<s>`.
    #[arg(long)]
    plan: Option<String>,
    #[arg(long)]
    bench: Option<String>,
    #[arg(long)]
    node_budget: Option<String>,
    #[arg(long)]
    memory_per_node: Option<String>,
    /// Comma-separated `host:port` list.
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        [
            ("fcidump", &self.fcidump),
            ("hamiltonian", &self.hamiltonian),
            ("electrons", &self.electrons),
            ("th1", &self.th1),
            ("retained_fraction", &self.retained_fraction),
            ("th2", &self.th2),
            ("energy_tolerance", &self.energy_tolerance),
            ("max_iterations", &self.max_iterations),
            ("finite_difference_step", &self.finite_difference_step),
            ("line_search_max_evals", &self.line_search_max_evals),
            ("plan", &self.plan),
            ("bench", &self.bench),
            ("node_budget", &self.node_budget),
            ("memory_per_node", &self.memory_per_node),
            ("workers", &self.workers),
            ("output_dir", &self.output_dir),
            ("seed", &self.seed),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Args)]
struct PlanArgs {
    /// `p seconds` per line.
    #[arg(long)]
    bench: PathBuf,
    /// Parallel evaluations per iteration (2 × parameters for a central-difference gradient).
    #[arg(long)]
    np: u64,
    #[arg(long, default_value_t = 3)]
    ns: u64,
    #[arg(long)]
    budget: u64,
    /// Smallest partition count; derived from --qubits and --memory-per-node when omitted.
    #[arg(long)]
    p_min: Option<u64>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long, default_value_t = 16 << 30)]
    memory_per_node: u64,
    /// Write the feasible (p, s) grid as CSV.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    qubits: usize,
    /// Comma-separated partition counts.
    #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
    partitions: Vec<u64>,
    #[arg(long, default_value_t = 50)]
    rotations: usize,
    #[arg(long, default_value_t = 100)]
    terms: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    small: PathBuf,
    /// Problem that receives the recommended fraction as a threshold.
    #[arg(long)]
    large: Option<PathBuf>,
    #[arg(long)]
    delta_e: f64,
    #[arg(long, default_value_t = 1e-6)]
    th2: f64,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WorkerArgs {
    /// Defaults to $DVQE_WORKER_ADDR, then 127.0.0.1:7070.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    fcidump: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => {
            RunConfig::parse(&fs::read_to_string(p).with_context(|| format!("[config] {}", p.display()))?)
                .context("[config]")?
        }
        None => RunConfig::default(),
    };
    for (k, v) in args.overrides() {
        cfg.set(k, v).context("[config]")?;
    }
    let summary = run_vqe(&cfg)?;
    print!("{}", summary.to_text());
    println!("output_dir: {}", summary.output_dir.display());
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let bench = BenchTable::parse(&fs::read_to_string(&args.bench)?)?;
    let p_min = match (args.p_min, args.qubits) {
        (Some(p), _) => p,
        (None, Some(n)) => min_workers(n, args.memory_per_node),
        (None, None) => 1,
    };
    let model = EfficiencyModel { n_p: args.np, n_s: args.ns };
    let plan = choose_plan(&bench, model, args.budget, p_min)?;
    if let Some(path) = &args.heatmap {
        fs::write(path, heatmap_csv(&feasible_plans(&bench, model, args.budget, p_min)?))?;
    }
    println!(
        "partitions: {}\nservers: {}\npredicted_seconds: {}\nmpi_efficiency: {:.6}\ndp_efficiency: {:.6}",
        plan.partitions, plan.servers, plan.predicted_seconds, plan.mpi_efficiency, plan.dp_efficiency
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let spec = BenchSpec {
        n_qubits: args.qubits,
        partitions: args.partitions,
        rotations: args.rotations,
        terms: args.terms,
        repeats: args.repeats,
        seed: args.seed,
    };
    let table = bench_mpi(&spec).map_err(anyhow::Error::msg)?;
    emit(&args.out, &table.to_text())
}

fn cmd_scan(args: ScanArgs) -> Result<()> {
    let (h_small, ne) = hamiltonian_from_fcidump(&args.small)?;
    // The ansatz and θ0 come from the uncut problem and stay fixed across ratios.
    let circuit = build_circuit(&h_small, ne, args.th2)?;
    let opt = OptimizerConfig { max_iterations: args.max_iterations, ..OptimizerConfig::default() };
    let runner = |h: &dvqe_core::QubitHamiltonian| {
        local_vqe(h, &circuit, &opt).map(|r| r.energy).map_err(|e| e.to_string())
    };
    let mut report = cutoff_scan(&h_small, runner, args.delta_e)?;
    if let Some(large) = &args.large {
        let (h_large, _) = hamiltonian_from_fcidump(large)?;
        report.transfer_to(&h_large)?;
    }
    emit(&args.out, &report.to_csv())?;
    eprintln!("recommended_retained_fraction: {:.1}", report.recommended_fraction);
    if let (Some(th1), Some(kept)) = (report.recommended_th1, report.transferred_terms) {
        eprintln!("recommended_th1: {th1:e} (keeps {kept} terms)");
    }
    Ok(())
}

fn cmd_worker(args: WorkerArgs) -> Result<()> {
    let addr = args.listen.unwrap_or_else(default_listen_addr);
    let listener = std::net::TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    println!("listening on {}", listener.local_addr()?);
    serve_worker(listener, &mut ProblemStore::new())?;
    Ok(())
}

fn cmd_transform(args: TransformArgs) -> Result<()> {
    let (h, _) = hamiltonian_from_fcidump(&args.fcidump)?;
    emit(&args.out, &h.to_text())
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(*a),
        Command::Plan(a) => cmd_plan(a),
        Command::BenchMpi(a) => cmd_bench(a),
        Command::CutoffScan(a) => cmd_scan(a),
        Command::Worker(a) => cmd_worker(a),
        Command::Transform(a) => cmd_transform(a),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
