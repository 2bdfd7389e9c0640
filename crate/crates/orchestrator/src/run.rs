//! End-to-end VQE runs: integrals to qubit Hamiltonian, cutoff, CISD-seeded
//! ansatz, optimization on a local or distributed executor, result files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dvqe_core::ci::{exact_diagonalize, CiMode, Sector};
use dvqe_core::optimizer::{trace_csv, Executor, OptimizeResult};
use dvqe_core::partition::min_workers;
use dvqe_core::planner::{choose_plan, BenchTable, EfficiencyModel};
use dvqe_core::{
    assemble_fermion_hamiltonian, jordan_wigner, optimize, AnsatzCircuit, AnsatzConfig, IntegralTable,
    LocalExecutor, OptimizerConfig, QubitHamiltonian,
};
use serde_json::json;

use crate::config::{Cutoff, PlanSpec, RunConfig};
use crate::dispatch::{DistributedExecutor, WorkerRegistry};
use crate::problem::Problem;
use crate::worker::LocalWorker;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Assemble,
    Transform,
    Cutoff,
    Cisd,
    Ansatz,
    Plan,
    Workers,
    Optimize,
    Output,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Assemble => "assemble",
            Stage::Transform => "transform",
            Stage::Cutoff => "cutoff",
            Stage::Cisd => "cisd",
            Stage::Ansatz => "ansatz",
            Stage::Plan => "plan",
            Stage::Workers => "workers",
            Stage::Optimize => "optimize",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug)]
pub struct RunError {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage.as_str(), self.message)
    }
}

impl std::error::Error for RunError {}

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> RunError {
    move |e| RunError { stage, message: e.to_string() }
}

/// Reads an FCIDUMP and returns its sorted qubit Hamiltonian and electron count.
pub fn hamiltonian_from_fcidump(path: &Path) -> Result<(QubitHamiltonian, usize), RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError { stage: Stage::Input, message: format!("{}: {e}", path.display()) })?;
    let table = IntegralTable::parse_fcidump(&text).map_err(at(Stage::Input))?;
    let fermion = assemble_fermion_hamiltonian(&table).map_err(at(Stage::Assemble))?;
    let h = jordan_wigner(&fermion).map_err(at(Stage::Transform))?;
    Ok((h.sort_terms(), table.n_electrons()))
}

/// Loads whichever Hamiltonian input the config names.
pub fn load_hamiltonian(cfg: &RunConfig) -> Result<(QubitHamiltonian, usize), RunError> {
    if let Some(path) = &cfg.fcidump {
        return hamiltonian_from_fcidump(path);
    }
    let path = cfg.hamiltonian.as_ref().ok_or_else(|| at(Stage::Config)("no Hamiltonian input"))?;
    let text = fs::read_to_string(path)
        .map_err(|e| RunError { stage: Stage::Input, message: format!("{}: {e}", path.display()) })?;
    let h = QubitHamiltonian::parse(&text).map_err(at(Stage::Input))?;
    let ne = cfg.electrons.ok_or_else(|| at(Stage::Config)("`electrons` is required"))?;
    Ok((h.sort_terms(), ne))
}

pub fn apply_cutoff(h: &QubitHamiltonian, cutoff: Cutoff) -> Result<QubitHamiltonian, RunError> {
    match cutoff {
        Cutoff::Threshold(t) => h.cutoff_by_threshold(t),
        Cutoff::RetainedFraction(f) => h.retain_fraction(f),
    }
    .map_err(at(Stage::Cutoff))
}

/// CISD on `h`, then the selected excitations with their `θ0`.
pub fn build_circuit(h: &QubitHamiltonian, n_electrons: usize, th2: f64) -> Result<AnsatzCircuit, RunError> {
    let (_, cisd) =
        exact_diagonalize(h, Sector::Electrons(n_electrons), CiMode::Cisd).map_err(at(Stage::Cisd))?;
    AnsatzCircuit::from_cisd(&cisd, &AnsatzConfig { th2 }, h.n_qubits(), n_electrons)
        .map_err(at(Stage::Ansatz))
}

/// Optimizes `circuit` on `h` from its `θ0` with the threaded local executor.
pub fn local_vqe(
    h: &QubitHamiltonian,
    circuit: &AnsatzCircuit,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult, RunError> {
    let problem = Problem::new(h.clone(), circuit.clone(), 1).map_err(at(Stage::Ansatz))?;
    let mut exec = LocalExecutor::threaded(problem.objective());
    optimize(&mut exec, circuit.theta0(), cfg).map_err(at(Stage::Optimize))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenPlan {
    pub partitions: u64,
    pub servers: u64,
    pub auto: bool,
    pub predicted_seconds: Option<f64>,
}

fn resolve_plan(cfg: &RunConfig, n_qubits: usize, parameters: usize) -> Result<ChosenPlan, RunError> {
    match cfg.plan {
        PlanSpec::Fixed { partitions, servers } => {
            if let Some(budget) = cfg.node_budget {
                if partitions * servers > budget {
                    return Err(at(Stage::Plan)(format!(
                        "plan {partitions}x{servers} needs {} nodes, budget is {budget}",
                        partitions * servers
                    )));
                }
            }
            Ok(ChosenPlan { partitions, servers, auto: false, predicted_seconds: None })
        }
        PlanSpec::Auto => {
            let path =
                cfg.bench.as_ref().ok_or_else(|| at(Stage::Plan)("plan `auto` needs a bench table"))?;
            let text = fs::read_to_string(path)
                .map_err(|e| RunError { stage: Stage::Plan, message: format!("{}: {e}", path.display()) })?;
            let bench = BenchTable::parse(&text).map_err(at(Stage::Plan))?;
            let largest = bench.iter().map(|(p, _)| p).max().unwrap_or(1);
            let budget = cfg.node_budget.unwrap_or(largest);
            let model = EfficiencyModel {
                n_p: 2 * parameters as u64,
                n_s: cfg.optimizer.line_search_max_evals as u64,
            };
            let p_min = min_workers(n_qubits, cfg.memory_per_node);
            let plan = choose_plan(&bench, model, budget, p_min).map_err(at(Stage::Plan))?;
            Ok(ChosenPlan {
                partitions: plan.partitions,
                servers: plan.servers,
                auto: true,
                predicted_seconds: Some(plan.predicted_seconds),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub energy: f64,
    pub initial_energy: f64,
    pub status: &'static str,
    pub iterations: usize,
    pub theta: Vec<f64>,
    pub n_qubits: usize,
    pub parameters: usize,
    pub terms_before_cutoff: usize,
    pub terms_after_cutoff: usize,
    pub plan: ChosenPlan,
    /// `local`, `spawned` or `remote`.
    pub executor: &'static str,
    pub wall_seconds: f64,
    pub result: OptimizeResult,
    pub output_dir: PathBuf,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "energy: {:.12}\ninitial_energy: {:.12}\nstatus: {}\niterations: {}\nqubits: {}\nparameters: {}\n\
             terms_before_cutoff: {}\nterms_after_cutoff: {}\nplan: partitions={} servers={} ({})\n",
            self.energy,
            self.initial_energy,
            self.status,
            self.iterations,
            self.n_qubits,
            self.parameters,
            self.terms_before_cutoff,
            self.terms_after_cutoff,
            self.plan.partitions,
            self.plan.servers,
            if self.plan.auto { "auto" } else { "fixed" },
        );
        if let Some(t) = self.plan.predicted_seconds {
            s.push_str(&format!("predicted_seconds_per_iteration: {t:.6}\n"));
        }
        s.push_str(&format!("executor: {}\nwall_seconds: {:.3}\n", self.executor, self.wall_seconds));
        s
    }

    fn to_json(&self, cfg: &RunConfig) -> serde_json::Value {
        json!({
            "energy": self.energy,
            "initial_energy": self.initial_energy,
            "status": self.status,
            "iterations": self.iterations,
            "theta": self.theta,
            "qubits": self.n_qubits,
            "parameters": self.parameters,
            "terms_before_cutoff": self.terms_before_cutoff,
            "terms_after_cutoff": self.terms_after_cutoff,
            "th1": cfg.th1,
            "retained_fraction": cfg.retained_fraction,
            "th2": cfg.th2,
            "plan": {
                "partitions": self.plan.partitions,
                "servers": self.plan.servers,
                "auto": self.plan.auto,
                "predicted_seconds": self.plan.predicted_seconds,
            },
            "executor": self.executor,
            "seed": cfg.seed,
            "wall_seconds": self.wall_seconds,
        })
    }
}

fn run_optimizer(
    exec: &mut dyn Executor,
    circuit: &AnsatzCircuit,
    cfg: &RunConfig,
) -> Result<OptimizeResult, RunError> {
    optimize(exec, circuit.theta0(), &cfg.optimizer).map_err(at(Stage::Optimize))
}

/// Runs the whole pipeline and writes `trace.csv`, `result.json` and
/// `summary.txt` into the output directory.
///
/// With `workers` set, evaluations go to those endpoints. Otherwise a plan
/// with `s > 1` spawns `s` workers on loopback for the duration of the run,
/// and `s = 1` evaluates in process.
pub fn run_vqe(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    cfg.validate().map_err(at(Stage::Config))?;
    let (h_full, n_electrons) = load_hamiltonian(cfg)?;
    let h = apply_cutoff(&h_full, cfg.cutoff())?;
    let circuit = build_circuit(&h, n_electrons, cfg.th2)?;
    let plan = resolve_plan(cfg, h.n_qubits(), circuit.parameter_count())?;
    let problem = Problem::new(h.clone(), circuit.clone(), plan.partitions).map_err(at(Stage::Plan))?;

    let (result, executor) = if !cfg.workers.is_empty() || plan.servers > 1 {
        let spawned: Vec<LocalWorker> = if cfg.workers.is_empty() {
            (0..plan.servers)
                .map(|_| LocalWorker::spawn())
                .collect::<Result<_, _>>()
                .map_err(at(Stage::Workers))?
        } else {
            Vec::new()
        };
        let endpoints: Vec<String> = if spawned.is_empty() {
            cfg.workers.iter().take(plan.servers as usize).cloned().collect()
        } else {
            spawned.iter().map(LocalWorker::endpoint).collect()
        };
        let outcome = WorkerRegistry::new(&endpoints, plan.partitions, cfg.node_budget)
            .and_then(|r| DistributedExecutor::new(r, &problem))
            .map_err(at(Stage::Workers))
            .and_then(|mut exec| run_optimizer(&mut exec, &circuit, cfg));
        // The registry and its connections are gone by now, so each spawned
        // worker is back in accept() and takes the Shutdown connection.
        for w in spawned {
            let _ = w.shutdown();
        }
        (outcome?, if cfg.workers.is_empty() { "spawned" } else { "remote" })
    } else {
        let mut exec = LocalExecutor::threaded(problem.objective());
        (run_optimizer(&mut exec, &circuit, cfg)?, "local")
    };

    let summary = RunSummary {
        energy: result.energy,
        initial_energy: result.initial_energy,
        status: result.status.as_str(),
        iterations: result.trace.len(),
        theta: result.theta.clone(),
        n_qubits: h.n_qubits(),
        parameters: circuit.parameter_count(),
        terms_before_cutoff: h_full.len(),
        terms_after_cutoff: h.len(),
        plan,
        executor,
        wall_seconds: start.elapsed().as_secs_f64(),
        result,
        output_dir: cfg.output_dir.clone(),
    };
    write_outputs(&summary, cfg).map_err(at(Stage::Output))?;
    Ok(summary)
}

fn write_outputs(summary: &RunSummary, cfg: &RunConfig) -> std::io::Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace_csv(&summary.result.trace))?;
    let json = serde_json::to_string_pretty(&summary.to_json(cfg)).map_err(std::io::Error::other)?;
    fs::write(dir.join("result.json"), json + "\n")?;
    fs::write(dir.join("summary.txt"), summary.to_text())
}
