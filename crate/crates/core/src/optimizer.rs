//! Quasi-Newton minimizer with batched central-difference gradients.
//!
//! Every iteration submits one batch of `2·N_p` independent evaluations (the
//! gradient) followed by at most `line_search_max_evals` sequential ones.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::ansatz::AnsatzCircuit;
use crate::hamiltonian::QubitHamiltonian;
use crate::partition::PartitionedState;
use crate::statevector::{Engine, StateVector};

/// Failure of one evaluation inside a batch; `index` is its batch position.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("evaluation {index} failed: {message}")]
pub struct EvalError {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("finite difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("energy tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("gradient evaluation failed for parameter {parameter}: {source}")]
    Gradient { parameter: usize, source: EvalError },
    #[error("energy evaluation failed: {0}")]
    Eval(EvalError),
    #[error("non-finite energy {energy} at iteration {iteration}")]
    NonFinite { iteration: usize, energy: f64 },
}

/// Deterministic `θ → E` map.
pub trait Objective: Sync {
    fn parameter_count(&self) -> usize;
    fn evaluate(&self, theta: &[f64]) -> Result<f64, String>;
}

/// Runs batches of independent evaluations; results come back in input order.
pub trait Executor {
    fn parameter_count(&self) -> usize;
    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>, EvalError>;

    fn evaluate(&mut self, theta: &[f64]) -> Result<f64, EvalError> {
        Ok(self.evaluate_batch(&[theta.to_vec()])?[0])
    }
}

impl<E: Executor + ?Sized> Executor for &mut E {
    fn parameter_count(&self) -> usize {
        (**self).parameter_count()
    }

    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
        (**self).evaluate_batch(points)
    }
}

/// In-process executor, optionally spreading a batch over the rayon pool.
pub struct LocalExecutor<O> {
    objective: O,
    threaded: bool,
}

impl<O: Objective> LocalExecutor<O> {
    pub fn serial(objective: O) -> Self {
        Self { objective, threaded: false }
    }

    pub fn threaded(objective: O) -> Self {
        Self { objective, threaded: true }
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }
}

impl<O: Objective> Executor for LocalExecutor<O> {
    fn parameter_count(&self) -> usize {
        self.objective.parameter_count()
    }

    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
        let results: Vec<Result<f64, String>> = if self.threaded {
            points.par_iter().map(|p| self.objective.evaluate(p)).collect()
        } else {
            points.iter().map(|p| self.objective.evaluate(p)).collect()
        };
        results
            .into_iter()
            .enumerate()
            .map(|(index, r)| r.map_err(|message| EvalError { index, message }))
            .collect()
    }
}

/// VQE energy `⟨ψ(θ)|H|ψ(θ)⟩` on a fresh engine per evaluation; with
/// `partitions > 1` the state is split across that many in-process ranks.
#[derive(Debug, Clone)]
pub struct VqeObjective {
    pub circuit: AnsatzCircuit,
    pub hamiltonian: QubitHamiltonian,
    pub partitions: u64,
}

impl VqeObjective {
    pub fn new(circuit: AnsatzCircuit, hamiltonian: QubitHamiltonian) -> Self {
        Self { circuit, hamiltonian, partitions: 1 }
    }

    pub fn with_partitions(mut self, partitions: u64) -> Self {
        self.partitions = partitions;
        self
    }

    pub fn energy(&self, theta: &[f64]) -> Result<f64, String> {
        let n = self.circuit.n_qubits();
        let reference = self.circuit.reference();
        let mut engine: Box<dyn Engine> = if self.partitions <= 1 {
            Box::new(StateVector::init_basis_state(n, reference).map_err(|e| e.to_string())?)
        } else {
            Box::new(
                PartitionedState::init_basis_state(n, self.partitions, reference)
                    .map_err(|e| e.to_string())?,
            )
        };
        self.circuit.energy(theta, &self.hamiltonian, engine.as_mut()).map_err(|e| e.to_string())
    }
}

impl Objective for VqeObjective {
    fn parameter_count(&self) -> usize {
        self.circuit.parameter_count()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<f64, String> {
        self.energy(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub energy_tolerance: f64,
    pub max_iterations: usize,
    pub finite_difference_step: f64,
    pub line_search_max_evals: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            energy_tolerance: 1e-7,
            max_iterations: 200,
            finite_difference_step: 1e-4,
            line_search_max_evals: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Parameters and energy after this iteration's step.
    pub theta: Vec<f64>,
    pub energy: f64,
    /// Norm of the gradient computed at the start of this iteration.
    pub grad_norm: f64,
    pub parallel_evals: usize,
    pub sequential_evals: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeStatus {
    Converged,
    MaxIterations,
}

impl OptimizeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizeStatus::Converged => "converged",
            OptimizeStatus::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub initial_energy: f64,
    pub status: OptimizeStatus,
    pub trace: Vec<IterationRecord>,
}

/// Central-difference gradient; the `2·N_p` shifted points go out as one
/// batch ordered `(+e_0, -e_0, +e_1, -e_1, ...)`.
pub fn parallel_gradient(
    executor: &mut dyn Executor,
    theta: &[f64],
    h: f64,
) -> Result<Vec<f64>, OptimizeError> {
    if !(h > 0.0) {
        return Err(OptimizeError::BadStep(h));
    }
    let mut points = Vec::with_capacity(2 * theta.len());
    for i in 0..theta.len() {
        for sign in [1.0, -1.0] {
            let mut p = theta.to_vec();
            p[i] += sign * h;
            points.push(p);
        }
    }
    let values = executor
        .evaluate_batch(&points)
        .map_err(|e| OptimizeError::Gradient { parameter: e.index / 2, source: e })?;
    Ok(values.chunks(2).map(|pair| (pair[0] - pair[1]) / (2.0 * h)).collect())
}

/// Inverse-Hessian BFGS update; returns false when curvature is not positive.
fn bfgs_update(hinv: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, first: bool) -> bool {
    let sy = s.dot(y);
    if !(sy > 1e-14 * s.norm() * y.norm()) {
        return false;
    }
    if first {
        *hinv = DMatrix::identity(s.len(), s.len()) * (sy / y.dot(y));
    }
    let rho = 1.0 / sy;
    let hy = &*hinv * y;
    let yhy = y.dot(&hy);
    *hinv -= (&hy * s.transpose() + s * hy.transpose()) * rho;
    *hinv += s * s.transpose() * (rho * rho * yhy + rho);
    true
}

/// Largest parameter step taken in one iteration, in radians (Euclidean norm).
const MAX_STEP_NORM: f64 = 1.0;
const ARMIJO_C1: f64 = 1e-4;

fn check_energy(iteration: usize, energy: f64) -> Result<f64, OptimizeError> {
    if energy.is_finite() {
        Ok(energy)
    } else {
        Err(OptimizeError::NonFinite { iteration, energy })
    }
}

/// BFGS with a backtracking Armijo line search. Convergence is declared when
/// an accepted step changes the energy by less than `energy_tolerance`, or
/// when no trial improves on the current point even along steepest descent.
pub fn optimize(
    executor: &mut dyn Executor,
    theta0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult, OptimizeError> {
    let n = executor.parameter_count();
    if theta0.len() != n {
        return Err(OptimizeError::ParameterCount { expected: n, got: theta0.len() });
    }
    if !(cfg.energy_tolerance > 0.0) {
        return Err(OptimizeError::BadTolerance(cfg.energy_tolerance));
    }
    if !(cfg.finite_difference_step > 0.0) {
        return Err(OptimizeError::BadStep(cfg.finite_difference_step));
    }
    let mut theta = theta0.to_vec();
    let mut energy = check_energy(0, executor.evaluate(&theta).map_err(OptimizeError::Eval)?)?;
    let initial_energy = energy;
    let mut trace = Vec::new();
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut hinv_is_identity = true;
    let mut first_update = true;
    let mut previous: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut status = OptimizeStatus::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        let start = Instant::now();
        let grad = parallel_gradient(executor, &theta, cfg.finite_difference_step)?;
        let grad = DVector::from_vec(grad);
        let grad_norm = grad.norm();
        if let Some((old_theta, old_grad)) = previous.take() {
            let s = DVector::from_column_slice(&theta) - old_theta;
            let y = &grad - old_grad;
            if bfgs_update(&mut hinv, &s, &y, first_update) {
                first_update = false;
                hinv_is_identity = false;
            }
        }
        let record = |theta: &[f64], energy: f64, sequential_evals: usize| IterationRecord {
            iteration,
            theta: theta.to_vec(),
            energy,
            grad_norm,
            parallel_evals: 2 * n,
            sequential_evals,
            seconds: start.elapsed().as_secs_f64(),
        };
        if grad_norm == 0.0 {
            trace.push(record(&theta, energy, 0));
            status = OptimizeStatus::Converged;
            break;
        }

        let mut direction = -(&hinv * &grad);
        let mut slope = grad.dot(&direction);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(n, n);
            hinv_is_identity = true;
            first_update = true;
            direction = -&grad;
            slope = -grad_norm * grad_norm;
        }
        let step_norm = direction.norm();
        if step_norm > MAX_STEP_NORM {
            let f = MAX_STEP_NORM / step_norm;
            direction *= f;
            slope *= f;
        }

        let mut alpha = 1.0;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut evals = 0;
        while evals < cfg.line_search_max_evals {
            let trial: Vec<f64> = theta.iter().zip(&direction).map(|(t, d)| t + alpha * d).collect();
            let e = check_energy(iteration, executor.evaluate(&trial).map_err(OptimizeError::Eval)?)?;
            evals += 1;
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, trial));
            }
            if e <= energy + ARMIJO_C1 * alpha * slope {
                break;
            }
            // minimizer of the quadratic through E(0), E'(0) and E(alpha)
            let denom = 2.0 * (e - energy - alpha * slope);
            let next = if denom > 0.0 { -slope * alpha * alpha / denom } else { 0.5 * alpha };
            alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
        }

        match best {
            Some((e, trial)) if e < energy => {
                let delta = (energy - e).abs();
                previous = Some((DVector::from_column_slice(&theta), grad));
                theta = trial;
                energy = e;
                trace.push(record(&theta, energy, evals));
                if delta < cfg.energy_tolerance {
                    status = OptimizeStatus::Converged;
                    break;
                }
            }
            _ => {
                trace.push(record(&theta, energy, evals));
                if hinv_is_identity {
                    status = OptimizeStatus::Converged;
                    break;
                }
                hinv = DMatrix::identity(n, n);
                hinv_is_identity = true;
                first_update = true;
            }
        }
    }
    Ok(OptimizeResult { theta, energy, initial_energy, status, trace })
}

/// Trace as CSV: `iteration,energy,grad_norm,parallel_evals,sequential_evals,seconds`.
pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,energy,grad_norm,parallel_evals,sequential_evals,seconds\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{},{},{:.6}",
            r.iteration, r.energy, r.grad_norm, r.parallel_evals, r.sequential_evals, r.seconds
        );
    }
    out
}
