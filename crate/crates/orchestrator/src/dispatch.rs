//! Coordinator side: worker registry, batch dispatch and the distributed
//! executor the optimizer drives.

use std::collections::{BTreeSet, VecDeque};
use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::sync::{Condvar, Mutex};

use dvqe_core::optimizer::{EvalError, Executor};
use dvqe_core::wire::{read_frame, status, write_frame, JobKind, Message, WireError};
use thiserror::Error;

use crate::problem::Problem;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("no live workers")]
    NoWorkers,
    #[error("{nodes} nodes requested but the budget is {budget}")]
    OverBudget { nodes: u64, budget: u64 },
    #[error("duplicate job id {0}")]
    DuplicateJobId(u64),
    #[error("job {job_id} failed on {endpoint} with status {status}")]
    JobFailed { job_id: u64, status: u8, endpoint: String },
    #[error("job {job_id} lost on two workers (last: {endpoint}: {message})")]
    DoubleFailure { job_id: u64, endpoint: String, message: String },
    #[error("all workers failed with {remaining} jobs outstanding")]
    AllWorkersFailed { remaining: usize },
    #[error("loading the problem on {endpoint}: {message}")]
    Load { endpoint: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerState {
    Idle,
    Busy,
    Failed,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    fn open(endpoint: &str) -> Result<Self, WireError> {
        let stream = TcpStream::connect(endpoint)?;
        let _ = stream.set_nodelay(true);
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    fn call(&mut self, msg: &Message) -> Result<Message, String> {
        write_frame(&mut self.writer, msg).map_err(|e| e.to_string())?;
        match read_frame(&mut self.reader) {
            Ok(Some(reply)) => Ok(reply),
            Ok(None) => Err("connection closed".into()),
            Err(e) => Err(e.to_string()),
        }
    }
}

pub struct WorkerSlot {
    pub endpoint: String,
    /// Partition group size of this server.
    pub partitions: u64,
    pub state: WorkerState,
    conn: Option<Connection>,
}

impl WorkerSlot {
    fn fail(&mut self) {
        self.state = WorkerState::Failed;
        self.conn = None;
    }

    fn connection(&mut self) -> Result<&mut Connection, String> {
        if self.conn.is_none() {
            self.conn = Some(Connection::open(&self.endpoint).map_err(|e| e.to_string())?);
        }
        Ok(self.conn.as_mut().expect("just opened"))
    }

    /// Evaluates one job. `Err` means the worker is unusable.
    fn run_job(&mut self, job: &Job) -> Result<(u8, f64), String> {
        let msg = Message::EvaluateBatchElement { job_id: job.job_id, theta: job.theta.clone() };
        match self.connection()?.call(&msg)? {
            Message::Result { job_id, kind: JobKind::EvaluateBatchElement, status: st, values }
                if job_id == job.job_id =>
            {
                match (st, values.as_slice()) {
                    (status::OK, [e]) => Ok((st, *e)),
                    (status::OK, _) => Err(format!("job {job_id}: expected one value, got {}", values.len())),
                    (st, _) => Ok((st, f64::NAN)),
                }
            }
            other => Err(format!("unexpected reply to job {}: {other:?}", job.job_id)),
        }
    }
}

/// Servers the coordinator dispatches to.
pub struct WorkerRegistry {
    slots: Vec<WorkerSlot>,
}

impl WorkerRegistry {
    /// Every server hosts a group of `partitions` ranks, so the registry
    /// represents `endpoints.len() · partitions` nodes.
    pub fn new(
        endpoints: &[String],
        partitions: u64,
        node_budget: Option<u64>,
    ) -> Result<Self, DispatchError> {
        let nodes = endpoints.len() as u64 * partitions;
        if let Some(budget) = node_budget {
            if nodes > budget {
                return Err(DispatchError::OverBudget { nodes, budget });
            }
        }
        let slots = endpoints
            .iter()
            .map(|e| WorkerSlot { endpoint: e.clone(), partitions, state: WorkerState::Idle, conn: None })
            .collect();
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[WorkerSlot] {
        &self.slots
    }

    pub fn live_count(&self) -> usize {
        self.slots.iter().filter(|s| s.state != WorkerState::Failed).count()
    }

    pub fn total_nodes(&self) -> u64 {
        self.slots.iter().map(|s| s.partitions).sum()
    }

    /// Sends the problem to every live worker and returns its parameter
    /// count. Unreachable workers are marked failed; a worker that rejects
    /// the problem is an error.
    pub fn load_problem(&mut self, problem: &Problem) -> Result<usize, DispatchError> {
        let text = problem.to_text();
        for (i, slot) in self.slots.iter_mut().enumerate().filter(|(_, s)| s.state != WorkerState::Failed) {
            let msg = Message::LoadProblem { job_id: i as u64, problem: text.clone() };
            let reply = slot.connection().and_then(|c| c.call(&msg));
            match reply {
                Ok(Message::Result { status: status::OK, .. }) => {}
                Ok(other) => {
                    return Err(DispatchError::Load {
                        endpoint: slot.endpoint.clone(),
                        message: format!("rejected: {other:?}"),
                    })
                }
                Err(_) => slot.fail(),
            }
        }
        if self.live_count() == 0 {
            return Err(DispatchError::NoWorkers);
        }
        Ok(problem.circuit.parameter_count())
    }

    /// Sends `Shutdown` to every live worker and drops the connections.
    pub fn shutdown_all(&mut self) {
        for slot in self.slots.iter_mut().filter(|s| s.state != WorkerState::Failed) {
            if let Ok(c) = slot.connection() {
                let _ = write_frame(&mut c.writer, &Message::Shutdown);
            }
            slot.conn = None;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub job_id: u64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobOutcome {
    pub job_id: u64,
    pub energy: f64,
}

struct Shared {
    queue: VecDeque<(usize, u32)>,
    results: Vec<Option<f64>>,
    remaining: usize,
    live: usize,
    error: Option<DispatchError>,
}

/// Runs `jobs` on the live workers, each pulling the next queued job as soon
/// as it is free. A job whose worker dies is requeued once; losing it a
/// second time fails the batch, as does any non-OK status. Results come back
/// sorted by job id.
pub fn dispatch_batch(registry: &mut WorkerRegistry, jobs: &[Job]) -> Result<Vec<JobOutcome>, DispatchError> {
    let mut seen = BTreeSet::new();
    for j in jobs {
        if !seen.insert(j.job_id) {
            return Err(DispatchError::DuplicateJobId(j.job_id));
        }
    }
    let live = registry.live_count();
    if live == 0 {
        return Err(DispatchError::NoWorkers);
    }
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let shared = Mutex::new(Shared {
        queue: (0..jobs.len()).map(|i| (i, 0)).collect(),
        results: vec![None; jobs.len()],
        remaining: jobs.len(),
        live,
        error: None,
    });
    let wake = Condvar::new();

    std::thread::scope(|scope| {
        for slot in registry.slots.iter_mut().filter(|s| s.state != WorkerState::Failed) {
            let (shared, wake) = (&shared, &wake);
            scope.spawn(move || loop {
                let (index, attempts) = {
                    let mut g = shared.lock().unwrap();
                    loop {
                        if g.error.is_some() || g.remaining == 0 {
                            slot.state = WorkerState::Idle;
                            return;
                        }
                        if let Some(next) = g.queue.pop_front() {
                            break next;
                        }
                        g = wake.wait(g).unwrap();
                    }
                };
                slot.state = WorkerState::Busy;
                let job = &jobs[index];
                let outcome = slot.run_job(job);
                let mut g = shared.lock().unwrap();
                match outcome {
                    Ok((status::OK, energy)) => {
                        g.results[index] = Some(energy);
                        g.remaining -= 1;
                        slot.state = WorkerState::Idle;
                    }
                    Ok((st, _)) => {
                        slot.state = WorkerState::Idle;
                        g.error.get_or_insert(DispatchError::JobFailed {
                            job_id: job.job_id,
                            status: st,
                            endpoint: slot.endpoint.clone(),
                        });
                    }
                    Err(message) => {
                        slot.fail();
                        g.live -= 1;
                        if attempts >= 1 {
                            g.error.get_or_insert(DispatchError::DoubleFailure {
                                job_id: job.job_id,
                                endpoint: slot.endpoint.clone(),
                                message,
                            });
                        } else {
                            g.queue.push_back((index, attempts + 1));
                            if g.live == 0 {
                                let remaining = g.remaining;
                                g.error.get_or_insert(DispatchError::AllWorkersFailed { remaining });
                            }
                        }
                        wake.notify_all();
                        return;
                    }
                }
                wake.notify_all();
            });
        }
    });

    let shared = shared.into_inner().unwrap();
    if let Some(e) = shared.error {
        return Err(e);
    }
    let mut out: Vec<JobOutcome> = jobs
        .iter()
        .zip(shared.results)
        .map(|(j, e)| JobOutcome { job_id: j.job_id, energy: e.expect("every job finished") })
        .collect();
    out.sort_by_key(|o| o.job_id);
    Ok(out)
}

/// [`Executor`] backed by remote workers. Job ids increase monotonically
/// over the executor's lifetime.
pub struct DistributedExecutor {
    registry: WorkerRegistry,
    parameter_count: usize,
    next_job_id: u64,
}

impl DistributedExecutor {
    /// Loads `problem` on every worker in `registry`.
    pub fn new(mut registry: WorkerRegistry, problem: &Problem) -> Result<Self, DispatchError> {
        let parameter_count = registry.load_problem(problem)?;
        Ok(Self { registry, parameter_count, next_job_id: 1 })
    }

    pub fn registry(&self) -> &WorkerRegistry {
        &self.registry
    }

    pub fn into_registry(self) -> WorkerRegistry {
        self.registry
    }
}

impl Executor for DistributedExecutor {
    fn parameter_count(&self) -> usize {
        self.parameter_count
    }

    fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>, EvalError> {
        let base = self.next_job_id;
        self.next_job_id += points.len() as u64;
        let jobs: Vec<Job> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Job { job_id: base + i as u64, theta: p.clone() })
            .collect();
        match dispatch_batch(&mut self.registry, &jobs) {
            Ok(outcomes) => Ok(outcomes.into_iter().map(|o| o.energy).collect()),
            Err(e) => {
                let index = match &e {
                    DispatchError::JobFailed { job_id, .. } | DispatchError::DoubleFailure { job_id, .. } => {
                        (job_id - base) as usize
                    }
                    _ => 0,
                };
                Err(EvalError { index, message: e.to_string() })
            }
        }
    }
}
