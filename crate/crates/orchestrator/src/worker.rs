//! Worker side of the job protocol.
//!
//! One connection is served at a time and each connection carries one job in
//! flight. The loaded problem survives across connections; nothing else does.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::JoinHandle;

use dvqe_core::optimizer::Objective;
use dvqe_core::wire::{read_frame, status, write_frame, JobKind, Message, WireError};
use dvqe_core::VqeObjective;

use crate::problem::Problem;

/// Default listen address when neither a flag nor `DVQE_WORKER_ADDR` is given.
pub const DEFAULT_WORKER_ADDR: &str = "127.0.0.1:7070";
pub const WORKER_ADDR_ENV: &str = "DVQE_WORKER_ADDR";

pub fn default_listen_addr() -> String {
    std::env::var(WORKER_ADDR_ENV).unwrap_or_else(|_| DEFAULT_WORKER_ADDR.to_string())
}

/// The cached problem, if any.
#[derive(Debug, Default)]
pub struct ProblemStore {
    objective: Option<VqeObjective>,
}

impl ProblemStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_loaded(&self) -> bool {
        self.objective.is_some()
    }

    pub fn load(&mut self, problem: &Problem) {
        self.objective = Some(problem.objective());
    }

    /// Runs one request and builds its reply. `None` means stop serving.
    pub fn handle(&mut self, msg: Message) -> Option<Message> {
        let reply = |job_id, kind, status, values| Message::Result { job_id, kind, status, values };
        Some(match msg {
            Message::Ping { job_id, values } => Message::Ping { job_id, values },
            Message::LoadProblem { job_id, problem } => match Problem::parse(&problem) {
                Ok(p) => {
                    let count = p.circuit.parameter_count() as f64;
                    self.load(&p);
                    reply(job_id, JobKind::LoadProblem, status::OK, vec![count])
                }
                Err(_) => reply(job_id, JobKind::LoadProblem, status::BAD_REQUEST, vec![]),
            },
            Message::EvaluateEnergy { job_id, theta } => {
                self.evaluate(job_id, JobKind::EvaluateEnergy, &theta)
            }
            Message::EvaluateBatchElement { job_id, theta } => {
                self.evaluate(job_id, JobKind::EvaluateBatchElement, &theta)
            }
            Message::Shutdown => return None,
            // Not requests; answered with BAD_REQUEST under job id 0.
            Message::Result { job_id, .. } => reply(job_id, JobKind::Ping, status::BAD_REQUEST, vec![]),
            Message::Exchange { .. } => reply(0, JobKind::Ping, status::BAD_REQUEST, vec![]),
        })
    }

    fn evaluate(&self, job_id: u64, kind: JobKind, theta: &[f64]) -> Message {
        let (st, values) = match &self.objective {
            None => (status::NO_PROBLEM_LOADED, vec![]),
            Some(obj) if obj.parameter_count() != theta.len() => (status::BAD_REQUEST, vec![]),
            Some(obj) => match obj.evaluate(theta) {
                Ok(e) if e.is_finite() => (status::OK, vec![e]),
                _ => (status::EVALUATION_FAILED, vec![]),
            },
        };
        Message::Result { job_id, kind, status: st, values }
    }
}

/// How a connection ended.
#[derive(Debug)]
enum ConnectionEnd {
    Closed,
    Shutdown,
}

fn serve_connection(stream: TcpStream, store: &mut ProblemStore) -> Result<ConnectionEnd, WireError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let Some(msg) = read_frame(&mut reader)? else {
            return Ok(ConnectionEnd::Closed);
        };
        match store.handle(msg) {
            Some(reply) => write_frame(&mut writer, &reply)?,
            None => return Ok(ConnectionEnd::Shutdown),
        }
    }
}

/// Accepts connections until a `Shutdown` frame arrives. A protocol error
/// drops that connection only.
pub fn serve_worker(listener: TcpListener, store: &mut ProblemStore) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let _ = stream.set_nodelay(true);
        match serve_connection(stream, store) {
            Ok(ConnectionEnd::Shutdown) => return Ok(()),
            Ok(ConnectionEnd::Closed) | Err(_) => continue,
        }
    }
    Ok(())
}

/// Binds `addr` and serves until shutdown.
pub fn run_worker<A: ToSocketAddrs>(addr: A) -> io::Result<()> {
    serve_worker(TcpListener::bind(addr)?, &mut ProblemStore::new())
}

/// A worker running on a thread of this process.
pub struct LocalWorker {
    pub addr: SocketAddr,
    handle: JoinHandle<io::Result<()>>,
}

impl LocalWorker {
    /// Binds an ephemeral loopback port and serves on a new thread.
    pub fn spawn() -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let handle = std::thread::spawn(move || serve_worker(listener, &mut ProblemStore::new()));
        Ok(Self { addr, handle })
    }

    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    /// Sends `Shutdown` on a new connection and waits for the thread.
    pub fn shutdown(self) -> io::Result<()> {
        let mut s = TcpStream::connect(self.addr)?;
        write_frame(&mut s, &Message::Shutdown).map_err(io::Error::other)?;
        drop(s);
        self.join()
    }

    /// Waits for a worker that has already been told to shut down.
    pub fn join(self) -> io::Result<()> {
        self.handle.join().map_err(|_| io::Error::other("worker thread panicked"))?
    }
}
