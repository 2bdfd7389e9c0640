//! Coordinator/worker runtime for distributed VQE: the problem payload,
//! worker loop, batch dispatch, run configuration and the end-to-end driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod dispatch;
pub mod problem;
pub mod run;
pub mod worker;

pub use config::{ConfigError, Cutoff, PlanSpec, RunConfig};
pub use dispatch::{
    dispatch_batch, DispatchError, DistributedExecutor, Job, JobOutcome, WorkerRegistry, WorkerState,
};
pub use problem::Problem;
pub use run::{run_vqe, RunError, RunSummary, Stage};
pub use worker::{serve_worker, LocalWorker, ProblemStore};
