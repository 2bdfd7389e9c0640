//! Building blocks for distributed variational quantum eigensolver simulation:
//! Pauli-string Hamiltonians from molecular integrals, full and rank-partitioned
//! state-vector engines, a CI-seeded excitation ansatz with a batch-parallel
//! quasi-Newton optimizer, a planner for splitting nodes between state
//! partitioning and parallel circuit evaluation, and Hamiltonian term cutoff.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod ci;
pub mod cutoff;
pub mod fcidump;
pub mod fermion;
pub mod hamiltonian;
pub mod optimizer;
pub mod partition;
pub mod pauli;
pub mod planner;
pub mod statevector;
pub mod wire;

pub use ansatz::{AnsatzCircuit, AnsatzConfig};
pub use ci::{exact_diagonalize, hf_reference_index, CiMode, CisdResult, Excitation, Sector};
pub use fcidump::IntegralTable;
pub use fermion::{assemble_fermion_hamiltonian, jordan_wigner, FermionOperator, Ladder};
pub use hamiltonian::{PauliTerm, QubitHamiltonian};
pub use optimizer::{optimize, LocalExecutor, OptimizerConfig, VqeObjective};
pub use partition::PartitionedState;
pub use pauli::{pauli_multiply, PauliAxis, PauliString, Phase};
pub use statevector::{Engine, StateVector};
