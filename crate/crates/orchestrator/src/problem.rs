//! The problem a worker caches: Hamiltonian, ansatz and partition count.

use dvqe_core::{AnsatzCircuit, QubitHamiltonian, VqeObjective};
use thiserror::Error;

const HAMILTONIAN_MARK: &str = "--- hamiltonian";
const ANSATZ_MARK: &str = "--- ansatz";

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("problem text: {0}")]
    Format(String),
    #[error("problem hamiltonian: {0}")]
    Hamiltonian(String),
    #[error("problem ansatz: {0}")]
    Ansatz(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub hamiltonian: QubitHamiltonian,
    pub circuit: AnsatzCircuit,
    /// Rank count of the partitioned engine each evaluation runs on.
    pub partitions: u64,
}

impl Problem {
    pub fn new(
        hamiltonian: QubitHamiltonian,
        circuit: AnsatzCircuit,
        partitions: u64,
    ) -> Result<Self, ProblemError> {
        if hamiltonian.n_qubits() != circuit.n_qubits() {
            return Err(ProblemError::Format(format!(
                "hamiltonian has {} qubits, ansatz {}",
                hamiltonian.n_qubits(),
                circuit.n_qubits()
            )));
        }
        if !partitions.is_power_of_two() {
            return Err(ProblemError::Format(format!("partitions must be a power of two, got {partitions}")));
        }
        Ok(Self { hamiltonian, circuit, partitions })
    }

    pub fn objective(&self) -> VqeObjective {
        VqeObjective::new(self.circuit.clone(), self.hamiltonian.clone()).with_partitions(self.partitions)
    }

    pub fn to_text(&self) -> String {
        format!(
            "partitions: {}\n{HAMILTONIAN_MARK}\n{}{ANSATZ_MARK}\n{}",
            self.partitions,
            self.hamiltonian.to_text(),
            self.circuit.to_text()
        )
    }

    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        let (head, rest) = text
            .split_once(HAMILTONIAN_MARK)
            .ok_or_else(|| ProblemError::Format(format!("missing `{HAMILTONIAN_MARK}`")))?;
        let (ham, ansatz) = rest
            .split_once(ANSATZ_MARK)
            .ok_or_else(|| ProblemError::Format(format!("missing `{ANSATZ_MARK}`")))?;
        let partitions =
            head.trim().strip_prefix("partitions:").and_then(|v| v.trim().parse::<u64>().ok()).ok_or_else(
                || ProblemError::Format(format!("expected `partitions: <p>`, got {:?}", head.trim())),
            )?;
        let hamiltonian =
            QubitHamiltonian::parse(ham).map_err(|e| ProblemError::Hamiltonian(e.to_string()))?;
        let circuit = AnsatzCircuit::parse(ansatz).map_err(|e| ProblemError::Ansatz(e.to_string()))?;
        Self::new(hamiltonian, circuit, partitions)
    }
}
