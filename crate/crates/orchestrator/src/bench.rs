//! Timing of one circuit execution per partition count, the input of the
//! planner's `t(p)` table.

use std::time::Instant;

use dvqe_core::planner::BenchTable;
use dvqe_core::{Engine, PartitionedState, PauliString, QubitHamiltonian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub n_qubits: usize,
    pub partitions: Vec<u64>,
    pub rotations: usize,
    pub terms: usize,
    pub repeats: usize,
    pub seed: u64,
}

fn random_string(rng: &mut ChaCha8Rng, n: usize) -> PauliString {
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    loop {
        let (x, z) = (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask);
        if x | z != 0 {
            return PauliString::from_masks(n, x, z).expect("masks fit");
        }
    }
}

/// Median wall time of `rotations` random Pauli rotations plus one
/// `terms`-term expectation value, for each partition count.
pub fn bench_mpi(spec: &BenchSpec) -> Result<BenchTable, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_qubits;
    let gates: Vec<(PauliString, f64)> =
        (0..spec.rotations).map(|_| (random_string(&mut rng, n), rng.gen_range(-1.0..1.0))).collect();
    let terms: Vec<(f64, PauliString)> =
        (0..spec.terms).map(|_| (rng.gen_range(-1.0..1.0), random_string(&mut rng, n))).collect();
    let h = QubitHamiltonian::new(n, 0.0, terms).map_err(|e| e.to_string())?;
    let mut table = BenchTable::new();
    for &p in &spec.partitions {
        let mut samples = Vec::with_capacity(spec.repeats.max(1));
        for _ in 0..spec.repeats.max(1) {
            let start = Instant::now();
            let mut state = PartitionedState::init_basis_state(n, p, 0).map_err(|e| e.to_string())?;
            for (g, theta) in &gates {
                state.apply_pauli_rotation(g, *theta).map_err(|e| e.to_string())?;
            }
            state.expectation_hamiltonian(&h).map_err(|e| e.to_string())?;
            samples.push(start.elapsed().as_secs_f64().max(1e-9));
        }
        samples.sort_by(f64::total_cmp);
        table.insert(p, samples[samples.len() / 2]).map_err(|e| e.to_string())?;
    }
    Ok(table)
}
