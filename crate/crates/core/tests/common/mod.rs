#![allow(dead_code)]

use dvqe_core::{assemble_fermion_hamiltonian, jordan_wigner, IntegralTable, PauliString, QubitHamiltonian};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Reference energies from an independent pySCF run on the same integrals.
pub mod reference {
    pub const H2_STO3G_HF: f64 = -1.1166843870853405;
    pub const H2_STO3G_FCI: f64 = -1.137270174660903;
    pub const H3P_STO3G_HF: f64 = -1.2379450529996259;
    pub const H3P_STO3G_FCI: f64 = -1.2624903718901188;
    pub const H2_631G_HF: f64 = -1.1267339671165675;
    pub const H2_631G_FCI: f64 = -1.1516827321098901;
    pub const LIH_STO3G_HF: f64 = -7.8620269593941385;
    pub const LIH_STO3G_CISD: f64 = -7.882390094486359;
    pub const LIH_STO3G_FCI: f64 = -7.882403410335509;
}

pub fn fixture_text(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn load(name: &str) -> (IntegralTable, QubitHamiltonian) {
    let table = IntegralTable::parse_fcidump(&fixture_text(name)).unwrap();
    let h = jordan_wigner(&assemble_fermion_hamiltonian(&table).unwrap()).unwrap().sort_terms();
    (table, h)
}

fn single_qubit(axis: char) -> DMatrix<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let v = match axis {
        'I' => [c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)],
        'X' => [c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
        'Y' => [c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
        'Z' => [c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
        _ => unreachable!(),
    };
    DMatrix::from_row_slice(2, 2, &v)
}

/// Dense matrix with basis index bit `k` = qubit `k`, i.e. `P_{n-1} ⊗ … ⊗ P_0`.
pub fn dense_pauli(p: &PauliString) -> DMatrix<Complex64> {
    let axes: Vec<char> = p.to_string().chars().collect();
    let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &a in &axes {
        m = single_qubit(a).kronecker(&m);
    }
    m
}

pub fn dense_hamiltonian(h: &QubitHamiltonian) -> DMatrix<Complex64> {
    let dim = 1usize << h.n_qubits();
    let mut m = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(h.identity_offset(), 0.0);
    for t in h.terms() {
        m += dense_pauli(&t.string) * Complex64::new(t.weight, 0.0);
    }
    m
}

/// Creation operator `a_p†` on the `2^n` occupation-number basis, built from
/// its action `|…0_p…⟩ → (-1)^{#occupied below p} |…1_p…⟩`.
pub fn fock_create(n_modes: usize, p: usize) -> DMatrix<f64> {
    let dim = 1usize << n_modes;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        if col & (1 << p) == 0 {
            let below = (col & ((1 << p) - 1)).count_ones();
            m[(col | (1 << p), col)] = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
        }
    }
    m
}

/// Applies `ops` (rightmost first) to occupation state `state`; `None` if
/// the state is annihilated.
fn fock_apply(ops: &[(usize, bool)], mut state: usize) -> Option<(f64, usize)> {
    let mut sign = 1.0;
    for &(p, dagger) in ops.iter().rev() {
        let occupied = state & (1 << p) != 0;
        if occupied == dagger {
            return None;
        }
        if (state & ((1 << p) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= 1 << p;
    }
    Some((sign, state))
}

/// Ladder strings of the second-quantized Hamiltonian of `table`, excluding
/// the core energy: `h_pq a†_pσ a_qσ` and `½ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ`.
pub fn fock_terms(table: &IntegralTable) -> Vec<(f64, Vec<(usize, bool)>)> {
    let norb = table.n_orbitals();
    let mut terms = Vec::new();
    for p in 0..norb {
        for q in 0..norb {
            let v = table.one_body(p, q);
            for s in 0..2 {
                terms.push((v, vec![(2 * p + s, true), (2 * q + s, false)]));
            }
        }
    }
    for p in 0..norb {
        for q in 0..norb {
            for r in 0..norb {
                for s in 0..norb {
                    let v = 0.5 * table.two_body(p, q, r, s);
                    for a in 0..2 {
                        for b in 0..2 {
                            terms.push((
                                v,
                                vec![
                                    (2 * p + a, true),
                                    (2 * r + b, true),
                                    (2 * s + b, false),
                                    (2 * q + a, false),
                                ],
                            ));
                        }
                    }
                }
            }
        }
    }
    terms.retain(|(v, _)| *v != 0.0);
    terms
}

/// Column `col` of the Fock-space Hamiltonian as `(row, value)` pairs.
pub fn fock_column(
    table: &IntegralTable,
    terms: &[(f64, Vec<(usize, bool)>)],
    col: usize,
) -> Vec<(usize, f64)> {
    let mut out = vec![(col, table.core_energy())];
    for (v, ops) in terms {
        if let Some((sign, row)) = fock_apply(ops, col) {
            out.push((row, sign * v));
        }
    }
    out
}

/// Second-quantized Hamiltonian of `table` assembled directly in Fock space.
pub fn fock_hamiltonian(table: &IntegralTable) -> DMatrix<f64> {
    let dim = 1usize << table.n_spin_orbitals();
    let terms = fock_terms(table);
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        for (row, v) in fock_column(table, &terms, col) {
            h[(row, col)] += v;
        }
    }
    h
}

pub fn number_operator(n_modes: usize) -> DMatrix<f64> {
    let dim = 1usize << n_modes;
    DMatrix::from_fn(dim, dim, |i, j| if i == j { i.count_ones() as f64 } else { 0.0 })
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Lowest eigenvalue of the real symmetric matrix restricted to basis states
/// with `n_electrons` set bits.
pub fn sector_ground_energy(m: &DMatrix<f64>, n_electrons: u32) -> f64 {
    let idx: Vec<usize> = (0..m.nrows()).filter(|i| i.count_ones() == n_electrons).collect();
    let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
    block.symmetric_eigenvalues().min()
}

pub fn random_string<R: rand::Rng>(n: usize, rng: &mut R) -> PauliString {
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    PauliString::from_masks(n, rng.gen::<u64>() & mask, rng.gen::<u64>() & mask).unwrap()
}

pub fn random_state<R: rand::Rng>(n: usize, rng: &mut R) -> dvqe_core::StateVector {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    dvqe_core::StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

pub fn random_hamiltonian<R: rand::Rng>(n: usize, terms: usize, rng: &mut R) -> QubitHamiltonian {
    let list: Vec<(f64, PauliString)> =
        (0..terms).map(|_| (rng.gen_range(-1.0..1.0), random_string(n, rng))).collect();
    QubitHamiltonian::new(n, rng.gen_range(-1.0..1.0), list).unwrap()
}

pub fn to_dvector(psi: &dvqe_core::StateVector) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(psi.amplitudes())
}
