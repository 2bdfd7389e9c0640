mod common;

use common::*;
use dvqe_core::ansatz::{decompose_excitation, select_excitations, AnsatzError};
use dvqe_core::ci::hf_reference_index;
use dvqe_core::{
    exact_diagonalize, AnsatzCircuit, AnsatzConfig, CiMode, Excitation, PauliString, QubitHamiltonian,
    Sector, StateVector,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `E - E†` in Fock space for a single or double excitation.
fn generator(n: usize, e: &Excitation) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::identity(1 << n, 1 << n);
    for l in e.ladders() {
        let c = fock_create(n, l.mode);
        m *= if l.dagger { c } else { c.transpose() };
    }
    &m - m.transpose()
}

/// Product of dense `exp(θ_i G_i)` applied to the reference, gates in order.
fn oracle_state(circuit: &AnsatzCircuit, theta: &[f64]) -> DVector<Complex64> {
    let n = circuit.n_qubits();
    let mut v = DVector::<f64>::zeros(1 << n);
    v[circuit.reference() as usize] = 1.0;
    for (gate, t) in circuit.gates().iter().zip(theta) {
        v = (generator(n, &gate.excitation) * *t).exp() * v;
    }
    v.map(|x| Complex64::new(x, 0.0))
}

fn number_hamiltonian(n: usize) -> QubitHamiltonian {
    let terms = (0..n).map(|k| {
        let mut s = PauliString::identity(n).unwrap();
        s.set(k, dvqe_core::PauliAxis::Z).unwrap();
        (-0.5, s)
    });
    QubitHamiltonian::new(n, 0.5 * n as f64, terms).unwrap()
}

fn fixture_circuit(name: &str) -> (QubitHamiltonian, AnsatzCircuit, dvqe_core::CisdResult) {
    let (table, h) = load(name);
    let ne = table.n_electrons();
    let (_, cisd) = exact_diagonalize(&h, Sector::Electrons(ne), CiMode::Cisd).unwrap();
    let circuit = AnsatzCircuit::from_cisd(&cisd, &AnsatzConfig::default(), h.n_qubits(), ne).unwrap();
    (h, circuit, cisd)
}

fn state_of(circuit: &AnsatzCircuit, theta: &[f64]) -> StateVector {
    let mut psi = StateVector::init_basis_state(circuit.n_qubits(), 0).unwrap();
    circuit.prepare_state(theta, &mut psi).unwrap();
    psi
}

#[test]
fn rotation_products_equal_generator_exponentials() {
    let cases = [
        (2, Excitation::Single { virt: 1, occ: 0 }),
        (4, Excitation::Single { virt: 2, occ: 0 }),
        (6, Excitation::Single { virt: 5, occ: 1 }),
        (4, Excitation::Double { p: 3, q: 2, r: 1, s: 0 }),
        (6, Excitation::Double { p: 5, q: 2, r: 3, s: 0 }),
        (8, Excitation::Double { p: 7, q: 4, r: 3, s: 0 }),
    ];
    for (n, e) in cases {
        let rotations = decompose_excitation(n, &e).unwrap();
        assert_eq!(rotations.len(), if e.is_single() { 2 } else { 8 });
        for theta in [0.37, -1.1, 2.5] {
            let mut u = DMatrix::<Complex64>::identity(1 << n, 1 << n);
            for r in &rotations {
                let angle = r.coefficient * theta;
                let p = dense_pauli(&r.string);
                let g = DMatrix::identity(1 << n, 1 << n) * Complex64::new((angle / 2.0).cos(), 0.0)
                    - p * Complex64::new(0.0, (angle / 2.0).sin());
                u = g * u;
            }
            let exact = to_complex(&(generator(n, &e) * theta).exp());
            assert!(max_abs_diff(&u, &exact) < 1e-12, "{e:?} θ={theta}");
        }
    }
}

#[test]
fn prepared_states_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for name in ["h2_sto3g.fcidump", "h3p_sto3g.fcidump", "h2_631g.fcidump"] {
        let (_, circuit, _) = fixture_circuit(name);
        for _ in 0..5 {
            let theta: Vec<f64> = (0..circuit.parameter_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let psi = state_of(&circuit, &theta);
            let oracle = oracle_state(&circuit, &theta);
            let dev =
                psi.amplitudes().iter().zip(oracle.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-12, "{name}: {dev}");
        }
    }
}

#[test]
fn zero_angles_and_empty_circuit_give_reference() {
    let (_, circuit, _) = fixture_circuit("h2_631g.fcidump");
    let psi = state_of(&circuit, &vec![0.0; circuit.parameter_count()]);
    assert_eq!(psi, StateVector::init_basis_state(8, hf_reference_index(8, 2).unwrap()).unwrap());
    let empty = AnsatzCircuit::build(&[], 4, 2).unwrap();
    assert_eq!(empty.rotation_count(), 0);
    assert_eq!(state_of(&empty, &[]), StateVector::init_basis_state(4, 3).unwrap());
    let mut psi = StateVector::init_basis_state(4, 0).unwrap();
    assert!(matches!(circuit.prepare_state(&[0.0], &mut psi), Err(AnsatzError::ParameterCount { .. })));
}

#[test]
fn unitarity_and_particle_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for name in ["h3p_sto3g.fcidump", "h2_631g.fcidump", "lih_sto3g.fcidump"] {
        let (h, circuit, _) = fixture_circuit(name);
        let number = number_hamiltonian(h.n_qubits());
        let electrons = circuit.n_electrons() as f64;
        for _ in 0..10 {
            let theta: Vec<f64> = (0..circuit.parameter_count()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let psi = state_of(&circuit, &theta);
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-10, "{name}");
            assert!((psi.expectation_hamiltonian(&number).unwrap() - electrons).abs() < 1e-10, "{name}");
        }
    }
}

#[test]
fn seeded_double_reproduces_cisd_amplitudes() {
    let (_, circuit, cisd) = fixture_circuit("h2_sto3g.fcidump");
    // singles vanish by symmetry, leaving the one double excitation
    assert_eq!(circuit.parameter_count(), 1);
    let psi = state_of(&circuit, circuit.theta0());
    for &(det, amplitude) in &cisd.amplitudes {
        let a = psi.amplitudes()[det as usize];
        assert!(a.im.abs() < 1e-14);
        assert!((a.re - amplitude).abs() < 1e-12, "determinant {det:04b}: {} vs {amplitude}", a.re);
    }
}

#[test]
fn selection_respects_threshold() {
    let (_, _, cisd) = fixture_circuit("lih_sto3g.fcidump");
    let all = select_excitations(&cisd, &AnsatzConfig { th2: 0.0 });
    let some = select_excitations(&cisd, &AnsatzConfig { th2: 1e-3 });
    assert!(some.len() < all.len());
    for e in &some {
        assert!(cisd.coefficient(e).unwrap().abs() >= 1e-3);
    }
    let first_double = some.iter().position(|e| !e.is_single()).unwrap_or(some.len());
    assert!(some[first_double..].iter().all(|e| !e.is_single()));
    let mags: Vec<f64> = some[first_double..].iter().map(|e| cisd.coefficient(e).unwrap().abs()).collect();
    assert!(mags.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn central_differences_agree_with_parameter_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for name in ["h2_sto3g.fcidump", "h3p_sto3g.fcidump", "h2_631g.fcidump"] {
        let (h, circuit, _) = fixture_circuit(name);
        let mut engine = StateVector::init_basis_state(h.n_qubits(), 0).unwrap();
        let theta: Vec<f64> = (0..circuit.parameter_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let analytic = circuit.parameter_shift_gradient(&theta, &h, &mut engine).unwrap();
        let step = 1e-4;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += step;
            let mut minus = theta.clone();
            minus[i] -= step;
            let fd = (circuit.energy(&plus, &h, &mut engine).unwrap()
                - circuit.energy(&minus, &h, &mut engine).unwrap())
                / (2.0 * step);
            assert!((fd - analytic[i]).abs() < 1e-6, "{name} parameter {i}: {fd} vs {}", analytic[i]);
        }
    }
}

#[test]
fn circuit_dump_round_trips() {
    let (_, circuit, _) = fixture_circuit("lih_sto3g.fcidump");
    let text = circuit.to_text();
    assert!(text.starts_with("qubits: 12\nelectrons: 4\n"));
    assert_eq!(text.lines().count(), 2 + circuit.parameter_count());
    assert_eq!(AnsatzCircuit::parse(&text).unwrap(), circuit);
}
