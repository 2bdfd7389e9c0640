mod common;

use common::{dense_hamiltonian, dense_pauli, max_abs_diff};
use dvqe_core::{pauli_multiply, PauliAxis, PauliString, QubitHamiltonian, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn axis() -> impl Strategy<Value = PauliAxis> {
    prop_oneof![Just(PauliAxis::I), Just(PauliAxis::X), Just(PauliAxis::Y), Just(PauliAxis::Z)]
}

fn string(n: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(axis(), n).prop_map(|a| PauliString::from_axes(&a).unwrap())
}

fn random_state(n: usize, values: &[f64]) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|i| Complex64::new(values[2 * i % values.len()], values[(2 * i + 1) % values.len()]))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn product_matrix(a: &PauliString, b: &PauliString) -> DMatrix<Complex64> {
    let (phase, p) = pauli_multiply(a, b).unwrap();
    dense_pauli(&p) * phase.to_complex()
}

#[test]
fn single_qubit_table() {
    let x: PauliString = "X".parse().unwrap();
    let y: PauliString = "Y".parse().unwrap();
    let z: PauliString = "Z".parse().unwrap();
    let (ph, p) = pauli_multiply(&x, &y).unwrap();
    assert_eq!((ph.to_complex(), p), (Complex64::new(0.0, 1.0), z));
    let (ph, p) = pauli_multiply(&z, &x).unwrap();
    assert_eq!((ph.to_complex(), p), (Complex64::new(0.0, 1.0), y));
    let ii: PauliString = "II".parse().unwrap();
    let zx: PauliString = "ZX".parse().unwrap();
    let (ph, p) = pauli_multiply(&ii, &zx).unwrap();
    assert_eq!((ph.to_complex(), p), (Complex64::new(1.0, 0.0), zx));
}

#[test]
fn sort_and_cut_examples() {
    let s = |t: &str| t.parse::<PauliString>().unwrap();
    let h = QubitHamiltonian::new(2, 0.0, [(0.1, s("XI")), (-0.5, s("YI")), (0.2, s("ZI"))])
        .unwrap()
        .sort_terms();
    assert_eq!(h.terms().iter().map(|t| t.weight).collect::<Vec<_>>(), vec![-0.5, 0.2, 0.1]);
    let tie = QubitHamiltonian::new(2, 0.0, [(0.3, s("ZI")), (-0.3, s("IZ"))]).unwrap().sort_terms();
    assert_eq!(tie.terms()[0].string, s("IZ"));
    assert!(QubitHamiltonian::new(2, 0.0, []).unwrap().sort_terms().is_empty());

    let h = QubitHamiltonian::new(2, 1.5, [(0.5, s("XI")), (0.2, s("YI")), (0.1, s("ZI"))]).unwrap();
    assert_eq!(h.cutoff_by_threshold(0.15).unwrap().len(), 2);
    assert_eq!(h.cutoff_by_threshold(0.0).unwrap(), h);
    let only = h.cutoff_by_threshold(1.0).unwrap();
    assert!(only.is_empty());
    assert_eq!(only.identity_offset(), 1.5);
    assert_eq!(only.n_qubits(), 2);
    assert_eq!(h.tail_weight(0.15), 0.1);
    assert_eq!(h.tail_weight(0.0), 0.0);
    let h = QubitHamiltonian::new(2, 0.0, [(0.5, s("XI")), (-0.2, s("YI")), (0.1, s("ZI"))]).unwrap();
    assert!((h.tail_weight(0.25) - 0.3).abs() < 1e-15);
}

#[test]
fn retain_fraction_rounds_half_up() {
    let strings: Vec<PauliString> = ["XII", "YII", "ZII", "IXI", "IYI", "IZI", "IIX", "IIY", "IIZ", "XXX"]
        .iter()
        .map(|t| t.parse().unwrap())
        .collect();
    let ten =
        QubitHamiltonian::new(3, 0.0, strings.iter().enumerate().map(|(i, s)| (1.0 + i as f64, *s))).unwrap();
    let kept = ten.retain_fraction(0.7).unwrap();
    assert_eq!(kept.len(), 7);
    assert_eq!(kept.terms().last().unwrap().weight, 4.0);
    assert_eq!(ten.retain_fraction(1.0).unwrap(), ten.sort_terms());
    let seven = QubitHamiltonian::new(3, 0.0, strings[..7].iter().map(|s| (1.0, *s))).unwrap();
    assert_eq!(seven.retain_fraction(0.5).unwrap().len(), 4);
}

#[test]
fn duplicates_merge_and_serialize_once() {
    let s = |t: &str| t.parse::<PauliString>().unwrap();
    let h = QubitHamiltonian::new(2, 0.0, [(0.25, s("XY")), (0.5, s("ZZ")), (0.5, s("XY")), (1.0, s("II"))])
        .unwrap();
    assert_eq!(h.len(), 2);
    assert_eq!(h.identity_offset(), 1.0);
    assert_eq!(h.terms()[0].weight, 0.75);
    let text = h.to_text();
    assert_eq!(text.matches("XY").count(), 1);
    assert_eq!(QubitHamiltonian::parse(&text).unwrap(), h);
}

proptest! {
    #[test]
    fn product_matches_matrix_product((a, b) in (1usize..=3).prop_flat_map(|n| (string(n), string(n)))) {
        let expected = dense_pauli(&a) * dense_pauli(&b);
        prop_assert!(max_abs_diff(&product_matrix(&a, &b), &expected) < 1e-15);
    }

    #[test]
    fn multiplication_is_associative_with_identity(a in string(3), b in string(3), c in string(3)) {
        let (p_ab, ab) = pauli_multiply(&a, &b).unwrap();
        let (p_ab_c, ab_c) = pauli_multiply(&ab, &c).unwrap();
        let (p_bc, bc) = pauli_multiply(&b, &c).unwrap();
        let (p_a_bc, a_bc) = pauli_multiply(&a, &bc).unwrap();
        prop_assert_eq!(ab_c, a_bc);
        prop_assert_eq!((p_ab * p_ab_c).to_complex(), (p_bc * p_a_bc).to_complex());
        let id = PauliString::identity(3).unwrap();
        let (ph, left) = pauli_multiply(&id, &a).unwrap();
        prop_assert_eq!((ph.to_complex(), left), (Complex64::new(1.0, 0.0), a));
        let (ph, right) = pauli_multiply(&a, &id).unwrap();
        prop_assert_eq!((ph.to_complex(), right), (Complex64::new(1.0, 0.0), a));
    }

    #[test]
    fn commutation_matches_matrices(a in string(3), b in string(3)) {
        let (ma, mb) = (dense_pauli(&a), dense_pauli(&b));
        let commutator = &ma * &mb - &mb * &ma;
        let commute = commutator.iter().all(|z| z.norm() < 1e-15);
        prop_assert_eq!(a.commutes_with(&b), commute);
    }

    #[test]
    fn text_round_trip(a in string(7)) {
        prop_assert_eq!(a.to_string().parse::<PauliString>().unwrap(), a);
    }

    #[test]
    fn cutoff_perturbation_bounded_by_tail_weight(
        weights in prop::collection::vec(-1.0f64..1.0, 12),
        strings in prop::collection::vec(string(4), 12),
        values in prop::collection::vec(-1.0f64..1.0, 32),
        th1 in 0.0f64..1.0,
    ) {
        let h = QubitHamiltonian::new(4, 0.3, weights.into_iter().zip(strings)).unwrap();
        let psi = random_state(4, &values);
        let full = psi.expectation_hamiltonian(&h).unwrap();
        let cut = psi.expectation_hamiltonian(&h.cutoff_by_threshold(th1).unwrap()).unwrap();
        prop_assert!((full - cut).abs() <= h.tail_weight(th1) + 1e-12);
    }

    #[test]
    fn sorted_input_is_fixed_by_trivial_cuts(
        weights in prop::collection::vec(-1.0f64..1.0, 0..12),
        strings in prop::collection::vec(string(3), 12),
    ) {
        let h = QubitHamiltonian::new(3, 0.0, weights.into_iter().zip(strings)).unwrap().sort_terms();
        prop_assert!(h.is_sorted());
        prop_assert_eq!(&h.cutoff_by_threshold(0.0).unwrap(), &h);
        prop_assert_eq!(&h.retain_fraction(1.0).unwrap(), &h);
    }

    #[test]
    fn dense_matrix_is_linear_in_terms(
        weights in prop::collection::vec(-1.0f64..1.0, 6),
        strings in prop::collection::vec(string(3), 6),
    ) {
        let h = QubitHamiltonian::new(3, -0.5, weights.iter().copied().zip(strings.iter().copied())).unwrap();
        let mut expected = DMatrix::<Complex64>::identity(8, 8) * Complex64::new(-0.5, 0.0);
        for (w, s) in weights.iter().zip(&strings) {
            expected += dense_pauli(s) * Complex64::new(*w, 0.0);
        }
        prop_assert!(max_abs_diff(&dense_hamiltonian(&h), &expected) < 1e-12);
    }
}
