//! Second-quantized operators, assembly from integrals, and the Jordan-Wigner
//! map to qubit Hamiltonians.
//!
//! Spin orbitals are interleaved: spatial orbital `i` maps to spin orbital
//! `2i` (alpha) and `2i + 1` (beta), and spin orbital `k` maps to qubit `k`.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use thiserror::Error;

use crate::fcidump::IntegralTable;
use crate::hamiltonian::{HamiltonianError, QubitHamiltonian};
use crate::pauli::{pauli_multiply, PauliAxis, PauliError, PauliString, MAX_QUBITS};

/// Largest imaginary residue tolerated after the Jordan-Wigner expansion.
pub const IMAGINARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FermionError {
    #[error("imaginary coefficient {imag:e} on {string} (operator is not Hermitian)")]
    NonHermitian { string: String, imag: f64 },
    #[error("spin orbital {index} does not fit in {n_modes} modes")]
    ModeOutOfRange { index: usize, n_modes: usize },
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

/// A creation (`dagger = true`) or annihilation operator on one spin orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { mode, dagger: false }
    }
}

/// Sum of normal-ordered ladder products with real coefficients.
///
/// Each stored product lists all creations before all annihilations, with
/// mode indices strictly decreasing inside each group. The empty product is
/// the scalar part.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FermionOperator {
    n_modes: usize,
    terms: BTreeMap<Vec<Ladder>, f64>,
}

impl FermionOperator {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes, terms: BTreeMap::new() }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Adds `coefficient * ops[0] ops[1] ...`, normal-ordering it on the way in.
    pub fn add_product(&mut self, coefficient: f64, ops: &[Ladder]) -> Result<(), FermionError> {
        for op in ops {
            if op.mode >= self.n_modes {
                return Err(FermionError::ModeOutOfRange { index: op.mode, n_modes: self.n_modes });
            }
        }
        for (sign, product) in normal_order(ops.to_vec()) {
            *self.terms.entry(product).or_insert(0.0) += sign * coefficient;
        }
        Ok(())
    }

    pub fn add_scalar(&mut self, value: f64) {
        *self.terms.entry(Vec::new()).or_insert(0.0) += value;
    }

    pub fn scalar(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    /// Normal-ordered products with nonzero coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (&[Ladder], f64)> {
        self.terms.iter().filter(|(_, &c)| c != 0.0).map(|(k, &c)| (k.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }
}

/// Expands a ladder product into normal-ordered products with signs, using
/// `{a_i, a_j†} = δ_ij` and `{a_i, a_j} = {a_i†, a_j†} = 0`.
fn normal_order(ops: Vec<Ladder>) -> Vec<(f64, Vec<Ladder>)> {
    let mut out = Vec::new();
    let mut stack = vec![(1.0, ops)];
    'outer: while let Some((sign, mut ops)) = stack.pop() {
        // find the first adjacent pair out of order; swap it and requeue
        for j in 1..ops.len() {
            let (left, right) = (ops[j - 1], ops[j]);
            let in_order = match (left.dagger, right.dagger) {
                (true, false) => true,
                (false, true) => false,
                _ => left.mode > right.mode,
            };
            if in_order {
                continue;
            }
            if left.dagger == right.dagger && left.mode == right.mode {
                // a a = a† a† = 0 on the same mode
                continue 'outer;
            }
            if !left.dagger && right.dagger && left.mode == right.mode {
                // a_i a_i† = 1 - a_i† a_i
                let mut contracted = ops.clone();
                contracted.drain(j - 1..=j);
                stack.push((sign, contracted));
            }
            ops.swap(j - 1, j);
            stack.push((-sign, ops));
            continue 'outer;
        }
        out.push((sign, ops));
    }
    out
}

/// Second-quantized molecular Hamiltonian from chemist-notation integrals.
///
/// With spin orbitals `P = (p, σ)` the result is
/// `Σ h_pq a†_{pσ} a_{qσ} + ½ Σ (pq|rs) a†_{pσ} a†_{rτ} a_{sτ} a_{qσ} + core`.
/// In physicist order this is `½ Σ <PR|QS> a†_P a†_R a_S a_Q` with
/// `<PR|QS> = (pq|rs) δ_σ(P)σ(Q) δ_σ(R)σ(S)`.
pub fn assemble_fermion_hamiltonian(table: &IntegralTable) -> Result<FermionOperator, FermionError> {
    let norb = table.n_orbitals();
    let mut op = FermionOperator::new(2 * norb);
    op.add_scalar(table.core_energy());
    let so = |p: usize, spin: usize| 2 * p + spin;
    for p in 0..norb {
        for q in 0..norb {
            let h = table.one_body(p, q);
            if h == 0.0 {
                continue;
            }
            for spin in 0..2 {
                op.add_product(h, &[Ladder::create(so(p, spin)), Ladder::annihilate(so(q, spin))])?;
            }
        }
    }
    for p in 0..norb {
        for q in 0..norb {
            for r in 0..norb {
                for s in 0..norb {
                    let v = table.two_body(p, q, r, s);
                    if v == 0.0 {
                        continue;
                    }
                    for sigma in 0..2 {
                        for tau in 0..2 {
                            let (cp, cr) = (so(p, sigma), so(r, tau));
                            let (aq, as_) = (so(q, sigma), so(s, tau));
                            if cp == cr || aq == as_ {
                                continue;
                            }
                            op.add_product(
                                0.5 * v,
                                &[
                                    Ladder::create(cp),
                                    Ladder::create(cr),
                                    Ladder::annihilate(as_),
                                    Ladder::annihilate(aq),
                                ],
                            )?;
                        }
                    }
                }
            }
        }
    }
    Ok(op)
}

/// Jordan-Wigner images of `a_p†` and `a_p`: `(X_p ∓ iY_p)/2 · Z_0 … Z_{p-1}`.
fn ladder_image(n: usize, op: Ladder) -> Result<[(Complex64, PauliString); 2], PauliError> {
    let mut x = PauliString::identity(n)?;
    for k in 0..op.mode {
        x.set(k, PauliAxis::Z)?;
    }
    let mut y = x;
    x.set(op.mode, PauliAxis::X)?;
    y.set(op.mode, PauliAxis::Y)?;
    let yc = if op.dagger { -0.5 } else { 0.5 };
    Ok([(Complex64::new(0.5, 0.0), x), (Complex64::new(0.0, yc), y)])
}

/// Jordan-Wigner expansion of one ladder product into complex-weighted strings.
pub fn jordan_wigner_product(
    n_qubits: usize,
    ops: &[Ladder],
) -> Result<HashMap<PauliString, Complex64>, FermionError> {
    let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
    acc.insert(PauliString::identity(n_qubits)?, Complex64::new(1.0, 0.0));
    for &op in ops {
        if op.mode >= n_qubits {
            return Err(FermionError::ModeOutOfRange { index: op.mode, n_modes: n_qubits });
        }
        let image = ladder_image(n_qubits, op)?;
        let mut next: HashMap<PauliString, Complex64> = HashMap::with_capacity(acc.len() * 2);
        for (s, c) in &acc {
            for (ic, is) in &image {
                let (phase, prod) = pauli_multiply(s, is)?;
                *next.entry(prod).or_default() += c * ic * phase.to_complex();
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Maps a Hermitian fermionic operator to a qubit Hamiltonian on
/// `f.n_modes()` qubits.
pub fn jordan_wigner(f: &FermionOperator) -> Result<QubitHamiltonian, FermionError> {
    let n = f.n_modes();
    if n > MAX_QUBITS {
        return Err(PauliError::TooManyQubits(n).into());
    }
    let mut total: HashMap<PauliString, Complex64> = HashMap::new();
    for (ops, coefficient) in f.terms() {
        for (s, c) in jordan_wigner_product(n, ops)? {
            *total.entry(s).or_default() += coefficient * c;
        }
    }
    let mut entries: Vec<(PauliString, Complex64)> = total.into_iter().collect();
    entries.sort_by_key(|a| a.0);
    let mut terms = Vec::with_capacity(entries.len());
    for (s, c) in entries {
        if c.im.abs() > IMAGINARY_TOLERANCE {
            return Err(FermionError::NonHermitian { string: s.to_string(), imag: c.im });
        }
        // cancellation leftovers at rounding level are dropped with the imaginary parts
        if c.re.abs() > IMAGINARY_TOLERANCE {
            terms.push((c.re, s));
        }
    }
    Ok(QubitHamiltonian::new(n, 0.0, terms)?)
}

/// Applies `ops[0] ops[1] … ops[last]` (rightmost first) to an occupation-number
/// basis state under the Jordan-Wigner sign convention.
pub fn apply_ladders(ops: &[Ladder], basis: u64) -> Option<(f64, u64)> {
    let mut state = basis;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let bit = 1u64 << op.mode;
        let occupied = state & bit != 0;
        if occupied == op.dagger {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= bit;
    }
    Some((sign, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ham_terms(h: &QubitHamiltonian) -> Vec<(String, f64)> {
        let mut v: Vec<_> = h.terms().iter().map(|t| (t.string.to_string(), t.weight)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    #[test]
    fn number_operator() {
        let mut f = FermionOperator::new(1);
        f.add_product(1.0, &[Ladder::create(0), Ladder::annihilate(0)]).unwrap();
        let h = jordan_wigner(&f).unwrap();
        assert_eq!(h.identity_offset(), 0.5);
        assert_eq!(ham_terms(&h), vec![("Z".to_string(), -0.5)]);
    }

    #[test]
    fn hopping() {
        let mut f = FermionOperator::new(2);
        f.add_product(1.0, &[Ladder::create(1), Ladder::annihilate(0)]).unwrap();
        f.add_product(1.0, &[Ladder::create(0), Ladder::annihilate(1)]).unwrap();
        let h = jordan_wigner(&f).unwrap();
        assert_eq!(h.identity_offset(), 0.0);
        assert_eq!(ham_terms(&h), vec![("XX".to_string(), 0.5), ("YY".to_string(), 0.5)]);
    }

    #[test]
    fn zero_operator() {
        let h = jordan_wigner(&FermionOperator::new(3)).unwrap();
        assert!(h.is_empty());
        assert_eq!(h.identity_offset(), 0.0);
        assert_eq!(h.n_qubits(), 3);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut f = FermionOperator::new(2);
        f.add_product(1.0, &[Ladder::create(1), Ladder::annihilate(0)]).unwrap();
        assert!(matches!(jordan_wigner(&f), Err(FermionError::NonHermitian { .. })));
    }

    #[test]
    fn normal_ordering_rules() {
        let mut f = FermionOperator::new(2);
        // a_0 a_0† = 1 - a_0† a_0
        f.add_product(1.0, &[Ladder::annihilate(0), Ladder::create(0)]).unwrap();
        assert_eq!(f.scalar(), 1.0);
        let terms: Vec<_> = f.terms().map(|(k, c)| (k.to_vec(), c)).collect();
        assert!(terms.contains(&(vec![Ladder::create(0), Ladder::annihilate(0)], -1.0)));

        let mut g = FermionOperator::new(2);
        g.add_product(1.0, &[Ladder::create(0), Ladder::create(0)]).unwrap();
        assert!(g.is_zero());

        // a_0† a_1† = -a_1† a_0†
        let mut h = FermionOperator::new(2);
        h.add_product(1.0, &[Ladder::create(0), Ladder::create(1)]).unwrap();
        let terms: Vec<_> = h.terms().map(|(k, c)| (k.to_vec(), c)).collect();
        assert_eq!(terms, vec![(vec![Ladder::create(1), Ladder::create(0)], -1.0)]);
    }

    #[test]
    fn single_orbital_assembly() {
        let mut t = IntegralTable::new(1, 1, 0.25).unwrap();
        t.set_one_body(0, 0, -0.75);
        let f = assemble_fermion_hamiltonian(&t).unwrap();
        let terms: Vec<_> = f.terms().map(|(k, c)| (k.to_vec(), c)).collect();
        assert_eq!(
            terms,
            vec![
                (vec![], 0.25),
                (vec![Ladder::create(0), Ladder::annihilate(0)], -0.75),
                (vec![Ladder::create(1), Ladder::annihilate(1)], -0.75),
            ]
        );
    }

    #[test]
    fn zero_table_is_scalar() {
        let t = IntegralTable::new(2, 2, 1.5).unwrap();
        let f = assemble_fermion_hamiltonian(&t).unwrap();
        assert_eq!(f.terms().count(), 1);
        assert_eq!(f.scalar(), 1.5);
        let h = jordan_wigner(&f).unwrap();
        assert!(h.is_empty());
        assert_eq!(h.identity_offset(), 1.5);
    }

    #[test]
    fn ladder_signs() {
        // a_1† on |01> (mode 0 occupied) picks up one parity sign
        assert_eq!(apply_ladders(&[Ladder::create(1)], 0b01), Some((-1.0, 0b11)));
        assert_eq!(apply_ladders(&[Ladder::create(0)], 0b01), None);
        assert_eq!(apply_ladders(&[Ladder::create(1), Ladder::annihilate(0)], 0b01), Some((1.0, 0b10)));
    }
}
