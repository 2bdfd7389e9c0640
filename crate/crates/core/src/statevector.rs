//! Full state-vector simulator restricted to basis preparation, Pauli
//! rotations and exact expectation values.
//!
//! Basis indexing is little-endian: qubit `k` is bit `k` of the amplitude index.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::QubitHamiltonian;
use crate::pauli::{PauliString, Phase};

/// Tolerated imaginary part of `<ψ|P|ψ>` before it is discarded.
pub const EXPECTATION_IMAG_TOLERANCE: f64 = 1e-12;
/// Largest register the engines will allocate.
pub const MAX_ENGINE_QUBITS: usize = 34;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("basis index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: u64, n_qubits: usize },
    #[error("qubit count mismatch: state has {state}, operator has {operator}")]
    QubitMismatch { state: usize, operator: usize },
    #[error("{0} qubits exceeds the engine limit of {MAX_ENGINE_QUBITS}")]
    TooManyQubits(usize),
    #[error("partition layout mismatch: {0}")]
    Layout(String),
    #[error("exchange failed: {0}")]
    Exchange(String),
    #[error("dump format: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Operations the ansatz needs from a simulator backend. Implementations hold
/// exclusive ownership of their amplitudes; every call mutates in place.
pub trait Engine {
    fn n_qubits(&self) -> usize;
    fn reset_to_basis(&mut self, index: u64) -> Result<(), EngineError>;
    /// `ψ ← exp(-i θ/2 P) ψ`.
    fn apply_pauli_rotation(&mut self, p: &PauliString, theta: f64) -> Result<(), EngineError>;
    fn expectation_hamiltonian(&mut self, h: &QubitHamiltonian) -> Result<f64, EngineError>;
    fn norm_sqr(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// `i^{ny} (-1)^{popcount(b & z)}` as a phase.
#[inline]
pub(crate) fn basis_phase(y_count: u32, z: u64, b: u64) -> Complex64 {
    Phase::from_power(y_count + 2 * (b & z).count_ones()).to_complex()
}

/// `(-i)·phase` times `sin`, the coefficient of `Pψ` in the rotation.
#[inline]
pub(crate) fn rotated(cos: f64, sin: f64, own: Complex64, partner: Complex64, phase: Complex64) -> Complex64 {
    own * cos + Complex64::new(0.0, -sin) * phase * partner
}

impl StateVector {
    pub fn init_basis_state(n_qubits: usize, index: u64) -> Result<Self, EngineError> {
        if n_qubits > MAX_ENGINE_QUBITS {
            return Err(EngineError::TooManyQubits(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if index >= dim as u64 {
            return Err(EngineError::IndexOutOfRange { index, n_qubits });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, EngineError> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(EngineError::Dump(format!("length {len} is not a power of two")));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Bytes of amplitude storage: `2^(n+4)`.
    pub fn amplitude_bytes(&self) -> u64 {
        (self.amplitudes.len() * std::mem::size_of::<Complex64>()) as u64
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self, p: &PauliString) -> Result<(), EngineError> {
        if p.n_qubits() != self.n_qubits {
            return Err(EngineError::QubitMismatch { state: self.n_qubits, operator: p.n_qubits() });
        }
        Ok(())
    }

    pub fn apply_pauli_rotation(&mut self, p: &PauliString, theta: f64) -> Result<(), EngineError> {
        self.check(p)?;
        let (sin, cos) = (theta / 2.0).sin_cos();
        let (x, z, ny) = (p.x_mask(), p.z_mask(), p.y_count());
        if x == 0 {
            // diagonal: P|b> = (-1)^{popcount(b & z)} |b>
            let plus = Complex64::new(cos, -sin);
            let minus = Complex64::new(cos, sin);
            self.amplitudes.par_iter_mut().enumerate().for_each(|(b, a)| {
                *a *= if (b as u64 & z).count_ones().is_multiple_of(2) { plus } else { minus };
            });
            return Ok(());
        }
        // pair b (pivot bit clear) with b ^ x; (Pψ)[b] = phase(b ^ x) ψ[b ^ x]
        let pivot = 1u64 << (63 - x.leading_zeros());
        let amps = &mut self.amplitudes;
        for b in 0..amps.len() as u64 {
            if b & pivot != 0 {
                continue;
            }
            let c = b ^ x;
            let (ab, ac) = (amps[b as usize], amps[c as usize]);
            amps[b as usize] = rotated(cos, sin, ab, ac, basis_phase(ny, z, c));
            amps[c as usize] = rotated(cos, sin, ac, ab, basis_phase(ny, z, b));
        }
        Ok(())
    }

    /// `<ψ|P|ψ>`, real part only.
    pub fn expectation_pauli(&self, p: &PauliString) -> Result<f64, EngineError> {
        self.check(p)?;
        let value = pauli_expectation_partial(&self.amplitudes, &self.amplitudes, 0, p);
        debug_assert!(value.im.abs() < EXPECTATION_IMAG_TOLERANCE * 1e3);
        Ok(value.re)
    }

    /// `offset + Σ w_i <ψ|P_i|ψ>`; per-term values are summed in term order.
    pub fn expectation_hamiltonian(&self, h: &QubitHamiltonian) -> Result<f64, EngineError> {
        if h.n_qubits() != self.n_qubits {
            return Err(EngineError::QubitMismatch { state: self.n_qubits, operator: h.n_qubits() });
        }
        let per_term: Vec<f64> = h
            .terms()
            .par_iter()
            .map(|t| {
                t.weight * pauli_expectation_partial(&self.amplitudes, &self.amplitudes, 0, &t.string).re
            })
            .collect();
        Ok(h.identity_offset() + per_term.iter().sum::<f64>())
    }

    /// Writes an 8-byte little-endian qubit count followed by `2^n` complex
    /// doubles, each as little-endian `(re, im)`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<(), EngineError> {
        w.write_all(&(self.n_qubits as u64).to_le_bytes())?;
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self, EngineError> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        if n > MAX_ENGINE_QUBITS {
            return Err(EngineError::Dump(format!("qubit count {n} too large")));
        }
        let mut amplitudes = Vec::with_capacity(1 << n);
        for _ in 0..1usize << n {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            amplitudes.push(Complex64::new(re, f64::from_le_bytes(word)));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(EngineError::Dump("trailing bytes".into()));
        }
        Ok(Self { n_qubits: n, amplitudes })
    }
}

/// `Σ_b conj(ψ[b ^ x]) · phase(b) · ψ[b]` over the local indices of `own`, whose
/// global index is `base | l`; `partner` holds the amplitudes at `base' | l`
/// where `base' = base ^ (x & !local_mask)`. Sequential, so the sum order is fixed.
pub(crate) fn pauli_expectation_partial(
    own: &[Complex64],
    partner: &[Complex64],
    base: u64,
    p: &PauliString,
) -> Complex64 {
    let local_mask = own.len() as u64 - 1;
    let (x, z, ny) = (p.x_mask(), p.z_mask(), p.y_count());
    let xl = x & local_mask;
    let mut acc = Complex64::new(0.0, 0.0);
    for (l, a) in own.iter().enumerate() {
        let g = base | l as u64;
        let other = partner[(l as u64 ^ xl) as usize];
        acc += other.conj() * basis_phase(ny, z, g) * a;
    }
    acc
}

impl Engine for StateVector {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn reset_to_basis(&mut self, index: u64) -> Result<(), EngineError> {
        if index >= self.amplitudes.len() as u64 {
            return Err(EngineError::IndexOutOfRange { index, n_qubits: self.n_qubits });
        }
        self.amplitudes.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        self.amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        Ok(())
    }

    fn apply_pauli_rotation(&mut self, p: &PauliString, theta: f64) -> Result<(), EngineError> {
        StateVector::apply_pauli_rotation(self, p, theta)
    }

    fn expectation_hamiltonian(&mut self, h: &QubitHamiltonian) -> Result<f64, EngineError> {
        StateVector::expectation_hamiltonian(self, h)
    }

    fn norm_sqr(&self) -> f64 {
        StateVector::norm_sqr(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn basis_states() {
        let s = StateVector::init_basis_state(2, 3).unwrap();
        assert_eq!(s.amplitudes()[3], Complex64::new(1.0, 0.0));
        assert_eq!(s.amplitudes().iter().filter(|a| a.norm() == 0.0).count(), 3);
        let s = StateVector::init_basis_state(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = StateVector::init_basis_state(3, 5).unwrap();
        assert_eq!(s.amplitudes()[5].re, 1.0);
        assert!(matches!(
            StateVector::init_basis_state(2, 4),
            Err(EngineError::IndexOutOfRange { index: 4, n_qubits: 2 })
        ));
    }

    #[test]
    fn z_rotation_is_phase() {
        let mut s = StateVector::init_basis_state(1, 0).unwrap();
        let theta = 0.7;
        s.apply_pauli_rotation(&ps("Z"), theta).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::from_polar(1.0, -theta / 2.0)));
    }

    #[test]
    fn x_half_turn() {
        let mut s = StateVector::init_basis_state(1, 0).unwrap();
        s.apply_pauli_rotation(&ps("X"), PI).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::new(0.0, 0.0)));
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, -1.0)));
    }

    #[test]
    fn y_quarter_turn() {
        let mut s = StateVector::init_basis_state(1, 0).unwrap();
        s.apply_pauli_rotation(&ps("Y"), PI / 2.0).unwrap();
        assert!(close(s.amplitudes()[0], Complex64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.amplitudes()[1], Complex64::new(FRAC_1_SQRT_2, 0.0)));
        assert!((s.expectation_pauli(&ps("X")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_expectations() {
        let s = StateVector::init_basis_state(1, 0).unwrap();
        assert_eq!(s.expectation_pauli(&ps("Z")).unwrap(), 1.0);
        let s = StateVector::init_basis_state(2, 0).unwrap();
        assert_eq!(s.expectation_pauli(&ps("XX")).unwrap(), 0.0);
        assert!(matches!(s.expectation_pauli(&ps("X")), Err(EngineError::QubitMismatch { .. })));
    }

    #[test]
    fn hamiltonian_expectations() {
        let s = StateVector::init_basis_state(1, 0).unwrap();
        let h = QubitHamiltonian::new(1, 0.0, [(0.5, ps("Z"))]).unwrap();
        assert_eq!(s.expectation_hamiltonian(&h).unwrap(), 0.5);
        let h = QubitHamiltonian::offset_only(1, 2.0).unwrap();
        assert_eq!(s.expectation_hamiltonian(&h).unwrap(), 2.0);
    }

    #[test]
    fn memory_accounting() {
        let s = StateVector::init_basis_state(10, 0).unwrap();
        assert_eq!(s.amplitude_bytes(), 1 << 14);
    }

    #[test]
    fn dump_round_trip() {
        let mut s = StateVector::init_basis_state(3, 1).unwrap();
        s.apply_pauli_rotation(&ps("XYZ"), 0.3).unwrap();
        let mut buf = Vec::new();
        s.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 * 16);
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        assert_eq!(StateVector::read_dump(buf.as_slice()).unwrap(), s);
        buf.push(0);
        assert!(StateVector::read_dump(buf.as_slice()).is_err());
    }
}
