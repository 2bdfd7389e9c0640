//! Single-qubit Pauli axes, Pauli strings and their products.
//!
//! A [`PauliString`] is stored in symplectic form: bit `k` of `x` is set when
//! qubit `k` carries X or Y, bit `k` of `z` when it carries Z or Y. Strings are
//! limited to [`MAX_QUBITS`] qubits.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("length mismatch: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("{0} qubits exceeds the {MAX_QUBITS}-qubit limit")]
    TooManyQubits(usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid Pauli character {0:?}")]
    InvalidAxis(char),
}

/// One of the four single-qubit Pauli operators. The derived order
/// `I < X < Y < Z` is the tie-break order used when sorting terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl PauliAxis {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliAxis::I,
            (true, false) => PauliAxis::X,
            (true, true) => PauliAxis::Y,
            (false, true) => PauliAxis::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            PauliAxis::I => (false, false),
            PauliAxis::X => (true, false),
            PauliAxis::Y => (true, true),
            PauliAxis::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliAxis::I => 'I',
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self, PauliError> {
        match c {
            'I' => Ok(PauliAxis::I),
            'X' => Ok(PauliAxis::X),
            'Y' => Ok(PauliAxis::Y),
            'Z' => Ok(PauliAxis::Z),
            other => Err(PauliError::InvalidAxis(other)),
        }
    }

    /// Product of two single-qubit axes as `(phase, axis)`.
    pub fn multiply(self, rhs: PauliAxis) -> (Phase, PauliAxis) {
        use PauliAxis::*;
        match (self, rhs) {
            (I, p) | (p, I) => (Phase::ONE, p),
            (a, b) if a == b => (Phase::ONE, I),
            (X, Y) => (Phase::I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, X) => (Phase::I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }
}

/// A power of `i`: one of `{+1, +i, -1, -i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(power: u32) -> Self {
        Phase((power % 4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Tensor product of Pauli axes over `n_qubits` qubits; qubit `k` is the
/// `k`-th character of the text form.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self, PauliError> {
        if n_qubits > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n_qubits));
        }
        Ok(Self { n_qubits, x: 0, z: 0 })
    }

    pub fn from_axes(axes: &[PauliAxis]) -> Result<Self, PauliError> {
        let mut s = Self::identity(axes.len())?;
        for (k, &a) in axes.iter().enumerate() {
            s.set_unchecked(k, a);
        }
        Ok(s)
    }

    /// Builds a string from sparse `(qubit, axis)` pairs; later pairs on the same
    /// qubit overwrite earlier ones.
    pub fn from_sparse(n_qubits: usize, ops: &[(usize, PauliAxis)]) -> Result<Self, PauliError> {
        let mut s = Self::identity(n_qubits)?;
        for &(q, a) in ops {
            s.set(q, a)?;
        }
        Ok(s)
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self, PauliError> {
        if n_qubits > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n_qubits));
        }
        let valid = low_mask(n_qubits);
        if (x | z) & !valid != 0 {
            let top = 63 - ((x | z) & !valid).leading_zeros() as usize;
            return Err(PauliError::QubitOutOfRange { index: top, n_qubits });
        }
        Ok(Self { n_qubits, x, z })
    }

    pub fn set(&mut self, qubit: usize, axis: PauliAxis) -> Result<(), PauliError> {
        if qubit >= self.n_qubits {
            return Err(PauliError::QubitOutOfRange { index: qubit, n_qubits: self.n_qubits });
        }
        self.set_unchecked(qubit, axis);
        Ok(())
    }

    fn set_unchecked(&mut self, qubit: usize, axis: PauliAxis) {
        let bit = 1u64 << qubit;
        let (x, z) = axis.bits();
        self.x = if x { self.x | bit } else { self.x & !bit };
        self.z = if z { self.z | bit } else { self.z & !bit };
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Number of Y factors.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn axis(&self, qubit: usize) -> PauliAxis {
        let bit = 1u64 << qubit;
        PauliAxis::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn axes(&self) -> impl Iterator<Item = PauliAxis> + '_ {
        (0..self.n_qubits).map(move |k| self.axis(k))
    }

    /// `true` when the two strings commute.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        anti.is_multiple_of(2)
    }

    /// Action on a computational basis state: `P|b> = phase * |b ^ x_mask>`.
    pub fn apply_to_basis(&self, basis: u64) -> (Phase, u64) {
        let sign = (basis & self.z).count_ones() * 2;
        (Phase::from_power(self.y_count() + sign), basis ^ self.x)
    }
}

pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Componentwise product `a · b` with its accumulated phase.
pub fn pauli_multiply(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString), PauliError> {
    if a.n_qubits != b.n_qubits {
        return Err(PauliError::LengthMismatch(a.n_qubits, b.n_qubits));
    }
    // Per qubit, sigma(x1,z1) sigma(x2,z2) with sigma(x,z) = i^{xz} X^x Z^z picks up
    // i^{x1 z1 + x2 z2 - x3 z3} (-1)^{z1 x2} where (x3,z3) = (x1^x2, z1^z2).
    let x = a.x ^ b.x;
    let z = a.z ^ b.z;
    let power = (a.x & a.z).count_ones()
        + (b.x & b.z).count_ones()
        + 2 * (a.z & b.x).count_ones()
        + 3 * (x & z).count_ones();
    Ok((Phase::from_power(power), PauliString { n_qubits: a.n_qubits, x, z }))
}

impl Ord for PauliString {
    /// Lexicographic on the axis sequence, qubit 0 first.
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = (self.x ^ other.x) | (self.z ^ other.z);
        if diff == 0 {
            return self.n_qubits.cmp(&other.n_qubits);
        }
        let k = diff.trailing_zeros() as usize;
        if k >= self.n_qubits.min(other.n_qubits) {
            return self.n_qubits.cmp(&other.n_qubits);
        }
        self.axis(k).cmp(&other.axis(k))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.axes() {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axes = s.chars().map(PauliAxis::from_char).collect::<Result<Vec<_>, _>>()?;
        Self::from_axes(&axes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_table() {
        assert_eq!(pauli_multiply(&ps("X"), &ps("Y")).unwrap(), (Phase::I, ps("Z")));
        assert_eq!(pauli_multiply(&ps("Z"), &ps("X")).unwrap(), (Phase::I, ps("Y")));
        assert_eq!(pauli_multiply(&ps("Y"), &ps("X")).unwrap(), (Phase::MINUS_I, ps("Z")));
        assert_eq!(pauli_multiply(&ps("Y"), &ps("Y")).unwrap(), (Phase::ONE, ps("I")));
    }

    #[test]
    fn identity_is_neutral() {
        assert_eq!(pauli_multiply(&ps("II"), &ps("ZX")).unwrap(), (Phase::ONE, ps("ZX")));
    }

    #[test]
    fn table_matches_axis_multiply() {
        use PauliAxis::*;
        for a in [I, X, Y, Z] {
            for b in [I, X, Y, Z] {
                let (p, c) = a.multiply(b);
                let got = pauli_multiply(
                    &PauliString::from_axes(&[a]).unwrap(),
                    &PauliString::from_axes(&[b]).unwrap(),
                )
                .unwrap();
                assert_eq!(got, (p, PauliString::from_axes(&[c]).unwrap()), "{a:?}{b:?}");
            }
        }
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(pauli_multiply(&ps("X"), &ps("XX")), Err(PauliError::LengthMismatch(1, 2)));
    }

    #[test]
    fn text_round_trip_and_order() {
        assert_eq!(ps("ZIIX").to_string(), "ZIIX");
        assert_eq!(ps("ZIIX").axis(3), PauliAxis::X);
        assert!(ps("IZ") < ps("ZI"));
        assert!(ps("XI") < ps("XY"));
        assert!("ZQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn basis_action() {
        // Y|0> = i|1>, Y|1> = -i|0>
        assert_eq!(ps("Y").apply_to_basis(0), (Phase::I, 1));
        assert_eq!(ps("Y").apply_to_basis(1), (Phase::MINUS_I, 0));
        assert_eq!(ps("ZZ").apply_to_basis(0b01), (Phase::MINUS_ONE, 0b01));
    }

    #[test]
    fn commutation() {
        assert!(ps("XX").commutes_with(&ps("YY")));
        assert!(!ps("XI").commutes_with(&ps("ZI")));
    }
}
