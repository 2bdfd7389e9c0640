//! Qubit Hamiltonians as weighted sums of Pauli strings.
//!
//! The all-identity term is held apart as `identity_offset` and is never
//! counted, sorted or cut.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::pauli::{PauliError, PauliString};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("non-finite coefficient {0} on {1}")]
    NonFinite(f64, String),
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("ratio must lie in [0, 1], got {0}")]
    RatioOutOfRange(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTerm {
    pub weight: f64,
    pub string: PauliString,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitHamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    identity_offset: f64,
}

/// `floor(x + 1/2)` for nonnegative `x`, tolerant of the representation error
/// in decimal ratios such as `0.7`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

impl QubitHamiltonian {
    /// Builds a Hamiltonian, merging duplicate strings by coefficient addition
    /// (first-occurrence order is kept), folding identity strings into the
    /// offset and dropping terms whose merged weight is exactly zero.
    pub fn new<I>(n_qubits: usize, identity_offset: f64, terms: I) -> Result<Self, HamiltonianError>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        PauliString::identity(n_qubits)?;
        if !identity_offset.is_finite() {
            return Err(HamiltonianError::NonFinite(identity_offset, "offset".into()));
        }
        let mut offset = identity_offset;
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut merged: Vec<PauliTerm> = Vec::new();
        for (weight, string) in terms {
            if string.n_qubits() != n_qubits {
                return Err(PauliError::LengthMismatch(n_qubits, string.n_qubits()).into());
            }
            if !weight.is_finite() {
                return Err(HamiltonianError::NonFinite(weight, string.to_string()));
            }
            if string.is_identity() {
                offset += weight;
                continue;
            }
            match index.get(&string) {
                Some(&i) => merged[i].weight += weight,
                None => {
                    index.insert(string, merged.len());
                    merged.push(PauliTerm { weight, string });
                }
            }
        }
        merged.retain(|t| t.weight != 0.0);
        Ok(Self { n_qubits, terms: merged, identity_offset: offset })
    }

    pub fn offset_only(n_qubits: usize, offset: f64) -> Result<Self, HamiltonianError> {
        Self::new(n_qubits, offset, std::iter::empty())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn identity_offset(&self) -> f64 {
        self.identity_offset
    }

    /// Non-increasing `|weight|`, ties broken lexicographically on the axes.
    pub fn sort_terms(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then_with(|| a.string.cmp(&b.string)));
        Self { terms, ..self.clone() }
    }

    pub fn is_sorted(&self) -> bool {
        self.terms.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            a.weight.abs() > b.weight.abs() || (a.weight.abs() == b.weight.abs() && a.string <= b.string)
        })
    }

    /// Keeps exactly the terms with `|weight| > th1`.
    pub fn cutoff_by_threshold(&self, th1: f64) -> Result<Self, HamiltonianError> {
        if th1.is_nan() || th1 < 0.0 {
            return Err(HamiltonianError::NegativeThreshold(th1));
        }
        let terms = self.terms.iter().copied().filter(|t| t.weight.abs() > th1).collect();
        Ok(Self { terms, ..self.clone() })
    }

    /// Keeps the `round_half_up(N * ratio)` largest-magnitude terms, in sorted order.
    pub fn retain_fraction(&self, ratio: f64) -> Result<Self, HamiltonianError> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(HamiltonianError::RatioOutOfRange(ratio));
        }
        let mut sorted = self.sort_terms();
        let keep = round_half_up(self.terms.len() as f64 * ratio).min(self.terms.len());
        sorted.terms.truncate(keep);
        Ok(sorted)
    }

    /// `Σ|w|` over the terms `cutoff_by_threshold(th1)` would remove.
    pub fn tail_weight(&self, th1: f64) -> f64 {
        self.terms.iter().filter(|t| t.weight.abs() <= th1).map(|t| t.weight.abs()).sum()
    }

    /// Serializes to the line format read by [`QubitHamiltonian::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qubits: {}", self.n_qubits);
        let _ = writeln!(out, "offset: {:?}", self.identity_offset);
        for t in &self.terms {
            let _ = writeln!(out, "{:?} {}", t.weight, t.string);
        }
        out
    }

    /// Parses `qubits: <n>`, `offset: <value>` and `<coefficient> <axes>` lines.
    /// `#` starts a comment. Duplicate strings are merged.
    pub fn parse(text: &str) -> Result<Self, HamiltonianError> {
        let mut n_qubits: Option<usize> = None;
        let mut offset = 0.0;
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| HamiltonianError::Parse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("qubits:") {
                n_qubits = Some(rest.trim().parse().map_err(|e| err(format!("bad qubit count: {e}")))?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("offset:") {
                offset = rest.trim().parse().map_err(|e| err(format!("bad offset: {e}")))?;
                continue;
            }
            let n = n_qubits.ok_or_else(|| err("term before `qubits:` header".into()))?;
            let mut fields = line.split_whitespace();
            let (Some(c), Some(axes), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err(format!("expected `<coefficient> <axes>`, got {line:?}")));
            };
            let weight: f64 = c.parse().map_err(|e| err(format!("bad coefficient {c:?}: {e}")))?;
            let string: PauliString = axes.parse().map_err(|e: PauliError| err(e.to_string()))?;
            if string.n_qubits() != n {
                return Err(err(format!("string {axes} has {} qubits, expected {n}", string.n_qubits())));
            }
            terms.push((weight, string));
        }
        let n = n_qubits
            .ok_or(HamiltonianError::Parse { line: 0, message: "missing `qubits:` header".into() })?;
        Self::new(n, offset, terms)
    }
}
