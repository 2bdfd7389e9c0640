//! CI-seeded excitation ansatz.
//!
//! Each selected excitation `E` contributes the unitary `exp(θ (E - E†))`.
//! Under Jordan-Wigner `E - E† = i Σ_k c_k P_k` with mutually commuting
//! strings, so the gate is the exact product of Pauli rotations
//! `exp(-i (φ_k/2) P_k)` with `φ_k = -2 c_k θ`. Singles act first, then doubles.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ci::{hf_reference_index, CiError, CisdResult, Excitation};
use crate::fermion::{jordan_wigner_product, FermionError, Ladder};
use crate::hamiltonian::QubitHamiltonian;
use crate::pauli::PauliString;
use crate::statevector::{Engine, EngineError};

#[derive(Debug, Error)]
pub enum AnsatzError {
    #[error("spin orbital {index} outside {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("excitation {0:?} does not act on occupied→virtual orbitals of the reference")]
    NotAnExcitation(Excitation),
    #[error("excitation {0:?} changes total spin projection")]
    SpinFlip(Excitation),
    #[error("generator of {0:?} does not split into commuting rotations")]
    NonCommuting(Excitation),
    #[error("reference coefficient is zero")]
    DegenerateReference,
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    Ci(#[from] CiError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzConfig {
    /// Minimum `|c|` for an excitation to enter the ansatz.
    pub th2: f64,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self { th2: 1e-6 }
    }
}

/// One Pauli rotation of a gate; its angle is `coefficient * θ_gate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationTerm {
    pub string: PauliString,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationOp {
    pub excitation: Excitation,
    pub parameter_index: usize,
    pub rotations: Vec<RotationTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzCircuit {
    n_qubits: usize,
    n_electrons: usize,
    gates: Vec<ExcitationOp>,
    theta0: Vec<f64>,
}

fn sort_by_magnitude(items: &mut [(Excitation, f64)]) {
    items.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
}

/// Excitations with `|c| >= th2` and `c != 0`: singles first, then doubles,
/// each by descending `|c|` with index order breaking ties.
pub fn select_excitations(cisd: &CisdResult, cfg: &AnsatzConfig) -> Vec<Excitation> {
    let keep = |c: f64| c != 0.0 && c.abs() >= cfg.th2;
    let mut singles: Vec<(Excitation, f64)> =
        cisd.singles.iter().filter(|(_, &c)| keep(c)).map(|(e, &c)| (*e, c)).collect();
    let mut doubles: Vec<(Excitation, f64)> =
        cisd.doubles.iter().filter(|(_, &c)| keep(c)).map(|(e, &c)| (*e, c)).collect();
    sort_by_magnitude(&mut singles);
    sort_by_magnitude(&mut doubles);
    singles.into_iter().chain(doubles).map(|(e, _)| e).collect()
}

/// `θ0_i = atan(c_i / c_0)`.
pub fn initial_parameters(cisd: &CisdResult, selected: &[Excitation]) -> Result<Vec<f64>, AnsatzError> {
    if cisd.reference_coefficient == 0.0 {
        return Err(AnsatzError::DegenerateReference);
    }
    Ok(selected
        .iter()
        .map(|e| (cisd.coefficient(e).unwrap_or(0.0) / cisd.reference_coefficient).atan())
        .collect())
}

/// Pauli rotations realizing `exp(θ (E - E†))` for one excitation.
pub fn decompose_excitation(n_qubits: usize, e: &Excitation) -> Result<Vec<RotationTerm>, AnsatzError> {
    let ops = e.ladders();
    let adjoint: Vec<Ladder> = ops.iter().rev().map(|l| Ladder { mode: l.mode, dagger: !l.dagger }).collect();
    let mut generator = jordan_wigner_product(n_qubits, &ops)?;
    for (s, c) in jordan_wigner_product(n_qubits, &adjoint)? {
        *generator.entry(s).or_default() -= c;
    }
    let mut rotations: Vec<RotationTerm> = generator
        .into_iter()
        .filter(|(_, c)| c.norm() > 1e-14)
        .map(|(string, c)| {
            debug_assert!(c.re.abs() < 1e-14, "generator must be anti-Hermitian");
            RotationTerm { string, coefficient: -2.0 * c.im }
        })
        .collect();
    rotations.sort_by_key(|a| a.string);
    for (i, a) in rotations.iter().enumerate() {
        if rotations[i + 1..].iter().any(|b| !a.string.commutes_with(&b.string)) {
            return Err(AnsatzError::NonCommuting(*e));
        }
    }
    Ok(rotations)
}

impl AnsatzCircuit {
    /// Circuit over the `n_electrons`-electron reference with `θ0 = 0`.
    pub fn build(selected: &[Excitation], n_qubits: usize, n_electrons: usize) -> Result<Self, AnsatzError> {
        let reference = hf_reference_index(n_qubits, n_electrons)?;
        let mut ordered: Vec<Excitation> = selected.iter().filter(|e| e.is_single()).copied().collect();
        ordered.extend(selected.iter().filter(|e| !e.is_single()));
        let mut gates = Vec::with_capacity(ordered.len());
        for (i, e) in ordered.into_iter().enumerate() {
            let modes = e.modes();
            if let Some(&index) = modes.iter().find(|&&m| m >= n_qubits) {
                return Err(AnsatzError::IndexOutOfRange { index, n_qubits });
            }
            if let Excitation::Double { p, q, r, s } = e {
                if p <= q || r <= s {
                    return Err(AnsatzError::NotAnExcitation(e));
                }
            }
            let half = modes.len() / 2;
            let occupied = |m: usize| reference & (1u64 << m) != 0;
            if !modes[..half].iter().all(|&m| !occupied(m)) || !modes[half..].iter().all(|&m| occupied(m)) {
                return Err(AnsatzError::NotAnExcitation(e));
            }
            let alpha = |ms: &[usize]| ms.iter().filter(|&&m| m % 2 == 0).count();
            if alpha(&modes[..half]) != alpha(&modes[half..]) {
                return Err(AnsatzError::SpinFlip(e));
            }
            gates.push(ExcitationOp {
                excitation: e,
                parameter_index: i,
                rotations: decompose_excitation(n_qubits, &e)?,
            });
        }
        let theta0 = vec![0.0; gates.len()];
        Ok(Self { n_qubits, n_electrons, gates, theta0 })
    }

    /// Selects excitations from `cisd`, builds the circuit and seeds `θ0`.
    pub fn from_cisd(
        cisd: &CisdResult,
        cfg: &AnsatzConfig,
        n_qubits: usize,
        n_electrons: usize,
    ) -> Result<Self, AnsatzError> {
        let selected = select_excitations(cisd, cfg);
        let circuit = Self::build(&selected, n_qubits, n_electrons)?;
        let theta0 = initial_parameters(cisd, &circuit.excitations())?;
        circuit.with_initial_parameters(theta0)
    }

    pub fn with_initial_parameters(mut self, theta0: Vec<f64>) -> Result<Self, AnsatzError> {
        if theta0.len() != self.gates.len() {
            return Err(AnsatzError::ParameterCount { expected: self.gates.len(), got: theta0.len() });
        }
        self.theta0 = theta0;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn reference(&self) -> u64 {
        hf_reference_index(self.n_qubits, self.n_electrons).expect("validated at build")
    }

    pub fn gates(&self) -> &[ExcitationOp] {
        &self.gates
    }

    pub fn excitations(&self) -> Vec<Excitation> {
        self.gates.iter().map(|g| g.excitation).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.gates.len()
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn rotation_count(&self) -> usize {
        self.gates.iter().map(|g| g.rotations.len()).sum()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<(), AnsatzError> {
        if theta.len() != self.gates.len() {
            return Err(AnsatzError::ParameterCount { expected: self.gates.len(), got: theta.len() });
        }
        Ok(())
    }

    /// Resets `engine` to the reference determinant and applies `U(θ)`.
    pub fn prepare_state(&self, theta: &[f64], engine: &mut dyn Engine) -> Result<(), AnsatzError> {
        self.prepare_shifted(theta, None, engine)
    }

    /// As [`prepare_state`](Self::prepare_state), with one rotation's angle
    /// offset by `shift.2` (gate index, rotation index, offset).
    fn prepare_shifted(
        &self,
        theta: &[f64],
        shift: Option<(usize, usize, f64)>,
        engine: &mut dyn Engine,
    ) -> Result<(), AnsatzError> {
        self.check_theta(theta)?;
        if engine.n_qubits() != self.n_qubits {
            return Err(
                EngineError::QubitMismatch { state: engine.n_qubits(), operator: self.n_qubits }.into()
            );
        }
        engine.reset_to_basis(self.reference())?;
        for (g, gate) in self.gates.iter().enumerate() {
            let t = theta[gate.parameter_index];
            for (k, r) in gate.rotations.iter().enumerate() {
                let extra = match shift {
                    Some((sg, sk, d)) if sg == g && sk == k => d,
                    _ => 0.0,
                };
                engine.apply_pauli_rotation(&r.string, r.coefficient * t + extra)?;
            }
        }
        Ok(())
    }

    pub fn energy(
        &self,
        theta: &[f64],
        h: &QubitHamiltonian,
        engine: &mut dyn Engine,
    ) -> Result<f64, AnsatzError> {
        self.prepare_state(theta, engine)?;
        Ok(engine.expectation_hamiltonian(h)?)
    }

    /// Exact gradient by the parameter-shift rule on every rotation:
    /// `dE/dθ_g = Σ_k c_k (E(φ_k + π/2) - E(φ_k - π/2)) / 2`.
    pub fn parameter_shift_gradient(
        &self,
        theta: &[f64],
        h: &QubitHamiltonian,
        engine: &mut dyn Engine,
    ) -> Result<Vec<f64>, AnsatzError> {
        self.check_theta(theta)?;
        let shift = std::f64::consts::FRAC_PI_2;
        let mut grad = vec![0.0; theta.len()];
        for (g, gate) in self.gates.iter().enumerate() {
            for (k, r) in gate.rotations.iter().enumerate() {
                self.prepare_shifted(theta, Some((g, k, shift)), engine)?;
                let plus = engine.expectation_hamiltonian(h)?;
                self.prepare_shifted(theta, Some((g, k, -shift)), engine)?;
                let minus = engine.expectation_hamiltonian(h)?;
                grad[gate.parameter_index] += r.coefficient * (plus - minus) / 2.0;
            }
        }
        Ok(grad)
    }

    /// Header lines `qubits:` and `electrons:`, then one `S p q θ0` or
    /// `D p q r s θ0` line per gate in application order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qubits: {}", self.n_qubits);
        let _ = writeln!(out, "electrons: {}", self.n_electrons);
        for (gate, t) in self.gates.iter().zip(&self.theta0) {
            let _ = match gate.excitation {
                Excitation::Single { virt, occ } => writeln!(out, "S {virt} {occ} {t:?}"),
                Excitation::Double { p, q, r, s } => writeln!(out, "D {p} {q} {r} {s} {t:?}"),
            };
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AnsatzError> {
        let mut n_qubits = None;
        let mut n_electrons = None;
        let mut excitations = Vec::new();
        let mut theta0 = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| AnsatzError::Parse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("qubits:") {
                n_qubits = Some(v.trim().parse::<usize>().map_err(|e| err(e.to_string()))?);
                continue;
            }
            if let Some(v) = line.strip_prefix("electrons:") {
                n_electrons = Some(v.trim().parse::<usize>().map_err(|e| err(e.to_string()))?);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let idx = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad index {s:?}: {e}")));
            let (e, t) = match fields.as_slice() {
                ["S", p, q, t] => (Excitation::Single { virt: idx(p)?, occ: idx(q)? }, *t),
                ["D", p, q, r, s, t] => {
                    (Excitation::Double { p: idx(p)?, q: idx(q)?, r: idx(r)?, s: idx(s)? }, *t)
                }
                _ => return Err(err(format!("unrecognized gate line {line:?}"))),
            };
            excitations.push(e);
            theta0.push(t.parse::<f64>().map_err(|e| err(format!("bad angle {t:?}: {e}")))?);
        }
        let n = n_qubits.ok_or(AnsatzError::Parse { line: 0, message: "missing `qubits:`".into() })?;
        let ne = n_electrons.ok_or(AnsatzError::Parse { line: 0, message: "missing `electrons:`".into() })?;
        let circuit = Self::build(&excitations, n, ne)?;
        if circuit.excitations() != excitations {
            return Err(AnsatzError::Parse { line: 0, message: "doubles listed before singles".into() });
        }
        circuit.with_initial_parameters(theta0)
    }
}
