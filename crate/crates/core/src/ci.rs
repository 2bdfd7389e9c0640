//! Exact diagonalization in fixed-particle-number determinant spaces, and the
//! CI coefficients that seed the ansatz.
//!
//! CI coefficients are reported in excitation-operator convention: the ground
//! state is `c_0 |HF> + Σ c_E E|HF>` where `E` is the normal-ordered ladder
//! product of the excitation, so Jordan-Wigner parity signs are already folded
//! into `c_E`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::fermion::{apply_ladders, Ladder};
use crate::hamiltonian::QubitHamiltonian;

/// Largest qubit count accepted by [`exact_diagonalize`].
pub const MAX_EXACT_QUBITS: usize = 16;
/// Sectors up to this dimension use dense diagonalization; larger ones Lanczos.
const DENSE_LIMIT: usize = 1500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CiError {
    #[error("{0} qubits exceeds the exact-diagonalization limit of {MAX_EXACT_QUBITS}")]
    TooManyQubits(usize),
    #[error("{electrons} electrons exceed {qubits} spin orbitals")]
    TooManyElectrons { electrons: usize, qubits: usize },
    #[error("determinant sector is empty")]
    EmptySector,
    #[error("Hamiltonian has complex matrix elements in the occupation basis")]
    ComplexMatrix,
    #[error("CISD needs a fixed electron count")]
    CisdNeedsElectrons,
    #[error("Lanczos did not converge (residual {0:e})")]
    NotConverged(f64),
}

/// Spin-orbital excitation relative to the reference determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Excitation {
    /// `a†_virt a_occ`.
    Single { virt: usize, occ: usize },
    /// `a†_p a†_q a_r a_s` with `p > q` virtual and `r > s` occupied.
    Double { p: usize, q: usize, r: usize, s: usize },
}

impl Excitation {
    pub fn double(virt: (usize, usize), occ: (usize, usize)) -> Self {
        let (p, q) = if virt.0 > virt.1 { virt } else { (virt.1, virt.0) };
        let (r, s) = if occ.0 > occ.1 { occ } else { (occ.1, occ.0) };
        Excitation::Double { p, q, r, s }
    }

    pub fn ladders(&self) -> Vec<Ladder> {
        match *self {
            Excitation::Single { virt, occ } => vec![Ladder::create(virt), Ladder::annihilate(occ)],
            Excitation::Double { p, q, r, s } => {
                vec![Ladder::create(p), Ladder::create(q), Ladder::annihilate(r), Ladder::annihilate(s)]
            }
        }
    }

    pub fn modes(&self) -> Vec<usize> {
        match *self {
            Excitation::Single { virt, occ } => vec![virt, occ],
            Excitation::Double { p, q, r, s } => vec![p, q, r, s],
        }
    }

    pub fn is_single(&self) -> bool {
        matches!(self, Excitation::Single { .. })
    }

    /// Excitation taking `reference` to `det`, if it is at most a double.
    pub fn between(reference: u64, det: u64) -> Option<Self> {
        let holes = reference & !det;
        let particles = det & !reference;
        let bits = |m: u64| (0..64).filter(move |k| m & (1u64 << k) != 0).collect::<Vec<usize>>();
        match (bits(holes).as_slice(), bits(particles).as_slice()) {
            ([i], [a]) => Some(Excitation::Single { virt: *a, occ: *i }),
            ([i, j], [a, b]) => Some(Excitation::double((*a, *b), (*i, *j))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMode {
    Fci,
    Cisd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Electrons(usize),
    /// Whole Fock space; the reference is the dominant basis state.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CisdResult {
    pub energy: f64,
    /// Reference determinant as a basis index.
    pub reference: u64,
    pub reference_coefficient: f64,
    pub singles: BTreeMap<Excitation, f64>,
    pub doubles: BTreeMap<Excitation, f64>,
    /// Weight on determinants beyond doubles (zero in CISD mode).
    pub truncated_weight: f64,
    /// Ground-state amplitudes on the determinant basis.
    pub amplitudes: Vec<(u64, f64)>,
}

impl CisdResult {
    pub fn coefficient(&self, e: &Excitation) -> Option<f64> {
        if e.is_single() { self.singles.get(e) } else { self.doubles.get(e) }.copied()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.reference_coefficient.powi(2)
            + self.singles.values().map(|c| c * c).sum::<f64>()
            + self.doubles.values().map(|c| c * c).sum::<f64>()
            + self.truncated_weight
    }
}

/// Basis index with the `n_electrons` lowest spin orbitals occupied.
pub fn hf_reference_index(n_qubits: usize, n_electrons: usize) -> Result<u64, CiError> {
    if n_electrons > n_qubits || n_qubits > 64 {
        return Err(CiError::TooManyElectrons { electrons: n_electrons, qubits: n_qubits });
    }
    Ok(crate::pauli::low_mask(n_electrons))
}

fn fixed_weight_states(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let limit = 1u64 << n;
    let mut out = Vec::new();
    let mut v = (1u64 << k) - 1;
    while v < limit {
        out.push(v);
        // Gosper's hack: next integer with the same popcount
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

fn cisd_space(n: usize, reference: u64) -> Vec<u64> {
    let occ: Vec<usize> = (0..n).filter(|k| reference & (1 << k) != 0).collect();
    let virt: Vec<usize> = (0..n).filter(|k| reference & (1 << k) == 0).collect();
    let spin = |k: usize| k % 2;
    let mut dets = vec![reference];
    for &i in &occ {
        for &a in &virt {
            if spin(i) == spin(a) {
                dets.push(reference ^ (1 << i) ^ (1 << a));
            }
        }
    }
    for (x, &i) in occ.iter().enumerate() {
        for &j in &occ[x + 1..] {
            for (y, &a) in virt.iter().enumerate() {
                for &b in &virt[y + 1..] {
                    if spin(i) + spin(j) == spin(a) + spin(b) {
                        dets.push(reference ^ (1 << i) ^ (1 << j) ^ (1 << a) ^ (1 << b));
                    }
                }
            }
        }
    }
    dets.sort_unstable();
    dets
}

/// Real symmetric matrix restricted to `dets`, as triplets `(row, col, value)`.
fn sector_matrix(h: &QubitHamiltonian, dets: &[u64]) -> Result<Vec<(usize, usize, f64)>, CiError> {
    let index: HashMap<u64, usize> = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let mut entries: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for (col, &b) in dets.iter().enumerate() {
        entries.entry((col, col)).or_default().0 += h.identity_offset();
        for t in h.terms() {
            let (phase, out) = t.string.apply_to_basis(b);
            if let Some(&row) = index.get(&out) {
                let c = phase.to_complex() * t.weight;
                let e = entries.entry((row, col)).or_default();
                e.0 += c.re;
                e.1 += c.im;
            }
        }
    }
    let scale = entries.values().map(|e| e.0.abs()).fold(1.0, f64::max);
    let mut out = Vec::with_capacity(entries.len());
    for ((r, c), (re, im)) in entries {
        if im.abs() > 1e-12 * scale {
            return Err(CiError::ComplexMatrix);
        }
        if re != 0.0 {
            out.push((r, c, re));
        }
    }
    out.sort_by_key(|&(r, c, _)| (r, c));
    Ok(out)
}

fn lowest_eigenpair(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<(f64, Vec<f64>), CiError> {
    if dim <= DENSE_LIMIT {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for &(r, c, v) in triplets {
            m[(r, c)] = v;
        }
        let eig = SymmetricEigen::new(m);
        let (i, &e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(CiError::EmptySector)?;
        return Ok((e, eig.eigenvectors.column(i).iter().copied().collect()));
    }
    lanczos(dim, triplets)
}

fn matvec(dim: usize, triplets: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; dim];
    for &(r, c, v) in triplets {
        y[r] += v * x[c];
    }
    y
}

/// Lanczos with full reorthogonalization from a deterministic start vector.
fn lanczos(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<(f64, Vec<f64>), CiError> {
    let max_steps = dim.min(400);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut residual = f64::INFINITY;
    for step in 0..max_steps {
        let mut w = matvec(dim, triplets, &v);
        let a: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        basis.push(v.clone());
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = alpha.len();
        if (step + 1) % 10 == 0 || b < 1e-12 || step + 1 == max_steps {
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (k, &e) =
                eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
            let s = eig.eigenvectors.column(k);
            residual = (b * s[m - 1]).abs();
            if residual < 1e-11 || b < 1e-12 {
                let mut x = DVector::<f64>::zeros(dim);
                for (i, q) in basis.iter().enumerate() {
                    x += DVector::from_column_slice(q) * s[i];
                }
                x /= x.norm();
                return Ok((e, x.iter().copied().collect()));
            }
        }
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    Err(CiError::NotConverged(residual))
}

/// Lowest eigenpair of `h` restricted to the chosen sector and, in CISD mode,
/// to the reference plus its spin-conserving single and double excitations.
pub fn exact_diagonalize(
    h: &QubitHamiltonian,
    sector: Sector,
    mode: CiMode,
) -> Result<(f64, CisdResult), CiError> {
    let n = h.n_qubits();
    if n > MAX_EXACT_QUBITS {
        return Err(CiError::TooManyQubits(n));
    }
    let dets: Vec<u64> = match (sector, mode) {
        (Sector::Electrons(ne), CiMode::Fci) => {
            hf_reference_index(n, ne)?;
            fixed_weight_states(n, ne)
        }
        (Sector::Electrons(ne), CiMode::Cisd) => cisd_space(n, hf_reference_index(n, ne)?),
        (Sector::All, CiMode::Fci) => (0..1u64 << n).collect(),
        (Sector::All, CiMode::Cisd) => return Err(CiError::CisdNeedsElectrons),
    };
    if dets.is_empty() {
        return Err(CiError::EmptySector);
    }
    let triplets = sector_matrix(h, &dets)?;
    let (energy, vector) = lowest_eigenpair(dets.len(), &triplets)?;

    let reference = match sector {
        Sector::Electrons(ne) => hf_reference_index(n, ne)?,
        Sector::All => {
            let mut best = 0;
            for i in 1..vector.len() {
                if vector[i].abs() > vector[best].abs() + 1e-12 {
                    best = i;
                }
            }
            dets[best]
        }
    };
    let ref_pos = dets.iter().position(|&d| d == reference);
    let ref_amp = ref_pos.map(|i| vector[i]).unwrap_or(0.0);
    let phase = if ref_amp < 0.0 { -1.0 } else { 1.0 };

    let mut result = CisdResult {
        energy,
        reference,
        reference_coefficient: phase * ref_amp,
        singles: BTreeMap::new(),
        doubles: BTreeMap::new(),
        truncated_weight: 0.0,
        amplitudes: dets.iter().zip(&vector).map(|(&d, &c)| (d, phase * c)).collect(),
    };
    for (&det, &amp) in dets.iter().zip(&vector) {
        if det == reference {
            continue;
        }
        let amp = phase * amp;
        match Excitation::between(reference, det) {
            Some(e) => {
                let (sign, out) = apply_ladders(&e.ladders(), reference).expect("valid excitation");
                debug_assert_eq!(out, det);
                if e.is_single() {
                    result.singles.insert(e, sign * amp);
                } else {
                    result.doubles.insert(e, sign * amp);
                }
            }
            None => result.truncated_weight += amp * amp,
        }
    }
    Ok((energy, result))
}
