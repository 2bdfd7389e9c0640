//! State vector split across `W = 2^k` ranks.
//!
//! Rank `r` owns the global indices whose top `k` bits equal `r`, so gates on
//! the low `n - k` qubits never leave the rank. A gate or observable with an X
//! or Y factor on a high qubit pairs rank `r` with `r ^ (x >> (n - k))`; the two
//! ranks swap slices as [`Message::Exchange`] frames through a [`Transport`]
//! and then update their own halves. Every inter-rank byte is counted.

use std::collections::BTreeMap;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use num_complex::Complex64;
use thiserror::Error;

use crate::hamiltonian::QubitHamiltonian;
use crate::pauli::PauliString;
use crate::statevector::{
    basis_phase, pauli_expectation_partial, rotated, Engine, EngineError, StateVector, MAX_ENGINE_QUBITS,
};
use crate::wire::{decode_frame, encode_frame, Message};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("worker count {0} is not a power of two")]
    NotPowerOfTwo(u64),
    #[error("worker count {workers} exceeds 2^{n_qubits} amplitudes")]
    TooManyWorkers { workers: u64, n_qubits: usize },
}

/// Bytes per worker for `n_qubits` over `worker_count` ranks: `2^(n - log2 W + 4)`.
pub fn memory_per_worker(n_qubits: usize, worker_count: u64) -> Result<u64, PartitionError> {
    if worker_count == 0 || !worker_count.is_power_of_two() {
        return Err(PartitionError::NotPowerOfTwo(worker_count));
    }
    let k = worker_count.trailing_zeros() as usize;
    if k > n_qubits {
        return Err(PartitionError::TooManyWorkers { workers: worker_count, n_qubits });
    }
    Ok(1u64 << (n_qubits - k + 4))
}

/// Smallest power-of-two worker count whose per-worker share fits the budget.
pub fn min_workers(n_qubits: usize, per_worker_budget_bytes: u64) -> u64 {
    let mut w = 1u64;
    while let Ok(bytes) = memory_per_worker(n_qubits, w) {
        if bytes <= per_worker_budget_bytes {
            return w;
        }
        w <<= 1;
    }
    // budget below 16 bytes: one amplitude per worker is the floor
    1u64 << n_qubits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionLayout {
    n_qubits: usize,
    rank_bits: usize,
    rank: usize,
}

impl PartitionLayout {
    pub fn new(n_qubits: usize, worker_count: u64, rank: usize) -> Result<Self, PartitionError> {
        memory_per_worker(n_qubits, worker_count)?;
        assert!((rank as u64) < worker_count, "rank out of range");
        Ok(Self { n_qubits, rank_bits: worker_count.trailing_zeros() as usize, rank })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn worker_count(&self) -> usize {
        1 << self.rank_bits
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn local_qubits(&self) -> usize {
        self.n_qubits - self.rank_bits
    }

    pub fn local_len(&self) -> usize {
        1 << self.local_qubits()
    }

    /// Global index of local amplitude 0.
    pub fn base(&self) -> u64 {
        (self.rank as u64) << self.local_qubits()
    }

    /// Rank holding the partner amplitudes for an X mask, or `None` when the
    /// mask touches only local qubits.
    pub fn partner(&self, x_mask: u64) -> Option<usize> {
        let high = (x_mask >> self.local_qubits()) as usize;
        (high != 0).then_some(self.rank ^ high)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSlice {
    pub layout: PartitionLayout,
    pub amplitudes: Vec<Complex64>,
}

pub fn scatter(state: &StateVector, worker_count: u64) -> Result<Vec<LocalSlice>, PartitionError> {
    let n = state.n_qubits();
    let first = PartitionLayout::new(n, worker_count, 0)?;
    let len = first.local_len();
    Ok(state
        .amplitudes()
        .chunks(len)
        .enumerate()
        .map(|(rank, chunk)| LocalSlice {
            layout: PartitionLayout { rank, ..first },
            amplitudes: chunk.to_vec(),
        })
        .collect())
}

pub fn gather(slices: &[LocalSlice]) -> Result<StateVector, EngineError> {
    check_layouts(slices)?;
    let mut amps = Vec::with_capacity(slices.len() * slices[0].amplitudes.len());
    for s in slices {
        amps.extend_from_slice(&s.amplitudes);
    }
    StateVector::from_amplitudes(amps)
}

fn check_layouts(slices: &[LocalSlice]) -> Result<(), EngineError> {
    let Some(first) = slices.first() else {
        return Err(EngineError::Layout("no slices".into()));
    };
    let w = first.layout.worker_count();
    if slices.len() != w {
        return Err(EngineError::Layout(format!("{} slices for {w} workers", slices.len())));
    }
    for (r, s) in slices.iter().enumerate() {
        let l = s.layout;
        if l.rank != r || l.n_qubits != first.layout.n_qubits || l.rank_bits != first.layout.rank_bits {
            return Err(EngineError::Layout(format!("slice {r} has layout {l:?}")));
        }
        if s.amplitudes.len() != l.local_len() {
            return Err(EngineError::Layout(format!(
                "slice {r} holds {} amplitudes, expected {}",
                s.amplitudes.len(),
                l.local_len()
            )));
        }
    }
    Ok(())
}

/// Point-to-point byte transport between ranks. Frames from one sender to one
/// receiver arrive in order.
pub trait Transport: Send + Sync {
    fn send(&self, from: usize, to: usize, frame: Vec<u8>) -> Result<(), String>;
    fn recv(&self, to: usize, from: usize) -> Result<Vec<u8>, String>;
}

/// In-process transport: one channel per ordered rank pair.
pub struct ChannelTransport {
    senders: Vec<Vec<Sender<Vec<u8>>>>,
    receivers: Vec<Vec<Mutex<Receiver<Vec<u8>>>>>,
    timeout: Duration,
}

impl ChannelTransport {
    pub fn new(worker_count: usize) -> Self {
        let mut senders: Vec<Vec<Sender<Vec<u8>>>> = (0..worker_count).map(|_| Vec::new()).collect();
        let mut receivers: Vec<Vec<Mutex<Receiver<Vec<u8>>>>> =
            (0..worker_count).map(|_| Vec::new()).collect();
        // senders[from][to], receivers[to][from]
        for to_receivers in receivers.iter_mut() {
            for from_senders in senders.iter_mut() {
                let (tx, rx) = channel();
                from_senders.push(tx);
                to_receivers.push(Mutex::new(rx));
            }
        }
        Self { senders, receivers, timeout: Duration::from_secs(60) }
    }
}

impl Transport for ChannelTransport {
    fn send(&self, from: usize, to: usize, frame: Vec<u8>) -> Result<(), String> {
        self.senders[from][to].send(frame).map_err(|e| e.to_string())
    }

    fn recv(&self, to: usize, from: usize) -> Result<Vec<u8>, String> {
        let rx = self.receivers[to][from].lock().map_err(|e| e.to_string())?;
        rx.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => format!("rank {to} timed out waiting for rank {from}"),
            RecvTimeoutError::Disconnected => format!("rank {from} disconnected"),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommStats {
    pub bytes: u64,
    pub messages: u64,
}

/// Swaps this rank's slice with `partner`'s and returns the partner's copy.
fn exchange(
    transport: &dyn Transport,
    rank: usize,
    partner: usize,
    own: &[Complex64],
    stats: &mut CommStats,
) -> Result<Vec<Complex64>, EngineError> {
    let frame = encode_frame(&Message::Exchange { from_rank: rank as u32, amplitudes: own.to_vec() })
        .map_err(|e| EngineError::Exchange(e.to_string()))?;
    stats.bytes += frame.len() as u64;
    stats.messages += 1;
    transport.send(rank, partner, frame).map_err(EngineError::Exchange)?;
    let reply = transport.recv(rank, partner).map_err(EngineError::Exchange)?;
    match decode_frame(&reply).map_err(|e| EngineError::Exchange(e.to_string()))? {
        Message::Exchange { from_rank, amplitudes }
            if from_rank as usize == partner && amplitudes.len() == own.len() =>
        {
            Ok(amplitudes)
        }
        other => Err(EngineError::Exchange(format!(
            "unexpected message from rank {partner}: {:?}",
            other.message_type()
        ))),
    }
}

/// Rotation of one slice. `partner` is the remote slice when the X mask has
/// high bits, otherwise pairs are formed inside the slice.
fn rotate_slice(
    own: &mut [Complex64],
    partner: Option<&[Complex64]>,
    base: u64,
    p: &PauliString,
    theta: f64,
) {
    let (sin, cos) = (theta / 2.0).sin_cos();
    let (x, z, ny) = (p.x_mask(), p.z_mask(), p.y_count());
    let local_mask = own.len() as u64 - 1;
    let xl = x & local_mask;
    match partner {
        Some(remote) => {
            for (l, a) in own.iter_mut().enumerate() {
                let g = base | l as u64;
                *a = rotated(cos, sin, *a, remote[(l as u64 ^ xl) as usize], basis_phase(ny, z, g ^ x));
            }
        }
        None if xl == 0 => {
            let plus = Complex64::new(cos, -sin);
            let minus = Complex64::new(cos, sin);
            for (l, a) in own.iter_mut().enumerate() {
                let g = base | l as u64;
                *a *= if (g & z).count_ones().is_multiple_of(2) { plus } else { minus };
            }
        }
        None => {
            let pivot = 1u64 << (63 - xl.leading_zeros());
            for l in 0..own.len() as u64 {
                if l & pivot != 0 {
                    continue;
                }
                let m = l ^ xl;
                let (al, am) = (own[l as usize], own[m as usize]);
                own[l as usize] = rotated(cos, sin, al, am, basis_phase(ny, z, base | m));
                own[m as usize] = rotated(cos, sin, am, al, basis_phase(ny, z, base | l));
            }
        }
    }
}

/// A state vector emulated as `W` ranks, each a thread owning one slice during
/// every distributed call.
pub struct PartitionedState {
    slices: Vec<LocalSlice>,
    transport: Arc<dyn Transport>,
    default_transport: bool,
    stats: CommStats,
}

impl std::fmt::Debug for PartitionedState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartitionedState")
            .field("slices", &self.slices.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl PartitionedState {
    pub fn init_basis_state(n_qubits: usize, worker_count: u64, index: u64) -> Result<Self, EngineError> {
        if n_qubits > MAX_ENGINE_QUBITS {
            return Err(EngineError::TooManyQubits(n_qubits));
        }
        let first = PartitionLayout::new(n_qubits, worker_count, 0)
            .map_err(|e| EngineError::Layout(e.to_string()))?;
        let slices = (0..worker_count as usize)
            .map(|rank| LocalSlice {
                layout: PartitionLayout { rank, ..first },
                amplitudes: vec![Complex64::new(0.0, 0.0); first.local_len()],
            })
            .collect();
        let mut s = Self::from_slices(slices)?;
        s.reset_to_basis(index)?;
        Ok(s)
    }

    pub fn from_slices(slices: Vec<LocalSlice>) -> Result<Self, EngineError> {
        check_layouts(&slices)?;
        let w = slices.len();
        Ok(Self {
            slices,
            transport: Arc::new(ChannelTransport::new(w)),
            default_transport: true,
            stats: CommStats::default(),
        })
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self.default_transport = false;
        self
    }

    /// After a failed exchange the in-process channels may hold frames from
    /// ranks that did send; replace them so the next operation starts clean.
    fn recover_transport(&mut self) {
        if self.default_transport {
            self.transport = Arc::new(ChannelTransport::new(self.slices.len()));
        }
    }

    pub fn scatter(state: &StateVector, worker_count: u64) -> Result<Self, EngineError> {
        let slices = scatter(state, worker_count).map_err(|e| EngineError::Layout(e.to_string()))?;
        Self::from_slices(slices)
    }

    pub fn gather(&self) -> Result<StateVector, EngineError> {
        gather(&self.slices)
    }

    pub fn slices(&self) -> &[LocalSlice] {
        &self.slices
    }

    pub fn worker_count(&self) -> usize {
        self.slices.len()
    }

    pub fn comm_stats(&self) -> CommStats {
        self.stats
    }

    pub fn reset_comm_stats(&mut self) {
        self.stats = CommStats::default();
    }

    fn n(&self) -> usize {
        self.slices[0].layout.n_qubits
    }

    pub fn apply_pauli_rotation_distributed(
        &mut self,
        p: &PauliString,
        theta: f64,
    ) -> Result<(), EngineError> {
        if p.n_qubits() != self.n() {
            return Err(EngineError::QubitMismatch { state: self.n(), operator: p.n_qubits() });
        }
        if self.slices[0].layout.partner(p.x_mask()).is_none() {
            for s in &mut self.slices {
                rotate_slice(&mut s.amplitudes, None, s.layout.base(), p, theta);
            }
            return Ok(());
        }
        let transport = &*self.transport;
        let outcomes: Vec<Result<(Vec<Complex64>, CommStats), EngineError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .slices
                .iter()
                .map(|s| {
                    scope.spawn(move || {
                        let mut stats = CommStats::default();
                        let partner = s.layout.partner(p.x_mask()).expect("high X bits");
                        let remote = exchange(transport, s.layout.rank, partner, &s.amplitudes, &mut stats)?;
                        let mut next = s.amplitudes.clone();
                        rotate_slice(&mut next, Some(&remote), s.layout.base(), p, theta);
                        Ok((next, stats))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
        });
        // commit only when every rank succeeded; otherwise the old slices stand
        let mut updated = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let (next, stats) = o.inspect_err(|_| self.recover_transport())?;
            self.stats.bytes += stats.bytes;
            self.stats.messages += stats.messages;
            updated.push(next);
        }
        for (s, next) in self.slices.iter_mut().zip(updated) {
            s.amplitudes = next;
        }
        Ok(())
    }

    /// Per-rank partial sums reduced in rank order.
    pub fn expectation_distributed(&mut self, h: &QubitHamiltonian) -> Result<f64, EngineError> {
        if h.n_qubits() != self.n() {
            return Err(EngineError::QubitMismatch { state: self.n(), operator: h.n_qubits() });
        }
        let local_qubits = self.slices[0].layout.local_qubits();
        // group terms by their high X bits so each rank pair swaps once per group
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, t) in h.terms().iter().enumerate() {
            groups.entry(t.string.x_mask() >> local_qubits).or_default().push(i);
        }
        let transport = &*self.transport;
        let groups = &groups;
        let terms = h.terms();
        let outcomes: Vec<Result<(Vec<f64>, CommStats), EngineError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .slices
                .iter()
                .map(|s| {
                    scope.spawn(move || {
                        let mut stats = CommStats::default();
                        let mut partial = vec![0.0; terms.len()];
                        for (&high, idx) in groups {
                            let remote;
                            let partner_slice: &[Complex64] = if high == 0 {
                                &s.amplitudes
                            } else {
                                remote = exchange(
                                    transport,
                                    s.layout.rank,
                                    s.layout.rank ^ high as usize,
                                    &s.amplitudes,
                                    &mut stats,
                                )?;
                                &remote
                            };
                            for &i in idx {
                                partial[i] = pauli_expectation_partial(
                                    &s.amplitudes,
                                    partner_slice,
                                    s.layout.base(),
                                    &terms[i].string,
                                )
                                .re;
                            }
                        }
                        Ok((partial, stats))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
        });
        let mut partials = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let (p, stats) = o.inspect_err(|_| self.recover_transport())?;
            self.stats.bytes += stats.bytes;
            self.stats.messages += stats.messages;
            partials.push(p);
        }
        let mut energy = 0.0;
        for (i, t) in terms.iter().enumerate() {
            let value: f64 = partials.iter().map(|p| p[i]).sum();
            energy += t.weight * value;
        }
        Ok(h.identity_offset() + energy)
    }
}

impl Engine for PartitionedState {
    fn n_qubits(&self) -> usize {
        self.n()
    }

    fn reset_to_basis(&mut self, index: u64) -> Result<(), EngineError> {
        let n = self.n();
        if index >= 1u64 << n {
            return Err(EngineError::IndexOutOfRange { index, n_qubits: n });
        }
        for s in &mut self.slices {
            s.amplitudes.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            let base = s.layout.base();
            if index >= base && index < base + s.amplitudes.len() as u64 {
                s.amplitudes[(index - base) as usize] = Complex64::new(1.0, 0.0);
            }
        }
        Ok(())
    }

    fn apply_pauli_rotation(&mut self, p: &PauliString, theta: f64) -> Result<(), EngineError> {
        self.apply_pauli_rotation_distributed(p, theta)
    }

    fn expectation_hamiltonian(&mut self, h: &QubitHamiltonian) -> Result<f64, EngineError> {
        self.expectation_distributed(h)
    }

    fn norm_sqr(&self) -> f64 {
        self.slices.iter().flat_map(|s| s.amplitudes.iter()).map(|a| a.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn memory_formula() {
        assert_eq!(memory_per_worker(30, 1).unwrap(), 1 << 34);
        assert_eq!(memory_per_worker(36, 64).unwrap(), 1 << 34);
        assert_eq!(memory_per_worker(10, 2).unwrap(), 1 << 13);
        assert_eq!(memory_per_worker(10, 3), Err(PartitionError::NotPowerOfTwo(3)));
        assert!(memory_per_worker(2, 8).is_err());
    }

    #[test]
    fn minimum_workers() {
        let gib16 = 16u64 << 30;
        assert_eq!(min_workers(36, gib16), 64);
        assert_eq!(min_workers(32, gib16), 4);
        assert_eq!(min_workers(10, 1 << 20), 1);
    }

    #[test]
    fn scatter_layout() {
        let mut s = StateVector::init_basis_state(2, 0).unwrap();
        s.apply_pauli_rotation(&ps("YY"), 0.4).unwrap();
        let slices = scatter(&s, 2).unwrap();
        assert_eq!(slices[0].amplitudes, s.amplitudes()[0..2]);
        assert_eq!(slices[1].amplitudes, s.amplitudes()[2..4]);
        let one = scatter(&s, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].amplitudes, s.amplitudes());
        assert_eq!(gather(&slices).unwrap(), s);
    }

    #[test]
    fn gather_rejects_inconsistent() {
        let s = StateVector::init_basis_state(3, 0).unwrap();
        let mut slices = scatter(&s, 4).unwrap();
        slices.swap(0, 1);
        assert!(matches!(gather(&slices), Err(EngineError::Layout(_))));
        let slices = scatter(&s, 4).unwrap();
        assert!(gather(&slices[..3]).is_err());
    }

    #[test]
    fn low_qubit_gate_is_local() {
        let mut st = PartitionedState::init_basis_state(4, 4, 5).unwrap();
        st.apply_pauli_rotation_distributed(&ps("ZXII"), 0.3).unwrap();
        assert_eq!(st.comm_stats(), CommStats::default());
        st.apply_pauli_rotation_distributed(&ps("IIIX"), 0.3).unwrap();
        assert_eq!(st.comm_stats().messages, 4);
    }

    #[test]
    fn diagonal_expectation_is_local() {
        let mut st = PartitionedState::init_basis_state(4, 4, 6).unwrap();
        st.apply_pauli_rotation_distributed(&ps("XXXY"), 0.8).unwrap();
        st.reset_comm_stats();
        let h = QubitHamiltonian::new(4, 0.5, [(0.3, ps("ZIIZ")), (-0.2, ps("IZZI"))]).unwrap();
        let e = st.expectation_distributed(&h).unwrap();
        assert_eq!(st.comm_stats().bytes, 0);
        let reference = st.gather().unwrap().expectation_hamiltonian(&h).unwrap();
        assert!((e - reference).abs() < 1e-12);
        let offset = QubitHamiltonian::offset_only(4, -3.0).unwrap();
        assert_eq!(st.expectation_distributed(&offset).unwrap(), -3.0);
    }

    struct Broken;

    impl Transport for Broken {
        fn send(&self, _: usize, _: usize, _: Vec<u8>) -> Result<(), String> {
            Err("link down".into())
        }
        fn recv(&self, _: usize, _: usize) -> Result<Vec<u8>, String> {
            Err("link down".into())
        }
    }

    #[test]
    fn failed_exchange_leaves_state() {
        let mut st = PartitionedState::init_basis_state(3, 2, 1).unwrap();
        st.apply_pauli_rotation_distributed(&ps("XII"), 0.4).unwrap();
        let before = st.gather().unwrap();
        let mut st = st.with_transport(Arc::new(Broken));
        let err = st.apply_pauli_rotation_distributed(&ps("IIX"), 0.4).unwrap_err();
        assert!(matches!(err, EngineError::Exchange(_)));
        assert_eq!(st.gather().unwrap(), before);
    }
}
