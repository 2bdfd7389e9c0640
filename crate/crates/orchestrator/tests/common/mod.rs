#![allow(dead_code)]

use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;

use dvqe::run::{build_circuit, hamiltonian_from_fcidump};
use dvqe::Problem;
use dvqe_core::wire::{read_frame, write_frame, Message};

/// Energies from an independent pySCF run on the fixture integrals. For two
/// electrons CISD spans the whole sector, so CISD and FCI coincide.
pub mod reference {
    pub const H2_STO3G_FCI: f64 = -1.137270174660903;
    pub const H2_631G_FCI: f64 = -1.1516827321098901;
    pub const H2_631G_CISD: f64 = H2_631G_FCI;
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn problem(name: &str, partitions: u64) -> Problem {
    let (h, ne) = hamiltonian_from_fcidump(&fixture(name)).unwrap();
    let circuit = build_circuit(&h, ne, 1e-6).unwrap();
    Problem::new(h, circuit, partitions).unwrap()
}

/// Request/reply on an open connection.
pub fn call(stream: &mut TcpStream, msg: &Message) -> Message {
    write_frame(stream, msg).unwrap();
    read_frame(stream).unwrap().expect("reply")
}

/// A server that answers `LoadProblem` like a real worker and then drops the
/// connection on the first evaluation request.
pub fn crashing_worker() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let mut store = dvqe::ProblemStore::new();
        while let Ok(Some(msg)) = read_frame(&mut s) {
            if matches!(msg, Message::LoadProblem { .. }) {
                let reply = store.handle(msg).unwrap();
                write_frame(&mut s, &reply).unwrap();
            } else {
                return;
            }
        }
    });
    addr
}
