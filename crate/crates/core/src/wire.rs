//! Length-prefixed binary frames shared by the coordinator/worker protocol
//! and the partitioned engine's amplitude exchange.
//!
//! ```text
//! frame    := "QV" version:u8=0x01 type:u8 length:u32be payload[length]
//! request  := job_id:u64be kind:u8 count:u32be f64be[count]         (Ping, EvaluateEnergy, EvaluateBatchElement)
//! load     := job_id:u64be kind:u8 count:u32be utf8[count]          (LoadProblem)
//! result   := job_id:u64be kind:u8 status:u8 count:u32be f64be[count]
//! exchange := from_rank:u32be count:u32be (re:f64be im:f64be)[count]
//! shutdown := (empty)
//! ```
//!
//! `kind` repeats the message type of the request; a result carries the kind
//! of the request it answers.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

pub const MAGIC: [u8; 2] = *b"QV";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
/// Upper bound on payloads accepted from a stream.
pub const MAX_STREAM_PAYLOAD: u32 = 1 << 30;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("payload of {0} bytes is too large")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Ping = 0x01,
    LoadProblem = 0x02,
    EvaluateEnergy = 0x03,
    EvaluateBatchElement = 0x04,
    Shutdown = 0x05,
    Result = 0x06,
    Exchange = 0x07,
}

impl MessageType {
    pub fn from_byte(b: u8) -> Result<Self, WireError> {
        Ok(match b {
            0x01 => MessageType::Ping,
            0x02 => MessageType::LoadProblem,
            0x03 => MessageType::EvaluateEnergy,
            0x04 => MessageType::EvaluateBatchElement,
            0x05 => MessageType::Shutdown,
            0x06 => MessageType::Result,
            0x07 => MessageType::Exchange,
            other => return Err(WireError::UnknownType(other)),
        })
    }
}

/// Kinds of job a coordinator can send to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JobKind {
    Ping,
    LoadProblem,
    EvaluateEnergy,
    EvaluateBatchElement,
    Shutdown,
}

impl JobKind {
    pub fn message_type(self) -> MessageType {
        match self {
            JobKind::Ping => MessageType::Ping,
            JobKind::LoadProblem => MessageType::LoadProblem,
            JobKind::EvaluateEnergy => MessageType::EvaluateEnergy,
            JobKind::EvaluateBatchElement => MessageType::EvaluateBatchElement,
            JobKind::Shutdown => MessageType::Shutdown,
        }
    }

    fn from_byte(b: u8) -> Result<Self, WireError> {
        Ok(match MessageType::from_byte(b)? {
            MessageType::Ping => JobKind::Ping,
            MessageType::LoadProblem => JobKind::LoadProblem,
            MessageType::EvaluateEnergy => JobKind::EvaluateEnergy,
            MessageType::EvaluateBatchElement => JobKind::EvaluateBatchElement,
            MessageType::Shutdown => JobKind::Shutdown,
            other => return Err(WireError::Malformed(format!("{other:?} is not a job kind"))),
        })
    }
}

/// Result status codes.
pub mod status {
    pub const OK: u8 = 0;
    pub const NO_PROBLEM_LOADED: u8 = 1;
    pub const EVALUATION_FAILED: u8 = 2;
    pub const BAD_REQUEST: u8 = 3;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Ping { job_id: u64, values: Vec<f64> },
    LoadProblem { job_id: u64, problem: String },
    EvaluateEnergy { job_id: u64, theta: Vec<f64> },
    EvaluateBatchElement { job_id: u64, theta: Vec<f64> },
    Shutdown,
    Result { job_id: u64, kind: JobKind, status: u8, values: Vec<f64> },
    Exchange { from_rank: u32, amplitudes: Vec<Complex64> },
}

impl Message {
    pub fn message_type(&self) -> MessageType {
        match self {
            Message::Ping { .. } => MessageType::Ping,
            Message::LoadProblem { .. } => MessageType::LoadProblem,
            Message::EvaluateEnergy { .. } => MessageType::EvaluateEnergy,
            Message::EvaluateBatchElement { .. } => MessageType::EvaluateBatchElement,
            Message::Shutdown => MessageType::Shutdown,
            Message::Result { .. } => MessageType::Result,
            Message::Exchange { .. } => MessageType::Exchange,
        }
    }

    pub fn job_id(&self) -> Option<u64> {
        match self {
            Message::Ping { job_id, .. }
            | Message::LoadProblem { job_id, .. }
            | Message::EvaluateEnergy { job_id, .. }
            | Message::EvaluateBatchElement { job_id, .. }
            | Message::Result { job_id, .. } => Some(*job_id),
            Message::Shutdown | Message::Exchange { .. } => None,
        }
    }
}

fn put_request(out: &mut Vec<u8>, job_id: u64, kind: MessageType, values: &[f64]) {
    out.extend_from_slice(&job_id.to_be_bytes());
    out.push(kind as u8);
    out.extend_from_slice(&(values.len() as u32).to_be_bytes());
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
}

fn encode_payload(msg: &Message) -> Vec<u8> {
    let mut out = Vec::new();
    match msg {
        Message::Ping { job_id, values } => put_request(&mut out, *job_id, MessageType::Ping, values),
        Message::EvaluateEnergy { job_id, theta } => {
            put_request(&mut out, *job_id, MessageType::EvaluateEnergy, theta)
        }
        Message::EvaluateBatchElement { job_id, theta } => {
            put_request(&mut out, *job_id, MessageType::EvaluateBatchElement, theta)
        }
        Message::LoadProblem { job_id, problem } => {
            out.extend_from_slice(&job_id.to_be_bytes());
            out.push(MessageType::LoadProblem as u8);
            out.extend_from_slice(&(problem.len() as u32).to_be_bytes());
            out.extend_from_slice(problem.as_bytes());
        }
        Message::Shutdown => {}
        Message::Result { job_id, kind, status, values } => {
            out.extend_from_slice(&job_id.to_be_bytes());
            out.push(kind.message_type() as u8);
            out.push(*status);
            out.extend_from_slice(&(values.len() as u32).to_be_bytes());
            for v in values {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
        Message::Exchange { from_rank, amplitudes } => {
            out.reserve(8 + 16 * amplitudes.len());
            out.extend_from_slice(&from_rank.to_be_bytes());
            out.extend_from_slice(&(amplitudes.len() as u32).to_be_bytes());
            for a in amplitudes {
                out.extend_from_slice(&a.re.to_be_bytes());
                out.extend_from_slice(&a.im.to_be_bytes());
            }
        }
    }
    out
}

/// Serializes one message into a complete frame.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, WireError> {
    let payload = encode_payload(msg);
    if payload.len() > u32::MAX as usize {
        return Err(WireError::TooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.message_type() as u8);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            WireError::Malformed(format!("payload ends {} bytes early", self.pos + n - self.buf.len()))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: u32) -> Result<Vec<f64>, WireError> {
        let bytes = self.take(count as usize * 8)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_be_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::Malformed(format!("{} unused payload bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn decode_payload(ty: MessageType, payload: &[u8]) -> Result<Message, WireError> {
    let mut c = Cursor { buf: payload, pos: 0 };
    let msg = match ty {
        MessageType::Shutdown => Message::Shutdown,
        MessageType::Ping
        | MessageType::EvaluateEnergy
        | MessageType::EvaluateBatchElement
        | MessageType::LoadProblem => {
            let job_id = c.u64()?;
            let kind = c.u8()?;
            if kind != ty as u8 {
                return Err(WireError::Malformed(format!("kind {kind:#04x} does not match type {ty:?}")));
            }
            let count = c.u32()?;
            match ty {
                MessageType::LoadProblem => {
                    let bytes = c.take(count as usize)?;
                    let problem = String::from_utf8(bytes.to_vec())
                        .map_err(|e| WireError::Malformed(format!("problem text: {e}")))?;
                    Message::LoadProblem { job_id, problem }
                }
                MessageType::Ping => Message::Ping { job_id, values: c.f64s(count)? },
                MessageType::EvaluateEnergy => Message::EvaluateEnergy { job_id, theta: c.f64s(count)? },
                _ => Message::EvaluateBatchElement { job_id, theta: c.f64s(count)? },
            }
        }
        MessageType::Result => {
            let job_id = c.u64()?;
            let kind = JobKind::from_byte(c.u8()?)?;
            let status = c.u8()?;
            let count = c.u32()?;
            Message::Result { job_id, kind, status, values: c.f64s(count)? }
        }
        MessageType::Exchange => {
            let from_rank = c.u32()?;
            let count = c.u32()?;
            if (count as usize).checked_mul(16).is_none_or(|n| n > payload.len()) {
                return Err(WireError::Malformed(format!("{count} amplitudes exceed payload")));
            }
            let mut amplitudes = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let re = c.f64()?;
                amplitudes.push(Complex64::new(re, c.f64()?));
            }
            Message::Exchange { from_rank, amplitudes }
        }
    };
    c.finish()?;
    Ok(msg)
}

fn parse_header(header: &[u8]) -> Result<(MessageType, u32), WireError> {
    if header[..2] != MAGIC {
        return Err(WireError::BadMagic([header[0], header[1]]));
    }
    if header[2] != VERSION {
        return Err(WireError::BadVersion(header[2]));
    }
    let ty = MessageType::from_byte(header[3])?;
    let len = u32::from_be_bytes(header[4..8].try_into().unwrap());
    Ok((ty, len))
}

/// Decodes the frame at the start of `bytes`, returning it with the number of
/// bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Message, usize), WireError> {
    if bytes.len() < HEADER_LEN {
        // classify the bytes we do have before reporting truncation
        if bytes.len() >= 2 && bytes[..2] != MAGIC {
            return Err(WireError::BadMagic([bytes[0], bytes[1]]));
        }
        return Err(WireError::Truncated { needed: HEADER_LEN, available: bytes.len() });
    }
    let (ty, len) = parse_header(&bytes[..HEADER_LEN])?;
    let total = HEADER_LEN + len as usize;
    if bytes.len() < total {
        return Err(WireError::Truncated { needed: total, available: bytes.len() });
    }
    Ok((decode_payload(ty, &bytes[HEADER_LEN..total])?, total))
}

/// Decodes exactly one frame; leftover bytes are an error.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, WireError> {
    let (msg, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(WireError::TrailingBytes(bytes.len() - used));
    }
    Ok(msg)
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<(), WireError> {
    w.write_all(&encode_frame(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame from a stream. A clean end of stream before any header
/// byte yields `Ok(None)`.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(WireError::Truncated { needed: HEADER_LEN, available: got });
        }
        got += n;
    }
    let (ty, len) = parse_header(&header)?;
    if len > MAX_STREAM_PAYLOAD {
        return Err(WireError::TooLarge(len as usize));
    }
    let mut payload = vec![0u8; len as usize];
    let mut filled = 0;
    while filled < payload.len() {
        let n = r.read(&mut payload[filled..])?;
        if n == 0 {
            return Err(WireError::Truncated {
                needed: HEADER_LEN + payload.len(),
                available: HEADER_LEN + filled,
            });
        }
        filled += n;
    }
    decode_payload(ty, &payload).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shutdown_is_header_only() {
        let f = encode_frame(&Message::Shutdown).unwrap();
        assert_eq!(f, vec![b'Q', b'V', 0x01, 0x05, 0, 0, 0, 0]);
        assert_eq!(decode_frame(&f).unwrap(), Message::Shutdown);
    }

    #[test]
    fn evaluate_energy_layout() {
        let msg = Message::EvaluateEnergy { job_id: 7, theta: vec![0.1] };
        let f = encode_frame(&msg).unwrap();
        assert_eq!(f.len(), 8 + 8 + 1 + 4 + 8);
        assert_eq!(&f[4..8], &21u32.to_be_bytes());
        assert_eq!(&f[8..16], &7u64.to_be_bytes());
        assert_eq!(f[16], 0x03);
        assert_eq!(&f[17..21], &1u32.to_be_bytes());
        assert_eq!(&f[21..29], &0.1f64.to_be_bytes());
        assert_eq!(decode_frame(&f).unwrap(), msg);
    }

    #[test]
    fn classified_errors() {
        let mut f = encode_frame(&Message::Ping { job_id: 1, values: vec![] }).unwrap();
        let mut bad = f.clone();
        bad[0] = b'X';
        bad[1] = b'X';
        assert!(matches!(decode_frame(&bad), Err(WireError::BadMagic([b'X', b'X']))));
        let mut bad = f.clone();
        bad[2] = 2;
        assert!(matches!(decode_frame(&bad), Err(WireError::BadVersion(2))));
        let mut bad = f.clone();
        bad[3] = 0x7f;
        assert!(matches!(decode_frame(&bad), Err(WireError::UnknownType(0x7f))));
        assert!(matches!(decode_frame(&f[..f.len() - 1]), Err(WireError::Truncated { .. })));
        assert!(matches!(decode_frame(&f[..3]), Err(WireError::Truncated { .. })));
        f.push(0);
        assert!(matches!(decode_frame(&f), Err(WireError::TrailingBytes(1))));
    }

    #[test]
    fn kind_must_match_type() {
        let mut f = encode_frame(&Message::Ping { job_id: 1, values: vec![] }).unwrap();
        f[16] = 0x03;
        assert!(matches!(decode_frame(&f), Err(WireError::Malformed(_))));
    }

    #[test]
    fn stream_round_trip() {
        let msgs = vec![
            Message::LoadProblem { job_id: 3, problem: "qubits: 1\n".into() },
            Message::Result { job_id: 3, kind: JobKind::LoadProblem, status: status::OK, values: vec![] },
            Message::Exchange { from_rank: 2, amplitudes: vec![Complex64::new(0.5, -0.25)] },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut r = buf.as_slice();
        for m in &msgs {
            assert_eq!(&read_frame(&mut r).unwrap().unwrap(), m);
        }
        assert!(read_frame(&mut r).unwrap().is_none());
    }
}
