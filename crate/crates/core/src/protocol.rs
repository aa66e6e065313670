//! Database nodes and the query/answer exchange.
//!
//! A node holds one shard and answers a query matrix row by row: each
//! sparse row is dotted with the flat shard grid (columns address
//! `(m, segment)` pairs as `m * l_tilde + segment`). Nodes never see
//! the assignment, the atom structure, or each other.
//!
//! Two transports carry the exchange: an in-process one for tests and
//! bulk experiments, and real TCP nodes speaking length-prefixed
//! frames for the end-to-end path. Both produce identical answers.

use std::io::{Cursor, Read as IoRead, Write as IoWrite};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{is_prime, PrimeField};
use crate::lower::{QueryMatrix, MAX_WIRE_BYTES};
use crate::mds::{element_width, read_element, write_element, DatabaseShard};

/// Leading bytes of the answer wire encoding.
pub const ANSWER_MAGIC: [u8; 4] = *b"PFRA";

// ====================================================================
// Answers
// ====================================================================

/// One database's reply: a field element per query row, in row order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerString {
    pub q: u64,
    pub db_index: usize,
    pub elements: Vec<u64>,
}

impl AnswerString {
    /// Wire form: magic, `q`/`db`/`count` as LE `u32`, then the
    /// elements in minimal-width LE form.
    pub fn to_wire(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + self.elements.len() * element_width(self.q));
        out.write_all(&ANSWER_MAGIC)?;
        out.write_all(&(self.q as u32).to_le_bytes())?;
        out.write_all(&(self.db_index as u32).to_le_bytes())?;
        out.write_all(&(self.elements.len() as u32).to_le_bytes())?;
        for &v in &self.elements {
            write_element(&mut out, self.q, v)?;
        }
        Ok(out)
    }

    /// Strict decode of the wire form.
    pub fn from_wire(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != ANSWER_MAGIC {
            return Err(Error::Malformed { kind: "answer string", detail: "bad magic".into() });
        }
        let mut word = [0u8; 4];
        let mut next = || -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let q = next()? as u64;
        let db_index = next()? as usize;
        let count = next()? as usize;
        if !is_prime(q) {
            return Err(Error::Malformed { kind: "answer string", detail: format!("q={q} not prime") });
        }
        if bytes.len() != 16 + count * element_width(q) {
            return Err(Error::Malformed {
                kind: "answer string",
                detail: format!("expected {} elements, length mismatch", count),
            });
        }
        let mut elements = Vec::with_capacity(count);
        for _ in 0..count {
            let v = read_element(&mut r, q)?;
            if v >= q {
                return Err(Error::Malformed {
                    kind: "answer string",
                    detail: format!("element {v} out of range for F_{q}"),
                });
            }
            elements.push(v);
        }
        Ok(AnswerString { q, db_index, elements })
    }
}

/// What one honest node computes: the dot product of every query row
/// with its shard grid.
pub fn evaluate_answer(shard: &DatabaseShard, matrix: &QueryMatrix) -> Result<AnswerString> {
    if shard.q != matrix.q || shard.m_count != matrix.m_count || shard.l_tilde != matrix.l_tilde {
        return Err(Error::Dimension(format!(
            "query shaped ({}, {}, {}) against shard shaped ({}, {}, {})",
            matrix.q, matrix.m_count, matrix.l_tilde, shard.q, shard.m_count, shard.l_tilde
        )));
    }
    let field = PrimeField::new(matrix.q)?;
    let cols = matrix.cols();
    let mut elements = Vec::with_capacity(matrix.rows.len());
    for row in &matrix.rows {
        let mut acc = 0u64;
        for &(c, v) in row {
            let c = c as usize;
            if c >= cols {
                return Err(Error::Malformed {
                    kind: "query matrix",
                    detail: format!("column {c} beyond {cols}"),
                });
            }
            acc = field.add(acc, field.mul(v, shard.grid[c]));
        }
        elements.push(acc);
    }
    Ok(AnswerString { q: matrix.q, db_index: shard.db_index, elements })
}

// ====================================================================
// Transports
// ====================================================================

/// Carries one query to one database and returns its answer.
pub trait Transport {
    fn send_query(&mut self, db: usize, matrix: &QueryMatrix) -> Result<AnswerString>;
}

/// Direct evaluation against locally held shards.
pub struct InProcessTransport {
    shards: Vec<DatabaseShard>,
}

impl InProcessTransport {
    pub fn new(shards: Vec<DatabaseShard>) -> Self {
        InProcessTransport { shards }
    }
}

impl Transport for InProcessTransport {
    fn send_query(&mut self, db: usize, matrix: &QueryMatrix) -> Result<AnswerString> {
        let shard = self.shards.get(db).ok_or_else(|| {
            Error::Dimension(format!("no database {db} among {}", self.shards.len()))
        })?;
        evaluate_answer(shard, matrix)
    }
}

// ====================================================================
// Socket nodes
// ====================================================================

/// Frames are a 4-byte LE length followed by the payload; an empty
/// frame tells a node to exit.
fn write_frame(w: &mut impl IoWrite, payload: &[u8]) -> Result<()> {
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

fn read_frame(r: &mut impl IoRead) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let n = u32::from_le_bytes(len) as usize;
    if n > MAX_WIRE_BYTES + 1024 {
        return Err(Error::Malformed {
            kind: "frame",
            detail: format!("length {n} exceeds transport bound"),
        });
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn node_loop(listener: TcpListener, shard: DatabaseShard) {
    for stream in listener.incoming() {
        let Ok(mut stream) = stream else { continue };
        let Ok(payload) = read_frame(&mut stream) else { continue };
        if payload.is_empty() {
            return;
        }
        // A malformed or mis-shaped query gets no reply; the client
        // sees the connection close.
        let Ok(matrix) = QueryMatrix::from_wire(&payload) else { continue };
        let Ok(answer) = evaluate_answer(&shard, &matrix) else { continue };
        let Ok(bytes) = answer.to_wire() else { continue };
        let _ = write_frame(&mut stream, &bytes);
    }
}

/// A set of live TCP database nodes on loopback, one thread each.
pub struct SocketNodes {
    addrs: Vec<SocketAddr>,
    handles: Vec<JoinHandle<()>>,
}

impl SocketNodes {
    /// Binds one listener per shard on an ephemeral loopback port and
    /// starts serving.
    pub fn spawn(shards: Vec<DatabaseShard>) -> Result<Self> {
        let mut addrs = Vec::with_capacity(shards.len());
        let mut handles = Vec::with_capacity(shards.len());
        for shard in shards {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            addrs.push(listener.local_addr()?);
            handles.push(std::thread::spawn(move || node_loop(listener, shard)));
        }
        Ok(SocketNodes { addrs, handles })
    }

    pub fn addrs(&self) -> &[SocketAddr] {
        &self.addrs
    }

    /// A client-side transport reaching these nodes.
    pub fn transport(&self) -> SocketTransport {
        SocketTransport { addrs: self.addrs.clone() }
    }

    /// Sends every node an empty frame and joins its thread.
    pub fn shutdown(self) -> Result<()> {
        for addr in &self.addrs {
            let mut stream = TcpStream::connect(addr)?;
            write_frame(&mut stream, &[])?;
        }
        for handle in self.handles {
            handle
                .join()
                .map_err(|_| Error::Corrupt("database node thread panicked".into()))?;
        }
        Ok(())
    }
}

/// Query-per-connection TCP client for a set of node addresses.
pub struct SocketTransport {
    addrs: Vec<SocketAddr>,
}

impl SocketTransport {
    pub fn new(addrs: Vec<SocketAddr>) -> Self {
        SocketTransport { addrs }
    }
}

impl Transport for SocketTransport {
    fn send_query(&mut self, db: usize, matrix: &QueryMatrix) -> Result<AnswerString> {
        let addr = self.addrs.get(db).ok_or_else(|| {
            Error::Dimension(format!("no database {db} among {}", self.addrs.len()))
        })?;
        let mut stream = TcpStream::connect(addr)?;
        write_frame(&mut stream, &matrix.to_wire()?)?;
        let reply = read_frame(&mut stream)?;
        let answer = AnswerString::from_wire(&reply)?;
        if answer.db_index != db {
            return Err(Error::Corrupt(format!(
                "database {db} replied with index {}",
                answer.db_index
            )));
        }
        Ok(answer)
    }
}

// ====================================================================
// Tests
// ====================================================================
