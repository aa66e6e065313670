//! Lowering query structures onto coded-storage coordinates.
//!
//! The user's private assignment `(pi, sigma)` turns each downloaded
//! atom into one sparse row over the shard grid: the term
//! `sign * u_c(t)` contributes `sign * sigma_t * v_c(m)` at column
//! `(m, pi(t))`. Databases receive only these rows — canonically
//! sorted, so row placement reveals nothing about generation order —
//! and answer each row with a single field element.
//!
//! The wire encoding is dense row-major (header plus `rows * m * l~`
//! little-endian elements of minimal width); it exists for the socket
//! transport and stays practical only for small configurations, so the
//! encoder refuses matrices beyond a hard byte bound.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Cursor, Read, Write};

use serde::{Deserialize, Serialize};

use crate::combos::{enumerate_combinations, CombinationVector, IndexAssignment};
use crate::error::{Error, Result};
use crate::field::{is_prime, PrimeField};
use crate::mds::{element_width, read_element, write_element};
use crate::params::SchemeParams;
use crate::query::{Atom, QuerySet};

/// Leading bytes of the dense wire encoding.
pub const QUERY_MAGIC: [u8; 4] = *b"PFRQ";

/// Hard bound on the dense wire size (64 MiB); larger matrices must
/// travel in process.
pub const MAX_WIRE_BYTES: usize = 1 << 26;

// ====================================================================
// Query matrix
// ====================================================================

/// The query one database sees: sparse rows over columns
/// `m * l_tilde + segment`, each answered by one field element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryMatrix {
    pub q: u64,
    pub m_count: usize,
    pub l_tilde: usize,
    /// Sorted `(column, coefficient)` pairs per row; coefficients are
    /// nonzero and reduced mod `q`.
    pub rows: Vec<Vec<(u32, u64)>>,
}

impl QueryMatrix {
    /// Total columns of the dense view.
    pub fn cols(&self) -> usize {
        self.m_count * self.l_tilde
    }

    /// Dense row-major encoding: magic, `q`/`m`/`l~`/`rows` as LE
    /// `u32`, then every coefficient in minimal-width LE form.
    pub fn to_wire(&self) -> Result<Vec<u8>> {
        let cols = self.cols();
        let payload = self
            .rows
            .len()
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(element_width(self.q)))
            .filter(|&b| b <= MAX_WIRE_BYTES)
            .ok_or_else(|| Error::Malformed {
                kind: "query matrix",
                detail: format!(
                    "dense encoding of {} rows x {} columns exceeds {} bytes",
                    self.rows.len(),
                    cols,
                    MAX_WIRE_BYTES
                ),
            })?;
        let mut out = Vec::with_capacity(20 + payload);
        out.write_all(&QUERY_MAGIC)?;
        out.write_all(&(self.q as u32).to_le_bytes())?;
        out.write_all(&(self.m_count as u32).to_le_bytes())?;
        out.write_all(&(self.l_tilde as u32).to_le_bytes())?;
        out.write_all(&(self.rows.len() as u32).to_le_bytes())?;
        let mut dense = vec![0u64; cols];
        for row in &self.rows {
            dense.fill(0);
            for &(c, v) in row {
                dense[c as usize] = v;
            }
            for &v in &dense {
                write_element(&mut out, self.q, v)?;
            }
        }
        Ok(out)
    }

    /// Strict decode of the dense wire form back to sparse rows.
    pub fn from_wire(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != QUERY_MAGIC {
            return Err(Error::Malformed { kind: "query matrix", detail: "bad magic".into() });
        }
        let mut word = [0u8; 4];
        let mut next = || -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let q = next()? as u64;
        let m_count = next()? as usize;
        let l_tilde = next()? as usize;
        let nrows = next()? as usize;
        if !is_prime(q) {
            return Err(Error::Malformed { kind: "query matrix", detail: format!("q={q} not prime") });
        }
        let cols = m_count
            .checked_mul(l_tilde)
            .filter(|&c| c > 0 && c <= u32::MAX as usize)
            .ok_or_else(|| Error::Malformed {
                kind: "query matrix",
                detail: "column space empty or out of range".into(),
            })?;
        let expect = 20 + nrows * cols * element_width(q);
        if bytes.len() != expect {
            return Err(Error::Malformed {
                kind: "query matrix",
                detail: format!("expected {expect} bytes, got {}", bytes.len()),
            });
        }
        let mut rows = Vec::with_capacity(nrows);
        for _ in 0..nrows {
            let mut row = Vec::new();
            for c in 0..cols {
                let v = read_element(&mut r, q)?;
                if v >= q {
                    return Err(Error::Malformed {
                        kind: "query matrix",
                        detail: format!("coefficient {v} out of range for F_{q}"),
                    });
                }
                if v != 0 {
                    row.push((c as u32, v));
                }
            }
            rows.push(row);
        }
        Ok(QueryMatrix { q, m_count, l_tilde, rows })
    }
}

// ====================================================================
// Lowering
// ====================================================================

/// Lowers one atom to its sparse row under the given assignment.
/// Deterministic: the decoder recomputes rows with this same function
/// to locate its answers.
pub fn atom_row(
    field: &PrimeField,
    combos: &[CombinationVector],
    params: &SchemeParams,
    assignment: &IndexAssignment,
    atom: &Atom,
) -> Vec<(u32, u64)> {
    let mut acc: BTreeMap<u32, u64> = BTreeMap::new();
    for term in &atom.terms {
        let seg = assignment.pi[term.slot] as usize;
        let scale = field.unit(term.sign * assignment.sigma[term.slot]);
        for (m, &c) in combos[term.combo].coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let col = (m * params.l_tilde + seg) as u32;
            let v = field.add(*acc.get(&col).unwrap_or(&0), field.mul(scale, c));
            if v == 0 {
                acc.remove(&col);
            } else {
                acc.insert(col, v);
            }
        }
    }
    acc.into_iter().collect()
}

/// Lowers the full query set to one matrix per database. Rows are
/// sorted canonically — by relabelling-invariant row class, then by
/// content — unless the leak-row-order diagnostic is on. Class-first
/// ordering makes the received class sequence a scheme constant
/// instead of an assignment artifact. A duplicate row would make
/// answers ambiguous and is an error.
pub fn lower_queries(set: &QuerySet, assignment: &IndexAssignment) -> Result<Vec<QueryMatrix>> {
    let p = &set.params;
    if assignment.l_tilde() != p.l_tilde {
        return Err(Error::Dimension(format!(
            "assignment over {} slots, parameters need {}",
            assignment.l_tilde(),
            p.l_tilde
        )));
    }
    let field = PrimeField::new(p.q)?;
    let combos = enumerate_combinations(&field, p.m_count);
    let mut per_db: Vec<Vec<Vec<(u32, u64)>>> = vec![Vec::new(); p.n];
    for atom in set.downloaded() {
        per_db[atom.db].push(atom_row(&field, &combos, p, assignment, atom));
    }
    let mut out = Vec::with_capacity(p.n);
    for mut rows in per_db {
        if !set.options.leak_row_order {
            let mut keyed: Vec<([u8; 32], Vec<(u32, u64)>)> = rows
                .into_iter()
                .map(|r| (crate::canon::row_class_key(p.q, p.m_count, p.l_tilde, &r), r))
                .collect();
            keyed.sort_unstable();
            rows = keyed.into_iter().map(|(_, r)| r).collect();
        }
        let unique: BTreeSet<&Vec<(u32, u64)>> = rows.iter().collect();
        if unique.len() != rows.len() {
            return Err(Error::Corrupt("duplicate query row within one database".into()));
        }
        out.push(QueryMatrix { q: p.q, m_count: p.m_count, l_tilde: p.l_tilde, rows });
    }
    Ok(out)
}

// ====================================================================
// Tests
// ====================================================================
