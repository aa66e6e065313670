//! MDS-coded storage: generator matrices, message stores, and the
//! per-database coded shards.
//!
//! Messages are cut into segments of `k` symbols; database `n` stores,
//! for every message and segment, the single coded symbol
//! `g_n^T w_{m,t}`, where `g_n` is column `n` of a `k x n_db` generator
//! matrix. Any `k` generator columns with an invertible square
//! submatrix recover the segment exactly.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::linalg::FqMatrix;

/// Magic bytes opening every binary shard file.
pub const SHARD_MAGIC: [u8; 4] = *b"PFRS";

// ====================================================================
// Generator matrices
// ====================================================================

/// A `k x n` generator matrix over `F_q`, column `n` belonging to
/// database `n`. The generator is public protocol state: privacy of the
/// scheme rests on the queries, never on hiding the code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub q: u64,
    pub k: usize,
    pub n: usize,
    /// Row-major `k x n` entries.
    pub entries: Vec<u64>,
}

impl GeneratorMatrix {
    pub fn from_rows(field: &PrimeField, rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Dimension("generator needs at least one row".into()));
        }
        let n = rows[0].len();
        let m = FqMatrix::from_rows(*field, rows)?;
        Ok(GeneratorMatrix { q: field.q(), k, n, entries: (0..k).flat_map(|r| m.row(r).to_vec()).collect() })
    }

    pub fn field(&self) -> PrimeField {
        PrimeField::new(self.q).expect("generator stores a valid field")
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.n + c]
    }

    /// Column `n` as a `k`-vector.
    pub fn column(&self, n: usize) -> Vec<u64> {
        (0..self.k).map(|r| self.get(r, n)).collect()
    }

    /// Coded projection `g_n^T w` of a `k`-symbol segment.
    pub fn project(&self, n: usize, segment: &[u64]) -> Result<u64> {
        if segment.len() != self.k {
            return Err(Error::Dimension(format!(
                "segment of {} symbols vs code dimension {}",
                segment.len(),
                self.k
            )));
        }
        let f = self.field();
        let mut acc = 0u64;
        for (r, &w) in segment.iter().enumerate() {
            acc = f.add(acc, f.mul(self.get(r, n), w));
        }
        Ok(acc)
    }

    /// The square submatrix formed by the given columns (as rows of the
    /// returned matrix transposed back into system form).
    fn submatrix(&self, cols: &[usize]) -> FqMatrix {
        let mut m = FqMatrix::zero(self.field(), cols.len(), self.k);
        for (r, &c) in cols.iter().enumerate() {
            for j in 0..self.k {
                m.set(r, j, self.get(j, c));
            }
        }
        m
    }
}

/// True iff every `k`-subset of columns is invertible (the maximum
/// distance separable property).
pub fn verify_mds(g: &GeneratorMatrix) -> Result<bool> {
    if g.k > g.n {
        return Err(Error::Dimension("more code dimensions than databases".into()));
    }
    let mut subset: Vec<usize> = (0..g.k).collect();
    loop {
        if g.submatrix(&subset).determinant()? == 0 {
            return Ok(false);
        }
        // Next k-combination in lexicographic order.
        let mut i = g.k;
        loop {
            if i == 0 {
                return Ok(true);
            }
            i -= 1;
            if subset[i] != i + g.n - g.k {
                subset[i] += 1;
                for j in (i + 1)..g.k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// True iff every window of `k` cyclically consecutive columns is
/// invertible. This is the exact invertibility profile the retrieval
/// protocol exercises: a symbol group is always collected from `k`
/// consecutive databases (mod `n`).
pub fn verify_cyclic_windows(g: &GeneratorMatrix) -> Result<bool> {
    for start in 0..g.n {
        let cols: Vec<usize> = (0..g.k).map(|i| (start + i) % g.n).collect();
        if g.submatrix(&cols).determinant()? == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn vandermonde(field: &PrimeField, n: usize, k: usize) -> GeneratorMatrix {
    // Columns (1, x, x^2, ..) on distinct nonzero points 1..=n.
    let rows: Vec<Vec<u64>> = (0..k)
        .map(|r| (1..=n as u64).map(|x| field.pow(x, r as u64)).collect())
        .collect();
    GeneratorMatrix::from_rows(field, &rows).expect("vandermonde dimensions are valid")
}

fn single_parity(field: &PrimeField, n: usize, k: usize) -> GeneratorMatrix {
    // Systematic [I_k | 1].
    let mut rows = vec![vec![0u64; n]; k];
    for (r, row) in rows.iter_mut().enumerate() {
        row[r] = 1;
        row[n - 1] = 1;
    }
    GeneratorMatrix::from_rows(field, &rows).expect("parity dimensions are valid")
}

fn all_ones(field: &PrimeField, n: usize) -> GeneratorMatrix {
    GeneratorMatrix::from_rows(field, &[vec![1u64; n]]).expect("row of ones")
}

/// Searches matrix space for a generator satisfying `accept`.
/// Exhaustive when the space is small, otherwise seeded random trials.
fn search_generator(
    field: &PrimeField,
    n: usize,
    k: usize,
    accept: impl Fn(&GeneratorMatrix) -> bool,
) -> Option<GeneratorMatrix> {
    let q = field.q();
    let cells = k * n;
    let space_bits = (cells as f64) * (q as f64).log2();
    let from_digits = |mut x: u128| -> GeneratorMatrix {
        let mut entries = vec![0u64; cells];
        for e in entries.iter_mut() {
            *e = (x % q as u128) as u64;
            x /= q as u128;
        }
        GeneratorMatrix { q, k, n, entries }
    };
    if space_bits <= 24.0 {
        let total = (q as u128).pow(cells as u32);
        for x in 0..total {
            let g = from_digits(x);
            if accept(&g) {
                return Some(g);
            }
        }
        None
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(0x4d44_5f53_4541_5243); // fixed: search must be reproducible
        for _ in 0..100_000 {
            let entries: Vec<u64> = (0..cells).map(|_| rng.random_range(0..q)).collect();
            let g = GeneratorMatrix { q, k, n, entries };
            if accept(&g) {
                return Some(g);
            }
        }
        None
    }
}

/// Builds a maximum-distance-separable generator for `(n, k)` over
/// `F_q`, or reports that none was found.
///
/// Construction ladder: Vandermonde on nonzero points when the field is
/// large enough, the systematic single-parity code when `k = n - 1`, a
/// row of ones when `k = 1`, and otherwise a deterministic search
/// (exhaustive for tiny spaces, seeded random trials for larger ones).
pub fn build_generator(n: usize, k: usize, q: u64) -> Result<GeneratorMatrix> {
    let field = PrimeField::new(q)?;
    if k == 0 || n == 0 || k > n {
        return Err(Error::InvalidParams(format!("generator shape k={k}, n={n}")));
    }
    let g = if q > n as u64 {
        vandermonde(&field, n, k)
    } else if k == n - 1 || k == n {
        // k == n never occurs in the scheme but the constructor stays total.
        single_parity(&field, n, k.min(n - 1).max(1))
    } else if k == 1 {
        all_ones(&field, n)
    } else {
        search_generator(&field, n, k, |g| verify_mds(g).unwrap_or(false)).ok_or(
            Error::GeneratorSearch {
                n,
                k,
                q,
                detail: "no MDS matrix in budget; the field is likely too small".into(),
            },
        )?
    };
    debug_assert!(verify_mds(&g).unwrap_or(false) || k == n);
    Ok(g)
}

/// Builds a generator whose `k`-wide cyclic column windows are all
/// invertible, falling back to this weaker profile only when a true MDS
/// matrix does not exist for the field (e.g. `(n, k) = (4, 2)` over
/// `F_2`). The retrieval protocol only ever inverts cyclic windows, so
/// this is sufficient for correctness; the relaxation is reported by
/// [`GeneratorProfile`].
pub fn build_cyclic_generator(n: usize, k: usize, q: u64) -> Result<(GeneratorMatrix, GeneratorProfile)> {
    match build_generator(n, k, q) {
        Ok(g) => Ok((g, GeneratorProfile::Mds)),
        Err(Error::GeneratorSearch { .. }) => {
            let field = PrimeField::new(q)?;
            let g = search_generator(&field, n, k, |g| verify_cyclic_windows(g).unwrap_or(false))
                .ok_or(Error::GeneratorSearch {
                    n,
                    k,
                    q,
                    detail: "no cyclically invertible matrix in budget".into(),
                })?;
            Ok((g, GeneratorProfile::CyclicWindows))
        }
        Err(e) => Err(e),
    }
}

/// How strong the constructed generator's invertibility profile is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorProfile {
    /// Every `k`-subset of columns is invertible.
    Mds,
    /// Every cyclic window of `k` consecutive columns is invertible
    /// (sufficient for the protocol; used only when MDS is infeasible).
    CyclicWindows,
}

// ====================================================================
// Messages and shards
// ====================================================================

/// The plaintext message store: `m_count` messages, each `l_tilde`
/// segments of `k` symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStore {
    pub q: u64,
    pub m_count: usize,
    pub l_tilde: usize,
    pub k: usize,
    /// Flat `[m][t][j]` layout.
    data: Vec<u64>,
}

impl MessageStore {
    pub fn new(field: &PrimeField, m_count: usize, l_tilde: usize, k: usize, data: Vec<u64>) -> Result<Self> {
        if data.len() != m_count * l_tilde * k {
            return Err(Error::Dimension(format!(
                "message store wants {} symbols, got {}",
                m_count * l_tilde * k,
                data.len()
            )));
        }
        for &x in &data {
            field.check(x)?;
        }
        Ok(MessageStore { q: field.q(), m_count, l_tilde, k, data })
    }

    /// Uniformly random store from a seed (deterministic across runs).
    pub fn random(field: &PrimeField, m_count: usize, l_tilde: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let data = (0..m_count * l_tilde * k).map(|_| rng.random_range(0..field.q())).collect();
        MessageStore { q: field.q(), m_count, l_tilde, k, data }
    }

    /// Segment `w_{m,t}` (0-based message and segment indices).
    pub fn segment(&self, m: usize, t: usize) -> &[u64] {
        let base = (m * self.l_tilde + t) * self.k;
        &self.data[base..base + self.k]
    }

    /// Total symbol count `L = l_tilde * k` of a single message.
    pub fn symbols_per_message(&self) -> usize {
        self.l_tilde * self.k
    }
}

/// One database's coded grid: entry `(m, t)` is `g_n^T w_{m,t}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseShard {
    pub q: u64,
    pub db_index: usize,
    pub n: usize,
    pub k: usize,
    pub m_count: usize,
    pub l_tilde: usize,
    /// Flat `[m][t]` layout.
    pub grid: Vec<u64>,
}

impl DatabaseShard {
    #[inline]
    pub fn get(&self, m: usize, t: usize) -> u64 {
        self.grid[m * self.l_tilde + t]
    }
}

/// Encodes the full store into one shard per database.
pub fn encode_shards(store: &MessageStore, g: &GeneratorMatrix) -> Result<Vec<DatabaseShard>> {
    if store.q != g.q || store.k != g.k {
        return Err(Error::Dimension(format!(
            "store (q={}, k={}) vs generator (q={}, k={})",
            store.q, store.k, g.q, g.k
        )));
    }
    let mut shards = Vec::with_capacity(g.n);
    for db in 0..g.n {
        let mut grid = Vec::with_capacity(store.m_count * store.l_tilde);
        for m in 0..store.m_count {
            for t in 0..store.l_tilde {
                grid.push(g.project(db, store.segment(m, t))?);
            }
        }
        shards.push(DatabaseShard {
            q: store.q,
            db_index: db,
            n: g.n,
            k: g.k,
            m_count: store.m_count,
            l_tilde: store.l_tilde,
            grid,
        });
    }
    Ok(shards)
}

/// Recovers a `k`-symbol segment from `k` coded projections
/// `(db_index, g_db^T w)`. The chosen databases must index an
/// invertible submatrix (always true for MDS generators and distinct
/// databases; true for cyclic windows under the relaxed profile).
pub fn decode_segment(g: &GeneratorMatrix, projections: &[(usize, u64)]) -> Result<Vec<u64>> {
    if projections.len() != g.k {
        return Err(Error::MissingProjection(format!(
            "need exactly k={} projections, got {}",
            g.k,
            projections.len()
        )));
    }
    let cols: Vec<usize> = projections.iter().map(|&(db, _)| db).collect();
    for &c in &cols {
        if c >= g.n {
            return Err(Error::Dimension(format!("database index {c} out of range")));
        }
    }
    let rhs: Vec<u64> = projections.iter().map(|&(_, v)| v).collect();
    g.submatrix(&cols).solve(&rhs)
}

// ====================================================================
// Shard import/export
// ====================================================================

/// Width in bytes of the minimal little-endian integer holding `q - 1`.
pub fn element_width(q: u64) -> usize {
    let max = q - 1;
    if max < 1 << 8 {
        1
    } else if max < 1 << 16 {
        2
    } else {
        4
    }
}

fn put_u32(w: &mut impl Write, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_element(w: &mut impl Write, q: u64, x: u64) -> Result<()> {
    let bytes = x.to_le_bytes();
    w.write_all(&bytes[..element_width(q)])?;
    Ok(())
}

pub fn read_element(r: &mut impl Read, q: u64) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf[..element_width(q)])?;
    let x = u64::from_le_bytes(buf);
    if x >= q {
        return Err(Error::Malformed { kind: "field element", detail: format!("{x} >= q={q}") });
    }
    Ok(x)
}

/// Writes a shard in the binary interchange format: a header of
/// little-endian 32-bit words (magic, q, n, k, m, l_tilde, db_index)
/// followed by the `m * l_tilde` grid entries as minimal-width
/// little-endian integers, row-major by message.
pub fn export_shard(shard: &DatabaseShard, w: &mut impl Write) -> Result<()> {
    w.write_all(&SHARD_MAGIC)?;
    for x in [shard.q as u32, shard.n as u32, shard.k as u32, shard.m_count as u32, shard.l_tilde as u32, shard.db_index as u32] {
        put_u32(w, x)?;
    }
    for &v in &shard.grid {
        write_element(w, shard.q, v)?;
    }
    Ok(())
}

/// Reads and validates a shard written by [`export_shard`].
pub fn import_shard(r: &mut impl Read) -> Result<DatabaseShard> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != SHARD_MAGIC {
        return Err(Error::Malformed { kind: "shard", detail: format!("bad magic {magic:?}") });
    }
    let q = get_u32(r)? as u64;
    let _ = PrimeField::new(q)?;
    let n = get_u32(r)? as usize;
    let k = get_u32(r)? as usize;
    let m_count = get_u32(r)? as usize;
    let l_tilde = get_u32(r)? as usize;
    let db_index = get_u32(r)? as usize;
    if k == 0 || k > n || db_index >= n {
        return Err(Error::Malformed { kind: "shard", detail: format!("shape n={n}, k={k}, db={db_index}") });
    }
    let mut grid = Vec::with_capacity(m_count * l_tilde);
    for _ in 0..m_count * l_tilde {
        grid.push(read_element(r, q)?);
    }
    // Must be exactly at end-of-stream.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Malformed { kind: "shard", detail: "trailing bytes".into() });
    }
    Ok(DatabaseShard { q, db_index, n, k, m_count, l_tilde, grid })
}
