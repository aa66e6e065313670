//! Assignment-invariant views of query matrices.
//!
//! A database sees one sparse matrix whose randomness comes entirely
//! from the user's private assignment: slots are relabelled by a
//! uniform permutation (moving column groups around) and each slot's
//! column group is scaled by a uniform sign. Row order is canonical.
//! Anything the database could learn about the target must therefore
//! survive that group action — so the audits compare views built to be
//! invariant under it.
//!
//! [`structural_fingerprint`] quotients a whole matrix: per-slot
//! contents are oriented by comparing against their negation (the sign
//! quotient; a no-op over F_2), then rows and slots are refined
//! against each other iteratively, colour-multiset style, and the
//! refinement history is hashed. Equal fingerprints across targets
//! mean the matrices lie in the same orbit as far as this refinement
//! can see; different fingerprints are a hard structural leak.
//!
//! [`row_class`] is the same idea for a single row in isolation, and
//! feeds two sampling views: the class of the first row of the
//! canonically sorted matrix (small support, good for two-sample
//! comparisons) and the full class sequence in row order, which
//! exposes leaks hidden in row placement.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::lower::QueryMatrix;

/// Refinement rounds. Fixed so all matrices are treated alike.
const REFINEMENT_ROUNDS: usize = 4;

// ====================================================================
// Hash helpers
// ====================================================================

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn ser(values: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn negated(q: u64, v: &[u64]) -> Vec<u64> {
    v.iter().map(|&x| (q - x) % q).collect()
}

/// Per-slot coefficient vectors of one row: slot to a length-`m`
/// vector gathering the row's coefficients in every band.
fn row_slot_vectors(matrix: &QueryMatrix, row: usize) -> BTreeMap<usize, Vec<u64>> {
    let mut slots: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for &(c, v) in &matrix.rows[row] {
        let (m, t) = ((c as usize) / matrix.l_tilde, (c as usize) % matrix.l_tilde);
        slots.entry(t).or_insert_with(|| vec![0; matrix.m_count])[m] = v;
    }
    slots
}

// ====================================================================
// Row classes and sampling views
// ====================================================================

/// Sign- and relabelling-invariant class of one lowered row, given as
/// raw `(column, coefficient)` pairs: the multiset of its per-slot
/// vectors, each oriented against its own negation.
pub fn row_class_key(q: u64, m_count: usize, l_tilde: usize, row: &[(u32, u64)]) -> [u8; 32] {
    let mut slots: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for &(c, v) in row {
        let (m, t) = ((c as usize) / l_tilde, (c as usize) % l_tilde);
        slots.entry(t).or_insert_with(|| vec![0; m_count])[m] = v;
    }
    let mut labels: Vec<Vec<u8>> = slots
        .values()
        .map(|v| {
            let neg = negated(q, v);
            ser(if neg < *v { &neg } else { v })
        })
        .collect();
    labels.sort_unstable();
    let parts: Vec<&[u8]> = labels.iter().map(|l| l.as_slice()).collect();
    digest(&parts)
}

/// Sign- and relabelling-invariant class of one matrix row.
pub fn row_class(matrix: &QueryMatrix, row: usize) -> [u8; 32] {
    row_class_key(matrix.q, matrix.m_count, matrix.l_tilde, &matrix.rows[row])
}

/// Class of the first row in received order. Canonical ordering sorts
/// rows by class first, so for an honest matrix this is a scheme
/// constant; an implementation that leaks through placement shifts it.
pub fn lead_row_view(matrix: &QueryMatrix) -> [u8; 32] {
    if matrix.rows.is_empty() {
        return digest(&[b"empty"]);
    }
    row_class(matrix, 0)
}

/// The full sequence of row classes in received order. Canonically
/// ordered matrices yield the sorted class multiset — constant across
/// assignments and, when the scheme is private, across targets — while
/// generation order collapses to a target-revealing constant.
pub fn order_trace_view(matrix: &QueryMatrix) -> [u8; 32] {
    let classes: Vec<[u8; 32]> = (0..matrix.rows.len()).map(|r| row_class(matrix, r)).collect();
    let parts: Vec<&[u8]> = classes.iter().map(|c| c.as_slice()).collect();
    digest(&parts)
}

// ====================================================================
// Whole-matrix fingerprint
// ====================================================================

/// Canonical structural fingerprint of one database's query matrix,
/// invariant under slot relabelling, slot sign flips, and row
/// reordering.
pub fn structural_fingerprint(matrix: &QueryMatrix) -> [u8; 32] {
    let q = matrix.q;
    // Slot to list of (row, vector) incidences.
    let mut slot_rows: BTreeMap<usize, Vec<(usize, Vec<u64>)>> = BTreeMap::new();
    let mut per_row: Vec<BTreeMap<usize, Vec<u64>>> = Vec::with_capacity(matrix.rows.len());
    for r in 0..matrix.rows.len() {
        let slots = row_slot_vectors(matrix, r);
        for (t, v) in &slots {
            slot_rows.entry(*t).or_default().push((r, v.clone()));
        }
        per_row.push(slots);
    }
    // Global sign orientation per slot: the slot's whole column group
    // versus its negation, as sorted multisets.
    let mut flip: BTreeMap<usize, bool> = BTreeMap::new();
    for (t, entries) in &slot_rows {
        let mut fwd: Vec<Vec<u64>> = entries.iter().map(|(_, v)| v.clone()).collect();
        let mut bwd: Vec<Vec<u64>> = entries.iter().map(|(_, v)| negated(q, v)).collect();
        fwd.sort_unstable();
        bwd.sort_unstable();
        flip.insert(*t, bwd < fwd);
    }
    let label = |t: usize, v: &[u64]| -> Vec<u8> {
        if flip[&t] {
            ser(&negated(q, v))
        } else {
            ser(v)
        }
    };
    // Initial colours from oriented incidence content alone.
    let mut row_color: Vec<[u8; 32]> = (0..matrix.rows.len())
        .map(|r| {
            let mut labels: Vec<Vec<u8>> =
                per_row[r].iter().map(|(t, v)| label(*t, v)).collect();
            labels.sort_unstable();
            let parts: Vec<&[u8]> = labels.iter().map(|l| l.as_slice()).collect();
            digest(&parts)
        })
        .collect();
    let mut slot_color: BTreeMap<usize, [u8; 32]> = slot_rows
        .iter()
        .map(|(t, entries)| {
            let mut labels: Vec<Vec<u8>> =
                entries.iter().map(|(_, v)| label(*t, v)).collect();
            labels.sort_unstable();
            let parts: Vec<&[u8]> = labels.iter().map(|l| l.as_slice()).collect();
            (*t, digest(&parts))
        })
        .collect();
    // Refine, folding each round's colour multisets into the history.
    let mut history = Sha256::new();
    history.update(b"fingerprint");
    for v in [q, matrix.m_count as u64, matrix.l_tilde as u64, matrix.rows.len() as u64] {
        history.update(v.to_le_bytes());
    }
    // Slots no downloaded row touches are interchangeable; only their
    // count matters.
    history.update(((matrix.l_tilde - slot_rows.len()) as u64).to_le_bytes());
    for _ in 0..REFINEMENT_ROUNDS {
        let mut next_rows = Vec::with_capacity(row_color.len());
        for r in 0..matrix.rows.len() {
            let mut env: Vec<Vec<u8>> = per_row[r]
                .iter()
                .map(|(t, v)| {
                    let mut e = slot_color[t].to_vec();
                    e.extend(label(*t, v));
                    e
                })
                .collect();
            env.sort_unstable();
            let mut parts: Vec<&[u8]> = vec![&row_color[r]];
            parts.extend(env.iter().map(|e| e.as_slice()));
            next_rows.push(digest(&parts));
        }
        let mut next_slots = BTreeMap::new();
        for (t, entries) in &slot_rows {
            let mut env: Vec<Vec<u8>> = entries
                .iter()
                .map(|(r, v)| {
                    let mut e = row_color[*r].to_vec();
                    e.extend(label(*t, v));
                    e
                })
                .collect();
            env.sort_unstable();
            let mut parts: Vec<&[u8]> = vec![&slot_color[t]];
            parts.extend(env.iter().map(|e| e.as_slice()));
            next_slots.insert(*t, digest(&parts));
        }
        row_color = next_rows;
        slot_color = next_slots;
        let mut rs: Vec<&[u8; 32]> = row_color.iter().collect();
        rs.sort_unstable();
        for c in rs {
            history.update(c);
        }
        let mut ss: Vec<&[u8; 32]> = slot_color.values().collect();
        ss.sort_unstable();
        for c in ss {
            history.update(c);
        }
    }
    history.finalize().into()
}

// ====================================================================
// Tests
// ====================================================================

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::combos::IndexAssignment;
    use crate::lower::lower_queries;
    use crate::params::SchemeParams;
    use crate::query::{QueryGenOptions, QuerySet};

    fn matrices(
        n: usize,
        k: usize,
        m: usize,
        q: u64,
        nu: usize,
        seed: u64,
        options: QueryGenOptions,
    ) -> Vec<QueryMatrix> {
        let params = SchemeParams::new(n, k, m, q).unwrap();
        let set = QuerySet::generate(&params, nu, options).unwrap();
        let assignment = IndexAssignment::random(params.l_tilde, seed);
        lower_queries(&set, &assignment).unwrap()
    }

    #[test]
    fn fingerprint_is_assignment_invariant() {
        for q in [2u64, 3] {
            let base = matrices(3, 2, 2, q, 1, 100, QueryGenOptions::default());
            for seed in [101u64, 102, 103] {
                let other = matrices(3, 2, 2, q, 1, seed, QueryGenOptions::default());
                for db in 0..3 {
                    assert_eq!(
                        structural_fingerprint(&base[db]),
                        structural_fingerprint(&other[db]),
                        "q={q} db={db} seed={seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn fingerprint_is_target_independent_over_the_binary_field() {
        for (n, k, m) in [(3, 2, 2), (2, 1, 2), (2, 1, 3), (3, 2, 3)] {
            let v = SchemeParams::new(n, k, m, 2).unwrap().v;
            let per_nu: Vec<Vec<[u8; 32]>> = (0..v)
                .map(|nu| {
                    matrices(n, k, m, 2, nu, 7, QueryGenOptions::default())
                        .iter()
                        .map(structural_fingerprint)
                        .collect()
                })
                .collect();
            for nu in 1..v {
                assert_eq!(per_nu[0], per_nu[nu], "n={n} k={k} m={m} target {nu}");
            }
        }
    }

    /// Over F_2 every coefficient is +1, so hiding the target only requires
    /// the unsigned incidence structure to match across targets — and it
    /// does. For q > 2 the rank-alternating symmetry signs leave per-slot
    /// relative sign products that differ between targets (e.g. the fresh
    /// slot shared by a desired row and a symmetry row carries the product
    /// of their signs, which no per-slot sign flip can erase). Flattening
    /// the signs is not an option: regenerating withheld sums requires the
    /// six second-block symmetry signs to multiply to -1, while target
    /// independence of the signed structure would need them all positive.
    /// The fingerprint therefore detects the target outside F_2, and the
    /// privacy guarantee this library certifies is the binary-field one.
    #[test]
    fn alternating_signs_are_target_dependent_outside_the_binary_field() {
        let v = SchemeParams::new(3, 2, 2, 3).unwrap().v;
        let per_nu: Vec<Vec<[u8; 32]>> = (0..v)
            .map(|nu| {
                matrices(3, 2, 2, 3, nu, 7, QueryGenOptions::default())
                    .iter()
                    .map(structural_fingerprint)
                    .collect()
            })
            .collect();
        assert!(
            (1..v).any(|nu| per_nu[0] != per_nu[nu]),
            "expected the signed structure to distinguish targets at q=3"
        );
    }

    #[test]
    fn withholding_symmetry_sums_leaks_structurally() {
        let opts = QueryGenOptions { disable_m_sym: true, leak_row_order: false };
        let a = matrices(3, 2, 2, 2, 0, 7, opts);
        let b = matrices(3, 2, 2, 2, 1, 7, opts);
        assert!((0..3).any(|db| structural_fingerprint(&a[db]) != structural_fingerprint(&b[db])));
    }

    #[test]
    fn sign_flips_do_not_move_the_fingerprint_or_classes() {
        let params = SchemeParams::new(2, 1, 2, 3).unwrap();
        let set = QuerySet::generate_default(&params, 2).unwrap();
        let assignment = IndexAssignment::random(params.l_tilde, 4);
        let mut flipped = assignment.clone();
        for s in flipped.sigma.iter_mut() {
            *s = -*s;
        }
        let a = lower_queries(&set, &assignment).unwrap();
        let b = lower_queries(&set, &flipped).unwrap();
        for db in 0..2 {
            assert_eq!(structural_fingerprint(&a[db]), structural_fingerprint(&b[db]));
            let ca: BTreeSet<_> = (0..a[db].rows.len()).map(|r| row_class(&a[db], r)).collect();
            let cb: BTreeSet<_> = (0..b[db].rows.len()).map(|r| row_class(&b[db], r)).collect();
            assert_eq!(ca, cb);
        }
    }

    #[test]
    fn leaked_row_order_fixes_the_trace_per_target() {
        let opts = QueryGenOptions { disable_m_sym: false, leak_row_order: true };
        // Same target, different assignments: identical traces.
        let a = matrices(3, 2, 2, 2, 0, 1, opts);
        let b = matrices(3, 2, 2, 2, 0, 2, opts);
        for db in 0..3 {
            assert_eq!(order_trace_view(&a[db]), order_trace_view(&b[db]));
        }
        // Different targets: the trace gives them away.
        let c = matrices(3, 2, 2, 2, 1, 1, opts);
        assert!((0..3).any(|db| order_trace_view(&a[db]) != order_trace_view(&c[db])));
        // Canonical (class-first) ordering makes the trace a scheme
        // constant instead: equal across assignments *and* across targets.
        let h1 = matrices(3, 2, 2, 2, 0, 1, QueryGenOptions::default());
        let h2 = matrices(3, 2, 2, 2, 0, 2, QueryGenOptions::default());
        let h3 = matrices(3, 2, 2, 2, 1, 1, QueryGenOptions::default());
        for db in 0..3 {
            assert_eq!(order_trace_view(&h1[db]), order_trace_view(&h2[db]));
            assert_eq!(order_trace_view(&h1[db]), order_trace_view(&h3[db]));
        }
    }

    #[test]
    fn row_classes_separate_the_block_shapes() {
        let m = matrices(3, 2, 2, 2, 2, 5, QueryGenOptions::default());
        let classes: BTreeSet<_> = (0..m[0].rows.len()).map(|r| row_class(&m[0], r)).collect();
        // Two message singletons, two mixed pair shapes, the
        // plain-message pair, and the triple; the downloaded set never
        // contains the two-band singleton.
        assert_eq!(classes.len(), 6);
    }
}
