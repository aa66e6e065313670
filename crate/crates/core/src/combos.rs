//! The virtual message space: canonical linear-combination vectors and
//! the user's private index assignment.
//!
//! A retrieval target is a nonzero coefficient vector over the `m`
//! messages, taken up to scalar multiples. Canonical representatives are
//! scaled so their first nonzero coefficient is one; there are
//! `v = (q^m - 1) / (q - 1)` of them. The basis vectors `e_1..e_m` come
//! first in the enumeration, followed by the remaining representatives
//! in lexicographic order, so "combination index `j < m`" always means
//! "plain message `j`".

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::mds::MessageStore;

/// A canonical combination vector: first nonzero coefficient is 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CombinationVector {
    pub coeffs: Vec<u64>,
}

impl CombinationVector {
    /// Canonicalizes an arbitrary nonzero vector by dividing through by
    /// its first nonzero coefficient.
    pub fn canonicalize(field: &PrimeField, coeffs: &[u64]) -> Result<Self> {
        for &c in coeffs {
            field.check(c)?;
        }
        let first = coeffs.iter().position(|&c| c != 0).ok_or_else(|| {
            Error::InvalidParams("combination vector must be nonzero".into())
        })?;
        let scale = field.inv(coeffs[first])?;
        Ok(CombinationVector { coeffs: coeffs.iter().map(|&c| field.mul(c, scale)).collect() })
    }

    pub fn is_basis(&self) -> bool {
        self.coeffs.iter().filter(|&&c| c != 0).count() == 1
    }
}

/// Expected size of the canonical combination space.
pub fn combination_count(q: u64, m: usize) -> u128 {
    let qm = (q as u128).pow(m as u32);
    (qm - 1) / (q as u128 - 1)
}

/// Enumerates all canonical combination vectors: `e_1..e_m` first, then
/// the remaining representatives in lexicographic coefficient order.
pub fn enumerate_combinations(field: &PrimeField, m: usize) -> Vec<CombinationVector> {
    let q = field.q();
    let mut basis = Vec::with_capacity(m);
    for i in 0..m {
        let mut c = vec![0u64; m];
        c[i] = 1;
        basis.push(CombinationVector { coeffs: c });
    }
    let mut rest = Vec::new();
    // Walk all q^m coefficient tuples in lexicographic order (leftmost
    // coefficient most significant) and keep non-basis canonical ones.
    let mut cur = vec![0u64; m];
    loop {
        // Advance odometer.
        let mut i = m;
        loop {
            if i == 0 {
                // Wrapped: enumeration done.
                let combos: Vec<CombinationVector> =
                    basis.into_iter().chain(rest).collect();
                debug_assert_eq!(combos.len() as u128, combination_count(q, m));
                return combos;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < q {
                break;
            }
            cur[i] = 0;
        }
        let first = cur.iter().position(|&c| c != 0);
        if let Some(fi) = first {
            if cur[fi] == 1 {
                let cand = CombinationVector { coeffs: cur.clone() };
                if !cand.is_basis() {
                    rest.push(cand);
                }
            }
        }
    }
}

/// Evaluates the virtual-message segment
/// `w~_{nu, t} = sum_m v_nu(m) * w_{m, t}` straight from the plaintext
/// store (a test/decoder oracle; databases never see this).
pub fn virtual_symbol(
    store: &MessageStore,
    combo: &CombinationVector,
    t: usize,
) -> Result<Vec<u64>> {
    if combo.coeffs.len() != store.m_count {
        return Err(Error::Dimension(format!(
            "combination over {} messages vs store of {}",
            combo.coeffs.len(),
            store.m_count
        )));
    }
    let field = PrimeField::new(store.q)?;
    let mut acc = vec![0u64; store.k];
    for (m, &c) in combo.coeffs.iter().enumerate() {
        if c == 0 {
            continue;
        }
        for (a, &w) in acc.iter_mut().zip(store.segment(m, t)) {
            *a = field.add(*a, field.mul(c, w));
        }
    }
    Ok(acc)
}

/// The user's private randomness: a segment permutation `pi` and a
/// per-slot sign `sigma`. Queries address virtual symbols through this
/// assignment, so the databases see uniformly scrambled slot labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexAssignment {
    /// `pi[t]` is the storage segment column addressed by query slot `t`
    /// (both 0-based).
    pub pi: Vec<u32>,
    /// `sigma[t]` in `{+1, -1}`, applied to every appearance of slot `t`.
    pub sigma: Vec<i8>,
    pub seed: u64,
}

impl IndexAssignment {
    /// Fisher-Yates permutation and independent signs from a seeded
    /// generator; identical seeds give identical assignments on every
    /// platform.
    pub fn random(l_tilde: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut pi: Vec<u32> = (0..l_tilde as u32).collect();
        for i in (1..l_tilde).rev() {
            let j = rng.random_range(0..=i);
            pi.swap(i, j);
        }
        let sigma = (0..l_tilde).map(|_| if rng.random_range(0..2u8) == 0 { 1 } else { -1 }).collect();
        IndexAssignment { pi, sigma, seed }
    }

    /// The trivial assignment (identity permutation, all-plus signs),
    /// used to reproduce worked examples verbatim.
    pub fn identity(l_tilde: usize) -> Self {
        IndexAssignment { pi: (0..l_tilde as u32).collect(), sigma: vec![1; l_tilde], seed: 0 }
    }

    pub fn l_tilde(&self) -> usize {
        self.pi.len()
    }
}

/// Evaluates the permuted virtual symbol
/// `u_nu(t) = sigma_t * w~_nu(pi(t))` from the plaintext store (oracle
/// counterpart of what the decoder reconstructs from answers).
pub fn permuted_symbol(
    store: &MessageStore,
    assignment: &IndexAssignment,
    combo: &CombinationVector,
    t: usize,
) -> Result<Vec<u64>> {
    if t >= assignment.l_tilde() {
        return Err(Error::Dimension(format!("slot {t} out of range")));
    }
    let field = PrimeField::new(store.q)?;
    let col = assignment.pi[t] as usize;
    let mut seg = virtual_symbol(store, combo, col)?;
    if assignment.sigma[t] == -1 {
        for s in seg.iter_mut() {
            *s = field.neg(*s);
        }
    }
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn field(q: u64) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    #[test]
    fn binary_two_messages() {
        let combos = enumerate_combinations(&field(2), 2);
        let rows: Vec<Vec<u64>> = combos.iter().map(|c| c.coeffs.clone()).collect();
        assert_eq!(rows, vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn ternary_two_messages() {
        let combos = enumerate_combinations(&field(3), 2);
        let rows: Vec<Vec<u64>> = combos.iter().map(|c| c.coeffs.clone()).collect();
        assert_eq!(rows, vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, 2]]);
    }

    #[test]
    fn single_message_degenerates() {
        let combos = enumerate_combinations(&field(2), 1);
        assert_eq!(combos.len(), 1);
        assert_eq!(combos[0].coeffs, vec![1]);
    }

    #[test]
    fn counts_match_closed_form() {
        for q in [2u64, 3, 5, 7] {
            for m in 1..=4usize {
                let combos = enumerate_combinations(&field(q), m);
                assert_eq!(combos.len() as u128, combination_count(q, m));
                // All distinct, all canonical.
                let mut seen = std::collections::HashSet::new();
                for c in &combos {
                    assert!(seen.insert(c.coeffs.clone()));
                    let first = c.coeffs.iter().find(|&&x| x != 0).unwrap();
                    assert_eq!(*first, 1);
                }
            }
        }
    }

    #[test]
    fn canonicalization_divides_by_leading_coefficient() {
        let f = field(5);
        let c = CombinationVector::canonicalize(&f, &[0, 3, 1]).unwrap();
        // 3^{-1} = 2 in F_5, so (0,3,1) ~ (0,1,2).
        assert_eq!(c.coeffs, vec![0, 1, 2]);
        assert!(CombinationVector::canonicalize(&f, &[0, 0, 0]).is_err());
    }

    #[test]
    fn canonical_reps_cover_all_nonzero_vectors() {
        // Every nonzero vector over F_3^2 canonicalizes to an enumerated rep.
        let f = field(3);
        let combos = enumerate_combinations(&f, 2);
        for a in 0..3u64 {
            for b in 0..3u64 {
                if (a, b) == (0, 0) {
                    continue;
                }
                let c = CombinationVector::canonicalize(&f, &[a, b]).unwrap();
                assert!(combos.contains(&c));
            }
        }
    }

    #[test]
    fn virtual_symbol_is_linear() {
        let f = field(3);
        let store = MessageStore::random(&f, 2, 4, 2, 99);
        let sum = CombinationVector { coeffs: vec![1, 2] };
        for t in 0..4 {
            let direct = virtual_symbol(&store, &sum, t).unwrap();
            let expect: Vec<u64> = store
                .segment(0, t)
                .iter()
                .zip(store.segment(1, t))
                .map(|(&w0, &w1)| f.add(w0, f.mul(2, w1)))
                .collect();
            assert_eq!(direct, expect);
        }
    }

    #[test]
    fn assignment_determinism_and_identity() {
        let a = IndexAssignment::random(10, 42);
        let b = IndexAssignment::random(10, 42);
        assert_eq!(a, b);
        assert_ne!(a, IndexAssignment::random(10, 43));
        let id = IndexAssignment::identity(4);
        assert_eq!(id.pi, vec![0, 1, 2, 3]);
        assert!(id.sigma.iter().all(|&s| s == 1));
    }

    /// Monte-Carlo check that the permutation sampler is close to
    /// uniform: all 6 permutations of 3 slots within 2% of 1/6 over ten
    /// thousand seeds.
    #[test]
    fn permutation_sampler_uniformity() {
        let mut counts: HashMap<Vec<u32>, u32> = HashMap::new();
        let trials = 10_000u32;
        for seed in 0..trials {
            let a = IndexAssignment::random(3, 0xA5A5_0000 + seed as u64);
            *counts.entry(a.pi).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (_, c) in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.02, "permutation frequency {freq}");
        }
    }

    #[test]
    fn permuted_symbol_applies_sign_and_permutation() {
        let f = field(5);
        let store = MessageStore::random(&f, 2, 3, 2, 7);
        let combo = CombinationVector { coeffs: vec![1, 0] };
        let assignment = IndexAssignment {
            pi: vec![2, 0, 1],
            sigma: vec![-1, 1, 1],
            seed: 0,
        };
        let got = permuted_symbol(&store, &assignment, &combo, 0).unwrap();
        let want: Vec<u64> = store.segment(0, 2).iter().map(|&w| f.mul(4, w)).collect();
        assert_eq!(got, want);
    }
}
