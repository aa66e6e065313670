//! Reconstruction of the desired combination from database answers.
//!
//! Every atom's answer is one coded projection of a `k`-symbol vector.
//! Decoding walks the block structure the generator built:
//!
//! 1. Each queried singleton `(c, t)` appears at `k` distinct
//!    databases over the rounds; inverting the code submatrix yields
//!    the permuted virtual segment `u_c(t)`. Singletons of non-basis
//!    combinations are never downloaded; their segments follow
//!    linearly from the plain-message ones.
//! 2. Per block, ascending: retained interference sums reappear
//!    verbatim at `k` databases and decode to their compound vectors;
//!    each desired sum is stripped of its (already known) side
//!    information to expose one projection of a fresh desired segment,
//!    and `k` strips decode it; sums whose type was withheld entirely
//!    are regenerated from retained sums of the same block via the
//!    sign plan's certified recipes — every reappearance must agree.
//! 3. The desired segments, re-signed and un-permuted, concatenate to
//!    the retrieved combination.
//!
//! With exactly `k` projections per segment there is no redundancy, so
//! plain decoding trusts the answers. [`decode_with_audit`] also holds
//! the original message store and cross-checks every regenerated
//! withheld value against ground truth, which turns any tampered
//! answer on the regeneration paths into a hard error.

use std::collections::{BTreeMap, BTreeSet};

use crate::combos::{enumerate_combinations, permuted_symbol, CombinationVector, IndexAssignment};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::lower::{atom_row, QueryMatrix};
use crate::mds::{decode_segment, GeneratorMatrix, MessageStore};
use crate::protocol::AnswerString;
use crate::query::{Atom, AtomKind, QuerySet, Term};

// ====================================================================
// Public interface
// ====================================================================

/// Tallies from one decoding pass, all phases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeAudit {
    /// Withheld atoms that were regenerated and verified (against
    /// reappearances, and against ground truth when a store is held).
    pub eliminated_checked: usize,
    /// Distinct interference compounds decoded from answers.
    pub compounds_solved: usize,
    /// Distinct desired segments recovered by side-information
    /// stripping.
    pub peeled: usize,
}

/// Reconstructs the desired combination (all `k * l_tilde` symbols, in
/// storage order) from the per-database answers.
pub fn decode(
    set: &QuerySet,
    assignment: &IndexAssignment,
    generator: &GeneratorMatrix,
    matrices: &[QueryMatrix],
    answers: &[AnswerString],
) -> Result<Vec<u64>> {
    Decoder::new(set, assignment, generator, None)?
        .run(matrices, answers)
        .map(|(out, _)| out)
}

/// [`decode`], additionally cross-checking every regenerated withheld
/// value against the message store it came from.
pub fn decode_with_audit(
    set: &QuerySet,
    assignment: &IndexAssignment,
    generator: &GeneratorMatrix,
    matrices: &[QueryMatrix],
    answers: &[AnswerString],
    store: &MessageStore,
) -> Result<(Vec<u64>, DecodeAudit)> {
    Decoder::new(set, assignment, generator, Some(store))?.run(matrices, answers)
}

// ====================================================================
// Decoder state
// ====================================================================

type AtomKey = (usize, usize, usize, Vec<usize>, usize);

struct Decoder<'a> {
    set: &'a QuerySet,
    assignment: &'a IndexAssignment,
    generator: &'a GeneratorMatrix,
    store: Option<&'a MessageStore>,
    field: PrimeField,
    combos: Vec<CombinationVector>,
    /// Answer element per downloaded atom, indexed like `set.atoms`.
    values: Vec<Option<u64>>,
    /// `(db, round, block, type, instance)` to atom index, all atoms.
    index: BTreeMap<AtomKey, usize>,
    /// Recovered permuted virtual segments `u_c(t)`, as `k`-vectors.
    useg: BTreeMap<(usize, usize), Vec<u64>>,
    /// Recovered interference compound vectors, by signed term list.
    comp: BTreeMap<Vec<(usize, usize, i8)>, Vec<u64>>,
    audit: DecodeAudit,
}

impl<'a> Decoder<'a> {
    fn new(
        set: &'a QuerySet,
        assignment: &'a IndexAssignment,
        generator: &'a GeneratorMatrix,
        store: Option<&'a MessageStore>,
    ) -> Result<Self> {
        let p = &set.params;
        if generator.n != p.n || generator.k != p.k || generator.q != p.q {
            return Err(Error::Dimension(format!(
                "generator ({}, {}) over F_{} against scheme ({}, {}) over F_{}",
                generator.n, generator.k, generator.q, p.n, p.k, p.q
            )));
        }
        if assignment.l_tilde() != p.l_tilde {
            return Err(Error::Dimension(format!(
                "assignment over {} slots, parameters need {}",
                assignment.l_tilde(),
                p.l_tilde
            )));
        }
        if let Some(s) = store {
            if s.q != p.q || s.m_count != p.m_count || s.l_tilde != p.l_tilde || s.k != p.k {
                return Err(Error::Dimension("audit store does not match parameters".into()));
            }
        }
        let field = PrimeField::new(p.q)?;
        let combos = enumerate_combinations(&field, p.m_count);
        let mut index = BTreeMap::new();
        for (i, a) in set.atoms.iter().enumerate() {
            index.insert((a.db, a.round, a.block, a.atype(), a.instance), i);
        }
        Ok(Decoder {
            set,
            assignment,
            generator,
            store,
            field,
            combos,
            values: vec![None; set.atoms.len()],
            index,
            useg: BTreeMap::new(),
            comp: BTreeMap::new(),
            audit: DecodeAudit::default(),
        })
    }

    fn run(
        mut self,
        matrices: &[QueryMatrix],
        answers: &[AnswerString],
    ) -> Result<(Vec<u64>, DecodeAudit)> {
        self.match_rows(matrices, answers)?;
        self.block_one()?;
        for b in 2..=self.set.params.v {
            self.solve_compounds(b)?;
            self.peel_desired(b)?;
            self.regenerate_eliminated(b)?;
        }
        let out = self.assemble()?;
        Ok((out, self.audit))
    }

    // ----------------------------------------------------------------
    // Phase 0: locate every atom's answer element
    // ----------------------------------------------------------------

    fn match_rows(&mut self, matrices: &[QueryMatrix], answers: &[AnswerString]) -> Result<()> {
        let p = &self.set.params;
        if matrices.len() != p.n || answers.len() != p.n {
            return Err(Error::Dimension(format!(
                "{} matrices and {} answers for {} databases",
                matrices.len(),
                answers.len(),
                p.n
            )));
        }
        let mut row_index: Vec<BTreeMap<&Vec<(u32, u64)>, usize>> = Vec::with_capacity(p.n);
        let per_db = self.set.downloaded_per_db();
        for (db, (m, a)) in matrices.iter().zip(answers).enumerate() {
            if m.q != p.q || m.m_count != p.m_count || m.l_tilde != p.l_tilde {
                return Err(Error::Dimension(format!("query matrix {db} mis-shaped")));
            }
            if a.q != p.q || a.db_index != db {
                return Err(Error::Corrupt(format!(
                    "answer labelled for database {} in slot {db}",
                    a.db_index
                )));
            }
            if a.elements.len() != m.rows.len() || m.rows.len() != per_db[db] {
                return Err(Error::Corrupt(format!(
                    "database {db}: {} rows, {} elements, {} queried atoms",
                    m.rows.len(),
                    a.elements.len(),
                    per_db[db]
                )));
            }
            let mut map = BTreeMap::new();
            for (i, row) in m.rows.iter().enumerate() {
                if map.insert(row, i).is_some() {
                    return Err(Error::Corrupt(format!("database {db}: duplicate query row")));
                }
            }
            row_index.push(map);
        }
        for (i, atom) in self.set.atoms.iter().enumerate() {
            if !atom.downloaded() {
                continue;
            }
            let row = atom_row(&self.field, &self.combos, p, self.assignment, atom);
            let at = row_index[atom.db].get(&row).copied().ok_or_else(|| {
                Error::Corrupt(format!("database {}: a queried row is missing", atom.db))
            })?;
            self.values[i] = Some(answers[atom.db].elements[at]);
        }
        Ok(())
    }

    // ----------------------------------------------------------------
    // Phase 1: singleton segments
    // ----------------------------------------------------------------

    fn block_one(&mut self) -> Result<()> {
        let p = &self.set.params;
        let mut projections: BTreeMap<(usize, usize), Vec<(usize, u64)>> = BTreeMap::new();
        let mut slots: BTreeSet<usize> = BTreeSet::new();
        for (i, atom) in self.set.atoms.iter().enumerate() {
            if atom.block != 1 {
                continue;
            }
            let term = atom.terms[0];
            slots.insert(term.slot);
            if !atom.downloaded() {
                continue;
            }
            let v = self.field.mul(self.field.unit(term.sign), self.values[i].unwrap());
            projections.entry((term.combo, term.slot)).or_default().push((atom.db, v));
        }
        for ((c, t), projs) in projections {
            self.check_distinct_databases(&projs, "singleton")?;
            let seg = decode_segment(self.generator, &projs)?;
            if let Some(store) = self.store {
                if seg != permuted_symbol(store, self.assignment, &self.combos[c], t)? {
                    return Err(Error::Corrupt(format!(
                        "decoded singleton ({c}, {t}) disagrees with the store"
                    )));
                }
            }
            self.useg.insert((c, t), seg);
        }
        // Segments of non-basis combinations follow linearly.
        for &t in &slots {
            for c in 0..p.v {
                if self.useg.contains_key(&(c, t)) {
                    continue;
                }
                let mut acc = vec![0u64; p.k];
                for (m, &coef) in self.combos[c].coeffs.iter().enumerate() {
                    if coef == 0 {
                        continue;
                    }
                    let base = self.useg.get(&(m, t)).ok_or_else(|| {
                        Error::MissingProjection(format!("message {m} at slot {t}"))
                    })?;
                    for (x, &y) in acc.iter_mut().zip(base) {
                        *x = self.field.add(*x, self.field.mul(coef, y));
                    }
                }
                self.useg.insert((c, t), acc);
            }
        }
        // Every withheld singleton is now reconstructable; check it.
        for atom in self.set.atoms.iter().filter(|a| a.block == 1 && a.eliminated) {
            let term = atom.terms[0];
            self.audit.eliminated_checked += 1;
            if let Some(store) = self.store {
                let truth =
                    permuted_symbol(store, self.assignment, &self.combos[term.combo], term.slot)?;
                if self.useg[&(term.combo, term.slot)] != truth {
                    return Err(Error::Corrupt(format!(
                        "regenerated singleton ({}, {}) disagrees with the store",
                        term.combo, term.slot
                    )));
                }
            }
        }
        Ok(())
    }

    // ----------------------------------------------------------------
    // Phase 2a: interference compounds from downloads
    // ----------------------------------------------------------------

    fn solve_compounds(&mut self, block: usize) -> Result<()> {
        let mut groups: BTreeMap<Vec<(usize, usize, i8)>, Vec<(usize, u64)>> = BTreeMap::new();
        for (i, atom) in self.set.atoms.iter().enumerate() {
            if atom.block != block || atom.kind != AtomKind::Interference || !atom.downloaded() {
                continue;
            }
            groups.entry(atom.term_key()).or_default().push((atom.db, self.values[i].unwrap()));
        }
        for (key, projs) in groups {
            self.check_distinct_databases(&projs, "interference sum")?;
            let vec = decode_segment(self.generator, &projs)?;
            if self.store.is_some() && vec != self.oracle_sum(&key)? {
                return Err(Error::Corrupt(format!(
                    "decoded block-{block} compound disagrees with the store"
                )));
            }
            self.comp.insert(key, vec);
            self.audit.compounds_solved += 1;
        }
        Ok(())
    }

    // ----------------------------------------------------------------
    // Phase 2b: strip side information off desired sums
    // ----------------------------------------------------------------

    /// The known vector a desired or withheld sum embeds besides its
    /// fresh desired term: one block-1 singleton per side-information
    /// term at block 2, one whole lower-block compound afterwards.
    fn side_information_vector(&self, block: usize, si_terms: &[Term]) -> Result<Vec<u64>> {
        if block == 2 {
            let mut acc = vec![0u64; self.set.params.k];
            for term in si_terms {
                let seg = self.useg.get(&(term.combo, term.slot)).ok_or_else(|| {
                    Error::MissingProjection(format!(
                        "singleton ({}, {}) consumed as side information",
                        term.combo, term.slot
                    ))
                })?;
                let s = self.field.unit(term.sign);
                for (x, &y) in acc.iter_mut().zip(seg) {
                    *x = self.field.add(*x, self.field.mul(s, y));
                }
            }
            Ok(acc)
        } else {
            let key: Vec<(usize, usize, i8)> =
                si_terms.iter().map(|t| (t.combo, t.slot, t.sign)).collect();
            self.comp.get(&key).cloned().ok_or_else(|| {
                Error::MissingProjection(format!(
                    "block-{} compound consumed as side information",
                    block - 1
                ))
            })
        }
    }

    fn peel_desired(&mut self, block: usize) -> Result<()> {
        let nu = self.set.nu;
        let mut projections: BTreeMap<usize, Vec<(usize, u64)>> = BTreeMap::new();
        for (i, atom) in self.set.atoms.iter().enumerate() {
            if atom.block != block || atom.kind != AtomKind::Desired || !atom.downloaded() {
                continue;
            }
            let fresh = atom
                .terms
                .iter()
                .find(|t| t.combo == nu)
                .copied()
                .ok_or_else(|| Error::Corrupt("desired sum lacks the desired term".into()))?;
            let si_terms: Vec<Term> =
                atom.terms.iter().copied().filter(|t| t.combo != nu).collect();
            let si = self.side_information_vector(block, &si_terms)?;
            let si_proj = self.generator.project(atom.db, &si)?;
            let strip = self.field.sub(self.values[i].unwrap(), si_proj);
            let proj = self.field.mul(self.field.unit(fresh.sign), strip);
            projections.entry(fresh.slot).or_default().push((atom.db, proj));
        }
        for (slot, projs) in projections {
            self.check_distinct_databases(&projs, "desired segment")?;
            let seg = decode_segment(self.generator, &projs)?;
            if let Some(store) = self.store {
                if seg != permuted_symbol(store, self.assignment, &self.combos[nu], slot)? {
                    return Err(Error::Corrupt(format!(
                        "peeled desired slot {slot} disagrees with the store"
                    )));
                }
            }
            if self.useg.insert((nu, slot), seg).is_some() {
                return Err(Error::Corrupt(format!("desired slot {slot} recovered twice")));
            }
            self.audit.peeled += 1;
        }
        Ok(())
    }

    // ----------------------------------------------------------------
    // Phase 2c: regenerate withheld sums from certified recipes
    // ----------------------------------------------------------------

    fn regenerate_eliminated(&mut self, block: usize) -> Result<()> {
        let nu = self.set.nu;
        let p = &self.set.params;
        for (i, atom) in self.set.atoms.iter().enumerate() {
            if atom.block != block || !atom.eliminated {
                continue;
            }
            let _ = i;
            let atype = atom.atype();
            let recipe = self.set.plan.recipe(block, &atype).ok_or_else(|| {
                Error::Corrupt(format!("no regeneration recipe for withheld type {atype:?}"))
            })?;
            // The recipe expresses this sum (minus its own side
            // information) in terms of same-instance retained sums,
            // each likewise stripped to its fresh-segment content.
            let mut delta = vec![0u64; p.k];
            for (rtype, lambda) in recipe {
                let key = (atom.db, atom.round, block, rtype.clone(), atom.instance);
                let j = *self.index.get(&key).ok_or_else(|| {
                    Error::Corrupt(format!("recipe references absent sum of type {rtype:?}"))
                })?;
                let partner = &self.set.atoms[j];
                let part = self.stripped_content(partner)?;
                for (x, &y) in delta.iter_mut().zip(&part) {
                    *x = self.field.add(*x, self.field.mul(*lambda, y));
                }
            }
            self.audit.eliminated_checked += 1;
            if atype.contains(&nu) {
                let fresh = atom.terms.iter().find(|t| t.combo == nu).copied().unwrap();
                let mut seg = delta.clone();
                let s = self.field.unit(fresh.sign);
                for x in seg.iter_mut() {
                    *x = self.field.mul(s, *x);
                }
                match self.useg.get(&(nu, fresh.slot)) {
                    Some(prev) if *prev != seg => {
                        return Err(Error::Corrupt(format!(
                            "withheld desired slot {} regenerated inconsistently",
                            fresh.slot
                        )));
                    }
                    Some(_) => {}
                    None => {
                        self.useg.insert((nu, fresh.slot), seg);
                    }
                }
            } else {
                let key = atom.term_key();
                match self.comp.get(&key) {
                    Some(prev) if *prev != delta => {
                        return Err(Error::Corrupt(
                            "withheld interference sum regenerated inconsistently".into(),
                        ));
                    }
                    Some(_) => {}
                    None => {
                        self.comp.insert(key, delta.clone());
                    }
                }
            }
            if self.store.is_some() {
                // Full ground-truth value of the withheld sum.
                let truth = self.oracle_sum(&atom.term_key())?;
                let regenerated = if atype.contains(&nu) {
                    let fresh = atom.terms.iter().find(|t| t.combo == nu).copied().unwrap();
                    let si_terms: Vec<Term> =
                        atom.terms.iter().copied().filter(|t| t.combo != nu).collect();
                    let mut full = self.side_information_vector(block, &si_terms)?;
                    let seg = &self.useg[&(nu, fresh.slot)];
                    let s = self.field.unit(fresh.sign);
                    for (x, &y) in full.iter_mut().zip(seg) {
                        *x = self.field.add(*x, self.field.mul(s, y));
                    }
                    full
                } else {
                    self.comp[&atom.term_key()].clone()
                };
                if regenerated != truth {
                    return Err(Error::Corrupt(format!(
                        "withheld block-{block} sum disagrees with the store"
                    )));
                }
            }
        }
        Ok(())
    }

    // ----------------------------------------------------------------
    // Final assembly
    // ----------------------------------------------------------------

    fn assemble(&self) -> Result<Vec<u64>> {
        let p = &self.set.params;
        let nu = self.set.nu;
        let mut out = vec![0u64; p.l()];
        for t in 0..p.l_tilde {
            let seg = self.useg.get(&(nu, t)).ok_or_else(|| {
                Error::MissingProjection(format!("desired segment for slot {t}"))
            })?;
            let s = self.field.unit(self.assignment.sigma[t]);
            let base = self.assignment.pi[t] as usize * p.k;
            for (j, &y) in seg.iter().enumerate() {
                out[base + j] = self.field.mul(s, y);
            }
        }
        Ok(out)
    }

    // ----------------------------------------------------------------
    // Helpers
    // ----------------------------------------------------------------

    /// A retained sum reduced to its recipe coordinate content: the
    /// signed fresh desired segment for desired sums, the whole
    /// compound for interference sums.
    fn stripped_content(&self, atom: &Atom) -> Result<Vec<u64>> {
        let nu = self.set.nu;
        if let Some(fresh) = atom.terms.iter().find(|t| t.combo == nu) {
            let seg = self.useg.get(&(nu, fresh.slot)).ok_or_else(|| {
                Error::MissingProjection(format!("desired segment for slot {}", fresh.slot))
            })?;
            let s = self.field.unit(fresh.sign);
            Ok(seg.iter().map(|&y| self.field.mul(s, y)).collect())
        } else {
            self.comp.get(&atom.term_key()).cloned().ok_or_else(|| {
                Error::MissingProjection("interference compound referenced by a recipe".into())
            })
        }
    }

    /// Ground-truth value of a signed term list, from the store.
    fn oracle_sum(&self, key: &[(usize, usize, i8)]) -> Result<Vec<u64>> {
        let store = self.store.expect("oracle_sum requires an audit store");
        let mut acc = vec![0u64; self.set.params.k];
        for &(c, t, sign) in key {
            let seg = permuted_symbol(store, self.assignment, &self.combos[c], t)?;
            let s = self.field.unit(sign);
            for (x, &y) in acc.iter_mut().zip(&seg) {
                *x = self.field.add(*x, self.field.mul(s, y));
            }
        }
        Ok(acc)
    }

    fn check_distinct_databases(&self, projs: &[(usize, u64)], what: &str) -> Result<()> {
        let dbs: BTreeSet<usize> = projs.iter().map(|&(d, _)| d).collect();
        if dbs.len() != projs.len() || projs.len() != self.set.params.k {
            return Err(Error::Corrupt(format!(
                "{what} seen at {} databases, need {} distinct",
                dbs.len(),
                self.set.params.k
            )));
        }
        Ok(())
    }
}

// ====================================================================
// Tests
// ====================================================================
