//! Deterministic query-structure generation.
//!
//! A query to one database is a list of *atoms*; each atom is a signed
//! sum of permuted virtual symbols `u_c(t)` and is answered with a
//! single field element. Atoms are organized in `v` blocks of growing
//! sum size and `k` rounds:
//!
//! * Block 1 draws singleton slots for all `v` combinations in
//!   lockstep; the non-desired singletons are parked in `k`
//!   side-information groups per database.
//! * Block `b >= 2` forms, per desired type, fresh desired slots glued
//!   onto verbatim side-information compounds collected from neighbor
//!   databases, then mirrors the desired types with symmetry sums over
//!   the same fresh slots so every type of size `b` appears with equal
//!   multiplicity.
//! * Rounds `2..=k` rotate each database's structure to its successor
//!   (fresh desired slots keep their identity and pick up new side
//!   information), which is how every slot accumulates `k` distinct
//!   coded projections.
//!
//! Atoms whose type avoids every plain message are generated — they
//! hold slots, consume side information, and rotate like everything
//! else — but are never downloaded; the decoder rebuilds their values
//! off-line from the retained types.

use crate::combos::enumerate_combinations;
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::params::SchemeParams;
use crate::signs::{block_types, build_sign_plan, type_retained, SignPlan};
use std::collections::BTreeMap;

// ====================================================================
// Atoms
// ====================================================================

/// One signed appearance of a permuted virtual symbol inside an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    /// Combination index (0-based; below `m_count` means plain message).
    pub combo: usize,
    /// Virtual slot `t` (0-based; addresses segment `pi(t)`).
    pub slot: usize,
    /// `+1` or `-1`.
    pub sign: i8,
}

/// Whether an atom's type contains the desired combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Desired,
    Interference,
}

/// A single queried sum. The same logical compound reappears (with the
/// desired term swapped or re-dressed) at `k` databases over the `k`
/// rounds; `db`/`round` locate this appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    /// Signed terms, sorted by combination index.
    pub terms: Vec<Term>,
    /// Database answering this atom (0-based).
    pub db: usize,
    /// Round (1-based).
    pub round: usize,
    /// Block = sum size (1-based).
    pub block: usize,
    pub kind: AtomKind,
    /// Instance rank within its `(db, round, block, type)` family.
    pub instance: usize,
    /// Side-information group (0-based) for singletons and symmetry
    /// sums; consumption always references the round-1 registry.
    pub group: Option<usize>,
    /// True when the type avoids every plain message: generated but not
    /// downloaded.
    pub eliminated: bool,
    /// True when symmetry sums are withheld by a diagnostic option.
    pub suppressed: bool,
}

impl Atom {
    /// Sorted combination indices appearing in this atom.
    pub fn atype(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.combo).collect()
    }

    /// Identity of the compound across databases and rounds: the full
    /// signed term list.
    pub fn term_key(&self) -> Vec<(usize, usize, i8)> {
        self.terms.iter().map(|t| (t.combo, t.slot, t.sign)).collect()
    }

    /// Slot of the desired combination's term, if present.
    pub fn nu_slot(&self, nu: usize) -> Option<usize> {
        self.terms.iter().find(|t| t.combo == nu).map(|t| t.slot)
    }

    /// Whether this atom is actually sent for download.
    pub fn downloaded(&self) -> bool {
        !self.eliminated && !self.suppressed
    }
}

/// Diagnostic switches used by the privacy audits. Defaults generate
/// the honest scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryGenOptions {
    /// Withhold the symmetry sums from the download (they are still
    /// generated internally so later blocks keep their structure).
    /// Breaks indistinguishability on purpose.
    pub disable_m_sym: bool,
    /// Keep matrix rows in generation order instead of canonical order.
    /// Leaks the desired index through row placement on purpose.
    pub leak_row_order: bool,
}

// ====================================================================
// Query set
// ====================================================================

/// The complete atom structure for one retrieval session, before the
/// private index assignment is applied.
#[derive(Debug, Clone)]
pub struct QuerySet {
    pub params: SchemeParams,
    /// Desired combination (0-based).
    pub nu: usize,
    pub options: QueryGenOptions,
    pub plan: SignPlan,
    pub atoms: Vec<Atom>,
}

impl QuerySet {
    /// Generates the full structure for the desired combination.
    pub fn generate(params: &SchemeParams, nu: usize, options: QueryGenOptions) -> Result<Self> {
        if nu >= params.v {
            return Err(Error::CombinationIndex { index: nu + 1, v: params.v });
        }
        let field = PrimeField::new(params.q)?;
        let combos = enumerate_combinations(&field, params.m_count);
        let plan = build_sign_plan(params, &combos, nu)?;
        let mut builder = Builder::new(*params, nu, options, plan);
        builder.round_one();
        for round in 2..=params.k {
            builder.rotate_round(round);
        }
        Ok(builder.finish())
    }

    /// Generates with default options.
    pub fn generate_default(params: &SchemeParams, nu: usize) -> Result<Self> {
        Self::generate(params, nu, QueryGenOptions::default())
    }

    /// Atoms actually downloaded, in generation order.
    pub fn downloaded(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.downloaded())
    }

    /// Downloaded atoms per database (answer lengths).
    pub fn downloaded_per_db(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.params.n];
        for a in self.downloaded() {
            counts[a.db] += 1;
        }
        counts
    }

    /// Atoms of one `(db, round, block)` cell, in generation order
    /// (test and inspection helper).
    pub fn cell(&self, db: usize, round: usize, block: usize) -> Vec<&Atom> {
        self.atoms
            .iter()
            .filter(|a| a.db == db && a.round == round && a.block == block)
            .collect()
    }
}

// ====================================================================
// Builder
// ====================================================================

/// Round-1 registries: side-information groups are only ever consumed
/// out of round 1, so later rounds never re-register them.
struct Builder {
    params: SchemeParams,
    nu: usize,
    options: QueryGenOptions,
    plan: SignPlan,
    atoms: Vec<Atom>,
    /// Fresh-slot counter for the desired combination (block 1 advances
    /// it in lockstep for every combination).
    counter: usize,
    /// `[db][group]` -> block-1 non-desired singleton atoms (round 1).
    b1_groups: Vec<Vec<Vec<usize>>>,
    /// `(db, block)` -> symmetry-sum groups (round 1).
    msym_groups: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
    /// `(db, round)` -> all block-1 atoms, for rotation.
    b1_flat: BTreeMap<(usize, usize), Vec<usize>>,
    /// `(db, round, block)` -> symmetry atoms, for rotation.
    msym_flat: BTreeMap<(usize, usize, usize), Vec<usize>>,
    /// `(db, round, block, type)` -> fresh desired slot per instance.
    desired_slots: BTreeMap<(usize, usize, usize, Vec<usize>), Vec<usize>>,
}

impl Builder {
    fn new(params: SchemeParams, nu: usize, options: QueryGenOptions, plan: SignPlan) -> Self {
        let k = params.k;
        let n = params.n;
        Builder {
            params,
            nu,
            options,
            plan,
            atoms: Vec::new(),
            counter: 0,
            b1_groups: vec![vec![Vec::new(); k]; n],
            msym_groups: BTreeMap::new(),
            b1_flat: BTreeMap::new(),
            msym_flat: BTreeMap::new(),
            desired_slots: BTreeMap::new(),
        }
    }

    fn finish(self) -> QuerySet {
        QuerySet {
            params: self.params,
            nu: self.nu,
            options: self.options,
            plan: self.plan,
            atoms: self.atoms,
        }
    }

    /// Round 1: lockstep singletons, then blocks of growing size.
    fn round_one(&mut self) {
        let p = self.params;
        let r1 = p.r_b(1) as usize;
        // Group width `r1 / k` is only meaningful when side information
        // exists (v >= 2); with a single combination nothing is parked.
        let gwidth = if p.v >= 2 { r1 / p.k } else { 1 };
        for db in 0..p.n {
            let mut flat = Vec::with_capacity(r1 * p.v);
            for iter in 0..r1 {
                let slot = self.counter;
                self.counter += 1;
                for c in 0..p.v {
                    let desired = c == self.nu;
                    let idx = self.atoms.len();
                    self.atoms.push(Atom {
                        terms: vec![Term { combo: c, slot, sign: 1 }],
                        db,
                        round: 1,
                        block: 1,
                        kind: if desired { AtomKind::Desired } else { AtomKind::Interference },
                        instance: iter,
                        group: if desired { None } else { Some(iter / gwidth) },
                        eliminated: c >= p.m_count,
                        suppressed: false,
                    });
                    if !desired {
                        self.b1_groups[db][iter / gwidth].push(idx);
                    }
                    flat.push(idx);
                }
            }
            self.b1_flat.insert((db, 1), flat);
        }
        for b in 2..=p.v {
            for db in 0..p.n {
                self.desired_block(db, 1, b, None);
                self.symmetry_block(db, b);
            }
        }
        assert_eq!(
            self.counter, p.l_tilde,
            "fresh desired slots must exhaust the segment space exactly"
        );
    }

    /// Rounds `2..=k`: rotate block 1 and the symmetry sums verbatim
    /// from the predecessor database, and re-dress the rotated desired
    /// slots with this round's side information.
    fn rotate_round(&mut self, round: usize) {
        let p = self.params;
        for db in 0..p.n {
            let src = (db + p.n - 1) % p.n;
            let rotated = self.clone_retagged(&self.b1_flat[&(src, round - 1)].clone(), db, round);
            self.b1_flat.insert((db, round), rotated);
        }
        for b in 2..=p.v {
            for db in 0..p.n {
                let src = (db + p.n - 1) % p.n;
                self.desired_block(db, round, b, Some(src));
                if let Some(flat) = self.msym_flat.get(&(src, round - 1, b)).cloned() {
                    let rotated = self.clone_retagged(&flat, db, round);
                    self.msym_flat.insert((db, round, b), rotated);
                }
            }
        }
    }

    fn clone_retagged(&mut self, src: &[usize], db: usize, round: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(src.len());
        for &idx in src {
            let mut a = self.atoms[idx].clone();
            a.db = db;
            a.round = round;
            out.push(self.atoms.len());
            self.atoms.push(a);
        }
        out
    }

    /// Generates the desired types of block `b` at `(db, round)`. In
    /// round 1 (`rotate_from == None`) the desired slots are fresh; in
    /// later rounds they are the predecessor database's slots from the
    /// previous round, re-dressed with side information from this
    /// round's groups.
    fn desired_block(&mut self, db: usize, round: usize, b: usize, rotate_from: Option<usize>) {
        let p = self.params;
        let rb = p.r_b(b) as usize;
        let s_b = self.plan.desired_sign(b);
        let (desired_types, _) = block_types(p.v, self.nu, b);
        for t in desired_types {
            let partner: Vec<usize> = t.iter().copied().filter(|&c| c != self.nu).collect();
            let si = self.collect_si(db, round, b, &partner);
            assert_eq!(si.len(), rb, "side-information supply must match instance count");
            let slots: Vec<usize> = match rotate_from {
                None => {
                    let start = self.counter;
                    self.counter += rb;
                    (start..start + rb).collect()
                }
                Some(src) => self.desired_slots[&(src, round - 1, b, t.clone())].clone(),
            };
            let eliminated = !type_retained(&t, p.m_count);
            for (r, (&f, &si_idx)) in slots.iter().zip(si.iter()).enumerate() {
                let mut terms = self.atoms[si_idx].terms.clone();
                terms.push(Term { combo: self.nu, slot: f, sign: s_b });
                terms.sort_unstable_by_key(|t| t.combo);
                self.atoms.push(Atom {
                    terms,
                    db,
                    round,
                    block: b,
                    kind: AtomKind::Desired,
                    instance: r,
                    group: None,
                    eliminated,
                    suppressed: false,
                });
            }
            self.desired_slots.insert((db, round, b, t), slots);
        }
    }

    /// Generates the block-`b` symmetry sums at `(db, round 1)`: every
    /// `b`-subset avoiding the desired combination, each component
    /// borrowing the fresh slot of the desired type it mirrors.
    fn symmetry_block(&mut self, db: usize, b: usize) {
        let p = self.params;
        let (_, interference_types) = block_types(p.v, self.nu, b);
        if interference_types.is_empty() {
            return;
        }
        let rb = p.r_b(b) as usize;
        // `rb / k` is integral for every block that has symmetry sums
        // (b <= v-1 keeps a factor k in rb).
        let gwidth = rb / p.k;
        let mut groups = vec![Vec::new(); p.k];
        let mut flat = Vec::new();
        for s in interference_types {
            let signs = self.plan.msym_signs(&s).to_vec();
            let eliminated = !type_retained(&s, p.m_count);
            for r in 0..rb {
                let terms: Vec<Term> = s
                    .iter()
                    .zip(signs.iter())
                    .map(|(&th, &sign)| {
                        let mut partner: Vec<usize> =
                            s.iter().copied().filter(|&c| c != th).collect();
                        partner.push(self.nu);
                        partner.sort_unstable();
                        let f = self.desired_slots[&(db, 1, b, partner)][r];
                        Term { combo: th, slot: f, sign }
                    })
                    .collect();
                let g = r / gwidth;
                let idx = self.atoms.len();
                self.atoms.push(Atom {
                    terms,
                    db,
                    round: 1,
                    block: b,
                    kind: AtomKind::Interference,
                    instance: r,
                    group: Some(g),
                    eliminated,
                    suppressed: self.options.disable_m_sym,
                });
                groups[g].push(idx);
                flat.push(idx);
            }
        }
        self.msym_groups.insert((db, b), groups);
        self.msym_flat.insert((db, 1, b), flat);
    }

    /// Side information of type `partner` for block `b` at
    /// `(db, round)`: walk the `nb` successor databases and pull their
    /// round-1 block-`(b-1)` group `(nb + round - i - 1) mod k`, keeping
    /// pool insertion order. Every round consumes a different group, so
    /// each compound is used exactly once per consumer.
    fn collect_si(&self, db: usize, round: usize, b: usize, partner: &[usize]) -> Vec<usize> {
        let p = self.params;
        let mut out = Vec::new();
        for i in 1..=p.nb {
            let neighbor = (db + i) % p.n;
            let g = (p.nb + round - i - 1) % p.k;
            let pool: &[usize] = if b == 2 {
                &self.b1_groups[neighbor][g]
            } else {
                &self.msym_groups[&(neighbor, b - 1)][g]
            };
            for &idx in pool {
                let a = &self.atoms[idx];
                if a.terms.len() == partner.len()
                    && a.terms.iter().map(|t| t.combo).eq(partner.iter().copied())
                {
                    out.push(idx);
                }
            }
        }
        out
    }
}

// ====================================================================
// Tests
// ====================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::collections::BTreeSet;

    fn qs(n: usize, k: usize, m: usize, q: u64, nu: usize) -> QuerySet {
        let params = SchemeParams::new(n, k, m, q).unwrap();
        QuerySet::generate_default(&params, nu).unwrap()
    }

    /// Compact notation for expected atoms: (combo, slot, sign) lists.
    fn keys(cell: &[&Atom]) -> BTreeSet<Vec<(usize, usize, i8)>> {
        cell.iter().map(|a| a.term_key()).collect()
    }

    fn expect(atoms: &[&[(usize, usize, i8)]]) -> BTreeSet<Vec<(usize, usize, i8)>> {
        atoms.iter().map(|a| a.to_vec()).collect()
    }

    #[test]
    fn two_databases_single_parity_full_walkthrough() {
        // (n, k, m, q) = (2, 1, 2, 2), nu = 0: v = 3, l~ = 8, one round.
        // Hand-derived structure; combinations 0,1,2 = w1, w2, w1+w2.
        let set = qs(2, 1, 2, 2, 0);
        assert_eq!(set.atoms.len(), 2 * (3 + 3 + 1));
        // Block 1: lockstep singletons, slots 0 and 1.
        let c = set.cell(0, 1, 1);
        assert_eq!(
            keys(&c),
            expect(&[&[(0, 0, 1)], &[(1, 0, 1)], &[(2, 0, 1)]])
        );
        let c = set.cell(1, 1, 1);
        assert_eq!(
            keys(&c),
            expect(&[&[(0, 1, 1)], &[(1, 1, 1)], &[(2, 1, 1)]])
        );
        // Block 2 at database 0 exploits database 1's singletons; the
        // reverse at database 1. Fresh desired slots 2..=5; symmetry
        // sums mirror them crosswise.
        let c = set.cell(0, 1, 2);
        assert_eq!(
            keys(&c),
            expect(&[
                &[(0, 2, -1), (2, 1, 1)],
                &[(0, 3, -1), (1, 1, 1)],
                &[(1, 2, 1), (2, 3, -1)],
            ])
        );
        let c = set.cell(1, 1, 2);
        assert_eq!(
            keys(&c),
            expect(&[
                &[(0, 4, -1), (2, 0, 1)],
                &[(0, 5, -1), (1, 0, 1)],
                &[(1, 4, 1), (2, 5, -1)],
            ])
        );
        // Block 3 glues a fresh desired slot onto the neighbor's
        // symmetry sum, embedded verbatim.
        let c = set.cell(0, 1, 3);
        assert_eq!(keys(&c), expect(&[&[(0, 6, 1), (1, 4, 1), (2, 5, -1)]]));
        let c = set.cell(1, 1, 3);
        assert_eq!(keys(&c), expect(&[&[(0, 7, 1), (1, 2, 1), (2, 3, -1)]]));
        // Only the plain-message singletons of combination 2 are
        // withheld; total download is 12 symbols for l = 8.
        assert_eq!(set.downloaded().count(), 12);
        assert_eq!(set.atoms.iter().filter(|a| a.eliminated).count(), 2);
    }

    #[test]
    fn worked_example_spot_cells() {
        // (3, 2, 2, 2), nu = 2 (the parity combination): spot-check two
        // cells of the fully worked example against hand values.
        let set = qs(3, 2, 2, 2, 2);
        // Round 1, block 2, database 0: side information from database
        // 1's first group dressed with fresh slots 12..=15, plus the
        // crosswise symmetry sums.
        let c: Vec<&Atom> = set
            .cell(0, 1, 2)
            .into_iter()
            .filter(|a| a.downloaded())
            .collect();
        assert_eq!(
            keys(&c),
            expect(&[
                &[(1, 4, 1), (2, 12, -1)],
                &[(1, 5, 1), (2, 13, -1)],
                &[(0, 4, 1), (2, 14, -1)],
                &[(0, 5, 1), (2, 15, -1)],
                &[(0, 12, 1), (1, 14, -1)],
                &[(0, 13, 1), (1, 15, -1)],
            ])
        );
        // Round 2, block 3, database 0: the rotated desired slot from
        // database 2 dressed with database 1's second symmetry group.
        let c = set.cell(0, 2, 3);
        assert_eq!(keys(&c), expect(&[&[(0, 17, 1), (1, 19, -1), (2, 26, 1)]]));
    }

    #[test]
    fn download_census_matches_closed_form() {
        for (n, k, m, q) in
            [(2, 1, 2, 2), (3, 2, 2, 2), (3, 1, 2, 2), (4, 2, 2, 2), (3, 2, 2, 3), (4, 3, 2, 2)]
        {
            let params = SchemeParams::new(n, k, m, q).unwrap();
            for nu in 0..params.v {
                let set = QuerySet::generate_default(&params, nu).unwrap();
                assert_eq!(
                    set.downloaded().count() as u128,
                    params.total_download(),
                    "download count at ({n},{k},{m},{q}) nu={nu}"
                );
                // Every database answers the same number of atoms.
                let per_db = set.downloaded_per_db();
                assert!(per_db.iter().all(|&c| c == per_db[0]));
                // Per-cell counts match the per-block census.
                for b in 1..=params.v {
                    let got = set
                        .cell(0, 1, b)
                        .into_iter()
                        .filter(|a| a.downloaded())
                        .count();
                    assert_eq!(got as u128, params.retained_per_db_round(b));
                }
            }
        }
    }

    #[test]
    fn desired_slots_cover_segment_space_with_k_appearances() {
        let params = SchemeParams::new(3, 2, 2, 2).unwrap();
        for nu in 0..3 {
            let set = QuerySet::generate_default(&params, nu).unwrap();
            // Collect (slot -> databases) over every desired-term
            // appearance, block 1 included.
            let mut seen: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for a in &set.atoms {
                if a.kind == AtomKind::Desired {
                    seen.entry(a.nu_slot(nu).unwrap()).or_default().push(a.db);
                }
            }
            assert_eq!(seen.len(), params.l_tilde);
            for (slot, dbs) in seen {
                assert_eq!(dbs.len(), params.k, "slot {slot} appearances");
                // The k databases form a cyclically consecutive window.
                let set: BTreeSet<usize> = dbs.iter().copied().collect();
                assert_eq!(set.len(), params.k);
                let window_ok = (0..params.n).any(|start| {
                    (0..params.k).all(|o| set.contains(&((start + o) % params.n)))
                });
                assert!(window_ok, "slot {slot} window {set:?}");
            }
        }
    }

    #[test]
    fn compounds_reappear_at_k_databases() {
        // Every retained non-desired compound (and each of its withheld
        // siblings) shows up at exactly k databases over the k rounds.
        let set = qs(4, 2, 2, 2, 1);
        let mut seen: BTreeMap<Vec<(usize, usize, i8)>, BTreeSet<(usize, usize)>> =
            BTreeMap::new();
        for a in &set.atoms {
            if a.kind == AtomKind::Interference && a.block >= 2 {
                seen.entry(a.term_key()).or_default().insert((a.db, a.round));
            }
        }
        assert!(!seen.is_empty());
        for (key, places) in seen {
            assert_eq!(places.len(), set.params.k, "compound {key:?}");
            let dbs: BTreeSet<usize> = places.iter().map(|&(db, _)| db).collect();
            assert_eq!(dbs.len(), set.params.k);
        }
    }

    #[test]
    fn rotation_copies_block_one_and_symmetry_verbatim() {
        let set = qs(3, 2, 2, 2, 0);
        let n = set.params.n;
        for db in 0..n {
            let src = (db + n - 1) % n;
            for b in [1usize, 2] {
                if b == 1 {
                    assert_eq!(keys(&set.cell(db, 2, 1)), keys(&set.cell(src, 1, 1)));
                } else {
                    let rot: Vec<&Atom> = set
                        .cell(db, 2, b)
                        .into_iter()
                        .filter(|a| a.kind == AtomKind::Interference)
                        .collect();
                    let orig: Vec<&Atom> = set
                        .cell(src, 1, b)
                        .into_iter()
                        .filter(|a| a.kind == AtomKind::Interference)
                        .collect();
                    assert_eq!(keys(&rot), keys(&orig));
                }
            }
        }
    }

    #[test]
    fn desired_reuse_pairs_rotated_slots_with_fresh_side_information() {
        let set = qs(3, 2, 2, 2, 0);
        // Per desired type: round-2 slots at db equal round-1 slots at
        // db-1, but the attached side information differs.
        for db in 0..3usize {
            let src = (db + 2) % 3;
            for b in 2..=3usize {
                let slots = |d: usize, r: usize| -> BTreeMap<Vec<usize>, BTreeSet<usize>> {
                    let mut out: BTreeMap<Vec<usize>, BTreeSet<usize>> = BTreeMap::new();
                    for a in set.cell(d, r, b) {
                        if a.kind == AtomKind::Desired {
                            out.entry(a.atype()).or_default().insert(a.nu_slot(0).unwrap());
                        }
                    }
                    out
                };
                assert_eq!(slots(db, 2), slots(src, 1));
                let full = |d: usize, r: usize| -> BTreeSet<Vec<(usize, usize, i8)>> {
                    set.cell(d, r, b)
                        .into_iter()
                        .filter(|a| a.kind == AtomKind::Desired)
                        .map(|a| a.term_key())
                        .collect()
                };
                assert_ne!(full(db, 2), full(src, 1));
            }
        }
    }

    #[test]
    fn withheld_symmetry_option_suppresses_only_symmetry() {
        let params = SchemeParams::new(3, 2, 2, 2).unwrap();
        let opts = QueryGenOptions { disable_m_sym: true, leak_row_order: false };
        let set = QuerySet::generate(&params, 0, opts).unwrap();
        let honest = QuerySet::generate_default(&params, 0).unwrap();
        assert_eq!(set.atoms.len(), honest.atoms.len());
        for (a, b) in set.atoms.iter().zip(honest.atoms.iter()) {
            assert_eq!(a.term_key(), b.term_key());
            let expect_suppressed = a.kind == AtomKind::Interference && a.block >= 2;
            assert_eq!(a.suppressed, expect_suppressed);
            assert_eq!(b.suppressed, false);
        }
    }

    #[test]
    fn single_message_is_free_retrieval() {
        // m = 1: one combination, block 1 only, rate 1.
        let set = qs(3, 2, 1, 2, 0);
        assert_eq!(set.params.v, 1);
        assert_eq!(set.downloaded().count(), set.params.l());
        assert!(set.atoms.iter().all(|a| a.block == 1 && !a.eliminated));
    }

    #[test]
    fn ternary_census_and_elimination() {
        // (3, 2, 2, 3): v = 4, withheld types are the two non-plain
        // singletons and the non-plain pair.
        let params = SchemeParams::new(3, 2, 2, 3).unwrap();
        for nu in 0..4 {
            let set = QuerySet::generate_default(&params, nu).unwrap();
            assert_eq!(set.downloaded().count() as u128, params.total_download());
            assert_eq!(set.downloaded().count(), 270);
            let eliminated_b1 = set
                .atoms
                .iter()
                .filter(|a| a.eliminated && a.block == 1 && a.round == 1)
                .count();
            // Two withheld singleton types, 8 instances, 3 databases.
            assert_eq!(eliminated_b1, 2 * 8 * 3);
            let eliminated_b2 = set
                .atoms
                .iter()
                .filter(|a| a.eliminated && a.block == 2 && a.round == 1)
                .count();
            // One withheld pair type, 4 instances, 3 databases.
            assert_eq!(eliminated_b2, 1 * 4 * 3);
        }
    }

    #[test]
    fn rejects_bad_target() {
        let params = SchemeParams::new(3, 2, 2, 2).unwrap();
        assert!(matches!(
            QuerySet::generate_default(&params, 3),
            Err(Error::CombinationIndex { .. })
        ));
    }
}
