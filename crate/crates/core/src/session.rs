//! One full retrieval, end to end, with a replayable transcript.
//!
//! A session derives its private assignment from the session seed,
//! generates and lowers the queries, sends one matrix to each database
//! over whatever transport is at hand, decodes the answers, and
//! records everything that crossed the wire. Two sessions with the
//! same seed produce byte-identical transcripts regardless of the
//! transport.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::combos::{enumerate_combinations, IndexAssignment};
use crate::decoder::decode;
use crate::error::Result;
use crate::field::{ratio, ratio_string, PrimeField};
use crate::lower::{lower_queries, QueryMatrix};
use crate::mds::GeneratorMatrix;
use crate::params::SchemeParams;
use crate::protocol::{AnswerString, Transport};
use crate::query::{QueryGenOptions, QuerySet};

/// Everything observable about one retrieval run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub params: SchemeParams,
    /// Retrieved combination, 0-based index into the canonical list.
    pub nu: usize,
    /// Its coefficient vector over the messages.
    pub coefficients: Vec<u64>,
    pub seed: u64,
    /// Sub-seed the private assignment was drawn from.
    pub assignment_seed: u64,
    pub matrices: Vec<QueryMatrix>,
    pub answers: Vec<AnswerString>,
    /// The retrieved combination's symbols in storage order.
    pub decoded: Vec<u64>,
    /// Total field elements downloaded.
    pub download: usize,
    /// Retrieved symbols over downloaded symbols, exact.
    pub rate: String,
}

impl SessionTranscript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs one retrieval of combination `nu` through `transport`.
pub fn run_session(
    params: &SchemeParams,
    nu: usize,
    seed: u64,
    generator: &GeneratorMatrix,
    transport: &mut dyn Transport,
    options: QueryGenOptions,
) -> Result<SessionTranscript> {
    let assignment_seed = ChaCha20Rng::seed_from_u64(seed).random::<u64>();
    let assignment = IndexAssignment::random(params.l_tilde, assignment_seed);
    let set = QuerySet::generate(params, nu, options)?;
    let matrices = lower_queries(&set, &assignment)?;
    let mut answers: Vec<AnswerString> = Vec::with_capacity(params.n);
    for (db, matrix) in matrices.iter().enumerate() {
        answers.push(transport.send_query(db, matrix)?);
    }
    let decoded = decode(&set, &assignment, generator, &matrices, &answers)?;
    let download: usize = answers.iter().map(|a| a.elements.len()).sum();
    let field = PrimeField::new(params.q)?;
    let coefficients = enumerate_combinations(&field, params.m_count)[nu].coeffs.clone();
    Ok(SessionTranscript {
        params: *params,
        nu,
        coefficients,
        seed,
        assignment_seed,
        matrices,
        answers,
        decoded,
        download,
        rate: ratio_string(&ratio(params.l() as i128, download as i128)),
    })
}

// ====================================================================
// Tests
// ====================================================================
