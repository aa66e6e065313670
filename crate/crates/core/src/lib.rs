//! A deterministic laboratory for private retrieval of linear message
//! combinations from MDS-coded databases.
//!
//! `m` messages are stored across `n` databases with an `(n, k)` MDS
//! code over a prime field `F_q`. A user wants one of the
//! `v = (q^m - 1)/(q - 1)` canonical linear combinations of the
//! messages without revealing which one. The crate builds the query
//! structures, runs the retrieval end to end against in-process or
//! socket database nodes, decodes the answers, and audits both the
//! download rate (exactly, in rational arithmetic) and the privacy of
//! the queries (structurally and statistically).

pub mod audit;
pub mod canon;
pub mod combos;
pub mod decoder;
pub mod error;
pub mod field;
pub mod linalg;
pub mod lower;
pub mod mds;
pub mod params;
pub mod protocol;
pub mod query;
pub mod session;
pub mod signs;

pub use audit::{
    baseline_rates, outer_bound_pair, rate_report, statistical_privacy, structural_privacy,
    BaselineReport, BlockCensus, RateReport, StatisticalPrivacyReport, StructuralPrivacyReport,
    ViewKind,
};
pub use canon::{lead_row_view, order_trace_view, row_class, structural_fingerprint};
pub use combos::{
    combination_count, enumerate_combinations, permuted_symbol, virtual_symbol,
    CombinationVector, IndexAssignment,
};
pub use decoder::{decode, decode_with_audit, DecodeAudit};
pub use error::{Error, Result};
pub use field::{is_prime, FieldElement, PrimeField, Rational};
pub use linalg::{express_in_span, FqMatrix};
pub use lower::{atom_row, lower_queries, QueryMatrix};
pub use mds::{
    build_cyclic_generator, build_generator, decode_segment, encode_shards, export_shard,
    import_shard, verify_cyclic_windows, verify_mds, DatabaseShard, GeneratorMatrix,
    GeneratorProfile, MessageStore,
};
pub use params::{achievable_rate, binomial, verify_rate_identities, SchemeParams};
pub use protocol::{
    evaluate_answer, AnswerString, InProcessTransport, SocketNodes, SocketTransport, Transport,
};
pub use query::{Atom, AtomKind, QueryGenOptions, QuerySet, Term};
pub use session::{run_session, SessionTranscript};
pub use signs::{block_types, build_sign_plan, subsets_lex, type_retained, SignPlan};
