//! `pfrlab`: command-line laboratory for private retrieval of message
//! combinations from MDS-coded databases.
//!
//! Subcommands build storage generators, run retrieval sessions over
//! in-process or socket transports, audit rate and privacy, and print
//! the fully worked two-message example. Every command renders a
//! human-readable report by default and a JSON document with `--json`
//! (or to a file with `--out`). A plain-text `key=value` config file
//! supplies defaults; explicit flags always win.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pfr_core::field::{ratio, ratio_string};
use pfr_core::{
    achievable_rate, baseline_rates, build_cyclic_generator, build_generator, encode_shards,
    enumerate_combinations, rate_report, run_session, statistical_privacy, structural_privacy,
    Atom, GeneratorMatrix, GeneratorProfile, InProcessTransport, MessageStore, PrimeField,
    QueryGenOptions, QuerySet, SchemeParams, SocketNodes, ViewKind,
};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

// ====================================================================
// Arguments
// ====================================================================

#[derive(Parser)]
#[command(
    name = "pfrlab",
    version,
    about = "Private retrieval of message combinations from MDS-coded databases"
)]
struct Cli {
    /// Plain-text key=value file supplying flag defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the JSON report instead of the human-readable table.
    #[arg(long, global = true)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and verify a generator matrix for the storage code.
    GenCode {
        /// Number of databases.
        #[arg(long)]
        n: Option<usize>,
        /// Code dimension (symbols per segment).
        #[arg(long)]
        k: Option<usize>,
        /// Field size (prime).
        #[arg(long)]
        q: Option<u64>,
    },
    /// Run one private retrieval session end to end.
    Run {
        /// Number of databases.
        #[arg(long)]
        n: Option<usize>,
        /// Code dimension.
        #[arg(long)]
        k: Option<usize>,
        /// Number of stored messages.
        #[arg(long)]
        m: Option<usize>,
        /// Field size (prime).
        #[arg(long)]
        q: Option<u64>,
        /// Desired combination (1-based, up to (q^m - 1)/(q - 1)).
        #[arg(long)]
        nu: Option<usize>,
        /// Seed for the message fill and the private assignment.
        #[arg(long)]
        seed: Option<u64>,
        /// How the client reaches the database nodes.
        #[arg(long, value_enum)]
        transport: Option<TransportKind>,
    },
    /// Audit query privacy, structurally and statistically.
    AuditPrivacy {
        /// Number of databases.
        #[arg(long)]
        n: Option<usize>,
        /// Code dimension.
        #[arg(long)]
        k: Option<usize>,
        /// Number of stored messages.
        #[arg(long)]
        m: Option<usize>,
        /// Field size (prime).
        #[arg(long)]
        q: Option<u64>,
        /// Sampled assignments per target pair (at least 100).
        #[arg(long)]
        samples: Option<usize>,
        /// Sampling seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate exact download rates for a grid of parameter sets.
    RateTable {
        /// File of whitespace-separated `N K M q` lines (# comments).
        #[arg(long, value_name = "FILE")]
        grid: Option<PathBuf>,
    },
    /// Print the fully worked two-message example session.
    ExampleTable1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransportKind {
    /// Database nodes as in-process evaluators.
    Inproc,
    /// Database nodes behind local TCP sockets.
    Socket,
}

// ====================================================================
// Config file
// ====================================================================

const CONFIG_KEYS: [&str; 9] = ["n", "k", "m", "q", "nu", "seed", "samples", "transport", "grid"];

struct Settings(BTreeMap<String, String>);

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .with_context(|| format!("config line {}: expected key=value", lineno + 1))?;
                let key = key.trim().to_string();
                if !CONFIG_KEYS.contains(&key.as_str()) {
                    bail!(
                        "config line {}: unknown key `{key}` (known: {})",
                        lineno + 1,
                        CONFIG_KEYS.join(", ")
                    );
                }
                map.insert(key, value.trim().to_string());
            }
        }
        Ok(Settings(map))
    }

    /// Flag value, else config value, else the built-in default.
    fn resolve<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`: {e}")),
            None => Ok(default),
        }
    }

    fn resolve_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.0.get(key).map(PathBuf::from))
    }

    fn resolve_transport(&self, flag: Option<TransportKind>) -> Result<TransportKind> {
        if let Some(t) = flag {
            return Ok(t);
        }
        match self.0.get("transport").map(String::as_str) {
            None | Some("inproc") => Ok(TransportKind::Inproc),
            Some("socket") => Ok(TransportKind::Socket),
            Some(other) => bail!("config key `transport`: expected inproc or socket, got `{other}`"),
        }
    }
}

// ====================================================================
// Reports
// ====================================================================

struct Report {
    human: String,
    json: serde_json::Value,
    /// False when an audit verdict failed; the process exits nonzero.
    ok: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let settings = Settings::load(cli.config.as_deref())?;
    let report = match cli.command {
        Command::GenCode { n, k, q } => gen_code(&settings, n, k, q)?,
        Command::Run { n, k, m, q, nu, seed, transport } => {
            run(&settings, n, k, m, q, nu, seed, transport)?
        }
        Command::AuditPrivacy { n, k, m, q, samples, seed } => {
            audit_privacy(&settings, n, k, m, q, samples, seed)?
        }
        Command::RateTable { grid } => rate_table(&settings, grid)?,
        Command::ExampleTable1 => example_table1()?,
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report.json)?);
    } else {
        print!("{}", report.human);
    }
    if let Some(path) = &cli.out {
        fs::write(path, serde_json::to_string_pretty(&report.json)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if !report.ok {
        std::process::exit(2);
    }
    Ok(())
}

/// Full MDS generator when the field admits one, else the cyclic-window
/// construction the protocol can still decode against.
fn best_generator(n: usize, k: usize, q: u64) -> Result<(GeneratorMatrix, GeneratorProfile)> {
    match build_generator(n, k, q) {
        Ok(g) => Ok((g, GeneratorProfile::Mds)),
        Err(first) => build_cyclic_generator(n, k, q)
            .map_err(|e| anyhow::anyhow!("no usable generator: {first}; cyclic fallback: {e}")),
    }
}

fn profile_name(profile: GeneratorProfile) -> &'static str {
    match profile {
        GeneratorProfile::Mds => "mds",
        GeneratorProfile::CyclicWindows => "cyclic-windows",
    }
}

// ====================================================================
// gen-code
// ====================================================================

fn gen_code(s: &Settings, n: Option<usize>, k: Option<usize>, q: Option<u64>) -> Result<Report> {
    let n = s.resolve(n, "n", 3)?;
    let k = s.resolve(k, "k", 2)?;
    let q = s.resolve(q, "q", 2)?;
    let (generator, profile) = best_generator(n, k, q)?;
    let verified = match profile {
        GeneratorProfile::Mds => pfr_core::verify_mds(&generator)?,
        GeneratorProfile::CyclicWindows => pfr_core::verify_cyclic_windows(&generator)?,
    };
    let rows: Vec<Vec<u64>> =
        (0..k).map(|r| (0..n).map(|c| generator.get(r, c)).collect()).collect();

    let mut human = String::new();
    writeln!(human, "generator for ({n}, {k}) storage over F_{q}")?;
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:>3}")).collect();
        writeln!(human, "  [{}]", cells.join(" "))?;
    }
    writeln!(human, "profile:  {}", profile_name(profile))?;
    if profile == GeneratorProfile::CyclicWindows {
        writeln!(
            human,
            "note:     F_{q} admits no full ({n}, {k}) MDS code; every window of {k} \
             consecutive databases is still invertible, which the protocol needs"
        )?;
    }
    writeln!(human, "verified: {verified}")?;

    Ok(Report {
        human,
        json: json!({
            "n": n, "k": k, "q": q,
            "profile": profile_name(profile),
            "verified": verified,
            "rows": rows,
        }),
        ok: verified,
    })
}

// ====================================================================
// run
// ====================================================================

#[allow(clippy::too_many_arguments)]
fn run(
    s: &Settings,
    n: Option<usize>,
    k: Option<usize>,
    m: Option<usize>,
    q: Option<u64>,
    nu: Option<usize>,
    seed: Option<u64>,
    transport: Option<TransportKind>,
) -> Result<Report> {
    let n = s.resolve(n, "n", 3)?;
    let k = s.resolve(k, "k", 2)?;
    let m = s.resolve(m, "m", 2)?;
    let q = s.resolve(q, "q", 2)?;
    let params = SchemeParams::new(n, k, m, q)?;
    let nu = s.resolve(nu, "nu", 3.min(params.v))?;
    let seed = s.resolve(seed, "seed", 7)?;
    let kind = s.resolve_transport(transport)?;
    if nu == 0 || nu > params.v {
        bail!("--nu must lie in 1..={} for these parameters, got {nu}", params.v);
    }

    let field = PrimeField::new(q)?;
    let (generator, profile) = best_generator(n, k, q)?;
    // One public seed drives both the message fill and (inside the
    // session) the private assignment, so runs are reproducible.
    let store = MessageStore::random(&field, m, params.l_tilde, k, seed ^ 0x9e37_79b9);
    let shards = encode_shards(&store, &generator)?;

    let transcript = match kind {
        TransportKind::Inproc => {
            let mut t = InProcessTransport::new(shards);
            run_session(&params, nu - 1, seed, &generator, &mut t, QueryGenOptions::default())?
        }
        TransportKind::Socket => {
            let nodes = SocketNodes::spawn(shards)?;
            let mut t = nodes.transport();
            let out =
                run_session(&params, nu - 1, seed, &generator, &mut t, QueryGenOptions::default());
            nodes.shutdown()?;
            out?
        }
    };

    // The laboratory holds the plaintext, so check the decode outright.
    let combos = enumerate_combinations(&field, m);
    let mut expected = Vec::with_capacity(params.l());
    for t in 0..params.l_tilde {
        expected.extend(pfr_core::virtual_symbol(&store, &combos[nu - 1], t)?);
    }
    let verified = transcript.decoded == expected;

    let per_db: Vec<usize> = transcript.answers.iter().map(|a| a.elements.len()).collect();
    let mut human = String::new();
    writeln!(human, "retrieval of combination {nu} of {} over F_{q}", params.v)?;
    writeln!(human, "  coefficients: {:?}", transcript.coefficients)?;
    writeln!(human, "  storage:      ({n}, {k}) code, {} profile, {m} messages", profile_name(profile))?;
    writeln!(human, "  transport:    {}", if kind == TransportKind::Inproc { "in-process" } else { "socket" })?;
    writeln!(human, "  seed:         {seed}")?;
    writeln!(human, "  download:     {} symbols {per_db:?}", transcript.download)?;
    writeln!(human, "  retrieved:    {} symbols", transcript.decoded.len())?;
    writeln!(human, "  rate:         {}", transcript.rate)?;
    writeln!(human, "  verified:     {verified}")?;

    let json = json!({
        "transcript": transcript,
        "profile": profile_name(profile),
        "verified": verified,
    });
    Ok(Report { human, json, ok: verified })
}

// ====================================================================
// audit-privacy
// ====================================================================

fn audit_privacy(
    s: &Settings,
    n: Option<usize>,
    k: Option<usize>,
    m: Option<usize>,
    q: Option<u64>,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<Report> {
    let n = s.resolve(n, "n", 3)?;
    let k = s.resolve(k, "k", 2)?;
    let m = s.resolve(m, "m", 2)?;
    let q = s.resolve(q, "q", 2)?;
    let samples = s.resolve(samples, "samples", 1000)?;
    let seed = s.resolve(seed, "seed", 7)?;
    let params = SchemeParams::new(n, k, m, q)?;
    let honest = QueryGenOptions::default();
    let budget = ratio(1, 20);

    // Structural: identical per-database fingerprints across targets.
    let structural = structural_privacy(&params, honest)?;

    // Statistical: sampled total-variation distance between the
    // lowered-matrix views of every target pair, per database.
    let mut stat_rows = Vec::new();
    let mut stat_json = Vec::new();
    let mut worst = ratio(0, 1);
    for view in [ViewKind::LeadRow, ViewKind::OrderTrace] {
        for a in 0..params.v {
            for b in (a + 1)..params.v {
                let rep = statistical_privacy(&params, a, b, samples, view, seed, honest)?;
                let tv = rep.max_tv();
                if tv > worst {
                    worst = tv.clone();
                }
                stat_rows.push((view, a + 1, b + 1, ratio_string(&tv)));
                stat_json.push(rep.to_json());
            }
        }
    }
    let statistical_ok = worst <= budget;

    // Negative controls: the audits must notice deliberate leaks.
    let crippled = structural_privacy(
        &params,
        QueryGenOptions { disable_m_sym: true, leak_row_order: false },
    )?;
    let leaky = statistical_privacy(
        &params,
        0,
        1.min(params.v - 1),
        samples,
        ViewKind::OrderTrace,
        seed,
        QueryGenOptions { disable_m_sym: false, leak_row_order: true },
    )?;
    let controls_ok = !crippled.uniform && leaky.max_tv() >= ratio(1, 2);

    let ok = structural.uniform && statistical_ok && controls_ok;
    let mut human = String::new();
    writeln!(human, "privacy audit for ({n}, {k}) storage, {m} messages over F_{q}")?;
    writeln!(
        human,
        "structural:  fingerprints {} across all {} targets",
        if structural.uniform { "identical" } else { "DIFFER" },
        params.v
    )?;
    writeln!(human, "statistical: {samples} sampled assignments per pair, budget 1/20")?;
    for (view, a, b, tv) in &stat_rows {
        writeln!(human, "  {:<11} targets {a} x {b}: max per-db distance {tv}", format!("{view:?}"))?;
    }
    writeln!(
        human,
        "controls:    symmetry-disabled fingerprints {}, row-order leak distance {}",
        if crippled.uniform { "STILL UNIFORM" } else { "differ (expected)" },
        ratio_string(&leaky.max_tv())
    )?;
    writeln!(human, "verdict:     {}", if ok { "PASS" } else { "FAIL" })?;

    let json = json!({
        "params": params,
        "structural": structural,
        "statistical": stat_json,
        "controls": {
            "disable_m_sym_uniform": crippled.uniform,
            "leak_row_order_distance": ratio_string(&leaky.max_tv()),
        },
        "verdict": if ok { "pass" } else { "fail" },
    });
    Ok(Report { human, json, ok })
}

// ====================================================================
// rate-table
// ====================================================================

fn rate_table(s: &Settings, grid: Option<PathBuf>) -> Result<Report> {
    let path = s
        .resolve_path(grid, "grid")
        .context("rate-table needs --grid <file> (or `grid=` in the config)")?;
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading grid {}", path.display()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            bail!("grid line {}: expected `N K M q`, got `{line}`", lineno + 1);
        }
        let n: usize = fields[0].parse().context("N")?;
        let k: usize = fields[1].parse().context("K")?;
        let m: usize = fields[2].parse().context("M")?;
        let q: u64 = fields[3].parse().context("q")?;
        rows.push((n, k, m, q));
    }
    if rows.is_empty() {
        bail!("grid {} holds no parameter sets", path.display());
    }

    let mut human = String::new();
    writeln!(
        human,
        "{:>3} {:>3} {:>3} {:>3} {:>3} {:>9} {:>9} {:>8} {:>10} {:>8}",
        "N", "K", "M", "q", "V", "L", "D", "rate", "baseline", "gain"
    )?;
    let mut reports = Vec::new();
    for (n, k, m, q) in rows {
        let params = SchemeParams::new(n, k, m, q)?;
        let set = QuerySet::generate_default(&params, 0)?;
        let report = rate_report(&set)?;
        let baseline = baseline_rates(&params);
        let gain = &achievable_rate(n, k, m) / &achievable_rate(n, k, params.v);
        writeln!(
            human,
            "{:>3} {:>3} {:>3} {:>3} {:>3} {:>9} {:>9} {:>8} {:>10} {:>8}",
            n,
            k,
            m,
            q,
            params.v,
            report.l,
            report.download_counted,
            report.achieved_rate,
            baseline.baseline_rate,
            ratio_string(&gain),
        )?;
        reports.push(json!({ "rate": report, "baseline": baseline }));
    }
    Ok(Report { human, json: json!(reports), ok: true })
}

// ====================================================================
// example-table1
// ====================================================================

/// Renders a queried sum like `a17 - b19 + c25`: one letter per
/// combination, 1-based slot.
fn sum_label(atom: &Atom) -> String {
    let mut out = String::new();
    for (i, term) in atom.terms.iter().enumerate() {
        let letter = (b'a' + term.combo as u8) as char;
        if i == 0 {
            if term.sign < 0 {
                out.push('-');
            }
        } else {
            out.push_str(if term.sign < 0 { " - " } else { " + " });
        }
        write!(out, "{letter}{}", term.slot + 1).unwrap();
    }
    out
}

fn example_table1() -> Result<Report> {
    let params = SchemeParams::new(3, 2, 2, 2)?;
    // The worked example retrieves the third combination (the parity
    // a + b) with the identity assignment, so slots read off directly.
    let set = QuerySet::generate_default(&params, 2)?;

    const WIDTH: usize = 22;
    let mut human = String::new();
    writeln!(
        human,
        "worked example: ({}, {}) storage, {} messages over F_{}, combination 3 = a + b",
        params.n, params.k, params.m_count, params.q
    )?;
    writeln!(human, "identity assignment; slots are 1-based; letters a, b, c name the combinations")?;
    writeln!(human)?;
    let header: Vec<String> = (1..=3).map(|db| format!("{:^WIDTH$}", format!("DB{db}"))).collect();
    writeln!(human, "        {}", header.join(" "))?;
    let mut cells_json = Vec::new();
    for round in 1..=params.k {
        writeln!(human, "round {round}")?;
        for block in 1..=params.v {
            let cells: Vec<Vec<String>> = (0..params.n)
                .map(|db| {
                    let atoms: Vec<&Atom> = set
                        .cell(db, round, block)
                        .into_iter()
                        .filter(|a| a.downloaded())
                        .collect();
                    cells_json.push(json!({
                        "db": db + 1,
                        "round": round,
                        "block": block,
                        "sums": atoms.iter().map(|a| sum_label(a)).collect::<Vec<_>>(),
                    }));
                    atoms.iter().map(|a| sum_label(a)).collect()
                })
                .collect();
            let height = cells.iter().map(Vec::len).max().unwrap_or(0);
            for line in 0..height {
                let label = if line == 0 { format!("block {block}") } else { String::new() };
                let row: Vec<String> = cells
                    .iter()
                    .map(|c| format!("{:^WIDTH$}", c.get(line).map(String::as_str).unwrap_or("")))
                    .collect();
                writeln!(human, "{label:<8}{}", row.join(" "))?;
            }
        }
    }
    let report = rate_report(&set)?;
    writeln!(human)?;
    writeln!(
        human,
        "download: {} symbols per database ({} overall), desired {} symbols, rate {}",
        report.download_counted / params.n as u64,
        report.download_counted,
        report.l,
        report.achieved_rate
    )?;

    let json = json!({
        "params": params,
        "nu": 3,
        "cells": cells_json,
        "l": report.l,
        "download": report.download_counted,
        "rate": report.achieved_rate,
    });
    Ok(Report { human, json, ok: true })
}
