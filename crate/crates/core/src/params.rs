//! Scheme parameters and the exact counting identities behind the
//! achievable download rate.

use num::{BigInt, BigRational, One};
use serde::{Deserialize, Serialize};

use crate::combos::combination_count;
use crate::error::{Error, Result};
use crate::field::{is_prime, Rational};

/// Largest segment space the laboratory will materialize
/// (`l_tilde = n^v`); beyond this the run would not fit a desk machine.
pub const MAX_L_TILDE: u128 = 1 << 26;

/// Validated parameters of one retrieval configuration.
///
/// * `n` databases store an `(n, k)` coded message set over `F_q`.
/// * `m_count` messages span `v = (q^m - 1)/(q - 1)` canonical
///   combinations; the user retrieves one of these `v` targets.
/// * Each message holds `l_tilde = n^v` segments of `k` symbols, i.e.
///   `l = k * n^v` symbols in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub n: usize,
    pub k: usize,
    pub m_count: usize,
    pub q: u64,
    /// Number of canonical combinations.
    pub v: usize,
    /// Segments per message: `n^v`.
    pub l_tilde: usize,
    /// Neighbor span `n - k` used when exploiting side information.
    pub nb: usize,
}

impl SchemeParams {
    pub fn new(n: usize, k: usize, m_count: usize, q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("need at least two databases, got n={n}")));
        }
        if k == 0 || k >= n {
            // k == n leaves no room for side information (every database
            // would have to answer about the desired symbol alone), and
            // the round/neighbor machinery degenerates; reject it.
            return Err(Error::InvalidParams(format!(
                "code dimension must satisfy 1 <= k < n, got k={k}, n={n}"
            )));
        }
        if m_count == 0 {
            return Err(Error::InvalidParams("need at least one message".into()));
        }
        let v128 = combination_count(q, m_count);
        let mut l128: u128 = 1;
        for _ in 0..v128 {
            l128 = l128.checked_mul(n as u128).filter(|&x| x <= MAX_L_TILDE).ok_or_else(|| {
                Error::InvalidParams(format!(
                    "segment space n^v = {n}^{v128} exceeds the laboratory bound 2^26"
                ))
            })?;
        }
        Ok(SchemeParams {
            n,
            k,
            m_count,
            q,
            v: v128 as usize,
            l_tilde: l128 as usize,
            nb: n - k,
        })
    }

    /// Symbols per message, `l = k * n^v`.
    pub fn l(&self) -> usize {
        self.k * self.l_tilde
    }

    /// Instances of every retained sum type a database holds per round
    /// in block `b` (1-based): `k^(v-b) * nb^(b-1)`.
    pub fn r_b(&self, b: usize) -> u128 {
        debug_assert!((1..=self.v).contains(&b));
        (self.k as u128).pow((self.v - b) as u32) * (self.nb as u128).pow((b - 1) as u32)
    }

    /// Sum types of size `b` that survive the off-line reconstruction
    /// cut: all `b`-subsets of combinations except those avoiding every
    /// plain-message index.
    pub fn retained_types(&self, b: usize) -> u128 {
        binomial(self.v, b) - binomial(self.v - self.m_count, b)
    }

    /// Sum types of size `b` withheld from the download because the user
    /// can reconstruct them off-line.
    pub fn eliminated_types(&self, b: usize) -> u128 {
        binomial(self.v - self.m_count, b)
    }

    /// Retained atoms one database answers per round in block `b`.
    pub fn retained_per_db_round(&self, b: usize) -> u128 {
        self.retained_types(b) * self.r_b(b)
    }

    /// Total downloaded symbols over all databases and rounds.
    pub fn total_download(&self) -> u128 {
        let per_cell: u128 = (1..=self.v).map(|b| self.retained_per_db_round(b)).sum();
        (self.k as u128) * (self.n as u128) * per_cell
    }
}

/// Binomial coefficient with the usual convention `C(n, k) = 0` for
/// `k > n`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn big(x: u128) -> BigInt {
    BigInt::from(x)
}

/// Every intermediate identity of the download-count derivation, checked
/// as exact integers/rationals. Returns the verified `(l, d, rate)`
/// triple; errors if any link of the chain breaks.
///
/// The chain ties together four quantities:
/// 1. the census count `d = k * n * sum_b (C(v,b) - C(v-m,b)) * r_b`,
/// 2. the binomial collapse `(n-k) * sum_b ... = n^v - k^m * n^(v-m)`,
/// 3. the closed form `d = k * n * (n^v - k^m * n^(v-m)) / (n - k)`,
/// 4. the rate `l / d = (1 - k/n) / (1 - (k/n)^m)`.
pub fn verify_rate_identities(p: &SchemeParams) -> Result<(BigInt, BigInt, Rational)> {
    let (n, k, m, v) = (p.n, p.k, p.m_count, p.v);
    let nk = big((p.nb) as u128);

    // (1) census sum.
    let mut census_sum = BigInt::from(0);
    for b in 1..=v {
        census_sum += big(p.retained_types(b)) * big(p.r_b(b));
    }
    let d_census = big(p.k as u128) * big(p.n as u128) * &census_sum;
    if d_census != big(p.total_download()) {
        return Err(Error::Corrupt("census disagrees with per-block accounting".into()));
    }

    // (2) binomial collapse of the weighted sum.
    let n_v = big(n as u128).pow(v as u32);
    let k_m = big(k as u128).pow(m as u32);
    let n_vm = big(n as u128).pow((v - m) as u32);
    let collapsed = &n_v - &k_m * &n_vm;
    if &census_sum * &nk != collapsed {
        return Err(Error::Corrupt(format!(
            "weighted type sum {census_sum} * (n-k) != n^v - k^m n^(v-m) = {collapsed}"
        )));
    }

    // (3) closed form for the download, exact division.
    let d_closed_num = big(k as u128) * big(n as u128) * &collapsed;
    if &d_closed_num % &nk != BigInt::from(0) {
        return Err(Error::Corrupt("closed-form download is not an integer".into()));
    }
    let d_closed = &d_closed_num / &nk;
    if d_closed != d_census {
        return Err(Error::Corrupt(format!("closed form {d_closed} != census {d_census}")));
    }

    // (4) the counted and closed-form rates agree.
    let l = big(k as u128) * &n_v;
    let rate = BigRational::new(l.clone(), d_closed.clone());
    if rate != achievable_rate(n, k, m) {
        return Err(Error::Corrupt("counted rate differs from the closed-form rate".into()));
    }
    Ok((l, d_closed, rate))
}

/// Closed-form achievable rate `(1 - k/n) / (1 - (k/n)^m)` as an exact
/// rational.
pub fn achievable_rate(n: usize, k: usize, m: usize) -> Rational {
    let rc = BigRational::new(BigInt::from(k as u64), BigInt::from(n as u64));
    let one = BigRational::one();
    (&one - &rc) / (&one - rc_pow(&rc, m))
}

fn rc_pow(rc: &Rational, e: usize) -> Rational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= rc;
    }
    acc
}
