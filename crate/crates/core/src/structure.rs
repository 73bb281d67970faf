//! Degree-one quasi-arithmetic certificates and three counting lemmas
//! about close pairs in short intervals.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{difference_profile, EnergyProfile};
use crate::error::{Error, Result};
use crate::ratio::{ceil_to_bigint, serde_biguint, serde_ratio};
use crate::sequences::SequencePrefix;

/// How many of the most frequent differences join the candidate list.
pub const TOP_DIFFERENCES: usize = 20;

/// Frequent differences are read off at most this many leading terms.
pub const DIFFERENCE_SAMPLE: usize = 4000;

/// One checked prefix length of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertEntry {
    pub n: usize,
    /// First term of the progression.
    #[serde(with = "serde_biguint")]
    pub h: BigUint,
    /// Common difference.
    pub k: u64,
    /// Number of progression terms `L_P`.
    pub length: u64,
    /// Zero-based positions in the prefix of the certified subset.
    pub members: Vec<usize>,
    /// `|A| / N`.
    pub gamma: f64,
    /// `L_P / N`.
    pub big_gamma: f64,
}

impl CertEntry {
    pub fn subset_size(&self) -> usize {
        self.members.len()
    }

    /// `L_P / N` exactly.
    pub fn big_gamma_exact(&self) -> BigRational {
        BigRational::new(BigInt::from(self.length), BigInt::from(self.n))
    }

    /// `|A| / N` exactly.
    pub fn gamma_exact(&self) -> BigRational {
        BigRational::new(BigInt::from(self.members.len()), BigInt::from(self.n))
    }
}

/// `|A^(i)| ≥ c·N_i` elements of each prefix inside `{h + r·k : 0 ≤ r < L_P}`
/// with `L_P ≤ K·N_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiArithCertificate {
    #[serde(with = "serde_ratio")]
    pub c: BigRational,
    #[serde(rename = "K", with = "serde_ratio")]
    pub k_size: BigRational,
    pub d: u32,
    /// Also asserts `c ≤ γ ≤ 4c` and `K/4 ≤ Γ ≤ K`.
    pub normalized: bool,
    pub entries: Vec<CertEntry>,
}

impl QuasiArithCertificate {
    pub fn entry(&self, n: usize) -> Option<&CertEntry> {
        self.entries.iter().find(|e| e.n == n)
    }
}

fn ratio_usize(x: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn check_constants(c: &BigRational, k_size: &BigRational) -> Result<()> {
    if !(c.is_positive() && c <= &BigRational::one()) {
        return Err(Error::InvalidArgument("c must lie in (0, 1]".into()));
    }
    if k_size < &BigRational::one() {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    Ok(())
}

/// Re-checks membership, cardinality and size of every entry.
pub fn verify_certificate(cert: &QuasiArithCertificate, prefix: &SequencePrefix) -> Result<()> {
    let fail = |m: String| Err(Error::InvariantViolation(m));
    check_constants(&cert.c, &cert.k_size)?;
    if cert.d != 1 {
        return fail(format!("degree {} is not supported", cert.d));
    }
    for e in &cert.entries {
        if e.n == 0 || e.n > prefix.len() {
            return fail(format!("N = {} outside the prefix", e.n));
        }
        if e.k == 0 || e.length == 0 {
            return fail(format!("N = {}: empty progression", e.n));
        }
        if e.members.windows(2).any(|w| w[0] >= w[1]) || e.members.iter().any(|&i| i >= e.n) {
            return fail(format!(
                "N = {}: member positions not increasing inside the prefix",
                e.n
            ));
        }
        let k = BigUint::from(e.k);
        for &i in &e.members {
            let a = &prefix.values()[i];
            if a < &e.h
                || ((a - &e.h) % &k) != BigUint::zero()
                || (a - &e.h) / &k >= BigUint::from(e.length)
            {
                return fail(format!("N = {}: value {a} is not in the progression", e.n));
            }
        }
        let gamma = e.gamma_exact();
        let big_gamma = e.big_gamma_exact();
        if gamma < cert.c {
            return fail(format!("N = {}: |A| = {} below c·N", e.n, e.members.len()));
        }
        if big_gamma > cert.k_size {
            return fail(format!("N = {}: L_P = {} above K·N", e.n, e.length));
        }
        if cert.normalized {
            let four = BigRational::from_integer(BigInt::from(4));
            if gamma > &cert.c * &four || big_gamma * &four < cert.k_size {
                return fail(format!("N = {}: outside the normalized regime", e.n));
            }
        }
    }
    Ok(())
}

/// Searches for a progression `h + r·k` of `⌈K·N⌉` terms holding at least
/// `c·N` prefix elements. Common differences come from `1..=k_max` and the
/// most frequent differences of the prefix, tried in ascending order, then
/// residues in ascending order.
///
/// `None` means the search failed, not that no progression exists. Prefixes
/// with terms beyond 64 bits are not searched. For long prefixes the
/// frequent differences come from the first [`DIFFERENCE_SAMPLE`] terms.
pub fn detect_quasi_arithmetic_d1(
    prefix: &SequencePrefix,
    c: &BigRational,
    k_size: &BigRational,
    k_max: u64,
) -> Result<Option<QuasiArithCertificate>> {
    detect_multi(prefix, &[prefix.len()], c, k_size, k_max)
}

/// [`detect_quasi_arithmetic_d1`] over several prefix lengths; succeeds
/// only if every length yields a progression.
pub fn detect_multi(
    prefix: &SequencePrefix,
    n_list: &[usize],
    c: &BigRational,
    k_size: &BigRational,
    k_max: u64,
) -> Result<Option<QuasiArithCertificate>> {
    check_constants(c, k_size)?;
    if !prefix.is_sorted() {
        return Err(Error::InvalidArgument(
            "the detector needs a strictly increasing prefix".into(),
        ));
    }
    let mut entries = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 || n > prefix.len() {
            return Err(Error::InvalidArgument(format!(
                "N = {n} outside the prefix"
            )));
        }
        let sub = prefix.prefix(n);
        let Some(values) = sub.values_u64() else {
            return Ok(None);
        };
        let need = ceil_to_bigint(&(c * ratio_usize(n)))
            .to_u64()
            .unwrap_or(u64::MAX)
            .max(1);
        let window = ceil_to_bigint(&(k_size * ratio_usize(n)))
            .to_u64()
            .unwrap_or(u64::MAX);
        let candidates = candidate_differences(&sub, k_max)?;
        let found = candidates
            .par_iter()
            .find_map_first(|&k| best_for_difference(&values, k, window, need));
        let Some(entry) = found else {
            return Ok(None);
        };
        entries.push(entry);
    }
    let cert = QuasiArithCertificate {
        c: c.clone(),
        k_size: k_size.clone(),
        d: 1,
        normalized: false,
        entries,
    };
    verify_certificate(&cert, prefix)?;
    Ok(Some(cert))
}

fn candidate_differences(prefix: &SequencePrefix, k_max: u64) -> Result<Vec<u64>> {
    let mut ks: Vec<u64> = (1..=k_max).collect();
    if prefix.len() >= 2 {
        let profile = difference_profile(&prefix.prefix(DIFFERENCE_SAMPLE))?;
        ks.extend(
            profile
                .top_differences(TOP_DIFFERENCES)
                .into_iter()
                .filter_map(|(v, _)| v.to_u64()),
        );
    }
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

/// The first residue class mod `k` whose densest `window`-term stretch
/// holds at least `need` values.
fn best_for_difference(values: &[u64], k: u64, window: u64, need: u64) -> Option<CertEntry> {
    let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &a) in values.iter().enumerate() {
        classes.entry(a % k).or_default().push(i);
    }
    for (h, members) in classes {
        if (members.len() as u64) < need {
            continue;
        }
        let ranks: Vec<u64> = members.iter().map(|&i| (values[i] - h) / k).collect();
        // Densest stretch [ranks[lo], ranks[lo] + window − 1], earliest on ties.
        let (mut best_lo, mut best_hi, mut lo) = (0usize, 0usize, 0usize);
        for hi in 0..ranks.len() {
            while ranks[hi] - ranks[lo] >= window {
                lo += 1;
            }
            if hi + 1 - lo > best_hi - best_lo {
                best_lo = lo;
                best_hi = hi + 1;
            }
        }
        if ((best_hi - best_lo) as u64) < need {
            continue;
        }
        let first = ranks[best_lo];
        let length = ranks[best_hi - 1] - first + 1;
        let n = values.len();
        let chosen: Vec<usize> = members[best_lo..best_hi].to_vec();
        return Some(CertEntry {
            n,
            h: BigUint::from(h + first * k),
            k,
            length,
            gamma: chosen.len() as f64 / n as f64,
            big_gamma: length as f64 / n as f64,
            members: chosen,
        });
    }
    None
}

/// `E(A_N)` against the Cauchy–Schwarz floor `|A|⁴ / (2L_P − 1)` implied by
/// a certificate entry (the sumset of `A` lies in a progression of
/// `2L_P − 1` terms).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyConsistency {
    pub energy: u128,
    pub bound: f64,
    pub holds: bool,
}

pub fn energy_consistency(entry: &CertEntry, profile: &EnergyProfile) -> Result<EnergyConsistency> {
    if profile.n != entry.n || profile.energy == 0 {
        return Err(Error::InvalidArgument(
            "energy profile must be complete and match the entry's N".into(),
        ));
    }
    let w = BigUint::from(entry.members.len());
    let w4 = &w * &w * &w * &w;
    let span = BigUint::from(2 * entry.length - 1);
    let e = BigUint::from(profile.energy);
    let holds = &e * &span >= w4;
    let bound = w4.to_f64().unwrap_or(f64::INFINITY) / span.to_f64().unwrap_or(1.0);
    Ok(EnergyConsistency {
        energy: profile.energy,
        bound,
        holds,
    })
}

/// An interval `[0, B]` with tolerance `τ`, in integer units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GapConfig {
    pub b: u64,
    pub tau: u64,
}

impl GapConfig {
    fn check(&self) -> Result<u64> {
        if self.tau == 0 || 2 * self.tau > self.b {
            return Err(Error::PreconditionUnmet("need 0 < τ ≤ B/2".into()));
        }
        if !self.b.is_multiple_of(self.tau) {
            return Err(Error::PreconditionUnmet("B/τ must be an integer".into()));
        }
        Ok(self.b / self.tau)
    }
}

/// Ordered pairs `i ≠ j` with `|x_i − x_j| < τ` (strict).
pub fn count_close_pairs(points: &[u64], tau: u64) -> u64 {
    let mut xs = points.to_vec();
    xs.sort_unstable();
    let mut lo = 0usize;
    let mut total = 0u64;
    for hi in 0..xs.len() {
        while xs[hi] - xs[lo] >= tau {
            lo += 1;
        }
        total += (hi - lo) as u64;
    }
    2 * total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaOutcome {
    pub count: u64,
    #[serde(with = "serde_ratio")]
    pub bound: BigRational,
    pub holds: bool,
}

impl LemmaOutcome {
    /// `count − bound` as a float.
    pub fn margin(&self) -> f64 {
        self.count as f64 - self.bound.to_f64().unwrap_or(f64::NAN)
    }
}

/// `L = (B/τ + 1)σ` points in `[0, B]`, `σ ≥ 2`, have at least
/// `σ²B/(2τ)` ordered close pairs.
pub fn lemma1_check(config: &GapConfig, points: &[u64]) -> Result<LemmaOutcome> {
    let ratio = config.check()?;
    if points.iter().any(|&x| x > config.b) {
        return Err(Error::PreconditionUnmet("points must lie in [0, B]".into()));
    }
    let cells = ratio + 1;
    let l = points.len() as u64;
    if !l.is_multiple_of(cells) || l / cells < 2 {
        return Err(Error::PreconditionUnmet(format!(
            "L = {l} is not (B/τ + 1)σ with σ ≥ 2"
        )));
    }
    let sigma = l / cells;
    let count = count_close_pairs(points, config.tau);
    let bound = BigRational::new(
        BigInt::from(sigma * sigma) * BigInt::from(ratio),
        BigInt::from(2),
    );
    let holds = ratio_usize(count as usize) >= bound;
    Ok(LemmaOutcome {
        count,
        bound,
        holds,
    })
}

/// `q` intervals with `ΣL_i = (B/τ + 1)·q·ψ`, `ψ ≥ 3`, carry at least
/// `Bq(ψ − 2)²/(2τ)` ordered close pairs in total. `ψ` is derived from the
/// point counts.
pub fn lemma2_check(
    config: &GapConfig,
    intervals: &[Vec<u64>],
) -> Result<(LemmaOutcome, BigRational)> {
    let ratio = config.check()?;
    let q = intervals.len() as u64;
    if q == 0 {
        return Err(Error::PreconditionUnmet(
            "need at least one interval".into(),
        ));
    }
    if intervals.iter().flatten().any(|&x| x > config.b) {
        return Err(Error::PreconditionUnmet("points must lie in [0, B]".into()));
    }
    let total: u64 = intervals.iter().map(|v| v.len() as u64).sum();
    let psi = BigRational::new(BigInt::from(total), BigInt::from((ratio + 1) * q));
    if psi < BigRational::from_integer(BigInt::from(3)) {
        return Err(Error::PreconditionUnmet("ψ must be at least 3".into()));
    }
    let count: u64 = intervals
        .iter()
        .map(|v| count_close_pairs(v, config.tau))
        .sum();
    let two = BigRational::from_integer(BigInt::from(2));
    let excess = &psi - &two;
    let bound = BigRational::from_integer(BigInt::from(ratio * q)) * &excess * &excess / two;
    let holds = ratio_usize(count as usize) >= bound;
    Ok((
        LemmaOutcome {
            count,
            bound,
            holds,
        },
        psi,
    ))
}

/// Result of the frequent-gap lemma.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequentGap {
    pub value: u64,
    pub multiplicity: usize,
    /// `α²A/4`.
    #[serde(with = "serde_ratio")]
    pub bound: BigRational,
    pub holds: bool,
}

/// Default "large enough" floor `A ≥ 16/α²`.
pub fn lemma3_default_floor(alpha: &BigRational) -> BigRational {
    BigRational::from_integer(BigInt::from(16)) / (alpha * alpha)
}

/// `⌈αA⌉ − 1` positive integers with sum at most `A` contain a value
/// `Δ ≤ 4/α²` repeated at least `α²A/4` times. Returns the most frequent
/// value among those `≤ 4/α²`, smallest on ties.
///
/// `floor` is the minimum admissible `A`; `None` uses `16/α²`.
pub fn lemma3_frequent_gap(
    deltas: &[u64],
    alpha: &BigRational,
    a: u64,
    floor: Option<&BigRational>,
) -> Result<FrequentGap> {
    if !(alpha.is_positive() && alpha <= &BigRational::one()) {
        return Err(Error::PreconditionUnmet("α must lie in (0, 1]".into()));
    }
    let a_r = BigRational::from_integer(BigInt::from(a));
    let default_floor = lemma3_default_floor(alpha);
    if a_r < *floor.unwrap_or(&default_floor) {
        return Err(Error::PreconditionUnmet(format!(
            "A = {a} below the size floor"
        )));
    }
    let expected = ceil_to_bigint(&(alpha * &a_r)) - BigInt::one();
    if BigInt::from(deltas.len()) != expected {
        return Err(Error::PreconditionUnmet(format!(
            "expected ⌈αA⌉ − 1 = {expected} values, got {}",
            deltas.len()
        )));
    }
    if deltas.contains(&0) {
        return Err(Error::PreconditionUnmet("values must be positive".into()));
    }
    if deltas.iter().map(|&d| d as u128).sum::<u128>() > a as u128 {
        return Err(Error::PreconditionUnmet("sum exceeds A".into()));
    }
    let cap = BigRational::from_integer(BigInt::from(4)) / (alpha * alpha);
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &d in deltas {
        if ratio_usize(d as usize) <= cap {
            *counts.entry(d).or_default() += 1;
        }
    }
    let (value, multiplicity) = counts
        .into_iter()
        .max_by(|x, y| x.1.cmp(&y.1).then_with(|| y.0.cmp(&x.0)))
        .unwrap_or((0, 0));
    let bound = alpha * alpha * a_r / BigRational::from_integer(BigInt::from(4));
    let holds = ratio_usize(multiplicity) >= bound;
    Ok(FrequentGap {
        value,
        multiplicity,
        bound,
        holds,
    })
}
