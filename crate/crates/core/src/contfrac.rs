//! Continued fractions `α = [0; α_1, α_2, ...]`, convergents `p_l/q_l`,
//! and the location of a scale `M` between consecutive denominators.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{floor_surd, AlphaSpec};

/// How the digit list continues past its stored part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tail {
    /// Rational α; the stored digits are the whole expansion.
    Terminates,
    /// `digits[start..start + len]` repeats forever.
    Periodic { start: usize, len: usize },
    /// A truncated stream; nothing is known beyond the stored digits.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuedFraction {
    digits: Vec<u64>,
    tail: Tail,
    /// `(p_l, q_l)` for `l = 0..=digits.len()`, starting at `(0, 1)`.
    convergents: Vec<(BigUint, BigUint)>,
}

impl ContinuedFraction {
    fn from_digits(digits: Vec<u64>, tail: Tail) -> Self {
        let convergents = convergent_list(&digits);
        ContinuedFraction {
            digits,
            tail,
            convergents,
        }
    }

    /// Partial quotients `α_1, α_2, ...` as stored.
    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn stored_convergents(&self) -> &[(BigUint, BigUint)] {
        &self.convergents
    }

    /// `α_l` for `l ≥ 1`, following a known period past the stored digits.
    pub fn digit(&self, l: usize) -> Option<u64> {
        if l == 0 {
            return Some(0);
        }
        if l <= self.digits.len() {
            return Some(self.digits[l - 1]);
        }
        match self.tail {
            Tail::Periodic { start, len } => Some(self.digits[start + (l - 1 - start) % len]),
            _ => None,
        }
    }

    /// Period `(start, digits)` if the expansion is known to be periodic.
    pub fn period(&self) -> Option<&[u64]> {
        match self.tail {
            Tail::Periodic { start, len } => Some(&self.digits[start..start + len]),
            _ => None,
        }
    }
}

fn convergent_list(digits: &[u64]) -> Vec<(BigUint, BigUint)> {
    let mut out = Vec::with_capacity(digits.len() + 1);
    let (mut p2, mut p1) = (BigUint::one(), BigUint::zero());
    let (mut q2, mut q1) = (BigUint::zero(), BigUint::one());
    out.push((p1.clone(), q1.clone()));
    for &a in digits {
        let a = BigUint::from(a);
        let p = &a * &p1 + &p2;
        let q = &a * &q1 + &q2;
        p2 = std::mem::replace(&mut p1, p);
        q2 = std::mem::replace(&mut q1, q);
        out.push((p1.clone(), q1.clone()));
    }
    out
}

/// Expands α into at most `max_terms` partial quotients.
///
/// Rationals use the Euclidean algorithm and stop at their last digit.
/// Quadratic surds use the exact `(P, Q)` recurrence and record the period
/// once a state repeats. Truncated digit streams are taken as given.
pub fn cf_expand(spec: &AlphaSpec, max_terms: usize) -> Result<ContinuedFraction> {
    match spec {
        AlphaSpec::Rational { p, q } => {
            let mut digits = Vec::new();
            let (mut num, mut den) = (q.clone(), p.clone());
            while !den.is_zero() && digits.len() < max_terms {
                let (a, r) = num.div_rem(&den);
                digits.push(a.to_u64().ok_or(Error::DigitOverflow)?);
                num = std::mem::replace(&mut den, r);
            }
            let tail = if den.is_zero() {
                Tail::Terminates
            } else {
                Tail::Unknown
            };
            Ok(ContinuedFraction::from_digits(digits, tail))
        }
        AlphaSpec::Quadratic { p, q, d } => expand_surd(p, q, d, max_terms),
        AlphaSpec::CfDigits { prefix, period } => {
            if period.is_empty() {
                let digits: Vec<u64> = prefix.iter().copied().take(max_terms).collect();
                return Ok(ContinuedFraction::from_digits(digits, Tail::Unknown));
            }
            let start = prefix.len();
            let mut digits = prefix.clone();
            digits.extend_from_slice(period);
            let tail = Tail::Periodic {
                start,
                len: period.len(),
            };
            let mut cf = ContinuedFraction::from_digits(digits, tail);
            if cf.digits.len() < max_terms {
                let extra: Vec<u64> = (cf.digits.len() + 1..=max_terms)
                    .filter_map(|l| cf.digit(l))
                    .collect();
                cf.digits.extend(extra);
                cf.convergents = convergent_list(&cf.digits);
            } else {
                cf.digits.truncate(max_terms.max(start + period.len()));
                cf.convergents = convergent_list(&cf.digits);
            }
            Ok(cf)
        }
    }
}

fn expand_surd(p: &BigInt, q: &BigInt, d: &BigUint, max_terms: usize) -> Result<ContinuedFraction> {
    let mut p = p.clone();
    let mut q = q.clone();
    let mut d = BigInt::from(d.clone());
    // The recurrence needs Q | D − P².
    if !(&d - &p * &p).is_multiple_of(&q) {
        let qa = q.abs();
        p *= &qa;
        d *= &q * &q;
        q *= &qa;
    }
    let s = d.sqrt();
    let mut seen: HashMap<(BigInt, BigInt), usize> = HashMap::new();
    let mut digits = Vec::new();
    let mut tail = Tail::Unknown;
    // x_0 = α has integer part 0; x_{k+1} = 1 / (x_k − a_k).
    let mut a = floor_surd(&p, &q, &s);
    debug_assert!(a.is_zero());
    loop {
        let pn = &a * &q - &p;
        let qn = (&d - &pn * &pn) / &q;
        p = pn;
        q = qn;
        let idx = digits.len();
        if let Some(&start) = seen.get(&(p.clone(), q.clone())) {
            tail = Tail::Periodic {
                start,
                len: idx - start,
            };
            break;
        }
        if idx >= max_terms {
            break;
        }
        seen.insert((p.clone(), q.clone()), idx);
        a = floor_surd(&p, &q, &s);
        digits.push(a.to_u64().ok_or(Error::DigitOverflow)?);
    }
    let mut cf = ContinuedFraction::from_digits(digits, tail);
    if matches!(tail, Tail::Periodic { .. }) && cf.digits.len() < max_terms {
        let extra: Vec<u64> = (cf.digits.len() + 1..=max_terms)
            .filter_map(|l| cf.digit(l))
            .collect();
        cf.digits.extend(extra);
        cf.convergents = convergent_list(&cf.digits);
    }
    Ok(cf)
}

/// The first `count` convergents `(p_l, q_l)`, `l = 0..count`.
///
/// A terminating expansion yields at most its own length; a periodic one is
/// continued along its period.
pub fn convergents(cf: &ContinuedFraction, count: usize) -> Result<Vec<(BigUint, BigUint)>> {
    if count <= cf.convergents.len() {
        return Ok(cf.convergents[..count].to_vec());
    }
    match cf.tail {
        Tail::Terminates => Ok(cf.convergents.clone()),
        Tail::Unknown => Err(Error::DigitStreamExhausted {
            needed: count - 1,
            available: cf.digits.len(),
        }),
        Tail::Periodic { .. } => {
            let digits: Vec<u64> = (1..count).map(|l| cf.digit(l).expect("periodic")).collect();
            Ok(convergent_list(&digits))
        }
    }
}

/// `q_l ≤ M < q_{l+1}` together with `b = ⌊M / q_l⌋` and `a = α_{l+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScaleLocation {
    pub m: u64,
    pub l: usize,
    pub p: u64,
    pub q: u64,
    pub q_prev: u64,
    pub q_next: u128,
    pub a: u64,
    pub b: u64,
    pub even: bool,
    /// `b = a`, which the bundle theory treats as a limiting case.
    pub boundary: bool,
}

/// Finds the convergent denominator bracketing `M`.
pub fn locate_scale(cf: &ContinuedFraction, m: u64) -> Result<ScaleLocation> {
    if m == 0 {
        return Err(Error::InvalidArgument("scale M must be at least 1".into()));
    }
    let (mut p_prev, mut p) = (1u128, 0u128);
    let (mut q_prev, mut q) = (0u128, 1u128);
    let mut l = 0usize;
    loop {
        let Some(a) = cf.digit(l + 1) else {
            return Err(Error::DigitStreamExhausted {
                needed: l + 1,
                available: cf.digits.len(),
            });
        };
        let a = a as u128;
        let q_next = a * q + q_prev;
        if q_next > m as u128 {
            let b = (m as u128 / q) as u64;
            return Ok(ScaleLocation {
                m,
                l,
                p: p as u64,
                q: q as u64,
                q_prev: q_prev as u64,
                q_next,
                a: a as u64,
                b,
                even: l.is_multiple_of(2),
                boundary: b as u128 == a,
            });
        }
        let p_next = a * p + p_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        l += 1;
    }
}
