//! Exact representations of α and error-bounded fractional parts.
//!
//! α is never taken from floating point. It is held exactly as a reduced
//! rational, a quadratic surd `(P + √D) / Q`, or a stream of partial
//! quotients, and projected onto a fixed-point fraction with `B` bits after
//! the binary point together with an explicit error bound.
//!
//! Points `{t·α}` are computed at `B` bits as `t·V mod 2^B` and then
//! truncated onto the canonical 64-bit circle grid used for all counting.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Number of guard bits added by the default precision policy.
pub const GUARD_BITS: u32 = 16;

/// Lower bound for every precision request.
pub const MIN_PRECISION_BITS: u32 = 64;

const TWO_POW_64: f64 = 18446744073709551616.0;

/// Exact description of α, always reduced modulo 1 on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlphaSpec {
    /// `p / q` with `gcd(p, q) = 1` and `0 ≤ p < q`.
    Rational { p: BigUint, q: BigUint },
    /// `(p + √d) / q` with `d` not a perfect square and the value in `(0, 1)`.
    Quadratic { p: BigInt, q: BigInt, d: BigUint },
    /// `[0; prefix..., (period...)]`; an empty `period` means the stream is
    /// a truncated, aperiodic digit list.
    CfDigits { prefix: Vec<u64>, period: Vec<u64> },
}

impl AlphaSpec {
    pub fn rational(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self> {
        let p = p.into();
        let q = q.into();
        if q.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if q.is_negative() {
            return Err(Error::InvalidAlpha(
                "rational denominator must be positive".into(),
            ));
        }
        let p = p.mod_floor(&q);
        let g = p.gcd(&q);
        let (p, q) = if g.is_zero() {
            (p, q)
        } else {
            (&p / &g, &q / &g)
        };
        let (p, q) = if p.is_zero() {
            (BigInt::zero(), BigInt::one())
        } else {
            (p, q)
        };
        Ok(AlphaSpec::Rational {
            p: p.to_biguint().expect("reduced numerator is non-negative"),
            q: q.to_biguint().expect("denominator is positive"),
        })
    }

    pub fn quadratic(
        p: impl Into<BigInt>,
        q: impl Into<BigInt>,
        d: impl Into<BigUint>,
    ) -> Result<Self> {
        let p = p.into();
        let q = q.into();
        let d = d.into();
        if q.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let s = d.sqrt();
        if &s * &s == d {
            return Err(Error::PerfectSquareD(d.to_string()));
        }
        let n = floor_surd(&p, &q, &BigInt::from(s));
        let p = p - n * &q;
        Ok(AlphaSpec::Quadratic { p, q, d })
    }

    pub fn cf(prefix: Vec<u64>, period: Vec<u64>) -> Result<Self> {
        if prefix.iter().chain(period.iter()).any(|&a| a == 0) {
            return Err(Error::InvalidAlpha("partial quotients must be >= 1".into()));
        }
        if prefix.is_empty() && period.is_empty() {
            return Err(Error::InvalidAlpha("empty digit list".into()));
        }
        Ok(AlphaSpec::CfDigits { prefix, period })
    }

    /// The golden ratio reduced mod 1, `(√5 − 1)/2`.
    pub fn golden() -> Self {
        AlphaSpec::quadratic(1, 2, 5u32).expect("5 is not a square")
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, AlphaSpec::Rational { .. })
    }

    /// Rewrites an eventually periodic digit stream as a quadratic surd.
    /// Returns `None` for other variants and for aperiodic streams.
    pub fn periodic_to_quadratic(&self) -> Option<AlphaSpec> {
        let AlphaSpec::CfDigits { prefix, period } = self else {
            return None;
        };
        if period.is_empty() {
            return None;
        }
        // y = [b1; b2, ..., bn, y]  =>  k_n y^2 + (k_{n-1} - h_n) y - h_{n-1} = 0
        let (mut h2, mut h1) = (BigInt::zero(), BigInt::one());
        let (mut k2, mut k1) = (BigInt::one(), BigInt::zero());
        for &b in period {
            let b = BigInt::from(b);
            let h = &b * &h1 + &h2;
            let k = &b * &k1 + &k2;
            h2 = std::mem::replace(&mut h1, h);
            k2 = std::mem::replace(&mut k1, k);
        }
        let u = &h1 - &k2;
        let dd = &u * &u + BigInt::from(4) * &k1 * &h2;
        let v = BigInt::from(2) * &k1;

        // alpha = (P_m y + P_{m-1}) / (Q_m y + Q_{m-1}) over [0; prefix...]
        let (mut pp, mut p) = (BigInt::one(), BigInt::zero());
        let (mut qp, mut q) = (BigInt::zero(), BigInt::one());
        for &a in prefix {
            let a = BigInt::from(a);
            let pn = &a * &p + &pp;
            let qn = &a * &q + &qp;
            pp = std::mem::replace(&mut p, pn);
            qp = std::mem::replace(&mut q, qn);
        }
        let a_ = &p * &u + &pp * &v;
        let b_ = p.clone();
        let c_ = &q * &u + &qp * &v;
        let e_ = q.clone();
        let x = &a_ * &c_ - &b_ * &e_ * &dd;
        let y = &b_ * &c_ - &a_ * &e_;
        let z = &c_ * &c_ - &e_ * &e_ * &dd;
        let (x, y, z) = if y.is_negative() {
            (-x, -y, -z)
        } else {
            (x, y, z)
        };
        let d = (&y * &y * &dd).to_biguint()?;
        AlphaSpec::quadratic(x, z, d).ok()
    }

    /// `k·α mod 1` as an exact spec.
    pub fn scaled(&self, k: &BigUint) -> Result<AlphaSpec> {
        if k.is_zero() {
            return Err(Error::InvalidArgument(
                "scale factor must be positive".into(),
            ));
        }
        match self {
            AlphaSpec::Rational { p, q } => {
                AlphaSpec::rational(BigInt::from(p * k), BigInt::from(q.clone()))
            }
            AlphaSpec::Quadratic { p, q, d } => {
                let kk = BigInt::from(k.clone());
                AlphaSpec::quadratic(p * &kk, q.clone(), d * k * k)
            }
            AlphaSpec::CfDigits { .. } => {
                if k.is_one() {
                    return Ok(self.clone());
                }
                match self.periodic_to_quadratic() {
                    Some(quad) => quad.scaled(k),
                    None => Err(Error::InvalidAlpha(
                        "a truncated aperiodic digit stream cannot be scaled exactly".into(),
                    )),
                }
            }
        }
    }

    /// A random quadratic irrational `(P + √D)/Q` with small coefficients.
    pub fn random_quadratic<R: Rng + ?Sized>(rng: &mut R) -> AlphaSpec {
        loop {
            let d: u32 = rng.gen_range(2..5000);
            let s = d.sqrt();
            if s * s == d {
                continue;
            }
            let p: i64 = rng.gen_range(-50..=50);
            let mut q: i64 = rng.gen_range(1..=50);
            if rng.gen_bool(0.5) {
                q = -q;
            }
            return AlphaSpec::quadratic(p, q, d).expect("radicand checked non-square");
        }
    }
}

/// `floor((p + √d) / q)` for non-square `d`, given `s = floor(√d)`.
pub(crate) fn floor_surd(p: &BigInt, q: &BigInt, s: &BigInt) -> BigInt {
    if q.is_positive() {
        (p + s).div_floor(q)
    } else {
        (p + s + BigInt::one()).div_floor(q)
    }
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSpec::Rational { p, q } => write!(f, "rat:{p}/{q}"),
            AlphaSpec::Quadratic { p, q, d } => write!(f, "quad:{p},{q},{d}"),
            AlphaSpec::CfDigits { prefix, period } => {
                let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
                write!(f, "cf:{}", join(prefix))?;
                if !period.is_empty() {
                    write!(f, ";{}", join(period))?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for AlphaSpec {
    type Err = Error;

    /// Grammar: `rat:p/q`, `quad:P,Q,D`, `cf:a1,a2,...[;period]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidAlpha(format!("{m}: `{s}`"));
        let (kind, body) = s.split_once(':').ok_or_else(|| bad("missing `kind:`"))?;
        match kind.trim() {
            "rat" => {
                let (p, q) = body.split_once('/').ok_or_else(|| bad("expected p/q"))?;
                let p: BigInt = p.trim().parse().map_err(|_| bad("bad numerator"))?;
                let q: BigInt = q.trim().parse().map_err(|_| bad("bad denominator"))?;
                AlphaSpec::rational(p, q)
            }
            "quad" => {
                let parts: Vec<&str> = body.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad("expected P,Q,D"));
                }
                let p: BigInt = parts[0].parse().map_err(|_| bad("bad P"))?;
                let q: BigInt = parts[1].parse().map_err(|_| bad("bad Q"))?;
                let d: BigUint = parts[2].parse().map_err(|_| bad("bad D"))?;
                AlphaSpec::quadratic(p, q, d)
            }
            "cf" => {
                let parse_list = |t: &str| -> Result<Vec<u64>> {
                    t.split(',')
                        .map(str::trim)
                        .filter(|x| !x.is_empty())
                        .map(|x| x.parse::<u64>().map_err(|_| bad("bad digit")))
                        .collect()
                };
                let (prefix, period) = match body.split_once(';') {
                    Some((a, b)) => {
                        let period = parse_list(b)?;
                        if period.is_empty() {
                            return Err(bad("declared period is empty"));
                        }
                        (parse_list(a)?, period)
                    }
                    None => (parse_list(body)?, Vec::new()),
                };
                AlphaSpec::cf(prefix, period)
            }
            _ => Err(bad("unknown kind")),
        }
    }
}

/// α mod 1 as a `bits`-bit fixed-point fraction `value / 2^bits`.
///
/// `|α mod 1 − value/2^bits| ≤ err_ulps · 2^-bits`, measured as a circle
/// distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedAlpha {
    value: BigUint,
    bits: u32,
    err_ulps: u32,
}

impl FixedAlpha {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn precision_bits(&self) -> u32 {
        self.bits
    }

    pub fn err_ulps(&self) -> u32 {
        self.err_ulps
    }

    pub fn is_exact(&self) -> bool {
        self.err_ulps == 0
    }

    pub fn error_bound(&self) -> f64 {
        self.err_ulps as f64 * 2f64.powi(-(self.bits as i32))
    }

    pub fn to_f64(&self) -> f64 {
        let top = if self.bits >= 64 {
            (&self.value >> (self.bits - 64) as usize)
                .to_u64()
                .unwrap_or(0)
        } else {
            0
        };
        top as f64 / TWO_POW_64
    }

    /// The top 128 bits of the fraction and the total error bound of that
    /// truncation (in units of 1, i.e. as a real number).
    pub fn wide(&self) -> (u128, f64) {
        let (v, truncated) = if self.bits >= 128 {
            let shift = (self.bits - 128) as usize;
            let top = (&self.value >> shift).to_u128().unwrap_or(0);
            let dropped = shift > 0
                && self
                    .value
                    .trailing_zeros()
                    .is_some_and(|z| z < shift as u64);
            (top, dropped)
        } else {
            let v = (&self.value << (128 - self.bits) as usize)
                .to_u128()
                .unwrap_or(0);
            (v, false)
        };
        let extra = if truncated { 2f64.powi(-128) } else { 0.0 };
        (v, self.error_bound() + extra)
    }
}

/// Projects α onto a `precision_bits`-bit fixed-point fraction.
pub fn resolve_alpha(spec: &AlphaSpec, precision_bits: u32) -> Result<FixedAlpha> {
    if precision_bits < MIN_PRECISION_BITS {
        return Err(Error::InvalidArgument(format!(
            "precision must be at least {MIN_PRECISION_BITS} bits"
        )));
    }
    let bits = precision_bits as usize;
    let modulus = BigUint::one() << bits;
    match spec {
        AlphaSpec::Rational { p, q } => {
            if q.is_zero() {
                return Err(Error::ZeroDenominator);
            }
            let (v, r) = (p << bits).div_rem(q);
            Ok(FixedAlpha {
                value: v % &modulus,
                bits: precision_bits,
                err_ulps: u32::from(!r.is_zero()),
            })
        }
        AlphaSpec::Quadratic { p, q, d } => {
            if q.is_zero() {
                return Err(Error::ZeroDenominator);
            }
            let (p, q, sign) = if q.is_negative() {
                (-p, -q, -1)
            } else {
                (p.clone(), q.clone(), 1)
            };
            let r = BigInt::from((d << (2 * bits)).sqrt());
            let num = (p << bits) + if sign > 0 { r } else { -r };
            let v = num.div_floor(&q).mod_floor(&BigInt::from(modulus));
            Ok(FixedAlpha {
                value: v.to_biguint().expect("mod_floor of positive modulus"),
                bits: precision_bits,
                err_ulps: 2,
            })
        }
        AlphaSpec::CfDigits { prefix, period } => {
            if !period.is_empty() {
                let quad = spec
                    .periodic_to_quadratic()
                    .ok_or_else(|| Error::InvalidAlpha("periodic stream did not convert".into()))?;
                return resolve_alpha(&quad, precision_bits);
            }
            // Truncated stream: need consecutive convergents with q_n q_{n+1} >= 2^B.
            let (mut p2, mut p1) = (BigUint::one(), BigUint::zero());
            let (mut q2, mut q1) = (BigUint::zero(), BigUint::one());
            for &a in prefix {
                let a = BigUint::from(a);
                let pn = &a * &p1 + &p2;
                let qn = &a * &q1 + &q2;
                if &q1 * &qn >= modulus {
                    let (v, _) = (&p1 << bits).div_rem(&q1);
                    return Ok(FixedAlpha {
                        value: v % &modulus,
                        bits: precision_bits,
                        err_ulps: 2,
                    });
                }
                p2 = std::mem::replace(&mut p1, pn);
                q2 = std::mem::replace(&mut q1, qn);
            }
            Err(Error::DigitStreamExhausted {
                needed: prefix.len() + 1,
                available: prefix.len(),
            })
        }
    }
}

/// A point of the circle `[0, 1)` on the 64-bit grid, `x / 2^64`, with an
/// error bound `err` against the exact real point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePoint {
    pub x: u64,
    pub err: f64,
}

impl CirclePoint {
    pub fn from_raw(x: u64) -> Self {
        CirclePoint { x, err: 0.0 }
    }

    /// `num/den mod 1`, truncated onto the grid.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let n = (num % den) as u128;
        let scaled = (n << 64) / den as u128;
        let exact = (n << 64).is_multiple_of(den as u128);
        CirclePoint {
            x: scaled as u64,
            err: if exact { 0.0 } else { 1.0 / TWO_POW_64 },
        }
    }

    /// Grid point for a float in `[0, 1)`. Floats are dyadic, so the result
    /// is exact unless the value carries bits below `2^-64`.
    pub fn from_f64(v: f64) -> Self {
        assert!((0.0..1.0).contains(&v), "point must lie in [0, 1)");
        let scaled = v * TWO_POW_64;
        let x = scaled as u64;
        let err = if scaled.fract() == 0.0 {
            0.0
        } else {
            1.0 / TWO_POW_64
        };
        CirclePoint { x, err }
    }

    pub fn value(&self) -> f64 {
        self.x as f64 / TWO_POW_64
    }
}

/// Circle distance on the grid, in units of `2^-64`.
#[inline]
pub fn circle_distance_raw(x: u64, y: u64) -> u64 {
    let d = x.wrapping_sub(y);
    d.min(d.wrapping_neg())
}

/// `‖x − y‖ = min(|x − y|, 1 − |x − y|) ∈ [0, 1/2]`.
pub fn circle_distance(x: &CirclePoint, y: &CirclePoint) -> f64 {
    circle_distance_raw(x.x, y.x) as f64 / TWO_POW_64
}

/// Default precision: `64 + bitlen(max term) + bitlen(N) + 16`, never below 128.
pub fn default_precision(max_term: &BigUint, n: usize) -> u32 {
    let need = 64 + max_term.bits() as u32 + usize::BITS - n.leading_zeros() + GUARD_BITS;
    need.max(128)
}

/// `{t·α}` for each term, on the 64-bit grid.
///
/// Fails with `PrecisionExhausted` when `t · error_bound(α) ≥ 2^-64` for
/// some term; the caller re-resolves α at higher precision.
pub fn frac_parts(alpha: &FixedAlpha, terms: &[BigUint]) -> Result<Vec<CirclePoint>> {
    let Some(max) = terms.iter().max() else {
        return Ok(Vec::new());
    };
    check_budget(alpha, max)?;
    let eval = PointEval::new(alpha);
    Ok(if terms.len() > 4096 {
        terms.par_iter().map(|t| eval.point_big(t)).collect()
    } else {
        terms.iter().map(|t| eval.point_big(t)).collect()
    })
}

/// [`frac_parts`] for machine-word terms.
pub fn frac_parts_u64(alpha: &FixedAlpha, terms: &[u64]) -> Result<Vec<CirclePoint>> {
    let Some(&max) = terms.iter().max() else {
        return Ok(Vec::new());
    };
    check_budget(alpha, &BigUint::from(max))?;
    let eval = PointEval::new(alpha);
    Ok(if terms.len() > 4096 {
        terms.par_iter().map(|&t| eval.point_u64(t)).collect()
    } else {
        terms.iter().map(|&t| eval.point_u64(t)).collect()
    })
}

/// Resolves α with the default precision policy and evaluates the points,
/// escalating precision on `PrecisionExhausted`.
pub fn resolve_points(
    spec: &AlphaSpec,
    terms: &[BigUint],
) -> Result<(FixedAlpha, Vec<CirclePoint>)> {
    let max = terms.iter().max().cloned().unwrap_or_default();
    let mut bits = default_precision(&max, terms.len());
    let mut last = None;
    for _ in 0..4 {
        let alpha = resolve_alpha(spec, bits)?;
        match frac_parts(&alpha, terms) {
            Ok(points) => return Ok((alpha, points)),
            Err(e @ Error::PrecisionExhausted(_)) => {
                last = Some(e);
                bits *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::PrecisionExhausted("escalation limit".into())))
}

fn check_budget(alpha: &FixedAlpha, max: &BigUint) -> Result<()> {
    // max · err_ulps · 2^-B < 2^-64  <=>  max · err_ulps < 2^(B-64)
    let lhs = max * BigUint::from(alpha.err_ulps);
    if alpha.bits < 64 || lhs.bits() > (alpha.bits - 64) as u64 {
        return Err(Error::PrecisionExhausted(format!(
            "term with {} bits exceeds the budget of a {}-bit alpha",
            max.bits(),
            alpha.bits
        )));
    }
    Ok(())
}

struct PointEval<'a> {
    alpha: &'a FixedAlpha,
    wide: Option<u128>,
    mask: BigUint,
    ulp: f64,
}

impl<'a> PointEval<'a> {
    fn new(alpha: &'a FixedAlpha) -> Self {
        let wide = (alpha.bits == 128).then(|| alpha.value.to_u128().unwrap_or(0));
        PointEval {
            alpha,
            wide,
            mask: (BigUint::one() << alpha.bits as usize) - BigUint::one(),
            ulp: alpha.error_bound(),
        }
    }

    fn point_u64(&self, t: u64) -> CirclePoint {
        match self.wide {
            Some(v) => {
                let x = (t as u128).wrapping_mul(v);
                let quant = if x as u64 != 0 { 1.0 / TWO_POW_64 } else { 0.0 };
                CirclePoint {
                    x: (x >> 64) as u64,
                    err: t as f64 * self.ulp + quant,
                }
            }
            None => self.point_big(&BigUint::from(t)),
        }
    }

    fn point_big(&self, t: &BigUint) -> CirclePoint {
        if let (Some(_), Some(small)) = (self.wide, t.to_u64()) {
            return self.point_u64(small);
        }
        let x = (t * &self.alpha.value) & &self.mask;
        let shift = (self.alpha.bits - 64) as usize;
        let top = (&x >> shift).to_u64().unwrap_or(0);
        let dropped = x.trailing_zeros().is_some_and(|z| z < shift as u64);
        let quant = if dropped { 1.0 / TWO_POW_64 } else { 0.0 };
        let tf = t.to_f64().unwrap_or(f64::INFINITY);
        CirclePoint {
            x: top,
            err: tf * self.ulp + quant,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn oracle_fraction(spec: &AlphaSpec, bits: usize) -> BigUint {
        // Independent route: floor((P + √D)/Q · 2^bits) via a 2x-wider isqrt.
        let AlphaSpec::Quadratic { p, q, d } = spec else {
            panic!("quadratic only")
        };
        let wide = 2 * bits;
        let r = BigInt::from((d << (2 * wide)).sqrt());
        let (p, q, r) = if q.is_negative() {
            (-p, -q, -r)
        } else {
            (p.clone(), q.clone(), r)
        };
        let num = (p << wide) + r;
        let v = num.div_floor(&q).mod_floor(&(BigInt::one() << wide));
        (v.to_biguint().unwrap()) >> bits
    }

    #[test]
    fn rational_dyadic_is_exact() {
        let a = resolve_alpha(&AlphaSpec::rational(5, 8).unwrap(), 64).unwrap();
        assert!(a.is_exact());
        assert_eq!(a.to_f64(), 0.625);
        assert_eq!(a.error_bound(), 0.0);
    }

    #[test]
    fn rational_reduces_mod_one() {
        assert_eq!(
            AlphaSpec::rational(13, 8).unwrap(),
            AlphaSpec::rational(5, 8).unwrap()
        );
        assert_eq!(
            AlphaSpec::rational(-3, 8).unwrap(),
            AlphaSpec::rational(5, 8).unwrap()
        );
        assert_eq!(
            AlphaSpec::rational(10, 16).unwrap(),
            AlphaSpec::rational(5, 8).unwrap()
        );
        assert_eq!(AlphaSpec::rational(1, 0), Err(Error::ZeroDenominator));
    }

    #[test]
    fn quadratic_golden_and_sqrt2() {
        for (spec, approx) in [
            (AlphaSpec::quadratic(1, 2, 5u32).unwrap(), 0.6180339887),
            (AlphaSpec::quadratic(0, 1, 2u32).unwrap(), 0.4142135623),
        ] {
            let a = resolve_alpha(&spec, 128).unwrap();
            assert!((a.to_f64() - approx).abs() < 1e-10);
            assert!(a.error_bound() <= 2f64.powi(-127));
            let oracle = oracle_fraction(&spec, 128);
            let diff = if a.value() > &oracle {
                a.value() - &oracle
            } else {
                &oracle - a.value()
            };
            assert!(diff <= BigUint::from(2u32), "diff {diff}");
        }
    }

    #[test]
    fn quadratic_negative_denominator() {
        // (1 - √5)/(-2) = (√5 - 1)/2, so (-1 + √5)/2 written with Q < 0.
        let a = AlphaSpec::quadratic(1, -2, 5u32).unwrap();
        let fa = resolve_alpha(&a, 128).unwrap();
        // (1 + √5)/(-2) = -1.618..., mod 1 = 0.381966...
        assert!((fa.to_f64() - 0.3819660112501051).abs() < 1e-12);
        assert!(matches!(
            AlphaSpec::quadratic(1, 2, 9u32),
            Err(Error::PerfectSquareD(_))
        ));
        assert_eq!(
            AlphaSpec::quadratic(1, 0, 5u32),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn spec_grammar_round_trips() {
        for s in ["rat:5/8", "quad:1,2,5", "cf:1,2;3,4", "cf:2,2,2"] {
            let spec: AlphaSpec = s.parse().unwrap();
            let again: AlphaSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again);
        }
        assert!("float:0.5".parse::<AlphaSpec>().is_err());
        assert!("cf:1,2;".parse::<AlphaSpec>().is_err());
        assert!("cf:0,1".parse::<AlphaSpec>().is_err());
    }

    #[test]
    fn periodic_stream_matches_surd() {
        let g = AlphaSpec::cf(vec![], vec![1])
            .unwrap()
            .periodic_to_quadratic()
            .unwrap();
        let a = resolve_alpha(&g, 128).unwrap();
        let b = resolve_alpha(&AlphaSpec::golden(), 128).unwrap();
        assert_eq!(a.value(), b.value());
        let s2 = AlphaSpec::cf(vec![], vec![2]).unwrap();
        let a = resolve_alpha(&s2, 192).unwrap();
        let b = resolve_alpha(&AlphaSpec::quadratic(0, 1, 2u32).unwrap(), 192).unwrap();
        let diff = if a.value() > b.value() {
            a.value() - b.value()
        } else {
            b.value() - a.value()
        };
        assert!(diff <= BigUint::from(4u32));
    }

    #[test]
    fn truncated_stream_needs_enough_digits() {
        let short = AlphaSpec::cf(vec![1; 10], vec![]).unwrap();
        assert!(matches!(
            resolve_alpha(&short, 64),
            Err(Error::DigitStreamExhausted { .. })
        ));
        let long = AlphaSpec::cf(vec![1; 200], vec![]).unwrap();
        let a = resolve_alpha(&long, 64).unwrap();
        assert!((a.to_f64() - 0.6180339887498949).abs() < 1e-15);
    }

    #[test]
    fn frac_parts_exact_rational() {
        let a = resolve_alpha(&AlphaSpec::rational(5, 8).unwrap(), 64).unwrap();
        let pts = frac_parts_u64(&a, &[1, 2, 3]).unwrap();
        let vals: Vec<f64> = pts.iter().map(CirclePoint::value).collect();
        assert_eq!(vals, vec![0.625, 0.25, 0.875]);
        assert!(pts.iter().all(|p| p.err == 0.0));
    }

    #[test]
    fn frac_parts_golden_against_oracle() {
        let spec = AlphaSpec::golden();
        let a = resolve_alpha(&spec, 128).unwrap();
        let pts = frac_parts_u64(&a, &[1, 2, 3, 4, 5]).unwrap();
        let oracle = oracle_fraction(&spec, 256);
        let modulus = BigUint::one() << 256usize;
        for (t, p) in (1u32..=5).zip(&pts) {
            let exact = ((BigUint::from(t) * &oracle) % &modulus) >> 192usize;
            let exact = exact.to_u64().unwrap();
            assert!(circle_distance_raw(exact, p.x) <= 2, "t = {t}");
        }
        let expect = [
            0.6180339887,
            0.2360679775,
            0.8541019662,
            0.4721359550,
            0.0901699437,
        ];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p.value() - e).abs() < 1e-9);
        }
    }

    #[test]
    fn fibonacci_multiple_is_best_approximation() {
        let a = resolve_alpha(&AlphaSpec::golden(), 128).unwrap();
        let p = frac_parts_u64(&a, &[987]).unwrap()[0];
        let dist = circle_distance(&p, &CirclePoint::from_raw(0));
        assert!(dist < 1.0 / 987.0);
        assert!(dist < 1.0 / 1597.0);
    }

    #[test]
    fn precision_budget_enforced() {
        let a = resolve_alpha(&AlphaSpec::golden(), 64).unwrap();
        let err = frac_parts_u64(&a, &[1]).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted(_)));
        let (fa, pts) =
            resolve_points(&AlphaSpec::golden(), &[BigUint::from(1u32) << 200usize]).unwrap();
        assert!(fa.precision_bits() >= 64 + 201 + GUARD_BITS);
        assert_eq!(pts.len(), 1);
    }

    #[test]
    fn big_path_matches_wide_path() {
        let spec = AlphaSpec::quadratic(3, 7, 11u32).unwrap();
        let a = resolve_alpha(&spec, 128).unwrap();
        let terms: Vec<u64> = (1..200).map(|t| t * 7919).collect();
        let fast = frac_parts_u64(&a, &terms).unwrap();
        let eval = PointEval {
            alpha: &a,
            wide: None,
            mask: (BigUint::one() << 128usize) - 1u32,
            ulp: a.error_bound(),
        };
        for (t, p) in terms.iter().zip(&fast) {
            assert_eq!(eval.point_big(&BigUint::from(*t)).x, p.x);
        }
    }

    #[test]
    fn circle_distance_cases() {
        let d =
            |a: f64, b: f64| circle_distance(&CirclePoint::from_f64(a), &CirclePoint::from_f64(b));
        assert!((d(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(d(0.3, 0.3), 0.0);
        assert_eq!(d(0.0, 0.5), 0.5);
    }

    proptest! {
        #[test]
        fn circle_metric_axioms(a: u64, b: u64, c: u64) {
            let ab = circle_distance_raw(a, b);
            prop_assert_eq!(ab, circle_distance_raw(b, a));
            prop_assert!(ab <= 1u64 << 63);
            let bc = circle_distance_raw(b, c);
            let ac = circle_distance_raw(a, c);
            prop_assert!(ac as u128 <= ab as u128 + bc as u128);
        }

        #[test]
        fn additivity_of_multiples(k in 1u64..1_000_000, m in 1u64..1_000_000, d in 2u32..10_000) {
            let s = d.sqrt();
            prop_assume!(s * s != d);
            let spec = AlphaSpec::quadratic(1, 3, d).unwrap();
            let a = resolve_alpha(&spec, 128).unwrap();
            let pts = frac_parts_u64(&a, &[k, m, k + m]).unwrap();
            let sum = pts[0].x.wrapping_add(pts[1].x);
            let tol = ((pts[0].err + pts[1].err + pts[2].err) * TWO_POW_64).ceil() as u64 + 2;
            prop_assert!(circle_distance_raw(sum, pts[2].x) <= tol);
        }

        #[test]
        fn higher_precision_stays_within_old_bound(t in 1u64..u32::MAX as u64, d in 2u32..10_000) {
            let s = d.sqrt();
            prop_assume!(s * s != d);
            let spec = AlphaSpec::quadratic(-2, 5, d).unwrap();
            let lo = resolve_alpha(&spec, 128).unwrap();
            let hi = resolve_alpha(&spec, 256).unwrap();
            let p_lo = frac_parts_u64(&lo, &[t]).unwrap()[0];
            let p_hi = frac_parts_u64(&hi, &[t]).unwrap()[0];
            let moved = circle_distance_raw(p_lo.x, p_hi.x) as f64 / TWO_POW_64;
            prop_assert!(moved <= p_lo.err + p_hi.err);
        }
    }
}
