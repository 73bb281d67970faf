//! Four-way case analysis producing scales at which `R_N(s)` is far from
//! `2s` for sequences carrying a degree-one quasi-arithmetic certificate.
//!
//! A certified subset `{h + r·k}` of the prefix maps to the multipliers
//! `j = r + 1` of the Kronecker set `({jα′})_{j ≤ M}` with `α′ = kα` and
//! `M = L_P`. The bundle geometry of that set picks one of four cases, each
//! of which names either a fixed `s` or a pair `s₁ < s₂` from one of two
//! lattices `D`, `E` that depend only on `(c, K)`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::contfrac::cf_expand;
use crate::error::{Error, Result};
use crate::gaps::{decompose, BundleDecomposition};
use crate::numeric::{frac_parts, resolve_alpha, resolve_points, AlphaSpec, CirclePoint};
use crate::paircorr::{r2_fast, r2_window, SortedPoints, Threshold};
use crate::ratio::{pow2, rational_to_f64, serde_ratio};
use crate::sequences::SequencePrefix;
use crate::structure::{CertEntry, QuasiArithCertificate};

/// Grid elements beyond this count are never materialized.
pub const MATERIALIZE_LIMIT: u64 = 1 << 24;

/// Brackets keep `2^8` units of the 64-bit point grid between the
/// bracketed distance and either end.
pub const GUARD_ULPS_LOG2: i64 = 8;

fn int(x: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(x.into())
}

fn two128() -> BigRational {
    pow2(128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
            CaseId::Case3 => 3,
            CaseId::Case4 => 4,
        };
        write!(f, "case{n}")
    }
}

/// A certified subset mapped onto the Kronecker set of `α′ = kα`.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// Ranks `r = (a − h)/k` of the subset, ascending.
    pub ranks: Vec<u64>,
    pub alpha_prime: AlphaSpec,
    pub h: BigUint,
    pub k: u64,
}

/// Maps the certificate entry to ranks inside its progression. The shift
/// `h` only rotates the circle, so it drops out of every distance.
pub fn reduce_certificate(
    entry: &CertEntry,
    prefix: &SequencePrefix,
    alpha: &AlphaSpec,
) -> Result<Reduction> {
    let k = BigUint::from(entry.k);
    let mut ranks = Vec::with_capacity(entry.members.len());
    for &i in &entry.members {
        let a = prefix.values().get(i).ok_or_else(|| {
            Error::InvalidArgument(format!("member position {i} outside the prefix"))
        })?;
        if a < &entry.h || (a - &entry.h) % &k != BigUint::zero() {
            return Err(Error::InvariantViolation(format!(
                "value {a} is not in the certified progression"
            )));
        }
        let r = ((a - &entry.h) / &k)
            .to_u64()
            .ok_or_else(|| Error::InvalidArgument("rank overflow".into()))?;
        ranks.push(r);
    }
    ranks.sort_unstable();
    Ok(Reduction {
        ranks,
        alpha_prime: alpha.scaled(&k)?,
        h: entry.h.clone(),
        k: entry.k,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseContext {
    pub n: usize,
    pub w: usize,
    pub m: u64,
    #[serde(with = "serde_ratio")]
    pub gamma: BigRational,
    #[serde(with = "serde_ratio")]
    pub big_gamma: BigRational,
    #[serde(with = "serde_ratio")]
    pub c: BigRational,
    #[serde(rename = "K", with = "serde_ratio")]
    pub k_size: BigRational,
    pub q: u64,
    pub a: u64,
    pub b: u64,
    pub l: usize,
    pub even: bool,
    /// `b = a`, a limiting case of the bundle bracket.
    pub boundary: bool,
    /// `δ = ‖qα′‖`.
    #[serde(with = "serde_ratio")]
    pub delta: BigRational,
    /// Minimum clearance, in units of `s`, between a bracketed value and
    /// the bracket ends.
    #[serde(with = "serde_ratio")]
    pub guard: BigRational,
    /// Points of the certified subset per bundle interval.
    #[serde(skip)]
    pub occupancy: Vec<u64>,
    #[serde(skip)]
    decomp: Option<BundleDecomposition>,
    /// Multipliers `j` of the subset inside `1..=M`, ascending.
    #[serde(skip)]
    subset: Vec<u64>,
}

impl CaseContext {
    /// A context with no point data, for exercising the classifier.
    #[allow(clippy::too_many_arguments)]
    pub fn synthetic(
        n: usize,
        c: BigRational,
        k_size: BigRational,
        gamma: BigRational,
        big_gamma: BigRational,
        q: u64,
        a: u64,
        b: u64,
        delta: BigRational,
    ) -> Self {
        let m = (&big_gamma * int(n as u64))
            .ceil()
            .to_integer()
            .to_u64()
            .unwrap_or(u64::MAX);
        let w = (&gamma * int(n as u64))
            .floor()
            .to_integer()
            .to_usize()
            .unwrap_or(0);
        CaseContext {
            n,
            w,
            m,
            gamma,
            big_gamma,
            c,
            k_size,
            q,
            a,
            b,
            l: 0,
            even: true,
            boundary: a == b,
            delta,
            guard: BigRational::zero(),
            occupancy: Vec::new(),
            decomp: None,
            subset: Vec::new(),
        }
    }

    pub fn decomposition(&self) -> Option<&BundleDecomposition> {
        self.decomp.as_ref()
    }

    /// Checks `bq/K ≤ bq/Γ ≤ N = M/Γ ≤ (b+1)q/Γ ≤ 2bq/Γ ≤ 8bq/K`, naming the
    /// first inequality that fails.
    pub fn check_chain(&self) -> Result<()> {
        let n = int(self.n as u64);
        let bq = int(self.b) * int(self.q);
        let b1q = int(self.b + 1) * int(self.q);
        let g = &self.big_gamma;
        let k = &self.k_size;
        let steps: [(&str, BigRational, BigRational); 6] = [
            ("bq/K ≤ bq/Γ", &bq / k, &bq / g),
            ("bq/Γ ≤ N", &bq / g, n.clone()),
            ("N = M/Γ", n.clone(), int(self.m) / g),
            ("N ≤ (b+1)q/Γ", n.clone(), &b1q / g),
            ("(b+1)q/Γ ≤ 2bq/Γ", &b1q / g, int(2u32) * &bq / g),
            ("2bq/Γ ≤ 8bq/K", int(2u32) * &bq / g, int(8u32) * &bq / k),
        ];
        for (name, lhs, rhs) in steps {
            let ok = if name.contains('=') {
                lhs == rhs
            } else {
                lhs <= rhs
            };
            if !ok {
                return Err(Error::InvariantViolation(format!(
                    "chain inequality {name} fails"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the context for one certificate entry.
pub fn build_context(
    reduction: &Reduction,
    entry: &CertEntry,
    c: &BigRational,
    k_size: &BigRational,
) -> Result<CaseContext> {
    let m = entry.length;
    let n = entry.n;
    let subset: Vec<u64> = reduction.ranks.iter().map(|r| r + 1).collect();
    if subset.iter().any(|&j| j > m) {
        return Err(Error::InvariantViolation(
            "subset rank outside the progression".into(),
        ));
    }
    let alpha = resolve_alpha(&reduction.alpha_prime, 128)?;
    let cf = cf_expand(&reduction.alpha_prime, 4096)?;
    let decomp = decompose(&alpha, &cf, m)?;
    let loc = decomp.location.clone();
    let mut occupancy = vec![0u64; loc.q as usize];
    for &j in &subset {
        let p = decomp.bundle_of_index(j).expect("j inside 1..=M");
        occupancy[p] += 1;
    }
    if occupancy.iter().sum::<u64>() != subset.len() as u64 {
        return Err(Error::InvariantViolation(
            "occupancy does not sum to W".into(),
        ));
    }
    let delta = int(BigUint::from(decomp.delta)) / two128();
    let ctx = CaseContext {
        n,
        w: subset.len(),
        m,
        gamma: entry.gamma_exact(),
        big_gamma: entry.big_gamma_exact(),
        c: c.clone(),
        k_size: k_size.clone(),
        q: loc.q,
        a: loc.a,
        b: loc.b,
        l: loc.l,
        even: loc.even,
        boundary: loc.boundary,
        delta,
        guard: int(n as u64) * pow2(-(64 - GUARD_ULPS_LOG2)),
        occupancy,
        decomp: Some(decomp),
        subset,
    };
    ctx.check_chain()?;
    Ok(ctx)
}

/// The literal conditions of the four cases, in the order 1, 2, 3, 4.
pub fn case_conditions(ctx: &CaseContext) -> [bool; 4] {
    let c = &ctx.c;
    let k = &ctx.k_size;
    let n = int(ctx.n as u64);
    let q = int(ctx.q);
    let ab = int(ctx.a) / int(ctx.b);
    let bd = int(ctx.b) * &ctx.delta;
    let c2 = c * c;
    let c5 = &c2 * &c2 * c;
    let inv_n = BigRational::one() / &n;
    let ab_limit = pow2(23) / &c2;
    let case1 = bd >= pow2(7) / (c * &n) && ab >= ab_limit;
    let case2 = ab <= ab_limit && inv_n < &c5 / (k * pow2(23) * &q);
    let case3 = bd <= pow2(7) / (c * &n) && inv_n < &c5 / (k * pow2(29) * &q);
    let case4 = inv_n >= &c5 / (k * pow2(29) * &q);
    [case1, case2, case3, case4]
}

/// Precedence 4 → 2 → 1 → 3.
pub fn classify_case(ctx: &CaseContext) -> CaseId {
    let [c1, c2, _, c4] = case_conditions(ctx);
    if c4 {
        CaseId::Case4
    } else if c2 {
        CaseId::Case2
    } else if c1 {
        CaseId::Case1
    } else {
        CaseId::Case3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GridKind {
    D,
    E,
}

/// `{start + j·step : 0 ≤ j ≤ j_max}`, evaluated lazily.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateGrid {
    pub kind: GridKind,
    #[serde(with = "serde_ratio")]
    pub start: BigRational,
    #[serde(with = "serde_ratio")]
    pub step: BigRational,
    #[serde(serialize_with = "ser_display")]
    pub j_max: BigInt,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(
    x: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn check_ck(c: &BigRational, k: &BigRational) -> Result<()> {
    if !(c.is_positive() && c <= &BigRational::one() && k >= &BigRational::one()) {
        return Err(Error::InvalidArgument("need 0 < c ≤ 1 ≤ K".into()));
    }
    Ok(())
}

/// `D`: start `c²/(3·2²³K)`, step `c²/(2⁹K)`, `j ≤ ⌈2¹⁶K²/c³⌉`.
pub fn candidate_grid_d(c: &BigRational, k: &BigRational) -> Result<CandidateGrid> {
    check_ck(c, k)?;
    let c2 = c * c;
    Ok(CandidateGrid {
        kind: GridKind::D,
        start: &c2 / (int(3u32) * pow2(23) * k),
        step: &c2 / (pow2(9) * k),
        j_max: (pow2(16) * k * k / (&c2 * c)).ceil().to_integer(),
    })
}

/// `E`: start `1/(2K)`, step `c⁷/(K³2³⁴)`, `j ≤ ⌈4K²·K⁵·2⁶⁶/c¹⁴⌉`.
pub fn candidate_grid_e(c: &BigRational, k: &BigRational) -> Result<CandidateGrid> {
    check_ck(c, k)?;
    let c7 = num_traits::pow(c.clone(), 7);
    let k3 = k * k * k;
    let k7 = num_traits::pow(k.clone(), 7);
    Ok(CandidateGrid {
        kind: GridKind::E,
        start: BigRational::one() / (int(2u32) * k),
        step: &c7 / (&k3 * pow2(34)),
        j_max: (int(4u32) * k7 * pow2(66) / (&c7 * &c7))
            .ceil()
            .to_integer(),
    })
}

impl CandidateGrid {
    pub fn element(&self, j: &BigInt) -> BigRational {
        &self.start + int(j.clone()) * &self.step
    }

    pub fn len(&self) -> BigInt {
        &self.j_max + BigInt::one()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The last element.
    pub fn top(&self) -> BigRational {
        self.element(&self.j_max)
    }

    /// All elements, if there are at most `limit` of them.
    pub fn materialize(&self, limit: u64) -> Result<Vec<BigRational>> {
        let len = self.len();
        if len > BigInt::from(limit) {
            return Err(Error::GridTooLarge(format!(
                "{len} elements exceed the limit {limit}"
            )));
        }
        let n = len.to_u64().expect("bounded by limit");
        Ok((0..n).map(|j| self.element(&BigInt::from(j))).collect())
    }

    /// Consecutive elements `s₁ < x < s₂` with their index `j` (of `s₁`).
    pub fn bracket(&self, x: &BigRational) -> Result<(BigInt, BigRational, BigRational)> {
        let failed = |reason: &str| Error::BracketingFailed {
            value: rational_to_f64(x),
            reason: reason.into(),
        };
        if x <= &self.start {
            return Err(failed("below the first grid element"));
        }
        let j = ((x - &self.start) / &self.step).floor().to_integer();
        if j >= self.j_max {
            return Err(failed("above the last grid element"));
        }
        let s1 = self.element(&j);
        let s2 = &s1 + &self.step;
        if &s1 == x {
            return Err(failed("value coincides with a grid element"));
        }
        Ok((j, s1, s2))
    }

    /// Like [`CandidateGrid::bracket`], but moves `s₁` down and `s₂` up by
    /// whole steps until each lies at least `guard` away from `x`, staying
    /// inside the grid.
    pub fn bracket_guarded(&self, x: &BigRational, guard: &BigRational) -> Result<Thresholds> {
        let (j, s1, s2) = self.bracket(x)?;
        let extra = |gap: BigRational| -> BigInt {
            if &gap >= guard {
                BigInt::zero()
            } else {
                ((guard - gap) / &self.step).ceil().to_integer()
            }
        };
        let lo = (&j - extra(x - &s1)).max(BigInt::zero());
        let hi = (&j + BigInt::one() + extra(&s2 - x)).min(self.j_max.clone());
        Ok(Thresholds::Pair {
            s1: self.element(&lo),
            s2: self.element(&hi),
            grid: self.kind,
            span: &hi - &lo,
            j: lo,
        })
    }
}

/// Where a threshold came from, enough to rebuild it bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Thresholds {
    Single {
        #[serde(with = "serde_ratio")]
        s: BigRational,
    },
    Pair {
        #[serde(with = "serde_ratio")]
        s1: BigRational,
        #[serde(with = "serde_ratio")]
        s2: BigRational,
        grid: GridKind,
        /// Index of `s₁`.
        #[serde(serialize_with = "ser_display")]
        j: BigInt,
        /// Grid steps between `s₁` and `s₂`; 1 for consecutive elements.
        #[serde(serialize_with = "ser_display")]
        span: BigInt,
    },
}

impl Thresholds {
    /// `2s` or `2(s₂ − s₁)`.
    pub fn poisson_ref(&self) -> BigRational {
        match self {
            Thresholds::Single { s } => int(2u32) * s,
            Thresholds::Pair { s1, s2, .. } => int(2u32) * (s2 - s1),
        }
    }

    /// The proved floor `4s` or `4(s₂ − s₁)`.
    pub fn theoretical_floor(&self) -> BigRational {
        int(2u32) * self.poisson_ref()
    }
}

/// Rebuilds a threshold from `(case, c, K, j, span)`.
pub fn reconstruct_thresholds(
    case: CaseId,
    c: &BigRational,
    k: &BigRational,
    index: Option<(&BigInt, &BigInt)>,
) -> Result<Thresholds> {
    match (case, index) {
        (CaseId::Case1, _) => Ok(Thresholds::Single { s: pow2(6) / c }),
        (CaseId::Case3, _) => Ok(Thresholds::Single {
            s: BigRational::one(),
        }),
        (CaseId::Case2 | CaseId::Case4, Some((j, span))) => {
            let grid = if case == CaseId::Case2 {
                candidate_grid_d(c, k)?
            } else {
                candidate_grid_e(c, k)?
            };
            if span < &BigInt::one() || j + span > grid.j_max {
                return Err(Error::InvalidArgument("grid index out of range".into()));
            }
            Ok(Thresholds::Pair {
                s1: grid.element(j),
                s2: grid.element(&(j + span)),
                grid: grid.kind,
                j: j.clone(),
                span: span.clone(),
            })
        }
        _ => Err(Error::InvalidArgument("grid cases need an index j".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub case: CaseId,
    pub primary: Thresholds,
    /// Further candidates in decreasing order of support.
    pub alternates: Vec<Thresholds>,
    pub notes: Vec<String>,
}

fn mode_smallest<T: Copy + Ord + std::hash::Hash>(
    xs: impl IntoIterator<Item = T>,
) -> Vec<(T, usize)> {
    let mut counts: HashMap<T, usize> = HashMap::new();
    for x in xs {
        *counts.entry(x).or_default() += 1;
    }
    let mut v: Vec<(T, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

/// The case's thresholds computed from the context's point data.
pub fn case_predicted_thresholds(
    ctx: &CaseContext,
    case: CaseId,
    s_budget: usize,
) -> Result<Prediction> {
    let mut notes = Vec::new();
    if ctx.boundary {
        notes.push(format!("b = a = {} (limiting bundle bracket)", ctx.a));
    }
    match case {
        CaseId::Case1 => Ok(Prediction {
            case,
            primary: reconstruct_thresholds(case, &ctx.c, &ctx.k_size, None)?,
            alternates: vec![],
            notes,
        }),
        CaseId::Case3 => Ok(Prediction {
            case,
            primary: reconstruct_thresholds(case, &ctx.c, &ctx.k_size, None)?,
            alternates: vec![],
            notes,
        }),
        CaseId::Case2 => predict_case2(ctx, s_budget, notes),
        CaseId::Case4 => predict_case4(ctx, s_budget, notes),
    }
}

fn decomp_of(ctx: &CaseContext) -> Result<&BundleDecomposition> {
    ctx.decomp
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("context carries no point data".into()))
}

fn membership(ctx: &CaseContext) -> Vec<bool> {
    let mut v = vec![false; ctx.m as usize + 1];
    for &j in &ctx.subset {
        v[j as usize] = true;
    }
    v
}

/// Case 2: the most frequent in-bundle gap `β·δ` of the subset, placed
/// between consecutive elements of `D` after scaling by `N`.
fn predict_case2(ctx: &CaseContext, s_budget: usize, mut notes: Vec<String>) -> Result<Prediction> {
    let d = decomp_of(ctx)?;
    let member = membership(ctx);
    let mut betas = Vec::new();
    for p in 0..ctx.q as usize {
        let pts: Vec<_> = d
            .bundle(p)
            .iter()
            .filter(|pt| member[pt.index as usize])
            .collect();
        for w in pts.windows(2) {
            let gap = w[1].pos.wrapping_sub(w[0].pos);
            if gap % d.delta != 0 {
                return Err(Error::InternalMismatch(
                    "in-bundle gap is not a multiple of δ".into(),
                ));
            }
            betas.push((gap / d.delta) as u64);
        }
    }
    let ranked = mode_smallest(betas);
    if ranked.is_empty() {
        return Err(Error::BracketingFailed {
            value: 0.0,
            reason: "no bundle holds two subset points".into(),
        });
    }
    let grid = candidate_grid_d(&ctx.c, &ctx.k_size)?;
    let n = int(ctx.n as u64);
    let mut out = Vec::new();
    for &(beta, count) in ranked.iter().take(s_budget.max(1)) {
        let x = int(beta) * &ctx.delta * &n;
        match grid.bracket_guarded(&x, &ctx.guard) {
            Ok(th) => {
                if out.is_empty() {
                    notes.push(format!("beta = {beta} with multiplicity {count}"));
                }
                out.push(th);
            }
            Err(e) if out.is_empty() && beta == ranked[0].0 => return Err(e),
            Err(_) => {}
        }
    }
    let primary = out.remove(0);
    Ok(Prediction {
        case: CaseId::Case2,
        primary,
        alternates: out,
        notes,
    })
}

/// Case 4: along the column holding the most subset points, the most
/// frequent bundle step `Δ` and then the most frequent distance `κ` between
/// the corresponding consecutive subset points; `‖κ‖·N` is placed between
/// consecutive elements of `E`.
fn predict_case4(ctx: &CaseContext, s_budget: usize, mut notes: Vec<String>) -> Result<Prediction> {
    let d = decomp_of(ctx)?;
    let member = membership(ctx);
    let b = ctx.b as usize;
    let mut best: Option<(usize, Vec<(usize, u128)>)> = None;
    for i in 1..=b {
        let col = d.column(i, false)?;
        let us: Vec<(usize, u128)> = col
            .iter()
            .enumerate()
            .filter(|(_, pt)| member[pt.index as usize])
            .map(|(p, pt)| (p, pt.pos))
            .collect();
        if best.as_ref().is_none_or(|(_, v)| us.len() > v.len()) {
            best = Some((i, us));
        }
    }
    let (column, us) = best.expect("b ≥ 1");
    if us.len() < 2 {
        return Err(Error::BracketingFailed {
            value: 0.0,
            reason: "no column holds two subset points".into(),
        });
    }
    let c2 = &ctx.c * &ctx.c;
    let delta_cap = int(4u32) * &ctx.k_size * &ctx.k_size / &c2;
    let steps: Vec<(u64, u128)> = us
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0) as u64, w[1].1.wrapping_sub(w[0].1)))
        .collect();
    let by_step = mode_smallest(steps.iter().map(|s| s.0).filter(|&s| int(s) <= delta_cap));
    let by_step = if by_step.is_empty() {
        notes.push("no bundle step below 4K²/c²; using all steps".into());
        mode_smallest(steps.iter().map(|s| s.0))
    } else {
        by_step
    };

    // (distance, support) in decreasing support
    let mut kappas: Vec<(u128, usize, u64)> = Vec::new();
    for &(step, _) in &by_step {
        let dists = mode_smallest(steps.iter().filter(|s| s.0 == step).map(|s| s.1));
        if dists.len() > 2 {
            return Err(Error::InvariantViolation(format!(
                "column {column}: step {step} gives {} distinct distances",
                dists.len()
            )));
        }
        for (dist, count) in dists {
            kappas.push((dist, count, step));
        }
    }
    let grid = candidate_grid_e(&ctx.c, &ctx.k_size)?;
    let n = int(ctx.n as u64);
    let mut out = Vec::new();
    let mut first_err = None;
    for &(dist, count, step) in kappas.iter().take(s_budget.max(1)) {
        let circ = dist.min(dist.wrapping_neg());
        let x = int(BigUint::from(circ)) * &n / two128();
        match grid.bracket_guarded(&x, &ctx.guard) {
            Ok(th) => {
                if out.is_empty() {
                    notes.push(format!(
                        "kappa = {:.6e} from column {column}, step {step}, multiplicity {count}",
                        circ as f64 / 2f64.powi(128)
                    ));
                }
                out.push(th);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if out.is_empty() {
        return Err(first_err.expect("at least one candidate"));
    }
    let primary = out.remove(0);
    Ok(Prediction {
        case: CaseId::Case4,
        primary,
        alternates: out,
        notes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub n: usize,
    pub case: CaseId,
    pub thresholds: Thresholds,
    pub theoretical_floor: f64,
    /// `R_N(s)` or `R_N(s₂) − R_N(s₁)` on the whole prefix.
    pub measured: f64,
    pub poisson_ref: f64,
    pub deviation: f64,
    /// The same count restricted to the certified subset, divided by `N`.
    pub subset_measured: f64,
    pub candidates_evaluated: usize,
    pub context: CaseContext,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSummary {
    pub reports: Vec<WitnessReport>,
    pub max_abs_deviation: f64,
    /// `N` of the report attaining the maximum.
    pub at_n: usize,
    pub margin: f64,
    pub exceeds_margin: bool,
}

struct Measurement {
    full: u64,
    subset: u64,
}

fn measure(
    thresholds: &Thresholds,
    points: &[CirclePoint],
    subset: &SortedPoints,
    n: usize,
) -> Result<Measurement> {
    let (full, sub) = match thresholds {
        Thresholds::Single { s } => {
            let full = r2_fast(points, s)?.pair_count;
            (full, 2 * subset.count_within(Threshold::new(s, n)?))
        }
        Thresholds::Pair { s1, s2, .. } => {
            let full = r2_window(points, s1, s2)?.pair_count;
            (
                full,
                2 * subset.count_band(Threshold::new(s1, n)?, Threshold::new(s2, n)?),
            )
        }
    };
    if sub > full {
        return Err(Error::InternalMismatch(format!(
            "subset count {sub} exceeds full count {full}"
        )));
    }
    Ok(Measurement { full, subset: sub })
}

fn bracket_notes(th: &Thresholds, ctx: &CaseContext, points: &[CirclePoint]) -> Vec<String> {
    let Thresholds::Pair { s1, s2, span, .. } = th else {
        return vec![];
    };
    let mut notes = Vec::new();
    if span > &BigInt::one() {
        notes.push(format!(
            "bracket widened to {span} grid steps to clear the point resolution"
        ));
    }
    let worst = points.iter().map(|p| p.err).fold(0.0, f64::max);
    let resolution = 2.0 * worst + 2f64.powi(-63);
    let width = rational_to_f64(&((s2 - s1) / int(ctx.n as u64)));
    if width / 2.0 < 4.0 * resolution {
        notes.push(format!(
            "bracket half-width {:e} near the point resolution {resolution:e}",
            width / 2.0
        ));
    }
    notes
}

/// Runs the case analysis for one prefix length.
pub fn witness_at(
    prefix: &SequencePrefix,
    points: &[CirclePoint],
    alpha: &AlphaSpec,
    cert: &QuasiArithCertificate,
    n: usize,
    s_budget: usize,
) -> Result<WitnessReport> {
    let entry = cert
        .entry(n)
        .ok_or_else(|| Error::InvalidArgument(format!("certificate has no entry for N = {n}")))?;
    let sub = prefix.prefix(n);
    let reduction = reduce_certificate(entry, &sub, alpha)?;
    let ctx = build_context(&reduction, entry, &cert.c, &cert.k_size)?;
    let case = classify_case(&ctx);
    let prediction = case_predicted_thresholds(&ctx, case, s_budget)?;

    let points = &points[..n];
    let subset_pts: Vec<u64> = entry.members.iter().map(|&i| points[i].x).collect();
    let subset_sorted = SortedPoints::from_raw(subset_pts);

    let mut best: Option<(Thresholds, Measurement, f64)> = None;
    let mut evaluated = 0;
    let candidates = std::iter::once(&prediction.primary).chain(prediction.alternates.iter());
    for th in candidates.take(s_budget.max(1)) {
        let m = measure(th, points, &subset_sorted, n)?;
        evaluated += 1;
        let dev = m.full as f64 / n as f64 - rational_to_f64(&th.poisson_ref());
        if best.as_ref().is_none_or(|(_, _, d)| dev.abs() > d.abs()) {
            best = Some((th.clone(), m, dev));
        }
    }
    let (thresholds, m, deviation) = best.expect("at least the primary candidate");
    let mut notes = prediction.notes;
    notes.extend(bracket_notes(&thresholds, &ctx, points));
    Ok(WitnessReport {
        n,
        case,
        theoretical_floor: rational_to_f64(&thresholds.theoretical_floor()),
        measured: m.full as f64 / n as f64,
        poisson_ref: rational_to_f64(&thresholds.poisson_ref()),
        deviation,
        subset_measured: m.subset as f64 / n as f64,
        candidates_evaluated: evaluated,
        thresholds,
        context: ctx,
        notes,
    })
}

/// Case analysis over several prefix lengths; the summary reports the
/// largest `|deviation|` and whether it reaches `margin`.
pub fn witness_search(
    prefix: &SequencePrefix,
    alpha: &AlphaSpec,
    cert: Option<&QuasiArithCertificate>,
    n_list: &[usize],
    s_budget: usize,
    margin: f64,
) -> Result<WitnessSummary> {
    let cert = cert.ok_or(Error::CertificateRequired)?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "N list must be non-empty and increasing".into(),
        ));
    }
    let n_max = *n_list.last().expect("non-empty");
    if n_max > prefix.len() {
        return Err(Error::InvalidArgument(format!(
            "N = {n_max} exceeds the prefix length {}",
            prefix.len()
        )));
    }
    let values = &prefix.values()[..n_max];
    let (_, points) = resolve_points(alpha, values)?;
    let reports: Vec<WitnessReport> = n_list
        .par_iter()
        .map(|&n| witness_at(prefix, &points, alpha, cert, n, s_budget))
        .collect::<Result<_>>()?;
    let (idx, max_abs) = reports
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.deviation.abs()))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    Ok(WitnessSummary {
        at_n: reports[idx].n,
        reports,
        max_abs_deviation: max_abs,
        margin,
        exceeds_margin: max_abs >= margin,
    })
}

/// Pair-correlation values of the prefix at a report's thresholds, by the
/// quadratic oracle.
pub fn naive_check(
    prefix: &SequencePrefix,
    alpha: &AlphaSpec,
    report: &WitnessReport,
) -> Result<f64> {
    let values = &prefix.values()[..report.n];
    let (fixed, _) = resolve_points(alpha, values)?;
    let points = frac_parts(&fixed, values)?;
    Ok(match &report.thresholds {
        Thresholds::Single { s } => crate::paircorr::r2_naive(&points, s)?.value,
        Thresholds::Pair { s1, s2, .. } => {
            let hi = crate::paircorr::r2_naive(&points, s2)?.pair_count;
            let lo = if s1.is_zero() {
                0
            } else {
                crate::paircorr::r2_naive(&points, s1)?.pair_count
            };
            (hi - lo) as f64 / report.n as f64
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::ratio_u;
    use crate::sequences::{generate, Generator};
    use crate::structure::{detect_multi, detect_quasi_arithmetic_d1};

    fn one() -> BigRational {
        BigRational::one()
    }

    #[test]
    fn grid_examples() {
        let d = candidate_grid_d(&one(), &one()).unwrap();
        assert_eq!(
            d.start,
            BigRational::new(1.into(), BigInt::from(3) << 23usize)
        );
        assert_eq!(d.step, pow2(-9));
        assert_eq!(d.len(), BigInt::from((1u64 << 16) + 1));
        let d2 = candidate_grid_d(&ratio_u(1, 2), &ratio_u(2, 1)).unwrap();
        assert_eq!(d2.step, pow2(-12));
        let e = candidate_grid_e(&one(), &one()).unwrap();
        assert_eq!(
            (e.start.clone(), e.step.clone()),
            (ratio_u(1, 2), pow2(-34))
        );
        assert!(matches!(
            e.materialize(MATERIALIZE_LIMIT),
            Err(Error::GridTooLarge(_))
        ));
        let small = CandidateGrid {
            kind: GridKind::D,
            start: ratio_u(1, 3),
            step: ratio_u(1, 7),
            j_max: 20.into(),
        };
        let all = small.materialize(100).unwrap();
        assert!(all
            .windows(2)
            .all(|w| w[0] < w[1] && &w[1] - &w[0] == small.step));
    }

    #[test]
    fn bracketing() {
        let e = candidate_grid_e(&one(), &one()).unwrap();
        let x = ratio_u(3, 4) + pow2(-40);
        let (j, s1, s2) = e.bracket(&x).unwrap();
        assert!(s1 < x && x < s2);
        let th = Thresholds::Pair {
            s1,
            s2,
            grid: GridKind::E,
            j: j.clone(),
            span: BigInt::one(),
        };
        assert_eq!(
            reconstruct_thresholds(CaseId::Case4, &one(), &one(), Some((&j, &BigInt::one())))
                .unwrap(),
            th
        );
        assert_eq!(e.bracket_guarded(&x, &BigRational::zero()).unwrap(), th);
        let wide = e.bracket_guarded(&x, &pow2(-30)).unwrap();
        let Thresholds::Pair {
            s1, s2, j, span, ..
        } = &wide
        else {
            panic!()
        };
        assert!(&x - s1 >= pow2(-30) && s2 - &x >= pow2(-30));
        assert_eq!(
            reconstruct_thresholds(CaseId::Case4, &one(), &one(), Some((j, span))).unwrap(),
            wide
        );
        assert!(matches!(
            e.bracket(&ratio_u(1, 4)),
            Err(Error::BracketingFailed { .. })
        ));
        assert!(matches!(
            e.bracket(&ratio_u(3, 4)),
            Err(Error::BracketingFailed { .. })
        ));
    }

    #[test]
    fn fixed_case_thresholds() {
        assert_eq!(
            reconstruct_thresholds(CaseId::Case1, &one(), &one(), None).unwrap(),
            Thresholds::Single { s: int(64u32) }
        );
        let t3 = reconstruct_thresholds(CaseId::Case3, &ratio_u(1, 3), &one(), None).unwrap();
        assert_eq!(t3.theoretical_floor(), int(4u32));
        let t1 = reconstruct_thresholds(CaseId::Case1, &one(), &one(), None).unwrap();
        assert_eq!(t1.theoretical_floor(), int(256u32));
    }

    #[test]
    fn synthetic_cases() {
        let ctx = |n: usize, q: u64, a: u64, b: u64, delta: BigRational| {
            CaseContext::synthetic(n, one(), one(), one(), one(), q, a, b, delta)
        };
        // q ≥ N/2^29: case 4.
        assert_eq!(
            classify_case(&ctx(10_000, 6765, 1, 1, ratio_u(1, 10_000))),
            CaseId::Case4
        );
        // Huge a/b, wide bundles, tiny q: case 1.
        let n = 1usize << 40;
        let c1 = ctx(n, 1, 1 << 31, 2, ratio_u(1, 1 << 31));
        assert_eq!(classify_case(&c1), CaseId::Case1);
        // Small a/b, N huge against q: case 2.
        let c2 = ctx(n, 1, 4, 2, ratio_u(1, 5));
        assert_eq!(classify_case(&c2), CaseId::Case2);
        // Huge a/b, narrow bundles: case 3.
        let c3 = ctx(n, 1, 1 << 31, 2, pow2(-90));
        assert_eq!(classify_case(&c3), CaseId::Case3);
    }

    #[test]
    fn identity_golden_context() {
        let n = 610; // F_15
        let id = generate(&Generator::Identity, n, 0).unwrap();
        let cert = detect_quasi_arithmetic_d1(&id, &one(), &one(), 3)
            .unwrap()
            .unwrap();
        let alpha = AlphaSpec::golden();
        let red = reduce_certificate(&cert.entries[0], &id, &alpha).unwrap();
        assert_eq!(red.ranks, (0..n as u64).collect::<Vec<_>>());
        let ctx = build_context(&red, &cert.entries[0], &one(), &one()).unwrap();
        assert_eq!((ctx.m, ctx.q), (610, 610));
        assert_eq!(ctx.occupancy.iter().sum::<u64>(), n as u64);
        assert_eq!(classify_case(&ctx), CaseId::Case4);
        let pred = case_predicted_thresholds(&ctx, CaseId::Case4, 1).unwrap();
        let Thresholds::Pair { s1, s2, .. } = &pred.primary else {
            panic!()
        };
        assert!(s1 >= &ratio_u(1, 2) && s1 < s2);
    }

    #[test]
    fn ap_reduction_scales_alpha() {
        let seq = generate(&"ap:0,2".parse().unwrap(), 300, 0).unwrap();
        let cert = detect_quasi_arithmetic_d1(&seq, &one(), &one(), 3)
            .unwrap()
            .unwrap();
        assert_eq!(
            (cert.entries[0].k, cert.entries[0].h.clone()),
            (2, BigUint::zero())
        );
        let red = reduce_certificate(&cert.entries[0], &seq, &AlphaSpec::golden()).unwrap();
        let two_alpha = AlphaSpec::golden().scaled(&BigUint::from(2u32)).unwrap();
        assert_eq!(red.alpha_prime, two_alpha);
        assert_eq!(red.ranks, (0..300).collect::<Vec<_>>());
    }

    #[test]
    fn identity_witness_small() {
        let id = generate(&Generator::Identity, 2000, 0).unwrap();
        let ns = [500, 1000, 2000];
        let cert = detect_multi(&id, &ns, &one(), &one(), 3).unwrap().unwrap();
        let summary = witness_search(&id, &AlphaSpec::golden(), Some(&cert), &ns, 4, 0.5).unwrap();
        assert!(summary.exceeds_margin, "{}", summary.max_abs_deviation);
        for r in &summary.reports {
            assert!(r.subset_measured <= r.measured);
            let naive = naive_check(&id, &AlphaSpec::golden(), r).unwrap();
            assert!((naive - r.measured).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_required() {
        let sq = generate(&Generator::Squares, 100, 0).unwrap();
        assert_eq!(
            witness_search(&sq, &AlphaSpec::golden(), None, &[100], 1, 0.5).unwrap_err(),
            Error::CertificateRequired
        );
    }
}
