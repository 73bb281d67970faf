//! Bundle geometry of the Kronecker set `S̄ = ({jα})_{j=1..M}`.
//!
//! With `q = q_l ≤ M < q_{l+1}`, the `M` points fall into `q` bundles, one
//! per interval `[p/q, (p+1)/q)`, each made of `b` or `b+1` points spaced by
//! the common inner gap `δ = ‖qα‖`.
//!
//! Everything here runs on a 128-bit grid: point `j` sits at `j·V mod 2^128`
//! where `V` holds the top 128 bits of α. That map is additive in `j`, so
//! equalities between index differences (inner gaps, column steps) are
//! exact rather than approximate.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use crate::contfrac::{locate_scale, ContinuedFraction, ScaleLocation};
use crate::error::{Error, Result};
use crate::numeric::{CirclePoint, FixedAlpha};

/// Largest `M` accepted by [`decompose`].
pub const MAX_SCALE: u64 = 50_000_000;

const TWO_POW_128: f64 = 3.402823669209385e38;

/// One point of `S̄` on the wide grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct OrbitPoint {
    /// The multiplier `j ∈ 1..=M`.
    pub index: u64,
    /// `{jα}` in units of `2^-128`.
    pub pos: u128,
}

impl OrbitPoint {
    pub fn value(&self) -> f64 {
        self.pos as f64 / TWO_POW_128
    }

    /// The point on the canonical 64-bit grid.
    pub fn to_circle(&self) -> CirclePoint {
        let err = if self.pos as u64 != 0 {
            1.0 / 18446744073709551616.0
        } else {
            0.0
        };
        CirclePoint {
            x: (self.pos >> 64) as u64,
            err,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleDecomposition {
    pub location: ScaleLocation,
    /// `δ` in units of `2^-128`.
    pub delta: u128,
    #[serde(skip)]
    alpha_wide: u128,
    /// All points, grouped by bundle and ascending inside each bundle.
    #[serde(skip)]
    points: Vec<OrbitPoint>,
    /// `points[starts[p]..starts[p+1]]` is bundle `p`.
    #[serde(skip)]
    starts: Vec<usize>,
}

/// `⌊x · q / 2^128⌋` and `x · q mod 2^128`.
fn mul_q(x: u128, q: u64) -> (u64, u128) {
    let q = q as u128;
    let lo = (x as u64 as u128) * q;
    let hi = (x >> 64) * q;
    let mid = hi + (lo >> 64);
    ((mid >> 64) as u64, x.wrapping_mul(q))
}

/// Bundle of a wide-grid point; a point exactly on `p/q` joins the interval
/// to its left.
fn bundle_of(x: u128, q: u64) -> usize {
    let (k, rem) = mul_q(x, q);
    if rem == 0 {
        ((k as u128 + q as u128 - 1) % q as u128) as usize
    } else {
        k as usize
    }
}

fn violation(name: &str, detail: String) -> Error {
    Error::InvariantViolation(format!("{name}: {detail}"))
}

/// Decomposes `S̄ = ({jα})_{j ≤ M}` into bundles and verifies the bundle
/// inequalities, raising `InvariantViolation` on the first failure.
pub fn decompose(
    alpha: &FixedAlpha,
    cf: &ContinuedFraction,
    m: u64,
) -> Result<BundleDecomposition> {
    if m == 0 || m > MAX_SCALE {
        return Err(Error::InvalidArgument(format!(
            "M must lie in 1..={MAX_SCALE}"
        )));
    }
    let location = locate_scale(cf, m)?;
    let (v, err) = alpha.wide();
    let q = location.q;

    let qv = v.wrapping_mul(q as u128);
    let delta = qv.min(qv.wrapping_neg());
    // Point errors must be far below the finest structure δ/q.
    let point_err = m as f64 * err * TWO_POW_128;
    if point_err * 16.0 * q as f64 >= delta as f64 {
        return Err(Error::PrecisionExhausted(format!(
            "α error {err:e} too coarse to resolve bundles at M = {m}"
        )));
    }
    if (qv < (1u128 << 127)) != location.even {
        return Err(violation(
            "parity",
            format!("sign of qα − p disagrees with l = {}", location.l),
        ));
    }

    let mut keyed: Vec<(usize, u128, u64)> = (1..=m)
        .map(|j| {
            let pos = v.wrapping_mul(j as u128);
            let p = bundle_of(pos, q);
            // A point at 0 assigned to the last bundle sorts after the rest.
            let key = if pos == 0 { u128::MAX } else { pos };
            (p, key, j)
        })
        .collect();
    keyed.sort_unstable();
    let mut starts = vec![0usize; q as usize + 1];
    for &(p, _, _) in &keyed {
        starts[p + 1] += 1;
    }
    for p in 0..q as usize {
        starts[p + 1] += starts[p];
    }
    let points = keyed
        .into_iter()
        .map(|(_, _, j)| OrbitPoint {
            index: j,
            pos: v.wrapping_mul(j as u128),
        })
        .collect();

    let d = BundleDecomposition {
        location,
        delta,
        alpha_wide: v,
        points,
        starts,
    };
    d.verify()?;
    Ok(d)
}

impl BundleDecomposition {
    pub fn q(&self) -> u64 {
        self.location.q
    }

    pub fn b(&self) -> u64 {
        self.location.b
    }

    pub fn m(&self) -> u64 {
        self.location.m
    }

    pub fn delta_f64(&self) -> f64 {
        self.delta as f64 / TWO_POW_128
    }

    /// The top 128 bits of α used for the grid.
    pub fn alpha_wide(&self) -> u128 {
        self.alpha_wide
    }

    /// Points of bundle `p`, ascending.
    pub fn bundle(&self, p: usize) -> &[OrbitPoint] {
        &self.points[self.starts[p]..self.starts[p + 1]]
    }

    pub fn bundle_sizes(&self) -> Vec<usize> {
        self.starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Every point of `S̄`, bundle by bundle.
    pub fn points(&self) -> &[OrbitPoint] {
        &self.points
    }

    /// Bundle index of the multiplier `j`, if `1 ≤ j ≤ M`.
    pub fn bundle_of_index(&self, j: u64) -> Option<usize> {
        (1..=self.m())
            .contains(&j)
            .then(|| bundle_of(self.alpha_wide.wrapping_mul(j as u128), self.q()))
    }

    fn verify(&self) -> Result<()> {
        let loc = &self.location;
        let (q, a, b) = (loc.q, loc.a, loc.b);
        let delta = self.delta;

        // 1/(q(a+2)) < δ < 1/(qa)
        let two128 = BigUint::one() << 128usize;
        let dq = BigUint::from(delta) * q;
        if !(&dq * (a + 2) > two128 && &dq * a < two128) {
            return Err(violation(
                "inner-gap-range",
                format!("δ = {:e}, q = {q}, a = {a}", self.delta_f64()),
            ));
        }
        let q_delta = delta * q as u128; // < 2^128 because qδ < 1/a

        for p in 0..q as usize {
            let bundle = self.bundle(p);
            let size = bundle.len() as u64;
            if size != b && size != b + 1 {
                return Err(violation(
                    "bundle-size",
                    format!("bundle {p} has {size} points, b = {b}"),
                ));
            }
            for w in bundle.windows(2) {
                if w[1].pos.wrapping_sub(w[0].pos) != delta {
                    return Err(violation(
                        "inner-gap-equal",
                        format!("bundle {p}, indices {} and {}", w[0].index, w[1].index),
                    ));
                }
            }
            // b/(3qa) < span < b/(qa) for b+1 points, and the analogue with b−1.
            let w = size - 1;
            if w >= 1 {
                let span = BigUint::from(bundle[bundle.len() - 1].pos.wrapping_sub(bundle[0].pos));
                let scaled = &span * q * a;
                if !(&scaled * 3u32 > &two128 * w && scaled < &two128 * w) {
                    return Err(violation("bundle-span", format!("bundle {p}: {w} gaps")));
                }
            }
            // Offset of the chain start from its interval endpoint is at most δ.
            let offset_q = if loc.even {
                mul_q(bundle[0].pos, q).1
            } else {
                mul_q(bundle[bundle.len() - 1].pos, q).1.wrapping_neg()
            };
            if offset_q > q_delta {
                return Err(violation(
                    "first-offset",
                    format!(
                        "bundle {p}, parity {}",
                        if loc.even { "even" } else { "odd" }
                    ),
                ));
            }
        }

        // v_{j+1} − v_j ≥ 1/(2q) along every complete column.
        let min_step = (1u128 << 127).div_ceil(q as u128);
        for i in 1..=b as usize {
            let col = self.column(i, false)?;
            for w in col.windows(2) {
                let diff = w[1].pos.wrapping_sub(w[0].pos);
                if diff < min_step {
                    return Err(violation(
                        "column-spacing",
                        format!("column {i}, indices {} and {}", w[0].index, w[1].index),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Column `P_i`: for each bundle, its point with the `i`-th smallest
    /// multiplier (`j = y + (i−1)q`), listed by bundle. For even `l` this is
    /// the `i`-th point from the left, for odd `l` from the right.
    ///
    /// Column `b+1` exists only in bundles of size `b+1`; asking for it
    /// requires `allow_partial`.
    pub fn column(&self, i: usize, allow_partial: bool) -> Result<Vec<OrbitPoint>> {
        if i == 0 || i as u64 > self.b() + 1 {
            return Err(Error::InvalidArgument(format!(
                "column index {i} outside 1..={}",
                self.b() + 1
            )));
        }
        let mut out = Vec::with_capacity(self.q() as usize);
        for p in 0..self.q() as usize {
            let bundle = self.bundle(p);
            if bundle.len() < i {
                if !allow_partial {
                    return Err(Error::IncompleteColumn { column: i });
                }
                continue;
            }
            let k = if self.location.even {
                i - 1
            } else {
                bundle.len() - i
            };
            out.push(bundle[k]);
        }
        Ok(out)
    }

    pub fn column_is_complete(&self, i: usize) -> bool {
        i >= 1 && (0..self.q() as usize).all(|p| self.bundle(p).len() >= i)
    }
}

/// The distinct values of `v_{m+j} − v_j` along one column.
#[derive(Debug, Clone, Serialize)]
pub struct StepDistances {
    pub column: usize,
    pub m: u64,
    /// Distinct values in units of `2^-128`, ascending.
    pub values: Vec<u128>,
    /// `r = (m·q′) mod q`.
    pub r: u64,
    /// For each value, the multiplier `t ∈ {r, r−q, −r, q−r}` with
    /// `{tα}` equal to it, if any.
    pub closed_form: Vec<Option<i128>>,
}

impl StepDistances {
    pub fn values_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| v as f64 / TWO_POW_128)
            .collect()
    }

    pub fn all_match_closed_form(&self) -> bool {
        self.closed_form.iter().all(Option::is_some)
    }
}

/// `{v_{m+j} − v_j : 0 ≤ j ≤ q−1−m}` on a complete column.
pub fn column_step_distances(
    decomp: &BundleDecomposition,
    i: usize,
    m: u64,
) -> Result<StepDistances> {
    let q = decomp.q();
    if m == 0 || m >= q {
        return Err(Error::InvalidArgument(format!(
            "step m must satisfy 0 < m < q = {q}"
        )));
    }
    if !decomp.column_is_complete(i) {
        return Err(Error::IncompleteColumn { column: i });
    }
    let col = decomp.column(i, false)?;
    let m_us = m as usize;
    let mut values: Vec<u128> = (0..col.len() - m_us)
        .map(|j| col[j + m_us].pos.wrapping_sub(col[j].pos))
        .collect();
    values.sort_unstable();
    values.dedup();

    let r = ((m as u128 * decomp.location.q_prev as u128) % q as u128) as u64;
    let v = decomp.alpha_wide();
    let at = |t: i128| -> u128 {
        let mag = v.wrapping_mul(t.unsigned_abs());
        if t < 0 {
            mag.wrapping_neg()
        } else {
            mag
        }
    };
    let candidates = [
        r as i128,
        r as i128 - q as i128,
        -(r as i128),
        q as i128 - r as i128,
    ];
    let closed_form = values
        .iter()
        .map(|&x| candidates.iter().copied().find(|&t| at(t) == x))
        .collect();
    Ok(StepDistances {
        column: i,
        m,
        values,
        r,
        closed_form,
    })
}

/// A circular neighbor gap and how often it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GapValue {
    /// Representative length in units of `2^-64`.
    pub raw: u64,
    pub count: usize,
}

impl GapValue {
    pub fn value(&self) -> f64 {
        self.raw as f64 / 18446744073709551616.0
    }
}

/// Distinct circular neighbor gaps. Gaps that differ by no more than the
/// combined point errors are merged.
pub fn neighbor_gap_values(points: &[CirclePoint]) -> Result<Vec<GapValue>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let mut xs: Vec<u64> = points.iter().map(|p| p.x).collect();
    xs.sort_unstable();
    let max_err = points.iter().map(|p| p.err).fold(0.0, f64::max);
    let tol = (4.0 * max_err * 18446744073709551616.0).ceil() as u64;
    let mut gaps: Vec<u64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(xs[0].wrapping_sub(xs[xs.len() - 1]));
    gaps.sort_unstable();
    let mut out: Vec<GapValue> = Vec::new();
    let mut anchor = gaps[0];
    for g in gaps {
        match out.last_mut() {
            Some(last) if g - anchor <= tol => last.count += 1,
            _ => {
                anchor = g;
                out.push(GapValue { raw: g, count: 1 });
            }
        }
    }
    Ok(out)
}

/// Exact distinct neighbor gaps of `({jV})_{j ≤ M}` on the 128-bit grid.
pub fn orbit_gap_values(alpha: &FixedAlpha, m: u64) -> Result<BTreeMap<u128, usize>> {
    if !(2..=MAX_SCALE).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "M must lie in 2..={MAX_SCALE}"
        )));
    }
    let (v, _) = alpha.wide();
    let mut xs: Vec<u128> = (1..=m as u128).map(|j| v.wrapping_mul(j)).collect();
    xs.sort_unstable();
    let mut out = BTreeMap::new();
    for w in xs.windows(2) {
        *out.entry(w[1] - w[0]).or_insert(0) += 1;
    }
    *out.entry(xs[0].wrapping_sub(xs[xs.len() - 1])).or_insert(0) += 1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::cf_expand;
    use crate::numeric::{frac_parts_u64, resolve_alpha, AlphaSpec};

    fn setup(spec: &str) -> (FixedAlpha, ContinuedFraction) {
        let spec: AlphaSpec = spec.parse().unwrap();
        (
            resolve_alpha(&spec, 128).unwrap(),
            cf_expand(&spec, 200).unwrap(),
        )
    }

    #[test]
    fn golden_five_single_points() {
        let (a, cf) = setup("quad:1,2,5");
        let d = decompose(&a, &cf, 5).unwrap();
        assert_eq!((d.q(), d.b()), (5, 1));
        let vals: Vec<f64> = d.points().iter().map(OrbitPoint::value).collect();
        let expect = [0.0901699, 0.2360679, 0.4721359, 0.6180339, 0.8541019];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-6);
        }
        assert!(d.bundle_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn sqrt2_at_denominator() {
        let (a, cf) = setup("quad:0,1,2");
        let d = decompose(&a, &cf, 12).unwrap();
        assert_eq!((d.q(), d.b()), (12, 1));
        let gaps = neighbor_gap_values(
            &d.points()
                .iter()
                .map(OrbitPoint::to_circle)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(gaps.len() <= 2);
    }

    #[test]
    fn multi_point_bundles_both_parities() {
        let (a, cf) = setup("quad:0,1,2");
        for m in [60, 100, 150, 168, 400, 985, 2000] {
            let d = decompose(&a, &cf, m).unwrap();
            assert_eq!(d.points().len() as u64, m);
        }
        let (a, cf) = setup("quad:-2,1,7");
        for m in 1..400 {
            decompose(&a, &cf, m).unwrap_or_else(|e| panic!("M = {m}: {e}"));
        }
    }

    #[test]
    fn reconstruction_matches_frac_parts() {
        let (a, cf) = setup("quad:3,7,11");
        let m = 5000;
        let d = decompose(&a, &cf, m).unwrap();
        let mut idx: Vec<u64> = d.points().iter().map(|p| p.index).collect();
        idx.sort_unstable();
        assert_eq!(idx, (1..=m).collect::<Vec<_>>());
        let direct = frac_parts_u64(&a, &(1..=m).collect::<Vec<_>>()).unwrap();
        for p in d.points() {
            assert_eq!(p.to_circle().x, direct[p.index as usize - 1].x);
        }
    }

    #[test]
    fn gap_value_examples() {
        let (a, _) = setup("quad:1,2,5");
        let pts = frac_parts_u64(&a, &(1..=10).collect::<Vec<_>>()).unwrap();
        assert_eq!(neighbor_gap_values(&pts).unwrap().len(), 3);
        let fib = frac_parts_u64(&a, &(1..=55).collect::<Vec<_>>()).unwrap();
        assert_eq!(neighbor_gap_values(&fib).unwrap().len(), 2);
        let lattice: Vec<_> = (1..=8).map(|j| CirclePoint::from_ratio(j, 8)).collect();
        let g = neighbor_gap_values(&lattice).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].raw, 1 << 61);
        assert_eq!(orbit_gap_values(&a, 10).unwrap().len(), 3);
    }

    #[test]
    fn golden_column_steps() {
        let (a, cf) = setup("quad:1,2,5");
        let d = decompose(&a, &cf, 13).unwrap();
        let s = column_step_distances(&d, 1, 1).unwrap();
        assert!(s.values.len() <= 2);
        assert!(s.all_match_closed_form());
        // The last admissible step compares a single pair.
        let s = column_step_distances(&d, 1, d.q() - 1).unwrap();
        assert_eq!(s.values.len(), 1);
    }

    #[test]
    fn partial_column_needs_flag() {
        let (a, cf) = setup("quad:0,1,2");
        let d = decompose(&a, &cf, 40).unwrap(); // q = 29, b = 1, eleven 2-point bundles
        assert_eq!((d.q(), d.b()), (29, 1));
        assert!(matches!(
            d.column(2, false),
            Err(Error::IncompleteColumn { column: 2 })
        ));
        assert_eq!(d.column(2, true).unwrap().len(), 11);
        assert!(matches!(
            column_step_distances(&d, 2, 1),
            Err(Error::IncompleteColumn { .. })
        ));
    }

    #[test]
    fn coarse_alpha_is_rejected() {
        let spec: AlphaSpec = "quad:1,2,5".parse().unwrap();
        let cf = cf_expand(&spec, 100).unwrap();
        let a = resolve_alpha(&spec, 64).unwrap();
        assert!(matches!(
            decompose(&a, &cf, 10_000_000),
            Err(Error::PrecisionExhausted(_))
        ));
    }
}
