//! The pair-correlation statistic
//! `R_N(s) = (1/N) · #{i ≠ j ≤ N : ‖x_i − x_j‖ ≤ s/N}`.
//!
//! All comparisons happen on the 64-bit circle grid. The threshold `s/N`
//! is rounded up to the grid, so a pair whose grid distance ties with
//! `s/N` is always counted.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{circle_distance_raw, CirclePoint};
use crate::ratio::serde_ratio;

/// Below this many points the counting loops stay sequential.
const PAR_MIN: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrStat {
    pub n: usize,
    #[serde(with = "serde_ratio")]
    pub s: BigRational,
    /// Ordered pairs, so always even.
    pub pair_count: u64,
    pub value: f64,
    /// `s/N` exceeded `1/2` and every pair was counted.
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStat {
    pub n: usize,
    #[serde(with = "serde_ratio")]
    pub s1: BigRational,
    #[serde(with = "serde_ratio")]
    pub s2: BigRational,
    /// Ordered pairs with `s1/N < ‖x_i − x_j‖ ≤ s2/N`.
    pub pair_count: u64,
    pub value: f64,
}

/// A grid threshold for `s/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    /// Count pairs with grid distance `≤ raw` (`raw < 2^63`).
    Raw(u64),
    /// `s/N ≥ 1/2`: every pair is within range.
    All,
}

impl Threshold {
    /// `⌈s · 2^64 / N⌉`, saturating to [`Threshold::All`].
    pub fn new(s: &BigRational, n: usize) -> Result<Self> {
        if s.is_negative() {
            return Err(Error::InvalidArgument("s must be non-negative".into()));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let num: BigInt = s.numer().clone() << 64usize;
        let den = s.denom() * BigInt::from(n);
        let thr = num.div_ceil(&den);
        if thr >= BigInt::from(1u64 << 63) {
            return Ok(Threshold::All);
        }
        Ok(Threshold::Raw(thr.to_u64().expect("below 2^63")))
    }

    fn is_capped(s: &BigRational, n: usize) -> bool {
        // s/N > 1/2
        s.numer() * BigInt::from(2) > s.denom() * BigInt::from(n)
    }
}

fn check_inputs(points: &[CirclePoint], s: &BigRational) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "pair correlation needs at least two points".into(),
        ));
    }
    if s.is_zero() {
        return Ok(());
    }
    let tol = s.to_f64().unwrap_or(f64::INFINITY) / points.len() as f64 * 1e-6;
    let worst = points.iter().map(|p| p.err).fold(0.0, f64::max);
    if worst >= tol {
        return Err(Error::PrecisionExhausted(format!(
            "point error {worst:e} is not below (s/N)·1e-6 = {tol:e}"
        )));
    }
    Ok(())
}

fn stat(n: usize, s: &BigRational, unordered: u64) -> PairCorrStat {
    let pair_count = 2 * unordered;
    PairCorrStat {
        n,
        s: s.clone(),
        pair_count,
        value: pair_count as f64 / n as f64,
        capped: Threshold::is_capped(s, n),
    }
}

/// Direct `O(N²)` count over all pairs.
pub fn r2_naive(points: &[CirclePoint], s: &BigRational) -> Result<PairCorrStat> {
    if s.is_zero() || s.is_negative() {
        return Err(Error::InvalidArgument("s must be positive".into()));
    }
    check_inputs(points, s)?;
    let n = points.len();
    let unordered = match Threshold::new(s, n)? {
        Threshold::All => (n as u64) * (n as u64 - 1) / 2,
        Threshold::Raw(thr) => {
            let row = |i: usize| -> u64 {
                let xi = points[i].x;
                points[i + 1..]
                    .iter()
                    .filter(|p| circle_distance_raw(xi, p.x) <= thr)
                    .count() as u64
            };
            if n >= 4096 {
                (0..n).into_par_iter().map(row).sum()
            } else {
                (0..n).map(row).sum()
            }
        }
    };
    Ok(stat(n, s, unordered))
}

/// Points sorted on the grid, ready for repeated threshold counts.
#[derive(Debug, Clone)]
pub struct SortedPoints {
    xs: Vec<u64>,
}

impl SortedPoints {
    pub fn new(points: &[CirclePoint]) -> Self {
        Self::from_raw(points.iter().map(|p| p.x).collect())
    }

    pub fn from_raw(mut xs: Vec<u64>) -> Self {
        if xs.len() >= PAR_MIN {
            xs.par_sort_unstable();
        } else {
            xs.sort_unstable();
        }
        SortedPoints { xs }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn raw(&self) -> &[u64] {
        &self.xs
    }

    /// Unordered pairs with grid circle distance `≤ thr`.
    pub fn count_within(&self, thr: Threshold) -> u64 {
        let n = self.xs.len() as u64;
        match thr {
            Threshold::All => n * n.saturating_sub(1) / 2,
            Threshold::Raw(t) => self.chunked(|range| self.count_range(range, t)),
        }
    }

    /// Unordered pairs with `lo < distance ≤ hi`, counted in one pass.
    pub fn count_band(&self, lo: Threshold, hi: Threshold) -> u64 {
        match (lo, hi) {
            (Threshold::All, _) => 0,
            (Threshold::Raw(_), Threshold::All) => {
                self.count_within(Threshold::All) - self.count_within(lo)
            }
            (Threshold::Raw(a), Threshold::Raw(b)) => {
                if a >= b {
                    return 0;
                }
                self.chunked(|range| {
                    self.count_range(range.clone(), b) - self.count_range(range, a)
                })
            }
        }
    }

    fn chunked<F>(&self, f: F) -> u64
    where
        F: Fn(std::ops::Range<usize>) -> u64 + Sync + Send,
    {
        let n = self.xs.len();
        if n < PAR_MIN {
            return f(0..n);
        }
        let chunk = n.div_ceil(rayon::current_num_threads() * 4).max(4096);
        let ranges: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|a| a..(a + chunk).min(n))
            .collect();
        ranges.into_par_iter().map(f).sum()
    }

    /// Pairs `(i, j)`, `i < j`, `j ∈ range`, with distance `≤ t < 2^63`.
    ///
    /// Sorted `x_i ≤ x_j` give a linear difference `d = x_j − x_i`; the
    /// circle distance is within `t` iff `d ≤ t` or `d ≥ 2^64 − t`, and the
    /// two ranges are disjoint.
    fn count_range(&self, range: std::ops::Range<usize>, t: u64) -> u64 {
        let xs = &self.xs;
        if range.is_empty() {
            return 0;
        }
        let wrap = t.wrapping_neg(); // 2^64 − t, or 0 when t = 0
        let first = xs[range.start];
        let mut lo = xs.partition_point(|&x| x < first.saturating_sub(t));
        let mut hi: Option<usize> = None;
        let mut total = 0u64;
        for j in range {
            let xj = xs[j];
            let floor = xj.saturating_sub(t);
            while xs[lo] < floor {
                lo += 1;
            }
            total += (j - lo) as u64;
            if t != 0 && xj >= wrap {
                let cut = xj - wrap;
                let h = hi.get_or_insert_with(|| xs.partition_point(|&x| x <= cut));
                while *h < j && xs[*h] <= cut {
                    *h += 1;
                }
                total += *h as u64;
            }
        }
        total
    }
}

/// Sort-and-sweep count; agrees with [`r2_naive`] exactly.
pub fn r2_fast(points: &[CirclePoint], s: &BigRational) -> Result<PairCorrStat> {
    if s.is_zero() || s.is_negative() {
        return Err(Error::InvalidArgument("s must be positive".into()));
    }
    check_inputs(points, s)?;
    let sorted = SortedPoints::new(points);
    Ok(stat(
        points.len(),
        s,
        sorted.count_within(Threshold::new(s, points.len())?),
    ))
}

/// `R_N(s2) − R_N(s1)` counted directly over the band `(s1/N, s2/N]`.
pub fn r2_window(points: &[CirclePoint], s1: &BigRational, s2: &BigRational) -> Result<WindowStat> {
    if s1.is_negative() || s1 >= s2 {
        return Err(Error::InvalidArgument("window needs 0 ≤ s1 < s2".into()));
    }
    check_inputs(points, s2)?;
    let n = points.len();
    let sorted = SortedPoints::new(points);
    let pair_count = 2 * sorted.count_band(Threshold::new(s1, n)?, Threshold::new(s2, n)?);
    Ok(WindowStat {
        n,
        s1: s1.clone(),
        s2: s2.clone(),
        pair_count,
        value: pair_count as f64 / n as f64,
    })
}

/// `R_N(s)` for each `s`, sorting the points once.
pub fn r2_curve(points: &[CirclePoint], s_list: &[BigRational]) -> Result<Vec<PairCorrStat>> {
    if s_list.iter().any(|s| s.is_zero() || s.is_negative()) {
        return Err(Error::InvalidArgument("s must be positive".into()));
    }
    if let Some(smin) = s_list.iter().min() {
        check_inputs(points, smin)?;
    }
    let n = points.len();
    let sorted = SortedPoints::new(points);
    s_list
        .iter()
        .map(|s| Ok(stat(n, s, sorted.count_within(Threshold::new(s, n)?))))
        .collect()
}

/// `(s/N)·2^64` as an exact integer ratio, for callers that need to
/// compare grid distances with thresholds directly.
pub fn threshold_units(s: &BigRational, n: usize) -> BigRational {
    s * BigRational::from_integer(BigInt::from(BigUint::from(1u8) << 64))
        / BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{parse_rational, ratio_u};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[f64]) -> Vec<CirclePoint> {
        v.iter().map(|&x| CirclePoint::from_f64(x)).collect()
    }

    #[test]
    fn antipodal_pair_at_threshold() {
        let r = r2_naive(&pts(&[0.0, 0.5]), &ratio_u(1, 1)).unwrap();
        assert_eq!((r.pair_count, r.value), (2, 1.0));
        assert_eq!(
            r2_fast(&pts(&[0.0, 0.5]), &ratio_u(1, 1))
                .unwrap()
                .pair_count,
            2
        );
    }

    #[test]
    fn three_points_wraparound() {
        let p = pts(&[0.1, 0.2, 0.9]);
        let s = parse_rational("0.9").unwrap();
        let r = r2_naive(&p, &s).unwrap();
        assert_eq!((r.pair_count, r.value), (6, 2.0));
        assert_eq!(r2_fast(&p, &s).unwrap().pair_count, 6);
    }

    #[test]
    fn equal_points_complete_graph() {
        let p = vec![CirclePoint::from_raw(12345); 10];
        for s in [ratio_u(1, 1000), ratio_u(3, 1)] {
            assert_eq!(r2_fast(&p, &s).unwrap().pair_count, 90);
            assert_eq!(r2_naive(&p, &s).unwrap().pair_count, 90);
        }
    }

    #[test]
    fn window_examples() {
        let p: Vec<_> = (0..3).map(|i| CirclePoint::from_ratio(i, 3)).collect();
        let w = r2_window(&p, &ratio_u(1, 2), &ratio_u(3, 2)).unwrap();
        assert_eq!((w.pair_count, w.value), (6, 2.0));
        let q = pts(&[0.1, 0.15, 0.4, 0.77, 0.93]);
        let s = ratio_u(7, 10);
        assert_eq!(
            r2_window(&q, &BigRational::zero(), &s).unwrap().pair_count,
            r2_fast(&q, &s).unwrap().pair_count
        );
    }

    #[test]
    fn capped_threshold_counts_everything() {
        let r = r2_fast(&pts(&[0.0, 0.25, 0.5]), &ratio_u(2, 1)).unwrap();
        assert!(r.capped);
        assert_eq!(r.pair_count, 6);
    }

    #[test]
    fn precision_guard() {
        let mut p = pts(&[0.1, 0.3]);
        p[0].err = 1e-3;
        assert!(matches!(
            r2_fast(&p, &ratio_u(1, 1)),
            Err(Error::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn uniform_null_near_two_s() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<_> = (0..1000)
                .map(|_| CirclePoint::from_raw(rng.gen()))
                .collect();
            let r = r2_fast(&p, &ratio_u(1, 1)).unwrap();
            if (r.value - 2.0 * 999.0 / 1000.0).abs() <= 0.3 {
                hits += 1;
            }
        }
        assert!(hits >= 99, "{hits}");
    }

    #[test]
    fn partition_conserves_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<_> = (0..300)
            .map(|_| CirclePoint::from_raw(rng.gen::<u64>() & !0xff))
            .collect();
        let n = p.len() as u64;
        let cuts = [0u64, 7, 20, 33, 90, 150];
        let mut total = 0;
        for w in cuts.windows(2) {
            total += r2_window(&p, &ratio_u(w[0], 1), &ratio_u(w[1], 1))
                .unwrap()
                .pair_count;
        }
        let zero = p
            .iter()
            .enumerate()
            .map(|(i, a)| p.iter().skip(i + 1).filter(|b| b.x == a.x).count() as u64)
            .sum::<u64>()
            * 2;
        assert_eq!(total, n * n - n - zero);
    }

    proptest! {
        #[test]
        fn fast_matches_naive(
            raw in prop::collection::vec(any::<u64>(), 2..400),
            clumps in 0usize..4,
            num in 1u64..10_000,
        ) {
            let mut xs = raw;
            // Force ties and near-ties.
            for c in 0..clumps.min(xs.len() / 2) {
                xs[2 * c + 1] = xs[2 * c].wrapping_add(c as u64);
            }
            let p: Vec<_> = xs.into_iter().map(CirclePoint::from_raw).collect();
            let s = ratio_u(num, 1000);
            let a = r2_naive(&p, &s).unwrap();
            let b = r2_fast(&p, &s).unwrap();
            prop_assert_eq!(a.pair_count, b.pair_count);
            prop_assert_eq!(a.pair_count % 2, 0);
        }

        #[test]
        fn curve_monotone(raw in prop::collection::vec(any::<u64>(), 2..300)) {
            let p: Vec<_> = raw.into_iter().map(CirclePoint::from_raw).collect();
            let s: Vec<_> = (1..20).map(|k| ratio_u(k, 4)).collect();
            let c = r2_curve(&p, &s).unwrap();
            for w in c.windows(2) {
                prop_assert!(w[0].value <= w[1].value);
            }
            for (st, s) in c.iter().zip(&s) {
                prop_assert_eq!(st.pair_count, r2_fast(&p, s).unwrap().pair_count);
            }
        }

        #[test]
        fn exact_threshold_ties(n in 2u64..50, k in 1u64..50) {
            // Points i/n: distances are exact multiples of 1/n up to one ulp.
            let p: Vec<_> = (0..n).map(|i| CirclePoint::from_ratio(i, n)).collect();
            let s = ratio_u(k, 1);
            let a = r2_naive(&p, &s).unwrap();
            let b = r2_fast(&p, &s).unwrap();
            prop_assert_eq!(a.pair_count, b.pair_count);
        }
    }
}
