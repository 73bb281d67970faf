//! Difference profile `A_N(v) = #{(x, y) : a_x − a_y = v}` and additive
//! energy `E(A_N) = #{a + b = c + d}`.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sequences::SequencePrefix;

/// Default prefix length above which energies are flagged as expensive.
pub const DEFAULT_ENERGY_CAP: usize = 30_000;
/// Hard limit for the quadratic algorithm.
pub const HARD_ENERGY_CAP: usize = 100_000;

const DENSE_SPAN: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyProfile {
    pub n: usize,
    /// `(v, A_N(v))` for `v > 0` in ascending order; `A_N(−v) = A_N(v)`.
    #[serde(serialize_with = "ser_counts")]
    pub diff_counts: Vec<(BigInt, u64)>,
    /// `E(A_N)`; zero until [`additive_energy`] fills it in.
    pub energy: u128,
    /// `E / N³`.
    pub ratio: f64,
    /// `N` exceeded [`DEFAULT_ENERGY_CAP`].
    pub above_cap: bool,
}

fn ser_counts<S: serde::Serializer>(
    v: &[(BigInt, u64)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (d, c) in v {
        seq.serialize_element(&(d.to_string(), c))?;
    }
    seq.end()
}

impl EnergyProfile {
    /// `A_N(v)` for any `v ≠ 0`; `A_N(0)` is reported as 0.
    pub fn a(&self, v: &BigInt) -> u64 {
        if v.is_zero() {
            return 0;
        }
        let key = v.abs();
        self.diff_counts
            .binary_search_by(|(d, _)| d.cmp(&key))
            .map(|i| self.diff_counts[i].1)
            .unwrap_or(0)
    }

    /// `Σ_{v ≠ 0} A_N(v)²`.
    pub fn sum_squares(&self) -> u128 {
        2 * self
            .diff_counts
            .iter()
            .map(|&(_, c)| (c as u128) * (c as u128))
            .sum::<u128>()
    }

    /// `Σ_{v ≠ 0} A_N(v)`, which equals `N(N − 1)`.
    pub fn total(&self) -> u128 {
        2 * self
            .diff_counts
            .iter()
            .map(|&(_, c)| c as u128)
            .sum::<u128>()
    }

    /// Number of nonzero `v` with `A_N(v) > 0`.
    pub fn support(&self) -> usize {
        2 * self.diff_counts.len()
    }

    /// The `k` most frequent positive differences, ties broken by smaller `v`.
    pub fn top_differences(&self, k: usize) -> Vec<(BigInt, u64)> {
        let mut v = self.diff_counts.clone();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

/// Values shifted by their minimum, as `u64` when they fit.
fn shifted_u64(prefix: &SequencePrefix) -> Option<Vec<u64>> {
    let min = prefix.values().iter().min()?;
    prefix.values().iter().map(|v| (v - min).to_u64()).collect()
}

fn sorted_u64(prefix: &SequencePrefix) -> Option<Vec<u64>> {
    let mut v = shifted_u64(prefix)?;
    // Sums of two shifted values must fit as well.
    if v.iter().any(|&x| x > u64::MAX / 2) {
        return None;
    }
    v.sort_unstable();
    Some(v)
}

fn check_len(prefix: &SequencePrefix) -> Result<()> {
    if prefix.len() < 2 {
        return Err(Error::InvalidArgument("energy needs N ≥ 2".into()));
    }
    if prefix.len() > HARD_ENERGY_CAP {
        return Err(Error::InvalidArgument(format!(
            "N = {} exceeds the energy limit {HARD_ENERGY_CAP}",
            prefix.len()
        )));
    }
    Ok(())
}

/// Exact `A_N(v)` for all `v`, by enumerating ordered pairs.
pub fn difference_profile(prefix: &SequencePrefix) -> Result<EnergyProfile> {
    check_len(prefix)?;
    let n = prefix.len();
    let diff_counts = match sorted_u64(prefix) {
        Some(xs) => positive_differences_u64(&xs),
        None => positive_differences_big(prefix.values()),
    };
    Ok(EnergyProfile {
        n,
        diff_counts,
        energy: 0,
        ratio: 0.0,
        above_cap: n > DEFAULT_ENERGY_CAP,
    })
}

fn positive_differences_u64(xs: &[u64]) -> Vec<(BigInt, u64)> {
    let span = xs[xs.len() - 1] - xs[0];
    if span <= DENSE_SPAN {
        let mut counts = vec![0u64; span as usize + 1];
        for (i, &a) in xs.iter().enumerate() {
            for &b in &xs[i + 1..] {
                counts[(b - a) as usize] += 1;
            }
        }
        counts
            .into_iter()
            .enumerate()
            .skip(1)
            .filter(|&(_, c)| c > 0)
            .map(|(v, c)| (BigInt::from(v), c))
            .collect()
    } else {
        let map = (0..xs.len())
            .into_par_iter()
            .fold(HashMap::<u64, u64>::new, |mut m, i| {
                for &b in &xs[i + 1..] {
                    *m.entry(b - xs[i]).or_default() += 1;
                }
                m
            })
            .reduce(HashMap::new, merge_maps);
        let mut v: Vec<(u64, u64)> = map.into_iter().collect();
        v.sort_unstable();
        v.into_iter().map(|(d, c)| (BigInt::from(d), c)).collect()
    }
}

fn positive_differences_big(values: &[BigUint]) -> Vec<(BigInt, u64)> {
    let mut xs: Vec<BigInt> = values.iter().cloned().map(BigInt::from).collect();
    xs.sort();
    let mut map: HashMap<BigInt, u64> = HashMap::new();
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            *map.entry(b - a).or_default() += 1;
        }
    }
    let mut v: Vec<(BigInt, u64)> = map.into_iter().collect();
    v.sort();
    v
}

fn merge_maps<K: std::hash::Hash + Eq>(
    mut a: HashMap<K, u64>,
    b: HashMap<K, u64>,
) -> HashMap<K, u64> {
    let (mut big, small) = if a.len() >= b.len() {
        (std::mem::take(&mut a), b)
    } else {
        (b, a)
    };
    for (k, c) in small {
        *big.entry(k).or_default() += c;
    }
    big
}

/// Additive energy counted through sum representations `r(t) = #{a + b = t}`
/// and cross-checked against `N² + Σ_{v≠0} A_N(v)²`.
pub fn additive_energy(prefix: &SequencePrefix) -> Result<EnergyProfile> {
    let mut profile = difference_profile(prefix)?;
    let by_sums = match sorted_u64(prefix) {
        Some(xs) => energy_by_sums_u64(&xs),
        None => energy_by_sums_big(prefix.values()),
    };
    let n = prefix.len() as u128;
    let by_diffs = n * n + profile.sum_squares();
    if by_sums != by_diffs {
        return Err(Error::InternalMismatch(format!(
            "sum count {by_sums} ≠ difference count {by_diffs}"
        )));
    }
    profile.energy = by_sums;
    profile.ratio = by_sums as f64 / (n as f64).powi(3);
    Ok(profile)
}

fn energy_by_sums_u64(xs: &[u64]) -> u128 {
    let span = xs[xs.len() - 1] - xs[0];
    // Ordered representations: r(t) = 2·#{i < j} + #{i = j}.
    if 2 * span <= 2 * DENSE_SPAN {
        let base = 2 * xs[0];
        let mut r = vec![0u64; (2 * span) as usize + 1];
        for (i, &a) in xs.iter().enumerate() {
            r[(2 * a - base) as usize] += 1;
            for &b in &xs[i + 1..] {
                r[(a + b - base) as usize] += 2;
            }
        }
        r.into_iter().map(|c| (c as u128) * (c as u128)).sum()
    } else {
        let map = (0..xs.len())
            .into_par_iter()
            .fold(HashMap::<u64, u64>::new, |mut m, i| {
                let a = xs[i];
                *m.entry(2 * a).or_default() += 1;
                for &b in &xs[i + 1..] {
                    *m.entry(a + b).or_default() += 2;
                }
                m
            })
            .reduce(HashMap::new, merge_maps);
        map.into_values().map(|c| (c as u128) * (c as u128)).sum()
    }
}

fn energy_by_sums_big(values: &[BigUint]) -> u128 {
    let mut map: HashMap<BigUint, u64> = HashMap::new();
    for (i, a) in values.iter().enumerate() {
        *map.entry(a + a).or_default() += 1;
        for b in &values[i + 1..] {
            *map.entry(a + b).or_default() += 2;
        }
    }
    map.into_values().map(|c| (c as u128) * (c as u128)).sum()
}

/// `(N, E(A_N)/N³)` for each prefix length in an increasing list.
pub fn energy_ratio_curve(prefix: &SequencePrefix, n_list: &[usize]) -> Result<Vec<(usize, f64)>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N list must be increasing".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            if n > prefix.len() {
                return Err(Error::InvalidArgument(format!(
                    "N = {n} exceeds the prefix length {}",
                    prefix.len()
                )));
            }
            Ok((n, additive_energy(&prefix.prefix(n))?.ratio))
        })
        .collect()
}

/// `N² + (N − 1)N(2N − 1)/3`, the energy of `{1, ..., N}`.
pub fn identity_energy(n: u64) -> u128 {
    let n = n as u128;
    n * n + (n - 1) * n * (2 * n - 1) / 3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{generate, Generator};
    use proptest::prelude::*;

    fn seq(v: &[u64]) -> SequencePrefix {
        SequencePrefix::from_u64(v, "t").unwrap()
    }

    fn brute_energy(v: &[u64]) -> u128 {
        let mut e = 0;
        for &a in v {
            for &b in v {
                for &c in v {
                    for &d in v {
                        if a + b == c + d {
                            e += 1;
                        }
                    }
                }
            }
        }
        e
    }

    #[test]
    fn small_profiles() {
        let p = difference_profile(&seq(&[1, 2, 3, 4])).unwrap();
        let a = |v: i64| p.a(&BigInt::from(v));
        assert_eq!((a(1), a(2), a(3), a(-1), a(-3), a(4)), (3, 2, 1, 3, 1, 0));
        let p = difference_profile(&seq(&[2, 4, 8])).unwrap();
        assert_eq!(
            p.diff_counts,
            vec![
                (BigInt::from(2), 1),
                (BigInt::from(4), 1),
                (BigInt::from(6), 1)
            ]
        );
    }

    #[test]
    fn small_energies() {
        assert_eq!(additive_energy(&seq(&[1, 2, 3, 4])).unwrap().energy, 44);
        assert_eq!(brute_energy(&[1, 2, 3, 4]), 44);
        assert_eq!(additive_energy(&seq(&[2, 4, 8])).unwrap().energy, 15);
        assert_eq!(identity_energy(4), 44);
    }

    #[test]
    fn lacunary_twenty_terms() {
        let p = generate(&Generator::Lacunary { base: 2 }, 20, 0).unwrap();
        let e = additive_energy(&p).unwrap().energy;
        let v: Vec<u64> = p.values_u64().unwrap();
        assert_eq!(e, brute_energy(&v));
        assert_eq!(e, 2 * 20 * 20 - 20);
    }

    #[test]
    fn big_integer_path_matches() {
        let p = generate(&Generator::Lacunary { base: 3 }, 60, 0).unwrap();
        let e = additive_energy(&p).unwrap();
        assert_eq!(e.energy, 2 * 60 * 60 - 60);
        assert_eq!(e.total(), 60 * 59);
    }

    #[test]
    fn identity_ratio_approaches_two_thirds() {
        let p = generate(&Generator::Identity, 2000, 0).unwrap();
        let curve = energy_ratio_curve(&p, &[100, 1000, 2000]).unwrap();
        for &(n, r) in &curve {
            assert!((r - identity_energy(n as u64) as f64 / (n as f64).powi(3)).abs() < 1e-12);
        }
        assert!((curve[2].1 - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn squares_ratio_decreases() {
        let p = generate(&Generator::Squares, 1000, 0).unwrap();
        let curve = energy_ratio_curve(&p, &[100, 1000]).unwrap();
        assert!(curve[1].1 < curve[0].1);
    }

    #[test]
    fn sparse_hash_path() {
        let v: Vec<u64> = (1..300u64).map(|i| i * i * i * 7 + i).collect();
        let e = additive_energy(&seq(&v)).unwrap();
        assert_eq!(e.total(), 299 * 298);
    }

    proptest! {
        #[test]
        fn identity_and_bounds(v in prop::collection::btree_set(0u64..5000, 2..120)) {
            let v: Vec<u64> = v.into_iter().collect();
            let e = additive_energy(&seq(&v)).unwrap();
            let n = v.len() as u128;
            prop_assert_eq!(e.total(), n * (n - 1));
            prop_assert!(e.energy >= n * n && e.energy <= n * n * n);
            // Cauchy–Schwarz over the nonzero support.
            let tot = e.total();
            prop_assert!(e.sum_squares() * e.support() as u128 >= tot * tot);
        }

        #[test]
        fn affine_invariance(v in prop::collection::btree_set(0u64..2000, 2..60), c in 1u64..20, h in 0u64..100_000) {
            let v: Vec<u64> = v.into_iter().collect();
            let w: Vec<u64> = v.iter().map(|x| c * x + h).collect();
            prop_assert_eq!(additive_energy(&seq(&v)).unwrap().energy, additive_energy(&seq(&w)).unwrap().energy);
        }

        #[test]
        fn matches_brute_force(v in prop::collection::btree_set(0u64..60, 2..14)) {
            let v: Vec<u64> = v.into_iter().collect();
            prop_assert_eq!(additive_energy(&seq(&v)).unwrap().energy, brute_energy(&v));
        }
    }
}
