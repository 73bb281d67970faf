use num_bigint::BigInt;
use pcorr::energy::{additive_energy, difference_profile, energy_ratio_curve, identity_energy};
use pcorr::sequences::{generate, Generator, SequencePrefix};
use proptest::prelude::*;

fn quadruples(xs: &[u64]) -> u128 {
    let mut e = 0u128;
    for &a in xs {
        for &b in xs {
            for &c in xs {
                for &d in xs {
                    e += (a + b == c + d) as u128;
                }
            }
        }
    }
    e
}

#[test]
fn identity_four_is_44() {
    let p = generate(&Generator::Identity, 4, 0).unwrap();
    assert_eq!(quadruples(&[1, 2, 3, 4]), 44);
    assert_eq!(additive_energy(&p).unwrap().energy, 44);
    assert_eq!(identity_energy(4), 44);
}

#[test]
fn big_terms_use_exact_path() {
    // Terms beyond 64 bits.
    let p = generate(&Generator::Lacunary { base: 3 }, 60, 0).unwrap();
    assert!(p.values_u64().is_none());
    let e = additive_energy(&p).unwrap();
    assert_eq!(e.energy, 2 * 60 * 60 - 60);
}

#[test]
fn ratio_curve_for_identity_tends_to_two_thirds() {
    let p = generate(&Generator::Identity, 2000, 0).unwrap();
    let curve = energy_ratio_curve(&p, &[500, 1000, 2000]).unwrap();
    assert!(curve.iter().all(|&(_, r)| (r - 2.0 / 3.0).abs() < 0.01));
}

#[test]
fn profile_is_symmetric_count_of_pairs() {
    let p = SequencePrefix::from_u64(&[1, 3, 4, 9], "t").unwrap();
    let prof = difference_profile(&p).unwrap();
    assert_eq!(prof.total(), 12);
    assert_eq!(prof.a(&BigInt::from(-5)), 1);
    assert_eq!(prof.a(&BigInt::from(2)), 1);
    assert_eq!(prof.a(&BigInt::from(7)), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_matches_quadruple_count(set in prop::collection::btree_set(0u64..200, 2..18)) {
        let xs: Vec<u64> = set.into_iter().collect();
        let p = SequencePrefix::from_u64(&xs, "p").unwrap();
        prop_assert_eq!(additive_energy(&p).unwrap().energy, quadruples(&xs));
    }

    #[test]
    fn energy_is_translation_invariant(set in prop::collection::btree_set(0u64..10_000, 2..60), t in 0u64..1_000_000) {
        let xs: Vec<u64> = set.into_iter().collect();
        let ys: Vec<u64> = xs.iter().map(|x| x + t).collect();
        let e1 = additive_energy(&SequencePrefix::from_u64(&xs, "a").unwrap()).unwrap().energy;
        let e2 = additive_energy(&SequencePrefix::from_u64(&ys, "b").unwrap()).unwrap().energy;
        let n = xs.len() as u128;
        prop_assert_eq!(e1, e2);
        prop_assert!(2 * n * n - n <= e1 && e1 <= n * n * n);
    }
}
