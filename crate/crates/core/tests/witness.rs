use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use pcorr::numeric::AlphaSpec;
use pcorr::ratio::{pow2, ratio_u};
use pcorr::sequences::{generate, Generator};
use pcorr::structure::detect_multi;
use pcorr::witness::{
    case_conditions, classify_case, naive_check, reconstruct_thresholds, witness_search,
    CaseContext, CaseId, Thresholds,
};
use proptest::prelude::*;

#[test]
fn thresholds_rebuild_from_report() {
    let one = BigRational::one();
    let ns = [987, 1597];
    let id = generate(&Generator::Identity, 1597, 0).unwrap();
    let cert = detect_multi(&id, &ns, &one, &one, 3).unwrap().unwrap();
    let summary = witness_search(
        &id,
        &"quad:0,1,2".parse().unwrap(),
        Some(&cert),
        &ns,
        3,
        0.5,
    )
    .unwrap();
    for r in &summary.reports {
        let rebuilt = match &r.thresholds {
            Thresholds::Pair { j, span, .. } => {
                reconstruct_thresholds(r.case, &one, &one, Some((j, span)))
            }
            Thresholds::Single { .. } => reconstruct_thresholds(r.case, &one, &one, None),
        }
        .unwrap();
        assert_eq!(rebuilt, r.thresholds);
        assert!(r.subset_measured <= r.measured);
        assert!(r.candidates_evaluated <= 3);
    }
    let json = serde_json::to_value(&summary).unwrap();
    assert!(json["reports"][0]["thresholds"]["kind"].is_string());
}

#[test]
fn density_sequence_deviates() {
    let seq = generate(&"density:0.5".parse().unwrap(), 20_000, 11).unwrap();
    let ns = [5000, 20_000];
    let cert = detect_multi(&seq, &ns, &ratio_u(1, 2), &ratio_u(3, 1), 3)
        .unwrap()
        .unwrap();
    let alpha = AlphaSpec::golden();
    let summary = witness_search(&seq, &alpha, Some(&cert), &ns, 4, 0.2).unwrap();
    assert!(summary.exceeds_margin, "{}", summary.max_abs_deviation);
    let small = &summary.reports[0];
    let naive = naive_check(&seq, &alpha, small).unwrap();
    assert!((naive - small.measured).abs() < 1e-12);
}

#[test]
fn bad_inputs() {
    let id = generate(&Generator::Identity, 100, 0).unwrap();
    let one = BigRational::one();
    let cert = detect_multi(&id, &[50, 100], &one, &one, 3)
        .unwrap()
        .unwrap();
    let golden = AlphaSpec::golden();
    assert!(witness_search(&id, &golden, Some(&cert), &[100, 50], 1, 0.5).is_err());
    assert!(witness_search(&id, &golden, Some(&cert), &[60], 1, 0.5).is_err());
}

fn context(n_log: u32, q_log: u32, a_log: u32, b: u64, delta_den_extra: u64) -> CaseContext {
    let n = 1usize << n_log;
    let q = 1u64 << q_log.min(n_log);
    let a = 1u64 << a_log;
    let b = b.clamp(1, a);
    let delta = BigRational::new(
        BigInt::one(),
        BigInt::from(a as u128 * q as u128 + delta_den_extra.min(q) as u128 + 1),
    );
    let one = BigRational::one();
    CaseContext::synthetic(
        n,
        one.clone(),
        one.clone(),
        one.clone(),
        one,
        q,
        a,
        b,
        delta,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn classifier_is_total(n_log in 1u32..62, q_log in 0u32..62, a_log in 0u32..40, b in 1u64..1 << 20, x in 0u64..1 << 20) {
        let ctx = context(n_log, q_log, a_log, b, x);
        let conds = case_conditions(&ctx);
        prop_assert!(conds.iter().any(|&c| c));
        let case = classify_case(&ctx);
        let idx = [CaseId::Case1, CaseId::Case2, CaseId::Case3, CaseId::Case4].iter().position(|&c| c == case).unwrap();
        prop_assert!(conds[idx]);
        if conds[3] {
            prop_assert_eq!(case, CaseId::Case4);
        }
    }
}

#[test]
fn case4_is_a_pure_size_test() {
    // K·2^29·q ≥ c^5·N, independent of a, b and δ.
    let ctx = context(40, 11, 30, 1, 0);
    assert_eq!(classify_case(&ctx), CaseId::Case4);
    let ctx = context(40, 10, 30, 1, 0);
    assert_ne!(classify_case(&ctx), CaseId::Case4);
    assert!(
        pow2(29) * BigRational::from_integer((1u64 << 11).into())
            >= BigRational::from_integer((1u64 << 40).into())
    );
}
