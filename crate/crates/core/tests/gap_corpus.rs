use pcorr::contfrac::cf_expand;
use pcorr::gaps::{column_step_distances, decompose, orbit_gap_values};
use pcorr::numeric::{resolve_alpha, AlphaSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_quadratic_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..300 {
        let spec = AlphaSpec::random_quadratic(&mut rng);
        let alpha = resolve_alpha(&spec, 128).unwrap();
        let cf = cf_expand(&spec, 400).unwrap();
        let m = rng.gen_range(2..20_000u64);
        let d =
            decompose(&alpha, &cf, m).unwrap_or_else(|e| panic!("case {case} {spec} M={m}: {e}"));
        assert!(orbit_gap_values(&alpha, m).unwrap().len() <= 3);
        if d.q() > 1 {
            for _ in 0..10 {
                let i = rng.gen_range(1..=d.b() as usize);
                let step = rng.gen_range(1..d.q());
                let s = column_step_distances(&d, i, step).unwrap();
                assert!(s.values.len() <= 2, "{spec} M={m}");
                assert!(s.all_match_closed_form(), "{spec} M={m} i={i} step={step}");
            }
        }
    }
}
