use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcorr::contfrac::cf_expand;
use pcorr::gaps::{column_step_distances, decompose, orbit_gap_values};
use pcorr::numeric::{resolve_alpha, resolve_points, AlphaSpec};
use pcorr::paircorr::r2_curve;
use pcorr::ratio::{ratio_u, rational_to_f64};
use pcorr::sequences::{generate, Generator};
use pcorr::structure::{
    detect_multi, lemma1_check, lemma2_check, lemma3_default_floor, lemma3_frequent_gap, GapConfig,
};
use pcorr::witness::{witness_search, Thresholds};

use crate::commands::{
    load_prefix, parse_alpha, parse_n_list, parse_ratio, parse_ratio_list, usage,
};
use crate::output::{Artifact, Failure};
use crate::Preset;

pub fn run(preset: &Preset, seed: u64) -> Result<Artifact, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match preset {
        Preset::KroneckerNull { n, alpha, margin } => kronecker_null(n, alpha, *margin),
        Preset::DensityCorollary {
            rho,
            alphas,
            n,
            c,
            k,
            margin,
        } => density_corollary(&mut rng, *rho, *alphas, n, c, k, *margin),
        Preset::PoissonControl { n, seq, alpha, s } => {
            poisson_control(&mut rng, *n, seq, alpha.as_deref(), s)
        }
        Preset::LemmaSuite { instances } => lemma_suite(&mut rng, *instances),
        Preset::GapAudit {
            instances,
            max_m,
            triples,
        } => gap_audit(&mut rng, *instances, *max_m, *triples),
    }
}

const WITNESS_ROW: [&str; 9] = [
    "alpha",
    "n",
    "case",
    "s1",
    "s2",
    "measured",
    "poisson_ref",
    "deviation",
    "exceeds_margin",
];

fn witness_table_rows(
    alpha: &AlphaSpec,
    summary: &pcorr::witness::WitnessSummary,
) -> Vec<Vec<String>> {
    summary
        .reports
        .iter()
        .map(|r| {
            let (s1, s2) = match &r.thresholds {
                Thresholds::Single { s } => (String::new(), s.to_string()),
                Thresholds::Pair { s1, s2, .. } => (s1.to_string(), s2.to_string()),
            };
            vec![
                alpha.to_string(),
                r.n.to_string(),
                r.case.to_string(),
                s1,
                s2,
                r.measured.to_string(),
                r.poisson_ref.to_string(),
                r.deviation.to_string(),
                (r.deviation.abs() >= summary.margin).to_string(),
            ]
        })
        .collect()
}

fn kronecker_null(n: &str, alphas: &[String], margin: f64) -> Result<Artifact, Failure> {
    let ns = parse_n_list(n)?;
    let specs: Vec<AlphaSpec> = if alphas.is_empty() {
        vec![AlphaSpec::golden(), parse_alpha("quad:0,1,2")?]
    } else {
        alphas
            .iter()
            .map(|a| parse_alpha(a))
            .collect::<Result<_, _>>()?
    };
    let one = BigRational::one();
    let prefix = generate(&Generator::Identity, *ns.last().expect("non-empty"), 0)?;
    let cert = detect_multi(&prefix, &ns, &one, &one, 3)?;
    let mut rows = Vec::new();
    let mut all = true;
    for alpha in &specs {
        let summary = witness_search(&prefix, alpha, cert.as_ref(), &ns, 4, margin)?;
        all &= summary.exceeds_margin;
        rows.extend(witness_table_rows(alpha, &summary));
    }
    let mut art = Artifact::table(WITNESS_ROW.to_vec(), rows);
    art.status = if all { 0 } else { 1 };
    Ok(art)
}

fn density_corollary(
    rng: &mut ChaCha8Rng,
    rho: f64,
    alphas: usize,
    n: &str,
    c: &str,
    k: &str,
    margin: f64,
) -> Result<Artifact, Failure> {
    let ns = parse_n_list(n)?;
    let (c, k) = (parse_ratio(c)?, parse_ratio(k)?);
    let seq = format!("density:{rho}");
    let prefix = load_prefix(&seq, *ns.last().expect("non-empty"), rng.gen())?;
    let cert = detect_multi(&prefix, &ns, &c, &k, 3)?;
    let mut rows = Vec::new();
    let mut all = true;
    for _ in 0..alphas {
        let alpha = AlphaSpec::random_quadratic(rng);
        let summary = witness_search(&prefix, &alpha, cert.as_ref(), &ns, 4, margin)?;
        all &= summary.exceeds_margin;
        rows.extend(witness_table_rows(&alpha, &summary));
    }
    let mut art = Artifact::table(WITNESS_ROW.to_vec(), rows);
    art.status = if all { 0 } else { 1 };
    Ok(art)
}

fn poisson_control(
    rng: &mut ChaCha8Rng,
    n: usize,
    seq: &str,
    alpha: Option<&str>,
    s: &str,
) -> Result<Artifact, Failure> {
    if n < 2 {
        return Err(usage("N must be at least 2"));
    }
    let alpha = match alpha {
        Some(a) => parse_alpha(a)?,
        None => AlphaSpec::random_quadratic(rng),
    };
    let ss = parse_ratio_list(s)?;
    let prefix = load_prefix(seq, n, rng.gen())?;
    let (_, points) = resolve_points(&alpha, prefix.values())?;
    let curve = r2_curve(&points, &ss)?;
    let rows = curve
        .iter()
        .map(|st| {
            let two_s = 2.0 * rational_to_f64(&st.s);
            vec![
                seq.to_string(),
                alpha.to_string(),
                n.to_string(),
                st.s.to_string(),
                st.value.to_string(),
                two_s.to_string(),
                (st.value - two_s).abs().to_string(),
            ]
        })
        .collect();
    Ok(Artifact::table(
        vec![
            "seq",
            "alpha",
            "n",
            "s",
            "value",
            "poisson_ref",
            "abs_deviation",
        ],
        rows,
    ))
}

struct LemmaTally {
    name: &'static str,
    instances: usize,
    failures: usize,
    min_margin: f64,
}

impl LemmaTally {
    fn new(name: &'static str) -> Self {
        LemmaTally {
            name,
            instances: 0,
            failures: 0,
            min_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, holds: bool, margin: f64) {
        self.instances += 1;
        self.failures += usize::from(!holds);
        self.min_margin = self.min_margin.min(margin);
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.name.into(),
            self.instances.to_string(),
            self.failures.to_string(),
            self.min_margin.to_string(),
        ]
    }
}

fn lemma_suite(rng: &mut ChaCha8Rng, instances: usize) -> Result<Artifact, Failure> {
    let mut t1 = LemmaTally::new("lemma1");
    for _ in 0..instances {
        let tau = rng.gen_range(1..=1000u64);
        let ratio = rng.gen_range(2..=20u64);
        let cfg = GapConfig {
            b: tau * ratio,
            tau,
        };
        let l = (ratio + 1) * rng.gen_range(2..=8u64);
        let pts: Vec<u64> = (0..l).map(|_| rng.gen_range(0..=cfg.b)).collect();
        let out = lemma1_check(&cfg, &pts)?;
        t1.record(out.holds, out.margin());
    }
    let mut t2 = LemmaTally::new("lemma2");
    for _ in 0..instances {
        let tau = rng.gen_range(1..=100u64);
        let ratio = rng.gen_range(2..=10u64);
        let cfg = GapConfig {
            b: tau * ratio,
            tau,
        };
        let q = rng.gen_range(1..=6usize);
        let total = (ratio + 1) * q as u64 * rng.gen_range(3..=6u64);
        let mut intervals = vec![Vec::new(); q];
        for _ in 0..total {
            intervals[rng.gen_range(0..q)].push(rng.gen_range(0..=cfg.b));
        }
        let (out, _) = lemma2_check(&cfg, &intervals)?;
        t2.record(out.holds, out.margin());
    }
    let mut t3 = LemmaTally::new("lemma3");
    for _ in 0..instances {
        let den = rng.gen_range(1..=8u64);
        let alpha = ratio_u(rng.gen_range(1..=den), den);
        let floor = lemma3_default_floor(&alpha)
            .ceil()
            .to_integer()
            .to_u64()
            .expect("small");
        let a = rng.gen_range(floor..=4 * floor + 10);
        let count = ((&alpha * BigRational::from_integer(BigInt::from(a)))
            .ceil()
            .to_integer()
            - BigInt::one())
        .to_u64()
        .expect("small");
        let budget = rng.gen_range(count..=a);
        let mut parts = vec![1u64; count as usize];
        for _ in count..budget {
            let i = rng.gen_range(0..parts.len());
            parts[i] += 1;
        }
        let out = lemma3_frequent_gap(&parts, &alpha, a, None)?;
        t3.record(
            out.holds,
            out.multiplicity as f64 - rational_to_f64(&out.bound),
        );
    }
    let failures = t1.failures + t2.failures + t3.failures;
    let mut art = Artifact::table(
        vec!["lemma", "instances", "failures", "min_margin"],
        vec![t1.row(), t2.row(), t3.row()],
    );
    art.status = if failures == 0 { 0 } else { 1 };
    Ok(art)
}

fn gap_audit(
    rng: &mut ChaCha8Rng,
    instances: usize,
    max_m: u64,
    triples: usize,
) -> Result<Artifact, Failure> {
    if max_m < 2 {
        return Err(usage("max-M must be at least 2"));
    }
    let mut rows = Vec::new();
    let mut bad = 0;
    for _ in 0..instances {
        let spec = AlphaSpec::random_quadratic(rng);
        let m = rng.gen_range(2..=max_m);
        let alpha = resolve_alpha(&spec, 128)?;
        let cf = cf_expand(&spec, 400)?;
        let gaps = orbit_gap_values(&alpha, m)?.len();
        let (q, b, violation, max_steps) = match decompose(&alpha, &cf, m) {
            Ok(d) => {
                let mut max_steps = 0;
                if d.q() > 1 {
                    for _ in 0..triples {
                        let i = rng.gen_range(1..=d.b() as usize);
                        let step = rng.gen_range(1..d.q());
                        max_steps = max_steps.max(column_step_distances(&d, i, step)?.values.len());
                    }
                }
                (d.q(), d.b(), String::new(), max_steps)
            }
            Err(e @ pcorr::Error::InvariantViolation(_)) => (0, 0, e.to_string(), 0),
            Err(e) => return Err(e.into()),
        };
        if gaps > 3 || !violation.is_empty() || max_steps > 2 {
            bad += 1;
        }
        rows.push(vec![
            spec.to_string(),
            m.to_string(),
            q.to_string(),
            b.to_string(),
            gaps.to_string(),
            max_steps.to_string(),
            violation,
        ]);
    }
    let mut art = Artifact::table(
        vec![
            "alpha",
            "m",
            "q",
            "b",
            "gap_count",
            "max_column_distances",
            "violation",
        ],
        rows,
    );
    art.status = if bad == 0 { 0 } else { 1 };
    Ok(art)
}
