use num_rational::BigRational;
use serde_json::{json, Value};

use pcorr::contfrac::{cf_expand, convergents, locate_scale, Tail};
use pcorr::energy::additive_energy;
use pcorr::gaps::{decompose, orbit_gap_values};
use pcorr::numeric::{resolve_alpha, resolve_points, AlphaSpec};
use pcorr::paircorr::{r2_fast, r2_naive};
use pcorr::ratio::{parse_rational, rational_to_f64};
use pcorr::sequences::{generate, Generator, SequencePrefix};
use pcorr::structure::{detect_multi, QuasiArithCertificate};
use pcorr::witness::{witness_search, Thresholds, WitnessSummary};

use crate::output::{Artifact, Failure};
use crate::{CfArgs, DetectArgs, EnergyArgs, GapsArgs, R2Args, WitnessArgs};

pub fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

pub fn parse_alpha(s: &str) -> Result<AlphaSpec, Failure> {
    match s {
        "golden" => Ok(AlphaSpec::golden()),
        _ => s.parse().map_err(usage),
    }
}

pub fn parse_ratio(s: &str) -> Result<BigRational, Failure> {
    parse_rational(s).map_err(usage)
}

pub fn parse_ratio_list(s: &str) -> Result<Vec<BigRational>, Failure> {
    s.split(',').map(|t| parse_ratio(t.trim())).collect()
}

fn parse_count(t: &str) -> Result<usize, Failure> {
    let t = t.trim();
    if let Ok(n) = t.parse::<usize>() {
        return Ok(n);
    }
    // Accept `1e5` style integers.
    match t.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e18 => Ok(f as usize),
        _ => Err(usage(format!("not a prefix length: `{t}`"))),
    }
}

/// `a,b,c` or `geom:lo:hi:count` (rounded, deduplicated, increasing).
pub fn parse_n_list(s: &str) -> Result<Vec<usize>, Failure> {
    let list = if let Some(body) = s.strip_prefix("geom:") {
        let parts: Vec<&str> = body.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(usage("geometric list is geom:lo:hi:count"));
        };
        let (lo, hi, count) = (parse_count(lo)?, parse_count(hi)?, parse_count(count)?);
        if lo == 0 || hi < lo || count < 2 {
            return Err(usage("geometric list needs 0 < lo ≤ hi and count ≥ 2"));
        }
        let ratio = (hi as f64 / lo as f64).powf(1.0 / (count - 1) as f64);
        let mut v: Vec<usize> = (0..count)
            .map(|i| (lo as f64 * ratio.powi(i as i32)).round() as usize)
            .collect();
        v[count - 1] = hi;
        v.dedup();
        v
    } else {
        s.split(',').map(parse_count).collect::<Result<_, _>>()?
    };
    if list.is_empty() || list.windows(2).any(|w| w[0] >= w[1]) || list[0] < 2 {
        return Err(usage("prefix lengths must be increasing and at least 2"));
    }
    Ok(list)
}

pub fn parse_generator(s: &str) -> Result<Generator, Failure> {
    s.parse().map_err(usage)
}

pub fn load_prefix(seq: &str, n: usize, seed: u64) -> Result<SequencePrefix, Failure> {
    let g = parse_generator(seq)?;
    let prefix = generate(&g, n, seed)?;
    if prefix.len() < n {
        return Err(usage(format!(
            "sequence `{seq}` has only {} terms",
            prefix.len()
        )));
    }
    Ok(prefix)
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn cf(a: &CfArgs) -> Result<Artifact, Failure> {
    let alpha = parse_alpha(&a.alpha)?;
    let expansion = cf_expand(&alpha, a.terms.max(1))?;
    let convs = convergents(&expansion, a.terms)?;
    let tail = match expansion.tail() {
        Tail::Terminates => json!("terminates"),
        Tail::Periodic { start, len } => json!({ "periodic": { "start": start, "len": len } }),
        Tail::Unknown => json!("unknown"),
    };
    let location = a.m.map(|m| locate_scale(&expansion, m)).transpose()?;
    let json = json!({
        "alpha": alpha.to_string(),
        "digits": expansion.digits().iter().take(a.terms).collect::<Vec<_>>(),
        "tail": tail,
        "convergents": convs.iter().map(|(p, q)| [p.to_string(), q.to_string()]).collect::<Vec<_>>(),
        "location": location,
    });
    let art = match location {
        Some(loc) => Artifact::table(
            vec![
                "m", "l", "p", "q", "q_prev", "q_next", "a", "b", "even", "boundary",
            ],
            vec![vec![
                loc.m.to_string(),
                loc.l.to_string(),
                loc.p.to_string(),
                loc.q.to_string(),
                loc.q_prev.to_string(),
                loc.q_next.to_string(),
                loc.a.to_string(),
                loc.b.to_string(),
                loc.even.to_string(),
                loc.boundary.to_string(),
            ]],
        ),
        None => Artifact::table(
            vec!["l", "digit", "p", "q"],
            convs
                .iter()
                .enumerate()
                .map(|(i, (p, q))| {
                    let l = i + 1;
                    let digit = expansion
                        .digit(l)
                        .map(|d| d.to_string())
                        .unwrap_or_default();
                    vec![l.to_string(), digit, p.to_string(), q.to_string()]
                })
                .collect(),
        ),
    };
    Ok(art.with_json(json))
}

pub fn r2(a: &R2Args, seed: u64) -> Result<Artifact, Failure> {
    let alpha = parse_alpha(&a.alpha)?;
    let ns = parse_n_list(&a.n)?;
    let ss = parse_ratio_list(&a.s)?;
    let n_max = *ns.last().expect("non-empty");
    let prefix = load_prefix(&a.seq, n_max, seed)?;
    let (_, points) = resolve_points(&alpha, prefix.values())?;
    let mut rows = Vec::new();
    for &n in &ns {
        for s in &ss {
            let stat = r2_fast(&points[..n], s)?;
            if a.naive {
                let naive = r2_naive(&points[..n], s)?;
                if naive.pair_count != stat.pair_count {
                    return Err(pcorr::Error::InternalMismatch(format!(
                        "N = {n}, s = {s}: fast {} vs naive {}",
                        stat.pair_count, naive.pair_count
                    ))
                    .into());
                }
            }
            let two_s = 2.0 * rational_to_f64(s);
            rows.push(vec![
                n.to_string(),
                s.to_string(),
                stat.pair_count.to_string(),
                f(stat.value),
                f(two_s),
                f(stat.value - two_s),
            ]);
        }
    }
    Ok(Artifact::table(
        vec!["n", "s", "pair_count", "value", "poisson_ref", "deviation"],
        rows,
    ))
}

pub fn energy(a: &EnergyArgs, seed: u64) -> Result<Artifact, Failure> {
    let ns = parse_n_list(&a.n)?;
    let prefix = load_prefix(&a.seq, *ns.last().expect("non-empty"), seed)?;
    let mut rows = Vec::new();
    for &n in &ns {
        let p = additive_energy(&prefix.prefix(n))?;
        rows.push(vec![
            n.to_string(),
            p.energy.to_string(),
            f(p.ratio),
            p.sum_squares().to_string(),
            p.above_cap.to_string(),
        ]);
    }
    Ok(Artifact::table(
        vec!["n", "energy", "ratio", "sum_squares", "above_cap"],
        rows,
    ))
}

pub fn gaps(a: &GapsArgs) -> Result<Artifact, Failure> {
    let alpha = parse_alpha(&a.alpha)?;
    if a.m < 2 {
        return Err(usage("M must be at least 2"));
    }
    let fixed = resolve_alpha(&alpha, 128)?;
    let expansion = cf_expand(&alpha, 4096)?;
    let decomp = decompose(&fixed, &expansion, a.m)?;
    let gaps = orbit_gap_values(&fixed, a.m)?;
    let loc = &decomp.location;
    let scale = 2f64.powi(-128);
    let gap_list: Vec<(f64, usize)> = gaps.iter().map(|(&g, &c)| (g as f64 * scale, c)).collect();
    let sizes = decomp.bundle_sizes();
    let json = json!({
        "alpha": alpha.to_string(),
        "location": loc,
        "delta": decomp.delta_f64(),
        "bundle_sizes": { "min": sizes.iter().min(), "max": sizes.iter().max(), "count": sizes.len() },
        "gaps": gap_list.iter().map(|(g, c)| json!({ "length": g, "count": c })).collect::<Vec<_>>(),
    });
    let rows = gap_list
        .iter()
        .map(|(g, c)| {
            vec![
                a.m.to_string(),
                loc.l.to_string(),
                loc.q.to_string(),
                loc.a.to_string(),
                loc.b.to_string(),
                f(decomp.delta_f64()),
                f(*g),
                c.to_string(),
            ]
        })
        .collect();
    Ok(
        Artifact::table(vec!["m", "l", "q", "a", "b", "delta", "gap", "count"], rows)
            .with_json(json),
    )
}

fn certificate_rows(cert: &QuasiArithCertificate) -> Vec<Vec<String>> {
    cert.entries
        .iter()
        .map(|e| {
            vec![
                e.n.to_string(),
                e.h.to_string(),
                e.k.to_string(),
                e.length.to_string(),
                e.members.len().to_string(),
                f(e.gamma),
                f(e.big_gamma),
            ]
        })
        .collect()
}

pub fn detect(a: &DetectArgs, seed: u64) -> Result<Artifact, Failure> {
    let ns = parse_n_list(&a.n)?;
    let (c, k) = (parse_ratio(&a.c)?, parse_ratio(&a.k)?);
    let prefix = load_prefix(&a.seq, *ns.last().expect("non-empty"), seed)?;
    let cert = detect_multi(&prefix, &ns, &c, &k, a.k_max)?;
    let rows = cert.as_ref().map(certificate_rows).unwrap_or_default();
    let json = serde_json::to_value(&cert).map_err(|e| Failure::Output(e.to_string()))?;
    Ok(Artifact::table(
        vec!["n", "h", "k", "length", "subset_size", "gamma", "big_gamma"],
        rows,
    )
    .with_json(json))
}

pub fn witness_rows(summary: &WitnessSummary) -> Vec<Vec<String>> {
    summary
        .reports
        .iter()
        .map(|r| {
            let (s1, s2) = match &r.thresholds {
                Thresholds::Single { s } => (String::new(), s.to_string()),
                Thresholds::Pair { s1, s2, .. } => (s1.to_string(), s2.to_string()),
            };
            vec![
                r.n.to_string(),
                r.case.to_string(),
                s1,
                s2,
                f(r.measured),
                f(r.poisson_ref),
                f(r.deviation),
                f(r.subset_measured),
                f(r.theoretical_floor),
            ]
        })
        .collect()
}

pub const WITNESS_COLUMNS: [&str; 9] = [
    "n",
    "case",
    "s1",
    "s2",
    "measured",
    "poisson_ref",
    "deviation",
    "subset_measured",
    "theoretical_floor",
];

pub fn summary_json(summary: &WitnessSummary, cert: &QuasiArithCertificate) -> Value {
    json!({
        "reports": summary.reports,
        "summary": {
            "max_abs_deviation": summary.max_abs_deviation,
            "at_n": summary.at_n,
            "margin": summary.margin,
            "exceeds_margin": summary.exceeds_margin,
        },
        "certificate": cert,
    })
}

pub fn witness(a: &WitnessArgs, seed: u64) -> Result<Artifact, Failure> {
    let alpha = parse_alpha(&a.alpha)?;
    let ns = parse_n_list(&a.n)?;
    let (c, k) = (parse_ratio(&a.c)?, parse_ratio(&a.k)?);
    let prefix = load_prefix(&a.seq, *ns.last().expect("non-empty"), seed)?;
    let cert = detect_multi(&prefix, &ns, &c, &k, a.k_max)?;
    let summary = witness_search(&prefix, &alpha, cert.as_ref(), &ns, a.s_budget, a.margin)?;
    let cert = cert.expect("witness_search succeeded");
    let mut art = Artifact::table(WITNESS_COLUMNS.to_vec(), witness_rows(&summary))
        .with_json(summary_json(&summary, &cert))
        .prefer_json();
    art.status = if summary.exceeds_margin { 0 } else { 1 };
    Ok(art)
}
