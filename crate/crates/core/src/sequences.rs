//! Integer sequences `(a_n)` as explicit prefixes: generators and file
//! ingestion.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest lacunary term allowed, in bits.
pub const LACUNARY_BIT_BUDGET: u64 = 4096;

/// The first `N` terms of a sequence of distinct non-negative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePrefix {
    values: Vec<BigUint>,
    sorted: bool,
    label: String,
}

impl SequencePrefix {
    /// Checks distinctness; a repeated value reports the 1-based position of
    /// its second occurrence.
    pub fn new(values: Vec<BigUint>, label: impl Into<String>) -> Result<Self> {
        let sorted = values.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            let mut seen = std::collections::HashSet::with_capacity(values.len());
            for (i, v) in values.iter().enumerate() {
                if !seen.insert(v) {
                    return Err(Error::DuplicateValue(i + 1));
                }
            }
        }
        Ok(SequencePrefix {
            values,
            sorted,
            label: label.into(),
        })
    }

    pub fn from_u64(values: &[u64], label: impl Into<String>) -> Result<Self> {
        Self::new(values.iter().map(|&v| BigUint::from(v)).collect(), label)
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The first `n` terms (or all of them if fewer).
    pub fn prefix(&self, n: usize) -> SequencePrefix {
        let n = n.min(self.values.len());
        SequencePrefix {
            values: self.values[..n].to_vec(),
            sorted: self.sorted,
            label: self.label.clone(),
        }
    }

    /// All values as `u64`, if they fit.
    pub fn values_u64(&self) -> Option<Vec<u64>> {
        self.values.iter().map(ToPrimitive::to_u64).collect()
    }

    pub fn max_value(&self) -> BigUint {
        self.values.iter().max().cloned().unwrap_or_default()
    }
}

/// Generator grammar: `id`, `ap:h,k`, `squares`, `lac:b`,
/// `density:ρ[:seed=S]`, `union:h1,k1:h2,k2[:...]`, `file:path`.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Identity,
    /// `h + r·k` for `r = 0, 1, ...`
    Arithmetic {
        h: BigUint,
        k: BigUint,
    },
    Squares,
    /// `b^n` for `n = 1, 2, ...`
    Lacunary {
        base: u64,
    },
    /// Keeps each `n ≥ 1` independently with probability `rho`.
    Density {
        rho: f64,
        seed: Option<u64>,
    },
    /// Increasing merge of several progressions `h_i + r·k_i`, duplicates removed.
    UnionAp(Vec<(BigUint, BigUint)>),
    File(PathBuf),
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::BadSpec(format!("{m}: `{s}`"));
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let pair = |t: &str| -> Result<(BigUint, BigUint)> {
            let (h, k) = t.split_once(',').ok_or_else(|| bad("expected h,k"))?;
            let h: BigUint = h.trim().parse().map_err(|_| bad("bad offset"))?;
            let k: BigUint = k.trim().parse().map_err(|_| bad("bad difference"))?;
            if k.is_zero() {
                return Err(bad("common difference must be positive"));
            }
            Ok((h, k))
        };
        match kind.trim() {
            "id" | "identity" => Ok(Generator::Identity),
            "squares" => Ok(Generator::Squares),
            "ap" => {
                let (h, k) = pair(body)?;
                Ok(Generator::Arithmetic { h, k })
            }
            "lac" => {
                let base: u64 = if body.is_empty() {
                    2
                } else {
                    body.trim().parse().map_err(|_| bad("bad base"))?
                };
                if base < 2 {
                    return Err(bad("lacunary base must be at least 2"));
                }
                Ok(Generator::Lacunary { base })
            }
            "density" => {
                let mut parts = body.split(':');
                let rho: f64 = parts
                    .next()
                    .ok_or_else(|| bad("missing density"))?
                    .trim()
                    .parse()
                    .map_err(|_| bad("bad density"))?;
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(bad("density must lie in (0, 1]"));
                }
                let mut seed = None;
                for p in parts {
                    let v = p
                        .trim()
                        .strip_prefix("seed=")
                        .ok_or_else(|| bad("expected seed=S"))?;
                    seed = Some(v.parse().map_err(|_| bad("bad seed"))?);
                }
                Ok(Generator::Density { rho, seed })
            }
            "union" => {
                let aps = body.split(':').map(pair).collect::<Result<Vec<_>>>()?;
                if aps.is_empty() {
                    return Err(bad("union needs at least one progression"));
                }
                Ok(Generator::UnionAp(aps))
            }
            "file" => {
                if body.is_empty() {
                    return Err(bad("missing path"));
                }
                Ok(Generator::File(PathBuf::from(body)))
            }
            _ => Err(bad("unknown generator")),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Identity => write!(f, "id"),
            Generator::Arithmetic { h, k } => write!(f, "ap:{h},{k}"),
            Generator::Squares => write!(f, "squares"),
            Generator::Lacunary { base } => write!(f, "lac:{base}"),
            Generator::Density { rho, seed: Some(s) } => write!(f, "density:{rho}:seed={s}"),
            Generator::Density { rho, seed: None } => write!(f, "density:{rho}"),
            Generator::UnionAp(aps) => {
                let parts: Vec<String> = aps.iter().map(|(h, k)| format!("{h},{k}")).collect();
                write!(f, "union:{}", parts.join(":"))
            }
            Generator::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// The first `n` terms of a generated sequence. Deterministic in
/// `(kind, n, seed)`; a seed embedded in a density spec takes precedence.
pub fn generate(kind: &Generator, n: usize, seed: u64) -> Result<SequencePrefix> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let label = kind.to_string();
    let values: Vec<BigUint> = match kind {
        Generator::Identity => (1..=n as u64).map(BigUint::from).collect(),
        Generator::Arithmetic { h, k } => {
            let mut v = Vec::with_capacity(n);
            let mut x = h.clone();
            for _ in 0..n {
                v.push(x.clone());
                x += k;
            }
            v
        }
        Generator::Squares => (1..=n as u64).map(|i| BigUint::from(i) * i).collect(),
        Generator::Lacunary { base } => {
            let bits = (n as f64 * (*base as f64).log2()).ceil() as u64 + 1;
            if bits > LACUNARY_BIT_BUDGET {
                return Err(Error::BitBudgetExceeded {
                    bits,
                    budget: LACUNARY_BIT_BUDGET,
                });
            }
            let b = BigUint::from(*base);
            let mut v = Vec::with_capacity(n);
            let mut x = BigUint::one();
            for _ in 0..n {
                x *= &b;
                v.push(x.clone());
            }
            v
        }
        Generator::Density { rho, seed: own } => {
            let mut rng = ChaCha8Rng::seed_from_u64(own.unwrap_or(seed));
            let mut v = Vec::with_capacity(n);
            let mut x = 0u64;
            while v.len() < n {
                x += 1;
                if rng.gen_bool(*rho) {
                    v.push(BigUint::from(x));
                }
            }
            v
        }
        Generator::UnionAp(aps) => merge_progressions(aps, n),
        Generator::File(path) => {
            let seq = load(path)?;
            if seq.len() < n {
                return Err(Error::BadSpec(format!(
                    "{} holds only {} values, {n} requested",
                    path.display(),
                    seq.len()
                )));
            }
            seq.values[..n].to_vec()
        }
    };
    SequencePrefix::new(values, label)
}

fn merge_progressions(aps: &[(BigUint, BigUint)], n: usize) -> Vec<BigUint> {
    let mut heap: BinaryHeap<Reverse<(BigUint, usize)>> = aps
        .iter()
        .enumerate()
        .map(|(i, (h, _))| Reverse((h.clone(), i)))
        .collect();
    let mut out: Vec<BigUint> = Vec::with_capacity(n);
    while out.len() < n {
        let Reverse((x, i)) = heap.pop().expect("progressions are infinite");
        heap.push(Reverse((&x + &aps[i].1, i)));
        if out.last() != Some(&x) {
            out.push(x);
        }
    }
    out
}

/// Parses one base-10 integer per line; `#` starts a comment line.
pub fn parse_sequence(text: &str, label: impl Into<String>) -> Result<SequencePrefix> {
    let mut values = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: BigUint = line.parse().map_err(|_| Error::ParseError {
            line: i + 1,
            msg: format!("not a non-negative integer: `{line}`"),
        })?;
        if !seen.insert(v.clone()) {
            return Err(Error::DuplicateValue(i + 1));
        }
        values.push(v);
    }
    SequencePrefix::new(values, label)
}

pub fn load(path: impl AsRef<Path>) -> Result<SequencePrefix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_sequence(&text, format!("file:{}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(s: &str, n: usize) -> Vec<u64> {
        generate(&s.parse().unwrap(), n, 0)
            .unwrap()
            .values_u64()
            .unwrap()
    }

    #[test]
    fn basic_generators() {
        assert_eq!(gen("id", 5), vec![1, 2, 3, 4, 5]);
        assert_eq!(gen("ap:2,3", 4), vec![2, 5, 8, 11]);
        assert_eq!(gen("squares", 4), vec![1, 4, 9, 16]);
        assert_eq!(gen("lac:2", 4), vec![2, 4, 8, 16]);
        assert_eq!(gen("union:1,4:2,4", 6), vec![1, 2, 5, 6, 9, 10]);
        assert_eq!(gen("union:0,2:0,3", 6), vec![0, 2, 3, 4, 6, 8]);
    }

    #[test]
    fn density_is_reproducible_and_dense() {
        let a = generate(&"density:0.5:seed=7".parse().unwrap(), 100, 0).unwrap();
        let b = generate(&"density:0.5".parse().unwrap(), 100, 7).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.is_sorted());
        let max = a.max_value().to_f64().unwrap();
        assert!((140.0..=280.0).contains(&max), "max {max}");
        let big = generate(&"density:0.5:seed=1".parse().unwrap(), 20_000, 0).unwrap();
        let ratio = 20_000.0 / big.max_value().to_f64().unwrap();
        assert!((0.4..=0.6).contains(&ratio));
    }

    #[test]
    fn lacunary_budget() {
        assert!(matches!(
            generate(&Generator::Lacunary { base: 2 }, 5000, 0),
            Err(Error::BitBudgetExceeded { .. })
        ));
    }

    #[test]
    fn bad_specs() {
        for s in [
            "ap:1",
            "ap:1,0",
            "density:1.5",
            "lac:1",
            "nope",
            "density:0.5:foo=1",
        ] {
            assert!(s.parse::<Generator>().is_err(), "{s}");
        }
    }

    #[test]
    fn file_parsing() {
        assert_eq!(
            parse_sequence("1\n2\n3", "t")
                .unwrap()
                .values_u64()
                .unwrap(),
            vec![1, 2, 3]
        );
        assert_eq!(
            parse_sequence("10\n# c\n20", "t")
                .unwrap()
                .values_u64()
                .unwrap(),
            vec![10, 20]
        );
        assert_eq!(parse_sequence("5\n5", "t"), Err(Error::DuplicateValue(2)));
        assert!(matches!(
            parse_sequence("1\nx", "t"),
            Err(Error::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn display_round_trip() {
        for s in [
            "id",
            "ap:2,3",
            "squares",
            "lac:3",
            "density:0.5:seed=7",
            "union:1,4:2,4",
        ] {
            let g: Generator = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
    }
}
