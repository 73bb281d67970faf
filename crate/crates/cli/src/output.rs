use std::fmt;
use std::io::Write;

use serde_json::{json, Map, Value};

use crate::{Cli, Command, Format};

/// One table plus an optional richer JSON form.
pub struct Artifact {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: Option<Value>,
    pub default_format: Format,
    /// Process exit status on success.
    pub status: u8,
}

impl Artifact {
    pub fn table(columns: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        Artifact {
            columns,
            rows,
            json: None,
            default_format: Format::Csv,
            status: 0,
        }
    }

    pub fn with_json(mut self, v: Value) -> Self {
        self.json = Some(v);
        self
    }

    pub fn prefer_json(mut self) -> Self {
        self.default_format = Format::Json;
        self
    }

    fn table_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), cell_json(v)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

fn cell_json(v: &str) -> Value {
    if let Ok(i) = v.parse::<i64>() {
        return json!(i);
    }
    match v.parse::<f64>() {
        Ok(f) if f.is_finite() && !v.contains('/') => json!(f),
        _ => json!(v),
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Module(pcorr::Error),
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Module(
                pcorr::Error::PrecisionExhausted(_) | pcorr::Error::DigitStreamExhausted { .. },
            ) => 3,
            Failure::Module(_) | Failure::Output(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error[usage]: {m}"),
            Failure::Module(e) => write!(f, "error[{}]: {e}", e.code()),
            Failure::Output(m) => write!(f, "error[io]: {m}"),
        }
    }
}

impl From<pcorr::Error> for Failure {
    fn from(e: pcorr::Error) -> Self {
        Failure::Module(e)
    }
}

pub fn config_json(cli: &Cli) -> Value {
    serde_json::to_value(cli).expect("config serializes")
}

fn render(cli: &Cli, artifact: &Artifact) -> Result<Vec<u8>, Failure> {
    let version = env!("CARGO_PKG_VERSION");
    let config = config_json(cli);
    let format = cli.format.unwrap_or(match cli.command {
        Command::Detect(_) | Command::Witness(_) => Format::Json,
        _ => artifact.default_format,
    });
    match format {
        Format::Json => {
            let result = artifact
                .json
                .clone()
                .unwrap_or_else(|| artifact.table_json());
            let doc = json!({ "version": version, "config": config, "result": result });
            let mut out =
                serde_json::to_vec_pretty(&doc).map_err(|e| Failure::Output(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = format!("# pc {version} config={config}\n").into_bytes();
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&artifact.columns)
                .map_err(|e| Failure::Output(e.to_string()))?;
            for r in &artifact.rows {
                w.write_record(r)
                    .map_err(|e| Failure::Output(e.to_string()))?;
            }
            w.flush().map_err(|e| Failure::Output(e.to_string()))?;
            drop(w);
            Ok(out)
        }
    }
}

/// Writes the artifact to stdout or, atomically, to `--output`.
pub fn emit(cli: &Cli, artifact: &Artifact) -> Result<(), Failure> {
    let bytes = render(cli, artifact)?;
    let io = |e: std::io::Error| Failure::Output(e.to_string());
    match &cli.output {
        None => std::io::stdout().write_all(&bytes).map_err(io),
        Some(path) => {
            let dir = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(std::path::Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(&bytes).map_err(io)?;
            tmp.persist(path).map_err(|e| io(e.error))?;
            Ok(())
        }
    }
}
