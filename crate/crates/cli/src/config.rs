//! Job configuration: raw `key=value` pairs from an optional file, overridden
//! by command-line flags, then validated into a [`JobConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::Args;
use lacewalk::Memory;
use serde::Serialize;

/// Keys accepted in a config file; each matches a long flag.
pub const KEYS: &[&str] = &[
    "d", "L", "tau", "tau-list", "method", "nmax", "Nmax", "p", "tol", "threads", "format", "out", "suite", "n-list",
    "k-list",
];

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Lattice dimension d
    #[arg(long = "d")]
    pub d: Option<String>,
    /// Box range L of the step distribution
    #[arg(long = "L")]
    pub l: Option<String>,
    /// Memory tau: a positive integer or `inf`
    #[arg(long = "tau", visible_alias = "memory")]
    pub tau: Option<String>,
    /// Comma-separated list of tau values
    #[arg(long = "tau-list")]
    pub tau_list: Option<String>,
    /// `transfer` or `fixed-point`
    #[arg(long)]
    pub method: Option<String>,
    /// Largest walk length n
    #[arg(long = "nmax")]
    pub nmax: Option<String>,
    /// Largest lace order N
    #[arg(long = "Nmax")]
    pub order_max: Option<String>,
    /// Fugacity p
    #[arg(long)]
    pub p: Option<String>,
    /// Numerical tolerance
    #[arg(long)]
    pub tol: Option<String>,
    /// Worker threads
    #[arg(long)]
    pub threads: Option<String>,
    /// `json` or `csv`
    #[arg(long)]
    pub format: Option<String>,
    /// Output file (standard output when absent)
    #[arg(long)]
    pub out: Option<String>,
    /// verify only: `all`, `recursion`, `tail` or `lace`
    #[arg(long)]
    pub suite: Option<String>,
    /// clt only: comma-separated walk lengths
    #[arg(long = "n-list")]
    pub n_list: Option<String>,
    /// clt only: comma-separated scaled wave numbers
    #[arg(long = "k-list")]
    pub k_list: Option<String>,
    /// TOML file keyed by flag names; flags win over it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("d", &self.d),
            ("L", &self.l),
            ("tau", &self.tau),
            ("tau-list", &self.tau_list),
            ("method", &self.method),
            ("nmax", &self.nmax),
            ("Nmax", &self.order_max),
            ("p", &self.p),
            ("tol", &self.tol),
            ("threads", &self.threads),
            ("format", &self.format),
            ("out", &self.out),
            ("suite", &self.suite),
            ("n-list", &self.n_list),
            ("k-list", &self.k_list),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: field `{}`: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Transfer,
    FixedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Recursion,
    Tail,
    Lace,
}

/// Fully resolved settings for one run. Fields a command does not use keep
/// their defaults and are still recorded.
#[derive(Clone, Debug, Serialize)]
pub struct JobConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: i32,
    pub tau: Memory,
    #[serde(rename = "tau-list")]
    pub tau_list: Vec<u32>,
    pub method: Method,
    pub nmax: Option<usize>,
    #[serde(rename = "Nmax")]
    pub order_max: Option<usize>,
    pub p: Option<f64>,
    pub tol: f64,
    pub threads: usize,
    pub format: Format,
    pub out: Option<String>,
    pub suite: Suite,
    #[serde(rename = "n-list")]
    pub n_list: Vec<usize>,
    #[serde(rename = "k-list")]
    pub k_list: Vec<f64>,
}

/// Reads a flat TOML table. Lists may be TOML arrays or comma-separated
/// strings; every value is turned back into its flag spelling.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("config", e.message().to_string()))?;
    let mut map = BTreeMap::new();
    for (k, v) in table {
        let key = if k == "memory" { "tau" } else { k.as_str() };
        if !KEYS.contains(&key) {
            return Err(ConfigError::new(key, "unknown key in config file"));
        }
        let text = match v {
            toml::Value::Array(items) => items
                .into_iter()
                .map(|item| scalar(key, item))
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            other => scalar(key, other)?,
        };
        map.insert(key.to_string(), text);
    }
    Ok(map)
}

fn scalar(key: &str, v: toml::Value) -> Result<String, ConfigError> {
    match v {
        toml::Value::String(s) => Ok(s),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(ConfigError::new(key, format!("unsupported value {other}"))),
    }
}

/// Config file values overridden by flags.
pub fn merge(flags: &Flags) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in flags.pairs() {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| ConfigError::new(key, format!("cannot parse `{v}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|_| ConfigError::new(key, format!("cannot parse `{s}`"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some),
    }
}

/// Validates the merged pairs for `command`.
pub fn resolve(command: &str, map: &BTreeMap<String, String>) -> Result<JobConfig, ConfigError> {
    let d: usize = parse(map, "d")?.unwrap_or(1);
    if !(1..=8).contains(&d) {
        return Err(ConfigError::new("d", format!("must be in 1..=8, got {d}")));
    }
    let l: i32 = parse(map, "L")?.unwrap_or(1);
    if !(1..=64).contains(&l) {
        return Err(ConfigError::new("L", format!("must be in 1..=64, got {l}")));
    }
    let default_tau = match command {
        "enumerate" | "pi" => Memory::Infinite,
        "clt" => Memory::Finite(1),
        _ => Memory::Finite(2),
    };
    let tau: Memory = match map.get("tau") {
        None => default_tau,
        Some(v) => v
            .parse()
            .map_err(|_| ConfigError::new("tau", format!("expected a positive integer or `inf`, got `{v}`")))?,
    };
    let tau_list: Vec<u32> = parse_list(map, "tau-list")?.unwrap_or_default();
    if tau_list.contains(&0) {
        return Err(ConfigError::new("tau-list", "entries must be positive"));
    }
    if command == "scan" && tau_list.is_empty() {
        return Err(ConfigError::new("tau-list", "scan needs a non-empty tau list"));
    }
    let method = match map.get("method").map(String::as_str) {
        None | Some("transfer") | Some("transfer-matrix") => Method::Transfer,
        Some("fixed-point") => Method::FixedPoint,
        Some(other) => return Err(ConfigError::new("method", format!("expected transfer or fixed-point, got `{other}`"))),
    };
    let nmax: Option<usize> = parse(map, "nmax")?;
    if nmax.is_some_and(|n| n > 2000) {
        return Err(ConfigError::new("nmax", "must be at most 2000"));
    }
    let order_max: Option<usize> = parse(map, "Nmax")?;
    if order_max == Some(0) {
        return Err(ConfigError::new("Nmax", "must be positive"));
    }
    let p: Option<f64> = parse(map, "p")?;
    if p.is_some_and(|p| !(p.is_finite() && p > 0.0)) {
        return Err(ConfigError::new("p", "must be a positive number"));
    }
    let tol: f64 = parse(map, "tol")?.unwrap_or(1e-12);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ConfigError::new("tol", "must be a positive number"));
    }
    let threads: usize = parse(map, "threads")?.unwrap_or(1);
    if !(1..=256).contains(&threads) {
        return Err(ConfigError::new("threads", "must be in 1..=256"));
    }
    let format = match map.get("format").map(String::as_str) {
        None | Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some(other) => return Err(ConfigError::new("format", format!("expected json or csv, got `{other}`"))),
    };
    let suite = match map.get("suite").map(String::as_str) {
        None | Some("all") => Suite::All,
        Some("recursion") => Suite::Recursion,
        Some("tail") => Suite::Tail,
        Some("lace") => Suite::Lace,
        Some(other) => return Err(ConfigError::new("suite", format!("unknown suite `{other}`"))),
    };
    let n_list: Vec<usize> = parse_list(map, "n-list")?.unwrap_or_else(|| vec![8, 16, 32]);
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(ConfigError::new("n-list", "needs positive walk lengths"));
    }
    let k_list: Vec<f64> = parse_list(map, "k-list")?.unwrap_or_else(|| vec![0.0, 0.5, 1.0]);
    if k_list.is_empty() || k_list.iter().any(|k| !k.is_finite()) {
        return Err(ConfigError::new("k-list", "needs finite wave numbers"));
    }
    Ok(JobConfig {
        d,
        l,
        tau,
        tau_list,
        method,
        nmax,
        order_max,
        p,
        tol,
        threads,
        format,
        out: map.get("out").cloned(),
        suite,
        n_list,
        k_list,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_lines() {
        let m = parse_config_text("# scan\nd = 5\nmemory = \"inf\"\n\ntau-list = [2, 3]\np = 0.25\nk-list = \"0,1\"\n").unwrap();
        assert_eq!(m["d"], "5");
        assert_eq!(m["tau"], "inf");
        assert_eq!(m["tau-list"], "2,3");
        assert_eq!(m["p"], "0.25");
        assert_eq!(m["k-list"], "0,1");
        assert_eq!(parse_config_text("bogus = 1").unwrap_err().field, "bogus");
        assert_eq!(parse_config_text("d").unwrap_err().field, "config");
        assert_eq!(parse_config_text("[d]\nx = 1").unwrap_err().field, "d");
    }

    #[test]
    fn validation_names_fields() {
        assert_eq!(resolve("scan", &map(&[])).unwrap_err().field, "tau-list");
        assert_eq!(resolve("scan", &map(&[("tau-list", "")])).unwrap_err().field, "tau-list");
        assert_eq!(resolve("pc", &map(&[("tau", "zero")])).unwrap_err().field, "tau");
        assert_eq!(resolve("pc", &map(&[("d", "0")])).unwrap_err().field, "d");
        assert_eq!(resolve("pc", &map(&[("format", "xml")])).unwrap_err().field, "format");
        let c = resolve("pc", &map(&[("tau", "inf"), ("tau-list", "2, 4")])).unwrap();
        assert!(c.tau.is_infinite());
        assert_eq!(c.tau_list, vec![2, 4]);
    }
}
