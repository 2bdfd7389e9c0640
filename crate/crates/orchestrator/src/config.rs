//! Run configuration: a flat `key = value` file plus per-key overrides.

use std::path::PathBuf;

use dvqe_core::OptimizerConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// `auto` picks `(p, s)` from a benchmark table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanSpec {
    Auto,
    Fixed { partitions: u64, servers: u64 },
}

/// Cutoff applied to the sorted Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Threshold(f64),
    RetainedFraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fcidump: Option<PathBuf>,
    /// Qubit Hamiltonian text, as an alternative to `fcidump`.
    pub hamiltonian: Option<PathBuf>,
    /// Electron count for a `hamiltonian` input.
    pub electrons: Option<usize>,
    pub th1: Option<f64>,
    pub retained_fraction: Option<f64>,
    pub th2: f64,
    pub optimizer: OptimizerConfig,
    pub plan: PlanSpec,
    pub bench: Option<PathBuf>,
    pub node_budget: Option<u64>,
    /// Per-node memory for the state vector, in bytes.
    pub memory_per_node: u64,
    /// Remote worker endpoints. Empty means local execution.
    pub workers: Vec<String>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fcidump: None,
            hamiltonian: None,
            electrons: None,
            th1: None,
            retained_fraction: None,
            th2: 1e-6,
            optimizer: OptimizerConfig::default(),
            plan: PlanSpec::Fixed { partitions: 1, servers: 1 },
            bench: None,
            node_budget: None,
            memory_per_node: 16 << 30,
            workers: Vec::new(),
            output_dir: PathBuf::from("dvqe-out"),
            seed: 0,
        }
    }
}

/// Every recognized key, in the spelling used by files and flags.
pub const KEYS: &[&str] = &[
    "fcidump",
    "hamiltonian",
    "electrons",
    "th1",
    "retained_fraction",
    "th2",
    "energy_tolerance",
    "max_iterations",
    "finite_difference_step",
    "line_search_max_evals",
    "plan",
    "bench",
    "node_budget",
    "memory_per_node",
    "workers",
    "output_dir",
    "seed",
];

/// `max-iterations` and `max_iterations` name the same key.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn parse_plan(v: &str) -> Result<PlanSpec, String> {
    if v.eq_ignore_ascii_case("auto") {
        return Ok(PlanSpec::Auto);
    }
    let (p, s) =
        v.split_once([',', 'x']).ok_or_else(|| format!("expected `auto` or `<p>,<s>`, got {v:?}"))?;
    let p: u64 = p.trim().parse().map_err(|e| format!("partitions: {e}"))?;
    let s: u64 = s.trim().parse().map_err(|e| format!("servers: {e}"))?;
    if !p.is_power_of_two() {
        return Err(format!("partitions must be a power of two, got {p}"));
    }
    if s == 0 {
        return Err("servers must be at least 1".into());
    }
    Ok(PlanSpec::Fixed { partitions: p, servers: s })
}

impl RunConfig {
    pub fn cutoff(&self) -> Cutoff {
        match (self.th1, self.retained_fraction) {
            (_, Some(f)) => Cutoff::RetainedFraction(f),
            (Some(t), None) => Cutoff::Threshold(t),
            (None, None) => Cutoff::Threshold(0.0),
        }
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = normalize_key(key);
        let v = value.trim();
        let bad = |message: String| ConfigError::BadValue { key: key.clone(), message };
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key.as_str() {
            "fcidump" => self.fcidump = Some(PathBuf::from(v)),
            "hamiltonian" => self.hamiltonian = Some(PathBuf::from(v)),
            "electrons" => self.electrons = Some(num(v).map_err(bad)?),
            "th1" => self.th1 = Some(num(v).map_err(bad)?),
            "retained_fraction" => self.retained_fraction = Some(num(v).map_err(bad)?),
            "th2" => self.th2 = num(v).map_err(bad)?,
            "energy_tolerance" => self.optimizer.energy_tolerance = num(v).map_err(bad)?,
            "max_iterations" => self.optimizer.max_iterations = num(v).map_err(bad)?,
            "finite_difference_step" => self.optimizer.finite_difference_step = num(v).map_err(bad)?,
            "line_search_max_evals" => self.optimizer.line_search_max_evals = num(v).map_err(bad)?,
            "plan" => self.plan = parse_plan(v).map_err(bad)?,
            "bench" => self.bench = Some(PathBuf::from(v)),
            "node_budget" => self.node_budget = Some(num(v).map_err(bad)?),
            "memory_per_node" => self.memory_per_node = num(v).map_err(bad)?,
            "workers" => {
                self.workers =
                    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = num(v).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Parses `key = value` lines onto the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Checks the cross-key rules.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        match (&self.fcidump, &self.hamiltonian) {
            (Some(_), Some(_)) => return invalid("set only one of `fcidump` and `hamiltonian`"),
            (None, None) => return invalid("one of `fcidump` or `hamiltonian` is required"),
            (None, Some(_)) if self.electrons.is_none() => {
                return invalid("a `hamiltonian` input needs `electrons`")
            }
            _ => {}
        }
        if self.th1.is_some() && self.retained_fraction.is_some() {
            return invalid("set only one of `th1` and `retained_fraction`");
        }
        if let Some(t) = self.th1 {
            if !(t >= 0.0 && t.is_finite()) {
                return invalid("`th1` must be a finite non-negative number");
            }
        }
        if let Some(f) = self.retained_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return invalid("`retained_fraction` must lie in (0, 1]");
            }
        }
        if !(self.th2 >= 0.0) {
            return invalid("`th2` must be non-negative");
        }
        if self.plan == PlanSpec::Auto && self.bench.is_none() {
            return invalid("plan `auto` needs a `bench` table");
        }
        if let (PlanSpec::Fixed { servers, .. }, false) = (self.plan, self.workers.is_empty()) {
            if self.workers.len() as u64 != servers {
                return Err(ConfigError::Invalid(format!(
                    "plan asks for {servers} servers but {} worker endpoints were given",
                    self.workers.len()
                )));
            }
        }
        Ok(())
    }
}
