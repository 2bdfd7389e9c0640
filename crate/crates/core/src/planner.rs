//! Amdahl-style efficiency models and the partition × server split search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("no benchmark entry for p = {0}")]
    MissingEntry(u64),
    #[error("partition count {0} is not a power of two")]
    NotPowerOfTwo(u64),
    #[error("benchmark time for p = {p} must be positive and finite, got {t}")]
    BadTime { p: u64, t: f64 },
    #[error("node budget {budget} cannot host the minimum of {p_min} partitions")]
    InfeasibleBudget { budget: u64, p_min: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// `(speedup, efficiency)` for `N_p` parallel and `N_s` sequential
/// evaluations on `n` processors.
pub fn amdahl(n_p: u64, n_s: u64, n: u64) -> (f64, f64) {
    let total = (n_p + n_s) as f64;
    let speedup = total / (n_p as f64 / n as f64 + n_s as f64);
    let efficiency = total / (n_p as f64 + (n_s * n) as f64);
    (speedup, efficiency)
}

/// Parallel-evaluation slots per iteration on `s` servers: `⌈N_p/s⌉ + N_s`.
pub fn rounds(n_p: u64, n_s: u64, s: u64) -> u64 {
    n_p.div_ceil(s) + n_s
}

/// Speedup on `s` servers counting whole rounds: `(N_p + N_s) / (⌈N_p/s⌉ + N_s)`.
pub fn dp_speedup(n_p: u64, n_s: u64, s: u64) -> f64 {
    (n_p + n_s) as f64 / rounds(n_p, n_s, s) as f64
}

/// `(N_p + N_s) / (s · (⌈N_p/s⌉ + N_s))`.
pub fn dp_efficiency(n_p: u64, n_s: u64, s: u64) -> f64 {
    (n_p + n_s) as f64 / (s * rounds(n_p, n_s, s)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EfficiencyModel {
    pub n_p: u64,
    pub n_s: u64,
}

/// Measured seconds per circuit execution, keyed by partition count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchTable {
    times: BTreeMap<u64, f64>,
}

impl BenchTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: u64, seconds: f64) -> Result<(), PlannerError> {
        if !p.is_power_of_two() {
            return Err(PlannerError::NotPowerOfTwo(p));
        }
        if !(seconds > 0.0 && seconds.is_finite()) {
            return Err(PlannerError::BadTime { p, t: seconds });
        }
        self.times.insert(p, seconds);
        Ok(())
    }

    pub fn from_pairs(pairs: &[(u64, f64)]) -> Result<Self, PlannerError> {
        let mut t = Self::new();
        for &(p, s) in pairs {
            t.insert(p, s)?;
        }
        Ok(t)
    }

    pub fn get(&self, p: u64) -> Result<f64, PlannerError> {
        self.times.get(&p).copied().ok_or(PlannerError::MissingEntry(p))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.times.iter().map(|(&p, &t)| (p, t))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// One `p t_seconds` pair per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, PlannerError> {
        let mut table = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| PlannerError::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [p, t] = fields.as_slice() else {
                return Err(err(format!("expected `p t_seconds`, got {line:?}")));
            };
            let p = p.parse::<u64>().map_err(|e| err(e.to_string()))?;
            let t = t.parse::<f64>().map_err(|e| err(e.to_string()))?;
            table.insert(p, t)?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        self.iter().map(|(p, t)| format!("{p} {t:?}\n")).collect()
    }
}

/// `(t(p_min)/t(p)) / (p/p_min)`.
pub fn mpi_efficiency(bench: &BenchTable, p: u64, p_min: u64) -> Result<f64, PlannerError> {
    let base = bench.get(p_min)?;
    let t = bench.get(p)?;
    Ok((base / t) / (p as f64 / p_min as f64))
}

/// `t(p) · (⌈N_p/s⌉ + N_s)`.
pub fn predict_iteration_time(
    bench: &BenchTable,
    p: u64,
    s: u64,
    model: EfficiencyModel,
) -> Result<f64, PlannerError> {
    Ok(bench.get(p)? * rounds(model.n_p, model.n_s, s) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub partitions: u64,
    pub servers: u64,
    pub predicted_seconds: f64,
    pub mpi_efficiency: f64,
    pub dp_efficiency: f64,
    pub combined_efficiency: f64,
}

fn plan_for(
    bench: &BenchTable,
    model: EfficiencyModel,
    p_min: u64,
    p: u64,
    s: u64,
) -> Result<Plan, PlannerError> {
    let mpi = mpi_efficiency(bench, p, p_min)?;
    let dp = dp_efficiency(model.n_p, model.n_s, s);
    Ok(Plan {
        partitions: p,
        servers: s,
        predicted_seconds: predict_iteration_time(bench, p, s, model)?,
        mpi_efficiency: mpi,
        dp_efficiency: dp,
        combined_efficiency: mpi * dp,
    })
}

fn powers_of_two_up_to(limit: u64) -> impl Iterator<Item = u64> {
    (0..64).map(|k| 1u64 << k).take_while(move |&v| v <= limit)
}

/// Every power-of-two `(p, s)` with `p ≥ p_min`, `p·s ≤ budget` and a
/// benchmark entry for `p`, in ascending `(p, s)` order.
pub fn feasible_plans(
    bench: &BenchTable,
    model: EfficiencyModel,
    node_budget: u64,
    p_min: u64,
) -> Result<Vec<Plan>, PlannerError> {
    if !p_min.is_power_of_two() {
        return Err(PlannerError::NotPowerOfTwo(p_min));
    }
    if node_budget < p_min {
        return Err(PlannerError::InfeasibleBudget { budget: node_budget, p_min });
    }
    bench.get(p_min)?;
    let mut plans = Vec::new();
    for p in powers_of_two_up_to(node_budget).filter(|&p| p >= p_min) {
        if bench.get(p).is_err() {
            continue;
        }
        for s in powers_of_two_up_to(node_budget / p) {
            plans.push(plan_for(bench, model, p_min, p, s)?);
        }
    }
    Ok(plans)
}

/// Fastest feasible plan; ties go to fewer nodes, then fewer partitions.
pub fn choose_plan(
    bench: &BenchTable,
    model: EfficiencyModel,
    node_budget: u64,
    p_min: u64,
) -> Result<Plan, PlannerError> {
    let plans = feasible_plans(bench, model, node_budget, p_min)?;
    let best = plans
        .into_iter()
        .min_by(|a, b| {
            a.predicted_seconds
                .total_cmp(&b.predicted_seconds)
                .then((a.partitions * a.servers).cmp(&(b.partitions * b.servers)))
                .then(a.partitions.cmp(&b.partitions))
        })
        .expect("p_min with s = 1 is always feasible");
    Ok(best)
}

/// Heatmap CSV, one row per feasible `(p, s)`.
pub fn heatmap_csv(plans: &[Plan]) -> String {
    let mut out = String::from(
        "partitions,servers,nodes,predicted_seconds,mpi_efficiency,dp_efficiency,combined_efficiency\n",
    );
    for p in plans {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:.6},{:.6},{:.6}",
            p.partitions,
            p.servers,
            p.partitions * p.servers,
            p.predicted_seconds,
            p.mpi_efficiency,
            p.dp_efficiency,
            p.combined_efficiency
        );
    }
    out
}
