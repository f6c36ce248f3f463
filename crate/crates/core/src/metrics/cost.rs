//! Token cost identity, routing cost, amortization and dollar pricing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::ledger::{EventType, TaskTrajectoryView};

/// Cost symbols of the per-task identity and the routed execution cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Pre-evaluation discovery budget, spent once before the stream.
    pub c_pre: f64,
    pub n_rollout: f64,
    /// `C_verify / C_exec`.
    pub verify_multiplier: f64,
    /// Per-task induction cost.
    pub induce_tokens: f64,
    pub kappa_h: f64,
    pub kappa_l: f64,
    pub q_plan: f64,
    pub q_reflect: f64,
    pub q_act: f64,
    pub k_r: u64,
    pub beta_vis: f64,
    pub visual_compression: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c_pre: 0.0,
            n_rollout: 1.0,
            verify_multiplier: 0.0,
            induce_tokens: 0.0,
            kappa_h: 1.0,
            kappa_l: 1.0,
            q_plan: 1000.0,
            q_reflect: 500.0,
            q_act: 200.0,
            k_r: 3,
            beta_vis: 0.6,
            visual_compression: false,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let nonneg = [
            ("c_pre", self.c_pre),
            ("n_rollout", self.n_rollout),
            ("verify_multiplier", self.verify_multiplier),
            ("induce_tokens", self.induce_tokens),
            ("kappa_h", self.kappa_h),
            ("kappa_l", self.kappa_l),
            ("q_plan", self.q_plan),
            ("q_reflect", self.q_reflect),
            ("q_act", self.q_act),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MetricsError::InvalidArgument(format!("{name} = {v} must be a nonnegative number")));
            }
        }
        if self.kappa_h < self.kappa_l {
            return Err(MetricsError::InvalidArgument("kappa_h must be at least kappa_l".into()));
        }
        if self.k_r == 0 {
            return Err(MetricsError::InvalidArgument("k_r must be at least 1".into()));
        }
        if !(self.beta_vis > 0.0 && self.beta_vis <= 1.0) {
            return Err(MetricsError::InvalidArgument(format!("beta_vis {} not in (0,1]", self.beta_vis)));
        }
        Ok(())
    }
}

/// What the cost model needs from one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    /// Planner calls, `|Plan|`.
    pub plans: u64,
    /// Trajectory length `T` (non-eval rows).
    pub steps: u64,
}

impl TrajectorySummary {
    pub fn of(view: &TaskTrajectoryView) -> Self {
        TrajectorySummary { plans: view.count(EventType::Planner) as u64, steps: view.steps() as u64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub c_exec: f64,
    pub c_verify: f64,
    pub c_induce: f64,
    pub c_task: f64,
}

/// `C_exec = κ_H(|Plan|·q_plan + ⌊T/k_R⌋·q_reflect) + κ_L·T·q_act`, with the
/// actor term scaled by `β` under visual compression, and
/// `C_task = N_rollout·C_exec + C_verify + C_induce`.
pub fn per_task_cost(model: &CostModel, t: TrajectorySummary) -> CostBreakdown {
    let reflections = t.steps / model.k_r.max(1);
    let high = model.kappa_h * (t.plans as f64 * model.q_plan + reflections as f64 * model.q_reflect);
    let mut low = model.kappa_l * t.steps as f64 * model.q_act;
    if model.visual_compression {
        low *= model.beta_vis;
    }
    let c_exec = high + low;
    let c_verify = model.verify_multiplier * c_exec;
    let c_induce = model.induce_tokens;
    CostBreakdown { c_exec, c_verify, c_induce, c_task: model.n_rollout * c_exec + c_verify + c_induce }
}

/// The four per-task identity terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerms {
    /// `C_pre / |B|`.
    pub pre: f64,
    /// mean `N_rollout · C_exec`.
    pub exec: f64,
    /// mean `C_verify`.
    pub verify: f64,
    /// mean `C_induce`.
    pub induce: f64,
}

impl IdentityTerms {
    pub fn sum(&self) -> f64 {
        self.pre + self.exec + self.verify + self.induce
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCost {
    /// `C_pre + Σ C_task`.
    pub total: f64,
    /// Per-task average `C̄`.
    pub mean: f64,
    pub terms: IdentityTerms,
    /// `C̄` relative to the same trajectories with every inflation term
    /// zeroed (no pre-evaluation, one rollout, no verifier, no induction).
    pub rho: f64,
}

pub fn benchmark_cost(model: &CostModel, tasks: &[TrajectorySummary]) -> Result<BenchmarkCost, MetricsError> {
    if tasks.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = tasks.len() as f64;
    let (mut exec, mut verify, mut induce, mut task_sum, mut base) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &t in tasks {
        let c = per_task_cost(model, t);
        exec += model.n_rollout * c.c_exec;
        verify += c.c_verify;
        induce += c.c_induce;
        task_sum += c.c_task;
        base += c.c_exec;
    }
    let terms = IdentityTerms { pre: model.c_pre / n, exec: exec / n, verify: verify / n, induce: induce / n };
    let mean = (model.c_pre + task_sum) / n;
    let base = base / n;
    let rho = if base > 0.0 { mean / base } else { 1.0 };
    Ok(BenchmarkCost { total: model.c_pre + task_sum, mean, terms, rho })
}

/// Headline per-task cost plus the one-time budget spread over `n_tasks`.
pub fn amortized_cost(headline_per_task: f64, one_time: f64, n_tasks: u64) -> Result<f64, MetricsError> {
    if n_tasks == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(headline_per_task + one_time / n_tasks as f64)
}

/// Prices in currency per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub cached: f64,
    pub input: f64,
    pub output: f64,
}

pub type PriceTable = BTreeMap<String, ModelPrice>;

/// Mean dollar cost per task. Rows without tokens (actions, routines,
/// verdicts) need no price entry.
pub fn dollar_cost(tasks: &[TaskTrajectoryView], prices: &PriceTable) -> Result<f64, MetricsError> {
    if tasks.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = 0.0;
    for e in tasks.iter().flat_map(|t| t.events.iter().chain(core::iter::once(&t.terminal))) {
        if e.total_tokens() == 0 {
            continue;
        }
        let p = prices.get(&e.model).ok_or_else(|| MetricsError::UnknownModel(e.model.clone()))?;
        let uncached = e.prompt_tokens - e.cached_prompt_tokens;
        total += (e.cached_prompt_tokens as f64 * p.cached
            + uncached as f64 * p.input
            + (e.completion_tokens + e.reasoning_tokens) as f64 * p.output)
            / 1e6;
    }
    Ok(total / tasks.len() as f64)
}
