//! Metrics computed from ledger task views.
//!
//! Every function here is a pure function of [`TaskTrajectoryView`]s, so any
//! number reported by the artifact can be recomputed from a ledger file.

mod cost;
mod stats;

pub use cost::{
    amortized_cost, benchmark_cost, dollar_cost, per_task_cost, BenchmarkCost, CostBreakdown,
    CostModel, IdentityTerms, ModelPrice, PriceTable, TrajectorySummary,
};
pub use stats::{mcnemar, mcnemar_p, paired_bootstrap, percentile, BootstrapResult, Interval, McNemarResult};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ledger::{TaskTrajectoryView, Verdict};
use crate::retrieval::ActionRecord;

/// Repeats of one signature without a state-hash change that end a task.
pub const REPEAT_TERMINATION: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no tasks")]
    EmptyInput,
    #[error("a success/failure cohort is empty after excluding infeasible tasks")]
    DegenerateCohort,
    #[error("no planner, actor or reflector calls")]
    NoLLMCalls,
    #[error("block boundaries {0}")]
    BadPartition(String),
    #[error("token count is zero")]
    ZeroTokens,
    #[error("model {0:?} missing from the price table")]
    UnknownModel(String),
    #[error("verdict vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn nonempty(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    match tasks.len() {
        0 => Err(MetricsError::EmptyInput),
        n => Ok(n as f64),
    }
}

fn mean_by(tasks: &[TaskTrajectoryView], f: impl Fn(&TaskTrajectoryView) -> f64) -> Result<f64, MetricsError> {
    let n = nonempty(tasks)?;
    Ok(tasks.iter().map(f).sum::<f64>() / n)
}

fn pct_where(tasks: &[TaskTrajectoryView], f: impl Fn(&TaskTrajectoryView) -> bool) -> Result<f64, MetricsError> {
    let n = nonempty(tasks)?;
    Ok(100.0 * tasks.iter().filter(|t| f(t)).count() as f64 / n)
}

/// Percentage of tasks whose terminal verdict is `success`.
pub fn success_rate(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    pct_where(tasks, |t| t.verdict().is_success())
}

/// Mean number of non-eval rows per task.
pub fn mean_steps(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    mean_by(tasks, |t| t.steps() as f64)
}

/// Mean prompt + completion + reasoning tokens per task, in thousands.
pub fn mean_tokens(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    mean_by(tasks, |t| t.tokens() as f64 / 1000.0)
}

/// Mean wall time per task, in seconds.
pub fn mean_time(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    mean_by(tasks, |t| t.wall_time_ms() as f64 / 1000.0)
}

/// Percentage of tasks terminated with the repeat-action marker.
pub fn arr(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    pct_where(tasks, |t| t.verdict() == Verdict::RepeatAction)
}

/// Mean failed-task steps over mean successful-task steps; infeasible tasks
/// are excluded from both.
pub fn sor(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    let (mut ok, mut n_ok, mut bad, mut n_bad) = (0.0, 0usize, 0.0, 0usize);
    for t in tasks {
        match t.verdict() {
            Verdict::Infeasible => {}
            Verdict::Success => {
                ok += t.steps() as f64;
                n_ok += 1;
            }
            _ => {
                bad += t.steps() as f64;
                n_bad += 1;
            }
        }
    }
    if n_ok == 0 || n_bad == 0 || ok == 0.0 {
        return Err(MetricsError::DegenerateCohort);
    }
    Ok((bad / n_bad as f64) / (ok / n_ok as f64))
}

/// Cached over total prompt tokens across planner, actor and reflector calls.
pub fn cache_utilization(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    let (cached, prompt) = tasks
        .iter()
        .map(TaskTrajectoryView::llm_prompt_tokens)
        .fold((0u64, 0u64), |(c, p), (tc, tp)| (c + tc, p + tp));
    let calls: usize = tasks.iter().map(TaskTrajectoryView::llm_calls).sum();
    if calls == 0 || prompt == 0 {
        return Err(MetricsError::NoLLMCalls);
    }
    Ok(cached as f64 / prompt as f64)
}

/// Percentage of tasks in which at least one rule or routine fired.
pub fn skill_hit_rate(tasks: &[TaskTrajectoryView]) -> Result<f64, MetricsError> {
    pct_where(tasks, TaskTrajectoryView::skill_hit)
}

/// Success rate in percentage points per thousand tokens.
pub fn token_efficiency(sr: f64, tokens_k: f64) -> Result<f64, MetricsError> {
    if tokens_k <= 0.0 {
        return Err(MetricsError::ZeroTokens);
    }
    Ok(sr / tokens_k)
}

/// True when the last `repeats` actions share one signature and the page
/// state never changed across them.
pub fn detect_repeat_termination(history: &[ActionRecord], repeats: usize) -> bool {
    if repeats == 0 || history.len() < repeats {
        return false;
    }
    let tail = &history[history.len() - repeats..];
    tail.iter().all(|a| a.signature == tail[0].signature && a.state_hash == tail[0].state_hash)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_tasks: usize,
    pub sr: f64,
    #[serde(rename = "steps")]
    pub mean_steps: f64,
    #[serde(rename = "tokens_k")]
    pub mean_tokens_k: f64,
    #[serde(rename = "time_s")]
    pub mean_time_s: f64,
    pub arr: f64,
    /// `None` when a cohort is empty.
    pub sor: Option<f64>,
    /// `None` when the tasks contain no LLM calls.
    #[serde(rename = "cache_u")]
    pub cache_utilization: Option<f64>,
    pub skill_hit: f64,
}

/// The full metric suite over `tasks`.
pub fn report(tasks: &[TaskTrajectoryView]) -> Result<MetricReport, MetricsError> {
    Ok(MetricReport {
        n_tasks: tasks.len(),
        sr: success_rate(tasks)?,
        mean_steps: mean_steps(tasks)?,
        mean_tokens_k: mean_tokens(tasks)?,
        mean_time_s: mean_time(tasks)?,
        arr: arr(tasks)?,
        sor: sor(tasks).ok(),
        cache_utilization: cache_utilization(tasks).ok(),
        skill_hit: skill_hit_rate(tasks)?,
    })
}

/// Splits `tasks` at cumulative `boundaries` (e.g. `100,300,600,910`) and
/// reports each block. The last boundary must equal the task count.
pub fn block_stats(tasks: &[TaskTrajectoryView], boundaries: &[usize]) -> Result<Vec<MetricReport>, MetricsError> {
    let bad = |m: String| Err(MetricsError::BadPartition(m));
    if boundaries.is_empty() {
        return bad("empty".into());
    }
    if boundaries.last() != Some(&tasks.len()) {
        return bad(alloc::format!("must end at the task count {}", tasks.len()));
    }
    let mut out = Vec::with_capacity(boundaries.len());
    let mut start = 0;
    for &end in boundaries {
        if end <= start {
            return bad(alloc::format!("not strictly increasing at {end}"));
        }
        out.push(report(&tasks[start..end])?);
        start = end;
    }
    Ok(out)
}

/// Size-weighted mean of one block field, the inverse of [`block_stats`].
pub fn recombine(blocks: &[MetricReport], field: impl Fn(&MetricReport) -> f64) -> f64 {
    let n: usize = blocks.iter().map(|b| b.n_tasks).sum();
    blocks.iter().map(|b| field(b) * b.n_tasks as f64).sum::<f64>() / n as f64
}
