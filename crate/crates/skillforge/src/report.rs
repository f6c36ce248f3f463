//! Command results as serializable structs and as plain-text tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skillforge_core::metrics::{
    amortized_cost, benchmark_cost, block_stats, dollar_cost, mcnemar, paired_bootstrap, report, token_efficiency,
    CostModel, IdentityTerms, Interval, McNemarResult, MetricReport, MetricsError, PriceTable, TrajectorySummary,
};
use skillforge_core::{LibraryStats, SkillLibrary, TaskTrajectoryView};
use thiserror::Error;

/// Lowercase hex SHA-256.
pub fn checksum(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.digits$}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    /// 1-based inclusive task range.
    pub first: usize,
    pub last: usize,
    #[serde(flatten)]
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub whole: MetricReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockReport>,
}

pub fn analyze(tasks: &[TaskTrajectoryView], boundaries: Option<&[usize]>) -> Result<AnalyzeReport, MetricsError> {
    let whole = report(tasks)?;
    let blocks = match boundaries {
        None => Vec::new(),
        Some(b) => {
            let reports = block_stats(tasks, b)?;
            let mut start = 0;
            b.iter()
                .zip(reports)
                .map(|(&end, report)| {
                    let block = BlockReport { first: start + 1, last: end, report };
                    start = end;
                    block
                })
                .collect()
        }
    };
    Ok(AnalyzeReport { whole, blocks })
}

/// Parses `100,300,600,910`.
pub fn parse_boundaries(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad block boundary {p:?}")))
        .collect()
}

/// Default simulation blocks: quarters of the stream.
pub fn quartile_boundaries(n: usize) -> Option<Vec<usize>> {
    if n < 4 {
        return None;
    }
    Some((1..=4).map(|q| q * n / 4).collect())
}

pub fn render_metrics(r: &MetricReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tasks          {}", r.n_tasks);
    let _ = writeln!(s, "SR (%)         {:.2}", r.sr);
    let _ = writeln!(s, "steps          {:.2}", r.mean_steps);
    let _ = writeln!(s, "tokens (K)     {:.2}", r.mean_tokens_k);
    let _ = writeln!(s, "time (s)       {:.1}", r.mean_time_s);
    let _ = writeln!(s, "ARR (%)        {:.2}", r.arr);
    let _ = writeln!(s, "SOR            {}", opt(r.sor, 2));
    let _ = writeln!(s, "cache U (%)    {}", opt(r.cache_utilization.map(|u| 100.0 * u), 2));
    let _ = writeln!(s, "skill hit (%)  {:.2}", r.skill_hit);
    s
}

pub fn render_blocks(blocks: &[BlockReport], whole: &MetricReport) -> String {
    let mut s = format!(
        "{:<12} {:>6} {:>7} {:>6} {:>10} {:>9} {:>12}\n",
        "tasks", "n", "SR(%)", "steps", "tokens(K)", "cache(%)", "skill hit(%)"
    );
    let line = |s: &mut String, label: &str, r: &MetricReport| {
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>7.2} {:>6.2} {:>10.2} {:>9} {:>12.2}",
            label,
            r.n_tasks,
            r.sr,
            r.mean_steps,
            r.mean_tokens_k,
            opt(r.cache_utilization.map(|u| 100.0 * u), 2),
            r.skill_hit
        );
    };
    for b in blocks {
        line(&mut s, &format!("{}-{}", b.first, b.last), &b.report);
    }
    line(&mut s, "all", whole);
    s
}

pub fn render_analyze(r: &AnalyzeReport) -> String {
    if r.blocks.is_empty() {
        render_metrics(&r.whole)
    } else {
        render_blocks(&r.blocks, &r.whole)
    }
}

/// Library evolution counts with the published column names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryTable {
    pub seed: usize,
    pub induced: usize,
    pub demoted: usize,
    pub active: usize,
    pub pairs: usize,
}

impl From<LibraryStats> for LibraryTable {
    fn from(s: LibraryStats) -> Self {
        LibraryTable { seed: s.seed, induced: s.induced, demoted: s.demoted, active: s.active, pairs: s.polarity_pairs }
    }
}

pub fn render_library_table(t: &LibraryTable) -> String {
    format!(
        "{:>6} {:>8} {:>8} {:>7} {:>6}\n{:>6} {:>8} {:>8} {:>7} {:>6}\n",
        "seed", "induced", "demoted", "active", "pairs", t.seed, t.induced, t.demoted, t.active, t.pairs
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub run_id: String,
    pub n_tasks: usize,
    pub ledger: String,
    /// SHA-256 of the ledger file.
    pub checksum: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub worker_ledgers: Vec<String>,
    pub library: LibraryTable,
    pub analysis: AnalyzeReport,
}

pub fn render_simulate(s: &SimulateSummary) -> String {
    let mut out = format!("run {} ({} tasks)\nledger {}\nsha256 {}\n", s.run_id, s.n_tasks, s.ledger, s.checksum);
    for w in &s.worker_ledgers {
        let _ = writeln!(out, "worker ledger {w}");
    }
    out.push('\n');
    out.push_str(&render_analyze(&s.analysis));
    out.push('\n');
    out.push_str(&render_library_table(&s.library));
    out
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("task {task_id} appears more than once in ledger {side}")]
    Duplicate { side: char, task_id: String },
    #[error("task sets differ: {only_a} only in A, {only_b} only in B (first: {example})")]
    Mismatch { only_a: usize, only_b: usize, example: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n_tasks: usize,
    pub sr_a: Interval,
    pub sr_b: Interval,
    /// `SR_A − SR_B` in percentage points.
    pub diff: Interval,
    pub mcnemar: McNemarResult,
    pub iters: usize,
    pub seed: u64,
    pub alpha: f64,
}

fn verdicts(tasks: &[TaskTrajectoryView], side: char) -> Result<BTreeMap<&str, bool>, CompareError> {
    let mut map = BTreeMap::new();
    for t in tasks {
        if map.insert(t.task_id.as_str(), t.verdict().is_success()).is_some() {
            return Err(CompareError::Duplicate { side, task_id: t.task_id.clone() });
        }
    }
    Ok(map)
}

/// Verdict vectors aligned on task id, in the order of ledger A.
pub fn paired_verdicts(a: &[TaskTrajectoryView], b: &[TaskTrajectoryView]) -> Result<(Vec<bool>, Vec<bool>), CompareError> {
    let va = verdicts(a, 'A')?;
    let vb = verdicts(b, 'B')?;
    let ka: BTreeSet<&str> = va.keys().copied().collect();
    let kb: BTreeSet<&str> = vb.keys().copied().collect();
    if ka != kb {
        let only_a: Vec<&&str> = ka.difference(&kb).collect();
        let only_b: Vec<&&str> = kb.difference(&ka).collect();
        let example = only_a.first().or(only_b.first()).map(|s| s.to_string()).unwrap_or_default();
        return Err(CompareError::Mismatch { only_a: only_a.len(), only_b: only_b.len(), example });
    }
    let ya = a.iter().map(|t| va[t.task_id.as_str()]).collect();
    let yb = a.iter().map(|t| vb[t.task_id.as_str()]).collect();
    Ok((ya, yb))
}

pub fn compare(
    a: &[TaskTrajectoryView],
    b: &[TaskTrajectoryView],
    iters: usize,
    seed: u64,
    alpha: f64,
) -> Result<CompareReport, CompareError> {
    let (ya, yb) = paired_verdicts(a, b)?;
    let boot = paired_bootstrap(&ya, &yb, iters, seed, alpha)?;
    let mc = mcnemar(&ya, &yb)?;
    Ok(CompareReport { n_tasks: ya.len(), sr_a: boot.sr_a, sr_b: boot.sr_b, diff: boot.diff, mcnemar: mc, iters, seed, alpha })
}

pub fn render_compare(r: &CompareReport) -> String {
    let level = 100.0 * (1.0 - r.alpha);
    format!(
        "{:<8} {:>7} {:>22}\n{:<8} {:>7.2} {:>22}\n{:<8} {:>7.2} {:>22}\npaired delta (pp) {:+.2} [{:+.2}, {:+.2}]\nMcNemar b={} c={} p={:.6}\n({} tasks, {} resamples, seed {})\n",
        "",
        "SR(%)",
        format!("{level:.0}% CI"),
        "A",
        r.sr_a.point,
        format!("[{:.2}, {:.2}]", r.sr_a.lower, r.sr_a.upper),
        "B",
        r.sr_b.point,
        format!("[{:.2}, {:.2}]", r.sr_b.lower, r.sr_b.upper),
        r.diff.point,
        r.diff.lower,
        r.diff.upper,
        r.mcnemar.b,
        r.mcnemar.c,
        r.mcnemar.p_value,
        r.n_tasks,
        r.iters,
        r.seed,
    )
}

/// Inputs of the cost report beyond the ledger.
#[derive(Debug, Clone, Default)]
pub struct CostInputs {
    pub model: CostModel,
    pub prices: Option<PriceTable>,
    /// Per-task headline cost to amortize against; defaults to the
    /// ledger's dollar cost.
    pub headline: Option<f64>,
    pub one_time: f64,
    /// Stream length for amortization; defaults to the ledger's task count.
    pub n: Option<u64>,
    /// SR and mean K tokens for η when there is no ledger.
    pub sr: Option<f64>,
    pub tokens_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerCost {
    pub n_tasks: usize,
    pub terms: IdentityTerms,
    /// Per-task mean of the identity.
    pub mean: f64,
    pub total: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub ledger: Option<LedgerCost>,
    pub dollar_per_task: Option<f64>,
    pub amortized: Option<f64>,
    pub sr: Option<f64>,
    pub tokens_k: Option<f64>,
    pub eta: Option<f64>,
}

pub fn cost(tasks: Option<&[TaskTrajectoryView]>, inputs: &CostInputs) -> Result<CostReport, MetricsError> {
    inputs.model.validate()?;
    let mut out = CostReport { ledger: None, dollar_per_task: None, amortized: None, sr: inputs.sr, tokens_k: inputs.tokens_k, eta: None };
    if let Some(tasks) = tasks {
        let summaries: Vec<TrajectorySummary> = tasks.iter().map(TrajectorySummary::of).collect();
        let b = benchmark_cost(&inputs.model, &summaries)?;
        out.ledger = Some(LedgerCost { n_tasks: tasks.len(), terms: b.terms, mean: b.mean, total: b.total, rho: b.rho });
        if let Some(prices) = &inputs.prices {
            out.dollar_per_task = Some(dollar_cost(tasks, prices)?);
        }
        let r = report(tasks)?;
        out.sr = out.sr.or(Some(r.sr));
        out.tokens_k = out.tokens_k.or(Some(r.mean_tokens_k));
    }
    if let (Some(sr), Some(tk)) = (out.sr, out.tokens_k) {
        out.eta = Some(token_efficiency(sr, tk)?);
    }
    let headline = inputs.headline.or(out.dollar_per_task);
    let n = inputs.n.or(tasks.map(|t| t.len() as u64));
    if let (Some(h), Some(n)) = (headline, n) {
        out.amortized = Some(amortized_cost(h, inputs.one_time, n)?);
    }
    Ok(out)
}

pub fn render_cost(r: &CostReport) -> String {
    let mut s = String::new();
    if let Some(l) = &r.ledger {
        let _ = writeln!(s, "tasks               {}", l.n_tasks);
        let _ = writeln!(s, "C_pre / |B|         {:.3}", l.terms.pre);
        let _ = writeln!(s, "N_rollout * C_exec  {:.3}", l.terms.exec);
        let _ = writeln!(s, "C_verify            {:.3}", l.terms.verify);
        let _ = writeln!(s, "C_induce            {:.3}", l.terms.induce);
        let _ = writeln!(s, "mean per task       {:.3}", l.mean);
        let _ = writeln!(s, "rho                 {:.3}", l.rho);
    }
    let _ = writeln!(s, "dollar / task       {}", opt(r.dollar_per_task, 4));
    let _ = writeln!(s, "amortized / task    {}", opt(r.amortized, 3));
    let _ = writeln!(s, "eta (pp / Ktok)     {}", opt(r.eta, 3));
    s
}

/// Per-skill listing of a library.
pub fn render_library(lib: &SkillLibrary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rules ({})", lib.rule_count());
    for r in lib.rules() {
        let _ = writeln!(s, "  {} priority={} sites={}", r.id, r.priority, r.sites.join(","));
    }
    let _ = writeln!(s, "routines ({})", lib.routine_count());
    for r in lib.routines() {
        let c = r.confidence;
        let _ = writeln!(s, "  {} pass={} fail={} keywords=[{}]", r.id, c.n_pass, c.n_fail, r.trigger_keywords.join(", "));
        if let Some(pair) = &r.polarity {
            for v in pair {
                let _ = writeln!(s, "    {}: [{}]", v.dir, v.keywords.join(", "));
            }
        }
    }
    let _ = writeln!(s, "blacklist ({})", lib.blacklist().len());
    for e in lib.blacklist() {
        let _ = writeln!(s, "  {} {} {}", e.id, e.demoted_at, e.reason);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(checksum(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn boundaries() {
        assert_eq!(parse_boundaries("100,300, 600,910").unwrap(), vec![100, 300, 600, 910]);
        assert!(parse_boundaries("100,x").is_err());
        assert_eq!(quartile_boundaries(10).unwrap(), vec![2, 5, 7, 10]);
        assert_eq!(quartile_boundaries(3), None);
    }

    #[test]
    fn amortization_without_a_ledger() {
        let inputs = CostInputs { headline: Some(0.593), one_time: 43.7, n: Some(910), sr: Some(58.3), tokens_k: Some(115.0), ..Default::default() };
        let r = cost(None, &inputs).unwrap();
        assert!((r.amortized.unwrap() - 0.641).abs() < 1e-3);
        assert!((r.eta.unwrap() - 0.507).abs() < 1e-3);
        assert!(r.ledger.is_none());
    }
}
