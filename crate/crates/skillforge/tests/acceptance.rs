//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion,
//! with details under failures, and exits nonzero if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use skillforge::ledger_csv::{read_ledger, write_ledger};
use skillforge::library_dir::LibraryDir;
use skillforge::report::{self, AnalyzeReport, SimulateSummary};
use skillforge_core::metrics::{
    amortized_cost, arr, benchmark_cost, block_stats, mcnemar, mcnemar_p, mean_steps, paired_bootstrap, recombine,
    report as metric_report, token_efficiency, CostModel, MetricReport, TrajectorySummary,
};
use skillforge_core::sim::{run_stream, seed_library, SimConfig, StreamOutput};
use skillforge_core::{
    normalize_keywords, read_tasks, retrieve, Direction, EventType, LearningEvent, LedgerEvent, Rejection,
};

/// Outcome of one criterion: failed checks, plus notes printed either way.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn near(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.expect((got - want).abs() <= tol, format!("{name} = {got:.6}, want {want} ± {tol}"));
    }

    fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }
}

fn criterion(no: u32, title: &str, budget: Duration, body: impl FnOnce(&mut Check)) -> bool {
    let mut c = Check::default();
    let t = Instant::now();
    body(&mut c);
    let elapsed = t.elapsed();
    c.expect(elapsed < budget, format!("runtime {:.2} s over the {:.0} s budget", elapsed.as_secs_f64(), budget.as_secs_f64()));
    let ok = c.failures.is_empty();
    println!("criterion {no} {} ({:.2} s) {title}", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    for f in &c.failures {
        println!("    fail: {f}");
    }
    for n in &c.notes {
        println!("    note: {n}");
    }
    ok
}

fn run_json<T: serde::de::DeserializeOwned>(args: &[&str]) -> Result<T, String> {
    let o = common::run(args);
    if !o.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    serde_json::from_str(&common::stdout(&o)).map_err(|e| e.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn c1_stream_recombination(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.csv");
    write_ledger(&path, &common::stream_ledger()).unwrap();
    let r: AnalyzeReport = match run_json(&["analyze", s(&path), "--blocks", "100,300,600,910", "--json"]) {
        Ok(r) => r,
        Err(e) => return c.expect(false, e),
    };
    // Per-block fidelity: every published block value is met to its
    // printed precision, except SR where integer counts allow only ±0.5
    // task.
    for (b, want) in r.blocks.iter().zip(common::stream_blocks()) {
        let n = want.tasks as f64;
        c.expect(b.report.n_tasks == want.tasks, format!("block {}-{} size", b.first, b.last));
        c.near("block SR", b.report.sr, 100.0 * want.successes as f64 / n, 1e-9);
        c.near("block steps", b.report.mean_steps, want.steps as f64 / n, 1e-9);
        c.near("block tokens (K)", b.report.mean_tokens_k, want.tokens as f64 / n / 1000.0, 1e-9);
        c.near("block cache U", b.report.cache_utilization.unwrap_or(f64::NAN), want.cache, 5e-4);
    }
    c.near("SR (%)", r.whole.sr, 58.3, 0.05);
    c.near("steps", r.whole.mean_steps, 9.3, 0.05);
    c.near("tokens (K)", r.whole.mean_tokens_k, 115.0, 0.5);
    c.near("recombined SR", recombine(&blocks(&r), |m| m.sr), r.whole.sr, 1e-9);
    c.note(format!("whole stream: SR {:.3}%, steps {:.3}, tokens {:.2}K", r.whole.sr, r.whole.mean_steps, r.whole.mean_tokens_k));
    c.note(
        "SR is out of reach: the block rates 50.5/56.8/59.2/61.0 need integer success counts; the nearest \
         totals 530 and 531 of 910 give 58.24% and 58.35%, both outside 58.3 ± 0.05",
    );
}

fn blocks(r: &AnalyzeReport) -> Vec<MetricReport> {
    r.blocks.iter().map(|b| b.report.clone()).collect()
}

fn c2_cost_accounting(c: &mut Check) {
    c.near("amortized (910)", amortized_cost(0.593, 43.7, 910).unwrap(), 0.641, 1e-3);
    c.near("amortized (100)", amortized_cost(0.593, 43.7, 100).unwrap(), 1.030, 1e-3);
    for (sr, tk, want) in [(58.3, 115.0, 0.507), (54.0, 275.0, 0.196), (45.2, 294.0, 0.154)] {
        c.near(&format!("eta({sr}, {tk})"), token_efficiency(sr, tk).unwrap(), want, 1e-3);
    }
    let model = CostModel { verify_multiplier: 1.2, ..CostModel::default() };
    let tasks: Vec<TrajectorySummary> = (0..50).map(|i| TrajectorySummary { plans: 1 + i % 3, steps: 5 + i % 17 }).collect();
    let b = benchmark_cost(&model, &tasks).unwrap();
    c.near("rho", b.rho, 2.2, 0.01);
    c.near("identity sum", b.terms.sum(), b.mean, 1e-9);

    let at30 = amortized_cost(0.593, 43.7, 30).unwrap();
    c.near("amortized (30)", at30, 2.050, 1e-3);
    let ratio = at30 / 0.593;
    c.near("headline-to-amortized ratio (30)", ratio, 3.46, 5e-3);
    c.expect((ratio - 3.6).abs() > 0.1, "ratio unexpectedly matches the published 3.6x");
    c.note(format!("30-task ratio is {ratio:.3}; the published 3.6x does not follow from 0.593 and 43.7/30"));
}

fn c3_lifecycle(c: &mut Check) {
    let root = common::workspace_root();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lifecycle.csv");
    let lib = dir.path().join("lib");
    let scenario = root.join("scenarios/lifecycle.toml");
    let summary: SimulateSummary =
        match run_json(&["simulate", "--scenario", s(&scenario), "--out", s(&out), "--library", s(&lib), "--json"]) {
            Ok(r) => r,
            Err(e) => return c.expect(false, e),
        };
    c.expect(summary.n_tasks == 9, format!("{} tasks", summary.n_tasks));

    let events = learning_events(&dir.path().join("lifecycle.learning.csv"));
    let admitted: Vec<_> = events
        .iter()
        .filter_map(|(t, e)| match e {
            LearningEvent::Admitted { skill_id, stats, .. } => Some((t.as_str(), skill_id.as_str(), stats)),
            _ => None,
        })
        .collect();
    c.expect(
        admitted.len() == 1 && admitted[0].0 == "task_074" && (admitted[0].2.n_pass, admitted[0].2.n_fail) == (1, 0),
        format!("admission from task_074 at (1,0): {admitted:?}"),
    );

    // Task 118 runs the merged routine in the desc direction and counts a pass.
    let rows = read_ledger(&out).unwrap();
    let desc = rows
        .iter()
        .any(|r| r.task_id == "task_118" && r.event_type == EventType::Routine && r.action_target == "desc");
    c.expect(desc, "task_118 did not run a desc routine");
    let after_118 = events.iter().find_map(|(t, e)| match e {
        LearningEvent::Outcome { stats, .. } if t == "task_118" => Some((stats.n_pass, stats.n_fail)),
        _ => None,
    });
    c.expect(after_118 == Some((2, 0)), format!("counter after task_118: {after_118:?}"));

    // Retrieval against the published routine file picks the desc variant.
    let samples = LibraryDir::new(common::samples_dir()).load().unwrap();
    let hit = retrieve(&samples, &normalize_keywords("most expensive motorcycle"), "/classifieds/x");
    c.expect(
        matches!(&hit, Ok(Some(r)) if r.routine_id == "sort_by_attribute" && r.direction == Some(Direction::Desc)),
        format!("retrieval of \"most expensive\": {hit:?}"),
    );

    let demoted = events.iter().find_map(|(t, e)| match e {
        LearningEvent::Demoted { entry, stats } => Some((t.clone(), entry.clone(), *stats)),
        _ => None,
    });
    match &demoted {
        Some((_, entry, stats)) => {
            c.expect((stats.n_pass, stats.n_fail) == (3, 5), format!("demoted at {stats:?}"));
            c.expect(entry.reason == "fail_ratio=0.62 over 8 invocations", format!("reason {:?}", entry.reason));
        }
        None => c.expect(false, "no demotion"),
    }
    let written = fs::read_to_string(lib.join("demoted.md")).unwrap_or_default();
    let published = fs::read_to_string(common::samples_dir().join("demoted.md")).unwrap();
    let first_entry = |text: &str| -> String {
        let from = text.find("- id:").unwrap_or(text.len());
        let rest = &text[from..];
        let to = rest[1..].find("- id:").map_or(rest.len(), |i| i + 1);
        rest[..to].trim_end().to_string()
    };
    c.expect(
        first_entry(&written) == first_entry(&published),
        format!("blacklist entry differs:\n{}\n--- published ---\n{}", first_entry(&written), first_entry(&published)),
    );

    let rejected = events.iter().any(|(t, e)| {
        t == "task_220"
            && matches!(e, LearningEvent::Rejected { reason: Rejection::Blacklist { entry_id }, .. }
                if entry_id == "dropdown_via_keyboard_shortcut")
    });
    c.expect(rejected, "task_220 candidate not rejected by the blacklist");
    let final_lib = LibraryDir::new(&lib).load().unwrap();
    c.expect(final_lib.routines().all(|r| r.id != "open_dropdown"), "colliding candidate was admitted");
}

fn learning_events(path: &Path) -> Vec<(String, LearningEvent)> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), serde_json::from_str(&r[3]).unwrap())
        })
        .collect()
}

fn c4_round_trips(c: &mut Check) {
    use skillforge::format::{canonicalize, SkillFileKind};
    for (kind, rel) in [
        (SkillFileKind::Rule, "rules/repeat_click_same_element.md"),
        (SkillFileKind::Routine, "routines/sort_by_attribute.md"),
        (SkillFileKind::Demoted, "demoted.md"),
    ] {
        let text = fs::read_to_string(common::samples_dir().join(rel)).unwrap();
        match canonicalize(kind, &text) {
            Ok(out) => c.expect(out == text, format!("{rel} is not byte-identical after a round trip")),
            Err(e) => c.expect(false, format!("{rel}: {e}")),
        }
    }
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let result = runner.run(&common::skills::any_skill(), |skill| {
        common::skills::check_round_trip(&skill).map_err(TestCaseError::fail)
    });
    c.expect(result.is_ok(), format!("random skills: {result:?}"));
}

fn c5_statistics(c: &mut Check) {
    let (ya, _) = common::planted_verdicts(1);
    let same = paired_bootstrap(&ya, &ya, 1000, 9, 0.05).unwrap();
    c.expect(same.diff.lower == 0.0 && same.diff.upper == 0.0, format!("identical vectors: {:?}", same.diff));
    let mut widths = Vec::new();
    for seed in 0..20 {
        let (ya, yb) = common::planted_verdicts(seed);
        let boot = paired_bootstrap(&ya, &yb, 1000, seed, 0.05).unwrap();
        let hw = boot.diff.half_width();
        c.expect((1.0..=3.0).contains(&hw), format!("seed {seed}: half-width {hw:.3} pp"));
        widths.push(hw);
    }
    let (lo, hi) = widths.iter().fold((f64::MAX, f64::MIN), |(l, h), &w| (l.min(w), h.max(w)));
    c.note(format!("delta CI half-widths over 20 seeds: {lo:.2} to {hi:.2} pp"));
    c.near("McNemar p (10, 0)", mcnemar_p(10, 0), 0.001953, 1e-6);
    let a: Vec<bool> = (0..30).map(|i| i < 10).collect();
    let b = vec![false; 30];
    c.near("McNemar p from vectors", mcnemar(&a, &b).unwrap().p_value, 0.001953, 1e-6);
}

/// Tasks per block for the cache ramp check.
const RAMP_BLOCK: usize = 50;

fn changes_library(e: &LearningEvent) -> bool {
    matches!(e, LearningEvent::Admitted { .. } | LearningEvent::Merged { .. } | LearningEvent::Demoted { .. })
}

/// Problems found for one seed, the task after which the library stopped
/// changing, and the number of ramp blocks checked after it.
fn dynamics_of_seed(seed: u64) -> (Vec<String>, usize, usize) {
    let mut problems = Vec::new();
    let config = SimConfig { seed, n_tasks: 500, ..SimConfig::default() };
    let out: StreamOutput = run_stream(&config, &seed_library()).unwrap();
    let views = read_tasks(&out.rows).unwrap();
    let q = views.len() / 4;
    let first = mean_steps(&views[..q]).unwrap();
    let last = mean_steps(&views[views.len() - q..]).unwrap();
    if last >= first {
        problems.push(format!("seed {seed}: last-quartile steps {last:.3} >= first-quartile {first:.3}"));
    }

    let settled = out.records.iter().filter(|r| r.events.iter().any(changes_library)).map(|r| r.index + 1).max().unwrap_or(0);
    let mut bounds: Vec<usize> = (1..).map(|k| settled + k * RAMP_BLOCK).take_while(|&b| b <= views.len()).collect();
    if bounds.last() != Some(&views.len()) {
        bounds.pop();
        bounds.push(views.len());
    }
    let ramp_blocks = bounds.len();
    if bounds.len() >= 2 {
        let tail = &views[settled..];
        let rel: Vec<usize> = bounds.iter().map(|b| b - settled).collect();
        let u: Vec<f64> = block_stats(tail, &rel).unwrap().iter().map(|b| b.cache_utilization.unwrap_or(0.0)).collect();
        if u.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            problems.push(format!("seed {seed}: cache U after task {settled} decreases: {u:.4?}"));
        }
    }

    for inj in &config.brittle_injections {
        let mut invocations = 0usize;
        let mut demoted_after = None;
        let mut readmitted = false;
        for r in out.records.iter().filter(|r| r.index >= inj.start_task) {
            for e in &r.events {
                match e {
                    LearningEvent::Outcome { skill_id, .. } if skill_id == &inj.template && demoted_after.is_none() => {
                        invocations += 1;
                    }
                    LearningEvent::Demoted { entry, .. } if entry.id == inj.template => demoted_after = Some(invocations),
                    LearningEvent::Admitted { skill_id, .. } if demoted_after.is_some() && skill_id == &inj.template => {
                        readmitted = true;
                    }
                    LearningEvent::Merged { into, .. } if demoted_after.is_some() && into == &inj.template => readmitted = true,
                    _ => {}
                }
            }
        }
        match demoted_after {
            Some(n) if n <= 30 => {}
            Some(n) => problems.push(format!("seed {seed}: {} demoted after {n} invocations", inj.template)),
            None => problems.push(format!("seed {seed}: {} never demoted ({invocations} invocations)", inj.template)),
        }
        if readmitted || out.library.routines().any(|r| r.id == inj.template) {
            problems.push(format!("seed {seed}: {} re-admitted", inj.template));
        }
    }

    let mut loops = SimConfig { seed, n_tasks: 150, learning_enabled: false, ..SimConfig::default() };
    for d in &mut loops.domains {
        for t in d.templates.iter_mut().filter(|t| t.loopy) {
            t.loop_probability = 0.5;
        }
    }
    let with = run_stream(&loops, &seed_library()).unwrap();
    let without = run_stream(&SimConfig { rules_enabled: false, ..loops }, &seed_library()).unwrap();
    let arr_with = arr(&read_tasks(&with.rows).unwrap()).unwrap();
    let arr_without = arr(&read_tasks(&without.rows).unwrap()).unwrap();
    if arr_with != 0.0 || arr_without <= 0.0 {
        problems.push(format!("seed {seed}: ARR {arr_with:.2} with the rule, {arr_without:.2} without"));
    }
    (problems, settled, ramp_blocks)
}

fn c6_dynamics(c: &mut Check) {
    let results: Vec<(Vec<String>, usize, usize)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..20u64).map(|seed| scope.spawn(move || dynamics_of_seed(seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| (vec!["worker panicked".into()], 0, 0))).collect()
    });
    let settled: Vec<usize> = results.iter().map(|r| r.1).collect();
    let checked = results.iter().filter(|r| r.2 >= 2).count();
    c.note(format!(
        "library stops changing after task {} to {}; cache ramp checked on {checked} of 20 seeds",
        settled.iter().min().unwrap_or(&0),
        settled.iter().max().unwrap_or(&0)
    ));
    for p in results.into_iter().flat_map(|r| r.0) {
        c.expect(false, p);
    }
}

/// Random ledger of `n` tasks with random steps, tokens, verdicts and
/// routine hits.
fn random_ledger() -> impl Strategy<Value = Vec<LedgerEvent>> {
    proptest::collection::vec(
        (1u64..30, 0u64..20_000, 0.0f64..1.0, 0u64..3000, 0u8..4, any::<bool>(), 1u64..600_000),
        1..80,
    )
    .prop_map(|tasks| {
        let mut rows = Vec::new();
        for (i, (steps, prompt, cached, completion, status, hit, wall)) in tasks.into_iter().enumerate() {
            let tid = format!("t{i:03}");
            for s in 0..steps {
                let kind = match s {
                    0 => EventType::Planner,
                    1 if hit => EventType::Routine,
                    _ => EventType::Action,
                };
                let mut e = LedgerEvent::new("r", tid.as_str(), "d", "m", s, kind);
                if s == 0 {
                    e.model = "m".into();
                    e.prompt_tokens = prompt;
                    e.cached_prompt_tokens = (cached * prompt as f64) as u64;
                    e.completion_tokens = completion;
                    e.wall_time_ms = wall;
                }
                if kind == EventType::Routine {
                    e.routine_id = "r1".into();
                    e.skill_id = "r1".into();
                }
                rows.push(e);
            }
            let mut e = LedgerEvent::new("r", tid.as_str(), "d", "m", steps, EventType::Eval);
            e.evaluator_status = ["success", "fail", "fail:repeat_action", "infeasible"][status as usize].into();
            rows.push(e);
        }
        rows
    })
}

fn c7_invariants(c: &mut Check) {
    let cases = Config { cases: 1000, failure_persistence: None, ..Config::default() };
    let model = (0.0f64..1e6, 1.0f64..4.0, 0.0f64..3.0, 0.0f64..5e4, 0.5f64..2.0, 0.0f64..0.5, 1u64..8, any::<bool>())
        .prop_map(|(c_pre, n_rollout, verify_multiplier, induce_tokens, kappa_h, kappa_l, k_r, visual_compression)| CostModel {
            c_pre,
            n_rollout,
            verify_multiplier,
            induce_tokens,
            kappa_h,
            kappa_l,
            k_r,
            visual_compression,
            ..CostModel::default()
        });
    let tasks = proptest::collection::vec((0u64..6, 0u64..80).prop_map(|(plans, steps)| TrajectorySummary { plans, steps }), 1..60);
    let identity = TestRunner::new(cases.clone()).run(&(model, tasks), |(m, ts)| {
        let b = benchmark_cost(&m, &ts).unwrap();
        let scale = b.mean.abs().max(1.0);
        prop_assert!((b.terms.sum() - b.mean).abs() / scale <= 1e-9, "{} vs {}", b.terms.sum(), b.mean);
        Ok(())
    });
    c.expect(identity.is_ok(), format!("identity terms: {identity:?}"));

    let ledgers = (random_ledger(), proptest::collection::vec(any::<proptest::sample::Index>(), 0..6));
    let recombination = TestRunner::new(cases).run(&ledgers, |(rows, cuts)| {
        let views = read_tasks(&rows).unwrap();
        let n = views.len();
        let mut bounds: Vec<usize> = cuts.iter().map(|c| 1 + c.index(n)).filter(|&b| b < n).collect();
        bounds.push(n);
        bounds.sort_unstable();
        bounds.dedup();
        let whole = metric_report(&views).unwrap();
        let blocks = block_stats(&views, &bounds).unwrap();
        type Field = fn(&MetricReport) -> f64;
        let fields: [(&str, Field); 6] = [
            ("sr", |m| m.sr),
            ("steps", |m| m.mean_steps),
            ("tokens", |m| m.mean_tokens_k),
            ("time", |m| m.mean_time_s),
            ("arr", |m| m.arr),
            ("skill_hit", |m| m.skill_hit),
        ];
        for (name, f) in fields {
            let (a, b) = (recombine(&blocks, f), f(&whole));
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{}: {} vs {}", name, a, b);
        }
        Ok(())
    });
    c.expect(recombination.is_ok(), format!("block recombination: {recombination:?}"));
}

fn c8_determinism(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let config = common::workspace_root().join("configs/default.toml");
    let mut sums = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        match run_json::<SimulateSummary>(&["simulate", "--config", s(&config), "--out", s(&out), "--json"]) {
            Ok(r) => sums.push((r.checksum, report::checksum(&fs::read(&out).unwrap()))),
            Err(e) => return c.expect(false, e),
        }
    }
    c.expect(sums[0] == sums[1], format!("checksums differ: {sums:?}"));
    c.expect(sums[0].0 == sums[0].1, "reported checksum does not match the file");

    let out = dir.path().join("shared.csv");
    let lib = dir.path().join("shared_lib");
    let summary: SimulateSummary = match run_json(&[
        "simulate", "--config", s(&config), "--out", s(&out), "--library", s(&lib), "--workers", "16", "--json",
    ]) {
        Ok(r) => r,
        Err(e) => return c.expect(false, e),
    };
    c.expect(summary.worker_ledgers.len() == 16, format!("{} worker ledgers", summary.worker_ledgers.len()));
    let validate = common::run(&["library", "validate", s(&lib)]);
    c.expect(validate.status.success(), format!("library validate: {}", String::from_utf8_lossy(&validate.stderr)));
    match LibraryDir::new(&lib).load() {
        Ok(l) => c.expect(l.violations().is_empty(), format!("violations: {:?}", l.violations())),
        Err(e) => c.expect(false, e.to_string()),
    }
    let mut rows = Vec::new();
    for p in &summary.worker_ledgers {
        match read_ledger(Path::new(p)) {
            Ok(r) => rows.extend(r),
            Err(e) => return c.expect(false, e.to_string()),
        }
    }
    match read_tasks(&rows) {
        Ok(views) => {
            let mut ids: Vec<&str> = views.iter().map(|v| v.task_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            c.expect(views.len() == 500 && ids.len() == 500, format!("{} tasks, {} distinct", views.len(), ids.len()));
        }
        Err(e) => c.expect(false, format!("combined ledger: {e}")),
    }
    c.note(format!("shared library after 16 workers: {:?}", summary.library));
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "stream blocks recombine to the headline", secs(1), c1_stream_recombination),
        criterion(2, "cost accounting", secs(1), c2_cost_accounting),
        criterion(3, "routine lifecycle replay", secs(1), c3_lifecycle),
        criterion(4, "schema round trips", secs(5), c4_round_trips),
        criterion(5, "paired bootstrap and McNemar", secs(10), c5_statistics),
        criterion(6, "learning dynamics over 20 seeds", secs(60), c6_dynamics),
        criterion(7, "identity and recombination invariants", secs(5), c7_invariants),
        criterion(8, "determinism and shared-library mode", secs(120), c8_determinism),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria pass", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
