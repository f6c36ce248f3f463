#![allow(dead_code)]

pub mod skills;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skillforge_core::{EventType, LedgerEvent};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skillforge"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SKILLFORGE_LIBRARY_DIR").output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn samples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/samples/skills")
}

/// Integer shares of `total` proportional to `weights`, by largest
/// remainder, so the shares sum to `total` exactly.
pub fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut rest = total - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for i in order {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

/// `k` of `n` positions, spread evenly.
pub fn spread(n: usize, k: usize) -> Vec<bool> {
    (0..n).map(|i| (i + 1) * k / n > i * k / n).collect()
}

/// One block of the stream-economics table.
#[derive(Debug, Clone, Copy)]
pub struct Block {
    pub tasks: usize,
    pub successes: usize,
    pub steps: u64,
    pub tokens: u64,
    pub cache: f64,
    pub skill_hits: usize,
    pub repeat_failures: usize,
}

/// Published per-block values (SR 50.5/56.8/59.2/61.0, steps 10.6/9.6/9.1/
/// 8.9, tokens 143K/124K/112K/103K, cache 62.0/70.5/73.5/76.0, skill hit
/// 18.2/33.6/47.1/58.4) turned into integer counts. The repeat-terminated
/// failures total 83 of 910 tasks.
pub fn stream_blocks() -> [Block; 4] {
    let sizes = [100usize, 200, 300, 310];
    let sr = [50.5, 56.8, 59.2, 61.0];
    let steps = [10.6, 9.6, 9.1, 8.9];
    let tokens_k = [143.0, 124.0, 112.0, 103.0];
    let cache = [0.620, 0.705, 0.735, 0.760];
    let hit = [18.2, 33.6, 47.1, 58.4];
    let successes = [50usize, 114, 178, 189];
    let failures: Vec<f64> = sizes.iter().zip(successes).map(|(n, s)| (n - s) as f64).collect();
    let repeats = apportion(83, &failures);
    let mut out = [Block { tasks: 0, successes: 0, steps: 0, tokens: 0, cache: 0.0, skill_hits: 0, repeat_failures: 0 }; 4];
    for b in 0..4 {
        let n = sizes[b] as f64;
        debug_assert!((successes[b] as f64 - sr[b] * n / 100.0).abs() <= 0.5);
        out[b] = Block {
            tasks: sizes[b],
            successes: successes[b],
            steps: (steps[b] * n).round() as u64,
            tokens: (tokens_k[b] * 1000.0 * n).round() as u64,
            cache: cache[b],
            skill_hits: (hit[b] * n / 100.0).round() as usize,
            repeat_failures: repeats[b] as usize,
        };
    }
    out
}

/// Failed tasks take this many times the steps of successful ones.
pub const FAILED_STEP_FACTOR: f64 = 1.8;

/// A ledger whose blocks have exactly the counts of [`stream_blocks`].
pub fn stream_ledger() -> Vec<LedgerEvent> {
    let mut rows = Vec::new();
    let mut task_no = 0usize;
    for block in stream_blocks() {
        let success = spread(block.tasks, block.successes);
        let hit = spread(block.tasks, block.skill_hits);
        let failed: Vec<usize> = (0..block.tasks).filter(|&i| !success[i]).collect();
        let repeat_at = spread(failed.len(), block.repeat_failures);
        let weights: Vec<f64> = success.iter().map(|&s| if s { 1.0 } else { FAILED_STEP_FACTOR }).collect();
        let steps = apportion(block.steps, &weights);
        let tokens = apportion(block.tokens, &vec![1.0; block.tasks]);
        let mut fail_seen = 0;
        for i in 0..block.tasks {
            task_no += 1;
            let tid = format!("task_{task_no:03}");
            let status = if success[i] {
                "success".to_string()
            } else {
                let repeat = repeat_at[fail_seen];
                fail_seen += 1;
                if repeat { "fail:repeat_action".into() } else { "fail".into() }
            };
            let row = |idx: u64, kind: EventType| LedgerEvent::new("stream", tid.as_str(), "vwa", "skillforge", idx, kind);
            let mut planner = row(0, EventType::Planner);
            planner.model = "claude-opus-4-6".into();
            let completion = tokens[i] / 10;
            planner.prompt_tokens = tokens[i] - completion;
            planner.completion_tokens = completion;
            planner.cached_prompt_tokens = (block.cache * planner.prompt_tokens as f64).round() as u64;
            planner.wall_time_ms = 240_000;
            rows.push(planner);
            for s in 1..steps[i] {
                if s == 1 && hit[i] {
                    let mut r = row(s, EventType::Routine);
                    r.routine_id = "sort_by_attribute".into();
                    r.skill_id = "sort_by_attribute".into();
                    r.action_name = "run".into();
                    r.action_target = "asc".into();
                    rows.push(r);
                } else {
                    let mut a = row(s, EventType::Action);
                    a.action_name = "click".into();
                    a.action_target = format!("el{s}");
                    rows.push(a);
                }
            }
            let mut eval = row(steps[i], EventType::Eval);
            eval.evaluator_status = status;
            rows.push(eval);
        }
    }
    rows
}

/// Two aligned verdict vectors of length 910 with 531 and 492 successes
/// and 85% agreement, shuffled by `seed`.
pub fn planted_verdicts(seed: u64) -> (Vec<bool>, Vec<bool>) {
    // both succeed, only a, only b, neither
    let counts = [(443usize, (true, true)), (88, (true, false)), (49, (false, true)), (330, (false, false))];
    let mut pairs: Vec<(bool, bool)> = counts.iter().flat_map(|&(n, p)| std::iter::repeat_n(p, n)).collect();
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    for i in (1..pairs.len()).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        pairs.swap(i, j);
    }
    pairs.into_iter().unzip()
}

/// A minimal ledger with one two-row task per verdict.
pub fn verdict_ledger(run_id: &str, verdicts: &[bool]) -> Vec<LedgerEvent> {
    let mut rows = Vec::new();
    for (i, &ok) in verdicts.iter().enumerate() {
        let tid = format!("task_{:03}", i + 1);
        let mut p = LedgerEvent::new(run_id, tid.as_str(), "vwa", "m", 0, EventType::Planner);
        p.model = "claude-opus-4-6".into();
        p.prompt_tokens = 1000;
        p.cached_prompt_tokens = 500;
        p.completion_tokens = 100;
        rows.push(p);
        let mut e = LedgerEvent::new(run_id, tid.as_str(), "vwa", "m", 1, EventType::Eval);
        e.evaluator_status = if ok { "success" } else { "fail" }.into();
        rows.push(e);
    }
    rows
}
