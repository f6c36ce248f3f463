use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use super::{should_reflect, SimConfig, SimError, SyntheticSubgoal, SyntheticTask};
use crate::date::Date;
use crate::keyword::{normalize_keywords, normalize_phrases};
use crate::learning::{library_update, Episode, LearningEvent, LibraryStats, RoutineUse, SubgoalSegment};
use crate::ledger::{
    normalize_action_signature, EventType, LedgerEvent, STATUS_FAIL, STATUS_INFEASIBLE, STATUS_REPEAT_ACTION,
    STATUS_SUCCESS,
};
use crate::metrics::{detect_repeat_termination, REPEAT_TERMINATION};
use crate::retrieval::{match_rules, retrieve_with_prior, window, ActionRecord, MonitorReport, Retrieval, DEFAULT_WINDOW};
use crate::rng::bernoulli;
use crate::skill::SkillLibrary;

/// The ledger rows and learning input produced by one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRun {
    pub rows: Vec<LedgerEvent>,
    pub episode: Episode,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub index: usize,
    pub status: String,
    /// Non-eval rows.
    pub steps: usize,
    pub episode: Episode,
    pub events: Vec<LearningEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamOutput {
    pub rows: Vec<LedgerEvent>,
    pub library: SkillLibrary,
    pub records: Vec<TaskRecord>,
    pub stats: LibraryStats,
}

impl StreamOutput {
    pub fn events(&self) -> impl Iterator<Item = &LearningEvent> {
        self.records.iter().flat_map(|r| r.events.iter())
    }
}

enum Stop {
    Budget,
    Repeat,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-task generator, so a task's draws do not depend on which worker or
/// which earlier tasks ran first.
fn task_rng(seed: u64, index: usize) -> Pcg64 {
    Pcg64::seed_from_u64(mix(seed ^ mix(index as u64)))
}

struct Trace<'a> {
    config: &'a SimConfig,
    task: &'a SyntheticTask,
    rows: Vec<LedgerEvent>,
    /// Index fingerprint at the previous LLM call.
    last_prefix: &'a mut Option<u64>,
}

impl Trace<'_> {
    fn row(&mut self, kind: EventType) -> Result<&mut LedgerEvent, Stop> {
        if kind != EventType::Eval && self.rows.len() >= self.config.max_steps {
            return Err(Stop::Budget);
        }
        let c = self.config;
        let mut e = LedgerEvent::new(&c.run_id, &self.task.task_id, &self.task.domain, &c.method, self.rows.len() as u64, kind);
        let w = &c.wall_ms;
        e.wall_time_ms = match kind {
            EventType::Planner => w.planner,
            EventType::Actor => w.actor,
            EventType::Reflector => w.reflector,
            EventType::Action => w.action,
            EventType::Routine => w.routine,
            EventType::Eval => w.eval,
        };
        self.rows.push(e);
        Ok(self.rows.last_mut().expect("just pushed"))
    }

    fn llm(&mut self, kind: EventType, library: &SkillLibrary) -> Result<&mut LedgerEvent, Stop> {
        let c = self.config;
        let cm = &c.cache_model;
        let skills = (library.rule_count() + library.routine_count()) as u64;
        let stable = cm.stable_prefix_tokens + cm.per_skill_prefix_growth * skills;
        let fingerprint = library.index_fingerprint();
        let cached = if *self.last_prefix == Some(fingerprint) { stable } else { 0 };
        *self.last_prefix = Some(fingerprint);
        let mut volatile = cm.volatile_tokens_per_call as f64;
        let (model, completion) = match kind {
            EventType::Planner => (&c.planner_model, c.token_model.q_plan),
            EventType::Reflector => (&c.planner_model, c.token_model.q_reflect),
            _ => {
                if c.token_model.visual_compression {
                    volatile *= c.token_model.beta_vis;
                }
                (&c.actor_model, c.token_model.q_act)
            }
        };
        let e = self.row(kind)?;
        e.model = model.clone();
        e.prompt_tokens = stable + libm::round(volatile) as u64;
        e.cached_prompt_tokens = cached;
        e.completion_tokens = libm::round(completion) as u64;
        e.reasoning_tokens = cm.reasoning_tokens_per_call;
        e.reflector_fired = kind == EventType::Reflector;
        Ok(e)
    }

    fn action(&mut self, name: &str, target: &str) -> Result<(), Stop> {
        let e = self.row(EventType::Action)?;
        e.action_name = name.into();
        e.action_target = target.into();
        Ok(())
    }
}

/// The mock agent. It keeps the prompt-cache state across tasks.
#[derive(Debug, Clone)]
pub struct Agent<'a> {
    config: &'a SimConfig,
    last_prefix: Option<u64>,
}

struct Cursor {
    /// Primitive actions so far in the task.
    actions: u64,
    errored: bool,
    state_hash: u64,
    history: Vec<ActionRecord>,
}

impl<'a> Agent<'a> {
    pub fn new(config: &'a SimConfig, seed_library: &SkillLibrary) -> Self {
        let last_prefix = config.cache_model.warm_start.then(|| seed_library.index_fingerprint());
        Agent { config, last_prefix }
    }

    /// Runs one task against a library snapshot.
    pub fn run_task(&mut self, library: &SkillLibrary, task: &SyntheticTask, index: usize) -> TaskRun {
        let config = self.config;
        let mut rng = task_rng(config.seed, index);
        let mut trace = Trace { config, task, rows: Vec::new(), last_prefix: &mut self.last_prefix };
        let mut segments = Vec::new();
        let outcome = execute(&mut trace, library, task, &mut rng, &mut segments);
        let status = match outcome {
            Err(Stop::Repeat) => STATUS_REPEAT_ACTION,
            _ if !task.feasible => STATUS_INFEASIBLE,
            Ok(true) => STATUS_SUCCESS,
            Ok(false) | Err(Stop::Budget) => STATUS_FAIL,
        };
        if let Ok(e) = trace.row(EventType::Eval) {
            e.evaluator_status = status.into();
        }
        TaskRun {
            rows: trace.rows,
            episode: Episode { task_id: task.task_id.clone(), success: status == STATUS_SUCCESS, segments },
            status: status.into(),
        }
    }
}

fn primitive(
    trace: &mut Trace<'_>,
    library: &SkillLibrary,
    cur: &mut Cursor,
    name: &str,
    target: &str,
    text: &str,
    changes_page: bool,
) -> Result<bool, Stop> {
    trace.action(name, if target.is_empty() { text } else { target })?;
    cur.actions += 1;
    if changes_page {
        cur.state_hash += 1;
    }
    cur.history.push(ActionRecord::new(normalize_action_signature(name, target, text), cur.state_hash));
    let reflect = should_reflect(cur.actions, cur.errored, trace.config.k_r);
    cur.errored = false;
    if reflect {
        trace.llm(EventType::Reflector, library)?;
    }
    Ok(reflect)
}

fn invoke_routine(
    trace: &mut Trace<'_>,
    library: &SkillLibrary,
    cur: &mut Cursor,
    sub: &SyntheticSubgoal,
    hit: &Retrieval,
    rng: &mut Pcg64,
) -> Result<bool, Stop> {
    let target = hit.direction.map(|d| d.as_str()).unwrap_or("");
    for _ in 0..trace.config.routine_step_cost.max(1) {
        let e = trace.row(EventType::Routine)?;
        e.routine_id = hit.routine_id.clone();
        e.skill_id = hit.routine_id.clone();
        e.action_name = "run".into();
        e.action_target = target.into();
    }
    let skip = trace.config.routine_action_savings.min(sub.actions.len());
    for a in &sub.actions[skip..] {
        primitive(trace, library, cur, &a.name, &a.target, &a.text, true)?;
    }
    Ok(bernoulli(rng, sub.reliability))
}

/// Clicks one element without page change until a rule vetoes the next
/// repeat or the repeat-termination marker fires.
fn stuck_loop(
    trace: &mut Trace<'_>,
    library: &SkillLibrary,
    cur: &mut Cursor,
    task: &SyntheticTask,
    sub: &SyntheticSubgoal,
) -> Result<(), Stop> {
    let target = alloc::format!("{}_stuck", sub.actions.first().map_or("element", |a| a.target.as_str()));
    let monitor = MonitorReport { url: task.url.clone(), ..Default::default() };
    loop {
        trace.llm(EventType::Actor, library)?;
        primitive(trace, library, cur, "click", &target, "", false)?;
        if trace.config.rules_enabled {
            if let Some(rule) = match_rules(library, window(&cur.history, DEFAULT_WINDOW), &monitor).into_iter().next() {
                trace.llm(EventType::Planner, library)?.skill_id = rule;
                cur.history.clear();
                return Ok(());
            }
        }
        if detect_repeat_termination(&cur.history, REPEAT_TERMINATION) {
            return Err(Stop::Repeat);
        }
    }
}

fn execute(
    trace: &mut Trace<'_>,
    library: &SkillLibrary,
    task: &SyntheticTask,
    rng: &mut Pcg64,
    segments: &mut Vec<SubgoalSegment>,
) -> Result<bool, Stop> {
    let config = trace.config;
    let mut cur = Cursor { actions: 0, errored: false, state_hash: 1, history: Vec::new() };
    trace.llm(EventType::Planner, library)?;
    for sub in &task.subgoals {
        let mut keywords = normalize_phrases(&sub.keywords);
        keywords.extend(normalize_keywords(&sub.object));
        let mut seg = SubgoalSegment {
            template: sub.template.clone(),
            keywords: sub.keywords.clone(),
            url: task.url.clone(),
            actions: vec![],
            routines: vec![],
            verified: false,
            succeeded: false,
            reusable: sub.coverable,
        };
        let mut done = false;
        // An ambiguous polarity match falls through to the actor.
        if let Ok(Some(hit)) = retrieve_with_prior(library, &keywords, &task.url, config.learning.prior) {
            let result = invoke_routine(trace, library, &mut cur, sub, &hit, rng);
            let passed = match result {
                Ok(p) => p,
                Err(stop) => {
                    segments.push(seg);
                    return Err(stop);
                }
            };
            seg.routines.push(RoutineUse { id: hit.routine_id.clone(), passed });
            done = passed;
            cur.errored = !passed;
        }
        let replan_first = !seg.routines.is_empty();
        let mut attempt = 0;
        while !done && attempt < config.max_attempts {
            let attempt_result = (|| {
                if attempt > 0 || replan_first {
                    trace.llm(EventType::Planner, library)?;
                }
                if sub.loopy && bernoulli(rng, sub.loop_probability) {
                    stuck_loop(trace, library, &mut cur, task, sub)?;
                }
                // Verified only when the reflector checks the subgoal's last action.
                let mut verified = false;
                for a in &sub.actions {
                    trace.llm(EventType::Actor, library)?;
                    verified = primitive(trace, library, &mut cur, &a.name, &a.target, &a.text, true)?;
                }
                Ok(verified)
            })();
            attempt += 1;
            let verified = match attempt_result {
                Ok(v) => v,
                Err(stop) => {
                    segments.push(seg);
                    return Err(stop);
                }
            };
            if bernoulli(rng, sub.fallback_success) {
                done = true;
                seg.actions = sub.actions.clone();
                seg.verified = verified;
            } else {
                cur.errored = true;
            }
        }
        seg.succeeded = done;
        segments.push(seg);
        if !done {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The per-task library update, or no change when learning is disabled.
pub fn learn(config: &SimConfig, library: &SkillLibrary, run: &TaskRun, today: Date) -> (SkillLibrary, Vec<LearningEvent>) {
    if !config.learning_enabled {
        return (library.clone(), Vec::new());
    }
    library_update(library, &run.episode, &config.learning, today)
}

/// Runs `tasks` in order, updating the library after each one.
pub fn run_tasks(config: &SimConfig, seed_library: &SkillLibrary, tasks: &[SyntheticTask]) -> Result<StreamOutput, SimError> {
    config.validate()?;
    let mut library = seed_library.clone();
    let mut agent = Agent::new(config, seed_library);
    let mut rows = Vec::new();
    let mut records = Vec::with_capacity(tasks.len());
    for (index, task) in tasks.iter().enumerate() {
        let run = agent.run_task(&library, task, index);
        let today = task.date.unwrap_or_else(|| config.date_of(index));
        let (next, events) = learn(config, &library, &run, today);
        library = next;
        records.push(TaskRecord {
            task_id: task.task_id.clone(),
            index,
            status: run.status.to_string(),
            steps: run.rows.len().saturating_sub(1),
            episode: run.episode,
            events,
        });
        rows.extend(run.rows);
    }
    let all: Vec<LearningEvent> = records.iter().flat_map(|r| r.events.iter().cloned()).collect();
    let stats = LibraryStats::from_events(seed_library.routine_count(), &all, library.routine_count());
    Ok(StreamOutput { rows, library, records, stats })
}

/// Generates the configured stream and runs it.
pub fn run_stream(config: &SimConfig, seed_library: &SkillLibrary) -> Result<StreamOutput, SimError> {
    config.validate()?;
    run_tasks(config, seed_library, &super::generate_stream(config))
}
