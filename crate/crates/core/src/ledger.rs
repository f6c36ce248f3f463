//! Trajectory-ledger rows and per-task views.
//!
//! One row per LLM call, primitive browser action, routine invocation, or
//! terminal evaluator verdict. Every metric in [`crate::metrics`] is a pure
//! function of these rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Column order of the ledger, exactly.
pub const HEADER: [&str; 18] = [
    "run_id",
    "task_id",
    "domain",
    "method",
    "step_idx",
    "event_type",
    "model",
    "prompt_tokens",
    "cached_prompt_tokens",
    "completion_tokens",
    "reasoning_tokens",
    "action_name",
    "action_target",
    "routine_id",
    "skill_id",
    "reflector_fired",
    "evaluator_status",
    "wall_time_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Planner,
    Actor,
    Reflector,
    Action,
    Routine,
    Eval,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Planner => "planner",
            EventType::Actor => "actor",
            EventType::Reflector => "reflector",
            EventType::Action => "action",
            EventType::Routine => "routine",
            EventType::Eval => "eval",
        }
    }

    /// Planner, Actor and Reflector rows are model calls.
    pub fn is_llm_call(self) -> bool {
        matches!(self, EventType::Planner | EventType::Actor | EventType::Reflector)
    }
}

impl FromStr for EventType {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "planner" => EventType::Planner,
            "actor" => EventType::Actor,
            "reflector" => EventType::Reflector,
            "action" => EventType::Action,
            "routine" => EventType::Routine,
            "eval" => EventType::Eval,
            other => return Err(LedgerError::InvariantViolation(format!("unknown event_type {other:?}"))),
        })
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Terminal evaluator verdicts. `fail:repeat_action` marks a repeat-loop
/// termination.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Verdict {
    Success,
    Fail,
    Infeasible,
    RepeatAction,
    Other(String),
}

pub const STATUS_SUCCESS: &str = "success";
pub const STATUS_FAIL: &str = "fail";
pub const STATUS_INFEASIBLE: &str = "infeasible";
pub const STATUS_REPEAT_ACTION: &str = "fail:repeat_action";

impl Verdict {
    pub fn parse(status: &str) -> Verdict {
        match status {
            STATUS_SUCCESS => Verdict::Success,
            STATUS_FAIL => Verdict::Fail,
            STATUS_INFEASIBLE => Verdict::Infeasible,
            STATUS_REPEAT_ACTION => Verdict::RepeatAction,
            other => Verdict::Other(other.into()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Verdict::Success => STATUS_SUCCESS,
            Verdict::Fail => STATUS_FAIL,
            Verdict::Infeasible => STATUS_INFEASIBLE,
            Verdict::RepeatAction => STATUS_REPEAT_ACTION,
            Verdict::Other(s) => s,
        }
    }

    pub fn is_success(&self) -> bool {
        *self == Verdict::Success
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("task {task_id} has no terminal eval row")]
    MissingTerminal { task_id: String },
    #[error("task {task_id} has more than one eval row")]
    DuplicateTerminal { task_id: String },
    #[error("task {task_id}: step_idx {step_idx} does not increase")]
    NonMonotoneStep { task_id: String, step_idx: u64 },
    #[error("task {task_id}: row after the terminal eval row")]
    TrailingEvent { task_id: String },
}

impl LedgerError {
    pub fn task_id(&self) -> Option<&str> {
        match self {
            LedgerError::InvariantViolation(_) => None,
            LedgerError::MissingTerminal { task_id }
            | LedgerError::DuplicateTerminal { task_id }
            | LedgerError::NonMonotoneStep { task_id, .. }
            | LedgerError::TrailingEvent { task_id } => Some(task_id),
        }
    }
}

/// One ledger row. Field order matches [`HEADER`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub run_id: String,
    pub task_id: String,
    pub domain: String,
    pub method: String,
    pub step_idx: u64,
    pub event_type: EventType,
    pub model: String,
    pub prompt_tokens: u64,
    pub cached_prompt_tokens: u64,
    pub completion_tokens: u64,
    pub reasoning_tokens: u64,
    pub action_name: String,
    pub action_target: String,
    pub routine_id: String,
    pub skill_id: String,
    pub reflector_fired: bool,
    pub evaluator_status: String,
    pub wall_time_ms: u64,
}

impl LedgerEvent {
    /// A row with the identifying fields set and everything else empty.
    pub fn new(
        run_id: impl Into<String>,
        task_id: impl Into<String>,
        domain: impl Into<String>,
        method: impl Into<String>,
        step_idx: u64,
        event_type: EventType,
    ) -> Self {
        LedgerEvent {
            run_id: run_id.into(),
            task_id: task_id.into(),
            domain: domain.into(),
            method: method.into(),
            step_idx,
            event_type,
            model: String::new(),
            prompt_tokens: 0,
            cached_prompt_tokens: 0,
            completion_tokens: 0,
            reasoning_tokens: 0,
            action_name: String::new(),
            action_target: String::new(),
            routine_id: String::new(),
            skill_id: String::new(),
            reflector_fired: false,
            evaluator_status: String::new(),
            wall_time_ms: 0,
        }
    }

    /// Per-row invariants.
    pub fn validate(&self) -> Result<(), LedgerError> {
        let at = || format!("{}/{} step {}", self.run_id, self.task_id, self.step_idx);
        if self.task_id.is_empty() {
            return Err(LedgerError::InvariantViolation(format!("{}: empty task_id", at())));
        }
        if self.cached_prompt_tokens > self.prompt_tokens {
            return Err(LedgerError::InvariantViolation(format!(
                "{}: cached_prompt_tokens {} > prompt_tokens {}",
                at(),
                self.cached_prompt_tokens,
                self.prompt_tokens
            )));
        }
        match (self.event_type == EventType::Eval, self.evaluator_status.is_empty()) {
            (true, true) => Err(LedgerError::InvariantViolation(format!("{}: eval row without evaluator_status", at()))),
            (false, false) => Err(LedgerError::InvariantViolation(format!(
                "{}: evaluator_status on a {} row",
                at(),
                self.event_type
            ))),
            _ => Ok(()),
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens + self.reasoning_tokens
    }
}

/// All rows of one `(run_id, task_id)`: ordered non-eval rows plus the
/// terminal verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTrajectoryView {
    pub run_id: String,
    pub task_id: String,
    pub domain: String,
    pub events: Vec<LedgerEvent>,
    pub terminal: LedgerEvent,
}

impl TaskTrajectoryView {
    /// Non-eval rows: every LLM call, browser action and routine invocation.
    pub fn steps(&self) -> usize {
        self.events.len()
    }

    /// Prompt + completion + reasoning tokens over all rows.
    pub fn tokens(&self) -> u64 {
        self.events.iter().chain(core::iter::once(&self.terminal)).map(LedgerEvent::total_tokens).sum()
    }

    pub fn wall_time_ms(&self) -> u64 {
        self.events.iter().chain(core::iter::once(&self.terminal)).map(|e| e.wall_time_ms).sum()
    }

    /// `(cached, prompt)` sums over Planner/Actor/Reflector rows.
    pub fn llm_prompt_tokens(&self) -> (u64, u64) {
        self.events
            .iter()
            .filter(|e| e.event_type.is_llm_call())
            .fold((0, 0), |(c, p), e| (c + e.cached_prompt_tokens, p + e.prompt_tokens))
    }

    pub fn llm_calls(&self) -> usize {
        self.events.iter().filter(|e| e.event_type.is_llm_call()).count()
    }

    pub fn count(&self, kind: EventType) -> usize {
        self.events.iter().filter(|e| e.event_type == kind).count()
    }

    pub fn status(&self) -> &str {
        &self.terminal.evaluator_status
    }

    pub fn verdict(&self) -> Verdict {
        Verdict::parse(self.status())
    }

    /// Distinct non-empty routine/skill ids, in first-firing order.
    pub fn fired_skill_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.events {
            for id in [&e.routine_id, &e.skill_id] {
                if !id.is_empty() && !out.contains(id) {
                    out.push(id.clone());
                }
            }
        }
        out
    }

    /// At least one retrieved rule or routine fired.
    pub fn skill_hit(&self) -> bool {
        self.events.iter().any(|e| !e.routine_id.is_empty() || !e.skill_id.is_empty())
    }
}

/// Groups rows by `(run_id, task_id)` in first-appearance order and validates
/// per-row and per-task invariants.
pub fn read_tasks(events: &[LedgerEvent]) -> Result<Vec<TaskTrajectoryView>, LedgerError> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut groups: BTreeMap<(&str, &str), Vec<&LedgerEvent>> = BTreeMap::new();
    for e in events {
        e.validate()?;
        let key = (e.run_id.as_str(), e.task_id.as_str());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(e);
    }
    let mut views = Vec::with_capacity(order.len());
    for key in order {
        let rows = &groups[&key];
        let task_id = || String::from(key.1);
        let mut last: Option<u64> = None;
        let mut terminal: Option<&LedgerEvent> = None;
        let mut body = Vec::with_capacity(rows.len());
        for row in rows {
            if last.is_some_and(|prev| row.step_idx <= prev) {
                return Err(LedgerError::NonMonotoneStep { task_id: task_id(), step_idx: row.step_idx });
            }
            last = Some(row.step_idx);
            if row.event_type == EventType::Eval {
                if terminal.is_some() {
                    return Err(LedgerError::DuplicateTerminal { task_id: task_id() });
                }
                terminal = Some(row);
            } else if terminal.is_some() {
                return Err(LedgerError::TrailingEvent { task_id: task_id() });
            } else {
                body.push((*row).clone());
            }
        }
        let terminal = terminal.ok_or_else(|| LedgerError::MissingTerminal { task_id: task_id() })?;
        views.push(TaskTrajectoryView {
            run_id: key.0.into(),
            task_id: key.1.into(),
            domain: terminal.domain.clone(),
            events: body,
            terminal: terminal.clone(),
        });
    }
    Ok(views)
}

const KEYBOARD_FAMILY: [&str; 6] = ["type", "press", "key", "key_press", "hotkey", "fill"];

fn bare_target(target: &str) -> &str {
    let t = target.trim();
    t.strip_prefix("id=").unwrap_or(t)
}

/// Normalized action signature: `<name>#<target>` for clicks and other
/// actions, `<name>#<key_or_text>` for keyboard actions.
pub fn normalize_action_signature(action_name: &str, action_target: &str, key_or_text: &str) -> String {
    let name = action_name.trim().to_lowercase();
    let arg = if KEYBOARD_FAMILY.contains(&name.as_str()) {
        key_or_text.trim()
    } else {
        bare_target(action_target)
    };
    format!("{name}#{arg}")
}
