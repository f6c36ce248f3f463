//! Skill-library domain types.
//!
//! The active library is the disjoint union of hand-authored rules and
//! parameterized routines, plus an append-only blacklist of demoted routines.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::keyword::{normalize_phrases, KeywordSet};

/// Confidence assumed for a skill that has never been invoked.
pub const DEFAULT_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkillError {
    #[error("unknown trigger predicate: {0}")]
    UnknownPredicate(String),
    #[error("bad polarity block: {0}")]
    BadPolarity(String),
    #[error("routine {0} has no trigger keywords")]
    EmptyTrigger(String),
    #[error("empty skill id")]
    EmptyId,
    #[error("skill id {0} already present in the library")]
    DuplicateId(String),
    #[error("skill id {0} is on the demotion blacklist")]
    Blacklisted(String),
    #[error("unknown priority: {0}")]
    UnknownPriority(String),
    #[error("unknown polarity direction: {0}")]
    UnknownDirection(String),
}

/// Pass/fail counters behind the running confidence estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfidenceStats {
    pub n_pass: u64,
    pub n_fail: u64,
}

impl ConfidenceStats {
    pub const fn new(n_pass: u64, n_fail: u64) -> Self {
        ConfidenceStats { n_pass, n_fail }
    }

    pub fn invocations(&self) -> u64 {
        self.n_pass + self.n_fail
    }

    /// `n_pass / (n_pass + n_fail)`, or `prior` when the skill is unseen.
    pub fn confidence(&self, prior: f64) -> f64 {
        match self.invocations() {
            0 => prior,
            n => self.n_pass as f64 / n as f64,
        }
    }

    pub fn fail_ratio(&self) -> Option<f64> {
        match self.invocations() {
            0 => None,
            n => Some(self.n_fail as f64 / n as f64),
        }
    }

    pub fn merged(self, other: ConfidenceStats) -> ConfidenceStats {
        ConfidenceStats::new(self.n_pass + other.n_pass, self.n_fail + other.n_fail)
    }
}

/// Free-function form of [`ConfidenceStats::confidence`].
pub fn confidence(stats: ConfidenceStats, prior: f64) -> f64 {
    stats.confidence(prior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    High,
    Normal,
    Low,
}

impl Priority {
    pub fn as_str(self) -> &'static str {
        match self {
            Priority::High => "high",
            Priority::Normal => "normal",
            Priority::Low => "low",
        }
    }
}

impl FromStr for Priority {
    type Err = SkillError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "high" => Ok(Priority::High),
            "normal" => Ok(Priority::Normal),
            "low" => Ok(Priority::Low),
            other => Err(SkillError::UnknownPriority(other.into())),
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The closed set of rule trigger predicates.
///
/// Textual forms accepted by [`FromStr`]:
/// `last_action_equals(current_action) >= K`, `repeat_count(current_action, K)`,
/// `repeat_count(<signature>, K)`, `stale_page`, `selector_rejected` (the last
/// two optionally with `()`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// The same normalized action signature `k` consecutive times with no
    /// state-hash change. `signature: None` means "whatever the last action was".
    RepeatCount { signature: Option<String>, k: u32 },
    StalePage,
    SelectorRejected,
}

const CURRENT_ACTION: &str = "current_action";

impl FromStr for Predicate {
    type Err = SkillError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let unknown = || SkillError::UnknownPredicate(text.into());
        let bare = text.strip_suffix("()").unwrap_or(text).trim();
        match bare {
            "stale_page" => return Ok(Predicate::StalePage),
            "selector_rejected" => return Ok(Predicate::SelectorRejected),
            _ => {}
        }
        if let Some(rest) = text.strip_prefix("last_action_equals(") {
            let (arg, tail) = rest.split_once(')').ok_or_else(unknown)?;
            if arg.trim() != CURRENT_ACTION {
                return Err(unknown());
            }
            let k = tail
                .trim()
                .strip_prefix(">=")
                .and_then(|n| n.trim().parse::<u32>().ok())
                .filter(|k| *k >= 1)
                .ok_or_else(unknown)?;
            return Ok(Predicate::RepeatCount { signature: None, k });
        }
        if let Some(rest) = text.strip_prefix("repeat_count(") {
            let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
            let (sig, k) = inner.rsplit_once(',').ok_or_else(unknown)?;
            let k = k.trim().parse::<u32>().ok().filter(|k| *k >= 1).ok_or_else(unknown)?;
            let sig = sig.trim();
            if sig.is_empty() {
                return Err(unknown());
            }
            let signature = (sig != CURRENT_ACTION).then(|| sig.to_string());
            return Ok(Predicate::RepeatCount { signature, k });
        }
        Err(unknown())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::RepeatCount { signature: None, k } => {
                write!(f, "last_action_equals({CURRENT_ACTION}) >= {k}")
            }
            Predicate::RepeatCount { signature: Some(sig), k } => write!(f, "repeat_count({sig}, {k})"),
            Predicate::StalePage => f.write_str("stale_page()"),
            Predicate::SelectorRejected => f.write_str("selector_rejected()"),
        }
    }
}

/// A pattern-triggered guardrail: predicate plus redirection text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSkill {
    pub id: String,
    pub trigger: Predicate,
    pub sites: Vec<String>,
    pub priority: Priority,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Asc => "asc",
            Direction::Desc => "desc",
        }
    }

    pub fn flip(self) -> Direction {
        match self {
            Direction::Asc => Direction::Desc,
            Direction::Desc => Direction::Asc,
        }
    }
}

impl FromStr for Direction {
    type Err = SkillError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "asc" => Ok(Direction::Asc),
            "desc" => Ok(Direction::Desc),
            other => Err(SkillError::UnknownDirection(other.into())),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityVariant {
    pub dir: Direction,
    /// Keyword phrases selecting this direction, as authored.
    pub keywords: Vec<String>,
}

impl PolarityVariant {
    pub fn keyword_set(&self) -> KeywordSet {
        normalize_phrases(&self.keywords)
    }
}

/// A parameterized program-as-action skill.
///
/// Trigger keywords are stored as authored phrases (`"most expensive"`); the
/// routine is eligible for a subgoal when every token of at least one phrase
/// appears in the subgoal's keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineSkill {
    pub id: String,
    pub trigger_keywords: Vec<String>,
    pub url_glob: String,
    pub polarity: Option<[PolarityVariant; 2]>,
    pub confidence: ConfidenceStats,
    pub body: String,
    pub pre_conditions: Vec<String>,
    pub post_conditions: Vec<String>,
}

impl RoutineSkill {
    pub fn validate(&self) -> Result<(), SkillError> {
        if self.id.trim().is_empty() {
            return Err(SkillError::EmptyId);
        }
        if self.trigger_phrases().is_empty() {
            return Err(SkillError::EmptyTrigger(self.id.clone()));
        }
        if let Some(variants) = &self.polarity {
            validate_polarity(variants)?;
        }
        Ok(())
    }

    /// Normalized token set of each non-empty trigger phrase.
    pub fn trigger_phrases(&self) -> Vec<KeywordSet> {
        self.trigger_keywords
            .iter()
            .map(|p| normalize_phrases(core::slice::from_ref(p)))
            .filter(|s| !s.is_empty())
            .collect()
    }

    /// Every token this routine is indexed under (trigger plus variants).
    pub fn keyword_set(&self) -> KeywordSet {
        let mut set = normalize_phrases(&self.trigger_keywords);
        if let Some(variants) = &self.polarity {
            for v in variants {
                set.extend(v.keyword_set());
            }
        }
        set
    }

    /// All keyword phrases (trigger first, then variants), deduplicated.
    pub fn keyword_phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let variants = self.polarity.iter().flat_map(|v| v.iter()).flat_map(|v| v.keywords.iter());
        for p in self.trigger_keywords.iter().chain(variants) {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }

    /// Parameter names from the body's `def run(...)` signature.
    pub fn params(&self) -> Vec<String> {
        params_of(&self.body)
    }

    pub fn variant(&self, dir: Direction) -> Option<&PolarityVariant> {
        self.polarity.as_ref()?.iter().find(|v| v.dir == dir)
    }
}

pub(crate) fn validate_polarity(variants: &[PolarityVariant]) -> Result<(), SkillError> {
    if variants.len() != 2 {
        return Err(SkillError::BadPolarity(format!("expected 2 variants, found {}", variants.len())));
    }
    if variants[0].dir == variants[1].dir {
        return Err(SkillError::BadPolarity(format!("duplicate direction {}", variants[0].dir)));
    }
    let (a, b) = (variants[0].keyword_set(), variants[1].keyword_set());
    if a.is_empty() || b.is_empty() {
        return Err(SkillError::BadPolarity("variant with no keywords".into()));
    }
    if let Some(shared) = a.intersection(&b).next() {
        return Err(SkillError::BadPolarity(format!("keyword {shared} selects both directions")));
    }
    Ok(())
}

/// Extracts parameter names from the first `def run(` line of a program body.
pub fn params_of(body: &str) -> Vec<String> {
    let Some(line) = body.lines().map(str::trim_start).find(|l| l.starts_with("def run(")) else {
        return Vec::new();
    };
    let inner = &line["def run(".len()..];
    let Some(end) = inner.find(')') else {
        return Vec::new();
    };
    inner[..end]
        .split(',')
        .map(|p| p.split(':').next().unwrap_or("").trim())
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect()
}

/// One append-only blacklist record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemotionEntry {
    pub id: String,
    pub demoted_at: Date,
    pub reason: String,
    /// Keyword phrases of the demoted skill, as authored.
    pub keywords: Vec<String>,
}

impl DemotionEntry {
    pub fn keyword_set(&self) -> KeywordSet {
        normalize_phrases(&self.keywords)
    }
}

/// Reason text recorded when a routine crosses the demotion threshold.
pub fn demotion_reason(stats: ConfidenceStats) -> String {
    let ratio = stats.fail_ratio().unwrap_or(0.0);
    format!("fail_ratio={:.2} over {} invocations", ratio, stats.invocations())
}

/// A library invariant violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LibraryViolation {
    SharedId(String),
    ActiveBlacklisted(String),
    InvalidRoutine(String, SkillError),
}

impl fmt::Display for LibraryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LibraryViolation::SharedId(id) => write!(f, "id {id} is both a rule and a routine"),
            LibraryViolation::ActiveBlacklisted(id) => write!(f, "active routine {id} is on the demotion blacklist"),
            LibraryViolation::InvalidRoutine(id, e) => write!(f, "routine {id}: {e}"),
        }
    }
}

/// Rules, routines, and the demotion blacklist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillLibrary {
    rules: BTreeMap<String, RuleSkill>,
    routines: BTreeMap<String, RoutineSkill>,
    blacklist: Vec<DemotionEntry>,
}

impl SkillLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a library from parts, reporting every invariant violation.
    pub fn from_parts(
        rules: Vec<RuleSkill>,
        routines: Vec<RoutineSkill>,
        blacklist: Vec<DemotionEntry>,
    ) -> Result<Self, Vec<LibraryViolation>> {
        let mut lib = SkillLibrary { blacklist, ..Default::default() };
        let mut violations = Vec::new();
        for r in rules {
            if lib.rules.contains_key(&r.id) {
                violations.push(LibraryViolation::SharedId(r.id.clone()));
            }
            lib.rules.insert(r.id.clone(), r);
        }
        for r in routines {
            if lib.rules.contains_key(&r.id) || lib.routines.contains_key(&r.id) {
                violations.push(LibraryViolation::SharedId(r.id.clone()));
            }
            lib.routines.insert(r.id.clone(), r);
        }
        violations.extend(lib.violations());
        if violations.is_empty() {
            Ok(lib)
        } else {
            Err(violations)
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = &RuleSkill> {
        self.rules.values()
    }

    pub fn routines(&self) -> impl Iterator<Item = &RoutineSkill> {
        self.routines.values()
    }

    pub fn blacklist(&self) -> &[DemotionEntry] {
        &self.blacklist
    }

    pub fn rule(&self, id: &str) -> Option<&RuleSkill> {
        self.rules.get(id)
    }

    pub fn routine(&self, id: &str) -> Option<&RoutineSkill> {
        self.routines.get(id)
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn routine_count(&self) -> usize {
        self.routines.len()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.rules.contains_key(id) || self.routines.contains_key(id)
    }

    pub fn is_blacklisted(&self, id: &str) -> bool {
        self.blacklist.iter().any(|e| e.id == id)
    }

    pub fn insert_rule(&mut self, rule: RuleSkill) -> Result<(), SkillError> {
        if rule.id.trim().is_empty() {
            return Err(SkillError::EmptyId);
        }
        if self.contains_id(&rule.id) {
            return Err(SkillError::DuplicateId(rule.id));
        }
        self.rules.insert(rule.id.clone(), rule);
        Ok(())
    }

    pub fn insert_routine(&mut self, routine: RoutineSkill) -> Result<(), SkillError> {
        routine.validate()?;
        if self.contains_id(&routine.id) {
            return Err(SkillError::DuplicateId(routine.id));
        }
        if self.is_blacklisted(&routine.id) {
            return Err(SkillError::Blacklisted(routine.id));
        }
        self.routines.insert(routine.id.clone(), routine);
        Ok(())
    }

    pub(crate) fn routine_mut(&mut self, id: &str) -> Option<&mut RoutineSkill> {
        self.routines.get_mut(id)
    }

    pub(crate) fn remove_routine(&mut self, id: &str) -> Option<RoutineSkill> {
        self.routines.remove(id)
    }

    /// Appends to the blacklist; entries are never edited or removed.
    pub fn append_demotion(&mut self, entry: DemotionEntry) {
        self.blacklist.push(entry);
    }

    /// Every invariant the library currently violates.
    pub fn violations(&self) -> Vec<LibraryViolation> {
        let mut out = Vec::new();
        for id in self.routines.keys() {
            if self.rules.contains_key(id) {
                out.push(LibraryViolation::SharedId(id.clone()));
            }
            if self.is_blacklisted(id) {
                out.push(LibraryViolation::ActiveBlacklisted(id.clone()));
            }
        }
        for r in self.routines.values() {
            if let Err(e) = r.validate() {
                out.push(LibraryViolation::InvalidRoutine(r.id.clone(), e));
            }
        }
        out
    }

    /// Stable fingerprint of the skill index (ids only, not counters); the
    /// simulator's prompt prefix changes exactly when this does.
    pub fn index_fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for id in self.rules.keys().chain(self.routines.keys()) {
            for b in id.bytes().chain(core::iter::once(0xff)) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
