//! The learning module: outcome counters, routine induction, blacklist-checked
//! admission, polarity-pair merging and demotion.
//!
//! Every operation is a pure function of its inputs. [`library_update`] runs
//! the whole per-task update and reports what it did as [`LearningEvent`]s.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::glob::url_path;
use crate::keyword::{normalize_phrases, tokens, KeywordSet};
use crate::skill::{
    demotion_reason, params_of, ConfidenceStats, DemotionEntry, Direction, PolarityVariant,
    RoutineSkill, SkillLibrary, DEFAULT_PRIOR,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LearningError {
    #[error("unknown skill {0}")]
    UnknownSkill(String),
    #[error("skill {0} is on the demotion blacklist")]
    DemotedSkill(String),
    #[error("invalid learning config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    pub theta_demote: f64,
    pub min_invocations: u64,
    pub jaccard_threshold: f64,
    /// Direction-flip pairs, ascending side first.
    pub antonym_lexicon: Vec<(String, String)>,
    pub prior: f64,
    /// Counters given to a newly admitted routine.
    pub admission: ConfidenceStats,
}

impl Default for LearningConfig {
    fn default() -> Self {
        let lexicon = [
            ("asc", "desc"),
            ("min", "max"),
            ("cheapest", "most expensive"),
            ("oldest", "newest"),
            ("lowest", "highest"),
            ("smallest", "largest"),
        ];
        LearningConfig {
            theta_demote: 0.5,
            min_invocations: 3,
            jaccard_threshold: 0.85,
            antonym_lexicon: lexicon.iter().map(|(a, d)| (a.to_string(), d.to_string())).collect(),
            prior: DEFAULT_PRIOR,
            admission: ConfidenceStats::new(1, 0),
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |m: String| Err(LearningError::InvalidConfig(m));
        if !(self.theta_demote > 0.0 && self.theta_demote < 1.0) {
            return bad(format!("theta_demote {} not in (0,1)", self.theta_demote));
        }
        if self.min_invocations < 1 {
            return bad("min_invocations must be at least 1".into());
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return bad(format!("jaccard_threshold {} not in (0,1]", self.jaccard_threshold));
        }
        if !(0.0..=1.0).contains(&self.prior) {
            return bad(format!("prior {} not in [0,1]", self.prior));
        }
        for (a, d) in &self.antonym_lexicon {
            if tokens(a).next().is_none() || tokens(d).next().is_none() {
                return bad(format!("empty antonym phrase in ({a:?}, {d:?})"));
            }
        }
        Ok(())
    }

    fn lexicon_tokens(&self) -> Vec<(Vec<String>, Vec<String>)> {
        self.antonym_lexicon
            .iter()
            .map(|(a, d)| (tokens(a).collect(), tokens(d).collect()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_passed(passed: bool) -> Self {
        if passed {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// A proposed routine distilled from one successful subgoal segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineCandidate {
    pub proposed_id: String,
    pub trigger_keywords: Vec<String>,
    pub url_glob: String,
    pub body: String,
    pub params: Vec<String>,
    pub source_task: String,
    pub subgoal_template: String,
}

impl RoutineCandidate {
    pub fn keyword_set(&self) -> KeywordSet {
        normalize_phrases(&self.trigger_keywords)
    }
}

/// One primitive browser action inside a subgoal segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveAction {
    pub name: String,
    pub target: String,
    /// Typed text or key; lifted to a parameter when non-empty.
    pub text: String,
}

impl PrimitiveAction {
    pub fn new(name: &str, target: &str, text: &str) -> Self {
        PrimitiveAction { name: name.into(), target: target.into(), text: text.into() }
    }
}

/// One routine invocation and whether its post-check passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineUse {
    pub id: String,
    pub passed: bool,
}

/// The trajectory slice serving one planner subgoal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalSegment {
    /// Subgoal template slug; becomes the candidate id.
    pub template: String,
    /// Subgoal keyword phrases.
    pub keywords: Vec<String>,
    pub url: String,
    /// Primitive actions of the attempt that completed the subgoal.
    pub actions: Vec<PrimitiveAction>,
    /// Routine invocations attempted on this subgoal, in order.
    pub routines: Vec<RoutineUse>,
    /// A Reflector progress check confirmed the segment.
    pub verified: bool,
    pub succeeded: bool,
    /// The subgoal is an instance of a recurring template.
    pub reusable: bool,
}

/// What the learning module sees of one finished task.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub task_id: String,
    pub success: bool,
    pub segments: Vec<SubgoalSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rejection {
    Blacklist { entry_id: String },
    Duplicate,
}

/// Counter, admission, merge and demotion events of one update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LearningEvent {
    Outcome { skill_id: String, outcome: Outcome, stats: ConfidenceStats },
    Admitted { skill_id: String, source_task: String, stats: ConfidenceStats },
    Rejected { proposed_id: String, source_task: String, reason: Rejection },
    Merged { from: Vec<String>, into: String, stats: ConfidenceStats },
    Demoted { entry: DemotionEntry, stats: ConfidenceStats },
}

impl LearningEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            LearningEvent::Outcome { .. } => "outcome",
            LearningEvent::Admitted { .. } => "admitted",
            LearningEvent::Rejected { .. } => "rejected",
            LearningEvent::Merged { .. } => "merged",
            LearningEvent::Demoted { .. } => "demoted",
        }
    }

    pub fn skill_id(&self) -> &str {
        match self {
            LearningEvent::Outcome { skill_id, .. } | LearningEvent::Admitted { skill_id, .. } => skill_id,
            LearningEvent::Rejected { proposed_id, .. } => proposed_id,
            LearningEvent::Merged { into, .. } => into,
            LearningEvent::Demoted { entry, .. } => &entry.id,
        }
    }
}

/// Library evolution counts, derived from events rather than snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryStats {
    pub seed: usize,
    pub induced: usize,
    pub demoted: usize,
    pub active: usize,
    pub polarity_pairs: usize,
}

impl LibraryStats {
    /// A merge of k routines into one counts as one induced routine.
    pub fn from_events(seed: usize, events: &[LearningEvent], active: usize) -> Self {
        let mut stats = LibraryStats { seed, active, ..Default::default() };
        let mut admitted = 0usize;
        let mut collapsed = 0usize;
        for e in events {
            match e {
                LearningEvent::Admitted { .. } => admitted += 1,
                LearningEvent::Merged { from, .. } => {
                    stats.polarity_pairs += 1;
                    collapsed += from.len().saturating_sub(1);
                }
                LearningEvent::Demoted { .. } => stats.demoted += 1,
                _ => {}
            }
        }
        stats.induced = admitted.saturating_sub(collapsed);
        stats
    }
}

fn record_outcome_mut(
    library: &mut SkillLibrary,
    skill_id: &str,
    outcome: Outcome,
) -> Result<ConfidenceStats, LearningError> {
    if library.is_blacklisted(skill_id) {
        return Err(LearningError::DemotedSkill(skill_id.into()));
    }
    let routine = library
        .routine_mut(skill_id)
        .ok_or_else(|| LearningError::UnknownSkill(skill_id.into()))?;
    match outcome {
        Outcome::Pass => routine.confidence.n_pass += 1,
        Outcome::Fail => routine.confidence.n_fail += 1,
    }
    Ok(routine.confidence)
}

/// Increments the pass or fail counter of one active routine.
pub fn record_outcome(
    library: &SkillLibrary,
    skill_id: &str,
    outcome: Outcome,
) -> Result<SkillLibrary, LearningError> {
    let mut next = library.clone();
    record_outcome_mut(&mut next, skill_id, outcome)?;
    Ok(next)
}

/// True when the counters show enough evidence of brittleness.
pub fn should_demote(stats: ConfidenceStats, config: &LearningConfig) -> bool {
    let n = stats.invocations();
    n >= config.min_invocations && n > 0 && stats.n_fail as f64 / n as f64 > config.theta_demote
}

fn scan_demotions_mut(
    library: &mut SkillLibrary,
    config: &LearningConfig,
    today: Date,
) -> Vec<(DemotionEntry, ConfidenceStats)> {
    let doomed: Vec<String> = library
        .routines()
        .filter(|r| should_demote(r.confidence, config))
        .map(|r| r.id.clone())
        .collect();
    let mut out = Vec::with_capacity(doomed.len());
    for id in doomed {
        let Some(routine) = library.remove_routine(&id) else { continue };
        let entry = DemotionEntry {
            id: routine.id.clone(),
            demoted_at: today,
            reason: demotion_reason(routine.confidence),
            keywords: routine.keyword_phrases(),
        };
        library.append_demotion(entry.clone());
        out.push((entry, routine.confidence));
    }
    out
}

/// Removes every routine meeting the demotion criterion and appends it to the
/// blacklist. Rules are never demoted.
pub fn scan_demotions(
    library: &SkillLibrary,
    config: &LearningConfig,
    today: Date,
) -> (SkillLibrary, Vec<DemotionEntry>) {
    let mut next = library.clone();
    let entries = scan_demotions_mut(&mut next, config, today).into_iter().map(|(e, _)| e).collect();
    (next, entries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlacklistCheck {
    Clear,
    Collision { entry_id: String },
}

fn first_collision(keywords: &KeywordSet, blacklist: &[DemotionEntry]) -> Option<String> {
    blacklist
        .iter()
        .find(|e| !e.keyword_set().is_disjoint(keywords))
        .map(|e| e.id.clone())
}

/// Collision iff the candidate shares a normalized keyword with some entry;
/// the first colliding entry in file order is reported.
pub fn check_blacklist(candidate: &RoutineCandidate, blacklist: &[DemotionEntry]) -> BlacklistCheck {
    match first_collision(&candidate.keyword_set(), blacklist) {
        Some(entry_id) => BlacklistCheck::Collision { entry_id },
        None => BlacklistCheck::Clear,
    }
}

/// Jaccard similarity of the normalized body token sets.
pub fn jaccard_body(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = tokens(a).collect();
    let tb: BTreeSet<String> = tokens(b).collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// If `b` equals `a` except at antonym-lexicon positions, all flipped in the
/// same direction, returns the side `a` sits on.
fn flip_direction(a: &[String], b: &[String], lexicon: &[(Vec<String>, Vec<String>)]) -> Option<Direction> {
    let (mut i, mut j) = (0, 0);
    let mut dir: Option<Direction> = None;
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            i += 1;
            j += 1;
            continue;
        }
        let step = lexicon.iter().find_map(|(asc, desc)| {
            if a[i..].starts_with(asc) && b[j..].starts_with(desc) {
                Some((Direction::Asc, asc.len(), desc.len()))
            } else if a[i..].starts_with(desc) && b[j..].starts_with(asc) {
                Some((Direction::Desc, desc.len(), asc.len()))
            } else {
                None
            }
        });
        let (d, la, lb) = step?;
        if dir.is_some_and(|prev| prev != d) {
            return None;
        }
        dir = Some(d);
        i += la;
        j += lb;
    }
    if i == a.len() && j == b.len() {
        dir
    } else {
        None
    }
}

/// Tokens of each `a` phrase that do not occur anywhere in `b`'s trigger,
/// for phrases `a` has and `b` lacks.
fn distinguishing(a: &RoutineSkill, b: &RoutineSkill) -> Vec<String> {
    let other = normalize_phrases(&b.trigger_keywords);
    let mut out: Vec<String> = Vec::new();
    for phrase in a.trigger_keywords.iter().filter(|p| !b.trigger_keywords.contains(p)) {
        let kept: Vec<String> = tokens(phrase).filter(|t| !other.iter().any(|k| k.as_str() == t)).collect();
        let joined = kept.join(" ");
        if !joined.is_empty() && !out.contains(&joined) {
            out.push(joined);
        }
    }
    out
}

fn union_ordered(a: &[String], b: &[String]) -> Vec<String> {
    let mut out = a.to_vec();
    for x in b {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

fn merged_id(a: &str, b: &str, library: &SkillLibrary) -> Option<String> {
    let common: String = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).map(|(x, _)| x).collect();
    let prefix = common.trim_matches('_');
    let free = |id: &str| id == a || id == b || (!library.contains_id(id) && !library.is_blacklisted(id));
    if !prefix.is_empty() && free(prefix) {
        return Some(prefix.into());
    }
    let fallback = format!("{}_pm", a.min(b));
    free(&fallback).then_some(fallback)
}

/// Builds the polarity routine for a mergeable pair, or `None` when the pair
/// does not qualify.
fn try_merge(
    a: &RoutineSkill,
    b: &RoutineSkill,
    library: &SkillLibrary,
    config: &LearningConfig,
    lexicon: &[(Vec<String>, Vec<String>)],
) -> Option<RoutineSkill> {
    if a.polarity.is_some() || b.polarity.is_some() || a.url_glob != b.url_glob {
        return None;
    }
    if jaccard_body(&a.body, &b.body) < config.jaccard_threshold {
        return None;
    }
    let ta: Vec<String> = tokens(&a.body).collect();
    let tb: Vec<String> = tokens(&b.body).collect();
    let (lo, hi) = match flip_direction(&ta, &tb, lexicon)? {
        Direction::Asc => (a, b),
        Direction::Desc => (b, a),
    };
    let (asc_kw, desc_kw) = (distinguishing(lo, hi), distinguishing(hi, lo));
    if asc_kw.is_empty() || desc_kw.is_empty() {
        return None;
    }
    let id = merged_id(&a.id, &b.id, library)?;
    let merged = RoutineSkill {
        id,
        trigger_keywords: union_ordered(&lo.trigger_keywords, &hi.trigger_keywords),
        url_glob: lo.url_glob.clone(),
        polarity: Some([
            PolarityVariant { dir: Direction::Asc, keywords: asc_kw },
            PolarityVariant { dir: Direction::Desc, keywords: desc_kw },
        ]),
        confidence: a.confidence.merged(b.confidence),
        body: lo.body.clone(),
        pre_conditions: union_ordered(&lo.pre_conditions, &hi.pre_conditions),
        post_conditions: union_ordered(&lo.post_conditions, &hi.post_conditions),
    };
    if merged.validate().is_err() || first_collision(&merged.keyword_set(), library.blacklist()).is_some() {
        return None;
    }
    Some(merged)
}

fn merge_polarity_pairs_mut(library: &mut SkillLibrary, config: &LearningConfig) -> Vec<LearningEvent> {
    let lexicon = config.lexicon_tokens();
    let mut events = Vec::new();
    let ids: Vec<String> = library.routines().filter(|r| r.polarity.is_none()).map(|r| r.id.clone()).collect();
    let mut consumed = vec![false; ids.len()];
    for i in 0..ids.len() {
        if consumed[i] {
            continue;
        }
        for j in i + 1..ids.len() {
            if consumed[j] {
                continue;
            }
            let (Some(a), Some(b)) = (library.routine(&ids[i]), library.routine(&ids[j])) else { continue };
            let Some(merged) = try_merge(a, b, library, config, &lexicon) else { continue };
            library.remove_routine(&ids[i]);
            library.remove_routine(&ids[j]);
            events.push(LearningEvent::Merged {
                from: vec![ids[i].clone(), ids[j].clone()],
                into: merged.id.clone(),
                stats: merged.confidence,
            });
            library.insert_routine(merged).expect("merged routine validated and id checked free");
            consumed[i] = true;
            consumed[j] = true;
            break;
        }
    }
    events
}

/// Replaces each pair of routines that agree up to a direction flip with one
/// polarity routine. Pairs are taken greedily in ascending id order.
pub fn merge_polarity_pairs(library: &SkillLibrary, config: &LearningConfig) -> SkillLibrary {
    let mut next = library.clone();
    merge_polarity_pairs_mut(&mut next, config);
    next
}

/// Lowercase slug: runs of non-alphanumerics become a single `_`.
pub fn slug(text: &str) -> String {
    tokens(text).collect::<Vec<_>>().join("_")
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_literal_safe(s: &str) -> bool {
    !s.contains(['"', '\\', '\n', '\r'])
}

/// Program text for a segment, with typed literals lifted to parameters.
fn routine_body(actions: &[PrimitiveAction]) -> Option<(String, Vec<String>)> {
    let mut params: Vec<String> = Vec::new();
    let mut literals: Vec<&str> = Vec::new();
    let mut lines = Vec::with_capacity(actions.len());
    for a in actions {
        if !is_identifier(&a.name) || !is_literal_safe(&a.target) || !is_literal_safe(&a.text) {
            return None;
        }
        if a.target.is_empty() && a.text.is_empty() {
            return None;
        }
        let mut args = Vec::new();
        if !a.target.is_empty() {
            args.push(format!("\"{}\"", a.target));
        }
        if !a.text.is_empty() {
            let idx = match literals.iter().position(|l| *l == a.text) {
                Some(i) => i,
                None => {
                    literals.push(&a.text);
                    params.push(format!("arg{}", literals.len() - 1));
                    literals.len() - 1
                }
            };
            args.push(params[idx].clone());
        }
        lines.push(format!("    {}({})\n", a.name, args.join(", ")));
    }
    let sig: Vec<String> = params.iter().map(|p| format!("{p}: str")).collect();
    let mut body = format!("def run({}) -> None:\n", sig.join(", "));
    for l in lines {
        body.push_str(&l);
    }
    debug_assert_eq!(params_of(&body), params);
    Some((body, params))
}

/// `/<first path segment>/*`, or `*` for root URLs.
fn url_scope(url: &str) -> String {
    let path = url_path(url);
    let path = path.split(['?', '#']).next().unwrap_or("");
    match path.trim_start_matches('/').split('/').next() {
        Some(seg) if !seg.is_empty() => format!("/{seg}/*"),
        _ => "*".into(),
    }
}

/// Candidate routines from a successful episode: one per segment that
/// succeeded without a routine, has at least two primitive actions, was
/// verified by the Reflector, comes from a reusable template, and
/// parameterizes cleanly.
pub fn induce(episode: &Episode, _library: &SkillLibrary) -> Vec<RoutineCandidate> {
    if !episode.success {
        return Vec::new();
    }
    episode
        .segments
        .iter()
        .filter(|s| s.succeeded && s.routines.is_empty() && s.actions.len() >= 2 && s.verified && s.reusable)
        .filter_map(|s| {
            let id = slug(&s.template);
            let (body, params) = routine_body(&s.actions)?;
            let trigger: Vec<String> = s.keywords.iter().filter(|k| tokens(k).next().is_some()).cloned().collect();
            if id.is_empty() || trigger.is_empty() {
                return None;
            }
            Some(RoutineCandidate {
                proposed_id: id,
                trigger_keywords: trigger,
                url_glob: url_scope(&s.url),
                body,
                params,
                source_task: episode.task_id.clone(),
                subgoal_template: s.template.clone(),
            })
        })
        .collect()
}

fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Materializes both directions of a candidate whose body and trigger both
/// carry direction phrases from exactly one side of the lexicon.
fn materialize_polarity(candidate: &RoutineSkill, config: &LearningConfig) -> Option<RoutineSkill> {
    let lexicon = config.lexicon_tokens();
    let body: Vec<String> = tokens(&candidate.body).collect();
    let asc_in_body = lexicon.iter().any(|(a, _)| contains_seq(&body, a));
    let desc_in_body = lexicon.iter().any(|(_, d)| contains_seq(&body, d));
    let side = match (asc_in_body, desc_in_body) {
        (true, false) => Direction::Asc,
        (false, true) => Direction::Desc,
        _ => return None,
    };
    let mut own = Vec::new();
    let mut flipped = Vec::new();
    for phrase in &candidate.trigger_keywords {
        let toks: Vec<String> = tokens(phrase).collect();
        for ((a, d), (a_txt, d_txt)) in lexicon.iter().zip(&config.antonym_lexicon) {
            let (mine, theirs, theirs_txt) = match side {
                Direction::Asc => (a, d, d_txt),
                Direction::Desc => (d, a, a_txt),
            };
            if toks == *mine && !theirs.is_empty() {
                own.push(phrase.clone());
                flipped.push(theirs_txt.clone());
            }
        }
    }
    if own.is_empty() {
        return None;
    }
    let single: BTreeSet<&str> = lexicon
        .iter()
        .flat_map(|(a, d)| [a, d])
        .filter(|p| p.len() == 1)
        .map(|p| p[0].as_str())
        .collect();
    let stripped: Vec<&str> = candidate.id.split('_').filter(|seg| !single.contains(seg)).collect();
    let mut id = stripped.join("_");
    if id.is_empty() || id == candidate.id {
        id = format!("{}_pm", candidate.id);
    }
    let (asc_kw, desc_kw) = match side {
        Direction::Asc => (own.clone(), flipped.clone()),
        Direction::Desc => (flipped.clone(), own.clone()),
    };
    let routine = RoutineSkill {
        id,
        trigger_keywords: union_ordered(&candidate.trigger_keywords, &flipped),
        polarity: Some([
            PolarityVariant { dir: Direction::Asc, keywords: asc_kw },
            PolarityVariant { dir: Direction::Desc, keywords: desc_kw },
        ]),
        ..candidate.clone()
    };
    routine.validate().ok().map(|_| routine)
}

fn admit(
    library: &mut SkillLibrary,
    candidate: RoutineCandidate,
    config: &LearningConfig,
    events: &mut Vec<LearningEvent>,
) {
    let reject = |reason| LearningEvent::Rejected {
        proposed_id: candidate.proposed_id.clone(),
        source_task: candidate.source_task.clone(),
        reason,
    };
    if let BlacklistCheck::Collision { entry_id } = check_blacklist(&candidate, library.blacklist()) {
        events.push(reject(Rejection::Blacklist { entry_id }));
        return;
    }
    let plain = RoutineSkill {
        id: candidate.proposed_id.clone(),
        trigger_keywords: candidate.trigger_keywords.clone(),
        url_glob: candidate.url_glob.clone(),
        polarity: None,
        confidence: config.admission,
        body: candidate.body.clone(),
        pre_conditions: Vec::new(),
        post_conditions: Vec::new(),
    };
    let materialized = materialize_polarity(&plain, config);
    let routine = materialized.clone().unwrap_or(plain);
    if let Some(entry_id) = first_collision(&routine.keyword_set(), library.blacklist()) {
        events.push(reject(Rejection::Blacklist { entry_id }));
        return;
    }
    if let Some(entry) = library.blacklist().iter().find(|e| e.id == routine.id || e.id == candidate.proposed_id) {
        let entry_id = entry.id.clone();
        events.push(reject(Rejection::Blacklist { entry_id }));
        return;
    }
    if library.contains_id(&routine.id) || library.contains_id(&candidate.proposed_id) {
        events.push(reject(Rejection::Duplicate));
        return;
    }
    let id = routine.id.clone();
    let stats = routine.confidence;
    if library.insert_routine(routine).is_err() {
        events.push(reject(Rejection::Duplicate));
        return;
    }
    events.push(LearningEvent::Admitted { skill_id: id.clone(), source_task: candidate.source_task.clone(), stats });
    if materialized.is_some() {
        events.push(LearningEvent::Merged { from: vec![candidate.proposed_id.clone()], into: id, stats });
    }
}

/// The per-task library update: record outcomes of fired routines, induce,
/// admit candidates that clear the blacklist, merge polarity pairs, demote.
pub fn library_update(
    library: &SkillLibrary,
    episode: &Episode,
    config: &LearningConfig,
    today: Date,
) -> (SkillLibrary, Vec<LearningEvent>) {
    let mut next = library.clone();
    let mut events = Vec::new();
    for use_ in episode.segments.iter().flat_map(|s| &s.routines) {
        let outcome = Outcome::from_passed(use_.passed);
        // A routine merged away or demoted by a concurrent writer is skipped.
        if let Ok(stats) = record_outcome_mut(&mut next, &use_.id, outcome) {
            events.push(LearningEvent::Outcome { skill_id: use_.id.clone(), outcome, stats });
        }
    }
    for candidate in induce(episode, &next) {
        admit(&mut next, candidate, config, &mut events);
    }
    events.extend(merge_polarity_pairs_mut(&mut next, config));
    for (entry, stats) in scan_demotions_mut(&mut next, config, today) {
        events.push(LearningEvent::Demoted { entry, stats });
    }
    (next, events)
}
