//! Skill-library lifecycle engine.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure logic: the
//! skill model and deterministic retrieval, the learning module that admits,
//! merges and demotes routines, the trajectory-ledger row schema and per-task
//! views, every metric computed from a ledger, and a seeded mock-agent
//! simulator. File formats, IO and the command line live in the `skillforge`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod date;
pub mod glob;
pub mod keyword;
pub mod learning;
pub mod ledger;
pub mod metrics;
pub mod retrieval;
mod rng;
pub mod sim;
pub mod skill;

pub use date::Date;
pub use keyword::{normalize_keywords, Keyword, KeywordSet, Normalizer};
pub use learning::{
    check_blacklist, induce, jaccard_body, library_update, merge_polarity_pairs, record_outcome,
    scan_demotions, BlacklistCheck, Episode, LearningConfig, LearningError, LearningEvent,
    LibraryStats, Outcome, PrimitiveAction, Rejection, RoutineCandidate, RoutineUse, SubgoalSegment,
};
pub use ledger::{
    normalize_action_signature, read_tasks, EventType, LedgerError, LedgerEvent,
    TaskTrajectoryView, Verdict,
};
pub use retrieval::{match_rules, retrieve, ActionRecord, MonitorReport, Retrieval, RetrievalError};
pub use skill::{
    ConfidenceStats, DemotionEntry, Direction, LibraryViolation, PolarityVariant, Predicate, Priority,
    RoutineSkill, RuleSkill, SkillError, SkillLibrary,
};
