//! Deterministic routine retrieval and rule matching.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::glob::url_matches;
use crate::keyword::KeywordSet;
use crate::skill::{Direction, Predicate, RoutineSkill, SkillLibrary, DEFAULT_PRIOR};

/// Default size of the recent-action window handed to [`match_rules`].
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retrieval {
    pub routine_id: String,
    /// Selected polarity variant; `None` for plain routines, or for a
    /// polarity routine when no variant keyword occurs in the subgoal.
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("subgoal selects both polarity variants of routine {routine_id}")]
    AmbiguousPolarity { routine_id: String },
}

/// True when at least one trigger phrase is fully contained in `subgoal`.
pub fn is_triggered(routine: &RoutineSkill, subgoal: &KeywordSet) -> bool {
    routine.trigger_phrases().iter().any(|phrase| phrase.is_subset(subgoal))
}

/// Retrieval with the default unseen-skill prior.
pub fn retrieve(
    library: &SkillLibrary,
    subgoal: &KeywordSet,
    url: &str,
) -> Result<Option<Retrieval>, RetrievalError> {
    retrieve_with_prior(library, subgoal, url, DEFAULT_PRIOR)
}

/// Highest-confidence routine whose trigger is contained in the subgoal and
/// whose `url_glob` matches `url`. Ties go to the lexicographically smallest id.
pub fn retrieve_with_prior(
    library: &SkillLibrary,
    subgoal: &KeywordSet,
    url: &str,
    prior: f64,
) -> Result<Option<Retrieval>, RetrievalError> {
    let mut best: Option<(&RoutineSkill, f64)> = None;
    // BTreeMap order: strictly-greater keeps the smallest id on ties.
    for routine in library.routines() {
        if !url_matches(&routine.url_glob, url) || !is_triggered(routine, subgoal) {
            continue;
        }
        let c = routine.confidence.confidence(prior);
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((routine, c));
        }
    }
    let Some((routine, _)) = best else {
        return Ok(None);
    };
    let direction = match &routine.polarity {
        None => None,
        Some(variants) => {
            let hits: Vec<Direction> = variants
                .iter()
                .filter(|v| !v.keyword_set().is_disjoint(subgoal))
                .map(|v| v.dir)
                .collect();
            match hits.as_slice() {
                [] => None,
                [dir] => Some(*dir),
                _ => return Err(RetrievalError::AmbiguousPolarity { routine_id: routine.id.clone() }),
            }
        }
    };
    Ok(Some(Retrieval { routine_id: routine.id.clone(), direction }))
}

/// One executed browser action as seen by the rule monitor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRecord {
    /// Normalized signature, see [`crate::ledger::normalize_action_signature`].
    pub signature: String,
    /// Hash of the page state after the action.
    pub state_hash: u64,
}

impl ActionRecord {
    pub fn new(signature: impl Into<String>, state_hash: u64) -> Self {
        ActionRecord { signature: signature.into(), state_hash }
    }
}

/// Environment monitor flags for the current page.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub url: String,
    pub stale_page: bool,
    pub selector_rejected: bool,
}

fn predicate_holds(predicate: &Predicate, window: &[ActionRecord], monitor: &MonitorReport) -> bool {
    match predicate {
        Predicate::StalePage => monitor.stale_page,
        Predicate::SelectorRejected => monitor.selector_rejected,
        Predicate::RepeatCount { signature, k } => {
            let k = *k as usize;
            if k == 0 || window.len() < k {
                return false;
            }
            let tail = &window[window.len() - k..];
            let first = &tail[0];
            let same = tail
                .iter()
                .all(|a| a.signature == first.signature && a.state_hash == first.state_hash);
            same && signature.as_ref().is_none_or(|s| *s == first.signature)
        }
    }
}

/// Ids of the rules whose predicate holds on `(window, monitor)` and whose
/// sites match the monitor URL, high priority first, then by id.
pub fn match_rules(library: &SkillLibrary, window: &[ActionRecord], monitor: &MonitorReport) -> Vec<String> {
    let mut fired: Vec<_> = library
        .rules()
        .filter(|r| r.sites.iter().any(|s| url_matches(s, &monitor.url)))
        .filter(|r| predicate_holds(&r.trigger, window, monitor))
        .map(|r| (r.priority, r.id.clone()))
        .collect();
    fired.sort();
    fired.into_iter().map(|(_, id)| id).collect()
}

/// The last `width` records of `history`.
pub fn window(history: &[ActionRecord], width: usize) -> &[ActionRecord] {
    &history[history.len().saturating_sub(width)..]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyword::{normalize_keywords, normalize_phrases};
    use crate::skill::{ConfidenceStats, PolarityVariant, Priority, RuleSkill};
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn sort_routine() -> RoutineSkill {
        RoutineSkill {
            id: "sort_by_attribute".into(),
            trigger_keywords: ["cheapest", "most expensive", "oldest", "newest", "sort by", "ranked by"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            url_glob: "/classifieds/*".into(),
            polarity: Some([
                PolarityVariant {
                    dir: Direction::Asc,
                    keywords: vec!["cheapest".into(), "oldest".into(), "smallest".into(), "lowest".into()],
                },
                PolarityVariant {
                    dir: Direction::Desc,
                    keywords: vec!["most expensive".into(), "newest".into(), "largest".into(), "highest".into()],
                },
            ]),
            confidence: ConfidenceStats::new(47, 3),
            body: "def run(attr: str, dir: str) -> None:\n    open_sort_menu()\n".into(),
            pre_conditions: vec![],
            post_conditions: vec![],
        }
    }

    fn plain(id: &str, phrases: &[&str], stats: (u64, u64)) -> RoutineSkill {
        RoutineSkill {
            id: id.into(),
            trigger_keywords: phrases.iter().map(|s| s.to_string()).collect(),
            url_glob: "*".into(),
            polarity: None,
            confidence: ConfidenceStats::new(stats.0, stats.1),
            body: "def run() -> None:\n    pass\n".into(),
            pre_conditions: vec![],
            post_conditions: vec![],
        }
    }

    fn repeat_rule(id: &str, priority: Priority) -> RuleSkill {
        RuleSkill {
            id: id.into(),
            trigger: Predicate::RepeatCount { signature: None, k: 2 },
            sites: vec!["*".into()],
            priority,
            body: "stop".into(),
        }
    }

    #[test]
    fn empty_library_matches_nothing() {
        let lib = SkillLibrary::new();
        assert_eq!(retrieve(&lib, &normalize_keywords("anything"), "/x").unwrap(), None);
    }

    #[test]
    fn polarity_desc_on_most_expensive() {
        let mut lib = SkillLibrary::new();
        lib.insert_routine(sort_routine()).unwrap();
        let got = retrieve(&lib, &normalize_keywords("most expensive motorcycle"), "/classifieds/x").unwrap();
        assert_eq!(got, Some(Retrieval { routine_id: "sort_by_attribute".into(), direction: Some(Direction::Desc) }));
        let got = retrieve(&lib, &normalize_keywords("cheapest guitar"), "/classifieds/x").unwrap();
        assert_eq!(got.unwrap().direction, Some(Direction::Asc));
        // URL glob excludes other sites.
        assert_eq!(retrieve(&lib, &normalize_keywords("cheapest guitar"), "/shopping/x").unwrap(), None);
    }

    #[test]
    fn both_variants_is_ambiguous() {
        let mut lib = SkillLibrary::new();
        lib.insert_routine(sort_routine()).unwrap();
        let err = retrieve(&lib, &normalize_keywords("cheapest then newest"), "/classifieds/a").unwrap_err();
        assert_eq!(err, RetrievalError::AmbiguousPolarity { routine_id: "sort_by_attribute".into() });
    }

    #[test]
    fn no_variant_hit_leaves_direction_open() {
        let mut lib = SkillLibrary::new();
        lib.insert_routine(sort_routine()).unwrap();
        let got = retrieve(&lib, &normalize_keywords("sort by mileage"), "/classifieds/a").unwrap().unwrap();
        assert_eq!(got.direction, None);
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let mut lib = SkillLibrary::new();
        lib.insert_routine(plain("b_route", &["open menu"], (2, 2))).unwrap();
        lib.insert_routine(plain("a_route", &["menu"], (1, 1))).unwrap();
        lib.insert_routine(plain("c_route", &["open"], (1, 3))).unwrap();
        let got = retrieve(&lib, &normalize_keywords("open the menu"), "/").unwrap().unwrap();
        assert_eq!(got.routine_id, "a_route");
    }

    #[test]
    fn unseen_routine_uses_prior() {
        let mut lib = SkillLibrary::new();
        lib.insert_routine(plain("seen", &["menu"], (1, 1))).unwrap();
        lib.insert_routine(plain("unseen", &["menu"], (0, 0))).unwrap();
        let kw = normalize_keywords("menu");
        assert_eq!(retrieve_with_prior(&lib, &kw, "/", 0.9).unwrap().unwrap().routine_id, "unseen");
        assert_eq!(retrieve_with_prior(&lib, &kw, "/", 0.1).unwrap().unwrap().routine_id, "seen");
    }

    #[test]
    fn repeat_rule_fires_on_two_identical_clicks() {
        let mut lib = SkillLibrary::new();
        lib.insert_rule(repeat_rule("repeat_click_same_element", Priority::High)).unwrap();
        let monitor = MonitorReport { url: "/classifieds/x".into(), ..Default::default() };
        let w = [ActionRecord::new("click#7", 11), ActionRecord::new("click#7", 11)];
        assert_eq!(match_rules(&lib, &w, &monitor), vec!["repeat_click_same_element".to_string()]);
        assert!(match_rules(&lib, &[], &monitor).is_empty());
        let changed = [ActionRecord::new("click#7", 11), ActionRecord::new("click#7", 12)];
        assert!(match_rules(&lib, &changed, &monitor).is_empty());
    }

    #[test]
    fn rules_sorted_by_priority_then_id() {
        let mut lib = SkillLibrary::new();
        lib.insert_rule(repeat_rule("a_normal", Priority::Normal)).unwrap();
        lib.insert_rule(repeat_rule("z_high", Priority::High)).unwrap();
        lib.insert_rule(repeat_rule("m_normal", Priority::Normal)).unwrap();
        let w = [ActionRecord::new("click#1", 0), ActionRecord::new("click#1", 0)];
        let fired = match_rules(&lib, &w, &MonitorReport::default());
        // Oracle: sort (priority, id) pairs.
        let mut expect = [(Priority::Normal, "a_normal"), (Priority::High, "z_high"), (Priority::Normal, "m_normal")];
        expect.sort();
        assert_eq!(fired, expect.iter().map(|(_, id)| id.to_string()).collect::<Vec<_>>());
        assert_eq!(fired[0], "z_high");
    }

    #[test]
    fn monitor_flag_predicates_and_sites() {
        let mut lib = SkillLibrary::new();
        lib.insert_rule(RuleSkill {
            id: "stale".into(),
            trigger: Predicate::StalePage,
            sites: vec!["/classifieds/*".into()],
            priority: Priority::Normal,
            body: String::new(),
        })
        .unwrap();
        lib.insert_rule(RuleSkill {
            id: "dropdown_selector_rejected".into(),
            trigger: Predicate::SelectorRejected,
            sites: vec!["*".into()],
            priority: Priority::Low,
            body: String::new(),
        })
        .unwrap();
        let mut m = MonitorReport { url: "/classifieds/1".into(), stale_page: true, selector_rejected: true };
        assert_eq!(match_rules(&lib, &[], &m), vec!["stale".to_string(), "dropdown_selector_rejected".to_string()]);
        m.url = "/shopping/1".into();
        assert_eq!(match_rules(&lib, &[], &m), vec!["dropdown_selector_rejected".to_string()]);
    }

    #[test]
    fn literal_signature_predicate() {
        let mut lib = SkillLibrary::new();
        lib.insert_rule(RuleSkill {
            id: "enter_loop".into(),
            trigger: Predicate::RepeatCount { signature: Some("press#enter".into()), k: 3 },
            sites: vec!["*".into()],
            priority: Priority::Normal,
            body: String::new(),
        })
        .unwrap();
        let m = MonitorReport::default();
        let w = vec![ActionRecord::new("press#enter", 1); 3];
        assert_eq!(match_rules(&lib, &w, &m).len(), 1);
        let w = vec![ActionRecord::new("click#1", 1); 3];
        assert!(match_rules(&lib, &w, &m).is_empty());
        assert!(match_rules(&lib, window(&w, 2), &m).is_empty());
    }

    // Exhaustive scan oracle: enumerate every routine, keep the eligible ones,
    // compare confidences by cross-multiplication (exact) and ids.
    fn oracle(routines: &[RoutineSkill], subgoal: &KeywordSet) -> Option<String> {
        let eligible: Vec<&RoutineSkill> = routines
            .iter()
            .filter(|r| r.trigger_keywords.iter().any(|p| {
                let s = normalize_phrases(core::slice::from_ref(p));
                !s.is_empty() && s.iter().all(|k| subgoal.contains(k))
            }))
            .collect();
        let conf_ge = |a: &RoutineSkill, b: &RoutineSkill| -> core::cmp::Ordering {
            let (ap, an) = (a.confidence.n_pass as u128, a.confidence.invocations() as u128);
            let (bp, bn) = (b.confidence.n_pass as u128, b.confidence.invocations() as u128);
            (ap * bn).cmp(&(bp * an))
        };
        let mut best: Option<&RoutineSkill> = None;
        for r in eligible {
            best = match best {
                None => Some(r),
                Some(b) => match conf_ge(r, b) {
                    core::cmp::Ordering::Greater => Some(r),
                    core::cmp::Ordering::Equal if r.id < b.id => Some(r),
                    _ => Some(b),
                },
            };
        }
        best.map(|r| r.id.clone())
    }

    const VOCAB: [&str; 8] = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"];

    fn arb_routine() -> impl Strategy<Value = RoutineSkill> {
        (
            "[a-e]{1,3}",
            prop::collection::vec(prop::collection::vec(0usize..8, 1..3), 1..3),
            1u64..6,
            0u64..6,
        )
            .prop_map(|(id, phrases, p, f)| RoutineSkill {
                id,
                trigger_keywords: phrases
                    .iter()
                    .map(|ws| ws.iter().map(|i| VOCAB[*i]).collect::<Vec<_>>().join(" "))
                    .collect(),
                url_glob: "*".into(),
                polarity: None,
                confidence: ConfidenceStats::new(p, f),
                body: String::new(),
                pre_conditions: vec![],
                post_conditions: vec![],
            })
    }

    proptest! {
        #[test]
        fn agrees_with_exhaustive_scan(
            routines in prop::collection::vec(arb_routine(), 0..50),
            goal in prop::collection::btree_set(0usize..8, 0..8),
        ) {
            let mut lib = SkillLibrary::new();
            let mut kept = Vec::new();
            for r in routines {
                if lib.insert_routine(r.clone()).is_ok() {
                    kept.push(r);
                }
            }
            let subgoal = normalize_phrases(&goal.iter().map(|i| VOCAB[*i]).collect::<Vec<_>>());
            let got = retrieve(&lib, &subgoal, "/any").unwrap().map(|r| r.routine_id);
            prop_assert_eq!(got.clone(), oracle(&kept, &subgoal));
            // Determinism.
            prop_assert_eq!(got, retrieve(&lib, &subgoal, "/any").unwrap().map(|r| r.routine_id));
        }

        #[test]
        fn containment_is_monotone(
            routines in prop::collection::vec(arb_routine(), 0..30),
            goal in prop::collection::btree_set(0usize..8, 0..8),
            extra in prop::collection::btree_set(0usize..8, 0..4),
        ) {
            let small = normalize_phrases(&goal.iter().map(|i| VOCAB[*i]).collect::<Vec<_>>());
            let mut big = small.clone();
            big.extend(normalize_phrases(&extra.iter().map(|i| VOCAB[*i]).collect::<Vec<_>>()));
            for r in &routines {
                if is_triggered(r, &small) {
                    prop_assert!(is_triggered(r, &big));
                }
            }
        }
    }
}
