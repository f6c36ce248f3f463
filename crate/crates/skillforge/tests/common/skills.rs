use proptest::prelude::*;
use skillforge_core::{ConfidenceStats, Date, DemotionEntry, Direction, PolarityVariant, Predicate, Priority, RoutineSkill, RuleSkill};

pub fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,7}"
}

pub fn phrase() -> impl Strategy<Value = String> {
    prop_oneof![
        proptest::collection::vec(word(), 1..4).prop_map(|w| w.join(" ")),
        "[ -~]{0,6}[a-z][ -~]{0,10}",
        "\\PC{0,4}[a-z]\\PC{0,6}",
    ]
}

pub fn free_text() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z_]{1,16}", "[ -~]{0,30}", "\\PC{0,24}"]
}

pub fn id() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z][a-z0-9_]{0,20}",
        Just("true".to_string()),
        Just("null".to_string()),
        Just("123".to_string()),
        "[a-z][ -~]{0,12}[a-z]",
    ]
}

/// Text that survives the body normalization: lines without trailing
/// whitespace, at least one nonblank line, a single final newline.
pub fn body(routine: bool) -> impl Strategy<Value = String> {
    proptest::collection::vec("[ -~]{0,40}", 1..6).prop_filter_map("blank body", move |lines| {
        let mut lines: Vec<String> = lines.into_iter().map(|l| l.trim_end().to_string()).collect();
        if routine {
            lines.retain(|l| !l.starts_with("pre:") && !l.starts_with("post:"));
        }
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        if lines.is_empty() || lines.iter().all(|l| l.trim().is_empty()) {
            return None;
        }
        Some(format!("{}\n", lines.join("\n")))
    })
}

pub fn predicate() -> impl Strategy<Value = Predicate> {
    prop_oneof![
        Just(Predicate::StalePage),
        Just(Predicate::SelectorRejected),
        (1u32..10).prop_map(|k| Predicate::RepeatCount { signature: None, k }),
        ("(click|type|select_option)\\[[a-z_]{1,10}\\]", 1u32..10)
            .prop_map(|(s, k)| Predicate::RepeatCount { signature: Some(s), k }),
    ]
}

pub fn priority() -> impl Strategy<Value = Priority> {
    prop_oneof![Just(Priority::High), Just(Priority::Normal), Just(Priority::Low)]
}

pub fn rule() -> impl Strategy<Value = RuleSkill> {
    (id(), predicate(), proptest::collection::vec(free_text(), 0..4), priority(), body(false)).prop_map(
        |(id, trigger, sites, priority, body)| RuleSkill { id, trigger, sites, priority, body },
    )
}

pub fn condition() -> impl Strategy<Value = String> {
    ("[a-z_]{1,12}", proptest::option::of(proptest::collection::vec("[a-z]{1,5}", 1..3)))
        .prop_map(|(name, args)| match args {
            Some(a) => format!("{name}({})", a.join(", ")),
            None => name,
        })
}

pub fn polarity() -> impl Strategy<Value = Option<[PolarityVariant; 2]>> {
    proptest::option::of((
        proptest::collection::vec("lo[a-z0-9]{0,6}", 1..4),
        proptest::collection::vec("hi[a-z0-9]{0,6}", 1..4),
    ))
    .prop_map(|p| {
        p.map(|(asc, desc)| {
            [PolarityVariant { dir: Direction::Asc, keywords: asc }, PolarityVariant { dir: Direction::Desc, keywords: desc }]
        })
    })
}

pub fn routine() -> impl Strategy<Value = RoutineSkill> {
    (
        id(),
        proptest::collection::vec(phrase(), 1..8),
        free_text(),
        polarity(),
        (0u64..u32::MAX as u64, 0u64..1000),
        body(true),
        proptest::collection::vec(condition(), 0..3),
        proptest::collection::vec(condition(), 0..3),
    )
        .prop_map(|(id, trigger_keywords, url_glob, polarity, (p, f), body, pre_conditions, post_conditions)| {
            RoutineSkill {
                id,
                trigger_keywords,
                url_glob,
                polarity,
                confidence: ConfidenceStats::new(p, f),
                body,
                pre_conditions,
                post_conditions,
            }
        })
        .prop_filter("valid routine", |r| r.validate().is_ok())
}

pub fn entry() -> impl Strategy<Value = DemotionEntry> {
    (id(), 2000i32..2100, 1u32..13, 1u32..29, free_text(), proptest::collection::vec(phrase(), 1..5)).prop_map(
        |(id, y, m, d, reason, keywords)| DemotionEntry {
            id,
            demoted_at: Date::from_ymd(y, m, d).unwrap(),
            reason,
            keywords,
        },
    )
}

#[derive(Debug, Clone)]
pub enum AnySkill {
    Rule(RuleSkill),
    Routine(RoutineSkill),
    Demoted(Vec<DemotionEntry>),
}

pub fn any_skill() -> impl Strategy<Value = AnySkill> {
    prop_oneof![
        rule().prop_map(AnySkill::Rule),
        routine().prop_map(AnySkill::Routine),
        proptest::collection::vec(entry(), 0..4).prop_map(AnySkill::Demoted),
    ]
}

/// Serialize, parse back and canonicalize; `Err` describes the first
/// mismatch.
pub fn check_round_trip(skill: &AnySkill) -> Result<(), String> {
    use skillforge::format::*;
    let fail = |what: &str, text: &str| Err(format!("{what} mismatch for:\n{text}"));
    match skill {
        AnySkill::Rule(r) => {
            let text = serialize_rule(r);
            if parse_rule(&text).as_ref() != Ok(r) {
                return fail("rule", &text);
            }
            if canonicalize(SkillFileKind::Rule, &text).as_deref() != Ok(text.as_str()) {
                return fail("canonical rule", &text);
            }
        }
        AnySkill::Routine(r) => {
            let text = serialize_routine(r);
            if parse_routine(&text).as_ref() != Ok(r) {
                return fail("routine", &text);
            }
            if canonicalize(SkillFileKind::Routine, &text).as_deref() != Ok(text.as_str()) {
                return fail("canonical routine", &text);
            }
        }
        AnySkill::Demoted(entries) => {
            let text = serialize_demoted_log(entries);
            if parse_demoted_log(&text).as_ref() != Ok(entries) {
                return fail("demotion log", &text);
            }
        }
    }
    Ok(())
}
