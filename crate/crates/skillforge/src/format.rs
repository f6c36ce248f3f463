//! Markdown-with-front-matter skill files and the demotion log.
//!
//! Parsing goes through `serde_yaml`; serialization is hand-written so that
//! key order, quoting and list wrapping are fixed and a parsed file can be
//! written back byte for byte.

use serde_yaml::{Mapping, Value};
use skillforge_core::{ConfidenceStats, DemotionEntry, Direction, PolarityVariant, Predicate, Priority, RoutineSkill, RuleSkill};
use thiserror::Error;

/// Flow lists wrap before a line would exceed this many characters.
pub const WRAP_WIDTH: usize = 72;

const DELIM: &str = "---";
const DEMOTED_HEADER: &str = "---\n# demoted.md\n---\n";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("malformed front matter: {0}")]
    MalformedFrontMatter(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown trigger predicate: {0}")]
    UnknownPredicate(String),
    #[error("bad polarity block: {0}")]
    BadPolarity(String),
    #[error("negative count in `{0}`")]
    NegativeCount(String),
    #[error("invalid value for `{field}`: {message}")]
    InvalidValue { field: String, message: String },
    #[error("malformed demotion entry {index}: {message}")]
    MalformedEntry { index: usize, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> FormatError {
    FormatError::InvalidValue { field: field.into(), message: message.into() }
}

/// Splits `text` into (front matter, body) at the first two `---` lines.
pub fn split_front_matter(text: &str) -> Result<(&str, &str), FormatError> {
    let is_delim = |line: &str| line.trim_end_matches(['\r', '\n']) == DELIM;
    let mut lines = text.split_inclusive('\n');
    let first = lines.next().ok_or_else(|| FormatError::MalformedFrontMatter("empty file".into()))?;
    if !is_delim(first) {
        return Err(FormatError::MalformedFrontMatter("file does not start with a `---` line".into()));
    }
    let start = first.len();
    let mut offset = start;
    for line in lines {
        if is_delim(line) {
            return Ok((&text[start..offset], &text[offset + line.len()..]));
        }
        offset += line.len();
    }
    Err(FormatError::MalformedFrontMatter("no closing `---` line".into()))
}

fn front_mapping(front: &str) -> Result<Mapping, FormatError> {
    match serde_yaml::from_str::<Value>(front) {
        Ok(Value::Mapping(m)) => Ok(m),
        Ok(Value::Null) => Ok(Mapping::new()),
        Ok(_) => Err(FormatError::MalformedFrontMatter("front matter is not a mapping".into())),
        Err(e) => Err(FormatError::MalformedFrontMatter(e.to_string())),
    }
}

fn get<'a>(m: &'a Mapping, key: &str) -> Option<&'a Value> {
    m.get(key)
}

fn reject_unknown(m: &Mapping, allowed: &[&str], ctx: &str) -> Result<(), FormatError> {
    for k in m.keys() {
        match k.as_str() {
            Some(k) if allowed.contains(&k) => {}
            _ => return Err(FormatError::MalformedFrontMatter(format!("unexpected key {k:?} in {ctx}"))),
        }
    }
    Ok(())
}

fn scalar_string(v: &Value, field: &str) -> Result<String, FormatError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(invalid(field, "expected a scalar")),
    }
}

fn required_string(m: &Mapping, key: &str, field: &str) -> Result<String, FormatError> {
    let v = get(m, key).ok_or_else(|| FormatError::MissingField(field.into()))?;
    let s = scalar_string(v, field)?;
    if s.trim().is_empty() {
        return Err(FormatError::MissingField(field.into()));
    }
    Ok(s)
}

fn string_list(v: &Value, field: &str) -> Result<Vec<String>, FormatError> {
    let Value::Sequence(items) = v else {
        return Err(invalid(field, "expected a list"));
    };
    items
        .iter()
        .map(|item| match item {
            Value::String(s) => Ok(s.clone()),
            _ => Err(invalid(field, "list items must be strings")),
        })
        .collect()
}

fn count(m: &Mapping, key: &str) -> Result<u64, FormatError> {
    let field = format!("confidence.{key}");
    let v = get(m, key).ok_or_else(|| FormatError::MissingField(field.clone()))?;
    match v {
        Value::Number(n) if n.as_u64().is_some() => Ok(n.as_u64().unwrap_or_default()),
        Value::Number(n) if n.as_i64().is_some_and(|i| i < 0) => Err(FormatError::NegativeCount(field)),
        _ => Err(invalid(&field, "expected a nonnegative integer")),
    }
}

fn require_body(body: &str) -> Result<String, FormatError> {
    let trimmed = body.trim_end();
    if trimmed.trim().is_empty() {
        return Err(FormatError::MissingField("body".into()));
    }
    Ok(format!("{trimmed}\n"))
}

pub fn parse_rule(text: &str) -> Result<RuleSkill, FormatError> {
    let (front, body) = split_front_matter(text)?;
    let m = front_mapping(front)?;
    reject_unknown(&m, &["id", "trigger", "priority"], "rule")?;
    let id = required_string(&m, "id", "id")?;
    let trigger = match get(&m, "trigger") {
        Some(Value::Mapping(t)) => t,
        Some(_) => return Err(invalid("trigger", "expected a mapping")),
        None => return Err(FormatError::MissingField("trigger".into())),
    };
    reject_unknown(trigger, &["pattern", "sites"], "trigger")?;
    let pattern = required_string(trigger, "pattern", "trigger.pattern")?;
    let predicate: Predicate = pattern.parse().map_err(|_| FormatError::UnknownPredicate(pattern.clone()))?;
    let sites = match get(trigger, "sites") {
        Some(v) => string_list(v, "trigger.sites")?,
        None => vec!["*".to_string()],
    };
    let priority_text = required_string(&m, "priority", "priority")?;
    let priority: Priority = priority_text.parse().map_err(|_| invalid("priority", priority_text.clone()))?;
    Ok(RuleSkill { id, trigger: predicate, sites, priority, body: require_body(body)? })
}

fn parse_variant(v: &Value) -> Result<PolarityVariant, FormatError> {
    let Value::Mapping(m) = v else {
        return Err(FormatError::BadPolarity("variant is not a mapping".into()));
    };
    reject_unknown(m, &["dir", "keywords"], "polarity_pair")?;
    let dir_text = required_string(m, "dir", "polarity_pair.dir")?;
    let dir: Direction = dir_text.parse().map_err(|_| FormatError::BadPolarity(format!("unknown direction {dir_text:?}")))?;
    let keywords = match get(m, "keywords") {
        Some(v) => string_list(v, "polarity_pair.keywords")?,
        None => return Err(FormatError::MissingField("polarity_pair.keywords".into())),
    };
    Ok(PolarityVariant { dir, keywords })
}

/// Splits a `[a, b(c, d)]` condition list on top-level commas.
fn parse_conditions(text: &str, field: &str) -> Result<Vec<String>, FormatError> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| invalid(field, "expected `[...]`"))?;
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in inner.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(inner[start..i].trim().to_string());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(invalid(field, "unbalanced brackets"));
    }
    let last = inner[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last.to_string());
    }
    if out.iter().any(String::is_empty) {
        return Err(invalid(field, "empty condition"));
    }
    Ok(out)
}

/// Separates trailing `pre:`/`post:` lines from the program text.
fn split_conditions(body: &str) -> Result<(String, Vec<String>, Vec<String>), FormatError> {
    let mut lines: Vec<&str> = body.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let (mut pre, mut post) = (None, None);
    while let Some(last) = lines.last() {
        if let Some(rest) = last.strip_prefix("pre:") {
            if pre.is_some() {
                return Err(invalid("pre", "repeated"));
            }
            pre = Some(parse_conditions(rest, "pre")?);
        } else if let Some(rest) = last.strip_prefix("post:") {
            if post.is_some() {
                return Err(invalid("post", "repeated"));
            }
            post = Some(parse_conditions(rest, "post")?);
        } else {
            break;
        }
        lines.pop();
    }
    let program = require_body(&lines.join("\n"))?;
    Ok((program, pre.unwrap_or_default(), post.unwrap_or_default()))
}

pub fn parse_routine(text: &str) -> Result<RoutineSkill, FormatError> {
    let (front, body) = split_front_matter(text)?;
    let m = front_mapping(front)?;
    reject_unknown(&m, &["id", "trigger", "polarity_pair", "confidence"], "routine")?;
    let id = required_string(&m, "id", "id")?;
    let trigger = match get(&m, "trigger") {
        Some(Value::Mapping(t)) => t,
        Some(_) => return Err(invalid("trigger", "expected a mapping")),
        None => return Err(FormatError::MissingField("trigger".into())),
    };
    reject_unknown(trigger, &["keywords", "url_glob"], "trigger")?;
    let trigger_keywords = match get(trigger, "keywords") {
        Some(v) => string_list(v, "trigger.keywords")?,
        None => return Err(FormatError::MissingField("trigger.keywords".into())),
    };
    let url_glob = match get(trigger, "url_glob") {
        Some(v) => scalar_string(v, "trigger.url_glob")?,
        None => "*".to_string(),
    };
    let polarity = match get(&m, "polarity_pair") {
        None => None,
        Some(Value::Sequence(items)) => {
            let variants = items.iter().map(parse_variant).collect::<Result<Vec<_>, _>>()?;
            let pair: [PolarityVariant; 2] = variants
                .try_into()
                .map_err(|v: Vec<PolarityVariant>| FormatError::BadPolarity(format!("expected 2 variants, found {}", v.len())))?;
            Some(pair)
        }
        Some(_) => return Err(FormatError::BadPolarity("polarity_pair is not a list".into())),
    };
    let conf = match get(&m, "confidence") {
        Some(Value::Mapping(c)) => c,
        Some(_) => return Err(invalid("confidence", "expected a mapping")),
        None => return Err(FormatError::MissingField("confidence".into())),
    };
    reject_unknown(conf, &["n_pass", "n_fail"], "confidence")?;
    let confidence = ConfidenceStats::new(count(conf, "n_pass")?, count(conf, "n_fail")?);
    let (program, pre_conditions, post_conditions) = split_conditions(body)?;
    let routine = RoutineSkill {
        id,
        trigger_keywords,
        url_glob,
        polarity,
        confidence,
        body: program,
        pre_conditions,
        post_conditions,
    };
    routine.validate().map_err(|e| match e {
        skillforge_core::SkillError::BadPolarity(m) => FormatError::BadPolarity(m),
        skillforge_core::SkillError::EmptyTrigger(_) => FormatError::MissingField("trigger.keywords".into()),
        other => invalid("routine", other.to_string()),
    })?;
    Ok(routine)
}

/// Reads the append-only demotion log. The front-matter header is optional.
pub fn parse_demoted_log(text: &str) -> Result<Vec<DemotionEntry>, FormatError> {
    let body = match split_front_matter(text) {
        Ok((_, body)) => body,
        Err(_) if !text.trim_start().starts_with(DELIM) => text,
        Err(e) => return Err(e),
    };
    let value: Value = serde_yaml::from_str(body).map_err(|e| FormatError::MalformedEntry { index: 0, message: e.to_string() })?;
    let items = match value {
        Value::Null => return Ok(Vec::new()),
        Value::Sequence(items) => items,
        _ => return Err(FormatError::MalformedEntry { index: 0, message: "log body is not a list".into() }),
    };
    items.iter().enumerate().map(|(i, v)| parse_entry(i, v)).collect()
}

fn parse_entry(index: usize, v: &Value) -> Result<DemotionEntry, FormatError> {
    let bad = |message: String| FormatError::MalformedEntry { index, message };
    let Value::Mapping(m) = v else {
        return Err(bad("entry is not a mapping".into()));
    };
    let field = |key: &str| -> Result<String, FormatError> {
        match get(m, key) {
            Some(v) => scalar_string(v, key).map_err(|e| bad(e.to_string())),
            None => Err(bad(format!("missing `{key}`"))),
        }
    };
    for k in m.keys() {
        if !matches!(k.as_str(), Some("id" | "demoted_at" | "reason" | "keywords")) {
            return Err(bad(format!("unexpected key {k:?}")));
        }
    }
    let id = field("id")?;
    if id.trim().is_empty() {
        return Err(bad("empty `id`".into()));
    }
    let demoted_at = field("demoted_at")?.parse().map_err(|e| bad(format!("{e}")))?;
    let reason = field("reason")?;
    let keywords = match get(m, "keywords") {
        Some(v) => string_list(v, "keywords").map_err(|e| bad(e.to_string()))?,
        None => return Err(bad("missing `keywords`".into())),
    };
    if keywords.is_empty() {
        return Err(bad("empty `keywords`".into()));
    }
    Ok(DemotionEntry { id, demoted_at, reason, keywords })
}

/// YAML double-quoted scalar with every non-printable character escaped.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c < ' ' || ('\u{7f}'..='\u{9f}').contains(&c) || matches!(c, '\u{feff}' | '\u{fffe}' | '\u{ffff}') => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Plain when the text reads back as the same string, quoted otherwise.
fn scalar(s: &str) -> String {
    let safe = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/'))
        && !s.starts_with(['-', '.'])
        && matches!(serde_yaml::from_str::<Value>(s), Ok(Value::String(ref back)) if back == s);
    if safe {
        s.to_string()
    } else {
        quote(s)
    }
}

/// `prefix[...]` with items quoted and continuation lines aligned after `[`.
pub fn flow_list(prefix: &str, items: &[String]) -> String {
    if items.is_empty() {
        return format!("{prefix}[]\n");
    }
    let indent = " ".repeat(prefix.chars().count() + 1);
    let mut out = String::new();
    let mut line = format!("{prefix}[");
    let mut line_has_item = false;
    for (i, item) in items.iter().enumerate() {
        let piece = format!("{}{}", quote(item), if i + 1 == items.len() { "]" } else { "," });
        if !line_has_item {
            line.push_str(&piece);
        } else if line.chars().count() + 1 + piece.chars().count() > WRAP_WIDTH {
            out.push_str(&line);
            out.push('\n');
            line = format!("{indent}{piece}");
        } else {
            line.push(' ');
            line.push_str(&piece);
        }
        line_has_item = true;
    }
    out.push_str(&line);
    out.push('\n');
    out
}

fn body_text(body: &str) -> String {
    let trimmed = body.trim_end();
    format!("{trimmed}\n")
}

pub fn serialize_rule(rule: &RuleSkill) -> String {
    let mut out = String::from("---\n");
    out.push_str(&format!("id: {}\n", scalar(&rule.id)));
    out.push_str("trigger:\n");
    let pattern = rule.trigger.to_string();
    out.push_str(&format!("  pattern: {}\n", scalar_pattern(&pattern)));
    out.push_str(&flow_list("  sites: ", &rule.sites));
    out.push_str(&format!("priority: {}\n", rule.priority));
    out.push_str("---\n");
    out.push_str(&body_text(&rule.body));
    out
}

/// Predicate text is left plain unless YAML would read it differently.
fn scalar_pattern(p: &str) -> String {
    match serde_yaml::from_str::<Value>(p) {
        Ok(Value::String(back)) if back == p && !p.contains('"') => p.to_string(),
        _ => quote(p),
    }
}

pub fn serialize_routine(routine: &RoutineSkill) -> String {
    let mut out = String::from("---\n");
    out.push_str(&format!("id: {}\n", scalar(&routine.id)));
    out.push_str("trigger:\n");
    out.push_str(&flow_list("  keywords: ", &routine.trigger_keywords));
    out.push_str(&format!("  url_glob: {}\n", quote(&routine.url_glob)));
    if let Some(variants) = &routine.polarity {
        out.push_str("polarity_pair:\n");
        for v in variants {
            out.push_str(&format!("  - dir: {}\n", v.dir));
            out.push_str(&flow_list("    keywords: ", &v.keywords));
        }
    }
    out.push_str("confidence:\n");
    out.push_str(&format!("  n_pass: {}\n", routine.confidence.n_pass));
    out.push_str(&format!("  n_fail: {}\n", routine.confidence.n_fail));
    out.push_str("---\n");
    out.push_str(&body_text(&routine.body));
    if !routine.pre_conditions.is_empty() || !routine.post_conditions.is_empty() {
        out.push('\n');
        if !routine.pre_conditions.is_empty() {
            out.push_str(&format!("pre:  [{}]\n", routine.pre_conditions.join(", ")));
        }
        if !routine.post_conditions.is_empty() {
            out.push_str(&format!("post: [{}]\n", routine.post_conditions.join(", ")));
        }
    }
    out
}

/// One log record, as appended to the end of the file.
pub fn serialize_demotion_entry(entry: &DemotionEntry) -> String {
    let mut out = format!("- id: {}\n", scalar(&entry.id));
    out.push_str(&format!("  demoted_at: {}\n", entry.demoted_at));
    out.push_str(&format!("  reason: {}\n", quote(&entry.reason)));
    out.push_str(&flow_list("  keywords: ", &entry.keywords));
    out
}

pub fn serialize_demoted_log(entries: &[DemotionEntry]) -> String {
    let mut out = String::from(DEMOTED_HEADER);
    for e in entries {
        out.push_str(&serialize_demotion_entry(e));
    }
    out
}

/// Which kind of skill file a path holds, by its parent directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkillFileKind {
    Rule,
    Routine,
    Demoted,
}

/// Canonical form of a file of the given kind.
pub fn canonicalize(kind: SkillFileKind, text: &str) -> Result<String, FormatError> {
    Ok(match kind {
        SkillFileKind::Rule => serialize_rule(&parse_rule(text)?),
        SkillFileKind::Routine => serialize_routine(&parse_routine(text)?),
        SkillFileKind::Demoted => serialize_demoted_log(&parse_demoted_log(text)?),
    })
}
