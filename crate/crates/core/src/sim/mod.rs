//! Seeded mock agent running the plan, act, reflect, learn loop over a
//! synthetic task stream.
//!
//! No model or browser is involved: each subgoal is a template with a fixed
//! primitive-action script, a fallback success probability for the actor path
//! and a ground-truth pass probability for routine invocations. The agent
//! writes real ledger rows and drives the real learning module, so library
//! dynamics and every ledger metric can be tested end to end.

mod engine;

pub use engine::{learn, run_stream, run_tasks, Agent, StreamOutput, TaskRecord, TaskRun};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::learning::{LearningConfig, PrimitiveAction};
use crate::metrics::CostModel;
use crate::rng::{bernoulli, bounded, unit};
use crate::skill::{Predicate, Priority, RuleSkill, SkillLibrary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    ConfigInvalid(String),
}

/// One recurring subgoal shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgoalTemplate {
    pub id: String,
    pub keywords: Vec<String>,
    /// Primitive actions the actor needs for this subgoal.
    pub actions: Vec<PrimitiveAction>,
    /// Segments of this template may be distilled into a routine.
    pub coverable: bool,
    /// Actor-path success probability per attempt.
    pub fallback_success: f64,
    /// Pass probability of a routine invocation on this subgoal.
    pub reliability: f64,
    /// The actor may get stuck clicking one element.
    pub loopy: bool,
    pub loop_probability: f64,
}

impl Default for SubgoalTemplate {
    fn default() -> Self {
        SubgoalTemplate {
            id: String::new(),
            keywords: Vec::new(),
            actions: Vec::new(),
            coverable: true,
            fallback_success: 0.9,
            reliability: 0.95,
            loopy: false,
            loop_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainConfig {
    pub name: String,
    pub weight: f64,
    pub url_prefix: String,
    /// Nouns mixed into subgoal keywords.
    pub objects: Vec<String>,
    pub templates: Vec<SubgoalTemplate>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { name: String::new(), weight: 1.0, url_prefix: "/".into(), objects: Vec::new(), templates: Vec::new() }
    }
}

/// A template whose routine turns unreliable from task `start_task` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrittleInjection {
    pub template: String,
    pub reliability: f64,
    pub start_task: usize,
}

/// Prompt layout: a stable prefix (instructions plus skill index) followed by
/// volatile observation and history tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CacheModel {
    pub stable_prefix_tokens: u64,
    pub volatile_tokens_per_call: u64,
    /// Stable-prefix tokens added per indexed skill.
    pub per_skill_prefix_growth: u64,
    pub reasoning_tokens_per_call: u64,
    /// The prefix of the seed library is already cached at the first call.
    pub warm_start: bool,
}

impl Default for CacheModel {
    fn default() -> Self {
        CacheModel {
            stable_prefix_tokens: 6000,
            volatile_tokens_per_call: 2500,
            per_skill_prefix_growth: 150,
            reasoning_tokens_per_call: 0,
            warm_start: true,
        }
    }
}

/// Wall time charged per ledger row, by event type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WallTimes {
    pub planner: u64,
    pub actor: u64,
    pub reflector: u64,
    pub action: u64,
    pub routine: u64,
    pub eval: u64,
}

impl Default for WallTimes {
    fn default() -> Self {
        WallTimes { planner: 4000, actor: 2500, reflector: 3000, action: 800, routine: 1500, eval: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub n_tasks: usize,
    pub run_id: String,
    pub method: String,
    pub domains: Vec<DomainConfig>,
    pub min_subgoals: usize,
    pub max_subgoals: usize,
    pub max_steps: usize,
    pub k_r: u64,
    /// Actor attempts per subgoal before the task fails.
    pub max_attempts: usize,
    /// Ledger rows per routine invocation.
    pub routine_step_cost: usize,
    /// Primitive actions a routine saves relative to the template.
    pub routine_action_savings: usize,
    pub brittle_injections: Vec<BrittleInjection>,
    pub infeasible_rate: f64,
    pub token_model: CostModel,
    pub cache_model: CacheModel,
    pub learning: LearningConfig,
    pub learning_enabled: bool,
    pub rules_enabled: bool,
    pub planner_model: String,
    pub actor_model: String,
    pub start_date: Date,
    pub tasks_per_day: usize,
    pub wall_ms: WallTimes,
}

fn act(name: &str, target: &str, text: &str) -> PrimitiveAction {
    PrimitiveAction::new(name, target, text)
}

fn template(id: &str, keywords: &[&str], actions: Vec<PrimitiveAction>) -> SubgoalTemplate {
    SubgoalTemplate {
        id: id.into(),
        keywords: keywords.iter().map(|k| k.to_string()).collect(),
        actions,
        ..Default::default()
    }
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

/// Three domains of recurring subgoals, including a direction-flip pair that
/// materializes from one candidate, a pair that merges pairwise, a brittle
/// template, and a template prone to click loops.
pub fn default_domains() -> Vec<DomainConfig> {
    let date_sort = |dir: &str| {
        vec![
            act("click", "date_sort_toggle", ""),
            act("select_option", &format!("date_{dir}"), ""),
            act("click", "refresh_results", ""),
            act("scroll", "results_list", ""),
        ]
    };
    let price_sort =
        |dir: &str| vec![act("click", "sort_menu", ""), act("select_option", &format!("price_{dir}"), ""), act("click", "first_item", "")];
    let classifieds = DomainConfig {
        name: "classifieds".into(),
        weight: 1.0,
        url_prefix: "/classifieds".into(),
        objects: strs(&["guitar", "motorcycle", "bicycle", "sofa", "camera"]),
        templates: vec![
            template(
                "search_listings",
                &["search listings"],
                vec![act("click", "search_box", ""), act("type", "search_box", "query"), act("press", "", "Enter")],
            ),
            template(
                "apply_price_filter",
                &["price filter"],
                vec![act("click", "filter_panel", ""), act("type", "max_price", "500"), act("click", "apply_filter", "")],
            ),
            template("sort_by_price_asc", &["cheapest"], price_sort("asc")),
            template("sort_by_price_desc", &["most expensive"], price_sort("desc")),
            template("sort_by_date_oldest", &["oldest first"], date_sort("oldest")),
            template("sort_by_date_newest", &["newest first"], date_sort("newest")),
            template(
                "contact_seller",
                &["contact seller"],
                vec![act("click", "contact_button", ""), act("type", "message_box", "hello"), act("click", "send", "")],
            ),
            template(
                "save_listing",
                &["save listing"],
                vec![act("click", "listing_card", ""), act("click", "save_star", ""), act("click", "saved_tab", "")],
            ),
            template(
                "view_seller_profile",
                &["seller profile"],
                vec![act("click", "listing_card", ""), act("click", "seller_name", ""), act("scroll", "seller_listings", ""), act("click", "ratings_tab", "")],
            ),
            template(
                "report_listing",
                &["report listing"],
                vec![act("click", "listing_menu", ""), act("click", "report", ""), act("select_option", "reason_spam", ""), act("click", "confirm_report", "")],
            ),
        ],
    };
    let shopping = DomainConfig {
        name: "shopping".into(),
        weight: 1.0,
        url_prefix: "/shopping".into(),
        objects: strs(&["laptop", "headphones", "kettle", "backpack"]),
        templates: vec![
            template("add_to_cart", &["add to cart"], vec![act("click", "product_tile", ""), act("click", "add_cart", ""), act("click", "cart_badge", "")]),
            template("open_reviews", &["read reviews"], vec![act("click", "reviews_tab", ""), act("scroll", "reviews", "")]),
            template(
                "compare_specs",
                &["compare specs"],
                vec![act("click", "compare_box", ""), act("click", "compare_box_2", ""), act("click", "compare_now", ""), act("scroll", "spec_table", "")],
            ),
            template(
                "checkout_order",
                &["checkout"],
                vec![act("click", "cart_badge", ""), act("click", "checkout", ""), act("type", "zip", "15213"), act("click", "place_order", "")],
            ),
            template(
                "bulk_select_keyboard",
                &["bulk select"],
                vec![act("click", "grid", ""), act("hotkey", "", "ctrl+a"), act("click", "bulk_menu", "")],
            ),
            SubgoalTemplate {
                loopy: true,
                loop_probability: 0.05,
                ..template("choose_size", &["choose size"], vec![act("click", "size_picker", ""), act("click", "size_option", ""), act("click", "confirm_size", "")])
            },
            template(
                "apply_coupon",
                &["apply coupon"],
                vec![act("click", "cart_badge", ""), act("click", "coupon_link", ""), act("type", "coupon_box", "SAVE10"), act("click", "apply_coupon", "")],
            ),
            template(
                "track_order",
                &["track order"],
                vec![act("click", "account_menu", ""), act("click", "orders", ""), act("click", "latest_order", ""), act("click", "tracking", "")],
            ),
            template(
                "write_review",
                &["write review"],
                vec![act("click", "reviews_tab", ""), act("click", "write_review", ""), act("type", "review_box", "great"), act("click", "submit_review", "")],
            ),
        ],
    };
    let forum = DomainConfig {
        name: "reddit".into(),
        weight: 1.0,
        url_prefix: "/forum".into(),
        objects: strs(&["post", "thread", "comment"]),
        templates: vec![
            template("upvote_post", &["upvote"], vec![act("click", "post_link", ""), act("click", "upvote_arrow", "")]),
            template(
                "reply_thread",
                &["reply"],
                vec![act("click", "reply_button", ""), act("type", "reply_box", "thanks"), act("click", "submit_reply", "")],
            ),
            template("subscribe_forum", &["subscribe"], vec![act("click", "forum_link", ""), act("click", "subscribe_button", "")]),
            template(
                "find_forum",
                &["find forum"],
                vec![act("click", "forum_search", ""), act("type", "forum_search", "topic"), act("press", "", "Enter")],
            ),
            template(
                "create_post",
                &["create post"],
                vec![act("click", "submit_link", ""), act("type", "title_box", "title"), act("type", "body_box", "text"), act("click", "submit_post", "")],
            ),
            template(
                "sort_comments_top",
                &["top comments"],
                vec![act("click", "post_link", ""), act("click", "comment_sort", ""), act("select_option", "sort_top", "")],
            ),
            template(
                "edit_profile",
                &["edit profile"],
                vec![act("click", "user_menu", ""), act("click", "profile", ""), act("type", "bio_box", "hi"), act("click", "save_profile", "")],
            ),
        ],
    };
    vec![classifieds, shopping, forum]
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            n_tasks: 500,
            run_id: "sim".into(),
            method: "skillforge".into(),
            domains: default_domains(),
            min_subgoals: 1,
            max_subgoals: 3,
            max_steps: 50,
            k_r: 3,
            max_attempts: 2,
            routine_step_cost: 1,
            routine_action_savings: 2,
            brittle_injections: vec![BrittleInjection { template: "bulk_select_keyboard".into(), reliability: 0.3, start_task: 0 }],
            infeasible_rate: 0.0,
            token_model: CostModel { q_plan: 600.0, q_reflect: 300.0, q_act: 120.0, ..CostModel::default() },
            cache_model: CacheModel::default(),
            learning: LearningConfig::default(),
            learning_enabled: true,
            rules_enabled: true,
            planner_model: "planner".into(),
            actor_model: "actor".into(),
            start_date: Date::from_ymd(2026, 1, 1).expect("valid date"),
            tasks_per_day: 20,
            wall_ms: WallTimes::default(),
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::ConfigInvalid(format!("{name} = {p} is not a probability")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        if self.max_steps < 1 {
            return bad("max_steps must be at least 1".into());
        }
        if self.k_r < 1 {
            return bad("k_r must be at least 1".into());
        }
        if self.max_attempts < 1 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.min_subgoals < 1 || self.min_subgoals > self.max_subgoals {
            return bad(format!("subgoal range {}..={} is empty or starts at 0", self.min_subgoals, self.max_subgoals));
        }
        if self.tasks_per_day < 1 {
            return bad("tasks_per_day must be at least 1".into());
        }
        probability("infeasible_rate", self.infeasible_rate)?;
        if self.domains.is_empty() {
            return bad("no domains".into());
        }
        let mut ids: Vec<&str> = Vec::new();
        for d in &self.domains {
            if !(d.weight > 0.0 && d.weight.is_finite()) {
                return bad(format!("domain {} has weight {}", d.name, d.weight));
            }
            if d.templates.is_empty() {
                return bad(format!("domain {} has no templates", d.name));
            }
            for t in &d.templates {
                if t.id.is_empty() || t.actions.is_empty() {
                    return bad(format!("template {:?} in {} needs an id and at least one action", t.id, d.name));
                }
                if t.keywords.iter().all(|k| crate::keyword::tokens(k).next().is_none()) {
                    return bad(format!("template {} has no keywords", t.id));
                }
                if ids.contains(&t.id.as_str()) {
                    return bad(format!("template id {} repeats", t.id));
                }
                ids.push(&t.id);
                probability(&format!("{}.fallback_success", t.id), t.fallback_success)?;
                probability(&format!("{}.reliability", t.id), t.reliability)?;
                probability(&format!("{}.loop_probability", t.id), t.loop_probability)?;
            }
        }
        for b in &self.brittle_injections {
            if !ids.contains(&b.template.as_str()) {
                return bad(format!("brittle injection names unknown template {}", b.template));
            }
            probability("brittle reliability", b.reliability)?;
        }
        self.learning.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        self.token_model.validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        Ok(())
    }

    fn injection(&self, template: &str) -> Option<&BrittleInjection> {
        self.brittle_injections.iter().find(|b| b.template == template)
    }

    /// Learning date of the task at `index`.
    pub fn date_of(&self, index: usize) -> Date {
        self.start_date.plus_days((index / self.tasks_per_day.max(1)) as u64)
    }
}

/// One subgoal instance with its behavioral parameters resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSubgoal {
    pub template: String,
    pub keywords: Vec<String>,
    pub object: String,
    pub actions: Vec<PrimitiveAction>,
    pub coverable: bool,
    pub fallback_success: f64,
    pub reliability: f64,
    pub loopy: bool,
    pub loop_probability: f64,
}

impl Default for SyntheticSubgoal {
    fn default() -> Self {
        let t = SubgoalTemplate::default();
        SyntheticSubgoal {
            template: String::new(),
            keywords: Vec::new(),
            object: String::new(),
            actions: Vec::new(),
            coverable: t.coverable,
            fallback_success: 1.0,
            reliability: 1.0,
            loopy: t.loopy,
            loop_probability: t.loop_probability,
        }
    }
}

impl SyntheticSubgoal {
    fn from_template(t: &SubgoalTemplate, object: &str, reliability: f64) -> Self {
        SyntheticSubgoal {
            template: t.id.clone(),
            keywords: t.keywords.clone(),
            object: object.into(),
            actions: t.actions.clone(),
            coverable: t.coverable,
            fallback_success: t.fallback_success,
            reliability,
            loopy: t.loopy,
            loop_probability: t.loop_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTask {
    pub task_id: String,
    pub domain: String,
    pub url: String,
    pub feasible: bool,
    /// Overrides the date derived from the task's stream position.
    pub date: Option<Date>,
    pub subgoals: Vec<SyntheticSubgoal>,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        SyntheticTask {
            task_id: String::new(),
            domain: String::new(),
            url: String::new(),
            feasible: true,
            date: None,
            subgoals: Vec::new(),
        }
    }
}

/// Reflector cadence: every `k_r`-th action, and after any errored action.
pub fn should_reflect(i: u64, last_action_errored: bool, k_r: u64) -> bool {
    last_action_errored || (k_r > 0 && i.is_multiple_of(k_r))
}

fn pick_weighted(rng: &mut Pcg64, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = unit(rng) * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// The seeded synthetic task stream.
pub fn generate_stream(config: &SimConfig) -> Vec<SyntheticTask> {
    let mut rng = Pcg64::seed_from_u64(config.seed);
    let weights: Vec<f64> = config.domains.iter().map(|d| d.weight).collect();
    let mut tasks = Vec::with_capacity(config.n_tasks);
    for index in 0..config.n_tasks {
        let domain = &config.domains[pick_weighted(&mut rng, &weights)];
        let mut pool: Vec<&SubgoalTemplate> = domain.templates.iter().collect();
        let span = (config.max_subgoals - config.min_subgoals + 1) as u64;
        let want = config.min_subgoals + bounded(&mut rng, span) as usize;
        let object = match domain.objects.len() {
            0 => String::new(),
            n => domain.objects[bounded(&mut rng, n as u64) as usize].clone(),
        };
        let mut subgoals = Vec::with_capacity(want);
        while subgoals.len() < want && !pool.is_empty() {
            let t = pool.remove(bounded(&mut rng, pool.len() as u64) as usize);
            let reliability = match config.injection(&t.id) {
                Some(b) if index >= b.start_task => b.reliability,
                _ => t.reliability,
            };
            subgoals.push(SyntheticSubgoal::from_template(t, &object, reliability));
        }
        let feasible = !bernoulli(&mut rng, config.infeasible_rate);
        tasks.push(SyntheticTask {
            task_id: format!("t{:04}", index + 1),
            domain: domain.name.clone(),
            url: format!("http://{}.local{}/{}", domain.name, domain.url_prefix.trim_end_matches('/'), object),
            feasible,
            date: None,
            subgoals,
        });
    }
    tasks
}

/// The repeat-click guardrail: fires after two identical clicks with no page
/// change, vetoing a third.
pub fn repeat_click_rule() -> RuleSkill {
    RuleSkill {
        id: "repeat_click_same_element".into(),
        trigger: Predicate::RepeatCount { signature: None, k: 2 },
        sites: vec!["*".into()],
        priority: Priority::High,
        body: "If the same click[id] has fired twice with no DOM change, stop.\nInstead: try a URL-parameter equivalent if one exists, otherwise\nquery the Planner for a fresh subgoal. Never click the same element\na third time in a row.\n".into(),
    }
}

/// Library used when no seed directory is given: the repeat-click rule.
pub fn seed_library() -> SkillLibrary {
    let mut lib = SkillLibrary::new();
    lib.insert_rule(repeat_click_rule()).expect("empty library accepts a rule");
    lib
}
