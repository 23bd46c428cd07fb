//! Environment variants, story layers, messages and the public specification
//! shared by both roles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowest attribute value.
pub const DOMAIN_LO: u8 = 0;
/// Highest attribute value.
pub const DOMAIN_HI: u8 = 4;
/// Number of levels in the attribute domain.
pub const DOMAIN_SIZE: usize = (DOMAIN_HI - DOMAIN_LO) as usize + 1;
/// Span used to normalize absolute differences into [0, 1].
pub const DOMAIN_SPAN: f64 = (DOMAIN_HI - DOMAIN_LO) as f64;

const WEIGHT_TOLERANCE: f64 = 1e-6;
const MARGINAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Objective {
    /// Sender wants the receiver to match the truth.
    Coop,
    /// Sender wants the receiver's estimate to be high.
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ToolKind {
    Perfect,
    Noisy,
    Availability,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Regime {
    #[default]
    Mixtalk,
    Cheaptalk,
    Disclosure,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Mixtalk => "MIXTALK",
            Regime::Cheaptalk => "CHEAPTALK",
            Regime::Disclosure => "DISCLOSURE",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mixtalk" => Ok(Regime::Mixtalk),
            "cheaptalk" => Ok(Regime::Cheaptalk),
            "disclosure" => Ok(Regime::Disclosure),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

/// Which weight set the sender's persuasion term averages over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PersuasionWeights {
    #[default]
    Sender,
    Receiver,
}

fn default_lo() -> u8 {
    DOMAIN_LO
}

fn default_hi() -> u8 {
    DOMAIN_HI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub id: String,
    pub verifiable: bool,
    #[serde(default = "default_lo")]
    pub domain_lo: u8,
    #[serde(default = "default_hi")]
    pub domain_hi: u8,
    pub sender_objective: Objective,
    pub weight_sender: f64,
    pub weight_receiver: f64,
    pub claim_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub attr_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_id: Option<String>,
    pub cost: f64,
    pub kind: ToolKind,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub unavailable_rate: f64,
}

impl ToolSpec {
    pub fn id(&self) -> String {
        self.tool_id
            .clone()
            .unwrap_or_else(|| format!("T_{}", self.attr_id))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub a: String,
    pub b: String,
    pub rho: f64,
}

/// `value(lo) <= value(hi)` must hold in every sampled vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub lo: String,
    pub hi: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorStructure {
    pub marginals: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub correlations: Vec<Correlation>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl PriorStructure {
    pub fn validate(&self, ids: &BTreeSet<&str>) -> Result<()> {
        for id in ids {
            if !self.marginals.contains_key(*id) {
                return Err(Error::validation(
                    format!("prior.marginals.{id}"),
                    "missing marginal",
                ));
            }
        }
        for (id, p) in &self.marginals {
            let field = format!("prior.marginals.{id}");
            if !ids.contains(id.as_str()) {
                return Err(Error::validation(field, "unknown attribute"));
            }
            if p.len() != DOMAIN_SIZE {
                return Err(Error::validation(
                    field,
                    format!("expected {DOMAIN_SIZE} probabilities, got {}", p.len()),
                ));
            }
            if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::validation(field, "negative or non-finite probability"));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > MARGINAL_TOLERANCE {
                return Err(Error::validation(field, format!("sums to {total}")));
            }
        }
        let mut pairs = BTreeSet::new();
        for (k, c) in self.correlations.iter().enumerate() {
            let field = format!("prior.correlations[{k}]");
            for id in [&c.a, &c.b] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::validation(field, format!("unknown attribute `{id}`")));
                }
            }
            if c.a == c.b {
                return Err(Error::validation(field, "self-correlation"));
            }
            if !(-1.0..=1.0).contains(&c.rho) {
                return Err(Error::validation(field, format!("rho {} outside [-1, 1]", c.rho)));
            }
            let key = if c.a < c.b {
                (c.a.clone(), c.b.clone())
            } else {
                (c.b.clone(), c.a.clone())
            };
            if !pairs.insert(key) {
                return Err(Error::validation(field, "duplicate pair"));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let field = format!("prior.constraints[{k}]");
            for id in [&c.lo, &c.hi] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::validation(field, format!("unknown attribute `{id}`")));
                }
            }
            if c.lo == c.hi {
                return Err(Error::validation(field, "constraint relates an attribute to itself"));
            }
        }
        if constraint_graph_has_cycle(&self.constraints) {
            return Err(Error::validation("prior.constraints", "constraint graph is cyclic"));
        }
        Ok(())
    }
}

fn constraint_graph_has_cycle(constraints: &[Constraint]) -> bool {
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in constraints {
        indegree.entry(c.lo.as_str()).or_default();
        *indegree.entry(c.hi.as_str()).or_default() += 1;
        edges.entry(c.lo.as_str()).or_default().push(c.hi.as_str());
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut seen = 0;
    while let Some(node) = ready.pop() {
        seen += 1;
        for next in edges.get(node).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("node registered");
            *d -= 1;
            if *d == 0 {
                ready.push(next);
            }
        }
    }
    seen != indegree.len()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub env_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub attributes: Vec<AttributeSpec>,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
    pub verification_budget: u32,
    pub tool_scale: f64,
    pub claim_scale: f64,
    pub max_claims: usize,
    pub max_claim_cost: f64,
    pub max_tool_cost: f64,
    pub statement_max_tokens: usize,
    pub prior: PriorStructure,
    #[serde(default)]
    pub regime: Regime,
    #[serde(default)]
    pub persuasion_weights: PersuasionWeights,
}

impl GameConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut cfg: GameConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant and renormalizes role weights that are within
    /// tolerance of summing to one.
    pub fn validate(&mut self) -> Result<()> {
        if self.env_id.trim().is_empty() {
            return Err(Error::validation("env_id", "empty"));
        }
        if self.attributes.is_empty() {
            return Err(Error::validation("attributes", "no attributes"));
        }
        let mut ids = BTreeSet::new();
        for (k, a) in self.attributes.iter().enumerate() {
            let field = format!("attributes[{k}]");
            if a.id.trim().is_empty() {
                return Err(Error::validation(format!("{field}.id"), "empty"));
            }
            if !ids.insert(a.id.as_str()) {
                return Err(Error::validation(
                    format!("{field}.id"),
                    format!("duplicate attribute id `{}`", a.id),
                ));
            }
            if a.domain_lo != DOMAIN_LO || a.domain_hi != DOMAIN_HI {
                return Err(Error::validation(
                    format!("{field}.domain"),
                    format!("domain must be [{DOMAIN_LO}, {DOMAIN_HI}]"),
                ));
            }
            for (name, w) in [("weight_sender", a.weight_sender), ("weight_receiver", a.weight_receiver)] {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::validation(format!("{field}.{name}"), "must be non-negative"));
                }
            }
            if !a.claim_cost.is_finite() || a.claim_cost < 0.0 {
                return Err(Error::validation(format!("{field}.claim_cost"), "must be non-negative"));
            }
            if a.claim_cost > self.max_claim_cost + 1e-12 {
                return Err(Error::validation(
                    format!("{field}.claim_cost"),
                    format!("{} exceeds max_claim_cost {}", a.claim_cost, self.max_claim_cost),
                ));
            }
        }

        let mut tooled = BTreeSet::new();
        for (k, t) in self.tools.iter().enumerate() {
            let field = format!("tools[{k}]");
            let Some(attr) = self.attributes.iter().find(|a| a.id == t.attr_id) else {
                return Err(Error::validation(
                    format!("{field}.attr_id"),
                    format!("unknown attribute `{}`", t.attr_id),
                ));
            };
            if !attr.verifiable {
                return Err(Error::validation(
                    format!("{field}.attr_id"),
                    format!("`{}` is not verifiable", t.attr_id),
                ));
            }
            if !tooled.insert(t.attr_id.as_str()) {
                return Err(Error::validation(
                    format!("{field}.attr_id"),
                    format!("second tool for `{}`", t.attr_id),
                ));
            }
            if !t.cost.is_finite() || t.cost < 0.0 || t.cost > self.max_tool_cost + 1e-12 {
                return Err(Error::validation(
                    format!("{field}.cost"),
                    format!("{} outside [0, max_tool_cost]", t.cost),
                ));
            }
            for (name, p) in [("noise_rate", t.noise_rate), ("unavailable_rate", t.unavailable_rate)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::validation(format!("{field}.{name}"), "not a probability"));
                }
            }
            if t.kind == ToolKind::Perfect && (t.noise_rate != 0.0 || t.unavailable_rate != 0.0) {
                return Err(Error::validation(
                    format!("{field}.kind"),
                    "PERFECT tools carry no noise or unavailability",
                ));
            }
        }

        if self.regime != Regime::Cheaptalk && self.verification_budget < 1 {
            return Err(Error::validation("verification_budget", "must be at least 1"));
        }
        if self.max_claims == 0 {
            return Err(Error::validation("max_claims", "must be positive"));
        }
        if self.statement_max_tokens == 0 {
            return Err(Error::validation("statement_max_tokens", "must be positive"));
        }
        for (name, v) in [
            ("tool_scale", self.tool_scale),
            ("claim_scale", self.claim_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(name, "must be non-negative"));
            }
        }
        for (name, v) in [
            ("max_claim_cost", self.max_claim_cost),
            ("max_tool_cost", self.max_tool_cost),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(name, "must be positive"));
            }
        }

        self.prior.validate(&ids)?;

        for role in ["weight_sender", "weight_receiver"] {
            let total: f64 = self
                .attributes
                .iter()
                .map(|a| if role == "weight_sender" { a.weight_sender } else { a.weight_receiver })
                .sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::validation(role, format!("weights sum to {total}, expected 1")));
            }
            for a in &mut self.attributes {
                if role == "weight_sender" {
                    a.weight_sender /= total;
                } else {
                    a.weight_receiver /= total;
                }
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.id.as_str())
    }

    pub fn attribute(&self, id: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.id == id)
    }

    /// Tool usable by the receiver for `attr_id` under the active regime.
    pub fn tool_for(&self, attr_id: &str) -> Option<&ToolSpec> {
        if self.regime == Regime::Cheaptalk {
            return None;
        }
        self.tools.iter().find(|t| t.attr_id == attr_id)
    }

    pub fn effective_tools(&self) -> &[ToolSpec] {
        if self.regime == Regime::Cheaptalk {
            &[]
        } else {
            &self.tools
        }
    }

    pub fn effective_claim_cost(&self, attr: &AttributeSpec) -> f64 {
        if self.regime == Regime::Cheaptalk {
            0.0
        } else {
            attr.claim_cost
        }
    }

    pub fn effective_budget(&self) -> u32 {
        if self.regime == Regime::Cheaptalk {
            0
        } else {
            self.verification_budget
        }
    }

    /// Copy of this variant under another communication regime.
    pub fn with_regime(&self, regime: Regime) -> GameConfig {
        GameConfig {
            regime,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialized form.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<GameConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    GameConfig::from_json_str(&text)
}

/// Loads every `*.json` variant in `dir`, sorted by env_id.
pub fn load_config_dir(dir: impl AsRef<Path>) -> Result<Vec<GameConfig>> {
    let mut configs = json_files(dir.as_ref())?
        .into_iter()
        .map(load_config)
        .collect::<Result<Vec<_>>>()?;
    configs.sort_by(|a, b| a.env_id.cmp(&b.env_id));
    Ok(configs)
}

pub(crate) fn json_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoryLayer {
    pub story_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub scenario_text: String,
    pub attr_names: BTreeMap<String, String>,
}

impl StoryLayer {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn covers(&self, config: &GameConfig) -> bool {
        self.check_coverage(config).is_ok()
    }

    /// Names exactly the config's attributes: the pairing rule for variants.
    pub fn fits(&self, config: &GameConfig) -> bool {
        self.covers(config) && self.attr_names.len() == config.attributes.len()
    }

    pub fn check_coverage(&self, config: &GameConfig) -> Result<()> {
        for id in config.ids() {
            if !self.attr_names.contains_key(id) {
                return Err(Error::Coverage {
                    story_id: self.story_id.clone(),
                    attr_id: id.to_string(),
                });
            }
        }
        Ok(())
    }
}

pub fn load_story(path: impl AsRef<Path>) -> Result<StoryLayer> {
    StoryLayer::from_json_str(&std::fs::read_to_string(path.as_ref())?)
}

pub fn load_story_dir(dir: impl AsRef<Path>) -> Result<Vec<StoryLayer>> {
    let mut stories = json_files(dir.as_ref())?
        .into_iter()
        .map(load_story)
        .collect::<Result<Vec<_>>>()?;
    stories.sort_by(|a, b| a.story_id.cmp(&b.story_id));
    Ok(stories)
}

/// Hidden attribute vector, keyed by attribute id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaVector(pub BTreeMap<String, u8>);

impl ThetaVector {
    pub fn get(&self, id: &str) -> Option<u8> {
        self.0.get(id).copied()
    }

    pub fn set(&mut self, id: &str, value: u8) {
        self.0.insert(id.to_string(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u8)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ok iff every configured attribute is present with an in-domain value
    /// and nothing else is present.
    pub fn check_complete(&self, config: &GameConfig) -> Result<()> {
        for id in config.ids() {
            match self.get(id) {
                None => return Err(Error::IncompleteEstimate(id.to_string())),
                Some(v) if v > DOMAIN_HI => {
                    return Err(Error::OutOfDomainValue {
                        attr_id: id.to_string(),
                        value: v as i64,
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.0.keys().find(|k| config.attribute(k).is_none()) {
            return Err(Error::UnknownAttribute(extra.clone()));
        }
        Ok(())
    }
}

impl FromIterator<(String, u8)> for ThetaVector {
    fn from_iter<I: IntoIterator<Item = (String, u8)>>(iter: I) -> Self {
        ThetaVector(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub attr_id: String,
    pub value: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub claims: Vec<Claim>,
    #[serde(default)]
    pub statement: String,
}

impl Message {
    pub fn claimed(&self, attr_id: &str) -> Option<u8> {
        self.claims
            .iter()
            .find(|c| c.attr_id == attr_id)
            .map(|c| c.value)
    }

    pub fn is_claimed(&self, attr_id: &str) -> bool {
        self.claimed(attr_id).is_some()
    }

    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        if self.claims.len() > config.max_claims {
            return Err(Error::TooManyClaims {
                count: self.claims.len(),
                max: config.max_claims,
            });
        }
        let mut seen = BTreeSet::new();
        for c in &self.claims {
            if config.attribute(&c.attr_id).is_none() {
                return Err(Error::UnknownAttribute(c.attr_id.clone()));
            }
            if !seen.insert(c.attr_id.as_str()) {
                return Err(Error::DuplicateClaim(c.attr_id.clone()));
            }
            if c.value > DOMAIN_HI {
                return Err(Error::OutOfDomainValue {
                    attr_id: c.attr_id.clone(),
                    value: c.value as i64,
                });
            }
        }
        Ok(())
    }

    /// Applies the statement character budget (four characters per token).
    pub fn truncate_statement(&mut self, statement_max_tokens: usize) {
        let limit = statement_max_tokens.saturating_mul(4);
        if let Some((idx, _)) = self.statement.char_indices().nth(limit) {
            self.statement.truncate(idx);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicAttribute {
    pub id: String,
    pub name: String,
    pub verifiable: bool,
    pub domain: [u8; 2],
    pub sender_objective: Objective,
    pub weight_sender: f64,
    pub weight_receiver: f64,
    pub claim_cost: f64,
    pub prior_marginal: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_in_order: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicTool {
    pub attr_id: String,
    pub tool_id: String,
    pub cost: f64,
    pub kind: ToolKind,
    pub noise_rate: f64,
    pub unavailable_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicPrior {
    pub correlations: Vec<Correlation>,
    pub constraints: Vec<Constraint>,
}

/// Everything both roles are allowed to see. Never carries hidden values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicSpec {
    pub env_id: String,
    pub story_id: String,
    pub regime: Regime,
    pub scenario: String,
    pub attributes: Vec<PublicAttribute>,
    pub tools: Vec<PublicTool>,
    pub verification_budget: u32,
    pub tool_scale: f64,
    pub claim_scale: f64,
    pub max_claims: usize,
    pub max_claim_cost: f64,
    pub max_tool_cost: f64,
    pub statement_max_tokens: usize,
    pub prior: PublicPrior,
}

impl PublicSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("public spec serializes")
    }
}

pub fn render_public_spec(config: &GameConfig, story: &StoryLayer) -> Result<PublicSpec> {
    story.check_coverage(config)?;
    let attributes = config
        .attributes
        .iter()
        .map(|a| PublicAttribute {
            id: a.id.clone(),
            name: story.attr_names[&a.id].clone(),
            verifiable: a.verifiable,
            domain: [a.domain_lo, a.domain_hi],
            sender_objective: a.sender_objective,
            weight_sender: a.weight_sender,
            weight_receiver: a.weight_receiver,
            claim_cost: config.effective_claim_cost(a),
            prior_marginal: config.prior.marginals[&a.id].clone(),
            levels_in_order: a.levels.clone(),
        })
        .collect();
    let tools = config
        .effective_tools()
        .iter()
        .map(|t| PublicTool {
            attr_id: t.attr_id.clone(),
            tool_id: t.id(),
            cost: t.cost,
            kind: t.kind,
            noise_rate: t.noise_rate,
            unavailable_rate: t.unavailable_rate,
        })
        .collect();
    Ok(PublicSpec {
        env_id: config.env_id.clone(),
        story_id: story.story_id.clone(),
        regime: config.regime,
        scenario: story.scenario_text.clone(),
        attributes,
        tools,
        verification_budget: config.effective_budget(),
        tool_scale: config.tool_scale,
        claim_scale: config.claim_scale,
        max_claims: config.max_claims,
        max_claim_cost: config.max_claim_cost,
        max_tool_cost: config.max_tool_cost,
        statement_max_tokens: config.statement_max_tokens,
        prior: PublicPrior {
            correlations: config.prior.correlations.clone(),
            constraints: config.prior.constraints.clone(),
        },
    })
}
