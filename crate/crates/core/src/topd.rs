//! Oracle policy distillation: select the episodes where the receiver pool's
//! per-episode best response acted, keep those against the strongest
//! opponents, summarize when that receiver verified, and turn the summary
//! into a prompt block plus a hard budget cap.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use std::sync::{Arc, Mutex};

use crate::agents::{Agent, Role, SenderContext, SenderPolicy};
use crate::config::{GameConfig, Message};
use crate::engine::{EpisodeOptions, Environment};
use crate::error::{Error, Result};
use crate::meta::OraclePolicy;
use crate::seed::stable_hash;
use crate::trace::EpisodeTrace;
use crate::tournament::parallel_for;

pub const DEFAULT_KEEP_FRACTION: f64 = 0.5;
pub const BUDGET_HEADROOM: f64 = 1.25;

/// Counts behind every statistic in a [`Playbook`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub source_agent: Option<String>,
    #[serde(default)]
    pub keep_fraction: Option<f64>,
    /// Receiver the playbook was distilled for, when named.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_agent: Option<String>,
    pub episodes: usize,
    pub tool_calls: usize,
    /// Episodes in which each attribute was claimed.
    pub claimed: BTreeMap<String, usize>,
    /// Episodes in which each attribute was claimed and then queried.
    pub queried: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Playbook {
    pub env_id: String,
    /// Probability of querying an attribute given that it was claimed.
    pub propensities: BTreeMap<String, f64>,
    pub fallback_rate: f64,
    pub mean_budget: f64,
    pub budget_cap: u32,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Playbook {
    pub fn propensity(&self, attr_id: &str) -> f64 {
        self.propensities
            .get(attr_id)
            .copied()
            .unwrap_or(self.fallback_rate)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("playbook serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let pb: Playbook = serde_json::from_str(text).map_err(|e| Error::Parse(format!("playbook: {e}")))?;
        pb.validate()?;
        Ok(pb)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if let Some((id, _)) = self.propensities.iter().find(|(_, p)| !unit(**p)) {
            return Err(Error::validation("propensities", format!("`{id}` is not a probability")));
        }
        if !unit(self.fallback_rate) {
            return Err(Error::validation("fallback_rate", "not a probability"));
        }
        if self.budget_cap < 1 {
            return Err(Error::validation("budget_cap", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn load_playbook(path: impl AsRef<Path>) -> Result<Playbook> {
    Playbook::from_json_str(&std::fs::read_to_string(path)?)
}

/// One playbook per env_id, as a JSON object keyed by env_id.
pub fn playbooks_to_json(playbooks: &BTreeMap<String, Playbook>) -> String {
    serde_json::to_string_pretty(playbooks).expect("playbooks serialize")
}

/// Reads either a single playbook or an env_id-keyed set of them.
pub fn parse_playbooks(text: &str) -> Result<BTreeMap<String, Playbook>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("playbook: {e}")))?;
    let set: BTreeMap<String, Playbook> = if value.get("env_id").is_some() {
        let pb: Playbook = serde_json::from_value(value).map_err(|e| Error::Parse(format!("playbook: {e}")))?;
        BTreeMap::from([(pb.env_id.clone(), pb)])
    } else {
        serde_json::from_value(value).map_err(|e| Error::Parse(format!("playbook set: {e}")))?
    };
    for (env, pb) in &set {
        pb.validate()?;
        if *env != pb.env_id {
            return Err(Error::EnvMismatch {
                playbook: pb.env_id.clone(),
                prompt: env.clone(),
            });
        }
    }
    Ok(set)
}

pub fn load_playbooks(path: impl AsRef<Path>) -> Result<BTreeMap<String, Playbook>> {
    parse_playbooks(&std::fs::read_to_string(path)?)
}

/// Appends the guidance block to a receiver prompt. The base text is kept
/// byte for byte as a prefix.
pub fn inject_playbook(base_prompt: &str, playbook: &Playbook, env_id: &str) -> Result<String> {
    if playbook.env_id != env_id {
        return Err(Error::EnvMismatch {
            playbook: playbook.env_id.clone(),
            prompt: env_id.to_string(),
        });
    }
    let mut out = String::from(base_prompt);
    out.push_str("\n\n=== VERIFICATION PLAYBOOK ===\n");
    out.push_str(&format!("- In this environment, use at most {} tool calls.\n", playbook.budget_cap));
    for (attr, p) in &playbook.propensities {
        out.push_str(&format!("- {attr}: verify with probability ≈ {p:.2} when claimed.\n"));
    }
    if !playbook.propensities.is_empty() {
        out.push_str(&format!(
            "- Any other claimed attribute: verify with probability ≈ {:.2} when claimed.\n",
            playbook.fallback_rate
        ));
    }
    out.push_str("=== END PLAYBOOK ===\n");
    Ok(out)
}

/// Traces in which the acting agent is the oracle's pick for that
/// (opponent, episode) cell.
pub fn sample_oracle_episodes<'a>(traces: &'a [EpisodeTrace], oracle: &OraclePolicy) -> Vec<&'a EpisodeTrace> {
    traces
        .iter()
        .filter(|t| {
            let (actor, opponent) = match oracle.role {
                Role::Receiver => (&t.model_receiver, &t.model_sender),
                Role::Sender => (&t.model_sender, &t.model_receiver),
            };
            oracle
                .pick(opponent, &t.episode_id)
                .is_some_and(|(best, _)| best == actor)
        })
        .collect()
}

/// Keeps the top `keep_fraction` of episodes by the opponent's realized
/// utility; ties go to the smaller episode id.
pub fn filter_by_opponent_utility<'a>(
    episodes: &[&'a EpisodeTrace],
    role: Role,
    keep_fraction: f64,
) -> Result<Vec<&'a EpisodeTrace>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::validation("keep_fraction", "must lie in (0, 1]"));
    }
    let opponent_utility = |t: &EpisodeTrace| match role {
        Role::Receiver => t.payoffs.score_s,
        Role::Sender => t.payoffs.score_r,
    };
    let mut ranked = episodes.to_vec();
    ranked.sort_by(|a, b| {
        opponent_utility(b)
            .total_cmp(&opponent_utility(a))
            .then_with(|| a.episode_id.cmp(&b.episode_id))
            .then_with(|| a.model_sender.cmp(&b.model_sender))
            .then_with(|| a.model_receiver.cmp(&b.model_receiver))
    });
    let keep = ((keep_fraction * ranked.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    ranked.truncate(keep.min(ranked.len()));
    Ok(ranked)
}

/// Receiver-side statistical summary of a filtered oracle sample.
pub fn summarize_structure(episodes: &[&EpisodeTrace], config: &GameConfig) -> Result<Playbook> {
    let sample: Vec<&&EpisodeTrace> = episodes.iter().filter(|t| t.env_id == config.env_id).collect();
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut prov = Provenance {
        episodes: sample.len(),
        ..Default::default()
    };
    for t in &sample {
        prov.tool_calls += t.tool_transcript.len();
        let queried: BTreeSet<&str> = t.tool_transcript.iter().map(|c| c.attr_id.as_str()).collect();
        for c in &t.message.claims {
            let Some(attr) = config.attribute(&c.attr_id) else { continue };
            if !attr.verifiable {
                continue;
            }
            *prov.claimed.entry(c.attr_id.clone()).or_default() += 1;
            if queried.contains(c.attr_id.as_str()) {
                *prov.queried.entry(c.attr_id.clone()).or_default() += 1;
            }
        }
    }
    let total_claimed: usize = prov.claimed.values().sum();
    let total_queried: usize = prov.queried.values().sum();
    let fallback_rate = if total_claimed == 0 {
        0.0
    } else {
        total_queried as f64 / total_claimed as f64
    };
    let propensities = prov
        .claimed
        .iter()
        .map(|(id, n)| {
            let q = prov.queried.get(id).copied().unwrap_or(0);
            (id.clone(), q as f64 / *n as f64)
        })
        .collect();
    let mean_budget = prov.tool_calls as f64 / sample.len() as f64;
    let budget_cap = budget_cap_for(mean_budget, config.verification_budget);
    Ok(Playbook {
        env_id: config.env_id.clone(),
        propensities,
        fallback_rate,
        mean_budget,
        budget_cap,
        provenance: prov,
    })
}

pub fn budget_cap_for(mean_budget: f64, verification_budget: u32) -> u32 {
    let cap = (BUDGET_HEADROOM * mean_budget - 1e-9).ceil().max(1.0) as u32;
    cap.clamp(1, verification_budget.max(1))
}

/// Full receiver pipeline for one agent pool: oracle episodes, opponent
/// filtering, then one playbook per environment present in the sample.
pub fn distill_receiver_playbooks(
    traces: &[EpisodeTrace],
    oracle: &OraclePolicy,
    configs: &[GameConfig],
    keep_fraction: f64,
) -> Result<BTreeMap<String, Playbook>> {
    let oracle_eps = sample_oracle_episodes(traces, oracle);
    let mut out = BTreeMap::new();
    for cfg in configs {
        let env_eps: Vec<&EpisodeTrace> = oracle_eps.iter().copied().filter(|t| t.env_id == cfg.env_id).collect();
        if env_eps.is_empty() {
            continue;
        }
        let kept = filter_by_opponent_utility(&env_eps, Role::Receiver, keep_fraction)?;
        let mut pb = summarize_structure(&kept, cfg)?;
        pb.provenance.source_agent = Some("oracle".into());
        pb.provenance.keep_fraction = Some(keep_fraction);
        out.insert(cfg.env_id.clone(), pb);
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out)
}

struct Recorded;

impl SenderPolicy for Recorded {
    fn act(&self, _: &SenderContext<'_>) -> Result<Message> {
        Err(Error::AgentProtocol {
            agent: "recorded".into(),
            reason: "replayed senders cannot write new messages".into(),
        })
    }
}

/// Plays `receiver` on the stored episodes, reusing each trace's message,
/// hidden state, seed and episode id. Playbooks are applied per env_id,
/// with their cap enforced. Output order follows the input.
pub fn replay_traces(
    traces: &[EpisodeTrace],
    envs: &[Environment],
    receiver: &Agent,
    playbooks: &BTreeMap<String, Playbook>,
    jobs: usize,
) -> Result<Vec<EpisodeTrace>> {
    let mut plan = Vec::with_capacity(traces.len());
    for t in traces {
        let env = envs
            .iter()
            .find(|e| e.config.env_id == t.env_id && e.story.story_id == t.story_schema_id && e.config.regime == t.regime)
            .ok_or_else(|| {
                Error::validation(
                    "traces",
                    format!("no environment for ({}, {}, {})", t.env_id, t.story_schema_id, t.regime.as_str()),
                )
            })?;
        let mut opts = match playbooks.get(&t.env_id) {
            Some(pb) => EpisodeOptions::with_playbook(pb.clone()),
            None => EpisodeOptions::default(),
        };
        opts.episode_id = Some(t.episode_id.clone());
        opts.replay_message = Some(t.message.clone());
        opts.theta_override = Some(t.theta_true.clone());
        let seed = t.seed.unwrap_or_else(|| stable_hash(&[t.episode_id.as_bytes()]));
        plan.push((env, Agent::custom_sender(&t.model_sender, Arc::new(Recorded)), seed, opts));
    }
    let slots: Vec<Mutex<Option<EpisodeTrace>>> = plan.iter().map(|_| Mutex::new(None)).collect();
    parallel_for(plan.len(), jobs, |i| {
        let (env, sender, seed, opts) = &plan[i];
        let out = env.run(sender, receiver, *seed, opts)?;
        *slots[i].lock().expect("replay slot") = Some(out);
        Ok(())
    })?;
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().expect("replay slot").expect("replayed"))
        .collect())
}
