//! One episode: a single sender message, a budgeted receiver loop with tool
//! calls, and scoring of the final estimate.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::scripted::informed_estimate;
use crate::agents::{receiver_step, sender_act, Agent, Observation, ReceiverAction, SenderContext};
use crate::config::{
    render_public_spec, GameConfig, Message, Objective, PersuasionWeights, PublicSpec, Regime, StoryLayer,
    ThetaVector, ToolKind, ToolSpec, DOMAIN_HI, DOMAIN_SPAN,
};
use crate::error::{Error, Result};
use crate::prior::PriorSampler;
use crate::seed::substream;
use crate::topd::Playbook;
use crate::trace::{EpisodeTrace, PayoffBreakdown, ToolCall, ToolStatus};

/// Malformed receiver outputs tolerated before the forced estimate.
pub const MAX_MALFORMED_STEPS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ToolOutcome {
    pub attr_id: String,
    pub tool_id: String,
    pub observed_value: Option<u8>,
    pub status: ToolStatus,
    pub cost_charged: f64,
    /// The observation is conclusive: a perfect tool, or an availability
    /// tool that resolved.
    pub was_perfect: bool,
}

impl ToolOutcome {
    pub fn to_call(&self) -> ToolCall {
        ToolCall {
            attr_id: self.attr_id.clone(),
            tool_id: self.tool_id.clone(),
            cost: self.cost_charged,
            observed_value: self.observed_value,
            status: self.status,
        }
    }

    /// Rebuilds an outcome from a stored call using the variant's tool kinds.
    pub fn from_call(call: &ToolCall, config: &GameConfig) -> ToolOutcome {
        let kind = config.tools.iter().find(|t| t.attr_id == call.attr_id).map(|t| t.kind);
        let ok = call.status == ToolStatus::Ok && call.observed_value.is_some();
        ToolOutcome {
            attr_id: call.attr_id.clone(),
            tool_id: call.tool_id.clone(),
            observed_value: call.observed_value,
            status: call.status,
            cost_charged: call.cost,
            was_perfect: ok && matches!(kind, Some(ToolKind::Perfect | ToolKind::Availability)),
        }
    }
}

pub fn apply_tool(tool: &ToolSpec, true_value: u8, rng: &mut impl Rng) -> ToolOutcome {
    let (observed_value, status) = match tool.kind {
        ToolKind::Perfect => (Some(true_value), ToolStatus::Ok),
        ToolKind::Noisy => {
            if rng.gen::<f64>() < tool.noise_rate {
                let mut other = rng.gen_range(0..DOMAIN_HI);
                if other >= true_value {
                    other += 1;
                }
                (Some(other), ToolStatus::Ok)
            } else {
                (Some(true_value), ToolStatus::Ok)
            }
        }
        ToolKind::Availability => {
            if rng.gen::<f64>() < tool.unavailable_rate {
                (None, ToolStatus::Unavailable)
            } else {
                (Some(true_value), ToolStatus::Ok)
            }
        }
    };
    ToolOutcome {
        attr_id: tool.attr_id.clone(),
        tool_id: tool.id(),
        observed_value,
        status,
        cost_charged: tool.cost,
        was_perfect: status == ToolStatus::Ok && tool.kind != ToolKind::Noisy,
    }
}

pub fn detect_perfect_lie(message: &Message, transcript: &[ToolOutcome]) -> bool {
    transcript.iter().any(|o| {
        o.was_perfect
            && o.status == ToolStatus::Ok
            && matches!((message.claimed(&o.attr_id), o.observed_value), (Some(c), Some(v)) if c != v)
    })
}

fn claim_cap(config: &GameConfig) -> f64 {
    config.max_claims as f64 * config.max_claim_cost
}

pub fn claim_penalty(message: &Message, config: &GameConfig) -> f64 {
    let total: f64 = message
        .claims
        .iter()
        .filter_map(|c| config.attribute(&c.attr_id))
        .map(|a| config.effective_claim_cost(a))
        .sum();
    let cap = claim_cap(config);
    if cap <= 0.0 {
        return 0.0;
    }
    config.claim_scale * total.min(cap) / cap
}

pub fn cost_ratio(transcript: &[ToolCall], config: &GameConfig) -> f64 {
    let denom = config.max_tool_cost * config.verification_budget as f64;
    if denom <= 0.0 {
        return 0.0;
    }
    transcript.iter().map(|c| c.cost).sum::<f64>() / denom
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReceiverScore {
    pub err_ratio: f64,
    pub cost_ratio: f64,
    pub score_r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SenderScore {
    pub persuasion: f64,
    pub claim_penalty: f64,
    pub score_s: f64,
}

fn value(theta: &ThetaVector, id: &str) -> f64 {
    theta.get(id).unwrap_or(0) as f64
}

pub fn score_receiver(
    theta_true: &ThetaVector,
    theta_hat: &ThetaVector,
    transcript: &[ToolCall],
    caught: bool,
    config: &GameConfig,
) -> ReceiverScore {
    let err_ratio = if caught {
        0.0
    } else {
        config
            .attributes
            .iter()
            .map(|a| {
                let (t, h) = (value(theta_true, &a.id), value(theta_hat, &a.id));
                let dif = match a.sender_objective {
                    Objective::Coop => (t != h) as u8 as f64,
                    Objective::Up => (h - t).abs() / DOMAIN_SPAN,
                };
                a.weight_receiver * dif
            })
            .sum()
    };
    let cost_ratio = cost_ratio(transcript, config);
    ReceiverScore {
        err_ratio,
        cost_ratio,
        score_r: (1.0 - err_ratio) - config.tool_scale * cost_ratio,
    }
}

pub fn score_sender(
    theta_true: &ThetaVector,
    theta_hat: &ThetaVector,
    message: &Message,
    caught: bool,
    config: &GameConfig,
) -> SenderScore {
    let persuasion = if caught {
        0.0
    } else {
        config
            .attributes
            .iter()
            .map(|a| {
                let (t, h) = (value(theta_true, &a.id), value(theta_hat, &a.id));
                let s = match a.sender_objective {
                    Objective::Coop => (t == h) as u8 as f64,
                    Objective::Up => h / DOMAIN_SPAN,
                };
                let w = match config.persuasion_weights {
                    PersuasionWeights::Sender => a.weight_sender,
                    PersuasionWeights::Receiver => a.weight_receiver,
                };
                w * s
            })
            .sum()
    };
    let claim_penalty = claim_penalty(message, config);
    SenderScore {
        persuasion,
        claim_penalty,
        score_s: persuasion - claim_penalty,
    }
}

/// Scores a finished interaction.
pub fn score_episode(
    config: &GameConfig,
    message: &Message,
    transcript: &[ToolOutcome],
    theta_true: &ThetaVector,
    theta_hat: &ThetaVector,
) -> PayoffBreakdown {
    let caught = detect_perfect_lie(message, transcript);
    let calls: Vec<ToolCall> = transcript.iter().map(ToolOutcome::to_call).collect();
    let r = score_receiver(theta_true, theta_hat, &calls, caught, config);
    let s = score_sender(theta_true, theta_hat, message, caught, config);
    PayoffBreakdown {
        score_r: r.score_r,
        score_s: s.score_s,
        err_ratio: r.err_ratio,
        cost_ratio: r.cost_ratio,
        claim_penalty: s.claim_penalty,
        persuasion: s.persuasion,
        caught_lie_perfect: caught,
    }
}

/// Recomputes a stored trace's payoffs from its message, transcript and
/// attribute vectors. `config` is the variant the trace was played on.
pub fn rescore_trace(trace: &EpisodeTrace, config: &GameConfig) -> PayoffBreakdown {
    let cfg = config.with_regime(trace.regime);
    let outcomes: Vec<ToolOutcome> = trace
        .tool_transcript
        .iter()
        .map(|c| ToolOutcome::from_call(c, &cfg))
        .collect();
    score_episode(&cfg, &trace.message, &outcomes, &trace.theta_true, &trace.theta_hat)
}

/// Field names whose stored and recomputed values differ by more than `tol`.
pub fn payoff_mismatches(stored: &PayoffBreakdown, recomputed: &PayoffBreakdown, tol: f64) -> Vec<&'static str> {
    let pairs = [
        ("Score_R", stored.score_r, recomputed.score_r),
        ("Score_S", stored.score_s, recomputed.score_s),
        ("err_ratio", stored.err_ratio, recomputed.err_ratio),
        ("cost_ratio", stored.cost_ratio, recomputed.cost_ratio),
        ("claim_penalty", stored.claim_penalty, recomputed.claim_penalty),
    ];
    let mut out: Vec<&'static str> = pairs
        .iter()
        .filter(|(_, a, b)| !((a - b).abs() <= tol))
        .map(|(n, _, _)| *n)
        .collect();
    if stored.caught_lie_perfect != recomputed.caught_lie_perfect {
        out.push("caught_lie_perfect");
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct EpisodeOptions {
    pub episode_id: Option<String>,
    /// Hard cap on tool calls, below the variant budget.
    pub budget_cap: Option<u32>,
    pub playbook: Option<Playbook>,
    /// Feed this message instead of invoking the sender.
    pub replay_message: Option<Message>,
    pub theta_override: Option<ThetaVector>,
}

impl EpisodeOptions {
    /// Options that apply a playbook and enforce its cap.
    pub fn with_playbook(playbook: Playbook) -> Self {
        EpisodeOptions {
            budget_cap: Some(playbook.budget_cap),
            playbook: Some(playbook),
            ..Default::default()
        }
    }
}

/// A variant paired with a story, with the public description and the prior
/// sampler prepared once and shared across episodes.
pub struct Environment {
    pub config: GameConfig,
    pub story: StoryLayer,
    pub public_spec: PublicSpec,
    sampler: PriorSampler,
}

impl Environment {
    pub fn new(config: GameConfig, story: StoryLayer) -> Result<Self> {
        let public_spec = render_public_spec(&config, &story)?;
        let sampler = PriorSampler::new(&config.prior)?;
        Ok(Self {
            config,
            story,
            public_spec,
            sampler,
        })
    }

    pub fn env_id(&self) -> &str {
        &self.config.env_id
    }

    /// Hidden attributes for an episode seed. Depends only on the seed, so
    /// every pairing playing the same entry faces the same state.
    pub fn theta(&self, seed: u64) -> Result<ThetaVector> {
        self.sampler.sample(substream(seed, "theta"))
    }

    pub fn run(&self, sender: &Agent, receiver: &Agent, seed: u64, opts: &EpisodeOptions) -> Result<EpisodeTrace> {
        let config = &self.config;
        let theta = match &opts.theta_override {
            Some(t) => {
                t.check_complete(config)?;
                t.clone()
            }
            None => self.theta(seed)?,
        };

        let mut message = match &opts.replay_message {
            Some(m) => {
                m.validate(config)?;
                m.clone()
            }
            None => {
                let ctx = SenderContext {
                    config,
                    public_spec: &self.public_spec,
                    theta: &theta,
                    seed: substream(seed, "sender"),
                };
                sender_act(sender, &ctx)?
            }
        };
        message.truncate_statement(config.statement_max_tokens);

        let disclosed: BTreeMap<String, u8> = if config.regime == Regime::Disclosure {
            message
                .claims
                .iter()
                .filter(|c| config.attribute(&c.attr_id).is_some_and(|a| a.verifiable))
                .filter_map(|c| theta.get(&c.attr_id).map(|v| (c.attr_id.clone(), v)))
                .collect()
        } else {
            BTreeMap::new()
        };

        let budget = opts
            .budget_cap
            .map_or(config.effective_budget(), |cap| cap.min(config.effective_budget()));
        let receiver_seed = substream(seed, "receiver");
        let mut outcomes: Vec<ToolOutcome> = Vec::new();
        let mut calls: Vec<ToolCall> = Vec::new();
        let mut malformed = 0usize;

        let estimate = loop {
            let remaining = budget.saturating_sub(calls.len() as u32);
            let obs = Observation {
                config,
                public_spec: &self.public_spec,
                message: &message,
                transcript: &calls,
                remaining_budget: remaining,
                playbook: opts.playbook.as_ref(),
                disclosed: &disclosed,
                seed: receiver_seed,
            };
            let forced = || informed_estimate(&obs, true);
            match receiver_step(receiver, &obs) {
                Ok(ReceiverAction::Final(est)) => break est,
                Ok(ReceiverAction::CallTool(_)) if remaining == 0 => break forced(),
                Ok(ReceiverAction::CallTool(attr)) => {
                    let tool = config.tool_for(&attr).ok_or_else(|| Error::UnknownTool(attr.clone()))?;
                    let truth = theta.get(&attr).ok_or_else(|| Error::UnknownAttribute(attr.clone()))?;
                    let repeat = outcomes.iter().filter(|o| o.attr_id == attr).count();
                    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, &format!("tool:{attr}:{repeat}")));
                    let outcome = apply_tool(tool, truth, &mut rng);
                    calls.push(outcome.to_call());
                    outcomes.push(outcome);
                }
                Err(Error::BudgetViolation { agent }) => return Err(Error::BudgetViolation { agent }),
                Err(e @ (Error::Transport(_) | Error::Service(_) | Error::Timeout)) => return Err(e),
                Err(e) => {
                    malformed += 1;
                    log::warn!("receiver {} step failed ({e}); {malformed} of {MAX_MALFORMED_STEPS}", receiver.name());
                    if malformed >= MAX_MALFORMED_STEPS || !matches!(e, Error::Parse(_) | Error::UnknownTool(_)) {
                        break forced();
                    }
                }
            }
        };

        let mut theta_hat = estimate;
        theta_hat.check_complete(config)?;
        for (id, v) in &disclosed {
            theta_hat.set(id, *v);
        }

        let payoffs = score_episode(config, &message, &outcomes, &theta, &theta_hat);
        Ok(EpisodeTrace {
            episode_id: opts.episode_id.clone().unwrap_or_else(|| format!("ep{seed:016x}")),
            env_id: config.env_id.clone(),
            story_schema_id: self.story.story_id.clone(),
            model_sender: sender.name().to_string(),
            model_receiver: receiver.name().to_string(),
            seed: Some(seed),
            regime: config.regime,
            message,
            tool_transcript: calls,
            theta_true: theta,
            theta_hat,
            payoffs,
        })
    }
}

pub fn run_episode(
    config: &GameConfig,
    story: &StoryLayer,
    sender: &Agent,
    receiver: &Agent,
    seed: u64,
) -> Result<EpisodeTrace> {
    Environment::new(config.clone(), story.clone())?.run(sender, receiver, seed, &EpisodeOptions::default())
}
