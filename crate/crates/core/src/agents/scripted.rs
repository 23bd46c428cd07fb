//! Scripted baseline policies. Each is a pure function of its inputs and the
//! episode seed, which is what makes tournaments reproducible without any
//! remote service.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::config::{
    AttributeSpec, Claim, Message, Objective, Regime, ThetaVector, ToolKind, DOMAIN_HI,
};
use crate::error::{Error, Result};
use crate::prior::prior_default;
use crate::seed::keyed_uniform;
use crate::trace::ToolStatus;

use super::{Observation, ReceiverAction, ReceiverPolicy, SenderContext, SenderPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SenderStrategy {
    /// Claims every attribute at its true value.
    Honest,
    /// Claims COOP attributes plus UP attributes at or above the threshold,
    /// all truthfully.
    OmitLow { threshold: u8 },
    /// Claims everything; unverifiable UP attributes are inflated by `k`.
    Exaggerate { k: u8 },
    /// Claims everything; every verifiable attribute is misreported by `k`
    /// (up when there is room, otherwise down).
    Fabricate { k: u8 },
    /// Inflates UP attributes by `k` only where no verification could
    /// conclusively expose the claim under the active regime.
    Strategic { k: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiverStrategy {
    /// Adopts every claim; prior default elsewhere.
    Trusting,
    /// Ignores the message entirely.
    PriorOnly,
    /// Audits claimed verifiable attributes by receiver weight per unit cost.
    AuditGreedy,
    /// Audits claimed verifiable attributes in a seeded random order.
    AuditAllRandom,
    /// Audit-greedy, but stops after `n` tool calls.
    SpotCheck { n: u32 },
}

fn parse_spec(spec: &str) -> (String, Option<String>) {
    let spec = spec.trim();
    if let Some((name, rest)) = spec.split_once('(') {
        let arg = rest.trim_end_matches(')').trim().to_string();
        (name.trim().to_ascii_lowercase(), Some(arg))
    } else if let Some((name, arg)) = spec.split_once(':') {
        (name.trim().to_ascii_lowercase(), Some(arg.trim().to_string()))
    } else {
        (spec.to_ascii_lowercase(), None)
    }
}

fn parse_int<T: FromStr>(spec: &str, arg: Option<String>, default: T) -> Result<T> {
    match arg {
        None => Ok(default),
        Some(a) => a
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::Parse(format!("bad parameter in strategy `{spec}`"))),
    }
}

fn check_step(spec: &str, k: u8) -> Result<u8> {
    if (1..=DOMAIN_HI).contains(&k) {
        Ok(k)
    } else {
        Err(Error::Parse(format!("step in `{spec}` must be in 1..={DOMAIN_HI}")))
    }
}

impl FromStr for SenderStrategy {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (name, arg) = parse_spec(spec);
        match name.as_str() {
            "honest" => Ok(SenderStrategy::Honest),
            "omit-low" => Ok(SenderStrategy::OmitLow {
                threshold: parse_int(spec, arg, 2)?,
            }),
            "exaggerate" => Ok(SenderStrategy::Exaggerate {
                k: check_step(spec, parse_int(spec, arg, 1)?)?,
            }),
            "fabricate" => Ok(SenderStrategy::Fabricate {
                k: check_step(spec, parse_int(spec, arg, 2)?)?,
            }),
            "strategic" => Ok(SenderStrategy::Strategic {
                k: check_step(spec, parse_int(spec, arg, 2)?)?,
            }),
            _ => Err(Error::Parse(format!("unknown sender strategy `{spec}`"))),
        }
    }
}

impl fmt::Display for SenderStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SenderStrategy::Honest => write!(f, "honest"),
            SenderStrategy::OmitLow { threshold } => write!(f, "omit-low({threshold})"),
            SenderStrategy::Exaggerate { k } => write!(f, "exaggerate({k})"),
            SenderStrategy::Fabricate { k } => write!(f, "fabricate({k})"),
            SenderStrategy::Strategic { k } => write!(f, "strategic({k})"),
        }
    }
}

impl FromStr for ReceiverStrategy {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (name, arg) = parse_spec(spec);
        match name.as_str() {
            "trusting" => Ok(ReceiverStrategy::Trusting),
            "prior-only" => Ok(ReceiverStrategy::PriorOnly),
            "audit-greedy" => Ok(ReceiverStrategy::AuditGreedy),
            "audit-all-random" | "audit-all" => Ok(ReceiverStrategy::AuditAllRandom),
            "spot-check" => Ok(ReceiverStrategy::SpotCheck {
                n: parse_int(spec, arg, 1)?,
            }),
            _ => Err(Error::Parse(format!("unknown receiver strategy `{spec}`"))),
        }
    }
}

impl fmt::Display for ReceiverStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReceiverStrategy::Trusting => write!(f, "trusting"),
            ReceiverStrategy::PriorOnly => write!(f, "prior-only"),
            ReceiverStrategy::AuditGreedy => write!(f, "audit-greedy"),
            ReceiverStrategy::AuditAllRandom => write!(f, "audit-all-random"),
            ReceiverStrategy::SpotCheck { n } => write!(f, "spot-check({n})"),
        }
    }
}

/// Whether a claim on `attr` can be conclusively contradicted under the
/// public rules of the variant.
fn exposable(ctx: &SenderContext<'_>, attr: &AttributeSpec) -> bool {
    if !attr.verifiable {
        return false;
    }
    match ctx.public_spec.regime {
        Regime::Cheaptalk => false,
        Regime::Disclosure => true,
        Regime::Mixtalk => ctx
            .public_spec
            .tools
            .iter()
            .any(|t| t.attr_id == attr.id && t.kind != ToolKind::Noisy),
    }
}

fn misreport(value: u8, k: u8) -> u8 {
    if value + k <= DOMAIN_HI {
        value + k
    } else {
        value.saturating_sub(k)
    }
}

fn scripted_statement(ctx: &SenderContext<'_>, claims: &[Claim]) -> String {
    let names: Vec<&str> = claims
        .iter()
        .filter_map(|c| {
            ctx.public_spec
                .attributes
                .iter()
                .find(|a| a.id == c.attr_id)
                .map(|a| a.name.as_str())
        })
        .collect();
    let omitted = ctx.public_spec.attributes.len() - claims.len();
    let mut s = if names.is_empty() {
        "I would rather let the record speak for itself.".to_string()
    } else {
        format!("Happy to stand behind the details on {}.", names.join(", "))
    };
    if omitted > 0 {
        s.push_str(" Anything else can be provided on request.");
    }
    s
}

impl SenderPolicy for SenderStrategy {
    fn act(&self, ctx: &SenderContext<'_>) -> Result<Message> {
        let mut claims = Vec::new();
        for attr in &ctx.config.attributes {
            let truth = ctx
                .theta
                .get(&attr.id)
                .ok_or_else(|| Error::UnknownAttribute(attr.id.clone()))?;
            let up = attr.sender_objective == Objective::Up;
            let value = match *self {
                SenderStrategy::Honest => Some(truth),
                SenderStrategy::OmitLow { threshold } => {
                    (!up || truth >= threshold).then_some(truth)
                }
                SenderStrategy::Exaggerate { k } => Some(if up && !attr.verifiable {
                    (truth + k).min(DOMAIN_HI)
                } else {
                    truth
                }),
                SenderStrategy::Fabricate { k } => Some(if attr.verifiable {
                    misreport(truth, k)
                } else {
                    truth
                }),
                SenderStrategy::Strategic { k } => Some(if up && !exposable(ctx, attr) {
                    (truth + k).min(DOMAIN_HI)
                } else {
                    truth
                }),
            };
            if let Some(value) = value {
                claims.push(Claim {
                    attr_id: attr.id.clone(),
                    value,
                });
            }
        }
        claims.truncate(ctx.config.max_claims);
        let statement = scripted_statement(ctx, &claims);
        Ok(Message { claims, statement })
    }
}

/// Prior default, overridden by claims (if trusted), then by successful tool
/// observations, then by disclosed truths.
pub fn informed_estimate(obs: &Observation<'_>, use_claims: bool) -> ThetaVector {
    let mut est = prior_default(&obs.config.prior);
    if use_claims {
        for c in &obs.message.claims {
            est.set(&c.attr_id, c.value);
        }
    }
    for call in obs.transcript {
        if let (ToolStatus::Ok, Some(v)) = (call.status, call.observed_value) {
            est.set(&call.attr_id, v);
        }
    }
    for (id, v) in obs.disclosed {
        est.set(id, *v);
    }
    est
}

fn audit_candidates<'a>(obs: &'a Observation<'_>) -> Vec<&'a AttributeSpec> {
    obs.config
        .attributes
        .iter()
        .filter(|a| a.verifiable && obs.message.is_claimed(&a.id))
        .filter(|a| obs.config.tool_for(&a.id).is_some())
        .filter(|a| !obs.disclosed.contains_key(&a.id))
        .filter(|a| !obs.transcript.iter().any(|c| c.attr_id == a.id))
        .filter(|a| match obs.playbook {
            None => true,
            Some(pb) => keyed_uniform(obs.seed, &format!("gate:{}", a.id)) < pb.propensity(&a.id),
        })
        .collect()
}

fn value_per_cost(obs: &Observation<'_>, a: &AttributeSpec) -> f64 {
    let cost = obs.config.tool_for(&a.id).map_or(f64::INFINITY, |t| t.cost);
    if cost <= 0.0 {
        f64::INFINITY
    } else {
        a.weight_receiver / cost
    }
}

fn greedy_pick(obs: &Observation<'_>) -> Option<String> {
    let mut c = audit_candidates(obs);
    c.sort_by(|a, b| {
        value_per_cost(obs, b)
            .partial_cmp(&value_per_cost(obs, a))
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    c.first().map(|a| a.id.clone())
}

impl ReceiverPolicy for ReceiverStrategy {
    fn step(&self, obs: &Observation<'_>) -> Result<ReceiverAction> {
        let pick = if obs.remaining_budget == 0 {
            None
        } else {
            match *self {
                ReceiverStrategy::Trusting | ReceiverStrategy::PriorOnly => None,
                ReceiverStrategy::AuditGreedy => greedy_pick(obs),
                ReceiverStrategy::SpotCheck { n } => {
                    if (obs.transcript.len() as u32) < n {
                        greedy_pick(obs)
                    } else {
                        None
                    }
                }
                ReceiverStrategy::AuditAllRandom => {
                    let mut c = audit_candidates(obs);
                    c.sort_by(|a, b| {
                        let ka = keyed_uniform(obs.seed, &format!("order:{}", a.id));
                        let kb = keyed_uniform(obs.seed, &format!("order:{}", b.id));
                        ka.partial_cmp(&kb).unwrap_or(Ordering::Equal)
                    });
                    c.first().map(|a| a.id.clone())
                }
            }
        };
        Ok(match pick {
            Some(attr) => ReceiverAction::CallTool(attr),
            None => ReceiverAction::Final(informed_estimate(
                obs,
                *self != ReceiverStrategy::PriorOnly,
            )),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fixtures::{tiny_config, tiny_story};
    use crate::config::render_public_spec;
    use std::collections::BTreeMap;

    fn theta(pairs: &[(&str, u8)]) -> ThetaVector {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn act(strategy: &str, t: &ThetaVector) -> Message {
        let cfg = tiny_config();
        let spec = render_public_spec(&cfg, &tiny_story()).unwrap();
        let ctx = SenderContext { config: &cfg, public_spec: &spec, theta: t, seed: 1 };
        strategy.parse::<SenderStrategy>().unwrap().act(&ctx).unwrap()
    }

    #[test]
    fn strategy_specs_parse() {
        assert_eq!("omit-low(3)".parse::<SenderStrategy>().unwrap(), SenderStrategy::OmitLow { threshold: 3 });
        assert_eq!("exaggerate:+2".parse::<SenderStrategy>().unwrap(), SenderStrategy::Exaggerate { k: 2 });
        assert_eq!("spot-check(2)".parse::<ReceiverStrategy>().unwrap(), ReceiverStrategy::SpotCheck { n: 2 });
        assert!("fabricate(0)".parse::<SenderStrategy>().is_err());
        assert!("psychic".parse::<ReceiverStrategy>().is_err());
        for s in ["honest", "omit-low(2)", "exaggerate(1)", "fabricate(3)", "strategic(2)"] {
            assert_eq!(s.parse::<SenderStrategy>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn honest_claims_truth() {
        let t = theta(&[("V1", 3), ("U1", 1)]);
        let m = act("honest", &t);
        assert_eq!(m.claims.len(), 2);
        assert!(m.claims.iter().all(|c| t.get(&c.attr_id) == Some(c.value)));
    }

    #[test]
    fn omit_low_drops_weak_up_attributes() {
        // U1 is UP, V1 is COOP
        let m = act("omit-low(2)", &theta(&[("V1", 0), ("U1", 1)]));
        assert_eq!(m.claims, vec![Claim { attr_id: "V1".into(), value: 0 }]);
        let m = act("omit-low(2)", &theta(&[("V1", 0), ("U1", 2)]));
        assert_eq!(m.claims.len(), 2);
    }

    #[test]
    fn exaggerate_inflates_unverifiable_up_only() {
        let m = act("exaggerate(2)", &theta(&[("V1", 1), ("U1", 3)]));
        assert_eq!(m.claimed("U1"), Some(4));
        assert_eq!(m.claimed("V1"), Some(1));
    }

    #[test]
    fn fabricate_always_lies_on_verifiable() {
        for v in 0..=4 {
            for k in 1..=4 {
                let m = act(&format!("fabricate({k})"), &theta(&[("V1", v), ("U1", 2)]));
                assert_ne!(m.claimed("V1"), Some(v));
                assert_eq!(m.claimed("U1"), Some(2));
            }
        }
    }

    fn observe<'a>(
        cfg: &'a crate::config::GameConfig,
        spec: &'a crate::config::PublicSpec,
        m: &'a Message,
        disclosed: &'a BTreeMap<String, u8>,
        remaining: u32,
    ) -> Observation<'a> {
        Observation {
            config: cfg,
            public_spec: spec,
            message: m,
            transcript: &[],
            remaining_budget: remaining,
            playbook: None,
            disclosed,
            seed: 5,
        }
    }

    #[test]
    fn trusting_adopts_claims_over_prior_default() {
        let cfg = tiny_config();
        let spec = render_public_spec(&cfg, &tiny_story()).unwrap();
        let m = Message { claims: vec![Claim { attr_id: "V1".into(), value: 4 }], statement: String::new() };
        let d = BTreeMap::new();
        let obs = observe(&cfg, &spec, &m, &d, 2);
        let ReceiverAction::Final(est) = ReceiverStrategy::Trusting.step(&obs).unwrap() else { panic!() };
        // U1 prior is a point mass at 2
        assert_eq!(est, theta(&[("V1", 4), ("U1", 2)]));
    }

    #[test]
    fn auditor_checks_claimed_verifiable_then_finalizes() {
        let cfg = tiny_config();
        let spec = render_public_spec(&cfg, &tiny_story()).unwrap();
        let m = Message { claims: vec![Claim { attr_id: "V1".into(), value: 4 }], statement: String::new() };
        let d = BTreeMap::new();
        let obs = observe(&cfg, &spec, &m, &d, 2);
        assert_eq!(ReceiverStrategy::AuditGreedy.step(&obs).unwrap(), ReceiverAction::CallTool("V1".into()));
        let obs = observe(&cfg, &spec, &m, &d, 0);
        assert!(matches!(ReceiverStrategy::AuditGreedy.step(&obs).unwrap(), ReceiverAction::Final(_)));
    }
}
