//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes and returns JSON strings. The plain Rust functions
//! below the bindings do the work and are what the native tests call.

use std::collections::BTreeMap;

use mixtalk_core::meta::alpha_rank;
use mixtalk_core::prior::PriorSampler;
use mixtalk_core::tournament::{build_schedule, payoff_matrices, Matrix};
use mixtalk_core::{Agent, EpisodeOptions, Environment, GameConfig, PayoffTensor, Regime, Role, StoryLayer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

macro_rules! shipped {
    ($dir:literal: $($name:literal),+ $(,)?) => {
        &[$(($name, include_str!(concat!("../../../configs/", $dir, "/", $name, ".json")))),+]
    };
}

const CONFIGS: &[(&str, &str)] = shipped!("variables":
    "variables_12_v1", "variables_12_v2", "variables_12_v3", "variables_12_v4", "variables_12_v5",
    "variables_24_v1", "variables_24_v2", "variables_24_v3", "variables_24_v4", "variables_24_v5",
);
const STORIES: &[(&str, &str)] = shipped!("stories":
    "story_12_I", "story_12_R", "story_12_U", "story_24_I", "story_24_R", "story_24_U",
);

const MAX_SAMPLES: usize = 200_000;

type Out = Result<String, String>;

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn configs() -> Vec<GameConfig> {
    CONFIGS
        .iter()
        .map(|(_, text)| GameConfig::from_json_str(text).expect("shipped config parses"))
        .collect()
}

fn stories() -> Vec<StoryLayer> {
    STORIES
        .iter()
        .map(|(_, text)| StoryLayer::from_json_str(text).expect("shipped story parses"))
        .collect()
}

fn config(env_id: &str) -> Result<GameConfig, String> {
    configs()
        .into_iter()
        .find(|c| c.env_id == env_id)
        .ok_or_else(|| format!("unknown variant `{env_id}`"))
}

fn environment(env_id: &str, story_id: &str, regime: &str) -> Result<Environment, String> {
    let regime: Regime = regime.parse().map_err(err)?;
    let story = stories()
        .into_iter()
        .find(|s| s.story_id == story_id)
        .ok_or_else(|| format!("unknown story `{story_id}`"))?;
    let cfg = config(env_id)?;
    if !story.fits(&cfg) {
        return Err(format!("story `{story_id}` does not fit `{env_id}`"));
    }
    Environment::new(cfg.with_regime(regime), story).map_err(err)
}

fn split(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn scripted(list: &str, role: Role) -> Result<Vec<Agent>, String> {
    let agents: Vec<Agent> = split(list).into_iter().map(|s| Agent::scripted(s, role)).collect::<Result<_, _>>().map_err(err)?;
    if agents.is_empty() {
        return Err(format!("no {role} strategies given"));
    }
    Ok(agents)
}

#[derive(Serialize)]
struct VariantInfo {
    env_id: String,
    stories: Vec<String>,
    attributes: Vec<String>,
}

/// Variants and the stories that fit each one.
pub fn catalog() -> String {
    let stories = stories();
    let list: Vec<VariantInfo> = configs()
        .iter()
        .map(|c| VariantInfo {
            env_id: c.env_id.clone(),
            stories: stories.iter().filter(|s| s.fits(c)).map(|s| s.story_id.clone()).collect(),
            attributes: c.attributes.iter().map(|a| a.id.clone()).collect(),
        })
        .collect();
    serde_json::to_string(&list).expect("catalog serializes")
}

/// Plays one episode and returns its trace alongside the public attribute table.
pub fn play(env_id: &str, story_id: &str, regime: &str, sender: &str, receiver: &str, seed: u64) -> Out {
    let env = environment(env_id, story_id, regime)?;
    let s = Agent::scripted(sender, Role::Sender).map_err(err)?;
    let r = Agent::scripted(receiver, Role::Receiver).map_err(err)?;
    let trace = env.run(&s, &r, seed, &EpisodeOptions::default()).map_err(err)?;
    let attributes: Vec<_> = env
        .config
        .attributes
        .iter()
        .map(|a| {
            json!({
                "id": a.id,
                "name": env.story.attr_names.get(&a.id),
                "verifiable": a.verifiable,
                "objective": a.sender_objective,
                "tool": env.config.tool_for(&a.id).map(|t| t.kind),
            })
        })
        .collect();
    let p = &trace.payoffs;
    Ok(json!({
        "trace": trace,
        "attributes": attributes,
        "persuasion": p.persuasion,
        "caught": p.caught_lie_perfect,
    })
    .to_string())
}

/// Mean payoff matrices of a scripted round robin over the 12-attribute variants.
pub fn meta_game(senders: &str, receivers: &str, per_variant: usize, seed: u64) -> Out {
    let senders = scripted(senders, Role::Sender)?;
    let receivers = scripted(receivers, Role::Receiver)?;
    let stories = stories();
    let mut envs = Vec::new();
    for c in configs().into_iter().filter(|c| c.attributes.len() == 12) {
        for s in stories.iter().filter(|s| s.fits(&c)) {
            envs.push(Environment::new(c.clone(), s.clone()).map_err(err)?);
        }
    }
    let variants: Vec<_> = envs.iter().map(Environment::variant).collect();
    let schedule = build_schedule(&variants, variants.len() * per_variant.max(1), seed).map_err(err)?;
    let mut traces = Vec::new();
    for entry in &schedule.entries {
        let env = envs
            .iter()
            .find(|e| e.env_id() == entry.env_id && e.story.story_id == entry.story_id)
            .expect("scheduled variant exists");
        let opts = EpisodeOptions {
            episode_id: Some(entry.episode_id.clone()),
            ..Default::default()
        };
        for s in &senders {
            for r in &receivers {
                traces.push(env.run(s, r, entry.seed, &opts).map_err(err)?);
            }
        }
    }
    let tensor = PayoffTensor::from_traces(&traces);
    let (u_s, u_r) = payoff_matrices(&tensor).map_err(err)?;
    Ok(json!({
        "senders": tensor.senders,
        "receivers": tensor.receivers,
        "episodes": traces.len(),
        "u_s": u_s,
        "u_r": u_r,
    })
    .to_string())
}

/// Alpha-rank masses for sender and receiver payoff matrices given as JSON arrays.
pub fn rank(u_s: &str, u_r: &str, alpha: f64, pop: usize) -> Out {
    let u_s: Matrix = serde_json::from_str(u_s).map_err(err)?;
    let u_r: Matrix = serde_json::from_str(u_r).map_err(err)?;
    let result = alpha_rank(&u_s, &u_r, alpha, pop).map_err(err)?;
    serde_json::to_string(&result).map_err(err)
}

/// Empirical marginals and latent correlations of `n` prior draws.
pub fn sample(env_id: &str, n: usize, seed: u64) -> Out {
    let cfg = config(env_id)?;
    let sampler = PriorSampler::new(&cfg.prior).map_err(err)?;
    let n = n.clamp(1, MAX_SAMPLES);
    let ids = sampler.ids().to_vec();
    let k = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![vec![0usize; 5]; k];
    let mut sums = vec![0.0; k];
    let mut cross = vec![vec![0.0; k]; k];
    let (mut attempts, mut violations) = (0usize, 0usize);
    for _ in 0..n {
        let d = sampler.draw(&mut rng).map_err(err)?;
        attempts += d.attempts;
        for (i, id) in ids.iter().enumerate() {
            counts[i][d.theta.get(id).unwrap_or(0) as usize] += 1;
            sums[i] += d.latent[i];
            for j in i..k {
                cross[i][j] += d.latent[i] * d.latent[j];
            }
        }
        for c in &cfg.prior.constraints {
            if d.theta.get(&c.lo) > d.theta.get(&c.hi) {
                violations += 1;
            }
        }
    }
    let nf = n as f64;
    let cov = |i: usize, j: usize| cross[i.min(j)][i.max(j)] / nf - sums[i] * sums[j] / (nf * nf);
    let target = sampler.latent_correlation();
    let pos = |id: &str| ids.iter().position(|x| x == id);
    let pairs: Vec<_> = cfg
        .prior
        .correlations
        .iter()
        .filter_map(|c| Some((c, pos(&c.a)?, pos(&c.b)?)))
        .map(|(c, i, j)| {
            json!({
                "a": c.a,
                "b": c.b,
                "configured": c.rho,
                "target": target[(i, j)],
                "empirical": cov(i, j) / (cov(i, i) * cov(j, j)).sqrt(),
            })
        })
        .collect();
    let marginals: BTreeMap<&str, serde_json::Value> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let empirical: Vec<f64> = counts[i].iter().map(|&c| c as f64 / nf).collect();
            (id.as_str(), json!({ "configured": cfg.prior.marginals.get(id), "empirical": empirical }))
        })
        .collect();
    Ok(json!({
        "samples": n,
        "mean_attempts": attempts as f64 / nf,
        "violations": violations,
        "constraints": cfg.prior.constraints,
        "marginals": marginals,
        "pairs": pairs,
    })
    .to_string())
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = catalog)]
pub fn js_catalog() -> String {
    catalog()
}

#[wasm_bindgen(js_name = playEpisode)]
pub fn js_play(env_id: &str, story_id: &str, regime: &str, sender: &str, receiver: &str, seed: u32) -> Result<String, JsValue> {
    js(play(env_id, story_id, regime, sender, receiver, seed as u64))
}

#[wasm_bindgen(js_name = metaGame)]
pub fn js_meta_game(senders: &str, receivers: &str, per_variant: u32, seed: u32) -> Result<String, JsValue> {
    js(meta_game(senders, receivers, per_variant as usize, seed as u64))
}

#[wasm_bindgen(js_name = alphaRank)]
pub fn js_rank(u_s: &str, u_r: &str, alpha: f64, pop: u32) -> Result<String, JsValue> {
    js(rank(u_s, u_r, alpha, pop as usize))
}

#[wasm_bindgen(js_name = samplePrior)]
pub fn js_sample(env_id: &str, n: u32, seed: u32) -> Result<String, JsValue> {
    js(sample(env_id, n as usize, seed as u64))
}
