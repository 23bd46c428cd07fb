//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mixtalk_core::config::{load_config_dir, load_story_dir, AttributeSpec, Claim, Objective, PriorStructure, ToolKind};
use mixtalk_core::engine::{claim_penalty, cost_ratio, rescore_trace, score_receiver, score_sender};
use mixtalk_core::meta::{alpha_rank, fit_bradley_terry, oracle_policy, tor, Comparison};
use mixtalk_core::metrics::{judge_cogency, parse_score, receiver_metrics, sender_metrics, ConstantJudge};
use mixtalk_core::prior::PriorSampler;
use mixtalk_core::topd::{distill_receiver_playbooks, replay_traces};
use mixtalk_core::trace::read_trace_file;
use mixtalk_core::{
    build_schedule, render_public_spec, run_tournament, Agent, EpisodeOptions, EpisodeTrace, Environment, GameConfig,
    MemorySink, Message, PayoffBreakdown, PayoffTensor, Regime, Role, StoryLayer, ThetaVector,
};
use mixtalk_oracles::{brute_alpha_rank, brute_bt, brute_tor, TinyGame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn configs() -> Vec<GameConfig> {
    load_config_dir(root().join("configs/variables")).unwrap()
}

fn stories() -> Vec<StoryLayer> {
    load_story_dir(root().join("configs/stories")).unwrap()
}

fn environments(regime: Regime) -> Vec<Environment> {
    let stories = stories();
    let mut envs = Vec::new();
    for c in configs() {
        for s in stories.iter().filter(|s| s.fits(&c)) {
            envs.push(Environment::new(c.with_regime(regime), s.clone()).unwrap());
        }
    }
    envs
}

fn agents(specs: &[&str], role: Role) -> Vec<Agent> {
    specs.iter().map(|s| Agent::scripted(s, role).unwrap()).collect()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n.max(1) as f64
}

fn golden_scores() -> Outcome {
    let start = Instant::now();
    let cfg = configs().into_iter().find(|c| c.env_id == "variables_12_v2").unwrap();
    let t = &read_trace_file(root().join("data/golden/ep000003.jsonl")).unwrap()[0];
    let stored = &t.payoffs;
    let score_r = (1.0 - stored.err_ratio) - cfg.tool_scale * stored.cost_ratio;
    check((cfg.tool_scale - 2.0).abs() < 1e-12, || format!("tool_scale {}", cfg.tool_scale))?;
    check((score_r - 0.6927).abs() <= 1e-4, || format!("Score_R from inputs {score_r}"))?;
    check((stored.score_s + stored.claim_penalty - 0.75).abs() <= 1e-4, || "persuasion relation".into())?;

    let r = score_receiver(&t.theta_true, &t.theta_hat, &t.tool_transcript, false, &cfg);
    let s = score_sender(&t.theta_true, &t.theta_hat, &t.message, false, &cfg);
    check((r.score_r - 0.6927).abs() <= 1e-4, || format!("score_receiver gave {}", r.score_r))?;
    check((r.err_ratio - 0.0823).abs() <= 1e-4, || format!("err_ratio {}", r.err_ratio))?;
    check((s.score_s - 0.40).abs() <= 1e-4, || format!("score_sender gave {}", s.score_s))?;
    check((s.persuasion - 0.75).abs() <= 1e-4, || format!("persuasion {}", s.persuasion))?;
    let again = rescore_trace(t, &cfg);
    check(!again.caught_lie_perfect, || "golden trace flagged as caught".into())?;
    within_time(start, Duration::from_secs(1))?;

    let o = Command::new(env!("CARGO_BIN_EXE_mixtalk"))
        .args(["audit", "--traces", "data/golden/ep000003.jsonl"])
        .current_dir(root())
        .output()
        .unwrap();
    check(o.status.code() == Some(0), || format!("audit exited {:?}", o.status.code()))?;
    Ok(format!("Score_R {:.4}, Score_S {:.4}, persuasion {:.4}", r.score_r, s.score_s, s.persuasion))
}

fn cost_formulas() -> Outcome {
    let cfg = configs().into_iter().find(|c| c.env_id == "variables_12_v2").unwrap();
    let t = &read_trace_file(root().join("data/golden/ep000003.jsonl")).unwrap()[0];
    let cr = cost_ratio(&t.tool_transcript, &cfg);
    check((cr - 2.25 / (5.0 * 4.0)).abs() < 1e-9, || format!("cost_ratio {cr}"))?;
    check((cr - 0.1125).abs() < 1e-9, || format!("cost_ratio {cr}"))?;
    let total: f64 = t.message.claims.iter().map(|c| cfg.effective_claim_cost(cfg.attribute(&c.attr_id).unwrap())).sum();
    check((total - 1.2).abs() < 1e-9, || format!("total claim cost {total}"))?;
    let cap = cfg.max_claims as f64 * cfg.max_claim_cost;
    check((cfg.claim_scale - 7.0).abs() < 1e-12 && (cap - 24.0).abs() < 1e-12, || {
        format!("scale {} cap {cap}", cfg.claim_scale)
    })?;
    let pen = claim_penalty(&t.message, &cfg);
    check((pen - 0.35).abs() < 1e-9, || format!("claim_penalty {pen}"))?;
    Ok(format!("cost_ratio {cr}, claim_penalty {pen}"))
}

fn lie_punishment() -> Outcome {
    let envs: Vec<Environment> = environments(Regime::Mixtalk)
        .into_iter()
        .filter(|e| e.config.effective_tools().iter().any(|t| t.kind == ToolKind::Perfect))
        .collect();
    check(!envs.is_empty(), || "no variant has a perfect tool".into())?;
    let sender = Agent::scripted("fabricate(2)", Role::Sender).unwrap();
    let receiver = Agent::scripted("audit-all", Role::Receiver).unwrap();
    let (mut caught, mut violations) = (0, 0);
    for i in 0..1000u64 {
        let env = &envs[i as usize % envs.len()];
        let t = env.run(&sender, &receiver, i, &EpisodeOptions::default()).unwrap();
        let p = &t.payoffs;
        if p.caught_lie_perfect {
            caught += 1;
            if p.persuasion != 0.0 || p.err_ratio != 0.0 || (p.score_s + p.claim_penalty).abs() > 1e-12 {
                violations += 1;
            }
        }
    }
    check(caught > 0, || "no lie was ever caught".into())?;
    check(violations == 0, || format!("{violations} violations among {caught} caught episodes"))?;
    Ok(format!("{caught}/1000 caught, 0 violations"))
}

fn sampler() -> Outcome {
    let start = Instant::now();
    let cfg = configs().into_iter().find(|c| c.env_id == "variables_12_v1").unwrap();
    let n = 100_000;
    let constrained = PriorSampler::new(&cfg.prior).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let ids = constrained.ids().to_vec();
    let pos = |id: &str| ids.iter().position(|x| x == id).unwrap();
    let mut violations = 0;
    let mut kept = vec![[0usize; 5]; ids.len()];
    for _ in 0..n {
        let d = constrained.draw(&mut rng).unwrap();
        for (i, id) in ids.iter().enumerate() {
            kept[i][d.theta.get(id).unwrap() as usize] += 1;
        }
        for k in &cfg.prior.constraints {
            if d.theta.get(&k.lo).unwrap() > d.theta.get(&k.hi).unwrap() {
                violations += 1;
            }
        }
    }
    check(violations == 0, || format!("{violations} constraint violations"))?;
    let mut worst_marginal = 0.0f64;
    for (i, id) in ids.iter().enumerate() {
        for (v, &p) in cfg.prior.marginals[id].iter().enumerate() {
            worst_marginal = worst_marginal.max((kept[i][v] as f64 / n as f64 - p).abs());
        }
    }
    check(worst_marginal <= 0.01, || format!("marginal off by {worst_marginal}"))?;

    // latent correlations are checked before rejection
    let free = PriorSampler::new(&PriorStructure { constraints: vec![], ..cfg.prior.clone() }).unwrap();
    let k = ids.len();
    let mut sums = vec![0.0; k];
    let mut cross = vec![vec![0.0; k]; k];
    for _ in 0..n {
        let d = free.draw(&mut rng).unwrap();
        for i in 0..k {
            sums[i] += d.latent[i];
            for j in 0..k {
                cross[i][j] += d.latent[i] * d.latent[j];
            }
        }
    }
    let nf = n as f64;
    let corr = |i: usize, j: usize| {
        let cov = cross[i][j] / nf - sums[i] / nf * sums[j] / nf;
        let var = |a: usize| cross[a][a] / nf - (sums[a] / nf).powi(2);
        cov / (var(i) * var(j)).sqrt()
    };
    let target = free.latent_correlation();
    let mut worst_corr = 0.0f64;
    for c in &cfg.prior.correlations {
        let (i, j) = (pos(&c.a), pos(&c.b));
        worst_corr = worst_corr.max((corr(i, j) - c.rho).abs());
        worst_corr = worst_corr.max((corr(i, j) - target[(i, j)]).abs());
    }
    check(worst_corr <= 0.05, || format!("latent correlation off by {worst_corr}"))?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("0 violations, marginal error {worst_marginal:.4}, correlation error {worst_corr:.4}"))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn sample_comparisons(rng: &mut ChaCha8Rng, strengths: &[f64], n: usize) -> Vec<Comparison> {
    let k = strengths.len();
    (0..n)
        .map(|_| {
            let i = rng.gen_range(0..k);
            let mut j = rng.gen_range(0..k - 1);
            if j >= i {
                j += 1;
            }
            let p = strengths[i] / (strengths[i] + strengths[j]);
            let (w, l) = if rng.gen::<f64>() < p { (i, j) } else { (j, i) };
            Comparison { winner: format!("a{w}"), loser: format!("a{l}"), weight: 1.0 }
        })
        .collect()
}

fn as_indices(c: &[Comparison]) -> Vec<(usize, usize, f64)> {
    let idx = |s: &str| s[1..].parse::<usize>().unwrap();
    let mut totals = BTreeMap::new();
    for c in c {
        *totals.entry((idx(&c.winner), idx(&c.loser))).or_insert(0.0) += c.weight;
    }
    totals.into_iter().map(|((w, l), k)| (w, l, k)).collect()
}

fn ranking_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (ns, nr, ne) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=4));
        let mut t = PayoffTensor::new(names("s", ns), names("r", nr), names("e", ne));
        for s in 0..ns {
            for r in 0..nr {
                for e in 0..ne {
                    let a = rng.gen_range(0..5) as f64 / 4.0;
                    let b = rng.gen_range(0..5) as f64 / 4.0;
                    t.set(s, r, e, a, b);
                }
            }
        }
        let rv = (0..nr)
            .map(|r| (0..ns).map(|s| (0..ne).map(|e| t.u_r(s, r, e).unwrap()).collect()).collect())
            .collect();
        let game = TinyGame { u_s: vec![], u_r: vec![], per_episode: Some(rv) };
        for r in 0..nr {
            let (a, b) = (tor(&t, &t.receivers[r], Role::Receiver).unwrap(), brute_tor(&game, r));
            check(a == b, || format!("tor {a} vs enumeration {b}"))?;
        }
    }

    let mut worst = 0.0f64;
    for case in 0..200 {
        let (ns, nr) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let (alpha, pop) = if case % 2 == 0 { (rng.gen_range(0.1..5.0), rng.gen_range(2..50)) } else { (10.0, 10) };
        let m = |rng: &mut ChaCha8Rng| (0..ns).map(|_| (0..nr).map(|_| rng.gen::<f64>()).collect()).collect();
        let g = TinyGame { u_s: m(&mut rng), u_r: m(&mut rng), per_episode: None };
        let fast = alpha_rank(&g.u_s, &g.u_r, alpha, pop).unwrap();
        let (bs, br) = brute_alpha_rank(&g, alpha, pop);
        for (a, b) in fast.sender_masses.iter().zip(&bs).chain(fast.receiver_masses.iter().zip(&br)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst < 1e-9, || format!("alpha-rank deviation {worst:e}"))?;
    let u_s = vec![vec![0.20, 0.15], vec![0.05, 0.0]];
    let u_r = vec![vec![0.20, 0.05], vec![0.15, 0.0]];
    let dominant = alpha_rank(&u_s, &u_r, 50.0, 50).unwrap();
    check(dominant.profile_masses[0][0] > 0.99, || "dominant profile mass".into())?;
    let flat = alpha_rank(&u_s, &u_r, 1e-9, 50).unwrap();
    check(flat.profile_masses.iter().flatten().all(|m| (m - 0.25).abs() < 1e-6), || "alpha -> 0 not uniform".into())?;

    let planted = [1.0, 0.5, 0.25];
    let comps = sample_comparisons(&mut rng, &planted, 10_000);
    let fit = fit_bradley_terry(&comps).unwrap();
    check(fit.ratings[0] > fit.ratings[1] && fit.ratings[1] > fit.ratings[2], || "planted order lost".into())?;
    let res = 0.01;
    let grid = brute_bt(3, &as_indices(&comps), res, 3.0);
    for (a, b) in fit.log_ratings.iter().zip(&grid) {
        check((a - b).abs() <= res, || format!("log-rating {a} vs grid {b}"))?;
    }
    within_time(start, Duration::from_secs(120))?;
    Ok(format!("alpha-rank max deviation {worst:.1e}"))
}

fn uniform_config(n: usize) -> GameConfig {
    let mut cfg = configs().into_iter().next().unwrap();
    cfg.attributes = (0..n)
        .map(|i| AttributeSpec {
            id: format!("A{i}"),
            verifiable: i % 2 == 0,
            domain_lo: 0,
            domain_hi: 4,
            sender_objective: Objective::Up,
            weight_sender: 1.0 / n as f64,
            weight_receiver: 1.0 / n as f64,
            claim_cost: 0.1,
            name: None,
            levels: None,
        })
        .collect();
    cfg.tools.clear();
    cfg.prior = PriorStructure {
        marginals: (0..n).map(|i| (format!("A{i}"), vec![0.2; 5])).collect(),
        correlations: vec![],
        constraints: vec![],
    };
    cfg
}

fn hand_trace(cfg: &GameConfig, truth: &[u8], claims: &[(usize, u8)], hat: &[u8]) -> EpisodeTrace {
    let vec = |v: &[u8]| ThetaVector(cfg.attributes.iter().zip(v).map(|(a, x)| (a.id.clone(), *x)).collect());
    EpisodeTrace {
        episode_id: "hand".into(),
        env_id: cfg.env_id.clone(),
        story_schema_id: "hand".into(),
        model_sender: "S".into(),
        model_receiver: "R".into(),
        seed: None,
        regime: cfg.regime,
        message: Message {
            claims: claims.iter().map(|(i, v)| Claim { attr_id: format!("A{i}"), value: *v }).collect(),
            statement: String::new(),
        },
        tool_transcript: vec![],
        theta_true: vec(truth),
        theta_hat: vec(hat),
        payoffs: PayoffBreakdown {
            score_r: 0.0,
            score_s: 0.0,
            err_ratio: 0.0,
            cost_ratio: 0.0,
            claim_penalty: 0.0,
            persuasion: 0.0,
            caught_lie_perfect: false,
        },
    }
}

fn behavior_metrics() -> Outcome {
    let cfg = uniform_config(12);
    let truth = [1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1, 2];
    let all: Vec<(usize, u8)> = truth.iter().copied().enumerate().collect();
    let m = sender_metrics(&hand_trace(&cfg, &truth, &all, &truth), &cfg);
    check(m.omission == 0.0 && m.fabrication == 0.0 && m.exaggeration == 0.0, || format!("honest: {m:?}"))?;
    let half: Vec<(usize, u8)> = all[..6].to_vec();
    let m = sender_metrics(&hand_trace(&cfg, &truth, &half, &truth), &cfg);
    check((m.omission - 0.5).abs() < 1e-12, || format!("omission {}", m.omission))?;

    let mut two = uniform_config(2);
    two.attributes[0].weight_sender = 0.1;
    two.attributes[1].weight_sender = 0.9;
    let m = sender_metrics(&hand_trace(&two, &[0, 1], &[(0, 4)], &[0, 1]), &two);
    check((m.fabrication - 0.1).abs() < 1e-12, || format!("fabrication {}", m.fabrication))?;

    let two = uniform_config(2);
    let r = receiver_metrics(&hand_trace(&two, &[3, 1], &[(0, 3), (1, 1)], &[3, 1]), &two);
    check(r.skepticism == 0.0 && r.paranoia == 0.0, || format!("trusting true claims: {r:?}"))?;
    check((r.judgment - 1.0).abs() < 1e-12, || format!("judgment {}", r.judgment))?;
    let mut ten = uniform_config(10);
    for a in &mut ten.attributes {
        a.weight_receiver = 0.1;
    }
    let mut t = hand_trace(&ten, &[0; 10], &[], &[2; 10]);
    t.theta_hat.set("A0", 1);
    let r = receiver_metrics(&t, &ten);
    check((r.pessimism - 0.1).abs() < 1e-12, || format!("pessimism {}", r.pessimism))?;

    let spec = render_public_spec(&configs()[0], &stories().into_iter().find(|s| s.fits(&configs()[0])).unwrap()).unwrap();
    let (msg, theta) = (Message::default(), ThetaVector::default());
    check(judge_cogency(Some(&ConstantJudge(3.0)), &msg, &theta, &spec) == 3.0, || "constant judge".into())?;
    check(judge_cogency(Some(&ConstantJudge(9.0)), &msg, &theta, &spec) == 5.0, || "judge clamp".into())?;
    check(parse_score("4.5") == Some(4.5), || "parse 4.5".into())?;

    let envs = environments(Regime::Mixtalk);
    let variants: Vec<_> = envs.iter().map(Environment::variant).collect();
    let senders = agents(
        &["honest", "omit-low(2)", "exaggerate(1)", "exaggerate(3)", "fabricate(2)", "fabricate(4)", "strategic(2)"],
        Role::Sender,
    );
    let receivers = agents(
        &["trusting", "prior-only", "audit-greedy", "audit-all-random", "spot-check(1)", "spot-check(3)"],
        Role::Receiver,
    );
    let schedule = build_schedule(&variants, variants.len() * 4, 17).unwrap();
    let sink = MemorySink::new();
    run_tournament(&envs, &schedule, &senders, &receivers, &sink, 4).unwrap();
    let traces = sink.into_traces();
    check(traces.len() >= 5000, || format!("only {} episodes", traces.len()))?;
    let by_id: BTreeMap<&str, &GameConfig> = envs.iter().map(|e| (e.env_id(), &e.config)).collect();
    let (mut paranoid, mut fabricating) = (0, 0);
    for t in &traces {
        let cfg = by_id[t.env_id.as_str()];
        let r = receiver_metrics(t, cfg);
        if r.paranoia > r.skepticism + 1e-12 {
            paranoid += 1;
        }
        if t.model_sender == "honest" && sender_metrics(t, cfg).fabrication != 0.0 {
            fabricating += 1;
        }
    }
    check(paranoid == 0, || format!("{paranoid} traces with paranoia > skepticism"))?;
    check(fabricating == 0, || format!("{fabricating} honest traces with fabrication"))?;
    Ok(format!("hand examples exact, {} tournament traces clean", traces.len()))
}

fn regime_direction() -> Outcome {
    let senders = agents(&["exaggerate(2)", "fabricate(2)", "strategic(2)"], Role::Sender);
    let trusting = agents(&["trusting"], Role::Receiver);
    let mut lying = Vec::new();
    let mut judgment = Vec::new();
    for regime in [Regime::Cheaptalk, Regime::Mixtalk, Regime::Disclosure] {
        let envs = environments(regime);
        let variants: Vec<_> = envs.iter().map(Environment::variant).collect();
        let schedule = build_schedule(&variants, variants.len() * 12, 23).unwrap();
        let sink = MemorySink::new();
        run_tournament(&envs, &schedule, &senders, &trusting, &sink, 4).unwrap();
        let traces = sink.into_traces();
        check(traces.len() >= 1000, || format!("{} episodes under {regime:?}", traces.len()))?;
        let by_id: BTreeMap<&str, &GameConfig> = envs.iter().map(|e| (e.env_id(), &e.config)).collect();
        lying.push(mean(traces.iter().map(|t| {
            let m = sender_metrics(t, by_id[t.env_id.as_str()]);
            m.fabrication + m.exaggeration
        })));
        judgment.push(mean(traces.iter().map(|t| receiver_metrics(t, by_id[t.env_id.as_str()]).judgment)));
    }
    check(lying[0] >= lying[1] && lying[1] >= lying[2], || format!("misreporting {lying:?}"))?;
    check(judgment[2] >= judgment[1] && judgment[1] >= judgment[0], || format!("judgment {judgment:?}"))?;
    Ok(format!(
        "misreporting {:.4} >= {:.4} >= {:.4}; judgment {:.4} <= {:.4} <= {:.4}",
        lying[0], lying[1], lying[2], judgment[0], judgment[1], judgment[2]
    ))
}

fn topd_efficacy() -> Outcome {
    let configs = configs();
    let envs = environments(Regime::Mixtalk);
    let variants: Vec<_> = envs.iter().map(Environment::variant).collect();
    let schedule = build_schedule(&variants, variants.len() * 10, 7).unwrap();
    let senders = agents(&["honest", "omit-low(2)", "exaggerate(2)", "fabricate(2)", "strategic(2)"], Role::Sender);
    let receivers = agents(&["audit-all-random", "spot-check(1)"], Role::Receiver);
    let sink = MemorySink::new();
    run_tournament(&envs, &schedule, &senders, &receivers, &sink, 4).unwrap();
    let traces = sink.into_traces();
    let oracle = oracle_policy(&PayoffTensor::from_traces(&traces), Role::Receiver);
    let playbooks = distill_receiver_playbooks(&traces, &oracle, &configs, 0.5).unwrap();

    let base: Vec<EpisodeTrace> = traces.iter().filter(|t| t.model_receiver == "audit-all-random").cloned().collect();
    check(base.len() >= 1000, || format!("only {} episodes to replay", base.len()))?;
    let guided = replay_traces(&base, &envs, &receivers[0], &playbooks, 4).unwrap();
    let by_id: BTreeMap<&str, &GameConfig> = configs.iter().map(|c| (c.env_id.as_str(), c)).collect();
    let cost = |t: &EpisodeTrace| t.tool_transcript.iter().map(|c| c.cost).sum::<f64>();
    let judgment = |t: &EpisodeTrace| receiver_metrics(t, by_id[t.env_id.as_str()]).judgment;
    let (c0, c1) = (mean(base.iter().map(cost)), mean(guided.iter().map(cost)));
    let (j0, j1) = (mean(base.iter().map(judgment)), mean(guided.iter().map(judgment)));
    check(base.iter().zip(&guided).all(|(a, b)| a.message == b.message), || "replay changed a message".into())?;
    check(guided.iter().all(|t| t.tool_transcript.len() as u32 <= playbooks[&t.env_id].budget_cap), || {
        "playbook cap exceeded".into()
    })?;
    check(c1 <= 0.9 * c0, || format!("cost {c0:.4} -> {c1:.4}"))?;
    check(j0 - j1 <= 0.02, || format!("judgment {j0:.4} -> {j1:.4}"))?;
    Ok(format!("{} episodes: cost {c0:.4} -> {c1:.4}, judgment {j0:.4} -> {j1:.4}", base.len()))
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_mixtalk");
    let mut reports = Vec::new();
    let mut tensors = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let report = tmp.path().join(format!("{name}-report"));
        let o = Command::new(bin)
            .args(["run", "--senders", "honest,fabricate(2),strategic(2)", "--receivers", "trusting,audit-greedy,spot-check(1)"])
            .args(["--episodes", "30", "--seed", "99", "--jobs", "4", "--out"])
            .arg(&out)
            .current_dir(root())
            .output()
            .unwrap();
        check(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        let o = Command::new(bin)
            .args(["rank", "--traces"])
            .arg(&out)
            .arg("--out")
            .arg(&report)
            .current_dir(root())
            .output()
            .unwrap();
        check(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        let traces = mixtalk_core::trace::read_trace_dir(out.join("traces")).unwrap();
        tensors.push(PayoffTensor::from_traces(&traces));
        reports.push((read_dir_bytes(&out.join("traces")), read_dir_bytes(&report)));
    }
    check(tensors[0] == tensors[1], || "payoff tensors differ".into())?;
    check(reports[0].0 == reports[1].0, || "trace files differ".into())?;
    check(reports[0].1 == reports[1].1, || "report files differ".into())?;
    Ok(format!("{} trace files and {} report files identical", reports[0].0.len(), reports[0].1.len()))
}

fn schedule_fidelity() -> Outcome {
    let envs: Vec<Environment> = environments(Regime::Mixtalk).into_iter().filter(|e| e.config.attributes.len() == 12).collect();
    let variants: Vec<_> = envs.iter().map(Environment::variant).collect();
    check(variants.len() == 15, || format!("{} variants", variants.len()))?;
    let schedule = build_schedule(&variants, 90, 3).unwrap();
    let counts = schedule.per_variant_counts();
    check(counts.len() == 15 && counts.values().all(|&n| n == 6), || format!("{counts:?}"))?;

    let senders = agents(&["honest", "fabricate(2)"], Role::Sender);
    let receivers = agents(&["trusting", "spot-check(1)"], Role::Receiver);
    let sink = MemorySink::new();
    run_tournament(&envs, &schedule, &senders, &receivers, &sink, 4).unwrap();
    let mut by_pair: BTreeMap<(String, String), Vec<(String, Option<u64>)>> = BTreeMap::new();
    for t in sink.into_traces() {
        by_pair.entry((t.model_sender, t.model_receiver)).or_default().push((t.env_id, t.seed));
    }
    let mut expected: Vec<(String, Option<u64>)> = schedule.entries.iter().map(|e| (e.env_id.clone(), Some(e.seed))).collect();
    expected.sort();
    check(by_pair.len() == 4, || format!("{} pairings", by_pair.len()))?;
    for (pair, mut got) in by_pair {
        got.sort();
        check(got == expected, || format!("pairing {pair:?} ran a different episode set"))?;
    }
    Ok("15 variants x 6 episodes, 4 pairings on the same set".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("golden trace", golden_scores),
        ("cost formulas", cost_formulas),
        ("lie punishment", lie_punishment),
        ("prior sampler", sampler),
        ("ranking oracles", ranking_oracles),
        ("behavior metrics", behavior_metrics),
        ("regime direction", regime_direction),
        ("playbook efficacy", topd_efficacy),
        ("reproducibility", reproducibility),
        ("schedule fidelity", schedule_fidelity),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({took:.2?})", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why} ({took:.2?})", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
