use std::path::PathBuf;

use mixtalk_core::config::{load_config_dir, load_story_dir, render_public_spec, DOMAIN_SIZE};
use mixtalk_core::prior::PriorSampler;

fn repo(p: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(p)
}

#[test]
fn every_variant_loads_and_is_covered() {
    let configs = load_config_dir(repo("configs/variables")).unwrap();
    let stories = load_story_dir(repo("configs/stories")).unwrap();
    assert_eq!(configs.len(), 10);
    assert_eq!(stories.len(), 6);
    for c in &configs {
        let ws: f64 = c.attributes.iter().map(|a| a.weight_sender).sum();
        let wr: f64 = c.attributes.iter().map(|a| a.weight_receiver).sum();
        assert!((ws - 1.0).abs() < 1e-3, "{} sender weights sum to {ws}", c.env_id);
        assert!((wr - 1.0).abs() < 1e-3, "{} receiver weights sum to {wr}", c.env_id);
        let fitting: Vec<_> = stories.iter().filter(|s| s.fits(c)).collect();
        assert_eq!(fitting.len(), 3, "{} should pair with three stories", c.env_id);
        for s in fitting {
            let spec = render_public_spec(c, s).unwrap();
            assert_eq!(spec.attributes.len(), c.attributes.len());
        }
        for t in c.effective_tools() {
            assert!(t.cost <= c.max_tool_cost + 1e-12);
        }
    }
}

#[test]
fn sampler_reproduces_marginals_and_constraints() {
    for c in load_config_dir(repo("configs/variables")).unwrap() {
        let sampler = PriorSampler::new(&c.prior).unwrap();
        let n = 20_000;
        let mut counts = vec![[0usize; DOMAIN_SIZE]; sampler.ids().len()];
        for seed in 0..n {
            let theta = sampler.sample(seed).unwrap();
            for k in &c.prior.constraints {
                assert!(theta.get(&k.lo).unwrap() <= theta.get(&k.hi).unwrap());
            }
            for (i, id) in sampler.ids().iter().enumerate() {
                counts[i][theta.get(id).unwrap() as usize] += 1;
            }
        }
        if !c.prior.constraints.is_empty() {
            continue;
        }
        for (i, id) in sampler.ids().iter().enumerate() {
            for (v, &p) in c.prior.marginals[id].iter().enumerate() {
                let freq = counts[i][v] as f64 / n as f64;
                let sd = (p * (1.0 - p) / n as f64).sqrt();
                assert!((freq - p).abs() < 5.0 * sd + 1e-3, "{} {id}={v}: {freq} vs {p}", c.env_id);
            }
        }
    }
}
