//! Stable seed derivation. Everything random in a run flows from one master
//! seed through these functions, so results never depend on platform hashers.

use sha2::{Digest, Sha256};

/// Stable 64-bit hash of a list of byte strings.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Per-entry episode seed from the master seed, variant and episode index.
pub fn episode_seed(master_seed: u64, env_id: &str, story_id: &str, episode_index: usize) -> u64 {
    stable_hash(&[
        b"episode",
        &master_seed.to_le_bytes(),
        env_id.as_bytes(),
        story_id.as_bytes(),
        &(episode_index as u64).to_le_bytes(),
    ])
}

/// Independent sub-stream of an episode seed (hidden state, tools, agents).
pub fn substream(seed: u64, label: &str) -> u64 {
    stable_hash(&[label.as_bytes(), &seed.to_le_bytes()])
}

/// Deterministic uniform in [0, 1) keyed by a seed and a label.
pub fn keyed_uniform(seed: u64, label: &str) -> f64 {
    (substream(seed, label) >> 11) as f64 / (1u64 << 53) as f64
}
