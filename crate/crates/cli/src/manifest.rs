use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use mixtalk_core::tournament::EpisodeFailure;
use mixtalk_core::{AgentRef, Environment};
use serde::{Deserialize, Serialize};

/// What a `run` or `replay` did, with enough detail to repeat it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub master_seed: Option<u64>,
    pub regime: Option<String>,
    pub episodes_per_pair: Option<usize>,
    pub jobs: usize,
    /// env_id to config content hash.
    pub configs: BTreeMap<String, String>,
    pub stories: Vec<String>,
    pub agents: Vec<AgentRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playbook: Option<String>,
    pub episodes_written: usize,
    pub failures: Vec<EpisodeFailure>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn start(command: Vec<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            started_unix: now(),
            ..Default::default()
        }
    }

    pub fn record_envs(&mut self, envs: &[Environment]) {
        for e in envs {
            self.configs.insert(e.env_id().to_string(), e.config.content_hash());
            if !self.stories.contains(&e.story.story_id) {
                self.stories.push(e.story.story_id.clone());
            }
        }
        self.stories.sort();
    }

    pub fn finish_and_write(&mut self, path: &Path) -> anyhow::Result<()> {
        self.finished_unix = now();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
