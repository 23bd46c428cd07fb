use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use mixtalk_core::agents::{EndpointConfig, EndpointGenerator, TextGenerator, Transport};
use mixtalk_core::metrics::{CogencyJudge, ConstantJudge, HeuristicJudge, RemoteJudge};
use mixtalk_core::{Agent, Role};

use crate::http::HttpTransport;
use crate::CliError;

/// Named remote endpoints from an agents file, plus the shared transport.
pub struct Registry {
    endpoints: BTreeMap<String, EndpointConfig>,
    transport: Option<Arc<dyn Transport>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            endpoints: BTreeMap::new(),
            transport: None,
        }
    }

    /// Reads a JSON object mapping agent names to endpoint settings.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::empty()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading agents file {}", path.display()))?;
        let endpoints: BTreeMap<String, EndpointConfig> =
            serde_json::from_str(&text).with_context(|| format!("parsing agents file {}", path.display()))?;
        let transport: Option<Arc<dyn Transport>> = if endpoints.is_empty() {
            None
        } else {
            Some(Arc::new(HttpTransport::new()?))
        };
        Ok(Self { endpoints, transport })
    }

    fn generator(&self, name: &str) -> Option<(EndpointConfig, Arc<dyn TextGenerator>)> {
        let endpoint = self.endpoints.get(name)?.clone();
        let transport = self.transport.clone()?;
        let generator: Arc<dyn TextGenerator> = Arc::new(EndpointGenerator::new(transport, endpoint.clone()));
        Some((endpoint, generator))
    }

    /// Remote agent if the name is registered, otherwise a scripted strategy.
    pub fn agent(&self, spec: &str, role: Role) -> Result<Agent, CliError> {
        if let Some((endpoint, generator)) = self.generator(spec) {
            return Ok(Agent::remote(spec, role, endpoint, generator));
        }
        Agent::scripted(spec, role).map_err(|e| CliError::Usage(format!("{role} `{spec}`: {e}")))
    }

    pub fn agents(&self, specs: &[String], role: Role) -> Result<Vec<Agent>, CliError> {
        if specs.is_empty() {
            return Err(CliError::Usage(format!("at least one {role} is required")));
        }
        let agents = specs
            .iter()
            .map(|s| self.agent(s.trim(), role))
            .collect::<Result<Vec<_>, _>>()?;
        let mut names: Vec<&str> = agents.iter().map(Agent::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Usage(format!("duplicate {role} names")));
        }
        Ok(agents)
    }

    /// `none`, `heuristic`, a fixed number, or a registered endpoint name.
    pub fn judge(&self, spec: &str) -> Result<Option<Box<dyn CogencyJudge>>, CliError> {
        match spec {
            "none" => Ok(None),
            "heuristic" => Ok(Some(Box::new(HeuristicJudge))),
            _ => {
                if let Some((_, generator)) = self.generator(spec) {
                    return Ok(Some(Box::new(RemoteJudge::new(generator))));
                }
                spec.parse::<f64>()
                    .map(|v| Some(Box::new(ConstantJudge(v)) as Box<dyn CogencyJudge>))
                    .map_err(|_| CliError::Usage(format!("unknown judge `{spec}`")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_fallback_and_usage_errors() {
        let reg = Registry::empty();
        assert_eq!(reg.agent("honest", Role::Sender).unwrap().name(), "honest");
        assert!(matches!(reg.agent("oracle-bot", Role::Sender), Err(CliError::Usage(_))));
        let dup = vec!["honest".to_string(), "honest".to_string()];
        assert!(matches!(reg.agents(&dup, Role::Sender), Err(CliError::Usage(_))));
        assert!(reg.judge("none").unwrap().is_none());
        assert!(reg.judge("2.5").unwrap().is_some());
        assert!(reg.judge("mystery").is_err());
    }

    #[test]
    fn agents_file_registers_remote_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agents.json");
        std::fs::write(&path, r#"{"model-a": {"base_url": "http://127.0.0.1:9", "model": "a"}}"#).unwrap();
        let reg = Registry::load(Some(&path)).unwrap();
        let a = reg.agent("model-a", Role::Receiver).unwrap();
        assert!(!a.is_scripted());
        assert!(reg.judge("model-a").unwrap().is_some());
    }
}
