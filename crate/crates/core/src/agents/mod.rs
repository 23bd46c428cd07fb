//! Sender and receiver agents: the role-level protocol, scripted baseline
//! policies, prompt rendering and strict output parsing for remote agents.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{GameConfig, Message, PublicSpec, ThetaVector};
use crate::error::{Error, Result};
use crate::topd::Playbook;
use crate::trace::ToolCall;

pub mod parse;
pub mod prompts;
pub mod remote;
pub mod scripted;

pub use parse::{extract_json_object, parse_receiver_output, parse_sender_output};
pub use prompts::{render_receiver_prompt, render_sender_prompt, Prompt, PromptTemplates};
pub use remote::{remote_generate, EndpointConfig, EndpointGenerator, RateLimiter, RemoteReceiver, RemoteSender, TextGenerator, Transport};
pub use scripted::{ReceiverStrategy, SenderStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Sender,
    Receiver,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Sender => "sender",
            Role::Receiver => "receiver",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentKind {
    Scripted { strategy: String },
    Remote { endpoint: EndpointConfig },
    Custom,
}

/// Serializable description of a named policy bound to a role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRef {
    pub name: String,
    pub role: Role,
    pub kind: AgentKind,
}

/// What a sender sees before writing its single message.
pub struct SenderContext<'a> {
    pub config: &'a GameConfig,
    pub public_spec: &'a PublicSpec,
    pub theta: &'a ThetaVector,
    pub seed: u64,
}

/// Receiver-side input for one step of the verification loop.
pub struct Observation<'a> {
    pub config: &'a GameConfig,
    pub public_spec: &'a PublicSpec,
    pub message: &'a Message,
    pub transcript: &'a [ToolCall],
    pub remaining_budget: u32,
    pub playbook: Option<&'a Playbook>,
    /// True values revealed for free by the disclosure channel.
    pub disclosed: &'a BTreeMap<String, u8>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReceiverAction {
    CallTool(String),
    Final(ThetaVector),
}

pub trait SenderPolicy: Send + Sync {
    fn act(&self, ctx: &SenderContext<'_>) -> Result<Message>;
}

pub trait ReceiverPolicy: Send + Sync {
    fn step(&self, obs: &Observation<'_>) -> Result<ReceiverAction>;
}

#[derive(Clone)]
enum Policy {
    Sender(Arc<dyn SenderPolicy>),
    Receiver(Arc<dyn ReceiverPolicy>),
}

/// A runnable agent: its descriptor plus the policy behind it.
#[derive(Clone)]
pub struct Agent {
    reference: AgentRef,
    policy: Policy,
}

impl fmt::Debug for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Agent").field("reference", &self.reference).finish()
    }
}

impl Agent {
    /// Scripted agent from a strategy spec such as `honest`, `omit-low(2)` or
    /// `audit-greedy`. The spec string doubles as the agent name.
    pub fn scripted(spec: &str, role: Role) -> Result<Agent> {
        let policy = match role {
            Role::Sender => Policy::Sender(Arc::new(spec.parse::<SenderStrategy>()?)),
            Role::Receiver => Policy::Receiver(Arc::new(spec.parse::<ReceiverStrategy>()?)),
        };
        Ok(Agent {
            reference: AgentRef {
                name: spec.to_string(),
                role,
                kind: AgentKind::Scripted {
                    strategy: spec.to_string(),
                },
            },
            policy,
        })
    }

    pub fn remote(name: &str, role: Role, endpoint: EndpointConfig, generator: Arc<dyn TextGenerator>) -> Agent {
        let policy = match role {
            Role::Sender => Policy::Sender(Arc::new(RemoteSender::new(name, generator))),
            Role::Receiver => Policy::Receiver(Arc::new(RemoteReceiver::new(name, generator))),
        };
        Agent {
            reference: AgentRef {
                name: name.to_string(),
                role,
                kind: AgentKind::Remote { endpoint },
            },
            policy,
        }
    }

    pub fn custom_sender(name: &str, policy: Arc<dyn SenderPolicy>) -> Agent {
        Agent {
            reference: AgentRef {
                name: name.to_string(),
                role: Role::Sender,
                kind: AgentKind::Custom,
            },
            policy: Policy::Sender(policy),
        }
    }

    pub fn custom_receiver(name: &str, policy: Arc<dyn ReceiverPolicy>) -> Agent {
        Agent {
            reference: AgentRef {
                name: name.to_string(),
                role: Role::Receiver,
                kind: AgentKind::Custom,
            },
            policy: Policy::Receiver(policy),
        }
    }

    pub fn name(&self) -> &str {
        &self.reference.name
    }

    pub fn role(&self) -> Role {
        self.reference.role
    }

    pub fn reference(&self) -> &AgentRef {
        &self.reference
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self.reference.kind, AgentKind::Scripted { .. })
    }
}

fn wrong_role(agent: &Agent, wanted: Role) -> Error {
    Error::AgentProtocol {
        agent: agent.name().to_string(),
        reason: format!("agent is not a {wanted}"),
    }
}

/// Runs the sender policy and validates its message against the variant.
pub fn sender_act(agent: &Agent, ctx: &SenderContext<'_>) -> Result<Message> {
    let Policy::Sender(policy) = &agent.policy else {
        return Err(wrong_role(agent, Role::Sender));
    };
    let message = policy.act(ctx)?;
    message.validate(ctx.config).map_err(|e| Error::AgentProtocol {
        agent: agent.name().to_string(),
        reason: e.to_string(),
    })?;
    Ok(message)
}

/// One receiver step. A scripted policy asking for a tool with no budget left
/// is reported as a budget violation; remote output is never trusted to obey
/// the budget and is coerced by the engine instead.
pub fn receiver_step(agent: &Agent, obs: &Observation<'_>) -> Result<ReceiverAction> {
    let Policy::Receiver(policy) = &agent.policy else {
        return Err(wrong_role(agent, Role::Receiver));
    };
    let action = policy.step(obs)?;
    if let ReceiverAction::CallTool(attr) = &action {
        if obs.remaining_budget == 0 && agent.is_scripted() {
            return Err(Error::BudgetViolation {
                agent: agent.name().to_string(),
            });
        }
        if obs.config.tool_for(attr).is_none() {
            return Err(Error::UnknownTool(attr.clone()));
        }
    }
    Ok(action)
}
