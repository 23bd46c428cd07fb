//! Prompt rendering for remote agents. Templates are versioned text assets;
//! the only substitution is of `{PLACEHOLDER}` tokens.

use std::fmt;

use serde_json::json;

use crate::config::{Message, PublicSpec, ThetaVector};
use crate::error::{Error, Result};
use crate::topd::{inject_playbook, Playbook};
use crate::trace::ToolCall;

pub const SENDER_TEMPLATE_V1: &str = include_str!("../../assets/prompts/sender_v1.txt");
pub const RECEIVER_TEMPLATE_V1: &str = include_str!("../../assets/prompts/receiver_v1.txt");
pub const JUDGE_RUBRIC_V1: &str = include_str!("../../assets/prompts/judge_v1.txt");

const SENDER_PLACEHOLDERS: &[&str] = &["{STATEMENT_MAX_TOKENS}", "{MAX_CLAIMS}"];
const RECEIVER_PLACEHOLDERS: &[&str] = &["{BUDGET_B}"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplates {
    pub version: String,
    pub sender: String,
    pub receiver: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            version: "v1".into(),
            sender: SENDER_TEMPLATE_V1.into(),
            receiver: RECEIVER_TEMPLATE_V1.into(),
        }
    }
}

fn require(template: &str, which: &str, placeholders: &[&str]) -> Result<()> {
    for p in placeholders {
        if !template.contains(p) {
            return Err(Error::Template(format!("{which} template lacks {p}")));
        }
    }
    Ok(())
}

/// System text (instructions) and user text (episode context).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\n\n{}", self.system, self.user)
    }
}

impl PromptTemplates {
    pub fn render_sender(&self, spec: &PublicSpec, theta: &ThetaVector) -> Result<Prompt> {
        require(&self.sender, "sender", SENDER_PLACEHOLDERS)?;
        let system = self
            .sender
            .replace("{STATEMENT_MAX_TOKENS}", &spec.statement_max_tokens.to_string())
            .replace("{MAX_CLAIMS}", &spec.max_claims.to_string());
        let user = format!(
            "PUBLIC SPECIFICATION:\n{}\n\nYOUR PRIVATE TRUE VALUES:\n{}\n",
            spec.to_json(),
            serde_json::to_string(theta).expect("theta serializes"),
        );
        Ok(Prompt { system, user })
    }

    pub fn render_receiver(
        &self,
        spec: &PublicSpec,
        message: &Message,
        transcript: &[ToolCall],
        remaining_budget: u32,
        playbook: Option<&Playbook>,
    ) -> Result<Prompt> {
        require(&self.receiver, "receiver", RECEIVER_PLACEHOLDERS)?;
        let mut system = self
            .receiver
            .replace("{BUDGET_B}", &spec.verification_budget.to_string());
        if let Some(pb) = playbook {
            system = inject_playbook(&system, pb, &spec.env_id)?;
        }
        let context = json!({
            "message": message,
            "tool_transcript": transcript,
            "remaining_budget": remaining_budget,
        });
        let user = format!(
            "PUBLIC SPECIFICATION:\n{}\n\nEPISODE STATE:\n{}\n",
            spec.to_json(),
            serde_json::to_string_pretty(&context).expect("context serializes"),
        );
        Ok(Prompt { system, user })
    }
}

pub fn render_sender_prompt(spec: &PublicSpec, theta: &ThetaVector) -> Prompt {
    PromptTemplates::default()
        .render_sender(spec, theta)
        .expect("bundled sender template is complete")
}

pub fn render_receiver_prompt(
    spec: &PublicSpec,
    message: &Message,
    transcript: &[ToolCall],
    playbook: Option<&Playbook>,
) -> Result<Prompt> {
    let cap = playbook.map_or(spec.verification_budget, |p| p.budget_cap.min(spec.verification_budget));
    let remaining = cap.saturating_sub(transcript.len() as u32);
    PromptTemplates::default().render_receiver(spec, message, transcript, remaining, playbook)
}
