//! Strict parsing of remote agent completions.

use std::collections::BTreeSet;

use serde_json::Value;

use crate::config::{Claim, GameConfig, Message, ThetaVector, DOMAIN_HI};
use crate::error::{Error, Result};

use super::ReceiverAction;

/// Returns the first balanced `{...}` object in `text`, ignoring braces that
/// appear inside JSON strings. Surrounding prose and code fences are skipped.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in text[start..].char_indices() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn object(text: &str) -> Result<serde_json::Map<String, Value>> {
    let raw = extract_json_object(text).ok_or_else(|| Error::Parse("no JSON object found".into()))?;
    match serde_json::from_str::<Value>(raw).map_err(|e| Error::Parse(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Parse("expected a JSON object".into())),
    }
}

fn domain_value(attr_id: &str, v: &Value) -> Result<u8> {
    let n = v
        .as_i64()
        .ok_or_else(|| Error::Parse(format!("value for `{attr_id}` is not an integer")))?;
    if !(0..=DOMAIN_HI as i64).contains(&n) {
        return Err(Error::OutOfDomainValue {
            attr_id: attr_id.to_string(),
            value: n,
        });
    }
    Ok(n as u8)
}

pub fn parse_sender_output(text: &str, max_claims: usize) -> Result<Message> {
    let obj = object(text)?;
    let claims_val = obj
        .get("claims")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("`claims` must be a list".into()))?;
    if claims_val.len() > max_claims {
        return Err(Error::TooManyClaims {
            count: claims_val.len(),
            max: max_claims,
        });
    }
    let mut seen = BTreeSet::new();
    let mut claims = Vec::with_capacity(claims_val.len());
    for c in claims_val {
        let attr_id = c
            .get("attr_id")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("claim without string `attr_id`".into()))?;
        let value = domain_value(
            attr_id,
            c.get("value")
                .ok_or_else(|| Error::Parse(format!("claim `{attr_id}` has no value")))?,
        )?;
        if !seen.insert(attr_id.to_string()) {
            return Err(Error::DuplicateClaim(attr_id.to_string()));
        }
        claims.push(Claim {
            attr_id: attr_id.to_string(),
            value,
        });
    }
    let statement = match obj.get("statement") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::Parse("`statement` must be a string".into())),
    };
    Ok(Message { claims, statement })
}

pub fn parse_receiver_output(text: &str, config: &GameConfig) -> Result<ReceiverAction> {
    let obj = object(text)?;
    match obj.get("action").and_then(Value::as_str) {
        Some("CALL_TOOL") => {
            let attr = obj
                .get("tool")
                .and_then(|t| t.get("attr_id"))
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse("CALL_TOOL without tool.attr_id".into()))?;
            if config.tool_for(attr).is_none() {
                return Err(Error::UnknownTool(attr.to_string()));
            }
            Ok(ReceiverAction::CallTool(attr.to_string()))
        }
        Some("FINAL") => {
            let est = obj
                .get("estimate")
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Parse("FINAL without estimate object".into()))?;
            let mut theta = ThetaVector::default();
            for id in config.ids() {
                let v = est.get(id).ok_or_else(|| Error::IncompleteEstimate(id.to_string()))?;
                theta.set(id, domain_value(id, v)?);
            }
            Ok(ReceiverAction::Final(theta))
        }
        Some(other) => Err(Error::Parse(format!("unknown action `{other}`"))),
        None => Err(Error::Parse("missing `action`".into())),
    }
}
