//! Remote tool adapter: forwards a tool call over the chat wire protocol,
//! with tool params embedded in the message content as a structured block.

use serde_json::{json, Value};

use super::{Tool, ToolError, ToolInput, ToolOutput};
use crate::evidence::ToolId;
use crate::remote::{ChatMessage, RemoteChat};

pub struct RemoteTool {
    chat: RemoteChat,
    tool_id: ToolId,
}

impl RemoteTool {
    pub fn new(chat: RemoteChat, tool_id: ToolId) -> Self {
        RemoteTool { chat, tool_id }
    }
}

impl Tool for RemoteTool {
    fn invoke(&self, input: &ToolInput<'_>) -> Result<ToolOutput, ToolError> {
        let payload = json!({
            "tool": self.tool_id,
            "image_ref": input.image_ref,
            "params": input.params,
        });
        let messages = vec![
            ChatMessage::system(format!(
                "You are the {} backend. Reply with a single JSON object \
                 {{\"result\": ..., \"confidence\": number?, \"sources\": [string]?}}.",
                self.tool_id
            )),
            ChatMessage::user(payload.to_string()),
        ];
        let content = self.chat.chat(messages, input.image)?;
        parse_remote_output(self.tool_id, &content)
    }
}

/// Parse a remote backend's reply into a tool output. Confidences reported
/// as percentages are normalized to the unit interval here, at the adapter
/// boundary.
pub fn parse_remote_output(tool_id: ToolId, content: &str) -> Result<ToolOutput, ToolError> {
    let value: Value = serde_json::from_str(content.trim()).map_err(|e| {
        ToolError::Transport(crate::error::TransportError::Malformed(format!(
            "{tool_id} reply is not JSON: {e}"
        )))
    })?;
    let result = value.get("result").cloned().unwrap_or(value.clone());
    let confidence = value.get("confidence").and_then(Value::as_f64).map(|c| {
        if c > 1.0 {
            (c / 100.0).clamp(0.0, 1.0)
        } else {
            c.clamp(0.0, 1.0)
        }
    });
    let sources = value
        .get("sources")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    Ok(ToolOutput {
        result,
        confidence,
        sources,
    })
}
