//! Line-delimited trace format for evidence chains and run events.
//!
//! Each evidence item is one JSON object per line with fields
//! `{seq, round, tool_id, params, result, confidence?, sources}`.
//! Full run traces additionally interleave event lines:
//! `{event:"round_start"|"round_end", k}` and
//! `{event:"critic", k, f_conf, f_cov, f_con, feedback:[...]}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{EvidenceChain, EvidenceItem, Feedback};

/// Serialize a chain as line-delimited records, one item per line.
pub fn serialize_trace(chain: &EvidenceChain) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in chain.items() {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Parse a chain back from its line-delimited form. Event lines
/// (objects with an `event` field) are skipped, so full run traces
/// parse to the same chain as bare item traces.
pub fn parse_trace(bytes: &[u8]) -> Result<EvidenceChain> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse(format!("trace is not valid utf-8: {e}")))?;
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("trace line {}: {e}", lineno + 1)))?;
        if value.get("event").is_some() {
            continue;
        }
        let item: EvidenceItem = serde_json::from_value(value)
            .map_err(|e| Error::Parse(format!("trace line {}: {e}", lineno + 1)))?;
        item.validate()?;
        items.push(item);
    }
    Ok(EvidenceChain::from_items(items))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    RoundStart { k: u32 },
    RoundEnd { k: u32 },
    Critic {
        k: u32,
        f_conf: bool,
        f_cov: bool,
        f_con: bool,
        feedback: Vec<Feedback>,
    },
}

/// Streams items and events to a writer as they happen.
pub struct TraceWriter<W: Write> {
    sink: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> Self {
        TraceWriter { sink }
    }

    pub fn write_item(&mut self, item: &EvidenceItem) -> Result<()> {
        serde_json::to_writer(&mut self.sink, item)?;
        self.sink.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_event(&mut self, event: &TraceEvent) -> Result<()> {
        serde_json::to_writer(&mut self.sink, event)?;
        self.sink.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}
