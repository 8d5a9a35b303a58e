//! Line-delimited JSON event trace.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::frames::{Frame, NodeId};
use crate::time::SimTime;

#[derive(Debug, Serialize)]
pub struct TraceRecord<'a> {
    pub t_ns: u64,
    pub node: NodeId,
    pub event: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<&'a str>,
    #[serde(skip_serializing_if = "<[NodeId]>::is_empty")]
    pub group: &'a [NodeId],
}

pub(crate) struct Tracer<'w> {
    out: Option<&'w mut dyn Write>,
}

impl<'w> Tracer<'w> {
    pub fn new(out: Option<&'w mut dyn Write>) -> Self {
        Tracer { out }
    }

    fn emit(&mut self, rec: &TraceRecord<'_>) -> Result<()> {
        if let Some(out) = self.out.as_mut() {
            serde_json::to_writer(&mut *out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn frame(&mut self, t: SimTime, event: &str, f: &Frame, collided: bool) -> Result<()> {
        if self.out.is_none() {
            return Ok(());
        }
        self.emit(&TraceRecord {
            t_ns: t.as_nanos(),
            node: f.tx,
            event,
            frame: Some(f.kind.name()),
            outcome: Some(if collided { "collided" } else { "ok" }),
            group: &f.group,
        })
    }

    pub fn node_event(&mut self, t: SimTime, node: NodeId, event: &str, outcome: &str) -> Result<()> {
        if self.out.is_none() {
            return Ok(());
        }
        self.emit(&TraceRecord { t_ns: t.as_nanos(), node, event, frame: None, outcome: Some(outcome), group: &[] })
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(out) = self.out.as_mut() {
            out.flush()?;
        }
        Ok(())
    }
}
