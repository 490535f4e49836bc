//! JSON-lines trace records.
//!
//! The first line of a trace is a header carrying the version, the seed, the
//! configuration and the inputs; every later line is one engine event.

use std::collections::BTreeMap;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde_json::{json, Map, Value as Json};

use iiab_core::engine::{DeliveryOutcome, TraceEvent};
use iiab_core::model::SignedMessage;
use iiab_core::{Payload, ProcessorId, Round, Value};

pub fn value_json(v: &Value) -> Json {
    Json::String(B64.encode(v.as_bytes()))
}

pub fn value_from_json(j: &Json) -> Option<Value> {
    B64.decode(j.as_str()?).ok().map(Value::new)
}

pub fn payload_json(p: &Payload) -> Json {
    match p {
        Payload::Value(v) => json!({ "value": value_json(v) }),
        Payload::Signed(s) => json!({ "signed": {
            "signer": s.signer.0,
            "round": s.round.get(),
            "content": payload_json(&s.content),
        }}),
        Payload::List(items) => json!({ "list": items.iter().map(payload_json).collect::<Vec<_>>() }),
    }
}

pub fn lambda_json() -> Json {
    json!({ "lambda": true })
}

pub fn payload_from_json(j: &Json) -> Option<Payload> {
    let obj = j.as_object()?;
    if obj.len() != 1 {
        return None;
    }
    let (tag, body) = obj.iter().next()?;
    match tag.as_str() {
        "value" => value_from_json(body).map(Payload::Value),
        "signed" => {
            let s = body.as_object()?;
            let signer = ProcessorId(u32::try_from(s.get("signer")?.as_u64()?).ok()?);
            let round = Round::new(u32::try_from(s.get("round")?.as_u64()?).ok()?)?;
            let content = payload_from_json(s.get("content")?)?;
            Some(Payload::Signed(Arc::new(SignedMessage {
                signer,
                round,
                content,
            })))
        }
        "list" => body
            .as_array()?
            .iter()
            .map(payload_from_json)
            .collect::<Option<Vec<_>>>()
            .map(Payload::List),
        _ => None,
    }
}

pub fn event_json(e: &TraceEvent) -> Json {
    match e {
        TraceEvent::Link {
            round,
            from,
            to,
            payload,
        } => json!({
            "round": round.get(), "from": from.0, "to": to.0, "payload": payload_json(payload),
        }),
        TraceEvent::Output {
            round,
            processor,
            output,
        } => json!({ "round": round.get(), "processor": processor.0, "output": payload_json(output) }),
        TraceEvent::Decision {
            round,
            processor,
            value,
        } => json!({ "round": round.get(), "processor": processor.0, "decision": value_json(value) }),
        TraceEvent::Oracle(d) => {
            let leaders: Map<String, Json> = d
                .leaders
                .iter()
                .map(|(p, l)| (p.0.to_string(), json!(l.0)))
                .collect();
            json!({ "round": d.round.get(), "oracle": { "success": d.success, "leaders": leaders } })
        }
        TraceEvent::SimulatedDelivery {
            round,
            noeq_round,
            receiver,
            subject,
            outcome,
        } => {
            let mut o = json!({
                "round": round.get(), "noeq_round": noeq_round,
                "receiver": receiver.0, "subject": subject.0,
            });
            let (kind, payload) = match outcome {
                DeliveryOutcome::Message(m) => ("msg", Some(payload_json(m))),
                DeliveryOutcome::Lambda => ("lambda", Some(lambda_json())),
                DeliveryOutcome::None => ("none", None),
            };
            o["simulated_delivery"] = json!(kind);
            if let Some(p) = payload {
                o["payload"] = p;
            }
            o
        }
    }
}

/// Serializes a trace: header line then one line per event, each ending
/// in `\n`.
pub fn render(header: &Json, events: &[TraceEvent]) -> String {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&json!({ "header": header })).expect("json"));
    out.push('\n');
    for e in events {
        out.push_str(&serde_json::to_string(&event_json(e)).expect("json"));
        out.push('\n');
    }
    out
}

/// What the safety checks need, read back from trace text alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceFacts {
    pub header: Json,
    pub inputs: BTreeMap<u32, Value>,
    pub universe: Vec<u32>,
    /// First decision per processor.
    pub decisions: BTreeMap<u32, (u32, Value)>,
    /// Processors that decided more than once.
    pub redecided: Vec<u32>,
    /// Every output payload per processor, in trace order.
    pub outputs: BTreeMap<u32, Vec<(u32, Payload)>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("trace has no header")]
    NoHeader,
}

pub fn read_facts(text: &str) -> Result<TraceFacts, TraceError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(TraceError::NoHeader)?;
    let first: Json = serde_json::from_str(first).map_err(|e| TraceError::Line(1, e.to_string()))?;
    let header = first.get("header").cloned().ok_or(TraceError::NoHeader)?;
    let mut facts = TraceFacts::default();
    if let Some(inputs) = header.get("inputs").and_then(Json::as_object) {
        for (k, v) in inputs {
            let p = k.parse().map_err(|_| TraceError::Line(1, format!("bad processor `{k}`")))?;
            let v = value_from_json(v).ok_or_else(|| TraceError::Line(1, "bad input".into()))?;
            facts.inputs.insert(p, v);
        }
    }
    facts.universe = header
        .get("universe")
        .and_then(Json::as_array)
        .map(|a| a.iter().filter_map(|x| x.as_u64().map(|x| x as u32)).collect())
        .unwrap_or_default();
    facts.header = header;
    for (i, line) in lines {
        let bad = |what: &str| TraceError::Line(i + 1, what.into());
        let rec: Json = serde_json::from_str(line).map_err(|e| TraceError::Line(i + 1, e.to_string()))?;
        let round = || rec.get("round").and_then(Json::as_u64).map(|r| r as u32);
        let processor = || rec.get("processor").and_then(Json::as_u64).map(|r| r as u32);
        if let Some(d) = rec.get("decision") {
            let (r, p) = round().zip(processor()).ok_or_else(|| bad("decision without round or processor"))?;
            let v = value_from_json(d).ok_or_else(|| bad("bad decision value"))?;
            match facts.decisions.entry(p) {
                std::collections::btree_map::Entry::Occupied(_) => facts.redecided.push(p),
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((r, v));
                }
            }
        } else if let Some(o) = rec.get("output") {
            let (r, p) = round().zip(processor()).ok_or_else(|| bad("output without round or processor"))?;
            let m = payload_from_json(o).ok_or_else(|| bad("bad output payload"))?;
            facts.outputs.entry(p).or_default().push((r, m));
        }
    }
    Ok(facts)
}
