//! Exhaustive checks and their JSON reports.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use iiab_core::checker::{
    assignments, commit_adopt_sweep, det_instances, example1_dichotomy, exhaustive_commit_adopt,
    exhaustive_det_conciliator, reduction_cross_check, simulation_conformance, sweep_majority_theorems, Behavior,
    EnvelopeExceeded, Report,
};
use iiab_core::noeq::Shape;
use iiab_core::{Participation, ParticipationSchedule, Payload, ProcessorId, Value};

use crate::config::CheckSpec;
use crate::trace::payload_json;

fn values(alphabet: &[String]) -> Vec<Value> {
    alphabet.iter().map(|s| Value::from(s.as_str())).collect()
}

fn letters(alphabet: &[String]) -> Vec<Payload> {
    values(alphabet).into_iter().map(Payload::Value).collect()
}

/// Merges partial reports in input order.
fn merge_all(task: &str, parts: Vec<Result<Report, EnvelopeExceeded>>) -> Result<Report, EnvelopeExceeded> {
    let mut out = Report::new(task);
    for p in parts {
        out = out.merge(p?);
    }
    Ok(out)
}

/// Commit-adopt over constant participation `1..=n` with `impersonated`
/// fixed in both rounds and every input assignment from `alphabet`.
pub fn commit_adopt_fixed(n: u32, impersonated: &[u32], alphabet: &[Value]) -> Result<Report, EnvelopeExceeded> {
    let universe: BTreeSet<ProcessorId> = (1..=n).map(ProcessorId).collect();
    let part = Participation::new(universe.iter().copied(), impersonated.iter().copied().map(ProcessorId));
    let schedule = ParticipationSchedule::constant(part, 2);
    let letters: Vec<Payload> = alphabet.iter().cloned().map(Payload::Value).collect();
    let inputs: Vec<BTreeMap<ProcessorId, Value>> = assignments(&universe, &letters)
        .into_iter()
        .map(|a| a.into_iter().map(|(p, m)| (p, m.as_value().cloned().expect("values"))).collect())
        .collect();
    let parts = inputs
        .par_iter()
        .map(|i| exhaustive_commit_adopt(&schedule, &universe, i, alphabet))
        .collect();
    let mut r = merge_all(&format!("commit-adopt, n={n}, F={impersonated:?}"), parts)?;
    r.assume(format!("constant participation, inputs and injected values from {alphabet:?}"));
    Ok(r)
}

pub fn det_conciliator() -> Result<Report, EnvelopeExceeded> {
    let parts = det_instances().par_iter().map(exhaustive_det_conciliator).collect();
    merge_all("deterministic conciliator", parts)
}

pub fn run_check(spec: &CheckSpec) -> Result<Report, EnvelopeExceeded> {
    match spec {
        CheckSpec::CommitAdopt { n, alphabet } => commit_adopt_sweep(*n, &values(alphabet)),
        CheckSpec::CommitAdoptFixed { n, impersonated, alphabet } => {
            commit_adopt_fixed(*n, impersonated, &values(alphabet))
        }
        CheckSpec::DetConciliator => det_conciliator(),
        CheckSpec::Theorems { max_n, alphabet } => Ok(sweep_majority_theorems(*max_n, &letters(alphabet))),
        CheckSpec::SimulationConformance { alphabet } => simulation_conformance(&letters(alphabet)),
        CheckSpec::ReductionCrossCheck { alphabet } => reduction_cross_check(&letters(alphabet)),
        CheckSpec::Example1 => Ok(example1_dichotomy()),
    }
}

fn ids(s: &BTreeSet<ProcessorId>) -> Json {
    json!(s.iter().map(|p| p.0).collect::<Vec<_>>())
}

fn shape_json(s: &Shape) -> Json {
    match s {
        Shape::Silent => json!("silent"),
        Shape::Uniform(m) => json!({ "uniform": payload_json(m) }),
        Shape::Split(m, to) => json!({ "split": { "payload": payload_json(m), "receivers": ids(to) } }),
        Shape::LambdaOnly(to) => json!({ "lambda_only": ids(to) }),
    }
}

pub fn behavior_json(b: &Behavior) -> Json {
    match b {
        Behavior::NoEq(rounds) => json!({ "noeq": rounds
            .iter()
            .map(|d| d.iter().map(|(p, s)| (p.0.to_string(), shape_json(s))).collect::<serde_json::Map<_, _>>())
            .collect::<Vec<_>>() }),
        Behavior::Iiab(rounds) => json!({ "iiab": rounds
            .iter()
            .map(|d| {
                d.iter()
                    .flat_map(|(from, links)| {
                        links.iter().flat_map(move |(to, ms)| {
                            ms.iter().map(move |m| json!({ "from": from.0, "to": to.0, "payload": payload_json(m) }))
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>() }),
    }
}

fn count(x: u128) -> Json {
    u64::try_from(x).map_or_else(|_| json!(x.to_string()), |x| json!(x))
}

pub fn report_json(r: &Report) -> Json {
    json!({
        "task": r.task,
        "assumptions": r.assumptions,
        "behaviors_checked": count(r.behaviors_checked),
        "properties": r.properties.iter().map(|(k, t)| (k.clone(), json!({
            "held": count(t.held),
            "violated": count(t.violated),
            "not_applicable": count(t.not_applicable),
        }))).collect::<serde_json::Map<_, _>>(),
        "violation_count": count(r.violation_count()),
        "violations": r.violations.iter().map(|v| json!({
            "property": v.property,
            "instance": v.instance,
            "behavior_script": behavior_json(&v.behavior),
            "witness": v.witness,
        })).collect::<Vec<_>>(),
    })
}
