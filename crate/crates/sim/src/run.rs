//! One seeded run: schedule, inputs, protocol, trace and its verdicts.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use iiab_core::adversary::{schedules, Phased};
use iiab_core::engine::{EngineConfig, OracleMode, TraceEvent};
use iiab_core::model::validate_schedule;
use iiab_core::noeq::{NoEqBackend, SimulatedNoEq};
use iiab_core::protocols::{run_consensus, CommitAdopt, CommitAdoptOutput, ConsensusKind, Grade};
use iiab_core::{Participation, ParticipationSchedule, ProcessorId, Round, Value};

use crate::config::{ExperimentConfig, InputSpec, OraclePolicy, ProtocolSpec, ScheduleSpec, SCHEMA};
use crate::registry;
use crate::trace::{read_facts, render, value_json, TraceError, TraceFacts};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

pub fn build_schedule(spec: &ScheduleSpec, horizon: u32, seed: u64) -> Result<ParticipationSchedule, RunError> {
    let ids = |v: &[u32]| -> BTreeSet<ProcessorId> { v.iter().copied().map(ProcessorId).collect() };
    let err = |e: schedules::ScheduleError| RunError::Schedule(e.to_string());
    match spec {
        ScheduleSpec::Explicit { horizon, rounds } => {
            if rounds.len() != *horizon as usize {
                return Err(RunError::Schedule(format!(
                    "horizon {horizon} but {} rounds listed",
                    rounds.len()
                )));
            }
            let s = ParticipationSchedule::new(
                rounds
                    .iter()
                    .map(|r| Participation {
                        online: ids(&r.online),
                        impersonated: ids(&r.impersonated),
                    })
                    .collect(),
            );
            let v = validate_schedule(&s);
            if !v.is_empty() {
                return Err(RunError::Schedule(format!("{v:?}")));
            }
            Ok(s)
        }
        ScheduleSpec::Constant { online, impersonated } => {
            schedules::constant(ids(online), ids(impersonated), horizon).map_err(err)
        }
        ScheduleSpec::Growing { n, activations } => {
            let mut act = BTreeMap::new();
            for (p, r) in activations {
                let r = Round::new(*r).ok_or_else(|| RunError::Schedule("activation round 0".into()))?;
                act.insert(ProcessorId(*p), r);
            }
            schedules::growing_adversary(*n, &act, horizon).map_err(err)
        }
        ScheduleSpec::StabilizingAt {
            n,
            stable_from,
            impersonated,
            seed: pinned,
        } => schedules::stabilizing_at(schedules::Stabilizing {
            n: *n,
            stable_from: Round::new(*stable_from).ok_or_else(|| RunError::Schedule("stable_from 0".into()))?,
            impersonated: *impersonated,
            horizon,
            seed: pinned.unwrap_or(seed),
        })
        .map_err(err),
        ScheduleSpec::Churn { n, window, seed: pinned } => {
            schedules::churn(*n, *window, horizon, pinned.unwrap_or(seed)).map_err(err)
        }
        ScheduleSpec::FreshChurn { window, seed: pinned } => {
            schedules::fresh_churn(*window, horizon, pinned.unwrap_or(seed)).map_err(err)
        }
    }
}

pub fn build_inputs(spec: &InputSpec, universe: &BTreeSet<ProcessorId>, seed: u64) -> BTreeMap<ProcessorId, Value> {
    match spec {
        InputSpec::Unanimous(v) => universe.iter().map(|p| (*p, Value::from(v.as_str()))).collect(),
        InputSpec::Alternating(vs) => universe
            .iter()
            .map(|p| (*p, Value::from(vs[(p.0 as usize + vs.len() - 1) % vs.len()].as_str())))
            .collect(),
        InputSpec::Random(vs) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x696e_7075);
            universe
                .iter()
                .map(|p| (*p, Value::from(vs.choose(&mut rng).expect("nonempty").as_str())))
                .collect()
        }
    }
}

/// `b = ⌈log2 k⌉ + 1` for `k` processors impersonated from the
/// stabilization round on; `k = 0` counts as 1.
pub fn b_of(k: u32) -> u32 {
    let k = k.max(1);
    (u32::BITS - (k - 1).leading_zeros()) + 1
}

/// Latest admissible decision round of the deterministic protocol:
/// `R + 3b + Σ_{i≤b}(2^i+1) + 4(b+1)`.
pub fn det_liveness_bound(r: u32, b: u32) -> u32 {
    r + 3 * b + (1..=b).map(|i| (1u32 << i) + 1).sum::<u32>() + 4 * (b + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub decided: BTreeMap<u32, bool>,
    /// Global IIAB round of each decision.
    pub decision_round: BTreeMap<u32, u32>,
    pub agreement_ok: bool,
    pub validity_ok: bool,
    /// No processor decided twice.
    pub irrevocable_ok: bool,
    pub rounds_run: u32,
    /// Last decision round, when everyone decided.
    pub completed_at: Option<u32>,
    pub stabilization_round: Option<u32>,
    pub impersonated_after_stabilization: Option<u32>,
    pub b: Option<u32>,
    pub liveness_bound: Option<u32>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn safe(&self) -> bool {
        self.agreement_ok && self.validity_ok && self.irrevocable_ok
    }

    pub fn all_decided(&self) -> bool {
        self.completed_at.is_some()
    }

    pub fn within_bound(&self) -> Option<bool> {
        let bound = self.liveness_bound?;
        Some(self.completed_at.is_some_and(|r| r <= bound))
    }
}

/// The safety verdicts of a consensus or commit-adopt trace, computed from
/// the trace text only.
pub fn judge(protocol: ProtocolSpec, facts: &TraceFacts) -> (BTreeMap<u32, (u32, Value)>, bool, bool) {
    let inputs: BTreeSet<&Value> = facts.inputs.values().collect();
    let unanimous = if inputs.len() == 1 { inputs.into_iter().next() } else { None };
    match protocol {
        ProtocolSpec::Probabilistic | ProtocolSpec::Deterministic => {
            let values: BTreeSet<&Value> = facts.decisions.values().map(|(_, v)| v).collect();
            let agreement = values.len() <= 1;
            let validity = unanimous.is_none_or(|u| values.iter().all(|v| *v == u));
            (facts.decisions.clone(), agreement, validity)
        }
        ProtocolSpec::CommitAdopt => {
            let mut outputs = BTreeMap::new();
            for (p, outs) in &facts.outputs {
                if let Some((r, o)) = outs
                    .iter()
                    .find_map(|(r, m)| CommitAdoptOutput::from_payload(m).map(|o| (*r, o)))
                {
                    outputs.insert(*p, (r, o));
                }
            }
            let committed: BTreeSet<&Value> = outputs
                .values()
                .filter(|(_, o)| o.grade == Grade::Commit)
                .map(|(_, o)| &o.value)
                .collect();
            let agreement = committed.len() <= 1
                && committed
                    .iter()
                    .all(|c| outputs.values().all(|(_, o)| &o.value == *c));
            let validity = unanimous.is_none_or(|u| {
                outputs.values().all(|(_, o)| o.grade == Grade::Commit && &o.value == u)
            });
            let decisions = outputs.into_iter().map(|(p, (r, o))| (p, (r, o.value))).collect();
            (decisions, agreement, validity)
        }
    }
}

pub struct RunRecord {
    pub trace: String,
    pub summary: RunSummary,
}

fn engine_config(cfg: &ExperimentConfig, seed: u64, links: bool) -> EngineConfig {
    EngineConfig {
        rushing: cfg.rushing,
        oracle: match cfg.oracle {
            OraclePolicy::Honest => OracleMode::Honest,
            OraclePolicy::Disabled => OracleMode::Disabled,
            OraclePolicy::AlwaysSucceed => OracleMode::AlwaysSucceed,
            OraclePolicy::AlwaysFail => OracleMode::AlwaysFail,
        },
        record_links: links,
        record_events: true,
        seed,
    }
}

/// Executes `cfg` (simulate or montecarlo) for one seed. Engine aborts are
/// reported in the summary, not as errors.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, links: bool) -> Result<RunRecord, RunError> {
    let spec = cfg.schedule.as_ref().ok_or(crate::config::ConfigError::Missing(cfg.mode, "schedule"))?;
    let protocol = cfg.protocol.ok_or(crate::config::ConfigError::Missing(cfg.mode, "protocol"))?;
    let schedule = build_schedule(spec, cfg.max_rounds, seed)?;
    let universe = schedule.universe();
    let inputs = build_inputs(&cfg.inputs, &universe, seed);
    let config = engine_config(cfg, seed, links);

    let stabilization = match spec {
        ScheduleSpec::StabilizingAt { stable_from, .. } => Some(*stable_from),
        _ => schedule.stabilization_round().map(Round::get),
    };
    let after = stabilization.map(|r| schedule.impersonated_from(Round::at(r)).len() as u32);
    let b = after.map(b_of);
    let bound = match (protocol, stabilization, b) {
        (ProtocolSpec::Deterministic, Some(r), Some(b)) => Some(det_liveness_bound(r, b)),
        _ => None,
    };

    let header = json!({
        "schema": SCHEMA,
        "version": VERSION,
        "seed": seed,
        "links": links,
        "config": cfg,
        "inputs": inputs.iter().map(|(p, v)| (p.0.to_string(), value_json(v))).collect::<serde_json::Map<String, Json>>(),
        "universe": universe.iter().map(|p| p.0).collect::<Vec<_>>(),
        "stabilization_round": stabilization,
        "impersonated_after_stabilization": after,
    });

    let mut noeq = registry::noeq(&cfg.adversary.noeq, seed)?;
    let mut leaders = registry::leaders(&cfg.adversary.leaders, seed)?;
    let (events, rounds_run, error): (Vec<TraceEvent>, u32, Option<String>) = match protocol {
        ProtocolSpec::Probabilistic | ProtocolSpec::Deterministic => {
            let kind = if protocol == ProtocolSpec::Probabilistic {
                ConsensusKind::Probabilistic
            } else {
                ConsensusKind::Deterministic
            };
            let native = registry::native(&cfg.adversary.native, seed)?;
            let mut adversary = Phased::new(kind, noeq, native);
            match run_consensus(schedule, &inputs, kind, cfg.max_rounds, config, &mut adversary, &mut *leaders) {
                Ok(out) => (out.trace, out.rounds_run, None),
                Err(e) => (Vec::new(), 0, Some(e.to_string())),
            }
        }
        ProtocolSpec::CommitAdopt => {
            let mut backend = SimulatedNoEq::new(schedule, config);
            let mut procs: BTreeMap<ProcessorId, CommitAdopt> =
                inputs.iter().map(|(p, v)| (*p, CommitAdopt::new(v.clone()))).collect();
            let mut error = None;
            let mut rounds = 0;
            for _ in 0..2 {
                match backend.run_round(&mut procs, &mut *noeq, &mut *leaders) {
                    Ok(_) => rounds += 2,
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
            (backend.trace().to_vec(), rounds, error)
        }
    };

    let trace = render(&header, &events);
    let facts = read_facts(&trace)?;
    let summary = summarize(seed, protocol, &facts, rounds_run, stabilization, after, b, bound, error);
    Ok(RunRecord { trace, summary })
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    seed: u64,
    protocol: ProtocolSpec,
    facts: &TraceFacts,
    rounds_run: u32,
    stabilization_round: Option<u32>,
    impersonated_after_stabilization: Option<u32>,
    b: Option<u32>,
    liveness_bound: Option<u32>,
    error: Option<String>,
) -> RunSummary {
    let (decisions, agreement_ok, validity_ok) = judge(protocol, facts);
    let decided: BTreeMap<u32, bool> = facts.universe.iter().map(|p| (*p, decisions.contains_key(p))).collect();
    let completed_at = if decided.values().all(|d| *d) {
        decisions.values().map(|(r, _)| *r).max()
    } else {
        None
    };
    RunSummary {
        seed,
        decision_round: decisions.iter().map(|(p, (r, _))| (*p, *r)).collect(),
        decided,
        agreement_ok,
        validity_ok,
        irrevocable_ok: facts.redecided.is_empty(),
        rounds_run,
        completed_at,
        stabilization_round,
        impersonated_after_stabilization,
        b,
        liveness_bound,
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn b_values() {
        assert_eq!([0, 1, 2, 3, 4, 5, 8, 9].map(b_of), [1, 1, 2, 3, 3, 4, 4, 5]);
    }

    #[test]
    fn bound_arithmetic() {
        // b=1: 3 + 3 + 8; b=2: 6 + 3 + 5 + 12.
        assert_eq!(det_liveness_bound(1, 1), 15);
        assert_eq!(det_liveness_bound(12, 2), 38);
    }

    #[test]
    fn alternating_inputs_follow_ids() {
        let u: BTreeSet<_> = (1..=4).map(ProcessorId).collect();
        let i = build_inputs(&InputSpec::Alternating(vec!["a".into(), "b".into()]), &u, 0);
        let got: Vec<_> = i.values().cloned().collect();
        assert_eq!(got, ["a", "b", "a", "b"].map(Value::from));
    }

    #[test]
    fn unanimous_probabilistic_run_decides_at_ten() {
        let c = cfg(r#"{"schema":1,"mode":"simulate","protocol":"probabilistic","inputs":{"unanimous":"v"},
            "schedule":{"constant":{"online":[1,2,3],"impersonated":[3]}},"max_rounds":40}"#);
        let r = run_seed(&c, 7, true).unwrap();
        assert!(r.summary.safe());
        assert_eq!(r.summary.completed_at, Some(10));
        assert!(r.trace.lines().any(|l| l.contains("\"from\"")));
    }

    #[test]
    fn commit_adopt_task_run() {
        let c = cfg(r#"{"schema":1,"mode":"simulate","protocol":"commit_adopt",
            "schedule":{"constant":{"online":[1,2,3],"impersonated":[3]}},
            "adversary":{"noeq":"balancer"},"inputs":{"alternating":["v","w"]},"max_rounds":4}"#);
        let r = run_seed(&c, 1, false).unwrap();
        assert!(r.summary.safe(), "{:?}", r.summary);
        assert_eq!(r.summary.completed_at, Some(4));
    }

    #[test]
    fn runs_are_deterministic() {
        let c = cfg(r#"{"schema":1,"mode":"simulate","protocol":"deterministic",
            "schedule":{"stabilizing_at":{"n":5,"stable_from":6,"impersonated":2}},
            "adversary":{"noeq":"random","native":"random","leaders":"random"},
            "inputs":{"random":["a","b","c"]},"max_rounds":60}"#);
        let a = run_seed(&c, 3, true).unwrap();
        let b = run_seed(&c, 3, true).unwrap();
        assert_eq!(a.trace, b.trace);
        assert!(a.summary.safe());
    }

    #[test]
    fn judge_flags_disagreement() {
        let f = TraceFacts {
            inputs: [(1, Value::from("a")), (2, Value::from("a"))].into(),
            universe: vec![1, 2],
            decisions: [(1, (10, Value::from("a"))), (2, (10, Value::from("b")))].into(),
            ..TraceFacts::default()
        };
        let (_, agreement, validity) = judge(ProtocolSpec::Probabilistic, &f);
        assert!(!agreement && !validity);
    }
}
