use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::adversary::SelfLeaders;
use crate::engine::EngineConfig;
use crate::model::{Participation, ParticipationSchedule, Payload, ProcessorId, Value};
use crate::noeq::{NoEqAdversaryDecision, NoEqBackend, NoEqContext, NoEqEngine, NoEqInjector};
use crate::protocols::{no_commit, propose_commit, CommitAdopt, CommitAdoptOutput, Grade};

use super::{all_participations, enumerate_noeq_behaviors, Behavior, EnvelopeExceeded, Report, Verdict};

/// Plays one enumerated decision per round.
struct Replay<'a>(&'a [NoEqAdversaryDecision]);

impl NoEqInjector for Replay<'_> {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        self.0[ctx.round.get() as usize - 1].clone()
    }
}

/// Every processor outputs `commit(v)` or `adopt(v)` for one `v` once
/// anyone commits `v`.
pub fn commit_adopt_agreement(outputs: &BTreeMap<ProcessorId, CommitAdoptOutput>) -> bool {
    outputs
        .values()
        .filter(|o| o.grade == Grade::Commit)
        .all(|c| outputs.values().all(|o| o.value == c.value))
}

/// Unanimous input `v` makes everybody commit `v`; not applicable otherwise.
pub fn commit_adopt_validity(
    inputs: &BTreeMap<ProcessorId, Value>,
    outputs: &BTreeMap<ProcessorId, CommitAdoptOutput>,
) -> Verdict {
    let mut values = inputs.values();
    let Some(v) = values.next() else {
        return Verdict::NotApplicable;
    };
    if values.any(|w| w != v) {
        return Verdict::NotApplicable;
    }
    outputs
        .values()
        .all(|o| *o == CommitAdoptOutput::commit(v.clone()))
        .into()
}

/// Runs commit-adopt on the native no-eq engine under every adversary
/// behavior over `schedule` (two rounds). Every processor of `universe`
/// takes part, online or not. Injected round-1 messages range over the
/// values of `alphabet` and the inputs; round-2 messages additionally over
/// `propose-commit` of each of them and `no-commit`.
pub fn exhaustive_commit_adopt(
    schedule: &ParticipationSchedule,
    universe: &BTreeSet<ProcessorId>,
    inputs: &BTreeMap<ProcessorId, Value>,
    alphabet: &[Value],
) -> Result<Report, EnvelopeExceeded> {
    let mut values: Vec<Value> = alphabet.to_vec();
    for v in inputs.values() {
        if !values.contains(v) {
            values.push(v.clone());
        }
    }
    let letters: Vec<Payload> = alphabet.iter().cloned().map(Payload::Value).collect();
    let round1: Vec<Payload> = values.iter().cloned().map(Payload::Value).collect();
    let mut round2: Vec<Payload> = values.iter().map(propose_commit).collect();
    round2.push(no_commit());
    let behaviors = enumerate_noeq_behaviors(schedule, universe, &letters, &[round1, round2])?;

    let instance = format!(
        "{} inputs={:?}",
        describe(schedule),
        inputs.iter().map(|(p, v)| (p.0, v)).collect::<Vec<_>>()
    );
    let mut report = Report::new("commit-adopt");
    for b in &behaviors {
        let outputs = run_once(schedule, universe, inputs, b);
        report.behaviors_checked += 1;
        let witness = || format!("{outputs:?}");
        match &outputs {
            Err(e) => report.record("termination", Verdict::Violated, 1, || {
                (instance.clone(), Behavior::NoEq(b.clone()), e.clone())
            }),
            Ok(outputs) => {
                let complete = outputs.len() == universe.len();
                report.record("termination", complete.into(), 1, || {
                    (instance.clone(), Behavior::NoEq(b.clone()), witness())
                });
                report.record("agreement", commit_adopt_agreement(outputs).into(), 1, || {
                    (instance.clone(), Behavior::NoEq(b.clone()), witness())
                });
                report.record("validity", commit_adopt_validity(inputs, outputs), 1, || {
                    (instance.clone(), Behavior::NoEq(b.clone()), witness())
                });
            }
        }
    }
    Ok(report)
}

fn run_once(
    schedule: &ParticipationSchedule,
    universe: &BTreeSet<ProcessorId>,
    inputs: &BTreeMap<ProcessorId, Value>,
    behavior: &[NoEqAdversaryDecision],
) -> Result<BTreeMap<ProcessorId, CommitAdoptOutput>, String> {
    let config = EngineConfig {
        record_events: false,
        ..EngineConfig::default()
    };
    let mut engine = NoEqEngine::new(schedule.clone(), config).with_observers(universe.iter().copied());
    let mut procs: BTreeMap<ProcessorId, CommitAdopt> = universe
        .iter()
        .map(|p| (*p, CommitAdopt::new(inputs[p].clone())))
        .collect();
    let mut adversary = Replay(behavior);
    let mut outputs = BTreeMap::new();
    for _ in 0..2 {
        let report = engine
            .run_round(&mut procs, &mut adversary, &mut SelfLeaders)
            .map_err(|e| format!("{e}"))?;
        outputs.extend(report.outputs);
    }
    Ok(outputs)
}

pub(super) fn describe(schedule: &ParticipationSchedule) -> String {
    let rounds: Vec<String> = schedule
        .rounds()
        .iter()
        .map(|p| {
            format!(
                "O={:?} F={:?}",
                p.online.iter().map(|q| q.0).collect::<Vec<_>>(),
                p.impersonated.iter().map(|q| q.0).collect::<Vec<_>>()
            )
        })
        .collect();
    rounds.join(" | ")
}

/// [`exhaustive_commit_adopt`] over every two-round schedule of processors
/// `1..=n` in which at most one processor is impersonated per round, and every
/// assignment of inputs from `alphabet`.
pub fn commit_adopt_sweep(n: u32, alphabet: &[Value]) -> Result<Report, EnvelopeExceeded> {
    let universe: BTreeSet<ProcessorId> = (1..=n).map(ProcessorId).collect();
    let parts: Vec<Participation> = all_participations(n)
        .into_iter()
        .filter(|p| p.impersonated.len() <= 1)
        .collect();
    let letters: Vec<Payload> = alphabet.iter().cloned().map(Payload::Value).collect();
    let mut report = Report::new(format!("commit-adopt, n={n}"));
    report.assume(format!(
        "all two-round schedules over {n} processors with |F_r| ≤ 1; inputs and injected values from {:?}",
        alphabet
    ));
    for a in &parts {
        for b in &parts {
            let schedule = ParticipationSchedule::new(vec![a.clone(), b.clone()]);
            for assignment in super::assignments(&universe, &letters) {
                let inputs = assignment
                    .into_iter()
                    .map(|(p, m)| (p, m.as_value().cloned().expect("letters are values")))
                    .collect();
                report = report.merge(exhaustive_commit_adopt(&schedule, &universe, &inputs, alphabet)?);
            }
        }
    }
    Ok(report)
}
