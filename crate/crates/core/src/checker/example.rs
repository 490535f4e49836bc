use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::adversary::{EquivocatorSplit, SelfLeaders};
use crate::engine::{EngineConfig, IiabEngine, Process, ProtocolError};
use crate::model::{majority_message, IiabView, Participation, ParticipationSchedule, Payload, ProcessorId, Round};
use crate::noeq::{simulate_noeq_round, Echo, FixedShapes, NoEqBackend, NoEqEngine, SimulatedNoEq};

use super::{all_decisions, check_thm2, Behavior, Report};

/// Broadcasts one payload and keeps the last view.
struct Broadcaster(Payload, Option<IiabView>);

impl Process for Broadcaster {
    type Output = core::convert::Infallible;

    fn send(&mut self, _: Round) -> Result<Vec<Payload>, ProtocolError> {
        Ok(vec![self.0.clone()])
    }

    fn receive(&mut self, _: Round, view: &IiabView, _: Option<ProcessorId>) -> Result<Option<Self::Output>, ProtocolError> {
        self.1 = Some(view.clone());
        Ok(None)
    }
}

fn run_backend<B: NoEqBackend>(
    backend: &mut B,
    payloads: &BTreeMap<ProcessorId, Payload>,
    shapes: &crate::noeq::NoEqAdversaryDecision,
) -> BTreeMap<ProcessorId, crate::model::NoEqView> {
    let mut echoes: BTreeMap<ProcessorId, Echo> = payloads.iter().map(|(p, m)| (*p, Echo::new(m.clone()))).collect();
    backend
        .run_round(&mut echoes, &mut FixedShapes(shapes.clone()), &mut SelfLeaders)
        .expect("enumerated shapes are valid")
        .views
}

/// The equivocation scenario with `p1` impersonated, `p2` broadcasting `v`
/// and `p3` broadcasting `v'`. On the raw IIAB engine the split equivocator
/// makes `p2` see `v` and `p3` see `v'` from strict majorities. On the
/// native no-eq engine and on the simulated one, no shape of `p1` makes two
/// different messages reach strict majorities, and neither does the split
/// equivocator played directly against the simulation.
pub fn example1_dichotomy() -> Report {
    let p = ProcessorId;
    let v = Payload::value("v");
    let w = Payload::value("v'");
    let mut report = Report::new("equivocation dichotomy");
    report.assume("n=3, p1 impersonated, p2 broadcasts v, p3 broadcasts v'");
    let part = Participation::new([p(1), p(2), p(3)], [p(1)]);
    let schedule = ParticipationSchedule::constant(part.clone(), 1);
    let payloads: BTreeMap<ProcessorId, Payload> = [(p(1), Payload::value("x")), (p(2), v.clone()), (p(3), w.clone())].into();
    let config = EngineConfig {
        record_events: false,
        ..EngineConfig::default()
    };

    let mut engine = IiabEngine::new(schedule.clone(), config);
    let mut procs: BTreeMap<ProcessorId, Broadcaster> =
        payloads.iter().map(|(q, m)| (*q, Broadcaster(m.clone(), None))).collect();
    engine
        .run_round(&mut procs, &mut EquivocatorSplit::default(), &mut SelfLeaders)
        .expect("the equivocator is admissible");
    let majorities: BTreeMap<ProcessorId, Option<Payload>> = procs
        .iter()
        .map(|(q, b)| (*q, b.1.as_ref().and_then(majority_message)))
        .collect();
    let distinct: BTreeSet<&Payload> = majorities.values().flatten().collect();
    report.behaviors_checked += 1;
    let reproduced = majorities.get(&p(2)) == Some(&Some(v.clone())) && majorities.get(&p(3)) == Some(&Some(w.clone()));
    report.record("raw IIAB: conflicting strict majorities", (reproduced && distinct.len() >= 2).into(), 1, || {
        (
            "raw IIAB engine".into(),
            Behavior::Iiab(Vec::new()),
            format!("{majorities:?}"),
        )
    });

    let receivers: BTreeSet<ProcessorId> = part.online.clone();
    let honest: BTreeMap<ProcessorId, Payload> = payloads.iter().filter(|(q, _)| **q != p(1)).map(|(q, m)| (*q, m.clone())).collect();
    let alphabet = [v.clone(), w.clone(), Payload::value("x")];
    for d in all_decisions(&part, &alphabet, &receivers) {
        let mut native = NoEqEngine::new(schedule.clone(), config);
        let views = run_backend(&mut native, &payloads, &d);
        report.behaviors_checked += 1;
        report.record("native no-eq: at most one strict majority", check_thm2(&views).into(), 1, || {
            ("native".into(), Behavior::NoEq(vec![d.clone()]), format!("{views:?}"))
        });
        let mut sim = SimulatedNoEq::from_noeq_schedule(&schedule, config);
        let views = run_backend(&mut sim, &payloads, &d);
        report.behaviors_checked += 1;
        report.record("simulated no-eq: at most one strict majority", check_thm2(&views).into(), 1, || {
            ("simulated".into(), Behavior::NoEq(vec![d.clone()]), format!("{views:?}"))
        });
    }

    let mut sim = SimulatedNoEq::from_noeq_schedule(&schedule, config);
    let views = simulate_noeq_round(&mut sim, &payloads, &mut EquivocatorSplit::default(), &mut SelfLeaders)
        .expect("the equivocator is admissible");
    report.behaviors_checked += 1;
    report.record("simulated no-eq against the split equivocator", check_thm2(&views).into(), 1, || {
        ("simulated, raw equivocator".into(), Behavior::Iiab(Vec::new()), format!("{views:?} honest {honest:?}"))
    });
    report
}
