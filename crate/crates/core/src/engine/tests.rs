use super::*;
use crate::model::{strict_majority, Value};
use alloc::vec;

fn p(i: u32) -> ProcessorId {
    ProcessorId(i)
}

/// Broadcasts a fixed payload every round and keeps its views.
#[derive(Clone, Debug, Default)]
struct Broadcaster {
    payload: Option<Payload>,
    views: Vec<IiabView>,
    output_every_round: bool,
}

impl Broadcaster {
    fn new(m: &str) -> Broadcaster {
        Broadcaster {
            payload: Some(Payload::value(m)),
            ..Broadcaster::default()
        }
    }
}

impl Process for Broadcaster {
    type Output = Payload;

    fn send(&mut self, _: Round) -> Result<Vec<Payload>, ProtocolError> {
        Ok(self.payload.iter().cloned().collect())
    }

    fn receive(
        &mut self,
        _: Round,
        view: &IiabView,
        _: Option<ProcessorId>,
    ) -> Result<Option<Payload>, ProtocolError> {
        self.views.push(view.clone());
        Ok(self
            .output_every_round
            .then(|| Payload::value("out")))
    }
}

struct NoInjection;

impl Injector for NoInjection {
    fn inject(&mut self, _: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        Ok(AdversaryDecision::default())
    }
}

struct Fixed(AdversaryDecision);

impl Injector for Fixed {
    fn inject(&mut self, _: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        Ok(self.0.clone())
    }
}

struct Lowest;

impl LeaderPolicy for Lowest {
    fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
        *ctx.participation.well_behaved().iter().next().unwrap()
    }
    fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
        ctx.universe.iter().map(|q| (*q, *q)).collect()
    }
}

fn schedule(online: &[u32], impersonated: &[u32], horizon: u32) -> ParticipationSchedule {
    ParticipationSchedule::constant(
        Participation::new(online.iter().map(|i| p(*i)), impersonated.iter().map(|i| p(*i))),
        horizon,
    )
}

#[test]
fn single_processor_hears_itself() {
    let mut engine = IiabEngine::new(schedule(&[1], &[], 1), EngineConfig::default());
    let mut procs: BTreeMap<_, _> = [(p(1), Broadcaster::new("v"))].into();
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
    let view = &procs[&p(1)].views[0];
    assert_eq!(view.links.len(), 1);
    assert!(view.links[&p(1)].contains(&Payload::value("v")));
}

#[test]
fn example_one_double_majority_on_raw_engine() {
    let mut engine = IiabEngine::new(schedule(&[1, 2, 3], &[1], 1), EngineConfig::default());
    let mut procs: BTreeMap<_, _> = [
        (p(1), Broadcaster::new("x")),
        (p(2), Broadcaster::new("v")),
        (p(3), Broadcaster::new("w")),
    ]
    .into();
    let mut d = AdversaryDecision::default();
    d.inject(p(1), p(2), Payload::value("v"));
    d.inject(p(1), p(3), Payload::value("w"));
    engine
        .run_round(&mut procs, &mut Fixed(d), &mut Lowest)
        .unwrap();
    let v2 = &procs[&p(2)].views[0];
    let v3 = &procs[&p(3)].views[0];
    assert_eq!(strict_majority(v2, &Payload::value("v")), Ok(true));
    assert_eq!(strict_majority(v3, &Payload::value("w")), Ok(true));
    // The impersonated processor's own send was discarded.
    assert!(v2.messages().all(|(_, m)| *m != Payload::value("x")));
}

#[test]
fn observers_receive_without_sending() {
    let mut engine =
        IiabEngine::new(schedule(&[1, 2], &[], 1), EngineConfig::default()).with_observers([p(4)]);
    let mut procs: BTreeMap<_, _> = [
        (p(1), Broadcaster::new("a")),
        (p(2), Broadcaster::new("b")),
        (p(4), Broadcaster::new("never")),
    ]
    .into();
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
    let view = &procs[&p(4)].views[0];
    assert_eq!(view.links.keys().copied().collect::<Vec<_>>(), vec![p(1), p(2)]);
    assert!(procs[&p(1)].views[0].links.get(&p(4)).is_none());
}

#[test]
fn forged_injection_aborts() {
    let mut engine = IiabEngine::new(schedule(&[1, 2, 3], &[1], 1), EngineConfig::default());
    let mut procs: BTreeMap<_, _> = [
        (p(1), Broadcaster::new("a")),
        (p(2), Broadcaster::new("b")),
        (p(3), Broadcaster::new("c")),
    ]
    .into();
    let mut d = AdversaryDecision::default();
    d.inject(
        p(1),
        p(3),
        Payload::signed(p(2), Round::FIRST, Payload::value("b")),
    );
    let err = engine
        .run_round(&mut procs, &mut Fixed(d), &mut Lowest)
        .unwrap_err();
    assert!(matches!(err, EngineError::InvalidInjection { .. }));
}

#[test]
fn injection_from_well_behaved_link_aborts() {
    let mut engine = IiabEngine::new(schedule(&[1, 2, 3], &[1], 1), EngineConfig::default());
    let mut procs: BTreeMap<_, _> = [
        (p(1), Broadcaster::new("a")),
        (p(2), Broadcaster::new("b")),
        (p(3), Broadcaster::new("c")),
    ]
    .into();
    let mut d = AdversaryDecision::default();
    d.inject(p(2), p(3), Payload::value("z"));
    assert!(engine
        .run_round(&mut procs, &mut Fixed(d), &mut Lowest)
        .is_err());
}

#[test]
fn honest_process_cannot_sign_for_others() {
    let mut engine = IiabEngine::new(schedule(&[1, 2], &[], 1), EngineConfig::default());
    let mut forger = Broadcaster::default();
    forger.payload = Some(Payload::signed(p(2), Round::FIRST, Payload::value("x")));
    let mut procs: BTreeMap<_, _> = [(p(1), forger), (p(2), Broadcaster::new("b"))].into();
    assert!(matches!(
        engine.run_round(&mut procs, &mut NoInjection, &mut Lowest),
        Err(EngineError::HonestForgery { .. })
    ));
}

#[test]
fn honest_relay_of_received_signature_is_allowed() {
    let mut engine = IiabEngine::new(schedule(&[1, 2], &[], 2), EngineConfig::default());
    let signed = Payload::signed(p(2), Round::FIRST, Payload::value("b"));
    let mut procs: BTreeMap<_, _> = [
        (p(1), Broadcaster::new("a")),
        (
            p(2),
            Broadcaster {
                payload: Some(signed.clone()),
                ..Broadcaster::default()
            },
        ),
    ]
    .into();
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
    procs.get_mut(&p(1)).unwrap().payload = Some(signed);
    // p1 relays p2's round-1 signature in round 2.
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
}

#[test]
fn second_output_aborts() {
    let mut engine = IiabEngine::new(schedule(&[1], &[], 2), EngineConfig::default());
    let mut b = Broadcaster::new("v");
    b.output_every_round = true;
    let mut procs: BTreeMap<_, _> = [(p(1), b)].into();
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
    assert!(matches!(
        engine.run_round(&mut procs, &mut NoInjection, &mut Lowest),
        Err(EngineError::SecondOutput { .. })
    ));
}

#[test]
fn past_horizon_is_an_error() {
    let mut engine = IiabEngine::new(schedule(&[1], &[], 1), EngineConfig::default());
    let mut procs: BTreeMap<_, _> = [(p(1), Broadcaster::new("v"))].into();
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
    assert!(matches!(
        engine.run_round(&mut procs, &mut NoInjection, &mut Lowest),
        Err(EngineError::PastHorizon { .. })
    ));
}

#[test]
fn ledger_records_honest_and_injected_messages() {
    let mut engine = IiabEngine::new(schedule(&[1, 2, 3], &[1], 1), EngineConfig::default());
    let mut procs: BTreeMap<_, _> = [
        (p(1), Broadcaster::new("a")),
        (
            p(2),
            Broadcaster {
                payload: Some(Payload::signed(p(2), Round::FIRST, Payload::value("b"))),
                ..Broadcaster::default()
            },
        ),
        (p(3), Broadcaster::new("c")),
    ]
    .into();
    let mut d = AdversaryDecision::default();
    d.inject(
        p(1),
        p(3),
        Payload::signed(p(1), Round::FIRST, Payload::value("z")),
    );
    engine
        .run_round(&mut procs, &mut Fixed(d), &mut Lowest)
        .unwrap();
    assert_eq!(engine.ledger().len(), 2);
}

#[test]
fn non_rushing_adversary_does_not_see_honest_sends() {
    struct Peek(Option<bool>);
    impl Injector for Peek {
        fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
            self.0 = Some(ctx.honest.is_some());
            Ok(AdversaryDecision::default())
        }
    }
    for rushing in [true, false] {
        let config = EngineConfig {
            rushing,
            ..EngineConfig::default()
        };
        let mut engine = IiabEngine::new(schedule(&[1], &[], 1), config);
        let mut procs: BTreeMap<_, _> = [(p(1), Broadcaster::new("v"))].into();
        let mut peek = Peek(None);
        engine.run_round(&mut procs, &mut peek, &mut Lowest).unwrap();
        assert_eq!(peek.0, Some(rushing));
    }
}

#[test]
fn traces_are_deterministic_per_seed() {
    let run = |seed| {
        let config = EngineConfig {
            oracle: OracleMode::Honest,
            record_links: true,
            seed,
            ..EngineConfig::default()
        };
        let mut engine = IiabEngine::new(schedule(&[1, 2, 3], &[1], 20), config);
        let mut procs: BTreeMap<_, _> = [
            (p(1), Broadcaster::new("a")),
            (p(2), Broadcaster::new("b")),
            (p(3), Broadcaster::new("c")),
        ]
        .into();
        for _ in 0..20 {
            engine
                .run_round(&mut procs, &mut NoInjection, &mut Lowest)
                .unwrap();
        }
        engine.take_trace()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn oracle_leader_reaches_processes() {
    struct Leaders(Vec<Option<ProcessorId>>);
    impl Process for Leaders {
        type Output = Payload;
        fn send(&mut self, _: Round) -> Result<Vec<Payload>, ProtocolError> {
            Ok(vec![Payload::Value(Value::from("x"))])
        }
        fn receive(
            &mut self,
            _: Round,
            _: &IiabView,
            leader: Option<ProcessorId>,
        ) -> Result<Option<Payload>, ProtocolError> {
            self.0.push(leader);
            Ok(None)
        }
    }
    let config = EngineConfig {
        oracle: OracleMode::AlwaysSucceed,
        ..EngineConfig::default()
    };
    let mut engine = IiabEngine::new(schedule(&[1, 2, 3], &[1], 1), config);
    let mut procs: BTreeMap<_, _> = [
        (p(1), Leaders(vec![])),
        (p(2), Leaders(vec![])),
        (p(3), Leaders(vec![])),
    ]
    .into();
    engine
        .run_round(&mut procs, &mut NoInjection, &mut Lowest)
        .unwrap();
    for q in [1, 2, 3] {
        assert_eq!(procs[&p(q)].0, vec![Some(p(2))]);
    }
}
