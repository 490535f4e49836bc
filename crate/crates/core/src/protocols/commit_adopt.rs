use crate::engine::ProtocolError;
use crate::model::{majority_message, plurality_of, NoEqView, Payload, ProcessorId, Round, Value};
use crate::noeq::NoEqProcess;

use super::messages::{no_commit, propose_commit, proposed, CommitAdoptOutput};

/// Commit-adopt over two no-eq rounds.
///
/// Round 1: broadcast the input. Round 2: broadcast `propose-commit(v)` if
/// `v` came from a strict majority, `no-commit` otherwise. Output
/// `commit(v)` on a strict majority of `propose-commit(v)`; else adopt the
/// `v` whose `propose-commit(v)` arrived strictly more often than any other
/// proposal; else adopt the input.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CommitAdopt {
    input: Value,
    majority: Option<Value>,
    output: Option<CommitAdoptOutput>,
}

impl CommitAdopt {
    pub fn new(input: Value) -> CommitAdopt {
        CommitAdopt {
            input,
            majority: None,
            output: None,
        }
    }

    pub fn input(&self) -> &Value {
        &self.input
    }

    pub fn output(&self) -> Option<&CommitAdoptOutput> {
        self.output.as_ref()
    }

    pub fn step_broadcast(&self, step: u32) -> Result<Payload, ProtocolError> {
        match step {
            1 => Ok(Payload::Value(self.input.clone())),
            2 => Ok(match &self.majority {
                Some(v) => propose_commit(v),
                None => no_commit(),
            }),
            _ => Err(ProtocolError("commit-adopt has two rounds".into())),
        }
    }

    pub fn step_deliver(
        &mut self,
        step: u32,
        view: &NoEqView,
    ) -> Result<Option<CommitAdoptOutput>, ProtocolError> {
        match step {
            1 => {
                self.majority = match majority_message(view) {
                    Some(Payload::Value(v)) => Some(v),
                    _ => None,
                };
                Ok(None)
            }
            2 => {
                let out = match majority_message(view).as_ref().and_then(proposed) {
                    Some(v) => CommitAdoptOutput::commit(v.clone()),
                    None => CommitAdoptOutput::adopt(
                        plurality_of(view, proposed).unwrap_or_else(|| self.input.clone()),
                    ),
                };
                self.output = Some(out.clone());
                Ok(Some(out))
            }
            _ => Err(ProtocolError("commit-adopt has two rounds".into())),
        }
    }
}

impl NoEqProcess for CommitAdopt {
    type Output = CommitAdoptOutput;

    fn broadcast(&mut self, round: Round) -> Result<Payload, ProtocolError> {
        self.step_broadcast(round.get())
    }

    fn deliver(
        &mut self,
        round: Round,
        view: &NoEqView,
        _: Option<ProcessorId>,
    ) -> Result<Option<CommitAdoptOutput>, ProtocolError> {
        self.step_deliver(round.get(), view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EngineConfig, LeaderContext, LeaderPolicy};
    use crate::model::{Participation, ParticipationSchedule};
    use crate::noeq::{FixedShapes, NoEqAdversaryDecision, NoEqBackend, NoEqEngine, Shape, SimulatedNoEq};
    use alloc::collections::{BTreeMap, BTreeSet};

    fn p(i: u32) -> ProcessorId {
        ProcessorId(i)
    }

    struct NoLeader;
    impl LeaderPolicy for NoLeader {
        fn on_success(&mut self, _: &LeaderContext<'_>) -> ProcessorId {
            unreachable!()
        }
        fn on_failure(&mut self, _: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
            unreachable!()
        }
    }

    fn run<B: NoEqBackend>(
        backend: &mut B,
        inputs: &[(u32, &str)],
        shapes: NoEqAdversaryDecision,
    ) -> BTreeMap<ProcessorId, CommitAdoptOutput> {
        let mut procs: BTreeMap<_, _> = inputs
            .iter()
            .map(|(q, v)| (p(*q), CommitAdopt::new(Value::from(*v))))
            .collect();
        let mut adv = FixedShapes(shapes);
        backend.run_round(&mut procs, &mut adv, &mut NoLeader).unwrap();
        backend
            .run_round(&mut procs, &mut adv, &mut NoLeader)
            .unwrap()
            .outputs
    }

    fn schedule(online: &[u32], f: &[u32]) -> ParticipationSchedule {
        ParticipationSchedule::constant(
            Participation::new(online.iter().map(|i| p(*i)), f.iter().map(|i| p(*i))),
            2,
        )
    }

    #[test]
    fn single_processor_commits() {
        let mut e = NoEqEngine::new(schedule(&[1], &[]), EngineConfig::default());
        let out = run(&mut e, &[(1, "v")], NoEqAdversaryDecision::new());
        assert_eq!(out[&p(1)], CommitAdoptOutput::commit(Value::from("v")));
    }

    #[test]
    fn unanimous_input_commits_under_adversary() {
        let s = schedule(&[1, 2, 3], &[3]);
        let shape = NoEqAdversaryDecision::new().with(p(3), Shape::Uniform(Payload::value("w")));
        let mut native = NoEqEngine::new(s.clone(), EngineConfig::default());
        let mut sim = SimulatedNoEq::from_noeq_schedule(&s, EngineConfig::default());
        let a = run(&mut native, &[(1, "v"), (2, "v"), (3, "v")], shape.clone());
        let b = run(&mut sim, &[(1, "v"), (2, "v"), (3, "v")], shape);
        assert_eq!(a, b);
        assert!(a.values().all(|o| *o == CommitAdoptOutput::commit(Value::from("v"))));
    }

    #[test]
    fn split_inputs_adopt_plurality_or_own() {
        let mut e = NoEqEngine::new(schedule(&[1, 2, 3], &[]), EngineConfig::default());
        let out = run(&mut e, &[(1, "a"), (2, "b"), (3, "c")], NoEqAdversaryDecision::new());
        // Three-way tie: everyone adopts its own input.
        assert_eq!(out[&p(1)], CommitAdoptOutput::adopt(Value::from("a")));
        assert_eq!(out[&p(2)], CommitAdoptOutput::adopt(Value::from("b")));
    }

    #[test]
    fn majority_value_commits() {
        let mut e = NoEqEngine::new(schedule(&[1, 2, 3], &[]), EngineConfig::default());
        let out = run(&mut e, &[(1, "a"), (2, "a"), (3, "b")], NoEqAdversaryDecision::new());
        assert!(out.values().all(|o| *o == CommitAdoptOutput::commit(Value::from("a"))));
    }

    #[test]
    fn adopt_follows_round_two_proposals() {
        // p1 alone sees a majority for v in round 1, and alone a majority of
        // propose-commit(v) in round 2. p2 sees one proposal for v and a tie
        // between v and w among round-1 values.
        let mut e = NoEqEngine::new(schedule(&[1, 2, 3], &[3]), EngineConfig::default());
        let mut procs: BTreeMap<_, _> = [(1, "v"), (2, "w"), (3, "v")]
            .iter()
            .map(|(q, v)| (p(*q), CommitAdopt::new(Value::from(*v))))
            .collect();
        let only_p1: BTreeSet<_> = [p(1)].into();
        let round = |m: Payload| FixedShapes(NoEqAdversaryDecision::new().with(p(3), Shape::Split(m, only_p1.clone())));
        e.run_round(&mut procs, &mut round(Payload::value("v")), &mut NoLeader).unwrap();
        let out = e
            .run_round(&mut procs, &mut round(propose_commit(&Value::from("v"))), &mut NoLeader)
            .unwrap()
            .outputs;
        assert_eq!(out[&p(1)], CommitAdoptOutput::commit(Value::from("v")));
        assert_eq!(out[&p(2)], CommitAdoptOutput::adopt(Value::from("v")));
    }

    #[test]
    fn lambda_blocks_majority_without_breaking_agreement() {
        let mut e = NoEqEngine::new(schedule(&[1, 2, 3, 4, 5], &[4, 5]), EngineConfig::default());
        let lam: BTreeSet<_> = (1..=5).map(p).collect();
        let d = NoEqAdversaryDecision::new()
            .with(p(4), Shape::LambdaOnly(lam))
            .with(p(5), Shape::Uniform(Payload::value("b")));
        let out = run(&mut e, &[(1, "a"), (2, "b"), (3, "a"), (4, "x"), (5, "y")], d);
        // a:2 b:2 of five heard: no majority, no plurality.
        assert_eq!(out[&p(1)], CommitAdoptOutput::adopt(Value::from("a")));
        assert_eq!(out[&p(2)], CommitAdoptOutput::adopt(Value::from("b")));
    }
}
