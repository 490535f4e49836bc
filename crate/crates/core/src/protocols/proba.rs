use crate::engine::ProtocolError;
use crate::model::{majority_message, NoEqView, Payload, ProcessorId, Round, Value};
use crate::noeq::NoEqProcess;

use super::messages::{CommitAdoptOutput, ConciliatorOutput, ConciliatorRule, Grade};
use super::CommitAdopt;

/// The probabilistic conciliator: commit-adopt, then one round in which
/// everyone broadcasts its commit-adopt output.
///
/// Output `v` if a strict majority sent `commit(v)`; else the value of the
/// leader's `commit(v)` or `adopt(v)`; else the input.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProbaConciliator {
    ca: CommitAdopt,
    output: Option<ConciliatorOutput>,
}

impl ProbaConciliator {
    pub fn new(input: Value) -> ProbaConciliator {
        ProbaConciliator {
            ca: CommitAdopt::new(input),
            output: None,
        }
    }

    pub fn output(&self) -> Option<&ConciliatorOutput> {
        self.output.as_ref()
    }

    pub fn step_broadcast(&self, step: u32) -> Result<Payload, ProtocolError> {
        match step {
            1 | 2 => self.ca.step_broadcast(step),
            3 => self
                .ca
                .output()
                .map(CommitAdoptOutput::to_payload)
                .ok_or_else(|| ProtocolError("no commit-adopt output to broadcast".into())),
            _ => Err(ProtocolError("the conciliator has three rounds".into())),
        }
    }

    pub fn step_deliver(
        &mut self,
        step: u32,
        view: &NoEqView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<ConciliatorOutput>, ProtocolError> {
        match step {
            1 | 2 => {
                self.ca.step_deliver(step, view)?;
                Ok(None)
            }
            3 => {
                let majority = majority_message(view)
                    .as_ref()
                    .and_then(CommitAdoptOutput::from_payload)
                    .filter(|o| o.grade == Grade::Commit);
                let from_leader = leader
                    .and_then(|l| view.delivery.get(&l))
                    .and_then(|e| e.message())
                    .and_then(CommitAdoptOutput::from_payload);
                let out = match (majority, from_leader) {
                    (Some(o), _) => ConciliatorOutput {
                        value: o.value,
                        rule: ConciliatorRule::MajorityCommit,
                    },
                    (None, Some(o)) => ConciliatorOutput {
                        value: o.value,
                        rule: ConciliatorRule::Leader,
                    },
                    (None, None) => ConciliatorOutput {
                        value: self.ca.input().clone(),
                        rule: ConciliatorRule::OwnInput,
                    },
                };
                self.output = Some(out.clone());
                Ok(Some(out))
            }
            _ => Err(ProtocolError("the conciliator has three rounds".into())),
        }
    }
}

impl NoEqProcess for ProbaConciliator {
    type Output = ConciliatorOutput;

    fn broadcast(&mut self, round: Round) -> Result<Payload, ProtocolError> {
        self.step_broadcast(round.get())
    }

    fn deliver(
        &mut self,
        round: Round,
        view: &NoEqView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<ConciliatorOutput>, ProtocolError> {
        self.step_deliver(round.get(), view, leader)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EngineConfig, LeaderContext, LeaderPolicy, OracleMode};
    use crate::model::{Participation, ParticipationSchedule};
    use crate::noeq::{FixedShapes, NoEqAdversaryDecision, NoEqBackend, NoEqEngine, Shape};
    use alloc::collections::{BTreeMap, BTreeSet};

    fn p(i: u32) -> ProcessorId {
        ProcessorId(i)
    }

    /// Lowest well-behaved id on success; on failure everyone follows
    /// itself.
    struct Policy;
    impl LeaderPolicy for Policy {
        fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
            *ctx.participation.well_behaved().iter().next().unwrap()
        }
        fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
            ctx.universe.iter().map(|q| (*q, *q)).collect()
        }
    }

    fn run(
        oracle: OracleMode,
        inputs: &[(u32, &str)],
        f: &[u32],
        shapes: NoEqAdversaryDecision,
    ) -> BTreeMap<ProcessorId, ConciliatorOutput> {
        let online: BTreeSet<_> = inputs.iter().map(|(q, _)| p(*q)).collect();
        let schedule = ParticipationSchedule::constant(
            Participation::new(online, f.iter().map(|i| p(*i))),
            3,
        );
        let mut e = NoEqEngine::new(
            schedule,
            EngineConfig {
                oracle,
                ..EngineConfig::default()
            },
        );
        let mut procs: BTreeMap<_, _> = inputs
            .iter()
            .map(|(q, v)| (p(*q), ProbaConciliator::new(Value::from(*v))))
            .collect();
        let mut adv = FixedShapes(shapes);
        e.run_round(&mut procs, &mut adv, &mut Policy).unwrap();
        e.run_round(&mut procs, &mut adv, &mut Policy).unwrap();
        e.run_round(&mut procs, &mut adv, &mut Policy)
            .unwrap()
            .outputs
    }

    #[test]
    fn unanimous_input_is_output() {
        let out = run(
            OracleMode::AlwaysFail,
            &[(1, "v"), (2, "v"), (3, "v")],
            &[],
            NoEqAdversaryDecision::new(),
        );
        assert!(out.values().all(|o| o.value == Value::from("v")));
        assert!(out.values().all(|o| o.rule == ConciliatorRule::MajorityCommit));
    }

    #[test]
    fn successful_oracle_gives_agreement() {
        let all: BTreeSet<_> = (1..=5).map(p).collect();
        let d = NoEqAdversaryDecision::new()
            .with(p(4), Shape::LambdaOnly(all))
            .with(p(5), Shape::Uniform(Payload::value("b")));
        let inputs = [(1, "a"), (2, "b"), (3, "a"), (4, "x"), (5, "y")];
        let out = run(OracleMode::AlwaysSucceed, &inputs, &[4, 5], d.clone());
        assert!(out.values().all(|o| o.value == Value::from("a")));
        assert!(out.values().all(|o| o.rule == ConciliatorRule::Leader));

        // Without the oracle's help the split survives through rule 3.
        let out = run(OracleMode::AlwaysFail, &inputs, &[4, 5], d);
        assert_eq!(out[&p(2)].value, Value::from("b"));
        assert_eq!(out[&p(1)].value, Value::from("a"));
    }
}
