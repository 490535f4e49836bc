use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::engine::{
    EngineConfig, EngineError, IiabEngine, Injector, LeaderPolicy, Process, ProtocolError,
    TraceEvent,
};
use crate::model::{IiabView, ParticipationSchedule, Payload, ProcessorId, Round, Value};
use crate::noeq::Simulated;

use super::messages::{CommitAdoptOutput, ConciliatorOutput, ConciliatorRule, Decision, Grade};
use super::{CommitAdopt, DetConciliator, ProbaConciliator};

/// IIAB rounds taken by one commit-adopt instance (two simulated rounds).
pub const COMMIT_ADOPT_LEN: u32 = 4;

/// Which conciliator the composition alternates with commit-adopt.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ConsensusKind {
    /// `C[n]` is the probabilistic conciliator on three simulated rounds.
    Probabilistic,
    /// `C[n]` is the deterministic conciliator with `N = 2^n`, on native
    /// IIAB rounds.
    Deterministic,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum PhaseKind {
    Conciliator,
    CommitAdopt,
}

/// Where a global round falls in the composition.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PhasePosition {
    pub instance: u32,
    pub phase: PhaseKind,
    /// First round of the phase.
    pub start: Round,
    /// 0-based offset of the round within the phase.
    pub offset: u32,
    pub len: u32,
}

impl PhasePosition {
    pub fn is_last(&self) -> bool {
        self.offset + 1 == self.len
    }
}

impl ConsensusKind {
    pub fn conciliator_len(self, instance: u32) -> u32 {
        match self {
            ConsensusKind::Probabilistic => 6,
            ConsensusKind::Deterministic => (1u32 << instance) + 1,
        }
    }

    /// Chain rounds `N` of the deterministic conciliator `C[n]`.
    pub fn chain_rounds(instance: u32) -> u32 {
        1u32 << instance
    }

    /// Last round of `CA[n]`.
    pub fn commit_adopt_end(self, instance: u32) -> Round {
        let total: u32 = (1..=instance)
            .map(|i| self.conciliator_len(i) + COMMIT_ADOPT_LEN)
            .sum();
        Round::at(total)
    }

    pub fn position(self, round: Round) -> PhasePosition {
        let mut start = 1u32;
        let mut instance = 1u32;
        loop {
            let c = self.conciliator_len(instance);
            let r = round.get();
            if r < start + c {
                return PhasePosition {
                    instance,
                    phase: PhaseKind::Conciliator,
                    start: Round::at(start),
                    offset: r - start,
                    len: c,
                };
            }
            if r < start + c + COMMIT_ADOPT_LEN {
                return PhasePosition {
                    instance,
                    phase: PhaseKind::CommitAdopt,
                    start: Round::at(start + c),
                    offset: r - start - c,
                    len: COMMIT_ADOPT_LEN,
                };
            }
            start += c + COMMIT_ADOPT_LEN;
            instance += 1;
        }
    }
}

#[derive(Clone, Debug)]
enum Phase {
    Proba(Simulated<ProbaConciliator>),
    Det(DetConciliator),
    CommitAdopt(Simulated<CommitAdopt>),
}

/// One processor of the composition: `C[1], CA[1], C[2], CA[2], ...`, each
/// phase fed with the value output by the previous one. The first
/// `commit(v)` is the decision; later phases keep running.
#[derive(Clone, Debug)]
pub struct ConsensusProcess {
    me: ProcessorId,
    kind: ConsensusKind,
    subjects: BTreeSet<ProcessorId>,
    input: Value,
    value: Value,
    decision: Option<Value>,
    active: Option<(u32, PhaseKind, Phase)>,
    annotations: Vec<TraceEvent>,
}

impl ConsensusProcess {
    /// `subjects` are the processors whose simulated deliveries are
    /// annotated in the trace.
    pub fn new(
        me: ProcessorId,
        kind: ConsensusKind,
        input: Value,
        subjects: BTreeSet<ProcessorId>,
    ) -> ConsensusProcess {
        ConsensusProcess {
            me,
            kind,
            subjects,
            value: input.clone(),
            input,
            decision: None,
            active: None,
            annotations: Vec::new(),
        }
    }

    pub fn input(&self) -> &Value {
        &self.input
    }

    /// The value that feeds the next phase.
    pub fn value(&self) -> &Value {
        &self.value
    }

    pub fn decision(&self) -> Option<&Value> {
        self.decision.as_ref()
    }

    fn enter(&mut self, round: Round) -> PhasePosition {
        let pos = self.kind.position(round);
        let current = matches!(&self.active, Some((n, k, _)) if *n == pos.instance && *k == pos.phase);
        if !current {
            let phase = match (pos.phase, self.kind) {
                (PhaseKind::Conciliator, ConsensusKind::Probabilistic) => Phase::Proba(Simulated::new(
                    self.me,
                    ProbaConciliator::new(self.value.clone()),
                    pos.start,
                    self.subjects.clone(),
                )),
                (PhaseKind::Conciliator, ConsensusKind::Deterministic) => Phase::Det(DetConciliator::new(
                    self.me,
                    ConsensusKind::chain_rounds(pos.instance),
                    pos.start,
                    self.value.clone(),
                )),
                (PhaseKind::CommitAdopt, _) => Phase::CommitAdopt(Simulated::new(
                    self.me,
                    CommitAdopt::new(self.value.clone()),
                    pos.start,
                    self.subjects.clone(),
                )),
            };
            self.active = Some((pos.instance, pos.phase, phase));
        }
        pos
    }

    fn active(&mut self) -> &mut Phase {
        &mut self.active.as_mut().expect("phase entered").2
    }
}

impl Process for ConsensusProcess {
    type Output = Decision;

    fn send(&mut self, round: Round) -> Result<Vec<Payload>, ProtocolError> {
        self.enter(round);
        match self.active() {
            Phase::Proba(s) => s.send(round),
            Phase::Det(d) => d.send(round),
            Phase::CommitAdopt(s) => s.send(round),
        }
    }

    fn receive(
        &mut self,
        round: Round,
        view: &IiabView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<Decision>, ProtocolError> {
        let pos = self.enter(round);
        let phase = &mut self.active.as_mut().expect("phase entered").2;
        let (conciliated, adopted) = match phase {
            Phase::Proba(s) => {
                let out = s.receive(round, view, leader)?;
                self.annotations.extend(s.take_annotations());
                (out, None)
            }
            Phase::Det(d) => {
                let out = d.receive(round, view, leader)?.map(|value| ConciliatorOutput {
                    value,
                    rule: ConciliatorRule::Deterministic,
                });
                (out, None)
            }
            Phase::CommitAdopt(s) => {
                let out = s.receive(round, view, leader)?;
                self.annotations.extend(s.take_annotations());
                (None, out)
            }
        };
        if let Some(o) = conciliated {
            self.annotations.push(TraceEvent::Output {
                round,
                processor: self.me,
                output: o.to_payload(pos.instance),
            });
            self.value = o.value;
        }
        let Some(o) = adopted else { return Ok(None) };
        self.annotations.push(TraceEvent::Output {
            round,
            processor: self.me,
            output: o.to_payload(),
        });
        let CommitAdoptOutput { grade, value } = o;
        self.value = value.clone();
        if grade == Grade::Commit && self.decision.is_none() {
            self.decision = Some(value.clone());
            return Ok(Some(Decision(value)));
        }
        Ok(None)
    }

    fn take_annotations(&mut self) -> Vec<TraceEvent> {
        core::mem::take(&mut self.annotations)
    }
}

/// The result of a consensus run.
#[derive(Clone, Debug)]
pub struct ConsensusOutcome {
    /// Decision round and value of every processor that decided.
    pub decisions: BTreeMap<ProcessorId, (Round, Value)>,
    pub rounds_run: u32,
    pub undecided: BTreeSet<ProcessorId>,
    pub trace: Vec<TraceEvent>,
}

impl ConsensusOutcome {
    /// At most one decided value.
    pub fn agreement(&self) -> bool {
        self.decisions
            .values()
            .map(|(_, v)| v)
            .collect::<BTreeSet<_>>()
            .len()
            <= 1
    }

    /// The last decision round, if everyone decided.
    pub fn last_decision(&self) -> Option<Round> {
        if !self.undecided.is_empty() {
            return None;
        }
        self.decisions.values().map(|(r, _)| *r).max()
    }
}

/// Runs consensus for at most `max_rounds` rounds (and at most the schedule
/// horizon), stopping early once every processor has decided. `inputs` must
/// cover every processor of the schedule.
pub fn run_consensus(
    schedule: ParticipationSchedule,
    inputs: &BTreeMap<ProcessorId, Value>,
    kind: ConsensusKind,
    max_rounds: u32,
    config: EngineConfig,
    injector: &mut dyn Injector,
    leaders: &mut dyn LeaderPolicy,
) -> Result<ConsensusOutcome, EngineError> {
    let cap = max_rounds.min(schedule.horizon());
    let mut engine = IiabEngine::new(schedule, config);
    let universe = engine.universe().clone();
    let mut procs = BTreeMap::new();
    for p in &universe {
        let input = inputs
            .get(p)
            .ok_or(EngineError::MissingProcess { processor: *p })?;
        procs.insert(
            *p,
            ConsensusProcess::new(*p, kind, input.clone(), universe.clone()),
        );
    }
    let mut decisions = BTreeMap::new();
    let mut rounds_run = 0;
    while rounds_run < cap && decisions.len() < universe.len() {
        let report = engine.run_round(&mut procs, injector, leaders)?;
        for (p, Decision(v)) in report.outputs {
            decisions.insert(p, (report.round, v));
        }
        rounds_run += 1;
    }
    let undecided = universe
        .iter()
        .filter(|p| !decisions.contains_key(p))
        .copied()
        .collect();
    Ok(ConsensusOutcome {
        decisions,
        rounds_run,
        undecided,
        trace: engine.take_trace(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AdversaryContext, AdversaryDecision, LeaderContext, OracleMode};
    use crate::model::Participation;

    fn p(i: u32) -> ProcessorId {
        ProcessorId(i)
    }

    struct Quiet;
    impl Injector for Quiet {
        fn inject(&mut self, _: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
            Ok(AdversaryDecision::default())
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

    fn inputs(vs: &[(u32, &str)]) -> BTreeMap<ProcessorId, Value> {
        vs.iter().map(|(q, v)| (p(*q), Value::from(*v))).collect()
    }

    #[test]
    fn layouts() {
        let pr = ConsensusKind::Probabilistic;
        assert_eq!(pr.commit_adopt_end(1), Round::at(10));
        assert_eq!(pr.commit_adopt_end(2), Round::at(20));
        let pos = pr.position(Round::at(17));
        assert_eq!((pos.instance, pos.phase, pos.offset), (2, PhaseKind::CommitAdopt, 0));

        let det = ConsensusKind::Deterministic;
        let ends: Vec<u32> = (1..=4).map(|n| det.commit_adopt_end(n).get()).collect();
        assert_eq!(ends, [7, 16, 29, 50]);
        let starts: Vec<u32> = [1, 8, 17, 30]
            .iter()
            .map(|r| det.position(Round::at(*r)))
            .inspect(|pos| assert_eq!((pos.phase, pos.offset), (PhaseKind::Conciliator, 0)))
            .map(|pos| pos.instance)
            .collect();
        assert_eq!(starts, [1, 2, 3, 4]);
        assert!(det.position(Round::at(7)).is_last());
    }

    #[test]
    fn unanimous_input_decides_in_first_commit_adopt() {
        for (kind, end) in [
            (ConsensusKind::Probabilistic, 10),
            (ConsensusKind::Deterministic, 7),
        ] {
            let schedule = ParticipationSchedule::constant(
                Participation::new([p(1), p(2), p(3)], [p(3)]),
                40,
            );
            let out = run_consensus(
                schedule,
                &inputs(&[(1, "v"), (2, "v"), (3, "v")]),
                kind,
                40,
                EngineConfig {
                    oracle: OracleMode::Honest,
                    ..EngineConfig::default()
                },
                &mut Quiet,
                &mut Lowest,
            )
            .unwrap();
            assert!(out.undecided.is_empty());
            assert!(out
                .decisions
                .values()
                .all(|(r, v)| r.get() == end && *v == Value::from("v")));
        }
    }

    #[test]
    fn successful_oracle_decides_at_round_ten() {
        let schedule =
            ParticipationSchedule::constant(Participation::new((1..=4).map(p), []), 40);
        let out = run_consensus(
            schedule,
            &inputs(&[(1, "a"), (2, "b"), (3, "c"), (4, "d")]),
            ConsensusKind::Probabilistic,
            40,
            EngineConfig {
                oracle: OracleMode::AlwaysSucceed,
                ..EngineConfig::default()
            },
            &mut Quiet,
            &mut Lowest,
        )
        .unwrap();
        assert_eq!(out.last_decision(), Some(Round::at(10)));
        assert!(out.agreement());
    }

    #[test]
    fn deterministic_majority_decides_at_round_seven() {
        let schedule =
            ParticipationSchedule::constant(Participation::new((1..=3).map(p), []), 20);
        let out = run_consensus(
            schedule,
            &inputs(&[(1, "1"), (2, "1"), (3, "2")]),
            ConsensusKind::Deterministic,
            20,
            EngineConfig::default(),
            &mut Quiet,
            &mut Lowest,
        )
        .unwrap();
        assert_eq!(out.last_decision(), Some(Round::at(7)));
        assert!(out.decisions.values().all(|(_, v)| *v == Value::from("1")));
    }

    #[test]
    fn conciliator_outputs_are_annotated() {
        let schedule =
            ParticipationSchedule::constant(Participation::new([p(1), p(2)], []), 10);
        let out = run_consensus(
            schedule,
            &inputs(&[(1, "a"), (2, "a")]),
            ConsensusKind::Probabilistic,
            10,
            EngineConfig::default(),
            &mut Quiet,
            &mut Lowest,
        )
        .unwrap();
        let conciliated: Vec<_> = out
            .trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Output { round, output, .. } => {
                    ConciliatorOutput::parse_payload(output).map(|x| (*round, x))
                }
                _ => None,
            })
            .collect();
        assert_eq!(conciliated.len(), 2);
        assert!(conciliated
            .iter()
            .all(|(r, (n, v, rule))| r.get() == 6 && *n == 1 && *v == Value::from("a") && *rule == 1));
    }
}
