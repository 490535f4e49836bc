use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{Process, ProtocolError};
use crate::model::{majority_message, IiabView, Payload, ProcessorId, Round, Value};

/// The deterministic conciliator: `n` rounds of signature chains, then one
/// round exchanging candidates.
///
/// Round 1 broadcasts `<p,s,in_p>` (`s` the instance's first round). In every
/// chain round `r`, a chain `<p_r, s+r-1, <... <p_1, s, v>>>` of `r` distinct
/// signers contributes the tuple `(p_1, v)` to `e_p`; chains that brought a
/// new tuple are signed and broadcast in round `r+1` unless `p` already
/// signed them. The candidate is the smallest value held by a strict
/// majority of the origins in `e_p`, else the smallest value in `e_p`. The
/// output is the value received from a strict majority in the last round,
/// else the candidate.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct DetConciliator {
    me: ProcessorId,
    n: u32,
    start: Round,
    input: Value,
    extracted: BTreeSet<(ProcessorId, Value)>,
    relay: Vec<Payload>,
    candidate: Option<Value>,
    output: Option<Value>,
}

/// Signers (outermost first) and value of a well-formed chain of length
/// `len` whose innermost signature is for round `start`.
pub fn parse_chain(payload: &Payload, start: Round, len: u32) -> Option<(Vec<ProcessorId>, Value)> {
    let mut signers = Vec::with_capacity(len as usize);
    let mut current = payload;
    for level in (1..=len).rev() {
        let s = current.as_signed()?;
        if s.round.get() != start.get() + level - 1 || signers.contains(&s.signer) {
            return None;
        }
        signers.push(s.signer);
        current = &s.content;
    }
    current.as_value().map(|v| (signers, v.clone()))
}

/// The smallest value held by a strict majority of origins, else the
/// smallest value.
pub fn candidate_of(extracted: &BTreeSet<(ProcessorId, Value)>) -> Option<Value> {
    let origins: BTreeSet<ProcessorId> = extracted.iter().map(|(o, _)| *o).collect();
    let mut holders: BTreeMap<&Value, usize> = BTreeMap::new();
    for (_, v) in extracted {
        *holders.entry(v).or_default() += 1;
    }
    holders
        .iter()
        .find(|(_, c)| 2 * **c > origins.len())
        .or_else(|| holders.iter().next())
        .map(|(v, _)| (*v).clone())
}

impl DetConciliator {
    pub fn new(me: ProcessorId, n: u32, start: Round, input: Value) -> DetConciliator {
        assert!(n >= 1, "the conciliator needs at least one chain round");
        DetConciliator {
            me,
            n,
            start,
            input,
            extracted: BTreeSet::new(),
            relay: Vec::new(),
            candidate: None,
            output: None,
        }
    }

    /// Rounds the instance takes.
    pub fn len(&self) -> u32 {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The tuples `e_p` collected so far.
    pub fn extracted(&self) -> &BTreeSet<(ProcessorId, Value)> {
        &self.extracted
    }

    pub fn candidate(&self) -> Option<&Value> {
        self.candidate.as_ref()
    }

    pub fn output(&self) -> Option<&Value> {
        self.output.as_ref()
    }

    fn step(&self, round: Round) -> Result<u32, ProtocolError> {
        round
            .get()
            .checked_sub(self.start.get())
            .map(|d| d + 1)
            .filter(|s| *s <= self.n + 1)
            .ok_or_else(|| ProtocolError("round outside the conciliator instance".into()))
    }

    pub fn step_send(&mut self, round: Round) -> Result<Vec<Payload>, ProtocolError> {
        let step = self.step(round)?;
        Ok(if step == 1 {
            vec![Payload::signed(self.me, round, Payload::Value(self.input.clone()))]
        } else if step <= self.n {
            self.relay
                .iter()
                .map(|c| Payload::signed(self.me, round, c.clone()))
                .collect()
        } else {
            let c = self
                .candidate
                .clone()
                .ok_or_else(|| ProtocolError("no candidate: e_p is empty".into()))?;
            vec![Payload::Value(c)]
        })
    }

    pub fn step_receive(
        &mut self,
        round: Round,
        view: &IiabView,
    ) -> Result<Option<Value>, ProtocolError> {
        let step = self.step(round)?;
        if step <= self.n {
            let mut relay = Vec::new();
            for (_, m) in view.messages() {
                let Some((signers, v)) = parse_chain(m, self.start, step) else {
                    continue;
                };
                if self.extracted.insert((signers[signers.len() - 1], v)) && !signers.contains(&self.me) {
                    relay.push(m.clone());
                }
            }
            self.relay = if step < self.n { relay } else { Vec::new() };
            if step == self.n {
                self.candidate = candidate_of(&self.extracted);
            }
            return Ok(None);
        }
        let candidate = self
            .candidate
            .clone()
            .ok_or_else(|| ProtocolError("no candidate: e_p is empty".into()))?;
        let out = match majority_message(view) {
            Some(Payload::Value(v)) => v,
            _ => candidate,
        };
        self.output = Some(out.clone());
        Ok(Some(out))
    }
}

impl Process for DetConciliator {
    type Output = Value;

    fn send(&mut self, round: Round) -> Result<Vec<Payload>, ProtocolError> {
        self.step_send(round)
    }

    fn receive(
        &mut self,
        round: Round,
        view: &IiabView,
        _: Option<ProcessorId>,
    ) -> Result<Option<Value>, ProtocolError> {
        self.step_receive(round, view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{
        AdversaryContext, AdversaryDecision, EngineConfig, EngineError, IiabEngine, Injector,
        LeaderContext, LeaderPolicy,
    };
    use crate::model::{Participation, ParticipationSchedule};

    fn p(i: u32) -> ProcessorId {
        ProcessorId(i)
    }

    fn v(x: u8) -> Value {
        Value::new(vec![x])
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

    struct Script(Vec<AdversaryDecision>);
    impl Injector for Script {
        fn inject(&mut self, _: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
            Ok(if self.0.is_empty() {
                AdversaryDecision::default()
            } else {
                self.0.remove(0)
            })
        }
    }

    fn run(
        n: u32,
        inputs: &[(u32, u8)],
        f: &[u32],
        script: Vec<AdversaryDecision>,
    ) -> BTreeMap<ProcessorId, DetConciliator> {
        let schedule = ParticipationSchedule::constant(
            Participation::new(inputs.iter().map(|(q, _)| p(*q)), f.iter().map(|i| p(*i))),
            n + 1,
        );
        let mut engine = IiabEngine::new(schedule, EngineConfig::default());
        let mut procs: BTreeMap<_, _> = inputs
            .iter()
            .map(|(q, x)| (p(*q), DetConciliator::new(p(*q), n, Round::FIRST, v(*x))))
            .collect();
        let mut adv = Script(script);
        for _ in 0..=n {
            engine.run_round(&mut procs, &mut adv, &mut NoLeader).unwrap();
        }
        procs
    }

    #[test]
    fn unanimous_pair_outputs_input() {
        let procs = run(2, &[(1, 5), (2, 5)], &[], vec![]);
        assert!(procs.values().all(|c| c.output() == Some(&v(5))));
    }

    #[test]
    fn majority_value_wins() {
        let procs = run(2, &[(1, 1), (2, 1), (3, 2)], &[], vec![]);
        assert!(procs.values().all(|c| c.output() == Some(&v(1))));
    }

    #[test]
    fn smallest_value_without_majority() {
        let procs = run(2, &[(1, 3), (2, 2), (3, 1)], &[], vec![]);
        assert!(procs.values().all(|c| c.output() == Some(&v(1))));
    }

    #[test]
    fn equivocating_origin_cannot_split_candidates() {
        // p1 signs 2 for p2 and 3 for p3 in round 1; both tuples reach
        // everyone through the relays of round 2.
        let mut d = AdversaryDecision::default();
        d.inject(p(1), p(2), Payload::signed(p(1), Round::at(1), Payload::Value(v(2))));
        d.inject(p(1), p(3), Payload::signed(p(1), Round::at(1), Payload::Value(v(3))));
        let procs = run(2, &[(1, 1), (2, 2), (3, 3)], &[1], vec![d]);
        assert_eq!(procs[&p(2)].extracted(), procs[&p(3)].extracted());
        let outs: BTreeSet<_> = procs.values().map(|c| c.output().cloned()).collect();
        assert_eq!(outs.len(), 1);
    }

    #[test]
    fn chains_are_validated() {
        let s = Round::at(4);
        let c1 = Payload::signed(p(1), s, Payload::Value(v(9)));
        let c2 = Payload::signed(p(2), Round::at(5), c1.clone());
        assert_eq!(parse_chain(&c1, s, 1), Some((vec![p(1)], v(9))));
        assert_eq!(parse_chain(&c2, s, 2), Some((vec![p(2), p(1)], v(9))));
        assert_eq!(parse_chain(&c2, s, 1), None);
        let repeated = Payload::signed(p(1), Round::at(5), c1.clone());
        assert_eq!(parse_chain(&repeated, s, 2), None);
        let wrong_round = Payload::signed(p(2), Round::at(6), c1);
        assert_eq!(parse_chain(&wrong_round, s, 2), None);
    }

    #[test]
    fn candidate_rule() {
        let e: BTreeSet<_> = [(p(1), v(2)), (p(1), v(3)), (p(2), v(2)), (p(3), v(3))].into();
        assert_eq!(candidate_of(&e), Some(v(2)));
        let e: BTreeSet<_> = [(p(1), v(4)), (p(2), v(3))].into();
        assert_eq!(candidate_of(&e), Some(v(3)));
        assert_eq!(candidate_of(&BTreeSet::new()), None);
    }
}
