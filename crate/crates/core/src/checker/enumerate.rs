use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{ParticipationSchedule, Payload, ProcessorId, Round};
use crate::noeq::{enumerate_shapes, shape_count, NoEqAdversaryDecision};

use super::EnvelopeExceeded;

pub const MAX_PROCESSORS: usize = 4;
pub const MAX_ROUNDS: u32 = 3;
pub const MAX_ALPHABET: usize = 3;
/// Hard cap on enumerated behaviors, whatever the parameters.
pub const MAX_BEHAVIORS: u128 = 20_000_000;

/// Messages available to the adversary in each round: the alphabet plus
/// what the protocol itself emits that round, without duplicates.
pub fn round_alphabets(alphabet: &[Payload], emitted: &[Vec<Payload>], rounds: u32) -> Vec<Vec<Payload>> {
    (0..rounds as usize)
        .map(|r| {
            let mut out: Vec<Payload> = Vec::new();
            for m in alphabet.iter().chain(emitted.get(r).into_iter().flatten()) {
                if !out.contains(m) {
                    out.push(m.clone());
                }
            }
            out
        })
        .collect()
}

/// Closed-form number of complete behaviors: the product over rounds and
/// impersonated processors of the per-processor shape count.
pub fn behavior_count(schedule: &ParticipationSchedule, alphabets: &[Vec<Payload>], receivers: usize) -> u128 {
    schedule
        .rounds()
        .iter()
        .zip(alphabets)
        .map(|(p, a)| (shape_count(a.len() as u64, receivers as u32) as u128).pow(p.impersonated.len() as u32))
        .product()
}

/// Every complete no-eq adversary behavior over `schedule`: one valid
/// decision per round, giving every impersonated processor a shape whose
/// messages come from `alphabet` or from `emitted[r]`. Receivers are the
/// schedule's universe together with `observers`.
pub fn enumerate_noeq_behaviors(
    schedule: &ParticipationSchedule,
    observers: &BTreeSet<ProcessorId>,
    alphabet: &[Payload],
    emitted: &[Vec<Payload>],
) -> Result<Vec<Vec<NoEqAdversaryDecision>>, EnvelopeExceeded> {
    let mut receivers = schedule.universe();
    receivers.extend(observers);
    let alphabets = round_alphabets(alphabet, emitted, schedule.horizon());
    let estimate = behavior_count(schedule, &alphabets, receivers.len());
    let refuse = |reason| Err(EnvelopeExceeded { reason, estimate });
    if receivers.len() > MAX_PROCESSORS {
        return refuse("more than 4 processors");
    }
    if schedule.horizon() > MAX_ROUNDS {
        return refuse("more than 3 rounds");
    }
    if alphabet.len() > MAX_ALPHABET {
        return refuse("alphabet larger than 3");
    }
    if estimate > MAX_BEHAVIORS {
        return refuse("too many behaviors");
    }
    let mut behaviors: Vec<Vec<NoEqAdversaryDecision>> = vec![Vec::new()];
    for (i, part) in schedule.rounds().iter().enumerate() {
        let shapes = enumerate_shapes(&alphabets[i], &receivers);
        let mut decisions = vec![NoEqAdversaryDecision::new()];
        for f in &part.impersonated {
            decisions = decisions
                .into_iter()
                .flat_map(|d| shapes.iter().map(move |s| d.clone().with(*f, s.clone())))
                .collect();
        }
        behaviors = behaviors
            .into_iter()
            .flat_map(|b| {
                decisions.iter().map(move |d| {
                    let mut b = b.clone();
                    b.push(d.clone());
                    b
                })
            })
            .collect();
        debug_assert!(decisions.iter().all(|d| d
            .validate(Round::at(i as u32 + 1), part, &receivers)
            .is_ok()));
    }
    Ok(behaviors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Participation;
    use std::collections::HashSet;

    fn p(i: u32) -> ProcessorId {
        ProcessorId(i)
    }

    fn schedule(n: u32, f: &[u32], rounds: u32) -> ParticipationSchedule {
        ParticipationSchedule::constant(
            Participation::new((1..=n).map(p), f.iter().map(|i| p(*i))),
            rounds,
        )
    }

    #[test]
    fn single_round_single_letter() {
        let s = schedule(3, &[3], 1);
        let b = enumerate_noeq_behaviors(&s, &BTreeSet::new(), &[Payload::value("a")], &[]).unwrap();
        // Silent, 7 nonempty λ sets, Uniform(a), 6 proper splits.
        assert_eq!(b.len(), 15);
        let set: HashSet<_> = b.iter().map(|x| alloc::format!("{x:?}")).collect();
        assert_eq!(set.len(), b.len());
    }

    #[test]
    fn no_adversary_means_one_behavior() {
        let s = schedule(2, &[], 2);
        let b = enumerate_noeq_behaviors(&s, &BTreeSet::new(), &[Payload::value("a")], &[]).unwrap();
        assert_eq!(b, vec![vec![NoEqAdversaryDecision::new(), NoEqAdversaryDecision::new()]]);
    }

    #[test]
    fn count_matches_closed_form() {
        let ab = [Payload::value("a"), Payload::value("b")];
        let emitted = vec![Vec::new(), vec![Payload::value("c")]];
        let s = schedule(3, &[3], 2);
        let b = enumerate_noeq_behaviors(&s, &BTreeSet::new(), &ab, &emitted).unwrap();
        // a(2^k-1)+2^k for k=3: 22 with two letters, 29 with three.
        assert_eq!(b.len(), 22 * 29);
        let set: HashSet<_> = b.iter().map(|x| alloc::format!("{x:?}")).collect();
        assert_eq!(set.len(), b.len());
    }

    #[test]
    fn envelope_is_enforced() {
        let s = schedule(5, &[5], 1);
        let e = enumerate_noeq_behaviors(&s, &BTreeSet::new(), &[Payload::value("a")], &[]).unwrap_err();
        assert_eq!(e.estimate, 31 + 32);
        let s = schedule(3, &[3], 4);
        assert!(enumerate_noeq_behaviors(&s, &BTreeSet::new(), &[Payload::value("a")], &[]).is_err());
    }
}
