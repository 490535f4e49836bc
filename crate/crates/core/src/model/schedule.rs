use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use super::{ProcessorId, Round};

/// One round of a participation schedule: `O_r` and `F_r`; `W_r = O_r \ F_r`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Participation {
    pub online: BTreeSet<ProcessorId>,
    pub impersonated: BTreeSet<ProcessorId>,
}

impl Participation {
    pub fn new(
        online: impl IntoIterator<Item = ProcessorId>,
        impersonated: impl IntoIterator<Item = ProcessorId>,
    ) -> Participation {
        Participation {
            online: online.into_iter().collect(),
            impersonated: impersonated.into_iter().collect(),
        }
    }

    pub fn well_behaved(&self) -> BTreeSet<ProcessorId> {
        self.online.difference(&self.impersonated).copied().collect()
    }

    pub fn is_online(&self, p: ProcessorId) -> bool {
        self.online.contains(&p)
    }

    pub fn is_impersonated(&self, p: ProcessorId) -> bool {
        self.impersonated.contains(&p)
    }

    pub fn is_well_behaved(&self, p: ProcessorId) -> bool {
        self.is_online(p) && !self.is_impersonated(p)
    }

    /// Checks the three per-round invariants for round `round`.
    pub fn violations(&self, round: Round) -> Vec<ScheduleViolation> {
        let mut out = Vec::new();
        if self.online.is_empty() {
            out.push(ScheduleViolation::EmptyOnline { round });
        }
        let stray: Vec<ProcessorId> = self.impersonated.difference(&self.online).copied().collect();
        if !stray.is_empty() {
            out.push(ScheduleViolation::ImpersonatedNotOnline { round, ids: stray });
        }
        let impersonated = self.impersonated.intersection(&self.online).count();
        let well_behaved = self.online.len() - impersonated;
        if impersonated >= well_behaved {
            out.push(ScheduleViolation::NotMinority {
                round,
                impersonated,
                well_behaved,
            });
        }
        out
    }
}

/// Per-round `(O_r, F_r)` up to a finite horizon.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ParticipationSchedule {
    rounds: Vec<Participation>,
}

impl ParticipationSchedule {
    pub fn new(rounds: Vec<Participation>) -> ParticipationSchedule {
        ParticipationSchedule { rounds }
    }

    /// Same participation for `horizon` rounds.
    pub fn constant(participation: Participation, horizon: u32) -> ParticipationSchedule {
        ParticipationSchedule {
            rounds: (0..horizon).map(|_| participation.clone()).collect(),
        }
    }

    pub fn horizon(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn at(&self, round: Round) -> Option<&Participation> {
        self.rounds.get(round.get() as usize - 1)
    }

    pub fn rounds(&self) -> &[Participation] {
        &self.rounds
    }

    pub fn push(&mut self, participation: Participation) {
        self.rounds.push(participation);
    }

    /// Every processor online in some round.
    pub fn universe(&self) -> BTreeSet<ProcessorId> {
        self.rounds.iter().flat_map(|p| p.online.iter().copied()).collect()
    }

    /// `∪ F_r` over rounds `from..=horizon`.
    pub fn impersonated_from(&self, from: Round) -> BTreeSet<ProcessorId> {
        self.rounds
            .iter()
            .skip(from.get() as usize - 1)
            .flat_map(|p| p.impersonated.iter().copied())
            .collect()
    }

    /// Earliest round `R` such that `O_r = O_R` for every `R ≤ r ≤ horizon`.
    pub fn stabilization_round(&self) -> Option<Round> {
        let last = self.rounds.last()?;
        let mut index = self.rounds.len();
        while index > 1 && self.rounds[index - 2].online == last.online {
            index -= 1;
        }
        Round::new(index as u32)
    }

    /// The schedule restricted to rounds `from..from+len`, renumbered from 1.
    pub fn window(&self, from: Round, len: u32) -> ParticipationSchedule {
        let start = from.get() as usize - 1;
        let end = (start + len as usize).min(self.rounds.len());
        ParticipationSchedule {
            rounds: self.rounds[start.min(end)..end].to_vec(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ScheduleViolation {
    EmptyHorizon,
    EmptyOnline {
        round: Round,
    },
    ImpersonatedNotOnline {
        round: Round,
        ids: Vec<ProcessorId>,
    },
    NotMinority {
        round: Round,
        impersonated: usize,
        well_behaved: usize,
    },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleViolation::EmptyHorizon => f.write_str("schedule has no rounds"),
            ScheduleViolation::EmptyOnline { round } => write!(f, "{round}: O is empty"),
            ScheduleViolation::ImpersonatedNotOnline { round, ids } => {
                write!(f, "{round}: F ⊄ O (")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{id}")?;
                }
                f.write_str(" not online)")
            }
            ScheduleViolation::NotMinority {
                round,
                impersonated,
                well_behaved,
            } => write!(f, "{round}: |F|={impersonated} not < |W|={well_behaved}"),
        }
    }
}

/// One record per invariant broken; empty iff the schedule is valid.
pub fn validate_schedule(schedule: &ParticipationSchedule) -> Vec<ScheduleViolation> {
    if schedule.rounds.is_empty() {
        return alloc::vec![ScheduleViolation::EmptyHorizon];
    }
    schedule
        .rounds
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.violations(Round::at(i as u32 + 1)))
        .collect()
}

/// `F_r ⊆ F_{r+1}` for every `r < horizon`.
pub fn is_growing(schedule: &ParticipationSchedule) -> bool {
    schedule
        .rounds
        .windows(2)
        .all(|w| w[0].impersonated.is_subset(&w[1].impersonated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ids(xs: &[u32]) -> Vec<ProcessorId> {
        xs.iter().map(|&x| ProcessorId(x)).collect()
    }

    fn round(online: &[u32], imp: &[u32]) -> Participation {
        Participation::new(ids(online), ids(imp))
    }

    #[test]
    fn valid_constant_schedule() {
        let s = ParticipationSchedule::constant(round(&[1, 2, 3], &[1]), 3);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn minority_must_be_strict() {
        let s = ParticipationSchedule::new(vec![round(&[1, 2], &[1])]);
        let v = validate_schedule(&s);
        assert_eq!(
            v,
            vec![ScheduleViolation::NotMinority {
                round: Round::at(1),
                impersonated: 1,
                well_behaved: 1
            }]
        );
        assert_eq!(alloc::format!("{}", v[0]), "r1: |F|=1 not < |W|=1");
    }

    #[test]
    fn impersonated_must_be_online() {
        let s = ParticipationSchedule::new(vec![round(&[1, 2, 3], &[4])]);
        let v = validate_schedule(&s);
        assert!(matches!(
            v.as_slice(),
            [ScheduleViolation::ImpersonatedNotOnline { ids, .. }] if ids == &[ProcessorId(4)]
        ));
    }

    #[test]
    fn empty_rounds_and_horizon() {
        assert_eq!(
            validate_schedule(&ParticipationSchedule::default()),
            vec![ScheduleViolation::EmptyHorizon]
        );
        let s = ParticipationSchedule::new(vec![round(&[], &[])]);
        // Empty O also fails the minority check: 0 is not < 0.
        assert_eq!(validate_schedule(&s).len(), 2);
    }

    #[test]
    fn growing() {
        let s = ParticipationSchedule::new(vec![
            round(&[1, 2, 3], &[]),
            round(&[1, 2, 3], &[1]),
            round(&[1, 2, 3], &[1]),
        ]);
        assert!(is_growing(&s));
        let s = ParticipationSchedule::new(vec![round(&[1, 2, 3], &[1]), round(&[1, 2, 3], &[])]);
        assert!(!is_growing(&s));
        assert!(is_growing(&ParticipationSchedule::constant(round(&[1, 2, 3], &[1]), 4)));
    }

    #[test]
    fn stabilization_round_is_earliest_constant_suffix() {
        let s = ParticipationSchedule::new(vec![
            round(&[1, 2], &[]),
            round(&[1, 2, 3], &[]),
            round(&[1, 2, 3], &[1]),
            round(&[1, 2, 3], &[1]),
        ]);
        assert_eq!(s.stabilization_round(), Some(Round::at(2)));
        assert_eq!(s.impersonated_from(Round::at(2)).len(), 1);
        assert_eq!(s.window(Round::at(2), 2).horizon(), 2);
    }

    /// Reference predicate written directly from the invariant list.
    fn reference_valid(rounds: &[(u8, u8)]) -> bool {
        !rounds.is_empty()
            && rounds.iter().all(|&(o, f)| {
                let online = o.count_ones();
                f & !o == 0 && online > 0 && 2 * f.count_ones() < online
            })
    }

    #[test]
    fn exhaustive_small_schedules() {
        // Every (O, F) over P = {1..4} for horizons 1..=2 (and spot checks
        // at 3 via proptest below).
        let masks: Vec<(u8, u8)> = (0u8..16)
            .flat_map(|o| (0u8..16).map(move |f| (o, f)))
            .collect();
        let to_round = |(o, f): (u8, u8)| {
            let pick = |m: u8| (0..4).filter(move |i| m & (1 << i) != 0).map(|i| ProcessorId(i + 1));
            Participation::new(pick(o), pick(f))
        };
        for &a in &masks {
            let s = ParticipationSchedule::new(vec![to_round(a)]);
            assert_eq!(validate_schedule(&s).is_empty(), reference_valid(&[a]));
            for &b in masks.iter().step_by(7) {
                let s = ParticipationSchedule::new(vec![to_round(a), to_round(b)]);
                assert_eq!(validate_schedule(&s).is_empty(), reference_valid(&[a, b]));
            }
        }
    }

    proptest! {
        #[test]
        fn validation_matches_reference(rounds in proptest::collection::vec((0u8..16, 0u8..16), 1..=3)) {
            let pick = |m: u8| (0..4).filter(move |i| m & (1 << i) != 0).map(|i| ProcessorId(i + 1));
            let s = ParticipationSchedule::new(
                rounds.iter().map(|&(o, f)| Participation::new(pick(o), pick(f))).collect(),
            );
            prop_assert_eq!(validate_schedule(&s).is_empty(), reference_valid(&rounds));
        }
    }
}
