//! Participation schedule generators. Every generator validates what it
//! builds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{validate_schedule, Participation, ParticipationSchedule, ProcessorId, Round, ScheduleViolation};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ScheduleError {
    Unsatisfiable(&'static str),
    Invalid(Vec<ScheduleViolation>),
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::Unsatisfiable(why) => write!(f, "unsatisfiable parameters: {why}"),
            ScheduleError::Invalid(v) => {
                f.write_str("invalid schedule:")?;
                for x in v {
                    write!(f, " {x};")?;
                }
                Ok(())
            }
        }
    }
}

fn checked(rounds: Vec<Participation>) -> Result<ParticipationSchedule, ScheduleError> {
    let s = ParticipationSchedule::new(rounds);
    let v = validate_schedule(&s);
    if v.is_empty() {
        Ok(s)
    } else {
        Err(ScheduleError::Invalid(v))
    }
}

fn ids(range: core::ops::RangeInclusive<u32>) -> BTreeSet<ProcessorId> {
    range.map(ProcessorId).collect()
}

pub fn constant(
    online: BTreeSet<ProcessorId>,
    impersonated: BTreeSet<ProcessorId>,
    horizon: u32,
) -> Result<ParticipationSchedule, ScheduleError> {
    if horizon == 0 {
        return Err(ScheduleError::Unsatisfiable("horizon is zero"));
    }
    checked(alloc::vec![Participation { online, impersonated }; horizon as usize])
}

/// `O_r = {p1..pn}` throughout; `f` is impersonated from its activation round
/// on.
pub fn growing_adversary(
    n: u32,
    activations: &BTreeMap<ProcessorId, Round>,
    horizon: u32,
) -> Result<ParticipationSchedule, ScheduleError> {
    let online = ids(1..=n);
    if activations.keys().any(|f| !online.contains(f)) {
        return Err(ScheduleError::Unsatisfiable("activated processor outside 1..=n"));
    }
    checked(
        (1..=horizon)
            .map(|r| Participation {
                online: online.clone(),
                impersonated: activations
                    .iter()
                    .filter(|(_, a)| a.get() <= r)
                    .map(|(f, _)| *f)
                    .collect(),
            })
            .collect(),
    )
}

/// Parameters of [`stabilizing_at`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Stabilizing {
    /// Processors `p1..pn`.
    pub n: u32,
    /// Round from which participation is constant.
    pub stable_from: Round,
    /// `|∪_{r≥R} F_r|`.
    pub impersonated: u32,
    pub horizon: u32,
    pub seed: u64,
}

/// Participation churns before `R` and is `O = {p1..pn}` from `R` on. The
/// impersonated processors are `p1..pf`; each gets a random activation round
/// `a ≤ R` and is online and impersonated from `a` on, so the adversary is
/// growing over the whole run. Before `R` every round also has a random
/// nonempty set of other processors online, more than the impersonated
/// ones.
pub fn stabilizing_at(params: Stabilizing) -> Result<ParticipationSchedule, ScheduleError> {
    let Stabilizing {
        n,
        stable_from,
        impersonated: f,
        horizon,
        seed,
    } = params;
    if 2 * f >= n {
        return Err(ScheduleError::Unsatisfiable("need n > 2·|F|"));
    }
    if horizon < stable_from.get() {
        return Err(ScheduleError::Unsatisfiable("horizon ends before stabilization"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let activation: BTreeMap<ProcessorId, u32> = (1..=f)
        .map(|i| (ProcessorId(i), rng.gen_range(1..=stable_from.get())))
        .collect();
    let others: Vec<ProcessorId> = (f + 1..=n).map(ProcessorId).collect();
    let mut rounds = Vec::with_capacity(horizon as usize);
    for r in 1..=horizon {
        let impersonated: BTreeSet<ProcessorId> = activation
            .iter()
            .filter(|(_, a)| **a <= r)
            .map(|(p, _)| *p)
            .collect();
        let online = if r >= stable_from.get() {
            ids(1..=n)
        } else {
            let min = impersonated.len() + 1;
            let k = rng.gen_range(min..=others.len());
            let mut o: BTreeSet<ProcessorId> = others.choose_multiple(&mut rng, k).copied().collect();
            o.extend(&impersonated);
            o
        };
        rounds.push(Participation { online, impersonated });
    }
    checked(rounds)
}

/// Random `window`-sized online sets out of `p1..pn`, with up to
/// `(window-1)/2` impersonated processors, drawn afresh every round.
pub fn churn(n: u32, window: u32, horizon: u32, seed: u64) -> Result<ParticipationSchedule, ScheduleError> {
    if window == 0 || window > n {
        return Err(ScheduleError::Unsatisfiable("need 0 < window ≤ n"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<ProcessorId> = (1..=n).map(ProcessorId).collect();
    checked(
        (0..horizon)
            .map(|_| {
                let online: Vec<ProcessorId> = all.choose_multiple(&mut rng, window as usize).copied().collect();
                let f = rng.gen_range(0..=(window - 1) / 2) as usize;
                Participation {
                    impersonated: online.choose_multiple(&mut rng, f).copied().collect(),
                    online: online.into_iter().collect(),
                }
            })
            .collect(),
    )
}

/// Every round brings `window` never-seen processors, up to `(window-1)/2`
/// of them impersonated: no processor is online twice.
pub fn fresh_churn(window: u32, horizon: u32, seed: u64) -> Result<ParticipationSchedule, ScheduleError> {
    if window == 0 {
        return Err(ScheduleError::Unsatisfiable("window is zero"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    checked(
        (0..horizon)
            .map(|r| {
                let online: Vec<ProcessorId> = (1..=window).map(|i| ProcessorId(r * window + i)).collect();
                let f = rng.gen_range(0..=(window - 1) / 2) as usize;
                Participation {
                    impersonated: online.choose_multiple(&mut rng, f).copied().collect(),
                    online: online.into_iter().collect(),
                }
            })
            .collect(),
    )
}
