use alloc::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::model::{Participation, ProcessorId, Round};

use super::EngineError;

/// How the leader-election coin behaves.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum OracleMode {
    /// No oracle; processes see no leader.
    #[default]
    Disabled,
    /// Fair coin per round from the engine RNG.
    Honest,
    AlwaysSucceed,
    AlwaysFail,
}

/// One round's leader-election outcome.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct OracleDraw {
    pub round: Round,
    pub success: bool,
    pub leaders: BTreeMap<ProcessorId, ProcessorId>,
}

impl OracleDraw {
    pub fn leader_of(&self, p: ProcessorId) -> Option<ProcessorId> {
        self.leaders.get(&p).copied()
    }
}

pub struct LeaderContext<'a> {
    pub round: Round,
    pub participation: &'a Participation,
    pub universe: &'a BTreeSet<ProcessorId>,
}

/// The adversary's latitude inside the oracle guarantee.
pub trait LeaderPolicy {
    /// The common leader on success; must be well-behaved this round.
    fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId;
    /// Arbitrary per-processor leaders on failure; must cover the universe.
    fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId>;
}

/// Flips the round's coin and lets `policy` fill in the adversarial choices.
pub fn draw_leaders<R: Rng + ?Sized>(
    rng: &mut R,
    mode: OracleMode,
    ctx: &LeaderContext<'_>,
    policy: &mut dyn LeaderPolicy,
) -> Result<Option<OracleDraw>, EngineError> {
    let success = match mode {
        OracleMode::Disabled => return Ok(None),
        OracleMode::Honest => rng.gen_bool(0.5),
        OracleMode::AlwaysSucceed => true,
        OracleMode::AlwaysFail => false,
    };
    let leaders = if success {
        let leader = policy.on_success(ctx);
        if !ctx.participation.is_well_behaved(leader) {
            return Err(EngineError::InvalidLeader {
                round: ctx.round,
                leader,
            });
        }
        ctx.universe.iter().map(|p| (*p, leader)).collect()
    } else {
        let leaders = policy.on_failure(ctx);
        if let Some(p) = ctx.universe.iter().find(|p| !leaders.contains_key(p)) {
            return Err(EngineError::IncompleteLeaders {
                round: ctx.round,
                processor: *p,
            });
        }
        leaders
    };
    Ok(Some(OracleDraw {
        round: ctx.round,
        success,
        leaders,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Lowest;

    impl LeaderPolicy for Lowest {
        fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
            *ctx.participation.well_behaved().iter().next().unwrap()
        }
        fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
            ctx.universe.iter().map(|p| (*p, *p)).collect()
        }
    }

    struct PicksImpersonated;

    impl LeaderPolicy for PicksImpersonated {
        fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
            *ctx.participation.impersonated.iter().next().unwrap()
        }
        fn on_failure(&mut self, _: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
            BTreeMap::new()
        }
    }

    fn setup() -> (Participation, BTreeSet<ProcessorId>) {
        let part = Participation::new([1, 2, 3].map(ProcessorId), [ProcessorId(1)]);
        let universe = part.online.clone();
        (part, universe)
    }

    #[test]
    fn success_gives_common_well_behaved_leader() {
        let (part, universe) = setup();
        let ctx = LeaderContext {
            round: Round::FIRST,
            participation: &part,
            universe: &universe,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = draw_leaders(&mut rng, OracleMode::AlwaysSucceed, &ctx, &mut Lowest)
            .unwrap()
            .unwrap();
        assert!(d.success);
        assert!(d.leaders.values().all(|l| *l == ProcessorId(2)));
    }

    #[test]
    fn failure_is_unconstrained() {
        let (part, universe) = setup();
        let ctx = LeaderContext {
            round: Round::FIRST,
            participation: &part,
            universe: &universe,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = draw_leaders(&mut rng, OracleMode::AlwaysFail, &ctx, &mut Lowest)
            .unwrap()
            .unwrap();
        assert_eq!(d.leader_of(ProcessorId(1)), Some(ProcessorId(1)));
        assert_eq!(d.leader_of(ProcessorId(3)), Some(ProcessorId(3)));
    }

    #[test]
    fn impersonated_leader_on_success_aborts() {
        let (part, universe) = setup();
        let ctx = LeaderContext {
            round: Round::FIRST,
            participation: &part,
            universe: &universe,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            draw_leaders(&mut rng, OracleMode::AlwaysSucceed, &ctx, &mut PicksImpersonated),
            Err(EngineError::InvalidLeader { .. })
        ));
        assert!(matches!(
            draw_leaders(&mut rng, OracleMode::AlwaysFail, &ctx, &mut PicksImpersonated),
            Err(EngineError::IncompleteLeaders { .. })
        ));
    }

    #[test]
    fn honest_coin_is_fair() {
        let (part, universe) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut successes = 0;
        for r in 1..=10_000 {
            let ctx = LeaderContext {
                round: Round::at(r),
                participation: &part,
                universe: &universe,
            };
            if draw_leaders(&mut rng, OracleMode::Honest, &ctx, &mut Lowest)
                .unwrap()
                .unwrap()
                .success
            {
                successes += 1;
            }
        }
        let fraction = successes as f64 / 10_000.0;
        assert!((fraction - 0.5).abs() <= 0.02, "success fraction {fraction}");
    }
}
