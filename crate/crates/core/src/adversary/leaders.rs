//! Adversarial choices of the leader-election oracle.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{LeaderContext, LeaderPolicy};
use crate::model::ProcessorId;

/// On success the lowest-id well-behaved processor leads. On failure every
/// processor follows a different leader, impersonated ones first, so that
/// no two processors read the same message.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeaderWithholder;

impl LeaderPolicy for LeaderWithholder {
    fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
        *ctx.participation
            .well_behaved()
            .iter()
            .next()
            .expect("some processor is well-behaved")
    }

    fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
        let mut candidates: Vec<ProcessorId> = ctx.participation.impersonated.iter().copied().collect();
        candidates.extend(ctx.universe.iter().filter(|p| !ctx.participation.is_impersonated(**p)));
        let n = candidates.len();
        ctx.universe
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let l = candidates[i % n];
                // Never one's own leader when anybody else is available.
                let l = if l == *p && n > 1 { candidates[(i + 1) % n] } else { l };
                (*p, l)
            })
            .collect()
    }
}

/// Lowest-id well-behaved leader on success; everyone follows itself on
/// failure.
#[derive(Clone, Copy, Debug, Default)]
pub struct SelfLeaders;

impl LeaderPolicy for SelfLeaders {
    fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
        LeaderWithholder.on_success(ctx)
    }

    fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
        ctx.universe.iter().map(|p| (*p, *p)).collect()
    }
}

/// Seeded uniform choices.
#[derive(Clone, Debug)]
pub struct RandomLeaders {
    rng: ChaCha8Rng,
}

impl RandomLeaders {
    pub fn new(seed: u64) -> Self {
        RandomLeaders {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl LeaderPolicy for RandomLeaders {
    fn on_success(&mut self, ctx: &LeaderContext<'_>) -> ProcessorId {
        ctx.participation
            .well_behaved()
            .into_iter()
            .choose(&mut self.rng)
            .expect("some processor is well-behaved")
    }

    fn on_failure(&mut self, ctx: &LeaderContext<'_>) -> BTreeMap<ProcessorId, ProcessorId> {
        ctx.universe
            .iter()
            .map(|p| (*p, *ctx.universe.iter().choose(&mut self.rng).unwrap()))
            .collect()
    }
}
