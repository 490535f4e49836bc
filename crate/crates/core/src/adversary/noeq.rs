//! Adversaries of the no-equivocation model: one shape per impersonated
//! processor and round.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Payload, ProcessorId, Value};
use crate::noeq::{NoEqAdversaryDecision, NoEqContext, NoEqInjector, Shape};

/// Every impersonated processor is silent.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoEqSilent;

impl NoEqInjector for NoEqSilent {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        NoEqAdversaryDecision::silent(&ctx.participation.impersonated)
    }
}

/// Every impersonated processor broadcasts what its process intended.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoEqMimic;

impl NoEqInjector for NoEqMimic {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        let mut d = NoEqAdversaryDecision::new();
        for f in &ctx.participation.impersonated {
            let shape = match ctx.intended.get(f) {
                Some(m) => Shape::Uniform(m.clone()),
                None => Shape::Silent,
            };
            d.set(*f, shape);
        }
        d
    }
}

/// Every impersonated processor is λ for everyone.
#[derive(Clone, Copy, Debug, Default)]
pub struct LambdaFlood;

impl NoEqInjector for LambdaFlood {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        let mut d = NoEqAdversaryDecision::new();
        for f in &ctx.participation.impersonated {
            d.set(*f, Shape::LambdaOnly(ctx.universe.clone()));
        }
        d
    }
}

/// Keeps well-behaved payloads from reaching a strict majority.
///
/// Impersonated processors are used in id order. While the runner-up honest
/// payload is heard strictly less often than the leading one, the next
/// impersonated processor broadcasts the runner-up; otherwise it is λ for
/// everyone, which raises the heard-of count without helping any payload.
#[derive(Clone, Copy, Debug, Default)]
pub struct Balancer;

impl NoEqInjector for Balancer {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        let mut counts: BTreeMap<&Payload, usize> = BTreeMap::new();
        for m in ctx.honest.into_iter().flat_map(|h| h.values()) {
            *counts.entry(m).or_default() += 1;
        }
        let mut d = NoEqAdversaryDecision::new();
        for f in &ctx.participation.impersonated {
            let mut ranked: Vec<(&Payload, usize)> = counts.iter().map(|(m, c)| (*m, *c)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let shape = match ranked.as_slice() {
                [(_, top), (second, c), ..] if c < top => {
                    let second = (*second).clone();
                    *counts.get_mut(&second).unwrap() += 1;
                    Shape::Uniform(second)
                }
                _ => Shape::LambdaOnly(ctx.universe.clone()),
            };
            d.set(*f, shape);
        }
        d
    }
}

/// A uniformly random shape per impersonated processor, over the visible
/// payloads and a few fresh values.
#[derive(Clone, Debug)]
pub struct NoEqRandom {
    rng: ChaCha8Rng,
}

impl NoEqRandom {
    pub fn new(seed: u64) -> Self {
        NoEqRandom {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn subset(&mut self, universe: &BTreeSet<ProcessorId>) -> BTreeSet<ProcessorId> {
        universe
            .iter()
            .filter(|_| self.rng.gen_bool(0.5))
            .copied()
            .collect()
    }
}

impl NoEqInjector for NoEqRandom {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        let mut pool: Vec<Payload> = ctx
            .honest
            .into_iter()
            .flat_map(|h| h.values())
            .chain(ctx.intended.values())
            .cloned()
            .collect();
        for v in [b"a", b"b"] {
            pool.push(Payload::Value(Value::from(&v[..])));
        }
        let mut d = NoEqAdversaryDecision::new();
        for f in &ctx.participation.impersonated {
            let m = pool.choose(&mut self.rng).cloned().expect("pool is never empty");
            let shape = match self.rng.gen_range(0..4) {
                0 => Shape::Silent,
                1 => Shape::Uniform(m),
                2 => {
                    let s = self.subset(ctx.universe);
                    if s.is_empty() || s == *ctx.universe {
                        let q = *ctx.universe.iter().choose(&mut self.rng).expect("nonempty universe");
                        Shape::Split(m, [q].into())
                    } else {
                        Shape::Split(m, s)
                    }
                }
                _ => Shape::LambdaOnly(self.subset(ctx.universe)),
            };
            let shape = match shape.check(ctx.universe) {
                Ok(()) => shape,
                Err(_) => Shape::LambdaOnly(ctx.universe.clone()),
            };
            d.set(*f, shape);
        }
        d
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InvalidScript {
    pub round: usize,
    pub processor: ProcessorId,
    pub reason: &'static str,
}

impl fmt::Display for InvalidScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "script round {}: shape of {} is invalid: {}",
            self.round, self.processor, self.reason
        )
    }
}

/// Plays scripted shapes, indexed by no-eq round; impersonated processors
/// without a scripted shape are silent.
#[derive(Clone, Debug, Default)]
pub struct NoEqScript {
    rounds: Vec<NoEqAdversaryDecision>,
}

impl NoEqScript {
    pub fn new(
        rounds: Vec<NoEqAdversaryDecision>,
        receivers: &BTreeSet<ProcessorId>,
    ) -> Result<Self, InvalidScript> {
        for (i, d) in rounds.iter().enumerate() {
            for (p, shape) in d.iter() {
                shape.check(receivers).map_err(|reason| InvalidScript {
                    round: i + 1,
                    processor: p,
                    reason,
                })?;
            }
        }
        Ok(NoEqScript { rounds })
    }

    pub fn rounds(&self) -> &[NoEqAdversaryDecision] {
        &self.rounds
    }
}

impl NoEqInjector for NoEqScript {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        let scripted = self.rounds.get(ctx.round.get() as usize - 1);
        let mut d = NoEqAdversaryDecision::new();
        for f in &ctx.participation.impersonated {
            let shape = scripted
                .and_then(|s| s.shape_of(*f))
                .cloned()
                .unwrap_or(Shape::Silent);
            d.set(*f, shape);
        }
        d
    }
}
