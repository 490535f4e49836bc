//! Adversaries that act directly on IIAB links.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{AdversaryContext, AdversaryDecision, EngineError, Injector};
use crate::model::{Payload, ProcessorId, Round, Value};
use crate::noeq::{NoEqInjector, ShapeCompiler};
use crate::protocols::{ConsensusKind, PhaseKind};

/// Can the adversary put `m` on an impersonated link this round?
pub fn admissible(m: &Payload, ctx: &AdversaryContext<'_>) -> bool {
    let mut ok = true;
    m.for_each_signed(&mut |s| {
        ok &= ctx
            .ledger
            .admits(s, ctx.round, &ctx.participation.impersonated)
    });
    ok
}

/// `m` as sent by the impersonated `f`: a fresh outer signature of someone
/// else is replaced by `f`'s own. `None` if the result is still not
/// admissible.
pub fn resign(m: &Payload, f: ProcessorId, ctx: &AdversaryContext<'_>) -> Option<Payload> {
    let m = match m.as_signed() {
        Some(s) if s.round == ctx.round && s.signer != f => {
            Payload::signed(f, ctx.round, s.content.clone())
        }
        _ => m.clone(),
    };
    admissible(&m, ctx).then_some(m)
}

/// The well-behaved sends the adversary can see: this round's if rushing,
/// else last round's.
fn visible<'a>(ctx: &'a AdversaryContext<'a>) -> &'a BTreeMap<ProcessorId, Vec<Payload>> {
    ctx.honest.unwrap_or(&ctx.previous.honest)
}

/// Injects nothing: impersonated processors look crashed.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl Injector for Silent {
    fn inject(&mut self, _: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        Ok(AdversaryDecision::default())
    }
}

/// Impersonated processors send what their own process would have sent, to
/// everyone.
#[derive(Clone, Copy, Debug, Default)]
pub struct Mimic;

impl Injector for Mimic {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        let mut d = AdversaryDecision::default();
        for (f, msgs) in ctx.intended {
            for m in msgs.iter().filter(|m| admissible(m, ctx)) {
                for q in ctx.universe {
                    d.inject(*f, *q, m.clone());
                }
            }
        }
        Ok(d)
    }
}

/// Each impersonated processor echoes, in its own name, what one
/// well-behaved sender sent to the `targets` and what another sent (with
/// different content) to every other receiver.
///
/// Without explicit targets the lower half of the other receivers, by id,
/// are the targets. With a single distinct honest send every receiver gets
/// that one.
#[derive(Clone, Debug, Default)]
pub struct EquivocatorSplit {
    pub targets: Option<BTreeSet<ProcessorId>>,
}

impl EquivocatorSplit {
    pub fn new(targets: Option<BTreeSet<ProcessorId>>) -> Self {
        EquivocatorSplit { targets }
    }
}

impl Injector for EquivocatorSplit {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        let mut d = AdversaryDecision::default();
        for &f in &ctx.participation.impersonated {
            let mut choices: Vec<Vec<Payload>> = Vec::new();
            for msgs in visible(ctx).values() {
                let echoed: Vec<Payload> = msgs.iter().filter_map(|m| resign(m, f, ctx)).collect();
                if !echoed.is_empty() && !choices.contains(&echoed) {
                    choices.push(echoed);
                }
            }
            let Some(first) = choices.first() else { continue };
            let second = choices.get(1).unwrap_or(first);
            let others: Vec<ProcessorId> = ctx.universe.iter().copied().filter(|q| *q != f).collect();
            let targets: BTreeSet<ProcessorId> = match &self.targets {
                Some(t) => t.clone(),
                None => others.iter().take(others.len().div_ceil(2)).copied().collect(),
            };
            for q in others {
                let msgs = if targets.contains(&q) { first } else { second };
                d.inject_all(f, q, msgs.iter().cloned());
            }
        }
        Ok(d)
    }
}

/// Each impersonated processor sends its intended messages to one receiver
/// only: the lowest-id well-behaved one of the round.
#[derive(Clone, Copy, Debug, Default)]
pub struct Selective;

impl Injector for Selective {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        let mut d = AdversaryDecision::default();
        let Some(target) = ctx.participation.well_behaved().into_iter().next() else {
            return Ok(d);
        };
        for (f, msgs) in ctx.intended {
            d.inject_all(*f, target, msgs.iter().filter(|m| admissible(m, ctx)).cloned());
        }
        Ok(d)
    }
}

/// Seeded random behavior: per impersonated link, nothing, the intended
/// messages, an echo of a random well-behaved sender, replays of old
/// signatures, or a fresh value.
#[derive(Clone, Debug)]
pub struct RandomInjector {
    rng: ChaCha8Rng,
}

impl RandomInjector {
    pub fn new(seed: u64) -> Self {
        RandomInjector {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Injector for RandomInjector {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        let mut d = AdversaryDecision::default();
        let honest = visible(ctx);
        for &f in &ctx.participation.impersonated {
            for &q in ctx.universe {
                match self.rng.gen_range(0..5) {
                    0 => {}
                    1 => {
                        if let Some(msgs) = ctx.intended.get(&f) {
                            d.inject_all(f, q, msgs.iter().filter(|m| admissible(m, ctx)).cloned());
                        }
                    }
                    2 => {
                        if let Some(msgs) = honest.values().choose(&mut self.rng) {
                            d.inject_all(f, q, msgs.iter().filter_map(|m| resign(m, f, ctx)));
                        }
                    }
                    3 => {
                        let replay = ctx
                            .ledger
                            .iter()
                            .filter(|(_, r)| *r < ctx.round)
                            .choose(&mut self.rng);
                        if let Some((s, _)) = replay {
                            d.inject(f, q, Payload::Signed(s.clone()));
                        }
                    }
                    _ => {
                        let v = Payload::Value(Value::new(alloc::vec![self.rng.gen_range(b'a'..=b'c')]));
                        d.inject(f, q, v.clone());
                        d.inject(f, q, Payload::signed(f, ctx.round, v));
                    }
                }
            }
        }
        Ok(d)
    }
}

/// Plays a fixed decision per round; rounds past the script are silent.
#[derive(Clone, Debug, Default)]
pub struct ScriptedInjector {
    pub rounds: Vec<AdversaryDecision>,
}

impl Injector for ScriptedInjector {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        Ok(self
            .rounds
            .get(ctx.round.get() as usize - 1)
            .cloned()
            .unwrap_or_default())
    }
}

/// Drives a consensus run: in simulated phases a no-eq adversary chooses
/// shapes and a [`ShapeCompiler`] realizes them; in native deterministic
/// conciliator phases a plain IIAB adversary acts.
pub struct Phased {
    kind: ConsensusKind,
    noeq: Box<dyn NoEqInjector + Send>,
    native: Box<dyn Injector + Send>,
    compiler: ShapeCompiler,
}

impl Phased {
    pub fn new(
        kind: ConsensusKind,
        noeq: Box<dyn NoEqInjector + Send>,
        native: Box<dyn Injector + Send>,
    ) -> Self {
        Phased {
            kind,
            noeq,
            native,
            compiler: ShapeCompiler::new(),
        }
    }
}

impl Injector for Phased {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        let pos = self.kind.position(ctx.round);
        let simulated = pos.phase == PhaseKind::CommitAdopt || self.kind == ConsensusKind::Probabilistic;
        if !simulated {
            return self.native.inject(ctx);
        }
        if pos.offset.is_multiple_of(2) {
            let noeq_round = Round::at(pos.offset / 2 + 1);
            self.compiler.compile_a(ctx, noeq_round, &mut *self.noeq)
        } else {
            Ok(self.compiler.compile_b(ctx))
        }
    }
}
