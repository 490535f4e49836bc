use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::engine::{AdversaryContext, AdversaryDecision, EngineError};
use crate::model::{Payload, ProcessorId, Round};

use super::{NoEqAdversaryDecision, NoEqContext, NoEqInjector, Shape};

/// Realizes no-eq shapes as IIAB injections over the two rounds of a
/// simulated round.
///
/// Round A: a uniform or split subject `f` signs `m` to everyone. Split and
/// λ-only subjects also sign a conflicting `m'` onto the link to a *sink*, a
/// processor impersonated in round B whose relays the adversary controls;
/// λ-only subjects send nothing else, so honest relayers never hold a claim
/// for them. Round B: every impersonated relayer relays honestly, and adds
/// conflicting claims towards the receivers that must see λ.
///
/// Without any processor impersonated in round B every relayer is honest and
/// all receivers see the same claims, so only uniform outcomes exist: a
/// split degrades to `Uniform(m)` and a nonempty λ-only shape to λ for
/// everyone. [`ShapeCompiler::last_decision`] reports the shapes actually
/// realized.
#[derive(Clone, Debug, Default)]
pub struct ShapeCompiler {
    plan: Option<Plan>,
    last: Option<NoEqAdversaryDecision>,
}

#[derive(Clone, Debug)]
struct Plan {
    round_a: Round,
    sink: Option<ProcessorId>,
    subjects: BTreeMap<ProcessorId, Subject>,
}

#[derive(Clone, Debug)]
struct Subject {
    shape: Shape,
    message: Payload,
    conflict: Payload,
}

/// The payloads of the round-A announcements `<q,A,m>` in `sends`.
fn announced(sends: &BTreeMap<ProcessorId, Vec<Payload>>, round_a: Round) -> BTreeMap<ProcessorId, Payload> {
    sends
        .iter()
        .filter_map(|(q, msgs)| {
            msgs.iter()
                .filter_map(Payload::as_signed)
                .find(|s| s.signer == *q && s.round == round_a)
                .map(|s| (*q, s.content.clone()))
        })
        .collect()
}

impl ShapeCompiler {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shapes realized in the last compiled round.
    pub fn last_decision(&self) -> Option<&NoEqAdversaryDecision> {
        self.last.as_ref()
    }

    /// Asks `adversary` for the shapes of no-eq round `noeq_round` and
    /// returns the round-A injections.
    pub fn compile_a(
        &mut self,
        ctx: &AdversaryContext<'_>,
        noeq_round: Round,
        adversary: &mut dyn NoEqInjector,
    ) -> Result<AdversaryDecision, EngineError> {
        let round_a = ctx.round;
        let honest = ctx.honest.map(|h| announced(h, round_a));
        let intended = announced(ctx.intended, round_a);
        let decision = adversary.decide(&NoEqContext {
            round: noeq_round,
            participation: ctx.participation,
            universe: ctx.universe,
            honest: honest.as_ref(),
            intended: &intended,
        });
        decision.validate(noeq_round, ctx.participation, ctx.universe)?;

        let sink = ctx
            .next_participation
            .and_then(|n| n.impersonated.iter().next().copied());
        let everyone: &BTreeSet<ProcessorId> = ctx.universe;
        let mut out = AdversaryDecision::default();
        let mut subjects = BTreeMap::new();
        let mut realized = NoEqAdversaryDecision::new();
        for (f, shape) in decision.iter() {
            let message = match shape {
                Shape::Uniform(m) | Shape::Split(m, _) => m.clone(),
                _ => intended
                    .get(&f)
                    .cloned()
                    .unwrap_or_else(|| Payload::tagged("filler", [])),
            };
            let conflict = Payload::tagged("conflict", [message.clone()]);
            let shape = match (shape, sink) {
                (Shape::Split(m, _), None) => Shape::Uniform(m.clone()),
                (Shape::LambdaOnly(_), None) => Shape::LambdaOnly(everyone.clone()),
                (s, _) => s.clone(),
            };
            let sign = |m: &Payload| Payload::signed(f, round_a, m.clone());
            match (&shape, sink) {
                (Shape::Silent, _) => {}
                (Shape::Uniform(_), _) => {
                    for q in everyone {
                        out.inject(f, *q, sign(&message));
                    }
                }
                (Shape::Split(..), Some(s)) => {
                    for q in everyone {
                        out.inject(f, *q, sign(&message));
                    }
                    out.inject(f, s, sign(&conflict));
                }
                (Shape::LambdaOnly(_), Some(s)) => {
                    out.inject(f, s, sign(&message));
                    out.inject(f, s, sign(&conflict));
                }
                (Shape::LambdaOnly(_), None) => {
                    for q in everyone {
                        out.inject(f, *q, sign(&message));
                        out.inject(f, *q, sign(&conflict));
                    }
                }
                (Shape::Split(..), None) => unreachable!("degraded above"),
            }
            realized.set(f, shape.clone());
            subjects.insert(
                f,
                Subject {
                    shape,
                    message,
                    conflict,
                },
            );
        }
        self.plan = Some(Plan {
            round_a,
            sink,
            subjects,
        });
        self.last = Some(realized);
        Ok(out)
    }

    /// The round-B injections completing the plan made in round A.
    pub fn compile_b(&mut self, ctx: &AdversaryContext<'_>) -> AdversaryDecision {
        let mut out = AdversaryDecision::default();
        let Some(plan) = self.plan.take() else {
            return out;
        };
        if plan.round_a.next() != ctx.round {
            return out;
        }
        let round_a = plan.round_a;
        let honest = announced(&ctx.previous.honest, round_a);
        let impersonated = &ctx.participation.impersonated;
        debug_assert!(plan.sink.is_none() || plan.sink.is_some_and(|s| impersonated.contains(&s)));
        for &r in impersonated {
            let claim = |q: ProcessorId, m: &Payload| {
                Payload::signed(r, ctx.round, Payload::signed(q, round_a, m.clone()))
            };
            for &x in ctx.universe {
                for (q, m) in &honest {
                    out.inject(r, x, claim(*q, m));
                }
                for (f, s) in &plan.subjects {
                    match &s.shape {
                        Shape::Silent => {}
                        Shape::Uniform(m) => out.inject(r, x, claim(*f, m)),
                        Shape::Split(m, set) => {
                            out.inject(r, x, claim(*f, m));
                            if !set.contains(&x) {
                                out.inject(r, x, claim(*f, &s.conflict));
                            }
                        }
                        Shape::LambdaOnly(set) => {
                            if set.contains(&x) {
                                out.inject(r, x, claim(*f, &s.message));
                                out.inject(r, x, claim(*f, &s.conflict));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
