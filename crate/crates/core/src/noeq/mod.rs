//! The no-equivocation model.
//!
//! Each online processor broadcasts exactly one payload per round. An
//! impersonated processor's delivery is chosen by the adversary among the
//! [`Shape`]s: nothing at all, one message to everyone, or one message to some
//! and the failure notification λ to the rest, or λ to some and nothing to
//! the rest.
//!
//! Two backends run [`NoEqProcess`]es: [`NoEqEngine`] enforces the model
//! directly, [`SimulatedNoEq`] runs each round as two IIAB rounds with
//! signed claims ([`NoEqRelay`]).

mod compile;
mod relay;
mod shape;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt::Debug;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    draw_leaders, EngineConfig, EngineError, LeaderContext, LeaderPolicy, OracleDraw,
    ProtocolError, Reportable, TraceEvent,
};
use crate::model::{NoEqView, Participation, ParticipationSchedule, Payload, ProcessorId, Round};

pub use compile::ShapeCompiler;
pub use relay::{simulate_noeq_round, NoEqRelay, Simulated, SimulatedNoEq};
pub use shape::{
    classify_delivery_profile, enumerate_shapes, noeq_deliver, shape_count, DeliveryCase,
    NoEqAdversaryDecision, Shape,
};

/// A round-driven state machine written against the no-equivocation
/// contract. `round` is the no-eq round index, starting at 1.
pub trait NoEqProcess {
    type Output: Clone + Debug + Reportable;

    /// The single payload broadcast this round. Only called while online.
    fn broadcast(&mut self, round: Round) -> Result<Payload, ProtocolError>;

    /// Called for every processor, online or not.
    fn deliver(
        &mut self,
        round: Round,
        view: &NoEqView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<Self::Output>, ProtocolError>;
}

impl<P: NoEqProcess + ?Sized> NoEqProcess for &mut P {
    type Output = P::Output;

    fn broadcast(&mut self, round: Round) -> Result<Payload, ProtocolError> {
        (**self).broadcast(round)
    }

    fn deliver(
        &mut self,
        round: Round,
        view: &NoEqView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<Self::Output>, ProtocolError> {
        (**self).deliver(round, view, leader)
    }
}

/// What a no-eq adversary may observe.
pub struct NoEqContext<'a> {
    pub round: Round,
    pub participation: &'a Participation,
    pub universe: &'a BTreeSet<ProcessorId>,
    /// Payloads of well-behaved senders; `None` when not rushing.
    pub honest: Option<&'a BTreeMap<ProcessorId, Payload>>,
    /// What impersonated processors would have broadcast.
    pub intended: &'a BTreeMap<ProcessorId, Payload>,
}

pub trait NoEqInjector {
    fn decide(&mut self, ctx: &NoEqContext<'_>) -> NoEqAdversaryDecision;
}

#[derive(Clone, Debug)]
pub struct NoEqReport<O> {
    pub round: Round,
    pub views: BTreeMap<ProcessorId, NoEqView>,
    pub outputs: BTreeMap<ProcessorId, O>,
    pub draw: Option<OracleDraw>,
    /// The shapes in effect, when the adversary was a no-eq adversary.
    pub decision: Option<NoEqAdversaryDecision>,
}

/// Anything that can execute no-eq rounds.
pub trait NoEqBackend {
    fn universe(&self) -> &BTreeSet<ProcessorId>;

    /// Index of the next no-eq round.
    fn next_round(&self) -> Round;

    fn run_round<P: NoEqProcess>(
        &mut self,
        processes: &mut BTreeMap<ProcessorId, P>,
        adversary: &mut dyn NoEqInjector,
        leaders: &mut dyn LeaderPolicy,
    ) -> Result<NoEqReport<P::Output>, EngineError>;

    fn trace(&self) -> &[TraceEvent];
}

/// Native execution of the no-equivocation model.
#[derive(Clone, Debug)]
pub struct NoEqEngine {
    config: EngineConfig,
    schedule: ParticipationSchedule,
    universe: BTreeSet<ProcessorId>,
    next: Round,
    outputs: BTreeMap<ProcessorId, Round>,
    trace: Vec<TraceEvent>,
    rng: ChaCha8Rng,
}

impl NoEqEngine {
    pub fn new(schedule: ParticipationSchedule, config: EngineConfig) -> NoEqEngine {
        NoEqEngine {
            universe: schedule.universe(),
            schedule,
            next: Round::FIRST,
            outputs: BTreeMap::new(),
            trace: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        }
    }

    pub fn with_observers(mut self, observers: impl IntoIterator<Item = ProcessorId>) -> Self {
        self.universe.extend(observers);
        self
    }

    pub fn schedule(&self) -> &ParticipationSchedule {
        &self.schedule
    }
}

impl NoEqBackend for NoEqEngine {
    fn universe(&self) -> &BTreeSet<ProcessorId> {
        &self.universe
    }

    fn next_round(&self) -> Round {
        self.next
    }

    fn run_round<P: NoEqProcess>(
        &mut self,
        processes: &mut BTreeMap<ProcessorId, P>,
        adversary: &mut dyn NoEqInjector,
        leaders: &mut dyn LeaderPolicy,
    ) -> Result<NoEqReport<P::Output>, EngineError> {
        let round = self.next;
        let participation = self
            .schedule
            .at(round)
            .ok_or(EngineError::PastHorizon { round })?;
        let mut honest = BTreeMap::new();
        let mut intended = BTreeMap::new();
        for &p in &participation.online {
            let process = processes
                .get_mut(&p)
                .ok_or(EngineError::MissingProcess { processor: p })?;
            let payload = process
                .broadcast(round)
                .map_err(|error| EngineError::Protocol {
                    round,
                    processor: p,
                    error,
                })?;
            if participation.is_impersonated(p) {
                intended.insert(p, payload);
            } else {
                honest.insert(p, payload);
            }
        }
        let decision = adversary.decide(&NoEqContext {
            round,
            participation,
            universe: &self.universe,
            honest: self.config.rushing.then_some(&honest),
            intended: &intended,
        });
        let draw = draw_leaders(
            &mut self.rng,
            self.config.oracle,
            &LeaderContext {
                round,
                participation,
                universe: &self.universe,
            },
            leaders,
        )?;
        let views = noeq_deliver(round, participation, &self.universe, &honest, &decision)?;
        if self.config.record_events {
            if let Some(d) = &draw {
                self.trace.push(TraceEvent::Oracle(d.clone()));
            }
        }
        let mut outputs = BTreeMap::new();
        for (q, view) in &views {
            let process = processes
                .get_mut(q)
                .ok_or(EngineError::MissingProcess { processor: *q })?;
            let leader = draw.as_ref().and_then(|d| d.leader_of(*q));
            let out = process
                .deliver(round, view, leader)
                .map_err(|error| EngineError::Protocol {
                    round,
                    processor: *q,
                    error,
                })?;
            if let Some(o) = out {
                if self.outputs.insert(*q, round).is_some() {
                    return Err(EngineError::SecondOutput {
                        round,
                        processor: *q,
                    });
                }
                if self.config.record_events {
                    self.trace.push(o.event(round, *q));
                }
                outputs.insert(*q, o);
            }
        }
        self.next = round.next();
        Ok(NoEqReport {
            round,
            views,
            outputs,
            draw,
            decision: Some(decision),
        })
    }

    fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }
}

/// Broadcasts one fixed payload and keeps every view it is handed.
#[derive(Clone, Debug)]
pub struct Echo {
    pub payload: Payload,
    pub views: Vec<NoEqView>,
}

impl Echo {
    pub fn new(payload: Payload) -> Echo {
        Echo {
            payload,
            views: Vec::new(),
        }
    }
}

impl NoEqProcess for Echo {
    type Output = core::convert::Infallible;

    fn broadcast(&mut self, _: Round) -> Result<Payload, ProtocolError> {
        Ok(self.payload.clone())
    }

    fn deliver(
        &mut self,
        _: Round,
        view: &NoEqView,
        _: Option<ProcessorId>,
    ) -> Result<Option<Self::Output>, ProtocolError> {
        self.views.push(view.clone());
        Ok(None)
    }
}

/// Plays a fixed decision every round.
#[derive(Clone, Debug, Default)]
pub struct FixedShapes(pub NoEqAdversaryDecision);

impl NoEqInjector for FixedShapes {
    fn decide(&mut self, _: &NoEqContext<'_>) -> NoEqAdversaryDecision {
        self.0.clone()
    }
}
