//! The IIAB round executor.
//!
//! A round is a send phase followed by a receive phase. Online processes
//! produce their sends; sends of impersonated processes are set aside (the
//! adversary sees them but they are never delivered); the adversary injects on
//! the outgoing links of impersonated processes, subject to the ledger rules;
//! then every materialized process, online or not, receives everything
//! addressed to it and may emit its one irrevocable output.
//!
//! The two phases are exposed separately ([`IiabEngine::send_phase`] and
//! [`IiabEngine::receive_phase`]) so the exhaustive checkers can branch on
//! adversary moves without recomputing sends.

mod ledger;
mod oracle;
mod trace;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    IiabView, Participation, ParticipationSchedule, Payload, ProcessorId, Round, SignedMessage,
};

pub use ledger::{validate_injection, InjectionViolation, Ledger};
pub use oracle::{draw_leaders, LeaderContext, LeaderPolicy, OracleDraw, OracleMode};
pub use trace::{DeliveryOutcome, Reportable, TraceEvent};

/// A protocol broke its own contract (not an adversary action).
#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("{0}")]
pub struct ProtocolError(pub String);

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum EngineError {
    #[error("{round} is past the schedule horizon")]
    PastHorizon { round: Round },
    #[error("no process registered for {processor}")]
    MissingProcess { processor: ProcessorId },
    #[error("{round}: well-behaved {processor} sent a signed message it cannot produce: {message:?}")]
    HonestForgery {
        round: Round,
        processor: ProcessorId,
        message: Arc<SignedMessage>,
    },
    #[error("{round}: inadmissible injection ({} violations)", violations.len())]
    InvalidInjection {
        round: Round,
        violations: Vec<InjectionViolation>,
    },
    #[error("{round}: oracle success leader {leader} is not well-behaved")]
    InvalidLeader { round: Round, leader: ProcessorId },
    #[error("{round}: oracle failure leaves {processor} without a leader")]
    IncompleteLeaders { round: Round, processor: ProcessorId },
    #[error("{round}: {processor} produced a second output")]
    SecondOutput { round: Round, processor: ProcessorId },
    #[error("{round}: {processor}: {error}")]
    Protocol {
        round: Round,
        processor: ProcessorId,
        error: ProtocolError,
    },
    #[error("{round}: malformed no-eq shape for {processor}: {reason}")]
    MalformedShape {
        round: Round,
        processor: ProcessorId,
        reason: &'static str,
    },
}

/// A round-driven state machine for one processor.
pub trait Process {
    type Output: Clone + core::fmt::Debug + Reportable;

    /// Called in the send phase of every round the processor is online.
    fn send(&mut self, round: Round) -> Result<Vec<Payload>, ProtocolError>;

    /// Called in the receive phase of every round, online or not. `leader`
    /// is this processor's oracle answer when the oracle is enabled.
    fn receive(
        &mut self,
        round: Round,
        view: &IiabView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<Self::Output>, ProtocolError>;

    /// Trace annotations produced since the last call.
    fn take_annotations(&mut self) -> Vec<TraceEvent> {
        Vec::new()
    }
}

/// Per-link injections chosen by the adversary for one round.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct AdversaryDecision {
    links: BTreeMap<ProcessorId, BTreeMap<ProcessorId, BTreeSet<Payload>>>,
}

impl AdversaryDecision {
    pub fn inject(&mut self, from: ProcessorId, to: ProcessorId, message: Payload) {
        self.links
            .entry(from)
            .or_default()
            .entry(to)
            .or_default()
            .insert(message);
    }

    pub fn inject_all(
        &mut self,
        from: ProcessorId,
        to: ProcessorId,
        messages: impl IntoIterator<Item = Payload>,
    ) {
        for m in messages {
            self.inject(from, to, m);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.links.values().all(|l| l.values().all(BTreeSet::is_empty))
    }

    pub fn iter(
        &self,
    ) -> impl Iterator<Item = (ProcessorId, &BTreeMap<ProcessorId, BTreeSet<Payload>>)> {
        self.links.iter().map(|(s, l)| (*s, l))
    }

    pub fn link(&self, from: ProcessorId, to: ProcessorId) -> Option<&BTreeSet<Payload>> {
        self.links.get(&from).and_then(|l| l.get(&to))
    }

    /// Merges `other` into `self`.
    pub fn extend(&mut self, other: AdversaryDecision) {
        for (from, links) in other.links {
            for (to, msgs) in links {
                self.inject_all(from, to, msgs);
            }
        }
    }
}

/// What the engine did in one round, kept for the next round's adversary.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct RoundRecord {
    pub round: Option<Round>,
    pub honest: BTreeMap<ProcessorId, Vec<Payload>>,
    pub injected: AdversaryDecision,
}

/// Everything the adversary may observe when choosing its round-`r` move.
pub struct AdversaryContext<'a> {
    pub round: Round,
    pub participation: &'a Participation,
    /// Participation of the following round, if within the horizon. The
    /// adversary controls the schedule, so it may plan with it.
    pub next_participation: Option<&'a Participation>,
    pub universe: &'a BTreeSet<ProcessorId>,
    /// Current-round sends of well-behaved processes; `None` for a
    /// non-rushing adversary.
    pub honest: Option<&'a BTreeMap<ProcessorId, Vec<Payload>>>,
    /// What impersonated processes would have sent.
    pub intended: &'a BTreeMap<ProcessorId, Vec<Payload>>,
    pub ledger: &'a Ledger,
    pub previous: &'a RoundRecord,
}

pub trait Injector {
    /// The round's injections. An error aborts the run (used by strategies
    /// that are built on a higher-level model and fail its validation).
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError>;
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EngineConfig {
    /// The adversary sees the current round's honest sends before injecting.
    pub rushing: bool,
    pub oracle: OracleMode,
    /// Record one trace event per (round, link, message).
    pub record_links: bool,
    /// Record outputs, oracle draws and process annotations.
    pub record_events: bool,
    /// Seed of the oracle coin stream.
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            rushing: true,
            oracle: OracleMode::Disabled,
            record_links: false,
            record_events: true,
            seed: 0,
        }
    }
}

/// Sends of one round, before the adversary moves.
#[derive(Clone, Debug)]
pub struct SendPhase {
    pub round: Round,
    pub honest: BTreeMap<ProcessorId, Vec<Payload>>,
    pub intended: BTreeMap<ProcessorId, Vec<Payload>>,
}

#[derive(Clone, Debug)]
pub struct RoundReport<O> {
    pub round: Round,
    pub outputs: BTreeMap<ProcessorId, O>,
    pub draw: Option<OracleDraw>,
}

#[derive(Clone, Debug)]
pub struct IiabEngine {
    config: EngineConfig,
    schedule: ParticipationSchedule,
    universe: BTreeSet<ProcessorId>,
    next: Round,
    ledger: Ledger,
    knowledge: BTreeMap<ProcessorId, BTreeSet<Arc<SignedMessage>>>,
    outputs: BTreeMap<ProcessorId, Round>,
    previous: RoundRecord,
    trace: Vec<TraceEvent>,
    rng: ChaCha8Rng,
}

impl IiabEngine {
    pub fn new(schedule: ParticipationSchedule, config: EngineConfig) -> IiabEngine {
        let universe = schedule.universe();
        IiabEngine {
            config,
            schedule,
            universe,
            next: Round::FIRST,
            ledger: Ledger::new(),
            knowledge: BTreeMap::new(),
            outputs: BTreeMap::new(),
            previous: RoundRecord::default(),
            trace: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    /// Registers processors that are never online but still receive.
    pub fn with_observers(mut self, observers: impl IntoIterator<Item = ProcessorId>) -> Self {
        self.universe.extend(observers);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn universe(&self) -> &BTreeSet<ProcessorId> {
        &self.universe
    }

    pub fn schedule(&self) -> &ParticipationSchedule {
        &self.schedule
    }

    /// The round the next call to `run_round` executes.
    pub fn next_round(&self) -> Round {
        self.next
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        core::mem::take(&mut self.trace)
    }

    pub fn participation(&self) -> Result<&Participation, EngineError> {
        self.schedule
            .at(self.next)
            .ok_or(EngineError::PastHorizon { round: self.next })
    }

    /// Processors that already produced their output, with the round.
    pub fn outputs(&self) -> &BTreeMap<ProcessorId, Round> {
        &self.outputs
    }

    /// Runs the send phase of the next round. Sends of well-behaved
    /// processes are checked against the signing rules.
    pub fn send_phase<P: Process>(
        &self,
        processes: &mut BTreeMap<ProcessorId, P>,
    ) -> Result<SendPhase, EngineError> {
        let round = self.next;
        let participation = self.participation()?;
        let mut honest = BTreeMap::new();
        let mut intended = BTreeMap::new();
        for &p in &participation.online {
            let process = processes
                .get_mut(&p)
                .ok_or(EngineError::MissingProcess { processor: p })?;
            let sends = process
                .send(round)
                .map_err(|error| EngineError::Protocol {
                    round,
                    processor: p,
                    error,
                })?;
            if participation.is_impersonated(p) {
                intended.insert(p, sends);
            } else {
                self.check_honest(round, p, &sends)?;
                honest.insert(p, sends);
            }
        }
        Ok(SendPhase {
            round,
            honest,
            intended,
        })
    }

    fn check_honest(
        &self,
        round: Round,
        p: ProcessorId,
        sends: &[Payload],
    ) -> Result<(), EngineError> {
        let known = self.knowledge.get(&p);
        let mut bad = None;
        for m in sends {
            m.for_each_signed(&mut |s| {
                let own = s.signer == p && s.round == round;
                let relayed = s.round < round && known.is_some_and(|k| k.contains(s));
                if !own && !relayed && bad.is_none() {
                    bad = Some(s.clone());
                }
            });
        }
        match bad {
            Some(message) => Err(EngineError::HonestForgery {
                round,
                processor: p,
                message,
            }),
            None => Ok(()),
        }
    }

    pub fn adversary_context<'a>(&'a self, sends: &'a SendPhase) -> AdversaryContext<'a> {
        AdversaryContext {
            round: sends.round,
            participation: self
                .schedule
                .at(sends.round)
                .expect("send phase only exists within the horizon"),
            next_participation: self.schedule.at(sends.round.next()),
            universe: &self.universe,
            honest: self.config.rushing.then_some(&sends.honest),
            intended: &sends.intended,
            ledger: &self.ledger,
            previous: &self.previous,
        }
    }

    /// Flips this round's oracle coin (no-op when the oracle is disabled).
    pub fn draw_oracle(
        &mut self,
        policy: &mut dyn LeaderPolicy,
    ) -> Result<Option<OracleDraw>, EngineError> {
        let round = self.next;
        let participation = self
            .schedule
            .at(round)
            .ok_or(EngineError::PastHorizon { round })?;
        let ctx = LeaderContext {
            round,
            participation,
            universe: &self.universe,
        };
        draw_leaders(&mut self.rng, self.config.oracle, &ctx, policy)
    }

    /// Builds `receiver`'s view from the round's honest sends and the
    /// adversary's injections.
    pub fn build_view(
        round: Round,
        receiver: ProcessorId,
        honest: &BTreeMap<ProcessorId, Vec<Payload>>,
        decision: &AdversaryDecision,
    ) -> IiabView {
        let mut view = IiabView::new(round, receiver);
        for (sender, sends) in honest {
            for m in sends {
                view.add(*sender, m.clone());
            }
        }
        for (sender, links) in decision.iter() {
            if let Some(msgs) = links.get(&receiver) {
                for m in msgs {
                    view.add(sender, m.clone());
                }
            }
        }
        view
    }

    /// Validates and applies `decision`, delivers every view and collects
    /// outputs. Advances to the next round.
    pub fn receive_phase<P: Process>(
        &mut self,
        sends: SendPhase,
        decision: AdversaryDecision,
        draw: Option<OracleDraw>,
        processes: &mut BTreeMap<ProcessorId, P>,
    ) -> Result<RoundReport<P::Output>, EngineError> {
        let round = sends.round;
        debug_assert_eq!(round, self.next);
        let participation = self.participation()?;
        let violations =
            validate_injection(&self.ledger, round, &participation.impersonated, &decision);
        if !violations.is_empty() {
            return Err(EngineError::InvalidInjection { round, violations });
        }

        for m in sends.honest.values().flatten() {
            self.ledger.record(m, round);
        }
        for (_, links) in decision.iter() {
            for m in links.values().flatten() {
                self.ledger.record(m, round);
            }
        }

        if self.config.record_links {
            for &to in &self.universe {
                for (from, msgs) in &sends.honest {
                    for m in msgs {
                        self.trace.push(TraceEvent::Link {
                            round,
                            from: *from,
                            to,
                            payload: m.clone(),
                        });
                    }
                }
            }
            for (from, links) in decision.iter() {
                for (to, msgs) in links {
                    for m in msgs {
                        self.trace.push(TraceEvent::Link {
                            round,
                            from,
                            to: *to,
                            payload: m.clone(),
                        });
                    }
                }
            }
        }
        if self.config.record_events {
            if let Some(d) = &draw {
                self.trace.push(TraceEvent::Oracle(d.clone()));
            }
        }

        let mut outputs = BTreeMap::new();
        let universe: Vec<ProcessorId> = self.universe.iter().copied().collect();
        for q in universe {
            let view = Self::build_view(round, q, &sends.honest, &decision);
            let known = self.knowledge.entry(q).or_default();
            for (_, m) in view.messages() {
                m.for_each_signed(&mut |s| {
                    known.insert(s.clone());
                });
            }
            let process = processes
                .get_mut(&q)
                .ok_or(EngineError::MissingProcess { processor: q })?;
            let leader = draw.as_ref().and_then(|d| d.leader_of(q));
            let out = process
                .receive(round, &view, leader)
                .map_err(|error| EngineError::Protocol {
                    round,
                    processor: q,
                    error,
                })?;
            if self.config.record_events {
                self.trace.extend(process.take_annotations());
            }
            if let Some(o) = out {
                if self.outputs.contains_key(&q) {
                    return Err(EngineError::SecondOutput {
                        round,
                        processor: q,
                    });
                }
                self.outputs.insert(q, round);
                if self.config.record_events {
                    self.trace.push(o.event(round, q));
                }
                outputs.insert(q, o);
            }
        }

        self.previous = RoundRecord {
            round: Some(round),
            honest: sends.honest,
            injected: decision,
        };
        self.next = round.next();
        Ok(RoundReport {
            round,
            outputs,
            draw,
        })
    }

    /// One full round: sends, adversary move, oracle, delivery.
    pub fn run_round<P: Process>(
        &mut self,
        processes: &mut BTreeMap<ProcessorId, P>,
        injector: &mut dyn Injector,
        leaders: &mut dyn LeaderPolicy,
    ) -> Result<RoundReport<P::Output>, EngineError> {
        let sends = self.send_phase(processes)?;
        let decision = injector.inject(&self.adversary_context(&sends))?;
        let draw = self.draw_oracle(leaders)?;
        self.receive_phase(sends, decision, draw, processes)
    }
}

#[cfg(test)]
mod tests;
