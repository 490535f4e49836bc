use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{
    AdversaryContext, AdversaryDecision, DeliveryOutcome, EngineConfig, EngineError, IiabEngine,
    Injector, LeaderPolicy, Process, ProtocolError, TraceEvent,
};
use crate::model::{
    Delivered, IiabView, NoEqEntry, NoEqView, Participation, ParticipationSchedule, Payload,
    ProcessorId, Round,
};

use super::{
    Echo, NoEqBackend, NoEqInjector, NoEqProcess, NoEqReport,
    ShapeCompiler,
};

/// One processor's side of the two-round simulation of a no-eq round.
///
/// Round A: broadcast `<p,A,m>`. Round B: relay every `<q,A,m>` that arrived
/// on link `q` as the claim `<p,B,<q,A,m>>`. End of round B: for each subject
/// `q` with at least one claim, deliver `m` if the relayers claiming `m` are a
/// strict majority of the processors heard of in round B and nobody claims
/// anything else for `q`; otherwise deliver λ.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NoEqRelay {
    me: ProcessorId,
    round_a: Option<Round>,
    received: BTreeSet<Payload>,
    leader: Option<ProcessorId>,
    annotations: Vec<TraceEvent>,
}

impl NoEqRelay {
    pub fn new(me: ProcessorId) -> NoEqRelay {
        NoEqRelay {
            me,
            round_a: None,
            received: BTreeSet::new(),
            leader: None,
            annotations: Vec::new(),
        }
    }

    /// The round-A message carrying `payload`.
    pub fn announce(&self, round_a: Round, payload: Payload) -> Payload {
        Payload::signed(self.me, round_a, payload)
    }

    /// Keeps the round-A messages signed by the link they arrived on, and
    /// the oracle answer of round A.
    pub fn receive_a(&mut self, view: &IiabView, leader: Option<ProcessorId>) {
        self.round_a = Some(view.round);
        self.leader = leader;
        self.received = view
            .messages()
            .filter(|(q, m)| {
                m.as_signed()
                    .is_some_and(|s| s.signer == *q && s.round == view.round)
            })
            .map(|(_, m)| m.clone())
            .collect();
    }

    /// The round-A announcements kept by the last [`NoEqRelay::receive_a`].
    pub fn received(&self) -> &BTreeSet<Payload> {
        &self.received
    }

    /// The leader drawn in the last round A.
    pub fn leader(&self) -> Option<ProcessorId> {
        self.leader
    }

    pub fn claims(&self, round_b: Round) -> Vec<Payload> {
        if self.round_a.map(Round::next) != Some(round_b) {
            return Vec::new();
        }
        self.received
            .iter()
            .map(|m| Payload::signed(self.me, round_b, m.clone()))
            .collect()
    }

    /// Computes the simulated delivery from the round-B view. `subjects`
    /// only controls which absent senders are annotated as such.
    pub fn deliver(
        &mut self,
        view: &IiabView,
        noeq_round: Round,
        subjects: &BTreeSet<ProcessorId>,
    ) -> NoEqView {
        let round_b = view.round;
        let heard = view.heard_of_count();
        let mut claims: BTreeMap<ProcessorId, BTreeMap<&Payload, BTreeSet<ProcessorId>>> =
            BTreeMap::new();
        for (relayer, m) in view.messages() {
            let Some(outer) = m.as_signed() else { continue };
            if outer.signer != relayer || outer.round != round_b {
                continue;
            }
            let Some(inner) = outer.content.as_signed() else {
                continue;
            };
            if inner.round.next() != round_b {
                continue;
            }
            claims
                .entry(inner.signer)
                .or_default()
                .entry(&inner.content)
                .or_default()
                .insert(relayer);
        }
        let mut out = NoEqView::new(noeq_round, self.me);
        for (subject, by_message) in &claims {
            let entry = match by_message.iter().next() {
                Some((m, relayers)) if by_message.len() == 1 && 2 * relayers.len() > heard => {
                    NoEqEntry::Message((*m).clone())
                }
                _ => NoEqEntry::Lambda,
            };
            out.delivery.insert(*subject, entry);
        }
        let annotated: BTreeSet<ProcessorId> =
            subjects.iter().chain(out.delivery.keys()).copied().collect();
        for subject in &annotated {
            let outcome = match out.delivery.get(subject) {
                Some(NoEqEntry::Message(m)) => DeliveryOutcome::Message(m.clone()),
                Some(NoEqEntry::Lambda) => DeliveryOutcome::Lambda,
                None => DeliveryOutcome::None,
            };
            self.annotations.push(TraceEvent::SimulatedDelivery {
                round: round_b,
                noeq_round: noeq_round.get(),
                receiver: self.me,
                subject: *subject,
                outcome,
            });
        }
        out
    }

    pub fn take_annotations(&mut self) -> Vec<TraceEvent> {
        core::mem::take(&mut self.annotations)
    }
}

/// Runs a [`NoEqProcess`] as an IIAB [`Process`]: no-eq round `k` occupies
/// IIAB rounds `start + 2k - 2` (A) and `start + 2k - 1` (B).
#[derive(Clone, Debug)]
pub struct Simulated<P> {
    pub inner: P,
    relay: NoEqRelay,
    start: Round,
    subjects: BTreeSet<ProcessorId>,
    last_view: Option<NoEqView>,
}

impl<P> Simulated<P> {
    pub fn new(me: ProcessorId, inner: P, start: Round, subjects: BTreeSet<ProcessorId>) -> Self {
        Self::with_relay(inner, NoEqRelay::new(me), start, subjects)
    }

    fn with_relay(
        inner: P,
        relay: NoEqRelay,
        start: Round,
        subjects: BTreeSet<ProcessorId>,
    ) -> Self {
        Simulated {
            inner,
            relay,
            start,
            subjects,
            last_view: None,
        }
    }

    /// The simulated view of the last completed no-eq round.
    pub fn last_view(&self) -> Option<&NoEqView> {
        self.last_view.as_ref()
    }

    pub fn relay(&self) -> &NoEqRelay {
        &self.relay
    }

    fn position(&self, round: Round) -> Result<(Round, bool), ProtocolError> {
        let offset = round
            .get()
            .checked_sub(self.start.get())
            .ok_or_else(|| ProtocolError("round before the simulated segment".into()))?;
        Ok((Round::at(offset / 2 + 1), offset % 2 == 0))
    }
}

impl<P: NoEqProcess> Process for Simulated<P> {
    type Output = P::Output;

    fn send(&mut self, round: Round) -> Result<Vec<Payload>, ProtocolError> {
        let (k, is_a) = self.position(round)?;
        if is_a {
            let payload = self.inner.broadcast(k)?;
            Ok(vec![self.relay.announce(round, payload)])
        } else {
            Ok(self.relay.claims(round))
        }
    }

    fn receive(
        &mut self,
        round: Round,
        view: &IiabView,
        leader: Option<ProcessorId>,
    ) -> Result<Option<P::Output>, ProtocolError> {
        let (k, is_a) = self.position(round)?;
        if is_a {
            self.relay.receive_a(view, leader);
            return Ok(None);
        }
        let simulated = self.relay.deliver(view, k, &self.subjects);
        let out = self.inner.deliver(k, &simulated, self.relay.leader())?;
        self.last_view = Some(simulated);
        Ok(out)
    }

    fn take_annotations(&mut self) -> Vec<TraceEvent> {
        self.relay.take_annotations()
    }
}

/// The no-eq backend that executes every round as two IIAB rounds.
#[derive(Clone, Debug)]
pub struct SimulatedNoEq {
    engine: IiabEngine,
    relays: BTreeMap<ProcessorId, NoEqRelay>,
    next: Round,
}

impl SimulatedNoEq {
    /// `schedule` is the IIAB schedule: two entries per simulated round.
    pub fn new(schedule: ParticipationSchedule, config: EngineConfig) -> SimulatedNoEq {
        SimulatedNoEq {
            engine: IiabEngine::new(schedule, config),
            relays: BTreeMap::new(),
            next: Round::FIRST,
        }
    }

    /// Repeats each no-eq participation for both of its IIAB rounds.
    pub fn from_noeq_schedule(schedule: &ParticipationSchedule, config: EngineConfig) -> Self {
        let rounds: Vec<Participation> = schedule
            .rounds()
            .iter()
            .flat_map(|p| [p.clone(), p.clone()])
            .collect();
        Self::new(ParticipationSchedule::new(rounds), config)
    }

    pub fn with_observers(mut self, observers: impl IntoIterator<Item = ProcessorId>) -> Self {
        self.engine = self.engine.with_observers(observers);
        self
    }

    pub fn engine(&self) -> &IiabEngine {
        &self.engine
    }

    /// One simulated round against an arbitrary IIAB adversary.
    pub fn run_round_raw<P: NoEqProcess>(
        &mut self,
        processes: &mut BTreeMap<ProcessorId, P>,
        injector: &mut dyn Injector,
        leaders: &mut dyn LeaderPolicy,
    ) -> Result<NoEqReport<P::Output>, EngineError> {
        let k = self.next;
        let subjects = self.engine.universe().clone();
        let mut wrapped: BTreeMap<ProcessorId, Simulated<&mut P>> = processes
            .iter_mut()
            .map(|(id, p)| {
                let relay = self
                    .relays
                    .remove(id)
                    .unwrap_or_else(|| NoEqRelay::new(*id));
                (*id, Simulated::with_relay(p, relay, Round::FIRST, subjects.clone()))
            })
            .collect();
        let a = self.engine.run_round(&mut wrapped, injector, leaders)?;
        let b = self.engine.run_round(&mut wrapped, injector, leaders)?;
        let mut views = BTreeMap::new();
        for (id, w) in wrapped {
            if let Some(v) = w.last_view {
                views.insert(id, v);
            }
            self.relays.insert(id, w.relay);
        }
        self.next = k.next();
        Ok(NoEqReport {
            round: k,
            views,
            outputs: b.outputs,
            draw: a.draw,
            decision: None,
        })
    }
}

/// Drives a [`ShapeCompiler`] from a no-eq adversary for one simulated round.
struct Compiled<'a> {
    compiler: ShapeCompiler,
    adversary: &'a mut dyn NoEqInjector,
    noeq_round: Round,
    round_a: Round,
}

impl Injector for Compiled<'_> {
    fn inject(&mut self, ctx: &AdversaryContext<'_>) -> Result<AdversaryDecision, EngineError> {
        if ctx.round == self.round_a {
            self.compiler
                .compile_a(ctx, self.noeq_round, &mut *self.adversary)
        } else {
            Ok(self.compiler.compile_b(ctx))
        }
    }
}

impl NoEqBackend for SimulatedNoEq {
    fn universe(&self) -> &BTreeSet<ProcessorId> {
        self.engine.universe()
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
        let mut compiled = Compiled {
            compiler: ShapeCompiler::default(),
            adversary,
            noeq_round: self.next,
            round_a: self.engine.next_round(),
        };
        let mut report = self.run_round_raw(processes, &mut compiled, leaders)?;
        report.decision = compiled.compiler.last_decision().cloned();
        Ok(report)
    }

    fn trace(&self) -> &[TraceEvent] {
        self.engine.trace()
    }
}

/// Simulates one no-eq round in which every online processor broadcasts its
/// entry of `payloads`, against an arbitrary IIAB adversary. Returns the
/// simulated view of every materialized processor.
pub fn simulate_noeq_round(
    backend: &mut SimulatedNoEq,
    payloads: &BTreeMap<ProcessorId, Payload>,
    injector: &mut dyn Injector,
    leaders: &mut dyn LeaderPolicy,
) -> Result<BTreeMap<ProcessorId, NoEqView>, EngineError> {
    let mut echoes: BTreeMap<ProcessorId, Echo> = backend
        .universe()
        .iter()
        .map(|p| {
            let payload = payloads
                .get(p)
                .cloned()
                .unwrap_or(Payload::List(Vec::new()));
            (*p, Echo::new(payload))
        })
        .collect();
    Ok(backend.run_round_raw(&mut echoes, injector, leaders)?.views)
}
