use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::engine::EngineError;
use crate::model::{NoEqEntry, NoEqView, Participation, Payload, ProcessorId, Round};

/// What an impersonated processor delivers to the receivers in one
/// no-equivocation round.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Shape {
    /// Nobody hears of the processor.
    Silent,
    /// `m` to every receiver.
    Uniform(Payload),
    /// `m` to the receivers in the set, λ to the others. The set is nonempty
    /// and proper.
    Split(Payload, BTreeSet<ProcessorId>),
    /// λ to the receivers in the set, nothing to the others.
    LambdaOnly(BTreeSet<ProcessorId>),
}

impl Shape {
    /// `LambdaOnly(∅)` and `Silent` are the same behavior.
    pub fn canonical(self) -> Shape {
        match self {
            Shape::LambdaOnly(l) if l.is_empty() => Shape::Silent,
            s => s,
        }
    }

    pub fn check(&self, receivers: &BTreeSet<ProcessorId>) -> Result<(), &'static str> {
        match self {
            Shape::Silent | Shape::Uniform(_) => Ok(()),
            Shape::Split(_, s) => {
                if s.is_empty() {
                    Err("split set is empty")
                } else if !s.is_subset(receivers) {
                    Err("split set names unknown receivers")
                } else if s.len() == receivers.len() {
                    Err("split set is not a proper subset")
                } else {
                    Ok(())
                }
            }
            Shape::LambdaOnly(l) => {
                if l.is_subset(receivers) {
                    Ok(())
                } else {
                    Err("lambda set names unknown receivers")
                }
            }
        }
    }

    /// What `receiver` gets from a processor behaving with this shape.
    pub fn entry_for(&self, receiver: ProcessorId) -> Option<NoEqEntry> {
        match self {
            Shape::Silent => None,
            Shape::Uniform(m) => Some(NoEqEntry::Message(m.clone())),
            Shape::Split(m, s) if s.contains(&receiver) => Some(NoEqEntry::Message(m.clone())),
            Shape::Split(..) => Some(NoEqEntry::Lambda),
            Shape::LambdaOnly(l) => l.contains(&receiver).then_some(NoEqEntry::Lambda),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |f: &mut fmt::Formatter<'_>, s: &BTreeSet<ProcessorId>| {
            f.write_str("{")?;
            for (i, p) in s.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p}")?;
            }
            f.write_str("}")
        };
        match self {
            Shape::Silent => f.write_str("Silent"),
            Shape::Uniform(m) => write!(f, "Uniform({m})"),
            Shape::Split(m, s) => {
                write!(f, "Split({m},")?;
                set(f, s)?;
                f.write_str(")")
            }
            Shape::LambdaOnly(l) => {
                f.write_str("LambdaOnly(")?;
                set(f, l)?;
                f.write_str(")")
            }
        }
    }
}

/// One shape per impersonated processor for one round.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NoEqAdversaryDecision {
    shapes: BTreeMap<ProcessorId, Shape>,
}

impl NoEqAdversaryDecision {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, p: ProcessorId, shape: Shape) -> &mut Self {
        self.shapes.insert(p, shape.canonical());
        self
    }

    pub fn with(mut self, p: ProcessorId, shape: Shape) -> Self {
        self.set(p, shape);
        self
    }

    /// Every impersonated processor stays silent.
    pub fn silent(impersonated: &BTreeSet<ProcessorId>) -> Self {
        NoEqAdversaryDecision {
            shapes: impersonated.iter().map(|p| (*p, Shape::Silent)).collect(),
        }
    }

    pub fn shape_of(&self, p: ProcessorId) -> Option<&Shape> {
        self.shapes.get(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ProcessorId, &Shape)> {
        self.shapes.iter().map(|(p, s)| (*p, s))
    }

    /// Checks the decision against one round's participation: exactly one
    /// well-formed shape per impersonated processor.
    pub fn validate(
        &self,
        round: Round,
        participation: &Participation,
        receivers: &BTreeSet<ProcessorId>,
    ) -> Result<(), EngineError> {
        for (p, shape) in &self.shapes {
            if !participation.is_impersonated(*p) {
                return Err(EngineError::MalformedShape {
                    round,
                    processor: *p,
                    reason: "processor is not impersonated",
                });
            }
            shape
                .check(receivers)
                .map_err(|reason| EngineError::MalformedShape {
                    round,
                    processor: *p,
                    reason,
                })?;
        }
        if let Some(p) = participation
            .impersonated
            .iter()
            .find(|p| !self.shapes.contains_key(p))
        {
            return Err(EngineError::MalformedShape {
                round,
                processor: *p,
                reason: "missing shape",
            });
        }
        Ok(())
    }
}

impl fmt::Display for NoEqAdversaryDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, s)) in self.shapes.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{p}:{s}")?;
        }
        Ok(())
    }
}

/// The views of one native no-equivocation round: well-behaved online
/// senders reach everyone with their payload, impersonated ones follow their
/// shape, offline ones are absent.
pub fn noeq_deliver(
    round: Round,
    participation: &Participation,
    receivers: &BTreeSet<ProcessorId>,
    honest: &BTreeMap<ProcessorId, Payload>,
    decision: &NoEqAdversaryDecision,
) -> Result<BTreeMap<ProcessorId, NoEqView>, EngineError> {
    decision.validate(round, participation, receivers)?;
    let well_behaved = participation.well_behaved();
    if let Some(p) = well_behaved.iter().find(|p| !honest.contains_key(p)) {
        return Err(EngineError::MissingProcess { processor: *p });
    }
    let mut views = BTreeMap::new();
    for &q in receivers {
        let mut view = NoEqView::new(round, q);
        for p in &well_behaved {
            view.delivery
                .insert(*p, NoEqEntry::Message(honest[p].clone()));
        }
        for (p, shape) in decision.iter() {
            if let Some(e) = shape.entry_for(q) {
                view.delivery.insert(p, e);
            }
        }
        views.insert(q, view);
    }
    Ok(views)
}

/// The delivery cases for one sender across all receivers.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DeliveryCase {
    /// No processor hears of the sender.
    Nobody,
    /// Every processor receives the same message.
    Same,
    /// Some receive one message `m`, the others λ.
    MessageOrLambda,
    /// Some receive λ, the others do not hear of the sender.
    LambdaOrNothing,
    /// Not a pattern the no-equivocation model allows.
    Invalid,
}

impl DeliveryCase {
    /// 1 to 4 for the valid cases.
    pub fn number(self) -> Option<u8> {
        match self {
            DeliveryCase::Nobody => Some(1),
            DeliveryCase::Same => Some(2),
            DeliveryCase::MessageOrLambda => Some(3),
            DeliveryCase::LambdaOrNothing => Some(4),
            DeliveryCase::Invalid => None,
        }
    }
}

/// Classifies what the receivers in `views` got from `subject`.
pub fn classify_delivery_profile(
    views: &BTreeMap<ProcessorId, NoEqView>,
    subject: ProcessorId,
) -> DeliveryCase {
    let entries: Vec<Option<&NoEqEntry>> =
        views.values().map(|v| v.delivery.get(&subject)).collect();
    let mut message: Option<&Payload> = None;
    let (mut lambda, mut none) = (false, false);
    for e in &entries {
        match e {
            None => none = true,
            Some(NoEqEntry::Lambda) => lambda = true,
            Some(NoEqEntry::Message(m)) => match message {
                Some(prev) if prev != m => return DeliveryCase::Invalid,
                _ => message = Some(m),
            },
        }
    }
    match (message, lambda, none) {
        (None, false, _) => DeliveryCase::Nobody,
        (None, true, _) => DeliveryCase::LambdaOrNothing,
        (Some(_), _, true) => DeliveryCase::Invalid,
        (Some(_), false, false) => DeliveryCase::Same,
        (Some(_), true, false) => DeliveryCase::MessageOrLambda,
    }
}

/// Every shape over `receivers` with messages from `alphabet`, each
/// behavior exactly once (`LambdaOnly(∅)` is folded into `Silent`).
pub fn enumerate_shapes(alphabet: &[Payload], receivers: &BTreeSet<ProcessorId>) -> Vec<Shape> {
    let rs: Vec<ProcessorId> = receivers.iter().copied().collect();
    let k = rs.len();
    let subsets: Vec<BTreeSet<ProcessorId>> = (0u32..1 << k)
        .map(|mask| {
            rs.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| *p)
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    out.push(Shape::Silent);
    for l in subsets.iter().filter(|l| !l.is_empty()) {
        out.push(Shape::LambdaOnly(l.clone()));
    }
    for m in alphabet {
        out.push(Shape::Uniform(m.clone()));
        for s in subsets.iter().filter(|s| !s.is_empty() && s.len() < k) {
            out.push(Shape::Split(m.clone(), s.clone()));
        }
    }
    out
}

/// Number of distinct shapes for an alphabet of size `a` and `k` receivers:
/// one silent, `2^k - 1` λ-only, and for each message one uniform plus
/// `2^k - 2` splits.
pub fn shape_count(a: u64, k: u32) -> u64 {
    let pow = 1u64 << k;
    a * (pow - 1) + pow
}
