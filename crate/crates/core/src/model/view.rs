use alloc::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Payload, ProcessorId, Round, Value};

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum ModelError {
    #[error("no senders heard")]
    NoSendersHeard,
}

/// What a no-equivocation receiver gets for one sender it hears of.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum NoEqEntry {
    Message(Payload),
    /// The failure notification. Counts as hearing of the sender, never as
    /// content.
    Lambda,
}

impl NoEqEntry {
    pub fn message(&self) -> Option<&Payload> {
        match self {
            NoEqEntry::Message(m) => Some(m),
            NoEqEntry::Lambda => None,
        }
    }
}

/// One receiver's round in the IIAB model: the set of messages on each
/// incoming link. Senders with an empty link are absent.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct IiabView {
    pub round: Round,
    pub receiver: ProcessorId,
    pub links: BTreeMap<ProcessorId, BTreeSet<Payload>>,
}

impl IiabView {
    pub fn new(round: Round, receiver: ProcessorId) -> IiabView {
        IiabView {
            round,
            receiver,
            links: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, sender: ProcessorId, message: Payload) {
        self.links.entry(sender).or_default().insert(message);
    }

    pub fn messages(&self) -> impl Iterator<Item = (ProcessorId, &Payload)> {
        self.links
            .iter()
            .flat_map(|(s, msgs)| msgs.iter().map(move |m| (*s, m)))
    }
}

/// One receiver's round in the no-equivocation model. A sender absent from
/// `delivery` was not heard of at all.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct NoEqView {
    pub round: Round,
    pub receiver: ProcessorId,
    pub delivery: BTreeMap<ProcessorId, NoEqEntry>,
}

impl NoEqView {
    pub fn new(round: Round, receiver: ProcessorId) -> NoEqView {
        NoEqView {
            round,
            receiver,
            delivery: BTreeMap::new(),
        }
    }

    /// Senders from which exactly `m` was received.
    pub fn senders_of(&self, m: &Payload) -> BTreeSet<ProcessorId> {
        self.delivery
            .iter()
            .filter(|(_, e)| e.message() == Some(m))
            .map(|(s, _)| *s)
            .collect()
    }

    pub fn heard_of(&self) -> BTreeSet<ProcessorId> {
        self.delivery.keys().copied().collect()
    }
}

/// Common read access to both kinds of receive view for the majority rules.
///
/// A sender *delivers* a message `m` when `m` is the only thing it delivered
/// this round: a no-eq `Message(m)`, or an IIAB link carrying exactly `{m}`.
/// λ entries and links carrying several messages are heard of but deliver
/// nothing.
pub trait Delivered {
    fn heard_of_count(&self) -> usize;
    fn delivered(&self) -> impl Iterator<Item = (ProcessorId, &Payload)>;
}

impl Delivered for NoEqView {
    fn heard_of_count(&self) -> usize {
        self.delivery.len()
    }

    fn delivered(&self) -> impl Iterator<Item = (ProcessorId, &Payload)> {
        self.delivery
            .iter()
            .filter_map(|(s, e)| e.message().map(|m| (*s, m)))
    }
}

impl Delivered for IiabView {
    fn heard_of_count(&self) -> usize {
        self.links.values().filter(|l| !l.is_empty()).count()
    }

    fn delivered(&self) -> impl Iterator<Item = (ProcessorId, &Payload)> {
        self.links.iter().filter_map(|(s, l)| {
            if l.len() == 1 {
                l.iter().next().map(|m| (*s, m))
            } else {
                None
            }
        })
    }
}

fn tally<V: Delivered>(view: &V) -> BTreeMap<&Payload, usize> {
    let mut counts = BTreeMap::new();
    for (_, m) in view.delivered() {
        *counts.entry(m).or_insert(0) += 1;
    }
    counts
}

/// Whether `target` was delivered by strictly more than half of the senders
/// heard of.
pub fn strict_majority<V: Delivered>(view: &V, target: &Payload) -> Result<bool, ModelError> {
    let heard = view.heard_of_count();
    if heard == 0 {
        return Err(ModelError::NoSendersHeard);
    }
    let count = view.delivered().filter(|(_, m)| *m == target).count();
    Ok(2 * count > heard)
}

/// The unique message delivered by a strict majority, if any. At most one
/// message can qualify.
pub fn majority_message<V: Delivered>(view: &V) -> Option<Payload> {
    let heard = view.heard_of_count();
    tally(view)
        .into_iter()
        .find(|(_, c)| 2 * c > heard)
        .map(|(m, _)| m.clone())
}

/// The value delivered by at least one sender and by strictly more senders
/// than any other value. Non-value payloads are ignored.
pub fn plurality_value<V: Delivered>(view: &V) -> Option<Value> {
    plurality_of(view, Payload::as_value)
}

/// [`plurality_value`] over the values `extract` finds in the delivered
/// payloads.
pub fn plurality_of<V: Delivered>(view: &V, extract: impl Fn(&Payload) -> Option<&Value>) -> Option<Value> {
    let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
    for (_, m) in view.delivered() {
        if let Some(v) = extract(m) {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    let mut best: Option<(&Value, usize)> = None;
    let mut tied = false;
    for (v, c) in counts {
        match best {
            Some((_, b)) if c < b => {}
            Some((_, b)) if c == b => tied = true,
            _ => {
                best = Some((v, c));
                tied = false;
            }
        }
    }
    match best {
        Some((v, _)) if !tied => Some(v.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn noeq(entries: &[(u32, Option<&str>)]) -> NoEqView {
        let mut v = NoEqView::new(Round::FIRST, ProcessorId(1));
        for (s, m) in entries {
            let e = match m {
                Some(m) => NoEqEntry::Message(Payload::value(*m)),
                None => NoEqEntry::Lambda,
            };
            v.delivery.insert(ProcessorId(*s), e);
        }
        v
    }

    #[test]
    fn two_of_three_is_a_majority() {
        let v = noeq(&[(1, Some("v")), (2, Some("v")), (3, Some("w"))]);
        assert_eq!(strict_majority(&v, &Payload::value("v")), Ok(true));
        assert_eq!(strict_majority(&v, &Payload::value("w")), Ok(false));
        assert_eq!(majority_message(&v), Some(Payload::value("v")));
        assert_eq!(plurality_value(&v), Some(Value::from("v")));
    }

    #[test]
    fn lambda_counts_as_heard_of() {
        let v = noeq(&[(1, None), (2, Some("v"))]);
        assert_eq!(strict_majority(&v, &Payload::value("v")), Ok(false));
        assert_eq!(majority_message(&v), None);
    }

    #[test]
    fn majority_of_heard_of_not_of_online() {
        // O = {p1..p4}, p1 only hears of p1..p3, two of which say v.
        let v = noeq(&[(1, Some("v")), (2, Some("v")), (3, Some("w"))]);
        assert_eq!(strict_majority(&v, &Payload::value("v")), Ok(true));
    }

    #[test]
    fn ties_have_no_plurality() {
        assert_eq!(plurality_value(&noeq(&[(1, Some("v")), (2, Some("w"))])), None);
        assert_eq!(plurality_value(&noeq(&[(1, None)])), None);
        assert_eq!(
            plurality_value(&noeq(&[(1, Some("v")), (2, Some("w")), (3, Some("w"))])),
            Some(Value::from("w"))
        );
    }

    #[test]
    fn empty_view_is_an_error() {
        let v = noeq(&[]);
        assert_eq!(
            strict_majority(&v, &Payload::value("v")),
            Err(ModelError::NoSendersHeard)
        );
    }

    #[test]
    fn iiab_links_with_several_messages_deliver_nothing() {
        let mut v = IiabView::new(Round::FIRST, ProcessorId(1));
        v.add(ProcessorId(1), Payload::value("v"));
        v.add(ProcessorId(2), Payload::value("v"));
        v.add(ProcessorId(3), Payload::value("v"));
        v.add(ProcessorId(3), Payload::value("w"));
        assert_eq!(v.heard_of_count(), 3);
        assert_eq!(strict_majority(&v, &Payload::value("v")), Ok(true));
        v.add(ProcessorId(2), Payload::value("w"));
        assert_eq!(strict_majority(&v, &Payload::value("v")), Ok(false));
    }

    fn arb_view() -> impl Strategy<Value = NoEqView> {
        proptest::collection::vec(proptest::option::of(0u8..4), 1..7).prop_map(|entries| {
            let mut v = NoEqView::new(Round::FIRST, ProcessorId(0));
            for (i, e) in entries.into_iter().enumerate() {
                let entry = match e {
                    Some(x) => NoEqEntry::Message(Payload::Value(Value::new(alloc::vec![x]))),
                    None => NoEqEntry::Lambda,
                };
                v.delivery.insert(ProcessorId(i as u32), entry);
            }
            v
        })
    }

    proptest! {
        #[test]
        fn at_most_one_majority(view in arb_view()) {
            let winners: Vec<u8> = (0u8..4)
                .filter(|x| strict_majority(&view, &Payload::Value(Value::new(alloc::vec![*x]))).unwrap())
                .collect();
            prop_assert!(winners.len() <= 1);
            if let Some(w) = winners.first() {
                // A majority winner is also the unique plurality.
                prop_assert_eq!(plurality_value(&view), Some(Value::new(alloc::vec![*w])));
                prop_assert_eq!(majority_message(&view), Some(Payload::Value(Value::new(alloc::vec![*w]))));
            } else {
                prop_assert_eq!(majority_message(&view), None);
            }
        }
    }
}
