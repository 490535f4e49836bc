use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::model::{Payload, ProcessorId, Round, SignedMessage};

use super::AdversaryDecision;

/// Every signed message that ever appeared on a link, at any nesting depth,
/// with the earliest round it appeared in. Entries are never removed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Ledger {
    seen: BTreeMap<Arc<SignedMessage>, Round>,
}

impl Ledger {
    pub fn new() -> Ledger {
        Ledger::default()
    }

    pub fn earliest(&self, message: &SignedMessage) -> Option<Round> {
        self.seen.get(message).copied()
    }

    pub fn contains(&self, message: &SignedMessage) -> bool {
        self.seen.contains_key(message)
    }

    /// Records every signed message occurring in `payload` as sent in `round`.
    pub fn record(&mut self, payload: &Payload, round: Round) {
        payload.for_each_signed(&mut |s| {
            self.seen.entry(s.clone()).or_insert(round);
        });
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<SignedMessage>, Round)> {
        self.seen.iter().map(|(m, r)| (m, *r))
    }

    /// Messages first seen in exactly `round`.
    pub fn first_seen_in(&self, round: Round) -> impl Iterator<Item = &Arc<SignedMessage>> {
        self.seen
            .iter()
            .filter(move |(_, r)| **r == round)
            .map(|(m, _)| m)
    }

    /// May the adversary put `message` on a link in `round`?
    pub fn admits(
        &self,
        message: &SignedMessage,
        round: Round,
        impersonated: &BTreeSet<ProcessorId>,
    ) -> bool {
        (message.round == round && impersonated.contains(&message.signer))
            || self.earliest(message).is_some_and(|r| r < round)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum InjectionViolation {
    /// Injection on the outgoing link of a processor not impersonated this
    /// round.
    UnauthorizedSender { sender: ProcessorId },
    /// A signed message the adversary could not have produced: neither a
    /// fresh signature of an impersonated processor for the current round,
    /// nor a replay of something sent in an earlier round.
    Forged {
        sender: ProcessorId,
        receiver: ProcessorId,
        message: Arc<SignedMessage>,
    },
}

/// Every rule-breaking occurrence in `decision`; empty means the injection is
/// admissible.
pub fn validate_injection(
    ledger: &Ledger,
    round: Round,
    impersonated: &BTreeSet<ProcessorId>,
    decision: &AdversaryDecision,
) -> Vec<InjectionViolation> {
    let mut out = Vec::new();
    for (sender, links) in decision.iter() {
        if !impersonated.contains(&sender) {
            out.push(InjectionViolation::UnauthorizedSender { sender });
            continue;
        }
        for (receiver, messages) in links {
            for m in messages {
                m.for_each_signed(&mut |s| {
                    if !ledger.admits(s, round, impersonated) {
                        out.push(InjectionViolation::Forged {
                            sender,
                            receiver: *receiver,
                            message: s.clone(),
                        });
                    }
                });
            }
        }
    }
    out
}
