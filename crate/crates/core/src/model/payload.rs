use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::{ProcessorId, Round, Value};

/// Message content. Signed messages nest arbitrarily (Dolev-Strong chains,
/// simulation claims); lists carry protocol-level tagged messages.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Payload {
    Value(Value),
    Signed(Arc<SignedMessage>),
    List(Vec<Payload>),
}

/// `<signer, round, content>`. There is no cryptography: the engine enforces
/// who may put which signed message on a link.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SignedMessage {
    pub signer: ProcessorId,
    pub round: Round,
    pub content: Payload,
}

impl Payload {
    pub fn value(v: impl Into<Value>) -> Payload {
        Payload::Value(v.into())
    }

    pub fn signed(signer: ProcessorId, round: Round, content: Payload) -> Payload {
        Payload::Signed(Arc::new(SignedMessage {
            signer,
            round,
            content,
        }))
    }

    /// A list whose first element is the tag `tag`.
    pub fn tagged(tag: &str, rest: impl IntoIterator<Item = Payload>) -> Payload {
        let mut items = Vec::new();
        items.push(Payload::value(tag));
        items.extend(rest);
        Payload::List(items)
    }

    /// Splits a tagged list into its tag and the remaining items.
    pub fn as_tagged(&self) -> Option<(&[u8], &[Payload])> {
        match self {
            Payload::List(items) => match items.split_first() {
                Some((Payload::Value(tag), rest)) => Some((tag.as_bytes(), rest)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Payload::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_signed(&self) -> Option<&Arc<SignedMessage>> {
        match self {
            Payload::Signed(s) => Some(s),
            _ => None,
        }
    }

    /// Visits every signed message occurring in the payload, outermost first.
    pub fn for_each_signed<'a>(&'a self, f: &mut impl FnMut(&'a Arc<SignedMessage>)) {
        match self {
            Payload::Value(_) => {}
            Payload::Signed(s) => {
                f(s);
                s.content.for_each_signed(f);
            }
            Payload::List(items) => {
                for item in items {
                    item.for_each_signed(f);
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Payload::Value(_) => 0,
            Payload::Signed(s) => 1 + s.content.depth(),
            Payload::List(items) => items.iter().map(Payload::depth).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Value(v) => write!(f, "{v}"),
            Payload::Signed(s) => write!(f, "<{},{},{}>", s.signer, s.round.get(), s.content),
            Payload::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nested_signatures_are_visited() {
        let inner = Payload::signed(ProcessorId(1), Round::at(1), Payload::value("v"));
        let outer = Payload::signed(ProcessorId(2), Round::at(2), inner);
        let mut seen = vec![];
        outer.for_each_signed(&mut |s| seen.push((s.signer, s.round.get())));
        assert_eq!(seen, vec![(ProcessorId(2), 2), (ProcessorId(1), 1)]);
        assert_eq!(outer.depth(), 2);
    }

    #[test]
    fn structural_equality() {
        let a = Payload::signed(ProcessorId(1), Round::at(1), Payload::value("v"));
        let b = Payload::signed(ProcessorId(1), Round::at(1), Payload::value("v"));
        let c = Payload::signed(ProcessorId(1), Round::at(2), Payload::value("v"));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tagged_lists() {
        let p = Payload::tagged("commit", [Payload::value("x")]);
        let (tag, rest) = p.as_tagged().unwrap();
        assert_eq!(tag, b"commit");
        assert_eq!(rest, &[Payload::value("x")]);
        assert!(Payload::value("x").as_tagged().is_none());
    }
}
