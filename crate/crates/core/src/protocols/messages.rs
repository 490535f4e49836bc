//! Wire encodings of protocol messages. Every message is a tagged list so
//! that nothing a protocol sends can be mistaken for a plain value.

use core::fmt;

use crate::engine::{Reportable, TraceEvent};
use crate::model::{Payload, ProcessorId, Round, Value};

const PROPOSE_COMMIT: &str = "propose-commit";
const NO_COMMIT: &str = "no-commit";
const COMMIT: &str = "commit";
const ADOPT: &str = "adopt";
const CONCILIATED: &str = "conciliated";

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Grade {
    Commit,
    Adopt,
}

/// `commit(v)` or `adopt(v)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CommitAdoptOutput {
    pub grade: Grade,
    pub value: Value,
}

impl CommitAdoptOutput {
    pub fn commit(value: Value) -> Self {
        CommitAdoptOutput {
            grade: Grade::Commit,
            value,
        }
    }

    pub fn adopt(value: Value) -> Self {
        CommitAdoptOutput {
            grade: Grade::Adopt,
            value,
        }
    }

    pub fn to_payload(&self) -> Payload {
        let tag = match self.grade {
            Grade::Commit => COMMIT,
            Grade::Adopt => ADOPT,
        };
        Payload::tagged(tag, [Payload::Value(self.value.clone())])
    }

    pub fn from_payload(p: &Payload) -> Option<Self> {
        let (tag, rest) = p.as_tagged()?;
        let grade = match tag {
            b"commit" => Grade::Commit,
            b"adopt" => Grade::Adopt,
            _ => return None,
        };
        match rest {
            [Payload::Value(v)] => Some(CommitAdoptOutput {
                grade,
                value: v.clone(),
            }),
            _ => None,
        }
    }
}

impl fmt::Display for CommitAdoptOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.grade {
            Grade::Commit => write!(f, "commit({})", self.value),
            Grade::Adopt => write!(f, "adopt({})", self.value),
        }
    }
}

impl Reportable for CommitAdoptOutput {
    fn event(&self, round: Round, processor: ProcessorId) -> TraceEvent {
        TraceEvent::Output {
            round,
            processor,
            output: self.to_payload(),
        }
    }
}

pub fn propose_commit(v: &Value) -> Payload {
    Payload::tagged(PROPOSE_COMMIT, [Payload::Value(v.clone())])
}

pub fn no_commit() -> Payload {
    Payload::tagged(NO_COMMIT, [])
}

/// The value of a `propose-commit(v)` message.
pub fn proposed(p: &Payload) -> Option<&Value> {
    match p.as_tagged()? {
        (b"propose-commit", [Payload::Value(v)]) => Some(v),
        _ => None,
    }
}

/// Which output rule of the probabilistic conciliator fired.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ConciliatorRule {
    /// A strict majority of `commit(v)`.
    MajorityCommit,
    /// The leader's `commit(v)` or `adopt(v)`.
    Leader,
    /// The processor's own input.
    OwnInput,
    /// The deterministic conciliator's final round.
    Deterministic,
}

impl ConciliatorRule {
    pub fn code(self) -> u8 {
        match self {
            ConciliatorRule::MajorityCommit => 1,
            ConciliatorRule::Leader => 2,
            ConciliatorRule::OwnInput => 3,
            ConciliatorRule::Deterministic => 0,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ConciliatorOutput {
    pub value: Value,
    pub rule: ConciliatorRule,
}

impl ConciliatorOutput {
    /// Trace form: `["conciliated", instance, value, rule]`.
    pub fn to_payload(&self, instance: u32) -> Payload {
        Payload::tagged(
            CONCILIATED,
            [
                Payload::Value(Value::new(instance.to_be_bytes().to_vec())),
                Payload::Value(self.value.clone()),
                Payload::Value(Value::new(alloc::vec![self.rule.code()])),
            ],
        )
    }

    /// Inverse of [`ConciliatorOutput::to_payload`]: instance, value and
    /// rule code.
    pub fn parse_payload(p: &Payload) -> Option<(u32, Value, u8)> {
        match p.as_tagged()? {
            (b"conciliated", [Payload::Value(n), Payload::Value(v), Payload::Value(r)]) => {
                let n = u32::from_be_bytes(n.as_bytes().try_into().ok()?);
                Some((n, v.clone(), *r.as_bytes().first()?))
            }
            _ => None,
        }
    }
}

impl Reportable for ConciliatorOutput {
    fn event(&self, round: Round, processor: ProcessorId) -> TraceEvent {
        TraceEvent::Output {
            round,
            processor,
            output: self.to_payload(0),
        }
    }
}

impl Reportable for Value {
    fn event(&self, round: Round, processor: ProcessorId) -> TraceEvent {
        TraceEvent::Output {
            round,
            processor,
            output: Payload::Value(self.clone()),
        }
    }
}

/// An irrevocable consensus decision.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Decision(pub Value);

impl Reportable for Decision {
    fn event(&self, round: Round, processor: ProcessorId) -> TraceEvent {
        TraceEvent::Decision {
            round,
            processor,
            value: self.0.clone(),
        }
    }
}
