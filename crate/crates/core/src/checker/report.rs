use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::AdversaryDecision;
use crate::noeq::NoEqAdversaryDecision;

/// Outcome of one property on one behavior.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Verdict {
    Holds,
    Violated,
    /// The property's preconditions do not hold; not a success.
    NotApplicable,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Verdict {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }
}

/// A replayable adversary behavior.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Behavior {
    /// One shape decision per no-eq round.
    NoEq(Vec<NoEqAdversaryDecision>),
    /// One injection per IIAB round.
    Iiab(Vec<AdversaryDecision>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    pub property: String,
    /// Schedule, inputs and anything else needed besides the behavior.
    pub instance: String,
    pub behavior: Behavior,
    pub witness: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Tally {
    pub held: u128,
    pub violated: u128,
    pub not_applicable: u128,
}

impl Tally {
    pub fn add(&mut self, verdict: Verdict, weight: u128) {
        match verdict {
            Verdict::Holds => self.held += weight,
            Verdict::Violated => self.violated += weight,
            Verdict::NotApplicable => self.not_applicable += weight,
        }
    }
}

/// Violations kept verbatim per report; the tallies count all of them.
pub const MAX_RECORDED_VIOLATIONS: usize = 16;

/// Result of an exhaustive check.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Report {
    pub task: String,
    /// Reductions and restrictions the result depends on.
    pub assumptions: Vec<String>,
    pub behaviors_checked: u128,
    pub properties: BTreeMap<String, Tally>,
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn new(task: impl Into<String>) -> Report {
        Report {
            task: task.into(),
            ..Report::default()
        }
    }

    pub fn assume(&mut self, assumption: impl Into<String>) {
        self.assumptions.push(assumption.into());
    }

    /// Tallies `verdict` for `weight` behaviors; `violation` is called to
    /// build the record only when needed.
    pub fn record(
        &mut self,
        property: &str,
        verdict: Verdict,
        weight: u128,
        violation: impl FnOnce() -> (String, Behavior, String),
    ) {
        self.properties
            .entry(property.into())
            .or_default()
            .add(verdict, weight);
        if verdict == Verdict::Violated && self.violations.len() < MAX_RECORDED_VIOLATIONS {
            let (instance, behavior, witness) = violation();
            self.violations.push(Violation {
                property: property.into(),
                instance,
                behavior,
                witness,
            });
        }
    }

    pub fn tally(&self, property: &str) -> Tally {
        self.properties.get(property).copied().unwrap_or_default()
    }

    pub fn violation_count(&self) -> u128 {
        self.properties.values().map(|t| t.violated).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }

    /// Associative merge of two partial reports of the same task.
    pub fn merge(mut self, other: Report) -> Report {
        self.behaviors_checked += other.behaviors_checked;
        for a in other.assumptions {
            if !self.assumptions.contains(&a) {
                self.assumptions.push(a);
            }
        }
        for (k, t) in other.properties {
            let e = self.properties.entry(k).or_default();
            e.held += t.held;
            e.violated += t.violated;
            e.not_applicable += t.not_applicable;
        }
        for v in other.violations {
            if self.violations.len() < MAX_RECORDED_VIOLATIONS {
                self.violations.push(v);
            }
        }
        self
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {} behaviors", self.task, self.behaviors_checked)?;
        for (k, t) in &self.properties {
            writeln!(
                f,
                "  {k}: held {} violated {} n/a {}",
                t.held, t.violated, t.not_applicable
            )?;
        }
        for v in &self.violations {
            writeln!(f, "  VIOLATION {} [{}]: {}", v.property, v.instance, v.witness)?;
        }
        Ok(())
    }
}

/// The requested enumeration is outside what the checker will attempt.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EnvelopeExceeded {
    pub reason: &'static str,
    /// Closed-form number of behaviors that would have been enumerated.
    pub estimate: u128,
}

impl fmt::Display for EnvelopeExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "enumeration refused ({}); it would cover {} behaviors",
            self.reason, self.estimate
        )
    }
}
