use core::convert::Infallible;

use crate::model::{Payload, ProcessorId, Round, Value};

use super::OracleDraw;

/// What one receiver simulated receiving for one subject at the end of a
/// simulated no-equivocation round.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum DeliveryOutcome {
    Message(Payload),
    Lambda,
    None,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TraceEvent {
    Link {
        round: Round,
        from: ProcessorId,
        to: ProcessorId,
        payload: Payload,
    },
    Output {
        round: Round,
        processor: ProcessorId,
        output: Payload,
    },
    Decision {
        round: Round,
        processor: ProcessorId,
        value: Value,
    },
    Oracle(OracleDraw),
    SimulatedDelivery {
        /// IIAB round in which the delivery is computed (the second of the
        /// pair).
        round: Round,
        /// Index of the simulated round inside its protocol instance.
        noeq_round: u32,
        receiver: ProcessorId,
        subject: ProcessorId,
        outcome: DeliveryOutcome,
    },
}

/// How a process output shows up in a trace.
pub trait Reportable {
    fn event(&self, round: Round, processor: ProcessorId) -> TraceEvent;
}

impl Reportable for Infallible {
    fn event(&self, _: Round, _: ProcessorId) -> TraceEvent {
        match *self {}
    }
}

impl Reportable for Payload {
    fn event(&self, round: Round, processor: ProcessorId) -> TraceEvent {
        TraceEvent::Output {
            round,
            processor,
            output: self.clone(),
        }
    }
}
