//! Protocols and verification machinery for the Iterated Infinite Authenticated
//! Byzantine (IIAB) model.
//!
//! The crate is `no_std` (it only needs `alloc`) and contains every piece of
//! the simulator that does not touch a file system or a terminal:
//!
//! - [`model`]: identifiers, payloads, participation schedules, receive views
//!   and the strict-majority calculus.
//! - [`engine`]: the IIAB round executor with its signed-message ledger and
//!   the leader-election oracle.
//! - [`noeq`]: the no-equivocation model, natively and simulated on top of two
//!   IIAB rounds per round.
//! - [`protocols`]: commit-adopt, the two conciliators and the alternating
//!   consensus composition.
//! - [`adversary`]: adversary strategies, leader policies and schedule
//!   generators.
//! - [`checker`]: exhaustive small-instance enumeration and the property
//!   checks run against it.
//!
//! Everything is deterministic given the inputs and the RNG seeds; maps are
//! ordered (`BTreeMap`/`BTreeSet`) so iteration order never depends on hashing.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod checker;
pub mod engine;
pub mod model;
pub mod noeq;
pub mod protocols;

pub use engine::{EngineConfig, EngineError, IiabEngine, OracleMode, Process, RoundReport};
pub use model::{
    NoEqEntry, NoEqView, Participation, ParticipationSchedule, Payload, ProcessorId, Round,
    SignedMessage, Value,
};
