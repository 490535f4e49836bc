//! Adversary strategies, leader policies and schedule generators.

mod iiab;
mod leaders;
mod noeq;
pub mod schedules;

pub use iiab::{
    admissible, resign, EquivocatorSplit, Mimic, Phased, RandomInjector, ScriptedInjector,
    Selective, Silent,
};
pub use leaders::{LeaderWithholder, RandomLeaders, SelfLeaders};
pub use noeq::{Balancer, InvalidScript, LambdaFlood, NoEqMimic, NoEqRandom, NoEqScript, NoEqSilent};
