//! Built-in strategies by name.

use iiab_core::adversary::{
    Balancer, EquivocatorSplit, LambdaFlood, LeaderWithholder, Mimic, NoEqMimic, NoEqRandom, NoEqSilent,
    RandomInjector, RandomLeaders, Selective, SelfLeaders, Silent,
};
use iiab_core::engine::{Injector, LeaderPolicy};
use iiab_core::noeq::NoEqInjector;

use crate::config::{AdversarySpec, ConfigError};

pub const NOEQ: &[&str] = &["silent", "mimic", "lambda_flood", "balancer", "random"];
pub const NATIVE: &[&str] = &["silent", "mimic", "equivocator_split", "selective", "random"];
pub const LEADERS: &[&str] = &["self", "withholder", "random"];

fn unknown(kind: &'static str, name: &str) -> ConfigError {
    ConfigError::UnknownStrategy {
        kind,
        name: name.into(),
    }
}

pub fn check_names(spec: &AdversarySpec) -> Result<(), ConfigError> {
    for (kind, name, known) in [
        ("no-eq", &spec.noeq, NOEQ),
        ("native", &spec.native, NATIVE),
        ("leader", &spec.leaders, LEADERS),
    ] {
        if !known.contains(&name.as_str()) {
            return Err(unknown(kind, name));
        }
    }
    Ok(())
}

/// Seeded strategies derive their stream from the run seed and a per-role
/// salt so the roles stay independent.
pub fn noeq(name: &str, seed: u64) -> Result<Box<dyn NoEqInjector + Send>, ConfigError> {
    Ok(match name {
        "silent" => Box::new(NoEqSilent),
        "mimic" => Box::new(NoEqMimic),
        "lambda_flood" => Box::new(LambdaFlood),
        "balancer" => Box::new(Balancer),
        "random" => Box::new(NoEqRandom::new(seed ^ 0x6e6f_6571)),
        _ => return Err(unknown("no-eq", name)),
    })
}

pub fn native(name: &str, seed: u64) -> Result<Box<dyn Injector + Send>, ConfigError> {
    Ok(match name {
        "silent" => Box::new(Silent),
        "mimic" => Box::new(Mimic),
        "equivocator_split" => Box::new(EquivocatorSplit::default()),
        "selective" => Box::new(Selective),
        "random" => Box::new(RandomInjector::new(seed ^ 0x6969_6162)),
        _ => return Err(unknown("native", name)),
    })
}

pub fn leaders(name: &str, seed: u64) -> Result<Box<dyn LeaderPolicy + Send>, ConfigError> {
    Ok(match name {
        "self" => Box::new(SelfLeaders),
        "withholder" => Box::new(LeaderWithholder),
        "random" => Box::new(RandomLeaders::new(seed ^ 0x6c65_6164)),
        _ => return Err(unknown("leader", name)),
    })
}
