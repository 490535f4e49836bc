use std::collections::BTreeMap;

use proptest::prelude::*;

use iiab_core::adversary::{
    schedules, Balancer, EquivocatorSplit, LambdaFlood, LeaderWithholder, Mimic, NoEqMimic, NoEqRandom, NoEqSilent,
    Phased, RandomInjector, RandomLeaders, Selective, SelfLeaders, Silent,
};
use iiab_core::engine::{Injector, LeaderPolicy};
use iiab_core::model::{is_growing, validate_schedule};
use iiab_core::noeq::NoEqInjector;
use iiab_core::protocols::{run_consensus, ConsensusKind};
use iiab_core::{EngineConfig, OracleMode, ParticipationSchedule, ProcessorId, Round, Value};

fn noeq(i: u8, seed: u64) -> Box<dyn NoEqInjector + Send> {
    match i % 5 {
        0 => Box::new(NoEqSilent),
        1 => Box::new(NoEqMimic),
        2 => Box::new(LambdaFlood),
        3 => Box::new(Balancer),
        _ => Box::new(NoEqRandom::new(seed)),
    }
}

fn native(i: u8, seed: u64) -> Box<dyn Injector + Send> {
    match i % 5 {
        0 => Box::new(Silent),
        1 => Box::new(Mimic),
        2 => Box::new(EquivocatorSplit::default()),
        3 => Box::new(Selective),
        _ => Box::new(RandomInjector::new(seed)),
    }
}

fn leaders(i: u8, seed: u64) -> Box<dyn LeaderPolicy> {
    match i % 3 {
        0 => Box::new(SelfLeaders),
        1 => Box::new(LeaderWithholder),
        _ => Box::new(RandomLeaders::new(seed)),
    }
}

fn schedule(i: u8, horizon: u32, seed: u64) -> ParticipationSchedule {
    match i % 4 {
        0 => schedules::constant((1..=5).map(ProcessorId).collect(), [ProcessorId(4), ProcessorId(5)].into(), horizon),
        1 => schedules::stabilizing_at(schedules::Stabilizing {
            n: 5,
            stable_from: Round::at(6),
            impersonated: 2,
            horizon,
            seed,
        }),
        2 => schedules::churn(6, 3, horizon, seed),
        _ => schedules::fresh_churn(3, horizon, seed),
    }
    .expect("valid parameters")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn consensus_is_safe_under_every_builtin_adversary(
        seed in any::<u64>(),
        det in any::<bool>(),
        (s, n, a, l) in (0u8..4, 0u8..5, 0u8..5, 0u8..3),
        unanimous in any::<bool>(),
    ) {
        let kind = if det { ConsensusKind::Deterministic } else { ConsensusKind::Probabilistic };
        let schedule = schedule(s, 40, seed);
        prop_assert!(validate_schedule(&schedule).is_empty());
        let inputs: BTreeMap<ProcessorId, Value> = schedule
            .universe()
            .into_iter()
            .map(|p| (p, Value::from(if unanimous || p.0 % 2 == 0 { "a" } else { "b" })))
            .collect();
        let mut adversary = Phased::new(kind, noeq(n, seed), native(a, seed));
        let config = EngineConfig { oracle: OracleMode::Honest, seed, record_events: false, ..EngineConfig::default() };
        let out = run_consensus(schedule, &inputs, kind, 40, config, &mut adversary, &mut *leaders(l, seed))
            .expect("built-in strategies are admissible");
        prop_assert!(out.agreement());
        if unanimous {
            prop_assert!(out.decisions.values().all(|(_, v)| *v == Value::from("a")));
        }
    }

    #[test]
    fn stabilizing_schedules_grow_and_settle(seed in any::<u64>(), r in 1u32..12, f in 0u32..3) {
        let s = schedules::stabilizing_at(schedules::Stabilizing {
            n: 5,
            stable_from: Round::at(r),
            impersonated: f,
            horizon: 20,
            seed,
        })
        .unwrap();
        prop_assert!(is_growing(&s));
        prop_assert!(s.stabilization_round().unwrap().get() <= r);
        prop_assert!(s.impersonated_from(Round::at(r)).len() as u32 == f);
    }
}
