use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{AdversaryDecision, EngineConfig, IiabEngine};
use crate::model::{Participation, ParticipationSchedule, Payload, ProcessorId, Round, Value};
use crate::protocols::{parse_chain, DetConciliator};

use super::{Behavior, EnvelopeExceeded, Report, Verdict};

/// Largest number of chain rounds the exhaustive check accepts.
pub const MAX_CHAIN_ROUNDS: u32 = 2;
/// Largest number of distinct per-link message sets in a round.
const MAX_LINK_OPTIONS: usize = 64;

/// One instance of the deterministic conciliator check: constant online set
/// (the keys of `inputs`) for `chain_rounds + 1` rounds, and at most one
/// processor impersonated from some round on.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DetInstance {
    pub chain_rounds: u32,
    pub inputs: BTreeMap<ProcessorId, Value>,
    /// The impersonated processor and the first round it is impersonated.
    pub impersonated: Option<(ProcessorId, Round)>,
    /// Values the adversary may sign besides the inputs.
    pub fresh: Vec<Value>,
}

impl DetInstance {
    pub fn schedule(&self) -> ParticipationSchedule {
        let online: BTreeSet<ProcessorId> = self.inputs.keys().copied().collect();
        ParticipationSchedule::new(
            (1..=self.chain_rounds + 1)
                .map(|r| Participation {
                    online: online.clone(),
                    impersonated: match self.impersonated {
                        Some((f, from)) if from.get() <= r => [f].into(),
                        _ => BTreeSet::new(),
                    },
                })
                .collect(),
        )
    }

    fn values(&self) -> Vec<Value> {
        let mut out: Vec<Value> = self.inputs.values().cloned().collect();
        out.extend(self.fresh.iter().cloned());
        out.sort();
        out.dedup();
        out
    }

    fn describe(&self) -> alloc::string::String {
        format!(
            "N={} inputs={:?} impersonated={:?} fresh={:?}",
            self.chain_rounds,
            self.inputs.iter().map(|(p, v)| (p.0, v)).collect::<Vec<_>>(),
            self.impersonated.map(|(f, r)| (f.0, r.get())),
            self.fresh
        )
    }
}

fn subsets(items: &[Payload]) -> Vec<BTreeSet<Payload>> {
    (0u32..1 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, m)| m.clone())
                .collect()
        })
        .collect()
}

/// Every decision giving each link out of `f` one of `options`.
fn link_products(f: ProcessorId, receivers: &[ProcessorId], options: &[BTreeSet<Payload>]) -> Vec<AdversaryDecision> {
    let mut out = vec![AdversaryDecision::default()];
    for q in receivers {
        out = out
            .into_iter()
            .flat_map(|d| {
                options.iter().map(move |o| {
                    let mut d = d.clone();
                    d.inject_all(f, *q, o.iter().cloned());
                    d
                })
            })
            .collect();
    }
    out
}

#[derive(Clone)]
struct State {
    engine: IiabEngine,
    weight: u128,
    path: Vec<AdversaryDecision>,
}

/// Runs the deterministic conciliator under every adversary behavior that
/// matters to it and checks agreement, validity and the equality of `e_p`
/// among never-impersonated processors after the chain rounds.
///
/// In chain round 1 each link out of the impersonated processor `f` carries
/// any set of `<f,1,x>` with `x` an input or fresh value; in chain round
/// `r > 1` any set of `f`-signed extensions of level `r-1` chains that do
/// not contain `f`; in the last round nothing, one value, or something that
/// is not a lone value. Messages the protocol ignores in a round (wrong
/// level, wrong round, repeated signers) are not enumerated. Executions are
/// merged when all processes are in the same state; the final round is
/// analysed once per vector of candidates, receiver by receiver.
pub fn exhaustive_det_conciliator(instance: &DetInstance) -> Result<Report, EnvelopeExceeded> {
    let n = instance.chain_rounds;
    let values = instance.values();
    let receivers: Vec<ProcessorId> = instance.inputs.keys().copied().collect();
    let estimate = (1u128 << values.len()).pow(receivers.len() as u32);
    if n == 0 || n > MAX_CHAIN_ROUNDS {
        return Err(EnvelopeExceeded {
            reason: "chain rounds outside 1..=2",
            estimate,
        });
    }
    if values.len() > 6 || receivers.len() > super::MAX_PROCESSORS {
        return Err(EnvelopeExceeded {
            reason: "too many values or processors",
            estimate,
        });
    }
    let schedule = instance.schedule();
    let start = Round::FIRST;
    let config = EngineConfig {
        record_events: false,
        ..EngineConfig::default()
    };
    let describe = instance.describe();
    let mut report = Report::new("deterministic conciliator");
    report.assume(
        "adversary messages the protocol ignores in their round are omitted; fresh values stand for every value outside the inputs",
    );

    let procs: BTreeMap<ProcessorId, DetConciliator> = instance
        .inputs
        .iter()
        .map(|(p, v)| (*p, DetConciliator::new(*p, n, start, v.clone())))
        .collect();
    let mut states: BTreeMap<BTreeMap<ProcessorId, DetConciliator>, State> = BTreeMap::new();
    states.insert(
        procs,
        State {
            engine: IiabEngine::new(schedule.clone(), config),
            weight: 1,
            path: Vec::new(),
        },
    );

    for r in 1..=n {
        let round = Round::at(r);
        let f = schedule.at(round).and_then(|p| p.impersonated.iter().next().copied());
        let mut next: BTreeMap<BTreeMap<ProcessorId, DetConciliator>, State> = BTreeMap::new();
        for (procs, state) in &states {
            let sends = state
                .engine
                .send_phase(&mut procs.clone())
                .expect("the conciliator sends in every chain round");
            let decisions = match f {
                None => vec![AdversaryDecision::default()],
                Some(f) => {
                    let items: Vec<Payload> = if r == 1 {
                        values
                            .iter()
                            .map(|x| Payload::signed(f, round, Payload::Value(x.clone())))
                            .collect()
                    } else {
                        state
                            .engine
                            .ledger()
                            .iter()
                            .map(|(m, _)| Payload::Signed(m.clone()))
                            .filter(|m| parse_chain(m, start, r - 1).is_some_and(|(signers, _)| !signers.contains(&f)))
                            .map(|m| Payload::signed(f, round, m))
                            .collect()
                    };
                    let options = subsets(&items);
                    if options.len() > MAX_LINK_OPTIONS {
                        return Err(EnvelopeExceeded {
                            reason: "too many messages per link",
                            estimate: (options.len() as u128).pow(receivers.len() as u32),
                        });
                    }
                    link_products(f, &receivers, &options)
                }
            };
            for d in decisions {
                let mut engine = state.engine.clone();
                let mut p2 = procs.clone();
                engine
                    .receive_phase(sends.clone(), d.clone(), None, &mut p2)
                    .expect("enumerated injections are admissible");
                match next.get_mut(&p2) {
                    Some(s) => s.weight += state.weight,
                    None => {
                        let mut path = state.path.clone();
                        path.push(d);
                        next.insert(
                            p2,
                            State {
                                engine,
                                weight: state.weight,
                                path,
                            },
                        );
                    }
                }
            }
        }
        states = next;
    }

    let honest: BTreeSet<ProcessorId> = receivers
        .iter()
        .copied()
        .filter(|p| !matches!(instance.impersonated, Some((f, from)) if f == *p && from.get() <= n))
        .collect();
    let mut by_candidates: BTreeMap<Vec<Option<Value>>, (u128, BTreeMap<ProcessorId, DetConciliator>, State)> =
        BTreeMap::new();
    for (procs, state) in states {
        let sets: BTreeSet<_> = honest.iter().map(|p| procs[p].extracted().clone()).collect();
        report.record("equal e_p after the chain rounds", (sets.len() <= 1).into(), state.weight, || {
            (
                describe.clone(),
                Behavior::Iiab(state.path.clone()),
                format!("{:?}", procs.iter().map(|(p, c)| (p.0, c.extracted())).collect::<Vec<_>>()),
            )
        });
        let key: Vec<Option<Value>> = procs.values().map(|c| c.candidate().cloned()).collect();
        match by_candidates.get_mut(&key) {
            Some(e) => e.0 += state.weight,
            None => {
                by_candidates.insert(key, (state.weight, procs, state));
            }
        }
    }

    let last = Round::at(n + 1);
    let f = schedule.at(last).and_then(|p| p.impersonated.iter().next().copied());
    let mut final_options: Vec<BTreeSet<Payload>> = vec![BTreeSet::new(), [Payload::tagged("junk", [])].into()];
    final_options.extend(values.iter().map(|x| BTreeSet::from([Payload::Value(x.clone())])));
    let unanimous = {
        let mut vs = instance.inputs.values();
        let first = vs.next();
        first.filter(|v| vs.all(|w| w == *v)).cloned()
    };
    for (_, (weight, procs, state)) in by_candidates {
        let sends = state
            .engine
            .send_phase(&mut procs.clone())
            .expect("every processor has a candidate");
        let decisions: Vec<AdversaryDecision> = match f {
            None => vec![AdversaryDecision::default()],
            Some(f) => final_options
                .iter()
                .map(|o| {
                    let mut d = AdversaryDecision::default();
                    for q in &receivers {
                        d.inject_all(f, *q, o.iter().cloned());
                    }
                    d
                })
                .collect(),
        };
        let mut achievable: BTreeMap<ProcessorId, BTreeSet<Value>> = BTreeMap::new();
        for d in &decisions {
            let mut engine = state.engine.clone();
            let mut p2 = procs.clone();
            let out = engine
                .receive_phase(sends.clone(), d.clone(), None, &mut p2)
                .expect("enumerated injections are admissible");
            for (q, v) in out.outputs {
                achievable.entry(q).or_default().insert(v);
            }
        }
        let combos = match f {
            None => 1,
            Some(_) => (decisions.len() as u128).pow(receivers.len() as u32),
        };
        report.behaviors_checked += weight * combos;
        let union: BTreeSet<&Value> = achievable.values().flatten().collect();
        let agree = achievable.len() == receivers.len() && union.len() == 1;
        let witness = || format!("achievable outputs {achievable:?}");
        report.record("agreement", agree.into(), weight * combos, || {
            (describe.clone(), Behavior::Iiab(state.path.clone()), witness())
        });
        let validity = match &unanimous {
            None => Verdict::NotApplicable,
            Some(v) => union.iter().all(|w| *w == v).into(),
        };
        report.record("validity", validity, weight * combos, || {
            (describe.clone(), Behavior::Iiab(state.path.clone()), witness())
        });
    }
    Ok(report)
}

/// The instances behind the deterministic agreement check: three processors,
/// `N = 2`, inputs `(1,2,3)`, `(1,1,2)` and `(2,2,2)`, and either nobody or
/// one processor impersonated from round 1, 2 or 3, with one fresh value
/// below every input.
pub fn det_instances() -> Vec<DetInstance> {
    let v = |x: u8| Value::new(vec![x]);
    let mut out = Vec::new();
    for inputs in [[1, 2, 3], [1, 1, 2], [2, 2, 2]] {
        let inputs: BTreeMap<ProcessorId, Value> = (1..=3).map(ProcessorId).zip(inputs.map(v)).collect();
        let mut choices = vec![None];
        for f in 1..=3 {
            for from in 1..=3 {
                choices.push(Some((ProcessorId(f), Round::at(from))));
            }
        }
        for impersonated in choices {
            out.push(DetInstance {
                chain_rounds: 2,
                inputs: inputs.clone(),
                impersonated,
                fresh: vec![v(0)],
            });
        }
    }
    out
}
