use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{validate_injection, AdversaryDecision, EngineConfig, IiabEngine};
use crate::model::{NoEqEntry, NoEqView, Participation, ParticipationSchedule, Payload, ProcessorId, Round};
use crate::noeq::{classify_delivery_profile, DeliveryCase, Echo, Simulated};

use super::{assignments, Behavior, EnvelopeExceeded, Report, Verdict};

/// Which adversary symbols the IIAB enumeration uses.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Symbols {
    /// The honest alphabet plus one fresh symbol.
    Reduced,
    /// The honest alphabet plus two fresh symbols, malformed claims and
    /// noise on every link.
    Unreduced,
}

/// What a receiver got for a subject, with fresh symbols identified.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Abstract {
    Nothing,
    Lambda,
    Honest(Payload),
    Fresh,
}

/// One reachable per-subject delivery profile: the simulated round's
/// participation, the honest payloads, the subject and what every receiver
/// got for it.
pub type AbstractProfile = (Option<ProcessorId>, Option<ProcessorId>, Vec<(ProcessorId, Payload)>, ProcessorId, Vec<Abstract>);

/// One simulated round over processors `1..=n`, all online, with at most one
/// processor impersonated in each of the two IIAB rounds.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConformanceInstance {
    pub n: u32,
    pub impersonated_a: Option<ProcessorId>,
    pub impersonated_b: Option<ProcessorId>,
    /// Round-A payload of every processor well-behaved in round A.
    pub honest: BTreeMap<ProcessorId, Payload>,
}

impl ConformanceInstance {
    fn universe(&self) -> BTreeSet<ProcessorId> {
        (1..=self.n).map(ProcessorId).collect()
    }

    fn schedule(&self) -> ParticipationSchedule {
        let part = |f: Option<ProcessorId>| Participation::new(self.universe(), f);
        ParticipationSchedule::new(vec![part(self.impersonated_a), part(self.impersonated_b)])
    }

    fn describe(&self) -> String {
        format!(
            "n={} F_A={:?} F_B={:?} honest={:?}",
            self.n,
            self.impersonated_a.map(|p| p.0),
            self.impersonated_b.map(|p| p.0),
            self.honest.iter().map(|(p, m)| (p.0, m)).collect::<Vec<_>>()
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

fn fresh(i: u8) -> Payload {
    Payload::tagged("fresh", [Payload::value(&[i][..])])
}

fn noise() -> Payload {
    Payload::tagged("noise", [])
}

fn abstract_entry(e: Option<&NoEqEntry>, alphabet: &[Payload]) -> Abstract {
    match e {
        None => Abstract::Nothing,
        Some(NoEqEntry::Lambda) => Abstract::Lambda,
        Some(NoEqEntry::Message(m)) if alphabet.contains(m) => Abstract::Honest(m.clone()),
        Some(NoEqEntry::Message(_)) => Abstract::Fresh,
    }
}

/// Round-A link contents the adversary may choose from.
fn round_a_options(f: ProcessorId, round: Round, alphabet: &[Payload], symbols: Symbols) -> Vec<BTreeSet<Payload>> {
    let mut letters: Vec<Payload> = alphabet.to_vec();
    letters.push(fresh(1));
    if symbols == Symbols::Unreduced {
        letters.push(fresh(2));
    }
    let items: Vec<Payload> = letters.into_iter().map(|m| Payload::signed(f, round, m)).collect();
    subsets(&items)
}

/// Round-B link contents: any set of claims about round-A announcements in
/// the ledger, or a link that is heard of but carries no claim.
fn round_b_options(g: ProcessorId, round_b: Round, announcements: &[Payload], symbols: Symbols) -> Vec<BTreeSet<Payload>> {
    let claims: Vec<Payload> = announcements
        .iter()
        .map(|m| Payload::signed(g, round_b, m.clone()))
        .collect();
    let mut out = subsets(&claims);
    out.push([noise()].into());
    if symbols == Symbols::Unreduced {
        out.push([Payload::signed(g, round_b, noise())].into());
        out.push([Payload::signed(g, round_b, Payload::signed(g, round_b, fresh(3)))].into());
    }
    out
}

fn product(f: ProcessorId, receivers: &[ProcessorId], options: &[BTreeSet<Payload>]) -> Vec<AdversaryDecision> {
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

/// Largest number of round-A adversary moves per instance.
const MAX_ROUND_A_MOVES: usize = 1 << 15;

/// Checks one simulated round against every enumerated IIAB behavior over
/// its two rounds: each delivery profile must be one of the four no-eq
/// cases, and a subject well-behaved in round A must reach everyone with its
/// payload. Also returns the reachable abstract profiles.
///
/// Round A enumerates every set of announcements signed by the impersonated
/// processor on every link. Round B is analysed receiver by receiver, since
/// a receiver's simulated view depends only on the honest claims and its own
/// link from the round-B impersonated processor.
pub fn conformance_instance(
    instance: &ConformanceInstance,
    symbols: Symbols,
) -> Result<(Report, BTreeSet<AbstractProfile>), EnvelopeExceeded> {
    let universe = instance.universe();
    let receivers: Vec<ProcessorId> = universe.iter().copied().collect();
    let alphabet: Vec<Payload> = {
        let mut a: Vec<Payload> = instance.honest.values().cloned().collect();
        a.sort();
        a.dedup();
        a
    };
    let round_a = Round::FIRST;
    let round_b = round_a.next();
    let config = EngineConfig {
        record_events: false,
        ..EngineConfig::default()
    };
    let mut report = Report::new("simulation conformance");
    report.assume(match symbols {
        Symbols::Reduced => "adversary payloads: honest alphabet plus one fresh symbol",
        Symbols::Unreduced => "adversary payloads: honest alphabet, two fresh symbols, malformed claims and noise",
    });
    let mut reachable = BTreeSet::new();
    let describe = instance.describe();
    let honest_list: Vec<(ProcessorId, Payload)> = instance.honest.iter().map(|(p, m)| (*p, m.clone())).collect();

    let mut procs: BTreeMap<ProcessorId, Simulated<Echo>> = receivers
        .iter()
        .map(|p| {
            let payload = instance.honest.get(p).cloned().unwrap_or_else(|| fresh(0));
            (*p, Simulated::new(*p, Echo::new(payload), round_a, BTreeSet::new()))
        })
        .collect();
    let engine = IiabEngine::new(instance.schedule(), config);
    let sends_a = engine.send_phase(&mut procs).expect("round A sends");
    let moves_a = match instance.impersonated_a {
        None => vec![AdversaryDecision::default()],
        Some(f) => {
            let options = round_a_options(f, round_a, &alphabet, symbols);
            let count = options.len().pow(receivers.len() as u32);
            if count > MAX_ROUND_A_MOVES {
                return Err(EnvelopeExceeded {
                    reason: "too many round-A moves",
                    estimate: count as u128,
                });
            }
            product(f, &receivers, &options)
        }
    };

    for move_a in moves_a {
        let mut engine = engine.clone();
        let mut procs = procs.clone();
        engine
            .receive_phase(sends_a.clone(), move_a.clone(), None, &mut procs)
            .expect("enumerated round-A injections are admissible");
        let sends_b = engine.send_phase(&mut procs).expect("round B sends");
        let announcements: Vec<Payload> = engine
            .ledger()
            .iter()
            .filter(|(m, r)| *r == round_a && m.round == round_a)
            .map(|(m, _)| Payload::Signed(m.clone()))
            .collect();
        let options = match instance.impersonated_b {
            None => vec![BTreeSet::new()],
            Some(g) => round_b_options(g, round_b, &announcements, symbols),
        };
        if let Some(g) = instance.impersonated_b {
            let mut all = AdversaryDecision::default();
            for o in &options {
                for q in &receivers {
                    all.inject_all(g, *q, o.iter().cloned());
                }
            }
            let violations = validate_injection(engine.ledger(), round_b, &[g].into(), &all);
            report.record("admissible round-B injections", violations.is_empty().into(), 1, || {
                (describe.clone(), Behavior::Iiab(vec![move_a.clone()]), format!("{violations:?}"))
            });
        }

        // Views each receiver can end up with, one per round-B option.
        let mut per_receiver: BTreeMap<ProcessorId, Vec<NoEqView>> = BTreeMap::new();
        for q in &receivers {
            let relay = procs[q].relay().clone();
            let views = options
                .iter()
                .map(|o| {
                    let mut d = AdversaryDecision::default();
                    if let Some(g) = instance.impersonated_b {
                        d.inject_all(g, *q, o.iter().cloned());
                    }
                    let view = IiabEngine::build_view(round_b, *q, &sends_b.honest, &d);
                    relay.clone().deliver(&view, Round::FIRST, &BTreeSet::new())
                })
                .collect();
            per_receiver.insert(*q, views);
        }

        let weight = (options.len() as u128).pow(receivers.len() as u32);
        report.behaviors_checked += weight;
        let mut cases_ok = true;
        let mut honest_ok = true;
        let mut witness = String::new();
        for subject in &receivers {
            // Distinct entries each receiver can get for this subject.
            let entries: Vec<BTreeSet<Option<NoEqEntry>>> = receivers
                .iter()
                .map(|q| per_receiver[q].iter().map(|v| v.delivery.get(subject).cloned()).collect())
                .collect();
            let mut profiles: Vec<Vec<Option<NoEqEntry>>> = vec![Vec::new()];
            for set in &entries {
                profiles = profiles
                    .into_iter()
                    .flat_map(|p| {
                        set.iter().map(move |e| {
                            let mut p = p.clone();
                            p.push(e.clone());
                            p
                        })
                    })
                    .collect();
            }
            for profile in profiles {
                let views: BTreeMap<ProcessorId, NoEqView> = receivers
                    .iter()
                    .zip(&profile)
                    .map(|(q, e)| {
                        let mut v = NoEqView::new(Round::FIRST, *q);
                        if let Some(e) = e {
                            v.delivery.insert(*subject, e.clone());
                        }
                        (*q, v)
                    })
                    .collect();
                let case = classify_delivery_profile(&views, *subject);
                if case.number().is_none() {
                    cases_ok = false;
                    witness = format!("subject {subject}: {profile:?}");
                }
                if let Some(m) = instance.honest.get(subject) {
                    if instance.impersonated_a != Some(*subject)
                        && (case != DeliveryCase::Same || profile.iter().any(|e| *e != Some(NoEqEntry::Message(m.clone()))))
                    {
                        honest_ok = false;
                        witness = format!("subject {subject}: {profile:?}");
                    }
                }
                reachable.insert((
                    instance.impersonated_a,
                    instance.impersonated_b,
                    honest_list.clone(),
                    *subject,
                    profile.iter().map(|e| abstract_entry(e.as_ref(), &alphabet)).collect(),
                ));
            }
        }
        report.record("profiles are no-eq cases 1-4", cases_ok.into(), weight, || {
            (describe.clone(), Behavior::Iiab(vec![move_a.clone()]), witness.clone())
        });
        report.record("well-behaved payloads arrive as case 2", honest_ok.into(), weight, || {
            (describe.clone(), Behavior::Iiab(vec![move_a.clone()]), witness.clone())
        });
    }
    Ok((report, reachable))
}

/// The impersonation patterns of one simulated round over processors
/// `1..=3`, up to renaming: nobody, only in A, only in B, the same processor
/// in both, different processors.
pub fn conformance_classes() -> Vec<(Option<ProcessorId>, Option<ProcessorId>)> {
    let p = ProcessorId;
    vec![
        (None, None),
        (Some(p(3)), None),
        (None, Some(p(3))),
        (Some(p(3)), Some(p(3))),
        (Some(p(3)), Some(p(2))),
    ]
}

/// Every instance of [`conformance_classes`] with round-A honest payloads
/// drawn from `alphabet`.
pub fn conformance_instances(alphabet: &[Payload]) -> Vec<ConformanceInstance> {
    let mut out = Vec::new();
    for (fa, fb) in conformance_classes() {
        let honest: BTreeSet<ProcessorId> = (1..=3).map(ProcessorId).filter(|p| Some(*p) != fa).collect();
        for payloads in assignments(&honest, alphabet) {
            out.push(ConformanceInstance {
                n: 3,
                impersonated_a: fa,
                impersonated_b: fb,
                honest: payloads,
            });
        }
    }
    out
}

/// Cross-validates the one-fresh-symbol reduction on two well-behaved and one
/// impersonated processor: the reachable abstract profiles must be the same
/// with one fresh symbol and with two fresh symbols, malformed claims and
/// noise. Both runs must also conform.
pub fn reduction_cross_check(alphabet: &[Payload]) -> Result<Report, EnvelopeExceeded> {
    let mut report = Report::new("symmetry reduction cross-check");
    report.assume("two well-behaved processors and one impersonated processor per IIAB round");
    let a = alphabet.first().cloned().expect("nonempty alphabet");
    let b = alphabet.get(1).cloned().unwrap_or_else(|| a.clone());
    let p = ProcessorId;
    for (fa, fb) in conformance_classes().into_iter().filter(|(fa, fb)| fa.is_some() || fb.is_some()) {
        for (x, y) in [(a.clone(), a.clone()), (a.clone(), b.clone())] {
            let mut honest: BTreeMap<ProcessorId, Payload> = BTreeMap::new();
            let mut ws = (1..=3).map(p).filter(|q| Some(*q) != fa);
            honest.insert(ws.next().unwrap(), x.clone());
            honest.insert(ws.next().unwrap(), y.clone());
            if let Some(q) = ws.next() {
                honest.insert(q, x.clone());
            }
            let instance = ConformanceInstance {
                n: 3,
                impersonated_a: fa,
                impersonated_b: fb,
                honest,
            };
            let (r1, s1) = conformance_instance(&instance, Symbols::Reduced)?;
            let (r2, s2) = conformance_instance(&instance, Symbols::Unreduced)?;
            report.behaviors_checked += r1.behaviors_checked + r2.behaviors_checked;
            for (k, t) in r1.properties.iter().chain(&r2.properties) {
                report.record(k, if t.violated == 0 { Verdict::Holds } else { Verdict::Violated }, 1, || {
                    (instance.describe(), Behavior::Iiab(Vec::new()), format!("{t:?}"))
                });
            }
            let only_reduced: Vec<_> = s1.difference(&s2).collect();
            let only_unreduced: Vec<_> = s2.difference(&s1).collect();
            report.record(
                "same abstract profiles",
                (only_reduced.is_empty() && only_unreduced.is_empty()).into(),
                1,
                || {
                    (
                        instance.describe(),
                        Behavior::Iiab(Vec::new()),
                        format!("only reduced {only_reduced:?}; only unreduced {only_unreduced:?}"),
                    )
                },
            );
        }
    }
    Ok(report)
}

/// [`conformance_instance`] over every instance of [`conformance_instances`].
pub fn simulation_conformance(alphabet: &[Payload]) -> Result<Report, EnvelopeExceeded> {
    let mut report = Report::new("simulation conformance, n=3");
    for i in conformance_instances(alphabet) {
        report = report.merge(conformance_instance(&i, Symbols::Reduced)?.0);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> [Payload; 2] {
        [Payload::value("a"), Payload::value("b")]
    }

    #[test]
    fn no_adversary_delivers_everything() {
        let instance = ConformanceInstance {
            n: 3,
            impersonated_a: None,
            impersonated_b: None,
            honest: (1..=3).map(ProcessorId).zip(ab().into_iter().cycle()).collect(),
        };
        let (r, reachable) = conformance_instance(&instance, Symbols::Reduced).unwrap();
        assert!(r.is_clean(), "{r}");
        assert_eq!(r.behaviors_checked, 1);
        assert_eq!(reachable.len(), 3);
    }

    #[test]
    fn both_rounds_impersonated_conform() {
        let instance = ConformanceInstance {
            n: 3,
            impersonated_a: Some(ProcessorId(3)),
            impersonated_b: Some(ProcessorId(2)),
            honest: [(ProcessorId(1), Payload::value("a")), (ProcessorId(2), Payload::value("b"))].into(),
        };
        let (r, reachable) = conformance_instance(&instance, Symbols::Reduced).unwrap();
        assert!(r.is_clean(), "{r}");
        // Nobody hearing of the subject and everyone getting λ are both reachable.
        let cases: BTreeSet<_> = reachable.iter().filter(|p| p.3 == ProcessorId(3)).map(|p| p.4.clone()).collect();
        assert!(cases.contains(&vec![Abstract::Nothing; 3]));
        assert!(cases.contains(&vec![Abstract::Lambda; 3]));
    }
}
