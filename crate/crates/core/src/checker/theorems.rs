//! Majority properties of single no-eq rounds, checked on views.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Delivered, NoEqEntry, NoEqView, Participation, Payload, ProcessorId, Round};
use crate::noeq::{enumerate_shapes, noeq_deliver, NoEqAdversaryDecision};

use super::{Behavior, Report, Verdict};

fn senders_of(view: &NoEqView, m: &Payload) -> BTreeSet<ProcessorId> {
    view.senders_of(m)
}

fn count(view: &NoEqView, m: &Payload) -> usize {
    view.delivered().filter(|(_, x)| *x == m).count()
}

fn has_majority(view: &NoEqView, m: &Payload) -> bool {
    2 * count(view, m) > view.heard_of_count()
}

/// The senders `P_m` that delivered `m` to `p` are heard of by both `p` and
/// `p'`, and if they are a strict majority of `H_p` they are one of
/// `H_p ∩ H_p'`.
pub fn check_lemma1(view_p: &NoEqView, view_q: &NoEqView, m: &Payload) -> bool {
    let pm = senders_of(view_p, m);
    let hp = view_p.heard_of();
    let both: BTreeSet<ProcessorId> = hp.intersection(&view_q.heard_of()).copied().collect();
    if !pm.is_subset(&both) {
        return false;
    }
    !(2 * pm.len() > hp.len()) || 2 * pm.len() > both.len()
}

/// At most one message reaches a strict majority anywhere in the round.
pub fn check_thm2(views: &BTreeMap<ProcessorId, NoEqView>) -> bool {
    let winners: BTreeSet<Payload> = views
        .values()
        .flat_map(|v| {
            let heard = v.heard_of_count();
            let mut tally: BTreeMap<&Payload, usize> = BTreeMap::new();
            for (_, m) in v.delivered() {
                *tally.entry(m).or_default() += 1;
            }
            tally
                .into_iter()
                .filter(move |(_, c)| 2 * c > heard)
                .map(|(m, _)| m.clone())
                .collect::<Vec<_>>()
        })
        .collect();
    winners.len() <= 1
}

/// If some processor received `m1` from a strict majority and no
/// well-behaved processor broadcast `m2 ≠ m1`, everyone receives `m2` from
/// strictly fewer senders than `m1`. `honest` holds the broadcasts of the
/// well-behaved senders.
pub fn check_thm3(
    views: &BTreeMap<ProcessorId, NoEqView>,
    honest: &BTreeMap<ProcessorId, Payload>,
    m1: &Payload,
    m2: &NoEqEntry,
) -> Verdict {
    let NoEqEntry::Message(m2) = m2 else {
        return Verdict::NotApplicable;
    };
    if m1 == m2 || honest.values().any(|m| m == m2) || !views.values().any(|v| has_majority(v, m1)) {
        return Verdict::NotApplicable;
    }
    views
        .values()
        .all(|v| count(v, m2) < count(v, m1))
        .into()
}

/// Every participation of processors `1..=n` for one round: nonempty `O`,
/// `F ⊆ O`, `|F| < |W|`.
pub fn all_participations(n: u32) -> Vec<Participation> {
    let ids: Vec<ProcessorId> = (1..=n).map(ProcessorId).collect();
    let mut out = Vec::new();
    for o in 1u32..1 << n {
        let online: Vec<ProcessorId> = ids.iter().enumerate().filter(|(i, _)| o & (1 << i) != 0).map(|(_, p)| *p).collect();
        for f in 0u32..1 << online.len() {
            let impersonated: BTreeSet<ProcessorId> =
                online.iter().enumerate().filter(|(i, _)| f & (1 << i) != 0).map(|(_, p)| *p).collect();
            let part = Participation::new(online.iter().copied(), impersonated);
            if part.violations(Round::FIRST).is_empty() {
                out.push(part);
            }
        }
    }
    out
}

/// Every assignment of a payload from `alphabet` to each of `who`.
pub fn assignments(who: &BTreeSet<ProcessorId>, alphabet: &[Payload]) -> Vec<BTreeMap<ProcessorId, Payload>> {
    let mut out = vec![BTreeMap::new()];
    for p in who {
        out = out
            .into_iter()
            .flat_map(|a| {
                alphabet.iter().map(move |m| {
                    let mut a = a.clone();
                    a.insert(*p, m.clone());
                    a
                })
            })
            .collect();
    }
    out
}

/// Every shape decision for the impersonated processors of `part`.
pub fn all_decisions(part: &Participation, alphabet: &[Payload], receivers: &BTreeSet<ProcessorId>) -> Vec<NoEqAdversaryDecision> {
    let shapes = enumerate_shapes(alphabet, receivers);
    let mut out = vec![NoEqAdversaryDecision::new()];
    for f in &part.impersonated {
        out = out
            .into_iter()
            .flat_map(|d| shapes.iter().map(move |s| d.clone().with(*f, s.clone())))
            .collect();
    }
    out
}

/// The shared-sender and strict-majority checks over every one-round no-eq behavior
/// with `1..=max_n` processors and messages from `alphabet`: every
/// participation, every honest broadcast, every shape.
pub fn sweep_majority_theorems(max_n: u32, alphabet: &[Payload]) -> Report {
    let mut report = Report::new("majority theorems, one no-eq round");
    report.assume(format!("n ≤ {max_n}, alphabet of {}", alphabet.len()));
    for n in 1..=max_n {
        let receivers: BTreeSet<ProcessorId> = (1..=n).map(ProcessorId).collect();
        for part in all_participations(n) {
            for honest in assignments(&part.well_behaved(), alphabet) {
                for d in all_decisions(&part, alphabet, &receivers) {
                    let views = noeq_deliver(Round::FIRST, &part, &receivers, &honest, &d)
                        .expect("enumerated decisions are valid");
                    report.behaviors_checked += 1;
                    let instance = || format!("O={:?} F={:?} honest={:?}", part.online, part.impersonated, honest);
                    let behavior = || Behavior::NoEq(vec![d.clone()]);

                    let mut lemma = true;
                    for p in views.values() {
                        for q in views.values() {
                            for m in alphabet {
                                lemma &= check_lemma1(p, q, m);
                            }
                        }
                    }
                    report.record("majority senders are shared", lemma.into(), 1, || (instance(), behavior(), format!("{views:?}")));
                    report.record("at most one strict majority", check_thm2(&views).into(), 1, || {
                        (instance(), behavior(), format!("{views:?}"))
                    });
                    for m1 in alphabet {
                        for m2 in alphabet.iter().map(|m| NoEqEntry::Message(m.clone())).chain([NoEqEntry::Lambda]) {
                            let v = check_thm3(&views, &honest, m1, &m2);
                            report.record("competing message outnumbered", v, 1, || {
                                (instance(), behavior(), format!("m1={m1} m2={m2:?} {views:?}"))
                            });
                        }
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> ProcessorId {
        ProcessorId(i)
    }

    fn m(s: &str) -> Payload {
        Payload::value(s)
    }

    fn view(entries: &[(u32, Option<&str>)]) -> NoEqView {
        let mut v = NoEqView::new(Round::FIRST, p(0));
        for (q, e) in entries {
            let e = match e {
                Some(x) => NoEqEntry::Message(m(x)),
                None => NoEqEntry::Lambda,
            };
            v.delivery.insert(p(*q), e);
        }
        v
    }

    #[test]
    fn lemma1_on_same_view() {
        let v = view(&[(1, Some("a")), (2, None)]);
        assert!(check_lemma1(&v, &v, &m("a")));
    }

    #[test]
    fn lemma1_fails_on_model_invalid_views() {
        // p hears a from 1, p' never hears of 1: impossible under no-eq.
        let a = view(&[(1, Some("a")), (2, Some("a"))]);
        let b = view(&[(2, Some("a"))]);
        assert!(!check_lemma1(&a, &b, &m("a")));
    }

    #[test]
    fn thm3_applicability() {
        let honest: BTreeMap<_, _> = [(p(1), m("a")), (p(2), m("a"))].into();
        let views: BTreeMap<_, _> = [(p(1), view(&[(1, Some("a")), (2, Some("a")), (3, Some("b"))]))].into();
        assert_eq!(check_thm3(&views, &honest, &m("a"), &NoEqEntry::Lambda), Verdict::NotApplicable);
        assert_eq!(check_thm3(&views, &honest, &m("a"), &NoEqEntry::Message(m("a"))), Verdict::NotApplicable);
        assert_eq!(check_thm3(&views, &honest, &m("a"), &NoEqEntry::Message(m("b"))), Verdict::Holds);
        // m2 never injected: zero m2 senders.
        assert_eq!(check_thm3(&views, &honest, &m("a"), &NoEqEntry::Message(m("c"))), Verdict::Holds);
    }

    #[test]
    fn equivocation_cannot_be_replayed_natively() {
        let part = Participation::new([p(1), p(2), p(3)], [p(1)]);
        let receivers: BTreeSet<_> = [p(1), p(2), p(3)].into();
        let honest: BTreeMap<_, _> = [(p(2), m("v")), (p(3), m("w"))].into();
        for d in all_decisions(&part, &[m("v"), m("w")], &receivers) {
            let views = noeq_deliver(Round::FIRST, &part, &receivers, &honest, &d).unwrap();
            assert!(check_thm2(&views), "{d}");
        }
    }

    #[test]
    fn participations_are_valid() {
        // n=3: 7 online sets; F nonempty only when |O|=3 (three singletons).
        assert_eq!(all_participations(3).len(), 7 + 3);
    }

    #[test]
    fn small_sweep_is_clean() {
        let r = sweep_majority_theorems(2, &[m("a"), m("b")]);
        assert!(r.is_clean(), "{r}");
        assert!(r.tally("competing message outnumbered").not_applicable > 0);
    }
}
