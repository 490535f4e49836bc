//! Exhaustive small-instance checks. Every check returns a [`Report`] that
//! tallies each property separately and keeps replayable counterexamples.

mod commit_adopt;
mod conformance;
mod det;
mod enumerate;
mod example;
mod report;
mod theorems;

pub use commit_adopt::{commit_adopt_agreement, commit_adopt_sweep, commit_adopt_validity, exhaustive_commit_adopt};
pub use conformance::{
    conformance_classes, conformance_instance, conformance_instances, reduction_cross_check,
    simulation_conformance, Abstract, AbstractProfile, ConformanceInstance, Symbols,
};
pub use det::{det_instances, exhaustive_det_conciliator, DetInstance, MAX_CHAIN_ROUNDS};
pub use example::example1_dichotomy;
pub use enumerate::{
    behavior_count, enumerate_noeq_behaviors, round_alphabets, MAX_ALPHABET, MAX_BEHAVIORS,
    MAX_PROCESSORS, MAX_ROUNDS,
};
pub use report::{Behavior, EnvelopeExceeded, Report, Tally, Verdict, Violation, MAX_RECORDED_VIOLATIONS};
pub use theorems::{
    all_decisions, all_participations, assignments, check_lemma1, check_thm2, check_thm3,
    sweep_majority_theorems,
};
