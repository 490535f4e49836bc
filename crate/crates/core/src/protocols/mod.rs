mod commit_adopt;
mod consensus;
mod det;
mod messages;
mod proba;

pub use commit_adopt::CommitAdopt;
pub use consensus::{
    run_consensus, ConsensusKind, ConsensusOutcome, ConsensusProcess, PhaseKind, PhasePosition,
    COMMIT_ADOPT_LEN,
};
pub use det::{candidate_of, parse_chain, DetConciliator};
pub use messages::{
    no_commit, propose_commit, proposed, CommitAdoptOutput, ConciliatorOutput, ConciliatorRule,
    Decision, Grade,
};
pub use proba::ProbaConciliator;
