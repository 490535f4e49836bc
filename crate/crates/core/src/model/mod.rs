//! Domain vocabulary shared by the engines, protocols and checkers.

mod ids;
mod payload;
mod schedule;
mod view;

pub use ids::{ProcessorId, Round, Value};
pub use payload::{Payload, SignedMessage};
pub use schedule::{
    is_growing, validate_schedule, Participation, ParticipationSchedule, ScheduleViolation,
};
pub use view::{
    majority_message, plurality_of, plurality_value, strict_majority, Delivered, IiabView, ModelError,
    NoEqEntry, NoEqView,
};
