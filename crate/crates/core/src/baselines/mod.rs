//! Non-learning planners, an exhaustive oracle for tiny instances, the
//! algebraic model exporter and the trace validator.

mod bigmrta;
mod exact;
mod feasrnd;
mod minlp;
mod validate;

pub use bigmrta::{bigmrta_action, bigmrta_incentives, max_weight_matching, Bigmrta, IncentiveMatrix};
pub use exact::{brute_force_optimal, ExactCaps, ExactSolution};
pub use feasrnd::{feasrnd_action, FeasRnd};
pub use minlp::{
    default_bounds, export_minlp, parse_model, write_model, Constraint, MinlpModel, Sense, Term, VarKind, Variable,
};
pub use validate::{trace_validate, tours_needed, ValidationReport, Violation};
