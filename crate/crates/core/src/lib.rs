//! Hypothesis generation for labeled transition models.
//!
//! An LTS++ model ([`lts`]) together with an observation [`model::Trace`] is
//! compiled ([`compile`]) into a cost-based planning problem whose plans are
//! explanations of the trace. [`search`] enumerates the cheapest plans as
//! ranked [`model::Hypothesis`] values, and [`eval`] reproduces the
//! ground-truth recovery benchmark on random models.

pub mod compile;
pub mod corpus;
pub mod diagnostic;
pub mod eval;
pub mod lts;
pub mod model;
pub mod search;

pub use diagnostic::{Diagnostic, Severity, Span};
pub use model::{
    compare_plausibility, cost_of, rank_order, validate_model, Cost, CostParams, Hypothesis, ModelError, ModelSpec,
    StateType, Step, Trace,
};
