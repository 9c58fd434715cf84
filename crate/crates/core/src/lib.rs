//! Interactive bi-objective inventory routing.
//!
//! A solution is a delivery-period vector: for each customer, how many
//! periods of demand every delivery covers. [`evaluation`] turns it into
//! delivery quantities, inventory levels and per-period savings routes,
//! yielding two objectives to minimize: total customer inventory and total
//! distance. [`search`] builds a rough front from identical periods and
//! improves it with a ±1 multi-point hill climber, either steered toward a
//! decision maker's reference point or expanding the whole front.

pub mod archive;
pub mod evaluation;
pub mod fixtures;
pub mod instance;
pub mod runlog;
pub mod savings;
pub mod scalarize;
pub mod search;

pub use archive::{dominates, Archive, InsertResult, Member, MemberId};
pub use evaluation::{evaluate, neighbors, DeliveryPlan, Evaluator, Outcome, PeriodVector, Solution};
pub use instance::{generate, parse_instance, serialize_instance, GeneratorConfig, Instance};
pub use savings::{solve_savings, Route, RoutingSolution, SavingsRouter};
pub use scalarize::{achievement, compute_weights, in_cone, ReferencePoint, WeightVector};
pub use search::{
    construct_initial_front, most_preferred, run_guided, run_offline, RunTrace, SearchConfig,
    SearchMode, TerminationReason, TracePoint,
};
