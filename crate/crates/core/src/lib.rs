//! Toolkit for deadline-constrained multipath communication.
//!
//! Data generated at a fixed rate must reach the receiver within a lifetime
//! budget over several lossy paths. Each datum is assigned a path
//! *combination* (an ordered list of transmission attempts, later attempts
//! fired on retransmission timeout). The fraction of traffic per combination
//! is decided by a linear program that maximizes in-time delivery under
//! per-path bandwidth caps and an optional cost budget.
//!
//! - [`model`]: networks, workloads, delivery/traffic metrics, LP assembly
//! - [`lp`]: dense two-phase simplex solver
//! - [`stochastic`]: shifted-gamma delays and retransmission-timeout tuning
//! - [`scheduler`]: per-packet combination assignment (deficit rounding)
//! - [`sim`]: discrete-event simulator to validate model predictions

pub mod lp;
pub mod model;
pub mod scheduler;
pub mod sim;
pub mod stochastic;

pub use lp::{solve, LpError, Solution, SolutionStatus, SolverConfig};
pub use model::{
    build_cost_lp, build_quality_lp, build_quality_lp_restricted, delivery_prob, fixed_timeout,
    quality, sent_rate, total_cost, Combination, DelayModel, LpProblem, ModelError, Network,
    PathSpec, Sense, Workload,
};
pub use scheduler::{next_action, Action, AssignmentState};
pub use sim::{
    sensitivity_sweep, simulate, SimConfig, SimError, SimReport, SweepAxis, SweepPoint,
};
pub use stochastic::{
    gamma_cdf, min_delay_path, optimize_timeout, retrans_prob, StochasticCoefficients,
    StochasticError, StochasticModel, TimeoutEntry, TimeoutPlateau, TimeoutTable,
};
