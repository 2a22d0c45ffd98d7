//! Quasi-steady-state AC power flow: Newton–Raphson solve, reactive limit
//! enforcement, violations, economics and the stepping engine.

pub mod control;
pub mod economics;
pub mod newton;
pub mod profile;
pub mod solve;
pub mod state;
pub mod step;
pub mod violations;

pub use control::{apply_action, check_bounds, BoundsError, CommandKind, ControlAction, TargetClass};
pub use economics::{
    compute_ace, compute_cost_rate, cost_accrual, frequency_deviation, penalty_point_seconds, score_from_penalty, update_reliability, ScoreWeights,
};
pub use newton::{bus_injections, newton_raphson, NodeKind, PowerFlowProblem, SolveError, SolveOptions, VoltageSolution};
pub use profile::{LoadProfile, ProfilePoint};
pub use solve::{compute_branch_flows, enforce_q_limits, solve_power_flow, solve_with_q_limits};
pub use state::{BranchFlow, GenOutput, OperatingPoint, PowerFlowSolution, SimulationState, SolutionState};
pub use step::{Engine, EngineConfig, EngineEvent, GmdConfig, Measurements};
pub use violations::{blackout_violations, detect_violations, ViolationSet};
