//! The limit model: state laws against fixed flows, costs, best responses,
//! McKean-Vlasov propagation and verification of correlated solutions.

mod dynamics;
mod flow;
mod verify;

pub use dynamics::{
    deterministic_cost, dp_best_response, mkv_propagate, state_law, DpSolution, MkvSolution,
};
pub use flow::{CorrelatedFlow, DeviationMap, FlowAtom, FlowFactorization};
pub use verify::{
    best_response, consistency_check, correlated_cost, mkv_residuals, optimality_gap,
    optimality_gap_of_atoms, verify_solution, BestResponse, ConsistencyReport, FlowResidual,
    OptimalityReport, RecommendationGap, SolutionVerdict, VERIFY_TOL,
};

