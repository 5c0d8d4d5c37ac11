//! The finite N-player game: exact joint propagation, Monte Carlo simulation,
//! deviation gains and symmetric correlated equilibria.

mod ce;
mod exact;
mod mc;
mod profile;

pub use ce::{
    ce_constraints, solve_symmetric_ce, symmetric_ce_constraints, CeSystem, PayoffTable,
    SymmetricCeSystem,
};
pub use exact::{
    deviation_gain_exact, exact_joint_propagate, exact_work, exchangeability_check,
    joint_state_count, profile_cost_exact, DeviationEntry, DeviationReport,
    ExchangeabilityReport, JointRun,
};
pub use mc::{
    deviation_gain_mc, mc_profile_cost, replication_seed, simulate_realization, splitmix64,
    McEstimate, SimulationConfig,
};
pub use profile::{symmetrize, CorrelatedProfile, ExplicitProfile, FactoredProfile};

pub(crate) use mc::Simulator;

/// Size limits for enumeration and exact computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Restricted strategies enumerated for best responses.
    pub enumeration: usize,
    /// Joint states `|X|^N` for exact propagation.
    pub joint: usize,
    /// Variables `|R|^N` of the equilibrium program.
    pub lp: usize,
    /// Atoms of an expanded profile.
    pub atoms: usize,
    /// Scalar operations allowed for an exact deviation gain before falling back to simulation.
    pub exact_work: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumeration: crate::model::DEFAULT_ENUMERATION_CAP,
            joint: 4096,
            lp: 65536,
            atoms: 1 << 16,
            exact_work: 50_000_000,
        }
    }
}
