//! Finite model primitives: spaces, measures, threshold transitions, affine
//! costs, restricted strategies and the game itself.

pub mod cost;
pub mod game;
pub mod measure;
pub mod random;
pub mod space;
pub mod strategy;
pub mod transition;

pub use cost::AffineCost;
pub use game::{validate_game, GameSpec, ValidationReport, Violation};
pub use measure::{dist, empirical_measure, mean_of, FlowTrajectory, ProbabilityVector};
pub use space::FiniteSpace;
pub use strategy::{enumerate_strategies, RestrictedStrategy, DEFAULT_ENUMERATION_CAP};
pub use transition::{threshold_index, threshold_preimages, AffineSimplexMap, ThresholdTransition};
