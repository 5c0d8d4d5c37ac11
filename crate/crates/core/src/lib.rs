//! Correlated equilibria for finite-state N-player games and their mean-field
//! limit, with threshold transitions and affine costs.
//!
//! Every algorithm is generic over [`Scalar`], implemented for exact
//! [`Rational`] arithmetic and for `f64`.

pub mod error;
pub mod io;
pub mod limits;
pub mod lp;
pub mod example_s5;
pub mod mean_field;
pub mod model;
pub mod n_player;
pub mod scalar;

pub use error::{Error, Result};
pub use mean_field::*;
pub use model::*;
pub use scalar::{Arithmetic, Rational, Scalar};
