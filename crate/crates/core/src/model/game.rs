use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::cost::AffineCost;
use crate::model::measure::ProbabilityVector;
use crate::model::space::FiniteSpace;
use crate::model::strategy::{enumerate_strategies, RestrictedStrategy};
use crate::model::transition::{
    threshold_index, threshold_preimages, RowDefect, ThresholdTransition,
};
use crate::scalar::{Arithmetic, Scalar};

/// Horizon, state and action spaces, threshold transition and affine costs.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec<S> {
    horizon: usize,
    states: FiniteSpace,
    actions: FiniteSpace,
    transition: ThresholdTransition<S>,
    cost: AffineCost<S>,
}

impl<S: Scalar> GameSpec<S> {
    /// Checks table shapes only. Row invariants are reported by [`validate_game`].
    pub fn new(
        horizon: usize,
        states: FiniteSpace,
        actions: FiniteSpace,
        transition: ThresholdTransition<S>,
        cost: AffineCost<S>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        let expected = horizon * states.len() * actions.len();
        if transition.rows().count() != expected {
            return Err(Error::invalid("transition table does not match game dimensions"));
        }
        if transition.rows().any(|(_, r)| r.dim() != states.len()) {
            return Err(Error::invalid("transition rows must have one target per state"));
        }
        if cost.horizon() != horizon {
            return Err(Error::invalid("cost horizon does not match game horizon"));
        }
        Ok(GameSpec {
            horizon,
            states,
            actions,
            transition,
            cost,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> &FiniteSpace {
        &self.states
    }

    pub fn actions(&self) -> &FiniteSpace {
        &self.actions
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn transition(&self) -> &ThresholdTransition<S> {
        &self.transition
    }

    pub fn cost(&self) -> &AffineCost<S> {
        &self.cost
    }

    pub fn arithmetic(&self) -> Arithmetic {
        S::ARITHMETIC
    }

    pub fn convert<T: Scalar>(&self) -> GameSpec<T> {
        GameSpec {
            horizon: self.horizon,
            states: self.states.clone(),
            actions: self.actions.clone(),
            transition: self.transition.convert(),
            cost: self.cost.convert(),
        }
    }

    fn check_step(&self, t: usize, x: usize, m: &ProbabilityVector<S>, a: usize) -> Result<()> {
        if t >= self.horizon {
            return Err(Error::invalid(format!(
                "time {t} outside 0..{}",
                self.horizon
            )));
        }
        self.states.check_index(x, "state")?;
        self.actions.check_index(a, "action")?;
        m.check_space(&self.states, "measure")
    }

    /// Kernel row `(a_1(m), ..., a_d(m))` for `(t, x, a)`.
    pub fn transition_kernel(
        &self,
        t: usize,
        x: usize,
        m: &ProbabilityVector<S>,
        a: usize,
    ) -> Result<ProbabilityVector<S>> {
        self.check_step(t, x, m, a)?;
        Ok(self.kernel(t, x, m.weights(), a))
    }

    pub(crate) fn kernel(&self, t: usize, x: usize, m: &[S], a: usize) -> ProbabilityVector<S> {
        ProbabilityVector::from_trusted(self.transition.row(t, x, a).eval(m))
    }

    /// Next state for noise `z` in `[0, 1]`.
    pub fn psi_sample(
        &self,
        t: usize,
        x: usize,
        m: &ProbabilityVector<S>,
        a: usize,
        z: &S,
    ) -> Result<usize> {
        if *z < S::zero() || *z > S::one() {
            return Err(Error::invalid(format!("noise {z} outside [0, 1]")));
        }
        self.check_step(t, x, m, a)?;
        let probs = self.transition.row(t, x, a).eval(m.weights());
        Ok(threshold_index(&probs, z))
    }

    /// `(lo, hi]` preimage of each next state under [`GameSpec::psi_sample`].
    pub fn psi_preimages(
        &self,
        t: usize,
        x: usize,
        m: &ProbabilityVector<S>,
        a: usize,
    ) -> Result<Vec<(S, S)>> {
        self.check_step(t, x, m, a)?;
        let probs = self.transition.row(t, x, a).eval(m.weights());
        Ok(threshold_preimages(&probs))
    }

    /// `L = 2 max |coef|`, a Lipschitz constant of every `a_i` with respect to `dist`.
    pub fn lipschitz_modulus(&self) -> S {
        let max = self
            .transition
            .rows()
            .map(|(_, r)| r.max_abs_coef())
            .fold(S::zero(), S::max_of);
        S::from_ratio(2, 1) * max
    }

    /// Continuity modulus `w(s) = L d(d-1)/2 s` of the threshold construction.
    pub fn continuity_modulus(&self, s: &S) -> S {
        let d = self.n_states();
        self.lipschitz_modulus() * S::from_usize(d * (d - 1)) * S::from_ratio(1, 2) * s
    }

    pub fn strategies(&self, cap: usize) -> Result<Vec<RestrictedStrategy>> {
        enumerate_strategies(self.horizon, self.n_states(), self.n_actions(), cap)
    }

    pub(crate) fn check_strategy(&self, s: &RestrictedStrategy) -> Result<()> {
        s.check(self.horizon, self.n_states(), self.n_actions())
    }
}

/// Location and description of the first violated model constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: usize,
    pub x: usize,
    pub a: usize,
    pub target: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub first_violation: Option<Violation>,
    pub lipschitz: String,
    pub measure_independent: bool,
}

/// Checks every transition row maps the simplex into itself. Never fails.
pub fn validate_game<S: Scalar>(game: &GameSpec<S>) -> ValidationReport {
    let first_violation = game.transition.rows().find_map(|((t, x, a), row)| {
        row.defect().map(|defect| {
            let (target, message) = match defect {
                RowDefect::BaseSum { sum } => (None, format!("row sum is {sum}, not 1")),
                RowDefect::CoefColumnSum { source, sum } => (
                    None,
                    format!("coefficients on m({source}) sum to {sum}, not 0"),
                ),
                RowDefect::NegativeAtVertex {
                    target,
                    vertex,
                    value,
                } => (
                    Some(target),
                    format!("a_{target} is {value} < 0 at the vertex delta_{vertex}"),
                ),
                RowDefect::NotFinite { target } => {
                    (Some(target), "non-finite coefficient".to_string())
                }
            };
            Violation {
                t,
                x,
                a,
                target,
                message,
            }
        })
    });
    ValidationReport {
        passed: first_violation.is_none(),
        first_violation,
        lipschitz: game.lipschitz_modulus().to_string(),
        measure_independent: game.transition.is_measure_independent(),
    }
}
