//! Threshold transitions: one affine map `m -> (a_1(m), ..., a_d(m))` per
//! `(t, x, a)`, sampled through the cumulative-threshold inverse CDF.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, FLOAT_SUM_TOL};

/// Row `i -> base[i] + sum_y coef[i][y] * m(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSimplexMap<S> {
    base: Vec<S>,
    coef: Vec<Vec<S>>,
}

/// Why an affine row fails to map the simplex into itself.
#[derive(Debug, Clone, PartialEq)]
pub enum RowDefect<S> {
    BaseSum { sum: S },
    CoefColumnSum { source: usize, sum: S },
    NegativeAtVertex { target: usize, vertex: usize, value: S },
    NotFinite { target: usize },
}

impl<S: Scalar> AffineSimplexMap<S> {
    pub fn new(base: Vec<S>, coef: Vec<Vec<S>>) -> Result<Self> {
        let d = base.len();
        if d == 0 {
            return Err(Error::invalid("affine row needs at least one target"));
        }
        if coef.len() != d || coef.iter().any(|r| r.len() != d) {
            return Err(Error::invalid(format!("affine coefficients must be {d}x{d}")));
        }
        Ok(AffineSimplexMap { base, coef })
    }

    /// Measure-independent row.
    pub fn constant(base: Vec<S>) -> Self {
        let d = base.len();
        AffineSimplexMap {
            base,
            coef: vec![vec![S::zero(); d]; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[S] {
        &self.base
    }

    pub fn coef(&self) -> &[Vec<S>] {
        &self.coef
    }

    pub fn is_constant(&self) -> bool {
        self.coef.iter().flatten().all(Zero::is_zero)
    }

    pub fn eval(&self, m: &[S]) -> Vec<S> {
        self.base
            .iter()
            .zip(&self.coef)
            .map(|(b, row)| {
                row.iter()
                    .zip(m)
                    .fold(b.clone(), |acc, (c, w)| acc + c.clone() * w)
            })
            .collect()
    }

    /// `a_i(delta_y)` for every target `i`.
    pub fn at_vertex(&self, y: usize) -> Vec<S> {
        self.base
            .iter()
            .zip(&self.coef)
            .map(|(b, row)| b.clone() + &row[y])
            .collect()
    }

    /// First violated invariant, checking sums before vertex nonnegativity.
    pub fn defect(&self) -> Option<RowDefect<S>> {
        let d = self.dim();
        for i in 0..d {
            if !self.base[i].is_finite() || self.coef[i].iter().any(|c| !c.is_finite()) {
                return Some(RowDefect::NotFinite { target: i });
            }
        }
        let sum: S = self.base.iter().cloned().sum();
        if !sum.close_to(&S::one(), FLOAT_SUM_TOL) {
            return Some(RowDefect::BaseSum { sum });
        }
        for y in 0..d {
            let col: S = self.coef.iter().map(|r| r[y].clone()).sum();
            if !col.close_to(&S::zero(), FLOAT_SUM_TOL) {
                return Some(RowDefect::CoefColumnSum { source: y, sum: col });
            }
        }
        for y in 0..d {
            for (i, value) in self.at_vertex(y).into_iter().enumerate() {
                if !value.nonneg_within(FLOAT_SUM_TOL) {
                    return Some(RowDefect::NegativeAtVertex {
                        target: i,
                        vertex: y,
                        value,
                    });
                }
            }
        }
        None
    }

    pub fn max_abs_coef(&self) -> S {
        self.coef
            .iter()
            .flatten()
            .map(Scalar::abs)
            .fold(S::zero(), S::max_of)
    }

    pub fn convert<T: Scalar>(&self) -> AffineSimplexMap<T> {
        let cv = |s: &S| T::from_rational(&s.to_rational());
        AffineSimplexMap {
            base: self.base.iter().map(cv).collect(),
            coef: self
                .coef
                .iter()
                .map(|r| r.iter().map(cv).collect())
                .collect(),
        }
    }
}

/// Complete table of affine rows indexed by `(t, x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTransition<S> {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    rows: Vec<AffineSimplexMap<S>>,
}

impl<S: Scalar> ThresholdTransition<S> {
    /// `rows` is ordered `t`-major, then `x`, then `a`.
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        rows: Vec<AffineSimplexMap<S>>,
    ) -> Result<Self> {
        if rows.len() != horizon * n_states * n_actions {
            return Err(Error::invalid(format!(
                "transition table has {} rows, expected {}",
                rows.len(),
                horizon * n_states * n_actions
            )));
        }
        if rows.iter().any(|r| r.dim() != n_states) {
            return Err(Error::invalid("transition row dimension differs from state count"));
        }
        Ok(ThresholdTransition {
            horizon,
            n_states,
            n_actions,
            rows,
        })
    }

    /// Builds the table from a function of `(t, x, a)`.
    pub fn from_fn(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        mut row: impl FnMut(usize, usize, usize) -> AffineSimplexMap<S>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(horizon * n_states * n_actions);
        for t in 0..horizon {
            for x in 0..n_states {
                for a in 0..n_actions {
                    rows.push(row(t, x, a));
                }
            }
        }
        Self::new(horizon, n_states, n_actions, rows)
    }

    pub fn row(&self, t: usize, x: usize, a: usize) -> &AffineSimplexMap<S> {
        &self.rows[(t * self.n_states + x) * self.n_actions + a]
    }

    pub fn rows(&self) -> impl Iterator<Item = ((usize, usize, usize), &AffineSimplexMap<S>)> {
        let (xs, acts) = (self.n_states, self.n_actions);
        self.rows
            .iter()
            .enumerate()
            .map(move |(k, r)| ((k / (xs * acts), (k / acts) % xs, k % acts), r))
    }

    pub fn is_measure_independent(&self) -> bool {
        self.rows.iter().all(AffineSimplexMap::is_constant)
    }

    pub fn convert<T: Scalar>(&self) -> ThresholdTransition<T> {
        ThresholdTransition {
            horizon: self.horizon,
            n_states: self.n_states,
            n_actions: self.n_actions,
            rows: self.rows.iter().map(AffineSimplexMap::convert).collect(),
        }
    }
}

/// Inverse-CDF choice: the smallest `j` with `a_j > 0` and `a_1 + ... + a_j >= z`.
///
/// Preimages are `(cum_{j-1}, cum_j]`, with the first non-empty one closed at 0.
/// In float mode a `z` above the rounded total falls into the last positive state.
pub fn threshold_index<S: Scalar>(probs: &[S], z: &S) -> usize {
    let mut cum = S::zero();
    let mut last_positive = 0;
    for (j, p) in probs.iter().enumerate() {
        cum = cum + p;
        if *p > S::zero() {
            last_positive = j;
            if cum >= *z {
                return j;
            }
        }
    }
    last_positive
}

/// Preimage interval `(lo, hi]` of each target under [`threshold_index`] on `[0, 1]`.
pub fn threshold_preimages<S: Scalar>(probs: &[S]) -> Vec<(S, S)> {
    let mut cum = S::zero();
    probs
        .iter()
        .map(|p| {
            let lo = cum.clone();
            cum = cum.clone() + p;
            (lo, cum.clone())
        })
        .collect()
}
