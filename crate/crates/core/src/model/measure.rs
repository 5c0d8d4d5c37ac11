use crate::error::{Error, Result};
use crate::model::space::FiniteSpace;
use crate::scalar::{Scalar, FLOAT_SUM_TOL};

/// Tolerance for flow equality when grouping atoms in float mode.
pub const FLOW_MATCH_TOL: f64 = 1e-9;

/// A probability measure on a finite space, stored as one weight per index.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<S> {
    weights: Vec<S>,
}

impl<S: Scalar> ProbabilityVector<S> {
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("probability vector must be non-empty"));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::invalid(format!("weight {i} is not finite")));
            }
            if !w.nonneg_within(FLOAT_SUM_TOL) {
                return Err(Error::invalid(format!("weight {i} is negative: {w}")));
            }
        }
        let total: S = weights.iter().cloned().sum();
        if !total.close_to(&S::one(), FLOAT_SUM_TOL) {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(ProbabilityVector { weights })
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_trusted(weights: Vec<S>) -> Self {
        ProbabilityVector { weights }
    }

    pub fn dirac(size: usize, at: usize) -> Self {
        let mut weights = vec![S::zero(); size];
        weights[at] = S::one();
        ProbabilityVector { weights }
    }

    pub fn uniform(size: usize) -> Self {
        let w = S::from_ratio(1, size as i64);
        ProbabilityVector {
            weights: vec![w; size],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn get(&self, index: usize) -> &S {
        &self.weights[index]
    }

    pub fn convert<T: Scalar>(&self) -> ProbabilityVector<T> {
        ProbabilityVector {
            weights: self
                .weights
                .iter()
                .map(|w| T::from_rational(&w.to_rational()))
                .collect(),
        }
    }

    pub fn close_to(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.close_to(b, tol))
    }

    pub(crate) fn check_space(&self, space: &FiniteSpace, what: &str) -> Result<()> {
        if self.len() == space.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what} has {} entries, space has {}",
                self.len(),
                space.len()
            )))
        }
    }
}

/// Half the L1 distance between two measures on the same space.
pub fn dist<S: Scalar>(m: &ProbabilityVector<S>, other: &ProbabilityVector<S>) -> Result<S> {
    if m.len() != other.len() {
        return Err(Error::invalid(format!(
            "measures live on spaces of size {} and {}",
            m.len(),
            other.len()
        )));
    }
    let total: S = m
        .weights
        .iter()
        .zip(&other.weights)
        .map(|(a, b)| (a.clone() - b).abs())
        .sum();
    Ok(total * S::from_ratio(1, 2))
}

/// `m(1) - m(-1)` on the two-point space labelled `-1` and `1`.
pub fn mean_of<S: Scalar>(space: &FiniteSpace, m: &ProbabilityVector<S>) -> Result<S> {
    if space.len() != 2 {
        return Err(Error::invalid("mean is defined on the space {-1, 1} only"));
    }
    let up = space.index_of("1")?;
    let down = space.index_of("-1")?;
    m.check_space(space, "measure")?;
    Ok(m.get(up).clone() - m.get(down))
}

/// Empirical measure of a non-empty list of state indices on a space of `size` states.
pub fn empirical_measure<S: Scalar>(states: &[usize], size: usize) -> Result<ProbabilityVector<S>> {
    if states.is_empty() {
        return Err(Error::invalid("empirical measure of an empty list"));
    }
    let mut counts = vec![0usize; size];
    for &x in states {
        if x >= size {
            return Err(Error::invalid(format!("state index {x} out of range")));
        }
        counts[x] += 1;
    }
    Ok(measure_from_counts(&counts, states.len()))
}

pub(crate) fn measure_from_counts<S: Scalar>(counts: &[usize], total: usize) -> ProbabilityVector<S> {
    ProbabilityVector::from_trusted(
        counts
            .iter()
            .map(|&c| S::from_ratio(c as i64, total as i64))
            .collect(),
    )
}

/// A flow of measures `m(0), ..., m(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory<S> {
    measures: Vec<ProbabilityVector<S>>,
}

impl<S: Scalar> FlowTrajectory<S> {
    pub fn new(measures: Vec<ProbabilityVector<S>>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::invalid("flow must contain at least one measure"));
        }
        let d = measures[0].len();
        if measures.iter().any(|m| m.len() != d) {
            return Err(Error::invalid("flow measures live on different spaces"));
        }
        Ok(FlowTrajectory { measures })
    }

    pub fn constant(m: &ProbabilityVector<S>, horizon: usize) -> Self {
        FlowTrajectory {
            measures: vec![m.clone(); horizon + 1],
        }
    }

    /// Number of measures, `T + 1`.
    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn at(&self, t: usize) -> &ProbabilityVector<S> {
        &self.measures[t]
    }

    pub fn measures(&self) -> &[ProbabilityVector<S>] {
        &self.measures
    }

    pub fn convert<T: Scalar>(&self) -> FlowTrajectory<T> {
        FlowTrajectory {
            measures: self.measures.iter().map(|m| m.convert()).collect(),
        }
    }

    /// Exact equality in exact mode; entrywise within [`FLOW_MATCH_TOL`] in float mode.
    pub fn matches(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .measures
                .iter()
                .zip(&other.measures)
                .all(|(a, b)| a.close_to(b, FLOW_MATCH_TOL))
    }

    pub(crate) fn check_shape(&self, horizon: usize, space: &FiniteSpace) -> Result<()> {
        if self.len() != horizon + 1 {
            return Err(Error::invalid(format!(
                "flow has {} measures, expected {}",
                self.len(),
                horizon + 1
            )));
        }
        self.measures[0].check_space(space, "flow measure")
    }
}
