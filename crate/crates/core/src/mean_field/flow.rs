use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{FlowTrajectory, RestrictedStrategy};
use crate::scalar::{Scalar, FLOAT_SUM_TOL};

/// One point mass of a correlated flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAtom<S> {
    pub strategy: RestrictedStrategy,
    pub flow: FlowTrajectory<S>,
    pub weight: S,
}

/// Finitely supported law on strategies times measure flows.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedFlow<S> {
    atoms: Vec<FlowAtom<S>>,
}

impl<S: Scalar> CorrelatedFlow<S> {
    /// Validates weights and shapes. Atoms with the same strategy and matching
    /// flows are merged with summed weights, keeping the first occurrence.
    pub fn new(atoms: Vec<FlowAtom<S>>) -> Result<Self> {
        check_atom_shapes(&atoms)?;
        if atoms.iter().any(|a| !a.weight.is_finite() || a.weight <= S::zero()) {
            return Err(Error::invalid("atom weights must be positive"));
        }
        let total: S = atoms.iter().map(|a| a.weight.clone()).sum();
        if !total.close_to(&S::one(), FLOAT_SUM_TOL) {
            return Err(Error::invalid(format!("atom weights sum to {total}, not 1")));
        }
        Ok(CorrelatedFlow {
            atoms: merge_atoms(atoms),
        })
    }

    /// Single atom with weight one.
    pub fn dirac(strategy: RestrictedStrategy, flow: FlowTrajectory<S>) -> Self {
        CorrelatedFlow {
            atoms: vec![FlowAtom {
                strategy,
                flow,
                weight: S::one(),
            }],
        }
    }

    pub fn atoms(&self) -> &[FlowAtom<S>] {
        &self.atoms
    }

    pub fn horizon(&self) -> usize {
        self.atoms[0].flow.len() - 1
    }

    /// Distinct strategies carrying positive weight, in strategy order.
    pub fn support(&self) -> Vec<RestrictedStrategy> {
        support_of(&self.atoms)
    }

    /// Marginal weight of each strategy in the support.
    pub fn strategy_marginal(&self) -> BTreeMap<RestrictedStrategy, S> {
        let mut out: BTreeMap<RestrictedStrategy, S> = BTreeMap::new();
        for a in &self.atoms {
            let w = out.entry(a.strategy.clone()).or_insert_with(S::zero);
            *w = w.clone() + &a.weight;
        }
        out
    }

    pub fn convert<T: Scalar>(&self) -> CorrelatedFlow<T> {
        CorrelatedFlow {
            atoms: self
                .atoms
                .iter()
                .map(|a| FlowAtom {
                    strategy: a.strategy.clone(),
                    flow: a.flow.convert(),
                    weight: T::from_rational(&a.weight.to_rational()),
                })
                .collect(),
        }
    }
}

pub(crate) fn check_atom_shapes<S: Scalar>(atoms: &[FlowAtom<S>]) -> Result<()> {
    let first = atoms
        .first()
        .ok_or_else(|| Error::invalid("correlated flow needs at least one atom"))?;
    let len = first.flow.len();
    let d = first.flow.at(0).len();
    for a in atoms {
        if a.flow.len() != len || a.flow.at(0).len() != d {
            return Err(Error::invalid("atoms carry flows of different shapes"));
        }
        if a.strategy.horizon() + 1 != len || a.strategy.n_states() != d {
            return Err(Error::invalid(
                "atom strategy does not match the horizon and state space of its flow",
            ));
        }
    }
    Ok(())
}

pub(crate) fn merge_atoms<S: Scalar>(atoms: Vec<FlowAtom<S>>) -> Vec<FlowAtom<S>> {
    let mut merged: Vec<FlowAtom<S>> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged
            .iter_mut()
            .find(|m| m.strategy == atom.strategy && m.flow.matches(&atom.flow))
        {
            Some(m) => m.weight = m.weight.clone() + &atom.weight,
            None => merged.push(atom),
        }
    }
    merged
}

pub(crate) fn support_of<S>(atoms: &[FlowAtom<S>]) -> Vec<RestrictedStrategy> {
    let mut s: Vec<RestrictedStrategy> = atoms.iter().map(|a| a.strategy.clone()).collect();
    s.sort();
    s.dedup();
    s
}

/// `rho_2` over distinct flows and `rho_1(. | m)` for each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFactorization<S> {
    pub flows: Vec<(FlowTrajectory<S>, S)>,
    pub conditionals: Vec<Vec<(RestrictedStrategy, S)>>,
}

impl<S: Scalar> FlowFactorization<S> {
    /// Groups atoms by flow in order of first appearance.
    pub fn factorize(rho: &CorrelatedFlow<S>) -> Self {
        let mut flows: Vec<(FlowTrajectory<S>, S)> = Vec::new();
        let mut members: Vec<Vec<(RestrictedStrategy, S)>> = Vec::new();
        for a in rho.atoms() {
            let k = match flows.iter().position(|(f, _)| f.matches(&a.flow)) {
                Some(k) => k,
                None => {
                    flows.push((a.flow.clone(), S::zero()));
                    members.push(Vec::new());
                    flows.len() - 1
                }
            };
            flows[k].1 = flows[k].1.clone() + &a.weight;
            members[k].push((a.strategy.clone(), a.weight.clone()));
        }
        let conditionals = members
            .into_iter()
            .zip(&flows)
            .map(|(ms, (_, total))| {
                ms.into_iter()
                    .map(|(s, w)| (s, w / total.clone()))
                    .collect()
            })
            .collect();
        FlowFactorization {
            flows,
            conditionals,
        }
    }

    /// Atom weights `rho_2(m) rho_1(phi | m)`.
    pub fn recombine(&self) -> Result<CorrelatedFlow<S>> {
        let atoms = self
            .flows
            .iter()
            .zip(&self.conditionals)
            .flat_map(|((flow, w), cond)| {
                cond.iter().map(move |(s, p)| FlowAtom {
                    strategy: s.clone(),
                    flow: flow.clone(),
                    weight: w.clone() * p,
                })
            })
            .collect();
        CorrelatedFlow::new(atoms)
    }
}

/// Strategy modification restricted to the relevant support; identity elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeviationMap {
    entries: BTreeMap<RestrictedStrategy, RestrictedStrategy>,
}

impl DeviationMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with(mut self, from: RestrictedStrategy, to: RestrictedStrategy) -> Self {
        self.entries.insert(from, to);
        self
    }

    pub fn insert(&mut self, from: RestrictedStrategy, to: RestrictedStrategy) {
        self.entries.insert(from, to);
    }

    pub fn apply<'a>(&'a self, phi: &'a RestrictedStrategy) -> &'a RestrictedStrategy {
        self.entries.get(phi).unwrap_or(phi)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&RestrictedStrategy, &RestrictedStrategy)> {
        self.entries.iter()
    }

    /// Errors if some key is not in `support`.
    pub fn check_support(&self, support: &[RestrictedStrategy]) -> Result<()> {
        match self.entries.keys().find(|k| support.binary_search(k).is_err()) {
            Some(k) => Err(Error::invalid(format!(
                "deviation key {k} is not in the support"
            ))),
            None => Ok(()),
        }
    }
}
