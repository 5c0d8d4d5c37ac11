use std::collections::BTreeMap;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::mean_field::FlowFactorization;
use crate::model::RestrictedStrategy;
use crate::scalar::{Scalar, FLOAT_SUM_TOL};

/// Joint recommendation law given by its atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitProfile<S> {
    n_players: usize,
    atoms: Vec<(Vec<RestrictedStrategy>, S)>,
}

impl<S: Scalar> ExplicitProfile<S> {
    /// Validates weights and merges repeated strategy vectors. Atoms are kept sorted.
    pub fn new(n_players: usize, atoms: Vec<(Vec<RestrictedStrategy>, S)>) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::invalid("a profile needs at least two players"));
        }
        if atoms.is_empty() {
            return Err(Error::invalid("profile needs at least one atom"));
        }
        if atoms.iter().any(|(v, _)| v.len() != n_players) {
            return Err(Error::invalid(format!(
                "every atom must assign a strategy to each of the {n_players} players"
            )));
        }
        if atoms.iter().any(|(_, w)| !w.is_finite() || *w <= S::zero()) {
            return Err(Error::invalid("profile weights must be positive"));
        }
        let total: S = atoms.iter().map(|(_, w)| w.clone()).sum();
        if !total.close_to(&S::one(), FLOAT_SUM_TOL) {
            return Err(Error::invalid(format!("profile weights sum to {total}, not 1")));
        }
        Ok(ExplicitProfile {
            n_players,
            atoms: merge(atoms),
        })
    }

    pub fn dirac(strategies: Vec<RestrictedStrategy>) -> Result<Self> {
        Self::new(strategies.len(), vec![(strategies, S::one())])
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn atoms(&self) -> &[(Vec<RestrictedStrategy>, S)] {
        &self.atoms
    }

    /// Marginal law of player `i`'s recommendation.
    pub fn marginal(&self, i: usize) -> BTreeMap<RestrictedStrategy, S> {
        let mut out: BTreeMap<RestrictedStrategy, S> = BTreeMap::new();
        for (v, w) in &self.atoms {
            let e = out.entry(v[i].clone()).or_insert_with(S::zero);
            *e = e.clone() + w;
        }
        out
    }

    /// Invariance under every permutation of the players. Adjacent swaps
    /// generate the symmetric group, so they are the only ones checked.
    pub fn is_symmetric(&self) -> bool {
        let lookup: BTreeMap<&Vec<RestrictedStrategy>, &S> =
            self.atoms.iter().map(|(v, w)| (v, w)).collect();
        self.atoms.iter().all(|(v, w)| {
            (0..v.len() - 1).all(|k| {
                let mut p = v.clone();
                p.swap(k, k + 1);
                lookup.get(&p).is_some_and(|q| q.close_to(w, FLOAT_SUM_TOL))
            })
        })
    }

    pub fn convert<T: Scalar>(&self) -> ExplicitProfile<T> {
        ExplicitProfile {
            n_players: self.n_players,
            atoms: self
                .atoms
                .iter()
                .map(|(v, w)| (v.clone(), T::from_rational(&w.to_rational())))
                .collect(),
        }
    }
}

fn merge<S: Scalar>(atoms: Vec<(Vec<RestrictedStrategy>, S)>) -> Vec<(Vec<RestrictedStrategy>, S)> {
    let mut map: BTreeMap<Vec<RestrictedStrategy>, S> = BTreeMap::new();
    for (v, w) in atoms {
        let e = map.entry(v).or_insert_with(S::zero);
        *e = e.clone() + &w;
    }
    map.into_iter().collect()
}

/// Mixture over flows of i.i.d. recommendations.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredProfile<S> {
    pub n_players: usize,
    pub mixture: FlowFactorization<S>,
}

impl<S: Scalar> FactoredProfile<S> {
    pub fn new(n_players: usize, mixture: FlowFactorization<S>) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::invalid("a profile needs at least two players"));
        }
        if mixture.flows.is_empty() || mixture.flows.len() != mixture.conditionals.len() {
            return Err(Error::invalid("factored profile needs one conditional per flow"));
        }
        let total: S = mixture.flows.iter().map(|(_, w)| w.clone()).sum();
        if !total.close_to(&S::one(), FLOAT_SUM_TOL) {
            return Err(Error::invalid(format!("flow weights sum to {total}, not 1")));
        }
        for cond in &mixture.conditionals {
            let s: S = cond.iter().map(|(_, w)| w.clone()).sum();
            if cond.is_empty() || !s.close_to(&S::one(), FLOAT_SUM_TOL) {
                return Err(Error::invalid("each conditional must sum to 1"));
            }
            if cond.iter().any(|(_, w)| *w <= S::zero()) {
                return Err(Error::invalid("conditional weights must be positive"));
            }
        }
        Ok(FactoredProfile { n_players, mixture })
    }

    /// Number of atoms before merging: `sum_m |supp rho_1(. | m)|^N`.
    pub fn expanded_size(&self) -> Option<u128> {
        let n = u32::try_from(self.n_players).ok()?;
        self.mixture
            .conditionals
            .iter()
            .try_fold(0u128, |acc, c| acc.checked_add((c.len() as u128).checked_pow(n)?))
    }

    pub fn expand(&self, cap: usize) -> Result<ExplicitProfile<S>> {
        let size = self.expanded_size().unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::capacity("factored profile expansion", size, cap as u128));
        }
        let mut atoms = Vec::new();
        for ((_, w), cond) in self.mixture.flows.iter().zip(&self.mixture.conditionals) {
            for combo in (0..self.n_players)
                .map(|_| cond.iter())
                .multi_cartesian_product()
            {
                let weight = combo
                    .iter()
                    .fold(w.clone(), |acc, (_, p)| acc * p);
                let strategies = combo.into_iter().map(|(s, _)| s.clone()).collect();
                atoms.push((strategies, weight));
            }
        }
        ExplicitProfile::new(self.n_players, atoms)
    }
}

/// A law on strategy vectors, stored as atoms or as a mixture of i.i.d. draws.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelatedProfile<S> {
    Explicit(ExplicitProfile<S>),
    Factored(FactoredProfile<S>),
}

impl<S: Scalar> CorrelatedProfile<S> {
    pub fn n_players(&self) -> usize {
        match self {
            CorrelatedProfile::Explicit(p) => p.n_players(),
            CorrelatedProfile::Factored(p) => p.n_players,
        }
    }

    pub fn expand(&self, cap: usize) -> Result<ExplicitProfile<S>> {
        match self {
            CorrelatedProfile::Explicit(p) => Ok(p.clone()),
            CorrelatedProfile::Factored(p) => p.expand(cap),
        }
    }

    /// Strategies player `i` may be recommended, in strategy order.
    pub fn support(&self, i: usize) -> Vec<RestrictedStrategy> {
        match self {
            CorrelatedProfile::Explicit(p) => p.marginal(i).into_keys().collect(),
            CorrelatedProfile::Factored(p) => {
                let mut s: Vec<RestrictedStrategy> = p
                    .mixture
                    .conditionals
                    .iter()
                    .flatten()
                    .map(|(s, _)| s.clone())
                    .collect();
                s.sort();
                s.dedup();
                s
            }
        }
    }

    /// Every recommendation as a strategy table of the given shape.
    pub(crate) fn strategies(&self) -> Box<dyn Iterator<Item = &RestrictedStrategy> + '_> {
        match self {
            CorrelatedProfile::Explicit(p) => Box::new(p.atoms.iter().flat_map(|(v, _)| v.iter())),
            CorrelatedProfile::Factored(p) => {
                Box::new(p.mixture.conditionals.iter().flatten().map(|(s, _)| s))
            }
        }
    }

    pub fn convert<T: Scalar>(&self) -> CorrelatedProfile<T> {
        match self {
            CorrelatedProfile::Explicit(p) => CorrelatedProfile::Explicit(p.convert()),
            CorrelatedProfile::Factored(p) => CorrelatedProfile::Factored(FactoredProfile {
                n_players: p.n_players,
                mixture: FlowFactorization {
                    flows: p
                        .mixture
                        .flows
                        .iter()
                        .map(|(f, w)| (f.convert(), T::from_rational(&w.to_rational())))
                        .collect(),
                    conditionals: p
                        .mixture
                        .conditionals
                        .iter()
                        .map(|c| {
                            c.iter()
                                .map(|(s, w)| (s.clone(), T::from_rational(&w.to_rational())))
                                .collect()
                        })
                        .collect(),
                },
            }),
        }
    }
}

/// Average of the profile over all permutations of the players.
pub fn symmetrize<S: Scalar>(profile: &ExplicitProfile<S>, cap: usize) -> Result<ExplicitProfile<S>> {
    let n = profile.n_players();
    let fact: u128 = (1..=n as u128).try_fold(1u128, |a, k| a.checked_mul(k)).unwrap_or(u128::MAX);
    let size = fact.saturating_mul(profile.atoms().len() as u128);
    if size > cap as u128 {
        return Err(Error::capacity("symmetrization", size, cap as u128));
    }
    let scale = S::one() / S::from_usize(fact as usize);
    let mut atoms = Vec::with_capacity(size as usize);
    for (v, w) in profile.atoms() {
        let share = w.clone() * &scale;
        for perm in (0..n).permutations(n) {
            atoms.push((perm.iter().map(|&k| v[k].clone()).collect(), share.clone()));
        }
    }
    ExplicitProfile::new(n, atoms)
}
