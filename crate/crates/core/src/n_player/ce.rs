use std::collections::BTreeSet;

use itertools::Itertools;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::{GameSpec, ProbabilityVector, RestrictedStrategy};
use crate::n_player::exact::{exact_joint_propagate, joint_state_count};
use crate::n_player::profile::ExplicitProfile;
use crate::n_player::Caps;
use crate::scalar::{Rational, Scalar};

/// Costs `J_l(delta_phi, Id)` of every player for every pure profile `phi` in `R^N`.
///
/// Profiles are indexed in base `|R|` with player 0 as the most significant digit.
pub struct PayoffTable {
    pub n_players: usize,
    pub candidates: Vec<RestrictedStrategy>,
    pub costs: Vec<Vec<Rational>>,
}

impl PayoffTable {
    pub fn build<S: Scalar>(
        game: &GameSpec<S>,
        n_players: usize,
        m0: &ProbabilityVector<S>,
        caps: &Caps,
    ) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::invalid("the N-player game needs N >= 2"));
        }
        let game: GameSpec<Rational> = game.convert();
        let m0: ProbabilityVector<Rational> = m0.convert();
        let candidates = game.strategies(caps.enumeration)?;
        let k = candidates.len();
        let size = (k as u128)
            .checked_pow(n_players as u32)
            .unwrap_or(u128::MAX);
        if size > caps.lp as u128 {
            return Err(Error::capacity("LP variables", size, caps.lp as u128));
        }
        let joint = joint_state_count(game.n_states(), n_players).unwrap_or(u128::MAX);
        if joint > caps.joint as u128 {
            return Err(Error::capacity("joint state space", joint, caps.joint as u128));
        }
        let costs = (0..size as usize)
            .into_par_iter()
            .map(|idx| {
                let phi: Vec<RestrictedStrategy> = digits(idx, k, n_players)
                    .into_iter()
                    .map(|j| candidates[j].clone())
                    .collect();
                exact_joint_propagate(&game, &phi, None, &m0, caps.joint).map(|r| r.costs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PayoffTable {
            n_players,
            candidates,
            costs,
        })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn profile(&self, idx: usize) -> Vec<usize> {
        digits(idx, self.candidates.len(), self.n_players)
    }

    pub fn index(&self, phi: &[usize]) -> usize {
        phi.iter().fold(0, |acc, &j| acc * self.candidates.len() + j)
    }

    /// `J_i` when player `i` switches from `phi_i` to candidate `psi`.
    pub fn deviation_cost(&self, idx: usize, i: usize, psi: usize) -> &Rational {
        let mut phi = self.profile(idx);
        phi[i] = psi;
        &self.costs[self.index(&phi)][i]
    }

    fn label(&self, phi: &[usize]) -> String {
        format!("g({})", phi.iter().map(|&j| self.candidates[j].to_string()).join(","))
    }
}

fn digits(mut idx: usize, base: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    out
}

/// The correlated-equilibrium system over `P(R^N)` and its payoff table.
pub struct CeSystem {
    pub lp: LinearProgram,
    pub payoffs: PayoffTable,
}

/// One variable per pure profile, one incentive row per (player, recommendation,
/// deviation), and the simplex row. Sign constraints are implicit.
pub fn ce_constraints<S: Scalar>(
    game: &GameSpec<S>,
    n_players: usize,
    m0: &ProbabilityVector<S>,
    caps: &Caps,
) -> Result<CeSystem> {
    let payoffs = PayoffTable::build(game, n_players, m0, caps)?;
    let k = payoffs.candidates.len();
    let labels = (0..payoffs.len())
        .map(|idx| payoffs.label(&payoffs.profile(idx)))
        .collect();
    let mut lp = LinearProgram::new(labels);
    for i in 0..n_players {
        for r in 0..k {
            for psi in (0..k).filter(|&p| p != r) {
                let coefs = (0..payoffs.len())
                    .map(|idx| {
                        if payoffs.profile(idx)[i] == r {
                            payoffs.deviation_cost(idx, i, psi) - &payoffs.costs[idx][i]
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect();
                lp.push(coefs, Relation::Ge, Rational::zero())?;
            }
        }
    }
    lp.push(vec![Rational::from_usize(1); payoffs.len()], Relation::Eq, Rational::from_usize(1))?;
    Ok(CeSystem { lp, payoffs })
}

/// Distinct arrangements of a multiset of candidate indices.
fn orbit(multiset: &[usize]) -> Vec<Vec<usize>> {
    let n = multiset.len();
    let set: BTreeSet<Vec<usize>> = (0..n)
        .permutations(n)
        .map(|p| p.iter().map(|&k| multiset[k]).collect())
        .collect();
    set.into_iter().collect()
}

/// Symmetric system: one variable per multiset of strategies, incentive rows of player 0.
pub struct SymmetricCeSystem {
    pub lp: LinearProgram,
    pub payoffs: PayoffTable,
    pub multisets: Vec<Vec<usize>>,
}

pub fn symmetric_ce_constraints<S: Scalar>(
    game: &GameSpec<S>,
    n_players: usize,
    m0: &ProbabilityVector<S>,
    minimize_total_cost: bool,
    caps: &Caps,
) -> Result<SymmetricCeSystem> {
    let payoffs = PayoffTable::build(game, n_players, m0, caps)?;
    let k = payoffs.candidates.len();
    let multisets: Vec<Vec<usize>> = (0..k).combinations_with_replacement(n_players).collect();
    let orbits: Vec<Vec<usize>> = multisets
        .iter()
        .map(|m| orbit(m).iter().map(|phi| payoffs.index(phi)).collect())
        .collect();
    let labels = multisets.iter().map(|m| payoffs.label(m)).collect();
    let mut lp = LinearProgram::new(labels);
    for r in 0..k {
        for psi in (0..k).filter(|&p| p != r) {
            let coefs = orbits
                .iter()
                .map(|members| {
                    let sum: Rational = members
                        .iter()
                        .filter(|&&idx| payoffs.profile(idx)[0] == r)
                        .map(|&idx| payoffs.deviation_cost(idx, 0, psi) - &payoffs.costs[idx][0])
                        .sum();
                    sum / Rational::from_usize(members.len())
                })
                .collect();
            lp.push(coefs, Relation::Ge, Rational::zero())?;
        }
    }
    lp.push(vec![Rational::from_usize(1); multisets.len()], Relation::Eq, Rational::from_usize(1))?;
    if minimize_total_cost {
        let objective = orbits
            .iter()
            .map(|members| payoffs.costs[members[0]].iter().sum())
            .collect();
        lp.set_objective(objective)?;
    }
    Ok(SymmetricCeSystem {
        lp,
        payoffs,
        multisets,
    })
}

/// A symmetric correlated equilibrium of the N-player game, with exact weights.
///
/// Without an objective any feasible point is returned; otherwise one with the
/// smallest expected total cost.
pub fn solve_symmetric_ce<S: Scalar>(
    game: &GameSpec<S>,
    n_players: usize,
    m0: &ProbabilityVector<S>,
    minimize_total_cost: bool,
    caps: &Caps,
) -> Result<ExplicitProfile<Rational>> {
    let sys = symmetric_ce_constraints(game, n_players, m0, minimize_total_cost, caps)?;
    let x = match sys.lp.solve()? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => {
            return Err(Error::Internal(
                "symmetric correlated equilibrium system is infeasible".into(),
            ))
        }
        LpOutcome::Unbounded => {
            return Err(Error::Internal("bounded program reported unbounded".into()))
        }
    };
    let mut atoms = Vec::new();
    for (m, y) in sys.multisets.iter().zip(x) {
        if y.is_zero() {
            continue;
        }
        let arrangements = orbit(m);
        if atoms.len() + arrangements.len() > caps.atoms {
            return Err(Error::capacity(
                "equilibrium atoms",
                (atoms.len() + arrangements.len()) as u128,
                caps.atoms as u128,
            ));
        }
        let share = y / Rational::from_usize(arrangements.len());
        for phi in arrangements {
            let strategies = phi.iter().map(|&j| sys.payoffs.candidates[j].clone()).collect();
            atoms.push((strategies, share.clone()));
        }
    }
    ExplicitProfile::new(n_players, atoms)
}
