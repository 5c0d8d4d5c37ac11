use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mean_field::DeviationMap;
use crate::model::{GameSpec, ProbabilityVector, RestrictedStrategy};
use crate::n_player::profile::{CorrelatedProfile, ExplicitProfile};
use crate::n_player::Caps;
use crate::scalar::Scalar;

/// `|X|^N`, or `None` on overflow.
pub fn joint_state_count(n_states: usize, n_players: usize) -> Option<u128> {
    (n_states as u128).checked_pow(u32::try_from(n_players).ok()?)
}

/// Exact law of the joint state at every time and the cost of every player.
///
/// Joint states are encoded in base `|X|` with player 0 as the most
/// significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRun<S> {
    pub n_players: usize,
    pub n_states: usize,
    pub laws: Vec<Vec<S>>,
    pub costs: Vec<S>,
}

impl<S: Scalar> JointRun<S> {
    pub fn decode(&self, index: usize) -> Vec<usize> {
        decode(index, self.n_states, self.n_players)
    }

    /// Law of player `l`'s state at time `t`.
    pub fn marginal(&self, t: usize, l: usize) -> ProbabilityVector<S> {
        let mut out = vec![S::zero(); self.n_states];
        for (s, p) in self.laws[t].iter().enumerate() {
            if !p.is_zero() {
                let x = self.decode(s)[l];
                out[x] = out[x].clone() + p;
            }
        }
        ProbabilityVector::from_trusted(out)
    }
}

fn decode(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut xs = vec![0; n];
    for slot in xs.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    xs
}

/// Empirical measure of everybody except player `l`.
pub(crate) fn exclusive_measure<S: Scalar>(counts: &[usize], own: usize, others: usize) -> Vec<S> {
    counts
        .iter()
        .enumerate()
        .map(|(x, &c)| {
            let c = if x == own { c - 1 } else { c };
            S::from_ratio(c as i64, others as i64)
        })
        .collect()
}

pub(crate) fn check_players<S: Scalar>(
    game: &GameSpec<S>,
    strategies: &[RestrictedStrategy],
    m0: &ProbabilityVector<S>,
) -> Result<()> {
    if strategies.len() < 2 {
        return Err(Error::invalid("the N-player game needs N >= 2"));
    }
    for s in strategies {
        game.check_strategy(s)?;
    }
    m0.check_space(game.states(), "initial law")
}

/// Forward propagation of the joint state when player `l` follows `strategies[l]`,
/// except that the deviating player, if any, follows the replacement strategy.
pub fn exact_joint_propagate<S: Scalar>(
    game: &GameSpec<S>,
    strategies: &[RestrictedStrategy],
    deviation: Option<(usize, &RestrictedStrategy)>,
    m0: &ProbabilityVector<S>,
    joint_cap: usize,
) -> Result<JointRun<S>> {
    check_players(game, strategies, m0)?;
    let n = strategies.len();
    let d = game.n_states();
    let size = joint_state_count(d, n).unwrap_or(u128::MAX);
    if size > joint_cap as u128 {
        return Err(Error::capacity("joint state space", size, joint_cap as u128));
    }
    let mut plan: Vec<&RestrictedStrategy> = strategies.iter().collect();
    if let Some((i, psi)) = deviation {
        if i >= n {
            return Err(Error::invalid(format!("player {i} out of range")));
        }
        game.check_strategy(psi)?;
        plan[i] = psi;
    }
    Ok(propagate(game, &plan, m0))
}

fn propagate<S: Scalar>(
    game: &GameSpec<S>,
    plan: &[&RestrictedStrategy],
    m0: &ProbabilityVector<S>,
) -> JointRun<S> {
    let n = plan.len();
    let d = game.n_states();
    let size = d.pow(n as u32);
    let states: Vec<Vec<usize>> = (0..size).map(|s| decode(s, d, n)).collect();
    let counts: Vec<Vec<usize>> = states
        .iter()
        .map(|xs| {
            let mut c = vec![0; d];
            xs.iter().for_each(|&x| c[x] += 1);
            c
        })
        .collect();

    let mut law: Vec<S> = states
        .iter()
        .map(|xs| xs.iter().fold(S::one(), |acc, &x| acc * m0.get(x)))
        .collect();
    let mut laws = Vec::with_capacity(game.horizon() + 1);
    let mut costs = vec![S::zero(); n];
    let cost = game.cost();
    for t in 0..game.horizon() {
        let mut next = vec![S::zero(); size];
        for (s, p) in law.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let mut branches: Vec<(usize, S)> = vec![(0, p.clone())];
            for (l, phi) in plan.iter().enumerate() {
                let x = states[s][l];
                let m = exclusive_measure::<S>(&counts[s], x, n - 1);
                let a = phi.action(t, x);
                costs[l] = costs[l].clone() + p.clone() * cost.running(t, x, &m, a);
                let k = game.kernel(t, x, &m, a);
                branches = branches
                    .into_iter()
                    .flat_map(|(idx, q)| {
                        k.weights()
                            .iter()
                            .enumerate()
                            .filter(|(_, w)| !w.is_zero())
                            .map(move |(y, w)| (idx * d + y, q.clone() * w))
                            .collect::<Vec<_>>()
                    })
                    .collect();
            }
            for (idx, q) in branches {
                next[idx] = next[idx].clone() + q;
            }
        }
        laws.push(std::mem::replace(&mut law, next));
    }
    for (s, p) in law.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        for (l, c) in costs.iter_mut().enumerate() {
            let x = states[s][l];
            let m = exclusive_measure::<S>(&counts[s], x, n - 1);
            *c = c.clone() + p.clone() * cost.terminal(x, &m);
        }
    }
    laws.push(law);
    JointRun {
        n_players: n,
        n_states: d,
        laws,
        costs,
    }
}

/// `J_i(gamma, u)`: the profile is expanded and each atom propagated exactly.
pub fn profile_cost_exact<S: Scalar>(
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    i: usize,
    u: &DeviationMap,
    m0: &ProbabilityVector<S>,
    caps: &Caps,
) -> Result<S> {
    if i >= profile.n_players() {
        return Err(Error::invalid(format!("player {i} out of range")));
    }
    u.check_support(&profile.support(i))?;
    let explicit = profile.expand(caps.atoms)?;
    let mut total = S::zero();
    for (v, w) in explicit.atoms() {
        let run = exact_joint_propagate(game, v, Some((i, u.apply(&v[i]))), m0, caps.joint)?;
        total = total + w.clone() * &run.costs[i];
    }
    Ok(total)
}

/// Per-recommendation line of a deviation report.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationEntry<S> {
    pub recommendation: RestrictedStrategy,
    /// Probability that the player receives this recommendation.
    pub weight: S,
    /// Unnormalized expected cost of obeying.
    pub cost: S,
    pub best_response: RestrictedStrategy,
    pub best_value: S,
    pub gap: S,
}

/// `epsilon_i = J_i(gamma, Id) - min_u J_i(gamma, u)`, decomposed by recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport<S> {
    pub player: usize,
    pub epsilon: S,
    /// Standard error of `epsilon` for Monte Carlo estimates.
    pub stderr: Option<f64>,
    pub exact: bool,
    pub replications: Option<usize>,
    pub entries: Vec<DeviationEntry<S>>,
}

/// Smallest index attaining the minimum.
pub(crate) fn argmin<S: PartialOrd>(values: &[S]) -> usize {
    let mut best = 0;
    for (j, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = j;
        }
    }
    best
}

/// Rough count of scalar operations in an exact deviation computation.
pub fn exact_work(n_states: usize, n_players: usize, horizon: usize, atoms: u128, candidates: u128) -> u128 {
    let joint = joint_state_count(n_states, n_players).unwrap_or(u128::MAX);
    atoms
        .saturating_mul(candidates)
        .saturating_mul(joint.saturating_mul(joint))
        .saturating_mul(horizon as u128)
}

/// Exact deviation gain of player `i` by enumeration of every candidate strategy.
pub fn deviation_gain_exact<S: Scalar>(
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    i: usize,
    m0: &ProbabilityVector<S>,
    caps: &Caps,
) -> Result<DeviationReport<S>> {
    if i >= profile.n_players() {
        return Err(Error::invalid(format!("player {i} out of range")));
    }
    let candidates = game.strategies(caps.enumeration)?;
    let explicit = profile.expand(caps.atoms)?;
    let size = joint_state_count(game.n_states(), explicit.n_players()).unwrap_or(u128::MAX);
    if size > caps.joint as u128 {
        return Err(Error::capacity("joint state space", size, caps.joint as u128));
    }
    let runs: Vec<Vec<S>> = explicit
        .atoms()
        .par_iter()
        .map(|(v, _)| {
            candidates
                .iter()
                .map(|psi| {
                    exact_joint_propagate(game, v, Some((i, psi)), m0, caps.joint)
                        .map(|r| r.costs[i].clone())
                })
                .collect::<Result<Vec<S>>>()
        })
        .collect::<Result<_>>()?;
    Ok(report_from_costs(
        i,
        &candidates,
        explicit.atoms().iter().zip(&runs).map(|((v, w), c)| (&v[i], w, c.as_slice())),
    ))
}

/// Aggregates per-atom candidate costs into a deviation report.
pub(crate) fn report_from_costs<'a, S: Scalar>(
    player: usize,
    candidates: &[RestrictedStrategy],
    rows: impl Iterator<Item = (&'a RestrictedStrategy, &'a S, &'a [S])>,
) -> DeviationReport<S> {
    let mut by_rec: BTreeMap<RestrictedStrategy, (S, Vec<S>)> = BTreeMap::new();
    for (rec, w, costs) in rows {
        let e = by_rec
            .entry(rec.clone())
            .or_insert_with(|| (S::zero(), vec![S::zero(); candidates.len()]));
        e.0 = e.0.clone() + w;
        for (acc, c) in e.1.iter_mut().zip(costs) {
            *acc = acc.clone() + w.clone() * c;
        }
    }
    let mut epsilon = S::zero();
    let entries = by_rec
        .into_iter()
        .map(|(rec, (weight, values))| {
            let own = values[candidates.binary_search(&rec).expect("candidate")].clone();
            let j = argmin(&values);
            let gap = own.clone() - &values[j];
            epsilon = epsilon.clone() + &gap;
            DeviationEntry {
                recommendation: rec,
                weight,
                cost: own,
                best_response: candidates[j].clone(),
                best_value: values[j].clone(),
                gap,
            }
        })
        .collect();
    DeviationReport {
        player,
        epsilon,
        stderr: None,
        exact: true,
        replications: None,
        entries,
    }
}

/// Outcome of an exchangeability check at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeabilityReport {
    pub passed: bool,
    /// Number of attainable empirical measures examined.
    pub checked: usize,
    /// Counts of the first empirical measure whose conditional law differs.
    pub first_failure: Option<Vec<usize>>,
}

/// Checks `P(X_1(t) = x | mu(t) = e) = e(x)` for every attainable empirical measure `e`
/// of all N players, from the exact joint law.
pub fn exchangeability_check<S: Scalar>(
    game: &GameSpec<S>,
    profile: &ExplicitProfile<S>,
    m0: &ProbabilityVector<S>,
    t: usize,
    caps: &Caps,
) -> Result<ExchangeabilityReport> {
    if !profile.is_symmetric() {
        return Err(Error::invalid("exchangeability needs a symmetric profile"));
    }
    if t > game.horizon() {
        return Err(Error::invalid(format!("time {t} beyond the horizon")));
    }
    let n = profile.n_players();
    let d = game.n_states();
    let mut law: Option<Vec<S>> = None;
    for (v, w) in profile.atoms() {
        let run = exact_joint_propagate(game, v, None, m0, caps.joint)?;
        let scaled: Vec<S> = run.laws[t].iter().map(|p| w.clone() * p).collect();
        law = Some(match law {
            None => scaled,
            Some(acc) => acc.into_iter().zip(scaled).map(|(a, b)| a + b).collect(),
        });
    }
    let law = law.expect("profile has atoms");
    // counts -> (P(e), P(X_1 = x, e) for each x)
    let mut table: BTreeMap<Vec<usize>, (S, Vec<S>)> = BTreeMap::new();
    for (s, p) in law.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let xs = decode(s, d, n);
        let mut counts = vec![0; d];
        xs.iter().for_each(|&x| counts[x] += 1);
        let e = table
            .entry(counts)
            .or_insert_with(|| (S::zero(), vec![S::zero(); d]));
        e.0 = e.0.clone() + p;
        e.1[xs[0]] = e.1[xs[0]].clone() + p;
    }
    let tol = crate::mean_field::VERIFY_TOL;
    let first_failure = table
        .iter()
        .find(|(counts, (pe, joint))| {
            counts.iter().zip(joint.iter()).any(|(&c, pj)| {
                let expected = S::from_ratio(c as i64, n as i64) * pe;
                !pj.close_to(&expected, tol)
            })
        })
        .map(|(c, _)| c.clone());
    Ok(ExchangeabilityReport {
        passed: first_failure.is_none(),
        checked: table.len(),
        first_failure,
    })
}
