use crate::error::{Error, Result};
use crate::model::{FlowTrajectory, GameSpec, ProbabilityVector, RestrictedStrategy};
use crate::scalar::{Scalar, FLOAT_SUM_TOL};

pub(crate) fn check_inputs<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    flow: &FlowTrajectory<S>,
    m0: &ProbabilityVector<S>,
) -> Result<()> {
    game.check_strategy(phi)?;
    flow.check_shape(game.horizon(), game.states())?;
    m0.check_space(game.states(), "initial law")
}

/// One step of `law(t+1)(y) = sum_x law(t)(x) kernel(t, x, m, phi(t, x))(y)`.
pub(crate) fn step_law<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    t: usize,
    law: &[S],
    m: &[S],
) -> Vec<S> {
    let mut next = vec![S::zero(); law.len()];
    for (x, p) in law.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let k = game.kernel(t, x, m, phi.action(t, x));
        for (y, q) in k.weights().iter().enumerate() {
            next[y] = next[y].clone() + p.clone() * q;
        }
    }
    next
}

pub(crate) fn law_path<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    flow: &FlowTrajectory<S>,
    m0: &ProbabilityVector<S>,
) -> Vec<Vec<S>> {
    let mut laws = vec![m0.weights().to_vec()];
    for t in 0..game.horizon() {
        let next = step_law(game, phi, t, &laws[t], flow.at(t).weights());
        laws.push(next);
    }
    laws
}

/// Cost of a law path under a flow, without input validation.
pub(crate) fn path_cost<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    flow: &FlowTrajectory<S>,
    laws: &[Vec<S>],
) -> S {
    let cost = game.cost();
    let mut total = S::zero();
    for (t, law) in laws.iter().enumerate().take(game.horizon()) {
        let m = flow.at(t).weights();
        for (x, p) in law.iter().enumerate() {
            if !p.is_zero() {
                total = total + p.clone() * cost.running(t, x, m, phi.action(t, x));
            }
        }
    }
    let m_t = flow.at(game.horizon()).weights();
    for (x, p) in laws[game.horizon()].iter().enumerate() {
        if !p.is_zero() {
            total = total + p.clone() * cost.terminal(x, m_t);
        }
    }
    total
}

pub(crate) fn cost_unchecked<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    flow: &FlowTrajectory<S>,
    m0: &ProbabilityVector<S>,
) -> S {
    path_cost(game, phi, flow, &law_path(game, phi, flow, m0))
}

/// Law of the state when the player follows `phi` against the fixed `flow`.
pub fn state_law<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    flow: &FlowTrajectory<S>,
    m0: &ProbabilityVector<S>,
) -> Result<FlowTrajectory<S>> {
    check_inputs(game, phi, flow, m0)?;
    let laws = law_path(game, phi, flow, m0);
    FlowTrajectory::new(laws.into_iter().map(ProbabilityVector::from_trusted).collect())
}

/// Expected running plus terminal cost of `phi` against the fixed `flow`.
pub fn deterministic_cost<S: Scalar>(
    game: &GameSpec<S>,
    phi: &RestrictedStrategy,
    flow: &FlowTrajectory<S>,
    m0: &ProbabilityVector<S>,
) -> Result<S> {
    check_inputs(game, phi, flow, m0)?;
    Ok(cost_unchecked(game, phi, flow, m0))
}

/// Mixed flow and per-strategy laws of the McKean-Vlasov recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct MkvSolution<S> {
    pub flow: FlowTrajectory<S>,
    pub laws: Vec<(RestrictedStrategy, FlowTrajectory<S>)>,
}

/// Forward recursion in which the mixture of the strategy laws drives every kernel.
pub fn mkv_propagate<S: Scalar>(
    game: &GameSpec<S>,
    conditional: &[(RestrictedStrategy, S)],
    m0: &ProbabilityVector<S>,
) -> Result<MkvSolution<S>> {
    if conditional.is_empty() {
        return Err(Error::invalid("conditional strategy law is empty"));
    }
    m0.check_space(game.states(), "initial law")?;
    for (phi, w) in conditional {
        game.check_strategy(phi)?;
        if !w.is_finite() || !w.nonneg_within(FLOAT_SUM_TOL) {
            return Err(Error::invalid(format!("conditional weight {w} is negative")));
        }
    }
    let total: S = conditional.iter().map(|(_, w)| w.clone()).sum();
    if !total.close_to(&S::one(), FLOAT_SUM_TOL) {
        return Err(Error::invalid(format!(
            "conditional weights sum to {total}, not 1"
        )));
    }

    let d = game.n_states();
    let mut laws: Vec<Vec<Vec<S>>> = vec![vec![m0.weights().to_vec()]; conditional.len()];
    let mut mix = vec![m0.weights().to_vec()];
    for t in 0..game.horizon() {
        for ((phi, _), path) in conditional.iter().zip(laws.iter_mut()) {
            let next = step_law(game, phi, t, &path[t], &mix[t]);
            path.push(next);
        }
        let mut h = vec![S::zero(); d];
        for ((_, w), path) in conditional.iter().zip(&laws) {
            for (y, p) in path[t + 1].iter().enumerate() {
                h[y] = h[y].clone() + w.clone() * p;
            }
        }
        mix.push(h);
    }
    let to_flow = |ms: Vec<Vec<S>>| {
        FlowTrajectory::new(ms.into_iter().map(ProbabilityVector::from_trusted).collect())
    };
    Ok(MkvSolution {
        flow: to_flow(mix)?,
        laws: conditional
            .iter()
            .zip(laws)
            .map(|((phi, _), path)| Ok((phi.clone(), to_flow(path)?)))
            .collect::<Result<_>>()?,
    })
}

/// Optimal strategy and value table `V(t, x)` for `t = 0..=T` against one flow.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution<S> {
    pub strategy: RestrictedStrategy,
    pub values: Vec<Vec<S>>,
    /// Cells `(t, x)` where more than one action attains the minimum.
    pub ties: Vec<(usize, usize)>,
}

impl<S: Scalar> DpSolution<S> {
    /// `sum_x m0(x) V(0, x)`.
    pub fn initial_value(&self, m0: &ProbabilityVector<S>) -> S {
        m0.weights()
            .iter()
            .zip(&self.values[0])
            .map(|(p, v)| p.clone() * v)
            .sum()
    }
}

/// Backward induction against a deterministic flow; ties go to the smaller action.
pub fn dp_best_response<S: Scalar>(
    game: &GameSpec<S>,
    flow: &FlowTrajectory<S>,
) -> Result<DpSolution<S>> {
    flow.check_shape(game.horizon(), game.states())?;
    let horizon = game.horizon();
    let d = game.n_states();
    let cost = game.cost();
    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = (0..d)
        .map(|x| cost.terminal(x, flow.at(horizon).weights()))
        .collect();
    let mut table = vec![0; horizon * d];
    let mut ties = Vec::new();
    for t in (0..horizon).rev() {
        let m = flow.at(t).weights();
        let mut row = Vec::with_capacity(d);
        for x in 0..d {
            let q: Vec<S> = (0..game.n_actions())
                .map(|a| {
                    let k = game.kernel(t, x, m, a);
                    k.weights()
                        .iter()
                        .zip(&values[t + 1])
                        .fold(cost.running(t, x, m, a), |acc, (p, v)| acc + p.clone() * v)
                })
                .collect();
            let mut best = 0;
            for a in 1..q.len() {
                if q[a] < q[best] {
                    best = a;
                }
            }
            if q.iter().filter(|v| **v == q[best]).count() > 1 {
                ties.push((t, x));
            }
            table[t * d + x] = best;
            row.push(q[best].clone());
        }
        values[t] = row;
    }
    ties.sort_unstable();
    Ok(DpSolution {
        strategy: RestrictedStrategy::new(d, table)?,
        values,
        ties,
    })
}
