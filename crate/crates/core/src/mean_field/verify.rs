use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mean_field::dynamics::{check_inputs, cost_unchecked, law_path, mkv_propagate};
use crate::mean_field::flow::{support_of, CorrelatedFlow, DeviationMap, FlowAtom, FlowFactorization};
use crate::model::{dist, FlowTrajectory, GameSpec, ProbabilityVector, RestrictedStrategy};
use crate::scalar::Scalar;

/// Float-mode threshold for optimality gaps and consistency residuals.
pub const VERIFY_TOL: f64 = 1e-9;

/// `J(m0, rho, u) = sum_atoms weight * cost(u(phi), flow)`.
pub fn correlated_cost<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    u: &DeviationMap,
    m0: &ProbabilityVector<S>,
) -> Result<S> {
    u.check_support(&rho.support())?;
    let mut total = S::zero();
    for a in rho.atoms() {
        let psi = u.apply(&a.strategy);
        check_inputs(game, psi, &a.flow, m0)?;
        total = total + a.weight.clone() * cost_unchecked(game, psi, &a.flow, m0);
    }
    Ok(total)
}

/// Costs of every candidate strategy against every distinct flow of the atoms.
struct CostTable<S> {
    flows: Vec<FlowTrajectory<S>>,
    candidates: Vec<RestrictedStrategy>,
    /// `values[k][j]`: cost of candidate `j` against flow `k`.
    values: Vec<Vec<S>>,
}

impl<S: Scalar> CostTable<S> {
    fn build(
        game: &GameSpec<S>,
        atoms: &[FlowAtom<S>],
        m0: &ProbabilityVector<S>,
        cap: usize,
    ) -> Result<Self> {
        let candidates = game.strategies(cap)?;
        let mut flows: Vec<FlowTrajectory<S>> = Vec::new();
        for a in atoms {
            check_inputs(game, &a.strategy, &a.flow, m0)?;
            if !flows.iter().any(|f| f.matches(&a.flow)) {
                flows.push(a.flow.clone());
            }
        }
        let values = flows
            .iter()
            .map(|flow| {
                candidates
                    .par_iter()
                    .map(|psi| cost_unchecked(game, psi, flow, m0))
                    .collect()
            })
            .collect();
        Ok(CostTable {
            flows,
            candidates,
            values,
        })
    }

    fn flow_index(&self, flow: &FlowTrajectory<S>) -> usize {
        self.flows
            .iter()
            .position(|f| f.matches(flow))
            .expect("flow registered at build time")
    }

    /// Unnormalized conditional cost of every candidate given recommendation `phi`.
    fn conditional(&self, atoms: &[FlowAtom<S>], phi: &RestrictedStrategy) -> Vec<S> {
        let mut out = vec![S::zero(); self.candidates.len()];
        for a in atoms.iter().filter(|a| &a.strategy == phi) {
            let row = &self.values[self.flow_index(&a.flow)];
            for (o, v) in out.iter_mut().zip(row) {
                *o = o.clone() + a.weight.clone() * v;
            }
        }
        out
    }

    fn position(&self, phi: &RestrictedStrategy) -> usize {
        self.candidates
            .binary_search(phi)
            .expect("support strategy is a candidate")
    }
}

/// Smallest index attaining the minimum.
fn argmin<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (j, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse<S> {
    pub strategy: RestrictedStrategy,
    /// Minimal unnormalized conditional cost `sum_m rho(phi, m) J(psi, m)`.
    pub value: S,
}

/// Enumerates all restricted strategies against the flows recommended with `phi`.
pub fn best_response<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    phi: &RestrictedStrategy,
    m0: &ProbabilityVector<S>,
    cap: usize,
) -> Result<BestResponse<S>> {
    if !rho.atoms().iter().any(|a| &a.strategy == phi) {
        return Err(Error::invalid(format!("strategy {phi} is not in the support")));
    }
    let atoms: Vec<FlowAtom<S>> = rho
        .atoms()
        .iter()
        .filter(|a| &a.strategy == phi)
        .cloned()
        .collect();
    let table = CostTable::build(game, &atoms, m0, cap)?;
    let values = table.conditional(&atoms, phi);
    let j = argmin(&values);
    Ok(BestResponse {
        strategy: table.candidates[j].clone(),
        value: values[j].clone(),
    })
}

/// Per-recommendation line of an optimality report.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationGap<S> {
    pub recommendation: RestrictedStrategy,
    /// Marginal weight of the recommendation.
    pub weight: S,
    /// Unnormalized conditional cost of obeying.
    pub cost: S,
    pub best_response: RestrictedStrategy,
    pub best_value: S,
    pub gap: S,
    /// Cells where the best response departs from the recommendation.
    pub differing_cells: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport<S> {
    pub gap: S,
    pub optimal: bool,
    pub entries: Vec<RecommendationGap<S>>,
}

/// `sum_phi [cost(phi | phi) - min_psi cost(psi | phi)]` over the support.
pub fn optimality_gap<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    cap: usize,
) -> Result<OptimalityReport<S>> {
    optimality_gap_of_atoms(game, rho.atoms(), m0, cap)
}

/// As [`optimality_gap`] on atoms whose weights need not be normalized.
pub fn optimality_gap_of_atoms<S: Scalar>(
    game: &GameSpec<S>,
    atoms: &[FlowAtom<S>],
    m0: &ProbabilityVector<S>,
    cap: usize,
) -> Result<OptimalityReport<S>> {
    let table = CostTable::build(game, atoms, m0, cap)?;
    let mut entries = Vec::new();
    let mut gap = S::zero();
    for phi in support_of(atoms) {
        let values = table.conditional(atoms, &phi);
        let own = values[table.position(&phi)].clone();
        let j = argmin(&values);
        let best = table.candidates[j].clone();
        let g = own.clone() - &values[j];
        gap = gap + &g;
        let weight = atoms
            .iter()
            .filter(|a| a.strategy == phi)
            .map(|a| a.weight.clone())
            .sum();
        entries.push(RecommendationGap {
            differing_cells: phi.differing_cells(&best),
            recommendation: phi,
            weight,
            cost: own,
            best_response: best,
            best_value: values[j].clone(),
            gap: g,
        });
    }
    Ok(OptimalityReport {
        optimal: gap.close_to(&S::zero(), VERIFY_TOL),
        gap,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResidual<S> {
    pub flow: FlowTrajectory<S>,
    pub weight: S,
    /// `dist(mix(t), m(t))` for each `t`.
    pub per_time: Vec<S>,
    pub residual: S,
    pub mixture: FlowTrajectory<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport<S> {
    pub consistent: bool,
    pub flows: Vec<FlowResidual<S>>,
}

impl<S: Scalar> ConsistencyReport<S> {
    pub fn max_residual(&self) -> S {
        self.flows
            .iter()
            .map(|f| f.residual.clone())
            .fold(S::zero(), S::max_of)
    }
}

/// Checks that each supported flow is the mixed law of the strategies recommended with it.
pub fn consistency_check<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
) -> Result<ConsistencyReport<S>> {
    let fac = FlowFactorization::factorize(rho);
    let mut flows = Vec::with_capacity(fac.flows.len());
    for ((flow, weight), cond) in fac.flows.iter().zip(&fac.conditionals) {
        flow.check_shape(game.horizon(), game.states())?;
        let mut mix: Vec<Vec<S>> = vec![vec![S::zero(); game.n_states()]; flow.len()];
        for (phi, p) in cond {
            check_inputs(game, phi, flow, m0)?;
            let laws = law_path(game, phi, flow, m0);
            for (acc, law) in mix.iter_mut().zip(&laws) {
                for (a, q) in acc.iter_mut().zip(law) {
                    *a = a.clone() + p.clone() * q;
                }
            }
        }
        let mixture = FlowTrajectory::new(
            mix.into_iter()
                .map(ProbabilityVector::from_trusted)
                .collect(),
        )?;
        let per_time = (0..flow.len())
            .map(|t| dist(mixture.at(t), flow.at(t)))
            .collect::<Result<Vec<S>>>()?;
        let residual = per_time.iter().cloned().fold(S::zero(), S::max_of);
        flows.push(FlowResidual {
            flow: flow.clone(),
            weight: weight.clone(),
            per_time,
            residual,
            mixture,
        });
    }
    Ok(ConsistencyReport {
        consistent: flows
            .iter()
            .all(|f| f.residual.close_to(&S::zero(), VERIFY_TOL)),
        flows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionVerdict<S> {
    pub solution: bool,
    pub optimality: OptimalityReport<S>,
    pub consistency: ConsistencyReport<S>,
}

/// Optimality and consistency together.
pub fn verify_solution<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    cap: usize,
) -> Result<SolutionVerdict<S>> {
    let optimality = optimality_gap(game, rho, m0, cap)?;
    let consistency = consistency_check(game, rho, m0)?;
    Ok(SolutionVerdict {
        solution: optimality.optimal && consistency.consistent,
        optimality,
        consistency,
    })
}

/// Fixed-point residual of the McKean-Vlasov recursion for each supported flow.
pub fn mkv_residuals<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
) -> Result<Vec<S>> {
    let fac = FlowFactorization::factorize(rho);
    fac.flows
        .iter()
        .zip(&fac.conditionals)
        .map(|((flow, _), cond)| {
            let h = mkv_propagate(game, cond, m0)?.flow;
            let mut worst = S::zero();
            for t in 0..flow.len() {
                worst = S::max_of(worst, dist(h.at(t), flow.at(t))?);
            }
            Ok(worst)
        })
        .collect()
}
