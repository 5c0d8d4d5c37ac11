//! Bridges between the N-player game and the limit model: lifting correlated
//! flows to N-player profiles, deviation gains along N, and the empirical law
//! of recommendation and flow seen by one player.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lp::transport;
use crate::mean_field::{verify_solution, CorrelatedFlow, FlowAtom, FlowFactorization};
use crate::model::measure::measure_from_counts;
use crate::model::{dist, FlowTrajectory, GameSpec, ProbabilityVector, RestrictedStrategy};
use crate::n_player::{
    deviation_gain_exact, deviation_gain_mc, exact_work, joint_state_count, Caps,
    CorrelatedProfile, FactoredProfile, SimulationConfig, Simulator,
};
use crate::scalar::{Rational, Scalar};

/// Largest combined support handled by [`flow_space_distance`].
pub const TRANSPORT_ATOM_CAP: usize = 10_000;

/// Profile drawing a flow from `rho`'s flow marginal, then each player's
/// strategy i.i.d. from the conditional given that flow.
pub fn lift<S: Scalar>(rho: &CorrelatedFlow<S>, n_players: usize) -> Result<CorrelatedProfile<S>> {
    Ok(CorrelatedProfile::Factored(FactoredProfile::new(
        n_players,
        FlowFactorization::factorize(rho),
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainMethod {
    Exact,
    MonteCarlo,
}

impl fmt::Display for GainMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainMethod::Exact => "exact",
            GainMethod::MonteCarlo => "mc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRow {
    pub n: usize,
    pub epsilon: f64,
    /// The exact value when the row was computed exactly.
    pub exact: Option<Rational>,
    pub stderr: Option<f64>,
    pub method: GainMethod,
    pub replications: Option<usize>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonCurve {
    pub rows: Vec<EpsilonRow>,
}

/// Which method [`epsilon_curve`] uses at `n` players.
pub fn gain_method<S: Scalar>(
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    caps: &Caps,
) -> Result<GainMethod> {
    let n = profile.n_players();
    let joint = joint_state_count(game.n_states(), n).unwrap_or(u128::MAX);
    if joint > caps.joint as u128 {
        return Ok(GainMethod::MonteCarlo);
    }
    let atoms = match profile {
        CorrelatedProfile::Explicit(p) => p.atoms().len() as u128,
        CorrelatedProfile::Factored(p) => p.expanded_size().unwrap_or(u128::MAX),
    };
    if atoms > caps.atoms as u128 {
        return Ok(GainMethod::MonteCarlo);
    }
    let candidates = game.strategies(caps.enumeration)?.len() as u128;
    let work = exact_work(game.n_states(), n, game.horizon(), atoms, candidates);
    Ok(if work <= caps.exact_work {
        GainMethod::Exact
    } else {
        GainMethod::MonteCarlo
    })
}

/// Deviation gain of the lifted profile for each `N`, in ascending order.
///
/// Lifted profiles are exchangeable, so player 0 stands for every player.
/// The same initial law is used at every `N`.
pub fn epsilon_curve<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    ns: &[usize],
    cfg: &SimulationConfig,
    caps: &Caps,
) -> Result<EpsilonCurve> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.first().is_some_and(|&n| n < 2) {
        return Err(Error::invalid("every N must be at least 2"));
    }
    cfg.check()?;
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let start = Instant::now();
        let profile = lift(rho, n)?;
        let method = gain_method(game, &profile, caps)?;
        let row = match method {
            GainMethod::Exact => {
                let exact: GameSpec<Rational> = game.convert();
                let report =
                    deviation_gain_exact(&exact, &profile.convert(), 0, &m0.convert(), caps)?;
                EpsilonRow {
                    n,
                    epsilon: report.epsilon.to_f64(),
                    exact: Some(report.epsilon),
                    stderr: None,
                    method,
                    replications: None,
                    seconds: 0.0,
                }
            }
            GainMethod::MonteCarlo => {
                let report = deviation_gain_mc(game, &profile, 0, m0, cfg, caps)?;
                EpsilonRow {
                    n,
                    epsilon: report.epsilon,
                    exact: None,
                    stderr: report.stderr,
                    method,
                    replications: report.replications,
                    seconds: 0.0,
                }
            }
        };
        rows.push(EpsilonRow {
            seconds: start.elapsed().as_secs_f64(),
            ..row
        });
    }
    Ok(EpsilonCurve { rows })
}

/// Sampled law of (player 0's recommendation, player 0's view of the others'
/// empirical flow). Flows are kept as integer counts out of `N - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalCorrelatedFlow {
    pub n_players: usize,
    pub samples: usize,
    /// `(strategy, counts[t][x], multiplicity)` in sorted order.
    pub atoms: Vec<(RestrictedStrategy, Vec<Vec<usize>>, usize)>,
}

impl EmpiricalCorrelatedFlow {
    pub fn to_flow<S: Scalar>(&self) -> Result<CorrelatedFlow<S>> {
        let others = self.n_players - 1;
        let atoms = self
            .atoms
            .iter()
            .map(|(s, counts, k)| {
                let flow = FlowTrajectory::new(
                    counts.iter().map(|c| measure_from_counts(c, others)).collect(),
                )?;
                Ok(FlowAtom {
                    strategy: s.clone(),
                    flow,
                    weight: S::from_ratio(*k as i64, self.samples as i64),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CorrelatedFlow::new(atoms)
    }
}

/// Simulates the N-player system under `profile` and records what player 0 sees.
pub fn empirical_rho_n<S: Scalar>(
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    m0: &ProbabilityVector<S>,
    cfg: &SimulationConfig,
) -> Result<EmpiricalCorrelatedFlow> {
    let sim = Simulator::new(game, profile, m0)?;
    let d = game.n_states();
    let samples = cfg.map(|_, rng| {
        let sc = sim.scenario(rng);
        let plan: Vec<&RestrictedStrategy> = sc.plan.iter().map(|&k| sim.strategy(k)).collect();
        let states = sim.run(&sc, &plan);
        let counts: Vec<Vec<usize>> = states
            .iter()
            .map(|now| {
                let mut c = vec![0usize; d];
                now.iter().skip(1).for_each(|&x| c[x] += 1);
                c
            })
            .collect();
        (sc.plan[0], counts)
    })?;
    let mut merged: BTreeMap<(RestrictedStrategy, Vec<Vec<usize>>), usize> = BTreeMap::new();
    for (k, counts) in samples {
        *merged.entry((sim.strategy(k).clone(), counts)).or_default() += 1;
    }
    Ok(EmpiricalCorrelatedFlow {
        n_players: profile.n_players(),
        samples: cfg.replications,
        atoms: merged.into_iter().map(|((s, c), k)| (s, c, k)).collect(),
    })
}

/// 1-Wasserstein distance between two correlated flows for the ground metric
/// `1{phi != phi'} + sum_t dist(m(t), m'(t))`, solved exactly.
///
/// Weights are promoted to rationals and each side is renormalized to mass 1.
pub fn flow_space_distance<S: Scalar>(a: &CorrelatedFlow<S>, b: &CorrelatedFlow<S>) -> Result<Rational> {
    let (a, b): (CorrelatedFlow<Rational>, CorrelatedFlow<Rational>) = (a.convert(), b.convert());
    let combined = a.atoms().len() + b.atoms().len();
    if combined > TRANSPORT_ATOM_CAP {
        return Err(Error::capacity(
            "transport atoms",
            combined as u128,
            TRANSPORT_ATOM_CAP as u128,
        ));
    }
    if a.horizon() != b.horizon() {
        return Err(Error::invalid("flows have different horizons"));
    }
    let normalized = |rho: &CorrelatedFlow<Rational>| {
        let total: Rational = rho.atoms().iter().map(|x| x.weight.clone()).sum();
        rho.atoms()
            .iter()
            .map(|x| x.weight.clone() / &total)
            .collect::<Vec<_>>()
    };
    let cost = a
        .atoms()
        .iter()
        .map(|x| {
            b.atoms()
                .iter()
                .map(|y| ground_distance(x, y))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(transport(&normalized(&a), &normalized(&b), &cost)?.cost)
}

fn ground_distance(x: &FlowAtom<Rational>, y: &FlowAtom<Rational>) -> Result<Rational> {
    let mut d = if x.strategy == y.strategy {
        Rational::zero()
    } else {
        Rational::from_usize(1)
    };
    for (m, n) in x.flow.measures().iter().zip(y.flow.measures()) {
        d += dist(m, n)?;
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub w1: Rational,
    pub replications: usize,
    pub distinct_atoms: usize,
    pub seconds: f64,
}

/// `W1(rho^N_emp, rho)` along `ns` for the lift of a verified correlated solution.
pub fn convergence_report<S: Scalar>(
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    ns: &[usize],
    cfg: &SimulationConfig,
    caps: &Caps,
) -> Result<Vec<ConvergenceRow>> {
    let verdict = verify_solution(game, rho, m0, caps.enumeration)?;
    if !verdict.solution {
        return Err(Error::invalid(
            "the correlated flow is not a correlated solution of the game",
        ));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.first().is_some_and(|&n| n < 2) {
        return Err(Error::invalid("every N must be at least 2"));
    }
    ns.into_iter()
        .map(|n| {
            let start = Instant::now();
            let emp = empirical_rho_n(game, &lift(rho, n)?, m0, cfg)?;
            let w1 = flow_space_distance(&emp.to_flow::<Rational>()?, &rho.convert())?;
            Ok(ConvergenceRow {
                n,
                w1,
                replications: cfg.replications,
                distinct_atoms: emp.atoms.len(),
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
