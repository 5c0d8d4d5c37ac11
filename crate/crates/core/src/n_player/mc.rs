use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mean_field::DeviationMap;
use crate::model::{threshold_index, GameSpec, ProbabilityVector, RestrictedStrategy};
use crate::n_player::exact::{argmin, check_players, DeviationEntry, DeviationReport};
use crate::n_player::profile::CorrelatedProfile;
use crate::n_player::Caps;
use crate::scalar::{pairwise_sum, Scalar};

/// Seed, replication count and an optional thread count for Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replications: usize,
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SimulationConfig {
    pub fn new(seed: u64, replications: usize) -> Result<Self> {
        let cfg = SimulationConfig {
            seed,
            replications,
            threads: None,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replication count must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("thread count must be at least 1"));
        }
        Ok(())
    }

    /// Maps `f` over replication indices; results come back in index order.
    pub(crate) fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
    {
        self.check()?;
        let seed = self.seed;
        let job = || {
            (0..self.replications)
                .into_par_iter()
                .map(|r| f(r, &mut replication_rng(seed, r)))
                .collect()
        };
        match self.threads {
            None => Ok(job()),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))
                .map(|pool| pool.install(job)),
        }
    }
}

/// The splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep`, independent of how replications are scheduled.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

pub(crate) fn replication_rng(master: u64, rep: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replication_seed(master, rep))
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// Zero when only one replication was run.
    pub stderr: f64,
    pub replications: usize,
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    weights
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Index drawn from cumulative weights with a uniform `u` in `[0, 1)`.
fn pick(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("non-empty weights");
    let target = u * total;
    cum.iter().position(|&c| target < c).unwrap_or(cum.len() - 1)
}

enum Draw {
    Explicit {
        atoms: Vec<Vec<usize>>,
        cum: Vec<f64>,
    },
    Factored {
        flow_cum: Vec<f64>,
        conditionals: Vec<(Vec<usize>, Vec<f64>)>,
    },
}

/// Samples strategy vectors from a profile; strategies are stored as pool indices.
pub(crate) struct ProfileSampler {
    n_players: usize,
    pool: Vec<RestrictedStrategy>,
    draw: Draw,
}

impl ProfileSampler {
    pub(crate) fn new<S: Scalar>(profile: &CorrelatedProfile<S>) -> Self {
        let mut pool: Vec<RestrictedStrategy> = profile.strategies().cloned().collect();
        pool.sort();
        pool.dedup();
        let at = |s: &RestrictedStrategy| pool.binary_search(s).expect("pooled strategy");
        let draw = match profile {
            CorrelatedProfile::Explicit(p) => Draw::Explicit {
                atoms: p.atoms().iter().map(|(v, _)| v.iter().map(at).collect()).collect(),
                cum: cumulative(p.atoms().iter().map(|(_, w)| w.to_f64())),
            },
            CorrelatedProfile::Factored(p) => Draw::Factored {
                flow_cum: cumulative(p.mixture.flows.iter().map(|(_, w)| w.to_f64())),
                conditionals: p
                    .mixture
                    .conditionals
                    .iter()
                    .map(|c| {
                        (
                            c.iter().map(|(s, _)| at(s)).collect(),
                            cumulative(c.iter().map(|(_, w)| w.to_f64())),
                        )
                    })
                    .collect(),
            },
        };
        ProfileSampler {
            n_players: profile.n_players(),
            pool,
            draw,
        }
    }

    pub(crate) fn pool(&self) -> &[RestrictedStrategy] {
        &self.pool
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match &self.draw {
            Draw::Explicit { atoms, cum } => atoms[pick(cum, rng.random())].clone(),
            Draw::Factored {
                flow_cum,
                conditionals,
            } => {
                let (strategies, cum) = &conditionals[pick(flow_cum, rng.random())];
                (0..self.n_players)
                    .map(|_| strategies[pick(cum, rng.random())])
                    .collect()
            }
        }
    }
}

/// Everything random in one replication: recommendations, initial states and noise.
pub(crate) struct Scenario {
    pub(crate) plan: Vec<usize>,
    x0: Vec<usize>,
    /// `noise[t][j]`.
    noise: Vec<Vec<f64>>,
}

/// N-player particle system driven by a profile, in float arithmetic.
pub(crate) struct Simulator {
    pub(crate) game: GameSpec<f64>,
    m0_cum: Vec<f64>,
    pub(crate) sampler: ProfileSampler,
    pub(crate) n_players: usize,
}

impl Simulator {
    pub(crate) fn new<S: Scalar>(
        game: &GameSpec<S>,
        profile: &CorrelatedProfile<S>,
        m0: &ProbabilityVector<S>,
    ) -> Result<Self> {
        for s in profile.strategies() {
            game.check_strategy(s)?;
        }
        m0.check_space(game.states(), "initial law")?;
        let n = profile.n_players();
        Ok(Simulator {
            game: game.convert(),
            m0_cum: cumulative(m0.weights().iter().map(Scalar::to_f64)),
            sampler: ProfileSampler::new(profile),
            n_players: n,
        })
    }

    pub(crate) fn scenario(&self, rng: &mut ChaCha8Rng) -> Scenario {
        let plan = self.sampler.sample(rng);
        let x0 = (0..self.n_players)
            .map(|_| pick(&self.m0_cum, rng.random()))
            .collect();
        let noise = (0..self.game.horizon())
            .map(|_| (0..self.n_players).map(|_| rng.random()).collect())
            .collect();
        Scenario { plan, x0, noise }
    }

    pub(crate) fn strategy(&self, k: usize) -> &RestrictedStrategy {
        &self.sampler.pool()[k]
    }

    /// `states[t][l]` for `t = 0..=T`.
    pub(crate) fn run(&self, sc: &Scenario, plan: &[&RestrictedStrategy]) -> Vec<Vec<usize>> {
        realize(&self.game, plan, &sc.x0, &sc.noise)
    }

    /// Player `l`'s path under `psi` when the others keep their states in `base`.
    /// Exact only for measure-independent transitions.
    fn rerun_player(
        &self,
        sc: &Scenario,
        base: &[Vec<usize>],
        l: usize,
        psi: &RestrictedStrategy,
    ) -> Vec<Vec<usize>> {
        let d = self.game.n_states();
        let mut states = base.to_vec();
        for t in 0..self.game.horizon() {
            let m = exclusive_f64(&states[t], l, d);
            let x = states[t][l];
            let k = self.game.kernel(t, x, &m, psi.action(t, x));
            states[t + 1][l] = threshold_index(k.weights(), &sc.noise[t][l]);
        }
        states
    }

    pub(crate) fn cost(&self, states: &[Vec<usize>], l: usize, strategy: &RestrictedStrategy) -> f64 {
        realized_cost(&self.game, states, l, strategy)
    }
}

fn exclusive_f64(states: &[usize], l: usize, d: usize) -> Vec<f64> {
    let mut counts = vec![0usize; d];
    for (j, &x) in states.iter().enumerate() {
        if j != l {
            counts[x] += 1;
        }
    }
    let others = (states.len() - 1) as f64;
    counts.into_iter().map(|c| c as f64 / others).collect()
}

fn realize(
    game: &GameSpec<f64>,
    plan: &[&RestrictedStrategy],
    x0: &[usize],
    noise: &[Vec<f64>],
) -> Vec<Vec<usize>> {
    let n = plan.len();
    let d = game.n_states();
    let mut states = Vec::with_capacity(game.horizon() + 1);
    states.push(x0.to_vec());
    for (t, xi) in noise.iter().enumerate() {
        let now: &Vec<usize> = states.last().expect("initial states");
        let mut counts = vec![0usize; d];
        now.iter().for_each(|&x| counts[x] += 1);
        let next = (0..n)
            .map(|l| {
                let x = now[l];
                let m: Vec<f64> = counts
                    .iter()
                    .enumerate()
                    .map(|(y, &c)| (c - usize::from(y == x)) as f64 / (n - 1) as f64)
                    .collect();
                let k = game.kernel(t, x, &m, plan[l].action(t, x));
                threshold_index(k.weights(), &xi[l])
            })
            .collect();
        states.push(next);
    }
    states
}

fn realized_cost(game: &GameSpec<f64>, states: &[Vec<usize>], l: usize, strategy: &RestrictedStrategy) -> f64 {
    let d = game.n_states();
    let horizon = game.horizon();
    let mut terms = Vec::with_capacity(horizon + 1);
    for (t, now) in states.iter().enumerate().take(horizon) {
        let x = now[l];
        let m = exclusive_f64(now, l, d);
        terms.push(game.cost().running(t, x, &m, strategy.action(t, x)));
    }
    let last = &states[horizon];
    terms.push(game.cost().terminal(last[l], &exclusive_f64(last, l, d)));
    pairwise_sum(&terms)
}

/// One realization of the N-player dynamics from given initial states and
/// noise `noise[t][j]` in `[0, 1]`. Returns `states[t][l]` for `t = 0..=T`.
pub fn simulate_realization(
    game: &GameSpec<f64>,
    strategies: &[RestrictedStrategy],
    x0: &[usize],
    noise: &[Vec<f64>],
) -> Result<Vec<Vec<usize>>> {
    let m0 = ProbabilityVector::uniform(game.n_states());
    check_players(game, strategies, &m0)?;
    let n = strategies.len();
    if x0.len() != n || x0.iter().any(|&x| x >= game.n_states()) {
        return Err(Error::invalid("one valid initial state per player is required"));
    }
    if noise.len() != game.horizon()
        || noise
            .iter()
            .any(|xi| xi.len() != n || xi.iter().any(|z| !(0.0..=1.0).contains(z)))
    {
        return Err(Error::invalid("noise must be a T x N array of values in [0, 1]"));
    }
    let plan: Vec<&RestrictedStrategy> = strategies.iter().collect();
    Ok(realize(game, &plan, x0, noise))
}

/// Monte Carlo estimate of `J_i(gamma, u)`.
pub fn mc_profile_cost<S: Scalar>(
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    i: usize,
    u: &DeviationMap,
    m0: &ProbabilityVector<S>,
    cfg: &SimulationConfig,
) -> Result<McEstimate> {
    if i >= profile.n_players() {
        return Err(Error::invalid(format!("player {i} out of range")));
    }
    u.check_support(&profile.support(i))?;
    let sim = Simulator::new(game, profile, m0)?;
    for (_, to) in u.entries() {
        sim.game.check_strategy(to)?;
    }
    let samples = cfg.map(|_, rng| {
        let sc = sim.scenario(rng);
        let mut plan: Vec<&RestrictedStrategy> = sc.plan.iter().map(|&k| sim.strategy(k)).collect();
        plan[i] = u.apply(plan[i]);
        let states = sim.run(&sc, &plan);
        sim.cost(&states, i, plan[i])
    })?;
    let (estimate, stderr) = mean_and_stderr(&samples);
    Ok(McEstimate {
        estimate,
        stderr,
        replications: cfg.replications,
    })
}

/// Monte Carlo deviation gain of player `i`.
///
/// Every candidate strategy is evaluated on the same recommendations, initial
/// states and noise (common random numbers). With a measure-independent
/// transition the other players' paths do not react to player `i`, so only
/// player `i` is re-simulated per candidate.
pub fn deviation_gain_mc<S: Scalar>(
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    i: usize,
    m0: &ProbabilityVector<S>,
    cfg: &SimulationConfig,
    caps: &Caps,
) -> Result<DeviationReport<f64>> {
    if i >= profile.n_players() {
        return Err(Error::invalid(format!("player {i} out of range")));
    }
    let candidates = game.strategies(caps.enumeration)?;
    let sim = Simulator::new(game, profile, m0)?;
    let rec_index: Vec<usize> = sim
        .sampler
        .pool()
        .iter()
        .map(|s| candidates.binary_search(s).expect("candidate"))
        .collect();
    let shortcut = sim.game.transition().is_measure_independent();

    let rows: Vec<(usize, Vec<f64>)> = cfg.map(|_, rng| {
        let sc = sim.scenario(rng);
        let mut plan: Vec<&RestrictedStrategy> = sc.plan.iter().map(|&k| sim.strategy(k)).collect();
        let base = sim.run(&sc, &plan);
        let rec = rec_index[sc.plan[i]];
        let costs = candidates
            .iter()
            .enumerate()
            .map(|(j, psi)| {
                let states = if j == rec {
                    return sim.cost(&base, i, psi);
                } else if shortcut {
                    sim.rerun_player(&sc, &base, i, psi)
                } else {
                    plan[i] = psi;
                    sim.run(&sc, &plan)
                };
                sim.cost(&states, i, psi)
            })
            .collect();
        (rec, costs)
    })?;

    let r = cfg.replications as f64;
    let mut by_rec: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, (rec, _)) in rows.iter().enumerate() {
        by_rec.entry(*rec).or_default().push(k);
    }
    let mut best_of = BTreeMap::new();
    let mut entries = Vec::with_capacity(by_rec.len());
    for (&rec, reps) in &by_rec {
        let values: Vec<f64> = (0..candidates.len())
            .map(|j| pairwise_sum(&reps.iter().map(|&k| rows[k].1[j]).collect::<Vec<_>>()) / r)
            .collect();
        let j = argmin(&values);
        best_of.insert(rec, j);
        entries.push(DeviationEntry {
            recommendation: candidates[rec].clone(),
            weight: reps.len() as f64 / r,
            cost: values[rec],
            best_response: candidates[j].clone(),
            best_value: values[j],
            gap: values[rec] - values[j],
        });
    }
    let diffs: Vec<f64> = rows
        .iter()
        .map(|(rec, c)| c[*rec] - c[best_of[rec]])
        .collect();
    let (epsilon, stderr) = mean_and_stderr(&diffs);
    Ok(DeviationReport {
        player: i,
        epsilon,
        stderr: Some(stderr),
        exact: false,
        replications: Some(cfg.replications),
        entries,
    })
}
