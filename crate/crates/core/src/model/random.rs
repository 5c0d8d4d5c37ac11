use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{AffineCost, AffineSimplexMap, FiniteSpace, GameSpec, ProbabilityVector, ThresholdTransition};
use crate::scalar::{rational, Rational};

const DENOM: i64 = 8;

fn random_distribution(rng: &mut ChaCha8Rng, d: usize) -> Vec<Rational> {
    // cut points on the grid k / DENOM
    let mut cuts: Vec<i64> = (0..d - 1).map(|_| rng.random_range(0..=DENOM)).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut out = Vec::with_capacity(d);
    for c in cuts.into_iter().chain(std::iter::once(DENOM)) {
        out.push(rational(c - prev, DENOM));
        prev = c;
    }
    out
}

/// A random game with rational entries of denominator 8.
///
/// Each transition row interpolates between random kernels attached to the
/// vertices of the simplex, so it depends on the measure unless
/// `measure_dependent` is false. Costs are affine with coefficients in `[-1, 1]`.
pub fn random_game(
    seed: u64,
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    measure_dependent: bool,
) -> Result<GameSpec<Rational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = FiniteSpace::new((0..n_states).map(|x| format!("s{x}")))?;
    let actions = FiniteSpace::new((0..n_actions).map(|a| format!("a{a}")))?;
    let transition = ThresholdTransition::from_fn(horizon, n_states, n_actions, |_, _, _| {
        let base = random_distribution(&mut rng, n_states);
        if !measure_dependent {
            return AffineSimplexMap::constant(base);
        }
        let vertices: Vec<Vec<Rational>> = (0..n_states)
            .map(|_| random_distribution(&mut rng, n_states))
            .collect();
        let coef = (0..n_states)
            .map(|i| (0..n_states).map(|y| &vertices[y][i] - &base[i]).collect())
            .collect();
        AffineSimplexMap::new(base, coef).expect("square rows")
    })?;
    let coin = |rng: &mut ChaCha8Rng| rational(rng.random_range(-DENOM..=DENOM), DENOM);
    let row = |rng: &mut ChaCha8Rng| -> (Rational, Vec<Rational>) {
        (coin(rng), (0..n_states).map(|_| coin(rng)).collect())
    };
    let mut running = Vec::new();
    for _ in 0..horizon * n_states * n_actions {
        running.push(row(&mut rng));
    }
    let mut terminal: Vec<_> = (0..n_states).map(|_| row(&mut rng)).collect();
    let mut cells = running.drain(..);
    let cost = AffineCost::from_fn(
        horizon,
        n_states,
        n_actions,
        |_, _, _| cells.next().expect("one row per cell"),
        |x| std::mem::take(&mut terminal[x]),
    )?;
    GameSpec::new(horizon, states, actions, transition, cost)
}

/// A random initial law with denominator 8 and full support.
pub fn random_initial_law(seed: u64, n_states: usize) -> ProbabilityVector<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<i64> = (0..n_states).map(|_| rng.random_range(1..=DENOM)).collect();
    let total: i64 = raw.iter().sum();
    ProbabilityVector::new(raw.into_iter().map(|w| rational(w, total)).collect())
        .expect("positive weights summing to one")
}
