use cmfg_core::example_s5::{build_example, ExampleParams, Section5};
use cmfg_core::limits::lift;
use cmfg_core::lp::LpOutcome;
use cmfg_core::model::random::{random_game, random_initial_law};
use cmfg_core::n_player::*;
use cmfg_core::scalar::{rational, Rational};
use cmfg_core::{
    AffineCost, AffineSimplexMap, DeviationMap, FiniteSpace, GameSpec, ProbabilityVector,
    RestrictedStrategy, Scalar, ThresholdTransition,
};

fn r(n: i64, d: i64) -> Rational {
    rational(n, d)
}

fn base() -> Section5 {
    build_example(&ExampleParams::symmetric(r(1, 32), r(1, 16))).unwrap()
}

fn caps() -> Caps {
    Caps::default()
}

fn frozen_zero_cost() -> GameSpec<Rational> {
    let states = FiniteSpace::new(["a", "b"]).unwrap();
    let actions = FiniteSpace::new(["0", "1"]).unwrap();
    let tr = ThresholdTransition::from_fn(2, 2, 2, |_, x, _| {
        let mut b = vec![r(0, 1), r(0, 1)];
        b[x] = r(1, 1);
        AffineSimplexMap::constant(b)
    })
    .unwrap();
    GameSpec::new(2, states, actions, tr, AffineCost::zero(2, 2, 2)).unwrap()
}

fn index(label: i64) -> usize {
    usize::from(label != 1)
}

/// Cost of a player using `me` against one opponent using `other` in the
/// two-state example, by summing over initial labels and all flip patterns.
fn duel_oracle(c0: &Rational, c1: &Rational, me: &RestrictedStrategy, other: &RestrictedStrategy) -> Rational {
    let flip = |a: usize| if a == 0 { r(1, 2) } else { r(1, 4) };
    let step = |s: &RestrictedStrategy, t: usize, x: i64, flips: bool| {
        let p = flip(s.action(t, index(x)));
        if flips {
            (-x, p)
        } else {
            (x, r(1, 1) - p)
        }
    };
    let mut total = r(0, 1);
    for x0 in [1i64, -1] {
        for y0 in [1i64, -1] {
            for pattern in 0..16u32 {
                let bit = |k: u32| pattern >> k & 1 == 1;
                let (x1, p1) = step(me, 0, x0, bit(0));
                let (y1, q1) = step(other, 0, y0, bit(1));
                let (x2, p2) = step(me, 1, x1, bit(2));
                let (y2, q2) = step(other, 1, y1, bit(3));
                let prob = r(1, 4) * p1 * q1 * p2 * q2;
                let a0 = me.action(0, index(x0)) as i64;
                let a1 = me.action(1, index(x1)) as i64;
                let cost = c0 * r(a0, 1) + c1 * r(a1, 1) - r(x1 * y1, 1) - r(x2 * y2, 1);
                total += prob * cost;
            }
        }
    }
    total
}

#[test]
fn joint_law_after_one_step_is_uniform() {
    let ex = base();
    let zero = ex.strategies.zero.clone();
    let run = exact_joint_propagate(&ex.game, &[zero.clone(), zero], None, &ex.m0, 4096).unwrap();
    assert_eq!(run.laws[1], vec![r(1, 4); 4]);
    assert_eq!(run.laws.len(), 3);
    for l in 0..2 {
        for t in 0..3 {
            assert_eq!(run.marginal(t, l).weights(), ex.m0.weights());
        }
    }
}

#[test]
fn frozen_dynamics_keep_the_product_law() {
    let g = frozen_zero_cost();
    let m0 = ProbabilityVector::new(vec![r(1, 3), r(2, 3)]).unwrap();
    let phi = RestrictedStrategy::constant(2, 2, 1);
    let run = exact_joint_propagate(&g, &[phi.clone(), phi.clone(), phi], None, &m0, 4096).unwrap();
    for law in &run.laws {
        assert_eq!(law, &run.laws[0]);
    }
    assert_eq!(run.laws[0][0], r(1, 27));
    assert_eq!(run.laws[0][7], r(8, 27));
    assert!(run.costs.iter().all(|c| *c == r(0, 1)));
}

#[test]
fn joint_cap_and_bad_player() {
    let ex = base();
    let v = vec![ex.strategies.zero.clone(); 13];
    let err = exact_joint_propagate(&ex.game, &v, None, &ex.m0, 4096).unwrap_err();
    assert!(err.is_capacity());
    let v = vec![ex.strategies.zero.clone(); 2];
    let err = exact_joint_propagate(&ex.game, &v, Some((2, &ex.strategies.plus)), &ex.m0, 4096);
    assert!(err.is_err() && !err.unwrap_err().is_capacity());
}

#[test]
fn duel_costs_match_oracle_for_all_pairs() {
    let ex = base();
    let (c0, c1) = (&ex.params.c0, &ex.params.c1);
    let all = ex.game.strategies(4096).unwrap();
    for me in &all {
        for other in [&ex.strategies.plus, &ex.strategies.zero, &ex.strategies.hat_minus] {
            let run = exact_joint_propagate(&ex.game, &[me.clone(), other.clone()], None, &ex.m0, 4096)
                .unwrap();
            assert_eq!(run.costs[0], duel_oracle(c0, c1, me, other), "{me} against {other}");
            assert_eq!(run.costs[1], duel_oracle(c0, c1, other, me));
        }
    }
}

#[test]
fn single_atom_cost_is_the_propagated_cost() {
    let ex = base();
    let v = vec![ex.strategies.zero.clone(), ex.strategies.zero.clone()];
    let gamma = CorrelatedProfile::Explicit(ExplicitProfile::dirac(v.clone()).unwrap());
    let run = exact_joint_propagate(&ex.game, &v, None, &ex.m0, 4096).unwrap();
    let j = profile_cost_exact(&ex.game, &gamma, 0, &DeviationMap::identity(), &ex.m0, &caps()).unwrap();
    assert_eq!(j, run.costs[0]);
    let u = DeviationMap::identity().with(ex.strategies.zero.clone(), ex.strategies.plus.clone());
    let j = profile_cost_exact(&ex.game, &gamma, 1, &u, &ex.m0, &caps()).unwrap();
    assert_eq!(j, duel_oracle(&ex.params.c0, &ex.params.c1, &ex.strategies.plus, &ex.strategies.zero));
}

#[test]
fn zero_cost_game_has_zero_costs_and_gains() {
    let g = frozen_zero_cost();
    let m0 = ProbabilityVector::uniform(2);
    let a = RestrictedStrategy::constant(2, 2, 0);
    let b = RestrictedStrategy::constant(2, 2, 1);
    let gamma = CorrelatedProfile::Explicit(
        ExplicitProfile::new(2, vec![(vec![a.clone(), b.clone()], r(1, 3)), (vec![b, a], r(2, 3))]).unwrap(),
    );
    let rep = deviation_gain_exact(&g, &gamma, 0, &m0, &caps()).unwrap();
    assert_eq!(rep.epsilon, r(0, 1));
    let cfg = SimulationConfig::new(3, 500).unwrap();
    let est = mc_profile_cost(&g, &gamma, 0, &DeviationMap::identity(), &m0, &cfg).unwrap();
    assert_eq!((est.estimate, est.stderr), (0.0, 0.0));
    let sys = ce_constraints(&g, 2, &m0, &caps()).unwrap();
    let incentive = &sys.lp.constraints[..sys.lp.constraints.len() - 1];
    assert!(incentive.iter().all(|c| c.coefs.iter().all(|v| *v == r(0, 1))));
    let ce = solve_symmetric_ce(&g, 2, &m0, false, &caps()).unwrap();
    assert!(ce.is_symmetric());
}

#[test]
fn deviation_gain_of_pure_plus_profile_matches_oracle() {
    let ex = base();
    let (c0, c1) = (&ex.params.c0, &ex.params.c1);
    let plus = ex.strategies.plus.clone();
    let gamma = CorrelatedProfile::Explicit(ExplicitProfile::dirac(vec![plus.clone(), plus.clone()]).unwrap());
    let rep = deviation_gain_exact(&ex.game, &gamma, 0, &ex.m0, &caps()).unwrap();
    let all = ex.game.strategies(4096).unwrap();
    let costs: Vec<Rational> = all.iter().map(|psi| duel_oracle(c0, c1, psi, &plus)).collect();
    let best = costs.iter().min().unwrap().clone();
    let own = duel_oracle(c0, c1, &plus, &plus);
    assert_eq!(rep.entries.len(), 1);
    assert_eq!(rep.entries[0].cost, own);
    assert_eq!(rep.entries[0].best_value, best);
    assert_eq!(rep.epsilon, own - best);
    assert!(rep.epsilon >= r(0, 1));
}

#[test]
fn lifted_example_profile() {
    let ex = build_example(&ExampleParams::symmetric(r(1, 32), r(1, 16))).unwrap();
    let gamma = lift(&ex.rho, 2).unwrap().expand(4096).unwrap();
    let plus = &ex.strategies.plus;
    let w = gamma
        .atoms()
        .iter()
        .find(|(v, _)| v[0] == *plus && v[1] == *plus)
        .map(|(_, w)| w.clone())
        .unwrap();
    assert_eq!(w, r(1, 16));
    assert!(gamma.is_symmetric());
    let total: Rational = gamma.atoms().iter().map(|(_, w)| w.clone()).sum();
    assert_eq!(total, r(1, 1));
}

#[test]
fn ce_system_counts() {
    let ex = base();
    let sys = ce_constraints(&ex.game, 2, &ex.m0, &caps()).unwrap();
    assert_eq!(sys.lp.n_vars(), 256);
    assert_eq!(sys.lp.constraints.len(), 480 + 1);

    let states = FiniteSpace::new(["a", "b"]).unwrap();
    let actions = FiniteSpace::new(["0", "1"]).unwrap();
    let tr = ThresholdTransition::from_fn(1, 2, 2, |_, _, a| {
        AffineSimplexMap::constant(vec![r(1 + a as i64, 3), r(2 - a as i64, 3)])
    })
    .unwrap();
    let cost = AffineCost::from_fn(1, 2, 2, |_, x, a| (r((x + a) as i64, 1), vec![r(0, 1); 2]), |_| {
        (r(0, 1), vec![r(1, 1), r(-1, 1)])
    })
    .unwrap();
    let g = GameSpec::new(1, states, actions, tr, cost).unwrap();
    let sys = ce_constraints(&g, 2, &ProbabilityVector::uniform(2), &caps()).unwrap();
    assert_eq!(sys.lp.n_vars(), 16);
    assert_eq!(sys.lp.constraints.len(), 24 + 1);
    let sym = symmetric_ce_constraints(&ex.game, 2, &ex.m0, false, &caps()).unwrap();
    assert_eq!(sym.lp.n_vars(), 136);
}

/// Deviation gain of every player, checked against direct enumeration of all deviations.
fn assert_exact_equilibrium(game: &GameSpec<Rational>, gamma: &ExplicitProfile<Rational>, m0: &ProbabilityVector<Rational>) {
    let all = game.strategies(4096).unwrap();
    let profile = CorrelatedProfile::Explicit(gamma.clone());
    for i in 0..gamma.n_players() {
        let rep = deviation_gain_exact(game, &profile, i, m0, &caps()).unwrap();
        assert_eq!(rep.epsilon, r(0, 1), "player {i}");
        for (rec, _) in gamma.marginal(i) {
            let cost_of = |psi: &RestrictedStrategy| -> Rational {
                gamma
                    .atoms()
                    .iter()
                    .filter(|(v, _)| v[i] == rec)
                    .map(|(v, w)| {
                        let run = exact_joint_propagate(game, v, Some((i, psi)), m0, 4096).unwrap();
                        w.clone() * &run.costs[i]
                    })
                    .sum()
            };
            let own = cost_of(&rec);
            for psi in &all {
                assert!(cost_of(psi) >= own, "player {i} gains by {rec} -> {psi}");
            }
        }
    }
}

#[test]
fn symmetric_ce_of_the_example_has_no_profitable_deviation() {
    let ex = base();
    let gamma = solve_symmetric_ce(&ex.game, 2, &ex.m0, false, &caps()).unwrap();
    assert!(gamma.is_symmetric());
    assert_exact_equilibrium(&ex.game, &gamma, &ex.m0);
    let cheapest = solve_symmetric_ce(&ex.game, 2, &ex.m0, true, &caps()).unwrap();
    assert!(cheapest.is_symmetric());
    assert_exact_equilibrium(&ex.game, &cheapest, &ex.m0);
}

#[test]
fn symmetrized_full_ce_keeps_zero_gain() {
    let g = random_game(11, 1, 2, 2, true).unwrap();
    let m0 = random_initial_law(12, 2);
    let sys = ce_constraints(&g, 2, &m0, &caps()).unwrap();
    let x = match sys.lp.solve().unwrap() {
        LpOutcome::Optimal { x, .. } => x,
        other => panic!("{other:?}"),
    };
    assert!(sys.lp.is_feasible(&x));
    let atoms = x
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > r(0, 1))
        .map(|(idx, w)| {
            let phi = sys.payoffs.profile(idx).into_iter().map(|j| sys.payoffs.candidates[j].clone()).collect();
            (phi, w.clone())
        })
        .collect();
    let gamma = ExplicitProfile::new(2, atoms).unwrap();
    assert_exact_equilibrium(&g, &gamma, &m0);
    let sym = symmetrize(&gamma, 4096).unwrap();
    assert!(sym.is_symmetric());
    assert_exact_equilibrium(&g, &sym, &m0);
    assert_eq!(symmetrize(&sym, 4096).unwrap(), sym);
}

#[test]
fn symmetrize_splits_a_pure_profile() {
    let ex = base();
    let (a, b) = (ex.strategies.plus.clone(), ex.strategies.zero.clone());
    let sym = symmetrize(&ExplicitProfile::dirac(vec![a.clone(), b.clone()]).unwrap(), 100).unwrap();
    let expected = ExplicitProfile::new(2, vec![(vec![a.clone(), b.clone()], r(1, 2)), (vec![b, a], r(1, 2))]).unwrap();
    assert_eq!(sym, expected);
}

#[test]
fn exchangeability_of_symmetrized_three_player_profile() {
    let ex = base();
    let (p, o) = (ex.strategies.plus.clone(), ex.strategies.zero.clone());
    let gamma = symmetrize(&ExplicitProfile::dirac(vec![p.clone(), o.clone(), o.clone()]).unwrap(), 100).unwrap();
    for t in [1, 2] {
        let rep = exchangeability_check(&ex.game, &gamma, &ex.m0, t, &caps()).unwrap();
        assert!(rep.passed, "t = {t}: {:?}", rep.first_failure);
        assert_eq!(rep.checked, 4);
    }
    let asym = ExplicitProfile::dirac(vec![p, o]).unwrap();
    assert!(exchangeability_check(&ex.game, &asym, &ex.m0, 1, &caps()).is_err());

    let g = frozen_zero_cost();
    let a = RestrictedStrategy::constant(2, 2, 0);
    let gamma = ExplicitProfile::dirac(vec![a.clone(), a]).unwrap();
    let m0 = ProbabilityVector::new(vec![r(1, 5), r(4, 5)]).unwrap();
    assert!(exchangeability_check(&g, &gamma, &m0, 2, &caps()).unwrap().passed);
}

#[test]
fn monte_carlo_matches_exact_cost_of_do_nothing_pair() {
    let ex = base();
    let zero = ex.strategies.zero.clone();
    let gamma = CorrelatedProfile::Explicit(ExplicitProfile::dirac(vec![zero.clone(), zero]).unwrap());
    let exact = profile_cost_exact(&ex.game, &gamma, 0, &DeviationMap::identity(), &ex.m0, &caps()).unwrap();
    let cfg = SimulationConfig::new(2024, 100_000).unwrap();
    let est = mc_profile_cost(&ex.game, &gamma, 0, &DeviationMap::identity(), &ex.m0, &cfg).unwrap();
    assert!((est.estimate - exact.to_f64()).abs() <= 3.0 * est.stderr, "{est:?} vs {exact}");
}

#[test]
fn monte_carlo_is_reproducible_across_thread_counts() {
    let ex = base();
    let gamma = lift(&ex.rho, 4).unwrap();
    let one = SimulationConfig::new(99, 3000).unwrap().with_threads(1);
    let four = one.with_threads(4);
    let u = DeviationMap::identity();
    let a = mc_profile_cost(&ex.game, &gamma, 1, &u, &ex.m0, &one).unwrap();
    let b = mc_profile_cost(&ex.game, &gamma, 1, &u, &ex.m0, &four).unwrap();
    let c = mc_profile_cost(&ex.game, &gamma, 1, &u, &ex.m0, &SimulationConfig::new(99, 3000).unwrap()).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.stderr.to_bits(), c.stderr.to_bits());
    let ga = deviation_gain_mc(&ex.game, &gamma, 0, &ex.m0, &one, &caps()).unwrap();
    let gb = deviation_gain_mc(&ex.game, &gamma, 0, &ex.m0, &four, &caps()).unwrap();
    assert_eq!(ga, gb);
}

#[test]
fn monte_carlo_gain_agrees_with_exact_gain_on_measure_dependent_game() {
    let g = random_game(5, 2, 2, 2, true).unwrap();
    let m0 = random_initial_law(6, 2);
    let all = g.strategies(4096).unwrap();
    let gamma = CorrelatedProfile::Explicit(
        ExplicitProfile::new(
            2,
            vec![(vec![all[3].clone(), all[9].clone()], r(1, 2)), (vec![all[9].clone(), all[3].clone()], r(1, 2))],
        )
        .unwrap(),
    );
    let exact = deviation_gain_exact(&g, &gamma, 0, &m0, &caps()).unwrap();
    let cfg = SimulationConfig::new(1, 100_000).unwrap();
    let mc = deviation_gain_mc(&g, &gamma, 0, &m0, &cfg, &caps()).unwrap();
    let se = mc.stderr.unwrap();
    assert!(exact.epsilon > r(0, 1));
    assert!((mc.epsilon - exact.epsilon.to_f64()).abs() <= 4.0 * se + 1e-9, "{} vs {}", mc.epsilon, exact.epsilon);
    for (e, m) in exact.entries.iter().zip(&mc.entries) {
        assert_eq!(e.recommendation, m.recommendation);
    }
}

#[test]
fn replication_seeds_are_distinct() {
    let seeds: std::collections::BTreeSet<u64> = (0..10_000).map(|k| replication_seed(7, k)).collect();
    assert_eq!(seeds.len(), 10_000);
    assert!(SimulationConfig::new(1, 0).is_err());
}
