use proptest::prelude::*;

use cmfg_core::example_s5::{build_example, ExampleParams};
use cmfg_core::limits::{flow_space_distance, lift};
use cmfg_core::model::random::{random_game, random_initial_law};
use cmfg_core::n_player::*;
use cmfg_core::scalar::{rational, Rational};
use cmfg_core::{
    correlated_cost, deterministic_cost, dist, dp_best_response, empirical_measure,
    enumerate_strategies, mkv_propagate, optimality_gap_of_atoms, state_law, CorrelatedFlow,
    FlowAtom, FlowFactorization, FlowTrajectory, ProbabilityVector, RestrictedStrategy, Scalar,
};

fn r(n: i64, d: i64) -> Rational {
    rational(n, d)
}

fn measure(raw: &[u8]) -> ProbabilityVector<Rational> {
    let raw: Vec<i64> = raw.iter().map(|&w| i64::from(w)).collect();
    let total: i64 = raw.iter().sum();
    if total == 0 {
        return ProbabilityVector::uniform(raw.len());
    }
    ProbabilityVector::new(raw.iter().map(|&w| r(w, total)).collect()).unwrap()
}

fn raw_measure(d: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..20, d)
}

fn flow_of(raws: &[Vec<u8>]) -> FlowTrajectory<Rational> {
    FlowTrajectory::new(raws.iter().map(|w| measure(w)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dist_is_a_bounded_metric(a in raw_measure(3), b in raw_measure(3), c in raw_measure(3)) {
        let (a, b, c) = (measure(&a), measure(&b), measure(&c));
        let ab = dist(&a, &b).unwrap();
        prop_assert!(ab >= r(0, 1) && ab <= r(1, 1));
        prop_assert_eq!(&ab, &dist(&b, &a).unwrap());
        prop_assert!(ab <= dist(&a, &c).unwrap() + dist(&c, &b).unwrap());
        prop_assert_eq!(dist(&a, &a).unwrap(), r(0, 1));
    }

    #[test]
    fn psi_preimages_have_kernel_length(seed in 0u64..500, t in 0usize..2, x in 0usize..3, a in 0usize..2, m in raw_measure(3)) {
        let g = random_game(seed, 2, 3, 2, true).unwrap();
        let m = measure(&m);
        let k = g.transition_kernel(t, x, &m, a).unwrap();
        let total: Rational = k.weights().iter().cloned().sum();
        prop_assert_eq!(total, r(1, 1));
        prop_assert!(k.weights().iter().all(|w| *w >= r(0, 1)));
        let pre = g.psi_preimages(t, x, &m, a).unwrap();
        for (y, (lo, hi)) in pre.iter().enumerate() {
            prop_assert_eq!(hi.clone() - lo, k.get(y).clone());
            if hi > lo {
                let mid = (lo.clone() + hi) / r(2, 1);
                prop_assert_eq!(g.psi_sample(t, x, &m, a, &mid).unwrap(), y);
                prop_assert_eq!(g.psi_sample(t, x, &m, a, hi).unwrap(), y);
            }
        }
    }

    #[test]
    fn empirical_distance_is_bounded_by_mismatches(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40)) {
        let (xs, ys): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let k = pairs.iter().filter(|(a, b)| a != b).count();
        let d = dist(&empirical_measure::<Rational>(&xs, 3).unwrap(), &empirical_measure(&ys, 3).unwrap()).unwrap();
        prop_assert!(d <= r(k as i64, pairs.len() as i64));
    }

    #[test]
    fn enumeration_is_sorted_without_duplicates(h in 1usize..3, d in 1usize..3, k in 1usize..4) {
        let all = enumerate_strategies(h, d, k, 10_000).unwrap();
        prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(all.len(), k.pow((h * d) as u32));
    }

    #[test]
    fn state_law_conserves_mass(seed in 0u64..500, s in 0usize..64, f in prop::collection::vec(raw_measure(2), 3)) {
        let g = random_game(seed, 2, 2, 2, true).unwrap();
        let m0 = random_initial_law(seed + 1, 2);
        let phi = RestrictedStrategy::from_index(s % 16, 2, 2, 2);
        let law = state_law(&g, &phi, &flow_of(&f), &m0).unwrap();
        for m in law.measures() {
            prop_assert_eq!(m.weights().iter().cloned().sum::<Rational>(), r(1, 1));
        }
    }

    #[test]
    fn correlated_cost_is_affine_in_weights(seed in 0u64..500, f in prop::collection::vec(raw_measure(2), 3), g2 in prop::collection::vec(raw_measure(2), 3), s1 in 0usize..16, s2 in 0usize..16, w in 1i64..8) {
        let g = random_game(seed, 2, 2, 2, true).unwrap();
        let m0 = random_initial_law(seed + 7, 2);
        let (f1, f2) = (flow_of(&f), flow_of(&g2));
        let (p1, p2) = (RestrictedStrategy::from_index(s1, 2, 2, 2), RestrictedStrategy::from_index(s2, 2, 2, 2));
        let atom = |s: &RestrictedStrategy, fl: &FlowTrajectory<Rational>, w: Rational| FlowAtom { strategy: s.clone(), flow: fl.clone(), weight: w };
        let whole = CorrelatedFlow::new(vec![atom(&p1, &f1, r(w, 8)), atom(&p2, &f2, r(8 - w, 8))]).unwrap();
        let split = CorrelatedFlow::new(vec![
            atom(&p1, &f1, r(w, 16)), atom(&p1, &f1, r(w, 16)), atom(&p2, &f2, r(8 - w, 8)),
        ]).unwrap();
        let c = correlated_cost(&g, &whole, &cmfg_core::DeviationMap::identity(), &m0).unwrap();
        prop_assert_eq!(&c, &correlated_cost(&g, &split, &cmfg_core::DeviationMap::identity(), &m0).unwrap());
        let direct = r(w, 8) * deterministic_cost(&g, &p1, &f1, &m0).unwrap()
            + r(8 - w, 8) * deterministic_cost(&g, &p2, &f2, &m0).unwrap();
        prop_assert_eq!(c, direct);
    }

    #[test]
    fn dynamic_programming_matches_enumeration(seed in 0u64..500, f in prop::collection::vec(raw_measure(2), 3)) {
        let g = random_game(seed, 2, 2, 2, true).unwrap();
        let m0 = random_initial_law(seed + 3, 2);
        let flow = flow_of(&f);
        let dp = dp_best_response(&g, &flow).unwrap();
        let best = g.strategies(64).unwrap().iter()
            .map(|phi| deterministic_cost(&g, phi, &flow, &m0).unwrap())
            .min().unwrap();
        prop_assert_eq!(dp.initial_value(&m0), best.clone());
        prop_assert_eq!(deterministic_cost(&g, &dp.strategy, &flow, &m0).unwrap(), best);
    }

    #[test]
    fn gap_is_nonnegative_and_scale_free(seed in 0u64..200, f in prop::collection::vec(raw_measure(2), 3), s1 in 0usize..16, s2 in 0usize..16, scale in 1i64..9) {
        let g = random_game(seed, 2, 2, 2, true).unwrap();
        let m0 = random_initial_law(seed + 5, 2);
        let fl = flow_of(&f);
        let atoms: Vec<FlowAtom<Rational>> = [s1, s2].iter().map(|&s| FlowAtom {
            strategy: RestrictedStrategy::from_index(s, 2, 2, 2), flow: fl.clone(), weight: r(1, 2),
        }).collect();
        let a = optimality_gap_of_atoms(&g, &atoms, &m0, 64).unwrap();
        prop_assert!(a.gap >= r(0, 1));
        let scaled: Vec<FlowAtom<Rational>> = atoms.iter().map(|x| FlowAtom { weight: x.weight.clone() * r(scale, 3), ..x.clone() }).collect();
        let b = optimality_gap_of_atoms(&g, &scaled, &m0, 64).unwrap();
        prop_assert_eq!(a.optimal, b.optimal);
        prop_assert_eq!(a.gap * r(scale, 3), b.gap);
    }

    #[test]
    fn flow_space_distance_is_a_metric(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let make = |rng: &mut rand_chacha::ChaCha8Rng| -> CorrelatedFlow<f64> {
            let n = rng.random_range(1..4);
            let atoms = (0..n).map(|_| {
                let ms = (0..3).map(|_| {
                    let p: f64 = f64::from(rng.random_range(0..=8u8)) / 8.0;
                    ProbabilityVector::new(vec![p, 1.0 - p]).unwrap()
                }).collect();
                FlowAtom {
                    strategy: RestrictedStrategy::from_index(rng.random_range(0..3), 2, 2, 2),
                    flow: FlowTrajectory::new(ms).unwrap(),
                    weight: 1.0 / n as f64,
                }
            }).collect();
            CorrelatedFlow::new(atoms).unwrap()
        };
        let (a, b, c) = (make(&mut rng), make(&mut rng), make(&mut rng));
        let d = |x: &CorrelatedFlow<f64>, y: &CorrelatedFlow<f64>| flow_space_distance(x, y).unwrap().to_f64();
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-9);
        prop_assert!(d(&a, &b) <= d(&a, &c) + d(&c, &b) + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn mkv_reproduces_consistent_flows(alpha in 1i64..8, c0 in 1i64..4, c1 in 1i64..5) {
        let p = ExampleParams::from_alpha(r(alpha, 8), r(c0, 64), r(c1, 64)).unwrap();
        let ex = build_example(&p).unwrap();
        let fac = FlowFactorization::factorize(&ex.rho);
        for ((flow, _), cond) in fac.flows.iter().zip(&fac.conditionals) {
            let sol = mkv_propagate(&ex.game, cond, &ex.m0).unwrap();
            prop_assert_eq!(&sol.flow, flow);
        }
    }

    #[test]
    fn symmetrize_is_idempotent_and_keeps_mass(n in 2usize..4, picks in prop::collection::vec((0usize..16, 1i64..5), 1..4)) {
        let atoms: Vec<(Vec<RestrictedStrategy>, Rational)> = picks.iter().enumerate().map(|(k, &(s, w))| {
            let v = (0..n).map(|l| RestrictedStrategy::from_index((s + k * l) % 16, 2, 2, 2)).collect();
            (v, r(w, 1))
        }).collect();
        let total: Rational = atoms.iter().map(|(_, w)| w.clone()).sum();
        let atoms = atoms.into_iter().map(|(v, w)| (v, w / &total)).collect();
        let gamma = ExplicitProfile::new(n, atoms).unwrap();
        let sym = symmetrize(&gamma, 10_000).unwrap();
        prop_assert!(sym.is_symmetric());
        prop_assert_eq!(sym.atoms().iter().map(|(_, w)| w.clone()).sum::<Rational>(), r(1, 1));
        prop_assert_eq!(symmetrize(&sym, 10_000).unwrap(), sym.clone());
        for i in 1..n {
            prop_assert_eq!(sym.marginal(i), sym.marginal(0));
        }
    }

    #[test]
    fn single_player_marginals_are_probability_vectors(seed in 0u64..300, s in 0usize..16, o in 0usize..16) {
        let g = random_game(seed, 2, 2, 2, true).unwrap();
        let m0 = random_initial_law(seed + 2, 2);
        let (a, b) = (RestrictedStrategy::from_index(s, 2, 2, 2), RestrictedStrategy::from_index(o, 2, 2, 2));
        let gamma = symmetrize(&ExplicitProfile::<Rational>::dirac(vec![a, b.clone(), b]).unwrap(), 100).unwrap();
        for t in 0..=2 {
            let mut law = vec![r(0, 1); 2];
            for (v, w) in gamma.atoms() {
                let run = exact_joint_propagate(&g, v, None, &m0, 4096).unwrap();
                for (x, p) in run.marginal(t, 0).weights().iter().enumerate() {
                    law[x] += w.clone() * p;
                }
            }
            prop_assert!(law.iter().all(|p| *p >= r(0, 1)));
            prop_assert_eq!(law.iter().cloned().sum::<Rational>(), r(1, 1));
        }
    }

    #[test]
    fn coupled_realizations_respect_empirical_distance(seed in 0u64..300, n in 2usize..12, deviators in 0usize..4, noise_seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let g: cmfg_core::GameSpec<f64> = random_game(seed, 2, 3, 2, true).unwrap().convert();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise_seed);
        let x0: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let noise: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
        let base: Vec<RestrictedStrategy> = (0..n).map(|_| RestrictedStrategy::from_index(rng.random_range(0..64), 2, 3, 2)).collect();
        let mut other = base.clone();
        for s in other.iter_mut().take(deviators.min(n)) {
            *s = RestrictedStrategy::from_index(rng.random_range(0..64), 2, 3, 2);
        }
        let a = simulate_realization(&g, &base, &x0, &noise).unwrap();
        let b = simulate_realization(&g, &other, &x0, &noise).unwrap();
        for (xs, ys) in a.iter().zip(&b) {
            let k = xs.iter().zip(ys).filter(|(x, y)| x != y).count();
            let d = dist(&empirical_measure::<f64>(xs, 3).unwrap(), &empirical_measure(ys, 3).unwrap()).unwrap();
            prop_assert!(d <= k as f64 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn lift_marginal_is_strategy_marginal(alpha in 1i64..8, n in 2usize..4) {
        let ex = build_example(&ExampleParams::from_alpha(r(alpha, 8), r(1, 64), r(1, 64)).unwrap()).unwrap();
        let gamma = lift(&ex.rho, n).unwrap().expand(4096).unwrap();
        let marginal = ex.rho.strategy_marginal();
        for i in 0..n {
            prop_assert_eq!(gamma.marginal(i), marginal.clone());
        }
    }
}
