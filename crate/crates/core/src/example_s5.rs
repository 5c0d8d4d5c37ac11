//! The two-state game with a correlated solution whose flow of measures is
//! genuinely random, together with its closed-form value functions.
//!
//! States are ordered `["1", "-1"]` and actions `["0", "1"]`. Action 0 switches
//! the state with probability 1/2, action 1 with probability 1/4. Costs are
//! `c0 * a` at time 0, `c1 * a - x M(m)` at time 1, and `-x M(m)` at the end,
//! where `M(m) = m(1) - m(-1)`.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mean_field::{
    dp_best_response, verify_solution, CorrelatedFlow, DpSolution, FlowAtom, SolutionVerdict,
};
use crate::model::{
    AffineCost, AffineSimplexMap, FiniteSpace, FlowTrajectory, GameSpec, ProbabilityVector,
    RestrictedStrategy, ThresholdTransition, DEFAULT_ENUMERATION_CAP,
};
use crate::scalar::{rational, Rational};

const UP: usize = 0;
const DOWN: usize = 1;

/// Atom weights and cost coefficients of the example.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleParams {
    pub beta: [Rational; 4],
    pub c0: Rational,
    pub c1: Rational,
}

impl ExampleParams {
    pub fn new(beta: [Rational; 4], c0: Rational, c1: Rational) -> Self {
        ExampleParams { beta, c0, c1 }
    }

    /// `beta_1 = beta_2 = alpha/4`, `beta_3 = beta_4 = (1 - alpha)/4`.
    pub fn from_alpha(alpha: Rational, c0: Rational, c1: Rational) -> Result<Self> {
        if alpha <= Rational::zero() || alpha >= Rational::one() {
            return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        let q = rational(1, 4);
        let a = alpha.clone() * &q;
        let b = (Rational::one() - alpha) * &q;
        Ok(ExampleParams {
            beta: [a.clone(), a, b.clone(), b],
            c0,
            c1,
        })
    }

    /// All weights equal to 1/8.
    pub fn symmetric(c0: Rational, c1: Rational) -> Self {
        let e = rational(1, 8);
        ExampleParams {
            beta: [e.clone(), e.clone(), e.clone(), e],
            c0,
            c1,
        }
    }

    /// Positivity, total mass 1/2 and the balance equation that makes both
    /// flows through `m1+` agree at time 1.
    pub fn validate(&self) -> Result<()> {
        if self.beta.iter().any(|b| *b <= Rational::zero()) {
            return Err(Error::invalid("every beta must be positive"));
        }
        if self.c0 <= Rational::zero() || self.c1 <= Rational::zero() {
            return Err(Error::invalid("c0 and c1 must be positive"));
        }
        let total: Rational = self.beta.iter().cloned().sum();
        if total != rational(1, 2) {
            return Err(Error::invalid(format!(
                "betas sum to {total}, the balance condition requires 1/2"
            )));
        }
        let [b1, b2, b3, b4] = &self.beta;
        let left = up_weight_at_1(b1, b2);
        let right = up_weight_at_1(b3, b4);
        if left != right {
            return Err(Error::invalid(format!(
                "balance equation fails: (5b1+4b2)/(8(b1+b2)) = {left} but (5b3+4b4)/(8(b3+b4)) = {right}"
            )));
        }
        Ok(())
    }

    fn s(&self) -> Rational {
        self.beta[0].clone() + &self.beta[1]
    }

    /// `5 beta_1 / (32 (beta_1 + beta_2))`: `phi_+` plays 1 at `(1, 1)` only below it.
    pub fn c1_threshold(&self) -> Rational {
        rational(5, 32) * &self.beta[0] / self.s()
    }

    /// `beta_1 / (8 (beta_1 + beta_2))`: the hatted strategies play 1 at `(0, +-1)` only below it.
    pub fn c0_threshold(&self) -> Rational {
        rational(1, 8) * &self.beta[0] / self.s()
    }
}

fn up_weight_at_1(a: &Rational, b: &Rational) -> Rational {
    (rational(5, 1) * a + rational(4, 1) * b) / (rational(8, 1) * (a.clone() + b))
}

fn pv(up: Rational, down: Rational) -> ProbabilityVector<Rational> {
    ProbabilityVector::new(vec![up, down]).expect("closed-form measure")
}

/// The named strategies of the example.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedStrategies {
    pub plus: RestrictedStrategy,
    pub hat_plus: RestrictedStrategy,
    pub minus: RestrictedStrategy,
    pub hat_minus: RestrictedStrategy,
    pub zero: RestrictedStrategy,
}

impl NamedStrategies {
    pub fn new() -> Self {
        let table = |f: fn(usize, usize) -> usize| RestrictedStrategy::from_fn(2, 2, f);
        NamedStrategies {
            plus: table(|_, x| usize::from(x == UP)),
            hat_plus: table(|t, x| usize::from(x == UP && t == 0)),
            minus: table(|_, x| usize::from(x == DOWN)),
            hat_minus: table(|t, x| usize::from(x == DOWN && t == 0)),
            zero: table(|_, _| 0),
        }
    }

    /// `(name, strategy)` in a fixed presentation order.
    pub fn all(&self) -> [(&'static str, &RestrictedStrategy); 5] {
        [
            ("phi_o", &self.zero),
            ("phi_plus", &self.plus),
            ("phi_hat_plus", &self.hat_plus),
            ("phi_minus", &self.minus),
            ("phi_hat_minus", &self.hat_minus),
        ]
    }
}

impl Default for NamedStrategies {
    fn default() -> Self {
        Self::new()
    }
}

/// The four flows charged by the correlated flow.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFlows {
    pub plus: FlowTrajectory<Rational>,
    pub plus_return: FlowTrajectory<Rational>,
    pub minus: FlowTrajectory<Rational>,
    pub minus_return: FlowTrajectory<Rational>,
}

#[derive(Debug, Clone)]
pub struct Section5 {
    pub params: ExampleParams,
    pub game: GameSpec<Rational>,
    pub rho: CorrelatedFlow<Rational>,
    pub m0: ProbabilityVector<Rational>,
    pub strategies: NamedStrategies,
    pub flows: NamedFlows,
}

/// The game alone; it does not depend on the betas.
pub fn example_game(c0: &Rational, c1: &Rational) -> Result<GameSpec<Rational>> {
    let states = FiniteSpace::new(["1", "-1"])?;
    let actions = FiniteSpace::new(["0", "1"])?;
    let sign = [rational(1, 1), rational(-1, 1)];
    let transition = ThresholdTransition::from_fn(2, 2, 2, |_, x, a| {
        let stay = if a == 0 { rational(1, 2) } else { rational(3, 4) };
        let flip = Rational::one() - &stay;
        let mut base = vec![flip.clone(), flip];
        base[x] = stay;
        AffineSimplexMap::constant(base)
    })?;
    // -x M(m) = sum_y (-x y) m(y)
    let coupling = |x: usize| -> Vec<Rational> {
        sign.iter().map(|y| -(sign[x].clone() * y)).collect()
    };
    let cost = AffineCost::from_fn(
        2,
        2,
        2,
        |t, x, a| {
            let price = if t == 0 { c0.clone() } else { c1.clone() };
            let base = price * Rational::from_integer(a.into());
            let coef = if t == 1 { coupling(x) } else { vec![Rational::zero(); 2] };
            (base, coef)
        },
        |x| (Rational::zero(), coupling(x)),
    )?;
    GameSpec::new(2, states, actions, transition, cost)
}

/// Game, correlated flow and uniform initial law.
pub fn build_example(params: &ExampleParams) -> Result<Section5> {
    params.validate()?;
    let [b1, b2, b3, b4] = params.beta.clone();
    let s = b1.clone() + &b2;
    let m0 = pv(rational(1, 2), rational(1, 2));
    let up1 = up_weight_at_1(&b1, &b2);
    let m1p = pv(up1.clone(), Rational::one() - &up1);
    let m1m = pv(Rational::one() - &up1, up1);
    let up2 = (rational(21, 1) * &b1 + rational(16, 1) * &b2) / (rational(32, 1) * &s);
    let m2p = pv(up2.clone(), Rational::one() - &up2);
    let m2m = pv(Rational::one() - &up2, up2);
    let flow = |ms: [&ProbabilityVector<Rational>; 3]| {
        FlowTrajectory::new(ms.iter().map(|m| (*m).clone()).collect())
    };
    let flows = NamedFlows {
        plus: flow([&m0, &m1p, &m2p])?,
        plus_return: flow([&m0, &m1p, &m0])?,
        minus: flow([&m0, &m1m, &m2m])?,
        minus_return: flow([&m0, &m1m, &m0])?,
    };
    let st = NamedStrategies::new();
    let atom = |strategy: &RestrictedStrategy, flow: &FlowTrajectory<Rational>, weight: &Rational| {
        FlowAtom {
            strategy: strategy.clone(),
            flow: flow.clone(),
            weight: weight.clone(),
        }
    };
    let rho = CorrelatedFlow::new(vec![
        atom(&st.plus, &flows.plus, &b1),
        atom(&st.zero, &flows.plus, &b2),
        atom(&st.hat_plus, &flows.plus_return, &b3),
        atom(&st.zero, &flows.plus_return, &b4),
        atom(&st.minus, &flows.minus, &b1),
        atom(&st.zero, &flows.minus, &b2),
        atom(&st.hat_minus, &flows.minus_return, &b3),
        atom(&st.zero, &flows.minus_return, &b4),
    ])?;
    Ok(Section5 {
        game: example_game(&params.c0, &params.c1)?,
        params: params.clone(),
        rho,
        m0,
        strategies: st,
        flows,
    })
}

/// Closed-form value tables `V(t, x)` with rows `t = 0, 1, 2` and columns in state order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForms {
    pub v_plus: Vec<Vec<Rational>>,
    pub v_hat_plus: Vec<Vec<Rational>>,
}

fn min2(a: Rational, b: Rational) -> Rational {
    if b < a {
        b
    } else {
        a
    }
}

/// The value functions of the representative player told to play `phi_+`
/// or `phi_hat_+`, evaluated from their explicit formulas.
pub fn closed_forms(p: &ExampleParams) -> ClosedForms {
    let s = p.s();
    let b1 = p.beta[0].clone();
    let q = b1.clone() / (rational(4, 1) * &s);
    let r = rational(5, 32) * &b1 / &s;
    let (c0, c1) = (p.c0.clone(), p.c1.clone());
    let half = rational(1, 2);
    let (three_q, one_q) = (rational(3, 4), rational(1, 4));
    let time0 = |v_up: &Rational, v_down: &Rational| {
        vec![
            min2(
                half.clone() * v_up + half.clone() * v_down,
                c0.clone() + three_q.clone() * v_up + one_q.clone() * v_down,
            ),
            min2(
                half.clone() * v_up + half.clone() * v_down,
                c0.clone() + one_q.clone() * v_up + three_q.clone() * v_down,
            ),
        ]
    };

    let v2 = vec![-(rational(2, 1) * &r), rational(2, 1) * &r];
    let v1 = vec![
        min2(-q.clone(), c1.clone() - &q - &r),
        min2(q.clone(), c1.clone() + &q + &r),
    ];
    let v0 = time0(&v1[UP], &v1[DOWN]);

    let w2 = vec![Rational::zero(), Rational::zero()];
    let w1 = vec![
        min2(-q.clone(), c1.clone() - &q),
        min2(q.clone(), c1.clone() + &q),
    ];
    let w0 = time0(&w1[UP], &w1[DOWN]);
    ClosedForms {
        v_plus: vec![v0, v1, v2],
        v_hat_plus: vec![w0, w1, w2],
    }
}

/// Outcome of [`verify_example`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleStatus {
    Solution,
    NotSolution,
    /// A cost coefficient sits exactly on a threshold.
    BoundaryTie,
}

#[derive(Debug, Clone)]
pub struct ExampleVerdict {
    pub status: ExampleStatus,
    pub verdict: SolutionVerdict<Rational>,
    pub v_plus: DpSolution<Rational>,
    pub v_hat_plus: DpSolution<Rational>,
    pub closed_forms: ClosedForms,
    pub closed_forms_match: bool,
    pub c1_threshold: Rational,
    pub c0_threshold: Rational,
    /// `threshold - c`; positive strictly inside the solution region.
    pub c1_margin: Rational,
    pub c0_margin: Rational,
}

/// Exact verification plus the dynamic-programming cross-check.
pub fn verify_example(p: &ExampleParams) -> Result<ExampleVerdict> {
    let ex = build_example(p)?;
    let verdict = verify_solution(&ex.game, &ex.rho, &ex.m0, DEFAULT_ENUMERATION_CAP)?;
    let v_plus = dp_best_response(&ex.game, &ex.flows.plus)?;
    let v_hat_plus = dp_best_response(&ex.game, &ex.flows.plus_return)?;
    let forms = closed_forms(p);
    let closed_forms_match = v_plus.values == forms.v_plus && v_hat_plus.values == forms.v_hat_plus;
    let c1_threshold = p.c1_threshold();
    let c0_threshold = p.c0_threshold();
    let c1_margin = c1_threshold.clone() - &p.c1;
    let c0_margin = c0_threshold.clone() - &p.c0;
    let status = if c1_margin.is_zero() || c0_margin.is_zero() {
        ExampleStatus::BoundaryTie
    } else if verdict.solution {
        ExampleStatus::Solution
    } else {
        ExampleStatus::NotSolution
    };
    Ok(ExampleVerdict {
        status,
        verdict,
        v_plus,
        v_hat_plus,
        closed_forms: forms,
        closed_forms_match,
        c1_threshold,
        c0_threshold,
        c1_margin,
        c0_margin,
    })
}

/// Conditional law of the flow given the recommendation `phi_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationWitness {
    pub conditional: Vec<(FlowTrajectory<Rational>, Rational)>,
    /// The weights `beta_2 / (2 (beta_2 + beta_4))` and `beta_4 / (2 (beta_2 + beta_4))`
    /// matched against `conditional`.
    pub matches_formula: bool,
    /// At least two flows remain possible after the recommendation.
    pub nontrivial: bool,
}

pub fn nontrivial_correlation_witness(p: &ExampleParams) -> Result<CorrelationWitness> {
    let b2 = p.beta[1].clone();
    let b4 = p.beta[3].clone();
    let z = b2.clone() + &b4;
    if z.is_zero() {
        return Err(Error::invalid(
            "degenerate input: the recommendation phi_o has zero probability",
        ));
    }
    let ex = build_example(p)?;
    let phi = &ex.strategies.zero;
    let mass: Rational = ex
        .rho
        .atoms()
        .iter()
        .filter(|a| &a.strategy == phi)
        .map(|a| a.weight.clone())
        .sum();
    let conditional: Vec<(FlowTrajectory<Rational>, Rational)> = ex
        .rho
        .atoms()
        .iter()
        .filter(|a| &a.strategy == phi)
        .map(|a| (a.flow.clone(), a.weight.clone() / &mass))
        .collect();
    let two = rational(2, 1);
    let through = b2 / (two.clone() * &z);
    let back = b4 / (two * &z);
    let expected = [
        (&ex.flows.plus, &through),
        (&ex.flows.plus_return, &back),
        (&ex.flows.minus, &through),
        (&ex.flows.minus_return, &back),
    ];
    let matches_formula = conditional.len() == expected.len()
        && expected.iter().all(|(f, w)| {
            conditional
                .iter()
                .any(|(g, v)| g == *f && v == *w)
        });
    Ok(CorrelationWitness {
        nontrivial: conditional.len() >= 2,
        conditional,
        matches_formula,
    })
}
