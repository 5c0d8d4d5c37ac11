//! JSON formats for games, correlated flows and N-player profiles.
//!
//! Numbers are JSON numbers or strings such as `"3/8"`. Exact documents accept
//! only integers and strings; writers emit `"p/q"` strings in exact mode and
//! plain numbers in float mode.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::mean_field::{CorrelatedFlow, FlowAtom, FlowFactorization};
use crate::model::{
    AffineCost, AffineSimplexMap, FiniteSpace, FlowTrajectory, GameSpec, ProbabilityVector,
    RestrictedStrategy, ThresholdTransition,
};
use crate::n_player::{CorrelatedProfile, ExplicitProfile, FactoredProfile};
use crate::scalar::{format_rational, parse_rational, Arithmetic, Rational, Scalar};

fn scalar<S: Scalar>(v: &Value, what: &str) -> Result<S> {
    match v {
        Value::String(s) => Ok(S::from_rational(&parse_rational(s)?)),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                return Ok(S::from_rational(&Rational::from_integer(BigInt::from(i))));
            }
            if let Some(u) = n.as_u64() {
                return Ok(S::from_rational(&Rational::from_integer(BigInt::from(u))));
            }
            if S::ARITHMETIC == Arithmetic::Exact {
                return Err(Error::Parse(format!(
                    "{what}: exact mode needs integers or \"p/q\" strings, got {n}"
                )));
            }
            let f = n.as_f64().ok_or_else(|| Error::Parse(format!("{what}: bad number {n}")))?;
            Rational::from_float(f)
                .map(|r| S::from_rational(&r))
                .ok_or_else(|| Error::Parse(format!("{what}: {f} is not finite")))
        }
        other => Err(Error::Parse(format!("{what}: expected a number, got {other}"))),
    }
}

fn scalars<S: Scalar>(vs: &[Value], what: &str) -> Result<Vec<S>> {
    vs.iter().map(|v| scalar(v, what)).collect()
}

fn to_value<S: Scalar>(x: &S) -> Value {
    match S::ARITHMETIC {
        Arithmetic::Exact => Value::String(format_rational(&x.to_rational())),
        Arithmetic::Float => serde_json::Number::from_f64(x.to_f64())
            .map(Value::Number)
            .unwrap_or(Value::Null),
    }
}

fn to_values<S: Scalar>(xs: &[S]) -> Vec<Value> {
    xs.iter().map(to_value).collect()
}

/// `[t][x][a][y]` probabilities.
type Rows = Vec<Vec<Vec<Vec<Value>>>>;

#[derive(Serialize, Deserialize)]
struct TransitionFile {
    base: Rows,
    /// `[t][x][a][y]` coefficients on each `m(z)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coef: Option<Vec<Rows>>,
}

#[derive(Serialize, Deserialize)]
struct CostFile {
    running_base: Vec<Vec<Vec<Value>>>,
    running_coef: Vec<Vec<Vec<Vec<Value>>>>,
    terminal_base: Vec<Value>,
    terminal_coef: Vec<Vec<Value>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    horizon: usize,
    states: Vec<String>,
    actions: Vec<String>,
    transition: TransitionFile,
    cost: CostFile,
    #[serde(default)]
    arithmetic: Option<Arithmetic>,
}

/// A game in the arithmetic its file asked for.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyGame {
    Exact(GameSpec<Rational>),
    Float(GameSpec<f64>),
}

impl AnyGame {
    pub fn arithmetic(&self) -> Arithmetic {
        match self {
            AnyGame::Exact(_) => Arithmetic::Exact,
            AnyGame::Float(_) => Arithmetic::Float,
        }
    }
}

fn shape_error(what: &str) -> Error {
    Error::Parse(format!("{what} does not match the declared dimensions"))
}

fn check_len<T>(v: &[T], n: usize, what: &str) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(shape_error(what))
    }
}

fn build_game<S: Scalar>(f: &GameFile) -> Result<GameSpec<S>> {
    let (h, d, k) = (f.horizon, f.states.len(), f.actions.len());
    let states = FiniteSpace::new(f.states.iter().cloned())?;
    let actions = FiniteSpace::new(f.actions.iter().cloned())?;
    check_len(&f.transition.base, h, "transition.base")?;
    if let Some(c) = &f.transition.coef {
        check_len(c, h, "transition.coef")?;
    }
    let mut rows = Vec::with_capacity(h * d * k);
    for t in 0..h {
        check_len(&f.transition.base[t], d, "transition.base")?;
        for x in 0..d {
            check_len(&f.transition.base[t][x], k, "transition.base")?;
            for a in 0..k {
                let base: Vec<S> = scalars(&f.transition.base[t][x][a], "transition.base")?;
                check_len(&base, d, "transition.base")?;
                let row = match &f.transition.coef {
                    None => AffineSimplexMap::constant(base),
                    Some(c) => {
                        let c = c[t].get(x).and_then(|r| r.get(a)).ok_or_else(|| shape_error("transition.coef"))?;
                        let coef = c
                            .iter()
                            .map(|r| scalars(r, "transition.coef"))
                            .collect::<Result<Vec<Vec<S>>>>()?;
                        AffineSimplexMap::new(base, coef)?
                    }
                };
                rows.push(row);
            }
        }
    }
    let transition = ThresholdTransition::new(h, d, k, rows)?;
    let c = &f.cost;
    check_len(&c.running_base, h, "cost.running_base")?;
    check_len(&c.running_coef, h, "cost.running_coef")?;
    let mut rb = Vec::new();
    let mut rc = Vec::new();
    for t in 0..h {
        check_len(&c.running_base[t], d, "cost.running_base")?;
        check_len(&c.running_coef[t], d, "cost.running_coef")?;
        for x in 0..d {
            check_len(&c.running_base[t][x], k, "cost.running_base")?;
            check_len(&c.running_coef[t][x], k, "cost.running_coef")?;
            rb.extend(scalars::<S>(&c.running_base[t][x], "cost.running_base")?);
            for a in 0..k {
                rc.push(scalars::<S>(&c.running_coef[t][x][a], "cost.running_coef")?);
            }
        }
    }
    let tb = scalars(&c.terminal_base, "cost.terminal_base")?;
    let tc = c
        .terminal_coef
        .iter()
        .map(|r| scalars(r, "cost.terminal_coef"))
        .collect::<Result<Vec<Vec<S>>>>()?;
    let cost = AffineCost::new(h, d, k, rb, rc, tb, tc)?;
    GameSpec::new(h, states, actions, transition, cost)
}

/// Reads a game. `mode` overrides the file's `arithmetic` field, which defaults to exact.
pub fn parse_game(json: &str, mode: Option<Arithmetic>) -> Result<AnyGame> {
    let file: GameFile = serde_json::from_str(json)?;
    match mode.or(file.arithmetic).unwrap_or(Arithmetic::Exact) {
        Arithmetic::Exact => Ok(AnyGame::Exact(build_game(&file)?)),
        Arithmetic::Float => Ok(AnyGame::Float(build_game(&file)?)),
    }
}

pub fn game_to_json<S: Scalar>(game: &GameSpec<S>) -> Value {
    let (h, d, k) = (game.horizon(), game.n_states(), game.n_actions());
    let tr = game.transition();
    let cost = game.cost();
    fn grid<T>(h: usize, d: usize, k: usize, f: impl Fn(usize, usize, usize) -> T) -> Vec<Vec<Vec<T>>> {
        (0..h)
            .map(|t| (0..d).map(|x| (0..k).map(|a| f(t, x, a)).collect()).collect())
            .collect()
    }
    let file = GameFile {
        horizon: h,
        states: game.states().labels().to_vec(),
        actions: game.actions().labels().to_vec(),
        transition: TransitionFile {
            base: grid(h, d, k, |t, x, a| to_values(tr.row(t, x, a).base())),
            coef: Some(grid(h, d, k, |t, x, a| {
                tr.row(t, x, a).coef().iter().map(|r| to_values(r)).collect()
            })),
        },
        cost: CostFile {
            running_base: grid(h, d, k, |t, x, a| to_value(cost.running_base(t, x, a))),
            running_coef: grid(h, d, k, |t, x, a| to_values(cost.running_coef(t, x, a))),
            terminal_base: (0..d).map(|x| to_value(cost.terminal_base(x))).collect(),
            terminal_coef: (0..d).map(|x| to_values(cost.terminal_coef(x))).collect(),
        },
        arithmetic: Some(S::ARITHMETIC),
    };
    serde_json::to_value(file).expect("game serializes")
}

fn parse_strategy<S: Scalar>(game: &GameSpec<S>, table: &[Vec<Value>]) -> Result<RestrictedStrategy> {
    if table.len() != game.horizon() || table.iter().any(|r| r.len() != game.n_states()) {
        return Err(Error::Parse(format!(
            "strategy tables must be {} x {}",
            game.horizon(),
            game.n_states()
        )));
    }
    let mut cells = Vec::with_capacity(game.horizon() * game.n_states());
    for v in table.iter().flatten() {
        let label = match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            other => return Err(Error::Parse(format!("bad action label {other}"))),
        };
        cells.push(game.actions().index_of(&label)?);
    }
    RestrictedStrategy::new(game.n_states(), cells)
}

fn strategy_to_json<S: Scalar>(game: &GameSpec<S>, s: &RestrictedStrategy) -> Vec<Vec<Value>> {
    (0..s.horizon())
        .map(|t| {
            (0..s.n_states())
                .map(|x| Value::String(game.actions().label(s.action(t, x)).to_string()))
                .collect()
        })
        .collect()
}

fn parse_flow_table<S: Scalar>(rows: &[Vec<Value>]) -> Result<FlowTrajectory<S>> {
    FlowTrajectory::new(
        rows.iter()
            .map(|r| ProbabilityVector::new(scalars(r, "flow")?))
            .collect::<Result<_>>()?,
    )
}

fn flow_table<S: Scalar>(flow: &FlowTrajectory<S>) -> Vec<Vec<Value>> {
    flow.measures().iter().map(|m| to_values(m.weights())).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowAtomFile {
    weight: Value,
    strategy: Vec<Vec<Value>>,
    flow: Vec<Vec<Value>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowFile {
    atoms: Vec<FlowAtomFile>,
}

/// Reads a correlated flow for `game`; shapes are checked against the game.
pub fn parse_flow<S: Scalar>(json: &str, game: &GameSpec<S>) -> Result<CorrelatedFlow<S>> {
    let file: FlowFile = serde_json::from_str(json)?;
    let atoms = file
        .atoms
        .iter()
        .map(|a| {
            Ok(FlowAtom {
                strategy: parse_strategy(game, &a.strategy)?,
                flow: parse_flow_table(&a.flow)?,
                weight: scalar(&a.weight, "weight")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = CorrelatedFlow::new(atoms)?;
    if rho.horizon() != game.horizon()
        || rho.atoms().iter().any(|a| a.flow.at(0).len() != game.n_states())
    {
        return Err(Error::Parse("flow shapes do not match the game".into()));
    }
    Ok(rho)
}

pub fn flow_to_json<S: Scalar>(game: &GameSpec<S>, rho: &CorrelatedFlow<S>) -> Value {
    let file = FlowFile {
        atoms: rho
            .atoms()
            .iter()
            .map(|a| FlowAtomFile {
                weight: to_value(&a.weight),
                strategy: strategy_to_json(game, &a.strategy),
                flow: flow_table(&a.flow),
            })
            .collect(),
    };
    serde_json::to_value(file).expect("flow serializes")
}

/// The common time-0 measure of every atom.
pub fn initial_law<S: Scalar>(rho: &CorrelatedFlow<S>) -> Result<ProbabilityVector<S>> {
    let first = rho.atoms()[0].flow.at(0).clone();
    if rho.atoms().iter().any(|a| !a.flow.at(0).close_to(&first, crate::mean_field::VERIFY_TOL)) {
        return Err(Error::invalid("atoms disagree on the initial measure"));
    }
    Ok(first)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitAtomFile {
    weight: Value,
    strategies: Vec<Vec<Vec<Value>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightedFlowFile {
    weight: Value,
    flow: Vec<Vec<Value>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionalFile {
    weight: Value,
    strategy: Vec<Vec<Value>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactoredFile {
    n_players: usize,
    flows: Vec<WeightedFlowFile>,
    conditionals: Vec<Vec<ConditionalFile>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProfileFile {
    Explicit(Vec<ExplicitAtomFile>),
    Factored(FactoredFile),
}

pub fn parse_profile<S: Scalar>(json: &str, game: &GameSpec<S>) -> Result<CorrelatedProfile<S>> {
    match serde_json::from_str::<ProfileFile>(json)? {
        ProfileFile::Explicit(atoms) => {
            let n = atoms.first().map_or(0, |a| a.strategies.len());
            let atoms = atoms
                .iter()
                .map(|a| {
                    let v = a
                        .strategies
                        .iter()
                        .map(|s| parse_strategy(game, s))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((v, scalar(&a.weight, "weight")?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CorrelatedProfile::Explicit(ExplicitProfile::new(n, atoms)?))
        }
        ProfileFile::Factored(f) => {
            let flows = f
                .flows
                .iter()
                .map(|w| Ok((parse_flow_table(&w.flow)?, scalar(&w.weight, "weight")?)))
                .collect::<Result<Vec<_>>>()?;
            let conditionals = f
                .conditionals
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|e| Ok((parse_strategy(game, &e.strategy)?, scalar(&e.weight, "weight")?)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CorrelatedProfile::Factored(FactoredProfile::new(
                f.n_players,
                FlowFactorization {
                    flows,
                    conditionals,
                },
            )?))
        }
    }
}

pub fn profile_to_json<S: Scalar>(game: &GameSpec<S>, profile: &CorrelatedProfile<S>) -> Value {
    let file = match profile {
        CorrelatedProfile::Explicit(p) => ProfileFile::Explicit(
            p.atoms()
                .iter()
                .map(|(v, w)| ExplicitAtomFile {
                    weight: to_value(w),
                    strategies: v.iter().map(|s| strategy_to_json(game, s)).collect(),
                })
                .collect(),
        ),
        CorrelatedProfile::Factored(p) => ProfileFile::Factored(FactoredFile {
            n_players: p.n_players,
            flows: p
                .mixture
                .flows
                .iter()
                .map(|(f, w)| WeightedFlowFile {
                    weight: to_value(w),
                    flow: flow_table(f),
                })
                .collect(),
            conditionals: p
                .mixture
                .conditionals
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|(s, w)| ConditionalFile {
                            weight: to_value(w),
                            strategy: strategy_to_json(game, s),
                        })
                        .collect()
                })
                .collect(),
        }),
    };
    serde_json::to_value(file).expect("profile serializes")
}

/// Parses a measure given as a comma-separated list such as `1/2,1/2`.
pub fn parse_measure<S: Scalar>(text: &str) -> Result<ProbabilityVector<S>> {
    let weights = text
        .split(',')
        .map(|s| parse_rational(s).map(|r| S::from_rational(&r)))
        .collect::<Result<Vec<S>>>()?;
    ProbabilityVector::new(weights)
}

/// Exact value as `"p/q"` in exact mode, or as a float literal.
pub fn scalar_to_json<S: Scalar>(x: &S) -> Value {
    to_value(x)
}
