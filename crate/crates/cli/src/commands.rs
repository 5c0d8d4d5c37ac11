//! Command implementations. Each one loads its inputs through [`Outputs`] so the
//! manifest sees them, and writes its artifacts through it as well.

use std::path::Path;

use cmfg_core::example_s5::{
    build_example, nontrivial_correlation_witness, verify_example, ExampleParams, ExampleStatus,
};
use cmfg_core::io::{
    flow_to_json, game_to_json, initial_law, parse_flow, parse_game, parse_measure, parse_profile,
    profile_to_json, scalar_to_json, AnyGame,
};
use cmfg_core::limits::{convergence_report, epsilon_curve, gain_method, lift, GainMethod};
use cmfg_core::n_player::{
    deviation_gain_exact, deviation_gain_mc, solve_symmetric_ce, symmetric_ce_constraints, Caps,
    CorrelatedProfile, DeviationReport, SimulationConfig,
};
use cmfg_core::scalar::{format_f64, format_rational, parse_rational};
use cmfg_core::{
    best_response, dist, dp_best_response, mkv_propagate, validate_game, verify_solution,
    Arithmetic, CorrelatedFlow, Error, FlowFactorization, FlowTrajectory, GameSpec,
    ProbabilityVector, Rational, Result, Scalar,
};
use serde_json::{json, Value};

use crate::output::Outputs;
use crate::{
    Cli, Command, CurveArgs, ExampleCommand, FlowArgs, LimitsCommand, Method, MfgCommand,
    NplayerCommand, Section5Args, Status,
};

macro_rules! dispatch {
    ($game:expr, |$g:ident| $body:expr) => {
        match $game {
            AnyGame::Exact($g) => $body,
            AnyGame::Float($g) => $body,
        }
    };
}

pub fn run(cli: &Cli, out: &mut Outputs) -> Result<Status> {
    let caps = cli.common.caps();
    let seed = cli.common.seed;
    let mode = cli.common.arithmetic;
    match &cli.command {
        Command::Validate { game } => {
            let g = load_game(out, game, mode)?;
            dispatch!(g, |g| validate(out, &g))
        }
        Command::Mfg(cmd) => {
            let args = match cmd {
                MfgCommand::Verify(a) | MfgCommand::BestResponse(a) | MfgCommand::Propagate(a) => a,
            };
            let g = load_game(out, &args.game, mode)?;
            dispatch!(g, |g| {
                let (rho, m0) = load_flow(out, &g, args)?;
                match cmd {
                    MfgCommand::Verify(_) => verify(out, &g, &rho, &m0, &caps),
                    MfgCommand::BestResponse(_) => best_responses(out, &g, &rho, &m0, &caps),
                    MfgCommand::Propagate(_) => propagate(out, &g, &rho, &m0),
                }
            })
        }
        Command::Example(ExampleCommand::Section5(args)) => section5(out, args),
        Command::Nplayer(NplayerCommand::SolveCe {
            game,
            n,
            m0,
            min_cost,
            dump_lp,
        }) => {
            let g = load_game(out, game, mode)?;
            dispatch!(g, |g| {
                let m0 = measure_or_uniform(&g, m0.as_deref())?;
                solve_ce(out, &g, *n as usize, &m0, *min_cost, *dump_lp, &caps)
            })
        }
        Command::Nplayer(NplayerCommand::Epsilon {
            game,
            profile,
            m0,
            method,
            player,
            reps,
        }) => {
            let g = load_game(out, game, mode)?;
            let text = out.read_input(profile)?;
            dispatch!(g, |g| {
                let profile = parse_profile(&text, &g)?;
                let m0 = measure_or_uniform(&g, m0.as_deref())?;
                let cfg = SimulationConfig::new(seed, *reps)?;
                deviation(out, &g, &profile, &m0, *method, *player, &cfg, &caps)
            })
        }
        Command::Lift { flow, n } => {
            let g = load_game(out, &flow.game, mode)?;
            dispatch!(g, |g| {
                let (rho, _) = load_flow(out, &g, flow)?;
                let profile = lift(&rho, *n as usize)?;
                out.json("profile.json", &profile_to_json(&g, &profile))?;
                Ok(Status::Pass)
            })
        }
        Command::Limits(cmd) => {
            let (args, converge): (&CurveArgs, bool) = match cmd {
                LimitsCommand::EpsilonCurve(a) => (a, false),
                LimitsCommand::Converge(a) => (a, true),
            };
            let g = load_game(out, &args.flow.game, mode)?;
            let cfg = SimulationConfig::new(seed, args.reps)?;
            dispatch!(g, |g| {
                let (rho, m0) = load_flow(out, &g, &args.flow)?;
                if converge {
                    convergence(out, &g, &rho, &m0, &args.ns, &cfg, &caps)
                } else {
                    curve(out, &g, &rho, &m0, &args.ns, &cfg, &caps)
                }
            })
        }
    }
}

fn load_game(out: &mut Outputs, path: &Path, mode: Option<Arithmetic>) -> Result<AnyGame> {
    parse_game(&out.read_input(path)?, mode)
}

fn load_flow<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    args: &FlowArgs,
) -> Result<(CorrelatedFlow<S>, ProbabilityVector<S>)> {
    let rho = parse_flow(&out.read_input(&args.flow)?, game)?;
    let m0 = match &args.m0 {
        Some(text) => parse_measure(text)?,
        None => initial_law(&rho)?,
    };
    Ok((rho, m0))
}

fn measure_or_uniform<S: Scalar>(game: &GameSpec<S>, text: Option<&str>) -> Result<ProbabilityVector<S>> {
    match text {
        Some(t) => parse_measure(t),
        None => Ok(ProbabilityVector::uniform(game.n_states())),
    }
}

fn dec<S: Scalar>(x: &S) -> String {
    format_f64(x.to_f64())
}

fn exact_flag<S: Scalar>() -> String {
    (S::ARITHMETIC == Arithmetic::Exact).to_string()
}

fn flow_table<S: Scalar>(flow: &FlowTrajectory<S>) -> Value {
    flow.measures()
        .iter()
        .map(|m| m.weights().iter().map(scalar_to_json).collect::<Vec<_>>())
        .collect()
}

fn value_table<S: Scalar>(values: &[Vec<S>]) -> Value {
    values
        .iter()
        .map(|row| row.iter().map(scalar_to_json).collect::<Vec<_>>())
        .collect()
}

fn validate<S: Scalar>(out: &mut Outputs, game: &GameSpec<S>) -> Result<Status> {
    let report = validate_game(game);
    let mut value = serde_json::to_value(&report)?;
    value["arithmetic"] = json!(S::ARITHMETIC.to_string());
    value["horizon"] = json!(game.horizon());
    value["states"] = json!(game.n_states());
    value["actions"] = json!(game.n_actions());
    out.json("validation.json", &value)?;
    if let Some(v) = &report.first_violation {
        eprintln!("invalid: t={} x={} a={}: {}", v.t, v.x, v.a, v.message);
        return Ok(Status::Fail);
    }
    eprintln!("valid: lipschitz modulus {}", report.lipschitz);
    Ok(Status::Pass)
}

fn verify<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    caps: &Caps,
) -> Result<Status> {
    let v = verify_solution(game, rho, m0, caps.enumeration)?;
    let k = game.n_actions();
    let recs: Vec<Value> = v
        .optimality
        .entries
        .iter()
        .map(|e| {
            json!({
                "recommendation": e.recommendation.to_string(),
                "recommendation_index": e.recommendation.index(k),
                "weight": scalar_to_json(&e.weight),
                "cost": scalar_to_json(&e.cost),
                "best_response": e.best_response.to_string(),
                "best_response_index": e.best_response.index(k),
                "best_value": scalar_to_json(&e.best_value),
                "gap": scalar_to_json(&e.gap),
            })
        })
        .collect();
    let residuals: Vec<Value> = v
        .consistency
        .flows
        .iter()
        .enumerate()
        .map(|(j, f)| {
            json!({
                "flow": j,
                "weight": scalar_to_json(&f.weight),
                "residual": scalar_to_json(&f.residual),
                "per_time": f.per_time.iter().map(scalar_to_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    let max_residual = v.consistency.max_residual();
    out.json(
        "verdict.json",
        &json!({
            "verdict": if v.solution { "pass" } else { "fail" },
            "arithmetic": S::ARITHMETIC.to_string(),
            "optimal": v.optimality.optimal,
            "optimality_gap": scalar_to_json(&v.optimality.gap),
            "consistent": v.consistency.consistent,
            "max_residual": scalar_to_json(&max_residual),
            "recommendations": recs,
            "residuals": residuals,
        }),
    )?;
    let gap_rows: Vec<Vec<String>> = v
        .optimality
        .entries
        .iter()
        .map(|e| {
            vec![
                e.recommendation.index(k).to_string(),
                dec(&e.weight),
                dec(&e.cost),
                e.best_response.index(k).to_string(),
                dec(&e.best_value),
                dec(&e.gap),
                exact_flag::<S>(),
            ]
        })
        .collect();
    out.csv(
        "gaps.csv",
        &["recommendation", "weight", "cost", "best_response", "best_value", "gap", "exact"],
        &gap_rows,
    )?;
    let mut residual_rows = Vec::new();
    eprintln!("flow  t  residual");
    for (j, f) in v.consistency.flows.iter().enumerate() {
        for (t, r) in f.per_time.iter().enumerate() {
            eprintln!("{j:>4} {t:>2}  {r}");
            residual_rows.push(vec![j.to_string(), t.to_string(), dec(r), exact_flag::<S>()]);
        }
    }
    out.csv("residuals.csv", &["flow", "t", "residual", "exact"], &residual_rows)?;
    eprintln!(
        "{}: optimality gap {}, max residual {}",
        if v.solution { "pass" } else { "fail" },
        v.optimality.gap,
        max_residual
    );
    Ok(if v.solution { Status::Pass } else { Status::Fail })
}

fn best_responses<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    caps: &Caps,
) -> Result<Status> {
    let k = game.n_actions();
    let mut recs = Vec::new();
    for phi in rho.support() {
        let br = best_response(game, rho, &phi, m0, caps.enumeration)?;
        recs.push(json!({
            "recommendation": phi.to_string(),
            "recommendation_index": phi.index(k),
            "best_response": br.strategy.to_string(),
            "best_response_index": br.strategy.index(k),
            "value": scalar_to_json(&br.value),
        }));
    }
    let fac = FlowFactorization::factorize(rho);
    let mut flows = Vec::new();
    let mut rows = Vec::new();
    for (j, (flow, weight)) in fac.flows.iter().enumerate() {
        let dp = dp_best_response(game, flow)?;
        for (t, row) in dp.values.iter().enumerate() {
            for (x, v) in row.iter().enumerate() {
                rows.push(vec![
                    j.to_string(),
                    t.to_string(),
                    game.states().label(x).to_string(),
                    dec(v),
                    exact_flag::<S>(),
                ]);
            }
        }
        flows.push(json!({
            "flow": j,
            "weight": scalar_to_json(weight),
            "strategy": dp.strategy.to_string(),
            "strategy_index": dp.strategy.index(k),
            "initial_value": scalar_to_json(&dp.initial_value(m0)),
            "ties": dp.ties,
            "values": value_table(&dp.values),
        }));
    }
    out.json(
        "best_response.json",
        &json!({ "recommendations": recs, "flows": flows }),
    )?;
    out.csv("values.csv", &["flow", "t", "state", "value", "exact"], &rows)?;
    Ok(Status::Pass)
}

fn propagate<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
) -> Result<Status> {
    let fac = FlowFactorization::factorize(rho);
    let mut flows = Vec::new();
    let mut rows = Vec::new();
    for (j, ((declared, weight), cond)) in fac.flows.iter().zip(&fac.conditionals).enumerate() {
        let h = mkv_propagate(game, cond, m0)?.flow;
        let mut residual = S::zero();
        for t in 0..h.len() {
            residual = S::max_of(residual, dist(h.at(t), declared.at(t))?);
            for x in 0..game.n_states() {
                rows.push(vec![
                    j.to_string(),
                    t.to_string(),
                    game.states().label(x).to_string(),
                    dec(declared.at(t).get(x)),
                    dec(h.at(t).get(x)),
                    exact_flag::<S>(),
                ]);
            }
        }
        flows.push(json!({
            "flow": j,
            "weight": scalar_to_json(weight),
            "residual": scalar_to_json(&residual),
            "propagated": flow_table(&h),
        }));
    }
    out.json("propagated.json", &json!({ "flows": flows }))?;
    out.csv(
        "propagate.csv",
        &["flow", "t", "state", "declared", "propagated", "exact"],
        &rows,
    )?;
    Ok(Status::Pass)
}

fn section5_params(args: &Section5Args) -> Result<ExampleParams> {
    let c0 = parse_rational(&args.c0)?;
    let c1 = parse_rational(&args.c1)?;
    match &args.beta {
        Some(text) => {
            let beta = text
                .split(',')
                .map(parse_rational)
                .collect::<Result<Vec<_>>>()?;
            let beta: [Rational; 4] = beta
                .try_into()
                .map_err(|_| Error::InvalidArgument("--beta needs four weights".into()))?;
            Ok(ExampleParams::new(beta, c0, c1))
        }
        None => {
            let alpha = parse_rational(args.alpha.as_deref().unwrap_or("1/2"))?;
            ExampleParams::from_alpha(alpha, c0, c1)
        }
    }
}

fn section5(out: &mut Outputs, args: &Section5Args) -> Result<Status> {
    let params = section5_params(args)?;
    let ex = build_example(&params)?;
    let verdict = verify_example(&params)?;
    let k = ex.game.n_actions();
    let names = ex.strategies.all();
    let name_of = |s: &cmfg_core::RestrictedStrategy| {
        names
            .iter()
            .find(|(_, t)| *t == s)
            .map(|(n, _)| n.to_string())
            .unwrap_or_else(|| s.to_string())
    };
    let flow_names = [
        ("plus", &ex.flows.plus),
        ("plus_return", &ex.flows.plus_return),
        ("minus", &ex.flows.minus),
        ("minus_return", &ex.flows.minus_return),
    ];
    let witness = match nontrivial_correlation_witness(&params) {
        Ok(w) => json!({
            "nontrivial": w.nontrivial,
            "matches_formula": w.matches_formula,
            "conditional": w.conditional.iter().map(|(f, p)| {
                let name = flow_names.iter().find(|(_, g)| *g == f).map(|(n, _)| *n).unwrap_or("other");
                json!({ "flow": name, "probability": scalar_to_json(p) })
            }).collect::<Vec<_>>(),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let recs: Vec<Value> = verdict
        .verdict
        .optimality
        .entries
        .iter()
        .map(|e| {
            json!({
                "recommendation": name_of(&e.recommendation),
                "recommendation_index": e.recommendation.index(k),
                "weight": scalar_to_json(&e.weight),
                "cost": scalar_to_json(&e.cost),
                "best_response": name_of(&e.best_response),
                "best_response_index": e.best_response.index(k),
                "gap": scalar_to_json(&e.gap),
            })
        })
        .collect();
    let label = match verdict.status {
        ExampleStatus::Solution => "pass",
        ExampleStatus::NotSolution => "fail",
        ExampleStatus::BoundaryTie => "tie",
    };
    out.json_file("game.json", &game_to_json(&ex.game))?;
    out.json_file("rho.json", &flow_to_json(&ex.game, &ex.rho))?;
    out.json(
        "verdict.json",
        &json!({
            "verdict": label,
            "status": verdict.status,
            "solution": verdict.verdict.solution,
            "optimality_gap": scalar_to_json(&verdict.verdict.optimality.gap),
            "max_residual": scalar_to_json(&verdict.verdict.consistency.max_residual()),
            "closed_forms_match": verdict.closed_forms_match,
            "c0": format_rational(&params.c0),
            "c1": format_rational(&params.c1),
            "c0_threshold": format_rational(&verdict.c0_threshold),
            "c1_threshold": format_rational(&verdict.c1_threshold),
            "c0_margin": format_rational(&verdict.c0_margin),
            "c1_margin": format_rational(&verdict.c1_margin),
            "beta": params.beta.iter().map(format_rational).collect::<Vec<_>>(),
            "recommendations": recs,
            "V_plus": value_table(&verdict.v_plus.values),
            "V_hat_plus": value_table(&verdict.v_hat_plus.values),
            "correlation": witness,
        }),
    )?;
    let mut rows = Vec::new();
    for (table, values) in [("V_plus", &verdict.v_plus.values), ("V_hat_plus", &verdict.v_hat_plus.values)] {
        for (t, row) in values.iter().enumerate() {
            for (x, v) in row.iter().enumerate() {
                rows.push(vec![
                    table.to_string(),
                    t.to_string(),
                    ex.game.states().label(x).to_string(),
                    dec(v),
                    "true".to_string(),
                ]);
            }
        }
    }
    out.csv("values.csv", &["table", "t", "state", "value", "exact"], &rows)?;
    eprintln!(
        "{label}: optimality gap {}, max residual {}, c1 threshold {}, c0 threshold {}",
        verdict.verdict.optimality.gap,
        verdict.verdict.consistency.max_residual(),
        verdict.c1_threshold,
        verdict.c0_threshold
    );
    Ok(match verdict.status {
        ExampleStatus::NotSolution => Status::Fail,
        _ => Status::Pass,
    })
}

fn report_json<S: Scalar>(r: &DeviationReport<S>, method: GainMethod) -> Value {
    json!({
        "player": r.player,
        "method": method.to_string(),
        "epsilon": scalar_to_json(&r.epsilon),
        "stderr": r.stderr,
        "exact": r.exact,
        "replications": r.replications,
        "entries": r.entries.iter().map(|e| json!({
            "recommendation": e.recommendation.to_string(),
            "weight": scalar_to_json(&e.weight),
            "cost": scalar_to_json(&e.cost),
            "best_response": e.best_response.to_string(),
            "best_value": scalar_to_json(&e.best_value),
            "gap": scalar_to_json(&e.gap),
        })).collect::<Vec<_>>(),
    })
}

fn report_rows<S: Scalar>(n_actions: usize, r: &DeviationReport<S>) -> Vec<Vec<String>> {
    r.entries
        .iter()
        .map(|e| {
            vec![
                r.player.to_string(),
                e.recommendation.index(n_actions).to_string(),
                dec(&e.cost),
                e.best_response.index(n_actions).to_string(),
                dec(&e.gap),
                dec(&e.weight),
                r.exact.to_string(),
            ]
        })
        .collect()
}

const DEVIATION_HEADER: [&str; 7] = [
    "player",
    "recommendation",
    "cost",
    "best_response",
    "gap",
    "weight",
    "exact",
];

fn solve_ce<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    n: usize,
    m0: &ProbabilityVector<S>,
    min_cost: bool,
    dump_lp: bool,
    caps: &Caps,
) -> Result<Status> {
    if dump_lp {
        let sys = symmetric_ce_constraints(game, n, m0, min_cost, caps)?;
        out.text("lp.txt", &sys.lp.dump())?;
    }
    let exact_game: GameSpec<Rational> = game.convert();
    let profile = CorrelatedProfile::Explicit(solve_symmetric_ce(game, n, m0, min_cost, caps)?);
    let report = deviation_gain_exact(&exact_game, &profile, 0, &m0.convert(), caps)?;
    out.json_file("profile.json", &profile_to_json(&exact_game, &profile))?;
    out.csv(
        "deviation.csv",
        &DEVIATION_HEADER,
        &report_rows(game.n_actions(), &report),
    )?;
    out.json(
        "report.json",
        &json!({
            "n_players": n,
            "atoms": match &profile { CorrelatedProfile::Explicit(p) => p.atoms().len(), _ => 0 },
            "objective": if min_cost { "total_cost" } else { "none" },
            "profile": profile_to_json(&exact_game, &profile),
            "deviation": report_json(&report, GainMethod::Exact),
        }),
    )?;
    eprintln!("symmetric correlated equilibrium for N = {n}: deviation gain {}", report.epsilon);
    Ok(if report.epsilon == Rational::from_usize(0) {
        Status::Pass
    } else {
        Status::Fail
    })
}

#[allow(clippy::too_many_arguments)]
fn deviation<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    profile: &CorrelatedProfile<S>,
    m0: &ProbabilityVector<S>,
    method: Method,
    player: Option<usize>,
    cfg: &SimulationConfig,
    caps: &Caps,
) -> Result<Status> {
    let n = profile.n_players();
    let symmetric = match profile {
        CorrelatedProfile::Explicit(p) => p.is_symmetric(),
        CorrelatedProfile::Factored(_) => true,
    };
    let players: Vec<usize> = match player {
        Some(i) => vec![i],
        None if symmetric => vec![0],
        None => (0..n).collect(),
    };
    let method = match method {
        Method::Exact => GainMethod::Exact,
        Method::Mc => GainMethod::MonteCarlo,
        Method::Auto => gain_method(game, profile, caps)?,
    };
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for i in players {
        match method {
            GainMethod::Exact => {
                let exact_game: GameSpec<Rational> = game.convert();
                let r = deviation_gain_exact(&exact_game, &profile.convert(), i, &m0.convert(), caps)?;
                worst = worst.max(r.epsilon.to_f64());
                rows.extend(report_rows(game.n_actions(), &r));
                reports.push(report_json(&r, method));
            }
            GainMethod::MonteCarlo => {
                let r = deviation_gain_mc(game, profile, i, m0, cfg, caps)?;
                worst = worst.max(r.epsilon);
                rows.extend(report_rows(game.n_actions(), &r));
                reports.push(report_json(&r, method));
            }
        }
    }
    out.csv("deviation.csv", &DEVIATION_HEADER, &rows)?;
    out.json(
        "epsilon.json",
        &json!({
            "n_players": n,
            "method": method.to_string(),
            "symmetric": symmetric,
            "epsilon": worst,
            "players": reports,
        }),
    )?;
    eprintln!("deviation gain ({method}): {}", format_f64(worst));
    Ok(Status::Pass)
}

fn curve<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    ns: &[usize],
    cfg: &SimulationConfig,
    caps: &Caps,
) -> Result<Status> {
    let c = epsilon_curve(game, rho, m0, ns, cfg, caps)?;
    let rows: Vec<Vec<String>> = c
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                format_f64(r.epsilon),
                r.stderr.map(format_f64).unwrap_or_default(),
                r.method.to_string(),
                r.replications.map(|k| k.to_string()).unwrap_or_default(),
                format_f64(r.seconds),
            ]
        })
        .collect();
    out.csv(
        "epsilon_curve.csv",
        &["N", "epsilon", "stderr", "method", "reps", "seconds"],
        &rows,
    )?;
    let json_rows: Vec<Value> = c
        .rows
        .iter()
        .map(|r| {
            json!({
                "N": r.n,
                "epsilon": r.epsilon,
                "exact": r.exact.as_ref().map(format_rational),
                "stderr": r.stderr,
                "method": r.method.to_string(),
                "reps": r.replications,
            })
        })
        .collect();
    out.json("epsilon_curve.json", &json!({ "rows": json_rows }))?;
    for r in &c.rows {
        eprintln!(
            "N = {:>4}  epsilon = {}  stderr = {}  ({})",
            r.n,
            format_f64(r.epsilon),
            r.stderr.map(format_f64).unwrap_or_else(|| "-".into()),
            r.method
        );
    }
    Ok(Status::Pass)
}

fn convergence<S: Scalar>(
    out: &mut Outputs,
    game: &GameSpec<S>,
    rho: &CorrelatedFlow<S>,
    m0: &ProbabilityVector<S>,
    ns: &[usize],
    cfg: &SimulationConfig,
    caps: &Caps,
) -> Result<Status> {
    if !verify_solution(game, rho, m0, caps.enumeration)?.solution {
        eprintln!("fail: the flow is not a correlated solution; run `mfg verify` for details");
        return Ok(Status::Fail);
    }
    let report = convergence_report(game, rho, m0, ns, cfg, caps)?;
    let rows: Vec<Vec<String>> = report
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                format_f64(r.w1.to_f64()),
                r.replications.to_string(),
                format_f64(r.seconds),
            ]
        })
        .collect();
    out.csv("convergence.csv", &["N", "W1", "reps", "seconds"], &rows)?;
    let json_rows: Vec<Value> = report
        .iter()
        .map(|r| {
            json!({
                "N": r.n,
                "W1": format_rational(&r.w1),
                "W1_decimal": r.w1.to_f64(),
                "reps": r.replications,
                "distinct_atoms": r.distinct_atoms,
            })
        })
        .collect();
    out.json("convergence.json", &json!({ "rows": json_rows }))?;
    for r in &report {
        eprintln!("N = {:>4}  W1 = {}", r.n, format_f64(r.w1.to_f64()));
    }
    Ok(Status::Pass)
}
