//! Subcommand implementations. Each returns a report plus whether the run
//! counts as a success for the exit code.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use everlab_core::branching::RotationConfig;
use everlab_core::confirmation::{
    build_dutch_book, case_tree, confirmation_experiment, enumerate_confirmation,
    evaluate_book_on_branches, Book, ConfirmationReport, CredenceState, ExperimentConfig,
    LeafPayoff, Theory, UpdatePolicy,
};
use everlab_core::decision::{
    check_axioms, extract_representation, ordering_matches, random_instance, Extraction,
    PreferenceRelation, Representation,
};
use everlab_core::emit::{fmt_float, Tabular};
use everlab_core::exact::{parse_ratio, short_ratio, to_f64, Exact};
use everlab_core::quantum::{born_weights, validate_game};
use everlab_core::strategy::{mn_violation, value_game};
use everlab_core::verifier::{
    egalitarian_incoherence_demo, pairs, random_rational_payoffs, regression_demo_ops,
    verify_stage1, verify_stage2, verify_stage3, verify_stage_general, verify_stage_multi,
    DemoOp, StageReport, Verdict,
};
use everlab_core::{Eigenvalue, MeasurementRealization, QuantumGame, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::options::{
    ConfirmOpts, DemoOpts, DutchbookOpts, DwVerifyOpts, ExtractOpts, GameEvalOpts,
};
use crate::CliError;

/// Values below this are treated as invariance or agreement.
pub const AGREEMENT_TOLERANCE: f64 = 1e-12;

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

// ---------------------------------------------------------------- parsing

/// A number written as a float, `m/n`, or a quotient of the atoms `pi`,
/// `e`, `sqrt2` / `sqrt(x)` and floats, e.g. `1/sqrt2` or `pi/4`.
pub fn parse_number(text: &str) -> Result<f64, CliError> {
    let text = text.trim();
    if let Some(r) = parse_ratio(text) {
        return Ok(to_f64(&r));
    }
    let atom = |s: &str| -> Option<f64> {
        let s = s.trim();
        match s {
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => {
                if let Some(rest) = s.strip_prefix("sqrt") {
                    let inner = rest.trim_start_matches('(').trim_end_matches(')');
                    inner.parse::<f64>().ok().map(f64::sqrt)
                } else {
                    s.parse::<f64>().ok()
                }
            }
        }
    };
    let value = match text.split_once('/') {
        Some((a, b)) => atom(a).zip(atom(b)).map(|(a, b)| a / b),
        None => atom(text),
    };
    value
        .filter(|v| v.is_finite())
        .ok_or_else(|| usage(format!("cannot parse number `{text}`")))
}

pub fn parse_numbers(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',').map(parse_number).collect()
}

/// `"10,0;3,4"` → `[[10,0],[3,4]]`.
pub fn parse_vectors(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(parse_numbers)
        .collect()
}

/// Exact weights from `m/n` fractions or short decimals.
pub fn parse_weights(text: &str) -> Result<Vec<Exact>, CliError> {
    text.split(',')
        .map(|w| {
            let w = w.trim();
            parse_ratio(w)
                .or_else(|| w.parse::<f64>().ok().and_then(short_ratio))
                .ok_or_else(|| usage(format!("weight `{w}` is not a rational number")))
        })
        .collect()
}

pub fn parse_strategy(text: Option<&str>) -> Result<Strategy, CliError> {
    text.unwrap_or("born")
        .parse()
        .map_err(|e| usage(format!("--strategy: {e}")))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read `{}`: {e}", path.display())))
}

fn checked_game(game: QuantumGame) -> Result<QuantumGame, CliError> {
    let report = validate_game(&game);
    if report.is_empty() {
        Ok(game)
    } else {
        Err(invalid(format!("invalid game: {report}")))
    }
}

fn load_game(path: &Path) -> Result<QuantumGame, CliError> {
    let game = QuantumGame::from_json(&read(path)?)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    checked_game(game)
}

fn game_from_weights(weights: &str, utilities: &str) -> Result<QuantumGame, CliError> {
    let w = parse_weights(weights)?;
    let u = parse_numbers(utilities)?;
    if w.len() != u.len() {
        return Err(usage(format!(
            "{} weights but {} utilities",
            w.len(),
            u.len()
        )));
    }
    QuantumGame::from_weights(&w, &u).map_err(invalid)
}

// ---------------------------------------------------------------- game eval

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub eigenvalue: f64,
    pub consequence: String,
    pub utility: f64,
    pub born_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationValue {
    pub realization: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalityCheck {
    pub relabeling: String,
    pub original_value: f64,
    pub relabeled_value: f64,
    pub delta: f64,
    pub invariant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameEvalReport {
    pub strategy: String,
    pub outcomes: Vec<OutcomeRow>,
    pub values: Vec<RealizationValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mn_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physicality: Option<PhysicalityCheck>,
}

impl Tabular for GameEvalReport {
    fn header(&self) -> Vec<String> {
        vec!["item".into(), "value".into()]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .values
            .iter()
            .map(|v| vec![format!("value[{}]", v.realization), fmt_float(v.value)])
            .collect();
        if let Some(d) = self.mn_delta {
            rows.push(vec!["mn_delta".into(), fmt_float(d)]);
        }
        if let Some(p) = &self.physicality {
            rows.push(vec!["relabeled_value".into(), fmt_float(p.relabeled_value)]);
            rows.push(vec!["physicality_delta".into(), fmt_float(p.delta)]);
        }
        rows
    }
}

/// Relabels eigenvalues by rank: the r-th smallest of k becomes (k−r)².
/// The map is injective, reverses the order and changes every magnitude
/// except possibly one.
pub fn rank_relabeling(game: &QuantumGame) -> Result<(QuantumGame, String), CliError> {
    let values: std::collections::BTreeSet<Eigenvalue> =
        game.observable.eigenvalues().values().copied().collect();
    let k = values.len();
    let map: BTreeMap<Eigenvalue, Eigenvalue> = values
        .iter()
        .enumerate()
        .map(|(r, x)| (*x, Eigenvalue(((k - r) * (k - r)) as f64)))
        .collect();
    let text: Vec<String> = map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
    let relabeled = game
        .relabeled(|l| format!("{l}'"), |x| map.get(&x).copied().unwrap_or(x))
        .map_err(invalid)?;
    Ok((relabeled, text.join(",")))
}

pub fn game_eval(opts: &GameEvalOpts) -> Result<(GameEvalReport, bool), CliError> {
    let game = match (&opts.game, &opts.weights) {
        (Some(path), None) => load_game(path)?,
        (None, Some(w)) => game_from_weights(
            w,
            opts.utilities
                .as_deref()
                .ok_or_else(|| usage("--weights needs --utilities"))?,
        )?,
        (Some(_), Some(_)) => return Err(usage("give either --game or --weights, not both")),
        (None, None) => return Err(usage("game eval needs --game FILE or --weights and --utilities")),
    };
    let strategy = parse_strategy(opts.strategy.as_deref())?;
    let realizations: Vec<MeasurementRealization> = match &opts.realizations {
        Some(list) if !list.is_empty() => list
            .iter()
            .map(|r| r.parse().map_err(|e| usage(format!("--realization: {e}"))))
            .collect::<Result<_, _>>()?,
        _ => vec![MeasurementRealization::direct()],
    };

    let born = born_weights(&game).map_err(invalid)?;
    let outcomes = game
        .payoff
        .entries()
        .iter()
        .map(|(x, c)| OutcomeRow {
            eigenvalue: x.value(),
            consequence: c.name.clone(),
            utility: c.utility,
            born_weight: born.get(x).copied().unwrap_or(0.0),
        })
        .collect();
    let values = realizations
        .iter()
        .map(|r| {
            Ok(RealizationValue {
                realization: r.to_string(),
                value: value_game(&strategy, &game, r).map_err(invalid)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mn_delta = if realizations.len() > 1 {
        Some(mn_violation(&strategy, &game, &realizations).map_err(invalid)?)
    } else {
        None
    };
    let physicality = if opts.physicality.unwrap_or(false) {
        let (relabeled, text) = rank_relabeling(&game)?;
        let direct = MeasurementRealization::direct();
        let original_value = value_game(&strategy, &game, &direct).map_err(invalid)?;
        let relabeled_value = value_game(&strategy, &relabeled, &direct).map_err(invalid)?;
        let delta = (original_value - relabeled_value).abs();
        Some(PhysicalityCheck {
            relabeling: text,
            original_value,
            relabeled_value,
            delta,
            invariant: delta <= AGREEMENT_TOLERANCE,
        })
    } else {
        None
    };
    let ok = mn_delta.map_or(true, |d| d <= AGREEMENT_TOLERANCE)
        && physicality.as_ref().map_or(true, |p| p.invariant);
    Ok((
        GameEvalReport {
            strategy: strategy.to_string(),
            outcomes,
            values,
            mn_delta,
            physicality,
        },
        ok,
    ))
}

// ---------------------------------------------------------------- dw verify

/// Merges per-parameter reports of one stage into a single report.
pub fn combine(reports: Vec<StageReport>) -> Option<StageReport> {
    let mut iter = reports.into_iter();
    let mut acc = iter.next()?;
    for r in iter {
        acc.pass &= r.pass;
        acc.residual = acc.residual.max(r.residual);
        acc.verdict = match (acc.verdict, r.verdict) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        };
        acc.cases.extend(r.cases);
        acc.steps.extend(r.steps);
        if !acc.details.contains(&r.details) {
            acc.details = format!("{}; {}", acc.details, r.details);
        }
    }
    Some(acc)
}

fn explicit_vectors(text: Option<&str>) -> Result<Vec<Vec<f64>>, CliError> {
    text.map(parse_vectors).transpose().map(Option::unwrap_or_default)
}

fn demo_report(
    weights: Option<&str>,
    utilities: Option<&str>,
    fine_dim: Option<usize>,
    tau: Option<f64>,
    epsilon: Option<f64>,
    random_steps: Option<usize>,
    seed: u64,
) -> Result<StageReport, CliError> {
    let game = game_from_weights(weights.unwrap_or("1/3,2/3"), utilities.unwrap_or("10,0"))?;
    let fine_dim = fine_dim.unwrap_or(8);
    let tau = tau.unwrap_or(1e-9);
    let epsilon = epsilon.unwrap_or(1e-3);
    let ops = match random_steps {
        None => {
            let mut ops = regression_demo_ops();
            if let DemoOp::Rotate(cfg) = &mut ops[0] {
                cfg.epsilon = epsilon;
            }
            ops[1] = DemoOp::CoarseGrain(fine_dim);
            ops
        }
        Some(steps) => {
            let outcomes: Vec<Eigenvalue> = game.payoff.entries().keys().copied().collect();
            vec![
                DemoOp::Rotate(RotationConfig::random(epsilon, fine_dim, steps, &outcomes, seed)),
                DemoOp::CoarseGrain(fine_dim),
            ]
        }
    };
    egalitarian_incoherence_demo(&game, &ops, fine_dim, tau).map_err(invalid)
}

pub fn egal_demo(opts: &DemoOpts, seed: u64) -> Result<(StageReport, bool), CliError> {
    let r = demo_report(
        opts.weights.as_deref(),
        opts.utilities.as_deref(),
        opts.fine_dim,
        opts.tau,
        opts.epsilon,
        opts.random_steps,
        seed,
    )?;
    let ok = r.pass;
    Ok((r, ok))
}

pub fn dw_verify(opts: &DwVerifyOpts, seed: u64) -> Result<(StageReport, bool), CliError> {
    let stage = opts
        .stage
        .as_deref()
        .ok_or_else(|| usage("dw verify needs --stage {1|2|3|general|egal-demo}"))?;
    let strategy = parse_strategy(opts.strategy.as_deref())?;
    let sweep = opts.sweep.unwrap_or(0);
    let mut rng = rng(seed);
    let explicit = explicit_vectors(opts.payoffs.as_deref())?;
    let with_default = |default: Vec<f64>| {
        if explicit.is_empty() {
            vec![default]
        } else {
            explicit.clone()
        }
    };
    let two = |v: &[Vec<f64>]| -> Result<Vec<(f64, f64)>, CliError> {
        if v.iter().any(|p| p.len() != 2) {
            return Err(usage("--payoffs: this stage takes pairs such as `10,0;3,4`"));
        }
        Ok(pairs(v))
    };
    let report = match stage {
        "1" => {
            let mut payoffs = two(&with_default(vec![0.0, 1.0]))?;
            payoffs.extend(pairs(&random_rational_payoffs(&mut rng, sweep, 2)));
            verify_stage1(&strategy, &payoffs).map_err(invalid)?
        }
        "2" => {
            let ns: Vec<usize> = match opts.n {
                Some(n) if n >= 1 => vec![n as usize],
                Some(_) => return Err(usage("--n must be at least 1")),
                None => (2..=opts.max_n.unwrap_or(64) as usize).collect(),
            };
            let mut reports = Vec::new();
            for n in ns {
                let mut payoffs: Vec<Vec<f64>> = if explicit.is_empty() {
                    vec![(0..n).map(|i| i as f64).collect()]
                } else {
                    explicit.clone()
                };
                if payoffs.iter().any(|p| p.len() < n) {
                    return Err(usage(format!("--payoffs: stage 2 with n={n} needs {n} utilities per vector")));
                }
                payoffs.extend(random_rational_payoffs(&mut rng, sweep, n));
                reports.push(verify_stage2(&strategy, n, &payoffs).map_err(invalid)?);
            }
            combine(reports).ok_or_else(|| usage("--max-n must be at least 2"))?
        }
        "3" => {
            let grid: Vec<(u32, u32)> = match (opts.m, opts.n) {
                (Some(m), Some(n)) => vec![(m, n)],
                (None, None) => {
                    let max_n = opts.max_n.unwrap_or(32);
                    (2..=max_n).flat_map(|n| (1..n).map(move |m| (m, n))).collect()
                }
                _ => return Err(usage("stage 3 takes both --m and --n, or neither")),
            };
            let mut payoffs = two(&with_default(vec![10.0, 0.0]))?;
            payoffs.extend(pairs(&random_rational_payoffs(&mut rng, sweep, 2)));
            let reports = grid
                .into_iter()
                .map(|(m, n)| verify_stage3(&strategy, m, n, &payoffs).map_err(invalid))
                .collect::<Result<Vec<_>, _>>()?;
            combine(reports).ok_or_else(|| usage("--max-n must be at least 2"))?
        }
        "general" => match &opts.weights {
            Some(w) => {
                let weights = parse_weights(w)?;
                let utilities = match &opts.utilities {
                    Some(u) => parse_numbers(u)?,
                    None => return Err(usage("--weights needs --utilities")),
                };
                if utilities.len() != weights.len() {
                    return Err(usage("--weights and --utilities differ in length"));
                }
                verify_stage_multi(&strategy, &weights, &utilities).map_err(invalid)?
            }
            None => {
                let a1 = match &opts.a1_squared {
                    Some(t) => parse_number(t)?,
                    None => std::f64::consts::FRAC_1_SQRT_2,
                };
                if !(a1 > 0.0 && a1 < 1.0) {
                    return Err(usage("--a1-squared must lie strictly between 0 and 1"));
                }
                let u = two(&with_default(vec![1.0, 0.0]))?;
                let tolerance = opts.tolerance.unwrap_or(1e-4);
                let cap = opts.cap.unwrap_or(4096);
                let reports = u
                    .iter()
                    .map(|&p| verify_stage_general(&strategy, a1, p, tolerance, cap).map_err(invalid))
                    .collect::<Result<Vec<_>, _>>()?;
                combine(reports).expect("at least one payoff")
            }
        },
        "egal-demo" | "demo" => demo_report(
            opts.weights.as_deref(),
            opts.utilities.as_deref(),
            opts.fine_dim,
            opts.tau,
            opts.epsilon,
            opts.random_steps,
            seed,
        )?,
        other => return Err(usage(format!("unknown stage `{other}` (expected 1, 2, 3, general or egal-demo)"))),
    };
    let ok = report.pass;
    Ok((report, ok))
}

// ---------------------------------------------------------------- dutchbook

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub seed: u64,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DutchbookReport {
    pub evidence_credence: f64,
    pub conditional_credence: f64,
    /// p_new(T) after conditionalizing on A.
    pub conditionalized: f64,
    pub policy: String,
    pub book: Option<Book>,
    pub leaves: Vec<LeafPayoff>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialSummary>,
}

impl Tabular for DutchbookReport {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["leaf".to_string(), "case".to_string()];
        if let Some(book) = &self.book {
            h.extend(book.bets.iter().map(|b| format!("bet_{}", b.name)));
        }
        h.push("net".into());
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.leaves
            .iter()
            .map(|l| {
                let mut row = vec![l.leaf.clone(), l.case.to_string()];
                if let Some(book) = &self.book {
                    row.extend(book.bets.iter().map(|b| fmt_float(b.payoff(l.case))));
                }
                row.push(fmt_float(l.net));
                row
            })
            .collect()
    }
}

fn credence_state(opts: &DutchbookOpts) -> Result<CredenceState, CliError> {
    let marginal = opts.p_a.is_some() || opts.p_t_given_a.is_some();
    let joint = opts.prior.is_some() || opts.lik_t.is_some() || opts.lik_not_t.is_some();
    match (marginal, joint) {
        (true, true) => Err(usage("give --p-a/--p-t-given-a or --prior/--lik-t/--lik-not-t, not both")),
        (false, true) => match (opts.prior, opts.lik_t, opts.lik_not_t) {
            (Some(p), Some(a), Some(b)) => CredenceState::binary(p, a, b).map_err(invalid),
            _ => Err(usage("--prior, --lik-t and --lik-not-t go together")),
        },
        _ => {
            let p_a = opts.p_a.unwrap_or(0.5);
            let p = opts.p_t_given_a.unwrap_or(0.8);
            if !(0.0..=1.0).contains(&p_a) || !(0.0..=1.0).contains(&p) {
                return Err(usage("--p-a and --p-t-given-a must lie in [0,1]"));
            }
            CredenceState::with_marginals(p_a, p).map_err(invalid)
        }
    }
}

/// Random books with |q − p| ≥ 0.01 and p(A) in [0.01, 0.99], each settled
/// on the three-case tree and compared with −|p−q|·p(A)·S.
pub fn dutchbook_trials(trials: usize, seed: u64) -> Result<TrialSummary, CliError> {
    let mut rng = rng(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..trials {
        let p_a = rng.gen_range(0.01..=0.99);
        let p = rng.gen_range(0.0..=1.0);
        let q = loop {
            let q: f64 = rng.gen_range(0.0..=1.0);
            if (q - p).abs() >= 0.01 {
                break q;
            }
        };
        let stake = rng.gen_range(0.1..=10.0);
        let cred = CredenceState::with_marginals(p_a, p).map_err(invalid)?;
        let book = build_dutch_book(&cred, &UpdatePolicy::deviant("T", "A", q), "A", "T", stake)
            .map_err(invalid)?;
        let (tree, truth) = case_tree(&cred, "A", "T").map_err(invalid)?;
        let leaves = evaluate_book_on_branches(book.as_ref(), &tree, &truth).map_err(invalid)?;
        let expected = -(p - q).abs() * p_a * stake;
        for l in leaves {
            max_error = max_error.max((l.net - expected).abs());
        }
    }
    let tolerance = AGREEMENT_TOLERANCE;
    Ok(TrialSummary {
        trials,
        seed,
        max_error,
        tolerance,
        pass: max_error <= tolerance,
    })
}

pub fn dutchbook(opts: &DutchbookOpts, seed: u64) -> Result<(DutchbookReport, bool), CliError> {
    let cred = credence_state(opts)?;
    let policy_name = opts
        .policy
        .clone()
        .unwrap_or_else(|| if opts.q.is_some() { "deviant".into() } else { "conditionalize".into() });
    let policy = match policy_name.as_str() {
        "deviant" => UpdatePolicy::deviant(
            "T",
            "A",
            opts.q.ok_or_else(|| usage("--policy deviant needs --q"))?,
        ),
        "conditionalize" => UpdatePolicy::Conditionalize,
        "rigid" => UpdatePolicy::Rigid,
        other => return Err(usage(format!("unknown policy `{other}` (expected deviant, conditionalize or rigid)"))),
    };
    let stake = opts.stake.unwrap_or(1.0);
    let book = build_dutch_book(&cred, &policy, "A", "T", stake).map_err(invalid)?;
    let (tree, truth) = case_tree(&cred, "A", "T").map_err(invalid)?;
    let leaves = evaluate_book_on_branches(book.as_ref(), &tree, &truth).map_err(invalid)?;
    let conditionalized = cred.conditionalize("A").map_err(invalid)?.credences["T"];
    let trials = opts.trials.map(|t| dutchbook_trials(t, seed)).transpose()?;
    let ok = trials.as_ref().map_or(true, |t| t.pass);
    Ok((
        DutchbookReport {
            evidence_credence: cred.prob_evidence("A").map_err(invalid)?,
            conditional_credence: cred.posterior("T", "A").map_err(invalid)?,
            conditionalized,
            policy: policy_name,
            book,
            leaves,
            trials,
        },
        ok,
    ))
}

// ---------------------------------------------------------------- confirm run

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct TheoryDoc {
    name: String,
    prior: f64,
    /// One table for every game, a list with one table per game, or absent
    /// for the Born weights of each game.
    #[serde(default)]
    likelihoods: Option<Value>,
}

fn likelihood_table(v: &Value) -> Result<BTreeMap<Eigenvalue, f64>, CliError> {
    let map: BTreeMap<String, f64> = serde_json::from_value(v.clone())
        .map_err(|e| usage(format!("likelihood table: {e}")))?;
    map.into_iter()
        .map(|(k, p)| {
            k.parse::<Eigenvalue>()
                .map(|x| (x, p))
                .map_err(|_| usage(format!("likelihood key `{k}` is not an eigenvalue")))
        })
        .collect()
}

fn load_theories(path: &Path, games: &[QuantumGame]) -> Result<Vec<Theory>, CliError> {
    let docs: Vec<TheoryDoc> = serde_json::from_str(&read(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    docs.into_iter()
        .map(|d| {
            let likelihoods = match &d.likelihoods {
                None => games
                    .iter()
                    .map(|g| born_weights(g).map_err(invalid))
                    .collect::<Result<Vec<_>, _>>()?,
                Some(Value::Array(list)) => list.iter().map(likelihood_table).collect::<Result<_, _>>()?,
                Some(table) => vec![likelihood_table(table)?],
            };
            Ok(Theory {
                name: d.name,
                prior: d.prior,
                likelihoods,
            })
        })
        .collect()
}

fn load_games(path: &Path) -> Result<Vec<QuantumGame>, CliError> {
    let value: Value = serde_json::from_str(&read(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let docs = match value {
        Value::Array(list) => list,
        single => vec![single],
    };
    docs.into_iter()
        .map(|d| {
            let game = QuantumGame::from_json_value(d).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            checked_game(game)
        })
        .collect()
}

/// The default experiment: the 1/3–2/3 game, a Born theory and a rival
/// predicting 0.9 / 0.1, equal priors.
pub fn default_confirmation_setup() -> Result<(Vec<QuantumGame>, Vec<Theory>), CliError> {
    let game = QuantumGame::rational_two_outcome(1, 3, 1.0, 0.0).map_err(invalid)?;
    let born = Theory::born("born", 0.5, &game).map_err(invalid)?;
    let rival = Theory {
        name: "rival".into(),
        prior: 0.5,
        likelihoods: vec![[(Eigenvalue(1.0), 0.9), (Eigenvalue(2.0), 0.1)].into()],
    };
    Ok((vec![game], vec![born, rival]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub depth: usize,
    pub max_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfirmRunReport {
    #[serde(flatten)]
    pub report: ConfirmationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
}

impl Tabular for ConfirmRunReport {
    fn header(&self) -> Vec<String> {
        self.report.header()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.report.rows()
    }
}

/// Class-merged and full enumeration at `depth`, compared on the headline
/// numbers and the per-iteration mean credence.
pub fn cross_check(cfg: &ExperimentConfig, depth: usize) -> Result<CrossCheck, CliError> {
    let cfg = ExperimentConfig {
        depth,
        ..cfg.clone()
    };
    let merged = confirmation_experiment(&cfg).map_err(invalid)?;
    let full = enumerate_confirmation(&cfg).map_err(invalid)?;
    let mut diff = (merged.mass_above_threshold - full.mass_above_threshold)
        .abs()
        .max((merged.frozen_mass - full.frozen_mass).abs());
    for (a, b) in merged.mean_true_credence.iter().zip(&full.mean_true_credence) {
        diff = diff.max((a - b).abs());
    }
    let tolerance = 1e-9;
    Ok(CrossCheck {
        depth,
        max_difference: diff,
        tolerance,
        pass: diff <= tolerance,
    })
}

pub fn confirm_run(opts: &ConfirmOpts) -> Result<(ConfirmRunReport, bool), CliError> {
    let (games, theories) = match (&opts.games, &opts.theories) {
        (None, None) => default_confirmation_setup()?,
        (games, theories) => {
            let games = match games {
                Some(p) => load_games(p)?,
                None => default_confirmation_setup()?.0,
            };
            let theories = match theories {
                Some(p) => load_theories(p, &games)?,
                None => return Err(usage("--games needs --theories")),
            };
            (games, theories)
        }
    };
    let true_theory = match &opts.true_theory {
        Some(t) => t.clone(),
        None => theories
            .first()
            .map(|t| t.name.clone())
            .ok_or_else(|| usage("no theories given"))?,
    };
    let cfg = ExperimentConfig {
        theories,
        games,
        strategy: parse_strategy(opts.strategy.as_deref())?,
        depth: opts.depth.unwrap_or(20),
        true_theory,
        threshold: opts.threshold.unwrap_or(0.95),
    };
    let report = confirmation_experiment(&cfg).map_err(invalid)?;
    let cross_check = opts.check_depth.map(|d| cross_check(&cfg, d)).transpose()?;
    let ok = cross_check.as_ref().map_or(true, |c| c.pass);
    Ok((ConfirmRunReport { report, cross_check }, ok))
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractCase {
    pub id: usize,
    pub states: usize,
    pub consequences: usize,
    pub acts: usize,
    pub result: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub ordering_matches: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<Representation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractReport {
    pub pass: bool,
    pub cases: Vec<ExtractCase>,
}

fn fmt_map(m: &BTreeMap<String, f64>) -> String {
    let parts: Vec<String> = m.iter().map(|(k, v)| format!("{k}={}", fmt_float(*v))).collect();
    parts.join(";")
}

impl Tabular for ExtractReport {
    fn header(&self) -> Vec<String> {
        ["id", "states", "consequences", "acts", "result", "margin", "ordering_matches", "probability", "utility"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.cases
            .iter()
            .map(|c| {
                vec![
                    c.id.to_string(),
                    c.states.to_string(),
                    c.consequences.to_string(),
                    c.acts.to_string(),
                    c.result.clone(),
                    c.margin.map(fmt_float).unwrap_or_default(),
                    c.ordering_matches.to_string(),
                    c.representation.as_ref().map(|r| fmt_map(&r.probability)).unwrap_or_default(),
                    c.representation.as_ref().map(|r| fmt_map(&r.utility)).unwrap_or_default(),
                ]
            })
            .collect()
    }
}

fn extract_case(id: usize, prefs: &PreferenceRelation, generator: Option<Representation>) -> Result<ExtractCase, CliError> {
    let mut case = ExtractCase {
        id,
        states: prefs.setup().states().len(),
        consequences: prefs.setup().consequences().len(),
        acts: prefs.acts().len(),
        result: String::new(),
        margin: None,
        ordering_matches: false,
        representation: None,
        generator,
        violations: None,
    };
    let axioms = check_axioms(prefs);
    if !axioms.is_consistent() {
        case.result = "axiom_violation".into();
        case.violations = Some(axioms.to_string());
        return Ok(case);
    }
    match extract_representation(prefs).map_err(invalid)? {
        Extraction::Feasible {
            representation,
            margin,
            ..
        } => {
            case.result = "feasible".into();
            case.margin = Some(margin);
            case.ordering_matches = ordering_matches(prefs, &representation).map_err(invalid)?;
            case.representation = Some(representation);
        }
        Extraction::Infeasible { witness, margin } => {
            case.result = "infeasible".into();
            case.margin = Some(margin);
            case.violations = Some(format!("no representation separates {} and {}", witness.0, witness.1));
        }
    }
    Ok(case)
}

pub fn extract(opts: &ExtractOpts, seed: u64) -> Result<(ExtractReport, bool), CliError> {
    let cases = match (&opts.prefs, opts.random) {
        (Some(path), None) => {
            let prefs = PreferenceRelation::from_json(&read(path)?)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            vec![extract_case(0, &prefs, None)?]
        }
        (None, Some(k)) => {
            let mut rng = rng(seed);
            let max_states = opts.max_states.unwrap_or(4);
            let max_consequences = opts.max_consequences.unwrap_or(4);
            if !(2..=6).contains(&max_states) || !(2..=6).contains(&max_consequences) {
                return Err(usage("--max-states and --max-consequences must lie in 2..=6"));
            }
            (0..k)
                .map(|id| {
                    let (setup, rep) = random_instance(&mut rng, max_states, max_consequences, 1e-6);
                    let acts = setup.all_acts();
                    let prefs = PreferenceRelation::from_representation(setup, acts, &rep).map_err(invalid)?;
                    extract_case(id, &prefs, Some(rep))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        (Some(_), Some(_)) => return Err(usage("give either --prefs or --random, not both")),
        (None, None) => return Err(usage("extract needs --prefs FILE or --random K")),
    };
    let pass = cases.iter().all(|c| c.result == "feasible" && c.ordering_matches);
    Ok((ExtractReport { pass, cases }, pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_number("0.25").unwrap(), 0.25);
        assert_eq!(parse_number("1/sqrt2").unwrap(), 1.0 / 2f64.sqrt());
        assert_eq!(parse_number("pi/4").unwrap(), std::f64::consts::PI / 4.0);
        assert_eq!(parse_number("e/3").unwrap(), std::f64::consts::E / 3.0);
        assert_eq!(parse_number("sqrt(2)").unwrap(), 2f64.sqrt());
        assert!(parse_number("x").is_err());
        assert_eq!(parse_vectors("10,0;3,4").unwrap(), vec![vec![10.0, 0.0], vec![3.0, 4.0]]);
        assert_eq!(
            parse_weights("1/3, 0.5").unwrap(),
            vec![Exact::new(1, 3), Exact::new(1, 2)]
        );
        assert!(parse_weights("0.7071067811865476").is_err());
    }

    #[test]
    fn relabeling_is_injective_and_changes_eigenvalues() {
        let game = QuantumGame::rational_two_outcome(1, 3, 10.0, 0.0).unwrap();
        let (r, text) = rank_relabeling(&game).unwrap();
        assert_eq!(text, "1->4,2->1");
        let keys: Vec<f64> = r.payoff.entries().keys().map(|x| x.value()).collect();
        assert_eq!(keys, vec![1.0, 4.0]);
    }

    #[test]
    fn combine_takes_worst() {
        let s = Strategy::Born;
        let a = verify_stage3(&s, 1, 3, &[(10.0, 0.0)]).unwrap();
        let b = verify_stage3(&Strategy::egalitarian(1e-6).unwrap(), 1, 3, &[(10.0, 0.0)]).unwrap();
        let c = combine(vec![a, b]).unwrap();
        assert!(!c.pass);
        assert_eq!(c.verdict, Verdict::Fail);
        assert_eq!(c.cases.len(), 2);
        assert!(combine(vec![]).is_none());
    }
}
