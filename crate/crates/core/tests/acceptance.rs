//! Acceptance suite: ten criteria, each checked against an oracle computed
//! here, independently of the library's own bookkeeping. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use everlab_core::confirmation::{
    build_dutch_book, case_tree, confirmation_experiment, enumerate_confirmation,
    evaluate_book_on_branches, CredenceState, ExperimentConfig, Theory, UpdatePolicy,
};
use everlab_core::decision::{
    expected_utility, extract_representation, random_instance, Extraction, PreferenceRelation,
};
use everlab_core::strategy::{mn_violation, value_game};
use everlab_core::verifier::{
    egalitarian_incoherence_demo, regression_demo_ops, verify_stage1, verify_stage2,
    verify_stage3, verify_stage_general, Verdict,
};
use everlab_core::{Act, Eigenvalue, MeasurementRealization, QuantumGame, Strategy};
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i64>;
type Outcome = Result<String, String>;

const EXACT: f64 = 1e-12;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn q(x: &Q) -> f64 {
    x.to_f64().unwrap()
}

fn random_rational(rng: &mut ChaCha8Rng) -> Q {
    Q::new(rng.gen_range(-100..=100), rng.gen_range(1..=16))
}

fn egalitarian() -> Strategy {
    Strategy::egalitarian(1e-6).unwrap()
}

fn c1_stage1() -> Outcome {
    let born = Strategy::Born;
    let direct = MeasurementRealization::direct();
    let game = QuantumGame::equal_superposition(&[0.0, 1.0]).map_err(|e| e.to_string())?;
    let v = value_game(&born, &game, &direct).map_err(|e| e.to_string())?;
    ensure((v - 0.5).abs() <= EXACT, || format!("value {v}, expected 0.5"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut payoffs = Vec::new();
    for _ in 0..100 {
        let (a, b) = (random_rational(&mut rng), random_rational(&mut rng));
        let expected = q(&((a + b) / 2));
        let game = QuantumGame::equal_superposition(&[q(&a), q(&b)]).map_err(|e| e.to_string())?;
        let v = value_game(&born, &game, &direct).map_err(|e| e.to_string())?;
        worst = worst.max((v - expected).abs());
        payoffs.push((q(&a), q(&b)));
    }
    ensure(worst <= EXACT, || format!("sweep residual {worst:e}"))?;
    let report = verify_stage1(&born, &payoffs).map_err(|e| e.to_string())?;
    ensure(report.pass, || format!("stage report residual {:e}", report.residual))?;
    Ok(format!("value 0.5, 100-payoff sweep residual {worst:e}"))
}

fn c2_stage2() -> Outcome {
    let born = Strategy::Born;
    let direct = MeasurementRealization::direct();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for n in 1..=64usize {
        let mut payoffs = Vec::new();
        for _ in 0..20 {
            let u: Vec<Q> = (0..n).map(|_| random_rational(&mut rng)).collect();
            let mean = u.iter().fold(Q::from_integer(0), |acc, x| acc + x) / n as i64;
            let uf: Vec<f64> = u.iter().map(q).collect();
            let game = QuantumGame::equal_superposition(&uf).map_err(|e| e.to_string())?;
            let v = value_game(&born, &game, &direct).map_err(|e| e.to_string())?;
            worst = worst.max((v - q(&mean)).abs());
            payoffs.push(uf);
        }
        let report = verify_stage2(&born, n, &payoffs).map_err(|e| e.to_string())?;
        ensure(report.pass, || format!("n={n}: stage report residual {:e}", report.residual))?;
    }
    ensure(worst <= EXACT, || format!("worst residual {worst:e}"))?;
    Ok(format!("n = 1..64, 20 payoffs each, worst residual {worst:e}"))
}

fn c3_stage3() -> Outcome {
    let born = Strategy::Born;
    let direct = MeasurementRealization::direct();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for n in 2..=32i64 {
        for m in 1..n {
            let (a, b) = (random_rational(&mut rng), random_rational(&mut rng));
            let oracle = q(&((a * m + b * (n - m)) / n));
            let game = QuantumGame::rational_two_outcome(m, n, q(&a), q(&b)).map_err(|e| e.to_string())?;
            let anc = MeasurementRealization::ancilla(m as u32, n as u32).map_err(|e| e.to_string())?;
            let v = value_game(&born, &game, &anc).map_err(|e| e.to_string())?;
            worst = worst.max((v - oracle).abs());
            let delta = mn_violation(&born, &game, &[direct.clone(), anc]).map_err(|e| e.to_string())?;
            ensure(delta == 0.0, || format!("Born MN delta {delta:e} at ({m},{n})"))?;
            let report = verify_stage3(&born, m as u32, n as u32, &[(10.0, 0.0)]).map_err(|e| e.to_string())?;
            ensure(report.pass, || format!("stage report fails at ({m},{n})"))?;
        }
    }
    ensure(worst <= EXACT, || format!("worst Born residual {worst:e}"))?;

    let egal = egalitarian();
    let game = QuantumGame::rational_two_outcome(1, 3, 10.0, 0.0).map_err(|e| e.to_string())?;
    let anc = MeasurementRealization::ancilla(1, 3).map_err(|e| e.to_string())?;
    let vd = value_game(&egal, &game, &direct).map_err(|e| e.to_string())?;
    let va = value_game(&egal, &game, &anc).map_err(|e| e.to_string())?;
    let delta = mn_violation(&egal, &game, &[direct, anc]).map_err(|e| e.to_string())?;
    ensure(vd == 5.0, || format!("Egalitarian direct value {vd}"))?;
    ensure(va == q(&Q::new(10, 3)), || format!("Egalitarian ancilla value {va}"))?;
    ensure(delta == q(&Q::new(5, 3)), || format!("Egalitarian MN delta {delta}"))?;
    Ok(format!(
        "496 (m,n) pairs, worst Born residual {worst:e}, Born MN 0; Egalitarian 5 vs 10/3, delta 5/3"
    ))
}

/// Closest m/n with 1 ≤ m < n ≤ cap, smallest n on ties.
fn best_fraction(x: f64, cap: i64) -> (i64, i64) {
    let mut best = (1, 2, f64::INFINITY);
    for n in 2..=cap {
        for m in [(x * n as f64).floor() as i64, (x * n as f64).ceil() as i64] {
            if m < 1 || m >= n {
                continue;
            }
            let err = (x - m as f64 / n as f64).abs();
            if err < best.2 {
                best = (m, n, err);
            }
        }
    }
    (best.0, best.1)
}

fn c4_irrational() -> Outcome {
    let born = Strategy::Born;
    let targets = [
        ("1/sqrt2", std::f64::consts::FRAC_1_SQRT_2),
        ("pi/4", std::f64::consts::PI / 4.0),
        ("e/3", (std::f64::consts::E / 3.0).clamp(1e-9, 1.0 - 1e-9)),
    ];
    let mut summary = Vec::new();
    for (name, a) in targets {
        let mut residuals = Vec::new();
        let mut cap = 2;
        while cap <= 4096 {
            let (m, n) = best_fraction(a, cap);
            let game = QuantumGame::rational_two_outcome(m, n, 1.0, 0.0).map_err(|e| e.to_string())?;
            let anc = MeasurementRealization::ancilla(m as u32, n as u32).map_err(|e| e.to_string())?;
            let v = value_game(&born, &game, &anc).map_err(|e| e.to_string())?;
            residuals.push((v - a).abs());
            cap *= 2;
        }
        let monotone = residuals.windows(2).all(|w| w[1] <= w[0] + EXACT);
        ensure(monotone, || format!("{name}: residuals not monotone {residuals:?}"))?;
        let last = *residuals.last().unwrap();
        ensure(last < 1e-4, || format!("{name}: final residual {last:e}"))?;
        let report = verify_stage_general(&born, a, (1.0, 0.0), 1e-4, 4096).map_err(|e| e.to_string())?;
        ensure(report.verdict == Verdict::Pass, || format!("{name}: verdict {:?}", report.verdict))?;
        summary.push(format!("{name} {last:.1e}"));
    }
    Ok(format!("monotone convergence, final residuals: {}", summary.join(", ")))
}

fn c5_demo() -> Outcome {
    let game = QuantumGame::rational_two_outcome(1, 3, 10.0, 0.0).map_err(|e| e.to_string())?;
    let report = egalitarian_incoherence_demo(&game, &regression_demo_ops(), 8, 1e-9).map_err(|e| e.to_string())?;
    let initial = &report.steps[0];
    let oracle_weights = [("1", 1.0 / 3.0), ("2", 2.0 / 3.0)];
    let mut drift: f64 = 0.0;
    let mut counts_changed = false;
    let mut egal_shift: f64 = 0.0;
    let mut born_drift: f64 = 0.0;
    for step in &report.steps {
        for (k, w) in oracle_weights {
            drift = drift.max((step.weights[k] - w).abs());
        }
        counts_changed |= step.branch_counts != initial.branch_counts;
        egal_shift = egal_shift.max((step.egalitarian_value - initial.egalitarian_value).abs());
        born_drift = born_drift.max((step.born_value - 10.0 / 3.0).abs());
    }
    ensure(drift <= 1e-9, || format!("weight drift {drift:e}"))?;
    ensure(counts_changed, || "branch counts never changed".into())?;
    ensure(egal_shift > 1e-3, || format!("Egalitarian shift {egal_shift:e}"))?;
    ensure(born_drift < 1e-12, || format!("Born drift {born_drift:e}"))?;
    ensure(report.pass, || "demo report does not pass".into())?;
    Ok(format!(
        "weight drift {drift:e}, Egalitarian shift {egal_shift}, Born drift {born_drift:e}"
    ))
}

fn c6_dutch_book() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p_a: f64 = rng.gen_range(0.01..=0.99);
        let p: f64 = rng.gen_range(0.0..=1.0);
        let announced = loop {
            let x: f64 = rng.gen_range(0.0..=1.0);
            if (x - p).abs() >= 0.01 {
                break x;
            }
        };
        let stake: f64 = rng.gen_range(0.1..=10.0);
        let oracle = -(p - announced).abs() * p_a * stake;
        let cred = CredenceState::with_marginals(p_a, p).map_err(|e| e.to_string())?;
        let book = build_dutch_book(&cred, &UpdatePolicy::deviant("T", "A", announced), "A", "T", stake)
            .map_err(|e| e.to_string())?
            .ok_or("no book built for a deviant agent")?;
        let (tree, truth) = case_tree(&cred, "A", "T").map_err(|e| e.to_string())?;
        let leaves = evaluate_book_on_branches(Some(&book), &tree, &truth).map_err(|e| e.to_string())?;
        ensure(leaves.len() == 3, || "case tree must have three leaves".into())?;
        for leaf in leaves {
            worst = worst.max((leaf.net - oracle).abs());
        }
    }
    ensure(worst <= EXACT, || format!("worst deviation {worst:e}"))?;

    let cred = CredenceState::with_marginals(0.5, 0.8).map_err(|e| e.to_string())?;
    let book = build_dutch_book(&cred, &UpdatePolicy::deviant("T", "A", 0.6), "A", "T", 1.0)
        .map_err(|e| e.to_string())?
        .ok_or("no book for the worked case")?;
    let (tree, truth) = case_tree(&cred, "A", "T").map_err(|e| e.to_string())?;
    for leaf in evaluate_book_on_branches(Some(&book), &tree, &truth).map_err(|e| e.to_string())? {
        ensure(leaf.net == -0.1, || format!("worked case leaf {} nets {}", leaf.leaf, leaf.net))?;
    }
    Ok(format!("1000 books, worst deviation {worst:e}; worked case -0.1 on every leaf"))
}

fn c7_conditionalization() -> Outcome {
    let c = CredenceState::binary(0.5, 0.9, 0.5).map_err(|e| e.to_string())?;
    let post = c.conditionalize("A").map_err(|e| e.to_string())?.credences["T"];
    let oracle = q(&(Q::new(9, 10) * Q::new(1, 2) / (Q::new(9, 10) * Q::new(1, 2) + Q::new(1, 2) * Q::new(1, 2))));
    ensure((post - oracle).abs() <= EXACT, || format!("posterior {post}, expected 9/14"))?;

    for prior in [0.1, 0.37, 0.5, 0.93] {
        let c = CredenceState::binary(prior, 0.4, 0.4).map_err(|e| e.to_string())?;
        let post = c.conditionalize("A").map_err(|e| e.to_string())?;
        ensure(post.credences == c.credences, || format!("uninformative evidence moved prior {prior}"))?;
    }
    for (prior, expected) in [(1.0, 1.0), (0.0, 0.0)] {
        let c = CredenceState::binary(prior, 0.3, 0.8).map_err(|e| e.to_string())?;
        let post = c.conditionalize("A").map_err(|e| e.to_string())?.credences["T"];
        ensure(post == expected, || format!("dogmatic prior {prior} moved to {post}"))?;
    }
    Ok(format!("posterior {post} (9/14), uninformative and dogmatic cases exact"))
}

fn c8_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut pairs_checked = 0usize;
    for id in 0..200 {
        let (setup, generator) = random_instance(&mut rng, 4, 4, 1e-6);
        let acts = setup.all_acts();
        let prefs = PreferenceRelation::from_representation(setup.clone(), acts.clone(), &generator)
            .map_err(|e| e.to_string())?;
        let extracted = match extract_representation(&prefs).map_err(|e| e.to_string())? {
            Extraction::Feasible { representation, .. } => representation,
            Extraction::Infeasible { margin, .. } => {
                return Err(format!("instance {id}: no representation found (margin {margin:e})"))
            }
        };
        let eu = |act: &Act, probability: &BTreeMap<String, f64>, utility: &BTreeMap<String, f64>| -> f64 {
            setup
                .states()
                .iter()
                .map(|s| probability[s] * utility[act.get(s).unwrap()])
                .sum()
        };
        let truth: Vec<f64> = acts.iter().map(|a| eu(a, &generator.probability, &generator.utility)).collect();
        let found: Vec<f64> = acts.iter().map(|a| eu(a, &extracted.probability, &extracted.utility)).collect();
        for i in 0..acts.len() {
            for j in 0..acts.len() {
                if i == j {
                    continue;
                }
                let want = truth[i].total_cmp(&truth[j]);
                let got = found[i].total_cmp(&found[j]);
                ensure(want == got, || format!("instance {id}: {} vs {} ordered {got:?}, expected {want:?}", acts[i], acts[j]))?;
                pairs_checked += 1;
            }
        }
        let library = expected_utility(&acts[0], &extracted).map_err(|e| e.to_string())?;
        ensure((library - found[0]).abs() <= EXACT, || format!("instance {id}: EU mismatch"))?;
    }
    Ok(format!("200 instances, {pairs_checked} ordered pairs reproduced"))
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn c9_confirmation() -> Outcome {
    let game = QuantumGame::rational_two_outcome(1, 3, 1.0, 0.0).map_err(|e| e.to_string())?;
    let (b1, r1): (f64, f64) = (1.0 / 3.0, 0.9);
    let cfg = |depth| ExperimentConfig {
        theories: vec![
            Theory::born("born", 0.5, &game).unwrap(),
            Theory {
                name: "rival".into(),
                prior: 0.5,
                likelihoods: vec![[(Eigenvalue(1.0), r1), (Eigenvalue(2.0), 1.0 - r1)].into()],
            },
        ],
        games: vec![game.clone()],
        strategy: Strategy::Born,
        depth,
        true_theory: "born".into(),
        threshold: 0.95,
    };
    let report = confirmation_experiment(&cfg(20)).map_err(|e| e.to_string())?;

    let depth = 20u64;
    let mut oracle = 0.0;
    for k in 0..=depth {
        let lb = b1.powi(k as i32) * (1.0 - b1).powi((depth - k) as i32);
        let lr = r1.powi(k as i32) * (1.0 - r1).powi((depth - k) as i32);
        if lb / (lb + lr) > 0.95 {
            oracle += binomial(depth, k) * lb;
        }
    }
    ensure((report.mass_above_threshold - oracle).abs() <= 1e-9, || {
        format!("mass {} vs binomial oracle {oracle}", report.mass_above_threshold)
    })?;
    ensure(report.mass_above_threshold > 0.99, || format!("mass {}", report.mass_above_threshold))?;

    let merged = confirmation_experiment(&cfg(8)).map_err(|e| e.to_string())?;
    let full = enumerate_confirmation(&cfg(8)).map_err(|e| e.to_string())?;
    let mut diff = (merged.mass_above_threshold - full.mass_above_threshold).abs();
    for (a, b) in merged.mean_true_credence.iter().zip(&full.mean_true_credence) {
        diff = diff.max((a - b).abs());
    }
    ensure(diff <= 1e-12, || format!("depth-8 enumeration differs by {diff:e}"))?;
    Ok(format!(
        "mass {:.6} > 0.99 (oracle {oracle:.6}); depth-8 enumeration agrees to {diff:e}",
        report.mass_above_threshold
    ))
}

fn c10_physicality() -> Outcome {
    let game = QuantumGame::rational_two_outcome(1, 3, 10.0, 0.0).map_err(|e| e.to_string())?;
    let relabel: BTreeMap<Eigenvalue, Eigenvalue> =
        [(Eigenvalue(1.0), Eigenvalue(5.0)), (Eigenvalue(2.0), Eigenvalue(-3.0))].into();
    let moved = game
        .relabeled(|l| format!("y_{l}"), |x| relabel[&x])
        .map_err(|e| e.to_string())?;
    let realizations = [
        MeasurementRealization::direct(),
        MeasurementRealization::ancilla(1, 3).map_err(|e| e.to_string())?,
    ];
    for s in [Strategy::Born, egalitarian(), Strategy::SquaredWeightRenormalized] {
        for r in &realizations {
            let a = value_game(&s, &game, r).map_err(|e| e.to_string())?;
            let b = value_game(&s, &moved, r).map_err(|e| e.to_string())?;
            ensure((a - b).abs() <= EXACT, || format!("{s} under {r}: {a} vs {b}"))?;
        }
    }
    let direct = &realizations[0];
    let e = Strategy::EigenvalueWeighted;
    let a = value_game(&e, &game, direct).map_err(|e| e.to_string())?;
    let b = value_game(&e, &moved, direct).map_err(|e| e.to_string())?;
    // care ∝ |eigenvalue|: (1, 2) before, (5, 3) after
    ensure((a - 10.0 / 3.0).abs() <= EXACT, || format!("eigenvalue value {a}, expected 10/3"))?;
    ensure((b - 6.25).abs() <= EXACT, || format!("relabeled eigenvalue value {b}, expected 6.25"))?;
    ensure((a - b).abs() > EXACT, || "eigenvalue strategy invariant under relabeling".into())?;
    Ok(format!("Born, Egalitarian, squared invariant; eigenvalue {a:.6} -> {b}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "stage 1 equal two-branch game", limit: secs(1), check: c1_stage1 },
        Criterion { id: 2, name: "stage 2 equal n-branch games", limit: secs(5), check: c2_stage2 },
        Criterion { id: 3, name: "stage 3 ancilla realizations", limit: secs(10), check: c3_stage3 },
        Criterion { id: 4, name: "stages 4-6 irrational weights", limit: secs(30), check: c4_irrational },
        Criterion { id: 5, name: "branch-count incoherence demo", limit: None, check: c5_demo },
        Criterion { id: 6, name: "diachronic Dutch book", limit: secs(5), check: c6_dutch_book },
        Criterion { id: 7, name: "conditionalization", limit: None, check: c7_conditionalization },
        Criterion { id: 8, name: "representation round-trip", limit: secs(60), check: c8_round_trip },
        Criterion { id: 9, name: "confirmation experiment", limit: secs(10), check: c9_confirmation },
        Criterion { id: 10, name: "physicality relabeling", limit: None, check: c10_physicality },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(msg), Some(limit)) if elapsed > limit => {
                Err(format!("{msg}; took {elapsed:.2?}, limit {limit:?}"))
            }
            (r, _) => r,
        };
        match result {
            Ok(msg) => println!("PASS criterion {:>2} ({}): {msg} [{elapsed:.2?}]", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({}): {msg} [{elapsed:.2?}]", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
