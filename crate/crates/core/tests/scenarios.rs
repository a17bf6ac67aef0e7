use everlab_core::branching::{branch, to_csv};
use everlab_core::confirmation::{build_dutch_book, CredenceState, UpdatePolicy};
use everlab_core::emit::{emit, Format};
use everlab_core::exact::Exact;
use everlab_core::quantum::{validate_game, Violation};
use everlab_core::strategy::{value_game, GameTable};
use everlab_core::verifier::{verify_stage3, verify_stage_general, verify_stage_multi, Verdict};
use everlab_core::{Eigenvalue, MeasurementRealization, QuantumGame, Strategy};

const GAME: &str = r#"{
  "state": [{"label": "x1", "re": 0.6}, {"label": "x2", "re": 0.8}],
  "observable": {"name": "X", "eigenvalues": {"x1": 1, "x2": 2}},
  "payoff": {"1": {"consequence": "win", "utility": 10}, "2": {"consequence": "lose", "utility": 0}}
}"#;

#[test]
fn game_document_round_trips() {
    let game = QuantumGame::from_json(GAME).unwrap();
    assert!(validate_game(&game).is_empty());
    let again = QuantumGame::from_json(&game.to_json()).unwrap();
    assert_eq!(game, again);
    let v = value_game(&Strategy::Born, &game, &MeasurementRealization::direct()).unwrap();
    assert!((v - 3.6).abs() < 1e-12);
}

#[test]
fn invalid_games_are_diagnosed() {
    let text = GAME.replace("0.8", "0.7").replace(r#""2": {"consequence": "lose", "utility": 0}"#, r#""3": {"consequence": "lose", "utility": 0}"#);
    let game = QuantumGame::from_json(&text).unwrap();
    let report = validate_game(&game);
    assert!(matches!(report.violations[0], Violation::NotNormalized { .. }));
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::MissingPayoff { eigenvalue } if *eigenvalue == 2.0)));
    assert!(value_game(&Strategy::Born, &game, &MeasurementRealization::direct()).is_err());
}

#[test]
fn unknown_document_keys_are_rejected() {
    let text = GAME.replace(r#""name": "X""#, r#""name": "X", "basis": "z""#);
    assert!(QuantumGame::from_json(&text).is_err());
}

#[test]
fn two_measurements_multiply_weights() {
    let game = QuantumGame::rational_two_outcome(1, 3, 1.0, 0.0).unwrap();
    let direct = MeasurementRealization::direct();
    let tree = branch(&game, &direct, 2).unwrap().extend(&game, &direct).unwrap();
    assert_eq!(tree.leaves().len(), 4);
    let exact: Vec<Exact> = tree.leaves().iter().map(|l| l.exact_weight.unwrap()).collect();
    assert_eq!(exact, vec![Exact::new(1, 9), Exact::new(2, 9), Exact::new(2, 9), Exact::new(4, 9)]);
    assert_eq!(tree.leaves()[1].history, vec![Eigenvalue(1.0)]);

    let csv = to_csv(&tree);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("outcome,history,cell_index,weight"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn table_preferences_value_by_rank_only() {
    let direct = MeasurementRealization::direct();
    let good = QuantumGame::rational_two_outcome(1, 3, 10.0, 0.0).unwrap();
    let bad = QuantumGame::rational_two_outcome(1, 2, 10.0, 0.0).unwrap();
    let table = GameTable::from_ranking(vec![vec![(good.clone(), None)], vec![(bad.clone(), None)]]);
    let s = Strategy::TablePreference(table);
    assert_eq!(value_game(&s, &good, &direct).unwrap(), 1.0);
    assert_eq!(value_game(&s, &bad, &direct).unwrap(), 0.0);
    let unranked = QuantumGame::rational_two_outcome(1, 4, 10.0, 0.0).unwrap();
    assert!(value_game(&s, &unranked, &direct).is_err());
}

#[test]
fn egalitarian_fails_stage_three_and_irrational_stage() {
    let egal = Strategy::egalitarian(1e-9).unwrap();
    let report = verify_stage3(&egal, 1, 3, &[(10.0, 0.0)]).unwrap();
    assert!(!report.pass);
    assert_eq!(report.verdict, Verdict::Fail);
    assert!((report.residual - 5.0 / 3.0).abs() < 1e-12);

    let general = verify_stage_general(&egal, std::f64::consts::FRAC_1_SQRT_2, (1.0, 0.0), 1e-4, 64).unwrap();
    assert_ne!(general.verdict, Verdict::Pass);
}

#[test]
fn short_caps_are_inconclusive_for_born() {
    let report = verify_stage_general(&Strategy::Born, std::f64::consts::PI / 4.0, (1.0, 0.0), 1e-6, 8).unwrap();
    assert_eq!(report.verdict, Verdict::Inconclusive);
    assert!(!report.pass);
}

#[test]
fn born_values_many_outcome_games_by_decomposition() {
    let weights = [Exact::new(1, 6), Exact::new(1, 2), Exact::new(1, 3)];
    let report = verify_stage_multi(&Strategy::Born, &weights, &[6.0, -2.0, 3.0]).unwrap();
    assert!(report.pass, "{}", report.details);
    let egal = Strategy::egalitarian(1e-9).unwrap();
    assert!(!verify_stage_multi(&egal, &weights, &[6.0, -2.0, 3.0]).unwrap().pass);
}

#[test]
fn reports_emit_identically_in_every_format() {
    let report = verify_stage3(&Strategy::Born, 2, 5, &[(4.0, 1.0), (0.0, 1.0)]).unwrap();
    for format in [Format::Json, Format::Csv, Format::Table] {
        let a = emit(&report, format).unwrap();
        let b = emit(&report, format).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }
    let json: serde_json::Value = serde_json::from_slice(&emit(&report, Format::Json).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
}

#[test]
fn rigid_updater_is_booked_when_evidence_is_relevant() {
    let cred = CredenceState::binary(0.5, 0.9, 0.5).unwrap();
    let book = build_dutch_book(&cred, &UpdatePolicy::Rigid, "A", "T", 1.0).unwrap().unwrap();
    // p(T|A) = 9/14 against q = 1/2, p(A) = 7/10
    let expected = -(9.0 / 14.0 - 0.5) * 0.7;
    for case in everlab_core::confirmation::Case::ALL {
        assert!((book.net(case) - expected).abs() < 1e-12);
    }
    let flat = CredenceState::binary(0.5, 0.4, 0.4).unwrap();
    assert!(build_dutch_book(&flat, &UpdatePolicy::Rigid, "A", "T", 1.0).unwrap().is_none());
}
