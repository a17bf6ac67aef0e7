//! Rival rationality strategies.
//!
//! A strategy turns a branch tree into a caring measure: how much the agent
//! cares about each of its successors. Valuing a game means measuring it
//! under some realization, taking the caring measure of the resulting tree
//! and summing caring × utility over outcomes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{CheckedDiv, CheckedSub};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::branching::{branch, BranchError, BranchTree};
use crate::exact::{self, Exact};
use crate::quantum::{Eigenvalue, MeasurementRealization, PayoffFunction, QuantumError, QuantumGame};

pub const DEFAULT_EGALITARIAN_TAU: f64 = 1e-6;
pub const CARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("egalitarian threshold must be positive, got {0}")]
    BadTau(f64),
    #[error("no cell has sub-weight above tau = {0}")]
    NoOccupiedCells(f64),
    #[error("every eigenvalue is zero; eigenvalue weighting is undefined")]
    ZeroEigenvalues,
    #[error("game is not listed in the preference table")]
    NotInTable,
    #[error("a table strategy values games directly and has no caring measure")]
    NoCaringMeasure,
    #[error("unknown strategy `{0}` (expected born, egalitarian[:tau=T], squared or eigenvalue)")]
    Parse(String),
}

/// One row of an explicit game ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub game: QuantumGame,
    /// `None` matches every realization.
    pub realization: Option<MeasurementRealization>,
    pub value: f64,
}

/// A brute-force preference table: games are valued by their rank in an
/// explicit ordering and nothing else.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GameTable {
    entries: Vec<TableEntry>,
}

impl GameTable {
    pub fn new(entries: Vec<TableEntry>) -> Self {
        Self { entries }
    }

    /// Tiers listed best first. A game in tier `i` of `k` gets value `k − 1 − i`.
    pub fn from_ranking(tiers: Vec<Vec<(QuantumGame, Option<MeasurementRealization>)>>) -> Self {
        let k = tiers.len();
        let entries = tiers
            .into_iter()
            .enumerate()
            .flat_map(|(i, tier)| {
                tier.into_iter().map(move |(game, realization)| TableEntry {
                    game,
                    realization,
                    value: (k - 1 - i) as f64,
                })
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// An entry for this exact realization wins over a realization-agnostic one.
    pub fn lookup(&self, game: &QuantumGame, realization: &MeasurementRealization) -> Option<f64> {
        let matching = |r: Option<&MeasurementRealization>| {
            self.entries
                .iter()
                .find(|e| &e.game == game && e.realization.as_ref() == r)
                .map(|e| e.value)
        };
        matching(Some(realization)).or_else(|| matching(None))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Born,
    Egalitarian { tau: f64 },
    SquaredWeightRenormalized,
    EigenvalueWeighted,
    TablePreference(GameTable),
}

impl Strategy {
    pub fn egalitarian(tau: f64) -> Result<Self, StrategyError> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Strategy::Egalitarian { tau })
        } else {
            Err(StrategyError::BadTau(tau))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Born => "born",
            Strategy::Egalitarian { .. } => "egalitarian",
            Strategy::SquaredWeightRenormalized => "squared",
            Strategy::EigenvalueWeighted => "eigenvalue",
            Strategy::TablePreference(_) => "table",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Egalitarian { tau } => write!(f, "egalitarian:tau={tau:e}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim().to_ascii_lowercase();
        let (head, params) = match text.split_once(':') {
            Some((h, p)) => (h, Some(p)),
            None => (text.as_str(), None),
        };
        match (head, params) {
            ("born", None) => Ok(Strategy::Born),
            ("squared" | "squared-weight", None) => Ok(Strategy::SquaredWeightRenormalized),
            ("eigenvalue" | "eigenvalue-weighted", None) => Ok(Strategy::EigenvalueWeighted),
            ("egalitarian", None) => Strategy::egalitarian(DEFAULT_EGALITARIAN_TAU),
            ("egalitarian", Some(p)) => {
                let tau = p
                    .strip_prefix("tau=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| StrategyError::Parse(s.to_string()))?;
                Strategy::egalitarian(tau)
            }
            _ => Err(StrategyError::Parse(s.to_string())),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CareEntry {
    pub leaf: usize,
    pub label: String,
    /// Set for cell-level measures (Egalitarian).
    pub cell: Option<usize>,
    pub outcome: Eigenvalue,
    pub weight: f64,
}

/// Normalized care over the leaves (or cells) of a tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaringMeasure {
    pub entries: Vec<CareEntry>,
    #[serde(skip)]
    exact: Option<BTreeMap<Eigenvalue, Exact>>,
}

impl CaringMeasure {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn by_outcome(&self) -> BTreeMap<Eigenvalue, f64> {
        if let Some(exact) = &self.exact {
            return exact.iter().map(|(k, v)| (*k, exact::to_f64(v))).collect();
        }
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.outcome).or_insert(0.0) += e.weight;
        }
        out
    }

    /// Per-outcome care as exact ratios, when every input was exact.
    pub fn exact_by_outcome(&self) -> Option<&BTreeMap<Eigenvalue, Exact>> {
        self.exact.as_ref()
    }

    /// Σ care(x)·𝒱(𝒫(x)).
    pub fn value(&self, payoff: &PayoffFunction) -> Result<f64, StrategyError> {
        if let Some(exact) = &self.exact {
            let terms = exact
                .iter()
                .map(|(x, w)| Ok((*w, payoff.utility(*x)?)))
                .collect::<Result<Vec<_>, QuantumError>>()?;
            if let Some(v) = exact::weighted_sum(&terms) {
                return Ok(v);
            }
        }
        let mut v = 0.0;
        for (x, w) in self.by_outcome() {
            v += w * payoff.utility(x)?;
        }
        Ok(v)
    }
}

fn sum_exact_by_outcome<I>(items: I) -> Option<BTreeMap<Eigenvalue, Exact>>
where
    I: IntoIterator<Item = (Eigenvalue, Option<Exact>)>,
{
    let mut out: BTreeMap<Eigenvalue, Exact> = BTreeMap::new();
    for (x, w) in items {
        let w = w?;
        let slot = out.entry(x).or_insert_with(|| Exact::from_integer(0));
        *slot = exact::checked_sum([*slot, w].iter())?;
    }
    Some(out)
}

fn scale_exact(
    map: Option<BTreeMap<Eigenvalue, Exact>>,
    total: Option<Exact>,
) -> Option<BTreeMap<Eigenvalue, Exact>> {
    let total = total?;
    if total == Exact::from_integer(0) {
        return None;
    }
    let inv = Exact::from_integer(1).checked_div(&total)?;
    map?.into_iter()
        .map(|(k, v)| exact::checked_product(&v, &inv).map(|w| (k, w)))
        .collect()
}

fn integral_exact(x: f64) -> Option<Exact> {
    (x.fract() == 0.0 && x.abs() < 1e15).then(|| Exact::from_integer(x as i64))
}

pub fn caring_measure(strategy: &Strategy, tree: &BranchTree) -> Result<CaringMeasure, StrategyError> {
    let leaves = tree.leaves();
    match strategy {
        Strategy::Born => {
            let exact = sum_exact_by_outcome(leaves.iter().map(|l| (l.outcome, l.exact_weight)));
            let entries = leaves
                .iter()
                .enumerate()
                .map(|(i, l)| CareEntry {
                    leaf: i,
                    label: l.label.clone(),
                    cell: None,
                    outcome: l.outcome,
                    weight: l.weight,
                })
                .collect();
            Ok(CaringMeasure { entries, exact })
        }
        Strategy::Egalitarian { tau } => {
            let mut occupied = Vec::new();
            for (i, l) in leaves.iter().enumerate() {
                for c in l.occupied_cells(*tau) {
                    occupied.push((i, c));
                }
            }
            if occupied.is_empty() {
                return Err(StrategyError::NoOccupiedCells(*tau));
            }
            let k = occupied.len();
            let share = Exact::new(1, k as i64);
            let exact = sum_exact_by_outcome(occupied.iter().map(|&(i, _)| (leaves[i].outcome, Some(share))));
            let entries = occupied
                .into_iter()
                .map(|(i, c)| CareEntry {
                    leaf: i,
                    label: leaves[i].label.clone(),
                    cell: Some(c),
                    outcome: leaves[i].outcome,
                    weight: 1.0 / k as f64,
                })
                .collect();
            Ok(CaringMeasure { entries, exact })
        }
        Strategy::SquaredWeightRenormalized => {
            let squares: Vec<f64> = leaves.iter().map(|l| l.weight * l.weight).collect();
            let total: f64 = squares.iter().sum();
            let exact_squares: Vec<Option<Exact>> = leaves
                .iter()
                .map(|l| l.exact_weight.and_then(|w| exact::checked_product(&w, &w)))
                .collect();
            let exact_total = exact_squares
                .iter()
                .copied()
                .collect::<Option<Vec<_>>>()
                .and_then(|v| exact::checked_sum(v.iter()));
            let exact = scale_exact(
                sum_exact_by_outcome(leaves.iter().zip(&exact_squares).map(|(l, w)| (l.outcome, *w))),
                exact_total,
            );
            let entries = leaves
                .iter()
                .enumerate()
                .map(|(i, l)| CareEntry {
                    leaf: i,
                    label: l.label.clone(),
                    cell: None,
                    outcome: l.outcome,
                    weight: squares[i] / total,
                })
                .collect();
            Ok(CaringMeasure { entries, exact })
        }
        Strategy::EigenvalueWeighted => {
            let mags: Vec<f64> = leaves.iter().map(|l| l.outcome.value().abs()).collect();
            let total: f64 = mags.iter().sum();
            if total == 0.0 {
                return Err(StrategyError::ZeroEigenvalues);
            }
            let exact_mags: Vec<Option<Exact>> = mags.iter().map(|m| integral_exact(*m)).collect();
            let exact_total = exact_mags
                .iter()
                .copied()
                .collect::<Option<Vec<_>>>()
                .and_then(|v| exact::checked_sum(v.iter()));
            let exact = scale_exact(
                sum_exact_by_outcome(leaves.iter().zip(&exact_mags).map(|(l, m)| (l.outcome, *m))),
                exact_total,
            );
            let entries = leaves
                .iter()
                .enumerate()
                .map(|(i, l)| CareEntry {
                    leaf: i,
                    label: l.label.clone(),
                    cell: None,
                    outcome: l.outcome,
                    weight: mags[i] / total,
                })
                .collect();
            Ok(CaringMeasure { entries, exact })
        }
        Strategy::TablePreference(_) => Err(StrategyError::NoCaringMeasure),
    }
}

/// Value of a tree whose leaf outcomes are paid by `payoff`.
pub fn value_tree(
    strategy: &Strategy,
    tree: &BranchTree,
    payoff: &PayoffFunction,
) -> Result<f64, StrategyError> {
    caring_measure(strategy, tree)?.value(payoff)
}

pub fn value_game(
    strategy: &Strategy,
    game: &QuantumGame,
    realization: &MeasurementRealization,
) -> Result<f64, StrategyError> {
    if let Strategy::TablePreference(table) = strategy {
        return table.lookup(game, realization).ok_or(StrategyError::NotInTable);
    }
    let tree = branch(game, realization, 1)?;
    value_tree(strategy, &tree, &game.payoff)
}

/// Largest pairwise difference in game value across realizations.
///
/// When both caring measures are exact the difference is formed from the
/// exact per-outcome care differences, so e.g. 5 − 10/3 comes out as 5/3.
pub fn mn_violation(
    strategy: &Strategy,
    game: &QuantumGame,
    realizations: &[MeasurementRealization],
) -> Result<f64, StrategyError> {
    if let Strategy::TablePreference(_) = strategy {
        let values = realizations
            .iter()
            .map(|r| value_game(strategy, game, r))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(spread(&values));
    }
    let measures = realizations
        .iter()
        .map(|r| caring_measure(strategy, &branch(game, r, 1)?))
        .collect::<Result<Vec<_>, _>>()?;
    let values = measures
        .iter()
        .map(|m| m.value(&game.payoff))
        .collect::<Result<Vec<_>, _>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..measures.len() {
        for j in (i + 1)..measures.len() {
            let d = exact_difference(&measures[i], &measures[j], &game.payoff)?
                .unwrap_or_else(|| (values[i] - values[j]).abs());
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

fn exact_difference(
    a: &CaringMeasure,
    b: &CaringMeasure,
    payoff: &PayoffFunction,
) -> Result<Option<f64>, StrategyError> {
    let (Some(ea), Some(eb)) = (a.exact_by_outcome(), b.exact_by_outcome()) else {
        return Ok(None);
    };
    let zero = Exact::from_integer(0);
    let mut terms = Vec::new();
    for x in ea.keys().chain(eb.keys()) {
        if terms.iter().any(|(y, _, _)| y == x) {
            continue;
        }
        let wa = ea.get(x).copied().unwrap_or(zero);
        let wb = eb.get(x).copied().unwrap_or(zero);
        let Some(d) = wa.checked_sub(&wb) else {
            return Ok(None);
        };
        terms.push((*x, d, payoff.utility(*x)?));
    }
    let terms: Vec<(Exact, f64)> = terms.into_iter().map(|(_, d, u)| (d, u)).collect();
    Ok(exact::weighted_sum(&terms).map(f64::abs))
}

fn spread(values: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            worst = worst.max((values[i] - values[j]).abs());
        }
    }
    worst
}
