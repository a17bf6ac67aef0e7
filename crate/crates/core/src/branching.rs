//! Weighted branch trees in the style of a decoherence-based branch
//! decomposition.
//!
//! Each leaf carries its amplitude-squared weight spread over `fine_dim`
//! fine-grained cells. A "branch" in the counting sense is an occupied cell:
//! one whose sub-weight exceeds the tree's grain `τ`. Small basis rotations
//! ([`rotate_basis`]) and coarse-graining ([`coarse_grain`]) move the count
//! around freely while the per-outcome weight never changes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emit::fmt_float;
use crate::exact::{self, Exact};
use crate::quantum::{
    born_weights, born_weights_exact, couple_ancilla, Eigenvalue, MeasurementRealization,
    QuantumError, QuantumGame, RealizationKind,
};

pub const DEFAULT_GRAIN: f64 = 1e-9;
pub const WEIGHT_TOLERANCE: f64 = 1e-9;
/// Rotations are "small": `|ε| < MAX_EPSILON`.
pub const MAX_EPSILON: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("fine_dim must be at least 1")]
    ZeroFineDim,
    #[error("grain must be positive and finite, got {0}")]
    BadGrain(f64),
    #[error("rotation angle {0} outside |epsilon| < 0.1")]
    EpsilonOutOfRange(f64),
    #[error("cell pair ({first}, {second}) invalid for fine_dim {fine_dim}")]
    BadPair {
        first: usize,
        second: usize,
        fine_dim: usize,
    },
    #[error("coarse-graining factor {factor} does not divide fine_dim {fine_dim}")]
    BadFactor { factor: usize, fine_dim: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchLeaf {
    /// Basis label(s) the leaf came from, e.g. `x1` or `y2`.
    pub label: String,
    pub outcome: Eigenvalue,
    /// Outcomes of earlier measurements on the path to this leaf.
    pub history: Vec<Eigenvalue>,
    pub weight: f64,
    #[serde(skip)]
    pub exact_weight: Option<Exact>,
    pub cells: Vec<f64>,
}

impl BranchLeaf {
    /// A leaf whose whole weight sits in cell 0.
    pub fn fresh(
        label: impl Into<String>,
        outcome: Eigenvalue,
        history: Vec<Eigenvalue>,
        weight: f64,
        exact_weight: Option<Exact>,
        fine_dim: usize,
    ) -> Self {
        let mut cells = vec![0.0; fine_dim];
        cells[0] = weight;
        Self {
            label: label.into(),
            outcome,
            history,
            weight,
            exact_weight,
            cells,
        }
    }

    pub fn occupied_cells(&self, tau: f64) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, w)| **w > tau)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchTree {
    leaves: Vec<BranchLeaf>,
    grain: f64,
    fine_dim: usize,
}

impl BranchTree {
    pub fn from_leaves(
        leaves: Vec<BranchLeaf>,
        grain: f64,
        fine_dim: usize,
    ) -> Result<Self, BranchError> {
        if fine_dim == 0 {
            return Err(BranchError::ZeroFineDim);
        }
        if !(grain > 0.0 && grain.is_finite()) {
            return Err(BranchError::BadGrain(grain));
        }
        let mut total = 0.0;
        for (i, leaf) in leaves.iter().enumerate() {
            if leaf.cells.len() != fine_dim {
                return Err(BranchError::InvalidTree(format!(
                    "leaf {i} has {} cells, expected {fine_dim}",
                    leaf.cells.len()
                )));
            }
            if !(leaf.weight >= 0.0) || leaf.cells.iter().any(|c| !(*c >= 0.0)) {
                return Err(BranchError::InvalidTree(format!("leaf {i} has a negative weight")));
            }
            let cell_sum: f64 = leaf.cells.iter().sum();
            if (cell_sum - leaf.weight).abs() > WEIGHT_TOLERANCE {
                return Err(BranchError::InvalidTree(format!(
                    "leaf {i} cells sum to {cell_sum}, weight is {}",
                    leaf.weight
                )));
            }
            total += leaf.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(BranchError::InvalidTree(format!("leaf weights sum to {total}")));
        }
        Ok(Self {
            leaves,
            grain,
            fine_dim,
        })
    }

    pub fn leaves(&self) -> &[BranchLeaf] {
        &self.leaves
    }

    pub fn grain(&self) -> f64 {
        self.grain
    }

    pub fn fine_dim(&self) -> usize {
        self.fine_dim
    }

    pub fn with_grain(mut self, grain: f64) -> Result<Self, BranchError> {
        if !(grain > 0.0 && grain.is_finite()) {
            return Err(BranchError::BadGrain(grain));
        }
        self.grain = grain;
        Ok(self)
    }

    pub fn outcomes(&self) -> BTreeSet<Eigenvalue> {
        self.leaves.iter().map(|l| l.outcome).collect()
    }

    /// Total weight per outcome (summed over leaves and histories).
    pub fn per_outcome_weights(&self) -> BTreeMap<Eigenvalue, f64> {
        let mut out = BTreeMap::new();
        for leaf in &self.leaves {
            *out.entry(leaf.outcome).or_insert(0.0) += leaf.cells.iter().sum::<f64>();
        }
        out
    }

    /// Branches every leaf again by measuring `game`, multiplying weights.
    /// The old outcome moves onto the history.
    pub fn extend(
        &self,
        game: &QuantumGame,
        realization: &MeasurementRealization,
    ) -> Result<Self, BranchError> {
        let step = branch(game, realization, self.fine_dim)?;
        let mut leaves = Vec::with_capacity(self.leaves.len() * step.leaves.len());
        for parent in &self.leaves {
            let mut history = parent.history.clone();
            history.push(parent.outcome);
            for child in &step.leaves {
                let exact_weight = match (&parent.exact_weight, &child.exact_weight) {
                    (Some(a), Some(b)) => exact::checked_product(a, b),
                    _ => None,
                };
                let weight = match &exact_weight {
                    Some(w) => exact::to_f64(w),
                    None => parent.weight * child.weight,
                };
                leaves.push(BranchLeaf::fresh(
                    format!("{}/{}", parent.label, child.label),
                    child.outcome,
                    history.clone(),
                    weight,
                    exact_weight,
                    self.fine_dim,
                ));
            }
        }
        Self::from_leaves(leaves, self.grain, self.fine_dim)
    }
}

/// Measures `game` under `realization`, producing a fresh tree with all of
/// each leaf's weight in cell 0.
pub fn branch(
    game: &QuantumGame,
    realization: &MeasurementRealization,
    fine_dim: usize,
) -> Result<BranchTree, BranchError> {
    if fine_dim == 0 {
        return Err(BranchError::ZeroFineDim);
    }
    let mut leaves = Vec::new();
    match realization.kind {
        RealizationKind::Direct => {
            let exact = born_weights_exact(game)?;
            let weights = born_weights(game)?;
            for (x, w) in weights {
                if w <= 0.0 {
                    continue;
                }
                let label: Vec<&str> = game
                    .state
                    .labels()
                    .iter()
                    .filter(|l| game.observable.eigenvalue(l) == Some(x))
                    .map(String::as_str)
                    .collect();
                let exact_weight = exact.as_ref().map(|m| m[&x]);
                leaves.push(BranchLeaf::fresh(
                    label.join("+"),
                    x,
                    Vec::new(),
                    w,
                    exact_weight,
                    fine_dim,
                ));
            }
        }
        RealizationKind::AncillaCoupled { n, total } => {
            let coupling = couple_ancilla(game, n, total)?;
            for (label, amp) in coupling.joint_state.iter() {
                let w = amp.norm_sqr();
                if w <= 0.0 {
                    continue;
                }
                leaves.push(BranchLeaf::fresh(
                    label,
                    coupling.grouping[label],
                    Vec::new(),
                    w,
                    amp.exact_norm_sqr(),
                    fine_dim,
                ));
            }
        }
    }
    BranchTree::from_leaves(leaves, DEFAULT_GRAIN, fine_dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BranchCount {
    pub count: usize,
    /// Set when no leaf carries the requested outcome.
    pub unknown_outcome: bool,
}

/// Occupied cells (sub-weight above the tree's grain) with this outcome.
pub fn count_branches(tree: &BranchTree, outcome: Eigenvalue) -> BranchCount {
    count_branches_above(tree, outcome, tree.grain)
}

pub fn count_branches_above(tree: &BranchTree, outcome: Eigenvalue, tau: f64) -> BranchCount {
    let mut seen = false;
    let mut count = 0;
    for leaf in tree.leaves.iter().filter(|l| l.outcome == outcome) {
        seen = true;
        count += leaf.occupied_cells(tau).count();
    }
    BranchCount {
        count,
        unknown_outcome: !seen,
    }
}

/// One scheduled 2×2 rotation between two cells of a leaf.
///
/// `outcome` restricts the rotation to leaves with that outcome; `None`
/// applies it to every leaf. The approximate decoherence basis need not be
/// tilted the same way in every outcome sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellPair {
    pub first: usize,
    pub second: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Eigenvalue>,
}

impl CellPair {
    pub fn new(first: usize, second: usize) -> Self {
        Self {
            first,
            second,
            outcome: None,
        }
    }

    pub fn within(outcome: Eigenvalue, first: usize, second: usize) -> Self {
        Self {
            first,
            second,
            outcome: Some(outcome),
        }
    }

    fn applies_to(&self, leaf: &BranchLeaf) -> bool {
        self.outcome.map_or(true, |o| o == leaf.outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationConfig {
    pub epsilon: f64,
    pub pair_schedule: Vec<CellPair>,
    pub seed: u64,
}

impl RotationConfig {
    pub fn new(epsilon: f64, pairs: impl IntoIterator<Item = CellPair>) -> Self {
        Self {
            epsilon,
            pair_schedule: pairs.into_iter().collect(),
            seed: 0,
        }
    }

    /// A reproducible random schedule of `steps` pairs. Each pair is scoped
    /// to one of `outcomes` or left global with equal odds.
    pub fn random(
        epsilon: f64,
        fine_dim: usize,
        steps: usize,
        outcomes: &[Eigenvalue],
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::new();
        if fine_dim >= 2 {
            for _ in 0..steps {
                let first = rng.gen_range(0..fine_dim);
                let mut second = rng.gen_range(0..fine_dim - 1);
                if second >= first {
                    second += 1;
                }
                let outcome = if outcomes.is_empty() || rng.gen_bool(0.5) {
                    None
                } else {
                    Some(outcomes[rng.gen_range(0..outcomes.len())])
                };
                pairs.push(CellPair {
                    first,
                    second,
                    outcome,
                });
            }
        }
        Self {
            epsilon,
            pair_schedule: pairs,
            seed,
        }
    }
}

/// Applies the scheduled rotations inside each leaf on the square-root
/// scale. Cells of different leaves are never mixed.
pub fn rotate_basis(tree: &BranchTree, config: &RotationConfig) -> Result<BranchTree, BranchError> {
    if !(config.epsilon.abs() < MAX_EPSILON) {
        return Err(BranchError::EpsilonOutOfRange(config.epsilon));
    }
    for p in &config.pair_schedule {
        if p.first >= tree.fine_dim || p.second >= tree.fine_dim || p.first == p.second {
            return Err(BranchError::BadPair {
                first: p.first,
                second: p.second,
                fine_dim: tree.fine_dim,
            });
        }
    }
    let (s, c) = config.epsilon.sin_cos();
    let leaves = tree
        .leaves
        .iter()
        .map(|leaf| {
            let mut amps: Vec<f64> = leaf.cells.iter().map(|w| w.sqrt()).collect();
            for p in config.pair_schedule.iter().filter(|p| p.applies_to(leaf)) {
                let (a, b) = (amps[p.first], amps[p.second]);
                amps[p.first] = c * a - s * b;
                amps[p.second] = s * a + c * b;
            }
            BranchLeaf {
                cells: amps.iter().map(|a| a * a).collect(),
                ..leaf.clone()
            }
        })
        .collect();
    BranchTree::from_leaves(leaves, tree.grain, tree.fine_dim)
}

/// Merges consecutive groups of `factor` cells by summing sub-weights.
pub fn coarse_grain(tree: &BranchTree, factor: usize) -> Result<BranchTree, BranchError> {
    if factor == 0 || tree.fine_dim % factor != 0 {
        return Err(BranchError::BadFactor {
            factor,
            fine_dim: tree.fine_dim,
        });
    }
    let leaves = tree
        .leaves
        .iter()
        .map(|leaf| BranchLeaf {
            cells: leaf.cells.chunks(factor).map(|c| c.iter().sum()).collect(),
            ..leaf.clone()
        })
        .collect();
    BranchTree::from_leaves(leaves, tree.grain, tree.fine_dim / factor)
}

/// One row per (leaf, cell): `outcome,history,cell_index,weight`, ordered by
/// (history, outcome, cell_index) with leaf order breaking ties.
pub fn to_csv(tree: &BranchTree) -> String {
    let mut rows: Vec<(&Vec<Eigenvalue>, Eigenvalue, usize, usize, f64)> = Vec::new();
    for (li, leaf) in tree.leaves.iter().enumerate() {
        for (ci, w) in leaf.cells.iter().enumerate() {
            rows.push((&leaf.history, leaf.outcome, ci, li, *w));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["outcome", "history", "cell_index", "weight"])
        .expect("in-memory csv");
    for (history, outcome, ci, _, w) in rows {
        let history: Vec<String> = history.iter().map(|h| h.to_string()).collect();
        wtr.write_record([
            outcome.to_string(),
            history.join(";"),
            ci.to_string(),
            fmt_float(w),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(v: f64) -> Eigenvalue {
        Eigenvalue(v)
    }

    fn third_game() -> QuantumGame {
        QuantumGame::rational_two_outcome(1, 3, 10.0, 0.0).unwrap()
    }

    #[test]
    fn direct_equal_superposition() {
        let g = QuantumGame::equal_superposition(&[0.0, 1.0]).unwrap();
        let t = branch(&g, &MeasurementRealization::direct(), 1).unwrap();
        let w: Vec<f64> = t.leaves().iter().map(|l| l.weight).collect();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn ancilla_three_leaves() {
        let t = branch(&third_game(), &MeasurementRealization::ancilla(1, 3).unwrap(), 1).unwrap();
        let outcomes: Vec<Eigenvalue> = t.leaves().iter().map(|l| l.outcome).collect();
        assert_eq!(outcomes, vec![x(1.0), x(2.0), x(2.0)]);
        for leaf in t.leaves() {
            assert_eq!(leaf.exact_weight, Some(Exact::new(1, 3)));
            assert!((leaf.weight - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(count_branches(&t, x(2.0)).count, 2);
    }

    #[test]
    fn direct_third_game() {
        let t = branch(&third_game(), &MeasurementRealization::direct(), 4).unwrap();
        assert_eq!(t.leaves().len(), 2);
        assert_eq!(t.leaves()[0].exact_weight, Some(Exact::new(1, 3)));
        assert_eq!(t.leaves()[1].exact_weight, Some(Exact::new(2, 3)));
        assert_eq!(t.leaves()[1].cells, vec![2.0 / 3.0, 0.0, 0.0, 0.0]);
        let t = t.with_grain(1e-6).unwrap();
        assert_eq!(count_branches(&t, x(2.0)), BranchCount { count: 1, unknown_outcome: false });
    }

    #[test]
    fn unknown_outcome_flagged() {
        let t = branch(&third_game(), &MeasurementRealization::direct(), 1).unwrap();
        assert_eq!(count_branches(&t, x(7.0)), BranchCount { count: 0, unknown_outcome: true });
    }

    #[test]
    fn incompatible_realization() {
        let g = QuantumGame::equal_superposition(&[1.0, 2.0, 3.0]).unwrap();
        let err = branch(&g, &MeasurementRealization::ancilla(1, 3).unwrap(), 1).unwrap_err();
        assert_eq!(err, BranchError::Quantum(QuantumError::UnsupportedShape(3)));
        assert_eq!(
            branch(&g, &MeasurementRealization::direct(), 0).unwrap_err(),
            BranchError::ZeroFineDim
        );
    }

    #[test]
    fn rotation_zero_is_identity() {
        let t = branch(&third_game(), &MeasurementRealization::direct(), 8).unwrap();
        let r = rotate_basis(&t, &RotationConfig::new(0.0, [CellPair::new(0, 1)])).unwrap();
        assert_eq!(r, t);
    }

    #[test]
    fn single_pair_rotation_weights() {
        let eps = 1e-3;
        let t = branch(&third_game(), &MeasurementRealization::direct(), 8).unwrap();
        let r = rotate_basis(&t, &RotationConfig::new(eps, [CellPair::new(0, 1)])).unwrap();
        for leaf in r.leaves() {
            let w = leaf.weight;
            assert!((leaf.cells[0] - w * eps.cos().powi(2)).abs() < 1e-16);
            assert!((leaf.cells[1] - w * eps.sin().powi(2)).abs() < 1e-18);
            assert!((leaf.cells.iter().sum::<f64>() - w).abs() < 1e-15);
            assert_eq!(leaf.occupied_cells(1e-9).count(), 2);
        }
        assert_eq!(count_branches(&r, x(2.0)).count, 2);
        assert!((r.leaves()[1].weight - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scoped_rotation_only_touches_its_outcome() {
        let t = branch(&third_game(), &MeasurementRealization::direct(), 8).unwrap();
        let cfg = RotationConfig::new(1e-3, [CellPair::within(x(2.0), 0, 3)]);
        let r = rotate_basis(&t, &cfg).unwrap();
        assert_eq!(r.leaves()[0], t.leaves()[0]);
        assert_eq!(count_branches(&r, x(2.0)).count, 2);
        assert_eq!(count_branches(&r, x(1.0)).count, 1);
    }

    #[test]
    fn rotation_errors() {
        let t = branch(&third_game(), &MeasurementRealization::direct(), 4).unwrap();
        assert_eq!(
            rotate_basis(&t, &RotationConfig::new(0.1, [])).unwrap_err(),
            BranchError::EpsilonOutOfRange(0.1)
        );
        assert!(matches!(
            rotate_basis(&t, &RotationConfig::new(0.01, [CellPair::new(0, 4)])),
            Err(BranchError::BadPair { .. })
        ));
        assert!(matches!(
            rotate_basis(&t, &RotationConfig::new(0.01, [CellPair::new(2, 2)])),
            Err(BranchError::BadPair { .. })
        ));
    }

    #[test]
    fn coarse_grain_extremes() {
        let t = branch(&third_game(), &MeasurementRealization::direct(), 8).unwrap();
        let r = rotate_basis(
            &t,
            &RotationConfig::new(1e-3, (1..8).map(|j| CellPair::new(0, j))),
        )
        .unwrap();
        let full = coarse_grain(&r, 8).unwrap();
        assert_eq!(full.fine_dim(), 1);
        for (a, b) in full.leaves().iter().zip(r.leaves()) {
            assert_eq!(a.cells.len(), 1);
            assert!((a.cells[0] - b.weight).abs() < 1e-15);
        }
        assert_eq!(coarse_grain(&r, 1).unwrap(), r);
        let half = coarse_grain(&r, 2).unwrap();
        assert!(count_branches(&half, x(2.0)).count <= count_branches(&r, x(2.0)).count);
        assert_eq!(
            coarse_grain(&r, 3).unwrap_err(),
            BranchError::BadFactor { factor: 3, fine_dim: 8 }
        );
        assert!(coarse_grain(&r, 0).is_err());
    }

    #[test]
    fn extend_multiplies_weights() {
        let g = third_game();
        let t = branch(&g, &MeasurementRealization::direct(), 1).unwrap();
        let t2 = t.extend(&g, &MeasurementRealization::direct()).unwrap();
        assert_eq!(t2.leaves().len(), 4);
        let ww: Vec<Exact> = t2.leaves().iter().map(|l| l.exact_weight.unwrap()).collect();
        assert_eq!(
            ww,
            vec![Exact::new(1, 9), Exact::new(2, 9), Exact::new(2, 9), Exact::new(4, 9)]
        );
        assert_eq!(t2.leaves()[1].history, vec![x(1.0)]);
        assert_eq!(t2.leaves()[1].outcome, x(2.0));
    }

    #[test]
    fn csv_dump_is_ordered() {
        let g = third_game();
        let t = branch(&g, &MeasurementRealization::direct(), 2).unwrap();
        let t = t.extend(&g, &MeasurementRealization::direct()).unwrap();
        let csv = to_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "outcome,history,cell_index,weight");
        assert_eq!(lines.len(), 1 + 4 * 2);
        assert_eq!(lines[1], "1,1,0,0.111111111111");
        assert_eq!(lines[2], "1,1,1,0.0");
        assert_eq!(lines[3], "2,1,0,0.222222222222");
        assert_eq!(lines[8], "2,2,1,0.0");
    }

    #[test]
    fn from_leaves_validation() {
        let leaf = BranchLeaf::fresh("a", x(1.0), vec![], 0.5, None, 2);
        assert!(matches!(
            BranchTree::from_leaves(vec![leaf.clone()], 1e-9, 2),
            Err(BranchError::InvalidTree(_))
        ));
        let mut bad = leaf.clone();
        bad.cells = vec![0.1, 0.1];
        assert!(BranchTree::from_leaves(vec![leaf.clone(), bad], 1e-9, 2).is_err());
        assert!(BranchTree::from_leaves(vec![leaf.clone(), leaf.clone()], 0.0, 2).is_err());
        assert!(BranchTree::from_leaves(vec![leaf.clone(), leaf], 1e-9, 2).is_ok());
    }

    #[test]
    fn random_schedule_is_reproducible() {
        let a = RotationConfig::random(1e-3, 8, 20, &[x(1.0), x(2.0)], 7);
        let b = RotationConfig::random(1e-3, 8, 20, &[x(1.0), x(2.0)], 7);
        assert_eq!(a, b);
        assert!(a.pair_schedule.iter().all(|p| p.first != p.second && p.first < 8 && p.second < 8));
        assert!(RotationConfig::random(1e-3, 1, 5, &[], 0).pair_schedule.is_empty());
    }
}
