//! Finite Savage-style decision theory.
//!
//! A [`Setup`] fixes the states 𝒮_M and consequences 𝒞; acts are total maps
//! from states to consequences; a [`PreferenceRelation`] is a weak preference
//! ≽ over a finite act set. On top of that sit the expected-utility rule,
//! checks for transitivity and Dominance, the qualitative probability read
//! off constant-act preferences, and extraction of a probability/utility
//! pair that represents a given preference ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two expected utilities closer than this count as indifferent.
pub const TIE_TOLERANCE: f64 = 1e-9;
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;
/// Event spaces are enumerated as full power sets only up to this size.
pub const MAX_EVENT_STATES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("setup needs at least one state and one consequence")]
    EmptySetup,
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("duplicate consequence `{0}`")]
    DuplicateConsequence(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown consequence `{0}`")]
    UnknownConsequence(String),
    #[error("act is not total: no consequence for state `{0}`")]
    PartialAct(String),
    #[error("act {0} listed more than once")]
    DuplicateAct(String),
    #[error("act index {0} out of range")]
    ActIndex(usize),
    #[error("missing entry for `{0}` in expected utility")]
    MissingEntry(String),
    #[error("probabilities must lie in [0,1] and sum to 1 (sum = {0})")]
    BadProbability(f64),
    #[error("preferences violate the axioms: {0}")]
    AxiomViolation(AxiomReport),
    #[error("constant act for consequence `{0}` is not in the preference relation")]
    MissingConstantAct(String),
    #[error("event spaces are limited to {MAX_EVENT_STATES} states, setup has {0}")]
    TooManyStates(usize),
    #[error("preference document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupKind {
    Chance,
    Fission,
}

/// A Chance or Fission setup with its states and consequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Setup {
    pub kind: SetupKind,
    states: Vec<String>,
    consequences: Vec<String>,
}

impl Setup {
    pub fn new<S: Into<String>, C: Into<String>>(
        kind: SetupKind,
        states: impl IntoIterator<Item = S>,
        consequences: impl IntoIterator<Item = C>,
    ) -> Result<Self, DecisionError> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        let consequences: Vec<String> = consequences.into_iter().map(Into::into).collect();
        if states.is_empty() || consequences.is_empty() {
            return Err(DecisionError::EmptySetup);
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s) {
                return Err(DecisionError::DuplicateState(s.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for c in &consequences {
            if !seen.insert(c) {
                return Err(DecisionError::DuplicateConsequence(c.clone()));
            }
        }
        Ok(Self {
            kind,
            states,
            consequences,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn consequences(&self) -> &[String] {
        &self.consequences
    }

    /// The event space ℰ_M: every subset of 𝒮_M.
    pub fn events(&self) -> Result<Vec<BTreeSet<String>>, DecisionError> {
        let n = self.states.len();
        if n > MAX_EVENT_STATES {
            return Err(DecisionError::TooManyStates(n));
        }
        Ok((0u32..(1 << n))
            .map(|mask| {
                self.states
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, s)| s.clone())
                    .collect()
            })
            .collect())
    }

    /// Every act in 𝒞^𝒮, in lexicographic order of consequence indices.
    pub fn all_acts(&self) -> Vec<Act> {
        let n = self.states.len();
        let k = self.consequences.len();
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let mut digits = vec![0; n];
                for d in digits.iter_mut().rev() {
                    *d = code % k;
                    code /= k;
                }
                Act(self
                    .states
                    .iter()
                    .zip(digits)
                    .map(|(s, d)| (s.clone(), self.consequences[d].clone()))
                    .collect())
            })
            .collect()
    }

    fn check_act(&self, act: &Act) -> Result<(), DecisionError> {
        for s in &self.states {
            let c = act.get(s).ok_or_else(|| DecisionError::PartialAct(s.clone()))?;
            if !self.consequences.iter().any(|x| x == c) {
                return Err(DecisionError::UnknownConsequence(c.to_string()));
            }
        }
        for s in act.0.keys() {
            if !self.states.contains(s) {
                return Err(DecisionError::UnknownState(s.clone()));
            }
        }
        Ok(())
    }
}

/// A map from states to consequences.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Act(BTreeMap<String, String>);

impl Act {
    pub fn new<S: Into<String>, C: Into<String>>(pairs: impl IntoIterator<Item = (S, C)>) -> Self {
        Act(pairs
            .into_iter()
            .map(|(s, c)| (s.into(), c.into()))
            .collect())
    }

    pub fn constant(setup: &Setup, consequence: &str) -> Self {
        Act(setup
            .states
            .iter()
            .map(|s| (s.clone(), consequence.to_string()))
            .collect())
    }

    /// `on` for states in `event`, `off` elsewhere.
    pub fn on_event(setup: &Setup, event: &BTreeSet<String>, on: &str, off: &str) -> Self {
        Act(setup
            .states
            .iter()
            .map(|s| {
                let c = if event.contains(s) { on } else { off };
                (s.clone(), c.to_string())
            })
            .collect())
    }

    pub fn get(&self, state: &str) -> Option<&str> {
        self.0.get(state).map(String::as_str)
    }

    pub fn assignments(&self) -> &BTreeMap<String, String> {
        &self.0
    }
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(s, c)| format!("{s}->{c}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Probability over states and utility over consequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub probability: BTreeMap<String, f64>,
    pub utility: BTreeMap<String, f64>,
}

impl Representation {
    pub fn new(
        probability: BTreeMap<String, f64>,
        utility: BTreeMap<String, f64>,
    ) -> Result<Self, DecisionError> {
        let sum: f64 = probability.values().sum();
        let in_range = probability.values().all(|p| (0.0..=1.0).contains(p));
        if !in_range || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(DecisionError::BadProbability(sum));
        }
        Ok(Self {
            probability,
            utility,
        })
    }
}

/// EU(F) = Σₓ Pr(x)·𝒱(f(x)).
pub fn expected_utility(act: &Act, rep: &Representation) -> Result<f64, DecisionError> {
    let mut eu = 0.0;
    for (state, p) in &rep.probability {
        let c = act
            .get(state)
            .ok_or_else(|| DecisionError::MissingEntry(state.clone()))?;
        let u = rep
            .utility
            .get(c)
            .ok_or_else(|| DecisionError::MissingEntry(c.to_string()))?;
        eu += p * u;
    }
    Ok(eu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    /// First act strictly preferred to the second.
    Strict(usize, usize),
    Indifferent(usize, usize),
}

/// A weak preference relation over a finite list of acts.
///
/// Stored as the full ≽ matrix, so intransitive or incomplete inputs can be
/// represented and diagnosed.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceRelation {
    setup: Setup,
    acts: Vec<Act>,
    weak: Vec<Vec<bool>>,
}

impl PreferenceRelation {
    /// Tiers listed best first; acts within a tier are indifferent.
    pub fn from_tiers(setup: Setup, tiers: Vec<Vec<Act>>) -> Result<Self, DecisionError> {
        let mut acts = Vec::new();
        let mut tier_of = Vec::new();
        for (t, tier) in tiers.into_iter().enumerate() {
            for act in tier {
                acts.push(act);
                tier_of.push(t);
            }
        }
        let weak = (0..acts.len())
            .map(|i| (0..acts.len()).map(|j| tier_of[i] <= tier_of[j]).collect())
            .collect();
        Self::checked(setup, acts, weak)
    }

    /// Builds ≽ from explicit judgments; unjudged pairs stay incomparable.
    pub fn from_judgments(
        setup: Setup,
        acts: Vec<Act>,
        judgments: &[Judgment],
    ) -> Result<Self, DecisionError> {
        let n = acts.len();
        let mut weak = vec![vec![false; n]; n];
        for (i, row) in weak.iter_mut().enumerate() {
            row[i] = true;
        }
        for j in judgments {
            let (a, b) = match *j {
                Judgment::Strict(a, b) | Judgment::Indifferent(a, b) => (a, b),
            };
            for idx in [a, b] {
                if idx >= n {
                    return Err(DecisionError::ActIndex(idx));
                }
            }
            weak[a][b] = true;
            if matches!(j, Judgment::Indifferent(..)) {
                weak[b][a] = true;
            }
        }
        Self::checked(setup, acts, weak)
    }

    /// The ordering Eq. EU induces on `acts`, ties within [`TIE_TOLERANCE`].
    pub fn from_representation(
        setup: Setup,
        acts: Vec<Act>,
        rep: &Representation,
    ) -> Result<Self, DecisionError> {
        let eus = acts
            .iter()
            .map(|a| expected_utility(a, rep))
            .collect::<Result<Vec<_>, _>>()?;
        let n = acts.len();
        let weak = (0..n)
            .map(|i| (0..n).map(|j| eus[i] >= eus[j] - TIE_TOLERANCE).collect())
            .collect();
        Self::checked(setup, acts, weak)
    }

    fn checked(setup: Setup, acts: Vec<Act>, weak: Vec<Vec<bool>>) -> Result<Self, DecisionError> {
        let mut seen = BTreeSet::new();
        for act in &acts {
            setup.check_act(act)?;
            if !seen.insert(act) {
                return Err(DecisionError::DuplicateAct(act.to_string()));
            }
        }
        Ok(Self { setup, acts, weak })
    }

    pub fn setup(&self) -> &Setup {
        &self.setup
    }

    pub fn acts(&self) -> &[Act] {
        &self.acts
    }

    pub fn index_of(&self, act: &Act) -> Option<usize> {
        self.acts.iter().position(|a| a == act)
    }

    pub fn weakly_prefers(&self, a: usize, b: usize) -> bool {
        self.weak[a][b]
    }

    pub fn strictly_prefers(&self, a: usize, b: usize) -> bool {
        self.weak[a][b] && !self.weak[b][a]
    }

    /// Indifference classes best first, or `None` unless ≽ is a total preorder.
    pub fn tiers(&self) -> Option<Vec<Vec<usize>>> {
        let n = self.acts.len();
        for i in 0..n {
            for j in 0..n {
                if !self.weak[i][j] && !self.weak[j][i] {
                    return None;
                }
                for k in 0..n {
                    if self.weak[i][j] && self.weak[j][k] && !self.weak[i][k] {
                        return None;
                    }
                }
            }
        }
        let score = |i: usize| self.weak[i].iter().filter(|b| **b).count();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| score(b).cmp(&score(a)).then(self.acts[a].cmp(&self.acts[b])));
        let mut tiers: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match tiers.last_mut() {
                Some(t) if score(t[0]) == score(i) => t.push(i),
                _ => tiers.push(vec![i]),
            }
        }
        Some(tiers)
    }

    /// Canonical JSON: a list of tiers, best first, each a sorted list of acts.
    pub fn to_json(&self) -> Option<String> {
        let tiers = self.tiers()?;
        let doc: Vec<Vec<&Act>> = tiers
            .iter()
            .map(|t| t.iter().map(|&i| &self.acts[i]).collect())
            .collect();
        Some(serde_json::to_string(&doc).expect("acts serialize"))
    }

    /// Reads a tier list. States and consequences are inferred from the acts
    /// in order of first appearance.
    pub fn from_json(text: &str) -> Result<Self, DecisionError> {
        let tiers: Vec<Vec<Act>> =
            serde_json::from_str(text).map_err(|e| DecisionError::Document(e.to_string()))?;
        let mut states = Vec::new();
        let mut consequences = Vec::new();
        for act in tiers.iter().flatten() {
            for (s, c) in &act.0 {
                if !states.contains(s) {
                    states.push(s.clone());
                }
                if !consequences.contains(c) {
                    consequences.push(c.clone());
                }
            }
        }
        let setup = Setup::new(SetupKind::Chance, states, consequences)?;
        Self::from_tiers(setup, tiers)
    }

    fn constant_index(&self, c: &str) -> Option<usize> {
        self.index_of(&Act::constant(&self.setup, c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceViolation {
    pub dominant: Act,
    pub dominated: Act,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AxiomReport {
    /// Each entry lists acts a ≽ b ≽ c with a ⋡ c.
    pub transitivity: Vec<Vec<Act>>,
    pub dominance: Vec<DominanceViolation>,
    pub incomplete: Vec<(Act, Act)>,
}

impl AxiomReport {
    pub fn is_consistent(&self) -> bool {
        self.transitivity.is_empty() && self.dominance.is_empty() && self.incomplete.is_empty()
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for cycle in &self.transitivity {
            let names: Vec<String> = cycle.iter().map(|a| a.to_string()).collect();
            parts.push(format!("transitivity: {}", names.join(" >= ")));
        }
        for d in &self.dominance {
            parts.push(format!("dominance: {} dominates {}", d.dominant, d.dominated));
        }
        for (a, b) in &self.incomplete {
            parts.push(format!("incomparable: {a} vs {b}"));
        }
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks completeness, transitivity and Dominance.
///
/// Dominance uses the constant-act ordering of consequences: if A's
/// consequence is weakly preferred to B's on every state, A ≽ B must hold.
/// Pairs whose constant acts are absent are skipped.
pub fn check_axioms(prefs: &PreferenceRelation) -> AxiomReport {
    let n = prefs.acts.len();
    let w = &prefs.weak;
    let mut report = AxiomReport::default();

    for i in 0..n {
        for j in (i + 1)..n {
            if !w[i][j] && !w[j][i] {
                report
                    .incomplete
                    .push((prefs.acts[i].clone(), prefs.acts[j].clone()));
            }
        }
    }

    let mut seen_cycles = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if a == b || !w[a][b] {
                continue;
            }
            for c in 0..n {
                if c == a || c == b || !w[b][c] || w[a][c] {
                    continue;
                }
                // canonical rotation so each cycle is listed once
                let triple = [a, b, c];
                let start = (0..3).min_by_key(|&k| triple[k]).unwrap();
                let key = [triple[start], triple[(start + 1) % 3], triple[(start + 2) % 3]];
                if seen_cycles.insert(key) {
                    report
                        .transitivity
                        .push(triple.iter().map(|&k| prefs.acts[k].clone()).collect());
                }
            }
        }
    }

    let constants: BTreeMap<&str, usize> = prefs
        .setup
        .consequences
        .iter()
        .filter_map(|c| prefs.constant_index(c).map(|i| (c.as_str(), i)))
        .collect();
    let c_weak = |x: &str, y: &str| -> Option<bool> {
        Some(w[*constants.get(x)?][*constants.get(y)?])
    };
    for a in 0..n {
        for b in 0..n {
            if a == b || !(w[b][a] && !w[a][b]) {
                continue;
            }
            let dominates = prefs.setup.states.iter().try_fold(true, |acc, s| {
                let ca = prefs.acts[a].get(s)?;
                let cb = prefs.acts[b].get(s)?;
                Some(acc && c_weak(ca, cb)?)
            });
            if dominates == Some(true) {
                report.dominance.push(DominanceViolation {
                    dominant: prefs.acts[a].clone(),
                    dominated: prefs.acts[b].clone(),
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualitativeOrder {
    HigherOrEqual,
    Lower,
    Incomparable,
}

/// Qualitative probability comparison of two events.
///
/// For constant acts with c₁ ≻ c₂, `Ea` is at least as probable as `Eb` iff
/// (c₁ on Ea, c₂ elsewhere) ≽ (c₁ on Eb, c₂ elsewhere). The first strictly
/// ordered consequence pair (in setup order) whose mixed acts are both present
/// is used; with none available the events are incomparable.
pub fn qualitative_probability(
    prefs: &PreferenceRelation,
    ea: &BTreeSet<String>,
    eb: &BTreeSet<String>,
) -> QualitativeOrder {
    let cs = &prefs.setup.consequences;
    for c1 in cs {
        for c2 in cs {
            let (Some(i1), Some(i2)) = (prefs.constant_index(c1), prefs.constant_index(c2)) else {
                continue;
            };
            if !prefs.strictly_prefers(i1, i2) {
                continue;
            }
            let a = prefs.index_of(&Act::on_event(&prefs.setup, ea, c1, c2));
            let b = prefs.index_of(&Act::on_event(&prefs.setup, eb, c1, c2));
            if let (Some(a), Some(b)) = (a, b) {
                return if prefs.weakly_prefers(a, b) {
                    QualitativeOrder::HigherOrEqual
                } else if prefs.weakly_prefers(b, a) {
                    QualitativeOrder::Lower
                } else {
                    QualitativeOrder::Incomparable
                };
            }
        }
    }
    QualitativeOrder::Incomparable
}

/// One linear constraint of the extraction problem: EU(better) ≥ EU(worse)
/// strictly, or equality when `tie`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EuConstraint {
    pub better: Act,
    pub worse: Act,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Extraction {
    Feasible {
        representation: Representation,
        /// Smallest EU gap between consecutive indifference classes.
        margin: f64,
        constraints: Vec<EuConstraint>,
    },
    Infeasible {
        witness: (Act, Act),
        margin: f64,
    },
}

/// Finds a probability and a utility (normalized to min 0, max 1) whose
/// expected utilities reproduce `prefs` exactly.
///
/// Utility ranks come from the constant acts. The remaining problem is
/// bilinear in (p, u): the intermediate utilities are searched on a refining
/// grid, each grid point is an LP in p that maximizes the smallest EU gap,
/// and the best point is improved by alternating LPs in u and p. The
/// returned probability is the max-gap point closest to uniform.
pub fn extract_representation(prefs: &PreferenceRelation) -> Result<Extraction, DecisionError> {
    let report = check_axioms(prefs);
    if !report.is_consistent() {
        return Err(DecisionError::AxiomViolation(report));
    }
    let tiers = prefs.tiers().expect("consistent relation is a total preorder");
    let setup = &prefs.setup;

    let mut class_of_consequence = BTreeMap::new();
    let tier_of_act: BTreeMap<usize, usize> = tiers
        .iter()
        .enumerate()
        .flat_map(|(t, acts)| acts.iter().map(move |&a| (a, t)))
        .collect();
    let mut const_tiers = BTreeSet::new();
    for c in &setup.consequences {
        let idx = prefs
            .constant_index(c)
            .ok_or_else(|| DecisionError::MissingConstantAct(c.clone()))?;
        const_tiers.insert(tier_of_act[&idx]);
        class_of_consequence.insert(c.clone(), tier_of_act[&idx]);
    }
    let class_rank: BTreeMap<usize, usize> =
        const_tiers.iter().enumerate().map(|(r, t)| (*t, r)).collect();
    let classes = class_rank.len();
    let consequence_class: BTreeMap<&str, usize> = class_of_consequence
        .iter()
        .map(|(c, t)| (c.as_str(), class_rank[t]))
        .collect();

    let act_classes: Vec<Vec<usize>> = prefs
        .acts
        .iter()
        .map(|a| {
            setup
                .states
                .iter()
                .map(|s| consequence_class[a.get(s).expect("total act")])
                .collect()
        })
        .collect();

    let mut constraints = Vec::new();
    for pair in tiers.windows(2) {
        constraints.push(Constraint {
            better: pair[0][0],
            worse: pair[1][0],
            tie: false,
        });
    }
    for tier in &tiers {
        for &other in &tier[1..] {
            constraints.push(Constraint {
                better: tier[0],
                worse: other,
                tie: true,
            });
        }
    }
    let public_constraints: Vec<EuConstraint> = constraints
        .iter()
        .map(|c| EuConstraint {
            better: prefs.acts[c.better].clone(),
            worse: prefs.acts[c.worse].clone(),
            tie: c.tie,
        })
        .collect();

    let problem = Bilinear {
        states: setup.states.len(),
        classes,
        act_classes,
        constraints,
        tiers: tiers.clone(),
    };

    let uniform = vec![1.0 / setup.states.len() as f64; setup.states.len()];
    let found = if classes == 1 {
        let u = vec![0.0];
        let gap = problem.min_slack(&uniform, &u);
        (gap, uniform.clone(), u)
    } else {
        problem.search()
    };

    let (margin, p, u) = found;
    let feasible = if classes == 1 {
        tiers.len() == 1
    } else {
        margin > TIE_TOLERANCE && problem.reproduces(&p, &u)
    };
    if !feasible {
        let worst = problem.worst_constraint(&p, &u);
        let c = &problem.constraints[worst];
        return Ok(Extraction::Infeasible {
            witness: (prefs.acts[c.better].clone(), prefs.acts[c.worse].clone()),
            margin,
        });
    }
    let probability = setup.states.iter().cloned().zip(p).collect();
    let utility = setup
        .consequences
        .iter()
        .map(|c| (c.clone(), u[consequence_class[c.as_str()]]))
        .collect();
    Ok(Extraction::Feasible {
        representation: Representation {
            probability,
            utility,
        },
        margin: if classes == 1 { 0.0 } else { margin },
        constraints: public_constraints,
    })
}

#[derive(Debug, Clone, Copy)]
struct Constraint {
    better: usize,
    worse: usize,
    tie: bool,
}

/// The bilinear feasibility problem over (p, u). Utility classes are ranked
/// best first; class 0 has utility 1 and the last class utility 0.
struct Bilinear {
    states: usize,
    classes: usize,
    act_classes: Vec<Vec<usize>>,
    constraints: Vec<Constraint>,
    /// Act indices per indifference class, best first.
    tiers: Vec<Vec<usize>>,
}

const GRID_LEVELS: [usize; 5] = [4, 8, 16, 32, 64];
const GRID_POINT_CAP: usize = 2_000;
const ALTERNATION_ROUNDS: usize = 40;
const REFINE_ROUNDS: usize = 8;
const RESTART_MIX: [f64; 4] = [0.05, 0.2, 0.5, 0.8];
const JOINT_STEPS: usize = 200;

impl Bilinear {
    fn eu(&self, act: usize, p: &[f64], u: &[f64]) -> f64 {
        self.act_classes[act]
            .iter()
            .zip(p)
            .map(|(&c, &ps)| ps * u[c])
            .sum()
    }

    fn slack(&self, c: &Constraint, p: &[f64], u: &[f64]) -> f64 {
        let d = self.eu(c.better, p, u) - self.eu(c.worse, p, u);
        if c.tie {
            -d.abs()
        } else {
            d
        }
    }

    /// Smallest gap over the strict constraints; ties are checked separately.
    fn min_slack(&self, p: &[f64], u: &[f64]) -> f64 {
        self.constraints
            .iter()
            .filter(|c| !c.tie)
            .map(|c| self.slack(c, p, u))
            .fold(f64::INFINITY, f64::min)
    }

    fn worst_constraint(&self, p: &[f64], u: &[f64]) -> usize {
        (0..self.constraints.len())
            .min_by(|&a, &b| {
                self.slack(&self.constraints[a], p, u)
                    .total_cmp(&self.slack(&self.constraints[b], p, u))
            })
            .unwrap_or(0)
    }

    /// Strict pairs separated by more than the tie tolerance, ties within it.
    fn reproduces(&self, p: &[f64], u: &[f64]) -> bool {
        self.constraints.iter().all(|c| {
            let d = self.eu(c.better, p, u) - self.eu(c.worse, p, u);
            if c.tie {
                d.abs() <= TIE_TOLERANCE
            } else {
                d > TIE_TOLERANCE
            }
        })
    }

    fn full_utility(&self, inner: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.classes);
        u.push(1.0);
        u.extend_from_slice(inner);
        u.push(0.0);
        u
    }

    fn search(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let inner = self.classes - 2;
        let mut warm: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        if let Some(start) = self.linear_start() {
            let mut improved = self.refine(start);
            // Degenerate stalls (a zero probability meeting equal utilities)
            // are escaped by restarting from points pulled toward the centre.
            for &lambda in &RESTART_MIX {
                if self.done(&improved) {
                    break;
                }
                let restarted = self.refine(self.mixed(&improved, lambda));
                if restarted.0 > improved.0 {
                    improved = restarted;
                }
            }
            if self.done(&improved) {
                return self.polish(improved);
            }
            warm = Some(improved);
        }
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        let mut visited = BTreeSet::new();
        for &g in &GRID_LEVELS {
            let points = decreasing_grid(inner, g);
            if points.len() > GRID_POINT_CAP {
                break;
            }
            for point in points {
                let key: Vec<usize> = point.iter().map(|&k| k * (64 / g)).collect();
                if !visited.insert(key) {
                    continue;
                }
                let inner_u: Vec<f64> = point.iter().map(|&k| k as f64 / g as f64).collect();
                let u = self.full_utility(&inner_u);
                if let Some((t, p)) = self.lp_probability(&u) {
                    if best.as_ref().map_or(true, |b| t > b.0) {
                        best = Some((t, p, u));
                    }
                }
            }
            if let Some(b) = &best {
                if b.0 > TIE_TOLERANCE && self.reproduces(&b.1, &b.2) {
                    return self.polish(b.clone());
                }
                let improved = self.refine(b.clone());
                if improved.0 > TIE_TOLERANCE && self.reproduces(&improved.1, &improved.2) {
                    return self.polish(improved);
                }
                if improved.0 > b.0 {
                    best = Some(improved);
                }
            }
            if inner == 0 {
                break;
            }
        }
        let best = match (best, warm) {
            (Some(b), Some(w)) => Some(if w.0 > b.0 { w } else { b }),
            (b, w) => b.or(w),
        };
        best.unwrap_or_else(|| {
            let p = vec![1.0 / self.states as f64; self.states];
            let u = self.full_utility(&vec![0.5; inner]);
            (self.min_slack(&p, &u), p, u)
        })
    }

    /// Linear EU of acts that use only the best and worst classes (EU = p(E)
    /// for the event E paying the best) or a single class (EU = its utility).
    /// Returns `(p terms, utility index, constant)` with utility index into
    /// the inner utilities; `None` for acts whose EU is bilinear.
    fn linear_eu(&self, act: usize) -> Option<(Vec<usize>, Option<usize>, f64)> {
        let classes = &self.act_classes[act];
        let last = self.classes - 1;
        let first = classes[0];
        if classes.iter().all(|&c| c == first) {
            return Some(match first {
                0 => (Vec::new(), None, 1.0),
                k if k == last => (Vec::new(), None, 0.0),
                k => (Vec::new(), Some(k - 1), 0.0),
            });
        }
        if classes.iter().all(|&c| c == 0 || c == last) {
            let best = (0..self.states).filter(|&s| classes[s] == 0).collect();
            return Some((best, None, 0.0));
        }
        None
    }

    /// Joint LP in (p, u) over the comparisons among bets and constant acts,
    /// which are linear. Its optimum starts the alternation close to a
    /// representation of the full ordering.
    fn linear_start(&self) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let inner = self.classes - 2;
        let ranked: Vec<Vec<(Vec<usize>, Option<usize>, f64)>> = self
            .tiers
            .iter()
            .map(|t| t.iter().filter_map(|&a| self.linear_eu(a)).collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        if ranked.len() < 2 {
            return None;
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let p: Vec<Variable> = (0..self.states).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let v: Vec<Variable> = (0..inner).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let t = lp.add_var(1.0, (-1.0, 1.0));
        let difference = |a: &(Vec<usize>, Option<usize>, f64), b: &(Vec<usize>, Option<usize>, f64)| {
            let mut coef = vec![0.0; self.states + inner];
            for &s in &a.0 {
                coef[s] += 1.0;
            }
            for &s in &b.0 {
                coef[s] -= 1.0;
            }
            if let Some(k) = a.1 {
                coef[self.states + k] += 1.0;
            }
            if let Some(k) = b.1 {
                coef[self.states + k] -= 1.0;
            }
            let mut expr = LinearExpr::empty();
            for (i, k) in coef.into_iter().enumerate() {
                if k != 0.0 {
                    let var = if i < self.states { p[i] } else { v[i - self.states] };
                    expr.add(var, k);
                }
            }
            (expr, a.2 - b.2)
        };
        for pair in ranked.windows(2) {
            let (mut expr, constant) = difference(&pair[0][0], &pair[1][0]);
            expr.add(t, -1.0);
            lp.add_constraint(expr, ComparisonOp::Ge, -constant);
        }
        for tier in &ranked {
            for other in &tier[1..] {
                let (expr, constant) = difference(&tier[0], other);
                lp.add_constraint(expr, ComparisonOp::Eq, -constant);
            }
        }
        simplex_row(&mut lp, &p);
        let sol = lp.solve().ok()?.into_solution().ok()?;
        let probability = renormalize(p.iter().map(|x| sol.var_value(*x).max(0.0)).collect());
        let inner_u: Vec<f64> = v.iter().map(|x| sol.var_value(*x).clamp(0.0, 1.0)).collect();
        let u = self.full_utility(&inner_u);
        Some((self.min_slack(&probability, &u), probability, u))
    }

    /// Alternating LPs, then joint trust-region steps, repeated while either
    /// improves the smallest gap.
    fn refine(&self, start: (f64, Vec<f64>, Vec<f64>)) -> (f64, Vec<f64>, Vec<f64>) {
        let mut current = start;
        for _ in 0..REFINE_ROUNDS {
            let before = current.0;
            current = self.alternate(current);
            if self.done(&current) {
                break;
            }
            current = self.joint_steps(current);
            if self.done(&current) || current.0 - before < 1e-12 {
                break;
            }
        }
        current
    }

    /// `(1−λ)·found + λ·centre`, the centre being uniform p and evenly
    /// spaced utilities.
    fn mixed(&self, found: &(f64, Vec<f64>, Vec<f64>), lambda: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.states as f64;
        let p: Vec<f64> = found.1.iter().map(|x| (1.0 - lambda) * x + lambda / n).collect();
        let last = (self.classes - 1) as f64;
        let u: Vec<f64> = found
            .2
            .iter()
            .enumerate()
            .map(|(k, x)| (1.0 - lambda) * x + lambda * (1.0 - k as f64 / last))
            .collect();
        (self.min_slack(&p, &u), p, u)
    }

    fn done(&self, found: &(f64, Vec<f64>, Vec<f64>)) -> bool {
        found.0 > TIE_TOLERANCE && self.reproduces(&found.1, &found.2)
    }

    /// Sequential linear programming on (p, u) jointly: each step maximizes
    /// the linearized smallest gap inside a box of radius r around the
    /// current point. Coordinate-wise LPs can stall where no single block
    /// improves; joint steps move both blocks at once.
    fn joint_steps(&self, start: (f64, Vec<f64>, Vec<f64>)) -> (f64, Vec<f64>, Vec<f64>) {
        let (mut t, mut p, mut u) = start;
        let mut radius = 0.05;
        for _ in 0..JOINT_STEPS {
            if radius < 1e-10 || (t > TIE_TOLERANCE && self.reproduces(&p, &u)) {
                break;
            }
            match self.joint_lp(&p, &u, radius) {
                Some((np, nu)) => {
                    let nt = self.min_slack(&np, &nu);
                    if nt > t {
                        t = nt;
                        p = np;
                        u = nu;
                        radius = (radius * 2.0).min(0.5);
                    } else {
                        radius /= 4.0;
                    }
                }
                None => radius /= 4.0,
            }
        }
        (t, p, u)
    }

    fn joint_lp(&self, p0: &[f64], u0: &[f64], radius: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let inner = self.classes - 2;
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let dp: Vec<Variable> = (0..self.states)
            .map(|s| lp.add_var(0.0, ((-radius).max(-p0[s]), radius.min(1.0 - p0[s]))))
            .collect();
        let du: Vec<Variable> = (0..inner)
            .map(|k| lp.add_var(0.0, ((-radius).max(-u0[k + 1]), radius.min(1.0 - u0[k + 1]))))
            .collect();
        let t = lp.add_var(1.0, (-1.0, 1.0));
        for c in &self.constraints {
            let mut coef_p = vec![0.0; self.states];
            let mut coef_u = vec![0.0; self.classes];
            for s in 0..self.states {
                let (cb, cw) = (self.act_classes[c.better][s], self.act_classes[c.worse][s]);
                coef_p[s] += u0[cb] - u0[cw];
                coef_u[cb] += p0[s];
                coef_u[cw] -= p0[s];
            }
            let d0 = self.eu(c.better, p0, u0) - self.eu(c.worse, p0, u0);
            let mut expr = LinearExpr::empty();
            for s in 0..self.states {
                if coef_p[s] != 0.0 {
                    expr.add(dp[s], coef_p[s]);
                }
            }
            for k in 0..inner {
                if coef_u[k + 1] != 0.0 {
                    expr.add(du[k], coef_u[k + 1]);
                }
            }
            if c.tie {
                lp.add_constraint(expr, ComparisonOp::Eq, -d0);
            } else {
                expr.add(t, -1.0);
                lp.add_constraint(expr, ComparisonOp::Ge, -d0);
            }
        }
        let mut total = LinearExpr::empty();
        for v in &dp {
            total.add(*v, 1.0);
        }
        lp.add_constraint(total, ComparisonOp::Eq, 0.0);
        let sol = lp.solve().ok()?.into_solution().ok()?;
        let p = renormalize((0..self.states).map(|s| (p0[s] + sol.var_value(dp[s])).max(0.0)).collect());
        let mut u = u0.to_vec();
        for k in 0..inner {
            u[k + 1] = (u0[k + 1] + sol.var_value(du[k])).clamp(0.0, 1.0);
        }
        Some((p, u))
    }

    fn alternate(&self, start: (f64, Vec<f64>, Vec<f64>)) -> (f64, Vec<f64>, Vec<f64>) {
        let (mut t, mut p, mut u) = start;
        for _ in 0..ALTERNATION_ROUNDS {
            let before = t;
            if let Some((tu, nu)) = self.lp_utility(&p) {
                if tu >= t {
                    t = tu;
                    u = nu;
                }
            }
            if let Some((tp, np)) = self.lp_probability(&u) {
                if tp >= t {
                    t = tp;
                    p = np;
                }
            }
            if t > TIE_TOLERANCE && self.reproduces(&p, &u) {
                break;
            }
            if t - before < 1e-12 {
                break;
            }
        }
        (t, p, u)
    }

    /// Widens the utility gaps at fixed p, then recentres p.
    fn polish(&self, found: (f64, Vec<f64>, Vec<f64>)) -> (f64, Vec<f64>, Vec<f64>) {
        let (t0, p0, u0) = found;
        let u = match self.lp_utility(&p0) {
            Some((t, u)) if t >= t0 => u,
            _ => u0.clone(),
        };
        let Some((t, _)) = self.lp_probability(&u) else {
            return (t0, p0, u0);
        };
        if let Some(p) = self.lp_centered_probability(&u, t) {
            let m = self.min_slack(&p, &u);
            if m > TIE_TOLERANCE && self.reproduces(&p, &u) {
                return (m, p, u);
            }
        }
        (t0, p0, u0)
    }

    fn add_constraints(
        &self,
        lp: &mut Problem,
        coefs: impl Fn(&Constraint) -> (Vec<(Variable, f64)>, f64),
        gap: GapTerm,
    ) {
        for c in &self.constraints {
            let (terms, constant) = coefs(c);
            let mut expr = LinearExpr::empty();
            for (v, k) in terms {
                if k != 0.0 {
                    expr.add(v, k);
                }
            }
            if c.tie {
                lp.add_constraint(expr, ComparisonOp::Eq, -constant);
            } else {
                match gap {
                    GapTerm::Variable(t) => {
                        expr.add(t, -1.0);
                        lp.add_constraint(expr, ComparisonOp::Ge, -constant);
                    }
                    GapTerm::Fixed(t) => lp.add_constraint(expr, ComparisonOp::Ge, t - constant),
                }
            }
        }
    }

    fn probability_coefs(&self, c: &Constraint, u: &[f64], p: &[Variable]) -> Vec<(Variable, f64)> {
        (0..self.states)
            .map(|s| {
                let k = u[self.act_classes[c.better][s]] - u[self.act_classes[c.worse][s]];
                (p[s], k)
            })
            .collect()
    }

    /// max t s.t. every strict constraint has EU gap ≥ t, p on the simplex.
    fn lp_probability(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let p: Vec<Variable> = (0..self.states).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let t = lp.add_var(1.0, (-1.0, 1.0));
        self.add_constraints(
            &mut lp,
            |c| (self.probability_coefs(c, u, &p), 0.0),
            GapTerm::Variable(t),
        );
        simplex_row(&mut lp, &p);
        let sol = lp.solve().ok()?.into_solution().ok()?;
        let values: Vec<f64> = p.iter().map(|v| sol.var_value(*v).max(0.0)).collect();
        let values = renormalize(values);
        Some((self.min_slack(&values, u), values))
    }

    /// Among p with every strict gap ≥ `t`, the one nearest uniform in L1.
    fn lp_centered_probability(&self, u: &[f64], t: f64) -> Option<Vec<f64>> {
        let target = 1.0 / self.states as f64;
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let p: Vec<Variable> = (0..self.states).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let d: Vec<Variable> = (0..self.states).map(|_| lp.add_var(1.0, (0.0, 1.0))).collect();
        let floor = (t - t.abs() * 1e-9).max(TIE_TOLERANCE * 2.0);
        self.add_constraints(
            &mut lp,
            |c| (self.probability_coefs(c, u, &p), 0.0),
            GapTerm::Fixed(floor),
        );
        simplex_row(&mut lp, &p);
        for s in 0..self.states {
            lp.add_constraint(&[(d[s], 1.0), (p[s], -1.0)], ComparisonOp::Ge, -target);
            lp.add_constraint(&[(d[s], 1.0), (p[s], 1.0)], ComparisonOp::Ge, target);
        }
        let sol = lp.solve().ok()?.into_solution().ok()?;
        Some(renormalize(
            p.iter().map(|v| sol.var_value(*v).max(0.0)).collect(),
        ))
    }

    /// max t over the intermediate utilities at fixed p, keeping the class
    /// order strict with the same gap.
    fn lp_utility(&self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
        let inner = self.classes - 2;
        if inner == 0 {
            let u = self.full_utility(&[]);
            return Some((self.min_slack(p, &u), u));
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let v: Vec<Variable> = (0..inner).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let t = lp.add_var(1.0, (-1.0, 1.0));
        self.add_constraints(
            &mut lp,
            |c| {
                let mut per_class = vec![0.0; self.classes];
                for s in 0..self.states {
                    per_class[self.act_classes[c.better][s]] += p[s];
                    per_class[self.act_classes[c.worse][s]] -= p[s];
                }
                let terms = (0..inner).map(|i| (v[i], per_class[i + 1])).collect();
                (terms, per_class[0])
            },
            GapTerm::Variable(t),
        );
        // 1 ≥ v₁ ≥ … ≥ v_k ≥ 0, each step at least t
        lp.add_constraint(&[(v[0], -1.0), (t, -1.0)], ComparisonOp::Ge, -1.0);
        for i in 0..inner - 1 {
            lp.add_constraint(&[(v[i], 1.0), (v[i + 1], -1.0), (t, -1.0)], ComparisonOp::Ge, 0.0);
        }
        lp.add_constraint(&[(v[inner - 1], 1.0), (t, -1.0)], ComparisonOp::Ge, 0.0);
        let sol = lp.solve().ok()?.into_solution().ok()?;
        let inner_u: Vec<f64> = v.iter().map(|x| sol.var_value(*x).clamp(0.0, 1.0)).collect();
        let u = self.full_utility(&inner_u);
        Some((self.min_slack(p, &u), u))
    }
}

#[derive(Clone, Copy)]
enum GapTerm {
    Variable(Variable),
    Fixed(f64),
}

fn simplex_row(lp: &mut Problem, p: &[Variable]) {
    let mut expr = LinearExpr::empty();
    for v in p {
        expr.add(*v, 1.0);
    }
    lp.add_constraint(expr, ComparisonOp::Eq, 1.0);
}

fn renormalize(mut p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        for x in &mut p {
            *x /= s;
        }
    }
    p
}

/// Strictly decreasing sequences of `len` integers in `1..g`.
fn decreasing_grid(len: usize, g: usize) -> Vec<Vec<usize>> {
    fn rec(len: usize, upper: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        let remaining = len - prefix.len();
        for k in (remaining..upper).rev() {
            prefix.push(k);
            rec(len, k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, g, &mut Vec::new(), &mut out);
    out
}

/// True when the expected-utility ordering under `rep` matches `prefs` on
/// every ordered pair of listed acts, ties judged within [`TIE_TOLERANCE`].
pub fn ordering_matches(prefs: &PreferenceRelation, rep: &Representation) -> Result<bool, DecisionError> {
    let eus = prefs
        .acts
        .iter()
        .map(|a| expected_utility(a, rep))
        .collect::<Result<Vec<_>, _>>()?;
    let n = eus.len();
    for i in 0..n {
        for j in 0..n {
            if prefs.weak[i][j] != (eus[i] >= eus[j] - TIE_TOLERANCE) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A random setup with 2..=`max_states` states, 2..=`max_consequences`
/// consequences and a representation under which every act has a distinct
/// expected utility (consecutive EUs at least `min_gap` apart).
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_states: usize,
    max_consequences: usize,
    min_gap: f64,
) -> (Setup, Representation) {
    loop {
        let ns = rng.gen_range(2..=max_states.max(2));
        let nc = rng.gen_range(2..=max_consequences.max(2));
        let states: Vec<String> = (1..=ns).map(|i| format!("s{i}")).collect();
        let consequences: Vec<String> = (1..=nc).map(|i| format!("c{i}")).collect();
        let raw: Vec<f64> = (0..ns).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probability: BTreeMap<String, f64> =
            states.iter().cloned().zip(raw.iter().map(|r| r / total)).collect();
        let utility: BTreeMap<String, f64> = consequences
            .iter()
            .cloned()
            .map(|c| (c, rng.gen_range(0.0..1.0)))
            .collect();
        let setup = Setup::new(SetupKind::Chance, states, consequences).expect("distinct labels");
        let rep = Representation {
            probability,
            utility,
        };
        let mut eus: Vec<f64> = setup
            .all_acts()
            .iter()
            .map(|a| expected_utility(a, &rep).expect("total act"))
            .collect();
        eus.sort_by(f64::total_cmp);
        if eus.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            return (setup, rep);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(states: &[&str], cs: &[&str]) -> Setup {
        Setup::new(SetupKind::Chance, states.iter().copied(), cs.iter().copied()).unwrap()
    }

    fn rep(p: &[(&str, f64)], u: &[(&str, f64)]) -> Representation {
        Representation::new(
            p.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            u.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eu_constant_act() {
        let s = setup(&["s1", "s2"], &["c"]);
        let r = rep(&[("s1", 0.3), ("s2", 0.7)], &[("c", 7.0)]);
        assert_eq!(expected_utility(&Act::constant(&s, "c"), &r).unwrap(), 7.0);
    }

    #[test]
    fn eu_worked_examples() {
        let r = rep(&[("s1", 1.0 / 3.0), ("s2", 2.0 / 3.0)], &[("c1", 10.0), ("c2", 0.0)]);
        let act = Act::new([("s1", "c1"), ("s2", "c2")]);
        assert!((expected_utility(&act, &r).unwrap() - 10.0 / 3.0).abs() < 1e-15);
        let r = rep(&[("s1", 0.5), ("s2", 0.5)], &[("c1", 0.0), ("c2", 1.0)]);
        assert_eq!(expected_utility(&act, &r).unwrap(), 0.5);
    }

    #[test]
    fn eu_missing_entries() {
        let r = rep(&[("s1", 0.5), ("s2", 0.5)], &[("c1", 0.0)]);
        let partial = Act::new([("s1", "c1")]);
        assert_eq!(
            expected_utility(&partial, &r).unwrap_err(),
            DecisionError::MissingEntry("s2".into())
        );
        let act = Act::new([("s1", "c1"), ("s2", "c9")]);
        assert_eq!(
            expected_utility(&act, &r).unwrap_err(),
            DecisionError::MissingEntry("c9".into())
        );
    }

    #[test]
    fn representation_must_be_normalized() {
        let bad = Representation::new(
            [("s".to_string(), 0.8)].into_iter().collect(),
            BTreeMap::new(),
        );
        assert!(matches!(bad, Err(DecisionError::BadProbability(_))));
    }

    #[test]
    fn setup_validation_and_events() {
        assert_eq!(
            Setup::new(SetupKind::Fission, ["a", "a"], ["c"]).unwrap_err(),
            DecisionError::DuplicateState("a".into())
        );
        assert_eq!(
            Setup::new(SetupKind::Chance, Vec::<String>::new(), ["c"]).unwrap_err(),
            DecisionError::EmptySetup
        );
        let s = setup(&["a", "b", "c"], &["x"]);
        assert_eq!(s.events().unwrap().len(), 8);
        let many: Vec<String> = (0..13).map(|i| format!("s{i}")).collect();
        let big = Setup::new(SetupKind::Chance, many, ["x"]).unwrap();
        assert_eq!(big.events().unwrap_err(), DecisionError::TooManyStates(13));
        assert_eq!(setup(&["a", "b"], &["x", "y", "z"]).all_acts().len(), 9);
    }

    #[test]
    fn eu_generated_preferences_are_consistent() {
        let s = setup(&["s1", "s2", "s3"], &["c1", "c2", "c3"]);
        let r = rep(
            &[("s1", 0.5), ("s2", 0.3), ("s3", 0.2)],
            &[("c1", 0.0), ("c2", 0.4), ("c3", 1.0)],
        );
        let prefs = PreferenceRelation::from_representation(s.clone(), s.all_acts(), &r).unwrap();
        assert!(check_axioms(&prefs).is_consistent());
    }

    #[test]
    fn cycle_reported_once() {
        let s = setup(&["s1", "s2"], &["a", "b", "c"]);
        let acts = vec![
            Act::constant(&s, "a"),
            Act::constant(&s, "b"),
            Act::constant(&s, "c"),
        ];
        let prefs = PreferenceRelation::from_judgments(
            s,
            acts.clone(),
            &[Judgment::Strict(0, 1), Judgment::Strict(1, 2), Judgment::Strict(2, 0)],
        )
        .unwrap();
        let report = check_axioms(&prefs);
        assert_eq!(report.transitivity.len(), 1);
        let cycle: BTreeSet<&Act> = report.transitivity[0].iter().collect();
        assert_eq!(cycle, acts.iter().collect());
        assert!(report.incomplete.is_empty());
        assert!(!report.is_consistent());
    }

    #[test]
    fn dominance_violation_detected() {
        let s = setup(&["s1", "s2"], &["good", "bad"]);
        let good = Act::constant(&s, "good");
        let bad = Act::constant(&s, "bad");
        let mixed = Act::new([("s1", "good"), ("s2", "bad")]);
        // good ≻ mixed ≻ bad is fine; put bad above mixed to violate Dominance
        let prefs = PreferenceRelation::from_tiers(
            s,
            vec![vec![good.clone()], vec![bad.clone()], vec![mixed.clone()]],
        )
        .unwrap();
        let report = check_axioms(&prefs);
        assert_eq!(
            report.dominance,
            vec![DominanceViolation {
                dominant: mixed,
                dominated: bad
            }]
        );
    }

    #[test]
    fn incomplete_relation_flagged() {
        let s = setup(&["s1"], &["a", "b"]);
        let prefs = PreferenceRelation::from_judgments(
            s.clone(),
            vec![Act::constant(&s, "a"), Act::constant(&s, "b")],
            &[],
        )
        .unwrap();
        assert_eq!(check_axioms(&prefs).incomplete.len(), 1);
        assert!(prefs.tiers().is_none());
    }

    #[test]
    fn qualitative_examples() {
        let s = setup(&["s1", "s2", "s3"], &["c1", "c2"]);
        let r = rep(&[("s1", 0.7), ("s2", 0.2), ("s3", 0.1)], &[("c1", 1.0), ("c2", 0.0)]);
        let prefs = PreferenceRelation::from_representation(s.clone(), s.all_acts(), &r).unwrap();
        let ea: BTreeSet<String> = ["s1".to_string()].into();
        let eb: BTreeSet<String> = ["s2".to_string(), "s3".to_string()].into();
        assert_eq!(qualitative_probability(&prefs, &ea, &eb), QualitativeOrder::HigherOrEqual);
        assert_eq!(qualitative_probability(&prefs, &eb, &ea), QualitativeOrder::Lower);
        assert_eq!(qualitative_probability(&prefs, &ea, &ea), QualitativeOrder::HigherOrEqual);

        let only_constants = PreferenceRelation::from_tiers(
            s.clone(),
            vec![vec![Act::constant(&s, "c1")], vec![Act::constant(&s, "c2")]],
        )
        .unwrap();
        assert_eq!(
            qualitative_probability(&only_constants, &ea, &eb),
            QualitativeOrder::Incomparable
        );
    }

    #[test]
    fn extraction_recovers_equally_spaced_example() {
        let s = setup(&["s1", "s2"], &["c1", "c2"]);
        let r = rep(&[("s1", 1.0 / 3.0), ("s2", 2.0 / 3.0)], &[("c1", 0.0), ("c2", 1.0)]);
        let prefs = PreferenceRelation::from_representation(s.clone(), s.all_acts(), &r).unwrap();
        match extract_representation(&prefs).unwrap() {
            Extraction::Feasible {
                representation,
                constraints,
                ..
            } => {
                assert!((representation.probability["s1"] - 1.0 / 3.0).abs() < 1e-6);
                assert!((representation.probability["s2"] - 2.0 / 3.0).abs() < 1e-6);
                assert_eq!(representation.utility["c1"], 0.0);
                assert_eq!(representation.utility["c2"], 1.0);
                assert_eq!(constraints.len(), 3);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn extraction_constant_only_is_uniform() {
        let s = setup(&["s1", "s2", "s3"], &["a", "b", "c"]);
        let prefs = PreferenceRelation::from_tiers(
            s.clone(),
            vec![
                vec![Act::constant(&s, "b")],
                vec![Act::constant(&s, "a"), Act::constant(&s, "c")],
            ],
        )
        .unwrap();
        match extract_representation(&prefs).unwrap() {
            Extraction::Feasible { representation, .. } => {
                for p in representation.probability.values() {
                    assert!((p - 1.0 / 3.0).abs() < 1e-9);
                }
                assert_eq!(representation.utility["b"], 1.0);
                assert_eq!(representation.utility["a"], 0.0);
                assert_eq!(representation.utility["c"], 0.0);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn extraction_single_class() {
        let s = setup(&["s1", "s2"], &["a", "b"]);
        let prefs = PreferenceRelation::from_tiers(s.clone(), vec![s.all_acts()]).unwrap();
        match extract_representation(&prefs).unwrap() {
            Extraction::Feasible { representation, .. } => {
                assert!(representation.utility.values().all(|u| *u == 0.0));
                assert_eq!(representation.probability["s1"], 0.5);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn extraction_rejects_intransitive() {
        let s = setup(&["s1"], &["a", "b", "c"]);
        let acts = vec![
            Act::constant(&s, "a"),
            Act::constant(&s, "b"),
            Act::constant(&s, "c"),
        ];
        let prefs = PreferenceRelation::from_judgments(
            s,
            acts,
            &[Judgment::Strict(0, 1), Judgment::Strict(1, 2), Judgment::Strict(2, 0)],
        )
        .unwrap();
        assert!(matches!(
            extract_representation(&prefs),
            Err(DecisionError::AxiomViolation(_))
        ));
    }

    #[test]
    fn extraction_requires_constant_acts() {
        let s = setup(&["s1", "s2"], &["a", "b"]);
        let prefs = PreferenceRelation::from_tiers(
            s.clone(),
            vec![vec![Act::constant(&s, "a")], vec![Act::new([("s1", "a"), ("s2", "b")])]],
        )
        .unwrap();
        assert_eq!(
            extract_representation(&prefs).unwrap_err(),
            DecisionError::MissingConstantAct("b".into())
        );
    }

    #[test]
    fn extraction_infeasible_gives_witness() {
        // Consistent with transitivity and Dominance but not with any EU:
        // {s1->a,s2->b} ≻ {s1->b,s2->a} needs p1 > p2 while
        // {s1->b,s2->a,...} orderings below need the reverse.
        let s = setup(&["s1", "s2"], &["a", "b", "c"]);
        let ab = Act::new([("s1", "a"), ("s2", "b")]);
        let ba = Act::new([("s1", "b"), ("s2", "a")]);
        let bc = Act::new([("s1", "b"), ("s2", "c")]);
        let cb = Act::new([("s1", "c"), ("s2", "b")]);
        let prefs = PreferenceRelation::from_tiers(
            s.clone(),
            vec![
                vec![Act::constant(&s, "a")],
                vec![ab.clone()],
                vec![ba],
                vec![Act::constant(&s, "b")],
                vec![cb],
                vec![bc],
                vec![Act::constant(&s, "c")],
            ],
        )
        .unwrap();
        assert!(check_axioms(&prefs).is_consistent());
        match extract_representation(&prefs).unwrap() {
            Extraction::Infeasible { margin, .. } => assert!(margin <= TIE_TOLERANCE),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn json_roundtrip_is_canonical() {
        let s = setup(&["s1", "s2"], &["c1", "c2"]);
        let r = rep(&[("s1", 0.25), ("s2", 0.75)], &[("c1", 0.0), ("c2", 1.0)]);
        let prefs = PreferenceRelation::from_representation(s.clone(), s.all_acts(), &r).unwrap();
        let text = prefs.to_json().unwrap();
        let back = PreferenceRelation::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        assert!(PreferenceRelation::from_json("[[{\"s1\": 3}]]").is_err());
    }

    #[test]
    fn grid_enumeration() {
        assert_eq!(decreasing_grid(0, 4), vec![Vec::<usize>::new()]);
        assert_eq!(decreasing_grid(1, 4), vec![vec![3], vec![2], vec![1]]);
        assert_eq!(decreasing_grid(2, 4), vec![vec![3, 2], vec![3, 1], vec![2, 1]]);
    }
}
