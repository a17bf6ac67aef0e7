//! Bayesian confirmation in a branching world.
//!
//! Covers conditionalization, the diachronic three-bet Dutch book against an
//! agent who announces a posterior other than its conditional credence, and
//! repeated-measurement experiments that track credences on every branch
//! weighted by a strategy's caring measure.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed};
use serde::Serialize;
use thiserror::Error;

use crate::branching::{branch, BranchError, BranchLeaf, BranchTree};
use crate::emit::{fmt_float, Tabular};
use crate::exact::{short_ratio, to_f64, Exact};
use crate::quantum::{Eigenvalue, MeasurementRealization, QuantumGame};
use crate::strategy::{caring_measure, Strategy, StrategyError};

pub const CREDENCE_TOLERANCE: f64 = 1e-9;
/// Announced posteriors this close to the conditional credence are treated
/// as conditionalizing.
pub const PARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfirmationError {
    #[error("credences must lie in [0,1] and sum to 1 (sum = {0})")]
    BadCredences(f64),
    #[error("likelihood p({evidence}|{theory}) = {value} outside [0,1]")]
    BadLikelihood {
        theory: String,
        evidence: String,
        value: f64,
    },
    #[error("no likelihood for evidence `{evidence}` under theory `{theory}`")]
    MissingLikelihood { theory: String, evidence: String },
    #[error("unknown theory `{0}`")]
    UnknownTheory(String),
    #[error("evidence `{0}` has zero prior probability; the conditional is undefined")]
    ZeroEvidence(String),
    #[error("p(A) = {0} must lie strictly between 0 and 1 for a book")]
    EvidenceNotContingent(f64),
    #[error("announced posterior for ({theory}, {evidence}) is missing")]
    MissingAnnouncement { theory: String, evidence: String },
    #[error("announced posterior {0} outside [0,1]")]
    BadAnnouncement(f64),
    #[error("truth assignment covers {given} leaves, tree has {expected}")]
    AssignmentLength { given: usize, expected: usize },
    #[error("experiment needs at least one theory and one game")]
    EmptyExperiment,
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Branch(#[from] BranchError),
}

/// Credences over theories plus each theory's likelihood table p(A|T).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CredenceState {
    pub credences: BTreeMap<String, f64>,
    pub likelihoods: BTreeMap<String, BTreeMap<String, f64>>,
}

impl CredenceState {
    pub fn new(
        credences: BTreeMap<String, f64>,
        likelihoods: BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self, ConfirmationError> {
        let sum: f64 = credences.values().sum();
        if credences.is_empty()
            || credences.values().any(|c| !(0.0..=1.0).contains(c))
            || (sum - 1.0).abs() > CREDENCE_TOLERANCE
        {
            return Err(ConfirmationError::BadCredences(sum));
        }
        for (theory, table) in &likelihoods {
            for (evidence, value) in table {
                if !(0.0..=1.0).contains(value) {
                    return Err(ConfirmationError::BadLikelihood {
                        theory: theory.clone(),
                        evidence: evidence.clone(),
                        value: *value,
                    });
                }
            }
        }
        Ok(Self {
            credences,
            likelihoods,
        })
    }

    /// Theories `T` and `not-T` with evidence `A`.
    pub fn binary(p_t: f64, a_given_t: f64, a_given_not_t: f64) -> Result<Self, ConfirmationError> {
        Self::new(
            [("T".to_string(), p_t), ("not-T".to_string(), 1.0 - p_t)].into(),
            [
                ("T".to_string(), [("A".to_string(), a_given_t)].into()),
                ("not-T".to_string(), [("A".to_string(), a_given_not_t)].into()),
            ]
            .into(),
        )
    }

    /// Builds a two-theory state with given p(A) and p(T|A), choosing
    /// p(T) = ½ when that is compatible, otherwise the nearest feasible value.
    pub fn with_marginals(p_a: f64, p_t_given_a: f64) -> Result<Self, ConfirmationError> {
        // p(T) = p(A)·p(T|A) + (1−p(A))·r for a free r in [0,1].
        let (joint_t, joint_not_t) = (p_a * p_t_given_a, p_a * (1.0 - p_t_given_a));
        let p_t = if joint_t <= 0.5 && joint_not_t <= 0.5 {
            0.5
        } else {
            joint_t + (1.0 - p_a) * 0.5
        };
        let a_given_t = joint_t / p_t;
        let a_given_not_t = joint_not_t / (1.0 - p_t);
        Self::binary(p_t, a_given_t.min(1.0), a_given_not_t.min(1.0))
    }

    pub fn likelihood(&self, theory: &str, evidence: &str) -> Result<f64, ConfirmationError> {
        self.likelihoods
            .get(theory)
            .and_then(|t| t.get(evidence))
            .copied()
            .ok_or_else(|| ConfirmationError::MissingLikelihood {
                theory: theory.to_string(),
                evidence: evidence.to_string(),
            })
    }

    /// p(A) = Σ_T p(A|T)·p(T).
    pub fn prob_evidence(&self, evidence: &str) -> Result<f64, ConfirmationError> {
        let mut p = 0.0;
        for (t, c) in &self.credences {
            p += self.likelihood(t, evidence)? * c;
        }
        Ok(p)
    }

    /// p(T|A).
    pub fn posterior(&self, theory: &str, evidence: &str) -> Result<f64, ConfirmationError> {
        let prior = *self
            .credences
            .get(theory)
            .ok_or_else(|| ConfirmationError::UnknownTheory(theory.to_string()))?;
        let p_a = self.prob_evidence(evidence)?;
        if p_a == 0.0 {
            return Err(ConfirmationError::ZeroEvidence(evidence.to_string()));
        }
        Ok(self.likelihood(theory, evidence)? * prior / p_a)
    }

    /// p_new(T) = p(A|T)·p(T) / p(A).
    ///
    /// Evidence every theory finds equally likely leaves the credences
    /// untouched, bit for bit.
    pub fn conditionalize(&self, evidence: &str) -> Result<Self, ConfirmationError> {
        let p_a = self.prob_evidence(evidence)?;
        if p_a == 0.0 {
            return Err(ConfirmationError::ZeroEvidence(evidence.to_string()));
        }
        let liks = self
            .credences
            .keys()
            .map(|t| self.likelihood(t, evidence))
            .collect::<Result<Vec<_>, _>>()?;
        if liks.windows(2).all(|w| w[0] == w[1]) {
            return Ok(self.clone());
        }
        let joint: Vec<f64> = self
            .credences
            .values()
            .zip(&liks)
            .map(|(c, l)| c * l)
            .collect();
        let credences = self
            .credences
            .keys()
            .cloned()
            .zip(joint.iter().map(|j| j / p_a))
            .collect();
        Ok(Self {
            credences,
            likelihoods: self.likelihoods.clone(),
        })
    }
}

/// How an agent revises credence in `T` on learning `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdatePolicy {
    Conditionalize,
    /// Announced posterior q for each (theory, evidence) pair.
    Deviant(BTreeMap<(String, String), f64>),
    /// Evidence is declared irrelevant: q = p_old(T).
    Rigid,
}

impl UpdatePolicy {
    pub fn deviant(theory: &str, evidence: &str, q: f64) -> Self {
        UpdatePolicy::Deviant([((theory.to_string(), evidence.to_string()), q)].into())
    }

    pub fn announced(
        &self,
        cred: &CredenceState,
        theory: &str,
        evidence: &str,
    ) -> Result<f64, ConfirmationError> {
        match self {
            UpdatePolicy::Conditionalize => cred.posterior(theory, evidence),
            UpdatePolicy::Rigid => cred
                .credences
                .get(theory)
                .copied()
                .ok_or_else(|| ConfirmationError::UnknownTheory(theory.to_string())),
            UpdatePolicy::Deviant(map) => {
                let q = *map
                    .get(&(theory.to_string(), evidence.to_string()))
                    .ok_or_else(|| ConfirmationError::MissingAnnouncement {
                        theory: theory.to_string(),
                        evidence: evidence.to_string(),
                    })?;
                if (0.0..=1.0).contains(&q) {
                    Ok(q)
                } else {
                    Err(ConfirmationError::BadAnnouncement(q))
                }
            }
        }
    }
}

/// The three truth-value cases a book is settled on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    NotA,
    AAndT,
    AAndNotT,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::NotA, Case::AAndT, Case::AAndNotT];

    pub fn from_truth(a: bool, t: bool) -> Self {
        match (a, t) {
            (false, _) => Case::NotA,
            (true, true) => Case::AAndT,
            (true, false) => Case::AAndNotT,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::NotA => "not A",
            Case::AAndT => "A and T",
            Case::AAndNotT => "A and not T",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    PreEvidence,
    PostEvidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The agent pays quotient × stake and collects the stake if the bet wins.
    Buy,
    Sell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bet {
    pub name: String,
    pub proposition: String,
    pub quotient: f64,
    pub stake: f64,
    pub direction: Direction,
    pub placement: Placement,
    /// Net payoff to the agent in each case (0 where the bet is void).
    pub payoffs: BTreeMap<Case, f64>,
}

impl Bet {
    pub fn payoff(&self, case: Case) -> f64 {
        self.payoffs.get(&case).copied().unwrap_or(0.0)
    }
}

/// Settlement of a bet on `wins` at quotient `r`, stake `s`; `None` = void.
fn settle(direction: Direction, r: f64, s: f64, wins: Option<bool>) -> f64 {
    let buyer = match wins {
        None => 0.0,
        Some(true) => s * (1.0 - r),
        Some(false) => -s * r,
    };
    match direction {
        Direction::Buy => buyer,
        Direction::Sell => -buyer,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Book {
    #[serde(skip)]
    exact_net: Option<BTreeMap<Case, Exact>>,
    pub theory: String,
    pub evidence: String,
    /// p_old(T|A), the quotient of the conditional bet.
    pub conditional_credence: f64,
    /// q, the announced post-evidence credence.
    pub announced: f64,
    pub evidence_credence: f64,
    pub stake: f64,
    pub bets: Vec<Bet>,
    /// −|p−q|·p(A)·S, the agent's payoff in every case.
    pub guaranteed_net: f64,
    pub explanation: String,
}

impl Book {
    /// Net payoff in `case`. Settled in exact arithmetic when every quotient
    /// and stake is a short rational.
    pub fn net(&self, case: Case) -> f64 {
        if let Some(n) = self.exact_net.as_ref().and_then(|m| m.get(&case)) {
            return to_f64(n);
        }
        self.bets.iter().map(|b| b.payoff(case)).sum()
    }
}

/// Three-bet diachronic book against an agent whose announced posterior q
/// differs from p = p_old(T|A).
///
/// (i) before the evidence, a bet on T conditional on A at quotient p with
/// stake S, called off if ¬A; (ii) before the evidence, the agent buys a bet
/// on A at quotient p(A) with stake |p−q|·S; (iii) after learning A, a bet
/// on T at quotient q with stake S, in the opposite direction to (i). The
/// agent buys (i) when p > q and sells it when p < q. Every case then pays
/// −|p−q|·p(A)·S.
///
/// Returns `None` for conditionalizers and whenever |p−q| ≤ 1e-12.
pub fn build_dutch_book(
    cred: &CredenceState,
    policy: &UpdatePolicy,
    evidence: &str,
    theory: &str,
    stake: f64,
) -> Result<Option<Book>, ConfirmationError> {
    let p_a = cred.prob_evidence(evidence)?;
    if !(p_a > 0.0 && p_a < 1.0) {
        return Err(ConfirmationError::EvidenceNotContingent(p_a));
    }
    if matches!(policy, UpdatePolicy::Conditionalize) {
        return Ok(None);
    }
    let p = cred.posterior(theory, evidence)?;
    let q = policy.announced(cred, theory, evidence)?;
    if (p - q).abs() <= PARITY_TOLERANCE {
        return Ok(None);
    }
    let gap = (p - q).abs();
    let (first, third) = if p > q {
        (Direction::Buy, Direction::Sell)
    } else {
        (Direction::Sell, Direction::Buy)
    };
    let cases = |f: &dyn Fn(Case) -> f64| -> BTreeMap<Case, f64> {
        Case::ALL.iter().map(|c| (*c, f(*c))).collect()
    };
    let t_if_a = |c: Case| match c {
        Case::NotA => None,
        Case::AAndT => Some(true),
        Case::AAndNotT => Some(false),
    };
    let conditional = Bet {
        name: "i".into(),
        proposition: format!("{theory} given {evidence}"),
        quotient: p,
        stake,
        direction: first,
        placement: Placement::PreEvidence,
        payoffs: cases(&|c| settle(first, p, stake, t_if_a(c))),
    };
    let hedge_stake = gap * stake;
    let hedge = Bet {
        name: "ii".into(),
        proposition: evidence.to_string(),
        quotient: p_a,
        stake: hedge_stake,
        direction: Direction::Buy,
        placement: Placement::PreEvidence,
        payoffs: cases(&|c| settle(Direction::Buy, p_a, hedge_stake, Some(c != Case::NotA))),
    };
    let reversal = Bet {
        name: "iii".into(),
        proposition: theory.to_string(),
        quotient: q,
        stake,
        direction: third,
        placement: Placement::PostEvidence,
        payoffs: cases(&|c| settle(third, q, stake, t_if_a(c))),
    };
    let exact_net = exact_book(first, p, q, p_a, stake);
    let guaranteed_net = match &exact_net {
        Some(m) => to_f64(&m[&Case::NotA]),
        None => -gap * p_a * stake,
    };
    let verb = |d: Direction| match d {
        Direction::Buy => "buys",
        Direction::Sell => "sells",
    };
    let explanation = format!(
        "Before the evidence the agent {} a bet on {theory} given {evidence} at {} (stake {}, void if not {evidence}) \
         and buys a bet on {evidence} at {} (stake {}). If {evidence} is learned the agent {} a bet on {theory} at \
         its announced {} (stake {}). Bets (i) and (iii) net {} whenever {evidence} holds; bet (ii) converts that \
         into {} in every case.",
        verb(first),
        fmt_float(p),
        fmt_float(stake),
        fmt_float(p_a),
        fmt_float(hedge_stake),
        verb(third),
        fmt_float(q),
        fmt_float(stake),
        fmt_float(-gap * stake),
        fmt_float(guaranteed_net),
    );
    Ok(Some(Book {
        theory: theory.to_string(),
        evidence: evidence.to_string(),
        conditional_credence: p,
        announced: q,
        evidence_credence: p_a,
        stake,
        bets: vec![conditional, hedge, reversal],
        guaranteed_net,
        exact_net,
        explanation,
    }))
}

fn settle_exact(direction: Direction, r: &Exact, s: &Exact, wins: Option<bool>) -> Option<Exact> {
    let one = Exact::from_integer(1);
    let buyer = match wins {
        None => Exact::from_integer(0),
        Some(true) => s.checked_mul(&one.checked_sub(r)?)?,
        Some(false) => -s.checked_mul(r)?,
    };
    Some(match direction {
        Direction::Buy => buyer,
        Direction::Sell => -buyer,
    })
}

fn exact_book(first: Direction, p: f64, q: f64, p_a: f64, stake: f64) -> Option<BTreeMap<Case, Exact>> {
    let (p, q, p_a, s) = (short_ratio(p)?, short_ratio(q)?, short_ratio(p_a)?, short_ratio(stake)?);
    let third = match first {
        Direction::Buy => Direction::Sell,
        Direction::Sell => Direction::Buy,
    };
    let gap = p.checked_sub(&q)?.abs();
    let hedge = gap.checked_mul(&s)?;
    Case::ALL
        .iter()
        .map(|&c| {
            let t = match c {
                Case::NotA => None,
                Case::AAndT => Some(true),
                Case::AAndNotT => Some(false),
            };
            let total = settle_exact(first, &p, &s, t)?
                .checked_add(&settle_exact(Direction::Buy, &p_a, &hedge, Some(c != Case::NotA))?)?
                .checked_add(&settle_exact(third, &q, &s, t)?)?;
            Some((c, total))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafPayoff {
    pub leaf: String,
    pub case: Case,
    pub net: f64,
}

/// Three leaves for ¬A, A∧T and A∧¬T, weighted by the agent's credences,
/// together with the truth assignment [`evaluate_book_on_branches`] expects.
pub fn case_tree(
    cred: &CredenceState,
    evidence: &str,
    theory: &str,
) -> Result<(BranchTree, Vec<(bool, bool)>), ConfirmationError> {
    let p_a = cred.prob_evidence(evidence)?;
    let p_t = if p_a > 0.0 { cred.posterior(theory, evidence)? } else { 0.0 };
    let leaves = vec![
        BranchLeaf::fresh("not_a", Eigenvalue(0.0), vec![], 1.0 - p_a, None, 1),
        BranchLeaf::fresh("a_and_t", Eigenvalue(1.0), vec![], p_a * p_t, None, 1),
        BranchLeaf::fresh("a_and_not_t", Eigenvalue(2.0), vec![], p_a * (1.0 - p_t), None, 1),
    ];
    let tree = BranchTree::from_leaves(leaves, crate::branching::DEFAULT_GRAIN, 1)?;
    Ok((tree, vec![(false, false), (true, true), (true, false)]))
}

/// Settles the book on every leaf. `truth[i]` is (A holds, T holds) on
/// leaf `i`; without a book every leaf nets zero.
pub fn evaluate_book_on_branches(
    book: Option<&Book>,
    tree: &BranchTree,
    truth: &[(bool, bool)],
) -> Result<Vec<LeafPayoff>, ConfirmationError> {
    if truth.len() != tree.leaves().len() {
        return Err(ConfirmationError::AssignmentLength {
            given: truth.len(),
            expected: tree.leaves().len(),
        });
    }
    Ok(tree
        .leaves()
        .iter()
        .zip(truth)
        .map(|(leaf, &(a, t))| {
            let case = Case::from_truth(a, t);
            LeafPayoff {
                leaf: leaf.label.clone(),
                case,
                net: book.map_or(0.0, |b| b.net(case)),
            }
        })
        .collect())
}

/// A theory assigning likelihoods to measurement outcomes. `likelihoods[g]`
/// covers game `g` of the sequence; a single table applies to every game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theory {
    pub name: String,
    pub prior: f64,
    pub likelihoods: Vec<BTreeMap<Eigenvalue, f64>>,
}

impl Theory {
    /// A theory whose likelihoods are the Born weights of `game`.
    pub fn born(name: &str, prior: f64, game: &QuantumGame) -> Result<Self, ConfirmationError> {
        let weights = crate::quantum::born_weights(game).map_err(StrategyError::from)?;
        Ok(Self {
            name: name.to_string(),
            prior,
            likelihoods: vec![weights],
        })
    }

    fn table(&self, game: usize) -> Option<&BTreeMap<Eigenvalue, f64>> {
        match self.likelihoods.len() {
            0 => None,
            1 => self.likelihoods.first(),
            _ => self.likelihoods.get(game),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub theories: Vec<Theory>,
    pub games: Vec<QuantumGame>,
    pub strategy: Strategy,
    pub depth: usize,
    pub true_theory: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub outcome_class: String,
    pub caring_mass: f64,
    pub credences: BTreeMap<String, f64>,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfirmationReport {
    pub strategy: String,
    pub depth: usize,
    pub true_theory: String,
    pub threshold: f64,
    /// Caring mass of final branches whose true-theory credence exceeds the
    /// threshold.
    pub mass_above_threshold: f64,
    /// Caring-weighted mean credence in the true theory, per iteration.
    pub mean_true_credence: Vec<f64>,
    pub frozen_mass: f64,
    pub rows: Vec<TrajectoryRow>,
}

impl Tabular for ConfirmationReport {
    fn header(&self) -> Vec<String> {
        ["iteration", "outcome_class", "caring_mass", "credence_per_theory"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let creds: Vec<String> = r
                    .credences
                    .iter()
                    .map(|(t, c)| format!("{t}={}", fmt_float(*c)))
                    .collect();
                let class = if r.frozen {
                    format!("{} frozen", r.outcome_class)
                } else {
                    r.outcome_class.clone()
                };
                vec![
                    r.iteration.to_string(),
                    class,
                    fmt_float(r.caring_mass),
                    creds.join(";"),
                ]
            })
            .collect()
    }
}

/// Outcome counts per (game index, outcome); credences depend only on these.
type ClassKey = (bool, Vec<u32>);

#[derive(Clone)]
struct PathState {
    key: ClassKey,
    mass: f64,
    cred: CredenceState,
}

struct Prepared {
    /// Per game: (outcome, care, evidence label).
    steps: Vec<Vec<(Eigenvalue, f64, String)>>,
    /// Position of (game, outcome) in the count vector.
    slots: Vec<(usize, Eigenvalue)>,
    prior: CredenceState,
}

fn evidence_label(game: usize, x: Eigenvalue) -> String {
    format!("g{game}:{x}")
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, ConfirmationError> {
    if cfg.theories.is_empty() || cfg.games.is_empty() {
        return Err(ConfirmationError::EmptyExperiment);
    }
    let mut steps = Vec::new();
    let mut slots = Vec::new();
    let mut likelihoods: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (g, game) in cfg.games.iter().enumerate() {
        let tree = branch(game, &MeasurementRealization::direct(), 1)?;
        let care = caring_measure(&cfg.strategy, &tree)?.by_outcome();
        let mut step = Vec::new();
        for (x, c) in care {
            let label = evidence_label(g, x);
            for th in &cfg.theories {
                let lik = th.table(g).and_then(|t| t.get(&x)).copied().ok_or_else(|| {
                    ConfirmationError::MissingLikelihood {
                        theory: th.name.clone(),
                        evidence: label.clone(),
                    }
                })?;
                likelihoods
                    .entry(th.name.clone())
                    .or_default()
                    .insert(label.clone(), lik);
            }
            slots.push((g, x));
            step.push((x, c, label));
        }
        steps.push(step);
    }
    let prior = CredenceState::new(
        cfg.theories.iter().map(|t| (t.name.clone(), t.prior)).collect(),
        likelihoods,
    )?;
    if !prior.credences.contains_key(&cfg.true_theory) {
        return Err(ConfirmationError::UnknownTheory(cfg.true_theory.clone()));
    }
    Ok(Prepared {
        steps,
        slots,
        prior,
    })
}

fn class_name(slots: &[(usize, Eigenvalue)], multi_game: bool, counts: &[u32]) -> String {
    let parts: Vec<String> = slots
        .iter()
        .zip(counts)
        .map(|((g, x), n)| {
            if multi_game {
                format!("g{g}:{x}={n}")
            } else {
                format!("{x}={n}")
            }
        })
        .collect();
    parts.join(";")
}

fn run(cfg: &ExperimentConfig, merge: bool) -> Result<ConfirmationReport, ConfirmationError> {
    let prep = prepare(cfg)?;
    let multi_game = cfg.games.len() > 1;
    let slot_of: BTreeMap<(usize, Eigenvalue), usize> = prep
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i))
        .collect();
    let mut states = vec![PathState {
        key: (false, vec![0; prep.slots.len()]),
        mass: 1.0,
        cred: prep.prior.clone(),
    }];
    let mut rows = Vec::new();
    let mut means = Vec::new();
    let record = |iteration: usize, states: &[PathState], rows: &mut Vec<TrajectoryRow>| -> f64 {
        let mut grouped: BTreeMap<&ClassKey, (f64, &CredenceState)> = BTreeMap::new();
        for s in states {
            let slot = grouped.entry(&s.key).or_insert((0.0, &s.cred));
            slot.0 += s.mass;
        }
        let mut mean = 0.0;
        for (key, (mass, cred)) in grouped {
            mean += mass * cred.credences[&cfg.true_theory];
            rows.push(TrajectoryRow {
                iteration,
                outcome_class: class_name(&prep.slots, multi_game, &key.1),
                caring_mass: mass,
                credences: cred.credences.clone(),
                frozen: key.0,
            });
        }
        mean
    };
    means.push(record(0, &states, &mut rows));

    for it in 0..cfg.depth {
        let g = it % cfg.games.len();
        let mut next: Vec<PathState> = Vec::new();
        let mut index: BTreeMap<ClassKey, usize> = BTreeMap::new();
        for s in &states {
            let children: Vec<PathState> = if s.key.0 {
                vec![s.clone()]
            } else {
                let mut out = Vec::new();
                for (x, care, label) in &prep.steps[g] {
                    let mut key = s.key.clone();
                    let cred = match s.cred.conditionalize(label) {
                        Ok(c) => {
                            key.1[slot_of[&(g, *x)]] += 1;
                            c
                        }
                        Err(ConfirmationError::ZeroEvidence(_)) => {
                            key.1[slot_of[&(g, *x)]] += 1;
                            key.0 = true;
                            s.cred.clone()
                        }
                        Err(e) => return Err(e),
                    };
                    out.push(PathState {
                        key,
                        mass: s.mass * care,
                        cred,
                    });
                }
                out
            };
            for child in children {
                if merge {
                    if let Some(&i) = index.get(&child.key) {
                        next[i].mass += child.mass;
                        continue;
                    }
                    index.insert(child.key.clone(), next.len());
                }
                next.push(child);
            }
        }
        states = next;
        means.push(record(it + 1, &states, &mut rows));
    }

    let mut above = 0.0;
    let mut frozen = 0.0;
    for s in &states {
        if s.cred.credences[&cfg.true_theory] > cfg.threshold {
            above += s.mass;
        }
        if s.key.0 {
            frozen += s.mass;
        }
    }
    Ok(ConfirmationReport {
        strategy: cfg.strategy.to_string(),
        depth: cfg.depth,
        true_theory: cfg.true_theory.clone(),
        threshold: cfg.threshold,
        mass_above_threshold: above,
        mean_true_credence: means,
        frozen_mass: frozen,
        rows,
    })
}

/// Runs the experiment exactly, merging branches with identical outcome
/// counts into one class. Credences after a sequence of outcomes depend only
/// on how often each outcome occurred, so the class count grows
/// polynomially with depth instead of exponentially.
///
/// A branch whose outcome every theory deems impossible is frozen: its
/// credences stop updating and it is reported with `frozen = true`.
pub fn confirmation_experiment(cfg: &ExperimentConfig) -> Result<ConfirmationReport, ConfirmationError> {
    run(cfg, true)
}

/// Same report by enumerating every path separately. Exponential in depth.
pub fn enumerate_confirmation(cfg: &ExperimentConfig) -> Result<ConfirmationReport, ConfirmationError> {
    run(cfg, false)
}
