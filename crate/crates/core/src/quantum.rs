//! Finite-dimensional pure states, observables and quantum games.
//!
//! A quantum game is the triple ⟨|ψ⟩, X̂, 𝒫⟩: a state to be measured, the
//! observable measured on it, and a payoff function from observed eigenvalues
//! to consequences. A [`MeasurementRealization`] records *how* the observable
//! is measured; the only non-direct realization supported is the two-component
//! ancilla coupling built by [`couple_ancilla`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{self, Exact};

/// Tolerance for floating-point normalization checks.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("amplitude for `{0}` is not finite")]
    NonFinite(String),
    #[error("duplicate basis label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid amplitude ratio {num}/{den}")]
    InvalidRatio { num: i64, den: i64 },
    #[error("state is not normalized: sum of squared amplitudes is {0}")]
    NotNormalized(f64),
    #[error("observable `{observable}` has no eigenvalue for basis label `{label}`")]
    MissingEigenvalue { observable: String, label: String },
    #[error("payoff has no consequence for eigenvalue {0}")]
    MissingPayoff(Eigenvalue),
    #[error("ancilla coupling needs exactly two state components, found {0}")]
    UnsupportedShape(usize),
    #[error("ancilla coupling needs 1 <= n < N, got n={n}, N={total}")]
    InvalidCoupling { n: u32, total: u32 },
    #[error("eigenvalue relabeling is not injective")]
    NonInjectiveRelabel,
    #[error("invalid realization `{0}`")]
    BadRealization(String),
    #[error("game document: {0}")]
    Document(String),
    #[error("invalid game: {0}")]
    Invalid(ValidationReport),
}

/// A real eigenvalue usable as an ordered map key.
///
/// Ordering is `f64::total_cmp` with `-0.0` folded into `0.0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Eigenvalue(pub f64);

impl Eigenvalue {
    pub fn value(self) -> f64 {
        self.0 + 0.0
    }
}

impl PartialEq for Eigenvalue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Eigenvalue {}

impl PartialOrd for Eigenvalue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Eigenvalue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value().total_cmp(&other.value())
    }
}

impl fmt::Display for Eigenvalue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Eigenvalue {
    type Err = std::num::ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(Eigenvalue)
    }
}

/// Complex coefficient of a basis state.
///
/// Amplitudes built from `√(m/n)` data also carry the exact value of |a|², so
/// normalization and Born weights can be checked without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    re: f64,
    im: f64,
    exact_norm_sqr: Option<Exact>,
}

impl Amplitude {
    pub fn new(re: f64, im: f64) -> Self {
        Self {
            re,
            im,
            exact_norm_sqr: None,
        }
    }

    pub fn real(re: f64) -> Self {
        Self::new(re, 0.0)
    }

    /// The positive real amplitude `√(num/den)`.
    pub fn sqrt_ratio(num: i64, den: i64) -> Result<Self, QuantumError> {
        if num < 0 || den <= 0 {
            return Err(QuantumError::InvalidRatio { num, den });
        }
        Ok(Self::from_exact_norm_sqr(Exact::new(num, den)))
    }

    pub fn from_exact_norm_sqr(norm_sqr: Exact) -> Self {
        Self {
            re: exact::to_f64(&norm_sqr).sqrt(),
            im: 0.0,
            exact_norm_sqr: Some(norm_sqr),
        }
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn norm_sqr(&self) -> f64 {
        match &self.exact_norm_sqr {
            Some(r) => exact::to_f64(r),
            None => self.re * self.re + self.im * self.im,
        }
    }

    pub fn exact_norm_sqr(&self) -> Option<Exact> {
        self.exact_norm_sqr
    }

    /// Multiplies by `1/√k`.
    pub fn scale_inv_sqrt(&self, k: u32) -> Self {
        let s = (k as f64).sqrt();
        Self {
            re: self.re / s,
            im: self.im / s,
            exact_norm_sqr: self
                .exact_norm_sqr
                .and_then(|r| exact::checked_product(&r, &Exact::new(1, k as i64))),
        }
    }
}

/// A normalized (or checkably non-normalized) superposition over labeled basis
/// states. Normalization is reported by [`validate_game`] rather than enforced
/// here, so that malformed inputs can be diagnosed.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    labels: Vec<String>,
    amplitudes: Vec<Amplitude>,
}

impl PureState {
    pub fn new<S: Into<String>>(
        entries: impl IntoIterator<Item = (S, Amplitude)>,
    ) -> Result<Self, QuantumError> {
        let mut labels = Vec::new();
        let mut amplitudes = Vec::new();
        let mut seen = BTreeSet::new();
        for (label, amp) in entries {
            let label = label.into();
            if !amp.is_finite() {
                return Err(QuantumError::NonFinite(label));
            }
            if !seen.insert(label.clone()) {
                return Err(QuantumError::DuplicateLabel(label));
            }
            labels.push(label);
            amplitudes.push(amp);
        }
        Ok(Self { labels, amplitudes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Amplitude)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.amplitudes.iter())
    }

    pub fn amplitude(&self, label: &str) -> Option<&Amplitude> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.amplitudes[i])
    }

    pub fn exact_norm_sqr(&self) -> Option<Exact> {
        let parts: Option<Vec<Exact>> = self.amplitudes.iter().map(|a| a.exact_norm_sqr()).collect();
        exact::checked_sum(parts?.iter())
    }

    pub fn norm_sqr(&self) -> f64 {
        match self.exact_norm_sqr() {
            Some(r) => exact::to_f64(&r),
            None => self.amplitudes.iter().map(Amplitude::norm_sqr).sum(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        match self.exact_norm_sqr() {
            Some(r) => r == Exact::from_integer(1),
            None => (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub name: String,
    eigenvalues: BTreeMap<String, Eigenvalue>,
}

impl Observable {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        eigenvalues: impl IntoIterator<Item = (S, Eigenvalue)>,
    ) -> Self {
        Self {
            name: name.into(),
            eigenvalues: eigenvalues.into_iter().map(|(l, e)| (l.into(), e)).collect(),
        }
    }

    pub fn eigenvalue(&self, label: &str) -> Option<Eigenvalue> {
        self.eigenvalues.get(label).copied()
    }

    pub fn eigenvalues(&self) -> &BTreeMap<String, Eigenvalue> {
        &self.eigenvalues
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consequence {
    pub name: String,
    pub utility: f64,
}

impl Consequence {
    pub fn new(name: impl Into<String>, utility: f64) -> Self {
        Self {
            name: name.into(),
            utility,
        }
    }
}

/// Payoff 𝒫 from eigenvalues to consequences.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PayoffFunction {
    map: BTreeMap<Eigenvalue, Consequence>,
}

impl PayoffFunction {
    pub fn new(entries: impl IntoIterator<Item = (Eigenvalue, Consequence)>) -> Self {
        Self {
            map: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, x: Eigenvalue) -> Option<&Consequence> {
        self.map.get(&x)
    }

    pub fn utility(&self, x: Eigenvalue) -> Result<f64, QuantumError> {
        self.get(x)
            .map(|c| c.utility)
            .ok_or(QuantumError::MissingPayoff(x))
    }

    pub fn entries(&self) -> &BTreeMap<Eigenvalue, Consequence> {
        &self.map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGame {
    pub state: PureState,
    pub observable: Observable,
    pub payoff: PayoffFunction,
}

impl QuantumGame {
    /// Builds a game and rejects it unless [`validate_game`] is clean.
    pub fn new(
        state: PureState,
        observable: Observable,
        payoff: PayoffFunction,
    ) -> Result<Self, QuantumError> {
        let game = Self {
            state,
            observable,
            payoff,
        };
        let report = validate_game(&game);
        if report.is_empty() {
            Ok(game)
        } else {
            Err(QuantumError::Invalid(report))
        }
    }

    /// `a₁|x₁⟩ + a₂|x₂⟩` with eigenvalues 1, 2 paying `c₁`, `c₂`.
    pub fn two_outcome(
        a1: Amplitude,
        a2: Amplitude,
        u1: f64,
        u2: f64,
    ) -> Result<Self, QuantumError> {
        Self::indexed(vec![a1, a2], &[u1, u2])
    }

    /// `√(m/n)|x₁⟩ + √((n−m)/n)|x₂⟩`, exact.
    pub fn rational_two_outcome(m: i64, n: i64, u1: f64, u2: f64) -> Result<Self, QuantumError> {
        Self::two_outcome(
            Amplitude::sqrt_ratio(m, n)?,
            Amplitude::sqrt_ratio(n - m, n)?,
            u1,
            u2,
        )
    }

    /// `(1/√n)(|x₁⟩ + … + |xₙ⟩)` with `n = utilities.len()`.
    pub fn equal_superposition(utilities: &[f64]) -> Result<Self, QuantumError> {
        let n = utilities.len() as i64;
        let amps = (0..n)
            .map(|_| Amplitude::sqrt_ratio(1, n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::indexed(amps, utilities)
    }

    /// Components `√wᵢ |xᵢ⟩` for exact weights `wᵢ`.
    pub fn from_weights(weights: &[Exact], utilities: &[f64]) -> Result<Self, QuantumError> {
        let amps = weights
            .iter()
            .map(|w| {
                if *w < Exact::from_integer(0) {
                    Err(QuantumError::InvalidRatio {
                        num: *w.numer(),
                        den: *w.denom(),
                    })
                } else {
                    Ok(Amplitude::from_exact_norm_sqr(*w))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::indexed(amps, utilities)
    }

    fn indexed(amps: Vec<Amplitude>, utilities: &[f64]) -> Result<Self, QuantumError> {
        let k = amps.len().min(utilities.len());
        let state = PureState::new((0..k).map(|i| (format!("x{}", i + 1), amps[i])))?;
        let observable = Observable::new(
            "X",
            (0..k).map(|i| (format!("x{}", i + 1), Eigenvalue((i + 1) as f64))),
        );
        let payoff = PayoffFunction::new((0..k).map(|i| {
            (
                Eigenvalue((i + 1) as f64),
                Consequence::new(format!("c{}", i + 1), utilities[i]),
            )
        }));
        Self::new(state, observable, payoff)
    }

    /// The same physical game described with different basis labels and
    /// eigenvalue names. The payoff is carried across so every branch keeps
    /// its consequence.
    pub fn relabeled(
        &self,
        label: impl Fn(&str) -> String,
        eigen: impl Fn(Eigenvalue) -> Eigenvalue,
    ) -> Result<Self, QuantumError> {
        let originals: BTreeSet<Eigenvalue> = self.observable.eigenvalues.values().copied().collect();
        let mapped: BTreeSet<Eigenvalue> = originals.iter().map(|e| eigen(*e)).collect();
        if mapped.len() != originals.len() {
            return Err(QuantumError::NonInjectiveRelabel);
        }
        let state = PureState::new(self.state.iter().map(|(l, a)| (label(l), *a)))?;
        let observable = Observable::new(
            self.observable.name.clone(),
            self.observable
                .eigenvalues
                .iter()
                .map(|(l, e)| (label(l), eigen(*e))),
        );
        let payoff = PayoffFunction::new(
            self.payoff
                .map
                .iter()
                .map(|(e, c)| (eigen(*e), c.clone())),
        );
        Self::new(state, observable, payoff)
    }

    /// Eigenvalue of every basis label, in state order.
    pub fn outcome_of(&self, label: &str) -> Result<Eigenvalue, QuantumError> {
        self.observable
            .eigenvalue(label)
            .ok_or_else(|| QuantumError::MissingEigenvalue {
                observable: self.observable.name.clone(),
                label: label.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealizationKind {
    Direct,
    AncillaCoupled { n: u32, total: u32 },
}

/// How an observable is measured: the ω of a quadruple ⟨|ψ⟩, X̂, 𝒫, ω⟩.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRealization {
    pub kind: RealizationKind,
    pub description: String,
}

impl MeasurementRealization {
    pub fn direct() -> Self {
        Self {
            kind: RealizationKind::Direct,
            description: "direct measurement".into(),
        }
    }

    pub fn ancilla(n: u32, total: u32) -> Result<Self, QuantumError> {
        if n == 0 || n >= total {
            return Err(QuantumError::InvalidCoupling { n, total });
        }
        Ok(Self {
            kind: RealizationKind::AncillaCoupled { n, total },
            description: format!("ancilla-coupled measurement, n={n}, N={total}"),
        })
    }
}

impl fmt::Display for MeasurementRealization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RealizationKind::Direct => write!(f, "direct"),
            RealizationKind::AncillaCoupled { n, total } => write!(f, "ancilla:n={n},N={total}"),
        }
    }
}

impl FromStr for MeasurementRealization {
    type Err = QuantumError;

    /// Accepts `direct`, `ancilla:n=1,N=3` or `ancilla:1/3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || QuantumError::BadRealization(s.to_string());
        let s = s.trim();
        if s.eq_ignore_ascii_case("direct") {
            return Ok(Self::direct());
        }
        let rest = s.strip_prefix("ancilla:").ok_or_else(bad)?;
        let (n, total) = if let Some((a, b)) = rest.split_once('/') {
            (a.trim().parse().ok(), b.trim().parse().ok())
        } else {
            let mut n = None;
            let mut total = None;
            for part in rest.split(',') {
                match part.split_once('=') {
                    Some(("n", v)) => n = v.trim().parse().ok(),
                    Some(("N", v)) => total = v.trim().parse().ok(),
                    _ => return Err(bad()),
                }
            }
            (n, total)
        };
        match (n, total) {
            (Some(n), Some(total)) => Self::ancilla(n, total),
            _ => Err(bad()),
        }
    }
}

/// Amplitude-squared weight of each eigenvalue, summed over degenerate labels.
pub fn born_weights(game: &QuantumGame) -> Result<BTreeMap<Eigenvalue, f64>, QuantumError> {
    if let Some(exact) = born_weights_exact(game)? {
        return Ok(exact.iter().map(|(k, v)| (*k, exact::to_f64(v))).collect());
    }
    let mut out = BTreeMap::new();
    for (label, amp) in game.state.iter() {
        let x = game.outcome_of(label)?;
        *out.entry(x).or_insert(0.0) += amp.norm_sqr();
    }
    Ok(out)
}

/// Exact Born weights, or `None` when some amplitude has no exact form.
pub fn born_weights_exact(
    game: &QuantumGame,
) -> Result<Option<BTreeMap<Eigenvalue, Exact>>, QuantumError> {
    check_normalized(&game.state)?;
    let mut out: BTreeMap<Eigenvalue, Exact> = BTreeMap::new();
    for (label, amp) in game.state.iter() {
        let x = game.outcome_of(label)?;
        let Some(w) = amp.exact_norm_sqr() else {
            return Ok(None);
        };
        let slot = out.entry(x).or_insert_with(|| Exact::from_integer(0));
        match exact::checked_sum([*slot, w].iter()) {
            Some(sum) => *slot = sum,
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn check_normalized(state: &PureState) -> Result<(), QuantumError> {
    if state.is_normalized() {
        Ok(())
    } else {
        Err(QuantumError::NotNormalized(state.norm_sqr()))
    }
}

/// Result of the ancilla construction
/// `(a₁/√n)|x₁⟩(|y₁⟩+…+|yₙ⟩) + (a₂/√(N−n))|x₂⟩(|yₙ₊₁⟩+…+|y_N⟩)`.
///
/// Each product term is uniquely identified by its ancilla label, so the joint
/// state is indexed by `y1 … yN`; `grouping` records which x-eigenvalue each
/// `yⱼ` counts as.
#[derive(Debug, Clone, PartialEq)]
pub struct AncillaCoupling {
    pub joint_state: PureState,
    pub ancilla_observable: Observable,
    pub grouping: BTreeMap<String, Eigenvalue>,
}

impl AncillaCoupling {
    /// The game "measure Ŷ on B and pay according to the grouped x-outcome".
    pub fn ancilla_game(&self, payoff: &PayoffFunction) -> Result<QuantumGame, QuantumError> {
        let mut entries = Vec::new();
        for label in self.joint_state.labels() {
            let y = self
                .ancilla_observable
                .eigenvalue(label)
                .expect("ancilla observable covers every joint label");
            let x = self.grouping[label];
            let c = payoff.get(x).ok_or(QuantumError::MissingPayoff(x))?;
            entries.push((y, c.clone()));
        }
        QuantumGame::new(
            self.joint_state.clone(),
            self.ancilla_observable.clone(),
            PayoffFunction::new(entries),
        )
    }
}

pub fn couple_ancilla(
    game: &QuantumGame,
    n: u32,
    total: u32,
) -> Result<AncillaCoupling, QuantumError> {
    if game.state.len() != 2 {
        return Err(QuantumError::UnsupportedShape(game.state.len()));
    }
    if n == 0 || n >= total {
        return Err(QuantumError::InvalidCoupling { n, total });
    }
    check_normalized(&game.state)?;
    let labels = game.state.labels();
    let amps = game.state.amplitudes();
    let x1 = game.outcome_of(&labels[0])?;
    let x2 = game.outcome_of(&labels[1])?;
    let b1 = amps[0].scale_inv_sqrt(n);
    let b2 = amps[1].scale_inv_sqrt(total - n);

    let mut entries = Vec::with_capacity(total as usize);
    let mut grouping = BTreeMap::new();
    let mut eigen = Vec::with_capacity(total as usize);
    for j in 1..=total {
        let label = format!("y{j}");
        let (amp, x) = if j <= n { (b1, x1) } else { (b2, x2) };
        entries.push((label.clone(), amp));
        grouping.insert(label.clone(), x);
        eigen.push((label, Eigenvalue(j as f64)));
    }
    Ok(AncillaCoupling {
        joint_state: PureState::new(entries)?,
        ancilla_observable: Observable::new("Y", eigen),
        grouping,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NotNormalized { norm_sqr: f64 },
    MissingEigenvalue { label: String },
    MissingPayoff { eigenvalue: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotNormalized { norm_sqr } => {
                write!(f, "state not normalized (sum |a|^2 = {norm_sqr})")
            }
            Violation::MissingEigenvalue { label } => {
                write!(f, "observable has no eigenvalue for `{label}`")
            }
            Violation::MissingPayoff { eigenvalue } => {
                write!(f, "payoff not defined on eigenvalue {eigenvalue}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists violated game invariants: normalization, eigenvalue coverage and
/// payoff totality on the state's support.
pub fn validate_game(game: &QuantumGame) -> ValidationReport {
    let mut violations = Vec::new();
    if !game.state.is_normalized() {
        violations.push(Violation::NotNormalized {
            norm_sqr: game.state.norm_sqr(),
        });
    }
    let mut reported = BTreeSet::new();
    for (label, amp) in game.state.iter() {
        match game.observable.eigenvalue(label) {
            None => violations.push(Violation::MissingEigenvalue {
                label: label.to_string(),
            }),
            Some(x) => {
                if amp.norm_sqr() > 0.0 && game.payoff.get(x).is_none() && reported.insert(x) {
                    violations.push(Violation::MissingPayoff {
                        eigenvalue: x.value(),
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

// JSON document form:
// {state: [{label, re, im}...], observable: {name, eigenvalues: {label: value}},
//  payoff: {eigenvalue: {consequence, utility}}}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntryDoc {
    label: String,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableDoc {
    name: String,
    eigenvalues: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoffDoc {
    consequence: String,
    utility: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDoc {
    state: Vec<StateEntryDoc>,
    observable: ObservableDoc,
    payoff: BTreeMap<String, PayoffDoc>,
}

impl QuantumGame {
    /// Parses the JSON document form. The result is not validated; run
    /// [`validate_game`] to diagnose it.
    pub fn from_json(text: &str) -> Result<Self, QuantumError> {
        let doc: GameDoc =
            serde_json::from_str(text).map_err(|e| QuantumError::Document(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, QuantumError> {
        let doc: GameDoc =
            serde_json::from_value(value).map_err(|e| QuantumError::Document(e.to_string()))?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: GameDoc) -> Result<Self, QuantumError> {
        let state = PureState::new(
            doc.state
                .into_iter()
                .map(|e| (e.label, Amplitude::new(e.re, e.im))),
        )?;
        let observable = Observable::new(
            doc.observable.name,
            doc.observable
                .eigenvalues
                .into_iter()
                .map(|(l, v)| (l, Eigenvalue(v))),
        );
        let mut payoff = Vec::new();
        for (key, p) in doc.payoff {
            let x: Eigenvalue = key
                .parse()
                .map_err(|_| QuantumError::Document(format!("payoff key `{key}` is not a number")))?;
            payoff.push((x, Consequence::new(p.consequence, p.utility)));
        }
        Ok(Self {
            state,
            observable,
            payoff: PayoffFunction::new(payoff),
        })
    }

    pub fn to_json(&self) -> String {
        let doc = GameDoc {
            state: self
                .state
                .iter()
                .map(|(l, a)| StateEntryDoc {
                    label: l.to_string(),
                    re: a.re(),
                    im: a.im(),
                })
                .collect(),
            observable: ObservableDoc {
                name: self.observable.name.clone(),
                eigenvalues: self
                    .observable
                    .eigenvalues
                    .iter()
                    .map(|(l, e)| (l.clone(), e.value()))
                    .collect(),
            },
            payoff: self
                .payoff
                .map
                .iter()
                .map(|(e, c)| {
                    (
                        e.to_string(),
                        PayoffDoc {
                            consequence: c.name.clone(),
                            utility: c.utility,
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("game document serializes")
    }
}
