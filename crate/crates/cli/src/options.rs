//! Command-line and config-file options, one struct per subcommand.
//!
//! Every field is optional so that flags can be layered over a config file.
//! Config keys use the flag names (`max-n`, `a1-squared`, ...).

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::impl_options;

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct GameEvalOpts {
    /// Game document (JSON).
    #[arg(long)]
    pub game: Option<PathBuf>,
    /// Branch weights such as `1/3,2/3`; builds a game with eigenvalues 1..k.
    #[arg(long)]
    pub weights: Option<String>,
    /// Utilities paired with --weights, e.g. `10,0`.
    #[arg(long, allow_hyphen_values = true)]
    pub utilities: Option<String>,
    /// born, egalitarian[:tau=T], squared or eigenvalue.
    #[arg(long)]
    pub strategy: Option<String>,
    /// `direct` or `ancilla:n/N`; repeat to compare realizations.
    #[arg(long = "realization")]
    pub realizations: Option<Vec<String>>,
    /// Also value the game after relabeling its eigenvalues.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub physicality: Option<bool>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct DwVerifyOpts {
    /// 1, 2, 3, general or egal-demo.
    #[arg(long)]
    pub stage: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// Stage 3: branches of the first outcome.
    #[arg(long)]
    pub m: Option<u32>,
    /// Stage 2: branch count; stage 3: ancilla dimension.
    #[arg(long)]
    pub n: Option<u32>,
    /// Largest n swept when --n is absent [stage 2: 64, stage 3: 32].
    #[arg(long)]
    pub max_n: Option<u32>,
    /// Utility vectors separated by `;`, e.g. `10,0;3,4`.
    #[arg(long, allow_hyphen_values = true)]
    pub payoffs: Option<String>,
    /// Number of extra random rational payoffs, drawn from --seed.
    #[arg(long)]
    pub sweep: Option<usize>,
    /// General stage: |a1|², e.g. `1/sqrt2`, `pi/4`, `e/3`.
    #[arg(long)]
    pub a1_squared: Option<String>,
    /// General stage: residual target [1e-4].
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// General stage: largest denominator tried [4096].
    #[arg(long)]
    pub cap: Option<u32>,
    /// General stage with several outcomes, or the demo game: exact weights.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub utilities: Option<String>,
    /// Demo: cells per leaf [8].
    #[arg(long)]
    pub fine_dim: Option<usize>,
    /// Demo: occupancy threshold [1e-9].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Demo: rotation angle [1e-3].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Demo: random rotation schedule of this many pairs instead of the
    /// fixed scenario.
    #[arg(long)]
    pub random_steps: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct DemoOpts {
    /// Exact branch weights [1/3,2/3].
    #[arg(long)]
    pub weights: Option<String>,
    /// Utilities [10,0].
    #[arg(long, allow_hyphen_values = true)]
    pub utilities: Option<String>,
    /// Cells per leaf [8].
    #[arg(long)]
    pub fine_dim: Option<usize>,
    /// Occupancy threshold [1e-9].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Rotation angle [1e-3].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Random rotation schedule of this many pairs instead of the fixed
    /// scenario.
    #[arg(long)]
    pub random_steps: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct DutchbookOpts {
    /// p(A) [0.5].
    #[arg(long)]
    pub p_a: Option<f64>,
    /// p(T|A) [0.8].
    #[arg(long)]
    pub p_t_given_a: Option<f64>,
    /// p(T), with --lik-t and --lik-not-t instead of the marginals.
    #[arg(long)]
    pub prior: Option<f64>,
    /// p(A|T).
    #[arg(long)]
    pub lik_t: Option<f64>,
    /// p(A|not-T).
    #[arg(long)]
    pub lik_not_t: Option<f64>,
    /// Announced posterior credence in T after learning A.
    #[arg(long)]
    pub q: Option<f64>,
    /// Stake S [1].
    #[arg(long)]
    pub stake: Option<f64>,
    /// deviant, conditionalize or rigid [deviant with --q, else conditionalize].
    #[arg(long)]
    pub policy: Option<String>,
    /// Also settle this many random books drawn from --seed.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ConfirmOpts {
    /// Theories: [{name, prior, likelihoods?}], likelihoods keyed by eigenvalue.
    #[arg(long)]
    pub theories: Option<PathBuf>,
    /// One game document or a list repeated cyclically.
    #[arg(long)]
    pub games: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// Repetitions [20].
    #[arg(long)]
    pub depth: Option<usize>,
    /// Theory whose credence is tracked [first listed].
    #[arg(long)]
    pub true_theory: Option<String>,
    /// Credence threshold [0.95].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Cross-check class merging against full enumeration at this depth.
    #[arg(long)]
    pub check_depth: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ExtractOpts {
    /// Preference file: JSON list of tiers of acts, best first.
    #[arg(long)]
    pub prefs: Option<PathBuf>,
    /// Round-trip this many random instances drawn from --seed.
    #[arg(long)]
    pub random: Option<usize>,
    /// Random instances: most states [4].
    #[arg(long)]
    pub max_states: Option<usize>,
    /// Random instances: most consequences [4].
    #[arg(long)]
    pub max_consequences: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub format: Option<String>,
}

impl_options!(GameEvalOpts, DwVerifyOpts, DemoOpts, DutchbookOpts, ConfirmOpts, ExtractOpts);
