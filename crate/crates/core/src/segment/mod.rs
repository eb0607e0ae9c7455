//! Path estimators for the Bayesian HMM.
//!
//! Every method takes a [`Problem`], an initial path and a
//! [`SegmenterConfig`], and returns a [`RunTrace`] whose `final_score` is
//! `ln p(x, y)` of the returned path, the common yardstick.

mod bem;
mod icm;
mod sa;
mod sem;
mod vb;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hmm::StatePath;
use crate::model::{check_model, log_joint, DirichletPrior, EmissionMode};

pub use bem::{bayes_em, BemInit, BemOutput};
pub use icm::icm;
pub use sa::{simulated_annealing, simulated_annealing_observed};
pub use sem::{seg_em, seg_mm};
pub use vb::{variational_bayes, variational_bayes_observed, VbState};

/// Observations together with the model they are scored under.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub obs: &'a [f64],
    pub prior: &'a DirichletPrior,
    pub mode: &'a EmissionMode,
    pub initial: &'a [f64],
}

impl<'a> Problem<'a> {
    pub fn new(obs: &'a [f64], prior: &'a DirichletPrior, mode: &'a EmissionMode, initial: &'a [f64]) -> Result<Self> {
        check_model(prior, mode, initial)?;
        if obs.is_empty() {
            return Err(Error::Domain("no observations".into()));
        }
        if let Some(x) = obs.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        Ok(Self { obs, prior, mode, initial })
    }

    pub fn num_states(&self) -> usize {
        self.prior.num_states()
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn log_joint(&self, path: &[usize]) -> Result<f64> {
        log_joint(path, self.obs, self.prior, self.mode, self.initial)
    }

    fn check_path(&self, path: &[usize]) -> Result<()> {
        if path.len() != self.len() {
            return Err(Error::LengthMismatch(path.len(), self.len()));
        }
        if let Some(s) = path.iter().find(|&&s| s >= self.num_states()) {
            return Err(Error::Domain(format!("state {s} out of range")));
        }
        Ok(())
    }

    /// Errors unless every positive `alpha_lj` exceeds 1.
    fn require_alpha_above_one(&self, err: impl Fn(usize, usize, f64) -> Error) -> Result<()> {
        let alpha = self.prior.alpha();
        for ((l, j), &a) in alpha.indexed_iter() {
            if a > 0.0 && a <= 1.0 {
                return Err(err(l + 1, j + 1, a));
            }
        }
        Ok(())
    }
}

/// Inverse temperatures for annealing, each visited `samples_per_beta` times.
#[derive(Debug, Clone, PartialEq)]
pub struct SaSchedule {
    pub betas: Vec<f64>,
    pub samples_per_beta: usize,
}

impl SaSchedule {
    /// `steps` inverse temperatures equally spaced in `[lo, hi]`.
    pub fn equally_spaced(lo: f64, hi: f64, steps: usize, samples_per_beta: usize) -> Result<Self> {
        let betas = match steps {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
        };
        let s = Self { betas, samples_per_beta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.samples_per_beta == 0 {
            return Err(Error::Config("annealing schedule is empty".into()));
        }
        if !(self.betas[0] >= 1.0) || self.betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config(format!("first inverse temperature must be >= 1, got {}", self.betas[0])));
        }
        if self.betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("inverse temperatures must be nondecreasing".into()));
        }
        Ok(())
    }
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self::equally_spaced(1.0, 10.2, 47, 15).expect("default schedule is valid")
    }
}

/// Iteration limits, tolerances and the annealing schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub sa_schedule: SaSchedule,
    pub seed: u64,
    /// Score the decoded path after every iteration of the parameter-based
    /// methods. Costs one Viterbi run per iteration.
    pub record_path_scores: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-8, sa_schedule: SaSchedule::default(), seed: 0, record_path_scores: true }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        self.sa_schedule.validate()
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Per-iteration value of what the method monitors: `ln p(x, y)` of the
    /// current path for sEM, sMM and ICM (per accepted site update), the
    /// running best for SA, the log posterior (or log-likelihood) of theta
    /// for B-EM, and max |delta gamma| for VB.
    pub objective: Vec<f64>,
    /// `ln p(x, y)` of the path held after each iteration, when recorded.
    pub path_scores: Vec<f64>,
    /// `ln p(x, y)` of the initial path; negative infinity when infeasible.
    pub init_score: f64,
    pub iterations: usize,
    pub converged: bool,
    pub path: StatePath,
    pub final_score: f64,
}

/// The seven estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    SegEm,
    SegMm,
    BayesEm,
    StandardEm,
    Vb,
    Icm,
    Sa,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::SegEm, Method::SegMm, Method::BayesEm, Method::StandardEm, Method::Vb, Method::Icm, Method::Sa];

    pub fn name(self) -> &'static str {
        match self {
            Method::SegEm => "sEM",
            Method::SegMm => "sMM",
            Method::BayesEm => "B-EM",
            Method::StandardEm => "EM",
            Method::Vb => "VB",
            Method::Icm => "ICM",
            Method::Sa => "SA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Runs `method` from `init`. Parameter-based methods start from the
/// indicator memberships of `init`.
pub fn run_method(method: Method, problem: &Problem<'_>, init: &[usize], cfg: &SegmenterConfig) -> Result<RunTrace> {
    match method {
        Method::SegEm => seg_em(problem, init, cfg),
        Method::SegMm => seg_mm(problem, init, cfg),
        Method::BayesEm => Ok(bayes_em(problem, BemInit::Path(init), cfg, false)?.trace),
        Method::StandardEm => Ok(bayes_em(problem, BemInit::Path(init), cfg, true)?.trace),
        Method::Vb => variational_bayes(problem, init, cfg),
        Method::Icm => icm(problem, init, cfg),
        Method::Sa => simulated_annealing(problem, init, cfg),
    }
}

/// Index of the best score, ties toward the lexicographically smallest path.
fn best_of(candidates: &[(StatePath, f64)]) -> usize {
    let mut best = 0;
    for (i, (p, s)) in candidates.iter().enumerate().skip(1) {
        let (bp, bs) = &candidates[best];
        if *s > *bs || (*s == *bs && p < bp) {
            best = i;
        }
    }
    best
}
