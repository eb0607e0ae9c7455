//! Experiment configuration, read from TOML. Every seed must be given
//! explicitly; nothing is drawn from ambient entropy.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{HmmParams, NormalEmission};
use crate::model::{DirichletPrior, EmissionMode, NixPrior};
use crate::segment::{Method, SaSchedule, SegmenterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Number of independently simulated datasets.
    pub replications: usize,
    pub methods: Vec<String>,
    pub seeds: Seeds,
    pub truth: TruthSpec,
    pub grid: Vec<GridEntry>,
    pub emission: EmissionSpec,
    pub init: InitSpec,
    pub sa: SaSpec,
    #[serde(default)]
    pub segmenter: SegmenterSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub sa: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub initial: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// One base matrix and the precisions it is paired with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    /// `Q1` (uniform), `Q2` (the true transition matrix), `Q3` (0.4 on the
    /// diagonal, the rest spread evenly) or any other label together with
    /// an explicit `matrix`.
    pub q: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    pub precisions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmissionSpec {
    /// Emissions known and equal to the truth.
    Fixed,
    Nix { xi: Vec<f64>, kappa0: f64, nu0: f64, tau0_sq: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    /// Symmetric Dirichlet parameters for the random transition matrices.
    pub dirichlet_alphas: Vec<f64>,
    /// Markov realizations per transition matrix.
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaSpec {
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
    pub samples_per_beta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmenterSpec {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SegmenterSpec {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-8 }
    }
}

/// Upper bound on the number of inverse temperatures in a schedule.
pub const MAX_SA_STEPS: usize = 1_000_000;

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Config(format!("{what} must be a non-empty square matrix")));
    }
    Array2::from_shape_vec((k, k), rows.concat()).map_err(|e| Error::Config(format!("{what}: {e}")))
}

/// Off-diagonal mass spread evenly, `diag` on the diagonal.
pub fn diagonal_matrix(k: usize, diag: f64) -> Array2<f64> {
    let off = if k > 1 { (1.0 - diag) / (k - 1) as f64 } else { 0.0 };
    Array2::from_shape_fn((k, k), |(i, j)| if k == 1 { 1.0 } else if i == j { diag } else { off })
}

impl ExperimentConfig {
    /// Four-state Gaussian HMM with known emissions.
    pub fn example_fixed() -> Self {
        let k = 4;
        let trans = diagonal_matrix(k, 0.6);
        Self {
            n: 600,
            replications: 5,
            methods: ["sEM", "sMM", "B-EM", "EM", "VB", "ICM", "SA"].map(String::from).to_vec(),
            seeds: Seeds { data: 20_240_601, init: 7, sa: 11 },
            truth: TruthSpec {
                initial: vec![0.25; k],
                trans: trans.outer_iter().map(|r| r.to_vec()).collect(),
                means: vec![-0.7, 0.0, 0.7, 1.4],
                variances: vec![0.25; k],
            },
            grid: ["Q1", "Q2", "Q3"]
                .map(|q| GridEntry { q: q.into(), matrix: None, precisions: vec![600.0, 150.0, 50.0, 10.0, 5.0] })
                .to_vec(),
            emission: EmissionSpec::Fixed,
            init: InitSpec {
                dirichlet_alphas: vec![0.3, 0.5, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.5, 1.7, 1.9],
                realizations: 3,
            },
            sa: SaSpec { beta_min: 1.0, beta_max: 10.2, steps: 47, samples_per_beta: 15 },
            segmenter: SegmenterSpec::default(),
        }
    }

    /// Same data model, emissions unknown under a NIX prior.
    pub fn example_nix() -> Self {
        Self {
            emission: EmissionSpec::Nix { xi: vec![-0.7, 0.0, 0.7, 1.4], kappa0: 10.0, nu0: 50.0, tau0_sq: 0.25 },
            sa: SaSpec { beta_min: 1.0, beta_max: 21.0, steps: 47, samples_per_beta: 15 },
            ..Self::example_fixed()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replications == 0 {
            return Err(Error::Config("n and replications must be positive".into()));
        }
        if self.grid.is_empty() || self.grid.iter().any(|g| g.precisions.is_empty()) {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods".into()));
        }
        self.methods()?;
        let truth = self.truth_params()?;
        let k = truth.num_states();
        for g in &self.grid {
            let q = self.base_matrix(g)?;
            for &m in &g.precisions {
                DirichletPrior::new(m, q.clone()).map_err(|e| Error::Config(format!("{} M={m}: {e}", g.q)))?;
            }
        }
        if self.emission_mode()?.num_states() != k {
            return Err(Error::Config("emission prior size differs from the number of states".into()));
        }
        if self.init.realizations == 0 {
            return Err(Error::Config("init.realizations must be positive".into()));
        }
        if self.init.dirichlet_alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Config("init.dirichlet_alphas must be positive".into()));
        }
        if self.sa.steps > MAX_SA_STEPS {
            return Err(Error::Config(format!("sa.steps exceeds {MAX_SA_STEPS}")));
        }
        self.segmenter_config(0)?.validate()
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn num_states(&self) -> usize {
        self.truth.initial.len()
    }

    pub fn truth_params(&self) -> Result<HmmParams> {
        let t = &self.truth;
        if t.means.len() != t.initial.len() || t.variances.len() != t.initial.len() {
            return Err(Error::Config("truth means/variances must have one entry per state".into()));
        }
        let emit = t.means.iter().zip(&t.variances).map(|(&mean, &var)| NormalEmission { mean, var }).collect();
        HmmParams::new(t.initial.clone(), matrix(&t.trans, "truth.trans")?, emit)
            .map_err(|e| Error::Config(format!("truth: {e}")))
    }

    /// Resolves a grid entry's base matrix.
    pub fn base_matrix(&self, g: &GridEntry) -> Result<Array2<f64>> {
        let k = self.num_states();
        let q = match (g.q.as_str(), &g.matrix) {
            (_, Some(rows)) => matrix(rows, &g.q)?,
            ("Q1", None) => Array2::from_elem((k, k), 1.0 / k as f64),
            ("Q2", None) => matrix(&self.truth.trans, "truth.trans")?,
            ("Q3", None) => diagonal_matrix(k, 0.4),
            (other, None) => return Err(Error::Config(format!("base matrix {other:?} needs an explicit matrix"))),
        };
        if q.dim() != (k, k) {
            return Err(Error::Config(format!("{} is not {k} x {k}", g.q)));
        }
        Ok(q)
    }

    pub fn emission_mode(&self) -> Result<EmissionMode> {
        Ok(match &self.emission {
            EmissionSpec::Fixed => EmissionMode::Fixed(self.truth_params()?.emit),
            EmissionSpec::Nix { xi, kappa0, nu0, tau0_sq } => EmissionMode::NixBayes(
                NixPrior::new(xi.clone(), *kappa0, *nu0, *tau0_sq).map_err(|e| Error::Config(format!("nix: {e}")))?,
            ),
        })
    }

    pub fn segmenter_config(&self, seed: u64) -> Result<SegmenterConfig> {
        let sa = &self.sa;
        Ok(SegmenterConfig {
            max_iters: self.segmenter.max_iters,
            tol: self.segmenter.tol,
            sa_schedule: SaSchedule::equally_spaced(sa.beta_min, sa.beta_max, sa.steps, sa.samples_per_beta)?,
            seed,
            record_path_scores: false,
        })
    }
}
