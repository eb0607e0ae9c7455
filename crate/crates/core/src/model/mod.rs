//! Priors, sufficient statistics and the exact Bayesian scores of a path.
//!
//! Transition rows carry independent Dirichlet priors with parameters
//! `alpha_lj = M q_lj`; a zero `q_lj` is a structural zero that no feasible
//! path may use. Emissions are either fixed Normals or unknown Normals with
//! a shared Normal-Inverse-chi-square prior. The initial distribution is
//! always known.

mod marginal;
mod stats;
mod tempered;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::hmm::{check_stochastic, NormalEmission};

pub use marginal::{
    expected_log_emission, log_emission_marginal, log_joint, log_joint_from_stats, log_path_prior, nix_posterior,
    nix_posterior_weighted, posterior_modes, NixPosterior,
};
pub(crate) use marginal::{expected_log_trans, row_log_prior, state_log_marginal};
pub use stats::{path_stats, PathStats};
pub use tempered::{log_tempered_joint, tempered_dirichlet, tempered_theta_sample};

/// Dirichlet prior on the transition rows, `alpha = M Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPrior {
    precision: f64,
    base: Array2<f64>,
    alpha: Array2<f64>,
}

impl DirichletPrior {
    pub fn new(precision: f64, base: Array2<f64>) -> Result<Self> {
        if !(precision > 0.0 && precision.is_finite()) {
            return Err(Error::Domain(format!("Dirichlet precision must be positive, got {precision}")));
        }
        let (rows, cols) = base.dim();
        if rows == 0 || rows != cols {
            return Err(Error::Domain(format!("Q must be square and non-empty, got {rows}x{cols}")));
        }
        for (l, row) in base.axis_iter(Axis(0)).enumerate() {
            check_stochastic(&format!("Q row {}", l + 1), row)?;
        }
        let alpha = base.mapv(|q| precision * q);
        Ok(Self { precision, base, alpha })
    }

    /// Every `alpha_lj` equal to `alpha`.
    pub fn symmetric(num_states: usize, alpha: f64) -> Result<Self> {
        let k = num_states as f64;
        Self::new(alpha * k, Array2::from_elem((num_states, num_states), 1.0 / k))
    }

    pub fn num_states(&self) -> usize {
        self.base.nrows()
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn base(&self) -> &Array2<f64> {
        &self.base
    }

    pub fn alpha(&self) -> &Array2<f64> {
        &self.alpha
    }

    /// alpha_l = sum_j alpha_lj
    pub fn row_alpha(&self, l: usize) -> f64 {
        self.alpha.row(l).sum()
    }

    /// Number of non-structural-zero entries in row `l`.
    pub fn row_support(&self, l: usize) -> usize {
        self.alpha.row(l).iter().filter(|&&a| a > 0.0).count()
    }

    /// ln of the Dirichlet density of `row` under row `l` of the prior.
    /// Zero entries of the prior are skipped.
    pub fn log_density_row(&self, l: usize, row: ArrayView1<'_, f64>) -> f64 {
        let a = self.alpha.row(l);
        let mut s = -crate::numeric::log_multi_beta(a.iter().copied());
        for (&aj, &p) in a.iter().zip(row) {
            if aj > 0.0 && aj != 1.0 {
                s += (aj - 1.0) * p.ln();
            }
        }
        s
    }
}

/// Normal-Inverse-chi-square prior shared by all states except for the
/// location `xi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NixPrior {
    pub xi: Vec<f64>,
    pub kappa0: f64,
    pub nu0: f64,
    pub tau0_sq: f64,
}

impl NixPrior {
    pub fn new(xi: Vec<f64>, kappa0: f64, nu0: f64, tau0_sq: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if xi.is_empty() || xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("NIX location vector invalid: {xi:?}")));
        }
        if !(ok(kappa0) && ok(nu0) && ok(tau0_sq)) {
            return Err(Error::Domain(format!(
                "NIX hyperparameters must be positive: kappa0={kappa0}, nu0={nu0}, tau0^2={tau0_sq}"
            )));
        }
        Ok(Self { xi, kappa0, nu0, tau0_sq })
    }

    pub fn num_states(&self) -> usize {
        self.xi.len()
    }

    /// ln N(mean; xi_k, var / kappa0) + ln Inv-chi2(var; nu0, tau0^2).
    pub fn log_density(&self, k: usize, mean: f64, var: f64) -> f64 {
        let normal = NormalEmission { mean: self.xi[k], var: var / self.kappa0 }.log_density(mean);
        normal + log_inv_chi_sq_density(var, self.nu0, self.tau0_sq)
    }
}

pub(crate) fn log_inv_chi_sq_density(var: f64, nu: f64, tau_sq: f64) -> f64 {
    let half = 0.5 * nu;
    half * (half * tau_sq).ln() - crate::numeric::log_gamma_unchecked(half) - (half + 1.0) * var.ln()
        - nu * tau_sq / (2.0 * var)
}

/// How the emission distributions enter the model.
#[derive(Debug, Clone, PartialEq)]
pub enum EmissionMode {
    /// Known emission parameters.
    Fixed(Vec<NormalEmission>),
    /// Unknown parameters with a NIX prior.
    NixBayes(NixPrior),
}

impl EmissionMode {
    pub fn num_states(&self) -> usize {
        match self {
            EmissionMode::Fixed(e) => e.len(),
            EmissionMode::NixBayes(p) => p.num_states(),
        }
    }
}

/// Checks that prior, emission mode and initial distribution agree on K.
pub(crate) fn check_model(prior: &DirichletPrior, mode: &EmissionMode, initial: &[f64]) -> Result<usize> {
    let k = prior.num_states();
    if mode.num_states() != k || initial.len() != k {
        return Err(Error::Domain(format!(
            "state counts disagree: prior {k}, emissions {}, initial {}",
            mode.num_states(),
            initial.len()
        )));
    }
    check_stochastic("initial distribution", ArrayView1::from(initial))?;
    if let EmissionMode::Fixed(e) = mode {
        if let Some(bad) = e.iter().find(|e| !(e.var > 0.0) || !e.mean.is_finite()) {
            return Err(Error::Domain(format!("invalid emission {bad:?}")));
        }
    }
    Ok(k)
}
