//! Tempered marginals for annealing.
//!
//! Raising `p(x, y | theta) pi(theta)` to the power `beta` keeps both
//! conjugate families closed. For a transition row the tempered Dirichlet
//! has parameters `beta (alpha + n) + 1 - beta`. For a NIX state with
//! posterior `(kappa, nu, mu, V = nu tau^2)` the tempered family is
//! `kappa_b = beta kappa`, `nu_b = beta (nu + 3) - 3`, `nu_b tau_b^2 = beta V`.

use std::f64::consts::PI;

use ndarray::Array2;

use super::marginal::{log_emission_marginal, log_joint_from_stats, nix_posterior};
use super::{check_model, DirichletPrior, EmissionMode, PathStats};
use crate::error::{Error, Result};
use crate::hmm::{HmmParams, NormalEmission};
use crate::numeric::{log_gamma_unchecked, log_multi_beta};
use crate::rng::Rng;

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("inverse temperature must be finite and >= 1, got {beta}")))
    }
}

/// Tempered Dirichlet parameters `beta (alpha + n) + 1 - beta`; structural
/// zeros stay zero.
pub fn tempered_dirichlet(beta: f64, stats: &PathStats, prior: &DirichletPrior) -> Result<Array2<f64>> {
    check_beta(beta)?;
    let alpha = prior.alpha();
    let k = prior.num_states();
    let mut out = Array2::zeros((k, k));
    for l in 0..k {
        for j in 0..k {
            let a = alpha[[l, j]];
            let n = stats.counts[[l, j]] as f64;
            if a == 0.0 {
                if n > 0.0 {
                    return Err(Error::InfeasiblePath(format!(
                        "transition {} -> {} has prior weight 0",
                        l + 1,
                        j + 1
                    )));
                }
                continue;
            }
            let v = if beta == 1.0 { a + n } else { beta * (a + n) + 1.0 - beta };
            if !(v > 0.0) {
                return Err(Error::InfeasibleTemperature {
                    beta,
                    detail: format!("Dirichlet parameter for {} -> {} is {v}", l + 1, j + 1),
                });
            }
            out[[l, j]] = v;
        }
    }
    Ok(out)
}

/// ln of the integral of `(p(x, y | theta) pi(theta))^beta` over theta.
/// Equals [`log_joint_from_stats`] at `beta = 1`.
pub fn log_tempered_joint(
    beta: f64,
    stats: &PathStats,
    prior: &DirichletPrior,
    mode: &EmissionMode,
    initial: &[f64],
) -> Result<f64> {
    check_beta(beta)?;
    check_model(prior, mode, initial)?;
    if beta == 1.0 {
        return log_joint_from_stats(stats, prior, mode, initial);
    }
    let p0 = initial[stats.first_state];
    if !(p0 > 0.0) {
        return Err(Error::InfeasiblePath(format!("initial probability of state {} is 0", stats.first_state + 1)));
    }
    let a = tempered_dirichlet(beta, stats, prior)?;
    let mut s = beta * p0.ln();
    for l in 0..prior.num_states() {
        s += log_multi_beta(a.row(l).iter().copied()) - beta * log_multi_beta(prior.alpha().row(l).iter().copied());
    }
    s += match mode {
        EmissionMode::Fixed(_) => beta * log_emission_marginal(stats, mode),
        EmissionMode::NixBayes(nix) => {
            let post = nix_posterior(stats, nix);
            let half_nu0 = 0.5 * nix.nu0;
            let log_c = half_nu0 * (half_nu0 * nix.tau0_sq).ln() - log_gamma_unchecked(half_nu0);
            let ln_2pi = (2.0 * PI).ln();
            (0..stats.num_states())
                .map(|k| {
                    let m = stats.occupancy[k] as f64;
                    let shape = 0.5 * (beta * (post.nu[k] + 3.0) - 3.0);
                    -0.5 * beta * m * ln_2pi - 0.5 * beta * (ln_2pi - nix.kappa0.ln()) + beta * log_c + 0.5 * ln_2pi
                        - 0.5 * (beta * post.kappa[k]).ln()
                        + log_gamma_unchecked(shape)
                        - shape * (0.5 * beta * post.nu_tau_sq[k]).ln()
                })
                .sum()
        }
    };
    Ok(s)
}

/// One draw of theta from the tempered posterior given the path statistics.
pub fn tempered_theta_sample(
    beta: f64,
    stats: &PathStats,
    prior: &DirichletPrior,
    mode: &EmissionMode,
    initial: &[f64],
    rng: &mut Rng,
) -> Result<HmmParams> {
    let k = check_model(prior, mode, initial)?;
    let a = tempered_dirichlet(beta, stats, prior)?;
    let mut trans = Array2::zeros((k, k));
    for l in 0..k {
        let row = rng.dirichlet_with_zeros(&a.row(l).to_vec())?;
        trans.row_mut(l).assign(&ndarray::Array1::from(row));
    }
    let emit = match mode {
        EmissionMode::Fixed(e) => e.clone(),
        EmissionMode::NixBayes(nix) => {
            let post = nix_posterior(stats, nix);
            (0..k)
                .map(|s| {
                    let nu_b = beta * (post.nu[s] + 3.0) - 3.0;
                    let var = rng.scaled_inv_chi_sq(nu_b, beta * post.nu_tau_sq[s] / nu_b)?;
                    let mean = rng.normal(post.mean[s], var / (beta * post.kappa[s]))?;
                    Ok(NormalEmission { mean, var })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    HmmParams::new(initial.to_vec(), trans, emit)
}
