use std::f64::consts::PI;

use ndarray::Array2;
#[cfg(test)]
use ndarray::ArrayView1;

use super::{check_model, DirichletPrior, EmissionMode, NixPrior, PathStats};
use crate::error::{Error, Result};
use crate::hmm::{HmmParams, NormalEmission};
use crate::numeric::{digamma_unchecked, log_gamma_unchecked};

/// Conjugate NIX posterior per state.
#[derive(Debug, Clone, PartialEq)]
pub struct NixPosterior {
    pub kappa: Vec<f64>,
    pub nu: Vec<f64>,
    pub mean: Vec<f64>,
    /// nu_k tau_k^2
    pub nu_tau_sq: Vec<f64>,
}

impl NixPosterior {
    pub fn tau_sq(&self, k: usize) -> f64 {
        self.nu_tau_sq[k] / self.nu[k]
    }

    fn with_capacity(k: usize) -> Self {
        Self {
            kappa: Vec::with_capacity(k),
            nu: Vec::with_capacity(k),
            mean: Vec::with_capacity(k),
            nu_tau_sq: Vec::with_capacity(k),
        }
    }

    /// Appends the update of state `k` from weight `m`, weighted sum and
    /// weighted scatter about the weighted mean.
    fn push(&mut self, prior: &NixPrior, k: usize, m: f64, sum: f64, scatter: f64) {
        let xi = prior.xi[k];
        let kappa = prior.kappa0 + m;
        let mut ntau = prior.nu0 * prior.tau0_sq;
        if m > 0.0 {
            let d = sum / m - xi;
            ntau += scatter + prior.kappa0 * m / kappa * d * d;
        }
        self.kappa.push(kappa);
        self.nu.push(prior.nu0 + m);
        self.mean.push((prior.kappa0 * xi + sum) / kappa);
        self.nu_tau_sq.push(ntau);
    }
}

pub fn nix_posterior(stats: &PathStats, prior: &NixPrior) -> NixPosterior {
    let k = stats.num_states();
    let mut post = NixPosterior::with_capacity(k);
    for s in 0..k {
        post.push(prior, s, stats.occupancy[s] as f64, stats.sum[s], stats.scatter(s));
    }
    post
}

/// NIX update with fractional memberships `gamma` (`n x K`).
pub fn nix_posterior_weighted(gamma: &Array2<f64>, obs: &[f64], prior: &NixPrior) -> NixPosterior {
    let k = gamma.ncols();
    let mut post = NixPosterior::with_capacity(k);
    for s in 0..k {
        let w = gamma.column(s);
        let g: f64 = w.sum();
        let sum: f64 = w.iter().zip(obs).map(|(w, x)| w * x).sum();
        let scatter = if g > 0.0 {
            let mean = sum / g;
            w.iter().zip(obs).map(|(w, x)| w * (x - mean) * (x - mean)).sum()
        } else {
            0.0
        };
        post.push(prior, s, g, sum, scatter);
    }
    post
}

/// E ln N(x; mu, sigma^2) under the NIX posterior of state `k`.
pub fn expected_log_emission(post: &NixPosterior, k: usize, x: f64) -> f64 {
    let tau_sq = post.tau_sq(k);
    let half_nu = 0.5 * post.nu[k];
    let d = x - post.mean[k];
    -0.5 * (2.0 * PI * tau_sq).ln() - 0.5 * (half_nu.ln() - digamma_unchecked(half_nu))
        - d * d / (2.0 * tau_sq)
        - 0.5 / post.kappa[k]
}

/// psi(alpha_lj + c_lj) - psi(alpha_l + c_l); negative infinity on
/// structural zeros. `counts` may be fractional.
pub(crate) fn expected_log_trans(prior: &DirichletPrior, counts: &Array2<f64>) -> Array2<f64> {
    let alpha = prior.alpha();
    let k = prior.num_states();
    let mut out = Array2::from_elem((k, k), f64::NEG_INFINITY);
    for l in 0..k {
        let total: f64 = (0..k).filter(|&j| alpha[[l, j]] > 0.0).map(|j| alpha[[l, j]] + counts[[l, j]]).sum();
        let norm = digamma_unchecked(total);
        for j in 0..k {
            if alpha[[l, j]] > 0.0 {
                out[[l, j]] = digamma_unchecked(alpha[[l, j]] + counts[[l, j]]) - norm;
            }
        }
    }
    out
}

/// Dirichlet-multinomial term of transition row `l`; negative infinity if
/// the row uses a structural zero.
pub(crate) fn row_log_prior(stats: &PathStats, prior: &DirichletPrior, l: usize) -> f64 {
    let n_l = stats.row_totals[l];
    if n_l == 0 {
        return 0.0;
    }
    let alpha = prior.alpha();
    let a_l = prior.row_alpha(l);
    let mut s = log_gamma_unchecked(a_l) - log_gamma_unchecked(a_l + n_l as f64);
    for j in 0..prior.num_states() {
        let n = stats.counts[[l, j]];
        if n == 0 {
            continue;
        }
        let a = alpha[[l, j]];
        if a == 0.0 {
            return f64::NEG_INFINITY;
        }
        s += log_gamma_unchecked(a + n as f64) - log_gamma_unchecked(a);
    }
    s
}

/// ln p(y): initial probability times the Dirichlet-multinomial marginal of
/// the transition counts.
pub fn log_path_prior(stats: &PathStats, prior: &DirichletPrior, initial: &[f64]) -> Result<f64> {
    let p0 = initial[stats.first_state];
    if !(p0 > 0.0) {
        return Err(Error::InfeasiblePath(format!("initial probability of state {} is 0", stats.first_state + 1)));
    }
    let mut s = p0.ln();
    for l in 0..prior.num_states() {
        let r = row_log_prior(stats, prior, l);
        if r == f64::NEG_INFINITY {
            let j = (0..prior.num_states()).find(|&j| stats.counts[[l, j]] > 0 && prior.alpha()[[l, j]] == 0.0);
            return Err(Error::InfeasiblePath(format!(
                "transition {} -> {} has prior weight 0",
                l + 1,
                j.map_or(0, |j| j + 1)
            )));
        }
        s += r;
    }
    Ok(s)
}

/// Emission contribution of state `k` to [`log_emission_marginal`].
pub(crate) fn state_log_marginal(stats: &PathStats, mode: &EmissionMode, k: usize) -> f64 {
    let m_k = stats.occupancy[k];
    if m_k == 0 {
        return 0.0;
    }
    let m = m_k as f64;
    match mode {
        EmissionMode::Fixed(emit) => {
            let e = emit[k];
            let d = stats.sum[k] / m - e.mean;
            -0.5 * m * (2.0 * PI * e.var).ln() - (stats.scatter(k) + m * d * d) / (2.0 * e.var)
        }
        EmissionMode::NixBayes(prior) => {
            let mut post = NixPosterior::with_capacity(1);
            post.push(prior, k, m, stats.sum[k], stats.scatter(k));
            let half_nu0 = 0.5 * prior.nu0;
            let half_nu = 0.5 * post.nu[0];
            log_gamma_unchecked(half_nu) - log_gamma_unchecked(half_nu0) + 0.5 * (prior.kappa0 / post.kappa[0]).ln()
                + half_nu0 * (prior.nu0 * prior.tau0_sq).ln()
                - half_nu * post.nu_tau_sq[0].ln()
                - 0.5 * m * PI.ln()
        }
    }
}

/// Sum of ln f_{y_t}(x_t) for fixed emissions, or the NIX marginal
/// likelihood of each state's subsample.
pub fn log_emission_marginal(stats: &PathStats, mode: &EmissionMode) -> f64 {
    (0..stats.num_states()).map(|k| state_log_marginal(stats, mode, k)).sum()
}

/// ln p(x, y) from precomputed statistics.
pub fn log_joint_from_stats(
    stats: &PathStats,
    prior: &DirichletPrior,
    mode: &EmissionMode,
    initial: &[f64],
) -> Result<f64> {
    Ok(log_path_prior(stats, prior, initial)? + log_emission_marginal(stats, mode))
}

/// ln p(x, y), the score every method is judged by.
pub fn log_joint(
    path: &[usize],
    obs: &[f64],
    prior: &DirichletPrior,
    mode: &EmissionMode,
    initial: &[f64],
) -> Result<f64> {
    let k = check_model(prior, mode, initial)?;
    let stats = super::path_stats(path, obs, k)?;
    log_joint_from_stats(&stats, prior, mode, initial)
}

/// Posterior modes of the transition rows and emission parameters given
/// a path.
pub fn posterior_modes(
    stats: &PathStats,
    prior: &DirichletPrior,
    mode: &EmissionMode,
    initial: &[f64],
) -> Result<HmmParams> {
    let k = check_model(prior, mode, initial)?;
    let alpha = prior.alpha();
    let mut trans = Array2::zeros((k, k));
    for l in 0..k {
        for j in 0..k {
            let a = alpha[[l, j]];
            if a > 0.0 {
                let v = a + stats.counts[[l, j]] as f64;
                if v <= 1.0 {
                    return Err(Error::ModeInfeasible { from: l + 1, to: j + 1, value: v });
                }
                trans[[l, j]] = v - 1.0;
            }
        }
        let total: f64 = trans.row(l).sum();
        trans.row_mut(l).mapv_inplace(|v| v / total);
    }
    let emit = match mode {
        EmissionMode::Fixed(e) => e.clone(),
        EmissionMode::NixBayes(p) => {
            let post = nix_posterior(stats, p);
            (0..k)
                .map(|s| NormalEmission { mean: post.mean[s], var: post.nu_tau_sq[s] / (post.nu[s] + 2.0) })
                .collect()
        }
    };
    HmmParams::new(initial.to_vec(), trans, emit)
}

/// sum_j (alpha_lj + n_lj - 1) ln p_lj, the unnormalized log posterior of
/// one transition row.
#[cfg(test)]
fn row_log_posterior(prior: &DirichletPrior, stats: &PathStats, l: usize, row: ArrayView1<'_, f64>) -> f64 {
    (0..prior.num_states())
        .filter(|&j| prior.alpha()[[l, j]] > 0.0)
        .map(|j| (prior.alpha()[[l, j]] + stats.counts[[l, j]] as f64 - 1.0) * row[j].ln())
        .sum()
}
