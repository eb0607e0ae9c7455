use ndarray::{Array1, Array2};

use super::{Problem, RunTrace, SegmenterConfig};
use crate::error::{Error, Result};
use crate::hmm::{forward_backward, viterbi, HmmParams, NormalEmission, StatePath};
use crate::model::{path_stats, EmissionMode};

/// Starting point for [`bayes_em`].
#[derive(Debug, Clone)]
pub enum BemInit<'a> {
    /// Indicator memberships of a path.
    Path(&'a [usize]),
    Params(HmmParams),
}

#[derive(Debug, Clone)]
pub struct BemOutput {
    pub params: HmmParams,
    pub trace: RunTrace,
}

/// Smallest variance the unregularized update may return.
const VAR_FLOOR: f64 = 1e-6;

/// EM for the posterior mode of theta (or its MLE with `flat_prior`),
/// followed by one Viterbi decode. The monitored score is the log
/// evidence plus, unless flat, the log prior density of theta; it never
/// decreases.
pub fn bayes_em(problem: &Problem<'_>, init: BemInit<'_>, cfg: &SegmenterConfig, flat_prior: bool) -> Result<BemOutput> {
    cfg.validate()?;
    if !flat_prior {
        problem.require_alpha_above_one(|from, to, alpha| Error::UpdateInfeasible { from, to, alpha })?;
    }
    let k = problem.num_states();
    let (mut theta, init_score) = match init {
        BemInit::Path(path) => {
            problem.check_path(path)?;
            let stats = path_stats(path, problem.obs, k)?;
            let mut gamma = Array2::zeros((problem.len(), k));
            for (t, &y) in path.iter().enumerate() {
                gamma[[t, y]] = 1.0;
            }
            let theta = m_step(problem, &gamma, &stats.counts_f64(), None, flat_prior)?;
            (theta, problem.log_joint(path).unwrap_or(f64::NEG_INFINITY))
        }
        BemInit::Params(p) => {
            if p.num_states() != k {
                return Err(Error::Domain(format!("initial parameters have {} states, model has {k}", p.num_states())));
            }
            (p, f64::NEG_INFINITY)
        }
    };
    let mut objective = Vec::new();
    let mut path_scores = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let pseudo = theta.pseudo(problem.obs)?;
        let post = forward_backward(&pseudo)?;
        let score = post.log_evidence + if flat_prior { 0.0 } else { log_prior_density(problem, &theta) };
        if cfg.record_path_scores {
            path_scores.push(problem.log_joint(&viterbi(&pseudo)?)?);
        }
        let prev = objective.last().copied();
        objective.push(score);
        if prev.is_some_and(|p: f64| (score - p).abs() < cfg.tol) {
            converged = true;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }
        theta = m_step(problem, &post.gamma, &post.xi, Some(&theta), flat_prior)?;
    }
    let path: StatePath = viterbi(&theta.pseudo(problem.obs)?)?;
    let final_score = problem.log_joint(&path)?;
    Ok(BemOutput {
        params: theta,
        trace: RunTrace { objective, path_scores, init_score, iterations, converged, path, final_score },
    })
}

/// ln pi(theta): Dirichlet densities of the rows plus NIX densities of the
/// emission parameters.
pub(crate) fn log_prior_density(problem: &Problem<'_>, theta: &HmmParams) -> f64 {
    let mut s: f64 = (0..problem.num_states()).map(|l| problem.prior.log_density_row(l, theta.trans.row(l))).sum();
    if let EmissionMode::NixBayes(nix) = problem.mode {
        s += theta.emit.iter().enumerate().map(|(k, e)| nix.log_density(k, e.mean, e.var)).sum::<f64>();
    }
    s
}

/// Maximizes the expected complete-data log posterior given memberships
/// `gamma` (`n x K`) and summed pair marginals `xi`.
pub(crate) fn m_step(
    problem: &Problem<'_>,
    gamma: &Array2<f64>,
    xi: &Array2<f64>,
    prev: Option<&HmmParams>,
    flat_prior: bool,
) -> Result<HmmParams> {
    let k = problem.num_states();
    let alpha = problem.prior.alpha();
    let mut trans = Array2::zeros((k, k));
    for l in 0..k {
        let support: Vec<usize> = (0..k).filter(|&j| alpha[[l, j]] > 0.0).collect();
        let mut row = Array1::<f64>::zeros(k);
        for &j in &support {
            row[j] = if flat_prior { xi[[l, j]] } else { xi[[l, j]] + alpha[[l, j]] - 1.0 };
        }
        let total = row.sum();
        if total > 0.0 {
            row.mapv_inplace(|v| v / total);
        } else {
            for &j in &support {
                row[j] = 1.0 / support.len() as f64;
            }
        }
        trans.row_mut(l).assign(&row);
    }
    let emit = match problem.mode {
        EmissionMode::Fixed(e) => e.clone(),
        EmissionMode::NixBayes(nix) => {
            let obs = problem.obs;
            (0..k)
                .map(|s| {
                    let w = gamma.column(s);
                    let g: f64 = w.sum();
                    let sx: f64 = w.iter().zip(obs).map(|(w, x)| w * x).sum();
                    if flat_prior {
                        if g > 1e-10 {
                            let mean = sx / g;
                            let ss: f64 = w.iter().zip(obs).map(|(w, x)| w * (x - mean) * (x - mean)).sum();
                            NormalEmission { mean, var: (ss / g).max(VAR_FLOOR) }
                        } else if let Some(p) = prev {
                            p.emit[s]
                        } else {
                            overall_moments(obs)
                        }
                    } else {
                        let xi_k = nix.xi[s];
                        let mean = (sx + xi_k * nix.kappa0) / (g + nix.kappa0);
                        let ss: f64 = w.iter().zip(obs).map(|(w, x)| w * (x - mean) * (x - mean)).sum();
                        let var = (nix.nu0 * nix.tau0_sq + ss + nix.kappa0 * (mean - xi_k).powi(2)) / (g + nix.nu0 + 3.0);
                        NormalEmission { mean, var }
                    }
                })
                .collect()
        }
    };
    HmmParams::new(problem.initial.to_vec(), trans, emit)
}

fn overall_moments(obs: &[f64]) -> NormalEmission {
    let n = obs.len() as f64;
    let mean = obs.iter().sum::<f64>() / n;
    let var = obs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    NormalEmission { mean, var: var.max(VAR_FLOOR) }
}
