use ndarray::Array2;

use super::{Problem, RunTrace, SegmenterConfig};
use crate::error::Result;
use crate::hmm::{forward_backward, viterbi, PosteriorStats, PseudoHmm};
use crate::model::{expected_log_emission, expected_log_trans, nix_posterior_weighted, path_stats, EmissionMode};

/// Snapshot handed to the observer after each variational update.
#[derive(Debug)]
pub struct VbState<'a> {
    pub iteration: usize,
    /// Expected transition counts that built `pseudo`.
    pub counts_used: &'a Array2<f64>,
    /// Memberships that built the emission scores of `pseudo`.
    pub gamma_used: &'a Array2<f64>,
    pub pseudo: &'a PseudoHmm,
    /// Forward-backward output on `pseudo`, the new q(y).
    pub posterior: &'a PosteriorStats,
    pub max_delta: f64,
}

/// Mean-field variational Bayes; the path is the Viterbi path of the
/// final pseudo-HMM.
pub fn variational_bayes(problem: &Problem<'_>, init: &[usize], cfg: &SegmenterConfig) -> Result<RunTrace> {
    variational_bayes_observed(problem, init, cfg, |_| {})
}

pub fn variational_bayes_observed(
    problem: &Problem<'_>,
    init: &[usize],
    cfg: &SegmenterConfig,
    mut observer: impl FnMut(&VbState<'_>),
) -> Result<RunTrace> {
    cfg.validate()?;
    problem.check_path(init)?;
    let (n, k) = (problem.len(), problem.num_states());
    let mut gamma = Array2::zeros((n, k));
    for (t, &y) in init.iter().enumerate() {
        gamma[[t, y]] = 1.0;
    }
    let mut xi = path_stats(init, problem.obs, k)?.counts_f64();
    let log_initial: Vec<f64> = problem.initial.iter().map(|p| p.ln()).collect();
    let mut objective = Vec::new();
    let mut path_scores = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last = None;
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let log_trans = expected_log_trans(problem.prior, &xi);
        let mut log_emit = Array2::zeros((n, k));
        match problem.mode {
            EmissionMode::Fixed(emit) => {
                for (t, &x) in problem.obs.iter().enumerate() {
                    for (s, e) in emit.iter().enumerate() {
                        log_emit[[t, s]] = e.log_density(x);
                    }
                }
            }
            EmissionMode::NixBayes(nix) => {
                let post = nix_posterior_weighted(&gamma, problem.obs, nix);
                for (t, &x) in problem.obs.iter().enumerate() {
                    for s in 0..k {
                        log_emit[[t, s]] = expected_log_emission(&post, s, x);
                    }
                }
            }
        }
        let pseudo = PseudoHmm::new(log_initial.clone(), log_trans, log_emit)?;
        let post = forward_backward(&pseudo)?;
        let max_delta = post.gamma.iter().zip(gamma.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        observer(&VbState {
            iteration: iter,
            counts_used: &xi,
            gamma_used: &gamma,
            pseudo: &pseudo,
            posterior: &post,
            max_delta,
        });
        if cfg.record_path_scores {
            path_scores.push(problem.log_joint(&viterbi(&pseudo)?)?);
        }
        objective.push(max_delta);
        gamma = post.gamma;
        xi = post.xi;
        last = Some(pseudo);
        if max_delta < cfg.tol {
            converged = true;
            break;
        }
    }
    let pseudo = last.expect("at least one iteration runs");
    let path = viterbi(&pseudo)?;
    let final_score = problem.log_joint(&path)?;
    let init_score = problem.log_joint(init).unwrap_or(f64::NEG_INFINITY);
    Ok(RunTrace { objective, path_scores, init_score, iterations, converged, path, final_score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{generate_data, HmmParams, NormalEmission};
    use crate::model::{DirichletPrior, NixPrior};
    use crate::numeric::{digamma, log_gamma};
    use crate::rng::Rng;
    use crate::segment::bem::{bayes_em, BemInit};
    use crate::segment::tests_support::{brute_force, random_instance};
    use ndarray::array;

    /// KL(Dir(a) || Dir(b)) over the positive entries of `b`.
    fn kl_dirichlet(a: &[f64], b: &[f64]) -> f64 {
        let (a0, b0): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let mut s = log_gamma(a0).unwrap() - log_gamma(b0).unwrap();
        for (&ai, &bi) in a.iter().zip(b) {
            s += log_gamma(bi).unwrap() - log_gamma(ai).unwrap()
                + (ai - bi) * (digamma(ai).unwrap() - digamma(a0).unwrap());
        }
        s
    }

    #[test]
    fn single_state_gives_single_path() {
        let prior = DirichletPrior::symmetric(1, 1.0).unwrap();
        let mode = EmissionMode::NixBayes(NixPrior::new(vec![0.0], 1.0, 2.0, 1.0).unwrap());
        let obs = [0.3, -2.0, 4.0];
        let problem = Problem::new(&obs, &prior, &mode, &[1.0]).unwrap();
        let run = variational_bayes(&problem, &[0, 0, 0], &SegmenterConfig::default()).unwrap();
        assert_eq!(run.path.to_vec(), vec![0, 0, 0]);
        assert!(run.converged);
    }

    #[test]
    fn free_energy_never_increases() {
        for seed in 0..20 {
            let (obs, prior, mode, initial) = random_instance(3, 60, false, seed);
            let problem = Problem::new(&obs, &prior, &mode, &initial).unwrap();
            let init: Vec<usize> = (0..60).map(|t| (t / 7) % 3).collect();
            let mut elbo = Vec::new();
            variational_bayes_observed(&problem, &init, &SegmenterConfig::default(), |st| {
                let kl: f64 = (0..3)
                    .map(|l| {
                        let b = prior.alpha().row(l).to_vec();
                        let a: Vec<f64> = b.iter().zip(st.counts_used.row(l)).map(|(b, c)| b + c).collect();
                        kl_dirichlet(&a, &b)
                    })
                    .sum();
                elbo.push(st.posterior.log_evidence - kl);
            })
            .unwrap();
            assert!(elbo.len() >= 2);
            for w in elbo.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "seed {seed}: free energy rose {} -> {}", -w[0], -w[1]);
            }
        }
    }

    #[test]
    fn bounded_by_map() {
        for seed in 0..20 {
            let (obs, prior, mode, initial) = random_instance(2, 8, seed % 2 == 0, seed);
            let problem = Problem::new(&obs, &prior, &mode, &initial).unwrap();
            let (_, best) = brute_force(&problem);
            let run = variational_bayes(&problem, &[1, 1, 0, 0, 1, 1, 0, 0], &SegmenterConfig::default()).unwrap();
            assert!(run.final_score <= best);
        }
    }

    #[test]
    fn transition_summaries_close_to_bayesian_em() {
        let truth = array![[0.6, 0.4], [0.3, 0.7]];
        let emit = vec![NormalEmission { mean: 0.0, var: 0.25 }, NormalEmission { mean: 1.5, var: 0.25 }];
        let params = HmmParams::new(vec![0.5, 0.5], truth.clone(), emit.clone()).unwrap();
        let (obs, y) = generate_data(&params, 3000, &mut Rng::new(8)).unwrap();
        let prior = DirichletPrior::new(20.0, truth).unwrap();
        let mode = EmissionMode::Fixed(emit);
        let problem = Problem::new(&obs, &prior, &mode, &[0.5, 0.5]).unwrap();
        let cfg = SegmenterConfig::default();
        let mut last_u = None;
        let mut last_counts = None;
        variational_bayes_observed(&problem, &y, &cfg, |st| {
            last_u = Some(st.pseudo.log_trans.clone());
            last_counts = Some(st.posterior.xi.clone());
        })
        .unwrap();
        let (u, counts) = (last_u.unwrap(), last_counts.unwrap());
        let bem = bayes_em(&problem, BemInit::Path(&y), &cfg, false).unwrap();
        let min_count = counts.iter().fold(f64::INFINITY, |m, &c| m.min(c));
        assert!(min_count > 100.0);
        for l in 0..2 {
            for j in 0..2 {
                let d = (u[[l, j]] - bem.params.trans[[l, j]].ln()).abs();
                assert!(d <= 1.0 / min_count, "({l},{j}): {d} vs bound {}", 1.0 / min_count);
            }
        }
    }
}
