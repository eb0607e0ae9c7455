use std::collections::HashMap;

use ndarray::Array2;

use super::{best_of, Problem, RunTrace, SegmenterConfig};
use crate::error::{Error, Result};
use crate::hmm::{viterbi, PseudoHmm, StatePath};
use crate::model::{expected_log_emission, expected_log_trans, nix_posterior, path_stats, posterior_modes, EmissionMode, PathStats};

/// Repeats `step` until the path is a fixed point or revisits an earlier
/// output. On a cycle the best member is returned. Only outputs of `step`
/// enter the visited set, so the result depends on `init` only through
/// what `step` reads from it.
fn iterate_paths(
    problem: &Problem<'_>,
    init: &[usize],
    cfg: &SegmenterConfig,
    mut step: impl FnMut(&PathStats) -> Result<StatePath>,
) -> Result<RunTrace> {
    cfg.validate()?;
    problem.check_path(init)?;
    let k = problem.num_states();
    let init_score = problem.log_joint(init).unwrap_or(f64::NEG_INFINITY);
    let mut current = StatePath::from_vec(init.to_vec());
    let mut history: Vec<(StatePath, f64)> = Vec::new();
    let mut seen: HashMap<StatePath, usize> = HashMap::new();
    let mut objective = Vec::new();
    for iter in 1..=cfg.max_iters {
        let stats = path_stats(&current, problem.obs, k)?;
        let next = step(&stats)?;
        let score = problem.log_joint(&next)?;
        objective.push(score);
        if next == current {
            return Ok(finish(objective, init_score, iter, true, next, score));
        }
        if let Some(&start) = seen.get(&next) {
            let cycle = &history[start..];
            let (path, score) = cycle[best_of(cycle)].clone();
            return Ok(finish(objective, init_score, iter, true, path, score));
        }
        seen.insert(next.clone(), history.len());
        history.push((next.clone(), score));
        current = next;
    }
    let score = history.last().map(|h| h.1).unwrap_or(init_score);
    Ok(finish(objective, init_score, cfg.max_iters, false, current, score))
}

fn finish(objective: Vec<f64>, init_score: f64, iterations: usize, converged: bool, path: StatePath, score: f64) -> RunTrace {
    RunTrace {
        path_scores: objective.clone(),
        objective,
        init_score,
        iterations,
        converged,
        path,
        final_score: score,
    }
}

/// Pseudo-HMM whose Viterbi path maximizes E ln p(y, theta | x) under
/// p(theta | current path, x).
pub(crate) fn sem_pseudo(problem: &Problem<'_>, stats: &PathStats) -> Result<PseudoHmm> {
    let k = problem.num_states();
    let log_trans = expected_log_trans(problem.prior, &stats.counts_f64());
    let mut log_emit = Array2::zeros((problem.len(), k));
    match problem.mode {
        EmissionMode::Fixed(emit) => {
            for (t, &x) in problem.obs.iter().enumerate() {
                for (s, e) in emit.iter().enumerate() {
                    log_emit[[t, s]] = e.log_density(x);
                }
            }
        }
        EmissionMode::NixBayes(nix) => {
            let post = nix_posterior(stats, nix);
            for (t, &x) in problem.obs.iter().enumerate() {
                for s in 0..k {
                    log_emit[[t, s]] = expected_log_emission(&post, s, x);
                }
            }
        }
    }
    let log_initial = problem.initial.iter().map(|p| p.ln()).collect();
    PseudoHmm::new(log_initial, log_trans, log_emit)
}

/// Segmentation EM: Viterbi on the pseudo-HMM built from the current path.
/// `ln p(x, y)` never decreases along the iterates.
pub fn seg_em(problem: &Problem<'_>, init: &[usize], cfg: &SegmenterConfig) -> Result<RunTrace> {
    iterate_paths(problem, init, cfg, |stats| viterbi(&sem_pseudo(problem, stats)?))
}

/// Segmentation MM: posterior modes of theta given the path, then Viterbi
/// under those parameters. Requires every positive `alpha_lj > 1`.
pub fn seg_mm(problem: &Problem<'_>, init: &[usize], cfg: &SegmenterConfig) -> Result<RunTrace> {
    problem.require_alpha_above_one(|from, to, value| Error::ModeInfeasible { from, to, value })?;
    iterate_paths(problem, init, cfg, |stats| {
        let params = posterior_modes(stats, problem.prior, problem.mode, problem.initial)?;
        viterbi(&params.pseudo(problem.obs)?)
    })
}
