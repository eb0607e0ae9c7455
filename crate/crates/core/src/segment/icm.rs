use super::{Problem, RunTrace, SegmenterConfig};
use crate::error::{Error, Result};
use crate::hmm::StatePath;
use crate::model::{path_stats, row_log_prior, state_log_marginal, PathStats};

/// Smallest score gain that counts as an improvement.
const MIN_GAIN: f64 = 1e-9;

/// Local part of `ln p(x, y)` touched by changing site `t` between states
/// `a` and `b`.
fn local_score(problem: &Problem<'_>, stats: &PathStats, rows: &[usize], a: usize, b: usize) -> f64 {
    let mut s = state_log_marginal(stats, problem.mode, a) + state_log_marginal(stats, problem.mode, b);
    for &l in rows {
        s += row_log_prior(stats, problem.prior, l);
    }
    s
}

fn move_site(stats: &mut PathStats, path: &mut [usize], t: usize, to: usize, x: f64) {
    let from = path[t];
    let n = path.len();
    if t > 0 {
        stats.remove_transition(path[t - 1], from);
        stats.add_transition(path[t - 1], to);
    }
    if t + 1 < n {
        stats.remove_transition(from, path[t + 1]);
        stats.add_transition(to, path[t + 1]);
    }
    stats.remove_obs(from, x);
    stats.add_obs(to, x);
    if t == 0 {
        stats.first_state = to;
    }
    path[t] = to;
}

/// Change in `ln p(x, y)` from setting site `t` to `b`.
fn gain(problem: &Problem<'_>, stats: &mut PathStats, path: &mut [usize], t: usize, b: usize) -> f64 {
    let a = path[t];
    let x = problem.obs[t];
    let mut rows = vec![a, b];
    if t > 0 && !rows.contains(&path[t - 1]) {
        rows.push(path[t - 1]);
    }
    let mut before = local_score(problem, stats, &rows, a, b);
    let mut after_init = 0.0;
    if t == 0 {
        before += problem.initial[a].ln();
        after_init = problem.initial[b].ln();
    }
    move_site(stats, path, t, b, x);
    let after = local_score(problem, stats, &rows, a, b) + after_init;
    move_site(stats, path, t, a, x);
    after - before
}

/// Iterated conditional modes: each site in turn takes the state that
/// maximizes `ln p(x, y)` with the rest of the path held fixed.
/// `objective` records the score after every accepted change.
pub fn icm(problem: &Problem<'_>, init: &[usize], cfg: &SegmenterConfig) -> Result<RunTrace> {
    cfg.validate()?;
    problem.check_path(init)?;
    let k = problem.num_states();
    let init_score = problem.log_joint(init)?;
    if !init_score.is_finite() {
        return Err(Error::InfeasiblePath("initial path has zero probability".into()));
    }
    let mut path = init.to_vec();
    let mut stats = path_stats(&path, problem.obs, k)?;
    let mut score = init_score;
    let mut objective = Vec::new();
    let mut path_scores = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for sweep in 1..=cfg.max_iters {
        iterations = sweep;
        let mut changed = false;
        for t in 0..path.len() {
            let a = path[t];
            let mut best = (a, MIN_GAIN);
            for b in (0..k).filter(|&b| b != a) {
                let g = gain(problem, &mut stats, &mut path, t, b);
                if g > best.1 {
                    best = (b, g);
                }
            }
            if best.0 != a {
                move_site(&mut stats, &mut path, t, best.0, problem.obs[t]);
                score += best.1;
                objective.push(score);
                changed = true;
            }
        }
        path_scores.push(problem.log_joint(&path)?);
        if !changed {
            converged = true;
            break;
        }
    }
    let final_score = problem.log_joint(&path)?;
    Ok(RunTrace {
        objective,
        path_scores,
        init_score,
        iterations,
        converged,
        path: StatePath::from_vec(path),
        final_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::segment::tests_support::{brute_force, random_instance};

    #[test]
    fn map_init_is_stable() {
        for seed in 0..10 {
            let (obs, prior, mode, initial) = random_instance(2, 8, seed % 2 == 0, seed);
            let problem = Problem::new(&obs, &prior, &mode, &initial).unwrap();
            let (map, _) = brute_force(&problem);
            let run = icm(&problem, &map, &SegmenterConfig::default()).unwrap();
            assert_eq!(run.path.to_vec(), map);
            assert!(run.objective.is_empty());
            assert_eq!(run.iterations, 1);
        }
    }

    #[test]
    fn every_update_strictly_improves_and_tracks_full_score() {
        for seed in 0..30 {
            let nix = seed % 2 == 1;
            let (obs, prior, mode, initial) = random_instance(2 + (seed as usize % 2), 8, nix, seed);
            let problem = Problem::new(&obs, &prior, &mode, &initial).unwrap();
            let (_, best) = brute_force(&problem);
            let mut rng = Rng::new(seed + 100);
            let init: Vec<usize> = (0..8).map(|_| rng.categorical(&vec![1.0; problem.num_states()]).unwrap()).collect();
            let run = icm(&problem, &init, &SegmenterConfig::default()).unwrap();
            let mut prev = run.init_score;
            for &s in &run.objective {
                assert!(s > prev, "seed {seed}: {s} <= {prev}");
                prev = s;
            }
            let last = run.objective.last().copied().unwrap_or(run.init_score);
            assert!((last - run.final_score).abs() < 1e-8, "seed {seed}: {last} vs {}", run.final_score);
            assert!(run.final_score <= best);
        }
    }

    #[test]
    fn incremental_stats_match_recount() {
        let (obs, prior, mode, initial) = random_instance(3, 50, true, 5);
        let problem = Problem::new(&obs, &prior, &mode, &initial).unwrap();
        let mut path: Vec<usize> = (0..50).map(|t| (t * 7 / 5) % 3).collect();
        let mut stats = path_stats(&path, &obs, 3).unwrap();
        let mut rng = Rng::new(1);
        for _ in 0..500 {
            let t = (rng.uniform() * 50.0) as usize;
            let b = rng.categorical(&[1.0; 3]).unwrap();
            let _ = gain(&problem, &mut stats, &mut path, t, b);
            move_site(&mut stats, &mut path, t, b, obs[t]);
        }
        let fresh = path_stats(&path, &obs, 3).unwrap();
        assert_eq!(stats.counts, fresh.counts);
        assert_eq!(stats.occupancy, fresh.occupancy);
        assert_eq!(stats.first_state, fresh.first_state);
        for k in 0..3 {
            assert!((stats.sum[k] - fresh.sum[k]).abs() < 1e-10);
            assert!((stats.sumsq[k] - fresh.sumsq[k]).abs() < 1e-10);
        }
    }
}
