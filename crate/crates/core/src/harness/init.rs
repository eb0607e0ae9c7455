//! Initial state sequences: Markov realizations under fixed and random
//! transition matrices, the pointwise most likely states, and the Viterbi
//! path under a given transition matrix.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hmm::{viterbi, HmmParams, NormalEmission, StatePath};
use crate::numeric::argmax;
use crate::rng::Rng;

/// Stationary distribution of `p`, or the uniform distribution with the
/// flag set when the chain has no unique stationary vector.
pub fn stationary_distribution(p: &Array2<f64>) -> (Vec<f64>, bool) {
    let k = p.nrows();
    let uniform = (vec![1.0 / k as f64; k], true);
    // Rows 0..k-1 of (P^T - I) pi = 0, last row replaced by sum(pi) = 1.
    let mut a = Array2::<f64>::zeros((k, k + 1));
    for i in 0..k {
        for j in 0..k {
            a[[i, j]] = p[[j, i]] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..k {
        a[[k - 1, j]] = 1.0;
    }
    a[[k - 1, k]] = 1.0;
    for col in 0..k {
        let piv = (col..k).max_by(|&r, &s| a[[r, col]].abs().total_cmp(&a[[s, col]].abs())).expect("non-empty");
        if a[[piv, col]].abs() < 1e-12 {
            return uniform;
        }
        for j in 0..=k {
            a.swap([piv, j], [col, j]);
        }
        for r in 0..k {
            if r != col {
                let f = a[[r, col]] / a[[col, col]];
                for j in col..=k {
                    a[[r, j]] -= f * a[[col, j]];
                }
            }
        }
    }
    let pi: Vec<f64> = (0..k).map(|i| a[[i, k]] / a[[i, i]]).collect();
    let residual = (0..k)
        .map(|j| ((0..k).map(|i| pi[i] * p[[i, j]]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if pi.iter().any(|&v| !(v >= -1e-12)) || residual > 1e-12 {
        return uniform;
    }
    let s: f64 = pi.iter().map(|v| v.max(0.0)).sum();
    (pi.iter().map(|v| v.max(0.0) / s).collect(), false)
}

/// A chain of length `n` started from the stationary distribution of `p`.
/// Returns the path and whether the uniform fallback was used.
pub fn markov_realization(p: &Array2<f64>, n: usize, rng: &mut Rng) -> Result<(StatePath, bool)> {
    let (pi, fallback) = stationary_distribution(p);
    let rows: Vec<Vec<f64>> = p.outer_iter().map(|r| r.to_vec()).collect();
    let mut states = Vec::with_capacity(n);
    for t in 0..n {
        let probs = if t == 0 { &pi } else { &rows[states[t - 1]] };
        states.push(rng.categorical(probs)?);
    }
    Ok((StatePath::from_vec(states), fallback))
}

/// Each observation labelled with the state of highest emission density.
pub fn pointwise_max_path(emit: &[NormalEmission], obs: &[f64]) -> StatePath {
    StatePath::from_vec(
        obs.iter().map(|&x| argmax(&emit.iter().map(|e| e.log_density(x)).collect::<Vec<_>>())).collect(),
    )
}

/// Initial paths for one dataset and base matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSequences {
    pub paths: Vec<StatePath>,
    /// Indices into `paths` whose generating matrix had no unique
    /// stationary distribution.
    pub fallback: Vec<usize>,
    /// Index of the Viterbi path under `q`.
    pub viterbi_index: usize,
}

/// `realizations` chains for each of `fixed` and one random matrix per
/// entry of `alphas` (rows drawn from a symmetric Dirichlet), then the
/// pointwise-max path and the Viterbi path for `(truth.initial, q,
/// truth.emit)`. The random matrices depend only on `rng`, not on `q`.
pub fn generate_initial_sequences(
    truth: &HmmParams,
    fixed: &[Array2<f64>],
    alphas: &[f64],
    realizations: usize,
    q: &Array2<f64>,
    obs: &[f64],
    rng: &Rng,
) -> Result<InitialSequences> {
    let k = truth.num_states();
    if obs.is_empty() {
        return Err(Error::Domain("initial sequences need observations".into()));
    }
    let mut matrices: Vec<Array2<f64>> = fixed.to_vec();
    for (i, &a) in alphas.iter().enumerate() {
        let mut r = rng.split_path(&[0, i as u64]);
        let mut m = Array2::zeros((k, k));
        for l in 0..k {
            let row = r.dirichlet(&vec![a; k])?;
            m.row_mut(l).assign(&ndarray::ArrayView1::from(&row));
        }
        matrices.push(m);
    }
    let mut paths = Vec::new();
    let mut fallback = Vec::new();
    for (i, m) in matrices.iter().enumerate() {
        if m.dim() != (k, k) {
            return Err(Error::Domain(format!("initial matrix {i} has shape {:?}", m.dim())));
        }
        for rep in 0..realizations {
            let mut r = rng.split_path(&[1, i as u64, rep as u64]);
            let (p, fb) = markov_realization(m, obs.len(), &mut r)?;
            if fb {
                fallback.push(paths.len());
            }
            paths.push(p);
        }
    }
    paths.push(pointwise_max_path(&truth.emit, obs));
    let with_q = HmmParams::new(truth.initial.clone(), q.clone(), truth.emit.clone())?;
    paths.push(viterbi(&with_q.pseudo(obs)?)?);
    Ok(InitialSequences { viterbi_index: paths.len() - 1, paths, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn default_sequences(seed: u64, obs: &[f64]) -> InitialSequences {
        let cfg = ExperimentConfig::example_fixed();
        let truth = cfg.truth_params().unwrap();
        let fixed: Vec<_> = cfg.grid.iter().map(|g| cfg.base_matrix(g).unwrap()).collect();
        generate_initial_sequences(
            &truth,
            &fixed,
            &cfg.init.dirichlet_alphas,
            cfg.init.realizations,
            &fixed[2],
            obs,
            &Rng::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn forty_seven_paths_deterministically() {
        let obs: Vec<f64> = (0..50).map(|t| (t as f64 * 0.37).sin()).collect();
        let a = default_sequences(3, &obs);
        assert_eq!(a.paths.len(), 47);
        assert_eq!(a.viterbi_index, 46);
        assert!(a.paths.iter().all(|p| p.len() == 50));
        assert_eq!(a, default_sequences(3, &obs));
        assert_ne!(a.paths[10], default_sequences(4, &obs).paths[10]);
    }

    #[test]
    fn pointwise_max_constant_when_all_near_one_mean() {
        let cfg = ExperimentConfig::example_fixed();
        let emit = cfg.truth_params().unwrap().emit;
        let p = pointwise_max_path(&emit, &[0.01, -0.1, 0.2, 0.0]);
        assert_eq!(p.as_ref() as &[usize], &[1, 1, 1, 1]);
    }

    #[test]
    fn stationary_of_known_chains() {
        let p = Array2::from_shape_vec((2, 2), vec![0.9, 0.1, 0.3, 0.7]).unwrap();
        let (pi, fb) = stationary_distribution(&p);
        assert!(!fb);
        assert!((pi[0] - 0.75).abs() < 1e-14 && (pi[1] - 0.25).abs() < 1e-14);
        let id = Array2::<f64>::eye(3);
        assert_eq!(stationary_distribution(&id), (vec![1.0 / 3.0; 3], true));
        let periodic = Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(stationary_distribution(&periodic), (vec![0.5, 0.5], false));
    }

    #[test]
    fn stationary_satisfies_balance_for_random_chains() {
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let k = 2 + (rng.next_u64() % 5) as usize;
            let rows: Vec<f64> = (0..k).flat_map(|_| rng.dirichlet(&vec![0.5; k]).unwrap()).collect();
            let p = Array2::from_shape_vec((k, k), rows).unwrap();
            let (pi, fb) = stationary_distribution(&p);
            if !fb {
                let back = ndarray::ArrayView1::from(&pi).dot(&p);
                for j in 0..k {
                    assert!((back[j] - pi[j]).abs() < 1e-12);
                }
            }
        }
    }
}
