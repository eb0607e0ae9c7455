//! Exhaustive MAP search for small instances and path comparison.

use crate::error::{Error, Result};
use crate::hmm::StatePath;
use crate::segment::Problem;

/// Largest number of paths [`brute_force_map`] will enumerate.
pub const MAX_PATHS: u64 = 1 << 20;

/// Global maximizer of `ln p(x, y)` over all `K^n` paths. Enumeration is in
/// lexicographic order and only a strictly better score replaces the
/// incumbent, so ties resolve to the lexicographically smallest path.
pub fn brute_force_map(problem: &Problem<'_>) -> Result<(StatePath, f64)> {
    let (k, n) = (problem.num_states(), problem.len());
    let too_large = || Error::InstanceTooLarge { states: k, len: n };
    let count = u32::try_from(n).ok().and_then(|e| (k as u64).checked_pow(e)).ok_or_else(too_large)?;
    if count > MAX_PATHS {
        return Err(too_large());
    }
    let mut path = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    'outer: loop {
        match problem.log_joint(&path) {
            Ok(s) if best.as_ref().is_none_or(|b| s > b.1) => best = Some((path.clone(), s)),
            Ok(_) | Err(Error::InfeasiblePath(_)) => {}
            Err(e) => return Err(e),
        }
        for i in (0..n).rev() {
            path[i] += 1;
            if path[i] < k {
                continue 'outer;
            }
            path[i] = 0;
        }
        break;
    }
    best.map(|(p, s)| (StatePath::from_vec(p), s)).ok_or_else(|| Error::InfeasiblePath("every path has zero prior mass".into()))
}

/// Number of positions at which two equally long paths differ.
pub fn compare_paths(a: &[usize], b: &[usize]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;
    use crate::hmm::NormalEmission;
    use crate::model::{DirichletPrior, EmissionMode};
    use crate::segment::tests_support::brute_force;

    #[test]
    fn hamming_examples() {
        assert_eq!(compare_paths(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap(), 0);
        assert_eq!(compare_paths(&[0, 1, 2, 3], &[0, 1, 3, 2]).unwrap(), 2);
        assert!(compare_paths(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn single_state_has_one_path() {
        let prior = DirichletPrior::symmetric(1, 2.0).unwrap();
        let mode = EmissionMode::Fixed(vec![NormalEmission { mean: 0.0, var: 1.0 }]);
        let obs = [0.3, -1.0, 2.0];
        let p = Problem::new(&obs, &prior, &mode, &[1.0]).unwrap();
        let (path, score) = brute_force_map(&p).unwrap();
        assert_eq!(&*path, &[0, 0, 0]);
        assert_eq!(score, p.log_joint(&[0, 0, 0]).unwrap());
    }

    #[test]
    fn size_guard() {
        let prior = DirichletPrior::symmetric(2, 2.0).unwrap();
        let mode = EmissionMode::Fixed(vec![NormalEmission { mean: 0.0, var: 1.0 }; 2]);
        let obs = vec![0.0; 21];
        let p = Problem::new(&obs, &prior, &mode, &[0.5, 0.5]).unwrap();
        assert!(matches!(brute_force_map(&p), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn uninformative_emissions_favor_constant_paths() {
        for k in 2..=3 {
            let prior = DirichletPrior::new(k as f64, Array2::from_elem((k, k), 1.0 / k as f64)).unwrap();
            let mode = EmissionMode::Fixed(vec![NormalEmission { mean: 0.0, var: 1.0 }; k]);
            let initial = if k == 2 { vec![0.3, 0.7] } else { vec![0.2, 0.5, 0.3] };
            for n in 4..=8 {
                let obs: Vec<f64> = (0..n).map(|t| t as f64 * 0.1).collect();
                let p = Problem::new(&obs, &prior, &mode, &initial).unwrap();
                let (path, _) = brute_force_map(&p).unwrap();
                let top = crate::numeric::argmax(&initial);
                assert!(path.iter().all(|&s| s == top), "k={k} n={n}: {path}");
            }
        }
    }

    #[test]
    fn agrees_with_reference_enumeration() {
        for seed in 0..20 {
            let (obs, prior, mode, initial) = crate::segment::tests_support::random_instance(3, 6, seed % 2 == 0, seed);
            let p = Problem::new(&obs, &prior, &mode, &initial).unwrap();
            let (path, score) = brute_force_map(&p).unwrap();
            let (rp, rs) = brute_force(&p);
            assert_eq!(score, rs);
            assert_eq!(&*path, rp.as_slice());
        }
    }
}
