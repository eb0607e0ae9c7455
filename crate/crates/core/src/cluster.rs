//! Clustering problems obtained by dropping the temporal structure and
//! letting the NIX hyperparameters go to their limits.
//!
//! With `nu0 -> inf` the MAP clustering minimizes a k-means objective
//! regularized toward the prior locations `xi_k` plus a size term
//! `tau0^2 ln(kappa0 + m_k)`. With finite `nu0` the objective is the
//! negative NIX marginal likelihood up to an additive constant.

use crate::error::{Error, Result};
use crate::model::NixPrior;
use crate::numeric::{argmax, log_gamma_unchecked};

/// Hard assignment of observations to `K` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    num_clusters: usize,
}

/// Per-cluster size, sum and scatter about the cluster mean.
struct Moments {
    size: Vec<usize>,
    sum: Vec<f64>,
    scatter: Vec<f64>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, num_clusters: usize) -> Result<Self> {
        if num_clusters == 0 {
            return Err(Error::Domain("need at least one cluster".into()));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= num_clusters) {
            return Err(Error::Domain(format!("label {l} out of range for K = {num_clusters}")));
        }
        Ok(Self { labels, num_clusters })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut m = vec![0; self.num_clusters];
        for &l in &self.labels {
            m[l] += 1;
        }
        m
    }

    fn moments(&self, obs: &[f64]) -> Moments {
        let k = self.num_clusters;
        let size = self.sizes();
        let mut sum = vec![0.0; k];
        for (&l, &x) in self.labels.iter().zip(obs) {
            sum[l] += x;
        }
        let mut scatter = vec![0.0; k];
        for (&l, &x) in self.labels.iter().zip(obs) {
            let d = x - sum[l] / size[l] as f64;
            scatter[l] += d * d;
        }
        Moments { size, sum, scatter }
    }

    /// Regularized centers `(m_k mean_k + kappa0 xi_k) / (kappa0 + m_k)`;
    /// an empty cluster sits at `xi_k`.
    pub fn centers(&self, obs: &[f64], prior: &NixPrior) -> Vec<f64> {
        let mo = self.moments(obs);
        (0..self.num_clusters)
            .map(|k| (mo.sum[k] + prior.kappa0 * prior.xi[k]) / (prior.kappa0 + mo.size[k] as f64))
            .collect()
    }

    fn check(&self, obs: &[f64], prior: &NixPrior) -> Result<()> {
        if self.labels.len() != obs.len() {
            return Err(Error::LengthMismatch(self.labels.len(), obs.len()));
        }
        if prior.num_states() != self.num_clusters {
            return Err(Error::Domain(format!(
                "prior has {} locations, assignment has {} clusters",
                prior.num_states(),
                self.num_clusters
            )));
        }
        Ok(())
    }
}

/// Which limit of the NIX model the objective comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveVariant {
    /// `nu0 -> inf`
    Nu0Limit,
    /// `nu0` as given in the prior
    FiniteNu0,
}

/// Assignment step of [`cluster_iterate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterRule {
    /// Nearest center (Voronoi).
    Mm,
    /// Nearest center after adding `tau0^2 / (m_k + kappa0)`.
    Em,
}

/// Value of the clustering objective; smaller is better.
pub fn cluster_objective(
    assign: &ClusterAssignment,
    obs: &[f64],
    prior: &NixPrior,
    variant: ObjectiveVariant,
) -> Result<f64> {
    assign.check(obs, prior)?;
    let mo = assign.moments(obs);
    let k0 = prior.kappa0;
    Ok((0..assign.num_clusters)
        .map(|k| {
            let m = mo.size[k] as f64;
            let shrink = if m > 0.0 {
                let d = mo.sum[k] / m - prior.xi[k];
                mo.scatter[k] + k0 * m / (k0 + m) * d * d
            } else {
                0.0
            };
            match variant {
                ObjectiveVariant::Nu0Limit => shrink + prior.tau0_sq * (k0 + m).ln(),
                ObjectiveVariant::FiniteNu0 => {
                    let half_nu = 0.5 * (prior.nu0 + m);
                    -log_gamma_unchecked(half_nu) + 0.5 * (k0 + m).ln()
                        + half_nu * (prior.nu0 * prior.tau0_sq + shrink).ln()
                }
            }
        })
        .sum())
}

/// The `nu0 -> inf` objective written with explicit centers:
/// `sum_k [sum (x - c_k)^2 + kappa0 (c_k - xi_k)^2 + tau0^2 ln(kappa0 + m_k)]`
/// at the regularized centers.
pub fn cluster_objective_centered(assign: &ClusterAssignment, obs: &[f64], prior: &NixPrior) -> Result<f64> {
    assign.check(obs, prior)?;
    let centers = assign.centers(obs, prior);
    let sizes = assign.sizes();
    let data: f64 = assign.labels.iter().zip(obs).map(|(&l, &x)| (x - centers[l]).powi(2)).sum();
    let rest: f64 = (0..assign.num_clusters)
        .map(|k| {
            prior.kappa0 * (centers[k] - prior.xi[k]).powi(2) + prior.tau0_sq * (prior.kappa0 + sizes[k] as f64).ln()
        })
        .sum();
    Ok(data + rest)
}

/// Result of [`cluster_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    pub assignment: ClusterAssignment,
    pub centers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration: the `nu0 -> inf` objective without
    /// its size term for [`ClusterRule::Mm`], with it for [`ClusterRule::Em`].
    pub objective: Vec<f64>,
}

fn monitored(assign: &ClusterAssignment, obs: &[f64], prior: &NixPrior, rule: ClusterRule) -> Result<f64> {
    let full = cluster_objective(assign, obs, prior, ObjectiveVariant::Nu0Limit)?;
    Ok(match rule {
        ClusterRule::Em => full,
        ClusterRule::Mm => {
            full - assign.sizes().iter().map(|&m| prior.tau0_sq * (prior.kappa0 + m as f64).ln()).sum::<f64>()
        }
    })
}

/// Alternates the center update with the chosen assignment rule until the
/// assignment stops changing. Ties go to the lowest cluster index.
pub fn cluster_iterate(
    obs: &[f64],
    prior: &NixPrior,
    rule: ClusterRule,
    init: &ClusterAssignment,
    max_iters: usize,
) -> Result<ClusterRun> {
    init.check(obs, prior)?;
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let k = init.num_clusters;
    let mut current = init.clone();
    let mut objective = Vec::new();
    for iter in 1..=max_iters {
        let centers = current.centers(obs, prior);
        let sizes = current.sizes();
        let penalty: Vec<f64> = match rule {
            ClusterRule::Mm => vec![0.0; k],
            ClusterRule::Em => sizes.iter().map(|&m| prior.tau0_sq / (m as f64 + prior.kappa0)).collect(),
        };
        let labels: Vec<usize> = obs
            .iter()
            .map(|&x| {
                let neg_cost: Vec<f64> = (0..k).map(|c| -((x - centers[c]).powi(2) + penalty[c])).collect();
                argmax(&neg_cost)
            })
            .collect();
        let next = ClusterAssignment { labels, num_clusters: k };
        objective.push(monitored(&next, obs, prior, rule)?);
        if next == current {
            let centers = next.centers(obs, prior);
            return Ok(ClusterRun { assignment: next, centers, iterations: iter, converged: true, objective });
        }
        current = next;
    }
    let centers = current.centers(obs, prior);
    Ok(ClusterRun { assignment: current, centers, iterations: max_iters, converged: false, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_emission_marginal, path_stats, EmissionMode};
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_data(seed: u64, n: usize, k: usize) -> (Vec<f64>, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let obs = (0..n).map(|_| rng.normal(0.0, 2.0).unwrap()).collect();
        let labels = (0..n).map(|_| rng.categorical(&vec![1.0; k]).unwrap()).collect();
        (obs, labels)
    }

    /// Plain Lloyd iteration with mean centers, lowest-index ties, and an
    /// empty cluster parked at its prior location.
    fn lloyd(obs: &[f64], mut labels: Vec<usize>, park: &[f64]) -> Vec<usize> {
        let k = park.len();
        loop {
            let mut sum = vec![0.0; k];
            let mut cnt = vec![0usize; k];
            for (&l, &x) in labels.iter().zip(obs) {
                sum[l] += x;
                cnt[l] += 1;
            }
            let centers: Vec<f64> = (0..k).map(|c| if cnt[c] > 0 { sum[c] / cnt[c] as f64 } else { park[c] }).collect();
            let next: Vec<usize> = obs
                .iter()
                .map(|&x| {
                    let mut best = 0;
                    for c in 1..k {
                        if (x - centers[c]).abs() < (x - centers[best]).abs() {
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            if next == labels {
                return labels;
            }
            labels = next;
        }
    }

    #[test]
    fn vanishing_prior_gives_within_cluster_sum_of_squares() {
        let (obs, labels) = random_data(3, 30, 3);
        let prior = NixPrior::new(vec![0.0, 1.0, 2.0], 1e-14, 1.0, 1e-14).unwrap();
        let a = ClusterAssignment::new(labels.clone(), 3).unwrap();
        let got = cluster_objective(&a, &obs, &prior, ObjectiveVariant::Nu0Limit).unwrap();
        let mut wss = 0.0;
        for c in 0..3 {
            let xs: Vec<f64> = labels.iter().zip(&obs).filter(|(&l, _)| l == c).map(|(_, &x)| x).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            wss += xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        }
        assert!((got - wss).abs() < 1e-9, "{got} vs {wss}");
    }

    proptest! {
        #[test]
        fn centered_form_is_identical(
            seed in any::<u64>(),
            kappa0 in 0.01f64..50.0,
            tau0_sq in 0.01f64..5.0,
            n in 1usize..40,
        ) {
            let (obs, labels) = random_data(seed, n, 3);
            let prior = NixPrior::new(vec![-1.0, 0.0, 1.5], kappa0, 2.0, tau0_sq).unwrap();
            let a = ClusterAssignment::new(labels, 3).unwrap();
            let x = cluster_objective(&a, &obs, &prior, ObjectiveVariant::Nu0Limit).unwrap();
            let y = cluster_objective_centered(&a, &obs, &prior).unwrap();
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{} vs {}", x, y);
        }

        #[test]
        fn iterations_never_increase_their_objective(seed in any::<u64>(), tau0_sq in 0.01f64..20.0, kappa0 in 0.01f64..5.0) {
            let (obs, labels) = random_data(seed, 40, 3);
            let prior = NixPrior::new(vec![-1.0, 0.0, 1.5], kappa0, 2.0, tau0_sq).unwrap();
            let init = ClusterAssignment::new(labels, 3).unwrap();
            for rule in [ClusterRule::Mm, ClusterRule::Em] {
                let run = cluster_iterate(&obs, &prior, rule, &init, 200).unwrap();
                let mut prev = monitored(&init, &obs, &prior, rule).unwrap();
                for &v in &run.objective {
                    prop_assert!(v <= prev + 1e-9, "{:?}: {} -> {}", rule, prev, v);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn vanishing_prior_iteration_is_lloyd() {
        for seed in 0..20 {
            let mut rng = Rng::new(seed);
            let obs: Vec<f64> =
                (0..60).map(|t| [-3.0, 0.0, 3.0][t % 3] + rng.normal(0.0, 0.5).unwrap()).collect();
            let xi = vec![-1.0, 0.2, 1.0];
            let prior = NixPrior::new(xi.clone(), 1e-12, 1.0, 1e-12).unwrap();
            let init: Vec<usize> = (0..60).map(|_| rng.categorical(&[1.0; 3]).unwrap()).collect();
            let want = lloyd(&obs, init.clone(), &xi);
            for rule in [ClusterRule::Mm, ClusterRule::Em] {
                let run = cluster_iterate(&obs, &prior, rule, &ClusterAssignment::new(init.clone(), 3).unwrap(), 500)
                    .unwrap();
                assert!(run.converged);
                assert_eq!(run.assignment.labels(), want.as_slice(), "seed {seed} {rule:?}");
            }
        }
    }

    #[test]
    fn separated_groups_recovered() {
        let obs = [-5.1, -4.9, -5.0, 5.0, 5.2, 4.8];
        let prior = NixPrior::new(vec![0.0, 0.1], 1e-6, 1.0, 1e-6).unwrap();
        let init = ClusterAssignment::new(vec![0, 1, 0, 1, 0, 1], 2).unwrap();
        let run = cluster_iterate(&obs, &prior, ClusterRule::Mm, &init, 100).unwrap();
        let l = run.assignment.labels();
        assert!(l[..3].iter().all(|&v| v == l[0]) && l[3..].iter().all(|&v| v == l[3]) && l[0] != l[3]);
    }

    #[test]
    fn empty_cluster_sits_at_prior_location() {
        let obs = [0.0, 0.1, -0.1];
        let prior = NixPrior::new(vec![0.0, 100.0], 1.0, 1.0, 0.1).unwrap();
        let init = ClusterAssignment::new(vec![0, 0, 0], 2).unwrap();
        let run = cluster_iterate(&obs, &prior, ClusterRule::Mm, &init, 10).unwrap();
        assert_eq!(run.centers[1], 100.0);
        assert_eq!(run.assignment.sizes(), vec![3, 0]);
    }

    #[test]
    fn large_tau_makes_em_less_balanced() {
        let mut more_unequal = 0;
        for seed in 0..20 {
            let (obs, labels) = random_data(seed + 50, 60, 3);
            let prior = NixPrior::new(vec![-1.0, 0.0, 1.0], 1.0, 2.0, 30.0).unwrap();
            let init = ClusterAssignment::new(labels, 3).unwrap();
            let imbalance = |rule| {
                let run = cluster_iterate(&obs, &prior, rule, &init, 500).unwrap();
                run.assignment.sizes().iter().map(|&m| (m * m) as f64).sum::<f64>()
            };
            if imbalance(ClusterRule::Em) > imbalance(ClusterRule::Mm) {
                more_unequal += 1;
            }
        }
        println!("EM rule less balanced than MM on {more_unequal}/20 datasets");
        assert!(more_unequal >= 1);
    }

    #[test]
    fn strong_prior_optimum_is_nearest_location() {
        for seed in 0..10 {
            let k = 2 + (seed as usize % 2);
            let n = 7;
            let (obs, _) = random_data(seed + 200, n, k);
            let xi: Vec<f64> = (0..k).map(|c| -1.5 + 1.5 * c as f64).collect();
            let prior = NixPrior::new(xi.clone(), 1e9, 1.0, 0.5).unwrap();
            let mut best = (f64::INFINITY, Vec::new());
            for code in 0..k.pow(n as u32) {
                let mut c = code;
                let labels: Vec<usize> = (0..n)
                    .map(|_| {
                        let l = c % k;
                        c /= k;
                        l
                    })
                    .collect();
                let v = cluster_objective(&ClusterAssignment::new(labels.clone(), k).unwrap(), &obs, &prior, ObjectiveVariant::Nu0Limit)
                    .unwrap();
                if v < best.0 {
                    best = (v, labels);
                }
            }
            let nearest: Vec<usize> = obs
                .iter()
                .map(|&x| argmax(&xi.iter().map(|m| -(x - m).abs()).collect::<Vec<_>>()))
                .collect();
            assert_eq!(best.1, nearest, "seed {seed}");
        }
    }

    #[test]
    fn finite_nu0_tracks_negative_marginal_likelihood() {
        let prior = NixPrior::new(vec![-0.7, 0.0, 0.7], 10.0, 50.0, 0.25).unwrap();
        let mode = EmissionMode::NixBayes(prior.clone());
        let (obs, _) = random_data(9, 25, 3);
        let value = |labels: &[usize]| {
            let a = ClusterAssignment::new(labels.to_vec(), 3).unwrap();
            let obj = cluster_objective(&a, &obs, &prior, ObjectiveVariant::FiniteNu0).unwrap();
            let marg = log_emission_marginal(&path_stats(labels, &obs, 3).unwrap(), &mode);
            (obj, marg)
        };
        let mut rng = Rng::new(10);
        let base: Vec<usize> = (0..25).map(|_| rng.categorical(&[1.0; 3]).unwrap()).collect();
        let (o0, m0) = value(&base);
        for _ in 0..50 {
            let other: Vec<usize> = (0..25).map(|_| rng.categorical(&[1.0, 2.0, 0.5]).unwrap()).collect();
            let (o1, m1) = value(&other);
            assert!(((o1 - o0) + (m1 - m0)).abs() < 1e-8, "{} vs {}", o1 - o0, -(m1 - m0));
        }
    }
}
