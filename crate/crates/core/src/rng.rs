//! Seeded, splittable random number generation and the samplers the
//! models need.
//!
//! An [`Rng`] is a ChaCha8 stream keyed by a 64-bit seed. Child streams are
//! derived from the parent's seed and a label, never from its current
//! state, so the same `(seed, label)` pair always yields the same child no
//! matter how much the parent has been used.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream identified by `label`.
    pub fn split(&self, label: u64) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F))))
    }

    /// Child stream for a sequence of labels, applied left to right.
    pub fn split_path(&self, labels: &[u64]) -> Rng {
        labels.iter().fold(self.clone(), |r, &l| r.split(l))
    }

    /// Uniform draw from [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn normal(&mut self, mean: f64, var: f64) -> Result<f64> {
        if !(var > 0.0 && var.is_finite() && mean.is_finite()) {
            return Err(Error::Domain(format!("normal({mean}, {var})")));
        }
        let z: f64 = StandardNormal.sample(&mut self.inner);
        Ok(mean + var.sqrt() * z)
    }

    /// Gamma(shape, scale = 1).
    fn gamma(&mut self, shape: f64) -> Result<f64> {
        let g = Gamma::new(shape, 1.0).map_err(|e| Error::Domain(format!("gamma({shape}): {e}")))?;
        Ok(g.sample(&mut self.inner))
    }

    /// ln of a Gamma(shape, 1) draw, without underflow for small shapes.
    fn log_gamma_draw(&mut self, shape: f64) -> Result<f64> {
        if shape >= 1.0 {
            Ok(self.gamma(shape)?.ln())
        } else {
            // G(a) = G(a + 1) U^(1/a)
            let g = self.gamma(shape + 1.0)?;
            let u = 1.0 - self.uniform();
            Ok(g.ln() + u.ln() / shape)
        }
    }

    /// Scaled inverse chi-square: nu tau^2 / chi^2(nu).
    pub fn scaled_inv_chi_sq(&mut self, nu: f64, tau_sq: f64) -> Result<f64> {
        if !(nu > 0.0 && tau_sq > 0.0 && nu.is_finite() && tau_sq.is_finite()) {
            return Err(Error::Domain(format!("Inv-chi2({nu}, {tau_sq})")));
        }
        let chi2 = 2.0 * self.gamma(0.5 * nu)?;
        Ok(nu * tau_sq / chi2)
    }

    pub fn dirichlet(&mut self, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.is_empty() || alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Domain(format!("Dirichlet({alpha:?})")));
        }
        self.dirichlet_with_zeros(alpha)
    }

    /// Dirichlet draw where zero entries are structural zeros.
    pub(crate) fn dirichlet_with_zeros(&mut self, alpha: &[f64]) -> Result<Vec<f64>> {
        let mut logs = Vec::with_capacity(alpha.len());
        for &a in alpha {
            if a == 0.0 {
                logs.push(f64::NEG_INFINITY);
            } else if a > 0.0 {
                logs.push(self.log_gamma_draw(a)?);
            } else {
                return Err(Error::Domain(format!("Dirichlet parameter {a}")));
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Domain("Dirichlet with all-zero parameters".into()));
        }
        let mut out: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= total);
        Ok(out)
    }

    pub fn categorical(&mut self, probs: &[f64]) -> Result<usize> {
        let total: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || !(total > 0.0) {
            return Err(Error::Domain(format!("categorical({probs:?})")));
        }
        Ok(self.pick(probs, total))
    }

    /// Categorical draw from unnormalized log weights.
    pub(crate) fn categorical_log(&mut self, log_weights: &[f64]) -> usize {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        debug_assert!(max.is_finite());
        let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
        let total = w.iter().sum();
        self.pick(&w, total)
    }

    fn pick(&mut self, weights: &[f64], total: f64) -> usize {
        let u = self.uniform() * total;
        let mut cum = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                cum += w;
                last = i;
                if u < cum {
                    return i;
                }
            }
        }
        last
    }
}

/// The distributions [`sample`] understands.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Dirichlet(Vec<f64>),
    Normal { mean: f64, var: f64 },
    ScaledInvChiSq { nu: f64, tau_sq: f64 },
    Categorical(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Draw {
    Scalar(f64),
    Vector(Vec<f64>),
    Index(usize),
}

pub fn sample(rng: &mut Rng, dist: &Dist) -> Result<Draw> {
    Ok(match dist {
        Dist::Dirichlet(alpha) => Draw::Vector(rng.dirichlet(alpha)?),
        Dist::Normal { mean, var } => Draw::Scalar(rng.normal(*mean, *var)?),
        Dist::ScaledInvChiSq { nu, tau_sq } => Draw::Scalar(rng.scaled_inv_chi_sq(*nu, *tau_sq)?),
        Dist::Categorical(p) => Draw::Index(rng.categorical(p)?),
    })
}
