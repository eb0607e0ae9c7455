use ndarray::Array2;

use crate::error::{Error, Result};

/// Sufficient statistics of a path and the observations along it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    /// n_lj, transitions from l to j
    pub counts: Array2<usize>,
    /// n_l = sum_j n_lj
    pub row_totals: Vec<usize>,
    /// m_k, number of sites in state k
    pub occupancy: Vec<usize>,
    /// sum of x_t over sites in state k
    pub sum: Vec<f64>,
    /// sum of x_t^2 over sites in state k
    pub sumsq: Vec<f64>,
    pub first_state: usize,
    pub len: usize,
}

impl PathStats {
    pub fn num_states(&self) -> usize {
        self.occupancy.len()
    }

    pub fn mean(&self, k: usize) -> Option<f64> {
        (self.occupancy[k] > 0).then(|| self.sum[k] / self.occupancy[k] as f64)
    }

    /// sum (x_t - mean)^2 over state k; zero for m_k <= 1.
    pub fn scatter(&self, k: usize) -> f64 {
        let m = self.occupancy[k];
        if m <= 1 {
            return 0.0;
        }
        (self.sumsq[k] - self.sum[k] * self.sum[k] / m as f64).max(0.0)
    }

    pub(crate) fn add_obs(&mut self, k: usize, x: f64) {
        self.occupancy[k] += 1;
        self.sum[k] += x;
        self.sumsq[k] += x * x;
    }

    pub(crate) fn remove_obs(&mut self, k: usize, x: f64) {
        self.occupancy[k] -= 1;
        if self.occupancy[k] == 0 {
            self.sum[k] = 0.0;
            self.sumsq[k] = 0.0;
        } else {
            self.sum[k] -= x;
            self.sumsq[k] -= x * x;
        }
    }

    pub(crate) fn add_transition(&mut self, l: usize, j: usize) {
        self.counts[[l, j]] += 1;
        self.row_totals[l] += 1;
    }

    pub(crate) fn remove_transition(&mut self, l: usize, j: usize) {
        self.counts[[l, j]] -= 1;
        self.row_totals[l] -= 1;
    }

    /// Counts as reals, for code shared with expected counts.
    pub fn counts_f64(&self) -> Array2<f64> {
        self.counts.mapv(|c| c as f64)
    }
}

/// Transition counts and per-state moment sums of `path` over `obs`.
pub fn path_stats(path: &[usize], obs: &[f64], num_states: usize) -> Result<PathStats> {
    if path.len() != obs.len() {
        return Err(Error::LengthMismatch(path.len(), obs.len()));
    }
    if path.is_empty() {
        return Err(Error::Domain("empty path".into()));
    }
    if let Some(&s) = path.iter().find(|&&s| s >= num_states) {
        return Err(Error::Domain(format!("state {s} out of range for K = {num_states}")));
    }
    let k = num_states;
    let mut stats = PathStats {
        counts: Array2::zeros((k, k)),
        row_totals: vec![0; k],
        occupancy: vec![0; k],
        sum: vec![0.0; k],
        sumsq: vec![0.0; k],
        first_state: path[0],
        len: path.len(),
    };
    for (t, (&y, &x)) in path.iter().zip(obs).enumerate() {
        stats.add_obs(y, x);
        if t > 0 {
            stats.add_transition(path[t - 1], y);
        }
    }
    Ok(stats)
}
