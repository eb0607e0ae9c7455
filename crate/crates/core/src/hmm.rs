//! Dynamic programming over (pseudo-)HMMs: Viterbi, forward-backward,
//! PMAP decoding, backward sampling, and data generation.
//!
//! Everything here works on a [`PseudoHmm`], a table of log scores whose
//! transition rows and emission columns need not normalize. A concrete
//! [`HmmParams`] converts into one with [`HmmParams::pseudo`].
//!
//! States are 0-based internally. Files and reports print them 1-based.

use std::fmt;
use std::ops::Deref;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::numeric::{argmax, log_sum_exp_slice};
use crate::rng::Rng;

/// A state sequence over `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatePath(Vec<usize>);

impl StatePath {
    pub fn new(states: Vec<usize>, num_states: usize) -> Result<Self> {
        if let Some(&bad) = states.iter().find(|&&s| s >= num_states) {
            return Err(Error::Domain(format!("state {bad} out of range for K = {num_states}")));
        }
        Ok(Self(states))
    }

    /// Wraps states without a range check.
    pub fn from_vec(states: Vec<usize>) -> Self {
        Self(states)
    }

    pub fn constant(state: usize, len: usize) -> Self {
        Self(vec![state; len])
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [usize] {
        &mut self.0
    }
}

impl Deref for StatePath {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for StatePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", s + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEmission {
    pub mean: f64,
    pub var: f64,
}

impl NormalEmission {
    pub fn log_density(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (2.0 * std::f64::consts::PI * self.var).ln() - d * d / (2.0 * self.var)
    }
}

/// A concrete HMM with univariate Normal emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    pub initial: Vec<f64>,
    pub trans: Array2<f64>,
    pub emit: Vec<NormalEmission>,
}

pub(crate) fn check_stochastic(name: &str, row: ArrayView1<'_, f64>) -> Result<()> {
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Domain(format!("{name} has negative or non-finite entries")));
    }
    let s = row.sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

impl HmmParams {
    pub fn new(initial: Vec<f64>, trans: Array2<f64>, emit: Vec<NormalEmission>) -> Result<Self> {
        let k = initial.len();
        if k == 0 || trans.dim() != (k, k) || emit.len() != k {
            return Err(Error::Domain(format!(
                "inconsistent sizes: initial {k}, trans {:?}, emit {}",
                trans.dim(),
                emit.len()
            )));
        }
        check_stochastic("initial distribution", ArrayView1::from(&initial))?;
        for (l, row) in trans.axis_iter(Axis(0)).enumerate() {
            check_stochastic(&format!("transition row {}", l + 1), row)?;
        }
        if let Some(e) = emit.iter().find(|e| !(e.var > 0.0) || !e.mean.is_finite()) {
            return Err(Error::Domain(format!("invalid emission {e:?}")));
        }
        Ok(Self { initial, trans, emit })
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    /// Log-score tables for `obs`; every score is multiplied by `beta`.
    pub fn tempered_pseudo(&self, obs: &[f64], beta: f64) -> Result<PseudoHmm> {
        let k = self.num_states();
        let log_initial = self.initial.iter().map(|p| beta * p.ln()).collect();
        let log_trans = self.trans.mapv(|p| beta * p.ln());
        let mut log_emit = Array2::zeros((obs.len(), k));
        for (t, &x) in obs.iter().enumerate() {
            for (s, e) in self.emit.iter().enumerate() {
                log_emit[[t, s]] = beta * e.log_density(x);
            }
        }
        PseudoHmm::new(log_initial, log_trans, log_emit)
    }

    pub fn pseudo(&self, obs: &[f64]) -> Result<PseudoHmm> {
        self.tempered_pseudo(obs, 1.0)
    }
}

/// Log-domain scores: ln p0_k, ln u_lj and ln h_k(x_t).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoHmm {
    pub log_initial: Vec<f64>,
    pub log_trans: Array2<f64>,
    /// `n x K`
    pub log_emit: Array2<f64>,
}

fn check_scores(name: &str, row: ArrayView1<'_, f64>) -> Result<()> {
    if row.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Domain(format!("{name} contains NaN or +inf")));
    }
    if row.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::InfeasiblePath(format!("{name} has no finite entry")));
    }
    Ok(())
}

impl PseudoHmm {
    pub fn new(log_initial: Vec<f64>, log_trans: Array2<f64>, log_emit: Array2<f64>) -> Result<Self> {
        let k = log_initial.len();
        if k == 0 || log_trans.dim() != (k, k) || log_emit.ncols() != k {
            return Err(Error::Domain(format!(
                "inconsistent pseudo-HMM sizes: initial {k}, trans {:?}, emit {:?}",
                log_trans.dim(),
                log_emit.dim()
            )));
        }
        if log_emit.nrows() == 0 {
            return Err(Error::Domain("empty observation sequence".into()));
        }
        check_scores("initial scores", ArrayView1::from(&log_initial))?;
        for (l, row) in log_trans.axis_iter(Axis(0)).enumerate() {
            check_scores(&format!("transition row {}", l + 1), row)?;
        }
        for (t, row) in log_emit.axis_iter(Axis(0)).enumerate() {
            check_scores(&format!("emission scores at site {}", t + 1), row)?;
        }
        Ok(Self { log_initial, log_trans, log_emit })
    }

    pub fn num_states(&self) -> usize {
        self.log_initial.len()
    }

    pub fn len(&self) -> usize {
        self.log_emit.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ln p0_{y1} + sum ln h_{y_t}(x_t) + sum ln u_{y_t y_{t+1}}.
    pub fn path_score(&self, path: &[usize]) -> f64 {
        let mut s = self.log_initial[path[0]];
        for (t, &y) in path.iter().enumerate() {
            s += self.log_emit[[t, y]];
            if t > 0 {
                s += self.log_trans[[path[t - 1], y]];
            }
        }
        s
    }
}

/// Marginal posteriors of the path measure induced by a pseudo-HMM.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats {
    /// `n x K`, gamma_t(k) = P(Y_t = k | x)
    pub gamma: Array2<f64>,
    /// `K x K`, summed pair marginals over t < n
    pub xi: Array2<f64>,
    /// ln of the sum of exp(path score) over all paths
    pub log_evidence: f64,
}

/// The Viterbi path: the maximizer of [`PseudoHmm::path_score`]. Ties go to
/// the lowest state index at every backtracking step.
pub fn viterbi(pseudo: &PseudoHmm) -> Result<StatePath> {
    let n = pseudo.len();
    let k = pseudo.num_states();
    let lt = &pseudo.log_trans;
    let le = &pseudo.log_emit;
    let mut back = Array2::<usize>::zeros((n, k));
    let mut delta: Vec<f64> = (0..k).map(|s| pseudo.log_initial[s] + le[[0, s]]).collect();
    let mut next = vec![0.0; k];
    for t in 1..n {
        let m = delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Err(Error::InfeasiblePath(format!("every path is blocked by site {t}")));
        }
        delta.iter_mut().for_each(|d| *d -= m);
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (l, &d) in delta.iter().enumerate() {
                let v = d + lt[[l, j]];
                if v > best {
                    best = v;
                    arg = l;
                }
            }
            next[j] = best + le[[t, j]];
            back[[t, j]] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let last = argmax(&delta);
    if delta[last] == f64::NEG_INFINITY {
        return Err(Error::InfeasiblePath("every path has zero weight".into()));
    }
    let mut states = vec![0; n];
    states[n - 1] = last;
    for t in (1..n).rev() {
        states[t - 1] = back[[t, states[t]]];
    }
    Ok(StatePath(states))
}

/// Scaled forward pass in probability space.
///
/// Transition rows are normalized by their maxima and the row factor is
/// moved onto the emission of the source state, which leaves the path
/// measure unchanged; emissions are then shifted per site.
struct Forward {
    /// normalized filtering distributions, `n x K`
    alpha: Array2<f64>,
    trans: Array2<f64>,
    emit: Array2<f64>,
    log_c: Vec<f64>,
    log_shift: f64,
}

fn row_max(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Forward {
    fn run(p: &PseudoHmm) -> Option<Self> {
        let n = p.len();
        let k = p.num_states();
        let row_shift: Vec<f64> = p.log_trans.axis_iter(Axis(0)).map(row_max).collect();
        let trans = Array2::from_shape_fn((k, k), |(l, j)| (p.log_trans[[l, j]] - row_shift[l]).exp());
        let mut emit = Array2::zeros((n, k));
        let mut log_shift = 0.0;
        let mut buf = vec![0.0; k];
        for t in 0..n {
            for s in 0..k {
                buf[s] = p.log_emit[[t, s]] + if t + 1 < n { row_shift[s] } else { 0.0 };
                if t == 0 {
                    buf[s] += p.log_initial[s];
                }
            }
            let m = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !m.is_finite() {
                return None;
            }
            log_shift += m;
            for s in 0..k {
                emit[[t, s]] = (buf[s] - m).exp();
            }
        }
        let mut alpha = Array2::zeros((n, k));
        let mut log_c = Vec::with_capacity(n);
        for t in 0..n {
            let mut c = 0.0;
            for j in 0..k {
                let pred = if t == 0 {
                    1.0
                } else {
                    (0..k).map(|l| alpha[[t - 1, l]] * trans[[l, j]]).sum()
                };
                let a = pred * emit[[t, j]];
                alpha[[t, j]] = a;
                c += a;
            }
            if !(c > 0.0) || !c.is_finite() {
                return None;
            }
            alpha.row_mut(t).mapv_inplace(|a| a / c);
            log_c.push(c.ln());
        }
        Some(Self { alpha, trans, emit, log_c, log_shift })
    }

    fn log_evidence(&self) -> f64 {
        self.log_shift + self.log_c.iter().sum::<f64>()
    }
}

fn log_forward(p: &PseudoHmm) -> Array2<f64> {
    let n = p.len();
    let k = p.num_states();
    let mut la = Array2::from_elem((n, k), f64::NEG_INFINITY);
    let mut buf = vec![0.0; k];
    for s in 0..k {
        la[[0, s]] = p.log_initial[s] + p.log_emit[[0, s]];
    }
    for t in 1..n {
        for j in 0..k {
            for l in 0..k {
                buf[l] = la[[t - 1, l]] + p.log_trans[[l, j]];
            }
            la[[t, j]] = log_sum_exp_slice(&buf) + p.log_emit[[t, j]];
        }
    }
    la
}

fn log_backward(p: &PseudoHmm) -> Array2<f64> {
    let n = p.len();
    let k = p.num_states();
    let mut lb = Array2::zeros((n, k));
    let mut buf = vec![0.0; k];
    for t in (0..n - 1).rev() {
        for l in 0..k {
            for j in 0..k {
                buf[j] = p.log_trans[[l, j]] + p.log_emit[[t + 1, j]] + lb[[t + 1, j]];
            }
            lb[[t, l]] = log_sum_exp_slice(&buf);
        }
    }
    lb
}

fn infeasible() -> Error {
    Error::InfeasiblePath("the pseudo-HMM assigns zero weight to every path".into())
}

/// Posterior marginals gamma, summed pair marginals xi and the log
/// normalizing constant of the path measure.
pub fn forward_backward(pseudo: &PseudoHmm) -> Result<PosteriorStats> {
    match Forward::run(pseudo) {
        Some(fwd) => Ok(scaled_backward(pseudo, &fwd)),
        None => log_forward_backward(pseudo),
    }
}

fn scaled_backward(p: &PseudoHmm, fwd: &Forward) -> PosteriorStats {
    let n = p.len();
    let k = p.num_states();
    let mut gamma = Array2::zeros((n, k));
    let mut xi = Array2::zeros((k, k));
    let mut beta = vec![1.0; k];
    let mut prev = vec![0.0; k];
    let mut weighted = vec![0.0; k];
    gamma.row_mut(n - 1).assign(&fwd.alpha.row(n - 1));
    for t in (0..n - 1).rev() {
        let c_next = fwd.log_c[t + 1].exp();
        for j in 0..k {
            weighted[j] = fwd.emit[[t + 1, j]] * beta[j] / c_next;
        }
        for l in 0..k {
            let a = fwd.alpha[[t, l]];
            let mut b = 0.0;
            for j in 0..k {
                let w = fwd.trans[[l, j]] * weighted[j];
                b += w;
                xi[[l, j]] += a * w;
            }
            prev[l] = b;
        }
        std::mem::swap(&mut beta, &mut prev);
        let mut norm = 0.0;
        for l in 0..k {
            let g = fwd.alpha[[t, l]] * beta[l];
            gamma[[t, l]] = g;
            norm += g;
        }
        gamma.row_mut(t).mapv_inplace(|g| g / norm);
    }
    PosteriorStats { gamma, xi, log_evidence: fwd.log_evidence() }
}

fn log_forward_backward(p: &PseudoHmm) -> Result<PosteriorStats> {
    let n = p.len();
    let k = p.num_states();
    let la = log_forward(p);
    let log_z = log_sum_exp_slice(&la.row(n - 1).to_vec());
    if !log_z.is_finite() {
        return Err(infeasible());
    }
    let lb = log_backward(p);
    let gamma = Array2::from_shape_fn((n, k), |(t, s)| (la[[t, s]] + lb[[t, s]] - log_z).exp());
    let mut xi = Array2::zeros((k, k));
    for t in 0..n - 1 {
        for l in 0..k {
            for j in 0..k {
                let v = la[[t, l]] + p.log_trans[[l, j]] + p.log_emit[[t + 1, j]] + lb[[t + 1, j]] - log_z;
                xi[[l, j]] += v.exp();
            }
        }
    }
    Ok(PosteriorStats { gamma, xi, log_evidence: log_z })
}

/// Pointwise argmax of the marginals, lowest index on ties.
pub fn pmap_path(stats: &PosteriorStats) -> StatePath {
    StatePath(
        stats
            .gamma
            .axis_iter(Axis(0))
            .map(|row| argmax(&row.to_vec()))
            .collect(),
    )
}

/// Draws one path from the normalized path measure of `pseudo`
/// (forward filtering, backward sampling).
pub fn backward_sample(pseudo: &PseudoHmm, rng: &mut Rng) -> Result<StatePath> {
    let n = pseudo.len();
    let k = pseudo.num_states();
    let mut states = vec![0; n];
    let mut w = vec![0.0; k];
    if let Some(fwd) = Forward::run(pseudo) {
        states[n - 1] = rng.categorical(&fwd.alpha.row(n - 1).to_vec())?;
        for t in (0..n - 1).rev() {
            let next = states[t + 1];
            for (l, wl) in w.iter_mut().enumerate() {
                *wl = fwd.alpha[[t, l]] * fwd.trans[[l, next]];
            }
            states[t] = rng.categorical(&w)?;
        }
    } else {
        let la = log_forward(pseudo);
        let last: Vec<f64> = la.row(n - 1).to_vec();
        if !log_sum_exp_slice(&last).is_finite() {
            return Err(infeasible());
        }
        states[n - 1] = rng.categorical_log(&last);
        for t in (0..n - 1).rev() {
            let next = states[t + 1];
            for l in 0..k {
                w[l] = la[[t, l]] + pseudo.log_trans[[l, next]];
            }
            states[t] = rng.categorical_log(&w);
        }
    }
    Ok(StatePath(states))
}

/// Simulates `n` steps of the chain and Normal observations along it.
pub fn generate_data(params: &HmmParams, n: usize, rng: &mut Rng) -> Result<(Vec<f64>, StatePath)> {
    let mut states: Vec<usize> = Vec::with_capacity(n);
    let mut obs = Vec::with_capacity(n);
    let rows: Vec<Vec<f64>> = params.trans.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    for t in 0..n {
        let s = if t == 0 {
            rng.categorical(&params.initial)?
        } else {
            rng.categorical(&rows[states[t - 1]])?
        };
        let e = params.emit[s];
        obs.push(rng.normal(e.mean, e.var)?);
        states.push(s);
    }
    Ok((obs, StatePath(states)))
}
