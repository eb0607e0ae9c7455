//! Full comparison sweep: every method from every initial path on every
//! dataset and hyperparameter cell.
//!
//! Work items are independent and run in parallel; each draws from its own
//! stream derived from the configured seeds and its grid coordinates, and
//! rows are assembled in grid order, so the output is a pure function of
//! the configuration.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::data::Dataset;
use super::init::{generate_initial_sequences, InitialSequences};
use super::oracle::compare_paths;
use crate::error::Result;
use crate::hmm::{generate_data, StatePath};
use crate::model::DirichletPrior;
use crate::rng::Rng;
use crate::segment::{run_method, Method, Problem};

/// Outcome of one method on one dataset and hyperparameter cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: usize,
    pub q: String,
    pub precision: f64,
    pub method: Method,
    /// `None` when every run failed (an `na` cell).
    pub best_score: Option<f64>,
    pub best_path: Option<StatePath>,
    /// Number of distinct output paths; never exceeds the number of inits.
    pub distinct_outputs: usize,
    /// Final `ln p(x, y)` per initial path, `None` for a failed run.
    pub init_scores: Vec<Option<f64>>,
    /// Hamming distance from `best_path` to the best path of the cell
    /// across all methods.
    pub hamming_to_best: Option<usize>,
    /// Failure reasons and stationary-distribution fallbacks.
    pub note: String,
    /// Not written to any CSV, which must be reproducible byte for byte.
    pub wall_time: Duration,
}

/// Simulated datasets, one stream per replication.
pub fn simulate_datasets(cfg: &ExperimentConfig) -> Result<Vec<Dataset>> {
    let truth = cfg.truth_params()?;
    let root = Rng::new(cfg.seeds.data);
    (0..cfg.replications)
        .map(|d| {
            let mut rng = root.split(d as u64);
            let (obs, states) = generate_data(&truth, cfg.n, &mut rng)?;
            Ok(Dataset { obs, states, num_states: truth.num_states(), seed: rng.seed() })
        })
        .collect()
}

/// Initial paths for dataset `d` and grid entry `g`.
pub fn initial_sequences(cfg: &ExperimentConfig, d: usize, g: usize, obs: &[f64]) -> Result<InitialSequences> {
    let truth = cfg.truth_params()?;
    let k = truth.num_states();
    let standard: Vec<_> = ["Q1", "Q2", "Q3"]
        .into_iter()
        .map(|q| cfg.base_matrix(&super::config::GridEntry { q: q.into(), matrix: None, precisions: vec![] }))
        .collect::<Result<_>>()?;
    debug_assert!(standard.iter().all(|m| m.dim() == (k, k)));
    let q = cfg.base_matrix(&cfg.grid[g])?;
    generate_initial_sequences(
        &truth,
        &standard,
        &cfg.init.dirichlet_alphas,
        cfg.init.realizations,
        &q,
        obs,
        &Rng::new(cfg.seeds.init).split(d as u64),
    )
}

struct Item {
    dataset: usize,
    grid: usize,
    precision_index: usize,
    method_index: usize,
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let mode = cfg.emission_mode()?;
    let initial = cfg.truth.initial.clone();
    let datasets = simulate_datasets(cfg)?;
    let inits: Vec<Vec<InitialSequences>> = datasets
        .iter()
        .enumerate()
        .map(|(d, ds)| (0..cfg.grid.len()).map(|g| initial_sequences(cfg, d, g, &ds.obs)).collect())
        .collect::<Result<_>>()?;
    let mut items = Vec::new();
    for dataset in 0..datasets.len() {
        for (grid, entry) in cfg.grid.iter().enumerate() {
            for precision_index in 0..entry.precisions.len() {
                for method_index in 0..methods.len() {
                    items.push(Item { dataset, grid, precision_index, method_index });
                }
            }
        }
    }
    let sa_root = Rng::new(cfg.seeds.sa);
    let mut rows: Vec<ResultRow> = items
        .par_iter()
        .map(|it| -> Result<ResultRow> {
            let entry = &cfg.grid[it.grid];
            let precision = entry.precisions[it.precision_index];
            let prior = DirichletPrior::new(precision, cfg.base_matrix(entry)?)?;
            let obs = &datasets[it.dataset].obs;
            let problem = Problem::new(obs, &prior, &mode, &initial)?;
            let method = methods[it.method_index];
            let seqs = &inits[it.dataset][it.grid];
            let seed = sa_root
                .split_path(&[it.dataset as u64, it.grid as u64, it.precision_index as u64, it.method_index as u64])
                .seed();
            Ok(run_cell(&problem, method, seqs, &cfg.segmenter_config(seed)?, it.dataset, &entry.q, precision))
        })
        .collect::<Result<_>>()?;
    mark_hamming(&mut rows);
    Ok(rows)
}

fn run_cell(
    problem: &Problem<'_>,
    method: Method,
    seqs: &InitialSequences,
    seg: &crate::segment::SegmenterConfig,
    dataset: usize,
    q: &str,
    precision: f64,
) -> ResultRow {
    let start = Instant::now();
    // Annealing is run once, from the Viterbi path under the base matrix.
    let chosen: Vec<usize> = if method == Method::Sa { vec![seqs.viterbi_index] } else { (0..seqs.paths.len()).collect() };
    let mut init_scores = Vec::with_capacity(chosen.len());
    let mut outputs = HashSet::new();
    let mut best: Option<(StatePath, f64)> = None;
    let mut errors: Vec<String> = Vec::new();
    for &i in &chosen {
        match run_method(method, problem, &seqs.paths[i], seg) {
            Ok(trace) => {
                let s = trace.final_score;
                init_scores.push(Some(s));
                let better = match &best {
                    None => true,
                    Some((bp, bs)) => s > *bs || (s == *bs && trace.path < *bp),
                };
                if better {
                    best = Some((trace.path.clone(), s));
                }
                outputs.insert(trace.path);
            }
            Err(e) => {
                init_scores.push(None);
                errors.push(e.to_string());
            }
        }
    }
    let mut notes = Vec::new();
    if let Some(first) = errors.first() {
        notes.push(format!("{} of {} runs failed: {first}", errors.len(), chosen.len()));
    }
    let fallback: Vec<usize> = chosen.iter().copied().filter(|i| seqs.fallback.contains(i)).collect();
    if !fallback.is_empty() {
        notes.push(format!("uniform start for inits {fallback:?}"));
    }
    let (best_path, best_score) = best.map_or((None, None), |(p, s)| (Some(p), Some(s)));
    ResultRow {
        dataset,
        q: q.to_string(),
        precision,
        method,
        best_score,
        best_path,
        distinct_outputs: outputs.len(),
        init_scores,
        hamming_to_best: None,
        note: notes.join("; "),
        wall_time: start.elapsed(),
    }
}

/// Fills `hamming_to_best` within each (dataset, Q, M) group of consecutive rows.
fn mark_hamming(rows: &mut [ResultRow]) {
    let key = |r: &ResultRow| (r.dataset, r.q.clone(), r.precision.to_bits());
    let mut start = 0;
    while start < rows.len() {
        let k = key(&rows[start]);
        let end = start + rows[start..].iter().take_while(|r| key(r) == k).count();
        let mut top: Option<(StatePath, f64)> = None;
        for r in &rows[start..end] {
            if let (Some(p), Some(s)) = (&r.best_path, r.best_score) {
                if top.as_ref().is_none_or(|(tp, ts)| s > *ts || (s == *ts && p < tp)) {
                    top = Some((p.clone(), s));
                }
            }
        }
        if let Some((tp, _)) = top {
            for r in &mut rows[start..end] {
                r.hamming_to_best = r.best_path.as_ref().map(|p| compare_paths(p, &tp).expect("equal lengths"));
            }
        }
        start = end;
    }
}

/// Winner/loser counts for one method in one (Q, M) cell across datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct WinLoss {
    pub q: String,
    pub precision: f64,
    pub method: Method,
    pub wins: usize,
    pub losses: usize,
    /// Datasets on which the method was compared.
    pub cells: usize,
}

/// Among `compared`, a method wins a dataset when its best score is within
/// `tol` of the maximum and loses when within `tol` of the minimum, unless
/// all compared scores lie within `tol` of each other. Methods with no
/// score on a dataset are left out of that comparison.
pub fn win_loss(rows: &[ResultRow], compared: &[Method], tol: f64) -> Vec<WinLoss> {
    let mut cells: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !cells.iter().any(|(q, m)| *q == r.q && *m == r.precision) {
            cells.push((r.q.clone(), r.precision));
        }
    }
    let mut out = Vec::new();
    for (q, m) in cells {
        let in_cell: Vec<&ResultRow> =
            rows.iter().filter(|r| r.q == q && r.precision == m && compared.contains(&r.method)).collect();
        let mut tallies: Vec<WinLoss> = compared
            .iter()
            .filter(|meth| in_cell.iter().any(|r| r.method == **meth))
            .map(|&method| WinLoss { q: q.clone(), precision: m, method, wins: 0, losses: 0, cells: 0 })
            .collect();
        let mut datasets: Vec<usize> = in_cell.iter().map(|r| r.dataset).collect();
        datasets.dedup();
        for d in datasets {
            let scored: Vec<(Method, f64)> =
                in_cell.iter().filter(|r| r.dataset == d).filter_map(|r| r.best_score.map(|s| (r.method, s))).collect();
            if scored.len() < 2 {
                continue;
            }
            let hi = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            let lo = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            for (meth, s) in scored {
                let t = tallies.iter_mut().find(|t| t.method == meth).expect("method tallied");
                t.cells += 1;
                if hi - lo > tol {
                    t.wins += usize::from(s >= hi - tol);
                    t.losses += usize::from(s <= lo + tol);
                } else {
                    t.wins += 1;
                }
            }
        }
        out.extend(tallies);
    }
    out
}
