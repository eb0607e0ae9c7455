//! Plain-text datasets: a `# n=<n> K=<K> seed=<seed>` header followed by
//! one `x,y` line per observation, `y` 1-based, `x` with 17 significant
//! digits so that a write/read round trip is exact.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hmm::StatePath;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub obs: Vec<f64>,
    pub states: StatePath,
    pub num_states: usize,
    pub seed: u64,
}

impl Dataset {
    pub fn to_text(&self) -> String {
        let mut out = format!("# n={} K={} seed={}\n", self.obs.len(), self.num_states, self.seed);
        for (x, &y) in self.obs.iter().zip(self.states.iter()) {
            writeln!(out, "{x:.16e},{}", y + 1).expect("writing to a String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty dataset".into()))?;
        let body = header.strip_prefix('#').ok_or_else(|| perr(hl, "missing '#' header".into()))?;
        let (mut n, mut k, mut seed) = (None, None, None);
        for field in body.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| perr(hl, format!("bad header field {field:?}")))?;
            let bad = |_| perr(hl, format!("bad value in {field:?}"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(bad)?),
                "K" => k = Some(value.parse::<usize>().map_err(bad)?),
                "seed" => seed = Some(value.parse::<u64>().map_err(bad)?),
                _ => return Err(perr(hl, format!("unknown header key {key:?}"))),
            }
        }
        let (n, k, seed) = match (n, k, seed) {
            (Some(n), Some(k), Some(s)) if k > 0 => (n, k, s),
            _ => return Err(perr(hl, "header needs n, K > 0 and seed".into())),
        };
        let mut obs = Vec::with_capacity(n.min(1 << 20));
        let mut states = Vec::with_capacity(n.min(1 << 20));
        for (ln, line) in lines {
            let (x, y) = line.split_once(',').ok_or_else(|| perr(ln, "expected 'x,y'".into()))?;
            let x: f64 = x.trim().parse().map_err(|_| perr(ln, format!("bad observation {x:?}")))?;
            if !x.is_finite() {
                return Err(perr(ln, "non-finite observation".into()));
            }
            let y: usize = y.trim().parse().map_err(|_| perr(ln, format!("bad state {y:?}")))?;
            if y == 0 || y > k {
                return Err(perr(ln, format!("state {y} outside 1..={k}")));
            }
            obs.push(x);
            states.push(y - 1);
        }
        if obs.len() != n {
            return Err(Error::LengthMismatch(n, obs.len()));
        }
        Ok(Self { obs, states: StatePath::from_vec(states), num_states: k, seed })
    }
}
