//! Special functions and log-domain helpers.
//!
//! `digamma` and `log_gamma` shift the argument upward with the recurrence
//! until it reaches [`ASYMPTOTIC_CUTOFF`], then evaluate the asymptotic
//! series. Both are accurate to a few ulps over the whole positive axis.

use crate::error::{Error, Result};

const ASYMPTOTIC_CUTOFF: f64 = 8.0;

/// 0.5 * ln(2 pi)
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k - 1)) for k = 1..9, the Stirling series coefficients.
const STIRLING: [f64; 9] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43867.0 / 244_188.0,
];

// B_{2k} / (2k) for k = 1..9, the digamma asymptotic coefficients.
const DIGAMMA_SERIES: [f64; 9] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
    43867.0 / 14_364.0,
];

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires a finite positive argument, got {x}")))
    }
}

/// The digamma function psi(x) = d/dx ln Gamma(x), for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}

/// ln Gamma(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    Ok(log_gamma_unchecked(x))
}

/// Digamma without the domain check. Callers must guarantee `x > 0`.
pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma argument {x}");
    let mut shift = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut pow = inv2;
    for c in DIGAMMA_SERIES {
        series += c * pow;
        pow *= inv2;
    }
    x.ln() - 0.5 / x - series - shift
}

/// ln Gamma without the domain check. Callers must guarantee `x > 0`.
pub(crate) fn log_gamma_unchecked(mut x: f64) -> f64 {
    debug_assert!(x > 0.0, "log_gamma argument {x}");
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    // Accumulate the product x (x+1) ... in chunks to keep it in range.
    let mut log_shift = 0.0;
    let mut prod = 1.0;
    while x < ASYMPTOTIC_CUTOFF {
        prod *= x;
        x += 1.0;
        if prod < 1e-200 {
            log_shift += prod.ln();
            prod = 1.0;
        }
    }
    log_shift += prod.ln();
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING {
        series += c * pow;
        pow *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series - log_shift
}

/// ln sum exp(v_i), stable for any finite inputs. Entries equal to
/// negative infinity contribute nothing.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty list".into()));
    }
    Ok(log_sum_exp_slice(values))
}

pub(crate) fn log_sum_exp_slice(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// ln of the multivariate Beta function B(a) = prod Gamma(a_i) / Gamma(sum a_i).
/// Zero entries are skipped (structural zeros).
pub(crate) fn log_multi_beta(a: impl IntoIterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut acc = 0.0;
    for v in a {
        if v > 0.0 {
            acc += log_gamma_unchecked(v);
            total += v;
        }
    }
    acc - log_gamma_unchecked(total)
}

/// Index of the maximum, lowest index on ties. NaN entries are ignored.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Reference values from a 40-digit evaluation, frozen here.
    const DIGAMMA_REF: [(f64, f64); 9] = [
        (1e-3, -1_000.575_571_931_810_3),
        (0.1, -10.423_754_940_411_076),
        (0.5, -1.963_510_026_021_423_5),
        (2.5, 0.703_156_640_645_243_2),
        (7.0, 1.872_784_335_098_467_1),
        (10.5, 2.303_001_034_297_686_4),
        (100.0, 4.600_161_852_738_087),
        (1e5, 11.512_920_464_961_895),
        (1e6, 13.815_510_057_964_191),
    ];
    const LOG_GAMMA_REF: [(f64, f64); 8] = [
        (1e-3, 6.907_178_885_383_853_7),
        (0.1, 2.252_712_651_734_206),
        (0.5, 0.572_364_942_924_700_1),
        (2.5, 0.284_682_870_472_919_16),
        (7.0, 6.579_251_212_010_101),
        (100.0, 359.134_205_369_575_4),
        (1e5, 1_051_287.708_973_656_9),
        (1e6, 12_815_504.569_147_612),
    ];

    #[test]
    fn digamma_matches_reference() {
        for (x, want) in DIGAMMA_REF {
            let got = digamma(x).unwrap();
            assert!((got - want).abs() <= 1e-10, "digamma({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn digamma_at_one_is_minus_euler_gamma() {
        let got = digamma(1.0).unwrap();
        assert!((got + 0.577_215_664_901_532_9).abs() < 1e-14);
    }

    #[test]
    fn digamma_large_argument_approximation() {
        let d = digamma(1000.0).unwrap() - 999.5f64.ln();
        assert!(d.abs() < 1e-7, "{d}");
    }

    #[test]
    fn digamma_recurrence() {
        for x in [1.0, 2.5, 7.0] {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((d - 1.0 / x).abs() < 1e-12);
        }
    }

    #[test]
    fn log_gamma_matches_reference() {
        for (x, want) in LOG_GAMMA_REF {
            let got = log_gamma(x).unwrap();
            let tol = 1e-10 * want.abs().max(1.0);
            assert!((got - want).abs() <= tol, "log_gamma({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn log_gamma_half_integer_closed_form() {
        // Gamma(10.5) = 20! / (4^10 10!) sqrt(pi)
        let ln_fact = |n: u32| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
        let want = ln_fact(20) - 10.0 * 4f64.ln() - ln_fact(10) + 0.5 * std::f64::consts::PI.ln();
        assert!((log_gamma(10.5).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn log_gamma_integers_and_recurrence() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
        for x in [0.5, 3.0, 100.0] {
            let d = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap() - f64::ln(x);
            assert!(d.abs() < 1e-12, "x={x}: {d}");
        }
    }

    #[test]
    fn recurrences_on_grid() {
        for i in 0..1000 {
            let x = 0.01 + i as f64 * 0.05;
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            assert!(d.abs() < 1e-12 * (1.0 / x).max(1.0), "digamma x={x}: {d}");
            let g = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap() - x.ln();
            assert!(g.abs() < 1e-12 * log_gamma(x + 1.0).unwrap().abs().max(1.0), "lgamma x={x}: {g}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(f64::NAN).is_err());
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn log_sum_exp_basics() {
        let v = log_sum_exp(&[0.0, 0.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let v = log_sum_exp(&[-1000.0, -1000.0]).unwrap();
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[3.5, 3.5, 3.5]).unwrap(), 3.5 + 3f64.ln());
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        use rand::{Rng as _, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v: Vec<f64> = (0..10).map(|_| rng.random_range(-20.0..0.0)).collect();
            let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
            assert!((log_sum_exp(&v).unwrap() - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }
}
