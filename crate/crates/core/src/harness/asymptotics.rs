//! Low-error-rate scaling of the matching decoder's logical failure rate.
//!
//! For odd d the leading failures are ⌈d/2⌉ flips on one of the 2d straight
//! non-contractible loops, giving `p_L ≈ 2d·C(d, ⌈d/2⌉)·p^⌈d/2⌉`.

use serde::{Deserialize, Serialize};

use super::sweep::{point_seed, run_point, Decoder};
use crate::error::{Error, Result};
use crate::lattice::CodeDistance;
use crate::stats::ols_slope;

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Leading-order coefficient and exponent for odd d.
pub fn prediction_terms(d: CodeDistance) -> (f64, i32) {
    let d = d.get() as u64;
    let h = d.div_ceil(2);
    ((2 * d) as f64 * binomial(d, h) as f64, h as i32)
}

pub fn predicted_fail_rate(d: CodeDistance, p: f64) -> f64 {
    let (c, e) = prediction_terms(d);
    c * p.powi(e)
}

/// Even-d counterpart `d·C(d, d/2)·p^(d/2)`, for reference only.
pub fn predicted_fail_rate_even(d: usize, p: f64) -> Result<f64> {
    if d < 2 || d % 2 == 1 {
        return Err(Error::InvalidArgument(format!("{d} is not an even distance")));
    }
    Ok(d as f64 * binomial(d as u64, d as u64 / 2) as f64 * p.powi(d as i32 / 2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPoint {
    pub p: f64,
    pub samples: u64,
    pub failures: u64,
    pub fail_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub prediction: f64,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub d: usize,
    pub coefficient: f64,
    pub exponent: i32,
    pub points: Vec<AsymptoticPoint>,
    /// Least-squares slope of ln p_L against ln p over points with failures.
    pub slope: Option<f64>,
    /// Measured-over-predicted ratio at the smallest p.
    pub smallest_p_ratio: Option<f64>,
}

/// Monte Carlo failure rates of the matching decoder at each `p`, with
/// `samples[i]` trials at `error_rates[i]` (a single count applies to all).
pub fn asymptotic_check(d: CodeDistance, error_rates: &[f64], samples: &[u64], seed: u64, workers: usize) -> Result<AsymptoticReport> {
    if samples.len() != 1 && samples.len() != error_rates.len() {
        return Err(Error::InvalidArgument("give one sample count or one per error rate".into()));
    }
    let (coefficient, exponent) = prediction_terms(d);
    let mut points = Vec::with_capacity(error_rates.len());
    for (i, &p) in error_rates.iter().enumerate() {
        let n = samples[if samples.len() == 1 { 0 } else { i }];
        let s = point_seed(seed, d.get(), p);
        let row = run_point(&Decoder::Mwpm, d, p, n, s, workers)?;
        let prediction = predicted_fail_rate(d, p);
        points.push(AsymptoticPoint {
            p,
            samples: n,
            failures: row.fails,
            fail_rate: row.fail_rate,
            ci_low: 1.0 - row.ci_high,
            ci_high: 1.0 - row.ci_low,
            prediction,
            ratio: row.fail_rate / prediction,
            seed: s,
        });
    }
    let fitted: Vec<&AsymptoticPoint> = points.iter().filter(|q| q.failures > 0).collect();
    let slope = ols_slope(
        &fitted.iter().map(|q| q.p.ln()).collect::<Vec<_>>(),
        &fitted.iter().map(|q| q.fail_rate.ln()).collect::<Vec<_>>(),
    );
    let smallest_p_ratio = points
        .iter()
        .min_by(|a, b| a.p.total_cmp(&b.p))
        .map(|q| q.ratio);
    Ok(AsymptoticReport {
        d: d.get(),
        coefficient,
        exponent,
        points,
        slope,
        smallest_p_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_coefficients() {
        let c = |d| prediction_terms(CodeDistance::new(d).unwrap());
        assert_eq!(c(3), (18.0, 2));
        assert_eq!(c(5), (100.0, 3));
        assert_eq!(c(7), (490.0, 4));
        assert!((predicted_fail_rate_even(4, 0.1).unwrap() - 0.24).abs() < 1e-15);
        assert!(predicted_fail_rate_even(5, 0.1).is_err());
        assert_eq!(binomial(30, 15), 155_117_520);
    }

    #[test]
    fn small_check_reports_every_point() {
        let r = asymptotic_check(CodeDistance::new(3).unwrap(), &[0.05, 0.1], &[2000], 3, 1).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points.iter().all(|q| q.samples == 2000));
        assert!(r.slope.is_some());
        assert_eq!(r.smallest_p_ratio, Some(r.points[0].ratio));
    }
}
