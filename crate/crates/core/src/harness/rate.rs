//! Least-squares fit of `ln(residual)` against iteration.

use crate::error::HarnessError;
use crate::solvers::TracePoint;

pub const DEFAULT_BURN_IN: f64 = 0.2;
pub const DEFAULT_MIN_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateOptions {
    /// Fraction of the logged points dropped from the front.
    pub burn_in: f64,
    /// Minimum number of points left to fit.
    pub min_points: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            burn_in: DEFAULT_BURN_IN,
            min_points: DEFAULT_MIN_POINTS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Slope of `ln(residual)` per iteration.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// The residual reached exactly zero; only the positive prefix was fitted.
    pub hit_zero: bool,
}

impl RateFit {
    /// Per-iteration contraction factor `exp(slope)`.
    pub fn factor(&self) -> f64 {
        self.slope.exp()
    }
}

pub fn fit_rate(points: &[TracePoint], opts: &RateOptions) -> Result<RateFit, HarnessError> {
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(HarnessError::Fit(format!("burn-in {} must lie in [0, 1)", opts.burn_in)));
    }
    let min_points = opts.min_points.max(2);
    let zero_at = points.iter().position(|p| p.residual <= 0.0);
    let prefix = &points[..zero_at.unwrap_or(points.len())];
    let skip = (opts.burn_in * prefix.len() as f64).floor() as usize;
    let window = &prefix[skip..];
    if window.len() < min_points {
        return Err(HarnessError::Fit(format!(
            "{} positive points after burn-in, need at least {min_points}",
            window.len()
        )));
    }
    let xs: Vec<f64> = window.iter().map(|p| p.iteration as f64).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.residual.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Fit("all points share one iteration".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points_used: window.len(),
        hit_zero: zero_at.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(res: &[f64]) -> Vec<TracePoint> {
        res.iter()
            .enumerate()
            .map(|(i, &r)| TracePoint {
                iteration: i,
                elapsed_seconds: 0.0,
                residual: r,
            })
            .collect()
    }

    #[test]
    fn exact_geometric_four_points() {
        let opts = RateOptions {
            min_points: 2,
            ..RateOptions::default()
        };
        let fit = fit_rate(&pts(&[1.0, 0.5, 0.25, 0.125]), &opts).unwrap();
        assert!((fit.slope - 0.5f64.ln()).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
        assert!(!fit.hit_zero);
    }

    #[test]
    fn constant_residual_has_zero_slope() {
        let fit = fit_rate(&pts(&[2.0; 12]), &RateOptions::default()).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn zero_residual_truncates_and_flags() {
        let mut r: Vec<f64> = (0..15).map(|k| 0.9f64.powi(k)).collect();
        r.extend([0.0, 0.0]);
        let fit = fit_rate(&pts(&r), &RateOptions { burn_in: 0.0, min_points: 10 }).unwrap();
        assert!(fit.hit_zero);
        assert_eq!(fit.points_used, 15);
        assert!((fit.slope - 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn burn_in_drops_front() {
        let mut r = vec![100.0, 50.0];
        r.extend((0..10).map(|k| 0.8f64.powi(k)));
        let fit = fit_rate(&pts(&r), &RateOptions { burn_in: 0.2, min_points: 10 }).unwrap();
        assert_eq!(fit.points_used, 10);
        assert!((fit.slope - 0.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_rate(&pts(&[1.0, 0.5, 0.25]), &RateOptions::default()).is_err());
        assert!(fit_rate(&pts(&[0.0; 20]), &RateOptions::default()).is_err());
        assert!(fit_rate(&pts(&[1.0; 20]), &RateOptions { burn_in: 1.0, min_points: 2 }).is_err());
    }
}
