//! Prediction error metrics and network-performance rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::oracle::EXPOSURE_LIMIT_DBUV;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// RSS coverage threshold (dBm).
    pub phi_dbm: f64,
    /// Exposure threshold (dBµV/m).
    pub gamma_dbuv: f64,
    /// Minimum compliant fraction for a placement to earn its coverage reward.
    pub lambda_er: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            phi_dbm: -110.0,
            gamma_dbuv: 70.0,
            lambda_er: 0.90,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_er > 0.0 && self.lambda_er <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda_er {} must lie in (0, 1]",
                self.lambda_er
            )));
        }
        if !(self.gamma_dbuv < EXPOSURE_LIMIT_DBUV) {
            return Err(Error::InvalidConfig(format!(
                "exposure threshold {} dBuV/m is not below the 6 V/m limit ({EXPOSURE_LIMIT_DBUV:.1} dBuV/m)",
                self.gamma_dbuv
            )));
        }
        if !self.phi_dbm.is_finite() && self.phi_dbm != f64::NEG_INFINITY {
            return Err(Error::InvalidConfig("phi must be finite or -inf".into()));
        }
        Ok(())
    }
}

fn check_shapes(a: &Grid<f64>, b: &Grid<f64>, mask: &Mask) -> Result<()> {
    if a.size() != b.size() || a.size() != mask.size() {
        return Err(Error::shape(
            a.size(),
            format!("{} / mask {}", b.size(), mask.size()),
        ));
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

fn masked_errors<'a>(
    reference: &'a Grid<f64>,
    pred: &'a Grid<f64>,
    mask: &'a Mask,
) -> impl Iterator<Item = f64> + 'a {
    reference
        .iter()
        .zip(pred.iter())
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|((r, p), _)| p - r)
}

pub fn mae(reference: &Grid<f64>, pred: &Grid<f64>, mask: &Mask) -> Result<f64> {
    check_shapes(reference, pred, mask)?;
    let n = mask.count() as f64;
    Ok(masked_errors(reference, pred, mask)
        .map(f64::abs)
        .sum::<f64>()
        / n)
}

pub fn rmse(reference: &Grid<f64>, pred: &Grid<f64>, mask: &Mask) -> Result<f64> {
    check_shapes(reference, pred, mask)?;
    let n = mask.count() as f64;
    Ok((masked_errors(reference, pred, mask)
        .map(|e| e * e)
        .sum::<f64>()
        / n)
        .sqrt())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g1: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let mut w: Vec<f64> = g1
        .iter()
        .flat_map(|a| g1.iter().map(move |b| a * b))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean SSIM over all fully contained Gaussian windows (11×11, σ = 1.5;
/// smaller grids use one window of the grid's size).
pub fn ssim(x: &Grid<f64>, y: &Grid<f64>, dynamic_range: f64) -> Result<f64> {
    if x.size() != y.size() {
        return Err(Error::shape(x.size(), y.size()));
    }
    if !(dynamic_range > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "dynamic range {dynamic_range} must be > 0"
        )));
    }
    let n = x.size();
    let win = SSIM_WINDOW.min(n);
    let w = gaussian_window(win, SSIM_SIGMA);
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let mut total = 0.0;
    let mut count = 0usize;
    for i0 in 0..=n - win {
        for j0 in 0..=n - win {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for a in 0..win {
                for b in 0..win {
                    let k = (i0 + a) * n + j0 + b;
                    let wt = w[a * win + b];
                    mx += wt * xs[k];
                    my += wt * ys[k];
                    sxx += wt * xs[k] * xs[k];
                    syy += wt * ys[k] * ys[k];
                    sxy += wt * xs[k] * ys[k];
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// `C(i,j) = 1` iff `rss ≥ φ`.
pub fn coverage_indicator(rss_dbm: &Grid<f64>, phi_dbm: f64) -> Mask {
    rss_dbm.map(|&v| v >= phi_dbm)
}

/// `U(i,j) = 1` iff `exposure ≤ γ`.
pub fn exposure_indicator(exposure_dbuv: &Grid<f64>, gamma_dbuv: f64) -> Mask {
    exposure_dbuv.map(|&v| v <= gamma_dbuv)
}

fn masked_rate(indicator: &Mask, mask: &Mask) -> Result<f64> {
    if indicator.size() != mask.size() {
        return Err(Error::shape(mask.size(), indicator.size()));
    }
    let total = mask.count();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let hits = indicator
        .iter()
        .zip(mask.iter())
        .filter(|(&c, &m)| c && m)
        .count();
    Ok(hits as f64 / total as f64)
}

/// Fraction of masked pixels with RSS at or above `phi_dbm`.
pub fn coverage_rate(rss_dbm: &Grid<f64>, mask: &Mask, phi_dbm: f64) -> Result<f64> {
    masked_rate(&coverage_indicator(rss_dbm, phi_dbm), mask)
}

/// Fraction of masked pixels with exposure at or below `gamma_dbuv`.
pub fn exposure_rate(exposure_dbuv: &Grid<f64>, mask: &Mask, gamma_dbuv: f64) -> Result<f64> {
    masked_rate(&exposure_indicator(exposure_dbuv, gamma_dbuv), mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(n: usize) -> Mask {
        Grid::filled(n, true)
    }

    #[test]
    fn mae_rmse_cases() {
        let r = Grid::filled(4, -90.0);
        assert_eq!(mae(&r, &r, &all(4)).unwrap(), 0.0);
        assert_eq!(rmse(&r, &r, &all(4)).unwrap(), 0.0);
        let p = r.map(|v| v + 2.0);
        assert_eq!(mae(&r, &p, &all(4)).unwrap(), 2.0);
        assert_eq!(rmse(&r, &p, &all(4)).unwrap(), 2.0);

        let mut mask = Grid::filled(4, false);
        mask[(0, 0)] = true;
        mask[(2, 3)] = true;
        let mut q = r.clone();
        q[(0, 0)] += 3.0;
        q[(2, 3)] -= 1.0;
        q[(1, 1)] += 100.0; // outside the mask
        assert!((mae(&r, &q, &mask).unwrap() - 2.0).abs() < 1e-12);
        assert!((rmse(&r, &q, &mask).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            mae(&r, &q, &Grid::filled(4, false)),
            Err(Error::EmptyMask)
        ));
        assert!(mae(&r, &Grid::filled(8, 0.0), &all(4)).is_err());
    }

    #[test]
    fn ssim_identity_symmetry_and_constants() {
        let x = Grid::from_fn(32, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let y = Grid::from_fn(32, |i, j| ((i * 5 + j) % 13) as f64);
        assert!((ssim(&x, &x, 10.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((ssim(&x, &y, 10.0).unwrap() - ssim(&y, &x, 10.0).unwrap()).abs() < 1e-12);
        let l = 86.8;
        let zero = Grid::filled(32, 0.0);
        let top = Grid::filled(32, l);
        let c1 = (0.01 * l) * (0.01 * l);
        let expected = c1 / (l * l + c1);
        assert!((ssim(&zero, &top, l).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 1.0e-4).abs() < 1e-7);
        assert!(ssim(&x, &y, 0.0).is_err());
    }

    #[test]
    fn rates() {
        let rss = Grid::filled(4, -100.0);
        assert_eq!(coverage_rate(&rss, &all(4), -110.0).unwrap(), 1.0);
        let half = Grid::from_fn(4, |i, _| if i < 2 { -100.0 } else { -120.0 });
        assert_eq!(coverage_rate(&half, &all(4), -110.0).unwrap(), 0.5);
        let edge = Grid::filled(4, -110.0);
        assert_eq!(coverage_rate(&edge, &all(4), -110.0).unwrap(), 1.0);
        let exp = Grid::filled(4, 70.0);
        assert_eq!(exposure_rate(&exp, &all(4), 70.0).unwrap(), 1.0);
        assert!(matches!(
            coverage_rate(&rss, &Grid::filled(4, false), -110.0),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::default().validate().is_ok());
        assert!(Thresholds {
            lambda_er: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Thresholds {
            lambda_er: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Thresholds {
            gamma_dbuv: 140.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
