//! Ensemble diagnostics: normalized variance, autocorrelation, decorrelation
//! time and leading-order variance predictions for i.i.d. sequences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Real;

pub fn mean<S: Real>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::nan();
    }
    xs.iter().copied().sum::<S>() / S::from_len(xs.len())
}

/// Unbiased sample variance.
pub fn sample_variance<S: Real>(xs: &[S]) -> Result<S> {
    if xs.len() < 2 {
        return Err(Error::Argument(format!(
            "variance needs at least 2 values, got {}",
            xs.len()
        )));
    }
    let m = mean(xs);
    let ss: S = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    Ok(ss / S::from_len(xs.len() - 1))
}

/// `M · Var(mean)` for per-replica summands, i.e. their sample variance.
pub fn normalized_variance<S: Real>(summands: &[S]) -> Result<S> {
    sample_variance(summands)
}

/// Standard error of the mean, `sd / √M`.
pub fn standard_error<S: Real>(summands: &[S]) -> Result<S> {
    Ok((sample_variance(summands)? / S::from_len(summands.len())).sqrt())
}

/// Biased autocorrelation estimator for lags `0..=max_lag`.
pub fn acf<S: Real>(series: &[S], max_lag: usize) -> Result<Vec<S>> {
    if series.len() <= max_lag {
        return Err(Error::Argument(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let m = mean(series);
    let centered: Vec<S> = series.iter().map(|&x| x - m).collect();
    let c0: S = centered.iter().map(|&x| x * x).sum();
    if !(c0 > S::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|lag| {
            let c: S = centered.iter().zip(&centered[lag..]).map(|(&a, &b)| a * b).sum();
            c / c0
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecorrelationOptions {
    /// Multiplier applied to the entry lag.
    pub safety_factor: f64,
    /// Consecutive lags that must stay inside the band.
    pub persistence: usize,
}

impl Default for DecorrelationOptions {
    fn default() -> Self {
        Self {
            safety_factor: 3.0,
            persistence: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decorrelation<S> {
    /// `safety_factor × lag × grid_step`.
    pub time: S,
    /// First lag from which the ACF stays inside the band.
    pub lag: usize,
    /// Half-width `3/√n` of the white-noise band.
    pub band: S,
    /// Set when the ACF shows an oscillating lobe, making the estimate
    /// unreliable.
    pub low_confidence: bool,
}

/// Decorrelation time from an ACF of a series of length `series_len`
/// sampled every `grid_step`.
pub fn decorrelation_time<S: Real>(
    acf: &[S],
    grid_step: S,
    series_len: usize,
    options: DecorrelationOptions,
) -> Result<Decorrelation<S>> {
    if !(grid_step > S::zero()) || series_len == 0 || options.persistence == 0 {
        return Err(Error::Argument("invalid decorrelation inputs".into()));
    }
    let band = S::lit(3.0) / S::from_len(series_len).sqrt();
    let inside = |r: S| r.abs() <= band;
    let p = options.persistence;
    let lag = (1..acf.len())
        .find(|&l| l + p <= acf.len() && acf[l..l + p].iter().all(|&r| inside(r)))
        .ok_or(Error::NoDecorrelation {
            band: band.as_f64(),
            max_lag: acf.len().saturating_sub(1),
        })?;
    // a significant negative lobe before entry, or a sustained excursion
    // after it, both indicate oscillation
    let negative_lobe = acf[1..lag].iter().any(|&r| r < -band);
    let mut run = 0;
    let mut reexit = false;
    for &r in &acf[lag..] {
        run = if inside(r) { 0 } else { run + 1 };
        if run >= p {
            reexit = true;
            break;
        }
    }
    Ok(Decorrelation {
        time: S::lit(options.safety_factor) * S::from_len(lag) * grid_step,
        lag,
        band,
        low_confidence: negative_lobe || reexit,
    })
}

/// Moments of an observable `f` and a per-sample score `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IidMoments<S> {
    pub ef: S,
    pub ef2: S,
    pub ew: S,
    pub ew2: S,
    pub efw: S,
}

/// Leading-order variance predictions for i.i.d. sequences of length `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IidVariancePrediction<S> {
    /// `T · E[f²] · E[w²]`.
    pub i2: S,
    /// `T · (E f)² · E[w²]`.
    pub i3: S,
    /// Constant for the centered ergodic estimator with raw moments,
    /// `E[f²]E[w²] + 2(E[fw])²`.
    pub i3c_raw: S,
    /// Same expression with centered moments,
    /// `Var(f)E[w²] + 2 Cov(f, w)²`.
    pub i3c_centered: S,
}

pub fn iid_variance_oracle<S: Real>(m: &IidMoments<S>, horizon: S) -> IidVariancePrediction<S> {
    let two = S::lit(2.0);
    let var_f = m.ef2 - m.ef * m.ef;
    let cov_fw = m.efw - m.ef * m.ew;
    IidVariancePrediction {
        i2: horizon * m.ef2 * m.ew2,
        i3: horizon * m.ef * m.ef * m.ew2,
        i3c_raw: m.ef2 * m.ew2 + two * m.efw * m.efw,
        i3c_centered: var_f * m.ew2 + two * cov_fw * cov_fw,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reading {
    Raw,
    Centered,
}

/// Picks the reading whose prediction is closer (relatively) to `observed`.
pub fn discriminate<S: Real>(prediction: &IidVariancePrediction<S>, observed: S) -> (Reading, S) {
    let raw = ((observed - prediction.i3c_raw) / prediction.i3c_raw).abs();
    let centered = ((observed - prediction.i3c_centered) / prediction.i3c_centered).abs();
    if raw <= centered {
        (Reading::Raw, prediction.i3c_raw)
    } else {
        (Reading::Centered, prediction.i3c_centered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit<S> {
    pub slope: S,
    pub intercept: S,
    pub r_squared: S,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit<S: Real>(xs: &[S], ys: &[S]) -> Result<LinearFit<S>> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Argument(
            "linear fit needs two equal-length series of length ≥ 2".into(),
        ));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: S = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: S = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let syy: S = ys.iter().map(|&y| (y - my) * (y - my)).sum();
    if !(sxx > S::zero()) {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > S::zero() {
        sxy * sxy / (sxx * syy)
    } else {
        S::one()
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn constant_values_have_zero_variance() {
        assert_eq!(normalized_variance(&[2.5f64; 10]).unwrap(), 0.0);
        assert!(normalized_variance(&[1.0f64]).is_err());
    }

    #[test]
    fn standard_normal_sample_variance_near_one() {
        let mut g = RngStream::new(3, 0).generator();
        let xs: Vec<f64> = (0..100_000).map(|_| g.normal()).collect();
        let v = normalized_variance(&xs).unwrap();
        assert!((v - 1.0).abs() < 0.03, "{v}");
    }

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut g = RngStream::new(seed, 0).generator();
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + g.normal::<f64>();
                x
            })
            .collect()
    }

    #[test]
    fn acf_lag_zero_is_one_and_zero_variance_fails() {
        let r = acf(&[1.0f64, 3.0, 2.0, 5.0], 2).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(matches!(acf(&[4.0f64; 8], 2), Err(Error::ZeroVariance)));
        assert!(acf(&[1.0f64, 2.0], 2).is_err());
    }

    #[test]
    fn ar1_acf_is_geometric() {
        let xs = ar1(0.9, 1_000_000, 8);
        let r = acf(&xs, 20).unwrap();
        for (l, &v) in r.iter().enumerate() {
            assert!((v - 0.9f64.powi(l as i32)).abs() < 0.02, "lag {l}: {v}");
        }
    }

    #[test]
    fn white_noise_acf_within_bartlett_band() {
        let mut g = RngStream::new(21, 0).generator();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| g.normal()).collect();
        let r = acf(&xs, 200).unwrap();
        let band = 3.0 / (n as f64).sqrt();
        let outside = r[1..].iter().filter(|v| v.abs() > band).count();
        assert!(outside <= 4, "{outside} of 200 lags outside");
        let d = decorrelation_time(&r, 1.0, n, DecorrelationOptions::default()).unwrap();
        assert!(d.lag <= 3 && d.time <= 9.0, "{d:?}");
        assert!(!d.low_confidence);
    }

    #[test]
    fn ar1_decorrelation_time_matches_closed_form() {
        let n = 1_000_000;
        let xs = ar1(0.9, n, 9);
        let r = acf(&xs, 400).unwrap();
        let d = decorrelation_time(&r, 1.0, n, DecorrelationOptions::default()).unwrap();
        let band = 3.0 / (n as f64).sqrt();
        let expected = 3.0 * (-1.0 / 0.9f64.ln()) * (1.0 / band).ln();
        assert!(
            d.time > expected / 2.0 && d.time < expected * 2.0,
            "{} vs {expected}",
            d.time
        );
    }

    #[test]
    fn decorrelation_is_monotone_in_safety_factor() {
        let xs = ar1(0.5, 10_000, 2);
        let r = acf(&xs, 100).unwrap();
        let t = |f: f64| {
            let opts = DecorrelationOptions {
                safety_factor: f,
                ..Default::default()
            };
            decorrelation_time(&r, 0.5, xs.len(), opts).unwrap().time
        };
        assert!(t(1.0) <= t(2.0) && t(2.0) <= t(3.0) && t(3.0) <= t(5.0));
    }

    #[test]
    fn damped_oscillation_is_flagged() {
        let r: Vec<f64> = (0..400)
            .map(|l| {
                let l = l as f64;
                (-l / 60.0).exp() * (l / 15.0).cos()
            })
            .collect();
        let d = decorrelation_time(&r, 1.0, 10_000, DecorrelationOptions::default()).unwrap();
        assert!(d.low_confidence);
    }

    #[test]
    fn acf_never_entering_band_is_an_error() {
        let r = vec![1.0f64; 50];
        assert!(matches!(
            decorrelation_time(&r, 1.0, 1000, DecorrelationOptions::default()),
            Err(Error::NoDecorrelation { .. })
        ));
    }

    #[test]
    fn oracle_zero_observable() {
        let m = IidMoments {
            ef: 0.0f64,
            ef2: 0.0,
            ew: 0.0,
            ew2: 1.0,
            efw: 0.0,
        };
        let p = iid_variance_oracle(&m, 100.0);
        assert_eq!((p.i2, p.i3, p.i3c_raw, p.i3c_centered), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn oracle_exponential_moments() {
        // exponential(1), f(x) = x, w(x) = 1 − x
        let m = IidMoments {
            ef: 1.0f64,
            ef2: 2.0,
            ew: 0.0,
            ew2: 1.0,
            efw: -1.0,
        };
        let p = iid_variance_oracle(&m, 100.0);
        assert_eq!(p.i2, 200.0);
        assert_eq!(p.i3, 100.0);
        assert_eq!(p.i3c_raw, 4.0);
        assert_eq!(p.i3c_centered, 3.0);
        assert_eq!(discriminate(&p, 3.2).0, Reading::Centered);
        assert_eq!(discriminate(&p, 3.8).0, Reading::Raw);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [15.0f64, 30.0, 45.0, 60.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 2.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}
