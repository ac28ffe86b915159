//! Time-series primitives: log-return construction, trailing moments,
//! sample kurtosis and rolling-window iteration.
//!
//! All types are immutable after construction; every operation is a pure
//! function, so values can be shared freely across parallel workers.

use crate::error::{Error, Result};

/// An ordered series of strictly positive closing prices, optionally
/// labelled (e.g. with dates).
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PriceSeries {
    /// Validates and wraps closing prices: at least two points, every value
    /// finite and strictly positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_labels(values, None)
    }

    pub fn with_labels(values: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "price series needs at least 2 points, got {}",
                values.len()
            )));
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositivePrice { index, value });
            }
        }
        if let Some(ref l) = labels {
            if l.len() != values.len() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} prices",
                    l.len(),
                    values.len()
                )));
            }
        }
        Ok(Self { values, labels })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Percent log-returns: `Y_t = 100 * ln(X_{t+1} / X_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    values: Vec<f64>,
}

impl ReturnSeries {
    /// Wraps a return series; every value must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite return at index {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The contiguous sub-series `[start, start + width)`.
    pub fn window(&self, start: usize, width: usize) -> ReturnSeries {
        ReturnSeries {
            values: self.values[start..start + width].to_vec(),
        }
    }
}

/// Trailing mean and population variance of a series prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailingStats {
    /// `s^2_{t-1}`: population variance of the prefix.
    pub s_sq: f64,
    /// Mean of the prefix.
    pub mu: f64,
}

/// Percent log-returns from closing prices: output has length
/// `prices.len() - 1` and `Y_t = 100 * ln(X_{t+1} / X_t)`.
pub fn to_log_returns(prices: &PriceSeries) -> ReturnSeries {
    let xs = prices.values();
    let values = xs
        .windows(2)
        .map(|w| 100.0 * (w[1] / w[0]).ln())
        .collect();
    // Positivity is guaranteed by the PriceSeries invariant.
    ReturnSeries { values }
}

/// Mean and population variance of `Y_1..Y_{t-1}` for a 1-based index `t`.
///
/// The divisor is `t - 1` (population style). With a single prefix point the
/// variance is 0.
pub fn trailing_stats(returns: &ReturnSeries, t: usize) -> Result<TrailingStats> {
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "trailing stats need at least one prior point (t = {t})"
        )));
    }
    let prefix_len = t - 1;
    if prefix_len > returns.len() {
        return Err(Error::InvalidInput(format!(
            "prefix of length {prefix_len} exceeds series length {}",
            returns.len()
        )));
    }
    let prefix = &returns.values()[..prefix_len];
    let mu = prefix.iter().sum::<f64>() / prefix_len as f64;
    let s_sq = prefix.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / prefix_len as f64;
    Ok(TrailingStats { s_sq, mu })
}

/// Raw sample kurtosis `m4 / m2^2` with central moments over the sample.
///
/// Requires at least 4 points and nonzero variance; the normal-distribution
/// reference value is 3 (not excess).
pub fn sample_kurtosis(xs: &[f64]) -> Result<f64> {
    if xs.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "kurtosis needs at least 4 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::DegenerateSample(
            "zero variance; kurtosis undefined".into(),
        ));
    }
    Ok(m4 / (m2 * m2))
}

/// Iterator over consecutive rolling windows of a fixed width.
///
/// Yields `(window, target)` pairs where `window` is a slice of exactly
/// `width` points and `target` is the 0-based index of the first
/// out-of-window point. Advances by one point per step and yields exactly
/// `len - width` windows.
pub struct RollingWindows<'a> {
    values: &'a [f64],
    width: usize,
    next_start: usize,
}

impl<'a> Iterator for RollingWindows<'a> {
    type Item = (&'a [f64], usize);

    fn next(&mut self) -> Option<Self::Item> {
        let end = self.next_start + self.width;
        // The target index must exist in the series.
        if end >= self.values.len() {
            return None;
        }
        let item = (&self.values[self.next_start..end], end);
        self.next_start += 1;
        Some(item)
    }
}

/// Rolling windows of `width` points over `returns`.
///
/// Each window is paired with the index of the point immediately after it
/// (its forecast target), so the last window ends one point before the end
/// of the series.
pub fn rolling_windows(returns: &ReturnSeries, width: usize) -> Result<RollingWindows<'_>> {
    if width == 0 || width >= returns.len() {
        return Err(Error::InvalidInput(format!(
            "window width {width} must be in 1..{}",
            returns.len()
        )));
    }
    Ok(RollingWindows {
        values: returns.values(),
        width,
        next_start: 0,
    })
}
