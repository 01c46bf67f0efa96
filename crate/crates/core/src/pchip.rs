//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PchipError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("input is not monotone: {0}")]
    NonMonotoneInput(&'static str),
    #[error("non-finite input")]
    NonFinite,
}

/// A monotone cubic Hermite interpolant over strictly increasing `x`.
///
/// Evaluation outside `[x_0, x_last]` returns the nearest endpoint value.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self, PchipError> {
        let n = pairs.len();
        if n < 2 {
            return Err(PchipError::TooFewPoints(n));
        }
        if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(PchipError::NonFinite);
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PchipError::NonMonotoneInput("x must be strictly increasing"));
        }
        if y.windows(2).any(|w| w[1] < w[0]) {
            return Err(PchipError::NonMonotoneInput("y must be nondecreasing"));
        }

        let secants: Vec<f64> = x
            .windows(2)
            .zip(y.windows(2))
            .map(|(xw, yw)| (yw[1] - yw[0]) / (xw[1] - xw[0]))
            .collect();

        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            slopes[k] = if a * b <= 0.0 { 0.0 } else { 0.5 * (a + b) };
        }

        // Restrict (alpha, beta) to the circle of radius 3 on every interval.
        for k in 0..n - 1 {
            let delta = secants[k];
            if delta == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let alpha = slopes[k] / delta;
            let beta = slopes[k + 1] / delta;
            let r2 = alpha * alpha + beta * beta;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slopes[k] = tau * alpha * delta;
                slopes[k + 1] = tau * beta * delta;
            }
        }

        Ok(Self { x, y, slopes })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= xq) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        // Offset form: exactly constant on flat intervals.
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h10 = t3 - 2.0 * t2 + t;
        let h11 = t3 - t2;
        self.y[k] + h01 * (self.y[k + 1] - self.y[k]) + h * (h10 * self.slopes[k] + h11 * self.slopes[k + 1])
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    /// Node derivatives after monotonicity limiting.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}

/// Fits a monotone interpolant through `(x, y)` pairs.
pub fn pchip_fit(pairs: &[(f64, f64)]) -> Result<Pchip, PchipError> {
    Pchip::new(pairs)
}
