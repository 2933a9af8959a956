use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a function of `y` on the symmetric uniform grid
/// `y_i = -y_max + i h`, `i = 0..n`, at similarity time `s`.
///
/// `n` is odd so that `y = 0` is the middle node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    y_max: f64,
    s: f64,
    values: Vec<f64>,
}

impl Field {
    pub fn new(y_max: f64, s: f64, values: Vec<f64>) -> Result<Self> {
        check_grid(y_max, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at node {i}")));
        }
        Ok(Self { y_max, s, values })
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(y_max: f64, n: usize, s: f64, mut f: F) -> Result<Self> {
        check_grid(y_max, n)?;
        let h = 2.0 * y_max / (n - 1) as f64;
        let values = (0..n).map(|i| f(-y_max + i as f64 * h)).collect();
        Self::new(y_max, s, values)
    }

    /// Smallest odd node count whose spacing does not exceed `h_max`.
    pub fn nodes_for_spacing(y_max: f64, h_max: f64) -> usize {
        let intervals = (2.0 * y_max / h_max).ceil() as usize;
        let intervals = intervals.max(2);
        intervals + intervals % 2 + 1
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        2.0 * self.y_max / (self.n() - 1) as f64
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        -self.y_max + i as f64 * self.h()
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.h();
        (0..self.n()).map(move |i| -self.y_max + i as f64 * h)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|f(y) - f(-y)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n();
        (0..n / 2).fold(0.0_f64, |m, i| m.max((self.values[i] - self.values[n - 1 - i]).abs()))
    }

    /// New field on the same grid with `f(y, value)` applied at each node.
    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = self.ys().zip(&self.values).map(|(y, &v)| f(y, v)).collect();
        Self::new(self.y_max, self.s, values)
    }

    /// Pointwise `self - other` on an identical grid.
    pub fn sub(&self, other: &Field) -> Result<Self> {
        if self.n() != other.n() || self.y_max != other.y_max {
            return Err(Error::Domain("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self::new(self.y_max, self.s, values)
    }

    /// Cubic Lagrange interpolation on the four surrounding nodes; `None`
    /// outside `[-y_max, y_max]`.
    pub fn interpolate(&self, y: f64) -> Option<f64> {
        if !(y.abs() <= self.y_max) {
            return None;
        }
        let n = self.n();
        let h = self.h();
        let t = (y + self.y_max) / h;
        let i = (t.floor() as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n.saturating_sub(4));
        let x = t - start as f64;
        let f = &self.values[start..start + 4.min(n)];
        if f.len() < 4 {
            let frac = t - i as f64;
            return Some(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac);
        }
        let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        Some(f[0] * l0 + f[1] * l1 + f[2] * l2 + f[3] * l3)
    }

    /// First derivative: centered inside, second-order one-sided at the ends.
    pub fn derivative(&self) -> Result<Self> {
        let values = first_derivative(&self.values, self.h());
        Self::new(self.y_max, self.s, values)
    }
}

fn check_grid(y_max: f64, n: usize) -> Result<()> {
    if !(y_max > 0.0) || !y_max.is_finite() {
        return Err(Error::Domain(format!("grid half-width must be positive, got {y_max}")));
    }
    if n < 3 || n % 2 == 0 {
        return Err(Error::Domain(format!("grid needs an odd node count >= 3, got {n}")));
    }
    Ok(())
}

pub(crate) fn first_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let inv = 0.5 / h;
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
    d
}
