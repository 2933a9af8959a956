//! One IMEX step of
//! `w_s = w_yy − (y/2) w_y − w/(p−1) + μ|w_y|^q + |w|^{p−1} w`.
//!
//! The linear part is backward Euler (one tridiagonal solve), the two
//! nonlinear terms are forward Euler.

use serde::{Deserialize, Serialize};

use crate::constants::ProfileConstants;
use crate::error::{Error, Result};

/// Conditions at `y = ±y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Dirichlet data `w = φ(±y_max, s)`.
    Profile,
    /// Zero flux.
    Neumann,
}

/// Power `|w|^{p-1} w`, using integer powers when `p` is an integer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Power {
    p: f64,
    int: Option<i32>,
}

impl Power {
    pub(crate) fn new(p: f64) -> Self {
        let int = (p.fract() == 0.0 && p.abs() < 64.0).then_some(p as i32);
        Self { p, int }
    }

    #[inline]
    pub(crate) fn signed(&self, w: f64) -> f64 {
        match self.int {
            Some(k) => w.abs().powi(k - 1) * w,
            None => w.abs().powf(self.p - 1.0) * w,
        }
    }
}

pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// Reusable workspace for IMEX steps on one grid.
#[derive(Debug, Clone)]
pub struct ImexStepper {
    c: ProfileConstants,
    boundary: BoundaryMode,
    y_max: f64,
    h: f64,
    ys: Vec<f64>,
    power: Power,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl ImexStepper {
    pub fn new(c: &ProfileConstants, y_max: f64, n: usize, boundary: BoundaryMode) -> Result<Self> {
        if n < 5 || n % 2 == 0 {
            return Err(Error::Domain(format!("IMEX grid needs an odd n >= 5, got {n}")));
        }
        let h = 2.0 * y_max / (n - 1) as f64;
        let ys = (0..n).map(|i| -y_max + i as f64 * h).collect();
        Ok(Self {
            c: *c,
            boundary,
            y_max,
            h,
            ys,
            power: Power::new(c.p),
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Largest step allowed by the explicit terms: `safety / max p|w|^{p−1}`
    /// for the power, and `safety · 2/c²` with `c = max μq|w_y|^{q−1}` for
    /// the gradient term, whose explicit advection is stabilised by the
    /// implicit diffusion.
    pub fn stable_ds(&self, w: &[f64], safety: f64) -> f64 {
        let (p, q, mu) = (self.c.p, self.c.q, self.c.mu);
        let mut sup = 0.0_f64;
        let mut grad = 0.0_f64;
        for i in 1..w.len() - 1 {
            sup = sup.max(w[i].abs());
            grad = grad.max((w[i + 1] - w[i - 1]).abs());
        }
        let rate = p * sup.powf(p - 1.0);
        let speed = mu.abs() * q * (grad / (2.0 * self.h)).powf(q - 1.0);
        let by_rate = if rate > 0.0 { safety / rate } else { f64::INFINITY };
        let by_speed = if speed > 0.0 { safety * 2.0 / (speed * speed) } else { f64::INFINITY };
        by_rate.min(by_speed)
    }

    /// Advances `w` from `s` to `s + ds` in place.
    pub fn step(&mut self, w: &mut [f64], s: f64, ds: f64) -> Result<()> {
        let n = self.ys.len();
        if w.len() != n {
            return Err(Error::Domain(format!("field has {} nodes, stepper {n}", w.len())));
        }
        let (mu, q) = (self.c.mu, self.c.q);
        let inv_h2 = 1.0 / (self.h * self.h);
        let inv_2h = 0.5 / self.h;
        let decay = 1.0 / (self.c.p - 1.0);
        for i in 1..n - 1 {
            let y = self.ys[i];
            let g = (w[i + 1] - w[i - 1]) * inv_2h;
            self.rhs[i] = w[i] + ds * (mu * g.abs().powf(q) + self.power.signed(w[i]));
            // −(y/2)∂_y: centered while the cell Péclet number |y|h/4 stays
            // below one, upwind beyond.
            let (dl, dc, du) = if y.abs() * self.h <= 4.0 {
                let k = 0.5 * y * inv_2h;
                (k, 0.0, -k)
            } else if y > 0.0 {
                let k = 0.5 * y / self.h;
                (k, -k, 0.0)
            } else {
                let k = 0.5 * y / self.h;
                (0.0, k, -k)
            };
            self.lower[i] = -ds * (inv_h2 + dl);
            self.diag[i] = 1.0 - ds * (-2.0 * inv_h2 + dc - decay);
            self.upper[i] = -ds * (inv_h2 + du);
        }
        match self.boundary {
            BoundaryMode::Profile => {
                let slice = self.c.at(s + ds)?;
                self.diag[0] = 1.0;
                self.upper[0] = 0.0;
                self.rhs[0] = slice.value(self.ys[0]);
                self.diag[n - 1] = 1.0;
                self.lower[n - 1] = 0.0;
                self.rhs[n - 1] = slice.value(self.ys[n - 1]);
            }
            BoundaryMode::Neumann => {
                self.diag[0] = 1.0;
                self.upper[0] = -1.0;
                self.rhs[0] = 0.0;
                self.diag[n - 1] = 1.0;
                self.lower[n - 1] = -1.0;
                self.rhs[n - 1] = 0.0;
            }
        }
        self.lower[0] = 0.0;
        self.upper[n - 1] = 0.0;
        thomas(&self.lower, &self.diag, &self.upper, &mut self.rhs, &mut self.scratch);
        if let Some(i) = self.rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::StepFailure {
                s,
                reason: format!("non-finite value at y = {}", self.ys[i]),
            });
        }
        w.copy_from_slice(&self.rhs);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_a_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3 5 3] -> x = 1
        let mut rhs = vec![3.0, 5.0, 3.0];
        let mut scratch = vec![0.0; 3];
        thomas(&[0.0, 1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0, 0.0], &mut rhs, &mut scratch);
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn integer_powers_match_powf() {
        let p = Power::new(5.0);
        assert!((p.signed(-0.7) - (-0.7f64).abs().powf(4.0) * -0.7).abs() < 1e-15);
        let p = Power::new(4.5);
        assert!((p.signed(0.7) - 0.7f64.powf(4.5)).abs() < 1e-15);
    }
}
