//! Recovering `b` and `β` from fields.
//!
//! At one time `φ(·,s)` depends on `b` and `β` only through
//! `λ = b/s^{2β}`: `φ = (p−1+λy²)^{-1/(p−1)} + 2κλ/(p−1)²`. Each snapshot
//! therefore yields one `λ(s)`, and `(b, β)` come from the line
//! `log λ = log b − 2β log s` across snapshots.

use serde::Serialize;

use crate::constants::ProfileConstants;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fit::linear_fit;

/// Relative rms misfit above which the data are declared pre-asymptotic.
pub const INCONCLUSIVE_RESIDUAL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileFit {
    pub b_hat: f64,
    pub beta_hat: f64,
    /// `(s, λ̂(s))` per snapshot.
    pub lambdas: Vec<(f64, f64)>,
    /// Relative rms misfit of the per-snapshot fits.
    pub residual: f64,
    /// `b` fitted with `β` held at its theoretical value.
    pub b_constrained: f64,
    /// Relative rms misfit of the constrained fit.
    pub residual_constrained: f64,
    pub inconclusive: bool,
}

struct Model {
    p: f64,
    kappa: f64,
}

impl Model {
    /// Value and `∂/∂λ`.
    #[inline]
    fn eval(&self, lambda: f64, y: f64) -> (f64, f64) {
        let pm1 = self.p - 1.0;
        let z = pm1 + lambda * y * y;
        let off = 2.0 * self.kappa / (pm1 * pm1);
        let v = z.powf(-1.0 / pm1) + off * lambda;
        let d = -(y * y / pm1) * z.powf(-self.p / pm1) + off;
        (v, d)
    }
}

fn window(field: &Field, half_width: f64) -> Vec<(f64, f64)> {
    field
        .ys()
        .zip(field.values())
        .filter(|(y, _)| y.abs() <= half_width)
        .map(|(y, &w)| (y, w))
        .collect()
}

/// Gauss–Newton on a single scalar shared by several data sets, where
/// `lambda_j = theta · scale_j`.
fn gauss_newton(model: &Model, sets: &[(f64, Vec<(f64, f64)>)], theta0: f64) -> (f64, f64) {
    let mut theta = theta0;
    for _ in 0..100 {
        let (mut jtr, mut jtj) = (0.0, 0.0);
        for (scale, pts) in sets {
            for &(y, w) in pts {
                let (v, d) = model.eval(theta * scale, y);
                let j = d * scale;
                jtr += j * (w - v);
                jtj += j * j;
            }
        }
        if !(jtj > 0.0) {
            break;
        }
        let step = jtr / jtj;
        theta += step;
        if step.abs() <= 1e-15 * theta.abs() {
            break;
        }
    }
    let (mut ss, mut count) = (0.0, 0usize);
    for (scale, pts) in sets {
        for &(y, w) in pts {
            let (v, _) = model.eval(theta * scale, y);
            ss += ((w - v) / model.kappa).powi(2);
            count += 1;
        }
    }
    (theta, (ss / count.max(1) as f64).sqrt())
}

fn initial_lambda(model: &Model, pts: &[(f64, f64)]) -> f64 {
    // w^{-(p-1)} − (p−1) ≈ λ y² through the origin, offset ignored.
    let (mut num, mut den) = (0.0, 0.0);
    for &(y, w) in pts {
        if w > 0.0 {
            let t = w.powf(-(model.p - 1.0)) - (model.p - 1.0);
            num += t * y * y;
            den += y.powi(4);
        }
    }
    if den > 0.0 && num > 0.0 {
        num / den
    } else {
        1e-3
    }
}

/// Fits `(b̂, β̂)` over `|y| ≤ K s^β` from snapshots at two or more distinct
/// times.
pub fn fit_profile_parameters(snapshots: &[Field], c: &ProfileConstants, k: f64) -> Result<ProfileFit> {
    if snapshots.len() < 2 {
        return Err(Error::Domain("profile fit needs snapshots at two or more times".into()));
    }
    let model = Model { p: c.p, kappa: c.kappa };
    let mut lambdas = Vec::with_capacity(snapshots.len());
    let mut sets = Vec::with_capacity(snapshots.len());
    let mut ss = 0.0;
    for f in snapshots {
        let s = f.s();
        let pts = window(f, k * s.powf(c.beta));
        if pts.len() < 3 {
            return Err(Error::Domain(format!("too few samples in the fit window at s = {s}")));
        }
        let (lambda, res) = gauss_newton(&model, &[(1.0, pts.clone())], initial_lambda(&model, &pts));
        lambdas.push((s, lambda));
        ss += res * res;
        sets.push((s.powf(-2.0 * c.beta), pts));
    }
    if lambdas.iter().any(|&(_, l)| !(l > 0.0)) {
        return Err(Error::Domain("fitted curvature is not positive".into()));
    }
    let xs: Vec<f64> = lambdas.iter().map(|(s, _)| s.ln()).collect();
    let ys: Vec<f64> = lambdas.iter().map(|(_, l)| l.ln()).collect();
    let line = linear_fit(&xs, &ys).ok_or_else(|| Error::Domain("snapshots must be at distinct times".into()))?;
    let residual = (ss / snapshots.len() as f64).sqrt();
    let guess = lambdas[0].1 * lambdas[0].0.powf(2.0 * c.beta);
    let (b_constrained, residual_constrained) = gauss_newton(&model, &sets, guess);
    Ok(ProfileFit {
        b_hat: line.intercept.exp(),
        beta_hat: -0.5 * line.slope,
        lambdas,
        residual,
        b_constrained,
        residual_constrained,
        inconclusive: residual > INCONCLUSIVE_RESIDUAL,
    })
}
