//! Hermite modes of `𝓛 = ∂²_y − (y/2)∂_y + 1` on `L²_ρ`.
//!
//! `h_m(y) = Σ_n m!/(n!(m−2n)!) (−1)^n y^{m−2n}` satisfies `𝓛 h_m = (1 − m/2) h_m`
//! and `⟨h_n, h_m⟩_ρ = 2^n n! δ_nm`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::quadrature::{QuadratureRule, DOUBLING_TOLERANCE};

/// Largest degree whose coefficients are tabulated exactly.
pub const MAX_EXACT_DEGREE: usize = 20;

/// `ρ(y) = e^{-y²/4}/√(4π)`.
#[inline]
pub fn weight_rho(y: f64) -> f64 {
    (-0.25 * y * y).exp() / (4.0 * PI).sqrt()
}

/// `h_m(y)` evaluated through the explicit sum.
pub fn hermite_eval(m: usize, y: f64) -> f64 {
    let mut coeff = 1.0;
    let mut total = 0.0;
    for n in 0..=m / 2 {
        total += coeff * y.powi((m - 2 * n) as i32);
        let k = (m - 2 * n) as f64;
        coeff *= -k * (k - 1.0) / (n + 1) as f64;
    }
    total
}

/// `‖h_m‖²_ρ = 2^m m!`.
pub fn hermite_norm_sq(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc * 2.0 * k as f64)
}

/// Exact integer coefficients of `h_0..h_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    /// `coefficients[m][k]` multiplies `y^k`.
    coefficients: Vec<Vec<i128>>,
}

impl HermiteBasis {
    pub fn new(max_degree: usize) -> Result<Self> {
        if max_degree > MAX_EXACT_DEGREE {
            return Err(Error::Domain(format!(
                "Hermite degree {max_degree} exceeds the exact table limit {MAX_EXACT_DEGREE}"
            )));
        }
        let coefficients = (0..=max_degree)
            .map(|m| {
                let mut row = vec![0i128; m + 1];
                let mut c: i128 = 1;
                for n in 0..=m / 2 {
                    let k = (m - 2 * n) as i128;
                    row[m - 2 * n] = c;
                    c = -c * k * (k - 1) / (n as i128 + 1);
                }
                row
            })
            .collect();
        Ok(Self { coefficients })
    }

    pub fn max_degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self, m: usize) -> &[i128] {
        &self.coefficients[m]
    }

    /// `h_m(y)` by Horner's rule on the exact coefficients.
    pub fn eval(&self, m: usize, y: f64) -> f64 {
        self.coefficients[m]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * y + c as f64)
    }

    /// `Σ c_m h_m(y)`.
    pub fn combine(&self, coeffs: &[f64], y: f64) -> f64 {
        coeffs.iter().enumerate().map(|(m, c)| c * self.eval(m, y)).sum()
    }
}

/// `∫ f g ρ dy`, checked against the doubled rule.
pub fn inner_product_rho<F, G>(f: F, g: G, quad: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    quad.integrate_checked(|y| f(y) * g(y), DOUBLING_TOLERANCE)
}

/// Projection coefficients `c_m = ⟨f, h_m⟩_ρ / (2^m m!)` of a function.
pub fn project_function<F: Fn(f64) -> f64>(f: F, basis: &HermiteBasis, quad: &QuadratureRule) -> Vec<f64> {
    let samples: Vec<f64> = quad.nodes().iter().map(|&y| f(y)).collect();
    project_samples(&samples, basis, quad)
}

/// Projection coefficients of a sampled field, interpolated onto the
/// quadrature nodes.
pub fn project_modes(field: &Field, basis: &HermiteBasis, quad: &QuadratureRule) -> Result<Vec<f64>> {
    let extent = quad.extent();
    if field.y_max() < extent {
        return Err(Error::GridTooSmall {
            required: extent,
            available: field.y_max(),
        });
    }
    let samples = quad
        .nodes()
        .iter()
        .map(|&y| field.interpolate(y).expect("node inside grid"))
        .collect::<Vec<_>>();
    Ok(project_samples(&samples, basis, quad))
}

fn project_samples(samples: &[f64], basis: &HermiteBasis, quad: &QuadratureRule) -> Vec<f64> {
    (0..=basis.max_degree())
        .map(|m| {
            let ip: f64 = quad
                .nodes()
                .iter()
                .zip(quad.weights())
                .zip(samples)
                .map(|((&y, &w), &f)| w * f * basis.eval(m, y))
                .sum();
            ip / hermite_norm_sq(m)
        })
        .collect()
}

/// Discrete `𝓛 f = f'' − (y/2) f' + f` with centered stencils inside and
/// second-order one-sided stencils at the two ends.
pub fn apply_l(field: &Field) -> Result<Field> {
    let n = field.n();
    if n < 8 {
        return Err(Error::GridTooSmall {
            required: 8.0,
            available: n as f64,
        });
    }
    let h = field.h();
    let f = field.values();
    let h2 = h * h;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let d2 = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
        let d1 = (f[i + 1] - f[i - 1]) / (2.0 * h);
        out[i] = d2 - 0.5 * field.y(i) * d1 + f[i];
    }
    let d2_left = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    let d1_left = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    out[0] = d2_left - 0.5 * field.y(0) * d1_left + f[0];
    let k = n - 1;
    let d2_right = (2.0 * f[k] - 5.0 * f[k - 1] + 4.0 * f[k - 2] - f[k - 3]) / h2;
    let d1_right = (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) / (2.0 * h);
    out[k] = d2_right - 0.5 * field.y(k) * d1_right + f[k];
    Field::new(field.y_max(), field.s(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_polynomials() {
        let basis = HermiteBasis::new(4).unwrap();
        assert_eq!(basis.coefficients(0), &[1]);
        assert_eq!(basis.coefficients(1), &[0, 1]);
        assert_eq!(basis.coefficients(2), &[-2, 0, 1]);
        assert_eq!(basis.coefficients(4), &[12, 0, -12, 0, 1]);
        assert_eq!(hermite_eval(2, 3.0), 7.0);
        assert_eq!(hermite_eval(4, 0.0), 12.0);
        assert_eq!(basis.eval(4, 0.0), 12.0);
    }

    #[test]
    fn leading_coefficient_is_one() {
        let basis = HermiteBasis::new(MAX_EXACT_DEGREE).unwrap();
        for m in 0..=MAX_EXACT_DEGREE {
            assert_eq!(*basis.coefficients(m).last().unwrap(), 1);
        }
        assert!(HermiteBasis::new(MAX_EXACT_DEGREE + 1).is_err());
    }

    #[test]
    fn table_and_sum_agree() {
        let basis = HermiteBasis::new(12).unwrap();
        for m in 0..=12 {
            for y in [-3.3, -0.5, 0.0, 1.1, 4.0] {
                let a = basis.eval(m, y);
                let b = hermite_eval(m, y);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "m={m} y={y}");
            }
        }
    }

    #[test]
    fn rho_at_origin() {
        assert!((weight_rho(0.0) - 0.282_094_791_773_878_14).abs() < 1e-15);
        assert_eq!(weight_rho(1.7), weight_rho(-1.7));
    }

    #[test]
    fn norms() {
        assert_eq!(hermite_norm_sq(0), 1.0);
        assert_eq!(hermite_norm_sq(2), 8.0);
        assert_eq!(hermite_norm_sq(6), 46080.0);
    }

    #[test]
    fn project_simple_functions() {
        let basis = HermiteBasis::new(4).unwrap();
        let quad = QuadratureRule::standard();
        let c = project_function(|y| 3.0 + 2.0 * y, &basis, &quad);
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12);
        let c = project_function(|y| y * y, &basis, &quad);
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12 && c[3].abs() < 1e-12 && c[4].abs() < 1e-12);
    }

    #[test]
    fn projecting_a_narrow_field_is_rejected() {
        let basis = HermiteBasis::new(2).unwrap();
        let quad = QuadratureRule::standard();
        let f = Field::from_fn(5.0, 101, 2.0, |_| 1.0).unwrap();
        assert!(matches!(project_modes(&f, &basis, &quad), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn apply_l_needs_eight_points() {
        let f = Field::from_fn(1.0, 7, 2.0, |_| 1.0).unwrap();
        assert!(apply_l(&f).is_err());
        let f = Field::from_fn(1.0, 9, 2.0, |_| 1.0).unwrap();
        assert!(apply_l(&f).unwrap().values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
}
