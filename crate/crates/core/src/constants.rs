//! Closed-form constants of the blow-up construction and the profile `φ`.
//!
//! Everything here is a pure function of `(p, μ)`; the only numerical input
//! is the Gaussian moment `∫|y|^q ρ dy`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{abs_moment_with_rule, AbsPowerRule};

/// Relative tolerance for the identity `a = 2B = 2bκ/(p-1)²`.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-10;

/// Which admissibility conditions a `(p, μ)` pair satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Validity {
    pub p_above_three: bool,
    pub mu_positive: bool,
}

impl Validity {
    pub fn of(p: f64, mu: f64) -> Self {
        Self {
            p_above_three: p.is_finite() && p > 3.0,
            mu_positive: mu.is_finite() && mu > 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.p_above_three && self.mu_positive
    }
}

/// Physical parameters `(p, μ)` with the gradient exponent tied to `q = 2p/(p+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    p: f64,
    mu: f64,
}

#[derive(Deserialize)]
struct RawParams {
    p: f64,
    mu: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.p, raw.mu)
    }
}

impl Params {
    pub fn new(p: f64, mu: f64) -> Result<Self> {
        let validity = Validity::of(p, mu);
        if !validity.p_above_three {
            return Err(Error::ParameterDomain(format!("p = {p} violates p > 3")));
        }
        if !validity.mu_positive {
            return Err(Error::ParameterDomain(format!("mu = {mu} violates mu > 0")));
        }
        Ok(Self { p, mu })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Critical gradient exponent `2p/(p+1)`.
    pub fn q(&self) -> f64 {
        critical_q(self.p)
    }
}

pub fn critical_q(p: f64) -> f64 {
    2.0 * p / (p + 1.0)
}

/// Constant steady state `(1/(p-1))^{1/(p-1)}`.
pub fn kappa(p: f64) -> f64 {
    (1.0 / (p - 1.0)).powf(1.0 / (p - 1.0))
}

/// Profile exponent `(p+1)/(2(p-1))`.
pub fn beta(p: f64) -> f64 {
    (p + 1.0) / (2.0 * (p - 1.0))
}

/// Curvature of the classical `μ = 0` profile.
pub fn classical_b0(p: f64) -> f64 {
    (p - 1.0).powi(2) / (4.0 * p)
}

/// `c̃₂` from the quadrature of `|y|^q (y² − 2) ρ`. Valid for any real `μ`.
pub fn c2_tilde(mu: f64, q: f64, rule: &AbsPowerRule) -> f64 {
    mu * 2f64.powf(q) / 8.0 * rule.integrate_even(|y| y * y - 2.0)
}

/// `c̃₀ = μ 2^q ∫|y|^q ρ`. Valid for any real `μ`.
pub fn c0_tilde(mu: f64, q: f64, moment: f64) -> f64 {
    mu * 2f64.powf(q) * moment
}

/// The curvature `b` written directly in terms of `∫|y|^q e^{-y²/4} dy`, as
/// in the one-dimensional closed form.
pub fn curvature_closed_form(p: f64, mu: f64, gaussian_integral: f64) -> f64 {
    let e = (p + 1.0) / (p - 1.0);
    0.5 * (p - 1.0).powf((p - 2.0) / (p - 1.0))
        * (2.0 * std::f64::consts::PI.sqrt() * (p + 1.0).powi(2) / (p * gaussian_integral)).powf(e)
        * mu.powf(-e)
}

/// The curvature `b` from the `N`-dimensional formula, with
/// `gaussian_integral = ∫_{R^N} |y|^q e^{-|y|²/4} dy`.
pub fn curvature_n_dimensional(p: f64, mu: f64, n_dim: u32, gaussian_integral: f64) -> f64 {
    let n = f64::from(n_dim);
    let e = (p + 1.0) / (p - 1.0);
    0.5 * (p - 1.0).powf((p - 2.0) / (p - 1.0))
        * ((4.0 * std::f64::consts::PI).powf(0.5 * n) * (p + 1.0).powi(2) * n
            / (p * gaussian_integral))
            .powf(e)
        * mu.powf(-e)
}

/// Every constant of the construction for one `(p, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileConstants {
    pub p: f64,
    pub mu: f64,
    pub q: f64,
    pub kappa: f64,
    pub beta: f64,
    /// `∫|y|^q ρ dy`.
    pub moment: f64,
    /// Amplitude `B` of the null mode, `w̄₂ ~ −B s^{-1/(q-1)}`.
    #[serde(rename = "B")]
    pub big_b: f64,
    pub c0_tilde: f64,
    pub c2_tilde: f64,
    pub b: f64,
    pub a: f64,
    pub b0: f64,
}

impl ProfileConstants {
    pub fn derive(params: &Params) -> Result<Self> {
        let q = params.q();
        let (moment, rule) = abs_moment_with_rule(q)?;
        Self::from_parts(params, moment, &rule)
    }

    /// Builds the constants from a given moment and `|y|^q` rule. Exposed so
    /// that perturbed rules can be fed through the same path.
    pub fn from_parts(params: &Params, moment: f64, rule: &AbsPowerRule) -> Result<Self> {
        let (p, mu, q) = (params.p(), params.mu(), params.q());
        let kappa = kappa(p);
        let beta = beta(p);
        let c0_tilde = c0_tilde(mu, q, moment);
        let c2_tilde = c2_tilde(mu, q, rule);
        let big_b = ((q - 1.0) * c2_tilde.abs()).powf(-1.0 / (q - 1.0));
        // Matching the inner and outer expansions; μ > 0 here.
        let b = big_b * (p - 1.0).powi(2) / kappa;
        let a = 2.0 * big_b;
        let constants = Self {
            p,
            mu,
            q,
            kappa,
            beta,
            moment,
            big_b,
            c0_tilde,
            c2_tilde,
            b,
            a,
            b0: classical_b0(p),
        };
        let residual = constants.cross_check_residual();
        if !(residual < CROSS_CHECK_TOLERANCE) {
            return Err(Error::Convergence {
                what: "a = 2B = 2b kappa/(p-1)^2".into(),
                achieved: residual,
                target: CROSS_CHECK_TOLERANCE,
            });
        }
        Ok(constants)
    }

    /// Relative disagreement between `a`, `2B` and `2bκ/(p-1)²`.
    pub fn cross_check_residual(&self) -> f64 {
        let via_b = 2.0 * self.b * self.kappa / (self.p - 1.0).powi(2);
        let r1 = (self.a - 2.0 * self.big_b).abs() / self.a.abs();
        let r2 = (self.a - via_b).abs() / self.a.abs();
        r1.max(r2)
    }

    /// Outer profile `φ₀(z) = (p − 1 + b z²)^{-1/(p-1)}`.
    pub fn phi0(&self, z: f64) -> f64 {
        (self.p - 1.0 + self.b * z * z).powf(-1.0 / (self.p - 1.0))
    }

    /// The profile frozen at similarity time `s > 1`.
    pub fn at(&self, s: f64) -> Result<ProfileSlice> {
        if !(s > 1.0) || !s.is_finite() {
            return Err(Error::Domain(format!("similarity time must exceed 1, got {s}")));
        }
        let inv = s.powf(-2.0 * self.beta);
        Ok(ProfileSlice {
            s,
            p: self.p,
            b: self.b,
            a: self.a,
            beta: self.beta,
            inv_s2b: inv,
        })
    }

    pub fn phi(&self, y: f64, s: f64) -> Result<f64> {
        Ok(self.at(s)?.value(y))
    }

    pub fn grad_phi(&self, y: f64, s: f64) -> Result<f64> {
        Ok(self.at(s)?.grad(y))
    }
}

/// `φ(·, s)` and its derivatives at one similarity time.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSlice {
    pub s: f64,
    p: f64,
    b: f64,
    a: f64,
    beta: f64,
    inv_s2b: f64,
}

impl ProfileSlice {
    #[inline]
    fn base(&self, y: f64) -> f64 {
        self.p - 1.0 + self.b * self.inv_s2b * y * y
    }

    /// `s^{-2β}`.
    pub fn inv_s2b(&self) -> f64 {
        self.inv_s2b
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        self.base(y).powf(-1.0 / (self.p - 1.0)) + self.a * self.inv_s2b
    }

    #[inline]
    pub fn grad(&self, y: f64) -> f64 {
        let pm1 = self.p - 1.0;
        -(2.0 * self.b * self.inv_s2b * y / pm1) * self.base(y).powf(-self.p / pm1)
    }

    pub fn second(&self, y: f64) -> f64 {
        let pm1 = self.p - 1.0;
        let bs = self.b * self.inv_s2b;
        let z = self.base(y);
        -(2.0 * bs / pm1)
            * (z.powf(-self.p / pm1) - (2.0 * self.p * bs * y * y / pm1) * z.powf(-(2.0 * self.p - 1.0) / pm1))
    }

    /// `∂φ/∂s` at fixed `y`.
    pub fn time_derivative(&self, y: f64) -> f64 {
        let pm1 = self.p - 1.0;
        let k = 2.0 * self.beta * self.inv_s2b / self.s;
        k * self.b * y * y / pm1 * self.base(y).powf(-self.p / pm1) - k * self.a
    }
}

/// Classical profile `f₀(x) = (p − 1 + b₀ x²)^{-1/(p-1)}`.
pub fn classical_profile_f0(x: f64, p: f64) -> f64 {
    (p - 1.0 + classical_b0(p) * x * x).powf(-1.0 / (p - 1.0))
}

/// Scaling `v = λu` between the main equation with coefficient `μ` on the
/// gradient term and the viscous Hamilton–Jacobi form with coefficient `ν` on
/// the power term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VhjMap {
    pub nu: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl VhjMap {
    pub fn from_nu(nu: f64, p: f64) -> Result<Self> {
        check_vhj_p(p)?;
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::ParameterDomain(format!("nu = {nu} must be positive")));
        }
        let mu = nu.powf(-1.0 / (p + 1.0));
        Ok(Self {
            nu,
            mu,
            lambda: mu.powf(1.0 / (critical_q(p) - 1.0)),
        })
    }

    pub fn from_mu(mu: f64, p: f64) -> Result<Self> {
        check_vhj_p(p)?;
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::ParameterDomain(format!("mu = {mu} must be positive")));
        }
        Ok(Self {
            nu: mu.powf(-(p + 1.0)),
            mu,
            lambda: mu.powf(1.0 / (critical_q(p) - 1.0)),
        })
    }
}

fn check_vhj_p(p: f64) -> Result<()> {
    if p > 3.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("p = {p} violates p > 3")))
    }
}
