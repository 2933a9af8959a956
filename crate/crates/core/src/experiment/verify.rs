//! The identity battery behind `verify`.

use serde::{Deserialize, Serialize};

use crate::constants::{Params, ProfileConstants, VhjMap};
use crate::error::Result;
use crate::field::Field;
use crate::mode_ode::verify_c2_identity_with;
use crate::quadrature::{abs_moment, AbsPowerRule, QuadratureRule, DEFAULT_ORDER};
use crate::similarity::residual_r;
use crate::spectral::{apply_l, hermite_eval, hermite_norm_sq};

pub const MOMENT_TOLERANCE: f64 = 1e-10;
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;
pub const C2_TOLERANCE: f64 = 1e-10;
pub const CONSISTENCY_TOLERANCE: f64 = 1e-10;
pub const VHJ_TOLERANCE: f64 = 1e-12;
/// Accepted window for the observed order of the eigen-residual.
pub const ORDER_WINDOW: (f64, f64) = (1.9, 2.1);
/// Below this the eigen-residual is at round-off: the stencil is exact.
pub const EXACT_RESIDUAL: f64 = 1e-9;
/// Largest allowed ratio max/min of `s‖R(·,s)‖∞`.
pub const RESIDUAL_SPREAD: f64 = 3.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    /// Multiply every quadrature weight by `1 + eps`.
    pub weight_fault: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured discrepancy compared against `tolerance`.
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn below(name: &str, residual: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub all_passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Names of the checks, in report order.
pub const CHECK_NAMES: [&str; 8] = [
    "moment_square",
    "moment_cube",
    "orthogonality",
    "eigen_residual_order",
    "c2_identity",
    "residual_bound_trend",
    "constants_consistency",
    "vhj_round_trip",
];

/// `∫(y²−2)²ρ = 8` and `∫(y²−2)³ρ = 64`.
pub fn moment_checks(quad: &QuadratureRule) -> [Check; 2] {
    let m2 = quad.integrate(|y| (y * y - 2.0).powi(2));
    let m3 = quad.integrate(|y| (y * y - 2.0).powi(3));
    [
        Check::below(CHECK_NAMES[0], (m2 - 8.0).abs(), MOMENT_TOLERANCE, format!("value {m2:.16e}")),
        Check::below(CHECK_NAMES[1], (m3 - 64.0).abs(), MOMENT_TOLERANCE, format!("value {m3:.16e}")),
    ]
}

/// Worst `|⟨h_n,h_m⟩ − 2ⁿn!δ_nm|` over `n, m ≤ max_degree`.
pub fn orthogonality_error(quad: &QuadratureRule, max_degree: usize) -> f64 {
    let mut worst = 0.0_f64;
    for n in 0..=max_degree {
        for m in 0..=n {
            let ip = quad.integrate(|y| hermite_eval(n, y) * hermite_eval(m, y));
            let exact = if n == m { hermite_norm_sq(n) } else { 0.0 };
            worst = worst.max((ip - exact).abs());
        }
    }
    worst
}

/// `‖𝓛h_m − (1 − m/2)h_m‖∞` on `[-y_max, y_max]` with `n` nodes.
pub fn eigen_residual(m: usize, y_max: f64, n: usize) -> Result<f64> {
    let f = Field::from_fn(y_max, n, 0.0, |y| hermite_eval(m, y))?;
    let lf = apply_l(&f)?;
    let lambda = 1.0 - 0.5 * m as f64;
    Ok(lf
        .values()
        .iter()
        .zip(f.values())
        .map(|(l, v)| (l - lambda * v).abs())
        .fold(0.0, f64::max))
}

/// Residuals on three nested grids and the observed orders for `m ≤ 4`.
/// Degrees up to 2 are reproduced exactly by the stencils.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenConvergence {
    pub m: usize,
    pub residuals: [f64; 3],
    pub orders: [f64; 2],
    pub exact: bool,
    pub passed: bool,
}

pub fn eigen_convergence(m: usize) -> Result<EigenConvergence> {
    let y_max = 8.0;
    let ns = [801, 1601, 3201];
    let mut residuals = [0.0; 3];
    for (r, &n) in residuals.iter_mut().zip(&ns) {
        *r = eigen_residual(m, y_max, n)?;
    }
    let scale = hermite_eval(m, y_max).abs().max(1.0);
    let exact = residuals.iter().all(|r| *r <= EXACT_RESIDUAL * scale);
    let orders = [(residuals[0] / residuals[1]).log2(), (residuals[1] / residuals[2]).log2()];
    let in_window = orders.iter().all(|o| *o >= ORDER_WINDOW.0 && *o <= ORDER_WINDOW.1);
    Ok(EigenConvergence {
        m,
        residuals,
        orders,
        exact,
        passed: exact || in_window,
    })
}

/// `s‖R(·,s)‖∞` at log-spaced `s` in `[s_lo, s_hi]`.
pub fn residual_trend(c: &ProfileConstants, s_lo: f64, s_hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    (0..points)
        .map(|i| {
            let s = (s_lo.ln() + (s_hi / s_lo).ln() * i as f64 / (points - 1) as f64).exp();
            let r = residual_r(c, s, 20.0 * s.powf(c.beta), 20_001)?;
            Ok((s, s * r.max_abs()))
        })
        .collect()
}

/// Worst relative mismatch of `a = 2B = 2bκ/(p−1)²` on a grid of
/// `(p, μ)`, and whether `β ∈ (1/2, 1)` throughout.
pub fn constants_consistency(ps: &[f64], mus: &[f64]) -> Result<(f64, bool)> {
    let mut worst = 0.0_f64;
    let mut beta_ok = true;
    for &p in ps {
        for &mu in mus {
            let c = ProfileConstants::derive(&Params::new(p, mu)?)?;
            let two_b = 2.0 * c.big_b;
            let from_b = 2.0 * c.b * c.kappa / (p - 1.0).powi(2);
            worst = worst.max(((c.a - two_b) / two_b).abs()).max(((from_b - two_b) / two_b).abs());
            beta_ok &= c.beta > 0.5 && c.beta < 1.0;
        }
    }
    Ok((worst, beta_ok))
}

/// Worst error of the `ν ↔ μ` round trip and of `ν = μ^{−(p+1)}`.
pub fn vhj_errors(ps: &[f64], mus: &[f64]) -> Result<(f64, f64)> {
    let (mut round, mut law) = (0.0_f64, 0.0_f64);
    for &p in ps {
        for &mu in mus {
            let fwd = VhjMap::from_mu(mu, p)?;
            let back = VhjMap::from_nu(fwd.nu, p)?;
            round = round.max(((back.mu - mu) / mu).abs());
            law = law.max(((fwd.nu - mu.powf(-(p + 1.0))) / fwd.nu).abs());
        }
    }
    Ok((round, law))
}

pub fn run_battery(params: &Params, settings: &VerifySettings) -> Result<VerifyReport> {
    let eps = settings.weight_fault.unwrap_or(0.0);
    let quad = QuadratureRule::standard().with_weight_fault(eps);
    let mut checks = Vec::with_capacity(CHECK_NAMES.len());
    checks.extend(moment_checks(&quad));

    let ortho = orthogonality_error(&quad, 6);
    checks.push(Check::below(
        CHECK_NAMES[2],
        ortho,
        ORTHOGONALITY_TOLERANCE,
        "n, m <= 6".into(),
    ));

    let eig = (0..=4).map(eigen_convergence).collect::<Result<Vec<_>>>()?;
    let worst_order = eig
        .iter()
        .filter(|e| !e.exact)
        .flat_map(|e| e.orders)
        .fold(2.0_f64, |w, o| if (o - 2.0).abs() > (w - 2.0).abs() { o } else { w });
    checks.push(Check {
        name: CHECK_NAMES[3].into(),
        passed: eig.iter().all(|e| e.passed),
        residual: (worst_order - 2.0).abs(),
        tolerance: ORDER_WINDOW.1 - 2.0,
        detail: eig
            .iter()
            .map(|e| {
                if e.exact {
                    format!("m={} exact", e.m)
                } else {
                    format!("m={} orders {:.4} {:.4}", e.m, e.orders[0], e.orders[1])
                }
            })
            .collect::<Vec<_>>()
            .join("; "),
    });

    let mut c2_worst = 0.0_f64;
    let mut c2_sign = true;
    for p in [4.0, 5.0, 7.0, 10.0] {
        let q = crate::constants::critical_q(p);
        let rule = AbsPowerRule::new(q, 2 * DEFAULT_ORDER)?.with_weight_fault(eps);
        let id = verify_c2_identity_with(q, params.mu(), &rule, abs_moment(q)?)?;
        c2_worst = c2_worst.max(id.relative_error);
        c2_sign &= id.sign_matches_mu;
    }
    checks.push(Check {
        name: CHECK_NAMES[4].into(),
        passed: c2_worst <= C2_TOLERANCE && c2_sign,
        residual: c2_worst,
        tolerance: C2_TOLERANCE,
        detail: format!("p in {{4, 5, 7, 10}}, sign(c2) = sign(mu): {c2_sign}"),
    });

    let c = ProfileConstants::derive(params)?;
    let trend = residual_trend(&c, 20.0, 2000.0, 9)?;
    let hi = trend.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = trend.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    checks.push(Check::below(
        CHECK_NAMES[5],
        hi / lo,
        RESIDUAL_SPREAD,
        format!("s*sup|R| in [{lo:.6e}, {hi:.6e}] over s in [20, 2000]"),
    ));

    let ps: Vec<f64> = (0..10).map(|i| 3.5 + 0.75 * i as f64).collect();
    let mus = [0.25, 0.5, 1.0, 2.0, 4.0];
    let (worst, beta_ok) = constants_consistency(&ps, &mus)?;
    checks.push(Check {
        name: CHECK_NAMES[6].into(),
        passed: worst <= CONSISTENCY_TOLERANCE && beta_ok,
        residual: worst,
        tolerance: CONSISTENCY_TOLERANCE,
        detail: format!("50-point (p, mu) grid, beta in (1/2, 1): {beta_ok}"),
    });

    let (round, law) = vhj_errors(&[4.0, 5.0, 7.0], &[0.3, 1.0, 2.5])?;
    checks.push(Check::below(
        CHECK_NAMES[7],
        round.max(law),
        VHJ_TOLERANCE,
        format!("round trip {round:.3e}, nu = mu^-(p+1) {law:.3e}"),
    ));

    Ok(VerifyReport {
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
