//! Physical-space cross-check: `u_t = u_xx + μ|u_x|^q + |u|^{p−1}u`.
//!
//! The equation is invariant under `u ↦ λ^{2/(p−1)} u(λ² t, λ x)`, so the run
//! is carried out in units where the prescribed blow-up time is 1 and mapped
//! back afterwards. The mesh is graded, `x_j = x_c sinh(j/m)`: nearly uniform
//! with spacing `x_c/m` in the core and with spacing proportional to `|x|` beyond.
//! Self-similar collapse toward the origin then stays resolved until its
//! width reaches a few `x_c`.

use serde::{Deserialize, Serialize};

use super::imex::{thomas, Power};
use crate::constants::ProfileConstants;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fit::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalConfig {
    /// Half-width of the domain in units of `√T`.
    pub half_width: f64,
    /// Core scale `x_c` of the graded mesh, in units of `√T`.
    pub core: f64,
    /// Mesh points per e-fold of `x` outside the core.
    pub per_efold: f64,
    /// Step size as a fraction of the explicit stability limit.
    pub safety: f64,
    /// Stop once `‖u‖∞ ≥ amplification · ‖u₀‖∞`.
    pub amplification: f64,
    pub max_steps: usize,
    /// Accepted steps used to extrapolate the blow-up time.
    pub fit_window: usize,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            half_width: 470.0,
            core: 1e-9,
            per_efold: 32.0,
            safety: 0.005,
            amplification: 2e3,
            max_steps: 200_000,
            fit_window: 20,
        }
    }
}

/// One accepted physical step, in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalSample {
    pub t: f64,
    pub sup_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhysicalRun {
    /// Blow-up time used for normalisation.
    pub t_guess: f64,
    pub history: Vec<PhysicalSample>,
    /// Extrapolated blow-up time.
    pub t_hat: f64,
    /// Slope of `‖u‖∞^{−(p−1)}` against `t` over the fit window.
    pub slope: f64,
    pub amplification: f64,
    /// Blow-up was not deep enough to reach the requested amplification.
    pub inconclusive: bool,
    /// Mesh positions (physical units) at the last step.
    pub x: Vec<f64>,
    /// `u(x, t_last)` in physical units.
    pub u: Vec<f64>,
    /// `sup |w − φ|` over `|y| ≤ 10 s^β` after mapping the last state to
    /// similarity variables with `T̂`.
    pub similarity_deviation: f64,
    /// Similarity time of the last state.
    pub s_last: f64,
    /// `T̂ − t` at the last state.
    pub remaining: f64,
}

struct GradedMesh {
    x: Vec<f64>,
}

impl GradedMesh {
    fn new(half_width: f64, core: f64, per_efold: f64) -> Result<Self> {
        if !(half_width > 0.0 && core > 0.0 && per_efold > 0.0) {
            return Err(Error::Domain("graded mesh needs positive half-width, core and density".into()));
        }
        let m = (per_efold * (half_width / core).asinh()).ceil() as usize;
        if m < 4 {
            return Err(Error::Domain("graded mesh is too coarse".into()));
        }
        let scale = half_width / (m as f64 / per_efold).sinh();
        let half: Vec<f64> = (0..=m).map(|j| scale * (j as f64 / per_efold).sinh()).collect();
        let mut x: Vec<f64> = half.iter().rev().map(|v| -v).collect();
        x.extend_from_slice(&half[1..]);
        Ok(Self { x })
    }
}

/// Integrates from `u₀` (a function of physical `x`) toward blow-up and
/// extrapolates the blow-up time.
pub fn run_physical_rescaled<F: Fn(f64) -> f64>(
    c: &ProfileConstants,
    t_guess: f64,
    initial: F,
    config: &PhysicalConfig,
) -> Result<PhysicalRun> {
    if !(t_guess > 0.0) {
        return Err(Error::Domain(format!("T guess must be positive, got {t_guess}")));
    }
    if config.fit_window < 3 {
        return Err(Error::Domain("blow-up time fit needs at least 3 steps".into()));
    }
    let (p, q, mu) = (c.p, c.q, c.mu);
    let length = t_guess.sqrt();
    let amp_scale = t_guess.powf(-1.0 / (p - 1.0));
    let mesh = GradedMesh::new(config.half_width, config.core, config.per_efold)?;
    let x = &mesh.x;
    let n = x.len();
    // Normalised data: ũ(ξ) = T^{1/(p−1)} u(√T ξ).
    let mut u: Vec<f64> = x.iter().map(|&xi| initial(length * xi) / amp_scale).collect();
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("initial data not finite at x = {}", length * x[i])));
    }
    let sup0 = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(sup0 > 0.0) {
        return Err(Error::Domain("initial data vanish identically".into()));
    }
    let power = Power::new(p);
    // Stencil weights for u_x and u_xx on the graded mesh.
    let mut gm = vec![0.0; n];
    let mut g0 = vec![0.0; n];
    let mut gp = vec![0.0; n];
    let mut lm = vec![0.0; n];
    let mut lp = vec![0.0; n];
    for i in 1..n - 1 {
        let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let d = hm * hp * (hm + hp);
        gm[i] = -hp * hp / d;
        g0[i] = (hp * hp - hm * hm) / d;
        gp[i] = hm * hm / d;
        lm[i] = 2.0 / (hm * (hm + hp));
        lp[i] = 2.0 / (hp * (hm + hp));
    }
    let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut tau = 0.0;
    let mut history = vec![PhysicalSample { t: 0.0, sup_u: sup0 }];
    let mut dts = vec![0.0];
    let mut steps = 0;
    let mut sup = sup0;
    let mut reached = false;
    while steps < config.max_steps {
        steps += 1;
        let mut grad = 0.0_f64;
        for i in 1..n - 1 {
            let g = gm[i] * u[i - 1] + g0[i] * u[i] + gp[i] * u[i + 1];
            grad = grad.max(g.abs());
            rhs[i] = u[i];
            scratch[i] = g;
        }
        let rate = p * sup.powf(p - 1.0);
        // Explicit advection at speed c against implicit diffusion is stable
        // for dt ≤ 2/c², independently of the mesh.
        let speed = mu.abs() * q * grad.powf(q - 1.0);
        let dt = config.safety * (1.0 / rate).min(2.0 / (speed * speed));
        for i in 1..n - 1 {
            rhs[i] += dt * (mu * scratch[i].abs().powf(q) + power.signed(u[i]));
            lower[i] = -dt * lm[i];
            upper[i] = -dt * lp[i];
            diag[i] = 1.0 + dt * (lm[i] + lp[i]);
        }
        // Far-field values are frozen.
        diag[0] = 1.0;
        upper[0] = 0.0;
        rhs[0] = u[0];
        diag[n - 1] = 1.0;
        lower[n - 1] = 0.0;
        rhs[n - 1] = u[n - 1];
        thomas(&lower, &diag, &upper, &mut rhs, &mut scratch);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure {
                s: tau * t_guess,
                reason: "non-finite physical solution".into(),
            });
        }
        std::mem::swap(&mut u, &mut rhs);
        tau += dt;
        sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        history.push(PhysicalSample { t: tau, sup_u: sup });
        dts.push(dt);
        if sup >= config.amplification * sup0 {
            reached = true;
            break;
        }
    }
    // Near blow-up the remaining time drops below the resolution of τ ≈ 1,
    // so the window is fitted in local time accumulated from its first step.
    let start = history.len().saturating_sub(config.fit_window);
    let window = &history[start..];
    let mut ts = Vec::with_capacity(window.len());
    let mut local = 0.0;
    for dt in &dts[start..] {
        if !ts.is_empty() {
            local += dt;
        }
        ts.push(local);
    }
    let zs: Vec<f64> = window.iter().map(|h| h.sup_u.powf(-(p - 1.0))).collect();
    let line = linear_fit(&ts, &zs).ok_or_else(|| Error::Domain("degenerate blow-up fit window".into()))?;
    let root = -line.intercept / line.slope;
    let tau_hat = window[0].t + root;
    // Similarity variables in normalised units: s = s_T − ln(τ̂ − τ), s_T = −ln T.
    let remaining = (root - local).max(f64::MIN_POSITIVE);
    let s_last = -t_guess.ln() - remaining.ln();
    let similarity_deviation = similarity_deviation(c, x, &u, remaining, s_last);
    Ok(PhysicalRun {
        t_guess,
        history: history
            .iter()
            .map(|h| PhysicalSample {
                t: h.t * t_guess,
                sup_u: h.sup_u * amp_scale,
            })
            .collect(),
        t_hat: tau_hat * t_guess,
        slope: line.slope,
        amplification: sup / sup0,
        inconclusive: !reached,
        x: x.iter().map(|v| v * length).collect(),
        u: u.iter().map(|v| v * amp_scale).collect(),
        similarity_deviation,
        s_last,
        remaining: remaining * t_guess,
    })
}

fn interpolate(x: &[f64], u: &[f64], at: f64) -> Option<f64> {
    if at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    let j = x.partition_point(|&v| v < at).clamp(1, x.len() - 1);
    let t = (at - x[j - 1]) / (x[j] - x[j - 1]);
    Some(u[j - 1] * (1.0 - t) + u[j] * t)
}

fn similarity_deviation(c: &ProfileConstants, x: &[f64], u: &[f64], remaining: f64, s: f64) -> f64 {
    let Ok(slice) = c.at(s) else {
        return f64::NAN;
    };
    let scale = remaining.powf(1.0 / (c.p - 1.0));
    let len = remaining.sqrt();
    let reach = 10.0 * s.powf(c.beta);
    (0..=400)
        .filter_map(|i| {
            let y = -reach + 2.0 * reach * i as f64 / 400.0;
            interpolate(x, u, y * len).map(|v| (scale * v - slice.value(y)).abs())
        })
        .fold(0.0_f64, f64::max)
}

/// `u₀(x) = T^{−1/(p−1)} w(x/√T)` from a similarity field, using `φ(·, s)`
/// beyond the sampled range.
pub fn physical_initial_from_field<'a>(
    c: &'a ProfileConstants,
    w: &'a Field,
    t: f64,
) -> Result<impl Fn(f64) -> f64 + 'a> {
    let slice = c.at(w.s())?;
    let scale = t.powf(-1.0 / (c.p - 1.0));
    let len = t.sqrt();
    Ok(move |x: f64| {
        let y = x / len;
        scale * w.interpolate(y).unwrap_or_else(|| slice.value(y))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalProfileReport {
    pub inconclusive: bool,
    pub amplification: f64,
    /// Sampled `(x, u(x, t_last))` with `x > 0`.
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub target_slope: f64,
    /// Trend of `ln(u^{−(p−1)} x^{−2})` against `ln x`.
    pub trend_raw: f64,
    /// Same after dividing by `[2|ln x|]^{(p+1)/(p−1)}`.
    pub trend_corrected: f64,
    /// Ratio of `u` to the asymptote with the constant `b` at each sample.
    pub asymptote_ratio: Vec<f64>,
    pub all_finite_positive: bool,
}

/// Required amplification for a conclusive final-profile check.
pub const FINAL_PROFILE_AMPLIFICATION: f64 = 1e3;

/// Compares `u(·, t_last)` with `u*(x) ∼ (b x²/[2|ln|x||]^{(p+1)/(p−1)})^{−1/(p−1)}`
/// at `x` between `100` profile widths and `0.1 √T`.
pub fn final_profile_check(run: &PhysicalRun, c: &ProfileConstants) -> FinalProfileReport {
    let p = c.p;
    let width = run.remaining.sqrt() * run.s_last.max(1.0).powf(c.beta);
    let lo = 100.0 * width;
    let hi = 0.1 * run.t_guess.sqrt();
    let mut samples = Vec::new();
    if lo < hi {
        for i in 0..=24 {
            let x = (lo.ln() + (hi / lo).ln() * i as f64 / 24.0).exp();
            if let Some(u) = interpolate(&run.x, &run.u, x) {
                samples.push((x, u));
            }
        }
    }
    let all_finite_positive = samples.iter().all(|&(_, u)| u.is_finite() && u > 0.0);
    let inconclusive = run.amplification < FINAL_PROFILE_AMPLIFICATION || samples.len() < 5 || !all_finite_positive;
    let lx: Vec<f64> = samples.iter().map(|(x, _)| x.ln()).collect();
    let lu: Vec<f64> = samples.iter().map(|(_, u)| u.ln()).collect();
    let slope = linear_fit(&lx, &lu).map_or(f64::NAN, |l| l.slope);
    let e = (p + 1.0) / (p - 1.0);
    let raw: Vec<f64> = samples
        .iter()
        .map(|&(x, u)| (u.powf(-(p - 1.0)) / (x * x)).ln())
        .collect();
    let corrected: Vec<f64> = samples
        .iter()
        .zip(&raw)
        .map(|(&(x, _), r)| r + e * (2.0 * x.ln().abs()).ln())
        .collect();
    let trend_raw = linear_fit(&lx, &raw).map_or(f64::NAN, |l| l.slope);
    let trend_corrected = linear_fit(&lx, &corrected).map_or(f64::NAN, |l| l.slope);
    let asymptote_ratio = samples
        .iter()
        .map(|&(x, u)| {
            let star = (c.b * x * x / (2.0 * x.ln().abs()).powf(e)).powf(-1.0 / (p - 1.0));
            u / star
        })
        .collect();
    FinalProfileReport {
        inconclusive,
        amplification: run.amplification,
        samples,
        slope,
        target_slope: -2.0 / (p - 1.0),
        trend_raw,
        trend_corrected,
        asymptote_ratio,
        all_finite_positive,
    }
}
