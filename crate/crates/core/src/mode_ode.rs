//! Two-mode inner expansion `w̄ = w̄₀ + w̄₂ h₂` and its asymptotics.

use serde::Serialize;

use crate::constants::{c2_tilde, ProfileConstants};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::quadrature::{abs_moment, AbsPowerRule, DEFAULT_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeState {
    pub s: f64,
    pub w0bar: f64,
    pub w2bar: f64,
}

impl ModeState {
    pub fn new(s: f64, w0bar: f64, w2bar: f64) -> Self {
        Self { s, w0bar, w2bar }
    }
}

/// Right-hand side of the `(w̄₀, w̄₂)` system.
#[derive(Debug, Clone, Copy)]
pub struct ModeOde {
    p: f64,
    q: f64,
    kappa: f64,
    c0: f64,
    c2: f64,
    /// Coefficient of the optional `|w̄₀|³ + |w̄₂|³` remainder (zero by default).
    pub cubic: f64,
}

impl ModeOde {
    pub fn new(c: &ProfileConstants) -> Self {
        Self {
            p: c.p,
            q: c.q,
            kappa: c.kappa,
            c0: c.c0_tilde,
            c2: c.c2_tilde,
            cubic: 0.0,
        }
    }

    pub fn with_cubic(mut self, cubic: f64) -> Self {
        self.cubic = cubic;
        self
    }

    /// `(w̄₀′, w̄₂′)`.
    #[inline]
    pub fn rhs(&self, w0: f64, w2: f64) -> [f64; 2] {
        let k = self.p / self.kappa;
        let a2q = w2.abs().powf(self.q);
        let r = self.cubic * (w0.abs().powi(3) + w2.abs().powi(3));
        [
            w0 + 0.5 * k * (w0 * w0 + 8.0 * w2 * w2) + self.c0 * a2q + r,
            k * (w0 * w2 + 4.0 * w2 * w2) + self.c2 * a2q + r,
        ]
    }

    /// The two contributions to `w̄₂′` at `w̄₀ = 0`: the quadratic part
    /// `(4p/κ)w̄₂²` and the gradient part `c̃₂|w̄₂|^q`.
    pub fn w2_terms(&self, w2: f64) -> (f64, f64) {
        (4.0 * self.p / self.kappa * w2 * w2, self.c2 * w2.abs().powf(self.q))
    }

    /// Quasi-static `w̄₀` with `w̄₀′ = 0` at the given `w̄₂`.
    pub fn slaved_w0(&self, w2: f64) -> f64 {
        let mut w0 = 0.0;
        for _ in 0..50 {
            let f = self.rhs(w0, w2)[0];
            let df = 1.0 + self.p / self.kappa * w0 + 3.0 * self.cubic * w0 * w0.abs();
            let next = w0 - f / df;
            if (next - w0).abs() <= 1e-16 * next.abs() {
                return next;
            }
            w0 = next;
        }
        w0
    }
}

pub fn ode_rhs(state: &ModeState, c: &ProfileConstants) -> (f64, f64) {
    let [a, b] = ModeOde::new(c).rhs(state.w0bar, state.w2bar);
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-20,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl StepControl {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }
}

/// Accepted states with their derivatives, for cubic Hermite dense output.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub states: Vec<ModeState>,
    #[serde(skip)]
    derivs: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn first(&self) -> &ModeState {
        &self.states[0]
    }

    pub fn last(&self) -> &ModeState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Derivative `(w̄₀′, w̄₂′)` at the i-th accepted state.
    pub fn derivative(&self, i: usize) -> [f64; 2] {
        self.derivs[i]
    }

    /// State at `s`, interpolated with cubic Hermite polynomials.
    pub fn sample(&self, s: f64) -> Option<ModeState> {
        let (lo, hi) = (self.first().s, self.last().s);
        if !(s >= lo && s <= hi) {
            return None;
        }
        let j = self.states.partition_point(|st| st.s < s).clamp(1, self.len() - 1);
        let (a, b) = (&self.states[j - 1], &self.states[j]);
        let (da, db) = (self.derivs[j - 1], self.derivs[j]);
        let h = b.s - a.s;
        let t = (s - a.s) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let interp = |ya: f64, yb: f64, ma: f64, mb: f64| h00 * ya + h10 * h * ma + h01 * yb + h11 * h * mb;
        Some(ModeState {
            s,
            w0bar: interp(a.w0bar, b.w0bar, da[0], db[0]),
            w2bar: interp(a.w2bar, b.w2bar, da[1], db[1]),
        })
    }

    fn reversed(mut self) -> Self {
        self.states.reverse();
        self.derivs.reverse();
        self
    }
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes `c_i`
// are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn run(ode: &ModeOde, start: ModeState, s_target: f64, control: &StepControl, bound: f64) -> Result<Trajectory> {
    let dir = if s_target >= start.s { 1.0 } else { -1.0 };
    let mut y = [start.w0bar, start.w2bar];
    let mut s = start.s;
    let mut f = ode.rhs(y[0], y[1]);
    let mut traj = Trajectory {
        states: vec![start],
        derivs: vec![f],
    };
    let mut h = control.h_init.min(control.h_max).min((s_target - s).abs());
    let mut steps = 0;
    while dir * (s_target - s) > 0.0 {
        steps += 1;
        if steps > control.max_steps {
            return Err(Error::StepFailure {
                s,
                reason: format!("step budget of {} exhausted", control.max_steps),
            });
        }
        let remaining = (s_target - s).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;
        let mut k = [[0.0; 2]; 7];
        k[0] = f;
        for i in 1..7 {
            let mut yi = y;
            for j in 0..i {
                yi[0] += hs * A[i][j] * k[j][0];
                yi[1] += hs * A[i][j] * k[j][1];
            }
            k[i] = ode.rhs(yi[0], yi[1]);
        }
        let mut y_new = y;
        for j in 0..6 {
            y_new[0] += hs * A[6][j] * k[j][0];
            y_new[1] += hs * A[6][j] * k[j][1];
        }
        let mut err = 0.0_f64;
        for c in 0..2 {
            let e: f64 = (0..7).map(|j| E[j] * k[j][c]).sum::<f64>() * hs;
            let scale = control.atol + control.rtol * y[c].abs().max(y_new[c].abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            h *= 0.2;
            if h < 1e-14 * s.abs().max(1.0) {
                return Err(Error::StepFailure {
                    s,
                    reason: "non-finite mode state".into(),
                });
            }
            continue;
        }
        if err <= 1.0 {
            s = if last { s_target } else { s + hs };
            y = y_new;
            f = k[6];
            if y[0].abs() >= bound || y[1].abs() >= bound {
                let prev = traj.last();
                return Err(Error::BlowAway {
                    s: prev.s,
                    w0bar: prev.w0bar,
                    w2bar: prev.w2bar,
                    bound,
                });
            }
            traj.states.push(ModeState::new(s, y[0], y[1]));
            traj.derivs.push(f);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(control.h_max);
    }
    Ok(traj)
}

/// Forward adaptive integration from `initial` to `s_end`.
///
/// Leaving the box `|w̄₀|, |w̄₂| < κ/2` stops the run with
/// [`Error::BlowAway`] carrying the last valid state.
pub fn integrate(
    c: &ProfileConstants,
    ode: &ModeOde,
    initial: ModeState,
    s_end: f64,
    control: &StepControl,
) -> Result<Trajectory> {
    if !(s_end > initial.s) {
        return Err(Error::Domain(format!(
            "s_end = {s_end} must exceed the initial time {}",
            initial.s
        )));
    }
    run(ode, initial, s_end, control, 0.5 * c.kappa)
}

/// The bounded trajectory on `[s0, s_end]` with `w̄₂(s0) = w2_initial`.
///
/// `w̄₀` grows like `e^s` away from its slaved value, so its initial value is
/// not free: the trajectory is found by integrating backward from `s_end`,
/// where `w̄₀` is set to the quasi-static value, and adjusting the terminal
/// `w̄₂` by bracketed regula falsi until `w̄₂(s0)` matches.
pub fn integrate_bounded(
    c: &ProfileConstants,
    ode: &ModeOde,
    s0: f64,
    w2_initial: f64,
    s_end: f64,
    control: &StepControl,
) -> Result<Trajectory> {
    if !(s_end > s0) {
        return Err(Error::Domain(format!("s_end = {s_end} must exceed s0 = {s0}")));
    }
    let bound = 0.5 * c.kappa;
    if w2_initial == 0.0 {
        return integrate(c, ode, ModeState::new(s0, 0.0, 0.0), s_end, control);
    }
    let sign = w2_initial.signum();
    if sign * c.c2_tilde >= 0.0 {
        return Err(Error::Domain(
            "w2 grows away from zero for this sign; no decaying trajectory exists".into(),
        ));
    }
    let backward = |x: f64| -> Result<Trajectory> {
        let xi = sign * x.exp();
        let start = ModeState::new(s_end, ode.slaved_w0(xi), xi);
        run(ode, start, s0, control, bound).map(Trajectory::reversed)
    };
    let target = w2_initial.abs().ln();
    // Overshooting terminal values blow up on the way back; they count as
    // "too large" for the bracketing below.
    let miss = |x: f64| -> Result<Option<f64>> {
        match backward(x) {
            Ok(t) => Ok(Some(t.first().w2bar.abs().ln() - target)),
            Err(Error::BlowAway { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let too_large = |g: Option<f64>| g.is_none_or(|g| g > 0.0);
    // Pure gradient-term decay overestimates |w̄₂(s_end)| and seeds the bracket.
    let q = c.q;
    let guess = (w2_initial.abs().powf(1.0 - q) + (q - 1.0) * c.c2_tilde.abs() * (s_end - s0))
        .powf(1.0 / (1.0 - q));
    let (mut hi, mut g_hi) = (guess.ln(), miss(guess.ln())?);
    let (mut lo, mut g_lo) = (hi, g_hi);
    let mut expansions = 0;
    while too_large(g_lo) {
        lo -= 1.0;
        g_lo = miss(lo)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Convergence {
                what: "bracketing the bounded mode trajectory".into(),
                achieved: f64::NAN,
                target: 0.0,
            });
        }
    }
    while !too_large(g_hi) {
        hi += 1.0;
        g_hi = miss(hi)?;
    }
    // Illinois regula falsi, with bisection while the upper end is blown away.
    let mut g_lo_val = g_lo.expect("finite by construction");
    let mut side = 0;
    for _ in 0..200 {
        let x = match g_hi {
            Some(gh) => (lo * gh - hi * g_lo_val) / (gh - g_lo_val),
            None => 0.5 * (lo + hi),
        };
        let g = miss(x)?;
        if let Some(v) = g {
            if v.abs() < 1e-13 {
                return backward(x);
            }
        }
        if too_large(g) {
            hi = x;
            g_hi = g;
            if side == 1 {
                g_lo_val *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            g_lo_val = g.expect("finite below the root");
            if side == -1 {
                g_hi = g_hi.map(|v| 0.5 * v);
            }
            side = -1;
        }
        if hi - lo < 1e-15 * lo.abs().max(1.0) {
            return backward(lo);
        }
    }
    Err(Error::Convergence {
        what: "bounded mode trajectory".into(),
        achieved: hi - lo,
        target: 1e-15,
    })
}

/// Log-log fits of `|w̄₂|` and `|w̄₀|` over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub s_lo: f64,
    pub s_hi: f64,
    pub exponent_w2: f64,
    /// `|w̄₂(s_hi)| s_hi^{1/(q−1)}`, to compare with `B`.
    pub prefactor_w2: f64,
    pub residual_w2: f64,
    pub exponent_w0: f64,
    /// `|w̄₀(s_hi)| s_hi^{q/(q−1)}`, to compare with `c̃₀ B^q`.
    pub prefactor_w0: f64,
    pub residual_w0: f64,
    pub target_exponent_w2: f64,
    pub target_exponent_w0: f64,
}

/// Number of log-uniform resampling points in a fit window.
pub const FIT_SAMPLES: usize = 200;

/// Fit over the last decade of the trajectory. Requires at least 1.5 decades.
pub fn fit_asymptotics(traj: &Trajectory, c: &ProfileConstants) -> Result<AsymptoticFit> {
    let (lo, hi) = (traj.first().s, traj.last().s);
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return Err(Error::Domain(format!(
            "trajectory spans s in [{lo}, {hi}], need at least 1.5 decades"
        )));
    }
    fit_window(traj, c, hi / 10.0, hi)
}

pub fn fit_window(traj: &Trajectory, c: &ProfileConstants, s_lo: f64, s_hi: f64) -> Result<AsymptoticFit> {
    let samples: Vec<ModeState> = (0..FIT_SAMPLES)
        .map(|i| {
            let t = i as f64 / (FIT_SAMPLES - 1) as f64;
            let s = (s_lo.ln() + t * (s_hi / s_lo).ln()).exp().clamp(s_lo, s_hi);
            traj.sample(s)
                .ok_or_else(|| Error::Domain(format!("s = {s} outside the trajectory")))
        })
        .collect::<Result<_>>()?;
    let log_s: Vec<f64> = samples.iter().map(|st| st.s.ln()).collect();
    let log_abs = |sel: fn(&ModeState) -> f64| -> Result<Vec<f64>> {
        samples
            .iter()
            .map(|st| {
                let v = sel(st).abs();
                if v > 0.0 {
                    Ok(v.ln())
                } else {
                    Err(Error::Domain("mode vanishes inside the fit window".into()))
                }
            })
            .collect()
    };
    let w2 = linear_fit(&log_s, &log_abs(|st| st.w2bar)?).expect("distinct abscissae");
    let w0 = linear_fit(&log_s, &log_abs(|st| st.w0bar)?).expect("distinct abscissae");
    let e2 = 1.0 / (c.q - 1.0);
    let e0 = c.q / (c.q - 1.0);
    let end = samples.last().expect("non-empty");
    Ok(AsymptoticFit {
        s_lo,
        s_hi,
        exponent_w2: -w2.slope,
        prefactor_w2: end.w2bar.abs() * s_hi.powf(e2),
        residual_w2: w2.rms,
        exponent_w0: -w0.slope,
        prefactor_w0: end.w0bar.abs() * s_hi.powf(e0),
        residual_w0: w0.rms,
        target_exponent_w2: e2,
        target_exponent_w0: e0,
    })
}

/// Both sides of `∫|y|^q(y²−2)ρ = 2q∫|y|^qρ` and the resulting `c̃₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C2Identity {
    pub q: f64,
    pub mu: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
    pub c2_tilde: f64,
    pub sign_matches_mu: bool,
}

pub fn verify_c2_identity(q: f64, mu: f64) -> Result<C2Identity> {
    let rule = AbsPowerRule::new(q, 2 * DEFAULT_ORDER)?;
    verify_c2_identity_with(q, mu, &rule, abs_moment(q)?)
}

/// Same as [`verify_c2_identity`] with a caller-supplied rule and moment.
pub fn verify_c2_identity_with(q: f64, mu: f64, rule: &AbsPowerRule, moment: f64) -> Result<C2Identity> {
    let lhs = rule.integrate_even(|y| y * y - 2.0);
    let rhs = 2.0 * q * moment;
    let c2 = c2_tilde(mu, q, rule);
    Ok(C2Identity {
        q,
        mu,
        lhs,
        rhs,
        relative_error: (lhs - rhs).abs() / rhs.abs(),
        c2_tilde: c2,
        sign_matches_mu: c2.signum() == mu.signum(),
    })
}
