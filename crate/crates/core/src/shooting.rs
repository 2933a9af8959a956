//! Exit times, the exit map `Φ`, its boundary degree and the search for
//! trapped `(d₀, d₁)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::ProfileConstants;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::fit::linear_fit;
use crate::pde::{build_initial_data, run_from, SolverConfig, Termination};
use crate::similarity::{cutoff_chi0, Component, ModeVector, ShrinkBounds};

/// Axis-aligned rectangle in the `(d₀, d₁)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub d0_lo: f64,
    pub d0_hi: f64,
    pub d1_lo: f64,
    pub d1_hi: f64,
}

impl Rect {
    pub fn new(d0_lo: f64, d0_hi: f64, d1_lo: f64, d1_hi: f64) -> Result<Self> {
        if !(d0_lo < d0_hi && d1_lo < d1_hi) || ![d0_lo, d0_hi, d1_lo, d1_hi].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!(
                "degenerate rectangle [{d0_lo}, {d0_hi}] x [{d1_lo}, {d1_hi}]"
            )));
        }
        Ok(Self {
            d0_lo,
            d0_hi,
            d1_lo,
            d1_hi,
        })
    }

    /// `[−2, 2]²`.
    pub fn standard() -> Self {
        Self {
            d0_lo: -2.0,
            d0_hi: 2.0,
            d1_lo: -2.0,
            d1_hi: 2.0,
        }
    }

    pub fn centered(d0: f64, d1: f64, half_width: f64) -> Result<Self> {
        Self::new(d0 - half_width, d0 + half_width, d1 - half_width, d1 + half_width)
    }

    pub fn contains(&self, d0: f64, d1: f64) -> bool {
        d0 >= self.d0_lo && d0 <= self.d0_hi && d1 >= self.d1_lo && d1 <= self.d1_hi
    }

    pub fn diameter(&self) -> f64 {
        (self.d0_hi - self.d0_lo).hypot(self.d1_hi - self.d1_lo)
    }

    /// Corners counter-clockwise from the lower left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.d0_lo, self.d1_lo),
            (self.d0_hi, self.d1_lo),
            (self.d0_hi, self.d1_hi),
            (self.d0_lo, self.d1_hi),
        ]
    }

    /// Quadrants counter-clockwise from the lower left.
    pub fn quadrants(&self) -> [Rect; 4] {
        let m0 = 0.5 * (self.d0_lo + self.d0_hi);
        let m1 = 0.5 * (self.d1_lo + self.d1_hi);
        [
            Rect { d0_hi: m0, d1_hi: m1, ..*self },
            Rect { d0_lo: m0, d1_hi: m1, ..*self },
            Rect { d0_lo: m0, d1_lo: m1, ..*self },
            Rect { d0_hi: m0, d1_lo: m1, ..*self },
        ]
    }

    /// `n` points on the boundary, counter-clockwise from the lower left,
    /// spaced uniformly in arc length.
    pub fn boundary_points(&self, n: usize) -> Vec<(f64, f64)> {
        let (w, h) = (self.d0_hi - self.d0_lo, self.d1_hi - self.d1_lo);
        let perimeter = 2.0 * (w + h);
        (0..n)
            .map(|i| {
                let mut t = perimeter * i as f64 / n as f64;
                if t < w {
                    return (self.d0_lo + t, self.d1_lo);
                }
                t -= w;
                if t < h {
                    return (self.d0_hi, self.d1_lo + t);
                }
                t -= h;
                if t < w {
                    return (self.d0_hi - t, self.d1_hi);
                }
                t -= w;
                (self.d0_lo, self.d1_hi - t)
            })
            .collect()
    }
}

/// One `(d₀, d₁)` trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootState {
    pub d0: f64,
    pub d1: f64,
    /// Exit time, or the horizon.
    pub s_star: f64,
    /// `None` when the horizon was reached.
    pub exit_component: Option<Component>,
    pub exit_sign: Option<i8>,
    /// `Φ(d₀, d₁)` on the boundary of the unit square.
    pub phi_image: Option<[f64; 2]>,
    /// Some component other than `v₀`, `v₁` left its bound.
    pub violation: bool,
    #[serde(skip)]
    pub history: Vec<ModeVector>,
}

impl ShootState {
    pub fn exited(&self) -> bool {
        self.exit_component.is_some()
    }

    pub fn signature(&self) -> Option<(Component, i8)> {
        Some((self.exit_component?, self.exit_sign?))
    }

    /// `0`, `1`, `other` or `none`.
    pub fn component_label(&self) -> &'static str {
        match self.exit_component {
            Some(Component::Mode0) => "0",
            Some(Component::Mode1) => "1",
            Some(_) => "other",
            None => "none",
        }
    }
}

/// Anything that maps `(d₀, d₁)` to an exit record.
pub trait ExitMap: Sync {
    fn probe(&self, d0: f64, d1: f64) -> Result<ShootState>;

    /// Similarity time at which trajectories start.
    fn s0(&self) -> f64;
}

/// Perturbation of the initial data: `ε₀ h₀ + ε₁ h₁` added inside the
/// cut-off, and a shift of `s₀`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub h0: f64,
    pub h1: f64,
    pub s0_shift: f64,
}

/// The exit map of the similarity equation.
#[derive(Debug, Clone)]
pub struct PdeExitMap {
    pub c: ProfileConstants,
    pub config: SolverConfig,
    pub a: f64,
    pub gamma: f64,
    pub perturbation: Perturbation,
}

impl PdeExitMap {
    pub fn new(c: &ProfileConstants, config: SolverConfig, a: f64, gamma: f64) -> Result<Self> {
        config.validate(c)?;
        ShrinkBounds::new(a, config.s0, gamma, c.beta)?;
        Ok(Self {
            c: *c,
            config: SolverConfig {
                stop_on_exit: true,
                snapshot_times: Vec::new(),
                ..config
            },
            a,
            gamma,
            perturbation: Perturbation::default(),
        })
    }

    pub fn perturbed(&self, perturbation: Perturbation) -> Result<Self> {
        let mut config = self.config.clone();
        config.s0 += perturbation.s0_shift;
        config.validate(&self.c)?;
        Ok(Self {
            config,
            perturbation,
            ..self.clone()
        })
    }

    fn initial(&self, d0: f64, d1: f64) -> Result<Field> {
        let (c, cfg) = (&self.c, &self.config);
        let base = build_initial_data(c, cfg.s0, d0, d1, self.a, cfg.k, cfg.y_max, cfg.n)?;
        let Perturbation { h0, h1, .. } = self.perturbation;
        if h0 == 0.0 && h1 == 0.0 {
            return Ok(base);
        }
        let support = cfg.k * cfg.s0.powf(c.beta);
        base.map(|y, w| w + (h0 + h1 * y) * cutoff_chi0(2.0 * y / support))
    }
}

impl ExitMap for PdeExitMap {
    fn probe(&self, d0: f64, d1: f64) -> Result<ShootState> {
        let record = run_from(&self.config, &self.c, self.initial(d0, d1)?, self.a, self.gamma)?;
        let beta = self.c.beta;
        let (a, gamma) = (self.a, self.gamma);
        state_from_history(d0, d1, record.modes, &record.termination, |s| {
            ShrinkBounds::new(a, s, gamma, beta)
        })
    }

    fn s0(&self) -> f64 {
        self.config.s0
    }
}

fn ratios(mv: &ModeVector, sb: &ShrinkBounds) -> [f64; 2] {
    [mv.v0 / sb.bound_0, mv.v1 / sb.bound_1]
}

/// Projects onto the boundary of the unit square along the ray through 0.
fn to_square(v: [f64; 2]) -> Option<[f64; 2]> {
    let m = v[0].abs().max(v[1].abs());
    (m > 0.0 && m.is_finite()).then(|| [v[0] / m, v[1] / m])
}

/// Builds a [`ShootState`] from a mode history. An exit at the first sample
/// is mapped radially; otherwise `s*` and `Φ` are interpolated linearly to
/// the crossing of the exiting component.
pub fn state_from_history(
    d0: f64,
    d1: f64,
    history: Vec<ModeVector>,
    termination: &Termination,
    bounds: impl Fn(f64) -> Result<ShrinkBounds>,
) -> Result<ShootState> {
    let last = *history
        .last()
        .ok_or_else(|| Error::Domain("empty mode history".into()))?;
    let exits = match termination {
        Termination::NumericalFailure { s, reason } => {
            return Err(Error::StepFailure {
                s: *s,
                reason: reason.clone(),
            })
        }
        Termination::Horizon { s } => {
            return Ok(ShootState {
                d0,
                d1,
                s_star: *s,
                exit_component: None,
                exit_sign: None,
                phi_image: None,
                violation: false,
                history,
            })
        }
        Termination::Exit { exits, .. } => exits,
    };
    let sb = bounds(last.s)?;
    let dominant = termination
        .dominant_exit(|comp| sb.bound(comp))
        .ok_or_else(|| Error::Domain("exit without components".into()))?;
    let violation = exits
        .iter()
        .any(|e| !matches!(e.component, Component::Mode0 | Component::Mode1));
    let r1 = ratios(&last, &sb);
    let (s_star, phi) = match (history.len(), dominant.component) {
        (n, comp @ (Component::Mode0 | Component::Mode1)) if n >= 2 => {
            let prev = history[n - 2];
            let r0 = ratios(&prev, &bounds(prev.s)?);
            let m = if comp == Component::Mode0 { 0 } else { 1 };
            let omega = f64::from(dominant.sign);
            let (g0, g1) = (omega * r0[m], omega * r1[m]);
            let theta = if g1 > g0 { ((1.0 - g0) / (g1 - g0)).clamp(0.0, 1.0) } else { 1.0 };
            let at = [r0[0] + theta * (r1[0] - r0[0]), r0[1] + theta * (r1[1] - r0[1])];
            (prev.s + theta * (last.s - prev.s), to_square(at))
        }
        _ => (last.s, to_square(r1)),
    };
    Ok(ShootState {
        d0,
        d1,
        s_star,
        exit_component: Some(dominant.component),
        exit_sign: Some(dominant.sign),
        phi_image: phi,
        violation,
        history,
    })
}

/// The exit map of the radial projection `Φ(d) = (d − z)/|d − z|∞` with
/// `s* = s₀ − ln|d − z|∞`, exiting through the larger coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticMap {
    pub zero: (f64, f64),
    pub s0: f64,
    /// Replace `Φ` by a constant direction.
    pub constant: Option<[f64; 2]>,
}

impl SyntheticMap {
    pub fn identity(s0: f64) -> Self {
        Self {
            zero: (0.0, 0.0),
            s0,
            constant: None,
        }
    }

    pub fn constant(s0: f64, image: [f64; 2]) -> Self {
        Self {
            zero: (0.0, 0.0),
            s0,
            constant: Some(image),
        }
    }
}

impl ExitMap for SyntheticMap {
    fn probe(&self, d0: f64, d1: f64) -> Result<ShootState> {
        let v = match self.constant {
            Some(image) => image,
            None => [d0 - self.zero.0, d1 - self.zero.1],
        };
        let m = v[0].abs().max(v[1].abs());
        let Some(phi) = to_square(v) else {
            return Ok(ShootState {
                d0,
                d1,
                s_star: f64::INFINITY,
                exit_component: None,
                exit_sign: None,
                phi_image: None,
                violation: false,
                history: Vec::new(),
            });
        };
        let (component, value) = if phi[0].abs() >= phi[1].abs() {
            (Component::Mode0, phi[0])
        } else {
            (Component::Mode1, phi[1])
        };
        Ok(ShootState {
            d0,
            d1,
            s_star: self.s0 - m.ln().min(0.0),
            exit_component: Some(component),
            exit_sign: Some(if value < 0.0 { -1 } else { 1 }),
            phi_image: Some(phi),
            violation: false,
            history: Vec::new(),
        })
    }

    fn s0(&self) -> f64 {
        self.s0
    }
}

/// Probes every point, in parallel, keeping the input order.
pub fn probe_all<M: ExitMap>(map: &M, points: &[(f64, f64)]) -> Vec<Result<ShootState>> {
    points.par_iter().map(|&(d0, d1)| map.probe(d0, d1)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeReport {
    /// `None` if some boundary sample did not exit.
    pub winding: Option<i64>,
    /// Accumulated angle of `Φ` along the boundary, in turns.
    pub turns: f64,
    pub samples: Vec<ShootState>,
    /// Samples that reached the horizon.
    pub non_exiting: usize,
    /// Largest angle increment between neighbouring samples, in radians.
    pub max_step: f64,
}

/// Discrete winding number of `Φ` along `∂rect`, traversed counter-clockwise.
pub fn boundary_degree<M: ExitMap>(map: &M, rect: &Rect, n_samples: usize) -> Result<DegreeReport> {
    if n_samples < 4 {
        return Err(Error::Domain(format!("need at least 4 boundary samples, got {n_samples}")));
    }
    let points = rect.boundary_points(n_samples);
    let samples = probe_all(map, &points).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(degree_of_samples(samples))
}

fn degree_of_samples(samples: Vec<ShootState>) -> DegreeReport {
    let non_exiting = samples.iter().filter(|s| s.phi_image.is_none()).count();
    if non_exiting > 0 {
        return DegreeReport {
            winding: None,
            turns: f64::NAN,
            samples,
            non_exiting,
            max_step: f64::NAN,
        };
    }
    let angles: Vec<f64> = samples
        .iter()
        .map(|s| {
            let [x, y] = s.phi_image.unwrap_or([f64::NAN; 2]);
            y.atan2(x)
        })
        .collect();
    let tau = std::f64::consts::TAU;
    let (mut total, mut max_step) = (0.0, 0.0_f64);
    for i in 0..angles.len() {
        let next = angles[(i + 1) % angles.len()];
        let d = (next - angles[i] + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
        max_step = max_step.max(d.abs());
        total += d;
    }
    let turns = total / tau;
    DegreeReport {
        winding: Some(turns.round() as i64),
        turns,
        samples,
        non_exiting: 0,
        max_step,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransverseReport {
    pub component: Option<Component>,
    pub omega: Option<i8>,
    pub s_star: f64,
    /// `v_m′(s*)`.
    pub derivative: f64,
    /// `d/ds (ω v_m / bound)` at `s*`.
    pub crossing_rate: f64,
    /// Sign of `ω v_m′(s*)`, only claimed for a transverse crossing.
    pub sign: Option<i8>,
    pub inconclusive: bool,
    pub reason: Option<String>,
}

/// Below this crossing rate, in units of the bound per unit `s`, the exit is
/// treated as tangential.
pub const TANGENTIAL_RATE: f64 = 1e-3;

/// Derivative at `x` of the quadratic through three points.
fn quadratic_slope(pts: [(f64, f64); 3], x: f64) -> f64 {
    let [(x0, y0), (x1, y1), (x2, y2)] = pts;
    y0 * ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2))
        + y1 * ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2))
        + y2 * ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1))
}

/// Checks `ω v_m′(s*) > 0` from the last three samples of the mode history.
pub fn transverse_check(
    state: &ShootState,
    history: &[ModeVector],
    bounds: impl Fn(f64) -> Result<ShrinkBounds>,
) -> Result<TransverseReport> {
    let mut report = TransverseReport {
        component: state.exit_component,
        omega: state.exit_sign,
        s_star: state.s_star,
        derivative: f64::NAN,
        crossing_rate: f64::NAN,
        sign: None,
        inconclusive: true,
        reason: None,
    };
    let m = match state.exit_component {
        Some(Component::Mode0) => 0,
        Some(Component::Mode1) => 1,
        Some(_) => {
            report.reason = Some("exit through a component other than v0, v1".into());
            return Ok(report);
        }
        None => {
            report.reason = Some("no exit".into());
            return Ok(report);
        }
    };
    let omega = f64::from(state.exit_sign.unwrap_or(1));
    let n = history.len();
    if n < 3 {
        report.reason = Some(format!("history too sparse ({n} samples)"));
        return Ok(report);
    }
    let tail = &history[n - 3..];
    let mut value = [(0.0, 0.0); 3];
    let mut ratio = [(0.0, 0.0); 3];
    for (i, mv) in tail.iter().enumerate() {
        let b = bounds(mv.s)?.bound_0;
        value[i] = (mv.s, mv.mode(m));
        ratio[i] = (mv.s, omega * mv.mode(m) / b);
    }
    if !(tail[0].s < tail[1].s && tail[1].s < tail[2].s) {
        report.reason = Some("history times not increasing".into());
        return Ok(report);
    }
    report.derivative = quadratic_slope(value, state.s_star);
    report.crossing_rate = quadratic_slope(ratio, state.s_star);
    if report.crossing_rate.abs() <= TANGENTIAL_RATE {
        report.reason = Some("tangential crossing".into());
        return Ok(report);
    }
    report.inconclusive = false;
    report.sign = Some(if omega * report.derivative > 0.0 { 1 } else { -1 });
    Ok(report)
}

/// Outcome of [`find_trapped`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// The level budget was used up.
    Converged,
    /// A point reached the horizon.
    Trapped,
    /// No quadrant had mixed corner signatures.
    NoSignChange,
    /// The mixed quadrants exclude the best point found so far.
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerRow {
    pub d0: f64,
    pub d1: f64,
    pub s_star: f64,
    pub component: &'static str,
    pub sign: Option<i8>,
}

impl From<&ShootState> for CornerRow {
    fn from(s: &ShootState) -> Self {
        Self {
            d0: s.d0,
            d1: s.d1,
            s_star: s.s_star,
            component: s.component_label(),
            sign: s.exit_sign,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchLevel {
    pub rect: Rect,
    pub corners: Vec<CornerRow>,
    pub best_s_star: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrappedReport {
    pub status: SearchStatus,
    pub best: ShootState,
    pub rect: Rect,
    pub levels: Vec<SearchLevel>,
    /// Every probe, in evaluation order.
    pub probes: Vec<ShootState>,
    /// Exits via components other than `v₀`, `v₁`.
    pub violations: usize,
}

impl TrappedReport {
    /// Best `s*` after each level.
    pub fn s_star_ladder(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.best_s_star).collect()
    }

    /// Largest `s*` among the corners of the initial rectangle.
    pub fn initial_corner_max(&self) -> f64 {
        self.levels
            .first()
            .map_or(f64::NAN, |l| l.corners.iter().map(|c| c.s_star).fold(f64::NEG_INFINITY, f64::max))
    }
}

fn better(a: &ShootState, b: &ShootState) -> bool {
    a.s_star > b.s_star
}

/// Winding of `Φ` around the four corners of a quadrant, traversed
/// counter-clockwise. Zero if some corner did not exit.
fn corner_winding(corners: &[&ShootState; 4]) -> i64 {
    let angles: Option<Vec<f64>> = corners.iter().map(|s| s.phi_image.map(|[x, y]| y.atan2(x))).collect();
    let Some(angles) = angles else {
        return 0;
    };
    let pi = std::f64::consts::PI;
    let total: f64 = (0..4)
        .map(|i| (angles[(i + 1) % 4] - angles[i] + pi).rem_euclid(2.0 * pi) - pi)
        .sum();
    (total / (2.0 * pi)).round() as i64
}

/// Quadrant subdivision: keep the sub-rectangle whose corner signatures are
/// not all equal, for at most `levels` subdivisions.
pub fn find_trapped<M: ExitMap>(map: &M, rect: &Rect, levels: usize) -> Result<TrappedReport> {
    let corners = rect.corners();
    let first = probe_all(map, &corners).into_iter().collect::<Result<Vec<_>>>()?;
    let mut probes = first.clone();
    let mut best = first
        .iter()
        .fold(None::<&ShootState>, |acc, s| match acc {
            Some(b) if !better(s, b) => Some(b),
            _ => Some(s),
        })
        .cloned()
        .ok_or_else(|| Error::Domain("no corners".into()))?;
    let mut current = *rect;
    let mut corner_states: [ShootState; 4] = [first[0].clone(), first[1].clone(), first[2].clone(), first[3].clone()];
    let mut report_levels = vec![SearchLevel {
        rect: current,
        corners: corner_states.iter().map(CornerRow::from).collect(),
        best_s_star: best.s_star,
    }];
    let mut status = SearchStatus::Converged;
    for _ in 0..levels {
        if !best.exited() {
            status = SearchStatus::Trapped;
            break;
        }
        let m0 = 0.5 * (current.d0_lo + current.d0_hi);
        let m1 = 0.5 * (current.d1_lo + current.d1_hi);
        let fresh_points = [
            (m0, current.d1_lo),
            (current.d0_hi, m1),
            (m0, current.d1_hi),
            (current.d0_lo, m1),
            (m0, m1),
        ];
        let fresh = probe_all(map, &fresh_points).into_iter().collect::<Result<Vec<_>>>()?;
        probes.extend(fresh.iter().cloned());
        for s in &fresh {
            if better(s, &best) {
                best = s.clone();
            }
        }
        let [c_ll, c_lr, c_ur, c_ul] = &corner_states;
        let [e_b, e_r, e_t, e_l, mid] = [&fresh[0], &fresh[1], &fresh[2], &fresh[3], &fresh[4]];
        let quads = current.quadrants();
        let quad_corners = [
            [c_ll, e_b, mid, e_l],
            [e_b, c_lr, e_r, mid],
            [mid, e_r, c_ur, e_t],
            [e_l, mid, e_t, c_ul],
        ];
        // Several mixed quadrants can share the best point as a corner. Ties
        // go to a nonzero winding of Φ around the corners, then to the
        // number of distinct signatures.
        let mut chosen: Option<(usize, (bool, usize))> = None;
        let mut any_mixed = false;
        for (i, qc) in quad_corners.iter().enumerate() {
            let mut sigs: Vec<Option<(Component, i8)>> = qc.iter().map(|s| s.signature()).collect();
            sigs.sort();
            sigs.dedup();
            if sigs.len() < 2 {
                continue;
            }
            any_mixed = true;
            if !quads[i].contains(best.d0, best.d1) {
                continue;
            }
            let score = (corner_winding(qc) != 0, sigs.len());
            if chosen.is_none_or(|(_, k)| score > k) {
                chosen = Some((i, score));
            }
        }
        let Some((i, _)) = chosen else {
            status = if any_mixed { SearchStatus::Stalled } else { SearchStatus::NoSignChange };
            break;
        };
        current = quads[i];
        corner_states = quad_corners[i].map(|s| s.clone());
        report_levels.push(SearchLevel {
            rect: current,
            corners: corner_states.iter().map(CornerRow::from).collect(),
            best_s_star: best.s_star,
        });
    }
    if status == SearchStatus::Converged && !best.exited() {
        status = SearchStatus::Trapped;
    }
    let violations = probes.iter().filter(|p| p.violation).count();
    Ok(TrappedReport {
        status,
        best,
        rect: current,
        levels: report_levels,
        probes,
        violations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub perturbation: Perturbation,
    pub d0: f64,
    pub d1: f64,
    pub s_star: f64,
    pub shift: f64,
    /// `(s* − s₀)` relative to the unperturbed value.
    pub s_star_ratio: f64,
    pub status: SearchStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub reference: (f64, f64, f64),
    pub rows: Vec<StabilityRow>,
    /// Slope of the recovered `d` shift against the perturbation size.
    pub shift_slope: Option<f64>,
}

/// Re-runs [`find_trapped`] on perturbed problems, seeded in a square of
/// half-width `radius` around the unperturbed point.
pub fn stability_probe<M: ExitMap>(
    trapped: &ShootState,
    perturbations: &[Perturbation],
    radius: f64,
    levels: usize,
    make: impl Fn(&Perturbation) -> Result<M>,
) -> Result<StabilityReport> {
    let rect = Rect::centered(trapped.d0, trapped.d1, radius)?;
    let base_len = trapped.s_star - make(&Perturbation::default())?.s0();
    let mut rows = Vec::with_capacity(perturbations.len());
    for p in perturbations {
        let map = make(p)?;
        let found = find_trapped(&map, &rect, levels)?;
        let shift = (found.best.d0 - trapped.d0).hypot(found.best.d1 - trapped.d1);
        rows.push(StabilityRow {
            perturbation: *p,
            d0: found.best.d0,
            d1: found.best.d1,
            s_star: found.best.s_star,
            shift,
            s_star_ratio: (found.best.s_star - map.s0()) / base_len,
            status: found.status,
        });
    }
    let size = |p: &Perturbation| p.h0.abs() + p.h1.abs() + p.s0_shift.abs();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| size(&r.perturbation) > 0.0)
        .map(|r| (size(&r.perturbation), r.shift))
        .collect();
    let shift_slope = (pts.len() >= 2)
        .then(|| {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            linear_fit(&xs, &ys).map(|l| l.slope)
        })
        .flatten();
    Ok(StabilityReport {
        reference: (trapped.d0, trapped.d1, trapped.s_star),
        rows,
        shift_slope,
    })
}
