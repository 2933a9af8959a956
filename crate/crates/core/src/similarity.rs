//! The equation for `v = w − φ`, its source terms, the cut-off `χ`, the
//! five-component decomposition and the shrinking set `ϑ_A(s)`.

use serde::{Deserialize, Serialize};

use crate::constants::{ProfileConstants, ProfileSlice};
use crate::error::{Error, Result};
use crate::field::{first_derivative, Field};
use crate::quadrature::QuadratureRule;
use crate::spectral::{hermite_norm_sq, HermiteBasis};

/// Default cut-off scale `K`.
pub const DEFAULT_K: f64 = 10.0;

/// `V(y,s) = p φ^{p-1} − p/(p−1)`.
pub fn potential_v(c: &ProfileConstants, y: f64, s: f64) -> Result<f64> {
    Ok(potential_at(&c.at(s)?, c.p, y))
}

fn potential_at(slice: &ProfileSlice, p: f64, y: f64) -> f64 {
    p * slice.value(y).powf(p - 1.0) - p / (p - 1.0)
}

/// `|φ+v|^{p-1}(φ+v) − φ^p − pφ^{p-1}v`.
#[inline]
pub fn nonlinear_b(v: f64, phi: f64, p: f64) -> f64 {
    let w = phi + v;
    w.abs().powf(p - 1.0) * w - phi.powf(p) - p * phi.powf(p - 1.0) * v
}

/// `μ|∂_yφ + ∂_yv|^q − μ|∂_yφ|^q`, with `∂_y v` from centered differences.
pub fn nonlinear_g(v: &Field, c: &ProfileConstants) -> Result<Field> {
    if v.n() < 5 {
        return Err(Error::GridTooSmall {
            required: 5.0,
            available: v.n() as f64,
        });
    }
    let slice = c.at(v.s())?;
    let dv = first_derivative(v.values(), v.h());
    let values = v
        .ys()
        .zip(dv)
        .map(|(y, d)| {
            let g = slice.grad(y);
            c.mu * ((g + d).abs().powf(c.q) - g.abs().powf(c.q))
        })
        .collect();
    Field::new(v.y_max(), v.s(), values)
}

/// Pointwise residual of `φ` in the `w` equation.
pub fn residual_at(c: &ProfileConstants, slice: &ProfileSlice, y: f64) -> f64 {
    let phi = slice.value(y);
    let g = slice.grad(y);
    slice.second(y) - 0.5 * y * g - phi / (c.p - 1.0) + phi.powf(c.p) - slice.time_derivative(y)
        + c.mu * g.abs().powf(c.q)
}

/// `R(·, s)` sampled on the grid `[-y_max, y_max]` with `n` nodes.
pub fn residual_r(c: &ProfileConstants, s: f64, y_max: f64, n: usize) -> Result<Field> {
    let slice = c.at(s)?;
    Field::from_fn(y_max, n, s, |y| residual_at(c, &slice, y))
}

fn smooth_step(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `χ₀(r)`: 1 on `[0,1]`, 0 on `[2,∞)`, C^∞ and non-increasing between.
pub fn cutoff_chi0(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = smooth_step(2.0 - r);
        a / (a + smooth_step(r - 1.0))
    }
}

/// `χ(y,s) = χ₀(|y|/(K s^β))`.
pub fn cutoff_chi(y: f64, s: f64, k: f64, beta: f64) -> f64 {
    cutoff_chi0(y / (k * s.powf(beta)))
}

/// The five components of `v = Σ_{m≤2} v_m h_m + v₋ + v_e` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    pub s: f64,
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    /// `sup |v₋(y)|/(1+|y|³)` over the support of `v_b`.
    pub vminus_weighted: f64,
    pub ve_sup: f64,
}

impl ModeVector {
    pub fn zero(s: f64) -> Self {
        Self {
            s,
            v0: 0.0,
            v1: 0.0,
            v2: 0.0,
            vminus_weighted: 0.0,
            ve_sup: 0.0,
        }
    }

    pub fn mode(&self, m: usize) -> f64 {
        match m {
            0 => self.v0,
            1 => self.v1,
            2 => self.v2,
            _ => panic!("mode index {m} out of range"),
        }
    }
}

/// A decomposition with the pointwise remainders kept.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub modes: ModeVector,
    pub v_minus: Field,
    pub v_e: Field,
}

impl Decomposition {
    /// `Σ v_m h_m + v₋ + v_e` on the grid, with the mode part restricted to
    /// the support of `v_b`.
    pub fn reconstruct(&self, c: &ProfileConstants, k: f64) -> Result<Field> {
        let support = 2.0 * k * self.modes.s.powf(c.beta);
        let m = &self.modes;
        let mode_sum = |y: f64| m.v0 + m.v1 * y + m.v2 * (y * y - 2.0);
        let values = self
            .v_minus
            .ys()
            .zip(self.v_minus.values())
            .zip(self.v_e.values())
            .map(|((y, &vm), &ve)| if y.abs() <= support { mode_sum(y) + vm + ve } else { ve })
            .collect();
        Field::new(self.v_minus.y_max(), self.modes.s, values)
    }
}

/// Splits `v` into its five components using the cut-off scale `k`.
pub fn decompose_full(
    v: &Field,
    c: &ProfileConstants,
    k: f64,
    basis: &HermiteBasis,
    quad: &QuadratureRule,
) -> Result<Decomposition> {
    let s = v.s();
    if !(k > 0.0) {
        return Err(Error::Domain(format!("cut-off scale K must be positive, got {k}")));
    }
    if basis.max_degree() < 2 {
        return Err(Error::Domain("decomposition needs Hermite modes up to degree 2".into()));
    }
    let inner = k * s.powf(c.beta);
    let support = 2.0 * inner;
    let required = support.max(quad.extent());
    if v.y_max() < required {
        return Err(Error::GridTooSmall {
            required,
            available: v.y_max(),
        });
    }
    let chi: Vec<f64> = v.ys().map(|y| cutoff_chi0(y / inner)).collect();
    let vb: Vec<f64> = v.values().iter().zip(&chi).map(|(a, x)| a * x).collect();
    let ve: Vec<f64> = v.values().iter().zip(&vb).map(|(a, b)| a - b).collect();
    let vb_field = Field::new(v.y_max(), s, vb)?;
    let mut coeffs = [0.0; 3];
    for (&y, &w) in quad.nodes().iter().zip(quad.weights()) {
        let f = w * vb_field.interpolate(y).expect("node inside grid");
        coeffs[0] += f;
        coeffs[1] += f * basis.eval(1, y);
        coeffs[2] += f * basis.eval(2, y);
    }
    for (m, c) in coeffs.iter_mut().enumerate() {
        *c /= hermite_norm_sq(m);
    }
    let [v0, v1, v2] = coeffs;
    let mut weighted = 0.0_f64;
    let minus: Vec<f64> = v
        .ys()
        .zip(vb_field.values())
        .map(|(y, &b)| {
            if y.abs() <= support {
                let r = b - v0 - v1 * y - v2 * (y * y - 2.0);
                weighted = weighted.max(r.abs() / (1.0 + y.abs().powi(3)));
                r
            } else {
                0.0
            }
        })
        .collect();
    let ve_sup = ve.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(Decomposition {
        modes: ModeVector {
            s,
            v0,
            v1,
            v2,
            vminus_weighted: weighted,
            ve_sup,
        },
        v_minus: Field::new(v.y_max(), s, minus)?,
        v_e: Field::new(v.y_max(), s, ve)?,
    })
}

pub fn decompose(
    v: &Field,
    c: &ProfileConstants,
    k: f64,
    basis: &HermiteBasis,
    quad: &QuadratureRule,
) -> Result<ModeVector> {
    decompose_full(v, c, k, basis, quad).map(|d| d.modes)
}

/// Open interval `(3β, min(5β−1, 2β+1))` of admissible `γ`.
pub fn gamma_interval(beta: f64) -> (f64, f64) {
    (3.0 * beta, (5.0 * beta - 1.0).min(2.0 * beta + 1.0))
}

pub fn default_gamma(beta: f64) -> f64 {
    let (lo, hi) = gamma_interval(beta);
    0.5 * (lo + hi)
}

/// Component of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Mode0,
    Mode1,
    Mode2,
    Minus,
    Outer,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Mode0,
        Component::Mode1,
        Component::Mode2,
        Component::Minus,
        Component::Outer,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Component::Mode0 => "0",
            Component::Mode1 => "1",
            Component::Mode2 => "2",
            Component::Minus => "minus",
            Component::Outer => "e",
        }
    }
}

/// Bounds defining `ϑ_A(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkBounds {
    pub a: f64,
    pub gamma: f64,
    pub s: f64,
    pub bound_e: f64,
    pub bound_minus: f64,
    pub bound_0: f64,
    pub bound_1: f64,
    pub bound_2: f64,
}

impl ShrinkBounds {
    pub fn new(a: f64, s: f64, gamma: f64, beta: f64) -> Result<Self> {
        if !(a >= 1.0) {
            return Err(Error::Domain(format!("trap amplitude A must be >= 1, got {a}")));
        }
        if !(s >= 1.0) {
            return Err(Error::Domain(format!("similarity time must be >= 1, got {s}")));
        }
        let (lo, hi) = gamma_interval(beta);
        if !(gamma > lo && gamma < hi) {
            return Err(Error::Domain(format!(
                "gamma = {gamma} outside the admissible interval ({lo}, {hi})"
            )));
        }
        let m = a / s.powf(2.0 * beta + 1.0);
        Ok(Self {
            a,
            gamma,
            s,
            bound_e: a * a / s.powf(gamma - 3.0 * beta),
            bound_minus: a / s.powf(gamma),
            bound_0: m,
            bound_1: m,
            bound_2: a.sqrt() / s.powf(4.0 * beta - 1.0),
        })
    }

    pub fn bound(&self, component: Component) -> f64 {
        match component {
            Component::Mode0 => self.bound_0,
            Component::Mode1 => self.bound_1,
            Component::Mode2 => self.bound_2,
            Component::Minus => self.bound_minus,
            Component::Outer => self.bound_e,
        }
    }
}

/// One violated bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitComponent {
    pub component: Component,
    /// Sign of the offending value; `+1` for the two norms.
    pub sign: i8,
    /// `|value| − bound`, non-negative.
    pub overshoot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Membership {
    Inside,
    Exit(Vec<ExitComponent>),
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside)
    }

    pub fn exits(self) -> Vec<ExitComponent> {
        match self {
            Membership::Inside => Vec::new(),
            Membership::Exit(e) => e,
        }
    }
}

/// Tests `mv ∈ ϑ_A(s)`. The set is closed from the outside: reaching a bound
/// counts as an exit.
pub fn membership(mv: &ModeVector, sb: &ShrinkBounds) -> Membership {
    let values = [mv.v0, mv.v1, mv.v2, mv.vminus_weighted, mv.ve_sup];
    let exits: Vec<ExitComponent> = Component::ALL
        .iter()
        .zip(values)
        .filter_map(|(&component, value)| {
            let bound = sb.bound(component);
            (value.abs() >= bound).then(|| ExitComponent {
                component,
                sign: if value < 0.0 { -1 } else { 1 },
                overshoot: value.abs() - bound,
            })
        })
        .collect();
    if exits.is_empty() {
        Membership::Inside
    } else {
        Membership::Exit(exits)
    }
}
