//! Gaussian quadrature against the weight `ρ(y) = exp(-y²/4) / √(4π)`.
//!
//! Two rules are provided:
//!
//! * [`QuadratureRule`] is Gauss–Hermite mapped through `y = 2t`. It is exact
//!   for polynomials of degree `≤ 2·order − 1` against `ρ` and is the rule used
//!   for inner products and mode projections.
//! * [`AbsPowerRule`] is a generalized Gauss–Laguerre rule for the weight
//!   `|y|^q ρ(y)` acting on even integrands. Moments such as `∫|y|^q ρ` are
//!   only algebraically convergent under plain Gauss–Hermite because of the
//!   kink at the origin, so they are computed with this rule instead.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussHermite, GaussLaguerre};

use crate::error::{Error, Result};

/// Default number of Gauss nodes.
pub const DEFAULT_ORDER: usize = 80;

/// Agreement required between a rule and its doubled counterpart.
pub const DOUBLING_TOLERANCE: f64 = 1e-12;

fn nonzero(order: usize) -> Result<NonZeroUsize> {
    NonZeroUsize::new(order).ok_or_else(|| Error::Domain("quadrature order must be positive".into()))
}

/// Gauss–Hermite nodes and weights normalised against `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Nodes from `gauss-quad`, polished by Newton steps on the orthonormal
    /// Hermite recurrence, with Christoffel weights `1/(n p_{n−1}(t)²)`.
    /// The polish brings `⟨h_6, h_6⟩` to about 1e-11 absolute.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        let rule = GaussHermite::new(nonzero(order)?);
        let scale = 1.0 / PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(t0, w0)| {
                let (t, w) = polish_hermite_node(order, t0).unwrap_or((t0, w0));
                (2.0 * t, w * scale)
            })
            .unzip();
        Ok(Self { nodes, weights })
    }

    /// Rule of [`DEFAULT_ORDER`] nodes.
    pub fn standard() -> Self {
        Self::gauss_hermite(DEFAULT_ORDER).expect("default order is positive")
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest |node|; a sampled field must reach at least this far.
    pub fn extent(&self) -> f64 {
        self.nodes.iter().fold(0.0_f64, |m, y| m.max(y.abs()))
    }

    /// Rule with twice as many nodes.
    pub fn doubled(&self) -> Result<Self> {
        Self::gauss_hermite(2 * self.order())
    }

    /// Multiplies every weight by `1 + eps`. Used to inject faults into the
    /// identity battery.
    pub fn with_weight_fault(mut self, eps: f64) -> Self {
        self.weights.iter_mut().for_each(|w| *w *= 1.0 + eps);
        self
    }

    /// `∫ f ρ dy`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }

    /// `∫ f ρ dy`, cross-checked against the doubled rule.
    pub fn integrate_checked<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        let coarse = self.integrate(&f);
        let fine = self.doubled()?.integrate(&f);
        let err = (fine - coarse).abs();
        if err > tol * fine.abs().max(1.0) {
            return Err(Error::Convergence {
                what: format!("Gauss-Hermite order {}", self.order()),
                achieved: err,
                target: tol,
            });
        }
        Ok(fine)
    }
}

/// Orthonormal Hermite values `(p_n(t), p_{n−1}(t))` for the weight `e^{−t²}`.
fn orthonormal_hermite(n: usize, t: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, PI.powf(-0.25));
    for k in 0..n {
        let k = k as f64;
        let next = t * (2.0 / (k + 1.0)).sqrt() * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn polish_hermite_node(n: usize, t0: f64) -> Option<(f64, f64)> {
    let slope = (2.0 * n as f64).sqrt();
    let mut t = t0;
    for _ in 0..3 {
        let (pn, pm) = orthonormal_hermite(n, t);
        t -= pn / (slope * pm);
    }
    let (_, pm) = orthonormal_hermite(n, t);
    let w = 1.0 / (n as f64 * pm * pm);
    ((t - t0).abs() < 1e-8 * t0.abs().max(1.0) && w.is_finite() && w > 0.0).then_some((t, w))
}

/// Gauss rule for `∫ |y|^q g(y) ρ(y) dy` with `g` even.
///
/// Substituting `u = y²/4` turns the integral into
/// `2^q/√π ∫_0^∞ u^{(q-1)/2} g(2√u) e^{-u} du`, a generalized Laguerre weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsPowerRule {
    q: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AbsPowerRule {
    pub fn new(q: f64, order: usize) -> Result<Self> {
        let alpha = FiniteAboveNegOneF64::new(0.5 * (q - 1.0))
            .ok_or_else(|| Error::Domain(format!("|y|^q weight needs q > -1, got {q}")))?;
        let rule = GaussLaguerre::new(nonzero(order)?, alpha);
        let scale = 2f64.powf(q) / PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(u, w)| (2.0 * u.sqrt(), w * scale))
            .unzip();
        Ok(Self { q, nodes, weights })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes on the positive half-line, as `y` values.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weight_fault(mut self, eps: f64) -> Self {
        self.weights.iter_mut().for_each(|w| *w *= 1.0 + eps);
        self
    }

    /// `∫ |y|^q g(y) ρ dy` for even `g`.
    pub fn integrate_even<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * g(y))
            .sum()
    }
}

/// `∫ |y|^q ρ(y) dy`, accepted only once orders 80 and 160 agree.
pub fn abs_moment(q: f64) -> Result<f64> {
    abs_moment_with_rule(q).map(|(m, _)| m)
}

/// [`abs_moment`] together with the order-160 rule that produced it.
pub fn abs_moment_with_rule(q: f64) -> Result<(f64, AbsPowerRule)> {
    let coarse = AbsPowerRule::new(q, DEFAULT_ORDER)?.integrate_even(|_| 1.0);
    let rule = AbsPowerRule::new(q, 2 * DEFAULT_ORDER)?;
    let fine = rule.integrate_even(|_| 1.0);
    let err = (fine - coarse).abs() / fine.abs();
    if !(err < DOUBLING_TOLERANCE) {
        return Err(Error::Convergence {
            what: format!("|y|^{q} moment"),
            achieved: err,
            target: DOUBLING_TOLERANCE,
        });
    }
    Ok((fine, rule))
}
