//! Time integration of the similarity-variable equation, the physical-space
//! cross-check and profile fitting.

mod imex;
pub mod physical;
pub mod profile_fit;

use serde::{Deserialize, Serialize};

pub use imex::{BoundaryMode, ImexStepper};
pub use physical::{final_profile_check, run_physical_rescaled, FinalProfileReport, PhysicalConfig, PhysicalRun};
pub use profile_fit::{fit_profile_parameters, ProfileFit};

use crate::constants::ProfileConstants;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::quadrature::QuadratureRule;
use crate::similarity::{
    cutoff_chi0, decompose, membership, Component, ExitComponent, Membership, ModeVector, ShrinkBounds,
    DEFAULT_K,
};
use crate::spectral::HermiteBasis;

/// Default largest grid spacing.
pub const DEFAULT_SPACING: f64 = 0.05;
/// Default largest step in `s`.
pub const DEFAULT_DS_MAX: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub y_max: f64,
    pub n: usize,
    pub s0: f64,
    pub s_end: f64,
    pub ds_init: f64,
    pub ds_max: f64,
    /// Fraction of the explicit stability limit used per step.
    pub safety: f64,
    pub boundary: BoundaryMode,
    /// Cut-off scale `K`.
    pub k: f64,
    /// Similarity times at which the field is stored.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Stop at the first exit from `ϑ_A(s)`.
    pub stop_on_exit: bool,
}

impl SolverConfig {
    /// Default grid: `y_max = 2.5 K s_end^β` with spacing at most
    /// [`DEFAULT_SPACING`].
    pub fn for_horizon(c: &ProfileConstants, s0: f64, s_end: f64) -> Self {
        let y_max = 2.5 * DEFAULT_K * s_end.powf(c.beta);
        Self {
            y_max,
            n: Field::nodes_for_spacing(y_max, DEFAULT_SPACING),
            s0,
            s_end,
            ds_init: 1e-3,
            ds_max: DEFAULT_DS_MAX,
            safety: 0.5,
            boundary: BoundaryMode::Profile,
            k: DEFAULT_K,
            snapshot_times: Vec::new(),
            stop_on_exit: true,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.y_max / (self.n - 1) as f64
    }

    pub fn validate(&self, c: &ProfileConstants) -> Result<()> {
        if !(self.s0 > 1.0) {
            return Err(Error::Domain(format!("s0 = {} must exceed 1", self.s0)));
        }
        if !(self.s_end > self.s0) {
            return Err(Error::Domain(format!("s_end = {} must exceed s0 = {}", self.s_end, self.s0)));
        }
        if self.n < 5 || self.n % 2 == 0 {
            return Err(Error::Domain(format!("grid needs an odd n >= 5, got {}", self.n)));
        }
        if !(self.ds_init > 0.0 && self.ds_max > 0.0 && self.safety > 0.0) {
            return Err(Error::Domain("time step policy needs positive ds_init, ds_max, safety".into()));
        }
        if !(self.k > 0.0) {
            return Err(Error::Domain(format!("cut-off scale K = {} must be positive", self.k)));
        }
        let required = 2.0 * self.k * self.s_end.powf(c.beta);
        if self.y_max < required {
            return Err(Error::GridTooSmall {
                required,
                available: self.y_max,
            });
        }
        Ok(())
    }
}

/// `ψ_{s₀,d₀,d₁}(y) = (A/s₀^{2β+1})(d₀ + d₁ y) χ(2y, s₀)`.
pub fn initial_perturbation(c: &ProfileConstants, s0: f64, d0: f64, d1: f64, a: f64, k: f64, y: f64) -> f64 {
    let amp = a / s0.powf(2.0 * c.beta + 1.0);
    amp * (d0 + d1 * y) * cutoff_chi0(2.0 * y / (k * s0.powf(c.beta)))
}

/// `w(·, s₀) = φ(·, s₀) + ψ_{s₀,d₀,d₁}` on the grid `[-y_max, y_max]`.
#[allow(clippy::too_many_arguments)]
pub fn build_initial_data(
    c: &ProfileConstants,
    s0: f64,
    d0: f64,
    d1: f64,
    a: f64,
    k: f64,
    y_max: f64,
    n: usize,
) -> Result<Field> {
    if !(a >= 1.0) {
        return Err(Error::Domain(format!("trap amplitude A must be >= 1, got {a}")));
    }
    let support = k * s0.powf(c.beta);
    if y_max < support {
        return Err(Error::GridTooSmall {
            required: support,
            available: y_max,
        });
    }
    let slice = c.at(s0)?;
    Field::from_fn(y_max, n, s0, |y| slice.value(y) + initial_perturbation(c, s0, d0, d1, a, k, y))
}

/// One IMEX step of the `w` equation with profile boundary data.
pub fn step_w(field: &Field, ds: f64, c: &ProfileConstants, boundary: BoundaryMode) -> Result<Field> {
    let mut stepper = ImexStepper::new(c, field.y_max(), field.n(), boundary)?;
    let mut w = field.values().to_vec();
    stepper.step(&mut w, field.s(), ds)?;
    Field::new(field.y_max(), field.s() + ds, w)
}

/// `w − φ(·, s)`.
pub fn perturbation(field: &Field, c: &ProfileConstants) -> Result<Field> {
    let slice = c.at(field.s())?;
    field.map(|y, w| w - slice.value(y))
}

/// Why a similarity run stopped. Exactly one of the three.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Horizon { s: f64 },
    Exit { s: f64, exits: Vec<ExitComponent> },
    NumericalFailure { s: f64, reason: String },
}

impl Termination {
    pub fn s(&self) -> f64 {
        match self {
            Termination::Horizon { s } | Termination::Exit { s, .. } | Termination::NumericalFailure { s, .. } => *s,
        }
    }

    /// The exit whose value is largest relative to its bound.
    pub fn dominant_exit(&self, bounds: impl Fn(Component) -> f64) -> Option<ExitComponent> {
        match self {
            Termination::Exit { exits, .. } => exits
                .iter()
                .copied()
                .max_by(|a, b| {
                    let ra = a.overshoot / bounds(a.component);
                    let rb = b.overshoot / bounds(b.component);
                    ra.total_cmp(&rb).then(b.component.cmp(&a.component))
                }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostic {
    pub s: f64,
    pub ds: f64,
    pub sup_w: f64,
    pub sup_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub modes: Vec<ModeVector>,
    pub inside: Vec<bool>,
    #[serde(skip)]
    pub snapshots: Vec<Field>,
    pub diagnostics: Vec<StepDiagnostic>,
    pub termination: Termination,
    pub a: f64,
    pub gamma: f64,
    pub spacing: f64,
}

impl RunRecord {
    pub fn bounds_at(&self, s: f64, beta: f64) -> Result<ShrinkBounds> {
        ShrinkBounds::new(self.a, s, self.gamma, beta)
    }

    pub fn final_field(&self) -> Option<&Field> {
        self.snapshots.last()
    }
}

/// Integrates from `s₀` with initial data `φ + ψ_{s₀,d₀,d₁}`, decomposing
/// `w − φ` after every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn run_similarity(
    config: &SolverConfig,
    c: &ProfileConstants,
    d0: f64,
    d1: f64,
    a: f64,
    gamma: f64,
) -> Result<RunRecord> {
    config.validate(c)?;
    ShrinkBounds::new(a, config.s0, gamma, c.beta)?;
    let field = build_initial_data(c, config.s0, d0, d1, a, config.k, config.y_max, config.n)?;
    run_from(config, c, field, a, gamma)
}

/// Same as [`run_similarity`] from arbitrary initial data at `config.s0`.
pub fn run_from(config: &SolverConfig, c: &ProfileConstants, initial: Field, a: f64, gamma: f64) -> Result<RunRecord> {
    config.validate(c)?;
    let basis = HermiteBasis::new(2)?;
    let quad = QuadratureRule::standard();
    let mut stepper = ImexStepper::new(c, config.y_max, config.n, config.boundary)?;
    let mut w = initial.into_values();
    let mut s = config.s0;
    let mut ds = config.ds_init.min(config.ds_max);
    let mut pending: Vec<f64> = config.snapshot_times.iter().copied().filter(|&t| t >= s).collect();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let mut record = RunRecord {
        modes: Vec::new(),
        inside: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        termination: Termination::Horizon { s },
        a,
        gamma,
        spacing: stepper.h(),
    };
    let mut backup = w.clone();
    loop {
        let field = Field::new(config.y_max, s, w.clone());
        let field = match field {
            Ok(f) => f,
            Err(e) => {
                record.termination = Termination::NumericalFailure {
                    s,
                    reason: e.to_string(),
                };
                return Ok(record);
            }
        };
        let v = perturbation(&field, c)?;
        let mv = decompose(&v, c, config.k, &basis, &quad)?;
        let bounds = ShrinkBounds::new(a, s, gamma, c.beta)?;
        let status = membership(&mv, &bounds);
        record.modes.push(mv);
        record.inside.push(status.is_inside());
        record.diagnostics.push(StepDiagnostic {
            s,
            ds,
            sup_w: field.max_abs(),
            sup_v: v.max_abs(),
        });
        while pending.last().is_some_and(|&t| t <= s + 1e-12) {
            pending.pop();
            record.snapshots.push(field.clone());
        }
        if let Membership::Exit(exits) = status {
            if config.stop_on_exit {
                record.termination = Termination::Exit { s, exits };
                record.snapshots.push(field);
                return Ok(record);
            }
        }
        if s >= config.s_end - 1e-12 {
            record.termination = Termination::Horizon { s };
            record.snapshots.push(field);
            return Ok(record);
        }
        let mut limit = config.ds_max.min(stepper.stable_ds(&w, config.safety));
        limit = limit.min(config.s_end - s);
        if let Some(&t) = pending.last() {
            if t > s {
                limit = limit.min(t - s);
            }
        }
        ds = (2.0 * ds).min(limit);
        backup.copy_from_slice(&w);
        let mut attempts = 0;
        loop {
            match stepper.step(&mut w, s, ds) {
                Ok(()) => break,
                Err(Error::StepFailure { reason, .. }) => {
                    attempts += 1;
                    w.copy_from_slice(&backup);
                    ds *= 0.5;
                    if attempts > 30 {
                        record.termination = Termination::NumericalFailure { s, reason };
                        return Ok(record);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        s += ds;
        if (config.s_end - s).abs() < 1e-12 {
            s = config.s_end;
        }
    }
}
