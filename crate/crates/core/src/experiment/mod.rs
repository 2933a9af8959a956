//! Experiment configuration, orchestration and reports.
//!
//! Every command returns a [`Outcome`]: the primary artifacts (JSON report
//! and CSV series, byte-identical for identical configurations) and a
//! success flag. Wall-clock data only go to the sidecar metadata.

pub mod output;
pub mod verify;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{Params, ProfileConstants};
use crate::error::{Error, Result};
use crate::mode_ode::{fit_asymptotics, integrate_bounded, AsymptoticFit, ModeOde, StepControl};
use crate::pde::physical::physical_initial_from_field;
use crate::pde::{
    build_initial_data, final_profile_check, fit_profile_parameters, run_physical_rescaled, run_similarity,
    BoundaryMode, FinalProfileReport, PhysicalConfig, ProfileFit, SolverConfig, Termination, DEFAULT_DS_MAX,
    DEFAULT_SPACING,
};
use crate::shooting::{
    boundary_degree, find_trapped, transverse_check, CornerRow, PdeExitMap, Rect, SearchLevel, SearchStatus,
    ShootState, TransverseReport,
};
use crate::similarity::{default_gamma, ModeVector, ShrinkBounds, DEFAULT_K};

use output::{float, to_csv, to_json};
pub use verify::{VerifyReport, VerifySettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Constants,
    Ode,
    Simulate,
    Shoot,
    Physical,
    Verify,
    Sweep,
}

/// Similarity-variable run: initial data, trap and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSettings {
    pub s0: f64,
    /// Defaults to `horizon_factor · s0`.
    pub s_end: Option<f64>,
    pub horizon_factor: f64,
    pub spacing: f64,
    pub ds_max: f64,
    pub safety: f64,
    pub boundary: BoundaryMode,
    pub k: f64,
    pub a: f64,
    /// Defaults to the middle of the admissible interval.
    pub gamma: Option<f64>,
    pub d0: f64,
    pub d1: f64,
    pub stop_on_exit: bool,
    pub snapshot_times: Vec<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            s0: 50.0,
            s_end: None,
            horizon_factor: 10.0,
            spacing: DEFAULT_SPACING,
            ds_max: DEFAULT_DS_MAX,
            safety: 0.5,
            boundary: BoundaryMode::Profile,
            k: DEFAULT_K,
            a: 20.0,
            gamma: None,
            d0: 0.0,
            d1: 0.0,
            stop_on_exit: true,
            snapshot_times: Vec::new(),
        }
    }
}

impl SimulationSettings {
    pub fn horizon(&self) -> f64 {
        self.s_end.unwrap_or(self.horizon_factor * self.s0)
    }

    pub fn gamma(&self, c: &ProfileConstants) -> f64 {
        self.gamma.unwrap_or_else(|| default_gamma(c.beta))
    }

    pub fn solver_config(&self, c: &ProfileConstants) -> Result<SolverConfig> {
        if !(self.spacing > 0.0) {
            return Err(Error::Domain(format!("grid spacing {} must be positive", self.spacing)));
        }
        let base = SolverConfig::for_horizon(c, self.s0, self.horizon());
        let config = SolverConfig {
            n: crate::field::Field::nodes_for_spacing(base.y_max, self.spacing),
            ds_max: self.ds_max,
            safety: self.safety,
            boundary: self.boundary,
            k: self.k,
            snapshot_times: self.snapshot_times.clone(),
            stop_on_exit: self.stop_on_exit,
            ..base
        };
        config.validate(c)?;
        ShrinkBounds::new(self.a, self.s0, self.gamma(c), c.beta)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeSettings {
    pub s0: f64,
    pub s_end: f64,
    /// Defaults to `−sign(μ) B s0^{−1/(q−1)}`.
    pub w2_initial: Option<f64>,
    pub rtol: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            s0: 100.0,
            s_end: 1e4,
            w2_initial: None,
            rtol: StepControl::default().rtol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingSettings {
    pub rect: Rect,
    pub boundary_samples: usize,
    pub levels: usize,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        Self {
            rect: Rect::standard(),
            boundary_samples: 64,
            levels: 10,
        }
    }
}

/// Cartesian grid for `sweep`. Empty axes fall back to the single value of
/// the main configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub a: Vec<f64>,
    pub s0: Vec<f64>,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    /// Also run an exit probe for every point.
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub p: f64,
    pub mu: f64,
    pub kind: RunKind,
    pub simulation: SimulationSettings,
    pub ode: OdeSettings,
    pub shooting: ShootingSettings,
    pub physical: PhysicalConfig,
    pub sweep: SweepGrid,
    pub verify: VerifySettings,
    pub output_dir: Option<PathBuf>,
    /// Keep wall-clock data out of the sidecar as well.
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 5.0,
            mu: 1.0,
            kind: RunKind::Constants,
            simulation: SimulationSettings::default(),
            ode: OdeSettings::default(),
            shooting: ShootingSettings::default(),
            physical: PhysicalConfig::default(),
            sweep: SweepGrid::default(),
            verify: VerifySettings::default(),
            output_dir: None,
            deterministic: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn params(&self) -> Result<Params> {
        Params::new(self.p, self.mu)
    }

    /// Checks every constraint the selected command depends on.
    pub fn validate(&self) -> Result<()> {
        if self.kind == RunKind::Sweep {
            let g = &self.sweep;
            if [&g.p, &g.mu, &g.a, &g.s0, &g.d0, &g.d1].iter().all(|axis| axis.is_empty()) {
                return Err(Error::Domain("sweep grid is empty".into()));
            }
            return Ok(());
        }
        let params = self.params()?;
        let c = ProfileConstants::derive(&params)?;
        match self.kind {
            RunKind::Simulate => {
                self.simulation.solver_config(&c)?;
            }
            RunKind::Shoot => {
                self.simulation.solver_config(&c)?;
                if self.shooting.boundary_samples < 4 {
                    return Err(Error::Domain("need at least 4 boundary samples".into()));
                }
                let r = self.shooting.rect;
                Rect::new(r.d0_lo, r.d0_hi, r.d1_lo, r.d1_hi)?;
            }
            RunKind::Physical => {
                let s = &self.simulation;
                if !(s.s0 > 1.0) {
                    return Err(Error::Domain(format!("s0 = {} must exceed 1", s.s0)));
                }
                ShrinkBounds::new(s.a, s.s0, s.gamma(&c), c.beta)?;
                if !(self.physical.safety > 0.0 && self.physical.amplification > 1.0) {
                    return Err(Error::Domain("physical run needs safety > 0 and amplification > 1".into()));
                }
            }
            RunKind::Ode => {
                let o = &self.ode;
                if !(o.s0 > 1.0 && o.s_end > o.s0 && o.rtol > 0.0) {
                    return Err(Error::Domain(format!(
                        "ode run needs 1 < s0 < s_end and rtol > 0, got s0 = {}, s_end = {}, rtol = {}",
                        o.s0, o.s_end, o.rtol
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A named file body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// `report.json` first, then CSV series.
    pub artifacts: Vec<Artifact>,
    /// False when a check inside the command failed (exit code 1).
    pub success: bool,
}

impl Outcome {
    pub fn report(&self) -> &str {
        &self.artifacts[0].contents
    }

    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

fn outcome<T: Serialize>(report: &T, csv: Vec<Artifact>, success: bool) -> Result<Outcome> {
    let mut artifacts = vec![Artifact {
        name: "report.json".into(),
        contents: to_json(report)?,
    }];
    artifacts.extend(csv);
    Ok(Outcome { artifacts, success })
}

/// Validates, then runs the selected command.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    match config.kind {
        RunKind::Constants => {
            let r = cmd_constants(config)?;
            outcome(&r, Vec::new(), true)
        }
        RunKind::Verify => {
            let r = cmd_verify(config)?;
            outcome(&r, Vec::new(), r.all_passed)
        }
        RunKind::Ode => cmd_ode(config),
        RunKind::Simulate => cmd_simulate(config),
        RunKind::Physical => cmd_physical(config),
        RunKind::Shoot => cmd_shoot(config),
        RunKind::Sweep => {
            let rows = cmd_sweep(config)?;
            let csv = sweep_csv(&rows)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            outcome(
                &SweepSummary {
                    rows: rows.len(),
                    failed,
                },
                vec![Artifact {
                    name: "sweep.csv".into(),
                    contents: csv,
                }],
                true,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    #[serde(flatten)]
    pub constants: ProfileConstants,
    /// `|a − 2B|`.
    pub consistency_residual: f64,
    pub cross_check_residual: f64,
}

pub fn cmd_constants(config: &ExperimentConfig) -> Result<ConstantsReport> {
    let c = ProfileConstants::derive(&config.params()?)?;
    Ok(ConstantsReport {
        constants: c,
        consistency_residual: (c.a - 2.0 * c.big_b).abs(),
        cross_check_residual: c.cross_check_residual(),
    })
}

pub fn cmd_verify(config: &ExperimentConfig) -> Result<VerifyReport> {
    verify::run_battery(&config.params()?, &config.verify)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeReport {
    pub s0: f64,
    pub s_end: f64,
    pub w2_initial: f64,
    pub steps: usize,
    pub fit: AsymptoticFit,
    pub big_b: f64,
    /// `|w̄₂| s^{1/(q−1)} / B − 1` at the end of the fit window.
    pub prefactor_error: f64,
    pub exponent_error_w2: f64,
    pub exponent_error_w0: f64,
}

fn cmd_ode(config: &ExperimentConfig) -> Result<Outcome> {
    let c = ProfileConstants::derive(&config.params()?)?;
    let o = &config.ode;
    let e2 = 1.0 / (c.q - 1.0);
    let w2 = o
        .w2_initial
        .unwrap_or(-c.mu.signum() * c.big_b * o.s0.powf(-e2));
    let control = StepControl::default().with_rtol(o.rtol);
    let traj = integrate_bounded(&c, &ModeOde::new(&c), o.s0, w2, o.s_end, &control)?;
    let fit = fit_asymptotics(&traj, &c)?;
    let report = OdeReport {
        s0: o.s0,
        s_end: o.s_end,
        w2_initial: w2,
        steps: traj.len(),
        fit,
        big_b: c.big_b,
        prefactor_error: fit.prefactor_w2 / c.big_b - 1.0,
        exponent_error_w2: fit.exponent_w2 / fit.target_exponent_w2 - 1.0,
        exponent_error_w0: fit.exponent_w0 / fit.target_exponent_w0 - 1.0,
    };
    let n = 400;
    let rows = (0..n).filter_map(|i| {
        let s = (o.s0.ln() + (o.s_end / o.s0).ln() * i as f64 / (n - 1) as f64).exp();
        traj.sample(s.min(o.s_end))
            .map(|st| vec![float(st.s), float(st.w0bar), float(st.w2bar)])
    });
    let csv = to_csv(&["s", "w0bar", "w2bar"], rows)?;
    outcome(
        &report,
        vec![Artifact {
            name: "trajectory.csv".into(),
            contents: csv,
        }],
        true,
    )
}

fn modes_csv(modes: &[ModeVector], inside: &[bool]) -> Result<String> {
    to_csv(
        &["s", "v0", "v1", "v2", "vminus_weighted", "ve_sup", "inside"],
        modes.iter().zip(inside).map(|(m, &ins)| {
            vec![
                float(m.s),
                float(m.v0),
                float(m.v1),
                float(m.v2),
                float(m.vminus_weighted),
                float(m.ve_sup),
                ins.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub s0: f64,
    pub s_end: f64,
    pub y_max: f64,
    pub n: usize,
    pub d0: f64,
    pub d1: f64,
    pub a: f64,
    pub gamma: f64,
    pub steps: usize,
    pub termination: Termination,
    pub final_modes: Option<ModeVector>,
    pub profile_fit: Option<ProfileFit>,
}

fn cmd_simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let c = ProfileConstants::derive(&config.params()?)?;
    let sim = &config.simulation;
    let solver = sim.solver_config(&c)?;
    let gamma = sim.gamma(&c);
    let record = run_similarity(&solver, &c, sim.d0, sim.d1, sim.a, gamma)?;
    let requested: Vec<_> = record
        .snapshots
        .iter()
        .filter(|f| sim.snapshot_times.iter().any(|t| (f.s() - t).abs() < 1e-9))
        .cloned()
        .collect();
    let profile_fit = if requested.len() >= 2 {
        Some(fit_profile_parameters(&requested, &c, solver.k)?)
    } else {
        None
    };
    let success = !matches!(record.termination, Termination::NumericalFailure { .. });
    let report = SimulateReport {
        s0: solver.s0,
        s_end: solver.s_end,
        y_max: solver.y_max,
        n: solver.n,
        d0: sim.d0,
        d1: sim.d1,
        a: sim.a,
        gamma,
        steps: record.modes.len().saturating_sub(1),
        termination: record.termination.clone(),
        final_modes: record.modes.last().copied(),
        profile_fit,
    };
    let diag = to_csv(
        &["s", "ds", "sup_w", "sup_v"],
        record
            .diagnostics
            .iter()
            .map(|d| vec![float(d.s), float(d.ds), float(d.sup_w), float(d.sup_v)]),
    )?;
    outcome(
        &report,
        vec![
            Artifact {
                name: "modes.csv".into(),
                contents: modes_csv(&record.modes, &record.inside)?,
            },
            Artifact {
                name: "diagnostics.csv".into(),
                contents: diag,
            },
        ],
        success,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalReport {
    pub t_guess: f64,
    pub t_hat: f64,
    /// `T̂/T − 1`.
    pub t_error: f64,
    pub slope: f64,
    pub target_slope: f64,
    pub amplification: f64,
    pub inconclusive: bool,
    pub similarity_deviation: f64,
    pub s_last: f64,
    pub steps: usize,
    pub final_profile: FinalProfileReport,
}

fn cmd_physical(config: &ExperimentConfig) -> Result<Outcome> {
    let c = ProfileConstants::derive(&config.params()?)?;
    let sim = &config.simulation;
    let y_max = 2.5 * sim.k * sim.s0.powf(c.beta);
    let n = crate::field::Field::nodes_for_spacing(y_max, sim.spacing);
    let w = build_initial_data(&c, sim.s0, sim.d0, sim.d1, sim.a, sim.k, y_max, n)?;
    let t = (-sim.s0).exp();
    let initial = physical_initial_from_field(&c, &w, t)?;
    let run = run_physical_rescaled(&c, t, initial, &config.physical)?;
    let fp = final_profile_check(&run, &c);
    let report = PhysicalReport {
        t_guess: t,
        t_hat: run.t_hat,
        t_error: run.t_hat / t - 1.0,
        slope: run.slope,
        target_slope: -(c.p - 1.0),
        amplification: run.amplification,
        inconclusive: run.inconclusive,
        similarity_deviation: run.similarity_deviation,
        s_last: run.s_last,
        steps: run.history.len() - 1,
        final_profile: fp,
    };
    let history = to_csv(
        &["t", "sup_u"],
        run.history.iter().map(|h| vec![float(h.t), float(h.sup_u)]),
    )?;
    let profile = to_csv(
        &["x", "u"],
        run.x.iter().zip(&run.u).map(|(x, u)| vec![float(*x), float(*u)]),
    )?;
    outcome(
        &report,
        vec![
            Artifact {
                name: "history.csv".into(),
                contents: history,
            },
            Artifact {
                name: "profile.csv".into(),
                contents: profile,
            },
        ],
        !run.inconclusive,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeSummary {
    pub winding: Option<i64>,
    pub turns: f64,
    pub samples: usize,
    pub non_exiting: usize,
    pub max_step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub status: SearchStatus,
    pub best: ShootState,
    pub rect: Rect,
    pub levels: Vec<SearchLevel>,
    pub s_star_ladder: Vec<f64>,
    pub initial_corner_max: f64,
    pub probes: usize,
    pub violations: usize,
    /// Fraction of exits through components other than `v₀`, `v₁`.
    pub violation_fraction: f64,
    pub transverse: TransverseReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootReport {
    pub a: f64,
    pub gamma: f64,
    pub s0: f64,
    pub horizon: f64,
    pub degree: DegreeSummary,
    /// Absent when the boundary degree is not 1.
    pub search: Option<SearchSummary>,
}

fn probe_rows<'a>(states: impl Iterator<Item = &'a ShootState>) -> Vec<Vec<String>> {
    states
        .map(|s| {
            let row = CornerRow::from(s);
            vec![
                float(row.d0),
                float(row.d1),
                float(row.s_star),
                row.component.to_string(),
                row.sign.map_or(String::new(), |v| v.to_string()),
            ]
        })
        .collect()
}

fn cmd_shoot(config: &ExperimentConfig) -> Result<Outcome> {
    let c = ProfileConstants::derive(&config.params()?)?;
    let sim = &config.simulation;
    let solver = sim.solver_config(&c)?;
    let gamma = sim.gamma(&c);
    let map = PdeExitMap::new(&c, solver.clone(), sim.a, gamma)?;
    let sh = &config.shooting;
    let degree = boundary_degree(&map, &sh.rect, sh.boundary_samples)?;
    let mut probes: Vec<ShootState> = degree.samples.clone();
    let search = if degree.winding == Some(1) {
        let found = find_trapped(&map, &sh.rect, sh.levels)?;
        let (a, beta) = (sim.a, c.beta);
        let transverse = transverse_check(&found.best, &found.best.history, |s| {
            ShrinkBounds::new(a, s, gamma, beta)
        })?;
        let exits = found.probes.iter().filter(|p| p.exited()).count();
        probes.extend(found.probes.iter().cloned());
        Some(SearchSummary {
            status: found.status,
            s_star_ladder: found.s_star_ladder(),
            initial_corner_max: found.initial_corner_max(),
            probes: found.probes.len(),
            violations: found.violations,
            violation_fraction: if exits > 0 {
                found.violations as f64 / exits as f64
            } else {
                0.0
            },
            best: found.best,
            rect: found.rect,
            levels: found.levels,
            transverse,
        })
    } else {
        None
    };
    let success = search.is_some();
    let report = ShootReport {
        a: sim.a,
        gamma,
        s0: solver.s0,
        horizon: solver.s_end,
        degree: DegreeSummary {
            winding: degree.winding,
            turns: degree.turns,
            samples: degree.samples.len(),
            non_exiting: degree.non_exiting,
            max_step: degree.max_step,
        },
        search,
    };
    let csv = to_csv(
        &["d0", "d1", "s_star", "exit_component", "exit_sign"],
        probe_rows(probes.iter()),
    )?;
    outcome(
        &report,
        vec![Artifact {
            name: "probes.csv".into(),
            contents: csv,
        }],
        success,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failed: usize,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub mu: f64,
    pub a: f64,
    pub s0: f64,
    pub d0: f64,
    pub d1: f64,
    pub beta: f64,
    pub b: f64,
    pub big_b: f64,
    pub a_profile: f64,
    pub s_star: f64,
    pub exit_component: Option<&'static str>,
    pub exit_sign: Option<i8>,
    pub violation: Option<bool>,
    pub error: Option<String>,
}

impl SweepRow {
    fn key(&self) -> [f64; 6] {
        [self.p, self.mu, self.a, self.s0, self.d0, self.d1]
    }
}

fn axis(values: &[f64], fallback: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

fn sweep_point(config: &ExperimentConfig, key: [f64; 6]) -> SweepRow {
    let [p, mu, a, s0, d0, d1] = key;
    let mut row = SweepRow {
        p,
        mu,
        a,
        s0,
        d0,
        d1,
        beta: f64::NAN,
        b: f64::NAN,
        big_b: f64::NAN,
        a_profile: f64::NAN,
        s_star: f64::NAN,
        exit_component: None,
        exit_sign: None,
        violation: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let c = ProfileConstants::derive(&Params::new(p, mu)?)?;
        row.beta = c.beta;
        row.b = c.b;
        row.big_b = c.big_b;
        row.a_profile = c.a;
        if config.sweep.simulate {
            let sim = SimulationSettings {
                s0,
                a,
                d0,
                d1,
                ..config.simulation.clone()
            };
            let solver = sim.solver_config(&c)?;
            let map = PdeExitMap::new(&c, solver, a, sim.gamma(&c))?;
            let st = crate::shooting::ExitMap::probe(&map, d0, d1)?;
            row.s_star = st.s_star;
            row.exit_component = Some(st.component_label());
            row.exit_sign = st.exit_sign;
            row.violation = Some(st.violation);
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every grid point independently, in parallel, and returns the rows
/// sorted by `(p, μ, A, s₀, d₀, d₁)`. Failures are kept per row.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let g = &config.sweep;
    let sim = &config.simulation;
    let mut keys = Vec::new();
    for &p in &axis(&g.p, config.p) {
        for &mu in &axis(&g.mu, config.mu) {
            for &a in &axis(&g.a, sim.a) {
                for &s0 in &axis(&g.s0, sim.s0) {
                    for &d0 in &axis(&g.d0, sim.d0) {
                        for &d1 in &axis(&g.d1, sim.d1) {
                            keys.push([p, mu, a, s0, d0, d1]);
                        }
                    }
                }
            }
        }
    }
    if keys.is_empty() {
        return Err(Error::Domain("sweep grid is empty".into()));
    }
    let mut rows: Vec<SweepRow> = keys.par_iter().map(|&k| sweep_point(config, k)).collect();
    rows.sort_by(|x, y| {
        x.key()
            .iter()
            .zip(y.key().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup_by(|x, y| x.key() == y.key());
    Ok(rows)
}

pub const SWEEP_HEADER: [&str; 15] = [
    "p",
    "mu",
    "a",
    "s0",
    "d0",
    "d1",
    "beta",
    "b",
    "big_b",
    "a_profile",
    "s_star",
    "exit_component",
    "exit_sign",
    "violation",
    "error",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    to_csv(
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                float(r.p),
                float(r.mu),
                float(r.a),
                float(r.s0),
                float(r.d0),
                float(r.d1),
                float(r.beta),
                float(r.b),
                float(r.big_b),
                float(r.a_profile),
                float(r.s_star),
                r.exit_component.unwrap_or("").to_string(),
                r.exit_sign.map_or(String::new(), |v| v.to_string()),
                r.violation.map_or(String::new(), |v| v.to_string()),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

/// Sidecar written next to the primary artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub kind: RunKind,
    pub config_hash: String,
    pub workers: usize,
    /// Omitted for deterministic runs.
    pub elapsed_seconds: Option<f64>,
}

pub fn metadata(config: &ExperimentConfig, elapsed: std::time::Duration) -> Result<Metadata> {
    Ok(Metadata {
        version: env!("CARGO_PKG_VERSION"),
        kind: config.kind,
        config_hash: output::config_hash(&ExperimentConfig {
            output_dir: None,
            ..config.clone()
        })?,
        workers: rayon::current_num_threads(),
        elapsed_seconds: (!config.deterministic).then_some(elapsed.as_secs_f64()),
    })
}
