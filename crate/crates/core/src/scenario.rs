//! Scenario files: plant, barriers, gains, schedule and diagnostics in TOML.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{make_sphere_barrier, QuadraticBarrier, ReciprocalBarrier, VelocityBarrier};
use crate::controller::{ControllerGains, LawMode, SafetyController, SynthesisConfig};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};
use crate::overapprox::{ApproxSettings, EvidenceSet, LipschitzBounds};
use crate::sim::{
    run_closed_loop, CascadeGains, NominalController, Plant, Quadrotor, QuadrotorParams, Reference, RunOutput,
    RunSettings, SimError, SquareGPlant,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("validation failed:\n{}", .0.join("\n"))]
    ValidationFailed(Vec<String>),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Quadrotor {
        #[serde(flatten)]
        params: QuadrotorParams,
    },
    SquareG {
        g: Vec<Vec<f64>>,
        #[serde(default)]
        damping: f64,
        #[serde(default)]
        coupling: f64,
    },
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig::Quadrotor { params: QuadrotorParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    /// `h(x₁) = r² - Σ_{i∈selector} x₁ᵢ²`.
    pub radius2: f64,
    pub selector: Vec<usize>,
    /// `c` in `h_v = c - e₂ᵀA_v e₂`.
    pub velocity_radius2: f64,
    /// Diagonal of `A_v`; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: ReciprocalBarrier,
    /// Upper end `ν_h` of the band where `‖∇h‖` is sampled; `μ_x` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub dt: f64,
    pub horizon: f64,
    pub measurement_period: f64,
    #[serde(default = "one")]
    pub log_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NominalConfig {
    QuadCascade {
        #[serde(default)]
        gains: CascadeGains,
        #[serde(default)]
        reference: Reference,
    },
    Linear {
        k: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Constant {
        u: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_magnitude")]
    pub prior_magnitude: f64,
    /// Anchor of the `[-M, M]` prior; the initial state when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
    /// Global range of each `f_k`, intersected into every cover.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_range: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_range: Option<Vec<Vec<[f64; 2]>>>,
    /// Overrides the plant's declared Lipschitz bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzBounds>,
    #[serde(default = "default_fix_tol")]
    pub fix_tol: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_order: Option<Vec<usize>>,
}

fn default_magnitude() -> f64 {
    1e3
}
fn default_fix_tol() -> f64 {
    1e-9
}
fn default_sweeps() -> usize {
    100
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            prior_magnitude: default_magnitude(),
            anchor: None,
            f_range: None,
            g_range: None,
            lipschitz: None,
            fix_tol: default_fix_tol(),
            max_sweeps: default_sweeps(),
            column_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default)]
    pub law: LawMode,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    /// Per-coordinate `[lo, hi]` of the operating box over the full state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_box: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    10_000
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { operating_box: None, samples: default_samples() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub error_bound: bool,
    #[serde(default = "half")]
    pub enclosure_safety: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Vec<f64>>,
}

fn half() -> f64 {
    0.5
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { error_bound: false, enclosure_safety: half(), probes: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub initial_state: Vec<f64>,
    pub plant: PlantConfig,
    pub barrier: BarrierConfig,
    pub gains: ControllerGains,
    pub schedule: ScheduleConfig,
    pub nominal: NominalConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

impl ScenarioConfig {
    pub fn from_toml(s: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }
}

/// One assumption check with its measured constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect()
    }

    pub fn to_text(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("[{}] {}: {}\n", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name, passed, detail: detail.into() });
    }
}

/// A validated, ready-to-run scenario.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plant: Box<dyn Plant>,
    pub controller: SafetyController,
    pub nominal: NominalController,
    pub settings: RunSettings,
    pub report: ValidationReport,
}

fn build_plant(cfg: &PlantConfig) -> Result<Box<dyn Plant>, String> {
    match cfg {
        PlantConfig::Quadrotor { params } => {
            let ok = [params.mass, params.inertia, params.arm].iter().all(|v| *v > 0.0)
                && params.drag_v >= 0.0
                && params.drag_phi >= 0.0;
            if !ok {
                return Err(format!("quadrotor parameters must be positive: {params:?}"));
            }
            Ok(Box::new(Quadrotor { params: params.clone() }))
        }
        PlantConfig::SquareG { g, damping, coupling } => {
            let n = g.len();
            if n == 0 || g.iter().any(|r| r.len() != n) {
                return Err("square_g plant needs a nonempty square g".into());
            }
            let g = DMatrix::from_fn(n, n, |i, j| g[i][j]);
            Ok(Box::new(SquareGPlant::new(g, *damping, *coupling)))
        }
    }
}

fn build_nominal(cfg: &NominalConfig, plant: &PlantConfig, n: usize, m: usize) -> Result<NominalController, String> {
    match cfg {
        NominalConfig::QuadCascade { gains, reference } => match plant {
            PlantConfig::Quadrotor { params } => {
                if reference.amplitude.len() != 2 || reference.frequency.len() != 2 {
                    return Err("quadrotor reference needs two amplitudes and two frequencies".into());
                }
                Ok(NominalController::QuadCascade { gains: gains.clone(), reference: reference.clone(), params: params.clone() })
            }
            _ => Err("quad_cascade nominal controller requires the quadrotor plant".into()),
        },
        NominalConfig::Linear { k, offset } => {
            if offset.len() != m || k.len() != m || k.iter().any(|r| r.len() != 2 * n) {
                return Err(format!("linear nominal gain must be {m}x{} with {m} offsets", 2 * n));
            }
            Ok(NominalController::Linear {
                k: DMatrix::from_fn(m, 2 * n, |i, j| k[i][j]),
                offset: DVector::from_column_slice(offset),
            })
        }
        NominalConfig::Constant { u } => {
            if u.len() != m {
                return Err(format!("constant nominal input needs {m} entries"));
            }
            Ok(NominalController::Constant(DVector::from_column_slice(u)))
        }
    }
}

fn interval_from(p: [f64; 2]) -> Result<Interval, String> {
    Interval::try_new(p[0], p[1]).map_err(|e| e.to_string())
}

fn build_evidence(cfg: &EstimatorConfig, bounds: LipschitzBounds, x0: &[f64]) -> Result<EvidenceSet, String> {
    let anchor = cfg.anchor.clone().unwrap_or_else(|| x0.to_vec());
    let (n, m) = (bounds.n(), bounds.m());
    let mut ev = EvidenceSet::new(bounds, cfg.prior_magnitude, anchor).map_err(|e| e.to_string())?;
    match (&cfg.f_range, &cfg.g_range) {
        (None, None) => {}
        (Some(f), Some(g)) => {
            if f.len() != n || g.len() != n || g.iter().any(|r| r.len() != m) {
                return Err(format!("prior ranges must be {n} and {n}x{m}"));
            }
            let rf = f.iter().map(|p| interval_from(*p)).collect::<Result<IntervalVector, _>>()?;
            let rows = g
                .iter()
                .map(|r| r.iter().map(|p| interval_from(*p)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            let rg = IntervalMatrix::from_rows(rows).map_err(|e| e.to_string())?;
            ev = ev.with_ranges(rf, rg).map_err(|e| e.to_string())?;
        }
        _ => return Err("f_range and g_range must be given together".into()),
    }
    ev.settings = ApproxSettings { fix_tol: cfg.fix_tol, max_sweeps: cfg.max_sweeps, column_order: cfg.column_order.clone() };
    Ok(ev)
}

/// Default operating box: `|p| ≤ 1, |angle| ≤ π, |v| ≤ 5, |ω| ≤ 10` for the
/// quadrotor and `|p| ≤ 2, |v| ≤ 10` otherwise.
fn default_box(cfg: &PlantConfig, n: usize) -> Vec<[f64; 2]> {
    match cfg {
        PlantConfig::Quadrotor { .. } => {
            let pi = std::f64::consts::PI;
            vec![[-1.0, 1.0], [-1.0, 1.0], [-pi, pi], [-5.0, 5.0], [-5.0, 5.0], [-10.0, 10.0]]
        }
        PlantConfig::SquareG { .. } => (0..2 * n).map(|i| if i < n { [-2.0, 2.0] } else { [-10.0, 10.0] }).collect(),
    }
}

fn sample_box(rng: &mut impl Rng, bx: &[[f64; 2]]) -> Vec<f64> {
    bx.iter().map(|[lo, hi]| if hi > lo { rng.random_range(*lo..*hi) } else { *lo }).collect()
}

/// Largest observed ratio `|φ(x) - φ(y)| / (L‖x - y‖)` over sampled pairs, per `f` row and `g` entry.
fn lipschitz_ratios(plant: &dyn Plant, bounds: &LipschitzBounds, bx: &[[f64; 2]], samples: usize, rng: &mut impl Rng) -> (f64, f64) {
    let (n, m) = (plant.n(), plant.m());
    let (mut rf, mut rg) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = sample_box(rng, bx);
        let y = sample_box(rng, bx);
        let d = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d == 0.0 {
            continue;
        }
        let (fx, fy) = (plant.drift(&x), plant.drift(&y));
        let (gx, gy) = (plant.input_matrix(&x), plant.input_matrix(&y));
        let ratio = |diff: f64, l: f64| {
            if diff <= 1e-12 {
                0.0
            } else if l == 0.0 {
                f64::INFINITY
            } else {
                diff / (l * d)
            }
        };
        for k in 0..n {
            rf = rf.max(ratio((fx[k] - fy[k]).abs(), bounds.f_bar[k]));
            for l in 0..m {
                rg = rg.max(ratio((gx[(k, l)] - gy[(k, l)]).abs(), bounds.g_bar[k][l]));
            }
        }
    }
    (rf, rg)
}

/// Minimum `‖∇h‖` over sampled positions with `0 < h ≤ ν`, and the number of samples in the band.
fn band_gradient(h: &QuadraticBarrier, bx: &[[f64; 2]], nu: f64, samples: usize, rng: &mut impl Rng) -> (f64, usize) {
    let n = h.dim();
    let (mut min, mut hits) = (f64::INFINITY, 0);
    for _ in 0..samples {
        let p = sample_box(rng, &bx[..n]);
        let v = h.eval(&p);
        if v > 0.0 && v <= nu {
            hits += 1;
            min = min.min(h.grad(&p).norm());
        }
    }
    (min, hits)
}

impl Scenario {
    /// Builds every component and runs all load-time checks.
    pub fn build(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let (scenario, report) = Self::assemble(config);
        match scenario {
            Some(s) if report.passed() => Ok(Scenario { report, ..s }),
            _ => Err(ScenarioError::ValidationFailed(report.failures())),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::build(ScenarioConfig::load(path)?)
    }

    /// Runs the checks without failing; the scenario is `None` when a
    /// component could not be constructed.
    pub fn validate(config: &ScenarioConfig) -> ValidationReport {
        Self::assemble(config.clone()).1
    }

    fn assemble(config: ScenarioConfig) -> (Option<Scenario>, ValidationReport) {
        let mut rep = ValidationReport::default();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);

        let plant = match build_plant(&config.plant) {
            Ok(p) => p,
            Err(e) => {
                rep.push("plant", false, e);
                return (None, rep);
            }
        };
        let (n, m) = (plant.n(), plant.m());
        rep.push("plant", true, format!("{} with n = {n}, m = {m}", plant.label()));

        let x0 = config.initial_state.clone();
        let dims_ok = x0.len() == 2 * n && x0.iter().all(|v| v.is_finite());
        rep.push("initial_state", dims_ok, format!("{} finite entries, want {}", x0.len(), 2 * n));

        let gains_ok = config.gains.validate();
        rep.push("gains", gains_ok.is_ok(), gains_ok.as_ref().map_or_else(|e| e.to_string(), |_| {
            format!("eps_lo {} < eps_hi {}", config.gains.eps_lo, config.gains.eps_hi)
        }));

        let settings = RunSettings {
            dt: config.schedule.dt,
            horizon: config.schedule.horizon,
            measurement_period: config.schedule.measurement_period,
            log_every: config.schedule.log_every,
            error_bound: config.diagnostics.error_bound,
            enclosure_safety: config.diagnostics.enclosure_safety,
            probes: config.diagnostics.probes.clone(),
        };
        let sched = settings.schedule();
        rep.push("schedule", sched.is_ok(), sched.as_ref().map_or_else(|e| e.to_string(), |(s, p)| {
            format!("{s} steps, measurement every {p} steps")
        }));
        let probes_ok = settings.probes.iter().all(|p| p.len() == 2 * n);
        rep.push("probes", probes_ok, format!("{} probe states", settings.probes.len()));
        let safety_ok = settings.enclosure_safety > 0.0 && settings.enclosure_safety < 1.0;
        rep.push("enclosure_safety", safety_ok, format!("{} in (0, 1)", settings.enclosure_safety));

        let bx = config.validation.operating_box.clone().unwrap_or_else(|| default_box(&config.plant, n));
        let box_ok = bx.len() == 2 * n && bx.iter().all(|[lo, hi]| lo <= hi);
        rep.push("operating_box", box_ok, format!("{} coordinates", bx.len()));

        // position barrier
        let b = &config.barrier;
        let position = match make_sphere_barrier(b.radius2, &b.selector, n) {
            Ok(h) => {
                rep.push("compactness", true, format!("r2 = {} > 0 on coordinates {:?}", b.radius2, b.selector));
                Some(h)
            }
            Err(e) => {
                rep.push("compactness", false, e.to_string());
                None
            }
        };
        if let (Some(h), true) = (&position, box_ok && dims_ok) {
            let nu = b.band.unwrap_or(config.gains.mu_x);
            let (eps_h, hits) = band_gradient(h, &bx, nu, config.validation.samples, &mut rng);
            rep.push(
                "gradient_band",
                hits > 0 && eps_h > 1e-9,
                format!("min |grad h| = {eps_h:.6} over {hits} samples with 0 < h <= {nu}"),
            );
            let h0 = h.eval(&x0[..n]);
            rep.push("initial_h", h0 > 0.0, format!("h(x1(0)) = {h0:.6}"));
        }

        let a_v = match &b.velocity_weights {
            None => DMatrix::identity(n, n),
            Some(w) if w.len() == n => DMatrix::from_diagonal(&DVector::from_column_slice(w)),
            Some(w) => {
                rep.push("velocity_barrier", false, format!("{} weights for n = {n}", w.len()));
                return (None, rep);
            }
        };
        let hv = position.and_then(|h| {
            match VelocityBarrier::new(b.velocity_radius2, a_v, h, config.gains.kappa_x, config.gains.switch_x(), b.beta) {
                Ok(hv) => Some(hv),
                Err(e) => {
                    rep.push("velocity_barrier", false, e.to_string());
                    None
                }
            }
        });
        if let (Some(hv), true) = (&hv, dims_ok) {
            match hv.eval(&x0) {
                Ok(v) => rep.push("initial_h_v", v > 0.0, format!("h_v(x(0)) = {v:.6}")),
                Err(e) => rep.push("initial_h_v", false, e.to_string()),
            }
        }

        // Lipschitz bounds
        let bounds = config.estimator.lipschitz.clone().unwrap_or_else(|| plant.bounds());
        let bounds_ok = bounds.validate().is_ok() && bounds.n() == n && bounds.m() == m;
        if bounds_ok && box_ok {
            let (rf, rg) = lipschitz_ratios(plant.as_ref(), &bounds, &bx, config.validation.samples, &mut rng);
            rep.push(
                "lipschitz",
                rf <= 1.0 + 1e-9 && rg <= 1.0 + 1e-9,
                format!("max sampled ratio f: {rf:.4}, g: {rg:.4} over {} pairs", config.validation.samples),
            );
        } else {
            rep.push("lipschitz", false, format!("bounds do not match n = {n}, m = {m}"));
        }

        if config.controller.law == LawMode::Square {
            let square = n == m;
            let min_eig = if square {
                (0..config.validation.samples.min(1000))
                    .map(|_| {
                        let g = plant.input_matrix(&sample_box(&mut rng, &bx));
                        (&g + g.transpose()).symmetric_eigenvalues().min()
                    })
                    .fold(f64::INFINITY, f64::min)
            } else {
                f64::NAN
            };
            rep.push("square_g", square && min_eig > 0.0, format!("n = {n}, m = {m}, min eig(g + g^T) = {min_eig:.4}"));
        }

        let nominal = match build_nominal(&config.nominal, &config.plant, n, m) {
            Ok(c) => Some(c),
            Err(e) => {
                rep.push("nominal", false, e);
                None
            }
        };

        let evidence = if bounds_ok && dims_ok {
            match build_evidence(&config.estimator, bounds, &x0) {
                Ok(ev) => Some(ev),
                Err(e) => {
                    rep.push("estimator", false, e);
                    None
                }
            }
        } else {
            None
        };

        let (Some(hv), Some(nominal), Some(evidence)) = (hv, nominal, evidence) else {
            return (None, rep);
        };
        let controller = match SafetyController::new(
            config.gains.clone(),
            hv,
            config.barrier.beta,
            config.controller.law,
            config.controller.synthesis.clone(),
            evidence,
            config.seed,
        ) {
            Ok(c) => c,
            Err(e) => {
                rep.push("controller", false, e.to_string());
                return (None, rep);
            }
        };
        let scenario = Scenario { config, plant, controller, nominal, settings, report: ValidationReport::default() };
        (Some(scenario), rep)
    }

    pub fn run(&self) -> Result<RunOutput, SimError> {
        let mut out =
            run_closed_loop(self.plant.as_ref(), self.controller.clone(), &self.nominal, &self.config.initial_state, &self.settings)?;
        out.summary.label = self.config.name.clone();
        Ok(out)
    }
}
