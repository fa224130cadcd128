//! Search for a nested replacement barrier with a strong control direction.
//!
//! Candidates are ellipsoids `η(1 - (e-c)ᵀP(e-c))` in `e₂`-space whose peak
//! `η` equals the parent's, so the gradient condition cannot be met by
//! rescaling alone. Containment in the parent is certified by
//! `‖P_p^{1/2}(c - c_p)‖ + σ_max(P_p^{1/2} P^{-1/2}) < 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::barrier::QuadraticBarrier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisObjective {
    /// Largest `‖ĝᵀ∇h(x_c)‖` among feasible candidates.
    #[default]
    MaxGradient,
    /// Largest ellipsoid among feasible candidates.
    MaxVolume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Lower bound on semi-axes relative to the parent's smallest semi-axis.
    #[serde(default = "default_min_axis")]
    pub min_axis_frac: f64,
    /// Upper bound on the offset of `x_c` from the center, in units of the
    /// gradient-aligned semi-axis.
    #[serde(default = "default_max_tau")]
    pub max_tau: f64,
    #[serde(default)]
    pub objective: SynthesisObjective,
}

fn default_budget() -> usize {
    500
}
fn default_min_axis() -> f64 {
    1e-3
}
fn default_max_tau() -> f64 {
    0.95
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            min_axis_frac: default_min_axis(),
            max_tau: default_max_tau(),
            objective: SynthesisObjective::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.budget == 0 || !(self.min_axis_frac > 0.0 && self.min_axis_frac < 1.0) || !(self.max_tau > 0.0 && self.max_tau < 1.0) {
            return Err(ControlError::InvalidGains(format!("bad synthesis settings {self:?}")));
        }
        Ok(())
    }
}

/// A scored candidate barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub barrier: QuadraticBarrier,
    /// `‖ĝᵀ∇h(x_c)‖`
    pub score: f64,
    /// `h(x_c)`
    pub value_at_xc: f64,
    /// `1 -` the containment certificate; positive means certified nested.
    pub margin: f64,
    pub volume: f64,
}

impl Candidate {
    pub fn failed_condition(&self, gamma: f64) -> Option<&'static str> {
        if !(self.margin > 0.0) {
            Some("nested in parent")
        } else if !(self.value_at_xc > 0.0) {
            Some("positive at switch point")
        } else if !(self.score >= gamma) {
            Some("gradient norm at switch point")
        } else {
            None
        }
    }
}

fn sqrt_sym(p: &DMatrix<f64>, inverse: bool) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let d = eig.eigenvalues.map(|l| if inverse { 1.0 / l.sqrt() } else { l.sqrt() });
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// `1 - (‖P_p^{1/2}(c - c_p)‖ + σ_max(P_p^{1/2} P^{-1/2}))`; positive values
/// certify `{child ≥ 0} ⊂ {parent ≥ 0}`. `None` if either is not an ellipsoid.
pub fn containment_margin(child: &QuadraticBarrier, parent: &QuadraticBarrier) -> Option<f64> {
    let (c, p, _) = child.center_form()?;
    let (cp, pp, _) = parent.center_form()?;
    Some(margin_from(&c, &p, &cp, &sqrt_sym(&pp, false)))
}

fn margin_from(c: &DVector<f64>, p: &DMatrix<f64>, cp: &DVector<f64>, pp_half: &DMatrix<f64>) -> f64 {
    let shift = (pp_half * (c - cp)).norm();
    let spread = (pp_half * sqrt_sym(p, true)).singular_values().max();
    1.0 - (shift + spread)
}

fn unit_gaussian(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    // Box-Muller is enough here; only the direction matters.
    DVector::from_fn(n, |_, _| {
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Orthonormal frame whose first column is `w`.
fn frame(w: &DVector<f64>, rng: &mut impl Rng) -> DMatrix<f64> {
    let n = w.len();
    let mut cols: Vec<DVector<f64>> = vec![w.normalize()];
    while cols.len() < n {
        let mut v = unit_gaussian(rng, n);
        for c in &cols {
            v -= c * c.dot(&v);
        }
        if v.norm() > 1e-6 {
            cols.push(v.normalize());
        }
    }
    DMatrix::from_columns(&cols)
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

struct Shape {
    rot: DMatrix<f64>,
    axes: Vec<f64>,
    tau: f64,
}

impl Shape {
    fn build(&self, e_c: &DVector<f64>, scale: f64) -> (DVector<f64>, DMatrix<f64>, f64) {
        let axes: Vec<f64> = self.axes.iter().map(|a| a * scale).collect();
        let center = e_c + self.rot.column(0) * (self.tau * axes[0]);
        let inv_sq = DVector::from_iterator(axes.len(), axes.iter().map(|a| 1.0 / (a * a)));
        let p = &self.rot * DMatrix::from_diagonal(&inv_sq) * self.rot.transpose();
        (center, p, axes.iter().product())
    }
}

/// Bisection stops this far inside the certificate so that it survives
/// converting the ellipsoid to and from its quadratic form.
const MARGIN_SLACK: f64 = 1e-9;

/// Finds `h_{j+1}` with `{h_{j+1} ≥ 0} ⊂ {h_j ≥ 0}`, `h_{j+1}(e_c) > 0` and
/// `‖ĝᵀ∇h_{j+1}(e_c)‖ ≥ γ`, all in `e₂`-coordinates.
pub fn find_next_barrier(
    e_c: &DVector<f64>,
    g_hat: &DMatrix<f64>,
    parent: &QuadraticBarrier,
    gamma: f64,
    cfg: &SynthesisConfig,
    rng: &mut impl Rng,
) -> Result<Candidate, ControlError> {
    let fail = |reason: String, best: Option<Candidate>| ControlError::BarrierSynthesisFailed { reason, best: best.map(Box::new) };
    let n = e_c.len();
    if g_hat.nrows() != n || parent.dim() != n {
        return Err(ControlError::Dimension(format!("synthesis in dimension {n} with g_hat {}x{}", g_hat.nrows(), g_hat.ncols())));
    }
    let (cp, pp, peak) = parent
        .center_form()
        .ok_or_else(|| fail("parent barrier is not a bounded ellipsoid".into(), None))?;
    if !(parent.eval(e_c.as_slice()) > 0.0) {
        return Err(fail("switch point is not inside the parent barrier".into(), None));
    }
    let svd = g_hat.clone().svd(true, false);
    let (s_max, idx) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0.0, 0), |acc, (i, &s)| if s > acc.0 { (s, i) } else { acc });
    if s_max <= 0.0 {
        return Err(fail("g_hat is zero".into(), None));
    }
    let v: DVector<f64> = svd.u.expect("requested").column(idx).into_owned();

    let parent_axes = SymmetricEigen::new(pp.clone()).eigenvalues.map(|l| 1.0 / l.sqrt());
    let a_max = parent_axes.max();
    let a_min = cfg.min_axis_frac * parent_axes.min();
    let pp_half = sqrt_sym(&pp, false);

    let evaluate = |shape: &Shape, scale: f64| -> Option<Candidate> {
        let (center, p, volume) = shape.build(e_c, scale);
        let barrier = QuadraticBarrier::ellipsoid(&center, &p, peak, "synthesized").ok()?;
        let score = (g_hat.transpose() * barrier.grad(e_c.as_slice())).norm();
        let value_at_xc = barrier.eval(e_c.as_slice());
        let margin = margin_from(&center, &p, &cp, &pp_half);
        Some(Candidate { barrier, score, value_at_xc, margin, volume })
    };

    let mut best: Option<Candidate> = None;
    let mut best_bad: Option<Candidate> = None;
    for it in 0..cfg.budget {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shape = if it == 0 {
            Shape { rot: frame(&(&v * sign), rng), axes: vec![a_max; n], tau: cfg.max_tau }
        } else {
            let spread = rng.random_range(0.0..0.5);
            let w = &v * sign + unit_gaussian(rng, n) * (spread / (n as f64).sqrt());
            let axes = (0..n).map(|_| log_uniform(rng, a_min, a_max)).collect();
            let tau = rng.random_range(0.2f64.min(cfg.max_tau)..=cfg.max_tau);
            Shape { rot: frame(&w, rng), axes, tau }
        };
        let min_axis = shape.axes.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = (a_min / min_axis).min(1.0);

        // Shrinking toward the switch point preserves containment, so the
        // largest certified scale is found by bisection.
        let Some(full) = evaluate(&shape, 1.0) else { continue };
        let cand = if full.margin > MARGIN_SLACK {
            full
        } else {
            let Some(small) = evaluate(&shape, floor) else { continue };
            if small.margin <= MARGIN_SLACK {
                small
            } else {
                let (mut lo, mut hi) = (floor, 1.0);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    match evaluate(&shape, mid) {
                        Some(c) if c.margin > MARGIN_SLACK => lo = mid,
                        _ => hi = mid,
                    }
                }
                evaluate(&shape, lo).unwrap_or(small)
            }
        };

        if cand.failed_condition(gamma).is_none() {
            let better = match (&best, cfg.objective) {
                (None, _) => true,
                (Some(b), SynthesisObjective::MaxGradient) => cand.score > b.score,
                (Some(b), SynthesisObjective::MaxVolume) => cand.volume > b.volume,
            };
            if better {
                best = Some(cand);
            }
        } else {
            let rank = |c: &Candidate| c.margin.min(0.0) + (c.score / gamma).min(1.0);
            if best_bad.as_ref().is_none_or(|b| rank(&cand) > rank(b)) {
                best_bad = Some(cand);
            }
        }
    }
    best.ok_or_else(|| {
        let why = best_bad
            .as_ref()
            .and_then(|c| c.failed_condition(gamma))
            .unwrap_or("no valid candidate");
        fail(format!("budget of {} candidates exhausted; best candidate fails: {why}", cfg.budget), best_bad)
    })
}
