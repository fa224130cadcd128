use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    adaptation_step, control_local, control_square, AdaptationState, ControlError, ControllerGains, SwitchEvent,
    SynthesisConfig,
};
use crate::barrier::{QuadraticBarrier, ReciprocalBarrier, VelocityBarrier};
use crate::overapprox::{cover, DataPoint, EvidenceSet, OverapproxError, SweepReport};

/// Which feedback law composes the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawMode {
    /// General law driven by the adaptation machine.
    #[default]
    Adaptive,
    /// Local law on `h_v` only.
    Local,
    /// Data-free law for square `g`.
    Square,
    /// `u = u_nom`.
    Nominal,
}

/// Per-tick diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TickDiag {
    pub h_v: f64,
    pub e2_norm: f64,
    pub sigma: f64,
    pub j: usize,
    pub rho: Vec<bool>,
    /// `‖ĝᵀ∇_{x₂}h_j‖` for the active barrier.
    pub norm: f64,
    pub g_hat: DMatrix<f64>,
    pub width_f: f64,
    pub width_g: f64,
    /// `ε̲ σ - ‖wd(G(x))‖_F ‖∇_{x₂}h_v‖`; positive when the sufficient
    /// condition for the local law holds at this tick. Logged only.
    pub cond: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TickEvent {
    Switch(SwitchEvent),
    Measurement { data: usize, report: Option<SweepReport> },
    Reset { discarded: Vec<QuadraticBarrier> },
    Error { kind: &'static str, message: String },
}

impl TickEvent {
    fn error(kind: &'static str, e: impl std::fmt::Display) -> Self {
        TickEvent::Error { kind, message: e.to_string() }
    }
}

fn error_kind(e: &ControlError) -> &'static str {
    match e {
        ControlError::ControllabilityLoss { .. } => "controllability_loss",
        ControlError::BarrierSynthesisFailed { .. } => "barrier_synthesis_failed",
        ControlError::IndexOverflow { .. } => "index_overflow",
        ControlError::Barrier(_) => "non_positive_barrier",
        ControlError::Overapprox(_) => "estimator",
        _ => "control",
    }
}

/// The closed-loop safety layer: evidence, `ĝ`, and the selected law.
#[derive(Debug, Clone)]
pub struct SafetyController {
    pub gains: ControllerGains,
    pub hv: VelocityBarrier,
    pub beta_v: ReciprocalBarrier,
    pub mode: LawMode,
    pub synth: SynthesisConfig,
    evidence: EvidenceSet,
    adapt: AdaptationState,
    rng: ChaCha8Rng,
    g0: DMatrix<f64>,
}

impl SafetyController {
    pub fn new(
        gains: ControllerGains,
        hv: VelocityBarrier,
        beta_v: ReciprocalBarrier,
        mode: LawMode,
        synth: SynthesisConfig,
        evidence: EvidenceSet,
        seed: u64,
    ) -> Result<Self, ControlError> {
        gains.validate()?;
        synth.validate()?;
        if evidence.n() != hv.n() {
            return Err(ControlError::Dimension(format!("evidence n={} vs barrier n={}", evidence.n(), hv.n())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = DMatrix::from_fn(evidence.n(), evidence.m(), |_, _| rng.random_range(-1.0..1.0));
        let adapt = AdaptationState::new(hv.as_quadratic());
        Ok(Self { gains, hv, beta_v, mode, synth, evidence, adapt, rng, g0 })
    }

    pub fn evidence(&self) -> &EvidenceSet {
        &self.evidence
    }

    pub fn adaptation(&self) -> &AdaptationState {
        &self.adapt
    }

    /// `ĝ(x)`, the seeded random `ĝ⁰` while no data has arrived.
    pub fn g_hat(&self, x: &[f64]) -> Result<DMatrix<f64>, OverapproxError> {
        if self.evidence.data().is_empty() {
            Ok(self.g0.clone())
        } else {
            crate::overapprox::estimate_g(x, &self.evidence, self.gains.theta)
        }
    }

    /// Ingests a measurement and restarts the adaptation machine.
    pub fn measure(&mut self, d: DataPoint) -> Vec<TickEvent> {
        let mut events = Vec::new();
        let report = match self.evidence.ingest(d) {
            Ok(r) => Some(r),
            Err(e) => {
                let kind = match e {
                    OverapproxError::NonTermination { .. } => "non_termination",
                    _ => "inconsistent_evidence",
                };
                events.push(TickEvent::error(kind, e));
                None
            }
        };
        events.insert(0, TickEvent::Measurement { data: self.evidence.data().len(), report });
        let discarded = self.adapt.reset();
        events.push(TickEvent::Reset { discarded });
        events
    }

    /// Computes the input for state `x` given the nominal input.
    pub fn control(&mut self, x: &[f64], u_nom: &DVector<f64>) -> (DVector<f64>, TickDiag, Vec<TickEvent>) {
        let mut events = Vec::new();
        let (g_hat, width_f, width_g, width_g_norm) = match self.cover_at(x) {
            Ok(v) => v,
            Err(e) => {
                events.push(TickEvent::error("estimator", &e));
                (self.g0.clone(), f64::NAN, f64::NAN, f64::NAN)
            }
        };
        let e2 = self.hv.e2(x).unwrap_or_else(|_| DVector::from_element(self.hv.n(), f64::NAN));
        let h_v = self.hv.eval_e2(&e2);
        let sigma = self.gains.switch_v().eval(h_v);
        let mut diag = TickDiag {
            h_v,
            e2_norm: e2.norm(),
            sigma,
            j: self.adapt.j,
            rho: self.adapt.rho.clone(),
            norm: f64::NAN,
            g_hat,
            width_f,
            width_g,
            cond: self.gains.eps_lo * sigma - width_g_norm * (&self.hv.a_v * &e2).norm() * 2.0,
        };

        let u = match self.mode {
            LawMode::Nominal => u_nom.clone(),
            LawMode::Square => match control_square(x, u_nom, &self.gains, &self.hv, self.beta_v) {
                Ok((u, d)) => {
                    diag.norm = d.norm;
                    u
                }
                Err(e) => {
                    events.push(TickEvent::error(error_kind(&e), &e));
                    u_nom.clone()
                }
            },
            LawMode::Local => match control_local(x, &diag.g_hat, u_nom, &self.gains, &self.hv, self.beta_v) {
                Ok((u, d)) => {
                    diag.norm = d.norm;
                    u
                }
                Err(e) => {
                    events.push(TickEvent::error(error_kind(&e), &e));
                    let g = diag.g_hat.clone();
                    self.fallback(&e2, &g, u_nom, sigma, &mut diag)
                }
            },
            LawMode::Adaptive => {
                if !(h_v > 0.0) {
                    events.push(TickEvent::error("non_positive_barrier", format!("h_v = {h_v}")));
                    u_nom.clone()
                } else {
                    let step = adaptation_step(
                        x,
                        &e2,
                        &diag.g_hat,
                        &mut self.adapt,
                        &self.gains,
                        self.beta_v,
                        &self.synth,
                        &mut self.rng,
                    );
                    let u = match step {
                        Ok((ub, switches)) => {
                            events.extend(switches.into_iter().map(TickEvent::Switch));
                            diag.norm = (diag.g_hat.transpose() * self.adapt.active().grad(e2.as_slice())).norm();
                            if sigma == 0.0 {
                                u_nom.clone()
                            } else {
                                u_nom - ub * (self.gains.kappa_v * sigma)
                            }
                        }
                        Err(e) => {
                            events.push(TickEvent::error(error_kind(&e), &e));
                            let g = diag.g_hat.clone();
                            self.fallback(&e2, &g, u_nom, sigma, &mut diag)
                        }
                    };
                    diag.j = self.adapt.j;
                    diag.rho = self.adapt.rho.clone();
                    u
                }
            }
        };
        (u, diag, events)
    }

    fn cover_at(&self, x: &[f64]) -> Result<(DMatrix<f64>, f64, f64, f64), OverapproxError> {
        let (f, g) = cover(x, &self.evidence)?;
        let wf = f.iter().map(|a| a.width()).fold(0.0, f64::max);
        let wg = g.iter().map(|a| a.width()).fold(0.0, f64::max);
        let wg_norm = g.iter().map(|a| a.width() * a.width()).sum::<f64>().sqrt();
        let g_hat = if self.evidence.data().is_empty() {
            self.g0.clone()
        } else {
            let th = self.gains.theta;
            DMatrix::from_fn(g.rows(), g.cols(), |k, l| {
                let a = g.get(k, l);
                th * a.lo() + (1.0 - th) * a.hi()
            })
        };
        Ok((g_hat, wf, wg, wg_norm))
    }

    /// Barrier term of the innermost stacked barrier that is still positive,
    /// with the direction norm clamped at `ε̲`.
    fn fallback(
        &self,
        e2: &DVector<f64>,
        g_hat: &DMatrix<f64>,
        u_nom: &DVector<f64>,
        sigma: f64,
        diag: &mut TickDiag,
    ) -> DVector<f64> {
        if sigma == 0.0 {
            return u_nom.clone();
        }
        let stack = match self.mode {
            LawMode::Adaptive => &self.adapt.barriers[..self.adapt.j],
            _ => &self.adapt.barriers[..1],
        };
        for h in stack.iter().rev() {
            if let Ok((_, beta_d, _)) = self.beta_v.eval(h.eval(e2.as_slice())) {
                let w = g_hat.transpose() * h.grad(e2.as_slice());
                let norm = w.norm();
                diag.norm = norm;
                let denom = norm.max(self.gains.eps_lo);
                return u_nom - w * (self.gains.kappa_v * sigma * beta_d / (denom * denom));
            }
        }
        u_nom.clone()
    }
}
