//! Barrier feedback laws and the adaptation machine for controllability loss.

mod adaptation;
mod laws;
mod safety;
mod synth;

pub use adaptation::{adaptation_step, AdaptationState, SwitchEvent, SwitchKind};
pub use laws::{control_local, control_square, x2_reference, LawDiag};
pub use safety::{LawMode, SafetyController, TickDiag, TickEvent};
pub use synth::{containment_margin, find_next_barrier, Candidate, SynthesisConfig, SynthesisObjective};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierError, Ramp, SwitchFunction};
use crate::overapprox::OverapproxError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("controllability loss: |g_hat^T grad h| = {norm:e}")]
    ControllabilityLoss { norm: f64 },
    #[error("barrier synthesis failed: {reason}")]
    BarrierSynthesisFailed { reason: String, best: Option<Box<Candidate>> },
    #[error("barrier index would exceed {limit} (state {state:?}, rho {rho:?})")]
    IndexOverflow { limit: usize, state: Vec<f64>, rho: Vec<bool> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Overapprox(#[from] OverapproxError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub kappa_x: f64,
    pub kappa_v: f64,
    pub mu_x: f64,
    pub mu_v: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// `γ_j` for `j = 2, 3, ..`; the last value repeats, `ε̄` when empty.
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default = "half")]
    pub theta: f64,
    #[serde(default)]
    pub ramp: Ramp,
}

fn half() -> f64 {
    0.5
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::InvalidGains(m));
        for (name, v) in [("kappa_x", self.kappa_x), ("kappa_v", self.kappa_v)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be nonnegative"));
            }
        }
        for (name, v) in [("mu_x", self.mu_x), ("mu_v", self.mu_v), ("eps_lo", self.eps_lo), ("eps_hi", self.eps_hi)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.eps_lo >= self.eps_hi {
            return bad(format!("empty hysteresis band: eps_lo {} >= eps_hi {}", self.eps_lo, self.eps_hi));
        }
        if let Some(g) = self.gamma.iter().find(|&&g| !(g > self.eps_lo)) {
            return bad(format!("gamma {g} must exceed eps_lo {}", self.eps_lo));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        Ok(())
    }

    /// `γ_j` for a 1-based barrier index `j ≥ 2`.
    pub fn gamma_for(&self, j: usize) -> f64 {
        match self.gamma.len() {
            0 => self.eps_hi,
            len => self.gamma[(j.saturating_sub(2)).min(len - 1)],
        }
    }

    pub fn switch_x(&self) -> SwitchFunction {
        SwitchFunction { mu: self.mu_x, ramp: self.ramp }
    }

    pub fn switch_v(&self) -> SwitchFunction {
        SwitchFunction { mu: self.mu_v, ramp: self.ramp }
    }
}

#[cfg(test)]
pub(crate) fn sec6_gains() -> ControllerGains {
    ControllerGains {
        kappa_x: 1.0,
        kappa_v: 100.0,
        mu_x: 0.1,
        mu_v: 100.0,
        eps_lo: 0.05,
        eps_hi: 5.0,
        gamma: vec![],
        theta: 0.5,
        ramp: Ramp::Linear,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_validation() {
        let g = sec6_gains();
        assert!(g.validate().is_ok());
        assert_eq!(g.gamma_for(2), 5.0);
        let mut bad = g.clone();
        bad.eps_lo = bad.eps_hi;
        assert!(bad.validate().is_err());
        let mut bad = g.clone();
        bad.gamma = vec![0.01];
        assert!(bad.validate().is_err());
        let mut sched = g;
        sched.gamma = vec![6.0, 7.0];
        assert_eq!((sched.gamma_for(2), sched.gamma_for(3), sched.gamma_for(9)), (6.0, 7.0, 7.0));
    }
}
