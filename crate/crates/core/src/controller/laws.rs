use nalgebra::{DMatrix, DVector};

use super::{ControlError, ControllerGains};
use crate::barrier::{QuadraticBarrier, ReciprocalBarrier, SwitchFunction, VelocityBarrier};

/// Diagnostics of one evaluation of a barrier law.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LawDiag {
    /// `‖ĝᵀ∇_{x₂}h‖` (or `‖∇_{x₂}h_v‖` for the square law).
    pub norm: f64,
    pub sigma: f64,
    pub h_v: f64,
    pub beta_d: f64,
}

/// `x₂ᵣ(x₁) = -κ_x σ_{μ_x}(h) β'(h) ∇h(x₁)`.
pub fn x2_reference(
    x1: &[f64],
    gains: &ControllerGains,
    h: &QuadraticBarrier,
    beta: ReciprocalBarrier,
) -> Result<DVector<f64>, ControlError> {
    let hv = h.eval(x1);
    let (_, d1, _) = beta.eval(hv)?;
    let s = SwitchFunction { mu: gains.mu_x, ramp: gains.ramp }.eval(hv);
    if s == 0.0 {
        return Ok(DVector::zeros(x1.len()));
    }
    Ok(h.grad(x1) * (-gains.kappa_x * s * d1))
}

fn check(x: &[f64], u_nom: &DVector<f64>, hv: &VelocityBarrier, m: Option<usize>) -> Result<(), ControlError> {
    let n = hv.n();
    if x.len() != 2 * n || m.is_some_and(|m| m != u_nom.len()) {
        return Err(ControlError::Dimension(format!("state {} / input {} for n = {n}", x.len(), u_nom.len())));
    }
    Ok(())
}

/// `u = u_nom - κ_v σ_{μ_v}(h_v) β_{v}'(h_v) ĝᵀ∇_{x₂}h_v / ‖ĝᵀ∇_{x₂}h_v‖²`.
pub fn control_local(
    x: &[f64],
    g_hat: &DMatrix<f64>,
    u_nom: &DVector<f64>,
    gains: &ControllerGains,
    hv: &VelocityBarrier,
    beta_v: ReciprocalBarrier,
) -> Result<(DVector<f64>, LawDiag), ControlError> {
    check(x, u_nom, hv, Some(g_hat.ncols()))?;
    if g_hat.nrows() != hv.n() {
        return Err(ControlError::Dimension(format!("g_hat has {} rows, want {}", g_hat.nrows(), hv.n())));
    }
    let h = hv.eval(x)?;
    let (_, beta_d, _) = beta_v.eval(h)?;
    let sigma = gains.switch_v().eval(h);
    let w = g_hat.transpose() * hv.grad_x2(x)?;
    let norm = w.norm();
    let diag = LawDiag { norm, sigma, h_v: h, beta_d };
    if sigma == 0.0 {
        return Ok((u_nom.clone(), diag));
    }
    if norm <= gains.eps_lo {
        return Err(ControlError::ControllabilityLoss { norm });
    }
    let u = u_nom - w * (gains.kappa_v * sigma * beta_d / (norm * norm));
    Ok((u, diag))
}

/// Data-free law for square `g` with `g + gᵀ ≻ 0`:
/// `u = u_nom - κ_v σ_{μ_v}(h_v) β_{v}'(h_v) ∇_{x₂}h_v`.
pub fn control_square(
    x: &[f64],
    u_nom: &DVector<f64>,
    gains: &ControllerGains,
    hv: &VelocityBarrier,
    beta_v: ReciprocalBarrier,
) -> Result<(DVector<f64>, LawDiag), ControlError> {
    check(x, u_nom, hv, Some(hv.n()))?;
    let h = hv.eval(x)?;
    let (_, beta_d, _) = beta_v.eval(h)?;
    let sigma = gains.switch_v().eval(h);
    let grad = hv.grad_x2(x)?;
    let diag = LawDiag { norm: grad.norm(), sigma, h_v: h, beta_d };
    if sigma == 0.0 {
        return Ok((u_nom.clone(), diag));
    }
    Ok((u_nom - grad * (gains.kappa_v * sigma * beta_d), diag))
}
