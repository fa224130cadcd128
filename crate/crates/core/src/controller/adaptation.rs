use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{find_next_barrier, Candidate, ControlError, ControllerGains, SynthesisConfig};
use crate::barrier::{QuadraticBarrier, ReciprocalBarrier};

/// Barrier stack and hysteresis flags. Indices `j` and `ι` are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationState {
    pub j: usize,
    /// `rho[ι - 1]` is the flag `ρ_ι`.
    pub rho: Vec<bool>,
    /// `barriers[0]` is `h_v` as a function of `e₂`.
    pub barriers: Vec<QuadraticBarrier>,
    /// State at the last switch.
    pub x_c: Option<Vec<f64>>,
    limit: usize,
}

impl AdaptationState {
    pub fn new(h_v: QuadraticBarrier) -> Self {
        let limit = 2 * h_v.dim() + 1;
        Self { j: 1, rho: vec![true], barriers: vec![h_v], x_c: None, limit }
    }

    /// `j ← 1`, all flags up, synthesized barriers dropped. Returns the dropped barriers.
    pub fn reset(&mut self) -> Vec<QuadraticBarrier> {
        self.j = 1;
        self.rho = vec![true];
        self.x_c = None;
        self.barriers.split_off(1)
    }

    pub fn active(&self) -> &QuadraticBarrier {
        &self.barriers[self.j - 1]
    }

    /// Largest admissible index, `2n + 1`.
    pub fn limit(&self) -> usize {
        self.limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    /// `ρ_ι: 1 → 0` and a replacement barrier was pushed.
    Drop,
    /// `ρ_ι: 0 → 1` and control fell back to `h_ι`.
    Restore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub kind: SwitchKind,
    pub index: usize,
    pub j_before: usize,
    pub j_after: usize,
    pub rho: Vec<bool>,
    /// `‖ĝᵀ∇_{x₂}h_ι‖` that triggered the switch.
    pub norm: f64,
    pub synthesized: Option<Candidate>,
}

fn control_norm(g_hat: &DMatrix<f64>, h: &QuadraticBarrier, e2: &DVector<f64>) -> (DVector<f64>, f64) {
    let w = g_hat.transpose() * h.grad(e2.as_slice());
    let n = w.norm();
    (w, n)
}

/// One pass of the adaptation machine at state `x` with velocity error `e2`.
/// Returns the barrier term `u_b = β_j'(h_j) ĝᵀ∇h_j / ‖ĝᵀ∇h_j‖²` of the
/// active barrier and the switches that happened. On error the state is
/// left as it was before the failing transition.
#[allow(clippy::too_many_arguments)]
pub fn adaptation_step(
    x: &[f64],
    e2: &DVector<f64>,
    g_hat: &DMatrix<f64>,
    st: &mut AdaptationState,
    gains: &ControllerGains,
    beta: ReciprocalBarrier,
    synth: &SynthesisConfig,
    rng: &mut impl Rng,
) -> Result<(DVector<f64>, Vec<SwitchEvent>), ControlError> {
    let mut events = Vec::new();

    let j = st.j;
    let (_, nj) = control_norm(g_hat, st.active(), e2);
    if nj <= gains.eps_lo && st.rho[j - 1] {
        if j + 1 > st.limit {
            return Err(ControlError::IndexOverflow { limit: st.limit, state: x.to_vec(), rho: st.rho.clone() });
        }
        let cand = find_next_barrier(e2, g_hat, st.active(), gains.gamma_for(j + 1), synth, rng)?;
        st.rho[j - 1] = false;
        st.x_c = Some(x.to_vec());
        st.barriers.truncate(j);
        st.barriers.push(cand.barrier.clone());
        st.rho.truncate(j);
        st.rho.push(true);
        st.j = j + 1;
        events.push(SwitchEvent {
            kind: SwitchKind::Drop,
            index: j,
            j_before: j,
            j_after: j + 1,
            rho: st.rho.clone(),
            norm: nj,
            synthesized: Some(cand),
        });
    }

    for iota in 1..st.j {
        if st.rho[iota - 1] {
            continue;
        }
        let (_, ni) = control_norm(g_hat, &st.barriers[iota - 1], e2);
        if ni > gains.eps_hi {
            st.rho[iota - 1] = true;
            let before = st.j;
            st.j = iota;
            events.push(SwitchEvent {
                kind: SwitchKind::Restore,
                index: iota,
                j_before: before,
                j_after: iota,
                rho: st.rho.clone(),
                norm: ni,
                synthesized: None,
            });
            break;
        }
    }

    let h = st.active();
    let (_, beta_d, _) = beta.eval(h.eval(e2.as_slice()))?;
    let (w, norm) = control_norm(g_hat, h, e2);
    if norm == 0.0 {
        return Err(ControlError::ControllabilityLoss { norm });
    }
    Ok((w * (beta_d / (norm * norm)), events))
}
