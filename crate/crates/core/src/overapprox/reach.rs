use nalgebra::DMatrix;

use super::{cover_box, EvidenceEntry, EvidenceSet, LipschitzBounds, OverapproxError};
use crate::interval::{Interval, IntervalMatrix, IntervalVector};

/// Enclosure of the state one step ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnclosure {
    /// Second-order enclosure of the state at the end of the step.
    pub state_box: IntervalVector,
    /// A priori enclosure of the whole trajectory over the step.
    pub rough: IntervalVector,
}

/// Lipschitz constant of the lifted vector field `(x₂, f + gU)`: kinematic
/// rows contribute 1, dynamic rows `f̄_k + Σ ḡ_kℓ |U_ℓ|`.
pub fn lifted_beta(bounds: &LipschitzBounds, u: &IntervalVector) -> f64 {
    let dyn_sq: f64 = bounds.row_rates(u).iter().map(|r| r * r).sum();
    (bounds.n() as f64 + dyn_sq).sqrt()
}

fn step_factor(bounds: &LipschitzBounds, u: &IntervalVector, dt: f64) -> Result<f64, OverapproxError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OverapproxError::Invalid(format!("step {dt} must be positive")));
    }
    let sq_dim = ((2 * bounds.n()) as f64).sqrt();
    let beta = lifted_beta(bounds, u);
    let q = sq_dim * beta * dt;
    if q >= 1.0 {
        return Err(OverapproxError::StepTooLarge { dt, max_dt: 1.0 / (sq_dim * beta) });
    }
    Ok(q)
}

fn lifted_field(x: &IntervalVector, f: &IntervalVector, g: &IntervalMatrix, u: &IntervalVector) -> IntervalVector {
    let n = f.len();
    let gu = g.mul_interval(u).expect("dimensions checked");
    (0..n).map(|k| x[n + k]).chain((0..n).map(|k| f[k] + gu[k])).collect()
}

/// Applies the Jacobian enclosure `𝒥f + 𝒥g U` of the lifted field to `v`.
/// Kinematic rows are exact selectors of the velocity block.
fn jacobian_apply(rates: &[f64], v: &IntervalVector) -> IntervalVector {
    let n = rates.len();
    let total: f64 = v.iter().map(Interval::abs).sum();
    (0..n)
        .map(|k| v[n + k])
        .chain(rates.iter().map(|r| Interval::symmetric(r * total)))
        .collect()
}

fn check_dims(ev: &EvidenceSet, x: usize, u: &IntervalVector) -> Result<(), OverapproxError> {
    if x != 2 * ev.n() || u.len() != ev.m() {
        return Err(OverapproxError::Dimension(format!(
            "state {x} / input {} for n={}, m={}",
            u.len(),
            ev.n(),
            ev.m()
        )));
    }
    Ok(())
}

/// One-step enclosure from a box of initial states, valid for every input
/// signal with values in `u`.
pub fn predict_from_box(
    x: &IntervalVector,
    u: &IntervalVector,
    dt: f64,
    ev: &EvidenceSet,
) -> Result<StateEnclosure, OverapproxError> {
    check_dims(ev, x.len(), u)?;
    let q = step_factor(ev.bounds(), u, dt)?;
    let rates = ev.bounds().row_rates(u);

    let (f, g) = cover_box(x, ev)?;
    let hx = lifted_field(x, &f, &g, u);
    let r = dt * hx.inf_norm() / (1.0 - q);
    let rough: IntervalVector = x.iter().map(|&a| a + Interval::symmetric(r)).collect();

    let (fs, gs) = cover_box(&rough, ev)?;
    let hs = lifted_field(&rough, &fs, &gs, u);
    let second = jacobian_apply(&rates, &hs);
    let half = 0.5 * dt * dt;
    let state_box: IntervalVector =
        (0..x.len()).map(|i| x[i] + hx[i].scale(dt) + second[i].scale(half)).collect();
    let state_box = state_box.intersect(&rough)?;
    Ok(StateEnclosure { state_box, rough })
}

/// One-step enclosure from a point state.
pub fn predict_next_state(
    x: &[f64],
    u: &IntervalVector,
    dt: f64,
    ev: &EvidenceSet,
) -> Result<StateEnclosure, OverapproxError> {
    predict_from_box(&IntervalVector::from_points(x), u, dt, ev)
}

/// Upper limit on the number of sub-steps of [`enclose_interval`].
pub const MAX_SUBSTEPS: usize = 100_000;

/// Chains one-step enclosures over `total` seconds using substeps no longer
/// than `safety` times the admissible step (`0 < safety < 1`).
pub fn enclose_interval(
    x: &[f64],
    u: &IntervalVector,
    total: f64,
    ev: &EvidenceSet,
    safety: f64,
) -> Result<StateEnclosure, OverapproxError> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(OverapproxError::Invalid(format!("safety factor {safety} outside (0, 1)")));
    }
    check_dims(ev, x.len(), u)?;
    let sq_dim = ((2 * ev.n()) as f64).sqrt();
    let max_dt = safety / (sq_dim * lifted_beta(ev.bounds(), u));
    let steps = (total / max_dt).ceil().max(1.0);
    if !(steps <= MAX_SUBSTEPS as f64) {
        return Err(OverapproxError::StepTooLarge { dt: total / MAX_SUBSTEPS as f64, max_dt });
    }
    let steps = steps as usize;
    let dt = total / steps as f64;
    let mut cur = IntervalVector::from_points(x);
    let mut rough = cur.clone();
    for _ in 0..steps {
        let enc = predict_from_box(&cur, u, dt, ev)?;
        rough = rough.iter().zip(enc.rough.iter()).map(|(a, b)| a.hull(b)).collect();
        cur = enc.state_box;
    }
    Ok(StateEnclosure { state_box: cur, rough })
}

/// Bound on `|ĝ_kℓ(x⁺) - g_kℓ(x⁺)|` one step of length `dt` after the
/// evidence point `entry.x`, for inputs valued in `u`.
pub fn estimation_error_bound(
    entry: &EvidenceEntry,
    u: &IntervalVector,
    dt: f64,
    ev: &EvidenceSet,
) -> Result<DMatrix<f64>, OverapproxError> {
    check_dims(ev, entry.x.len(), u)?;
    let b = ev.bounds();
    let q = step_factor(b, u, dt)?;
    let n = ev.n();
    let rates = b.row_rates(u);
    let sq_dim = ((2 * n) as f64).sqrt();

    let hx = lifted_field(&IntervalVector::from_points(&entry.x), &entry.cf, &entry.cg, u);
    let r = dt * hx.inf_norm() / (1.0 - q);
    let lifted_rates = std::iter::repeat_n(1.0, n).chain(rates.iter().copied());
    let inner: IntervalVector = hx
        .iter()
        .zip(lifted_rates)
        .map(|(&h, rate)| h + Interval::symmetric(r * rate * sq_dim))
        .collect();
    let kk = jacobian_apply(&rates, &inner);
    let motion = hx.norm2().hi() * dt + kk.norm2().hi() * dt * dt / 2.0;
    Ok(DMatrix::from_fn(n, ev.m(), |k, l| entry.cg.get(k, l).width() + 2.0 * b.g_bar[k][l] * motion))
}

/// As [`estimation_error_bound`], but bounding the displacement with
/// [`enclose_interval`], so `dt` may exceed the single-step limit.
pub fn estimation_error_bound_chained(
    entry: &EvidenceEntry,
    u: &IntervalVector,
    dt: f64,
    ev: &EvidenceSet,
    safety: f64,
) -> Result<DMatrix<f64>, OverapproxError> {
    let enc = enclose_interval(&entry.x, u, dt, ev, safety)?;
    Ok(error_bound_from_enclosure(entry, &enc, ev))
}

/// `wd(C_G) + 2ḡ · max_{y ∈ box} ‖y - xⁱ‖` for an already computed enclosure.
pub fn error_bound_from_enclosure(entry: &EvidenceEntry, enc: &StateEnclosure, ev: &EvidenceSet) -> DMatrix<f64> {
    let motion = enc.state_box.max_distance_from(&entry.x);
    let b = ev.bounds();
    DMatrix::from_fn(ev.n(), ev.m(), |k, l| entry.cg.get(k, l).width() + 2.0 * b.g_bar[k][l] * motion)
}
