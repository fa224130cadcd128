use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use safelearn::barrier::{
    make_sphere_barrier, QuadraticBarrier, Ramp, ReciprocalBarrier, SwitchFunction, VelocityBarrier,
};

const H: f64 = 1e-6;

fn fd(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += H;
            b[i] -= H;
            (f(&a) - f(&b)) / (2.0 * H)
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn velocity_barrier(ramp: Ramp) -> VelocityBarrier {
    let pos = make_sphere_barrier(0.36, &[0, 1], 3).unwrap();
    let a_v = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5]));
    VelocityBarrier::new(100.0, a_v, pos, 1.0, SwitchFunction::new(0.1, ramp).unwrap(), ReciprocalBarrier::Inverse).unwrap()
}

proptest! {
    #[test]
    fn reciprocal_derivatives(h in 0.05..10.0f64) {
        for b in [ReciprocalBarrier::Inverse, ReciprocalBarrier::LogRatio] {
            let (_, d1, d2) = b.eval(h).unwrap();
            let v = |s: f64| b.eval(s).unwrap().0;
            let d = |s: f64| b.eval(s).unwrap().1;
            prop_assert!(close(d1, (v(h + H) - v(h - H)) / (2.0 * H), 1e-5));
            prop_assert!(close(d2, (d(h + H) - d(h - H)) / (2.0 * H), 1e-5));
            prop_assert!(d1 < 0.0);
        }
    }

    #[test]
    fn switch_derivative(s in 0.001..0.099f64) {
        for ramp in [Ramp::Linear, Ramp::Cosine] {
            let sw = SwitchFunction::new(0.1, ramp).unwrap();
            let num = (sw.eval(s + H) - sw.eval(s - H)) / (2.0 * H);
            prop_assert!(close(sw.deriv(s), num, 1e-5));
            prop_assert!((0.0..=1.0).contains(&sw.eval(s)));
        }
    }

    #[test]
    fn quadratic_gradient(z in prop::collection::vec(-2.0..2.0f64, 3), seed in prop::collection::vec(-1.0..1.0f64, 9)) {
        let m = DMatrix::from_vec(3, 3, seed);
        let a = (&m + m.transpose()) * 0.5;
        let h = QuadraticBarrier::new(a, DVector::from_vec(vec![0.3, -0.2, 0.1]), 1.0, "q").unwrap();
        let g = h.grad(&z);
        for (i, v) in fd(|p| h.eval(p), &z).into_iter().enumerate() {
            prop_assert!(close(g[i], v, 1e-6));
        }
    }

    // positions inside the switch band, away from its edges, with a smooth ramp
    #[test]
    fn velocity_barrier_gradients(r in 0.5..0.58f64, ang in 0.0..std::f64::consts::TAU, z in -0.5..0.5f64, v in prop::collection::vec(-3.0..3.0f64, 3)) {
        let hv = velocity_barrier(Ramp::Cosine);
        let x = [r * ang.cos(), r * ang.sin(), z, v[0], v[1], v[2]];
        let jac = hv.x2_reference_jacobian(&x[..3]).unwrap();
        for i in 0..3 {
            let row = fd(|p| hv.x2_reference(p).unwrap()[i], &x[..3]);
            for (j, val) in row.into_iter().enumerate() {
                prop_assert!(close(jac[(i, j)], val, 1e-4), "jac {} {} {} {}", i, j, jac[(i, j)], val);
            }
        }
        let full = fd(|p| hv.eval(p).unwrap(), &x);
        let (g1, g2) = (hv.grad_x1(&x).unwrap(), hv.grad_x2(&x).unwrap());
        // h_v reaches 1e6 near the boundary, so scale by the gradient size
        let scale = 1.0 + full.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..3 {
            prop_assert!((g1[i] - full[i]).abs() <= 1e-5 * scale, "x1 {} {} {}", i, g1[i], full[i]);
            prop_assert!((g2[i] - full[3 + i]).abs() <= 1e-5 * scale);
        }
    }
}

#[test]
fn reference_vanishes_far_from_boundary() {
    let hv = velocity_barrier(Ramp::Linear);
    assert_eq!(hv.x2_reference(&[0.0, 0.1, 0.3]).unwrap().as_slice(), &[0.0; 3]);
    let x = [0.0, 0.1, 0.3, 1.0, 2.0, 3.0];
    assert_eq!(hv.eval(&x).unwrap(), 100.0 - (1.0 + 8.0 + 4.5));
}

#[test]
fn reference_points_inward() {
    let hv = velocity_barrier(Ramp::Linear);
    let x1 = [0.58, 0.0, 0.0];
    let r = hv.x2_reference(&x1).unwrap();
    assert!(r[0] < 0.0 && r[1] == 0.0 && r[2] == 0.0);
    assert!(hv.x2_reference(&[0.7, 0.0, 0.0]).is_err());
}

#[test]
fn invalid_barriers_rejected() {
    let pos = make_sphere_barrier(1.0, &[0], 1).unwrap();
    let neg = DMatrix::from_element(1, 1, -1.0);
    assert!(VelocityBarrier::new(1.0, neg, pos.clone(), 1.0, SwitchFunction::linear(0.1), ReciprocalBarrier::Inverse).is_err());
    let one = DMatrix::identity(1, 1);
    assert!(VelocityBarrier::new(0.0, one, pos, 1.0, SwitchFunction::linear(0.1), ReciprocalBarrier::Inverse).is_err());
    assert!(make_sphere_barrier(0.0, &[0], 1).is_err());
    assert!(make_sphere_barrier(1.0, &[3], 2).is_err());
}
