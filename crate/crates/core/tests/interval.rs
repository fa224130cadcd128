use proptest::prelude::*;

use safelearn::interval::{mat_vec, Interval, IntervalMatrix, IntervalVector};

fn iv() -> impl Strategy<Value = (Interval, f64)> {
    (-1e3..1e3f64, 0.0..1e3f64, 0.0..=1.0f64).prop_map(|(lo, w, s)| (Interval::new(lo, lo + w), lo + s * w))
}

proptest! {
    #[test]
    fn arithmetic_encloses_members((a, x) in iv(), (b, y) in iv()) {
        prop_assert!((a + b).contains_tol(x + y, 1e-9));
        prop_assert!((a - b).contains_tol(x - y, 1e-9));
        prop_assert!((a * b).contains_tol(x * y, 1e-6));
        prop_assert!((-a).contains(-x));
        prop_assert!(a.scale(-2.5).contains_tol(-2.5 * x, 1e-9));
    }

    #[test]
    fn width_and_magnitude((a, x) in iv()) {
        prop_assert!(a.width() >= 0.0);
        prop_assert!(a.abs() >= x.abs());
        prop_assert!(a.mig() <= x.abs());
        prop_assert!(a.contains(a.mid()));
    }

    #[test]
    fn hull_and_intersection((a, x) in iv(), (b, y) in iv()) {
        let h = a.hull(&b);
        prop_assert!(h.contains(x) && h.contains(y));
        prop_assert!(a.subset_of(&h) && b.subset_of(&h));
        match (a.intersect(&b), b.intersect(&a)) {
            (Ok(i), Ok(j)) => {
                prop_assert_eq!(i, j);
                prop_assert!(i.width() <= a.width() + 1e-9 && i.width() <= b.width() + 1e-9);
            }
            (Err(_), Err(_)) => prop_assert!(a.distance(&b) > 0.0),
            _ => prop_assert!(false, "intersection is not symmetric"),
        }
    }

    #[test]
    fn mat_vec_encloses(entries in prop::collection::vec(iv(), 6), u in prop::collection::vec(-10.0..10.0f64, 3)) {
        let g = IntervalMatrix::from_fn(2, 3, |r, c| entries[3 * r + c].0);
        let y = mat_vec(&g, &u).unwrap();
        for r in 0..2 {
            let v: f64 = (0..3).map(|c| entries[3 * r + c].1 * u[c]).sum();
            prop_assert!(y[r].contains_tol(v, 1e-6));
        }
    }

    #[test]
    fn vector_contains_its_points(pts in prop::collection::vec(iv(), 1..6)) {
        let v: IntervalVector = pts.iter().map(|p| p.0).collect();
        let x: Vec<f64> = pts.iter().map(|p| p.1).collect();
        prop_assert!(v.contains_point(&x, 0.0));
        prop_assert!(v.max_distance_from(&x) <= v.widths().iter().map(|w| w * w).sum::<f64>().sqrt() + 1e-9);
    }
}

#[test]
fn invalid_endpoints_rejected() {
    assert!(Interval::try_new(1.0, 0.0).is_err());
    assert!(Interval::try_new(f64::NAN, 0.0).is_err());
    assert!(Interval::new(0.0, 1.0).intersect(&Interval::new(2.0, 3.0)).is_err());
}

#[test]
fn dimension_mismatch() {
    let g = IntervalMatrix::filled(2, 3, Interval::point(1.0));
    assert!(mat_vec(&g, &[1.0, 2.0]).is_err());
}
