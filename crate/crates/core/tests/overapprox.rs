mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use safelearn::interval::{Interval, IntervalMatrix, IntervalVector};
use safelearn::overapprox::{
    contract, cover, enclose_interval, estimation_error_bound_chained, read_evidence, write_evidence, DataPoint,
    EvidenceSet, LipschitzBounds, OverapproxError,
};
use safelearn::sim::{make_quadrotor, Plant};

proptest! {
    #[test]
    fn contraction_is_sound_and_tighter(
        f0 in -5.0..5.0f64, g0 in -5.0..5.0f64, u in -3.0..3.0f64,
        wf in (0.0..3.0f64, 0.0..3.0f64), wg in (0.0..3.0f64, 0.0..3.0f64),
    ) {
        let fi = Interval::new(f0 - wf.0, f0 + wf.1);
        let gi = Interval::new(g0 - wg.0, g0 + wg.1);
        let d = DataPoint { x: vec![0.0, 0.0], x_dot: vec![0.0, f0 + g0 * u], u: vec![u], t: 0.0 };
        let (cf, cg) = contract(&d, &IntervalVector::new(vec![fi]), &IntervalMatrix::filled(1, 1, gi)).unwrap();
        prop_assert!(cf[0].contains_tol(f0, 1e-9) && cg.get(0, 0).contains_tol(g0, 1e-9));
        prop_assert!(cf[0].width() <= fi.width() + 1e-9 && cg.get(0, 0).width() <= gi.width() + 1e-9);
    }

    #[test]
    fn covers_shrink_as_data_arrives(seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plant = PolyPlant::random(&mut rng, 2, 2, 2.0);
        let probe = random_point(&mut rng, 4, 1.0);
        let mut ev = EvidenceSet::new(plant.bounds(), 50.0, vec![0.0; 4]).unwrap();
        let mut prev = cover(&probe, &ev).unwrap();
        for i in 0..6 {
            let x = random_point(&mut rng, 4, 1.0);
            let u = random_point(&mut rng, 2, 1.0);
            match ev.ingest(measure(&plant, &x, &u, i as f64)) {
                Ok(_) | Err(OverapproxError::NonTermination { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
            let next = cover(&probe, &ev).unwrap();
            prop_assert!(next.0.subset_of(&prev.0));
            prop_assert!(next.1.iter().zip(prev.1.iter()).all(|(a, b)| a.width() <= b.width() + 1e-12));
            prev = next;
        }
    }
}

#[test]
fn inconsistent_point_rolls_back() {
    let bounds = LipschitzBounds::new(vec![1.0], vec![vec![1.0]]).unwrap();
    let mut ev = EvidenceSet::new(bounds, 10.0, vec![0.0, 0.0]).unwrap();
    ev.ingest(DataPoint { x: vec![0.0, 0.0], x_dot: vec![0.0, 1.0], u: vec![0.0], t: 0.0 }).unwrap();
    let before = write_evidence(ev.entries());
    let err = ev.ingest(DataPoint { x: vec![0.0, 0.0], x_dot: vec![0.0, 5.0], u: vec![0.0], t: 0.1 });
    assert!(matches!(err, Err(OverapproxError::EmptyIntersection { .. } | OverapproxError::Contradiction { .. })), "{err:?}");
    assert_eq!(write_evidence(ev.entries()), before);
    assert_eq!(ev.data().len(), 1);
}

#[test]
fn non_kinematic_point_is_rejected() {
    let bounds = LipschitzBounds::new(vec![1.0], vec![vec![1.0]]).unwrap();
    let mut ev = EvidenceSet::new(bounds, 10.0, vec![0.0, 0.0]).unwrap();
    let err = ev.ingest(DataPoint { x: vec![0.0, 1.0], x_dot: vec![0.5, 0.0], u: vec![0.0], t: 0.0 });
    assert!(matches!(err, Err(OverapproxError::Invalid(_))));
}

#[test]
fn evidence_text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let plant = PolyPlant::random(&mut rng, 2, 1, 2.0);
    let ev = trajectory_evidence(&mut rng, &plant, 50.0, 8, 1.5);
    let text = write_evidence(ev.entries());
    assert!(text.starts_with("# evidence n=2 m=1\n"));
    let back = read_evidence(&text).unwrap();
    assert_eq!(back, ev.entries());
    assert!(read_evidence("1 2 3\n").is_err());
    assert!(read_evidence("# evidence n=1 m=1\n0 0 1 0 0 1\n").is_err());
}

#[test]
fn chained_enclosure_and_error_bound_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let plant = make_quadrotor();
    for _ in 0..20 {
        let ev = trajectory_evidence(&mut rng, &plant, 100.0, 10, 1.0);
        let x = random_point(&mut rng, 6, 0.5);
        let hover = plant.params.hover_thrust();
        let u = IntervalVector::new(vec![Interval::new(hover - 0.5, hover + 0.5); 2]);
        let mut urng = ChaCha8Rng::seed_from_u64(rng.random());
        let truth = integrate(&plant, &x, 0.1, 1e-5, 100, |_| u.iter().map(|a| urng.random_range(a.lo()..=a.hi())).collect());
        let enc = enclose_interval(&x, &u, 0.1, &ev, 0.5).unwrap();
        assert!(enc.state_box.contains_point(&truth, 1e-9));
        assert!(enc.rough.contains_point(&truth, 1e-9));

        // ĝ fitted at x, bound checked at the true successor
        let mut ev2 = ev.clone();
        let d = measure(&plant, &x, &[hover, hover], 0.0);
        if ev2.ingest(d).is_err() {
            continue;
        }
        let entry = ev2.entries().last().unwrap().clone();
        let bound = estimation_error_bound_chained(&entry, &u, 0.1, &ev2, 0.5).unwrap();
        let g_hat = safelearn::overapprox::estimate_g(&truth, &ev2, 0.5).unwrap();
        let err = (g_hat - plant.input_matrix(&truth)).abs();
        assert!(err.iter().zip(bound.iter()).all(|(e, b)| *e <= b + 1e-9), "{err} vs {bound}");
    }
}

#[test]
fn oversized_horizon_is_refused() {
    let plant = make_quadrotor();
    let ev = EvidenceSet::new(plant.bounds(), 10.0, vec![0.0; 6]).unwrap();
    let u = IntervalVector::new(vec![Interval::symmetric(1e9); 2]);
    assert!(matches!(enclose_interval(&[0.0; 6], &u, 1.0, &ev, 0.5), Err(OverapproxError::StepTooLarge { .. })));
    assert!(enclose_interval(&[0.0; 6], &u, 1.0, &ev, 1.0).is_err());
}
