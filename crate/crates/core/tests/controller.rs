mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use safelearn::barrier::{make_sphere_barrier, QuadraticBarrier, ReciprocalBarrier, SwitchFunction, VelocityBarrier};
use safelearn::controller::{
    adaptation_step, containment_margin, control_local, control_square, find_next_barrier, AdaptationState,
    ControlError, ControllerGains, SynthesisConfig,
};
use safelearn::scenario::Scenario;

/// Plain-array evaluation of both laws for a sphere position barrier
/// `r² - Σ_{i∈sel} x_i²`, diagonal `A_v`, inverse reciprocal barriers and
/// linear ramps.
struct Oracle {
    r2: f64,
    sel: Vec<usize>,
    c: f64,
    a: Vec<f64>,
    g: ControllerGains,
}

impl Oracle {
    fn ramp(h: f64, mu: f64) -> f64 {
        (1.0 - h / mu).clamp(0.0, 1.0)
    }

    fn e2(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() / 2;
        let h = self.r2 - self.sel.iter().map(|&i| x[i] * x[i]).sum::<f64>();
        let s = Self::ramp(h, self.g.mu_x);
        (0..n)
            .map(|i| {
                let grad = if self.sel.contains(&i) { -2.0 * x[i] } else { 0.0 };
                let x2r = if s == 0.0 { 0.0 } else { -self.g.kappa_x * s * (-1.0 / (h * h)) * grad };
                x[n + i] - x2r
            })
            .collect()
    }

    fn h_v(&self, e: &[f64]) -> f64 {
        self.c - e.iter().zip(&self.a).map(|(e, a)| a * e * e).sum::<f64>()
    }

    /// `(σ, β'(h_v), ∇_{x₂}h_v)`
    fn parts(&self, x: &[f64]) -> (f64, f64, Vec<f64>) {
        let e = self.e2(x);
        let hv = self.h_v(&e);
        let grad = e.iter().zip(&self.a).map(|(e, a)| -2.0 * a * e).collect();
        (Self::ramp(hv, self.g.mu_v), -1.0 / (hv * hv), grad)
    }

    fn square(&self, x: &[f64], u_nom: &[f64]) -> Vec<f64> {
        let (s, bd, grad) = self.parts(x);
        u_nom.iter().zip(&grad).map(|(u, gr)| if s == 0.0 { *u } else { u - self.g.kappa_v * s * bd * gr }).collect()
    }

    fn local(&self, x: &[f64], g: &DMatrix<f64>, u_nom: &[f64]) -> Option<Vec<f64>> {
        let (s, bd, grad) = self.parts(x);
        if s == 0.0 {
            return Some(u_nom.to_vec());
        }
        let w: Vec<f64> = (0..g.ncols()).map(|l| (0..g.nrows()).map(|k| g[(k, l)] * grad[k]).sum()).collect();
        let nn: f64 = w.iter().map(|v| v * v).sum();
        if nn.sqrt() <= self.g.eps_lo {
            return None;
        }
        Some(u_nom.iter().zip(&w).map(|(u, w)| u - self.g.kappa_v * s * bd * w / nn).collect())
    }
}

fn agree(a: &DVector<f64>, b: &[f64]) -> bool {
    a.iter().zip(b).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()))
}

fn check_fidelity(file: &str, samples: usize) -> usize {
    let sc = Scenario::load(scenario_path(file)).unwrap();
    let cfg = &sc.config;
    let hv = &sc.controller.hv;
    let n = hv.n();
    let oracle = Oracle {
        r2: cfg.barrier.radius2,
        sel: cfg.barrier.selector.clone(),
        c: cfg.barrier.velocity_radius2,
        a: cfg.barrier.velocity_weights.clone().unwrap_or(vec![1.0; n]),
        g: sc.controller.gains.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let r = cfg.barrier.radius2.sqrt();
    let vmax = (cfg.barrier.velocity_radius2 / n as f64).sqrt();
    let mut done = 0;
    while done < samples {
        let mut x = random_point(&mut rng, 2 * n, r);
        for v in &mut x[n..] {
            *v *= vmax / r;
        }
        let e = oracle.e2(&x);
        if !(oracle.r2 - oracle.sel.iter().map(|&i| x[i] * x[i]).sum::<f64>() > 0.0 && oracle.h_v(&e) > 0.0) {
            continue;
        }
        done += 1;
        let u_nom = random_point(&mut rng, n, 5.0);
        let g = DMatrix::from_vec(n, n, random_point(&mut rng, n * n, 2.0));
        let (u, _) = control_square(&x, &DVector::from_vec(u_nom.clone()), &oracle.g, hv, ReciprocalBarrier::Inverse).unwrap();
        assert!(agree(&u, &oracle.square(&x, &u_nom)), "square law at {x:?}");
        match (control_local(&x, &g, &DVector::from_vec(u_nom.clone()), &oracle.g, hv, ReciprocalBarrier::Inverse), oracle.local(&x, &g, &u_nom)) {
            (Ok((u, _)), Some(want)) => assert!(agree(&u, &want), "local law at {x:?}: {u} vs {want:?}"),
            (Err(ControlError::ControllabilityLoss { .. }), None) => {}
            (got, want) => panic!("local law disagrees at {x:?}: {got:?} vs {want:?}"),
        }
    }
    done
}

#[test]
fn laws_match_independent_evaluation() {
    assert_eq!(check_fidelity("square_g.toml", 1000), 1000);
    // the quadrotor scenario has n = 3 and a selector that skips the angle
    let sc = Scenario::load(scenario_path("uav_sec6.toml")).unwrap();
    assert_eq!(sc.controller.hv.n(), 3);
    assert_eq!(check_fidelity("uav_sec6.toml", 1000), 1000);
}

fn sphere(r2: f64, n: usize) -> QuadraticBarrier {
    QuadraticBarrier::new(-DMatrix::identity(n, n), DVector::zeros(n), r2, "h_v").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // random estimates and error paths never push the index past 2n + 1
    #[test]
    fn index_stays_bounded(seed in 0u64..10_000, n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gains = ControllerGains {
            kappa_x: 1.0, kappa_v: 100.0, mu_x: 0.1, mu_v: 100.0, eps_lo: 0.05, eps_hi: 5.0,
            gamma: vec![], theta: 0.5, ramp: Default::default(),
        };
        gains.eps_lo = rng.random_range(0.05..2.0);
        let synth = SynthesisConfig { budget: 50, ..Default::default() };
        let mut st = AdaptationState::new(sphere(100.0, n));
        let mut last_tick: Vec<Option<usize>> = vec![None; 2 * n + 2];
        for tick in 0..200 {
            let e = DVector::from_vec(random_point(&mut rng, n, 6.0));
            let m = rng.random_range(1..=n);
            let g = DMatrix::from_vec(n, m, random_point(&mut rng, n * m, 1.0));
            let x: Vec<f64> = (0..2 * n).map(|_| 0.0).collect();
            match adaptation_step(&x, &e, &g, &mut st, &gains, ReciprocalBarrier::Inverse, &synth, &mut rng) {
                Ok((_, events)) => {
                    for ev in events {
                        // one switch per index per tick
                        prop_assert!(last_tick[ev.index] != Some(tick));
                        last_tick[ev.index] = Some(tick);
                        if let Some(c) = ev.synthesized {
                            prop_assert!(c.failed_condition(gains.gamma_for(ev.j_after)).is_none());
                        }
                    }
                }
                Err(ControlError::IndexOverflow { limit, .. }) => prop_assert_eq!(limit, 2 * n + 1),
                Err(_) => {}
            }
            // flags and barriers above j stay on the stack until the next drop or reset
            prop_assert!(st.j >= 1 && st.j <= st.limit());
            prop_assert_eq!(st.rho.len(), st.barriers.len());
            prop_assert!(st.barriers.len() >= st.j && st.barriers.len() <= st.limit());
            if rng.random_bool(0.05) {
                st.reset();
            }
        }
    }

    #[test]
    fn synthesized_barriers_are_nested(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parent = sphere(100.0, 2);
        let e = DVector::from_vec(vec![rng.random_range(-9.0..9.0), rng.random_range(-5.0..5.0)]);
        prop_assume!(parent.eval(e.as_slice()) > 1.0);
        let g = DMatrix::from_vec(2, 1, vec![0.0, 1.0]);
        if let Ok(c) = find_next_barrier(&e, &g, &parent, 5.0, &SynthesisConfig::default(), &mut rng) {
            prop_assert!(c.margin > 0.0 && c.value_at_xc > 0.0 && c.score >= 5.0);
            prop_assert!(containment_margin(&c.barrier, &parent).unwrap() > 0.0);
            // sampled points of the child's superlevel set lie in the parent's
            for _ in 0..200 {
                let z = random_point(&mut rng, 2, 10.0);
                if c.barrier.eval(&z) >= 0.0 {
                    prop_assert!(parent.eval(&z) >= -1e-9);
                }
            }
        }
    }
}

#[test]
fn nominal_input_passes_through_outside_band() {
    let mut sc = Scenario::load(scenario_path("uav_sec6.toml")).unwrap();
    sc.controller.gains.mu_v = 1.0;
    let x = [0.0, 0.2, 0.0, -0.3, 0.0, 0.0];
    let u_nom = DVector::from_vec(vec![3.1, 2.9]);
    let (u, diag, _) = sc.controller.control(&x, &u_nom);
    assert_eq!(diag.sigma, 0.0);
    assert_eq!(u, u_nom);
}

#[test]
fn invalid_gains_rejected() {
    let sc = Scenario::load(scenario_path("square_g.toml")).unwrap();
    let mut g = sc.controller.gains.clone();
    g.eps_hi = g.eps_lo;
    assert!(g.validate().is_err());
    let mut g = sc.controller.gains.clone();
    g.gamma = vec![0.01];
    assert!(g.validate().is_err());
    let mut g = sc.controller.gains.clone();
    g.theta = 1.5;
    assert!(g.validate().is_err());
}

#[test]
fn position_barrier_helper_matches_config() {
    let sc = Scenario::load(scenario_path("uav_sec6.toml")).unwrap();
    let pos = make_sphere_barrier(0.36, &[0, 1], 3).unwrap();
    assert_eq!(sc.controller.hv.position.eval(&[0.1, 0.2, 3.0]), pos.eval(&[0.1, 0.2, 3.0]));
    let _: &VelocityBarrier = &sc.controller.hv;
    assert_eq!(sc.controller.gains.switch_x(), SwitchFunction::linear(0.1));
}
