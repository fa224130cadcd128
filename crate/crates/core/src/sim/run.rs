use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{rk4_step, NominalController, Plant, SimError};
use crate::controller::{LawMode, SafetyController, SwitchKind, TickEvent};
use crate::interval::{Interval, IntervalVector};
use crate::overapprox::{cover, enclose_interval, error_bound_from_enclosure, DataPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    pub horizon: f64,
    pub measurement_period: f64,
    /// Keep every `log_every`-th tick in the trajectory log (the last tick is always kept).
    pub log_every: usize,
    /// Compute the one-period enclosure and the `ĝ` error bound at each measurement.
    pub error_bound: bool,
    /// Fraction of the admissible sub-step used by the chained enclosure.
    pub enclosure_safety: f64,
    /// States at which `G` widths are recorded after every measurement.
    pub probes: Vec<Vec<f64>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 8.5,
            measurement_period: 0.1,
            log_every: 1,
            error_bound: false,
            enclosure_safety: 0.5,
            probes: Vec::new(),
        }
    }
}

impl RunSettings {
    /// `(steps, ticks per measurement)`.
    pub fn schedule(&self) -> Result<(usize, usize), SimError> {
        let bad = |m: String| Err(SimError::Schedule(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon = {} must be nonnegative", self.horizon));
        }
        if !(self.measurement_period > 0.0) {
            return bad(format!("measurement period {} must be positive", self.measurement_period));
        }
        let ratio = self.measurement_period / self.dt;
        let per = ratio.round();
        if per < 1.0 || (ratio - per).abs() > 1e-6 * ratio {
            return bad(format!("measurement period {} is not a multiple of dt {}", self.measurement_period, self.dt));
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        Ok(((self.horizon / self.dt).round() as usize, per as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_nom: Vec<f64>,
    pub h: f64,
    pub h_v: f64,
    pub e2_norm: f64,
    pub sigma: f64,
    pub j: usize,
    pub rho: Vec<bool>,
    pub norm: f64,
    pub width_f: f64,
    pub width_g: f64,
    pub cond: f64,
    /// `max_{kℓ} |ĝ_{kℓ}(x) - g_{kℓ}(x)|`.
    pub g_err: f64,
    pub events: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub t: f64,
    pub tick: usize,
    pub kind: &'static str,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<LogRow>,
    pub events: Vec<EventRow>,
}

impl TrajectoryLog {
    pub fn header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((0..2 * self.n).map(|i| format!("x{i}")));
        cols.extend((0..self.m).map(|i| format!("u{i}")));
        cols.extend((0..self.m).map(|i| format!("u_nom{i}")));
        for c in ["h", "h_v", "e2_norm", "sigma", "j", "rho", "norm", "width_f", "width_g", "cond", "g_err", "events"] {
            cols.push(c.into());
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            let mut f: Vec<String> = vec![fmt(r.t)];
            f.extend(r.x.iter().chain(&r.u).chain(&r.u_nom).map(|v| fmt(*v)));
            f.extend([fmt(r.h), fmt(r.h_v), fmt(r.e2_norm), fmt(r.sigma), r.j.to_string()]);
            f.push(r.rho.iter().map(|b| if *b { '1' } else { '0' }).collect());
            f.extend([fmt(r.norm), fmt(r.width_f), fmt(r.width_g), fmt(r.cond), fmt(r.g_err), r.events.join(";")]);
            out.push_str(&f.join(","));
            out.push('\n');
        }
        out
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from("t,event_kind,payload\n");
        for e in &self.events {
            out.push_str(&format!("{},{},\"{}\"\n", fmt(e.t), e.kind, e.payload.replace('"', "'")));
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Per-measurement checks against the hidden plant.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub t: f64,
    /// Cover at the measured state contains the true `(f, g)` after ingestion.
    pub cover_sound: bool,
    /// Entrywise `wd(G(x))` at each probe state after ingestion.
    pub probe_g_widths: Vec<Vec<f64>>,
    /// `|ĝⁱ(x^{i+1}) - g(x^{i+1})|` before ingesting `x^{i+1}`.
    pub g_error: Option<DMatrix<f64>>,
    pub g_error_bound: Option<DMatrix<f64>>,
    /// The state lies in the enclosure predicted from the previous measurement.
    pub enclosed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub label: String,
    pub steps: usize,
    pub measurements: usize,
    pub min_h: f64,
    pub min_h_v: f64,
    pub max_e2: f64,
    pub max_j: usize,
    /// `ρ_ι: 1 → 0` counts per 1-based index.
    pub drops: BTreeMap<usize, usize>,
    /// Hysteresis restores `ρ_ι: 0 → 1` per index.
    pub restores: BTreeMap<usize, usize>,
    /// Measurement resets that found `ρ₁ = 0`.
    pub rho1_resets: usize,
    pub synthesized: usize,
    pub errors: BTreeMap<String, usize>,
    pub violations: usize,
    pub first_violation: Option<f64>,
    pub max_u_deviation: f64,
    pub mean_g_err: f64,
    pub final_g_err: f64,
    pub aborted: Option<String>,
    pub wall_time: f64,
}

impl RunSummary {
    pub fn safe(&self) -> bool {
        self.violations == 0 && self.aborted.is_none()
    }

    pub fn to_text(&self) -> String {
        let map = |m: &BTreeMap<usize, usize>| {
            m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ")
        };
        let errs = self.errors.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ");
        format!(
            "label = {}\nsafe = {}\nsteps = {}\nmeasurements = {}\nmin_h = {:.6e}\nmin_h_v = {:.6e}\nmax_e2 = {:.6e}\nmax_j = {}\n\
             drops = {}\nrestores = {}\nrho1_resets = {}\nsynthesized = {}\nerrors = {}\nviolations = {}\nfirst_violation = {}\n\
             max_u_deviation = {:.6e}\nmean_g_err = {:.6e}\nfinal_g_err = {:.6e}\naborted = {}\nwall_time_s = {:.3}\n",
            self.label,
            self.safe(),
            self.steps,
            self.measurements,
            self.min_h,
            self.min_h_v,
            self.max_e2,
            self.max_j,
            map(&self.drops),
            map(&self.restores),
            self.rho1_resets,
            self.synthesized,
            errs,
            self.violations,
            self.first_violation.map_or("none".into(), |t| format!("{t:.4}")),
            self.max_u_deviation,
            self.mean_g_err,
            self.final_g_err,
            self.aborted.as_deref().unwrap_or("none"),
            self.wall_time,
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub measurements: Vec<MeasurementRecord>,
    pub summary: RunSummary,
    pub controller: SafetyController,
}

fn event_kind(e: &TickEvent) -> &'static str {
    match e {
        TickEvent::Switch(s) if s.kind == SwitchKind::Drop => "rho_drop",
        TickEvent::Switch(_) => "rho_restore",
        TickEvent::Measurement { .. } => "measurement",
        TickEvent::Reset { .. } => "reset",
        TickEvent::Error { kind, .. } => kind,
    }
}

fn event_payload(e: &TickEvent) -> String {
    match e {
        TickEvent::Switch(s) => {
            let mut p = format!(
                "index={} j={}->{} norm={:.6e} rho={}",
                s.index,
                s.j_before,
                s.j_after,
                s.norm,
                s.rho.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>()
            );
            if let Some(c) = &s.synthesized {
                p.push_str(&format!(" score={:.6e} h_at_xc={:.6e} margin={:.6e}", c.score, c.value_at_xc, c.margin));
            }
            p
        }
        TickEvent::Measurement { data, report } => match report {
            Some(r) => format!("data={data} sweeps={} residual={:.3e}", r.sweeps, r.residual),
            None => format!("data={data} without fixpoint report"),
        },
        TickEvent::Reset { discarded } => format!("discarded={}", discarded.len()),
        TickEvent::Error { message, .. } => message.clone(),
    }
}

fn g_error(plant: &dyn Plant, g_hat: &DMatrix<f64>, x: &[f64]) -> f64 {
    (g_hat - plant.input_matrix(x)).amax()
}

fn cover_contains(plant: &dyn Plant, ctrl: &SafetyController, x: &[f64]) -> bool {
    const TOL: f64 = 1e-7;
    let Ok((f, g)) = cover(x, ctrl.evidence()) else { return false };
    let (tf, tg) = (plant.drift(x), plant.input_matrix(x));
    let rows: Vec<Vec<f64>> = (0..tg.nrows()).map(|k| tg.row(k).iter().copied().collect()).collect();
    f.iter().zip(tf.iter()).all(|(a, v)| a.contains_tol(*v, TOL)) && g.contains_matrix(&rows, TOL)
}

/// Closed loop with zero-order hold on `u`: at each tick the controller is
/// evaluated, and at each measurement time the exact `(x, ẋ, u)` is ingested
/// first, with `ẋ` taken as the left limit under the previous input.
pub fn run_closed_loop(
    plant: &dyn Plant,
    mut ctrl: SafetyController,
    nominal: &NominalController,
    x0: &[f64],
    settings: &RunSettings,
) -> Result<RunOutput, SimError> {
    let start = Instant::now();
    let (n, m) = (plant.n(), plant.m());
    if x0.len() != 2 * n || nominal.m() != m || ctrl.evidence().n() != n || ctrl.evidence().m() != m {
        return Err(SimError::Dimension(format!("plant n={n} m={m}, state {}, nominal m={}", x0.len(), nominal.m())));
    }
    let (steps, per) = settings.schedule()?;
    let position = ctrl.hv.position.clone();
    // the square law and the unfiltered baseline use no data
    let learns = matches!(ctrl.mode, LawMode::Adaptive | LawMode::Local);

    let mut log = TrajectoryLog { n, m, ..Default::default() };
    let mut records = Vec::new();
    let mut summary = RunSummary {
        label: plant.label(),
        steps,
        min_h: f64::INFINITY,
        min_h_v: f64::INFINITY,
        ..Default::default()
    };
    let mut x = x0.to_vec();
    let mut u_prev: Option<DVector<f64>> = None;
    // input hull since the last measurement, and that measurement's state
    let mut u_hull: Option<IntervalVector> = None;
    let mut last_meas: Option<Vec<f64>> = None;
    let mut g_err_sum = 0.0;

    for k in 0..=steps {
        let t = k as f64 * settings.dt;
        let mut events: Vec<TickEvent> = Vec::new();

        if k > 0 && k % per == 0 && learns {
            let u = u_prev.clone().expect("an input was applied before the first measurement");
            let mut rec = MeasurementRecord {
                t,
                cover_sound: false,
                probe_g_widths: Vec::new(),
                g_error: None,
                g_error_bound: None,
                enclosed: None,
            };
            if settings.error_bound {
                if let (Some(xi), Some(uh)) = (&last_meas, &u_hull) {
                    let ev = ctrl.evidence();
                    if let (Some(entry), Ok(g_hat)) = (ev.entries().last(), ctrl.g_hat(&x)) {
                        rec.g_error = Some((g_hat - plant.input_matrix(&x)).abs());
                        match enclose_interval(xi, uh, settings.measurement_period, ev, settings.enclosure_safety) {
                            Ok(enc) => {
                                rec.enclosed = Some(enc.state_box.contains_point(&x, 1e-9));
                                rec.g_error_bound = Some(error_bound_from_enclosure(entry, &enc, ev));
                            }
                            Err(e) => events.push(TickEvent::Error { kind: "enclosure", message: e.to_string() }),
                        }
                    }
                }
            }
            let x_dot = plant.derivative(&x, u.as_slice());
            let d = DataPoint { x: x.clone(), x_dot, u: u.as_slice().to_vec(), t };
            if !ctrl.adaptation().rho[0] {
                summary.rho1_resets += 1;
            }
            events.extend(ctrl.measure(d));
            summary.measurements += 1;
            rec.cover_sound = cover_contains(plant, &ctrl, &x);
            for p in &settings.probes {
                let w = cover(p, ctrl.evidence()).map(|(_, g)| g.iter().map(Interval::width).collect()).unwrap_or_default();
                rec.probe_g_widths.push(w);
            }
            records.push(rec);
            last_meas = Some(x.clone());
            u_hull = None;
        }

        let u_nom = nominal.eval(&x, t);
        let (u, diag, tick_events) = ctrl.control(&x, &u_nom);
        events.extend(tick_events);

        let h = position.eval(&x[..n]);
        let g_err = g_error(plant, &diag.g_hat, &x);
        g_err_sum += g_err;
        summary.final_g_err = g_err;
        summary.min_h = summary.min_h.min(if h.is_nan() { f64::NEG_INFINITY } else { h });
        summary.min_h_v = summary.min_h_v.min(if diag.h_v.is_nan() { f64::NEG_INFINITY } else { diag.h_v });
        summary.max_e2 = summary.max_e2.max(diag.e2_norm);
        summary.max_j = summary.max_j.max(diag.j);
        summary.max_u_deviation = summary.max_u_deviation.max((&u - &u_nom).amax());
        if !(h > 0.0 && diag.h_v > 0.0) {
            summary.violations += 1;
            if summary.first_violation.is_none() {
                summary.first_violation = Some(t);
                events.push(TickEvent::Error {
                    kind: "safety_violation",
                    message: format!("h = {h:e}, h_v = {:e}", diag.h_v),
                });
            }
        }

        let mut tags = Vec::new();
        for e in &events {
            let kind = event_kind(e);
            match e {
                TickEvent::Switch(s) => {
                    let map = if s.kind == SwitchKind::Drop { &mut summary.drops } else { &mut summary.restores };
                    *map.entry(s.index).or_default() += 1;
                    if s.synthesized.is_some() {
                        summary.synthesized += 1;
                    }
                }
                TickEvent::Error { kind, .. } => *summary.errors.entry(kind.to_string()).or_default() += 1,
                _ => {}
            }
            if !tags.contains(&kind) {
                tags.push(kind);
            }
            log.events.push(EventRow { t, tick: k, kind, payload: event_payload(e) });
        }

        if k % settings.log_every == 0 || k == steps || !tags.is_empty() {
            log.rows.push(LogRow {
                t,
                x: x.clone(),
                u: u.as_slice().to_vec(),
                u_nom: u_nom.as_slice().to_vec(),
                h,
                h_v: diag.h_v,
                e2_norm: diag.e2_norm,
                sigma: diag.sigma,
                j: diag.j,
                rho: diag.rho.clone(),
                norm: diag.norm,
                width_f: diag.width_f,
                width_g: diag.width_g,
                cond: diag.cond,
                g_err,
                events: tags,
            });
        }
        if k == steps {
            break;
        }

        u_hull = Some(match u_hull {
            None => IntervalVector::from_points(u.as_slice()),
            Some(hull) => hull.iter().zip(u.iter()).map(|(a, v)| a.hull(&Interval::point(*v))).collect(),
        });
        match rk4_step(plant, &x, u.as_slice(), settings.dt) {
            Ok(next) => x = next,
            Err(_) => {
                let msg = format!("non-finite state after t = {t}");
                summary.aborted = Some(msg.clone());
                log.events.push(EventRow { t, tick: k, kind: "non_finite_state", payload: msg });
                break;
            }
        }
        u_prev = Some(u);
    }
    summary.mean_g_err = g_err_sum / (summary.steps + 1) as f64;
    summary.wall_time = start.elapsed().as_secs_f64();
    Ok(RunOutput { log, measurements: records, summary, controller: ctrl })
}
