//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ecpid_core::config::{parse_config, ControllerKind, ExperimentSpec};
use ecpid_core::control::{
    classical_pid_step, improved_pid_terms, ClassicalPid, ImprovedPidConfig, PidGains, PidState,
};
use ecpid_core::ec_pidunn::{EcPidunnController, ParamVector};
use ecpid_core::experiment::run_experiment;
use ecpid_core::integrate::{integrate_step, Integrator};
use ecpid_core::metrics::{compute_step_metrics, MetricsConfig};
use ecpid_core::network::{Activation, MlpNetwork, OutputMap};
use ecpid_core::plants::{
    ackermann_derivatives, longitudinal_derivative, AckermannParams, AckermannState,
    LongitudinalParams, LongitudinalState, StateVector,
};
use ecpid_core::sim::{run_scenario, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and limits.
const COLLAPSE_TOL: f64 = 1e-9;
const COLLAPSE_STEPS: usize = 10_000;
const OVERSHOOT_TARGET: f64 = 16.30;
const OVERSHOOT_TOL: f64 = 0.1;
const RISE_FACTOR: f64 = 2.197;
const TERMINAL_REL_TOL: f64 = 1e-3;
const ARC_REL_TOL: f64 = 5e-3;
const RK4_MIN_RATIO: f64 = 12.0;
const TABLE_OS_CLASSICAL_MIN: f64 = 10.0;
const TABLE_OS_EC_MAX: f64 = 1.0;
const TAU_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

/// Name, runtime limit in seconds, check.
type Criterion = (&'static str, Option<f64>, fn() -> Outcome);

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn load_config(name: &str) -> ExperimentSpec {
    let path = repo_root().join("configs").join(name);
    let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn within(limit_s: Option<f64>, elapsed: Duration, ok: Outcome) -> Outcome {
    let secs = elapsed.as_secs_f64();
    match (ok, limit_s) {
        (Ok(msg), Some(limit)) if secs >= limit => {
            Err(format!("{msg}; runtime {secs:.2} s exceeds {limit} s"))
        }
        (Ok(msg), Some(limit)) => Ok(format!("{msg}; {secs:.2} s < {limit} s")),
        (Ok(msg), None) => Ok(format!("{msg}; {secs:.2} s")),
        (Err(msg), _) => Err(format!("{msg}; {secs:.2} s")),
    }
}

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// 1. Collapse equivalence.

fn max_trace_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut worst = 0.0f64;
    for (la, lb) in a.loops.iter().zip(&b.loops) {
        assert_eq!(la.records.len(), lb.records.len());
        for (ra, rb) in la.records.iter().zip(&lb.records) {
            worst = worst
                .max((ra.output - rb.output).abs())
                .max((ra.control - rb.control).abs());
        }
    }
    worst
}

fn collapse_scenario(scenario: &str) -> f64 {
    let spec = parse_config(&format!(
        r#"{{"scenario": {scenario},
            "controller": {{"tau": 1.0, "rho_scale": 0.0, "i_max": null, "saturate": false}},
            "sim": {{"dt": 0.001, "duration": 20}}}}"#
    ))
    .expect("collapse config");
    let mut classical = spec.clone();
    classical.override_controller(ControllerKind::Classical);
    let mut ec = spec;
    ec.override_controller(ControllerKind::EcPidunn);
    let a = run_scenario(&classical.runs()[0].config).expect("classical run");
    let b = run_scenario(&ec.runs()[0].config).expect("ec run");
    max_trace_diff(&a, &b)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dt = 1e-3;
    let mut worst = 0.0f64;
    for trial in 0..4 {
        let gains = PidGains::new(
            rng.gen_range(0.0..10.0),
            rng.gen_range(0.0..10.0),
            rng.gen_range(0.0..1.0),
        );
        let net = MlpNetwork::init(
            &[6, 16, 16, 3],
            trial,
            Activation::Tanh,
            OutputMap::ScaledTanh(0.0),
        )
        .map_err(|e| e.to_string())?;
        let cfg = ImprovedPidConfig::unbounded(1.0).map_err(|e| e.to_string())?;
        let mut ec = EcPidunnController::new(net, ParamVector::zero(), gains, cfg, dt)
            .map_err(|e| e.to_string())?;
        let mut pid = ClassicalPid::new(gains, dt, f64::INFINITY).map_err(|e| e.to_string())?;
        for _ in 0..COLLAPSE_STEPS {
            let e = rng.gen_range(-10.0..10.0);
            let u_ec = ec.step(e).map_err(|e| e.to_string())?;
            let u_pid = pid.step(e).map_err(|e| e.to_string())?;
            worst = worst.max((u_ec - u_pid).abs());
        }
    }
    let vehicle = collapse_scenario(
        r#"{"kind": "vehicle", "vehicle": {"v_target": 10, "steering_target": 0.5}}"#,
    );
    let pan_tilt = collapse_scenario(r#"{"kind": "pan_tilt", "pan_tilt": {}}"#);
    let worst_all = worst.max(vehicle).max(pan_tilt);
    check(
        worst_all <= COLLAPSE_TOL,
        format!(
            "max |diff| random {worst:.3e}, vehicle {vehicle:.3e}, pan-tilt {pan_tilt:.3e} (tol {COLLAPSE_TOL:e}, {} random steps)",
            4 * COLLAPSE_STEPS
        ),
    )
}

// 2. Metrics oracle.

fn criterion_2() -> Outcome {
    let dt = 1e-3;
    let cfg = MetricsConfig::default();

    let (zeta, wn) = (0.5f64, 1.0f64);
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    let times: Vec<f64> = (0..=30_000).map(|k| k as f64 * dt).collect();
    let second: Vec<f64> = times
        .iter()
        .map(|&t| {
            1.0 - (-zeta * wn * t).exp() / (1.0 - zeta * zeta).sqrt() * (wd * t + zeta.acos()).sin()
        })
        .collect();
    let m2 = compute_step_metrics(&times, &second, 1.0, &cfg).map_err(|e| e.to_string())?;
    let os = m2.overshoot_pct.ok_or("overshoot undefined")?;

    let tau1 = 2.0;
    let times1: Vec<f64> = (0..=20_000).map(|k| k as f64 * dt).collect();
    let first: Vec<f64> = times1.iter().map(|&t| 1.0 - (-t / tau1).exp()).collect();
    let m1 = compute_step_metrics(&times1, &first, 1.0, &cfg).map_err(|e| e.to_string())?;
    let rise = m1.rise_time.ok_or("rise time undefined")?;
    let expected_rise = RISE_FACTOR * tau1;

    check(
        (os - OVERSHOOT_TARGET).abs() <= OVERSHOOT_TOL && (rise - expected_rise).abs() <= 2.0 * dt,
        format!(
            "overshoot {os:.4}% (target {OVERSHOOT_TARGET} +- {OVERSHOOT_TOL}), rise {rise:.5} s (target {expected_rise:.4} +- {:.3})",
            2.0 * dt
        ),
    )
}

// 3. Physics.

fn criterion_3() -> Outcome {
    let p = LongitudinalParams::default();
    let force = 2000.0;
    let v_t = (2.0 * force / (p.drag_coefficient * p.area * p.air_density)).sqrt();
    // v(t) = v_t tanh(t / T) with T = m / sqrt(F k), k = C_d A rho / 2.
    let k = 0.5 * p.drag_coefficient * p.area * p.air_density;
    let time_const = p.mass / (force * k).sqrt();
    let dt = 1e-3;
    let n = (10.0 * time_const / dt).ceil() as usize;
    let mut v = [0.0];
    for i in 0..n {
        v = integrate_step(
            |s: &[f64; 1]| {
                [longitudinal_derivative(
                    &LongitudinalState::from_array(*s),
                    &p,
                    force,
                )]
            },
            v,
            dt,
            Integrator::Rk4,
            i as f64 * dt,
        )
        .map_err(|e| e.to_string())?;
    }
    let v_err = (v[0] - v_t).abs() / v_t;

    let ack = AckermannParams::default();
    let phi: f64 = 0.3;
    let speed = 5.0;
    let radius = ack.wheelbase / phi.tan();
    let period = 2.0 * std::f64::consts::PI * radius / speed;
    let steps = (period / dt).ceil() as usize;
    let mut s = AckermannState {
        phi,
        ..Default::default()
    }
    .to_array();
    let mut pts = vec![(s[0], s[1])];
    for i in 0..steps {
        s = integrate_step(
            |x: &[f64; 4]| {
                ackermann_derivatives(&AckermannState::from_array(*x), &ack, speed, 0.0).to_array()
            },
            s,
            dt,
            Integrator::Rk4,
            i as f64 * dt,
        )
        .map_err(|e| e.to_string())?;
        pts.push((s[0], s[1]));
    }
    // Circumradius of point triples spread around the arc.
    let q = pts.len() / 4;
    let mut worst_r = 0.0f64;
    for start in (0..q).step_by(q / 8) {
        let (a, b, c) = (pts[start], pts[start + q], pts[start + 2 * q]);
        let ab = (a.0 - b.0).hypot(a.1 - b.1);
        let bc = (b.0 - c.0).hypot(b.1 - c.1);
        let ca = (c.0 - a.0).hypot(c.1 - a.1);
        let area2 = ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs();
        let r = ab * bc * ca / (2.0 * area2);
        worst_r = worst_r.max((r - radius).abs() / radius);
    }

    check(
        v_err <= TERMINAL_REL_TOL && worst_r <= ARC_REL_TOL,
        format!(
            "terminal velocity rel err {v_err:.2e} (tol {TERMINAL_REL_TOL:e}), arc radius rel err {worst_r:.2e} (tol {ARC_REL_TOL:e})"
        ),
    )
}

// 4. RK4 order.

fn longitudinal_final(dt: f64, t_end: f64) -> Result<f64, String> {
    let p = LongitudinalParams::default();
    let n = (t_end / dt).round() as usize;
    let mut v = [0.0];
    for i in 0..n {
        v = integrate_step(
            |s: &[f64; 1]| {
                [longitudinal_derivative(
                    &LongitudinalState::from_array(*s),
                    &p,
                    p.f_max,
                )]
            },
            v,
            dt,
            Integrator::Rk4,
            i as f64 * dt,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(v[0])
}

fn criterion_4() -> Outcome {
    let (coarse, t_end) = (2.0, 40.0);
    let fine = coarse / 2.0;
    let reference = longitudinal_final(fine / 100.0, t_end)?;
    let e1 = (longitudinal_final(coarse, t_end)? - reference).abs();
    let e2 = (longitudinal_final(fine, t_end)? - reference).abs();
    let ratio = e1 / e2;
    check(
        ratio >= RK4_MIN_RATIO,
        format!("error dt={coarse}: {e1:.3e}, dt={fine}: {e2:.3e}, ratio {ratio:.2} (min {RK4_MIN_RATIO})"),
    )
}

// 5. Vehicle comparison trend.

fn criterion_5() -> Outcome {
    let spec = load_config("vehicle_comparison.json");
    let runs = spec.runs();
    let classical = runs
        .iter()
        .find(|r| r.controller() == ControllerKind::Classical)
        .ok_or("no classical run")?;
    let ec = runs
        .iter()
        .find(|r| r.controller() == ControllerKind::EcPidunn)
        .ok_or("no ec_pidunn run")?;
    let tc = run_scenario(&classical.config).map_err(|e| e.to_string())?;
    let te = run_scenario(&ec.config).map_err(|e| e.to_string())?;
    let cfg = &spec.sim.metrics;

    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["speed", "steering"] {
        let metrics = |t: &Trajectory| {
            let l = t.loop_trace(name).expect("loop present");
            compute_step_metrics(
                &l.times(),
                &l.outputs(),
                l.constant_setpoint().expect("step"),
                cfg,
            )
            .expect("metrics")
        };
        let (mc, me) = (metrics(&tc), metrics(&te));
        let (os_c, os_e) = (
            mc.overshoot_pct.unwrap_or(f64::NAN),
            me.overshoot_pct.unwrap_or(f64::NAN),
        );
        let (st_c, st_e) = (mc.settling_time, me.settling_time);
        let settles_faster = matches!((st_c, st_e), (Some(c), Some(e)) if e < c);
        ok &= os_c > TABLE_OS_CLASSICAL_MIN && os_e <= TABLE_OS_EC_MAX && settles_faster;
        parts.push(format!(
            "{name}: overshoot {os_c:.2}% -> {os_e:.2}%, settling {} -> {} s",
            st_c.map_or("none".into(), |v| format!("{v:.3}")),
            st_e.map_or("none".into(), |v| format!("{v:.3}")),
        ));
    }
    check(
        ok,
        format!(
            "{} (classical > {TABLE_OS_CLASSICAL_MIN}%, ec <= {TABLE_OS_EC_MAX}%, ec settles sooner)",
            parts.join("; ")
        ),
    )
}

// 6. Pan-tilt tracking.

fn criterion_6() -> Outcome {
    let spec = load_config("pan_tilt_sinusoid.json");
    let warmup = spec.sim.metrics.rms_warmup;
    let mut rms = Vec::new();
    for kind in [ControllerKind::Classical, ControllerKind::EcPidunn] {
        let run = spec
            .runs()
            .into_iter()
            .find(|r| r.controller() == kind)
            .ok_or("missing run")?;
        let traj = run_scenario(&run.config).map_err(|e| e.to_string())?;
        let mut per_axis = Vec::new();
        for name in ["pan", "tilt"] {
            let l = traj.loop_trace(name).ok_or("missing loop")?;
            let v = ecpid_core::metrics::compute_rms_error(
                &l.times(),
                &l.setpoints(),
                &l.outputs(),
                warmup,
            )
            .map_err(|e| e.to_string())?
            .ok_or("rms undefined")?;
            per_axis.push(v);
        }
        rms.push(per_axis);
    }
    let (c, e) = (&rms[0], &rms[1]);
    check(
        e[0] < c[0] && e[1] < c[1],
        format!(
            "rms pan {:.4e} -> {:.4e}, tilt {:.4e} -> {:.4e} (classical -> ec)",
            c[0], e[0], c[1], e[1]
        ),
    )
}

// 7. Determinism.

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("dir entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).expect("read artifact"),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_7() -> Outcome {
    let mut spec = load_config("vehicle_comparison.json");
    spec.sim.duration = 5.0;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_experiment(&spec, a.path()).map_err(|e| e.to_string())?;
    run_experiment(&spec, b.path()).map_err(|e| e.to_string())?;
    let (fa, fb) = (read_dir_sorted(a.path()), read_dir_sorted(b.path()));
    let csvs: Vec<_> = fa.iter().filter(|(n, _)| n.ends_with(".csv")).collect();
    check(
        !csvs.is_empty() && fa == fb,
        format!(
            "{} artifacts compared, {} CSV files byte-identical",
            fa.len(),
            csvs.len()
        ),
    )
}

// 8. Tau decomposition.

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let gains = PidGains::new(
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..5.0),
        );
        let mut state = PidState::new(0.01, f64::INFINITY).map_err(|e| e.to_string())?;
        for _ in 0..rng.gen_range(1..20) {
            classical_pid_step(&mut state, &gains, rng.gen_range(-1.0..1.0))
                .map_err(|e| e.to_string())?;
        }
        let e = rng.gen_range(-1.0..1.0);
        let base = improved_pid_terms(&state, &gains, 1.0, e).map_err(|e| e.to_string())?;
        for tau in [0.5, 1.0, 2.0, 4.0] {
            let t = improved_pid_terms(&state, &gains, tau, e).map_err(|e| e.to_string())?;
            worst = worst
                .max((t.proportional - base.proportional).abs())
                .max((t.integral - base.integral / tau).abs())
                .max((t.derivative - base.derivative * tau).abs());
        }
    }
    check(
        worst <= TAU_TOL,
        format!("max deviation {worst:.3e} over 1000 replayed states (tol {TAU_TOL:e})"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("collapse equivalence", Some(5.0), criterion_1),
        ("metrics oracle", Some(1.0), criterion_2),
        ("physics conservation", Some(5.0), criterion_3),
        ("integrator order", Some(5.0), criterion_4),
        ("vehicle trend", Some(30.0), criterion_5),
        ("pan-tilt tracking", Some(10.0), criterion_6),
        ("determinism", None, criterion_7),
        ("tau decomposition", None, criterion_8),
    ];
    let mut failures = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let outcome = within(*limit, start.elapsed(), result);
        match outcome {
            Ok(msg) => println!("criterion {} [{name}]: PASS - {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {} [{name}]: FAIL - {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
