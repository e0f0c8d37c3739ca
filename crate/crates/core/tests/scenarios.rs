use ecpid_core::config::{parse_config, ControllerKind, ExperimentSpec};
use ecpid_core::sim::run_scenario;
use proptest::prelude::*;

fn spec(text: &str) -> ExperimentSpec {
    parse_config(text).unwrap()
}

#[test]
fn steering_angle_kp_only_is_first_order() {
    // phi' = kp (target - phi): time constant 1/kp.
    for kp in [1.0, 2.0, 5.0] {
        let s = spec(&format!(
            r#"{{"scenario": {{"kind": "vehicle", "vehicle": {{"v_target": 0, "steering_target": 0.3,
                    "steering_mode": "steering_angle", "steer_rate_limit": 100}}}},
                "controller": {{"kind": "classical",
                    "loops": {{"steering": {{"kp": {kp}, "ki": 0, "kd": 0}}}}}},
                "sim": {{"dt": 0.001, "duration": 5}}}}"#
        ));
        let dt = s.sim.dt;
        let traj = run_scenario(&s.runs()[0].config).unwrap();
        let steer = traj.loop_trace("steering").unwrap();
        let level = 0.3 * (1.0 - (-1.0f64).exp());
        let t63 = steer
            .records
            .iter()
            .find(|r| r.output >= level)
            .map(|r| r.t)
            .unwrap();
        assert!((t63 - 1.0 / kp).abs() <= 2.0 * dt, "kp {kp}: t63 {t63}");
    }
}

#[test]
fn ec_collapse_reproduces_classical_trajectory() {
    for mode in ["heading", "steering_angle"] {
        let base = spec(&format!(
            r#"{{"scenario": {{"kind": "vehicle", "vehicle": {{"v_target": 8, "steering_target": 0.2,
                    "steering_mode": "{mode}"}}}},
                "controller": {{"tau": 1, "rho_scale": 0, "i_max": null, "saturate": false}},
                "sim": {{"dt": 0.001, "duration": 5}}}}"#
        ));
        let mut a = base.clone();
        a.override_controller(ControllerKind::Classical);
        let mut b = base;
        b.override_controller(ControllerKind::EcPidunn);
        let ta = run_scenario(&a.runs()[0].config).unwrap();
        let tb = run_scenario(&b.runs()[0].config).unwrap();
        for (la, lb) in ta.loops.iter().zip(&tb.loops) {
            for (ra, rb) in la.records.iter().zip(&lb.records) {
                assert!((ra.output - rb.output).abs() <= 1e-9);
                assert!((ra.control - rb.control).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn identical_configs_give_identical_trajectories() {
    let s = spec(
        r#"{"scenario": {"kind": "pan_tilt", "pan_tilt": {}},
            "sim": {"dt": 0.001, "duration": 3}}"#,
    );
    let cfg = &s.runs()[0].config;
    assert_eq!(run_scenario(cfg).unwrap(), run_scenario(cfg).unwrap());
}

#[test]
fn rho_stays_within_rho_scale_in_closed_loop() {
    let s = spec(
        r#"{"scenario": {"kind": "pan_tilt", "pan_tilt": {}},
            "controller": {"rho_scale": 0.001},
            "sim": {"dt": 0.001, "duration": 3}}"#,
    );
    let traj = run_scenario(&s.runs()[0].config).unwrap();
    for l in &traj.loops {
        for r in &l.records {
            assert!(r.rho.as_array().iter().all(|v| v.abs() <= 0.001));
        }
    }
}

#[test]
fn recorded_controls_respect_actuator_limits() {
    let s = spec(
        r#"{"scenario": {"kind": "vehicle", "vehicle": {"v_target": 30, "steering_target": -1.0}},
            "sim": {"dt": 0.001, "duration": 5}}"#,
    );
    let cfg = &s.runs()[0].config;
    let traj = run_scenario(cfg).unwrap();
    let f_max = cfg.plant.longitudinal.f_max;
    let rate = cfg.scenario.vehicle.as_ref().unwrap().steer_rate_limit;
    for r in &traj.loop_trace("speed").unwrap().records {
        assert!((0.0..=f_max).contains(&r.control));
    }
    for r in &traj.loop_trace("steering").unwrap().records {
        assert!(r.control.abs() <= rate);
    }
}

#[test]
fn speed_rises_without_braking_below_target() {
    let s = spec(
        r#"{"scenario": {"kind": "vehicle", "vehicle": {"v_target": 5, "steering_target": 0}},
            "controller": {"kind": "classical"},
            "sim": {"dt": 0.001, "duration": 10}}"#,
    );
    let traj = run_scenario(&s.runs()[0].config).unwrap();
    let v = traj.loop_trace("speed").unwrap().outputs();
    assert!(v.iter().all(|&x| x >= 0.0));
    assert!(v.last().unwrap() > &4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trace_length_is_floor_duration_over_dt_plus_one(steps in 1usize..400, dt in 1e-3f64..2e-2) {
        let duration = steps as f64 * dt;
        let s = spec(&format!(
            r#"{{"scenario": {{"kind": "pan_tilt", "pan_tilt": {{}}}},
                "sim": {{"dt": {dt}, "duration": {duration}}}}}"#
        ));
        let expected = (duration / dt + 1e-9).floor() as usize + 1;
        let traj = run_scenario(&s.runs()[0].config).unwrap();
        for l in &traj.loops {
            prop_assert_eq!(l.records.len(), expected);
        }
    }
}
