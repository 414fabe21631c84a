use std::path::PathBuf;

use etrate::channel::DelaySpec;
use etrate::cli::config::{RunConfig, Scenario};
use etrate::sim::{self, check_trace, ScalarScenario};

fn closed_loop() -> ScalarScenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../recipes/closed-loop.toml");
    match RunConfig::load(&path).unwrap().scenario().unwrap() {
        Scenario::Scalar(s) => s,
        Scenario::Vector(_) => unreachable!(),
    }
}

#[test]
fn closed_loop_state_decays_over_a_long_horizon() {
    let mut s = closed_loop();
    s.options.horizon = 40.0;
    s.options.record_every = 100;
    let trace = sim::run_scalar(&s).unwrap();
    assert!(check_trace(&trace).passed());
    let x_end = trace.final_sample().unwrap().x[0].abs();
    assert!(x_end < 0.05 * s.x0.abs(), "|x(40)| = {x_end}");
}

#[test]
fn every_delay_model_keeps_the_invariants() {
    for delay in [
        DelaySpec::Constant { delay: 0.0 },
        DelaySpec::Constant { delay: 1.2 },
        DelaySpec::Uniform { seed: 99 },
        DelaySpec::Adversarial,
    ] {
        let s = ScalarScenario {
            delay: delay.clone(),
            ..closed_loop()
        };
        let report = check_trace(&sim::run_scalar(&s).unwrap());
        assert!(
            report.passed(),
            "{delay:?}: {:?}",
            report.failures().collect::<Vec<_>>()
        );
    }
}

#[test]
fn exact_and_euler_agree_on_the_trigger_sequence() {
    let euler = sim::run_scalar(&closed_loop()).unwrap();
    let mut s = closed_loop();
    s.options.integrator = Default::default();
    let exact = sim::run_scalar(&s).unwrap();
    let times = |t: &sim::SimTrace| t.triggers(0).map(|e| e.t_s).collect::<Vec<_>>();
    let (a, b) = (times(&euler), times(&exact));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-2, "{x} vs {y}");
    }
}
