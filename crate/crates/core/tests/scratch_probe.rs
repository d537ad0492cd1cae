use restless_core::belief::FeedbackArm;
use restless_core::instance::{ProbeArm, ProbeInstance};
use restless_core::probe::solve_probe;
use restless_core::DEFAULT_DELTA;

#[test]
fn scratch_probe_slow_mixing() {
    let cases: Vec<(&str, Vec<ProbeArm>)> = vec![
        ("slow3", vec![
            ProbeArm { arm: FeedbackArm::new(0.04, 0.06, 1.0, DEFAULT_DELTA).unwrap(), probe_cost: 0.05 },
            ProbeArm { arm: FeedbackArm::new(0.05, 0.10, 1.2, DEFAULT_DELTA).unwrap(), probe_cost: 0.08 },
            ProbeArm { arm: FeedbackArm::new(0.08, 0.12, 0.9, DEFAULT_DELTA).unwrap(), probe_cost: 0.03 },
        ]),
        ("slow2", vec![
            ProbeArm { arm: FeedbackArm::new(0.05, 0.05, 1.0, DEFAULT_DELTA).unwrap(), probe_cost: 0.02 },
            ProbeArm { arm: FeedbackArm::new(0.06, 0.1, 1.5, DEFAULT_DELTA).unwrap(), probe_cost: 0.05 },
        ]),
        ("mixed", vec![
            ProbeArm { arm: FeedbackArm::new(0.1, 0.15, 1.0, DEFAULT_DELTA).unwrap(), probe_cost: 0.04 },
            ProbeArm { arm: FeedbackArm::new(0.07, 0.1, 0.8, DEFAULT_DELTA).unwrap(), probe_cost: 0.02 },
            ProbeArm { arm: FeedbackArm::new(0.12, 0.2, 1.3, DEFAULT_DELTA).unwrap(), probe_cost: 0.06 },
        ]),
    ];
    for (name, arms) in cases {
        let stat: Vec<f64> = arms.iter().map(|a| a.arm.reward() * a.arm.stationary_good()).collect();
        let t0 = std::time::Instant::now();
        match solve_probe(&ProbeInstance::new(arms, 1).unwrap()) {
            Ok(p) => {
                println!("{name}: penalty {:.4} obj {:.4} ({:?})", p.penalty, p.objective, t0.elapsed());
                for (i, ap) in p.arms.iter().enumerate() {
                    println!("  arm{i}: active {} d={} m={} e={} h={:.4} lam+h={:.4} vs r*pi={:.4}",
                      ap.active, ap.probe_after_bad, ap.try_plays, ap.exploit_run, ap.excess, p.penalty + ap.excess, stat[i]);
                }
            }
            Err(e) => println!("{name}: ERR {e} ({:?})", t0.elapsed()),
        }
    }
}
