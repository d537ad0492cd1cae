use restless_core::belief::{FeedbackArm, FeedbackInstance};
use restless_core::feedback::balanced_penalty;
use restless_core::instance::MonotoneInstance;
use restless_core::monotone::solve_balance;
use restless_core::instance::MonotoneVariant;
use restless_core::DEFAULT_DELTA;

#[test]
fn scratch_cross_check() {
    let arms = vec![
        FeedbackArm::new(0.1, 0.1, 2.0, DEFAULT_DELTA).unwrap(),
        FeedbackArm::new(0.2, 0.25, 1.0, DEFAULT_DELTA).unwrap(),
        FeedbackArm::new(0.05, 0.3, 3.0, DEFAULT_DELTA).unwrap(),
    ];
    let inst = FeedbackInstance::new(arms.clone(), DEFAULT_DELTA).unwrap();
    let t0 = std::time::Instant::now();
    let params = balanced_penalty(&inst, 1e-3).unwrap();
    println!("feedback lambda* = {} ({:?})", params.penalty, t0.elapsed());
    let tmax = arms.iter().map(|a| a.mixing_time(1e-9, 100_000)).max().unwrap();
    println!("tmax = {tmax}");
    let enc = MonotoneInstance::from_feedback(&arms, tmax);
    let t1 = std::time::Instant::now();
    let sol = solve_balance(&enc, MonotoneVariant::Base).unwrap();
    println!("balance lambda = {} obj {} cs {} ({:?})", sol.penalty, sol.objective, sol.max_cs_residual, t1.elapsed());
    println!("diff = {:.3e}", (sol.penalty - params.penalty).abs());
    for (i, ap) in params.arms.iter().enumerate() {
        let p_fb = ap.potential;
        let p_mono = sol.potentials[i][0] - sol.potentials[i][1];
        println!("arm {i}: active {} | h_fb {} h_mono {} | t_fb {:?} t_mono(g,b) {:?},{:?} | exploit {:?} | p_fb {p_fb} p_mono {p_mono}",
          ap.active, ap.excess, sol.excess[i], ap.wait, sol.tight_wait[i][0], sol.tight_wait[i][1], (sol.exploit[i][0], sol.exploit[i][1]));
    }
}
