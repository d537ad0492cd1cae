use restless_core::feedback::{whittle_lp_upper_bound, lagrangian_lp_value, Myopic};
use restless_core::gallery::*;
use restless_core::sim::feedback::simulate;
use restless_core::sim::SimConfig;

#[test]
fn scratch_myopic_gap() {
    let GalleryInstance::Feedback(inst) = generate(&GalleryId::MyopicGap { n: 12 }).unwrap() else { panic!() };
    let cfg = SimConfig::new(400_000, 20_000, 3, 31).unwrap();
    let t0 = std::time::Instant::now();
    let myopic = simulate(&inst, &Myopic { restrict: None }, &cfg).unwrap();
    let rr = simulate(&inst, &Myopic { restrict: Some((1..=12).collect()) }, &cfg).unwrap();
    println!("myopic {} +- {} | type-2 round-robin {} +- {} [{:?}]", myopic.mean, myopic.stderr, rr.mean, rr.stderr, t0.elapsed());
}

#[test]
fn scratch_lp_gap() {
    let GalleryInstance::Feedback(inst) = generate(&GalleryId::LpGap { n: 50, beta: 1e-5 }).unwrap() else { panic!() };
    let tmax = lp_gap_suggested_truncation(&inst);
    println!("tmax {tmax}");
    let t0 = std::time::Instant::now();
    let lp = whittle_lp_upper_bound(&inst, Some(tmax)).unwrap();
    let bound = lp_gap_complete_info_bound(50);
    println!("lp {} vs complete-info {} ratio {} [{:?}]", lp, bound, lp / bound, t0.elapsed());
    let lag = lagrangian_lp_value(&inst).unwrap();
    println!("lagrangian {} (diff {:.2e})", lag, (lag - lp).abs());
}
