use restless_core::gallery::{generate, GalleryId, GalleryInstance};
use restless_core::replenish::solve_replenish;
use restless_core::sim::replenish::{simulate, RepairPolicy};
use restless_core::sim::lyapunov::replenish_drift;
use restless_core::sim::SimConfig;

#[test]
fn scratch_replenish_gap() {
    let GalleryInstance::Replenish(inst) = generate(&GalleryId::ReplenishGap { n: 10 }).unwrap() else { panic!() };
    let params = solve_replenish(&inst).unwrap();
    println!("penalty {} obj {} excess {:?}", params.penalty, params.objective, params.excess);
    let cfg = SimConfig::new(2_000_000, 50_000, 2, 13).unwrap();
    let dual = simulate(&inst, &RepairPolicy::Duality(&params), &cfg).unwrap();
    let whit = simulate(&inst, &RepairPolicy::WhittleIndex, &cfg).unwrap();
    println!("duality {} +- {} | whittle {} +- {} | ratio {}", dual.mean, dual.stderr, whit.mean, whit.stderr, dual.mean / whit.mean.max(1e-12));
    let drift = replenish_drift(&inst, &params, 1_000_000).unwrap();
    println!("drift min {} at {} over {} states; uncertified {:?}", drift.min_drift, drift.witness, drift.states, drift.uncertified);
    println!("floor = {}", params.objective / 2.0);
}
