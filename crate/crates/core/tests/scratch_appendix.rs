// scratch check of the three-arm benchmark values
use restless_core::gallery::{generate, GalleryId, GalleryInstance, RegionPolicy, StalenessRegion};
use restless_core::sim::feedback::{exact_policy_eval, vi_optimal, ExactOptions};

#[test]
fn scratch_appendix_values() {
    let GalleryInstance::Feedback(inst) = generate(&GalleryId::IndexGap).unwrap() else { panic!() };
    let opts = ExactOptions { t_cap: 100, branch_floor: 1e-8, max_states: 10_000_000 };
    let t0 = std::time::Instant::now();
    for (region, expect) in [
        (StalenessRegion::Optimal, 1.46218),
        (StalenessRegion::Square(4), 1.46167),
        (StalenessRegion::Square(3), 1.46104),
    ] {
        let val = exact_policy_eval(&inst, &RegionPolicy { region }, &opts).unwrap();
        println!("region {:?}: exact {} vs expected {} (diff {:.2e})  [{:?}]", region, val, expect, (val-expect).abs(), t0.elapsed());
    }
    let t1 = std::time::Instant::now();
    let out = vi_optimal(&inst, 0.99, 100, 1e-9, 3000).unwrap();
    println!("vi: avg {} sweeps {} in {:?}", out.average_reward, out.sweeps, t1.elapsed());
    // probe the recovered region
    use restless_core::{BeliefState, Observed};
    let b = |last, t| BeliefState { last, t };
    for t0arm in [1u64, 2, 7] {
        let mut region = vec![];
        for k1 in 1..=8u64 {
            for k2 in 1..=8u64 {
                let a = out.policy.action(&[b(Observed::Good, t0arm), b(Observed::Bad, k1), b(Observed::Bad, k2)]);
                if a == Some(0) { region.push((k1,k2)); }
            }
        }
        println!("t0={t0arm}: region {:?}", region);
    }
}
