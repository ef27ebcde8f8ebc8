use brwlab::brw::{run_to_horizon, step_configuration, SiteConfiguration};
use brwlab::rng::{seeded, StreamFamily};
use brwlab::walk::{coupled_biased_vs_reflected, coupled_monotone_pair, WalkParams};
use brwlab::{LawName, OffspringLaw};
use proptest::prelude::*;

fn law_strategy() -> impl Strategy<Value = OffspringLaw> {
    prop::sample::select(vec![LawName::Binary, LawName::GeometricHalf, LawName::Poisson1])
        .prop_map(|name| OffspringLaw::by_name(name).unwrap())
}

fn config_strategy() -> impl Strategy<Value = SiteConfiguration> {
    prop::collection::vec((0u64..15, 1u64..30), 1..6).prop_map(|pairs| {
        // one parity class, as every reachable configuration has
        SiteConfiguration::from_counts(pairs.into_iter().map(|(x, c)| (2 * x, c)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn step_keeps_parity_and_reach(config in config_strategy(), law in law_strategy(),
                                   beta in 0.0f64..1.5, seed in any::<u64>()) {
        let params = WalkParams::new(beta, 16).unwrap();
        let top = config.rightmost().unwrap();
        let next = step_configuration(&config, &params, &law, &mut seeded(seed)).unwrap();
        prop_assert_eq!(next.generation(), config.generation() + 1);
        prop_assert_eq!(next.iter().map(|(_, c)| c).sum::<u64>(), next.total());
        if let Some(r) = next.rightmost() {
            prop_assert!(r <= top + 1);
        }
        for (x, c) in next.iter() {
            prop_assert!(c > 0);
            prop_assert_eq!(x % 2, 1);
        }
    }

    #[test]
    fn degenerate_law_conserves_particles(config in config_strategy(), seed in any::<u64>()) {
        let params = WalkParams::new(0.5, 25).unwrap();
        let mut rng = seeded(seed);
        let mut c = config.clone();
        for _ in 0..10 {
            c = step_configuration(&c, &params, &OffspringLaw::degenerate_one(), &mut rng).unwrap();
            prop_assert_eq!(c.total(), config.total());
        }
    }

    #[test]
    fn extinction_is_absorbing(law in law_strategy(), seed in any::<u64>()) {
        let params = WalkParams::new(0.5, 16).unwrap();
        let rec = run_to_horizon(&SiteConfiguration::point(0, 1), &params, &law, 60, &[], &mut seeded(seed)).unwrap();
        prop_assert_eq!(rec.survived, rec.final_total > 0);
        prop_assert_eq!(rec.survived, rec.rightmost_at_horizon.is_some());
        prop_assert_eq!(rec.last.total(), rec.final_total);
        if let Some(r) = rec.rightmost_at_horizon {
            prop_assert!(r <= 60 && r % 2 == 0);
        }
    }

    #[test]
    fn couplings_are_ordered(beta in 0.0f64..1.9, start in 0u64..10, lo in 0u64..10, gap in 0u64..6,
                             seed in any::<u64>()) {
        let params = WalkParams::new(beta, 16).unwrap();
        let mut rng = seeded(seed);
        let (b, r) = coupled_biased_vs_reflected(&params, start, 80, &mut rng);
        prop_assert!(b.positions().iter().zip(r.positions()).all(|(x, y)| x <= y));
        let (a, c) = coupled_monotone_pair(&params, lo, lo + 2 * gap, 80, &mut rng).unwrap();
        let pairs: Vec<(u64, u64)> = a.positions().iter().copied().zip(c.positions().iter().copied()).collect();
        prop_assert!(pairs.iter().all(|(x, y)| x <= y));
        if let Some(meet) = pairs.iter().position(|(x, y)| x == y) {
            prop_assert!(pairs[meet..].iter().all(|(x, y)| x == y));
        }
    }

    #[test]
    fn snapshots_are_the_requested_generations(seed in any::<u64>()) {
        let params = WalkParams::new(0.5, 16).unwrap();
        let law = OffspringLaw::degenerate_one();
        let rec = run_to_horizon(&SiteConfiguration::point(3, 5), &params, &law, 12, &[0, 4, 12], &mut seeded(seed)).unwrap();
        let gens: Vec<u64> = rec.snapshots.iter().map(|s| s.generation()).collect();
        prop_assert_eq!(gens, vec![0, 4, 12]);
        prop_assert_eq!(rec.particle_generations, 60);
    }
}

#[test]
fn snapshot_beyond_horizon_is_rejected() {
    let params = WalkParams::new(0.5, 16).unwrap();
    let err = run_to_horizon(&SiteConfiguration::point(0, 1), &params, &OffspringLaw::binary(), 5, &[6], &mut seeded(1));
    assert!(err.is_err());
}

#[test]
fn stream_results_ignore_pool_size() {
    let params = WalkParams::new(0.5, 16).unwrap();
    let law = OffspringLaw::geometric_half();
    let streams = StreamFamily::new(7, "pool", 16);
    let draw = || {
        streams.run(300, |_, rng| {
            run_to_horizon(&SiteConfiguration::point(0, 4), &params, &law, 40, &[], rng).unwrap().last
        })
    };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(draw);
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(draw);
    assert_eq!(one, three);
}
