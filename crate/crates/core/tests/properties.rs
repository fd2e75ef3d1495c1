//! Property tests for the invariants that hold across the whole input
//! space rather than at hand-picked points.

use proptest::prelude::*;

use beamqopt::model::{check_feasibility, repair_schedule, weighted_throughput, Schedule};
use beamqopt::qubo::{build_qubo, default_lambdas, BitString};
use beamqopt::scenario::{generate_scenario, rescale_scenario, ProfileKind, TrafficProfile};

fn small_scenario(seed: u64) -> beamqopt::Scenario {
    let mut p = TrafficProfile::new(ProfileKind::Uniform, 3, 3, 2);
    p.volume_range = (1, 3);
    p.rate_range = (1, 2);
    generate_scenario(&p, seed).unwrap()
}

fn schedule_from_mask(s: &beamqopt::Scenario, mask: u64) -> Schedule {
    let mut sched = Schedule::new();
    let mut bit = 0;
    for f in &s.flows {
        for u in &s.units {
            if mask >> bit & 1 == 1 {
                sched.assign(f.id, u.id);
            }
            bit += 1;
        }
    }
    sched
}

proptest! {
    /// Every constraint is homogeneous in the rescaled quantities, so
    /// feasibility is invariant under any positive factor.
    #[test]
    fn rescaling_never_changes_feasibility(
        seed in 0u64..1000,
        factor in 0.01f64..100.0,
        mask in 0u64..512,
    ) {
        let s = small_scenario(seed);
        let scaled = rescale_scenario(&s, factor).unwrap();
        let sched = schedule_from_mask(&s, mask);
        let before = check_feasibility(&s, &sched).unwrap().feasible;
        let after = check_feasibility(&scaled, &sched).unwrap().feasible;
        prop_assert_eq!(before, after);
    }

    /// Repair returns a feasible subset and never gains throughput.
    #[test]
    fn repair_is_a_feasible_subset(seed in 0u64..1000, mask in 0u64..512) {
        let s = small_scenario(seed);
        let sched = schedule_from_mask(&s, mask);
        let repaired = repair_schedule(&s, &sched);
        prop_assert!(check_feasibility(&s, &repaired).unwrap().feasible);
        prop_assert!(repaired.is_subset_of(&sched));
        let before = weighted_throughput(&s, &sched).unwrap();
        let after = weighted_throughput(&s, &repaired).unwrap();
        prop_assert!(after <= before + 1e-12);
    }

    /// Decoding then re-encoding restores the decision bits exactly.
    #[test]
    fn encode_after_decode_keeps_decision_bits(seed in 0u64..200, raw in any::<u64>()) {
        let s = small_scenario(seed);
        let q = build_qubo(&s, default_lambdas(&s)).unwrap();
        let z = raw & ((1u64 << q.n.min(63)) - 1);
        let x = BitString::from_index(z, q.n);
        let round = q.encode(&s, &q.decode(&x).unwrap()).unwrap();
        for &bit in q.index.decision.values() {
            prop_assert_eq!(x.get(bit), round.get(bit));
        }
    }

    /// Text round trips: bitstrings and schedules parse back to themselves.
    #[test]
    fn text_formats_round_trip(raw in any::<u64>(), len in 1usize..48, mask in 0u64..4096) {
        let bits = BitString::from_index(raw & ((1 << len as u64) - 1), len);
        let parsed: BitString = bits.to_string().parse().unwrap();
        prop_assert_eq!(&parsed, &bits);

        let s = small_scenario(1);
        let sched = schedule_from_mask(&s, mask);
        let parsed: Schedule = sched.to_string().parse().unwrap();
        prop_assert_eq!(parsed, sched);
    }

    /// The compiled quadratic form agrees with a naive per-term sum.
    #[test]
    fn energy_matches_naive_sum(seed in 0u64..200, raw in any::<u64>()) {
        let s = small_scenario(seed);
        let q = build_qubo(&s, default_lambdas(&s)).unwrap();
        let z = raw & ((1u64 << q.n.min(63)) - 1);
        let x = BitString::from_index(z, q.n);

        let mut naive = q.offset;
        for (&i, &v) in &q.linear {
            naive += v * (x.get(i) as u64 as f64);
        }
        for (&(i, j), &v) in &q.quadratic {
            naive += v * (x.get(i) && x.get(j)) as u64 as f64;
        }
        let compiled = q.energy(&x).unwrap();
        prop_assert!((compiled - naive).abs() <= 1e-9 * (1.0 + naive.abs()));
    }
}
