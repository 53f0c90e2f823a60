mod common;

use common::*;
use hci_core::domain::{write_snapshot, Grade, Shape};
use hci_core::index::{final_weights, CaratClass, WeightVector};
use hci_core::synthgen::{
    scenario_states, Generator, GeneratorConfig, MarketState, PriceLaw, ScenarioKind, ScenarioSpec, TrueIndexPath,
    VolumeShift, REFERENCE_CLASS_COUNTS,
};
use proptest::prelude::*;

fn csv_bytes(s: &hci_core::Snapshot) -> Vec<u8> {
    let mut out = Vec::new();
    write_snapshot(s, &mut out).unwrap();
    out
}

#[test]
fn class_frequencies_follow_the_reference_counts() {
    let s = snapshot_at(100_000, 1, base_date());
    let total: f64 = REFERENCE_CLASS_COUNTS.iter().sum();
    let mut counts = [0usize; 7];
    for r in s.records() {
        counts[CaratClass::of(r.attributes.carat).unwrap().index()] += 1;
    }
    for g in 0..7 {
        let expected = REFERENCE_CLASS_COUNTS[g] / total;
        let got = counts[g] as f64 / s.len() as f64;
        assert!((got - expected).abs() <= 0.005, "class {}: {got} vs {expected}", g + 1);
    }
}

#[test]
fn same_seed_and_date_give_identical_bytes() {
    let a = csv_bytes(&snapshot_at(5_000, 3, base_date()));
    let b = csv_bytes(&snapshot_at(5_000, 3, base_date()));
    assert_eq!(a, b);
    assert_ne!(a, csv_bytes(&snapshot_at(5_000, 3, week(1))));
    assert_ne!(a, csv_bytes(&snapshot_at(5_000, 4, base_date())));
}

#[test]
fn snapshots_do_not_depend_on_thread_count() {
    let g = generator(20_000, 5);
    let state = MarketState::neutral(base_date());
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| csv_bytes(&g.snapshot(&state).unwrap()))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn price_jumps_at_one_carat() {
    let g = generator(10, 0);
    let state = MarketState::neutral(base_date());
    let mut a = reference_stone(&g, CaratClass::of(1.0).unwrap());
    let mut p = |ct: f64| {
        a.carat = ct;
        g.true_price(&a, &state)
    };
    let (p099, p100, p101) = (p(0.99), p(1.00), p(1.01));
    assert!(p100 / p099 > p101 / p100, "{p099} {p100} {p101}");
}

#[test]
fn degenerate_law_prices_everything_at_the_base() {
    let cfg = GeneratorConfig {
        n_per_snapshot: 2_000,
        noise_sd: 0.0,
        price_law: PriceLaw::flat(1000f64.ln()),
        ..GeneratorConfig::default()
    };
    let s = Generator::new(cfg).unwrap().snapshot(&MarketState::neutral(base_date())).unwrap();
    for r in s.records() {
        assert!((r.price.to_f64() - 1000.0).abs() < 1e-6);
    }
}

#[test]
fn group_factor_is_local_to_its_class() {
    let g = generator(10, 0);
    let neutral = MarketState::neutral(base_date());
    let mut shocked = neutral.clone();
    shocked.group_factor[2] = 2.0;
    let mut a = reference_stone(&g, CaratClass::of(1.5).unwrap());
    a.carat = 1.5;
    assert!((g.true_price(&a, &shocked) / g.true_price(&a, &neutral) - 2.0).abs() < 1e-12);
    a.carat = 0.7;
    assert_eq!(g.true_price(&a, &shocked), g.true_price(&a, &neutral));
}

#[test]
fn zero_noise_prices_equal_the_law() {
    let cfg = GeneratorConfig {
        n_per_snapshot: 3_000,
        noise_sd: 0.0,
        ..GeneratorConfig::default()
    };
    let g = Generator::new(cfg).unwrap();
    let state = MarketState::neutral(base_date());
    for r in g.snapshot(&state).unwrap().records() {
        let law = g.log_price(&r.attributes).exp();
        assert!((r.price.to_f64() / law - 1.0).abs() < 1e-9);
    }
}

#[test]
fn scenarios_share_attributes_with_the_null_run() {
    let g = generator(4_000, 9);
    let dates: Vec<_> = (0..15).map(week).collect();
    let null = scenario_states(&dates, None).unwrap();
    let slump = scenario_states(&dates, Some(&ScenarioSpec::small_diamond_slump(week(1)))).unwrap();
    let a = g.snapshot(&null[5]).unwrap();
    let b = g.snapshot(&slump[5]).unwrap();
    for (x, y) in a.records().iter().zip(b.records()) {
        assert_eq!(x.attributes, y.attributes);
        let class = CaratClass::of(x.attributes.carat).unwrap().index();
        let ratio = y.price.to_f64() / x.price.to_f64();
        let expected = if class < 2 { 0.90 } else { 1.0 };
        assert!((ratio - expected).abs() < 1e-9, "class {class}: {ratio}");
    }
}

#[test]
fn neutral_path_is_flat_at_the_base_level() {
    let g = generator(10, 0);
    let states: Vec<_> = (0..10).map(|i| MarketState::neutral(week(i))).collect();
    let path = TrueIndexPath::from_states(&g, &states);
    assert!(path.values.iter().all(|v| (v - 1000.0).abs() < 1e-9));
}

/// Level of a slumped state recomputed by hand from the class values.
#[test]
fn slump_path_matches_the_weighted_dip() {
    let g = generator(10, 0);
    let dates: Vec<_> = (0..15).map(week).collect();
    let states = scenario_states(&dates, Some(&ScenarioSpec::small_diamond_slump(week(1)))).unwrap();
    let path = TrueIndexPath::from_states(&g, &states);
    let v = g.expected_class_values(&MarketState::neutral(base_date()));
    let f = [0.9, 0.9, 1.0, 1.0, 1.0, 1.0, 1.0];
    let shocked: Vec<f64> = v.iter().zip(f).map(|(v, f)| v * f).collect();
    let total: f64 = shocked.iter().sum();
    let wf = final_weights(&WeightVector::new(shocked.iter().map(|x| x / total).collect()).unwrap());
    let by_hand = 1000.0 * wf.values().iter().zip(f).map(|(w, f)| w * f).sum::<f64>();
    let trough = path.values[6];
    assert!((trough - by_hand).abs() < 1e-9, "{trough} vs {by_hand}");
    let w0 = g.expected_weights(&MarketState::neutral(base_date()));
    let approx = 1000.0 * (1.0 - 0.10 * (w0.values()[0] + w0.values()[1]));
    assert!((trough / approx - 1.0).abs() < 0.005, "{trough} vs {approx}");
}

#[test]
fn fashion_path_rises_by_the_cushion_share() {
    let g = generator(10, 0);
    let dates: Vec<_> = (0..16).map(week).collect();
    let states = scenario_states(&dates, Some(&ScenarioSpec::fashion_shift(week(1)))).unwrap();
    let path = TrueIndexPath::from_states(&g, &states);
    let share = g.shape_mix(&states[3])[Shape::Cushion.ordinal()];
    assert!((path.values[3] - 1000.0 * (1.0 + 0.05 * share)).abs() < 1e-9);
    assert!((path.values[14] - 1000.0).abs() < 1e-9);
}

#[test]
fn empty_custom_scenario_is_the_identity() {
    let dates: Vec<_> = (0..5).map(week).collect();
    let spec = ScenarioSpec {
        start: week(0),
        kind: ScenarioKind::Custom { phases: Vec::new() },
    };
    assert_eq!(scenario_states(&dates, Some(&spec)).unwrap(), scenario_states(&dates, None).unwrap());
}

proptest! {
    #[test]
    fn volume_shifts_conserve_total_volume(
        moves in prop::collection::vec((0usize..10, 0usize..10, 0.0f64..=1.0), 0..6)
    ) {
        let mut state = MarketState::neutral(base_date());
        state.shape_mix_shift = moves
            .iter()
            .map(|&(f, t, fraction)| VolumeShift {
                from: Shape::ALL[f],
                to: Shape::ALL[t],
                fraction,
            })
            .collect();
        let g = generator(10, 0);
        let mix = g.shape_mix(&state);
        prop_assert!((mix.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(mix.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn positive_factors_give_positive_prices(
        factors in prop::array::uniform7(0.05f64..20.0),
        seed in 0u64..1000,
    ) {
        let mut state = MarketState::neutral(base_date());
        state.group_factor = factors;
        let s = generator(200, seed).snapshot(&state).unwrap();
        prop_assert!(s.records().iter().all(|r| r.price.is_positive()));
    }
}
