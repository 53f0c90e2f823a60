mod common;

use chrono::NaiveDate;
use common::*;
use hci_core::domain::{Colour, Shape, MAX_CARAT, MIN_CARAT};
use hci_core::index::{
    assign_group, compute_hci, compute_ratios, compute_subindices, final_weights, group_stats, index_point,
    weights_from_totals, CaratClass, GroupStats, GroupSummary, IndexOptions, RatioRecord, StreamingIndex,
    CARAT_CLASS_BOUNDS,
};
use hci_core::synthgen::{Generator, GeneratorConfig, MarketState};
use hci_core::{GroupingScheme, Price, Statistic, WeightVector, WeightingPolicy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

fn stats_of(means: &[f64]) -> GroupStats {
    GroupStats {
        scheme: GroupingScheme::CaratClass,
        statistic: Statistic::Mean,
        groups: means
            .iter()
            .map(|&m| GroupSummary {
                count: 10,
                mean: Some(m),
                median: Some(m),
                variance: Some(0.0),
                total_value: 1.0,
                total_value_nanos: 1,
            })
            .collect(),
    }
}

#[test]
fn class_boundaries() {
    let class = |c: f64| assign_group(c).unwrap().number();
    assert_eq!(class(0.25), 1);
    assert_eq!(class(0.99), 2);
    assert_eq!(class(1.00), 3);
    assert_eq!(class(5.00), 7);
    assert_eq!(class(99.99), 7);
    assert!(assign_group(0.24).is_err());
    assert!(assign_group(100.0).is_err());
}

#[test]
fn one_class_price_rise_moves_the_headline_by_its_weight() {
    let table3 = WeightVector::new(vec![0.087, 0.141, 0.222, 0.150, 0.127, 0.093, 0.180]).unwrap();
    let p = compute_hci(base_date(), &stats_of(&[1.0, 1.0, 1.1, 1.0, 1.0, 1.0, 1.0]), &table3, 1.0).unwrap();
    assert!((p.headline - 1022.2).abs() < 1e-9, "{}", p.headline);
    let flat = compute_hci(base_date(), &stats_of(&[1.0; 7]), &table3, 1.0).unwrap();
    assert!((flat.headline - 1000.0).abs() < 1e-12);
}

#[test]
fn weight_blend_closed_forms() {
    let w = final_weights(&WeightVector::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap());
    assert!((w.values()[0] - 4.0 / 7.0).abs() < 1e-15);
    assert!(w.values()[1..].iter().all(|&x| (x - 1.0 / 14.0).abs() < 1e-15));
    let u = final_weights(&WeightVector::uniform(7));
    assert!(u.values().iter().all(|&x| (x - 1.0 / 7.0).abs() < 1e-15));
    let half = weights_from_totals(&[5, 5]).unwrap();
    assert_eq!(half.values(), &[0.5, 0.5]);
}

#[test]
fn zero_noise_class_factor_shows_in_every_ratio() {
    let g = Generator::new(GeneratorConfig {
        noise_sd: 0.0,
        ..config(20_000, 1)
    })
    .unwrap();
    let p = linear(&g.snapshot(&MarketState::neutral(base_date())).unwrap());
    let mut state = MarketState::neutral(week(1));
    state.group_factor[2] = 1.2;
    for r in compute_ratios(&g.snapshot(&state).unwrap(), &p) {
        let expected = if r.class.index() == 2 { 1.2 } else { 1.0 };
        assert!((r.ratio - expected).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn ratios_scale_with_prices() {
    let p = linear(&snapshot_at(5_000, 2, base_date()));
    let s = snapshot_at(2_000, 2, week(1));
    let scaled = s.scaled_prices(1.10).unwrap();
    for (a, b) in compute_ratios(&s, &p).iter().zip(compute_ratios(&scaled, &p)) {
        assert!((b.ratio / a.ratio - 1.10).abs() < 1e-9);
    }
}

#[test]
fn right_skew_puts_the_median_below_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let skew = LogNormal::new(0.0, 0.8).unwrap();
    let ratios: Vec<RatioRecord> = (0..5_000)
        .map(|i| RatioRecord {
            record: i,
            class: CaratClass::from_index(0).unwrap(),
            shape: Shape::Round,
            colour: Colour::D,
            ratio: skew.sample(&mut rng),
            price: Price::from_f64(1000.0).unwrap(),
        })
        .collect();
    let mean = group_stats(&ratios, GroupingScheme::CaratClass, Statistic::Mean);
    let median = group_stats(&ratios, GroupingScheme::CaratClass, Statistic::Median);
    assert!(median.stat(0).unwrap() < mean.stat(0).unwrap());
}

#[test]
fn baseline_sub_indices_sit_at_the_base_level() {
    let s = snapshot_at(20_000, 4, base_date());
    let p = linear(&s);
    let ratios = compute_ratios(&s, &p);
    for scheme in [GroupingScheme::CaratClass, GroupingScheme::Shape, GroupingScheme::Colour] {
        for statistic in [Statistic::Mean, Statistic::Median] {
            for v in compute_subindices(&ratios, scheme, statistic, &p.calibration).into_iter().flatten() {
                assert!((v - 1000.0).abs() < 1e-9, "{scheme:?} {statistic:?}: {v}");
            }
        }
    }
}

#[test]
fn headline_matches_its_definition() {
    let p = linear(&snapshot_at(10_000, 5, base_date()));
    let s = snapshot_at(10_000, 5, week(2));
    let point = index_point(&p, &s, IndexOptions::default()).unwrap();
    assert_eq!(point.counts.iter().sum::<usize>(), s.len());
    let c0 = p.calibration.mean.c0;
    let by_hand: f64 = point
        .weights
        .iter()
        .zip(&point.group_stats)
        .map(|(w, s)| w * s.unwrap())
        .sum::<f64>()
        * 1000.0
        / c0;
    assert!((point.headline - by_hand).abs() < 1e-9);
    assert!((point.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn streaming_matches_the_in_memory_path_bit_for_bit() {
    let p = linear(&snapshot_at(10_000, 6, base_date()));
    // Larger than one streaming batch so a partial batch is exercised.
    let s = snapshot_at(300_000, 6, week(1));
    for statistic in [Statistic::Mean, Statistic::Median] {
        for weighting in [WeightingPolicy::PerSnapshot, WeightingPolicy::Frozen] {
            let opts = IndexOptions { statistic, weighting };
            let whole = index_point(&p, &s, opts).unwrap();
            let mut stream = StreamingIndex::new(&p, opts);
            for r in s.records() {
                stream.push(r.clone());
            }
            assert_eq!(stream.finish(s.date()).unwrap(), whole);
        }
    }
}

#[test]
fn empty_classes_renormalize_the_weights() {
    let p = linear(&snapshot_at(10_000, 7, base_date()));
    let small: Vec<_> = snapshot_at(3_000, 7, week(1))
        .into_records()
        .into_iter()
        .filter(|r| r.attributes.carat < 1.0)
        .collect();
    let s = hci_core::Snapshot::new(week(1), small).unwrap();
    let point = index_point(&p, &s, IndexOptions { weighting: WeightingPolicy::Frozen, ..Default::default() }).unwrap();
    assert!((point.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(point.weights[2..].iter().all(|&w| w == 0.0));
    assert!(point.headline.is_finite());
}

proptest! {
    #[test]
    fn every_valid_carat_has_exactly_one_class(hundredths in 25u32..10_000) {
        let carat = hundredths as f64 / 100.0;
        prop_assume!((MIN_CARAT..MAX_CARAT).contains(&carat));
        let class = assign_group(carat).unwrap();
        let holders = (0..7)
            .filter(|&g| CARAT_CLASS_BOUNDS[g] <= carat && carat < CARAT_CLASS_BOUNDS[g + 1])
            .count();
        prop_assert_eq!(holders, 1);
        prop_assert!(class.lower() <= carat && carat < class.upper());
    }

    #[test]
    fn blended_weights_sum_to_one(totals in prop::collection::vec(0u64..u64::MAX / 8, 7)) {
        prop_assume!(totals.iter().any(|&t| t > 0));
        let t: Vec<u128> = totals.iter().map(|&x| x as u128).collect();
        let wp = weights_from_totals(&t).unwrap();
        let wf = final_weights(&wp);
        prop_assert!((wp.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((wf.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(wf.values().iter().all(|&w| w >= 1.0 / 14.0 - 1e-15));
    }

    #[test]
    fn headline_is_linear_in_group_stats(
        stats in prop::array::uniform7(0.1f64..10.0),
        k in 0.1f64..10.0,
    ) {
        let w = final_weights(&WeightVector::uniform(7));
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let a = compute_hci(d, &stats_of(&stats), &w, 1.0).unwrap().headline;
        let b = compute_hci(d, &stats_of(&stats.map(|s| s * k)), &w, 1.0).unwrap().headline;
        prop_assert!((b / a - k).abs() < 1e-12 * k.max(1.0));
    }
}
