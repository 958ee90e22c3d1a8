use std::f64::consts::{PI, TAU};

use fbg_core::dataset::{
    denormalize, fit_norm_stats, generate_static, normalize, split_indices, Sample, StaticConfig,
};
use fbg_core::fbg::{baseline_frame, measure, SensorLayout};
use fbg_core::force::{decode_force, encode_force, ContactForce};
use fbg_core::geometry::{bend_profile, integrate_shape, tip_position_error, BendProfile, WorkspaceConfig};
use fbg_core::model_based::{reconstruct, solve_triad};
use fbg_core::nn::{rescale_labels, sigmoid, Adam, AdamConfig, Dense, Layer, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_corpus(count: usize, seed: u64) -> Vec<Sample> {
    let cfg = StaticConfig {
        count,
        seed,
        ..StaticConfig::default()
    };
    generate_static(&cfg, &WorkspaceConfig::default(), &SensorLayout::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segments_never_stretch(kappa in prop::collection::vec(-133.0f64..133.0, 1..30), phi in -PI..PI) {
        let twists = vec![phi; kappa.len()];
        let step = 3.3e-3;
        let shape = integrate_shape(&kappa, &twists, step).unwrap();
        let p = shape.positions();
        prop_assert_eq!(p.len(), kappa.len() + 1);
        for (w, k) in p.windows(2).zip(&kappa) {
            let chord = (w[1] - w[0]).norm();
            let expected = if k.abs() < 1e-12 { step } else { 2.0 * (k * step / 2.0).sin().abs() / k.abs() };
            prop_assert!((chord - expected).abs() < 1e-12, "chord {} vs {}", chord, expected);
        }
    }

    #[test]
    fn noiseless_planar_bends_round_trip(angle_deg in -270.0f64..270.0) {
        let ws = WorkspaceConfig::default();
        let layout = SensorLayout::default();
        let m = layout.node_count;
        let (k, t) = bend_profile(angle_deg.to_radians(), BendProfile::Constant, m, m as f64 * layout.sample_spacing, &ws).unwrap();
        let truth = integrate_shape(&k, &t, layout.sample_spacing).unwrap();
        let frame = measure(&truth, &layout, 0.0, 0).unwrap();
        let rec = reconstruct(&frame, &baseline_frame(&layout).unwrap(), &layout).unwrap();
        prop_assert!(tip_position_error(&rec, &truth).unwrap() < 5e-4);
    }

    #[test]
    fn triad_recovers_any_bend(kappa in 1e-3f64..133.0, phi in 0.0f64..TAU, a0 in 0.0f64..TAU, r in 1e-3f64..3e-3) {
        let az = [a0, a0 + 2.0, a0 + 4.1];
        let radii = [r; 3];
        let strains: [f64; 3] = std::array::from_fn(|j| -kappa * r * (phi + az[j]).sin());
        let sol = solve_triad(&strains, &az, &radii).unwrap();
        prop_assert!((sol.curvature - kappa).abs() < 1e-8 * kappa.max(1.0));
        let d = (sol.phase - phi).rem_euclid(TAU);
        prop_assert!(d.min(TAU - d) < 1e-8);
    }

    #[test]
    fn codec_localizes_within_half_a_node(force in 0.02f64..0.5, x in 0.0f64..0.090) {
        let layout = SensorLayout::default();
        let grid = layout.node_grid();
        let d = encode_force(&ContactForce::new(force, x), &grid, 3.0).unwrap();
        prop_assert!(d.values.iter().all(|&v| v >= 0.0 && v <= force));
        let c = decode_force(&d, force / 0.5, (0.0, 0.5), 0.01).unwrap();
        prop_assert!(c.active);
        prop_assert!((c.location - x).abs() <= layout.sample_spacing / 2.0 + 1e-12);
        prop_assert!((c.magnitude - force).abs() < 1e-12);
    }

    #[test]
    fn weak_peaks_decode_as_no_contact(force in 0.0f64..0.0099, x in 0.0f64..0.090) {
        let d = encode_force(&ContactForce::new(force, x), &SensorLayout::default().node_grid(), 3.0).unwrap();
        let c = decode_force(&d, 0.3, (0.0, 0.5), 0.01).unwrap();
        prop_assert_eq!(c, ContactForce::inactive());
    }

    #[test]
    fn label_rescaling_round_trips(lo in -200.0f64..200.0, width in 1e-3f64..400.0, u in 0.0f64..=1.0) {
        let hi = lo + width;
        let y = rescale_labels(u, lo, hi).unwrap();
        prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
        prop_assert!(((y - lo) / (hi - lo) - u).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_bounded_and_odd_about_half(z in -800.0f64..800.0) {
        let s = sigmoid(z);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_rows_are_independent(input in 1usize..6, output in 1usize..6, batch in 1usize..5, seed in any::<u64>()) {
        let d = Dense::new(input, output);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; d.param_count()];
        d.init(&mut params, &mut rng);
        let x: Vec<f64> = (0..batch * input).map(|i| (i as f64 * 0.37).sin()).collect();
        let (y, _) = d.forward(&params, &Tensor::new(&[batch, input], x.clone()).unwrap()).unwrap();
        for b in 0..batch {
            let row = Tensor::new(&[1, input], x[b * input..(b + 1) * input].to_vec()).unwrap();
            let (yb, _) = d.forward(&params, &row).unwrap();
            prop_assert_eq!(yb.data(), y.row(b));
        }
    }

    #[test]
    fn adam_ignores_zero_gradients_without_decay(params in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let mut p = params.clone();
        let cfg = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
        let mut adam = Adam::new(p.len());
        let zeros = vec![0.0; p.len()];
        for _ in 0..3 {
            adam.step(&mut p, &zeros, &cfg).unwrap();
        }
        prop_assert_eq!(p, params);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn split_partitions_scenarios(count in 5usize..120, fraction in 0.05f64..0.95, seed in any::<u64>()) {
        let samples = small_corpus(count, 1);
        let (train, test) = split_indices(&samples, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), count);
        prop_assert_eq!(train.len(), (fraction * count as f64).floor() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..count).collect::<Vec<_>>());
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(split_indices(&samples, fraction, seed).unwrap(), (train, test));
    }

    #[test]
    fn normalization_inverts(count in 10usize..60, seed in any::<u64>()) {
        let samples = small_corpus(count, seed);
        let stats = fit_norm_stats(&samples, (0.0, 0.5)).unwrap();
        for s in &samples {
            let z = normalize(&s.strains, &stats).unwrap();
            let back = denormalize(&z, &stats).unwrap();
            for (a, b) in back.iter().zip(&s.strains) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-6));
            }
        }
    }

    #[test]
    fn generated_labels_stay_in_the_workspace(count in 1usize..80, seed in any::<u64>()) {
        let ws = WorkspaceConfig::default();
        for s in small_corpus(count, seed) {
            s.validate(&ws).unwrap();
            prop_assert!(s.gt_curvatures.iter().all(|k| k.abs() <= ws.max_curvature));
            prop_assert!(s.gt_distribution.values.iter().all(|&v| v >= 0.0));
            if !s.gt_force.active {
                prop_assert_eq!(s.gt_force, ContactForce::inactive());
            }
        }
    }
}
