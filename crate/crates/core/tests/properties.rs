use attnboot::dump::{read_dump, write_dump, Manifest, Role};
use attnboot::inference::{default_lambda_grid, lfdr, p_values};
use attnboot::metrics::suppression_factor;
use attnboot::synthetic::textured_image;
use attnboot::*;
use proptest::prelude::*;

fn image_strategy() -> impl Strategy<Value = Image> {
    (1usize..6, 1usize..6).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f64..=1.0, h * w * 3).prop_map(move |d| Image::new(h * 4, w * 4, upscale(&d, h, w)).unwrap())
    })
}

/// Each random pixel becomes a 4x4 block so that patch variances are nonzero
/// only across blocks.
fn upscale(d: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len() * 16);
    for r in 0..h * 4 {
        for c in 0..w * 4 {
            let i = (r / 4) * w + c / 4;
            out.extend_from_slice(&d[i * 3..i * 3 + 3]);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dump_round_trip_is_bit_exact(data in prop::collection::vec(any::<f32>(), 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new(Role::ScalarSeries, vec![data.len()]);
        let path = write_dump(dir.path().join("x"), &manifest, &data).unwrap();
        let back = read_dump(&path).unwrap();
        prop_assert_eq!(back.manifest, manifest);
        let a: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_outputs_stay_in_unit_interval(img in image_strategy(), seed in any::<u64>(), width in 0.1f64..4.0) {
        let stats = channel_stats(&img);
        for v in parametric_null(&img, &stats, width, seed).data() {
            prop_assert!((0.0..=1.0).contains(v));
        }
        let resampled = nonparametric_null(&img, seed);
        let originals: Vec<&[f64]> = img.pixels().collect();
        for px in resampled.pixels() {
            prop_assert!(originals.contains(&px));
        }
    }

    #[test]
    fn postprocessed_maps_are_min_max_normalized(img in image_strategy()) {
        let pa = toy_attention(&img, 4).unwrap();
        let map = postprocess(&pa, img.height(), img.width()).unwrap();
        let s = map.scores();
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > 0.0 {
            prop_assert_eq!((lo, hi), (0.0, 1.0));
        } else {
            prop_assert!(s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn p_values_decrease_with_the_score(
        obs in prop::collection::vec(-5.0f64..5.0, 1..100),
        null in prop::collection::vec(-5.0f64..5.0, 1..100),
    ) {
        let p = p_values(&obs, &null).unwrap();
        for i in 0..obs.len() {
            prop_assert!((0.0..=1.0).contains(&p[i]));
            for j in 0..obs.len() {
                if obs[i] >= obs[j] {
                    prop_assert!(p[i] <= p[j]);
                }
            }
        }
        let l = lfdr(&obs, &null, 21).unwrap();
        prop_assert!(l.iter().all(|v| (0.0..=1.0).contains(v)));
        let pi0 = estimate_pi0(&p, &default_lambda_grid()).unwrap();
        prop_assert!((0.0..=1.0).contains(&pi0));
    }

    #[test]
    fn survivor_sets_are_nested(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..=1.0), 1..80),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let small = threshold_p(&a, &p, lo).unwrap();
        let large = threshold_p(&a, &p, hi).unwrap();
        for i in 0..a.len() {
            // shrinkage only: each score is kept or zeroed
            prop_assert!(small[i] == 0.0 || small[i] == a[i]);
            if small[i] != 0.0 {
                prop_assert_eq!(large[i], a[i]);
            }
        }
    }

    #[test]
    fn suppression_factor_is_scale_invariant(
        pairs in prop::collection::vec((0.1f64..100.0, 0.0f64..100.0), 1..30),
        k in 0.01f64..100.0,
    ) {
        let (before, after): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let d = suppression_factor(&before, &after).unwrap();
        let b2: Vec<f64> = before.iter().map(|v| v * k).collect();
        let a2: Vec<f64> = after.iter().map(|v| v * k).collect();
        let d2 = suppression_factor(&b2, &a2).unwrap();
        prop_assert!((d - d2).abs() <= 1e-12 * d.abs().max(1.0));
    }

    #[test]
    fn diffuse_mask_ignores_affine_rescaling(seed in any::<u64>(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let mut rng = attnboot::rng::stream(seed);
        let field = attnboot::simulate::diffuse_field(24, 32, 3.0, &mut rng);
        let moved: Vec<f64> = field.iter().map(|v| v * scale + shift).collect();
        prop_assert_eq!(
            attnboot::simulate::top_k_indices(&field, 50),
            attnboot::simulate::top_k_indices(&moved, 50)
        );
    }
}

#[test]
fn reports_satisfy_invariants_on_textured_images() {
    for seed in 0..4 {
        let img = textured_image(64, 96, seed);
        let report = analyze(&img, &AttentionSource::toy(8), &BootstrapConfig::default()).unwrap();
        assert!(report.p.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(report.lfdr.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((0.0..=1.0).contains(&report.pi0));
        let a = report.attention.scores();
        let mut order: Vec<usize> = (0..a.len()).collect();
        order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
        for w in order.windows(2) {
            assert!(report.p[w[1]] <= report.p[w[0]]);
        }
        let again = analyze(&img, &AttentionSource::toy(8), &BootstrapConfig::default()).unwrap();
        assert_eq!(report, again);
    }
}
