use mdn_core::image::{clip01, psnr, ImageBuffer};
use mdn_core::lab::mc_loss_decomposition;
use mdn_core::nn::{conv2d_forward, interpolate, network_forward, ConvLayer};
use mdn_core::resize::{resize_bilinear, resize_to};
use mdn_core::{Arch, NetworkParams, Rng, Shape4, Tensor4};
use proptest::prelude::*;

fn image(h: usize, w: usize, seed: u64, lo: f64, hi: f64) -> ImageBuffer {
    let mut r = Rng::new(seed);
    let data = (0..h * w).map(|_| r.uniform_range(lo, hi) as f32).collect();
    ImageBuffer::new_unclipped(h, w, 1, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conv_preserves_spatial_shape(
        batch in 1usize..3, cin in 1usize..4, cout in 1usize..4,
        h in 1usize..9, w in 1usize..9, k in prop::sample::select(vec![1usize, 3, 5]), seed in any::<u64>(),
    ) {
        let mut layer = ConvLayer::zeros(cin, cout, k).unwrap();
        let mut r = Rng::new(seed);
        layer.weights.iter_mut().for_each(|v| *v = r.normal() as f32);
        let input = Tensor4::filled(Shape4::new(batch, cin, h, w), 0.5);
        let out = conv2d_forward(&input, &layer).unwrap();
        prop_assert_eq!(out.shape(), Shape4::new(batch, cout, h, w));
        prop_assert!(out.is_finite());
    }

    #[test]
    fn network_output_matches_input_shape(
        depth in 1usize..4, width in 1usize..6, batch in 1usize..3,
        h in 3usize..10, w in 3usize..10, seed in any::<u64>(),
    ) {
        let arch = Arch { depth, width, kernel: 3, channels: 1 };
        let params = NetworkParams::init(arch, &mut Rng::new(seed)).unwrap();
        let y = Tensor4::filled(Shape4::new(batch, 1, h, w), 0.3);
        let (x, _) = network_forward(&params, &y).unwrap();
        prop_assert_eq!(x.shape(), y.shape());
    }

    #[test]
    fn interpolation_endpoints_are_exact(seed_a in any::<u64>(), seed_b in any::<u64>()) {
        let arch = Arch { depth: 2, width: 3, kernel: 3, channels: 1 };
        let mut a = NetworkParams::init(arch, &mut Rng::new(seed_a)).unwrap();
        let mut b = NetworkParams::init(arch, &mut Rng::new(seed_b)).unwrap();
        a.layers_mut()[1].weights.iter_mut().for_each(|v| *v = 0.37);
        b.layers_mut()[1].weights.iter_mut().for_each(|v| *v = -1.3e-7);
        prop_assert_eq!(interpolate(&a, &b, 0.0).unwrap(), a.clone());
        prop_assert_eq!(interpolate(&a, &b, 1.0).unwrap(), b);
    }

    #[test]
    fn clip_is_idempotent_and_bounded(h in 1usize..8, w in 1usize..8, seed in any::<u64>()) {
        let x = image(h, w, seed, -1.0, 2.0);
        let once = clip01(&x);
        prop_assert!(once.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(!once.is_unclipped());
        prop_assert_eq!(clip01(&once), once);
    }

    #[test]
    fn psnr_falls_as_error_grows(h in 2usize..8, w in 2usize..8, seed in any::<u64>(), k in 1.1f32..4.0) {
        let x = clip01(&image(h, w, seed, 0.3, 0.7));
        let noise = image(h, w, seed ^ 0x5a5a, -0.05, 0.05);
        let shifted = |scale: f32| {
            let data = x.data().iter().zip(noise.data()).map(|(a, d)| a + scale * d).collect();
            ImageBuffer::new(h, w, 1, data).unwrap()
        };
        let near = psnr(&x, &shifted(1.0)).unwrap();
        let far = psnr(&x, &shifted(k)).unwrap();
        prop_assert!(far < near, "{far} >= {near}");
        prop_assert!(psnr(&x, &x).unwrap() >= near);
    }

    #[test]
    fn resize_keeps_constants(v in 0.0f32..1.0, h in 8usize..24, w in 8usize..24, s in 0.5f64..2.0) {
        let x = ImageBuffer::filled(h, w, 1, v).unwrap();
        if let Ok(y) = resize_bilinear(&x, s) {
            prop_assert!(y.data().iter().all(|p| (p - v).abs() <= 1e-6));
        }
        let z = resize_to(&x, h / 2 + 1, w + 3).unwrap();
        prop_assert_eq!(z.dims(), (h / 2 + 1, w + 3, 1));
        prop_assert!(z.data().iter().all(|p| (p - v).abs() <= 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The noisy-pair loss identity holds for arbitrary fixed mappings; here
    /// a random lookup table over 8 intensity bins.
    #[test]
    fn decomposition_holds_for_table_mappings(
        table in prop::collection::vec(0.0f64..1.0, 8),
        clean in prop::collection::vec(0.1f64..0.9, 4),
        sigma in 5.0f64..40.0,
        seed in any::<u64>(),
    ) {
        let f = move |y: &[f64]| -> Vec<f64> {
            y.iter().map(|v| table[((v.clamp(0.0, 0.999)) * 8.0) as usize]).collect()
        };
        let d = mc_loss_decomposition(&f, &clean, sigma, 20_000, &Rng::new(seed)).unwrap();
        prop_assert!(d.relative_gap() <= 0.025, "{d:?}");
    }
}
