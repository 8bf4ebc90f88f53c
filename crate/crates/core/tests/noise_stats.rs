use mdn_core::corpus::{tiled_texture, TextureConfig};
use mdn_core::noise::{add_gaussian_noise, NoiseSpec};
use mdn_core::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest gap between the empirical CDF of `samples` and `cdf`.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn added_noise_is_gaussian_and_signal_independent() {
    let cfg = TextureConfig {
        height: 256,
        width: 256,
        ..Default::default()
    };
    let x = tiled_texture(&cfg, &mut Rng::new(11)).unwrap();
    let (y, sigma) = add_gaussian_noise(&x, &NoiseSpec::fixed(20.0), &mut Rng::new(12)).unwrap();
    assert_eq!(sigma, 20.0);
    let s = 20.0 / 255.0;
    let residual: Vec<f64> = y.data().iter().zip(x.data()).map(|(a, b)| (a - b) as f64).collect();
    let n = residual.len() as f64;

    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let d = ks_statistic(residual.iter().map(|r| r / s).collect(), |t| std_normal.cdf(t));
    // 99.9% critical value of the one-sample KS statistic
    let critical = 1.949 / n.sqrt();
    assert!(d < critical, "KS statistic {d} exceeds {critical}");

    let xm = x.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let rm = residual.iter().sum::<f64>() / n;
    let cov: f64 = x.data().iter().zip(&residual).map(|(&a, r)| (a as f64 - xm) * (r - rm)).sum::<f64>() / n;
    let sx = (x.data().iter().map(|&v| (v as f64 - xm).powi(2)).sum::<f64>() / n).sqrt();
    let sr = (residual.iter().map(|r| (r - rm).powi(2)).sum::<f64>() / n).sqrt();
    let corr = cov / (sx * sr);
    assert!(corr.abs() < 5.0 / n.sqrt(), "signal/noise correlation {corr}");
}

#[test]
fn blind_levels_are_uniform() {
    let spec = NoiseSpec::uniform(50.0);
    let mut rng = Rng::new(3);
    let draws: Vec<f64> = (0..20_000).map(|_| spec.draw_sigma(&mut rng)).collect();
    assert!(draws.iter().all(|&s| (0.0..=50.0).contains(&s)));
    let d = ks_statistic(draws, |t| (t / 50.0).clamp(0.0, 1.0));
    assert!(d < 1.949 / (20_000f64).sqrt(), "KS statistic {d}");
}
