use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::noise::{add_gaussian_noise, NoiseSpec};
use crate::rng::Rng;

/// Empirical noise and residual statistics of a denoiser on a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    /// `Var(n)` of the injected noise.
    pub noise_var: f64,
    /// `Var(n')` with `n' = g(X + n) - X`.
    pub residual_var: f64,
    /// Mean of `n'`.
    pub residual_mean: f64,
    /// Horizontal lag-1 correlation of `n'`; near 0 for white residuals.
    pub residual_lag1_corr: f64,
}

/// Measures the residual noise `n' = g(X + n) - X` of `g` over `clean`.
pub fn measure_residual(
    g: impl Fn(&ImageBuffer) -> Result<ImageBuffer>,
    clean: &[ImageBuffer],
    sigma255: f64,
    rng: &Rng,
) -> Result<ResidualStats> {
    if clean.is_empty() {
        return Err(Error::Data("residual measurement needs at least one image".into()));
    }
    let mut noise_rng = rng.stream("residual");
    let (mut n_s1, mut n_s2, mut r_s1, mut r_s2, mut count) = (0.0, 0.0, 0.0, 0.0, 0usize);
    let mut residuals = Vec::with_capacity(clean.len());
    for x in clean {
        let (y, _) = add_gaussian_noise(x, &NoiseSpec::fixed(sigma255), &mut noise_rng)?;
        let ybar = g(&y)?;
        ybar.ensure_same_dims(x)?;
        let res: Vec<f64> = ybar.data().iter().zip(x.data()).map(|(a, b)| (*a - *b) as f64).collect();
        for ((yv, xv), rv) in y.data().iter().zip(x.data()).zip(&res) {
            let n = (*yv - *xv) as f64;
            n_s1 += n;
            n_s2 += n * n;
            r_s1 += rv;
            r_s2 += rv * rv;
            count += 1;
        }
        residuals.push((x.width(), res));
    }
    let c = count as f64;
    let residual_mean = r_s1 / c;
    let residual_var = r_s2 / c - residual_mean * residual_mean;
    let (mut cov, mut pairs) = (0.0, 0usize);
    for (w, res) in &residuals {
        for row in res.chunks_exact(*w) {
            for pair in row.windows(2) {
                cov += (pair[0] - residual_mean) * (pair[1] - residual_mean);
                pairs += 1;
            }
        }
    }
    let lag1 = if residual_var > 0.0 && pairs > 0 {
        cov / pairs as f64 / residual_var
    } else {
        0.0
    };
    Ok(ResidualStats {
        noise_var: n_s2 / c - (n_s1 / c).powi(2),
        residual_var,
        residual_mean,
        residual_lag1_corr: lag1,
    })
}
