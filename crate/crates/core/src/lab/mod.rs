//! Monte-Carlo checks of the statistics behind the two-phase loss.
//!
//! Patches are flat `f64` vectors on the `[0, 1]` scale; noise levels are
//! quoted on the 0–255 scale. Trials are split into fixed-size chunks, each
//! with its own forked random stream, and chunk sums are merged in chunk
//! order, so results do not depend on the thread count.

mod ceiling;
mod residual;

pub use ceiling::{blindspot_sample_ceiling, CeilingReport};
pub use residual::{measure_residual, ResidualStats};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::Rng;

/// A fixed patch-to-patch mapping.
pub type Mapping<'a> = dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a;

const CHUNK: usize = 512;

fn chunked<T: Send>(trials: usize, rng: &Rng, f: impl Fn(usize, &mut Rng) -> T + Sync + Send) -> Vec<T> {
    let chunks = trials.div_ceil(CHUNK);
    exec::map_range(chunks, |c| {
        let mut r = rng.fork(c as u64);
        let n = CHUNK.min(trials - c * CHUNK);
        f(n, &mut r)
    })
}

fn add_noise(x: &[f64], sigma: f64, rng: &mut Rng) -> Vec<f64> {
    x.iter().map(|v| v + sigma * rng.normal()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Monte-Carlo estimates of both sides of the noisy-pair loss identity
/// `E|f(Y_i) - Y_j|^2 = E|f(Y_i) - X|^2 + E|Y_j - X|^2`, per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub lhs: f64,
    pub term1: f64,
    pub term2: f64,
}

impl Decomposition {
    /// `|lhs - (term1 + term2)| / lhs`, or 0 when every term is 0.
    pub fn relative_gap(&self) -> f64 {
        let gap = (self.lhs - self.term1 - self.term2).abs();
        if self.lhs == 0.0 {
            gap
        } else {
            gap / self.lhs
        }
    }
}

pub fn mc_loss_decomposition(
    f: &Mapping<'_>,
    clean: &[f64],
    sigma255: f64,
    trials: usize,
    rng: &Rng,
) -> Result<Decomposition> {
    if trials < 100 {
        return Err(Error::config(format!("{trials} trials; at least 100 are needed")));
    }
    if clean.is_empty() || sigma255 < 0.0 {
        return Err(Error::config("decomposition needs a non-empty patch and sigma >= 0"));
    }
    let sigma = sigma255 / 255.0;
    let rng = rng.stream("decomposition");
    let sums = chunked(trials, &rng, |n, r| {
        let mut acc = [0.0f64; 3];
        for _ in 0..n {
            let yi = add_noise(clean, sigma, r);
            let yj = add_noise(clean, sigma, r);
            let fy = f(&yi);
            acc[0] += sq_dist(&fy, &yj);
            acc[1] += sq_dist(&fy, clean);
            acc[2] += sq_dist(&yj, clean);
        }
        acc
    });
    let norm = (trials * clean.len()) as f64;
    let total = sums.iter().fold([0.0; 3], |a, s| [a[0] + s[0], a[1] + s[1], a[2] + s[2]]);
    Ok(Decomposition {
        lhs: total[0] / norm,
        term1: total[1] / norm,
        term2: total[2] / norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recurrence {
    /// All instances share the clean patch exactly.
    Exact,
    /// Instance `i > 0` is the clean patch plus a fixed offset field drawn
    /// once from `N(0, (delta/255)^2)`.
    Approximate { delta255: f64 },
}

/// `M` corresponding patches of one clean patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEnsemble {
    pub clean: Vec<f64>,
    pub m: usize,
    pub sigma_n255: f64,
    pub sigma_r255: f64,
    pub recurrence: Recurrence,
}

impl PatchEnsemble {
    /// Clean content of every instance. Instance 0 is the patch being denoised.
    pub fn instances(&self, rng: &Rng) -> Vec<Vec<f64>> {
        let mut r = rng.stream("recurrence");
        (0..self.m)
            .map(|i| match self.recurrence {
                Recurrence::Exact => self.clean.clone(),
                Recurrence::Approximate { .. } if i == 0 => self.clean.clone(),
                Recurrence::Approximate { delta255 } => add_noise(&self.clean, delta255 / 255.0, &mut r),
            })
            .collect()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || n == 0 || self.clean.is_empty() {
            return Err(Error::config("ensemble needs M >= 1, N >= 1 and a non-empty patch"));
        }
        if self.sigma_n255 < 0.0 || self.sigma_r255 < 0.0 {
            return Err(Error::config("noise levels must be non-negative"));
        }
        Ok(())
    }
}

/// One realization of the two-phase patch estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct XTilde {
    /// `(1/M) sum_i (1/N) sum_n Z_i^n`.
    pub xtilde: Vec<f64>,
    /// `Ybar_i = g(Y_i)` per instance.
    pub ybar: Vec<Vec<f64>>,
    /// `(1/N) sum_n Z_i^n` per instance.
    pub inner_means: Vec<Vec<f64>>,
}

fn realize(ens: &PatchEnsemble, instances: &[Vec<f64>], g: &Mapping<'_>, n: usize, r: &mut Rng) -> XTilde {
    let (sn, sr) = (ens.sigma_n255 / 255.0, ens.sigma_r255 / 255.0);
    let d = ens.clean.len();
    let mut xtilde = vec![0.0; d];
    let mut ybars = Vec::with_capacity(ens.m);
    let mut inner_means = Vec::with_capacity(ens.m);
    for clean in instances {
        let ybar = g(&add_noise(clean, sn, r));
        let mut mean = vec![0.0; d];
        for _ in 0..n {
            for (acc, yb) in mean.iter_mut().zip(&ybar) {
                *acc += yb + sr * r.normal();
            }
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        for (x, v) in xtilde.iter_mut().zip(&mean) {
            *x += v / ens.m as f64;
        }
        ybars.push(ybar);
        inner_means.push(mean);
    }
    XTilde {
        xtilde,
        ybar: ybars,
        inner_means,
    }
}

/// Draws `Y_i = X_i + n`, `Ybar_i = g(Y_i)`, `Z_i^n = Ybar_i + r^n` and
/// averages the `Z` over both `n` and `i`.
pub fn estimate_xtilde(ens: &PatchEnsemble, g: &Mapping<'_>, n: usize, rng: &Rng) -> Result<XTilde> {
    ens.validate(n)?;
    let instances = ens.instances(rng);
    Ok(realize(ens, &instances, g, n, &mut rng.stream("xtilde")))
}

/// Empirical summary of many estimator realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStats {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    /// Per-pixel mean of `X_tilde`.
    pub mean: Vec<f64>,
    /// Per-pixel variance of `X_tilde`.
    pub variance: Vec<f64>,
    /// Mean squared error of `X_tilde` against instance 0's clean patch.
    pub mse_to_target: f64,
}

impl EstimatorStats {
    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len() as f64
    }
}

/// Repeats [`estimate_xtilde`] `trials` times.
pub fn estimator_stats(ens: &PatchEnsemble, g: &Mapping<'_>, n: usize, trials: usize, rng: &Rng) -> Result<EstimatorStats> {
    ens.validate(n)?;
    if trials < 2 {
        return Err(Error::config("at least two trials are needed for a variance"));
    }
    let instances = ens.instances(rng);
    let d = ens.clean.len();
    let stream = rng.stream("stats");
    let parts = chunked(trials, &stream, |k, r| {
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d];
        let mut err = 0.0;
        for _ in 0..k {
            let x = realize(ens, &instances, g, n, r).xtilde;
            for j in 0..d {
                let v = x[j] - instances[0][j];
                s1[j] += v;
                s2[j] += v * v;
            }
            err += sq_dist(&x, &instances[0]);
        }
        (s1, s2, err)
    });
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut err = 0.0;
    for (a, b, e) in parts {
        for j in 0..d {
            s1[j] += a[j];
            s2[j] += b[j];
        }
        err += e;
    }
    let t = trials as f64;
    // sums are of X_tilde - X_0, which keeps the variance free of cancellation
    let shifted: Vec<f64> = s1.iter().map(|v| v / t).collect();
    let variance = s2
        .iter()
        .zip(&shifted)
        .map(|(q, m)| ((q - t * m * m) / (t - 1.0)).max(0.0))
        .collect();
    let mean = shifted.iter().zip(&instances[0]).map(|(m, x)| m + x).collect();
    Ok(EstimatorStats {
        m: ens.m,
        n,
        trials,
        mean,
        variance,
        mse_to_target: err / (t * d as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub n: usize,
    /// Mean per-pixel `|innerMean - Ybar|^2`.
    pub error: f64,
    /// `sigma_r^2 / N`.
    pub predicted: f64,
}

/// Error of the inner re-noising average as a function of `N`.
pub fn inner_mean_convergence(
    ens: &PatchEnsemble,
    g: &Mapping<'_>,
    n_values: &[usize],
    trials: usize,
    rng: &Rng,
) -> Result<Vec<ConvergencePoint>> {
    let instances = ens.instances(rng);
    let d = ens.clean.len() as f64;
    let sr = ens.sigma_r255 / 255.0;
    n_values
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            ens.validate(n)?;
            let stream = rng.stream("convergence").fork(idx as u64);
            let sums = chunked(trials, &stream, |k, r| {
                let mut acc = 0.0;
                for _ in 0..k {
                    let est = realize(ens, &instances, g, n, r);
                    for (m, yb) in est.inner_means.iter().zip(&est.ybar) {
                        acc += sq_dist(m, yb);
                    }
                }
                acc
            });
            let total: f64 = sums.iter().sum();
            Ok(ConvergencePoint {
                n,
                error: total / (trials as f64 * ens.m as f64 * d),
                predicted: sr * sr / n as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `log(error)` against `log(n)`.
pub fn loglog_slope(points: &[ConvergencePoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceLabConfig {
    pub sigma_n255: f64,
    /// Residual noise level of the oracle denoiser `g`.
    pub sigma_residual255: f64,
    /// Re-noising level of `r`.
    pub sigma_r255: f64,
    /// Re-noising draws `N` per instance.
    pub n: usize,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub patch_len: usize,
    pub recurrence: Recurrence,
}

impl Default for VarianceLabConfig {
    fn default() -> Self {
        Self {
            sigma_n255: 20.0,
            sigma_residual255: 8.0,
            sigma_r255: 20.0,
            n: 64,
            m_values: vec![1, 4, 16],
            trials: 10_000,
            patch_len: 16,
            recurrence: Recurrence::Exact,
        }
    }
}

/// One row of the variance table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub m: usize,
    pub n: usize,
    pub sigma_n255: f64,
    pub sigma_r255: f64,
    pub var_empirical: f64,
    /// `Var(n')/M + sigma_r^2/(M N)` with `Var(n')` measured.
    pub var_predicted: f64,
    /// Measured residual variance of `g`.
    pub residual_var: f64,
    pub mse_to_target: f64,
}

impl VarianceRow {
    pub fn ratio(&self) -> f64 {
        if self.var_predicted == 0.0 {
            if self.var_empirical == 0.0 { 1.0 } else { f64::INFINITY }
        } else {
            self.var_empirical / self.var_predicted
        }
    }
}

/// Compares the empirical variance of the patch estimator with the
/// factor-`M` law, using an oracle denoiser that leaves residual noise
/// `n' = (sigma_residual / sigma_n) n`.
pub fn variance_reduction_check(cfg: &VarianceLabConfig, rng: &Rng) -> Result<Vec<VarianceRow>> {
    if cfg.trials < 2 || cfg.patch_len == 0 || cfg.n == 0 || cfg.m_values.contains(&0) {
        return Err(Error::config("variance lab needs trials >= 2, N >= 1, M >= 1"));
    }
    let mut clean_rng = rng.stream("variance-clean");
    let clean: Vec<f64> = (0..cfg.patch_len).map(|_| clean_rng.uniform_range(0.2, 0.8)).collect();
    let shrink = if cfg.sigma_n255 > 0.0 {
        cfg.sigma_residual255 / cfg.sigma_n255
    } else {
        0.0
    };
    let residual_var = {
        // n' = g(X + n) - X, measured rather than assumed
        let mut r = rng.stream("variance-residual");
        let sn = cfg.sigma_n255 / 255.0;
        let draws = 20_000usize;
        let mut acc = 0.0;
        for _ in 0..draws {
            let n = sn * r.normal();
            let nprime = shrink * n;
            acc += nprime * nprime;
        }
        acc / draws as f64
    };
    let sr = cfg.sigma_r255 / 255.0;
    cfg.m_values
        .iter()
        .enumerate()
        .map(|(idx, &m)| {
            let ens = PatchEnsemble {
                clean: clean.clone(),
                m,
                sigma_n255: cfg.sigma_n255,
                sigma_r255: cfg.sigma_r255,
                recurrence: cfg.recurrence,
            };
            let instances = ens.instances(rng);
            let c0 = clean.clone();
            // oracle g for instance i needs its own clean content; the
            // shrink map is affine, so g(Y) = X_i + shrink (Y - X_i)
            let stats = {
                let d = clean.len();
                let stream = rng.stream("variance").fork(idx as u64);
                let parts = chunked(cfg.trials, &stream, |k, r| {
                    let mut s1 = vec![0.0; d];
                    let mut s2 = vec![0.0; d];
                    let mut err = 0.0;
                    for _ in 0..k {
                        let mut x = vec![0.0; d];
                        for inst in &instances {
                            for j in 0..d {
                                let noisy = inst[j] + cfg.sigma_n255 / 255.0 * r.normal();
                                let ybar = inst[j] + shrink * (noisy - inst[j]);
                                let mut z = 0.0;
                                for _ in 0..cfg.n {
                                    z += ybar + sr * r.normal();
                                }
                                x[j] += z / cfg.n as f64 / m as f64;
                            }
                        }
                        for j in 0..d {
                            let v = x[j] - c0[j];
                            s1[j] += v;
                            s2[j] += v * v;
                        }
                        err += sq_dist(&x, &c0);
                    }
                    (s1, s2, err)
                });
                let mut s1 = vec![0.0; d];
                let mut s2 = vec![0.0; d];
                let mut err = 0.0;
                for (a, b, e) in parts {
                    for j in 0..d {
                        s1[j] += a[j];
                        s2[j] += b[j];
                    }
                    err += e;
                }
                let t = cfg.trials as f64;
                let var: f64 = (0..d)
                    .map(|j| {
                        let mean = s1[j] / t;
                        ((s2[j] - t * mean * mean) / (t - 1.0)).max(0.0)
                    })
                    .sum::<f64>()
                    / d as f64;
                (var, err / (t * d as f64))
            };
            Ok(VarianceRow {
                m,
                n: cfg.n,
                sigma_n255: cfg.sigma_n255,
                sigma_r255: cfg.sigma_r255,
                var_empirical: stats.0,
                var_predicted: residual_var / m as f64 + sr * sr / (m * cfg.n) as f64,
                residual_var,
                mse_to_target: stats.1,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch() -> Vec<f64> {
        (0..16).map(|i| 0.3 + 0.02 * i as f64).collect()
    }

    #[test]
    fn identity_decomposition() {
        let id = |y: &[f64]| y.to_vec();
        let d = mc_loss_decomposition(&id, &patch(), 20.0, 100_000 / 16, &Rng::new(1)).unwrap();
        let s2 = (20.0f64 / 255.0).powi(2);
        assert!((d.lhs / (2.0 * s2) - 1.0).abs() < 0.02, "{d:?}");
        assert!((d.term1 / s2 - 1.0).abs() < 0.02);
        assert!((d.term2 / s2 - 1.0).abs() < 0.02);
        assert!(d.relative_gap() <= 0.02);
    }

    #[test]
    fn oracle_decomposition() {
        let clean = patch();
        let c = clean.clone();
        let oracle = move |_: &[f64]| c.clone();
        let d = mc_loss_decomposition(&oracle, &clean, 20.0, 5000, &Rng::new(2)).unwrap();
        let s2 = (20.0f64 / 255.0).powi(2);
        assert_eq!(d.term1, 0.0);
        assert!((d.lhs / s2 - 1.0).abs() < 0.03);
    }

    #[test]
    fn zero_sigma_decomposition_and_trial_floor() {
        let id = |y: &[f64]| y.to_vec();
        let d = mc_loss_decomposition(&id, &patch(), 0.0, 100, &Rng::new(3)).unwrap();
        assert_eq!((d.lhs, d.term1, d.term2), (0.0, 0.0, 0.0));
        assert_eq!(d.relative_gap(), 0.0);
        assert!(mc_loss_decomposition(&id, &patch(), 20.0, 99, &Rng::new(3)).is_err());
    }

    #[test]
    fn single_noiseless_instance_returns_ybar() {
        let ens = PatchEnsemble {
            clean: patch(),
            m: 1,
            sigma_n255: 20.0,
            sigma_r255: 0.0,
            recurrence: Recurrence::Exact,
        };
        let id = |y: &[f64]| y.to_vec();
        let est = estimate_xtilde(&ens, &id, 1, &Rng::new(4)).unwrap();
        assert_eq!(est.xtilde, est.ybar[0]);
        assert!(estimate_xtilde(&ens, &id, 0, &Rng::new(4)).is_err());
    }

    #[test]
    fn identity_g_variance_is_sigma_over_m() {
        let ens = PatchEnsemble {
            clean: patch(),
            m: 16,
            sigma_n255: 20.0,
            sigma_r255: 0.0,
            recurrence: Recurrence::Exact,
        };
        let id = |y: &[f64]| y.to_vec();
        let st = estimator_stats(&ens, &id, 1, 4000, &Rng::new(5)).unwrap();
        let expect = (20.0f64 / 255.0).powi(2) / 16.0;
        assert!((st.mean_variance() / expect - 1.0).abs() < 0.1, "{}", st.mean_variance());
    }

    #[test]
    fn inner_mean_error_follows_one_over_n() {
        let ens = PatchEnsemble {
            clean: patch(),
            m: 4,
            sigma_n255: 20.0,
            sigma_r255: 20.0,
            recurrence: Recurrence::Exact,
        };
        let id = |y: &[f64]| y.to_vec();
        let pts = inner_mean_convergence(&ens, &id, &[1, 10, 100, 1000], 200, &Rng::new(6)).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].error < w[0].error);
        }
        assert!((loglog_slope(&pts) + 1.0).abs() < 0.1);
    }

    #[test]
    fn variance_law_for_m() {
        let cfg = VarianceLabConfig { trials: 4000, ..Default::default() };
        let rows = variance_reduction_check(&cfg, &Rng::new(7)).unwrap();
        for r in &rows {
            assert!((r.ratio() - 1.0).abs() < 0.1, "{r:?}");
        }
        let ratio = rows[2].var_empirical / rows[0].var_empirical;
        assert!((ratio * 16.0 - 1.0).abs() < 0.2);
    }

    #[test]
    fn zero_residual_and_renoise_gives_zero_variance() {
        let cfg = VarianceLabConfig {
            sigma_residual255: 0.0,
            sigma_r255: 0.0,
            trials: 50,
            ..Default::default()
        };
        let rows = variance_reduction_check(&cfg, &Rng::new(8)).unwrap();
        assert!(rows.iter().all(|r| r.var_empirical == 0.0 && r.var_predicted == 0.0));
    }

    #[test]
    fn approximate_recurrence_adds_bias() {
        let base = VarianceLabConfig { trials: 1000, m_values: vec![16], ..Default::default() };
        let exact = variance_reduction_check(&base, &Rng::new(9)).unwrap()[0];
        let approx = variance_reduction_check(
            &VarianceLabConfig { recurrence: Recurrence::Approximate { delta255: 20.0 }, ..base },
            &Rng::new(9),
        )
        .unwrap()[0];
        assert!(approx.mse_to_target > 1.5 * exact.mse_to_target);
    }

    #[test]
    fn seeded_lab_is_reproducible() {
        let cfg = VarianceLabConfig { trials: 700, ..Default::default() };
        assert_eq!(
            variance_reduction_check(&cfg, &Rng::new(10)).unwrap(),
            variance_reduction_check(&cfg, &Rng::new(10)).unwrap()
        );
    }
}
