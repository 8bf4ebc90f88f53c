use super::chunked;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Variance of the two kinds of training target for one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeilingReport {
    /// Target = an 8-bit noisy neighbour from the 5x5 window (centre excluded).
    pub neighbor_target_var: f64,
    /// Target = the centre of `Ybar` with residual noise `sigma_residual`.
    pub two_phase_target_var: f64,
    /// Distinct neighbour target values seen; never more than 256.
    pub distinct_neighbor_values: usize,
}

/// Measures how spread out the blind-spot target is compared with the
/// two-phase target on the centre pixel of an 8-bit `side`x`side` patch.
pub fn blindspot_sample_ceiling(
    patch: &[u8],
    side: usize,
    sigma_n255: f64,
    sigma_residual255: f64,
    trials: usize,
    rng: &Rng,
) -> Result<CeilingReport> {
    if side < 5 || patch.len() != side * side {
        return Err(Error::config("patch must be square and at least 5x5"));
    }
    if trials < 2 || sigma_n255 < 0.0 || sigma_residual255 < 0.0 {
        return Err(Error::config("ceiling needs trials >= 2 and non-negative noise"));
    }
    let c = side / 2;
    // values are accumulated relative to the patch centre to avoid cancellation
    let shift = patch[c * side + c] as f64 / 255.0;
    let stream = rng.stream("ceiling");
    let parts = chunked(trials, &stream, |k, r| {
        let mut nb = [0.0f64; 2];
        let mut tp = [0.0f64; 2];
        let mut seen = [false; 256];
        for _ in 0..k {
            let (dy, dx) = loop {
                let dy = r.below(5) as isize - 2;
                let dx = r.below(5) as isize - 2;
                if (dy, dx) != (0, 0) {
                    break (dy, dx);
                }
            };
            let idx = ((c as isize + dy) as usize) * side + (c as isize + dx) as usize;
            let noisy = (patch[idx] as f64 + sigma_n255 * r.normal()).round().clamp(0.0, 255.0);
            seen[noisy as usize] = true;
            let t = noisy / 255.0 - shift;
            nb[0] += t;
            nb[1] += t * t;
            let tp_val = sigma_residual255 * r.normal() / 255.0;
            tp[0] += tp_val;
            tp[1] += tp_val * tp_val;
        }
        (nb, tp, seen)
    });
    let mut nb = [0.0; 2];
    let mut tp = [0.0; 2];
    let mut seen = [false; 256];
    for (a, b, s) in parts {
        nb[0] += a[0];
        nb[1] += a[1];
        tp[0] += b[0];
        tp[1] += b[1];
        for (dst, src) in seen.iter_mut().zip(s) {
            *dst |= src;
        }
    }
    let t = trials as f64;
    let var = |s: [f64; 2]| ((s[1] - s[0] * s[0] / t) / (t - 1.0)).max(0.0);
    Ok(CeilingReport {
        neighbor_target_var: var(nb),
        two_phase_target_var: var(tp),
        distinct_neighbor_values: seen.iter().filter(|s| **s).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_patch_noise_levels() {
        let flat = vec![128u8; 49];
        let rep = blindspot_sample_ceiling(&flat, 7, 20.0, 8.0, 20_000, &Rng::new(1)).unwrap();
        let noise = (20.0f64 / 255.0).powi(2);
        assert!((rep.neighbor_target_var / noise - 1.0).abs() < 0.05, "{rep:?}");
        assert!((rep.two_phase_target_var / (8.0f64 / 255.0).powi(2) - 1.0).abs() < 0.05);
        assert!(rep.two_phase_target_var < rep.neighbor_target_var);
        assert!(rep.distinct_neighbor_values <= 256);
    }

    #[test]
    fn noiseless_flat_patch() {
        let flat = vec![90u8; 25];
        let rep = blindspot_sample_ceiling(&flat, 5, 0.0, 0.0, 100, &Rng::new(2)).unwrap();
        assert_eq!(rep.neighbor_target_var, 0.0);
        assert_eq!(rep.two_phase_target_var, 0.0);
        assert_eq!(rep.distinct_neighbor_values, 1);
    }

    #[test]
    fn texture_adds_neighbor_variance() {
        let flat = vec![128u8; 49];
        let textured: Vec<u8> = (0..49).map(|i| if (i / 7 + i % 7) % 2 == 0 { 60 } else { 200 }).collect();
        let a = blindspot_sample_ceiling(&flat, 7, 20.0, 8.0, 20_000, &Rng::new(3)).unwrap();
        let b = blindspot_sample_ceiling(&textured, 7, 20.0, 8.0, 20_000, &Rng::new(3)).unwrap();
        assert!(b.neighbor_target_var >= a.neighbor_target_var);
    }

    #[test]
    fn rejects_tiny_patches() {
        assert!(blindspot_sample_ceiling(&[0; 9], 3, 1.0, 1.0, 10, &Rng::new(0)).is_err());
    }
}
