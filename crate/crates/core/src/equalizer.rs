//! Final-stage source recovery and evaluation metrics.
//!
//! Equalization stacks the per-branch convolution systems
//! `y_i ≈ H_i s` (zero-prehistory banded operators built from the
//! estimated taps) and solves the joint least-squares problem; MMSE adds
//! the noise variance to the normal equations. Blind estimates carry a
//! global scale/sign ambiguity, so every metric aligns scale first.

use crate::linalg::{Matrix, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualizerMethod {
    /// Zero-forcing: plain joint least squares.
    Zf,
    /// Least squares regularized by the noise variance.
    Mmse,
}

#[derive(Debug, Clone)]
pub struct EqualizerResult {
    /// Recovered source on the valid window (the first `L - 1` transient
    /// samples of the zero-prehistory convention are dropped).
    pub s_hat: Vec<f64>,
    pub method: EqualizerMethod,
    /// Fixed equalization delay.
    pub delay: usize,
}

/// Recovers the common source from per-branch intermediate signals and
/// channel estimates.
pub fn equalize(
    channels: &[Vector],
    intermediates: &[Vec<f64>],
    method: EqualizerMethod,
    noise_var: Option<f64>,
) -> Result<EqualizerResult> {
    if channels.is_empty() || channels.len() != intermediates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels vs {} intermediate signals",
            channels.len(),
            intermediates.len()
        )));
    }
    let n = intermediates[0].len();
    let order = channels[0].len();
    if intermediates.iter().any(|y| y.len() != n) || channels.iter().any(|h| h.len() != order) {
        return Err(Error::DimensionMismatch(
            "branches must share signal length and channel order".into(),
        ));
    }
    if n < order {
        return Err(Error::TooShort { need: order, got: n });
    }
    let reg = match method {
        EqualizerMethod::Zf => 0.0,
        EqualizerMethod::Mmse => {
            let v = noise_var.ok_or(Error::InvalidConfig(
                "mmse equalization requires a noise variance".into(),
            ))?;
            if v < 0.0 {
                return Err(Error::InvalidConfig("noise variance must be >= 0".into()));
            }
            v
        }
    };

    // Normal equations of the stacked system: sum_i H_i^T H_i (+ reg I).
    let mut at_a = Matrix::identity(n, n) * reg;
    let mut at_b = Vector::zeros(n);
    for (h, y) in channels.iter().zip(intermediates) {
        let hi = Matrix::from_fn(n, n, |r, c| {
            if r >= c && r - c < order {
                h[r - c]
            } else {
                0.0
            }
        });
        at_a += hi.transpose() * &hi;
        at_b += hi.transpose() * Vector::from_column_slice(y);
    }
    let chol = nalgebra::Cholesky::new(at_a).ok_or(Error::Unequalizable)?;
    let s_full = chol.solve(&at_b);
    Ok(EqualizerResult {
        s_hat: s_full.as_slice()[order - 1..].to_vec(),
        method,
        delay: 0,
    })
}

fn check_pair(s_true: &[f64], s_hat: &[f64]) -> Result<f64> {
    if s_true.len() != s_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true vs {} estimated samples",
            s_true.len(),
            s_hat.len()
        )));
    }
    let denom: f64 = s_hat.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::Degenerate("estimate is identically zero"));
    }
    Ok(denom)
}

/// Optimal alignment gain `argmin_g ||true - g * hat||^2`; absorbs both
/// scale and sign.
fn align_gain(s_true: &[f64], s_hat: &[f64]) -> Result<f64> {
    let denom = check_pair(s_true, s_hat)?;
    let num: f64 = s_true.iter().zip(s_hat).map(|(a, b)| a * b).sum();
    Ok(num / denom)
}

/// Scale-aligned normalized mean-square error,
/// `min_g ||true - g * hat||^2 / ||true||^2`, always in [0, 1].
pub fn aligned_mse(s_true: &[f64], s_hat: &[f64]) -> Result<f64> {
    let g = align_gain(s_true, s_hat)?;
    let num: f64 = s_true
        .iter()
        .zip(s_hat)
        .map(|(a, b)| (a - g * b).powi(2))
        .sum();
    let denom: f64 = s_true.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::Degenerate("reference signal is identically zero"));
    }
    Ok(num / denom)
}

/// Bit error rate of a hard-sliced estimate against a {-1, +1} reference,
/// after sign alignment.
pub fn ber(s_true: &[f64], s_hat: &[f64]) -> Result<f64> {
    if s_true.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidConfig(
            "bit error rate requires a binary reference".into(),
        ));
    }
    let g = align_gain(s_true, s_hat)?;
    let errors = s_true
        .iter()
        .zip(s_hat)
        .filter(|(&t, &e)| {
            let sliced = if g * e >= 0.0 { 1.0 } else { -1.0 };
            sliced != t
        })
        .count();
    Ok(errors as f64 / s_true.len() as f64)
}

/// Per-channel scale-aligned normalized error,
/// `min_g ||h_true - g * h_hat||^2 / ||h_true||^2`.
pub fn channel_nmse(h_true: &[f64], h_hat: &[f64]) -> Result<f64> {
    aligned_mse(h_true, h_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{
        convolve_zero_prehistory, generate_source, simulate, FirChannel, Nonlinearity, NoiseSpec,
        SourceKind, WienerSimoSystem,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vecs(rows: &[&[f64]]) -> Vec<Vector> {
        rows.iter().map(|r| Vector::from_column_slice(r)).collect()
    }

    #[test]
    fn zero_forcing_inverts_true_system() {
        let src = generate_source(SourceKind::GaussianIid, 200, 3).unwrap();
        let sys = WienerSimoSystem::from_bench(
            &[1, 2],
            &[Nonlinearity::Identity, Nonlinearity::Identity],
            NoiseSpec::None,
        )
        .unwrap();
        let out = simulate(&sys, &src, 0).unwrap();
        let channels = vecs(&[&sys.channel(0).taps, &sys.channel(1).taps]);
        let eq = equalize(&channels, &out.intermediate, EqualizerMethod::Zf, None).unwrap();
        let truth = &src.samples[4..];
        let mse = aligned_mse(truth, &eq.s_hat).unwrap();
        assert!(mse <= 1e-16, "mse {mse}");
        // Relative sample error on the valid window.
        for (t, e) in truth.iter().zip(&eq.s_hat) {
            assert!((t - e).abs() <= 1e-8 * t.abs().max(1.0));
        }
    }

    #[test]
    fn single_tap_channels_average_the_branches() {
        let y1 = vec![1.0, 2.0, 3.0, 4.0];
        let y2 = vec![3.0, 2.0, 1.0, 0.0];
        let channels = vecs(&[&[1.0], &[1.0]]);
        let eq = equalize(&channels, &[y1.clone(), y2.clone()], EqualizerMethod::Zf, None).unwrap();
        for k in 0..4 {
            assert!((eq.s_hat[k] - 0.5 * (y1[k] + y2[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn mmse_with_huge_noise_variance_shrinks_to_zero() {
        let y = vec![1.0, -1.0, 0.5, 2.0];
        let channels = vecs(&[&[1.0, 0.2], &[0.5, -0.4]]);
        let eq = equalize(
            &channels,
            &[y.clone(), y],
            EqualizerMethod::Mmse,
            Some(1e12),
        )
        .unwrap();
        assert!(eq.s_hat.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn rank_deficient_stack_is_rejected() {
        // All leading taps zero leaves the latest source sample unobserved.
        let channels = vecs(&[&[0.0, 1.0], &[0.0, 2.0]]);
        let y = vec![0.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            equalize(&channels, &[y.clone(), y], EqualizerMethod::Zf, None),
            Err(Error::Unequalizable)
        ));
    }

    #[test]
    fn aligned_mse_absorbs_scale_and_sign() {
        let s: Vec<f64> = (0..50).map(|k| (k as f64 * 0.3).sin()).collect();
        let scaled: Vec<f64> = s.iter().map(|v| -3.0 * v).collect();
        assert!(aligned_mse(&s, &scaled).unwrap() < 1e-30);
    }

    #[test]
    fn aligned_mse_of_orthogonal_estimate_is_one() {
        let s = vec![1.0, 0.0, 1.0, 0.0];
        let e = vec![0.0, 1.0, 0.0, -1.0];
        assert!((aligned_mse(&s, &e).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn aligned_mse_projection_algebra() {
        // hat = true + orthogonal error with 1% relative energy.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<f64> = (0..400).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut e: Vec<f64> = (0..400).map(|_| rng.random::<f64>() - 0.5).collect();
        let dot: f64 = s.iter().zip(&e).map(|(a, b)| a * b).sum();
        let ns: f64 = s.iter().map(|v| v * v).sum();
        for (ek, sk) in e.iter_mut().zip(&s) {
            *ek -= dot / ns * sk;
        }
        let ne: f64 = e.iter().map(|v| v * v).sum();
        let scale = (0.01 * ns / ne).sqrt();
        let hat: Vec<f64> = s.iter().zip(&e).map(|(a, b)| a + scale * b).collect();
        let mse = aligned_mse(&s, &hat).unwrap();
        assert!((mse - 1.0 / 101.0).abs() < 1e-12, "mse {mse}");
    }

    #[test]
    fn aligned_mse_rejects_zero_estimate() {
        assert!(aligned_mse(&[1.0, 2.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn ber_is_invariant_to_scale_and_sign() {
        let s: Vec<f64> = (0..100).map(|k| if k % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let half: Vec<f64> = s.iter().map(|v| 0.5 * v).collect();
        let negated: Vec<f64> = s.iter().map(|v| -v).collect();
        assert_eq!(ber(&s, &half).unwrap(), 0.0);
        assert_eq!(ber(&s, &negated).unwrap(), 0.0);
    }

    #[test]
    fn ber_counts_flipped_samples() {
        let s: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut hat = s.clone();
        hat[17] = -hat[17];
        assert!((ber(&s, &hat).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn channel_nmse_basics() {
        let h = [0.4115, 0.4165, 0.2249, -0.0233, -2.1971];
        let scaled: Vec<f64> = h.iter().map(|v| 2.5 * v).collect();
        assert!(channel_nmse(&h, &scaled).unwrap() < 1e-30);
        let orth = [2.1971, 0.0, 0.0, 0.0, 0.4115];
        let dot: f64 = h.iter().zip(&orth).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
        assert!((channel_nmse(&h, &orth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn published_estimate_digits_are_close_to_truth() {
        // First benchmark channel vs its blind estimate digits.
        let truth = [0.4115, 0.4165, 0.2249, -0.0233, -2.1971];
        let estimate = [0.4145, 0.4171, 0.2285, -0.0235, -2.1961];
        let nmse = channel_nmse(&truth, &estimate).unwrap();
        assert!(nmse <= 1e-4, "nmse {nmse}");
    }

    #[test]
    fn roundtrip_random_systems_equalize_exactly() {
        // Property: with true parameters and no noise, ZF recovers the
        // source on the valid window.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..20 {
            let p = 2 + trial % 3;
            let branches: Vec<_> = (0..p)
                .map(|_| {
                    let taps: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                    (FirChannel::new(taps).unwrap(), Nonlinearity::SmoothSaturation)
                })
                .collect();
            let sys = WienerSimoSystem::new(branches, NoiseSpec::None).unwrap();
            let src = generate_source(SourceKind::GaussianIid, 160, 500 + trial as u64).unwrap();
            let out = simulate(&sys, &src, 1).unwrap();
            let channels: Vec<Vector> = (0..p)
                .map(|i| Vector::from_column_slice(&sys.channel(i).taps))
                .collect();
            let eq = equalize(&channels, &out.intermediate, EqualizerMethod::Zf, None).unwrap();
            let mse = aligned_mse(&src.samples[3..], &eq.s_hat).unwrap();
            assert!(mse <= 1e-10, "trial {trial}: mse {mse}");
        }
    }

    #[test]
    fn forward_simulate_then_invert_oracle() {
        // Oracle check of the stacked-operator construction itself.
        let taps = [0.7, -0.3, 0.1];
        let s: Vec<f64> = (0..32).map(|k| ((k * k) as f64 * 0.01).sin()).collect();
        let y = convolve_zero_prehistory(&taps, &s);
        let channels = vecs(&[&taps, &[1.0, 0.0, 0.0]]);
        let eq = equalize(&channels, &[y, s.clone()], EqualizerMethod::Zf, None).unwrap();
        for (t, e) in s[2..].iter().zip(&eq.s_hat) {
            assert!((t - e).abs() < 1e-10);
        }
    }
}
