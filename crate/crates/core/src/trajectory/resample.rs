use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::MotorMatrix;
use crate::error::{Error, Result};

/// Stretches every joint column from `T0` to `steps` samples by zero-padding
/// its spectrum.
///
/// The forward transform is unnormalized and the inverse carries `1/T`. The
/// `T − T0` zeros go in the middle of the spectrum, the Nyquist bin is split
/// evenly between the two halves so the inverse stays real, and the result is
/// scaled by `T/T0` to keep amplitudes.
pub fn resample_frequency_domain(motor: &MotorMatrix, steps: usize) -> Result<MotorMatrix> {
    let t0 = motor.steps();
    if t0 == 0 {
        return Err(Error::InvalidArgument("cannot resample an empty trajectory".into()));
    }
    if steps < t0 {
        return Err(Error::InvalidArgument(format!(
            "resampling from {t0} down to {steps} steps is not supported"
        )));
    }
    if !t0.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "source length {t0} must be even"
        )));
    }
    if steps == t0 {
        return Ok(motor.clone());
    }

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(t0);
    let inverse = planner.plan_fft_inverse(steps);
    let half = t0 / 2;
    let shift = steps - t0;
    let scale = 1.0 / t0 as f64;

    let mut out = MotorMatrix::zeros(steps, motor.joints());
    let mut spectrum = vec![Complex::new(0.0, 0.0); t0];
    let mut padded = vec![Complex::new(0.0, 0.0); steps];
    for j in 0..motor.joints() {
        for (t, s) in spectrum.iter_mut().enumerate() {
            *s = Complex::new(motor.get(t, j), 0.0);
        }
        forward.process(&mut spectrum);

        padded.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        padded[..half].copy_from_slice(&spectrum[..half]);
        let nyquist = spectrum[half] * 0.5;
        padded[half] = nyquist;
        padded[half + shift] += nyquist;
        padded[half + shift + 1..].copy_from_slice(&spectrum[half + 1..]);

        inverse.process(&mut padded);
        for (t, c) in padded.iter().enumerate() {
            out.set(t, j, c.re * scale);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn column(values: &[f64]) -> MotorMatrix {
        MotorMatrix::from_flat(values.len(), 1, values.to_vec()).unwrap()
    }

    /// Trigonometric interpolant of a real even-length sequence evaluated at
    /// fractional time `x`, computed from a direct O(n²) DFT.
    fn trig_interp(values: &[f64], x: f64) -> f64 {
        let n = values.len();
        let half = n / 2;
        let mut acc = 0.0;
        for k in 0..n {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in values.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let freq = if k <= half { k as f64 } else { k as f64 - n as f64 };
            let ang = 2.0 * PI * freq * x / n as f64;
            let term = re * ang.cos() - im * ang.sin();
            if k == half {
                // Nyquist term of a real interpolant: cosine only.
                let ang = PI * x;
                acc += re * ang.cos();
            } else {
                acc += term;
            }
        }
        acc / n as f64
    }

    #[test]
    fn constant_column_is_preserved() {
        let out = resample_frequency_domain(&column(&[0.37; 10]), 20).unwrap();
        assert_eq!(out.steps(), 20);
        for t in 0..20 {
            assert!((out.get(t, 0) - 0.37).abs() < 1e-10);
        }
    }

    #[test]
    fn sinusoid_is_interpolated_exactly() {
        let src: Vec<f64> = (0..20).map(|t| (2.0 * PI * t as f64 / 20.0).sin()).collect();
        let out = resample_frequency_domain(&column(&src), 40).unwrap();
        for t in 0..40 {
            let expect = (2.0 * PI * (t as f64 * 0.5) / 20.0).sin();
            assert!((out.get(t, 0) - expect).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn matches_direct_trigonometric_interpolation() {
        let src: Vec<f64> = (0..12).map(|t| ((t * 7 % 5) as f64 - 2.0) * 0.3 + (t as f64) * 0.05).collect();
        let out = resample_frequency_domain(&column(&src), 30).unwrap();
        for t in 0..30 {
            let x = t as f64 * 12.0 / 30.0;
            assert!((out.get(t, 0) - trig_interp(&src, x)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn identity_when_lengths_match() {
        let src = [0.1, -0.4, 0.9, 0.2];
        let out = resample_frequency_domain(&column(&src), 4).unwrap();
        for (t, v) in src.iter().enumerate() {
            assert!((out.get(t, 0) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_downsampling_and_odd_lengths() {
        assert!(resample_frequency_domain(&column(&[0.0; 10]), 8).is_err());
        assert!(resample_frequency_domain(&column(&[0.0; 9]), 18).is_err());
    }

    #[test]
    fn original_samples_are_kept_on_integer_stretch() {
        let src: Vec<f64> = (0..16).map(|t| ((t * 5 % 7) as f64).sin()).collect();
        let out = resample_frequency_domain(&column(&src), 48).unwrap();
        for (t, v) in src.iter().enumerate() {
            assert!((out.get(3 * t, 0) - v).abs() < 1e-10);
        }
    }
}
