//! Ground-truth video-level judge.
//!
//! Produces (VQ, MQ, TA) in [0, 1] for decoded toy videos:
//! - VQ: logistic-calibrated mean per-frame log-density under the full
//!   mixture (how "plausible" the frames look),
//! - MQ: how well frame-to-frame motion matches the conditioned component's
//!   drift velocity,
//! - TA: mean posterior responsibility of the conditioned component (did we
//!   generate the thing that was asked for).
//!
//! The judge is ground truth by construction; absolute scales are fixed by
//! [`calibrate`] and recorded in run manifests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{Condition, MixtureTarget};
use crate::tensor::Video;

/// Video-level reward triple, each component in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub vq: f64,
    pub mq: f64,
    pub ta: f64,
}

impl RewardVector {
    pub fn new(vq: f64, mq: f64, ta: f64) -> Self {
        RewardVector { vq, mq, ta }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vq, self.mq, self.ta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        RewardVector {
            vq: a[0],
            mq: a[1],
            ta: a[2],
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        RewardVector {
            vq: s * self.vq,
            mq: s * self.mq,
            ta: s * self.ta,
        }
    }

    pub fn clamped(&self) -> Self {
        RewardVector {
            vq: self.vq.clamp(0.0, 1.0),
            mq: self.mq.clamp(0.0, 1.0),
            ta: self.ta.clamp(0.0, 1.0),
        }
    }
}

/// Calibration constants fixing the absolute scale of VQ and MQ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCalibration {
    /// Log-density whose VQ maps to 0.5.
    pub vq_center: f64,
    /// Logistic slope denominator; half the clean-sample IQR.
    pub vq_scale: f64,
    /// Sharpness of the motion-residual penalty.
    pub mq_beta: f64,
}

impl OracleCalibration {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.vq_scale) || !positive(self.mq_beta) {
            return Err(Error::invalid("vq_scale and mq_beta must be positive"));
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean per-frame log-density of a video under the full mixture.
pub fn mean_frame_log_density(video: &Video, target: &MixtureTarget) -> f64 {
    let total: f64 = (0..video.frames())
        .map(|f| target.clean_frame_log_density(f, video.frame(f)))
        .sum();
    total / video.frames() as f64
}

/// Mean squared motion residual against the conditioned drift velocity.
pub fn mean_motion_residual(video: &Video, velocity: &[f64]) -> f64 {
    if video.frames() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for f in 0..video.frames() - 1 {
        let cur = video.frame(f);
        let next = video.frame(f + 1);
        for d in 0..video.dim() {
            let r = (next[d] - cur[d]) - velocity[d];
            total += r * r;
        }
    }
    total / (video.frames() - 1) as f64
}

/// Score a decoded video against a (decoded-space) mixture target.
pub fn oracle_reward(
    video: &Video,
    cond: Condition,
    target: &MixtureTarget,
    calib: &OracleCalibration,
) -> Result<RewardVector> {
    let k = cond
        .index()
        .ok_or_else(|| Error::invalid("oracle needs a prompt, got the null condition"))?;
    target.check_condition(cond)?;
    calib.validate()?;
    if video.frames() != target.frames() || video.dim() != target.dim() {
        return Err(Error::invalid("video shape does not match mixture"));
    }
    if !video.is_finite() {
        return Err(Error::invalid("video entries must be finite"));
    }

    let vq = logistic((mean_frame_log_density(video, target) - calib.vq_center) / calib.vq_scale);
    let mq = (-calib.mq_beta * mean_motion_residual(video, target.velocity(k))).exp();
    let ta = (0..video.frames())
        .map(|f| target.clean_frame_responsibilities(f, video.frame(f))[k])
        .sum::<f64>()
        / video.frames() as f64;

    Ok(RewardVector::new(vq, mq, ta).clamped())
}

/// Fit the calibration constants from clean mixture samples.
///
/// vq_center/vq_scale are the median and half-IQR of clean-sample mean
/// log-densities; mq_beta is set so clean samples score MQ ~ 0.85.
pub fn calibrate<R: Rng + ?Sized>(
    target: &MixtureTarget,
    samples: usize,
    rng: &mut R,
) -> Result<OracleCalibration> {
    if samples < 1000 {
        return Err(Error::invalid("calibration needs at least 1000 samples"));
    }
    let mut log_densities = Vec::with_capacity(samples);
    let mut residuals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let (k, z) = target.sample_clean(rng);
        let video = Video::from_vec(target.frames(), target.dim(), z.as_slice().to_vec())?;
        log_densities.push(mean_frame_log_density(&video, target));
        residuals.push(mean_motion_residual(&video, target.velocity(k)));
    }
    log_densities.sort_by(|a, b| a.total_cmp(b));
    let quantile = |q: f64| -> f64 {
        let pos = q * (log_densities.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        log_densities[lo] * (1.0 - frac) + log_densities[hi] * frac
    };
    let vq_center = quantile(0.5);
    let iqr = quantile(0.75) - quantile(0.25);
    if iqr < 1e-12 {
        return Err(Error::CalibrationFailure(
            "clean-sample log-density IQR is zero; mixture is degenerate".into(),
        ));
    }
    let mean_residual = residuals.iter().sum::<f64>() / residuals.len() as f64;
    if mean_residual < 1e-12 {
        return Err(Error::CalibrationFailure(
            "clean-sample motion residual is zero; mixture is degenerate".into(),
        ));
    }
    // Mean clean-sample MQ lands near exp(-beta * mean_residual) = 0.85,
    // inside the required [0.7, 0.95] band.
    let mq_beta = -(0.85f64.ln()) / mean_residual;
    let calib = OracleCalibration {
        vq_center,
        vq_scale: iqr / 2.0,
        mq_beta,
    };
    calib.validate()?;
    Ok(calib)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::tensor::Latent;

    fn target() -> MixtureTarget {
        MixtureTarget::axes_preset(4, 4, 4, 2.0, 0.15, 0.25).unwrap()
    }

    fn calib(target: &MixtureTarget) -> OracleCalibration {
        calibrate(target, 4000, &mut stream(99, "calib", &[])).unwrap()
    }

    fn track_video(target: &MixtureTarget, k: usize) -> Video {
        Video::from_vec(
            target.frames(),
            target.dim(),
            target.mean(k).as_slice().to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn null_condition_rejected() {
        let t = target();
        let c = calib(&t);
        let video = track_video(&t, 0);
        assert!(oracle_reward(&video, Condition::Null, &t, &c).is_err());
    }

    #[test]
    fn on_track_video_scores_high() {
        let t = target();
        let c = calib(&t);
        for k in 0..4 {
            let video = track_video(&t, k);
            let r = oracle_reward(&video, Condition::Prompt(k), &t, &c).unwrap();
            assert_eq!(r.mq, 1.0, "zero residual must give MQ = 1");
            assert!(r.ta >= 1.0 - 1e-6, "TA = {} for component {k}", r.ta);
        }
    }

    // Oracle: responsibilities of the configured mixture evaluated at the
    // wrong track are tiny under the 4-sigma separation invariant.
    #[test]
    fn wrong_track_text_alignment_is_tiny() {
        let t = target();
        let c = calib(&t);
        for k in 0..4 {
            for j in 0..4 {
                if j == k {
                    continue;
                }
                let video = track_video(&t, j);
                let r = oracle_reward(&video, Condition::Prompt(k), &t, &c).unwrap();
                assert!(r.ta <= 1e-3, "TA = {} for cond {k} on track {j}", r.ta);
            }
        }
    }

    #[test]
    fn vq_is_half_at_center() {
        let t = target();
        let video = track_video(&t, 1);
        let calib = OracleCalibration {
            vq_center: mean_frame_log_density(&video, &t),
            vq_scale: 1.0,
            mq_beta: 1.0,
        };
        let r = oracle_reward(&video, Condition::Prompt(1), &t, &calib).unwrap();
        assert!((r.vq - 0.5).abs() < 1e-12);
    }

    // The calibration defines the scale: clean samples average VQ ~ 0.5.
    #[test]
    fn clean_sample_mean_vq_near_half() {
        let t = target();
        let c = calibrate(&t, 5000, &mut stream(7, "calib", &[])).unwrap();
        let mut rng = stream(8, "clean", &[]);
        let mut total_vq = 0.0;
        let mut total_mq = 0.0;
        let n = 5000;
        for _ in 0..n {
            let (k, z) = t.sample_clean(&mut rng);
            let video = Video::from_vec(4, 4, z.as_slice().to_vec()).unwrap();
            let r = oracle_reward(&video, Condition::Prompt(k), &t, &c).unwrap();
            total_vq += r.vq;
            total_mq += r.mq;
        }
        let mean_vq = total_vq / n as f64;
        let mean_mq = total_mq / n as f64;
        assert!((0.45..=0.55).contains(&mean_vq), "mean VQ {mean_vq}");
        assert!((0.7..=0.95).contains(&mean_mq), "mean MQ {mean_mq}");
    }

    #[test]
    fn degenerate_mixture_fails_calibration() {
        let t = MixtureTarget::axes_preset(4, 4, 4, 2.0, 0.15, 1e-8).unwrap();
        let err = calibrate(&t, 1000, &mut stream(3, "degenerate", &[]));
        assert!(matches!(err, Err(Error::CalibrationFailure(_))));
    }

    #[test]
    fn calibration_is_deterministic() {
        let t = target();
        let a = calibrate(&t, 2000, &mut stream(5, "again", &[])).unwrap();
        let b = calibrate(&t, 2000, &mut stream(5, "again", &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vq_decreases_radially_beyond_outermost_mode() {
        let t = target();
        let c = calib(&t);
        let mut prev = f64::INFINITY;
        for radius in [4.0, 5.0, 6.5, 8.0, 12.0] {
            let mut data = Vec::new();
            for f in 0..4 {
                let mut frame = t.mean(0).frame(f).to_vec();
                let norm: f64 = frame.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut frame {
                    *v *= radius / norm;
                }
                data.extend(frame);
            }
            let video = Video::from_vec(4, 4, data).unwrap();
            let r = oracle_reward(&video, Condition::Prompt(0), &t, &c).unwrap();
            assert!(r.vq < prev, "VQ did not decrease at radius {radius}");
            prev = r.vq;
        }
    }

    #[test]
    fn responsibilities_partition_unit_mass() {
        let t = target();
        let mut rng = stream(12, "resp", &[]);
        for _ in 0..50 {
            let z = Latent::standard_normal(4, 4, &mut rng).scale(2.0);
            for f in 0..4 {
                let resp = t.clean_frame_responsibilities(f, z.frame(f));
                let sum: f64 = resp.iter().sum();
                assert!(sum <= 1.0 + 1e-9);
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    // Noisier videos score lower MQ on average.
    #[test]
    fn mq_decreases_with_noise_magnitude() {
        let t = target();
        let c = calib(&t);
        let trials = 1000;
        let mut prev_mean = f64::INFINITY;
        for (level, noise) in [0.0, 0.1, 0.25, 0.5, 1.0].iter().enumerate() {
            let mut rng = stream(13, "mq-noise", &[level as u64]);
            let mut total = 0.0;
            for _ in 0..trials {
                let mut z = t.mean(2).clone();
                for v in z.as_mut_slice() {
                    let eps: f64 = rng.sample(rand_distr::StandardNormal);
                    *v += noise * eps;
                }
                let video = Video::from_vec(4, 4, z.as_slice().to_vec()).unwrap();
                total += oracle_reward(&video, Condition::Prompt(2), &t, &c)
                    .unwrap()
                    .mq;
            }
            let mean = total / trials as f64;
            assert!(mean < prev_mean + 1e-9, "MQ mean rose at noise {noise}");
            prev_mean = mean;
        }
    }
}
