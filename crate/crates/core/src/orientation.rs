//! Leaf attitude from accelerometer and compass readings, and how IMU noise
//! propagates into angle error.
//!
//! Body frame is aerospace Z-down: a level, motionless node reads
//! `(0, 0, 1) g`. Attitude is ZYX (yaw, pitch, roll). With R the world-to-body
//! rotation, a gravity reading is `R · (0, 0, 1)` and a magnetic reading is
//! `R · B_world` with `B_world` in north-east-down µT.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrientationError {
    #[error("cannot average an empty sample list")]
    NoSamples,
    #[error("accelerometer vector is zero")]
    ZeroGravity,
    #[error("horizontal magnetic field vanishes after tilt compensation")]
    DegenerateField,
    #[error("Monte Carlo needs at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("invalid noise parameter: {0}")]
    Noise(String),
}

pub const MIN_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuNoiseSpec {
    /// Accelerometer noise spectral density, µg/√Hz.
    pub accel_nsd_ug: f64,
    /// Accelerometer RMS noise per axis after on-chip averaging, mg.
    pub accel_rms_mg: f64,
    /// Noise bandwidth of the on-chip low-pass filter, Hz.
    pub dlpf_nbw_hz: f64,
    pub mag_rate_hz: f64,
    /// Samples averaged per reading.
    pub n_avg: u32,
    /// Per-sample compass RMS noise per axis, µT. Placeholder value; not
    /// characterized for the target part.
    pub mag_rms_ut: f64,
    /// Local geomagnetic field, north-east-down, µT.
    pub earth_field_ut: Vec3,
}

impl Default for ImuNoiseSpec {
    fn default() -> Self {
        ImuNoiseSpec {
            accel_nsd_ug: 230.0,
            accel_rms_mg: 1.91,
            dlpf_nbw_hz: 8.3,
            mag_rate_hz: 100.0,
            n_avg: 32,
            mag_rms_ut: 0.6,
            earth_field_ut: [20.0, 0.0, 44.0],
        }
    }
}

impl ImuNoiseSpec {
    pub fn validate(&self) -> Result<(), OrientationError> {
        let checks = [
            ("accel_nsd_ug", self.accel_nsd_ug),
            ("dlpf_nbw_hz", self.dlpf_nbw_hz),
            ("mag_rate_hz", self.mag_rate_hz),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(OrientationError::Noise(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("accel_rms_mg", self.accel_rms_mg), ("mag_rms_ut", self.mag_rms_ut)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(OrientationError::Noise(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_avg == 0 {
            return Err(OrientationError::Noise("n_avg must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    /// g
    pub accel: Vec3,
    /// µT
    pub mag: Vec3,
}

/// Degrees. Pitch in [−90, 90], roll in (−180, 180], yaw in [0, 360).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

/// RMS noise in mg for a density in µg/√Hz over a noise bandwidth in Hz.
pub fn rms_from_nsd(nsd_ug: f64, nbw_hz: f64) -> f64 {
    nsd_ug * nbw_hz.max(0.0).sqrt() / 1000.0
}

pub fn average_samples(samples: &[SensorSample]) -> Result<SensorSample, OrientationError> {
    if samples.is_empty() {
        return Err(OrientationError::NoSamples);
    }
    let n = samples.len() as f64;
    let mut acc = SensorSample {
        accel: [0.0; 3],
        mag: [0.0; 3],
    };
    for s in samples {
        for i in 0..3 {
            acc.accel[i] += s.accel[i];
            acc.mag[i] += s.mag[i];
        }
    }
    for i in 0..3 {
        acc.accel[i] /= n;
        acc.mag[i] /= n;
    }
    Ok(acc)
}

/// (pitch, roll) in degrees.
pub fn euler_from_accel(a: Vec3) -> Result<(f64, f64), OrientationError> {
    let [ax, ay, az] = a;
    if ax == 0.0 && ay == 0.0 && az == 0.0 {
        return Err(OrientationError::ZeroGravity);
    }
    let pitch = (-ax).atan2(ay.hypot(az)).to_degrees();
    let mut roll = ay.atan2(az).to_degrees();
    if roll <= -180.0 {
        roll += 360.0;
    }
    Ok((pitch, roll))
}

/// Tilt-compensated heading in degrees, [0, 360).
pub fn yaw_from_mag(mag: Vec3, pitch_deg: f64, roll_deg: f64) -> Result<f64, OrientationError> {
    let [mx, my, mz] = mag;
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    let (sr, cr) = roll_deg.to_radians().sin_cos();
    let xh = mx * cp + my * sr * sp + mz * cr * sp;
    let yh = my * cr - mz * sr;
    let scale = mx.abs().max(my.abs()).max(mz.abs());
    if scale == 0.0 || xh.hypot(yh) <= 1e-12 * scale {
        return Err(OrientationError::DegenerateField);
    }
    Ok(normalize_heading((-yh).atan2(xh).to_degrees()))
}

fn normalize_heading(deg: f64) -> f64 {
    let y = deg.rem_euclid(360.0);
    if y >= 360.0 {
        0.0
    } else {
        y
    }
}

/// Rotate a world (north-east-down) vector into the body frame.
pub fn world_to_body(v: Vec3, att: &EulerAngles) -> Vec3 {
    let (sy, cy) = att.yaw.to_radians().sin_cos();
    let (sp, cp) = att.pitch.to_radians().sin_cos();
    let (sr, cr) = att.roll.to_radians().sin_cos();
    // yaw
    let v1 = [cy * v[0] + sy * v[1], -sy * v[0] + cy * v[1], v[2]];
    // pitch
    let v2 = [cp * v1[0] - sp * v1[2], v1[1], sp * v1[0] + cp * v1[2]];
    // roll
    [v2[0], cr * v2[1] + sr * v2[2], -sr * v2[1] + cr * v2[2]]
}

/// Noise-free reading for a given attitude.
pub fn ideal_sample(att: &EulerAngles, earth_field_ut: Vec3) -> SensorSample {
    SensorSample {
        accel: world_to_body([0.0, 0.0, 1.0], att),
        mag: world_to_body(earth_field_ut, att),
    }
}

pub fn attitude_from_sample(s: &SensorSample) -> Result<EulerAngles, OrientationError> {
    let (pitch, roll) = euler_from_accel(s.accel)?;
    let yaw = yaw_from_mag(s.mag, pitch, roll)?;
    Ok(EulerAngles { pitch, roll, yaw })
}

/// Standard deviation of angle error per axis, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleStd {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    pub trials: usize,
}

fn wrap_deg(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Monte Carlo angle noise. Accelerometer readings get `accel_rms_mg` of
/// white noise per axis (already averaged on-chip); compass readings get
/// `mag_rms_ut / √n_avg` (host-side averaging). Trial `i` draws from its own
/// ChaCha stream keyed by `(seed, i)`, so results do not depend on how the
/// trials are scheduled across threads.
pub fn angle_noise_mc(
    noise: &ImuNoiseSpec,
    true_attitude: &EulerAngles,
    trials: usize,
    seed: u64,
) -> Result<AngleStd, OrientationError> {
    if trials < MIN_TRIALS {
        return Err(OrientationError::TooFewTrials {
            min: MIN_TRIALS,
            got: trials,
        });
    }
    noise.validate()?;
    let ideal = ideal_sample(true_attitude, noise.earth_field_ut);
    // angles fixed from the ideal reading so the error statistic is centred
    // on what the decoder returns without noise
    let truth = attitude_from_sample(&ideal)?;
    let sa = noise.accel_rms_mg * 1e-3;
    let sm = noise.mag_rms_ut / f64::from(noise.n_avg).sqrt();

    let errors: Vec<Vec3> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut s = ideal;
            for k in 0..3 {
                let n: f64 = StandardNormal.sample(&mut rng);
                s.accel[k] += sa * n;
            }
            for k in 0..3 {
                let n: f64 = StandardNormal.sample(&mut rng);
                s.mag[k] += sm * n;
            }
            match attitude_from_sample(&s) {
                Ok(a) => [
                    a.pitch - truth.pitch,
                    wrap_deg(a.roll - truth.roll),
                    wrap_deg(a.yaw - truth.yaw),
                ],
                Err(_) => [f64::NAN; 3],
            }
        })
        .collect();

    let std = |k: usize| {
        let vals = errors.iter().map(|e| e[k]).filter(|v| v.is_finite());
        let (n, sum) = vals.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
        let mean = sum / n as f64;
        let ss: f64 = vals.map(|v| (v - mean).powi(2)).sum();
        (ss / (n as f64 - 1.0)).sqrt()
    };
    Ok(AngleStd {
        pitch: std(0),
        roll: std(1),
        yaw: std(2),
        trials,
    })
}

/// First-order pitch standard deviation at level attitude, degrees.
pub fn small_angle_pitch_std(accel_rms_mg: f64) -> f64 {
    (accel_rms_mg * 1e-3).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rms_from_density() {
        assert_abs_diff_eq!(rms_from_nsd(230.0, 68.9), 1.909, epsilon = 1e-3);
        assert_abs_diff_eq!(rms_from_nsd(230.0, 8.3), 0.6626, epsilon = 1e-4);
        assert_eq!(rms_from_nsd(230.0, 0.0), 0.0);
    }

    #[test]
    fn averaging() {
        let s = |z: f64| SensorSample {
            accel: [0.0, 0.0, z],
            mag: [1.0, 2.0, 3.0],
        };
        assert_eq!(average_samples(&[s(1.0), s(3.0)]).unwrap().accel, [0.0, 0.0, 2.0]);
        assert_eq!(average_samples(&[s(0.7); 5]).unwrap(), s(0.7));
        assert!(matches!(average_samples(&[]), Err(OrientationError::NoSamples)));
    }

    #[test]
    fn accel_angles() {
        let (p, r) = euler_from_accel([0.0, 0.0, 1.0]).unwrap();
        assert_eq!((p, r), (0.0, 0.0));
        let t = 30f64.to_radians();
        let (p, r) = euler_from_accel([-t.sin(), 0.0, t.cos()]).unwrap();
        assert_abs_diff_eq!(p, 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
        let t = 10f64.to_radians();
        let (_, r) = euler_from_accel([0.0, t.sin(), t.cos()]).unwrap();
        assert_abs_diff_eq!(r, 10.0, epsilon = 1e-12);
        assert!(matches!(euler_from_accel([0.0; 3]), Err(OrientationError::ZeroGravity)));
    }

    #[test]
    fn roll_range_is_half_open() {
        let (_, r) = euler_from_accel([0.0, -0.0, -1.0]).unwrap();
        assert_eq!(r, 180.0);
    }

    #[test]
    fn level_headings() {
        assert_abs_diff_eq!(yaw_from_mag([1.0, 0.0, 0.0], 0.0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(yaw_from_mag([0.0, -1.0, 0.0], 0.0, 0.0).unwrap(), 90.0, epsilon = 1e-12);
        assert!(matches!(
            yaw_from_mag([0.0, 0.0, 40.0], 0.0, 0.0),
            Err(OrientationError::DegenerateField)
        ));
    }

    #[test]
    fn mc_zero_noise_is_exact() {
        let noise = ImuNoiseSpec {
            accel_rms_mg: 0.0,
            mag_rms_ut: 0.0,
            ..Default::default()
        };
        let s = angle_noise_mc(&noise, &EulerAngles::default(), 1000, 3).unwrap();
        assert_eq!((s.pitch, s.roll, s.yaw), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mc_rejects_few_trials() {
        let r = angle_noise_mc(&ImuNoiseSpec::default(), &EulerAngles::default(), 999, 0);
        assert!(matches!(r, Err(OrientationError::TooFewTrials { .. })));
    }

    #[test]
    fn mc_is_seed_reproducible() {
        let n = ImuNoiseSpec::default();
        let a = angle_noise_mc(&n, &EulerAngles::default(), 2000, 11).unwrap();
        let b = angle_noise_mc(&n, &EulerAngles::default(), 2000, 11).unwrap();
        assert_eq!(a, b);
        let c = angle_noise_mc(&n, &EulerAngles::default(), 2000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mc_pitch_scales_linearly() {
        let base = ImuNoiseSpec::default();
        let doubled = ImuNoiseSpec {
            accel_rms_mg: 2.0 * base.accel_rms_mg,
            ..base
        };
        let a = angle_noise_mc(&base, &EulerAngles::default(), 20_000, 5).unwrap();
        let b = angle_noise_mc(&doubled, &EulerAngles::default(), 20_000, 5).unwrap();
        // same streams, so the ratio is nearly exact in the small-angle regime
        assert_abs_diff_eq!(b.pitch / a.pitch, 2.0, epsilon = 0.01);
        assert_abs_diff_eq!(a.pitch, small_angle_pitch_std(1.91), epsilon = 0.1 * 0.1094);
    }
}
