//! Calibration constants instantiating the abstract load, data-volume and
//! quality functions, plus profile file I/O and load-curve fitting.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calibration constants for one edge/device pair.
///
/// Loads are expressed in GFLOP, capacities in GFLOP/s, bandwidth in
/// Mbit/s and data volumes in Mbit. Quality values are dimensionless
/// in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemProfile {
    /// Edge server computing capacity (GFLOP/s).
    pub edge_capacity: f64,
    /// User device computing capacity (GFLOP/s).
    pub device_capacity: f64,
    /// Edge-device link bandwidth (Mbit/s).
    pub bandwidth: f64,
    /// Scale of the generation load (GFLOP per step at the reference
    /// resolution of 1000 pixels per side).
    pub gen_load_coeff: f64,
    /// Resolution exponent of the generation load.
    pub gen_res_exponent: f64,
    /// Scale of the edge diffusion-branch enhancement load.
    pub sr_edge_coeff: f64,
    /// Scale of the device learning-branch enhancement load.
    pub sr_device_coeff: f64,
    /// Shared resolution exponent of both enhancement loads.
    pub sr_res_exponent: f64,
    /// Effective coded bits per pixel for transmitted images.
    pub bits_per_pixel: f64,
    /// Saturation rate of base quality in the step count.
    pub quality_step_rate: f64,
    /// Resolution of maximum base quality (pixels per side).
    pub quality_peak_resolution: f64,
    /// Log-scale width of the resolution quality penalty.
    pub quality_res_width: f64,
    /// Asymptotic base quality, in (0, 1].
    pub quality_max: f64,
    /// Quality improvement ratio at full diffusion allocation, m(1).
    pub enhance_max_ratio: f64,
    /// Shape exponent of the improvement curve m(gamma).
    pub enhance_exponent: f64,
}

impl SystemProfile {
    /// The shipped calibration. Branch latencies reproduce the measured
    /// reference points: full-image learning SR of a 512 image on the
    /// device takes 8.41 s and the full-image diffusion branch on the
    /// edge takes 125.4 s; capacities match a 34.1 TFLOPS edge GPU and a
    /// 10.6 TFLOPS device, with a 10 Mbps link.
    pub fn default_calibrated() -> Self {
        SystemProfile {
            edge_capacity: 34100.0,
            device_capacity: 10600.0,
            bandwidth: 10.0,
            gen_load_coeff: 6000.0,
            gen_res_exponent: 2.6,
            sr_edge_coeff: 5_779_369.0,
            sr_device_coeff: 120_484.25,
            sr_res_exponent: 0.45,
            bits_per_pixel: 4.0,
            quality_step_rate: 0.1,
            quality_peak_resolution: 1024.0,
            quality_res_width: 0.6,
            quality_max: 0.19,
            enhance_max_ratio: 31.0,
            enhance_exponent: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("edge_capacity", self.edge_capacity),
            ("device_capacity", self.device_capacity),
            ("bandwidth", self.bandwidth),
            ("gen_load_coeff", self.gen_load_coeff),
            ("gen_res_exponent", self.gen_res_exponent),
            ("sr_edge_coeff", self.sr_edge_coeff),
            ("sr_device_coeff", self.sr_device_coeff),
            ("sr_res_exponent", self.sr_res_exponent),
            ("bits_per_pixel", self.bits_per_pixel),
            ("quality_step_rate", self.quality_step_rate),
            ("quality_peak_resolution", self.quality_peak_resolution),
            ("quality_res_width", self.quality_res_width),
            ("quality_max", self.quality_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parse {
                    path: "profile".into(),
                    message: format!("field {name} must be strictly positive, got {v}"),
                });
            }
        }
        if self.quality_max > 1.0 {
            return Err(Error::Parse {
                path: "profile".into(),
                message: format!("quality_max must be <= 1, got {}", self.quality_max),
            });
        }
        if self.enhance_max_ratio < 1.0 {
            return Err(Error::Parse {
                path: "profile".into(),
                message: format!("enhance_max_ratio must be >= 1, got {}", self.enhance_max_ratio),
            });
        }
        if !(self.enhance_exponent > 0.0) {
            return Err(Error::Parse {
                path: "profile".into(),
                message: format!("enhance_exponent must be > 0, got {}", self.enhance_exponent),
            });
        }
        Ok(())
    }
}

/// Reads a profile from a JSON file with exactly the `SystemProfile`
/// field names; unknown keys are rejected.
pub fn load_profile(path: impl AsRef<Path>) -> Result<SystemProfile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::FileNotFound { path: path.display().to_string(), source: e })?;
    let profile: SystemProfile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    profile.validate().map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.display().to_string(), message },
        other => other,
    })?;
    Ok(profile)
}

/// One measured point of the generation curve: denoising steps,
/// generation resolution and the observed wall-clock seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    pub steps: u32,
    pub resolution: u32,
    pub seconds: f64,
}

/// Result of fitting the generation load curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub coeff: f64,
    pub exponent: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual_norm: f64,
}

/// Least-squares fit of `gen_load_coeff` and `gen_res_exponent` from
/// latency samples measured on hardware with capacity `edge_capacity`.
///
/// The model is seconds = coeff * steps * (resolution/1000)^exponent /
/// capacity, which is linear in log space:
/// ln(seconds * capacity / steps) = ln(coeff) + exponent * ln(res/1000).
pub fn fit_profile(samples: &[FitSample], edge_capacity: f64) -> Result<FitResult> {
    if samples.len() < 3 {
        return Err(Error::DegenerateSamples {
            reason: format!("need at least 3 samples, got {}", samples.len()),
        });
    }
    let mut resolutions: Vec<u32> = samples.iter().map(|s| s.resolution).collect();
    resolutions.sort_unstable();
    resolutions.dedup();
    if resolutions.len() < 2 {
        return Err(Error::DegenerateSamples {
            reason: "need at least two distinct resolutions".into(),
        });
    }
    for s in samples {
        if s.steps == 0 || s.resolution == 0 || !(s.seconds > 0.0) {
            return Err(Error::DegenerateSamples {
                reason: format!("non-positive sample ({}, {}, {})", s.steps, s.resolution, s.seconds),
            });
        }
    }

    let xs: Vec<f64> = samples.iter().map(|s| (s.resolution as f64 / 1000.0).ln()).collect();
    let ys: Vec<f64> = samples
        .iter()
        .map(|s| (s.seconds * edge_capacity / s.steps as f64).ln())
        .collect();
    let n = samples.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateSamples { reason: "no resolution spread".into() });
    }
    let exponent = (n * sxy - sx * sy) / denom;
    let intercept = (sy - exponent * sx) / n;
    let coeff = intercept.exp();
    let residual_norm = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + exponent * x);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(FitResult { coeff, exponent, residual_norm })
}
