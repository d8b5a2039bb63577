//! Parametric latency and quality models driven by a `SystemProfile`.
//!
//! Loads follow a power law in resolution; generation load is linear in
//! the denoising step count, and the two enhancement loads are linear
//! in the allocation ratio. All functions here are pure: identical
//! inputs produce bit-identical outputs.

use serde::Serialize;

use crate::domain::{initial_resolution, AllocationRatio, Configuration, Request};
use crate::error::Result;
use crate::profile::SystemProfile;

/// Full latency decomposition for one task, in seconds.
///
/// `t_enhance` is the slower of the two parallel branches
/// (edge diffusion + enhanced transmission vs. raw transmission +
/// device learning SR), and `total` is generation plus enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyBreakdown {
    pub t_gen: f64,
    pub t_sr_edge: f64,
    pub t_sr_device: f64,
    pub t_tx_enhanced: f64,
    pub t_tx_raw: f64,
    pub t_enhance: f64,
    pub total: f64,
}

fn res_norm(resolution: u32) -> f64 {
    resolution as f64 / 1000.0
}

/// Generation load in GFLOP: coeff * (R/1000)^alpha * D.
///
/// The step factor multiplies last so that doubling the step count
/// doubles the load bit-exactly.
pub fn load_gen(steps: u32, resolution: u32, profile: &SystemProfile) -> f64 {
    (profile.gen_load_coeff * res_norm(resolution).powf(profile.gen_res_exponent)) * steps as f64
}

/// Edge diffusion-branch enhancement load in GFLOP; linear in gamma.
pub fn load_sr_edge(resolution: u32, gamma: AllocationRatio, profile: &SystemProfile) -> f64 {
    profile.sr_edge_coeff * gamma.value() * res_norm(resolution).powf(profile.sr_res_exponent)
}

/// Device learning-branch enhancement load in GFLOP; linear in 1 - gamma.
pub fn load_sr_device(resolution: u32, gamma: AllocationRatio, profile: &SystemProfile) -> f64 {
    profile.sr_device_coeff
        * (1.0 - gamma.value())
        * res_norm(resolution).powf(profile.sr_res_exponent)
}

/// Generation latency at the edge, seconds.
pub fn latency_inference(steps: u32, resolution: u32, profile: &SystemProfile) -> f64 {
    load_gen(steps, resolution, profile) / profile.edge_capacity
}

/// Per-branch enhancement latencies (edge, device), seconds.
pub fn latency_sr(
    resolution: u32,
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> (f64, f64) {
    (
        load_sr_edge(resolution, gamma, profile) / profile.edge_capacity,
        load_sr_device(resolution, gamma, profile) / profile.device_capacity,
    )
}

/// Transmitted data volume in Mbit for a `fraction` of a square image.
pub fn data_volume(resolution: u32, fraction: f64, profile: &SystemProfile) -> f64 {
    fraction * profile.bits_per_pixel * (resolution as f64 * resolution as f64) / 1e6
}

/// Transmission latencies (enhanced patches at target resolution, raw
/// patches at initial resolution), seconds.
pub fn latency_transmission(
    target_resolution: u32,
    initial: u32,
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> (f64, f64) {
    let t_enhanced = data_volume(target_resolution, gamma.value(), profile) / profile.bandwidth;
    let t_raw = data_volume(initial, 1.0 - gamma.value(), profile) / profile.bandwidth;
    (t_enhanced, t_raw)
}

/// Full latency breakdown for a request under one configuration.
pub fn latency_total(
    request: &Request,
    config: Configuration,
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> Result<LatencyBreakdown> {
    let initial = initial_resolution(request.target_resolution, config.sr_scale)?;
    let t_gen = latency_inference(config.denoise_steps, initial, profile);
    let (t_sr_edge, t_sr_device) = latency_sr(initial, gamma, profile);
    let (t_tx_enhanced, t_tx_raw) =
        latency_transmission(request.target_resolution, initial, gamma, profile);
    let t_enhance = (t_sr_edge + t_tx_enhanced).max(t_sr_device + t_tx_raw);
    Ok(LatencyBreakdown {
        t_gen,
        t_sr_edge,
        t_sr_device,
        t_tx_enhanced,
        t_tx_raw,
        t_enhance,
        total: t_gen + t_enhance,
    })
}

/// Base generation quality g(D, R): saturating in steps, unimodal in
/// resolution with its peak at `quality_peak_resolution`.
pub fn quality_base(steps: u32, resolution: u32, profile: &SystemProfile) -> f64 {
    let step_factor = 1.0 - (-profile.quality_step_rate * steps as f64).exp();
    let log_ratio = (resolution as f64 / profile.quality_peak_resolution).ln();
    let res_factor =
        (-(log_ratio * log_ratio) / (2.0 * profile.quality_res_width * profile.quality_res_width))
            .exp();
    profile.quality_max * step_factor * res_factor
}

/// Quality improvement ratio m(gamma) >= 1 of the hybrid enhancement;
/// m(0) = 1 and m(1) = enhance_max_ratio.
pub fn quality_multiplier(gamma: AllocationRatio, profile: &SystemProfile) -> f64 {
    1.0 + (profile.enhance_max_ratio - 1.0) * gamma.value().powf(profile.enhance_exponent)
}

/// Final quality Q = g(D, R) * m(gamma), capped at 1.
pub fn quality_final(
    request: &Request,
    config: Configuration,
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> Result<f64> {
    let initial = initial_resolution(request.target_resolution, config.sr_scale)?;
    let q = quality_base(config.denoise_steps, initial, profile)
        * quality_multiplier(gamma, profile);
    Ok(q.min(1.0))
}
