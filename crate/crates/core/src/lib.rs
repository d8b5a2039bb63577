//! Deterministic simulator and decision library for end-edge
//! collaborative image generation with hybrid super-resolution.
//!
//! The crate models the latency and quality of a
//! generate / partition / parallel-enhance / stitch pipeline, selects
//! per-request configurations (SR scale, denoising steps) by simulated
//! annealing under shared capacity budgets, and executes the
//! partition/stitch image path on real pixel arrays with classical
//! resamplers standing in for the two enhancement branches.

pub mod domain;
pub mod error;
pub mod image;
pub mod optimizer;
pub mod partitioner;
pub mod perf;
pub mod profile;
pub mod simulator;
pub mod stitcher;

pub use domain::{
    configuration_grid, initial_resolution, validate_request, AllocationRatio, CandidateSets,
    Configuration, Request,
};
pub use error::{Error, Result};
pub use image::Image;
pub use optimizer::{
    anneal, brute_force, check_feasibility, evaluate_configuration, metropolis_accept, neighbor,
    schedule, utility, Policy, SaParams, SaTrace, ScheduleResult,
};
pub use perf::{
    data_volume, latency_inference, latency_sr, latency_total, latency_transmission, load_gen,
    load_sr_device, load_sr_edge, quality_base, quality_final, quality_multiplier,
    LatencyBreakdown,
};
pub use profile::{fit_profile, load_profile, FitResult, FitSample, SystemProfile};
pub use simulator::{
    default_scenario, load_scenario, run_scenario, run_scenario_with_policy, run_task,
    sweep_capacity, sweep_gamma, synth_image, Scenario, ScenarioReport, TaskRecord,
};
pub use stitcher::{
    extract_overlapping, feather_window, hybrid_enhance, stitch, upscale, EdgeFlags, Placement,
    UpscaleMode,
};
