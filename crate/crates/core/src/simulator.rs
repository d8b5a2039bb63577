//! End-to-end scenario execution: synthetic source images, policy
//! scheduling, per-task model evaluation, optional pixel-path execution,
//! and the capacity/gamma ablation sweeps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{validate_request, AllocationRatio, CandidateSets, Configuration, Request};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::optimizer::{
    schedule, FeasibilityReport, Policy, SaParams, ScheduleResult,
};
use crate::perf::LatencyBreakdown;
use crate::profile::SystemProfile;
use crate::stitcher::hybrid_enhance;

/// Grid side used by the partition/stitch path.
pub const GRID_SIDE: u32 = 4;
/// Default overlap in source pixels on interior patch sides.
pub const DEFAULT_OVERLAP: u32 = 16;

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub requests: Vec<Request>,
    #[serde(default = "SystemProfile::default_calibrated")]
    pub profile: SystemProfile,
    #[serde(default)]
    pub sets: CandidateSets,
    #[serde(default = "Scenario::default_gamma")]
    pub gamma: AllocationRatio,
    #[serde(default = "Scenario::default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub sa_params: SaParams,
    /// Edge compute availability ratio in (0, 1].
    #[serde(default = "Scenario::default_capacity_scale")]
    pub capacity_scale: f64,
    #[serde(default)]
    pub execute_pixels: bool,
}

impl Scenario {
    fn default_gamma() -> AllocationRatio {
        AllocationRatio(0.25)
    }

    fn default_policy() -> Policy {
        Policy::Sa
    }

    fn default_capacity_scale() -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_scale > 0.0 && self.capacity_scale <= 1.0) {
            return Err(Error::Parse {
                path: "scenario".into(),
                message: format!("capacity_scale must be in (0, 1], got {}", self.capacity_scale),
            });
        }
        AllocationRatio::new(self.gamma.value())?;
        self.profile.validate()?;
        self.sa_params.validate()?;
        for request in &self.requests {
            validate_request(request.clone(), &self.sets, GRID_SIDE)?;
        }
        Ok(())
    }

    /// Profile with the edge availability ratio applied.
    pub fn effective_profile(&self) -> SystemProfile {
        let mut profile = self.profile.clone();
        profile.edge_capacity *= self.capacity_scale;
        profile
    }
}

/// The shipped ten-user workload: target resolutions cycle through
/// {768, 1024, 1536, 2048} and each target class carries a fixed
/// latency weight (0.01, 0.02, 0.05, 0.05 respectively) so that higher
/// resolutions come with stronger latency pressure.
pub fn default_scenario(seed: u64) -> Scenario {
    let targets = [768u32, 1024, 1536, 2048];
    let lambda_for = |target: u32| match target {
        768 => 0.01,
        1024 => 0.02,
        _ => 0.05,
    };
    let requests = (0..10)
        .map(|k| {
            let target = targets[k % targets.len()];
            Request::new(format!("user-{k:02}"), target, lambda_for(target), 1000 + k as u64)
        })
        .collect();
    Scenario {
        requests,
        profile: SystemProfile::default_calibrated(),
        sets: CandidateSets::default(),
        gamma: AllocationRatio(0.25),
        policy: Policy::Sa,
        sa_params: SaParams { rng_seed: seed, ..SaParams::default() },
        capacity_scale: 1.0,
        execute_pixels: false,
    }
}

pub fn load_scenario(path: impl AsRef<std::path::Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::FileNotFound { path: path.display().to_string(), source: e })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    scenario.validate().map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.display().to_string(), message },
        other => other,
    })?;
    Ok(scenario)
}

/// Deterministic synthetic source image: a smooth low-frequency
/// background with a high-variance textured square covering ~25% of the
/// area, aligned to the 4x4 partition grid at a seed-dependent position.
/// Uses only integer and rational arithmetic, so identical seeds give
/// bit-identical images on every platform.
pub fn synth_image(seed: u64, resolution: u32) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = 3u32;
    // Coarse 5x5 lattice interpolated bilinearly across the canvas.
    const LATTICE: usize = 5;
    let mut lattice = [[0.0f64; LATTICE]; LATTICE];
    for row in lattice.iter_mut() {
        for v in row.iter_mut() {
            *v = 0.2 + 0.5 * rng.random::<f64>();
        }
    }
    let channel_offset = [0.0, 0.03, -0.03];

    let cell = (resolution / GRID_SIDE).max(1);
    let max_cell_offset = GRID_SIDE.saturating_sub(2);
    let rect_col = rng.random_range(0..=max_cell_offset);
    let rect_row = rng.random_range(0..=max_cell_offset);
    let rect_x = rect_col * cell;
    let rect_y = rect_row * cell;
    let rect_side = resolution / 2;

    let mut pixels =
        Vec::with_capacity(resolution as usize * resolution as usize * channels as usize);
    let denom = (resolution - 1).max(1) as f64;
    for y in 0..resolution {
        for x in 0..resolution {
            let in_rect = x >= rect_x && x < rect_x + rect_side && y >= rect_y && y < rect_y + rect_side;
            if in_rect {
                for _ in 0..channels {
                    pixels.push(rng.random::<f64>());
                }
            } else {
                let fx = x as f64 / denom * (LATTICE - 1) as f64;
                let fy = y as f64 / denom * (LATTICE - 1) as f64;
                let x0 = (fx.floor() as usize).min(LATTICE - 2);
                let y0 = (fy.floor() as usize).min(LATTICE - 2);
                let tx = fx - x0 as f64;
                let ty = fy - y0 as f64;
                let top = lattice[y0][x0] * (1.0 - tx) + lattice[y0][x0 + 1] * tx;
                let bottom = lattice[y0 + 1][x0] * (1.0 - tx) + lattice[y0 + 1][x0 + 1] * tx;
                let base = top * (1.0 - ty) + bottom * ty;
                for c in 0..channels as usize {
                    pixels.push((base + channel_offset[c]).clamp(0.0, 1.0));
                }
            }
        }
    }
    Image::new(resolution, resolution, channels, pixels).expect("synthetic image is valid")
}

/// Outcome of one executed task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub request_id: String,
    pub config: Option<Configuration>,
    pub breakdown: Option<LatencyBreakdown>,
    pub quality: f64,
    pub utility: f64,
    pub feasible: bool,
}

/// Evaluates one request under a fixed configuration; when
/// `execute_pixels` is set, also runs the synthetic image through the
/// partition/enhance/stitch path and checks the output dimensions.
pub fn run_task(
    request: &Request,
    config: Configuration,
    gamma: AllocationRatio,
    profile: &SystemProfile,
    execute_pixels: bool,
) -> Result<TaskRecord> {
    let eval = crate::optimizer::evaluate_configuration(request, config, gamma, profile)?;
    if execute_pixels {
        let initial =
            crate::domain::initial_resolution(request.target_resolution, config.sr_scale)?;
        let source = synth_image(request.prompt_seed, initial);
        let overlap = DEFAULT_OVERLAP.min(initial / GRID_SIDE / 2);
        let enhanced = hybrid_enhance(&source, GRID_SIDE, gamma, config.sr_scale, overlap)?;
        if enhanced.width != request.target_resolution
            || enhanced.height != request.target_resolution
        {
            return Err(Error::DimensionMismatch {
                expected: format!(
                    "{0}x{0}",
                    request.target_resolution
                ),
                actual: format!("{}x{}", enhanced.width, enhanced.height),
            });
        }
    }
    Ok(TaskRecord {
        request_id: request.id.clone(),
        config: Some(config),
        breakdown: Some(eval.breakdown),
        quality: eval.quality,
        utility: eval.utility,
        feasible: true,
    })
}

/// Aggregates over the scheduled tasks of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregates {
    pub scheduled: usize,
    pub infeasible: usize,
    pub mean_latency: f64,
    pub p50_latency: f64,
    pub p95_latency: f64,
    pub mean_quality: f64,
    pub total_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub policy: Policy,
    pub records: Vec<TaskRecord>,
    pub aggregates: Aggregates,
    pub feasibility: FeasibilityReport,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    // Nearest-rank.
    let rank = ((p / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn aggregate(records: &[TaskRecord]) -> Aggregates {
    let scheduled: Vec<&TaskRecord> = records.iter().filter(|r| r.feasible).collect();
    let mut latencies: Vec<f64> =
        scheduled.iter().filter_map(|r| r.breakdown.map(|b| b.total)).collect();
    latencies.sort_by(f64::total_cmp);
    let n = scheduled.len().max(1) as f64;
    Aggregates {
        scheduled: scheduled.len(),
        infeasible: records.len() - scheduled.len(),
        mean_latency: latencies.iter().sum::<f64>() / n,
        p50_latency: percentile(&latencies, 50.0),
        p95_latency: percentile(&latencies, 95.0),
        mean_quality: scheduled.iter().map(|r| r.quality).sum::<f64>() / n,
        total_utility: scheduled.iter().map(|r| r.utility).sum(),
    }
}

fn records_from_schedule(
    result: &ScheduleResult,
    scenario: &Scenario,
    profile: &SystemProfile,
) -> Result<Vec<TaskRecord>> {
    let mut records = Vec::with_capacity(result.entries.len());
    for entry in &result.entries {
        match entry.config {
            Some(config) => records.push(run_task(
                &entry.request,
                config,
                scenario.gamma,
                profile,
                scenario.execute_pixels,
            )?),
            None => records.push(TaskRecord {
                request_id: entry.request.id.clone(),
                config: None,
                breakdown: None,
                quality: 0.0,
                utility: 0.0,
                feasible: false,
            }),
        }
    }
    Ok(records)
}

/// Runs the scenario under its configured policy.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport> {
    run_scenario_with_policy(scenario, scenario.policy)
}

pub fn run_scenario_with_policy(scenario: &Scenario, policy: Policy) -> Result<ScenarioReport> {
    scenario.validate()?;
    let profile = scenario.effective_profile();
    let result = schedule(
        &scenario.requests,
        scenario.gamma,
        &profile,
        &scenario.sets,
        &scenario.sa_params,
        policy,
    )?;
    let records = records_from_schedule(&result, scenario, &profile)?;
    let aggregates = aggregate(&records);
    Ok(ScenarioReport { policy, records, aggregates, feasibility: result.feasibility })
}

/// Runs the scenario and returns the schedule itself (with SA traces).
pub fn run_schedule(scenario: &Scenario, policy: Policy) -> Result<ScheduleResult> {
    scenario.validate()?;
    let profile = scenario.effective_profile();
    schedule(
        &scenario.requests,
        scenario.gamma,
        &profile,
        &scenario.sets,
        &scenario.sa_params,
        policy,
    )
}

pub const SWEEP_POLICIES: [Policy; 4] = [Policy::Sa, Policy::Random, Policy::NoSr, Policy::OneType];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityRow {
    pub ratio: f64,
    pub policy: Policy,
    pub mean_utility: f64,
    pub aggregate_utility: f64,
}

/// Re-runs every policy at each edge availability ratio.
pub fn sweep_capacity(scenario: &Scenario, ratios: &[f64]) -> Result<Vec<CapacityRow>> {
    let mut rows = Vec::with_capacity(ratios.len() * SWEEP_POLICIES.len());
    for &ratio in ratios {
        let mut scaled = scenario.clone();
        scaled.capacity_scale = ratio;
        for policy in SWEEP_POLICIES {
            let report = run_scenario_with_policy(&scaled, policy)?;
            let n = report.aggregates.scheduled.max(1) as f64;
            rows.push(CapacityRow {
                ratio,
                policy,
                mean_utility: report.aggregates.total_utility / n,
                aggregate_utility: report.aggregates.total_utility,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub mean_quality: f64,
    pub mean_edge_sr_latency: f64,
    pub mean_enhance_latency: f64,
    pub mean_utility: f64,
}

/// Re-evaluates the scenario's schedule at each allocation ratio. The
/// configurations are fixed once (scheduled at the scenario's base
/// gamma) and only the models are re-evaluated, exposing the underlying
/// quality-latency tension in gamma.
pub fn sweep_gamma(scenario: &Scenario, gammas: &[f64]) -> Result<Vec<GammaRow>> {
    scenario.validate()?;
    let profile = scenario.effective_profile();
    let base = schedule(
        &scenario.requests,
        scenario.gamma,
        &profile,
        &scenario.sets,
        &scenario.sa_params,
        scenario.policy,
    )?;
    let chosen: Vec<(&Request, Configuration)> = base
        .entries
        .iter()
        .filter_map(|e| e.config.map(|c| (&e.request, c)))
        .collect();

    let mut rows = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let gamma = AllocationRatio::new(g)?;
        let mut quality_sum = 0.0;
        let mut edge_sum = 0.0;
        let mut enhance_sum = 0.0;
        let mut utility_sum = 0.0;
        for &(request, config) in &chosen {
            let eval = crate::optimizer::evaluate_configuration(request, config, gamma, &profile)?;
            quality_sum += eval.quality;
            edge_sum += eval.breakdown.t_sr_edge;
            enhance_sum += eval.breakdown.t_enhance;
            utility_sum += eval.utility;
        }
        let n = chosen.len().max(1) as f64;
        rows.push(GammaRow {
            gamma: g,
            mean_quality: quality_sum / n,
            mean_edge_sr_latency: edge_sum / n,
            mean_enhance_latency: enhance_sum / n,
            mean_utility: utility_sum / n,
        });
    }
    Ok(rows)
}

fn fmt(value: f64) -> String {
    format!("{value:.6}")
}

/// Report CSV with the stable pinned header. Infeasible tasks keep
/// their row with zeroed metrics and feasible=false.
pub fn report_csv(report: &ScenarioReport) -> String {
    let mut out = String::from(
        "request_id,policy,scale,steps,t_gen,t_sr_edge,t_sr_device,t_tx_enhanced,t_tx_raw,t_enhance,t_total,quality,utility,feasible\n",
    );
    for r in &report.records {
        let (scale, steps) = r.config.map_or((0, 0), |c| (c.sr_scale, c.denoise_steps));
        let b = r.breakdown.unwrap_or(LatencyBreakdown {
            t_gen: 0.0,
            t_sr_edge: 0.0,
            t_sr_device: 0.0,
            t_tx_enhanced: 0.0,
            t_tx_raw: 0.0,
            t_enhance: 0.0,
            total: 0.0,
        });
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.request_id,
            report.policy.as_str(),
            scale,
            steps,
            fmt(b.t_gen),
            fmt(b.t_sr_edge),
            fmt(b.t_sr_device),
            fmt(b.t_tx_enhanced),
            fmt(b.t_tx_raw),
            fmt(b.t_enhance),
            fmt(b.total),
            fmt(r.quality),
            fmt(r.utility),
            r.feasible,
        ));
    }
    out
}

pub fn capacity_csv(rows: &[CapacityRow]) -> String {
    let mut out = String::from("ratio,policy,mean_utility\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.ratio, r.policy.as_str(), fmt(r.mean_utility)));
    }
    out
}

pub fn gamma_csv(rows: &[GammaRow]) -> String {
    let mut out =
        String::from("gamma,mean_quality,mean_edge_sr_latency,mean_enhance_latency,mean_utility\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.gamma,
            fmt(r.mean_quality),
            fmt(r.mean_edge_sr_latency),
            fmt(r.mean_enhance_latency),
            fmt(r.mean_utility),
        ));
    }
    out
}
