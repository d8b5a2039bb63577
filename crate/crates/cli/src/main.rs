//! Command-line front end: scenario execution, ablation sweeps,
//! single-request optimization, image partition/stitch utilities and
//! profile calibration.
//!
//! Exit codes: 0 success, 2 input error, 3 no feasible configuration,
//! 4 output I/O error. Failures print one line to stderr with the
//! machine-parseable prefix `ERROR <code>:`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use edgesr::error::Error;
use edgesr::image::{read_netpbm, write_netpbm};
use edgesr::optimizer::Policy;
use edgesr::partitioner::select_foreground;
use edgesr::profile::{fit_profile, load_profile, FitSample, SystemProfile};
use edgesr::simulator::{
    self, capacity_csv, gamma_csv, load_scenario, report_csv, run_scenario_with_policy,
    sweep_capacity, sweep_gamma, Scenario,
};
use edgesr::stitcher::{feather_window, hybrid_enhance, stitch, EdgeFlags, Placement};
use edgesr::AllocationRatio;

#[derive(Parser)]
#[command(name = "edgesr", version, about = "End-edge collaborative generation-enhancement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON; omit to use the built-in ten-user default.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Profile JSON overriding the scenario's profile.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Seed for annealing and the random baseline.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Selection policy.
    #[arg(long, value_parser = parse_policy)]
    policy: Option<Policy>,
    /// Allocation ratio override.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Select configurations for every request and dump the SA trace.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory for schedule.csv and sa_trace.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the scenario and write the per-task report CSV.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-run the scenario across capacity ratios or allocation ratios.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated edge availability ratios.
        #[arg(long, value_name = "RATIOS", conflicts_with = "gamma_grid")]
        capacity: Option<String>,
        /// Comma-separated allocation ratios.
        #[arg(long = "gamma-grid", value_name = "GAMMAS")]
        gamma_grid: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Variance-partition an image and write the foreground mask.
    Partition {
        /// Input PGM/PPM image.
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 4)]
        grid: u32,
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        /// Output directory for mask.pgm and variance.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Stitch placements listed in a JSON manifest.
    Stitch {
        #[arg(long)]
        manifest: PathBuf,
        /// Output image path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Hybrid-enhance an image (variance-routed upscaling + stitching).
    Enhance {
        /// Input PGM/PPM image.
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 2)]
        scale: u32,
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        /// Overlap in source pixels on interior sides.
        #[arg(long, default_value_t = 16)]
        overlap: u32,
        #[arg(long, default_value_t = 4)]
        grid: u32,
        /// Output image path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the generation-load curve from latency samples.
    Calibrate {
        /// CSV with header steps,resolution,seconds.
        #[arg(long)]
        samples: PathBuf,
        /// Base profile supplying the remaining constants.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Output profile JSON path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    match s {
        "sa" => Ok(Policy::Sa),
        "brute" => Ok(Policy::Brute),
        "random" => Ok(Policy::Random),
        "nosr" => Ok(Policy::NoSr),
        "onetype" => Ok(Policy::OneType),
        other => Err(format!("unknown policy {other}; expected sa|brute|random|nosr|onetype")),
    }
}

enum CliError {
    Input(String),
    Infeasible(String),
    Output(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Output(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) | CliError::Output(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoFeasibleConfiguration { .. } => CliError::Infeasible(e.to_string()),
            Error::Io(_) => CliError::Output(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn write_text_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
    ));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, path)
    };
    write().map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

fn load_scenario_with_overrides(args: &ScenarioArgs) -> Result<(Scenario, Policy), CliError> {
    let mut scenario = match &args.scenario {
        Some(path) => load_scenario(path)?,
        None => simulator::default_scenario(args.seed),
    };
    if let Some(path) = &args.profile {
        scenario.profile = load_profile(path)?;
    }
    scenario.sa_params.rng_seed = args.seed;
    if let Some(g) = args.gamma {
        scenario.gamma = AllocationRatio::new(g)?;
    }
    let policy = args.policy.unwrap_or(scenario.policy);
    scenario.validate()?;
    Ok((scenario, policy))
}

fn parse_grid_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    values
        .map_err(|e| CliError::Input(format!("invalid {what} list {text:?}: {e}")))
        .and_then(|v| {
            if v.is_empty() {
                Err(CliError::Input(format!("empty {what} list")))
            } else {
                Ok(v)
            }
        })
}

fn cmd_optimize(args: &ScenarioArgs, out: &Path) -> Result<(), CliError> {
    let (scenario, policy) = load_scenario_with_overrides(args)?;
    let profile = scenario.effective_profile();
    let result = edgesr::optimizer::schedule(
        &scenario.requests,
        scenario.gamma,
        &profile,
        &scenario.sets,
        &scenario.sa_params,
        policy,
    )?;
    if !result.entries.is_empty() && result.entries.iter().all(|e| e.config.is_none()) {
        return Err(CliError::Infeasible("no request could be scheduled".into()));
    }
    fs::create_dir_all(out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;

    let mut schedule_csv =
        String::from("request_id,policy,scale,steps,quality,t_total,utility,feasible\n");
    for entry in &result.entries {
        let (scale, steps) = entry.config.map_or((0, 0), |c| (c.sr_scale, c.denoise_steps));
        let (quality, total, utility) = entry
            .evaluation
            .map_or((0.0, 0.0, 0.0), |e| (e.quality, e.breakdown.total, e.utility));
        schedule_csv.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{}\n",
            entry.request.id,
            policy.as_str(),
            scale,
            steps,
            quality,
            total,
            utility,
            entry.config.is_some(),
        ));
    }
    write_text_atomic(&out.join("schedule.csv"), &schedule_csv)?;

    let mut trace_csv = String::from("temp,iter,scale,steps,utility,accepted,reason\n");
    for entry in &result.entries {
        if let Some(trace) = &entry.trace {
            for row in &trace.rows {
                let utility = row.utility.map_or(String::new(), |u| format!("{u:.6}"));
                trace_csv.push_str(&format!(
                    "{:.6},{},{},{},{},{},{}\n",
                    row.temperature,
                    row.iter,
                    row.scale,
                    row.steps,
                    utility,
                    row.accepted,
                    row.reason.as_str(),
                ));
            }
        }
    }
    write_text_atomic(&out.join("sa_trace.csv"), &trace_csv)?;
    println!(
        "scheduled {}/{} requests, aggregate utility {:.6}",
        result.entries.iter().filter(|e| e.config.is_some()).count(),
        result.entries.len(),
        result.aggregate_utility
    );
    Ok(())
}

fn cmd_simulate(args: &ScenarioArgs, out: &Path) -> Result<(), CliError> {
    let (scenario, policy) = load_scenario_with_overrides(args)?;
    let report = run_scenario_with_policy(&scenario, policy)?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;
    write_text_atomic(&out.join("report.csv"), &report_csv(&report))?;
    println!(
        "policy {}: mean latency {:.3} s, mean quality {:.4}, total utility {:.4}",
        policy.as_str(),
        report.aggregates.mean_latency,
        report.aggregates.mean_quality,
        report.aggregates.total_utility
    );
    Ok(())
}

fn cmd_sweep(
    args: &ScenarioArgs,
    capacity: Option<&str>,
    gamma_grid: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let (scenario, _) = load_scenario_with_overrides(args)?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;
    match (capacity, gamma_grid) {
        (Some(list), None) => {
            let ratios = parse_grid_list(list, "capacity ratio")?;
            let rows = sweep_capacity(&scenario, &ratios)?;
            write_text_atomic(&out.join("sweep_capacity.csv"), &capacity_csv(&rows))?;
            println!("capacity sweep: {} rows", rows.len());
        }
        (None, Some(list)) => {
            let gammas = parse_grid_list(list, "gamma")?;
            let rows = sweep_gamma(&scenario, &gammas)?;
            write_text_atomic(&out.join("sweep_gamma.csv"), &gamma_csv(&rows))?;
            println!("gamma sweep: {} rows", rows.len());
        }
        _ => {
            return Err(CliError::Input(
                "exactly one of --capacity or --gamma-grid is required".into(),
            ))
        }
    }
    Ok(())
}

fn cmd_partition(image_path: &Path, grid: u32, gamma: f64, out: &Path) -> Result<(), CliError> {
    let image = read_netpbm(image_path)?;
    let ratio = AllocationRatio::new(gamma)?;
    let result = select_foreground(&image, grid, ratio)?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", out.display())))?;
    write_netpbm(out.join("mask.pgm"), &result.foreground_mask())
        .map_err(|e| CliError::Output(e.to_string()))?;
    let mut csv = String::from("cell,row,col,variance,foreground\n");
    for (i, v) in result.variances.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{:.12},{}\n",
            i,
            i as u32 / grid,
            i as u32 % grid,
            v,
            result.is_foreground(i),
        ));
    }
    write_text_atomic(&out.join("variance.csv"), &csv)?;
    println!("foreground cells: {:?}", result.foreground);
    Ok(())
}

#[derive(Deserialize)]
struct ManifestPlacement {
    path: String,
    x: u32,
    y: u32,
    #[serde(default)]
    overlap: u32,
    #[serde(default)]
    edges: EdgeFlags,
}

#[derive(Deserialize)]
struct StitchManifest {
    canvas_width: u32,
    canvas_height: u32,
    placements: Vec<ManifestPlacement>,
}

fn cmd_stitch(manifest_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: StitchManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut placements = Vec::with_capacity(manifest.placements.len());
    for entry in &manifest.placements {
        let path = base.join(&entry.path);
        let patch = read_netpbm(&path)?;
        let weight_window = feather_window(patch.width, patch.height, entry.overlap, entry.edges);
        placements.push(Placement { patch, x: entry.x, y: entry.y, weight_window });
    }
    let image = stitch(&placements, manifest.canvas_width, manifest.canvas_height)?;
    write_netpbm(out, &image).map_err(|e| CliError::Output(e.to_string()))?;
    println!(
        "stitched {}x{} image from {} placements",
        image.width,
        image.height,
        placements.len()
    );
    Ok(())
}

fn cmd_enhance(
    image_path: &Path,
    scale: u32,
    gamma: f64,
    overlap: u32,
    grid: u32,
    out: &Path,
) -> Result<(), CliError> {
    if scale == 0 {
        return Err(CliError::Input("scale must be at least 1".into()));
    }
    let image = read_netpbm(image_path)?;
    let ratio = AllocationRatio::new(gamma)?;
    let enhanced = hybrid_enhance(&image, grid, ratio, scale, overlap)?;
    write_netpbm(out, &enhanced).map_err(|e| CliError::Output(e.to_string()))?;
    println!(
        "enhanced {}x{} -> {}x{}",
        image.width, image.height, enhanced.width, enhanced.height
    );
    Ok(())
}

fn parse_samples_csv(path: &Path) -> Result<Vec<FitSample>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == "steps,resolution,seconds" => {}
        other => {
            return Err(CliError::Input(format!(
                "{}: expected header steps,resolution,seconds, got {other:?}",
                path.display()
            )))
        }
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Input(format!(
                "{}:{}: expected 3 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |i: usize, what: &str| -> Result<f64, CliError> {
            fields[i].trim().parse::<f64>().map_err(|e| {
                CliError::Input(format!("{}:{}: invalid {what}: {e}", path.display(), lineno + 2))
            })
        };
        samples.push(FitSample {
            steps: parse(0, "steps")? as u32,
            resolution: parse(1, "resolution")? as u32,
            seconds: parse(2, "seconds")?,
        });
    }
    Ok(samples)
}

fn cmd_calibrate(samples: &Path, profile: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let base = match profile {
        Some(path) => load_profile(path)?,
        None => SystemProfile::default_calibrated(),
    };
    let samples = parse_samples_csv(samples)?;
    let fit = fit_profile(&samples, base.edge_capacity)?;
    let mut calibrated = base;
    calibrated.gen_load_coeff = fit.coeff;
    calibrated.gen_res_exponent = fit.exponent;
    let json =
        serde_json::to_string_pretty(&calibrated).map_err(|e| CliError::Output(e.to_string()))?;
    write_text_atomic(out, &(json + "\n"))?;
    println!(
        "fit: coeff {:.6}, exponent {:.6}, residual norm {:.3e}",
        fit.coeff, fit.exponent, fit.residual_norm
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Optimize { scenario, out } => cmd_optimize(scenario, out),
        Command::Simulate { scenario, out } => cmd_simulate(scenario, out),
        Command::Sweep { scenario, capacity, gamma_grid, out } => {
            cmd_sweep(scenario, capacity.as_deref(), gamma_grid.as_deref(), out)
        }
        Command::Partition { image, grid, gamma, out } => cmd_partition(image, *grid, *gamma, out),
        Command::Stitch { manifest, out } => cmd_stitch(manifest, out),
        Command::Enhance { image, scale, gamma, overlap, grid, out } => {
            cmd_enhance(image, *scale, *gamma, *overlap, *grid, out)
        }
        Command::Calibrate { samples, profile, out } => {
            cmd_calibrate(samples, profile.as_deref(), out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), e.message());
            ExitCode::from(e.code())
        }
    }
}
