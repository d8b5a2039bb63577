//! Per-request configuration search (simulated annealing with Metropolis
//! acceptance), an exhaustive oracle, and multi-user scheduling under
//! shared edge/device capacity budgets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{configuration_grid, AllocationRatio, CandidateSets, Configuration, Request};
use crate::error::{Error, Result};
use crate::perf::{self, LatencyBreakdown};
use crate::profile::SystemProfile;

/// Length of the service round, in seconds, over which the aggregate
/// capacity constraints are accounted. The edge budget is
/// `edge_capacity * CAPACITY_ROUND_SECS` GFLOP and likewise for the
/// device; summed per-request loads must stay within these budgets.
pub const CAPACITY_ROUND_SECS: f64 = 3600.0;

/// Annealing schedule parameters.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SaParams {
    pub initial_temperature: f64,
    pub min_temperature: f64,
    pub cooling: f64,
    pub iters_per_temp: u32,
    /// Per-request latency budget L0 in seconds; `None` means unbounded.
    pub latency_budget: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SaParams {
    /// Defaults sized so the total move count (66 stages x 20 moves)
    /// exceeds ten times the largest default grid.
    fn default() -> Self {
        SaParams {
            initial_temperature: 1.0,
            min_temperature: 1e-3,
            cooling: 0.9,
            iters_per_temp: 20,
            latency_budget: None,
            rng_seed: 42,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_temperature > 0.0
            && self.min_temperature > 0.0
            && self.min_temperature < self.initial_temperature
            && self.cooling > 0.0
            && self.cooling < 1.0
            && self.iters_per_temp > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parse {
                path: "sa_params".into(),
                message: "require 0 < min_temperature < initial_temperature, cooling in (0,1), iters_per_temp > 0".into(),
            })
        }
    }
}

/// Per-request utility: quality minus lambda-weighted latency.
pub fn utility(quality: f64, latency_secs: f64, lambda: f64) -> f64 {
    quality - lambda * latency_secs
}

/// Latency, quality and utility of one configuration for one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub breakdown: LatencyBreakdown,
    pub quality: f64,
    pub utility: f64,
}

pub fn evaluate_configuration(
    request: &Request,
    config: Configuration,
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> Result<Evaluation> {
    let breakdown = perf::latency_total(request, config, gamma, profile)?;
    let quality = perf::quality_final(request, config, gamma, profile)?;
    Ok(Evaluation { breakdown, quality, utility: utility(quality, breakdown.total, request.lambda) })
}

/// Draws a neighboring configuration differing in exactly one coordinate,
/// moved one index up or down its candidate list. The choice is uniform
/// over the moves that stay inside the grid; when no move exists (both
/// lists are singletons) the input is returned unchanged.
pub fn neighbor(config: Configuration, sets: &CandidateSets, rng: &mut impl Rng) -> Configuration {
    let (si, di) = sets
        .position(config)
        .expect("neighbor called with a configuration outside the candidate grid");
    let mut moves: [Configuration; 4] = [config; 4];
    let mut n = 0;
    if si > 0 {
        moves[n] = Configuration::new(sets.scales[si - 1], config.denoise_steps);
        n += 1;
    }
    if si + 1 < sets.scales.len() {
        moves[n] = Configuration::new(sets.scales[si + 1], config.denoise_steps);
        n += 1;
    }
    if di > 0 {
        moves[n] = Configuration::new(config.sr_scale, sets.steps[di - 1]);
        n += 1;
    }
    if di + 1 < sets.steps.len() {
        moves[n] = Configuration::new(config.sr_scale, sets.steps[di + 1]);
        n += 1;
    }
    if n == 0 {
        return config;
    }
    moves[rng.random_range(0..n)]
}

/// Metropolis rule: improvements are always accepted, degradations with
/// probability exp(delta_u / temperature).
pub fn metropolis_accept(delta_u: f64, temperature: f64, rng: &mut impl Rng) -> bool {
    delta_u > 0.0 || rng.random::<f64>() < (delta_u / temperature).exp()
}

/// Why a proposed move ended the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveReason {
    Improve,
    Metropolis,
    RejectBudget,
    RejectCapacity,
    RejectMetropolis,
}

impl MoveReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveReason::Improve => "improve",
            MoveReason::Metropolis => "metropolis",
            MoveReason::RejectBudget => "reject_budget",
            MoveReason::RejectCapacity => "reject_capacity",
            MoveReason::RejectMetropolis => "reject_metropolis",
        }
    }
}

/// One proposed move in the annealing walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub temperature: f64,
    pub iter: u32,
    pub scale: u32,
    pub steps: u32,
    /// Candidate utility; `None` when the move was rejected before
    /// evaluation (budget or capacity gate).
    pub utility: Option<f64>,
    pub accepted: bool,
    pub reason: MoveReason,
}

/// Full annealing trace for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SaTrace {
    pub rows: Vec<TraceRow>,
    pub accepted_moves: u32,
    pub rejected_moves: u32,
    /// Best utility seen so far, recorded at the end of each
    /// temperature stage.
    pub best_curve: Vec<f64>,
}

fn latency_within_budget(total: f64, budget: Option<f64>) -> bool {
    budget.map_or(true, |b| total <= b)
}

/// Simulated annealing over the configuration grid, following the
/// printed schedule: an outer loop cooling by `cooling` until
/// `min_temperature`, an inner loop of `iters_per_temp` proposed moves,
/// a latency gate ahead of evaluation, and the Metropolis acceptance
/// rule. Returns the best configuration ever accepted together with its
/// trace. Deterministic for a fixed `rng_seed`.
pub fn anneal(
    request: &Request,
    gamma: AllocationRatio,
    profile: &SystemProfile,
    sets: &CandidateSets,
    params: &SaParams,
) -> Result<(Configuration, SaTrace)> {
    anneal_filtered(request, gamma, profile, sets, params, |_| true)
}

/// `anneal` with an additional per-configuration admission predicate,
/// used by the scheduler for residual-capacity accounting. Candidates
/// failing the predicate are rejected without evaluation.
pub fn anneal_filtered(
    request: &Request,
    gamma: AllocationRatio,
    profile: &SystemProfile,
    sets: &CandidateSets,
    params: &SaParams,
    admissible: impl Fn(Configuration) -> bool,
) -> Result<(Configuration, SaTrace)> {
    params.validate()?;
    let grid = configuration_grid(sets);

    // Deterministic start: the first grid point that passes both gates.
    let mut start = None;
    for &config in &grid {
        if !admissible(config) {
            continue;
        }
        let eval = evaluate_configuration(request, config, gamma, profile)?;
        if latency_within_budget(eval.breakdown.total, params.latency_budget) {
            start = Some((config, eval.utility));
            break;
        }
    }
    let (mut current, mut current_utility) = start.ok_or(Error::NoFeasibleConfiguration {
        request_id: request.id.clone(),
    })?;
    let (mut best, mut best_utility) = (current, current_utility);

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut trace = SaTrace::default();
    let mut temperature = params.initial_temperature;
    while temperature > params.min_temperature {
        for iter in 1..=params.iters_per_temp {
            let candidate = neighbor(current, sets, &mut rng);
            let mut row = TraceRow {
                temperature,
                iter,
                scale: candidate.sr_scale,
                steps: candidate.denoise_steps,
                utility: None,
                accepted: false,
                reason: MoveReason::RejectBudget,
            };
            if !admissible(candidate) {
                row.reason = MoveReason::RejectCapacity;
                trace.rejected_moves += 1;
                trace.rows.push(row);
                continue;
            }
            let eval = evaluate_configuration(request, candidate, gamma, profile)?;
            if !latency_within_budget(eval.breakdown.total, params.latency_budget) {
                trace.rejected_moves += 1;
                trace.rows.push(row);
                continue;
            }
            row.utility = Some(eval.utility);
            let delta = eval.utility - current_utility;
            if metropolis_accept(delta, temperature, &mut rng) {
                row.accepted = true;
                row.reason = if delta > 0.0 { MoveReason::Improve } else { MoveReason::Metropolis };
                current = candidate;
                current_utility = eval.utility;
                if current_utility > best_utility {
                    best = current;
                    best_utility = current_utility;
                }
                trace.accepted_moves += 1;
            } else {
                row.reason = MoveReason::RejectMetropolis;
                trace.rejected_moves += 1;
            }
            trace.rows.push(row);
        }
        trace.best_curve.push(best_utility);
        temperature *= params.cooling;
    }
    Ok((best, trace))
}

/// Exhaustive search over the configuration grid under the latency
/// budget. Ties break toward the lexicographically first grid point
/// (scale index, then step index).
pub fn brute_force(
    request: &Request,
    gamma: AllocationRatio,
    profile: &SystemProfile,
    sets: &CandidateSets,
    latency_budget: Option<f64>,
) -> Result<(Configuration, Evaluation)> {
    brute_force_filtered(request, gamma, profile, sets, latency_budget, |_| true)
}

pub fn brute_force_filtered(
    request: &Request,
    gamma: AllocationRatio,
    profile: &SystemProfile,
    sets: &CandidateSets,
    latency_budget: Option<f64>,
    admissible: impl Fn(Configuration) -> bool,
) -> Result<(Configuration, Evaluation)> {
    let mut best: Option<(Configuration, Evaluation)> = None;
    for config in configuration_grid(sets) {
        if !admissible(config) {
            continue;
        }
        let eval = evaluate_configuration(request, config, gamma, profile)?;
        if !latency_within_budget(eval.breakdown.total, latency_budget) {
            continue;
        }
        match &best {
            Some((_, b)) if eval.utility <= b.utility => {}
            _ => best = Some((config, eval)),
        }
    }
    best.ok_or(Error::NoFeasibleConfiguration { request_id: request.id.clone() })
}

/// Aggregate capacity check for a set of chosen configurations
/// (constraints on summed edge and device loads).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub edge_load: f64,
    pub device_load: f64,
    pub edge_budget: f64,
    pub device_budget: f64,
    pub edge_ok: bool,
    pub device_ok: bool,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.edge_ok && self.device_ok
    }
}

fn request_loads(
    request: &Request,
    config: Configuration,
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> Result<(f64, f64)> {
    let initial = crate::domain::initial_resolution(request.target_resolution, config.sr_scale)?;
    let edge = perf::load_gen(config.denoise_steps, initial, profile)
        + perf::load_sr_edge(initial, gamma, profile);
    let device = perf::load_sr_device(initial, gamma, profile);
    Ok((edge, device))
}

/// Sums generation-plus-edge-SR loads against the edge budget and
/// device-SR loads against the device budget.
pub fn check_feasibility(
    configs: &[Configuration],
    requests: &[Request],
    gamma: AllocationRatio,
    profile: &SystemProfile,
) -> Result<FeasibilityReport> {
    assert_eq!(configs.len(), requests.len(), "one configuration per request");
    let mut edge_load = 0.0;
    let mut device_load = 0.0;
    for (request, &config) in requests.iter().zip(configs) {
        let (e, d) = request_loads(request, config, gamma, profile)?;
        edge_load += e;
        device_load += d;
    }
    let edge_budget = profile.edge_capacity * CAPACITY_ROUND_SECS;
    let device_budget = profile.device_capacity * CAPACITY_ROUND_SECS;
    Ok(FeasibilityReport {
        edge_load,
        device_load,
        edge_budget,
        device_budget,
        edge_ok: edge_load <= edge_budget,
        device_ok: device_load <= device_budget,
    })
}

/// Selection policy for the multi-user scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Sa,
    Brute,
    Random,
    #[serde(rename = "nosr")]
    NoSr,
    OneType,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Sa => "sa",
            Policy::Brute => "brute",
            Policy::Random => "random",
            Policy::NoSr => "nosr",
            Policy::OneType => "onetype",
        }
    }
}

/// Outcome for one request in a schedule. `config` is `None` when the
/// request could not fit the residual capacity or latency budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub request: Request,
    pub config: Option<Configuration>,
    pub evaluation: Option<Evaluation>,
    pub trace: Option<SaTrace>,
}

/// Result of scheduling a batch of requests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleResult {
    pub policy: Policy,
    pub entries: Vec<ScheduleEntry>,
    /// Sum of the scheduled requests' utilities.
    pub aggregate_utility: f64,
    pub feasibility: FeasibilityReport,
}

/// Greedy sequential scheduling: requests are processed in arrival
/// order and each selection only considers configurations whose
/// marginal load keeps the cumulative edge/device sums within budget.
///
/// Per-request selection depends on the policy: annealing or exhaustive
/// search over the full grid, a uniform random admissible pick, or
/// one-dimensional step search with the scale pinned to 1 (`NoSr`)
/// or 2 (`OneType`). Infeasible requests are reported in place and the
/// remaining requests are still scheduled.
pub fn schedule(
    requests: &[Request],
    gamma: AllocationRatio,
    profile: &SystemProfile,
    sets: &CandidateSets,
    params: &SaParams,
    policy: Policy,
) -> Result<ScheduleResult> {
    let edge_budget = profile.edge_capacity * CAPACITY_ROUND_SECS;
    let device_budget = profile.device_capacity * CAPACITY_ROUND_SECS;
    let mut edge_used = 0.0;
    let mut device_used = 0.0;
    let mut entries = Vec::with_capacity(requests.len());
    let mut aggregate_utility = 0.0;
    let mut random_rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    for (index, request) in requests.iter().enumerate() {
        let fits = |config: Configuration| -> bool {
            match request_loads(request, config, gamma, profile) {
                Ok((e, d)) => edge_used + e <= edge_budget && device_used + d <= device_budget,
                Err(_) => false,
            }
        };
        let scale_pinned = |pin: u32, config: Configuration| config.sr_scale == pin && fits(config);

        let picked: Result<(Configuration, Option<SaTrace>)> = match policy {
            Policy::Sa => {
                let mut per_request = params.clone();
                per_request.rng_seed = params.rng_seed.wrapping_add(index as u64);
                anneal_filtered(request, gamma, profile, sets, &per_request, fits)
                    .map(|(config, trace)| (config, Some(trace)))
            }
            Policy::Brute => {
                brute_force_filtered(request, gamma, profile, sets, params.latency_budget, fits)
                    .map(|(config, _)| (config, None))
            }
            Policy::Random => {
                let mut admissible = Vec::new();
                for config in configuration_grid(sets) {
                    if !fits(config) {
                        continue;
                    }
                    let eval = evaluate_configuration(request, config, gamma, profile)?;
                    if latency_within_budget(eval.breakdown.total, params.latency_budget) {
                        admissible.push(config);
                    }
                }
                if admissible.is_empty() {
                    Err(Error::NoFeasibleConfiguration { request_id: request.id.clone() })
                } else {
                    Ok((admissible[random_rng.random_range(0..admissible.len())], None))
                }
            }
            Policy::NoSr => brute_force_filtered(request, gamma, profile, sets, params.latency_budget, |c| {
                scale_pinned(1, c)
            })
            .map(|(config, _)| (config, None)),
            Policy::OneType => brute_force_filtered(request, gamma, profile, sets, params.latency_budget, |c| {
                scale_pinned(2, c)
            })
            .map(|(config, _)| (config, None)),
        };

        match picked {
            Ok((config, trace)) => {
                let (e, d) = request_loads(request, config, gamma, profile)?;
                edge_used += e;
                device_used += d;
                let eval = evaluate_configuration(request, config, gamma, profile)?;
                aggregate_utility += eval.utility;
                entries.push(ScheduleEntry {
                    request: request.clone(),
                    config: Some(config),
                    evaluation: Some(eval),
                    trace,
                });
            }
            Err(Error::NoFeasibleConfiguration { .. }) => {
                entries.push(ScheduleEntry {
                    request: request.clone(),
                    config: None,
                    evaluation: None,
                    trace: None,
                });
            }
            Err(other) => return Err(other),
        }
    }

    let feasibility = FeasibilityReport {
        edge_load: edge_used,
        device_load: device_used,
        edge_budget,
        device_budget,
        edge_ok: edge_used <= edge_budget,
        device_ok: device_used <= device_budget,
    };
    Ok(ScheduleResult { policy, entries, aggregate_utility, feasibility })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_setup() -> (SystemProfile, CandidateSets, AllocationRatio) {
        (SystemProfile::default_calibrated(), CandidateSets::default(), AllocationRatio(0.25))
    }

    #[test]
    fn utility_arithmetic() {
        assert_eq!(utility(1.0, 100.0, 0.0), 1.0);
        assert!((utility(0.8, 1.0, 0.5) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn argmax_invariant_under_quality_offset() {
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 1024, 0.02, 0);
        let utilities: Vec<f64> = configuration_grid(&sets)
            .iter()
            .map(|&c| evaluate_configuration(&request, c, gamma, &profile).unwrap())
            .map(|e| utility(e.quality, e.breakdown.total, request.lambda))
            .collect();
        let argmax = |v: &[f64]| {
            v.iter().enumerate().fold(0, |best, (i, &u)| if u > v[best] { i } else { best })
        };
        let shifted: Vec<f64> = utilities.iter().map(|u| u + 3.7).collect();
        assert_eq!(argmax(&utilities), argmax(&shifted));
    }

    #[test]
    fn neighbor_moves_one_coordinate_uniformly() {
        let sets = CandidateSets::new(vec![1, 2, 4], vec![10]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0u32; 2];
        let trials = 10_000;
        for _ in 0..trials {
            let n = neighbor(Configuration::new(2, 10), &sets, &mut rng);
            match n.sr_scale {
                1 => counts[0] += 1,
                4 => counts[1] += 1,
                other => panic!("unexpected scale {other}"),
            }
            assert_eq!(n.denoise_steps, 10);
        }
        // Chi-squared with 1 dof at the 1% level (critical value 6.635).
        let expected = trials as f64 / 2.0;
        let chi2 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum::<f64>();
        assert!(chi2 < 6.635, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn neighbor_singleton_grid_returns_input() {
        let sets = CandidateSets::new(vec![2], vec![30]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Configuration::new(2, 30);
        assert_eq!(neighbor(c, &sets, &mut rng), c);
    }

    #[test]
    fn neighbor_stays_on_grid_and_differs_in_one_coordinate() {
        let sets = CandidateSets::default();
        let grid = configuration_grid(&sets);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &c in &grid {
            for _ in 0..200 {
                let n = neighbor(c, &sets, &mut rng);
                assert!(sets.contains(n));
                let scale_moved = n.sr_scale != c.sr_scale;
                let steps_moved = n.denoise_steps != c.denoise_steps;
                assert!(scale_moved ^ steps_moved, "{c:?} -> {n:?}");
            }
        }
    }

    #[test]
    fn metropolis_accepts_improvements_always() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(metropolis_accept(1e-9, 1e-6, &mut rng));
        }
    }

    #[test]
    fn metropolis_matches_boltzmann_frequency() {
        let delta = -0.1;
        for temperature in [0.1, 1.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let trials = 100_000;
            let accepted = (0..trials)
                .filter(|_| metropolis_accept(delta, temperature, &mut rng))
                .count();
            let expected = (delta / temperature).exp();
            let rate = accepted as f64 / trials as f64;
            assert!(
                (rate - expected).abs() / expected < 0.02,
                "T={temperature}: rate {rate} vs expected {expected}"
            );
        }
    }

    #[test]
    fn anneal_singleton_grid_trivially_returns_it() {
        let (profile, _, gamma) = default_setup();
        let sets = CandidateSets::new(vec![2], vec![30]).unwrap();
        let request = Request::new("r", 1024, 0.02, 0);
        let (config, trace) =
            anneal(&request, gamma, &profile, &sets, &SaParams::default()).unwrap();
        assert_eq!(config, Configuration::new(2, 30));
        assert_eq!(trace.rows.iter().filter(|r| r.reason == MoveReason::RejectBudget).count(), 0);
    }

    #[test]
    fn anneal_is_deterministic_per_seed() {
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 1024, 0.02, 0);
        let params = SaParams::default();
        let a = anneal(&request, gamma, &profile, &sets, &params).unwrap();
        let b = anneal(&request, gamma, &profile, &sets, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn anneal_zero_budget_is_infeasible() {
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 1024, 0.02, 0);
        let params = SaParams { latency_budget: Some(0.0), ..SaParams::default() };
        match anneal(&request, gamma, &profile, &sets, &params) {
            Err(Error::NoFeasibleConfiguration { .. }) => {}
            other => panic!("expected NoFeasibleConfiguration, got {other:?}"),
        }
    }

    #[test]
    fn anneal_never_returns_budget_violations() {
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 1536, 0.05, 0);
        let budget = 40.0;
        for seed in 0..30 {
            let params = SaParams {
                latency_budget: Some(budget),
                rng_seed: seed,
                ..SaParams::default()
            };
            let (config, _) = anneal(&request, gamma, &profile, &sets, &params).unwrap();
            let eval = evaluate_configuration(&request, config, gamma, &profile).unwrap();
            assert!(eval.breakdown.total <= budget);
        }
    }

    #[test]
    fn anneal_temperature_schedule_has_expected_length() {
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 1024, 0.02, 0);
        let params = SaParams::default();
        let (_, trace) = anneal(&request, gamma, &profile, &sets, &params).unwrap();
        // ceil(ln(T_min/T) / ln(alpha)) outer stages.
        let stages = ((params.min_temperature / params.initial_temperature).ln()
            / params.cooling.ln())
        .ceil() as usize;
        assert_eq!(stages, 66);
        assert_eq!(trace.best_curve.len(), stages);
        assert_eq!(trace.rows.len(), stages * params.iters_per_temp as usize);
        assert_eq!(
            trace.accepted_moves + trace.rejected_moves,
            trace.rows.len() as u32
        );
        // Best curve is nondecreasing.
        assert!(trace.best_curve.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn anneal_tracks_brute_force_on_example_grid() {
        let (profile, _, gamma) = default_setup();
        let sets = CandidateSets::new(vec![1, 2, 4], vec![10, 20, 30, 40]).unwrap();
        let request = Request::new("r", 1024, 0.02, 0);
        let (_, oracle) = brute_force(&request, gamma, &profile, &sets, None).unwrap();
        assert!(oracle.utility > 0.0);
        let mut hits = 0;
        for seed in 0..100u64 {
            let params = SaParams { rng_seed: seed, ..SaParams::default() };
            let (config, _) = anneal(&request, gamma, &profile, &sets, &params).unwrap();
            let eval = evaluate_configuration(&request, config, gamma, &profile).unwrap();
            assert!(eval.utility <= oracle.utility + 1e-12);
            if eval.utility >= 0.99 * oracle.utility {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 seeds reached 99% of the oracle");
    }

    #[test]
    fn brute_force_singleton_and_known_optimum() {
        let (profile, sets, gamma) = default_setup();
        let single = CandidateSets::new(vec![4], vec![20]).unwrap();
        let request = Request::new("r", 1024, 0.02, 0);
        let (config, _) = brute_force(&request, gamma, &profile, &single, None).unwrap();
        assert_eq!(config, Configuration::new(4, 20));

        // Exhaustive re-evaluation as the oracle for the default grid.
        let mut best = f64::NEG_INFINITY;
        let mut best_config = None;
        for c in configuration_grid(&sets) {
            let e = evaluate_configuration(&request, c, gamma, &profile).unwrap();
            if e.utility > best {
                best = e.utility;
                best_config = Some(c);
            }
        }
        let (config, eval) = brute_force(&request, gamma, &profile, &sets, None).unwrap();
        assert_eq!(Some(config), best_config);
        assert_eq!(eval.utility, best);
    }

    #[test]
    fn brute_force_breaks_ties_lexicographically() {
        // With lambda = 0 and saturated quality several configurations
        // tie at utility 1; the first grid point among them must win.
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 768, 0.0, 0);
        let (config, eval) = brute_force(&request, gamma, &profile, &sets, None).unwrap();
        assert_eq!(eval.quality, 1.0);
        assert_eq!(config, Configuration::new(1, 10));
    }

    #[test]
    fn feasibility_zero_requests() {
        let (profile, _, gamma) = default_setup();
        let report = check_feasibility(&[], &[], gamma, &profile).unwrap();
        assert_eq!(report.edge_load, 0.0);
        assert_eq!(report.device_load, 0.0);
        assert!(report.feasible());
    }

    #[test]
    fn feasibility_flags_overloaded_edge() {
        let (mut profile, _, gamma) = default_setup();
        profile.edge_capacity = 1e-6;
        let request = Request::new("r", 1024, 0.02, 0);
        let report =
            check_feasibility(&[Configuration::new(1, 50)], &[request], gamma, &profile).unwrap();
        assert!(!report.edge_ok);
        assert!(report.device_ok);
    }

    #[test]
    fn feasibility_is_monotone_in_requests() {
        let (profile, _, gamma) = default_setup();
        let requests: Vec<Request> =
            (0..6).map(|i| Request::new(format!("r{i}"), 1024, 0.02, i as u64)).collect();
        let configs = vec![Configuration::new(2, 30); 6];
        let full = check_feasibility(&configs, &requests, gamma, &profile).unwrap();
        for k in 0..6 {
            let sub = check_feasibility(&configs[..k], &requests[..k], gamma, &profile).unwrap();
            assert!(sub.edge_load <= full.edge_load);
            if full.feasible() {
                assert!(sub.feasible());
            }
        }
    }

    #[test]
    fn schedule_single_request_matches_anneal() {
        let (profile, sets, gamma) = default_setup();
        let request = Request::new("r", 1024, 0.02, 0);
        let params = SaParams::default();
        let result =
            schedule(std::slice::from_ref(&request), gamma, &profile, &sets, &params, Policy::Sa)
                .unwrap();
        let (expected, _) = anneal(&request, gamma, &profile, &sets, &params).unwrap();
        assert_eq!(result.entries[0].config, Some(expected));
        let eval = result.entries[0].evaluation.unwrap();
        assert!((result.aggregate_utility - eval.utility).abs() < 1e-15);
    }

    #[test]
    fn schedule_aggregate_is_sum_of_entries() {
        let (profile, sets, gamma) = default_setup();
        let requests: Vec<Request> = (0..5)
            .map(|i| Request::new(format!("r{i}"), 1024, 0.02, i as u64))
            .collect();
        for policy in [Policy::Sa, Policy::Brute, Policy::Random, Policy::NoSr, Policy::OneType] {
            let result =
                schedule(&requests, gamma, &profile, &sets, &SaParams::default(), policy).unwrap();
            let sum: f64 =
                result.entries.iter().filter_map(|e| e.evaluation.map(|v| v.utility)).sum();
            assert!((result.aggregate_utility - sum).abs() < 1e-12);
            for entry in &result.entries {
                if let Some(c) = entry.config {
                    match policy {
                        Policy::NoSr => assert_eq!(c.sr_scale, 1),
                        Policy::OneType => assert_eq!(c.sr_scale, 2),
                        _ => {}
                    }
                }
            }
        }
    }

    #[test]
    fn schedule_is_deterministic() {
        let (profile, sets, gamma) = default_setup();
        let requests: Vec<Request> =
            (0..4).map(|i| Request::new(format!("r{i}"), 2048, 0.05, i as u64)).collect();
        for policy in [Policy::Sa, Policy::Random] {
            let a = schedule(&requests, gamma, &profile, &sets, &SaParams::default(), policy)
                .unwrap();
            let b = schedule(&requests, gamma, &profile, &sets, &SaParams::default(), policy)
                .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tight_budget_starves_nosr_but_not_sa() {
        // Budget sized between the direct-generation load at 2048 and
        // the scale-4 load, so NoSr cannot place the request while the
        // adaptive policy can.
        let (mut profile, sets, gamma) = default_setup();
        let request = Request::new("r", 2048, 0.05, 0);
        let load_at = |scale: u32, steps: u32| {
            request_loads(&request, Configuration::new(scale, steps), gamma, &profile).unwrap().0
        };
        let lo = load_at(4, 50);
        let hi = load_at(1, 10);
        assert!(lo < hi);
        profile.edge_capacity = 0.5 * (lo + hi) / CAPACITY_ROUND_SECS;

        let nosr =
            schedule(std::slice::from_ref(&request), gamma, &profile, &sets, &SaParams::default(), Policy::NoSr)
                .unwrap();
        assert_eq!(nosr.entries[0].config, None);

        let sa =
            schedule(std::slice::from_ref(&request), gamma, &profile, &sets, &SaParams::default(), Policy::Sa)
                .unwrap();
        let config = sa.entries[0].config.expect("adaptive policy should fit");
        assert!(config.sr_scale >= 2);
    }
}
