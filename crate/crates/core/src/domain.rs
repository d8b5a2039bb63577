//! Core value types: requests, configurations, candidate sets and the
//! allocation ratio, plus request validation and grid enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One user generation task: a target output resolution (square, pixels per
/// side), a preference weight between quality and latency, and the seed that
/// stands in for the textual prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub target_resolution: u32,
    pub lambda: f64,
    pub prompt_seed: u64,
}

impl Request {
    pub fn new(id: impl Into<String>, target_resolution: u32, lambda: f64, prompt_seed: u64) -> Self {
        Request { id: id.into(), target_resolution, lambda, prompt_seed }
    }
}

/// Decision variable pair: super-resolution scale and denoising step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub sr_scale: u32,
    pub denoise_steps: u32,
}

impl Configuration {
    pub fn new(sr_scale: u32, denoise_steps: u32) -> Self {
        Configuration { sr_scale, denoise_steps }
    }
}

/// Finite candidate sets for the SR scale and the denoising step count.
/// Both lists are strictly increasing and non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSets {
    pub scales: Vec<u32>,
    pub steps: Vec<u32>,
}

impl CandidateSets {
    pub fn new(scales: Vec<u32>, steps: Vec<u32>) -> Result<Self> {
        let strictly_increasing =
            |v: &[u32]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]) && v[0] > 0;
        if !strictly_increasing(&scales) {
            return Err(Error::Parse {
                path: "candidate sets".into(),
                message: "scales must be non-empty, positive and strictly increasing".into(),
            });
        }
        if !strictly_increasing(&steps) {
            return Err(Error::Parse {
                path: "candidate sets".into(),
                message: "steps must be non-empty, positive and strictly increasing".into(),
            });
        }
        Ok(CandidateSets { scales, steps })
    }

    /// Index of a configuration on the grid, if it belongs to it.
    pub fn position(&self, config: Configuration) -> Option<(usize, usize)> {
        let si = self.scales.iter().position(|&s| s == config.sr_scale)?;
        let di = self.steps.iter().position(|&d| d == config.denoise_steps)?;
        Some((si, di))
    }

    pub fn contains(&self, config: Configuration) -> bool {
        self.position(config).is_some()
    }
}

impl Default for CandidateSets {
    /// Shipped defaults: scales {1, 2, 4}, steps {10, 20, 30, 40, 50}.
    fn default() -> Self {
        CandidateSets { scales: vec![1, 2, 4], steps: vec![10, 20, 30, 40, 50] }
    }
}

/// Fraction of grid patches routed to the diffusion-branch enhancer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationRatio(pub f64);

impl AllocationRatio {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::WeightOutOfRange { lambda: gamma });
        }
        Ok(AllocationRatio(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Number of foreground cells on a `grid_side` x `grid_side` grid,
    /// using round-half-up of gamma * cell count.
    pub fn foreground_cells(self, grid_side: u32) -> usize {
        let cells = (grid_side * grid_side) as f64;
        (self.0 * cells + 0.5).floor() as usize
    }
}

/// Checks every request invariant: lambda in [0, 1] and the target
/// resolution divisible by `scale * grid_side` for every candidate scale,
/// so that patch boundaries stay integral after downscaling.
pub fn validate_request(raw: Request, sets: &CandidateSets, grid_side: u32) -> Result<Request> {
    if !(0.0..=1.0).contains(&raw.lambda) {
        return Err(Error::WeightOutOfRange { lambda: raw.lambda });
    }
    if raw.target_resolution == 0 {
        return Err(Error::IndivisibleResolution { resolution: 0, divisor: grid_side });
    }
    for &s in &sets.scales {
        let divisor = s * grid_side;
        if raw.target_resolution % divisor != 0 {
            return Err(Error::IndivisibleResolution {
                resolution: raw.target_resolution,
                divisor,
            });
        }
    }
    Ok(raw)
}

/// Full Cartesian product of the candidate sets in scale-major,
/// step-minor order.
pub fn configuration_grid(sets: &CandidateSets) -> Vec<Configuration> {
    let mut grid = Vec::with_capacity(sets.scales.len() * sets.steps.len());
    for &s in &sets.scales {
        for &d in &sets.steps {
            grid.push(Configuration::new(s, d));
        }
    }
    grid
}

/// Initial generation resolution for a target and scale: target / scale.
pub fn initial_resolution(target: u32, scale: u32) -> Result<u32> {
    if scale == 0 || target % scale != 0 {
        return Err(Error::IndivisibleResolution { resolution: target, divisor: scale });
    }
    Ok(target / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_sets() -> CandidateSets {
        CandidateSets::default()
    }

    #[test]
    fn validate_accepts_divisible_resolution() {
        let sets = CandidateSets::new(vec![1, 2, 4], vec![30]).unwrap();
        let r = Request::new("a", 1024, 0.5, 0);
        assert_eq!(validate_request(r.clone(), &sets, 4).unwrap(), r);
    }

    #[test]
    fn validate_rejects_indivisible_resolution() {
        // 1000 / 4 = 250 but 250 is not divisible by the 4x4 grid.
        let sets = CandidateSets::new(vec![1, 2, 4], vec![30]).unwrap();
        let r = Request::new("a", 1000, 0.5, 0);
        match validate_request(r, &sets, 4) {
            Err(Error::IndivisibleResolution { resolution: 1000, divisor: 16 }) => {}
            other => panic!("expected IndivisibleResolution, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_weight_out_of_range() {
        let sets = default_sets();
        let r = Request::new("a", 1024, 1.5, 0);
        match validate_request(r, &sets, 4) {
            Err(Error::WeightOutOfRange { .. }) => {}
            other => panic!("expected WeightOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn validate_is_idempotent() {
        let sets = default_sets();
        let r = Request::new("a", 2048, 0.02, 7);
        let once = validate_request(r, &sets, 4).unwrap();
        let twice = validate_request(once.clone(), &sets, 4).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn grid_is_scale_major() {
        let sets = CandidateSets::new(vec![1, 2], vec![10, 20]).unwrap();
        let grid = configuration_grid(&sets);
        let expected = [(1, 10), (1, 20), (2, 10), (2, 20)];
        assert_eq!(
            grid,
            expected.map(|(s, d)| Configuration::new(s, d)).to_vec()
        );
    }

    #[test]
    fn grid_singleton() {
        let sets = CandidateSets::new(vec![2], vec![30]).unwrap();
        assert_eq!(configuration_grid(&sets), vec![Configuration::new(2, 30)]);
    }

    #[test]
    fn grid_default_has_twelve_configs_for_3x4() {
        let sets = CandidateSets::new(vec![1, 2, 4], vec![10, 20, 30, 40]).unwrap();
        assert_eq!(configuration_grid(&sets).len(), 12);
    }

    #[test]
    fn initial_resolution_divides_exactly() {
        assert_eq!(initial_resolution(1024, 2).unwrap(), 512);
        assert_eq!(initial_resolution(1024, 1).unwrap(), 1024);
        assert_eq!(initial_resolution(2048, 4).unwrap(), 512);
        assert!(initial_resolution(1000, 16).is_err());
    }

    #[test]
    fn foreground_cell_counts_round_half_up() {
        assert_eq!(AllocationRatio(0.25).foreground_cells(4), 4);
        assert_eq!(AllocationRatio(0.5).foreground_cells(4), 8);
        assert_eq!(AllocationRatio(0.125).foreground_cells(4), 2);
        assert_eq!(AllocationRatio(0.0).foreground_cells(4), 0);
        assert_eq!(AllocationRatio(1.0).foreground_cells(4), 16);
    }

    #[test]
    fn candidate_sets_reject_unsorted_or_empty() {
        assert!(CandidateSets::new(vec![], vec![10]).is_err());
        assert!(CandidateSets::new(vec![2, 2], vec![10]).is_err());
        assert!(CandidateSets::new(vec![4, 2], vec![10]).is_err());
        assert!(CandidateSets::new(vec![1], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn grid_length_is_product(ns in 1usize..6, nd in 1usize..6) {
            let scales: Vec<u32> = (1..=ns as u32).map(|i| i * 2).collect();
            let steps: Vec<u32> = (1..=nd as u32).map(|i| i * 10).collect();
            let sets = CandidateSets::new(scales, steps).unwrap();
            prop_assert_eq!(configuration_grid(&sets).len(), ns * nd);
        }

        #[test]
        fn initial_resolution_round_trips(base in 1u32..512, scale in 1u32..8) {
            let target = base * scale;
            let r = initial_resolution(target, scale).unwrap();
            prop_assert_eq!(r * scale, target);
        }
    }
}
