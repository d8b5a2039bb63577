//! Region-aware grid partitioning: per-cell spatial variance, foreground
//! selection at a given allocation ratio, and IoU evaluation against
//! reference masks.

use serde::Serialize;

use crate::domain::AllocationRatio;
use crate::error::{Error, Result};
use crate::image::Image;

/// One cell of the partition grid, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellRect {
    pub index: usize,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Splits the image into `grid_side`^2 equal cells in row-major order.
/// The cells tile the image exactly; both dimensions must be divisible
/// by `grid_side`.
pub fn grid_partition(image: &Image, grid_side: u32) -> Result<Vec<CellRect>> {
    if grid_side == 0 || image.width % grid_side != 0 {
        return Err(Error::IndivisibleResolution { resolution: image.width, divisor: grid_side });
    }
    if image.height % grid_side != 0 {
        return Err(Error::IndivisibleResolution { resolution: image.height, divisor: grid_side });
    }
    let cw = image.width / grid_side;
    let ch = image.height / grid_side;
    let mut cells = Vec::with_capacity((grid_side * grid_side) as usize);
    for row in 0..grid_side {
        for col in 0..grid_side {
            cells.push(CellRect {
                index: (row * grid_side + col) as usize,
                x: col * cw,
                y: row * ch,
                w: cw,
                h: ch,
            });
        }
    }
    Ok(cells)
}

/// Population variance of the cell's pixel values pooled across all
/// channels. Values are accumulated in sorted order, so the result
/// depends only on the multiset of values, not on pixel order.
pub fn patch_variance(image: &Image, cell: &CellRect) -> f64 {
    let mut values =
        Vec::with_capacity(cell.w as usize * cell.h as usize * image.channels as usize);
    for y in cell.y..cell.y + cell.h {
        for x in cell.x..cell.x + cell.w {
            for c in 0..image.channels {
                values.push(image.get(x, y, c));
            }
        }
    }
    values.sort_by(f64::total_cmp);
    if values.is_empty() || values[0] == values[values.len() - 1] {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Variance partition of an image: per-cell variances and the
/// foreground/background index sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionResult {
    pub grid_side: u32,
    pub width: u32,
    pub height: u32,
    pub gamma: AllocationRatio,
    /// Row-major per-cell variances.
    pub variances: Vec<f64>,
    /// Cell indices selected for the high-fidelity branch, ascending.
    pub foreground: Vec<usize>,
    /// The complement, ascending.
    pub background: Vec<usize>,
}

impl PartitionResult {
    pub fn is_foreground(&self, cell_index: usize) -> bool {
        self.foreground.binary_search(&cell_index).is_ok()
    }

    /// Binary rasterization of the foreground cells.
    pub fn foreground_mask(&self) -> Image {
        let mut mask = Image::constant(self.width, self.height, 1, 0.0).unwrap();
        let cw = self.width / self.grid_side;
        let ch = self.height / self.grid_side;
        for &cell in &self.foreground {
            let col = (cell as u32) % self.grid_side;
            let row = (cell as u32) / self.grid_side;
            for y in row * ch..(row + 1) * ch {
                for x in col * cw..(col + 1) * cw {
                    mask.set(x, y, 0, 1.0);
                }
            }
        }
        mask
    }
}

/// Ranks cells by spatial variance and selects the top
/// round(gamma * grid_side^2) as foreground. Equal variances break
/// toward the lower cell index.
pub fn select_foreground(
    image: &Image,
    grid_side: u32,
    gamma: AllocationRatio,
) -> Result<PartitionResult> {
    let cells = grid_partition(image, grid_side)?;
    let variances: Vec<f64> = cells.iter().map(|c| patch_variance(image, c)).collect();
    let mut order: Vec<usize> = (0..variances.len()).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));
    let count = gamma.foreground_cells(grid_side).min(order.len());
    let mut foreground: Vec<usize> = order[..count].to_vec();
    let mut background: Vec<usize> = order[count..].to_vec();
    foreground.sort_unstable();
    background.sort_unstable();
    Ok(PartitionResult {
        grid_side,
        width: image.width,
        height: image.height,
        gamma,
        variances,
        foreground,
        background,
    })
}

/// IoU between the rasterized foreground mask and a reference mask
/// binarized at `threshold` (values >= threshold count as foreground).
/// Returns 1.0 when both masks are empty.
pub fn mask_iou(result: &PartitionResult, reference: &Image, threshold: f64) -> Result<f64> {
    if reference.channels != 1 {
        return Err(Error::DimensionMismatch {
            expected: "single-channel reference".into(),
            actual: format!("{} channels", reference.channels),
        });
    }
    if reference.width != result.width || reference.height != result.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", result.width, result.height),
            actual: format!("{}x{}", reference.width, reference.height),
        });
    }
    let mask = result.foreground_mask();
    let mut intersection = 0u64;
    let mut union = 0u64;
    for (m, r) in mask.pixels.iter().zip(&reference.pixels) {
        let a = *m >= 0.5;
        let b = *r >= threshold;
        if a && b {
            intersection += 1;
        }
        if a || b {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(intersection as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32, channels: u32) -> Image {
        let pixels = (0..w as usize * h as usize * channels as usize)
            .map(|_| rng.random::<f64>())
            .collect();
        Image::new(w, h, channels, pixels).unwrap()
    }

    #[test]
    fn grid_partition_tiles_exactly() {
        let image = Image::constant(8, 8, 1, 0.5).unwrap();
        let cells = grid_partition(&image, 4).unwrap();
        assert_eq!(cells.len(), 16);
        assert!(cells.iter().all(|c| c.w == 2 && c.h == 2));
        let covered: u32 = cells.iter().map(|c| c.w * c.h).sum();
        assert_eq!(covered, 64);

        let big = Image::constant(1024, 1024, 3, 0.5).unwrap();
        let cells = grid_partition(&big, 4).unwrap();
        assert!(cells.iter().all(|c| c.w == 256 && c.h == 256));

        let odd = Image::constant(10, 10, 1, 0.5).unwrap();
        assert!(matches!(grid_partition(&odd, 4), Err(Error::IndivisibleResolution { .. })));
    }

    #[test]
    fn variance_of_constant_patch_is_zero() {
        let image = Image::constant(8, 8, 3, 0.7).unwrap();
        for cell in grid_partition(&image, 4).unwrap() {
            assert_eq!(patch_variance(&image, &cell), 0.0);
        }
    }

    #[test]
    fn variance_of_two_point_patch() {
        let image = Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let cell = CellRect { index: 0, x: 0, y: 0, w: 2, h: 1 };
        assert_eq!(patch_variance(&image, &cell), 0.25);
    }

    #[test]
    fn variance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let image = random_image(&mut rng, 16, 16, 3);
        for cell in grid_partition(&image, 4).unwrap() {
            // Independent oracle: E[x^2] - E[x]^2 over the raw order.
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut n = 0.0;
            for y in cell.y..cell.y + cell.h {
                for x in cell.x..cell.x + cell.w {
                    for c in 0..image.channels {
                        let v = image.get(x, y, c);
                        sum += v;
                        sumsq += v * v;
                        n += 1.0;
                    }
                }
            }
            let oracle = sumsq / n - (sum / n) * (sum / n);
            assert!((patch_variance(&image, &cell) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_is_exactly_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut image = random_image(&mut rng, 8, 8, 1);
        let cells = grid_partition(&image, 4).unwrap();
        let before: Vec<f64> = cells.iter().map(|c| patch_variance(&image, c)).collect();
        // Shuffle the pixels inside cell 5 in place.
        let cell = cells[5];
        let mut values: Vec<f64> = (cell.y..cell.y + cell.h)
            .flat_map(|y| (cell.x..cell.x + cell.w).map(move |x| (x, y)))
            .map(|(x, y)| image.get(x, y, 0))
            .collect();
        values.shuffle(&mut rng);
        let mut it = values.into_iter();
        for y in cell.y..cell.y + cell.h {
            for x in cell.x..cell.x + cell.w {
                image.set(x, y, 0, it.next().unwrap());
            }
        }
        let after: Vec<f64> = cells.iter().map(|c| patch_variance(&image, c)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn constant_shift_preserves_variances_and_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pixels: Vec<f64> = (0..32 * 32).map(|_| rng.random::<f64>() * 0.5).collect();
        let image = Image::new(32, 32, 1, pixels.clone()).unwrap();
        let shifted =
            Image::new(32, 32, 1, pixels.iter().map(|v| v + 0.25).collect()).unwrap();
        let a = select_foreground(&image, 4, AllocationRatio(0.25)).unwrap();
        let b = select_foreground(&shifted, 4, AllocationRatio(0.25)).unwrap();
        for (va, vb) in a.variances.iter().zip(&b.variances) {
            assert!((va - vb).abs() < 1e-12);
        }
        assert_eq!(a.foreground, b.foreground);
    }

    #[test]
    fn scaling_scales_variances_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pixels: Vec<f64> = (0..32 * 32).map(|_| rng.random::<f64>()).collect();
        let image = Image::new(32, 32, 1, pixels.clone()).unwrap();
        let s = 0.375;
        let scaled = Image::new(32, 32, 1, pixels.iter().map(|v| v * s).collect()).unwrap();
        let a = select_foreground(&image, 4, AllocationRatio(0.5)).unwrap();
        let b = select_foreground(&scaled, 4, AllocationRatio(0.5)).unwrap();
        for (va, vb) in a.variances.iter().zip(&b.variances) {
            assert!((vb - s * s * va).abs() < 1e-12, "{vb} vs {}", s * s * va);
        }
        assert_eq!(a.foreground, b.foreground);
    }

    #[test]
    fn selection_counts_match_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let image = random_image(&mut rng, 64, 64, 3);
        assert_eq!(select_foreground(&image, 4, AllocationRatio(0.5)).unwrap().foreground.len(), 8);
        assert_eq!(
            select_foreground(&image, 4, AllocationRatio(0.25)).unwrap().foreground.len(),
            4
        );
        let all = select_foreground(&image, 4, AllocationRatio(1.0)).unwrap();
        assert_eq!(all.foreground, (0..16).collect::<Vec<_>>());
        assert!(all.background.is_empty());
        let none = select_foreground(&image, 4, AllocationRatio(0.0)).unwrap();
        assert!(none.foreground.is_empty());
        assert_eq!(none.background.len(), 16);
    }

    #[test]
    fn constant_image_ties_break_by_index() {
        let image = Image::constant(64, 64, 1, 0.5).unwrap();
        let result = select_foreground(&image, 4, AllocationRatio(0.25)).unwrap();
        assert_eq!(result.foreground, vec![0, 1, 2, 3]);
    }

    #[test]
    fn foreground_variances_dominate_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let image = random_image(&mut rng, 32, 32, 1);
            let r = select_foreground(&image, 4, AllocationRatio(0.25)).unwrap();
            let fg_min =
                r.foreground.iter().map(|&i| r.variances[i]).fold(f64::INFINITY, f64::min);
            let bg_max =
                r.background.iter().map(|&i| r.variances[i]).fold(f64::NEG_INFINITY, f64::max);
            assert!(fg_min >= bg_max);
        }
    }

    #[test]
    fn selection_independent_of_cell_evaluation_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let image = random_image(&mut rng, 32, 32, 1);
        let cells = grid_partition(&image, 4).unwrap();
        let mut shuffled = cells.clone();
        shuffled.shuffle(&mut rng);
        let mut variances = vec![0.0; cells.len()];
        for cell in &shuffled {
            variances[cell.index] = patch_variance(&image, cell);
        }
        let direct: Vec<f64> = cells.iter().map(|c| patch_variance(&image, c)).collect();
        assert_eq!(variances, direct);
    }

    #[test]
    fn iou_examples() {
        let image = Image::constant(64, 64, 1, 0.5).unwrap();
        let result = select_foreground(&image, 4, AllocationRatio(0.25)).unwrap();

        // Identical masks.
        let reference = result.foreground_mask();
        assert_eq!(mask_iou(&result, &reference, 0.5).unwrap(), 1.0);

        // Disjoint non-empty masks.
        let mut disjoint = Image::constant(64, 64, 1, 0.0).unwrap();
        for y in 32..64 {
            for x in 0..64 {
                disjoint.set(x, y, 0, 1.0);
            }
        }
        assert_eq!(mask_iou(&result, &disjoint, 0.5).unwrap(), 0.0);

        // Empty foreground vs empty reference.
        let empty = select_foreground(&image, 4, AllocationRatio(0.0)).unwrap();
        let zeros = Image::constant(64, 64, 1, 0.0).unwrap();
        assert_eq!(mask_iou(&empty, &zeros, 0.5).unwrap(), 1.0);

        // Mismatched shapes are an error.
        let wrong = Image::constant(32, 32, 1, 0.0).unwrap();
        assert!(matches!(mask_iou(&result, &wrong, 0.5), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn iou_eight_cell_masks_overlapping_in_four() {
        // Foreground = cells 0..8 (top half); reference covers cells
        // 4..12 (middle half). Intersection 4 cells, union 12.
        let mut image = Image::constant(64, 64, 1, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for y in 0..32 {
            for x in 0..64 {
                image.set(x, y, 0, 0.5 + 0.5 * rng.random::<f64>());
            }
        }
        let result = select_foreground(&image, 4, AllocationRatio(0.5)).unwrap();
        assert_eq!(result.foreground, (0..8).collect::<Vec<_>>());
        let mut reference = Image::constant(64, 64, 1, 0.0).unwrap();
        for y in 16..48 {
            for x in 0..64 {
                reference.set(x, y, 0, 1.0);
            }
        }
        let iou = mask_iou(&result, &reference, 0.5).unwrap();
        assert_eq!(iou, 4.0 / 12.0);
    }

    #[test]
    fn iou_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_image(&mut rng, 32, 32, 1);
        let b = random_image(&mut rng, 32, 32, 1);
        let pa = select_foreground(&a, 4, AllocationRatio(0.25)).unwrap();
        let pb = select_foreground(&b, 4, AllocationRatio(0.5)).unwrap();
        let ab = mask_iou(&pa, &pb.foreground_mask(), 0.5).unwrap();
        let ba = mask_iou(&pb, &pa.foreground_mask(), 0.5).unwrap();
        assert_eq!(ab, ba);
    }
}
