//! Feathered overlap-add reconstruction of enhanced patches, plus the
//! classical resamplers standing in for the two enhancement branches.
//!
//! Adjacent expanded patches share a band of 2*overlap pixels around
//! each interior boundary. Weight ramps across that band are linear and
//! complementary: a patch's weight at band position k (counted from its
//! outer edge) plus the neighbor's weight at the mirrored position sums
//! to exactly 1, so rasterized windows form a partition of unity as long
//! as overlap <= patch_side / 2 (ramps from opposite sides of one patch
//! must not collide).

use serde::{Deserialize, Serialize};

use crate::domain::AllocationRatio;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::partitioner::{grid_partition, select_foreground, PartitionResult};

/// Which sides of a patch participate in an overlap band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeFlags {
    pub left: bool,
    pub right: bool,
    pub top: bool,
    pub bottom: bool,
}

/// A patch placed on the stitch canvas together with its per-pixel
/// blending weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub patch: Image,
    pub x: u32,
    pub y: u32,
    /// Row-major weights, same dimensions as the patch.
    pub weight_window: Vec<f64>,
}

/// Resampling mode of the stand-in enhancers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpscaleMode {
    Nearest,
    Bilinear,
}

/// Weight at distance `k` from the outer edge of a 2*overlap band.
/// Linear, symmetric around 1/2, endpoints 1/(overlap+1) at the outer
/// edge and overlap/(overlap+1) at the inner edge.
fn band_weight(k: u32, overlap: u32) -> f64 {
    let o = overlap as f64;
    let span = 2.0 * o - 1.0;
    let slope = if overlap > 1 { ((o - 1.0) / (o + 1.0)) / span } else { 0.0 };
    0.5 + slope * (2.0 * k as f64 - span) / 2.0
}

fn axis_profile(len: u32, overlap: u32, lo: bool, hi: bool) -> Vec<f64> {
    let band = 2 * overlap;
    (0..len)
        .map(|i| {
            let mut w = 1.0f64;
            if lo && i < band {
                w = w.min(band_weight(i, overlap));
            }
            if hi && i >= len - band.min(len) {
                w = w.min(band_weight(len - 1 - i, overlap));
            }
            w
        })
        .collect()
}

/// Separable feather window: 1 in the interior, ramping across each
/// overlapping border band; non-overlapping sides stay at 1.
pub fn feather_window(patch_w: u32, patch_h: u32, overlap: u32, edges: EdgeFlags) -> Vec<f64> {
    if overlap == 0 {
        return vec![1.0; patch_w as usize * patch_h as usize];
    }
    let horizontal = axis_profile(patch_w, overlap, edges.left, edges.right);
    let vertical = axis_profile(patch_h, overlap, edges.top, edges.bottom);
    let mut window = Vec::with_capacity(patch_w as usize * patch_h as usize);
    for wy in &vertical {
        for wx in &horizontal {
            window.push(wx * wy);
        }
    }
    window
}

/// Splits the image into grid cells expanded by `overlap` pixels on
/// every side that has a neighbor, with feather windows attached. The
/// union of placements covers the whole image.
pub fn extract_overlapping(
    image: &Image,
    grid_side: u32,
    overlap: u32,
) -> Result<Vec<Placement>> {
    let cells = grid_partition(image, grid_side)?;
    let patch_side = cells[0].w.min(cells[0].h);
    if overlap >= patch_side {
        return Err(Error::OverlapTooLarge { overlap, patch_side });
    }
    let mut placements = Vec::with_capacity(cells.len());
    for cell in &cells {
        let edges = EdgeFlags {
            left: cell.x > 0,
            right: cell.x + cell.w < image.width,
            top: cell.y > 0,
            bottom: cell.y + cell.h < image.height,
        };
        let x0 = cell.x - if edges.left { overlap } else { 0 };
        let y0 = cell.y - if edges.top { overlap } else { 0 };
        let x1 = cell.x + cell.w + if edges.right { overlap } else { 0 };
        let y1 = cell.y + cell.h + if edges.bottom { overlap } else { 0 };
        let patch = image.crop(x0, y0, x1 - x0, y1 - y0)?;
        let weight_window = feather_window(patch.width, patch.height, overlap, edges);
        placements.push(Placement { patch, x: x0, y: y0, weight_window });
    }
    Ok(placements)
}

/// Weighted overlap-add: out = sum(w_i * p_i) / sum(w_i) per pixel,
/// clamped to [0, 1]. Accumulation is sequential in placement order;
/// reordering placements changes results only within rounding.
pub fn stitch(placements: &[Placement], canvas_w: u32, canvas_h: u32) -> Result<Image> {
    let channels = placements.first().map_or(1, |p| p.patch.channels);
    let pixel_count = canvas_w as usize * canvas_h as usize;
    let mut weight_sum = vec![0.0f64; pixel_count];
    let mut value_sum = vec![0.0f64; pixel_count * channels as usize];

    for placement in placements {
        let p = &placement.patch;
        if p.channels != channels {
            return Err(Error::DimensionMismatch {
                expected: format!("{channels} channels"),
                actual: format!("{} channels", p.channels),
            });
        }
        if placement.x + p.width > canvas_w || placement.y + p.height > canvas_h {
            return Err(Error::PlacementOutOfBounds {
                x: placement.x,
                y: placement.y,
                w: p.width,
                h: p.height,
            });
        }
        if placement.weight_window.len() != p.width as usize * p.height as usize {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", p.width as usize * p.height as usize),
                actual: format!("{}", placement.weight_window.len()),
            });
        }
        for py in 0..p.height {
            let cy = (placement.y + py) as usize;
            for px in 0..p.width {
                let cx = (placement.x + px) as usize;
                let w = placement.weight_window[(py * p.width + px) as usize];
                let canvas_index = cy * canvas_w as usize + cx;
                weight_sum[canvas_index] += w;
                for c in 0..channels {
                    value_sum[canvas_index * channels as usize + c as usize] +=
                        w * p.get(px, py, c);
                }
            }
        }
    }

    let mut pixels = Vec::with_capacity(pixel_count * channels as usize);
    for (i, &w) in weight_sum.iter().enumerate() {
        if w <= 0.0 {
            return Err(Error::UncoveredPixel {
                x: (i % canvas_w as usize) as u32,
                y: (i / canvas_w as usize) as u32,
            });
        }
        for c in 0..channels as usize {
            pixels.push((value_sum[i * channels as usize + c] / w).clamp(0.0, 1.0));
        }
    }
    Image::new(canvas_w, canvas_h, channels, pixels)
}

/// Integer-factor upscale. Nearest replicates pixels; bilinear samples
/// with output pixel centers mapped to (i + 0.5) / scale - 0.5 in
/// source coordinates, edge-clamped.
pub fn upscale(image: &Image, scale: u32, mode: UpscaleMode) -> Image {
    assert!(scale >= 1, "scale must be at least 1");
    if scale == 1 {
        return image.clone();
    }
    let out_w = image.width * scale;
    let out_h = image.height * scale;
    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize * image.channels as usize);
    match mode {
        UpscaleMode::Nearest => {
            for y in 0..out_h {
                let sy = y / scale;
                for x in 0..out_w {
                    let sx = x / scale;
                    for c in 0..image.channels {
                        pixels.push(image.get(sx, sy, c));
                    }
                }
            }
        }
        UpscaleMode::Bilinear => {
            let clamp = |v: i64, max: u32| v.clamp(0, max as i64 - 1) as u32;
            let coords = |i: u32| -> (i64, f64) {
                let src = (i as f64 + 0.5) / scale as f64 - 0.5;
                let base = src.floor();
                (base as i64, src - base)
            };
            for y in 0..out_h {
                let (y0, fy) = coords(y);
                let (cy0, cy1) = (clamp(y0, image.height), clamp(y0 + 1, image.height));
                for x in 0..out_w {
                    let (x0, fx) = coords(x);
                    let (cx0, cx1) = (clamp(x0, image.width), clamp(x0 + 1, image.width));
                    for c in 0..image.channels {
                        let p00 = image.get(cx0, cy0, c);
                        let p10 = image.get(cx1, cy0, c);
                        let p01 = image.get(cx0, cy1, c);
                        let p11 = image.get(cx1, cy1, c);
                        let top = p00 * (1.0 - fx) + p10 * fx;
                        let bottom = p01 * (1.0 - fx) + p11 * fx;
                        pixels.push(top * (1.0 - fy) + bottom * fy);
                    }
                }
            }
        }
    }
    Image::new(out_w, out_h, image.channels, pixels).expect("upscale produces a valid image")
}

/// Hybrid enhancement: variance-ranked foreground cells take the
/// high-fidelity branch (bilinear), background cells the fast branch
/// (nearest). Each cell's patch is cut from its branch's upscaled image
/// with overlap margins and positions scaled to the target resolution,
/// then everything is feather-stitched.
pub fn hybrid_enhance(
    image: &Image,
    grid_side: u32,
    gamma: AllocationRatio,
    scale: u32,
    overlap: u32,
) -> Result<Image> {
    let partition = select_foreground(image, grid_side, gamma)?;
    hybrid_enhance_with_partition(image, &partition, scale, overlap)
}

/// `hybrid_enhance` with an externally computed branch assignment.
pub fn hybrid_enhance_with_partition(
    image: &Image,
    partition: &PartitionResult,
    scale: u32,
    overlap: u32,
) -> Result<Image> {
    let placements = extract_overlapping(image, partition.grid_side, overlap)?;
    let need_fg = !partition.foreground.is_empty();
    let need_bg = !partition.background.is_empty();
    let fg_image = need_fg.then(|| upscale(image, scale, UpscaleMode::Bilinear));
    let bg_image = need_bg.then(|| upscale(image, scale, UpscaleMode::Nearest));

    let mut scaled = Vec::with_capacity(placements.len());
    for (cell_index, placement) in placements.iter().enumerate() {
        let branch = if partition.is_foreground(cell_index) {
            fg_image.as_ref().expect("foreground branch image")
        } else {
            bg_image.as_ref().expect("background branch image")
        };
        let x = placement.x * scale;
        let y = placement.y * scale;
        let w = placement.patch.width * scale;
        let h = placement.patch.height * scale;
        let patch = branch.crop(x, y, w, h)?;
        let edges = EdgeFlags {
            left: placement.x > 0,
            right: placement.x + placement.patch.width < image.width,
            top: placement.y > 0,
            bottom: placement.y + placement.patch.height < image.height,
        };
        let weight_window = feather_window(w, h, overlap * scale, edges);
        scaled.push(Placement { patch, x, y, weight_window });
    }
    stitch(&scaled, image.width * scale, image.height * scale)
}
