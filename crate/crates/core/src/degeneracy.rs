//! Synthesis of reference images invariant under one-parameter subgroups of
//! SL(3), i.e. unobservable configurations.
//!
//! An image whose intensity is constant along the orbits of exp(t D) for
//! some D in sl(3) is stabilized by that subgroup: the induced action cannot
//! be distinguished from the identity, so the cost Hessian acquires a null
//! direction along D. Generation seeds a few orbits with random intensities
//! and fills the rest of the raster by a smooth inverse-square-distance
//! blend of the orbit intensities; distance ratios vary slowly along the
//! flow, so the result is approximately invariant while keeping smooth
//! gradients for the Hessian tests.

use crate::image::{Calibration, RasterImage, SphericalImage};
use crate::sl3::{basis, group_exp, AlgebraElement};
use crate::sphere::act_rho;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_N_SEEDS: usize = 14;
pub const DEFAULT_N_STEPS: usize = 2400;
/// Default orbit parameter span. Exceeds pi * sqrt(2), so rotation orbits of
/// the unit-norm basis generators close into full rings.
pub const DEFAULT_T_SPAN: f64 = 4.5;
pub const DEFAULT_RNG_SEED: u64 = 42;

/// Softening length (pixels squared) of the inverse-square-distance blend.
/// About one pixel: sharp enough for strong texture, wide enough that
/// bilinear resampling of the profile stays accurate.
const BLEND_EPSILON: f64 = 25.0;
/// Pixel bucket size of the segment spatial hash used for exact distances.
const BUCKET: f64 = 4.0;
/// Beyond this distance (pixels) the coarse rasterized distance is used
/// as-is; blend weights there are too small for sub-pixel accuracy to
/// matter.
const REFINE_RADIUS: f64 = 30.0;
/// Orbit samples further apart than this (pixels) are not joined into a
/// segment; protects against wrap-around jumps of the projection.
const MAX_SEGMENT: f64 = 3.0;

#[derive(Debug, Error)]
pub enum DegeneracyError {
    #[error("no orbit point lands in the raster grid")]
    EmptyRaster,
}

/// A one-parameter subgroup generator with a human-readable label.
#[derive(Debug, Clone)]
pub struct SymmetryGenerator {
    pub d: AlgebraElement,
    pub label: String,
}

impl SymmetryGenerator {
    pub fn new(d: AlgebraElement, label: impl Into<String>) -> Self {
        Self { d, label: label.into() }
    }
}

/// Residual statistics of a stabilizer check.
#[derive(Debug, Clone, Copy)]
pub struct StabilizerReport {
    pub mean_abs: f64,
    pub max_abs: f64,
    /// Number of (sample, t) pairs with both rays in-domain.
    pub samples: usize,
}

/// Six representative generators spanning qualitatively distinct subgroup
/// types. All are unit Frobenius norm.
pub fn builtin_generators() -> Vec<SymmetryGenerator> {
    let b = |j: usize| basis(j).expect("basis index in range");
    let mix = |x: AlgebraElement, y: AlgebraElement| {
        AlgebraElement::project((x.matrix() + y.matrix()) / 2f64.sqrt())
    };
    vec![
        SymmetryGenerator::new(b(5), "rotation about the principal axis (B5)"),
        SymmetryGenerator::new(b(1), "anisotropic scaling (B1)"),
        SymmetryGenerator::new(b(2), "shear (B2)"),
        SymmetryGenerator::new(b(8), "zoom (B8)"),
        SymmetryGenerator::new(mix(b(1), b(5)), "parabolic scaling-rotation ((B1+B5)/sqrt(2))"),
        SymmetryGenerator::new(mix(b(5), b(8)), "spiral ((B5+B8)/sqrt(2))"),
    ]
}

/// Renders a raster whose intensity is constant along the orbits of
/// exp(t gen.d). Seeds are drawn deterministically from `rng_seed`, each
/// orbit is traced over `n_steps` parameter values in [-t_span, t_span], and
/// off-orbit pixels are filled with the distance-weighted blend of the orbit
/// intensities.
#[allow(clippy::too_many_arguments)]
pub fn generate_degenerate_image(
    gen: &SymmetryGenerator,
    width: usize,
    height: usize,
    calib: Calibration,
    n_seeds: usize,
    n_steps: usize,
    t_span: f64,
    rng_seed: u64,
) -> Result<RasterImage, DegeneracyError> {
    assert!(n_seeds >= 1 && n_steps >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // Distance fields live on an extended virtual grid so orbit segments
    // just outside the visible raster still shape the fill; otherwise the
    // clipping rectangle itself would break the flow invariance near the
    // border.
    let margin = width.max(height) / 2;
    let (ew, eh) = (width + 2 * margin, height + 2 * margin);
    let n_pixels = width * height;
    let mut num = vec![0.0; n_pixels];
    let mut den = vec![0.0; n_pixels];
    let mut mask = vec![false; ew * eh];
    let mut any_hit = false;

    for _ in 0..n_seeds {
        let u = rng.gen_range(0.0..(width as f64 - 1.0));
        let v = rng.gen_range(0.0..(height as f64 - 1.0));
        let intensity: f64 = rng.gen_range(0.0..1.0);
        let seed_ray = calib.pixel_to_ray(u, v);

        // Trace the orbit in extended pixel coordinates.
        mask.iter_mut().for_each(|m| *m = false);
        let mut trace: Vec<Option<(f64, f64)>> = Vec::with_capacity(n_steps);
        let mut hit = false;
        let mut visible_hit = false;
        for step in 0..n_steps {
            let t = -t_span + 2.0 * t_span * step as f64 / (n_steps - 1) as f64;
            let e = group_exp(&gen.d.scale(t));
            let point = act_rho(&e, &seed_ray);
            let mut sample = None;
            if let Some((pu, pv)) = calib.ray_to_pixel(&point) {
                let x = pu + margin as f64;
                let y = pv + margin as f64;
                if x >= 0.0 && y >= 0.0 && x <= (ew - 1) as f64 && y <= (eh - 1) as f64 {
                    mask[y.round() as usize * ew + x.round() as usize] = true;
                    sample = Some((x, y));
                    hit = true;
                    visible_hit |= pu >= -0.5
                        && pv >= -0.5
                        && pu <= width as f64 - 0.5
                        && pv <= height as f64 - 0.5;
                }
            }
            trace.push(sample);
        }
        if !hit {
            continue;
        }
        any_hit |= visible_hit;

        // Polyline segments between consecutive in-bounds samples, indexed
        // by a spatial hash for exact point-to-curve distances.
        let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
        for pair in trace.windows(2) {
            if let (Some(a), Some(b)) = (pair[0], pair[1]) {
                let len2 = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
                if len2 <= MAX_SEGMENT * MAX_SEGMENT {
                    segments.push((a, b));
                }
            }
        }
        if segments.is_empty() {
            // Degenerate orbit (e.g. a fixed point): fall back to the
            // isolated samples themselves.
            segments.extend(trace.iter().flatten().map(|&p| (p, p)));
        }
        let hash = SegmentHash::build(&segments, ew as f64, eh as f64);

        // Coarse rasterized distance bounds the exact search radius.
        let dist_sq = distance_transform(ew, eh, &mask);
        for j in 0..height {
            for i in 0..width {
                let x = (i + margin) as f64;
                let y = (j + margin) as f64;
                let coarse = dist_sq[(j + margin) * ew + i + margin].sqrt();
                let d_sq = if coarse <= REFINE_RADIUS {
                    // Rounding a splat moves it at most half a pixel per
                    // axis, so the true curve lies within coarse + sqrt(2)/2.
                    hash.min_distance_sq(&segments, x, y, coarse + 0.75)
                } else {
                    coarse * coarse
                };
                let w = 1.0 / (d_sq + BLEND_EPSILON);
                num[j * width + i] += w * intensity;
                den[j * width + i] += w;
            }
        }
    }
    if !any_hit {
        return Err(DegeneracyError::EmptyRaster);
    }
    let data: Vec<f64> = num.iter().zip(&den).map(|(n, d)| n / d).collect();
    Ok(RasterImage::new(width, height, data, calib).expect("blend stays in [0, 1]"))
}

/// Spatial hash of polyline segments over `BUCKET`-pixel cells, used to
/// query the exact minimum distance from a pixel to the traced orbit. The
/// rasterized distance transform alone wobbles by half a pixel with the
/// splat rounding, which is enough to break flow invariance of the blend.
struct SegmentHash {
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl SegmentHash {
    fn build(segments: &[((f64, f64), (f64, f64))], width: f64, height: f64) -> Self {
        let nx = (width / BUCKET).ceil() as usize + 1;
        let ny = (height / BUCKET).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (idx, &(a, b)) in segments.iter().enumerate() {
            let x0 = ((a.0.min(b.0) / BUCKET).floor().max(0.0) as usize).min(nx - 1);
            let x1 = ((a.0.max(b.0) / BUCKET).floor().max(0.0) as usize).min(nx - 1);
            let y0 = ((a.1.min(b.1) / BUCKET).floor().max(0.0) as usize).min(ny - 1);
            let y1 = ((a.1.max(b.1) / BUCKET).floor().max(0.0) as usize).min(ny - 1);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    cells[cy * nx + cx].push(idx as u32);
                }
            }
        }
        Self { nx, ny, cells }
    }

    /// Minimum squared distance from (x, y) to any segment within `radius`.
    /// Returns radius^2 if no segment is found; the caller's coarse bound
    /// guarantees the true minimum is below that for the radii used here.
    fn min_distance_sq(
        &self,
        segments: &[((f64, f64), (f64, f64))],
        x: f64,
        y: f64,
        radius: f64,
    ) -> f64 {
        let x0 = (((x - radius) / BUCKET).floor().max(0.0) as usize).min(self.nx - 1);
        let x1 = (((x + radius) / BUCKET).floor().max(0.0) as usize).min(self.nx - 1);
        let y0 = (((y - radius) / BUCKET).floor().max(0.0) as usize).min(self.ny - 1);
        let y1 = (((y + radius) / BUCKET).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best = radius * radius;
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &idx in &self.cells[cy * self.nx + cx] {
                    let (a, b) = segments[idx as usize];
                    best = best.min(point_segment_distance_sq(x, y, a, b));
                }
            }
        }
        best
    }
}

fn point_segment_distance_sq(x: f64, y: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x - a.0) * dx + (y - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (a.0 + t * dx, a.1 + t * dy);
    (x - px).powi(2) + (y - py).powi(2)
}

/// Squared Euclidean distance to the nearest masked pixel, by the two-pass
/// separable lower-envelope transform.
fn distance_transform(width: usize, height: usize, mask: &[bool]) -> Vec<f64> {
    const INF: f64 = 1e20;
    let mut field: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { INF }).collect();
    let mut column = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            column[y] = field[y * width + x];
        }
        let out = dt_1d(&column);
        for y in 0..height {
            field[y * width + x] = out[y];
        }
    }
    let mut row = vec![0.0; width];
    for y in 0..height {
        row.copy_from_slice(&field[y * width..(y + 1) * width]);
        let out = dt_1d(&row);
        field[y * width..(y + 1) * width].copy_from_slice(&out);
    }
    field
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sq = |i: usize| (i * i) as f64;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + sq(q)) - (f[p] + sq(p))) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *out = (q as f64 - p as f64).powi(2) + f[p];
    }
    d
}

/// Measures how well exp(t gen.d) stabilizes an image: the mean and maximum
/// absolute intensity difference between each sampled ray and its orbit
/// image, over `n_samples` interior rays and all `t_values`. Pairs with
/// either ray out of domain are skipped.
pub fn verify_stabilizer(
    image: &SphericalImage,
    gen: &SymmetryGenerator,
    t_values: &[f64],
    n_samples: usize,
    rng_seed: u64,
) -> StabilizerReport {
    let raster = image.raster();
    let calib = *raster.calibration();
    let (w, h) = (raster.width() as f64, raster.height() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut count = 0usize;
    for _ in 0..n_samples {
        let u = rng.gen_range(1.0..(w - 2.0));
        let v = rng.gen_range(1.0..(h - 2.0));
        let x = calib.pixel_to_ray(u, v);
        for &t in t_values {
            // t = 0 is the identity; keep its residual exactly zero instead
            // of exposing renormalization roundoff.
            let y = if t == 0.0 { x } else { act_rho(&group_exp(&gen.d.scale(t)), &x) };
            if !image.contains(&x) || !image.contains(&y) {
                continue;
            }
            let r = (image.sample(&y) - image.sample(&x)).abs();
            sum += r;
            max = max.max(r);
            count += 1;
        }
    }
    StabilizerReport {
        mean_abs: if count > 0 { sum / count as f64 } else { 0.0 },
        max_abs: max,
        samples: count,
    }
}
