//! Analytic test images for oracles, fixtures and simulations.

use crate::image::{Calibration, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth band-limited texture: a sum of `count` random plane sinusoids with
/// pixel wavelengths in `[min_wavelength, max_wavelength]`, normalized into
/// [0.05, 0.95] and tapered to zero near the border.
///
/// The taper matches the zero extension outside the image domain, so warps
/// that move the domain boundary change the photometric cost continuously
/// and boundary masking does not bias integral quantities.
pub fn sinusoid_field(
    width: usize,
    height: usize,
    seed: u64,
    count: usize,
    min_wavelength: f64,
    max_wavelength: f64,
) -> RasterImage {
    sinusoid_field_tapered(width, height, seed, count, min_wavelength, max_wavelength, 4.0, 8.0)
}

/// [`sinusoid_field`] with an explicit border dead zone: intensity is exactly
/// zero within `pad` pixels of the border, then ramps up over `margin`
/// pixels. Oracle tests use a generous pad so warped samples near the grid
/// boundary (where gradients are masked) carry no signal and cannot bias
/// finite differences of the cost.
#[allow(clippy::too_many_arguments)]
pub fn sinusoid_field_tapered(
    width: usize,
    height: usize,
    seed: u64,
    count: usize,
    min_wavelength: f64,
    max_wavelength: f64,
    pad: f64,
    margin: f64,
) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves = Vec::with_capacity(count);
    for _ in 0..count {
        let wavelength = rng.gen_range(min_wavelength..max_wavelength);
        let dir = rng.gen_range(0.0..std::f64::consts::TAU);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = rng.gen_range(0.3..1.0);
        let k = std::f64::consts::TAU / wavelength;
        waves.push((k * dir.cos(), k * dir.sin(), phase, amp));
    }
    let mut data = Vec::with_capacity(width * height);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..height {
        for i in 0..width {
            let (u, v) = (i as f64, j as f64);
            let mut s = 0.0;
            for &(kx, ky, phase, amp) in &waves {
                s += amp * (kx * u + ky * v + phase).sin();
            }
            lo = lo.min(s);
            hi = hi.max(s);
            data.push(s);
        }
    }
    let span = (hi - lo).max(1e-12);
    for v in &mut data {
        *v = 0.05 + 0.9 * (*v - lo) / span;
    }
    taper_border(width, height, &mut data, pad, margin);
    RasterImage::new(width, height, data, Calibration::default_for(width, height))
        .expect("normalized intensities are in range")
}

/// Image that is exactly linear in the viewing ray: I(x) = 0.5 + 0.4 <x, e1>.
/// Its tangent-space gradient is 0.4 pi_x e1, used as a gradient oracle.
pub fn linear_ray_image(width: usize, height: usize, calib: Calibration) -> RasterImage {
    let mut data = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let ray = calib.pixel_to_ray(i as f64, j as f64);
            data.push(0.5 + 0.4 * ray.vector().x);
        }
    }
    RasterImage::new(width, height, data, calib).expect("linear image stays in [0.1, 0.9]")
}

/// Blends the border of `data` to zero: intensity is zeroed within `pad`
/// pixels of the border and smoothstepped over the next `margin` pixels, so
/// the image continues the out-of-domain zero extension.
pub fn taper_border(width: usize, height: usize, data: &mut [f64], pad: f64, margin: f64) {
    for j in 0..height {
        for i in 0..width {
            let du = (i.min(width - 1 - i)) as f64;
            let dv = (j.min(height - 1 - j)) as f64;
            let d = du.min(dv);
            if d < pad {
                data[j * width + i] = 0.0;
            } else if d < pad + margin {
                let t = (d - pad) / margin;
                let w = t * t * (3.0 - 2.0 * t);
                data[j * width + i] *= w;
            }
        }
    }
}
