//! Raster images, pixel/ray calibration and spherical image maps.
//!
//! A [`RasterImage`] is a grayscale grid with intensities in [0, 1] and a
//! calibration matrix mapping pixels to unit rays. A [`SphericalImage`] views
//! the raster as a function on a domain of the unit sphere, warped by an
//! accumulated SL(3) element. Warps compose in the group before a single
//! interpolation, so the action axioms hold exactly at the sampling level.

use crate::sl3::GroupElement;
use crate::sphere::{tangent_project, SpherePoint, TangentVector};
use crate::{Mat3, Vec3};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("intensity {0} outside [0, 1]")]
    InvalidIntensity(f64),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("image decode error: {0}")]
    Decode(String),
}

/// Upper-triangular calibration matrix with positive diagonal, mapping unit
/// rays to homogeneous pixel coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    k: Mat3,
    k_inv: Mat3,
}

impl Calibration {
    pub fn new(k: Mat3) -> Result<Self, ImageError> {
        let lower = [k[(1, 0)], k[(2, 0)], k[(2, 1)]];
        if lower.iter().any(|v| v.abs() > 1e-12) {
            return Err(ImageError::InvalidCalibration(
                "calibration must be upper triangular".into(),
            ));
        }
        if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 || k[(2, 2)] <= 0.0 {
            return Err(ImageError::InvalidCalibration(
                "calibration diagonal must be positive".into(),
            ));
        }
        let k_inv = k
            .try_inverse()
            .ok_or_else(|| ImageError::InvalidCalibration("calibration not invertible".into()))?;
        Ok(Self { k, k_inv })
    }

    /// Pinhole calibration with the given focal length (pixels) and principal
    /// point at the grid center.
    pub fn pinhole(focal: f64, width: usize, height: usize) -> Self {
        let cu = (width as f64 - 1.0) / 2.0;
        let cv = (height as f64 - 1.0) / 2.0;
        let k = Mat3::new(focal, 0.0, cu, 0.0, focal, cv, 0.0, 0.0, 1.0);
        Self::new(k).expect("pinhole calibration is valid by construction")
    }

    /// Default simulation calibration: focal length equal to the image width
    /// (about 53 degrees horizontal field of view), principal point centered.
    pub fn default_for(width: usize, height: usize) -> Self {
        Self::pinhole(width as f64, width, height)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.k
    }

    /// Unit ray through pixel (u, v): normalize(K^-1 (u, v, 1)).
    pub fn pixel_to_ray(&self, u: f64, v: f64) -> SpherePoint {
        let p = self.k_inv * Vec3::new(u, v, 1.0);
        SpherePoint::new(p).expect("K^-1 (u, v, 1) is never zero")
    }

    /// Pixel coordinates of a ray, or `None` when the ray points behind the
    /// camera. Grid bounds are checked by the raster, not here.
    pub fn ray_to_pixel(&self, x: &SpherePoint) -> Option<(f64, f64)> {
        let w = self.k * x.vector();
        if w.z <= 0.0 {
            return None;
        }
        Some((w.x / w.z, w.y / w.z))
    }
}

/// Grayscale image with intensities in [0, 1] and a calibration.
#[derive(Debug, Clone)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    calib: Calibration,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        calib: Calibration,
    ) -> Result<Self, ImageError> {
        assert_eq!(data.len(), width * height, "data length must match dimensions");
        for &v in &data {
            if !(0.0..=1.0).contains(&v) {
                return Err(ImageError::InvalidIntensity(v));
            }
        }
        Ok(Self { width, height, data, calib })
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8], calib: Calibration) -> Self {
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        Self { width, height, data, calib }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calib
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.width + ix]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn in_grid(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }

    /// Bilinear interpolation at in-grid pixel coordinates.
    fn bilinear(&self, u: f64, v: f64) -> f64 {
        let i0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let j0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let du = u - i0 as f64;
        let dv = v - j0 as f64;
        let i1 = (i0 + 1).min(self.width - 1);
        let j1 = (j0 + 1).min(self.height - 1);
        let a = self.get(i0, j0);
        let b = self.get(i1, j0);
        let c = self.get(i0, j1);
        let d = self.get(i1, j1);
        a * (1.0 - du) * (1.0 - dv) + b * du * (1.0 - dv) + c * (1.0 - du) * dv + d * du * dv
    }

    /// Pixel coordinates of a ray when it projects inside the grid.
    pub fn ray_to_pixel(&self, x: &SpherePoint) -> Option<(f64, f64)> {
        let (u, v) = self.calib.ray_to_pixel(x)?;
        if self.in_grid(u, v) {
            Some((u, v))
        } else {
            None
        }
    }

    /// Intensity at a ray, zero-extended outside the grid.
    pub fn sample_ray(&self, x: &SpherePoint) -> f64 {
        match self.ray_to_pixel(x) {
            Some((u, v)) => self.bilinear(u, v),
            None => 0.0,
        }
    }

    pub fn contains_ray(&self, x: &SpherePoint) -> bool {
        self.ray_to_pixel(x).is_some()
    }

    /// Tangent-space gradient at a ray: pixel-space central differences
    /// chain-ruled through the projection, then projected by pi_x. Returns
    /// `None` within one pixel of the grid boundary (gradient masking).
    pub fn gradient_ray(&self, x: &SpherePoint) -> Option<Vec3> {
        let (u, v) = self.ray_to_pixel(x)?;
        if u < 1.0
            || v < 1.0
            || u > (self.width - 2) as f64
            || v > (self.height - 2) as f64
        {
            return None;
        }
        // Exact partial derivatives of the bilinear interpolant (central
        // differences at the half-pixel cell scale): this is the slope a
        // finite difference of sampled intensities actually sees, keeping
        // discrete cost gradients consistent with finite differences of the
        // sampled cost.
        let i0 = (u.floor() as usize).min(self.width - 2);
        let j0 = (v.floor() as usize).min(self.height - 2);
        let du = u - i0 as f64;
        let dv = v - j0 as f64;
        let a = self.get(i0, j0);
        let b = self.get(i0 + 1, j0);
        let c = self.get(i0, j0 + 1);
        let d = self.get(i0 + 1, j0 + 1);
        let gu = (b - a) * (1.0 - dv) + (d - c) * dv;
        let gv = (c - a) * (1.0 - du) + (d - b) * du;
        // Differential of ray -> (u, v): u = w1/w3 with w = K x.
        let k = self.calib.matrix();
        let w3 = k.row(2) * x.vector();
        let w3 = w3[0];
        let du_dx = (k.row(0).transpose() - k.row(2).transpose() * u) / w3;
        let dv_dx = (k.row(1).transpose() - k.row(2).transpose() * v) / w3;
        let ambient = du_dx * gu + dv_dx * gv;
        Some(x.projector() * ambient)
    }
}

/// A raster viewed as a function on the sphere, warped by an accumulated
/// group element. `sample(x)` evaluates the base raster at rho(h^-1, x),
/// i.e. this image equals mu(h, base).
#[derive(Debug, Clone)]
pub struct SphericalImage {
    raster: Arc<RasterImage>,
    h: GroupElement,
    // h.matrix() cached: sampling applies w = h * x before normalization.
    w: Mat3,
}

impl SphericalImage {
    pub fn from_raster(raster: Arc<RasterImage>) -> Self {
        Self { raster, h: GroupElement::identity(), w: Mat3::identity() }
    }

    pub fn raster(&self) -> &Arc<RasterImage> {
        &self.raster
    }

    /// The accumulated warp element: this image is mu(warp_element, base).
    pub fn warp_element(&self) -> &GroupElement {
        &self.h
    }

    /// mu(G, self): composition happens in the group, so only one
    /// interpolation is ever applied regardless of how many warps stack.
    pub fn warp(&self, g: &GroupElement) -> Self {
        let h = self.h.compose(g);
        let w = *h.matrix();
        Self { raster: Arc::clone(&self.raster), h, w }
    }

    pub fn sample(&self, x: &SpherePoint) -> f64 {
        let p = self.w * x.vector();
        let y = SpherePoint::new(p).expect("warped ray is nonzero");
        self.raster.sample_ray(&y)
    }

    pub fn contains(&self, x: &SpherePoint) -> bool {
        let p = self.w * x.vector();
        let y = SpherePoint::new(p).expect("warped ray is nonzero");
        self.raster.contains_ray(&y)
    }

    /// Tangent-space gradient at `x`; the zero tangent vector where the base
    /// gradient is masked (near the domain boundary or out of domain).
    pub fn gradient(&self, x: &SpherePoint) -> TangentVector {
        let p = self.w * x.vector();
        let n = p.norm();
        let y = SpherePoint::new(p).expect("warped ray is nonzero");
        match self.raster.gradient_ray(&y) {
            Some(g_base) => {
                // Pull back through D rho: gradient of base(rho_A(x)) with
                // rho_A(x) = w x / |w x| is pi_x w^T g_base / |w x|.
                let ambient = self.w.transpose() * g_base / n;
                tangent_project(x, &ambient)
            }
            None => tangent_project(x, &Vec3::zeros()),
        }
    }
}

/// Quadrature rule for discrete spherical integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Per-pixel solid-angle weights approximating the area element.
    SolidAngle,
    /// Plain pixel sums (weight 1), for comparison with planar-cost setups.
    Uniform,
}

/// One quadrature node per pixel of a reference raster.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub u: f64,
    pub v: f64,
    pub ray: SpherePoint,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct PixelGrid {
    cells: Vec<GridCell>,
    total_weight: f64,
    quadrature: Quadrature,
}

impl PixelGrid {
    /// Builds the grid: one entry per pixel center. Solid-angle weights are
    /// the Jacobian of pixel -> ray times unit pixel area, independent of the
    /// image content.
    pub fn build(raster: &RasterImage, quadrature: Quadrature) -> Self {
        let k_inv = raster
            .calib
            .matrix()
            .try_inverse()
            .expect("calibration invertible by construction");
        let col_u = k_inv.column(0).into_owned();
        let col_v = k_inv.column(1).into_owned();
        let cross = col_u.cross(&col_v);
        let mut cells = Vec::with_capacity(raster.pixel_count());
        let mut total = 0.0;
        for j in 0..raster.height {
            for i in 0..raster.width {
                let u = i as f64;
                let v = j as f64;
                let p = k_inv * Vec3::new(u, v, 1.0);
                let weight = match quadrature {
                    Quadrature::SolidAngle => p.dot(&cross).abs() / p.norm().powi(3),
                    Quadrature::Uniform => 1.0,
                };
                total += weight;
                cells.push(GridCell {
                    u,
                    v,
                    ray: SpherePoint::new(p).expect("pixel ray nonzero"),
                    weight,
                });
            }
        }
        Self { cells, total_weight: total, quadrature }
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn pixel_count(&self) -> usize {
        self.cells.len()
    }
}

/// Samples a spherical image on a raster grid (used for snapshots).
pub fn rasterize(image: &SphericalImage, width: usize, height: usize, calib: Calibration) -> RasterImage {
    let mut data = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let ray = calib.pixel_to_ray(i as f64, j as f64);
            data.push(image.sample(&ray).clamp(0.0, 1.0));
        }
    }
    RasterImage { width, height, data, calib }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Loads an 8-bit grayscale PGM (P5) or PNG by file extension, attaching the
/// default calibration for the image dimensions.
pub fn load_image(path: &Path) -> Result<RasterImage, ImageError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => load_pgm(path),
        Some("png") => load_png(path),
        other => Err(ImageError::UnsupportedFormat(format!("{other:?}"))),
    }
}

pub fn save_image(img: &RasterImage, path: &Path) -> Result<(), ImageError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => save_pgm(img, path),
        Some("png") => save_png(img, path),
        other => Err(ImageError::UnsupportedFormat(format!("{other:?}"))),
    }
}

pub fn load_pgm(path: &Path) -> Result<RasterImage, ImageError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(ImageError::MalformedHeader("missing P5 magic".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and '#' comment lines between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::MalformedHeader("expected integer header field".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| ImageError::MalformedHeader("header field overflow".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::MalformedHeader(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ImageError::MalformedHeader("missing raster separator".into()));
    }
    pos += 1;
    let expected = width * height;
    if bytes.len() - pos < expected {
        return Err(ImageError::MalformedHeader(format!(
            "raster truncated: expected {expected} bytes, got {}",
            bytes.len() - pos
        )));
    }
    Ok(RasterImage::from_bytes(
        width,
        height,
        &bytes[pos..pos + expected],
        Calibration::default_for(width, height),
    ))
}

pub fn save_pgm(img: &RasterImage, path: &Path) -> Result<(), ImageError> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    f.write_all(&bytes)?;
    Ok(())
}

fn load_png(path: &Path) -> Result<RasterImage, ImageError> {
    let img = image::open(path).map_err(|e| ImageError::Decode(e.to_string()))?;
    let gray = img.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    Ok(RasterImage::from_bytes(
        w,
        h,
        gray.as_raw(),
        Calibration::default_for(w, h),
    ))
}

fn save_png(img: &RasterImage, path: &Path) -> Result<(), ImageError> {
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("buffer size matches dimensions");
    buf.save(path).map_err(|e| ImageError::Decode(e.to_string()))
}
