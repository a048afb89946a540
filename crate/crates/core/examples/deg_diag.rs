use homobs::degeneracy::{builtin_generators, generate_degenerate_image};
use homobs::image::{Calibration, PixelGrid, Quadrature, SphericalImage};
use homobs::observer::cost_hessian;
use homobs::sl3::vee;
use nalgebra::linalg::SymmetricEigen;
use std::sync::Arc;

fn main() {
    let gens = builtin_generators();
    let n = 128;
    let calib = Calibration::default_for(n, n);
    for gen in &gens {
        let raster = generate_degenerate_image(gen, n, n, calib, 14, 2400, 4.5, 42).unwrap();
        let grid = PixelGrid::build(&raster, Quadrature::SolidAngle);
        let img = SphericalImage::from_raster(Arc::new(raster));
        let hess = cost_hessian(&img, &grid);
        let eig = SymmetricEigen::new(hess);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        let v = vee(&gen.d).0;
        let quad = (v.transpose() * hess * v)[0];
        println!(
            "{:50} quad/lmax {:.3e}  lmin/lmax {:.3e}  lmax {:.3e}",
            gen.label,
            quad / lmax,
            lmin / lmax,
            lmax
        );
    }
}
