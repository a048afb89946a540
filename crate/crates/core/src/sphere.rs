//! The right action of SL(3) on the unit sphere and its first differential.

use crate::sl3::{AlgebraElement, GroupElement};
use crate::{Mat3, Vec3};
use thiserror::Error;

/// Tangency tolerance checked by [`TangentVector::new`].
pub const TANGENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("cannot normalize a (near-)zero vector")]
    ZeroVector,
    #[error("vector is not tangent at its base point (inner product {0:.3e})")]
    NotTangent(f64),
}

/// A point on the unit sphere, renormalized on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    x: Vec3,
}

impl SpherePoint {
    pub fn new(x: Vec3) -> Result<Self, SphereError> {
        let n = x.norm();
        if n < 1e-14 {
            return Err(SphereError::ZeroVector);
        }
        Ok(Self { x: x / n })
    }

    pub fn vector(&self) -> &Vec3 {
        &self.x
    }

    /// The tangent projector pi_x = I - x x^T.
    pub fn projector(&self) -> Mat3 {
        Mat3::identity() - self.x * self.x.transpose()
    }
}

/// A tangent vector carrying its base point, so tangency is checkable.
#[derive(Debug, Clone, Copy)]
pub struct TangentVector {
    pub base: SpherePoint,
    v: Vec3,
}

impl TangentVector {
    /// Fails if `v` is not orthogonal to the base point. Operations that
    /// produce tangent vectors construct them through the projector; a failure
    /// here surfaces a chain-rule bug rather than hiding it.
    pub fn new(base: SpherePoint, v: Vec3) -> Result<Self, SphereError> {
        let dot = base.x.dot(&v);
        if dot.abs() > TANGENT_TOLERANCE {
            return Err(SphereError::NotTangent(dot));
        }
        Ok(Self { base, v })
    }

    pub(crate) fn from_projected(base: SpherePoint, v: Vec3) -> Self {
        Self { base, v }
    }

    pub fn vector(&self) -> &Vec3 {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }
}

/// The right action rho(H, x) = H^-1 x / |H^-1 x|.
pub fn act_rho(h: &GroupElement, x: &SpherePoint) -> SpherePoint {
    let y = h.inverse().matrix() * x.x;
    SpherePoint { x: y / y.norm() }
}

/// Projects an ambient vector onto the tangent space at `x`.
pub fn tangent_project(x: &SpherePoint, v: &Vec3) -> TangentVector {
    let projected = v - x.x * x.x.dot(v);
    TangentVector::from_projected(*x, projected)
}

/// Differential of the action in the group direction at the identity:
/// D rho_x(I)[D] = -pi_x D x.
pub fn d_rho_identity(x: &SpherePoint, d: &AlgebraElement) -> TangentVector {
    tangent_project(x, &(-(d.matrix() * x.x)))
}

/// The differential D rho_H(y): T_y S^2 -> T_{rho_H(y)} S^2, as the matrix
/// (1/|H^-1 y|) pi_{rho_H(y)} H^-1.
pub struct DRho {
    map: Mat3,
    source: SpherePoint,
    target: SpherePoint,
}

impl DRho {
    pub fn target(&self) -> &SpherePoint {
        &self.target
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.map
    }

    /// Applies the differential to a tangent vector at the source point.
    pub fn apply(&self, v: &TangentVector) -> Result<TangentVector, SphereError> {
        let dot = v.base.x.dot(&self.source.x);
        if (dot - 1.0).abs() > 1e-9 {
            return Err(SphereError::NotTangent(dot - 1.0));
        }
        // The projector inside `map` makes the output tangent at the target.
        Ok(TangentVector::from_projected(self.target, self.map * v.v))
    }
}

pub fn d_rho(h: &GroupElement, y: &SpherePoint) -> DRho {
    let h_inv = h.inverse();
    let w = h_inv.matrix() * y.x;
    let n = w.norm();
    let target = SpherePoint { x: w / n };
    let map = target.projector() * h_inv.matrix() / n;
    DRho { map, source: *y, target }
}

/// Area-distortion Jacobian of rho_H at y: |H^T y| / |H^-1 y|^3.
pub fn jacobian_det(h: &GroupElement, y: &SpherePoint) -> f64 {
    // For an orthonormal tangent basis (v1, v2) at y one has
    // (H^-1 v1) x (H^-1 v2) = H^T (v1 x v2) = +/- H^T y, and after the
    // tangent projections only the component along rho_H(y) survives:
    // <H^-1 y / |H^-1 y|, H^T y> = 1 / |H^-1 y|. Dividing by |H^-1 y|^2
    // from the two differentials leaves 1 / |H^-1 y|^3.
    let den = (h.inverse().matrix() * y.x).norm();
    1.0 / (den * den * den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl3::{basis, group_exp, wedge, Coordinates8};
    use crate::Vec8;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_group(rng: &mut impl Rng) -> GroupElement {
        let mut v = Vec8::zeros();
        for i in 0..8 {
            v[i] = rng.gen_range(-1.0..1.0);
        }
        group_exp(&wedge(&Coordinates8(v)))
    }

    fn random_point(rng: &mut impl Rng) -> SpherePoint {
        loop {
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() > 0.1 {
                return SpherePoint::new(v).unwrap();
            }
        }
    }

    #[test]
    fn action_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let h = random_group(&mut rng);
            let g = random_group(&mut rng);
            let x = random_point(&mut rng);
            // Identity.
            let id = act_rho(&GroupElement::identity(), &x);
            assert_abs_diff_eq!(id.vector(), x.vector(), epsilon = 1e-12);
            // Compatibility: rho(G, rho(H, x)) = rho(HG, x).
            let lhs = act_rho(&g, &act_rho(&h, &x));
            let rhs = act_rho(&h.compose(&g), &x);
            assert_abs_diff_eq!(lhs.vector(), rhs.vector(), epsilon = 1e-12);
        }
    }

    #[test]
    fn action_eigenvector_case() {
        let h = GroupElement::new(Mat3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5)).unwrap();
        let e3 = SpherePoint::new(Vec3::z()).unwrap();
        let y = act_rho(&h, &e3);
        assert_abs_diff_eq!(y.vector(), &Vec3::z(), epsilon = 1e-14);
    }

    #[test]
    fn tangent_project_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let e3 = SpherePoint::new(Vec3::z()).unwrap();
        assert_abs_diff_eq!(tangent_project(&e3, &Vec3::z()).vector(), &Vec3::zeros());
        assert_abs_diff_eq!(tangent_project(&e3, &Vec3::x()).vector(), &Vec3::x());
        for _ in 0..200 {
            let x = random_point(&mut rng);
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let once = tangent_project(&x, &v);
            let twice = tangent_project(&x, once.vector());
            assert_abs_diff_eq!(once.vector(), twice.vector(), epsilon = 1e-14);
            // Tangency is a constructor invariant.
            TangentVector::new(x, *once.vector()).unwrap();
        }
    }

    #[test]
    fn d_rho_identity_radial_annihilation() {
        // B8 e3 is radial at e3, so the projected differential vanishes.
        let e3 = SpherePoint::new(Vec3::z()).unwrap();
        let out = d_rho_identity(&e3, &basis(8).unwrap());
        assert_abs_diff_eq!(out.vector(), &Vec3::zeros(), epsilon = 1e-14);
        let zero = d_rho_identity(&e3, &AlgebraElement::zero());
        assert_abs_diff_eq!(zero.vector(), &Vec3::zeros());
    }

    #[test]
    fn d_rho_identity_finite_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..500 {
            let x = random_point(&mut rng);
            let mut v = Vec8::zeros();
            for i in 0..8 {
                v[i] = rng.gen_range(-0.35..0.35); // |D|_F <= 1
            }
            let d = wedge(&Coordinates8(v));
            let analytic = d_rho_identity(&x, &d);
            let t = 1e-6;
            let plus = act_rho(&group_exp(&d.scale(t)), &x);
            let minus = act_rho(&group_exp(&d.scale(-t)), &x);
            let fd = (plus.vector() - minus.vector()) / (2.0 * t);
            assert!((analytic.vector() - fd).norm() <= 1e-5);
        }
    }

    #[test]
    fn d_rho_general_finite_difference_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let h = random_group(&mut rng);
            let y = random_point(&mut rng);
            let v = tangent_project(&y, &Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ));
            let dr = d_rho(&h, &y);
            let out = dr.apply(&v).unwrap();
            // Tangency at the target.
            assert!(out.vector().dot(dr.target().vector()).abs() < 1e-10);
            // Finite difference along the great-circle curve through y with velocity v.
            if v.norm() < 1e-6 {
                continue;
            }
            let t = 1e-6;
            let curve = |s: f64| {
                let n = v.norm();
                let p = y.vector() * (s * n).cos() + v.vector() / n * (s * n).sin();
                act_rho(&h, &SpherePoint::new(p).unwrap())
            };
            let fd = (curve(t).vector() - curve(-t).vector()) / (2.0 * t);
            assert!((out.vector() - fd).norm() <= 1e-5);
        }
    }

    #[test]
    fn d_rho_identity_group_is_tangent_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let y = random_point(&mut rng);
            let v = tangent_project(&y, &Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ));
            let out = d_rho(&GroupElement::identity(), &y).apply(&v).unwrap();
            assert_abs_diff_eq!(out.vector(), v.vector(), epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_det_identity_and_hand_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let y = random_point(&mut rng);
            assert_abs_diff_eq!(jacobian_det(&GroupElement::identity(), &y), 1.0, epsilon = 1e-14);
        }
        // H = diag(2, 1, 1/2), y = e3: H^-1 e3 = 2 e3, so 1 / 2^3 = 1/8.
        // Directly: D rho maps (e1, e2) to (e1/4, e2/2), area factor 1/8.
        let h = GroupElement::new(Mat3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5)).unwrap();
        let e3 = SpherePoint::new(Vec3::z()).unwrap();
        assert_abs_diff_eq!(jacobian_det(&h, &e3), 1.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobian_det_cross_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..500 {
            let h = random_group(&mut rng);
            let y = random_point(&mut rng);
            // Orthonormal tangent basis at y.
            let any = if y.vector().x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let v1 = tangent_project(&y, &any);
            let v1 = v1.vector() / v1.norm();
            let v2 = y.vector().cross(&v1);
            let dr = d_rho(&h, &y);
            let w1 = dr.matrix() * v1;
            let w2 = dr.matrix() * v2;
            let oracle = w1.cross(&w2).norm();
            assert!((jacobian_det(&h, &y) - oracle).abs() <= 1e-10 * oracle.max(1.0));
            assert!(jacobian_det(&h, &y) > 0.0);
        }
    }

    #[test]
    fn jacobian_det_change_of_variables_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let h = random_group(&mut rng);
            let y = random_point(&mut rng);
            let forward = jacobian_det(&h, &y);
            let back = jacobian_det(&h.inverse(), &act_rho(&h, &y));
            assert_abs_diff_eq!(forward * back, 1.0, epsilon = 1e-10);
        }
    }
}
