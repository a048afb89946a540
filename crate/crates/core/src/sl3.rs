//! The special linear group SL(3) and its Lie algebra sl(3).
//!
//! SL(3) is the group of real 3x3 matrices with unit determinant; its algebra
//! sl(3) consists of traceless 3x3 matrices. The algebra carries the
//! orthonormal basis B1..B8 (Frobenius inner product) together with the
//! `wedge`/`vee` isomorphisms to and from R^8.

use crate::{Mat3, Vec8};
use thiserror::Error;

/// Determinant tolerance accepted by [`GroupElement::new`]. Loose enough to
/// absorb one Euler step of drift; callers reproject every step.
pub const DET_TOLERANCE: f64 = 1e-9;
/// Trace tolerance accepted by [`AlgebraElement::new`].
pub const TRACE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum Sl3Error {
    #[error("matrix is numerically singular (det = {0:.3e})")]
    DegenerateMatrix(f64),
    #[error("matrix has negative determinant {0:.3e}; not reachable by the observer flow")]
    OrientationError(f64),
    #[error("determinant {0} is not 1 within tolerance")]
    NonUnitDeterminant(f64),
    #[error("trace {0:.3e} is not 0 within tolerance")]
    NotTraceless(f64),
    #[error("basis index {0} out of range 1..=8")]
    IndexOutOfRange(usize),
}

/// An element of SL(3): a 3x3 matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    m: Mat3,
}

impl GroupElement {
    /// Wraps a matrix whose determinant is already 1 within [`DET_TOLERANCE`].
    /// Use [`project_sl3`] to reproject an arbitrary matrix first.
    pub fn new(m: Mat3) -> Result<Self, Sl3Error> {
        let det = m.determinant();
        if (det - 1.0).abs() > DET_TOLERANCE {
            return Err(Sl3Error::NonUnitDeterminant(det));
        }
        Ok(Self { m })
    }

    /// Internal constructor for products of group elements, where the
    /// determinant is 1 by construction up to roundoff.
    pub(crate) fn from_product(m: Mat3) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self { m: Mat3::identity() }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    /// Inverse via the adjugate. For a unit-determinant matrix the adjugate is
    /// exactly the inverse, avoiding a division by the (nearly 1) determinant.
    pub fn inverse(&self) -> Self {
        let m = &self.m;
        let adj = Mat3::new(
            m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
            m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)],
            m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
            m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)],
            m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
            m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)],
            m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
            m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)],
            m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        );
        Self { m: adj }
    }

    /// Group composition `self * rhs`.
    pub fn compose(&self, rhs: &GroupElement) -> Self {
        Self { m: self.m * rhs.m }
    }
}

/// An element of sl(3): a traceless 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    a: Mat3,
}

impl AlgebraElement {
    pub fn new(a: Mat3) -> Result<Self, Sl3Error> {
        let tr = a.trace();
        if tr.abs() > TRACE_TOLERANCE {
            return Err(Sl3Error::NotTraceless(tr));
        }
        Ok(Self { a })
    }

    /// Removes the trace component of an arbitrary matrix. Used where the
    /// tracelessness holds analytically but roundoff leaves a residue.
    pub fn project(a: Mat3) -> Self {
        let tr = a.trace() / 3.0;
        let mut a = a;
        for i in 0..3 {
            a[(i, i)] -= tr;
        }
        Self { a }
    }

    pub fn zero() -> Self {
        Self { a: Mat3::zeros() }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.a
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { a: self.a * k }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.a.norm()
    }
}

impl std::ops::Add for AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: AlgebraElement) -> AlgebraElement {
        AlgebraElement { a: self.a + rhs.a }
    }
}

/// Coordinates of an algebra element in the B1..B8 basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinates8(pub Vec8);

impl Coordinates8 {
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Projects a matrix with positive determinant onto SL(3): det(M)^(-1/3) * M.
pub fn project_sl3(m: &Mat3) -> Result<GroupElement, Sl3Error> {
    let det = m.determinant();
    if det.abs() < 1e-12 {
        return Err(Sl3Error::DegenerateMatrix(det));
    }
    if det < 0.0 {
        return Err(Sl3Error::OrientationError(det));
    }
    let scale = det.powf(-1.0 / 3.0);
    Ok(GroupElement { m: m * scale })
}

/// The orthonormal basis B1..B8 of sl(3) (1-based index).
pub fn basis(j: usize) -> Result<AlgebraElement, Sl3Error> {
    if !(1..=8).contains(&j) {
        return Err(Sl3Error::IndexOutOfRange(j));
    }
    Ok(AlgebraElement { a: basis_matrices()[j - 1] })
}

fn basis_matrices() -> [Mat3; 8] {
    let s2 = 1.0 / 2f64.sqrt();
    let s6 = 1.0 / 6f64.sqrt();
    [
        Mat3::new(s2, 0.0, 0.0, 0.0, -s2, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(0.0, s2, 0.0, s2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(0.0, 0.0, s2, 0.0, 0.0, 0.0, s2, 0.0, 0.0),
        Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, s2, 0.0, s2, 0.0),
        Mat3::new(0.0, s2, 0.0, -s2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(0.0, 0.0, s2, 0.0, 0.0, 0.0, -s2, 0.0, 0.0),
        Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, s2, 0.0, -s2, 0.0),
        Mat3::new(s6, 0.0, 0.0, 0.0, s6, 0.0, 0.0, 0.0, -2.0 * s6),
    ]
}

/// Linear isomorphism R^8 -> sl(3): v -> sum_j v_j B_j.
pub fn wedge(v: &Coordinates8) -> AlgebraElement {
    let bs = basis_matrices();
    let mut a = Mat3::zeros();
    for (j, b) in bs.iter().enumerate() {
        a += b * v.0[j];
    }
    AlgebraElement { a }
}

/// Inverse of [`wedge`]: A -> (<A, B1>, ..., <A, B8>).
pub fn vee(a: &AlgebraElement) -> Coordinates8 {
    let bs = basis_matrices();
    let mut v = Vec8::zeros();
    for (j, b) in bs.iter().enumerate() {
        v[j] = frobenius(b, a.matrix());
    }
    Coordinates8(v)
}

/// Matrix exponential by scaling and squaring with a Taylor series on the
/// scaled matrix. For traceless input the result has unit determinant.
pub fn group_exp(a: &AlgebraElement) -> GroupElement {
    GroupElement { m: matrix_exp(a.matrix()) }
}

pub(crate) fn matrix_exp(a: &Mat3) -> Mat3 {
    let norm = a.norm();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    // Taylor series; |scaled| <= 0.25 so ~15 terms reach machine precision.
    let mut result = Mat3::identity();
    let mut term = Mat3::identity();
    for k in 1..=20 {
        term = term * scaled / k as f64;
        result += term;
        if term.norm() < 1e-18 * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result * result;
    }
    result
}

/// Symmetric/skew decomposition (P_s(A), P_a(A)) with P_s + P_a = A.
pub fn sym_skew_split(a: &Mat3) -> (Mat3, Mat3) {
    let sym = (a + a.transpose()) * 0.5;
    let skew = (a - a.transpose()) * 0.5;
    (sym, skew)
}

/// Frobenius inner product tr(A^T B).
pub fn frobenius(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec8;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_traceless(rng: &mut impl Rng, scale: f64) -> AlgebraElement {
        let mut v = Vec8::zeros();
        for i in 0..8 {
            v[i] = rng.gen_range(-scale..scale);
        }
        wedge(&Coordinates8(v))
    }

    /// Truncated-series oracle for the exponential, independent of the
    /// scaling-and-squaring path.
    fn exp_series_oracle(a: &Mat3, terms: usize) -> Mat3 {
        let mut result = Mat3::identity();
        let mut term = Mat3::identity();
        for k in 1..=terms {
            term = term * a / k as f64;
            result += term;
        }
        result
    }

    #[test]
    fn project_identity_fixed_point() {
        let g = project_sl3(&Mat3::identity()).unwrap();
        assert_abs_diff_eq!(g.matrix(), &Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn project_scaled_identity() {
        let g = project_sl3(&(Mat3::identity() * 2.0)).unwrap();
        assert_abs_diff_eq!(g.matrix(), &Mat3::identity(), epsilon = 1e-14);
    }

    #[test]
    fn project_random_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut m = Mat3::zeros();
            loop {
                for i in 0..3 {
                    for j in 0..3 {
                        m[(i, j)] = rng.gen_range(-2.0..2.0);
                    }
                }
                if m.determinant() > 0.1 {
                    break;
                }
            }
            let g = project_sl3(&m).unwrap();
            assert_abs_diff_eq!(g.determinant(), 1.0, epsilon = 1e-12);
            // Idempotence.
            let g2 = project_sl3(g.matrix()).unwrap();
            assert_abs_diff_eq!(g.matrix(), g2.matrix(), epsilon = 1e-12);
        }
    }

    #[test]
    fn project_rejects_negative_and_singular() {
        let mut m = Mat3::identity();
        m[(0, 0)] = -1.0;
        assert!(matches!(project_sl3(&m), Err(Sl3Error::OrientationError(_))));
        m[(0, 0)] = 0.0;
        assert!(matches!(project_sl3(&m), Err(Sl3Error::DegenerateMatrix(_))));
    }

    #[test]
    fn basis_b1_matches_definition() {
        let b1 = basis(1).unwrap();
        let s2 = 1.0 / 2f64.sqrt();
        let expected = Mat3::new(s2, 0.0, 0.0, 0.0, -s2, 0.0, 0.0, 0.0, 0.0);
        assert_abs_diff_eq!(b1.matrix(), &expected, epsilon = 1e-15);
    }

    #[test]
    fn basis_orthonormal_and_traceless() {
        for i in 1..=8 {
            let bi = basis(i).unwrap();
            assert!(bi.matrix().trace().abs() < 1e-15);
            for j in 1..=8 {
                let bj = basis(j).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(frobenius(bi.matrix(), bj.matrix()), expected, epsilon = 1e-15);
            }
        }
        assert!(matches!(basis(0), Err(Sl3Error::IndexOutOfRange(0))));
        assert!(matches!(basis(9), Err(Sl3Error::IndexOutOfRange(9))));
    }

    #[test]
    fn vee_of_basis_is_standard_vector() {
        let v = vee(&basis(1).unwrap());
        assert_abs_diff_eq!(v.0[0], 1.0, epsilon = 1e-15);
        for i in 1..8 {
            assert_abs_diff_eq!(v.0[i], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn wedge_vee_round_trip() {
        assert_eq!(wedge(&Coordinates8(Vec8::zeros())).matrix(), &Mat3::zeros());

        let ones = Coordinates8(Vec8::repeat(1.0));
        let back = vee(&wedge(&ones));
        assert_abs_diff_eq!(back.0, ones.0, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut v = Vec8::zeros();
            for i in 0..8 {
                v[i] = rng.gen_range(-3.0..3.0);
            }
            let c = Coordinates8(v);
            let a = wedge(&c);
            // Isometry from orthonormality.
            assert_abs_diff_eq!(a.norm(), c.norm(), epsilon = 1e-13);
            assert_abs_diff_eq!(vee(&a).0, v, epsilon = 1e-14);
            // Matrix-side round trip.
            let a2 = wedge(&vee(&a));
            assert_abs_diff_eq!(a.matrix(), a2.matrix(), epsilon = 1e-14);
        }
    }

    #[test]
    fn exp_zero_is_identity() {
        let g = group_exp(&AlgebraElement::zero());
        assert_eq!(g.matrix(), &Mat3::identity());
    }

    #[test]
    fn exp_b5_gives_planar_rotation() {
        // t*B5 with t = pi*sqrt(2) is the rotation by pi about e3.
        let t = std::f64::consts::PI * 2f64.sqrt();
        let g = group_exp(&basis(5).unwrap().scale(t));
        let oracle = exp_series_oracle(&(basis(5).unwrap().matrix() * t), 30);
        assert_abs_diff_eq!(g.matrix(), &oracle, epsilon = 1e-10);
        let expected = Mat3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(g.matrix(), &expected, epsilon = 1e-12);
    }

    #[test]
    fn exp_matches_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_traceless(&mut rng, 0.7); // |A|_F <= 2
            let g = group_exp(&a);
            let oracle = exp_series_oracle(a.matrix(), 30);
            assert!((g.matrix() - oracle).norm() <= 1e-12 * oracle.norm());
        }
    }

    #[test]
    fn exp_has_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = random_traceless(&mut rng, 0.7);
            assert_abs_diff_eq!(group_exp(&a).determinant(), 1.0, epsilon = 1e-10);
        }
        // Larger norms up to |A|_F ~ 10.
        for _ in 0..100 {
            let a = random_traceless(&mut rng, 3.5);
            assert_abs_diff_eq!(group_exp(&a).determinant(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn sym_skew_split_cases() {
        let s = Mat3::new(1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0);
        let (ps, pa) = sym_skew_split(&s);
        assert_abs_diff_eq!(&ps, &s, epsilon = 1e-15);
        assert_abs_diff_eq!(&pa, &Mat3::zeros(), epsilon = 1e-15);

        let w = Mat3::new(0.0, 1.0, -2.0, -1.0, 0.0, 3.0, 2.0, -3.0, 0.0);
        let (ps, pa) = sym_skew_split(&w);
        assert_abs_diff_eq!(&ps, &Mat3::zeros(), epsilon = 1e-15);
        assert_abs_diff_eq!(&pa, &w, epsilon = 1e-15);

        // A = e1 e2^T.
        let mut a = Mat3::zeros();
        a[(0, 1)] = 1.0;
        let (ps, pa) = sym_skew_split(&a);
        assert_abs_diff_eq!(ps[(0, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ps[(1, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pa[(0, 1)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pa[(1, 0)], -0.5, epsilon = 1e-15);
        // Complementary orthogonal projectors.
        assert_abs_diff_eq!(&(ps + pa), &a, epsilon = 1e-15);
        assert_abs_diff_eq!(frobenius(&ps, &pa), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn frobenius_examples() {
        assert_abs_diff_eq!(frobenius(&Mat3::identity(), &Mat3::identity()), 3.0);
        let b1 = basis(1).unwrap();
        let b2 = basis(2).unwrap();
        assert_abs_diff_eq!(frobenius(b1.matrix(), b2.matrix()), 0.0, epsilon = 1e-15);

        // Elementwise oracle on random input.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let mut a = Mat3::zeros();
            let mut b = Mat3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    a[(i, j)] = rng.gen_range(-1.0..1.0);
                    b[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            let mut elementwise = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    elementwise += a[(i, j)] * b[(i, j)];
                }
            }
            assert_abs_diff_eq!(frobenius(&a, &b), elementwise, epsilon = 1e-13);
        }
    }

    #[test]
    fn inverse_via_adjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let a = random_traceless(&mut rng, 0.5);
            let g = group_exp(&a);
            let prod = g.matrix() * g.inverse().matrix();
            assert_abs_diff_eq!(&prod, &Mat3::identity(), epsilon = 1e-12);
        }
    }
}
