//! Photometric cost, correction laws and the discrete-time observer.
//!
//! The observer estimates a homography H in SL(3) driving a spherical image
//! through the induced action mu. Its state is advanced by split exponential
//! steps combining the known group velocity U with an intensity-driven
//! correction Delta in sl(3). Three gain variants are provided: a scalar
//! gain on the raw cost gradient, an inverse-Hessian matrix gain, and a
//! dual gain acting separately on the symmetric and skew parts.
//!
//! All integrals are sequential sums in pixel order, so results are
//! deterministic for fixed inputs.

use crate::image::{PixelGrid, SphericalImage};
use crate::sl3::{
    group_exp, project_sl3, sym_skew_split, vee, wedge, AlgebraElement, Coordinates8, GroupElement,
};
use crate::{Mat3, Mat8, Vec8};
use nalgebra::linalg::{Cholesky, SymmetricEigen};
use thiserror::Error;

/// Eigenvalue ratio below which the reference image is declared degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;
/// Relative eigenvalue floor for the unregularized inverse-Hessian gain.
const SINGULARITY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("cost Hessian is numerically singular (min ratio {min_ratio:.3e}); the reference image does not constrain all of sl(3)")]
    SingularHessian { min_ratio: f64 },
    #[error("invalid gain configuration: {0}")]
    InvalidGain(String),
}

/// Correction gain variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainConfig {
    /// Delta = k * M with M the raw correction integral.
    Scalar { k: f64 },
    /// Delta = (k (Hess + ridge * lambda_max * I)^-1 M^vee)^wedge. The
    /// Hessian is evaluated once on the reference image. `ridge` is relative
    /// to the largest Hessian eigenvalue; zero keeps the plain inverse and
    /// fails on degenerate references.
    InverseHessian { k: f64, ridge: f64 },
    /// Delta = k_s P_s(M) + k_a P_a(M), separate gains on the symmetric and
    /// skew parts.
    DualGain { k_s: f64, k_a: f64 },
}

impl GainConfig {
    pub fn validate(&self) -> Result<(), ObserverError> {
        let ok = match *self {
            GainConfig::Scalar { k } => k > 0.0,
            GainConfig::InverseHessian { k, ridge } => k > 0.0 && ridge >= 0.0,
            GainConfig::DualGain { k_s, k_a } => k_s > 0.0 && k_a > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ObserverError::InvalidGain(format!("{self:?}")))
        }
    }

    /// Whether this variant needs the cached cost Hessian.
    pub fn needs_hessian(&self) -> bool {
        matches!(self, GainConfig::InverseHessian { .. })
    }
}

/// Observer state: the current estimate, simulation time and gain choice.
#[derive(Debug, Clone)]
pub struct ObserverState {
    pub h_hat: GroupElement,
    pub t: f64,
    pub gains: GainConfig,
}

impl ObserverState {
    pub fn new(h_hat: GroupElement, gains: GainConfig) -> Self {
        Self { h_hat, t: 0.0, gains }
    }
}

/// Ground-truth homography and its constant group velocity.
#[derive(Debug, Clone)]
pub struct TruthState {
    pub h: GroupElement,
    pub velocity: AlgebraElement,
}

/// Per-step error metrics.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub t: f64,
    /// |I3 - H_hat H^-1|_F^2.
    pub eps_h: f64,
    /// Mean squared intensity residual, uniform per-pixel normalization.
    pub eps_i: f64,
    /// Photometric cost under the grid's quadrature.
    pub cost: f64,
}

/// The warped error image I^e = mu(H_hat^-1, I); equals the reference when
/// the estimate is exact.
pub fn warped_error_image(h_hat: &GroupElement, i: &SphericalImage) -> SphericalImage {
    i.warp(&h_hat.inverse())
}

/// Single pass over the grid producing the cost, the uniform mean squared
/// residual and the raw correction integral M = sum r grad(I^e) x^T w.
#[derive(Debug, Clone)]
pub struct StepEval {
    pub cost: f64,
    pub eps_i: f64,
    pub integral: AlgebraElement,
}

pub fn evaluate(
    h_hat: &GroupElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
) -> StepEval {
    let ie = warped_error_image(h_hat, i);
    let mut cost = 0.0;
    let mut sq_sum = 0.0;
    let mut m = Mat3::zeros();
    for c in grid.cells() {
        let r = ie.sample(&c.ray) - reference.sample(&c.ray);
        cost += r * r * c.weight;
        sq_sum += r * r;
        let g = ie.gradient(&c.ray);
        m += g.vector() * (c.ray.vector() * (r * c.weight)).transpose();
    }
    StepEval {
        cost: 0.5 * cost,
        eps_i: sq_sum / grid.pixel_count() as f64,
        integral: AlgebraElement::project(m),
    }
}

/// C(H_hat) = 1/2 sum (I^e(x) - ref(x))^2 w over the grid; residuals use the
/// zero extension outside either domain.
pub fn photometric_cost(
    h_hat: &GroupElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
) -> f64 {
    let ie = warped_error_image(h_hat, i);
    let mut cost = 0.0;
    for c in grid.cells() {
        let r = ie.sample(&c.ray) - reference.sample(&c.ray);
        cost += r * r * c.weight;
    }
    0.5 * cost
}

/// Raw correction integral M = sum r(x) grad(I^e)(x) x^T w. Pixels with
/// masked gradients contribute zero. Satisfies <M, D> = -dC/dt along
/// exp(t D) H_hat for every D in sl(3).
pub fn correction_integral(
    h_hat: &GroupElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
) -> AlgebraElement {
    evaluate(h_hat, i, reference, grid).integral
}

pub fn correction_scalar(
    h_hat: &GroupElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
    k: f64,
) -> AlgebraElement {
    correction_integral(h_hat, i, reference, grid).scale(k)
}

/// 8x8 cost Hessian at the identity: sum vee(grad(ref) x^T) outer products,
/// weighted by the grid quadrature. Depends only on the reference image, so
/// callers cache it per run.
pub fn cost_hessian(reference: &SphericalImage, grid: &PixelGrid) -> Mat8 {
    let mut h = Mat8::zeros();
    for c in grid.cells() {
        let g = reference.gradient(&c.ray);
        if g.norm() == 0.0 {
            continue;
        }
        let v = vee(&AlgebraElement::project(
            g.vector() * c.ray.vector().transpose(),
        ))
        .0;
        h.syger(c.weight, &v, &v, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    h.fill_upper_triangle_with_lower_triangle();
    h
}

/// Applies the configured gain to a precomputed correction integral. The
/// Hessian is required for the inverse-Hessian variant and ignored otherwise.
pub fn correction_from_integral(
    gains: &GainConfig,
    integral: &AlgebraElement,
    hessian: Option<&Mat8>,
    reference: &SphericalImage,
    grid: &PixelGrid,
) -> Result<AlgebraElement, ObserverError> {
    match *gains {
        GainConfig::Scalar { k } => Ok(integral.scale(k)),
        GainConfig::DualGain { k_s, k_a } => {
            let (sym, skew) = sym_skew_split(integral.matrix());
            Ok(AlgebraElement::project(sym * k_s + skew * k_a))
        }
        GainConfig::InverseHessian { k, ridge } => {
            let owned;
            let hess = match hessian {
                Some(h) => h,
                None => {
                    owned = cost_hessian(reference, grid);
                    &owned
                }
            };
            inverse_hessian_gain(hess, integral, k, ridge)
        }
    }
}

fn inverse_hessian_gain(
    hessian: &Mat8,
    integral: &AlgebraElement,
    k: f64,
    ridge: f64,
) -> Result<AlgebraElement, ObserverError> {
    let eigenvalues = SymmetricEigen::new(*hessian).eigenvalues;
    let lambda_max = eigenvalues.max();
    let lambda_min = eigenvalues.min();
    let min_ratio = if lambda_max > 0.0 { lambda_min / lambda_max } else { 0.0 };
    if ridge == 0.0 && min_ratio <= SINGULARITY_THRESHOLD {
        return Err(ObserverError::SingularHessian { min_ratio });
    }
    let reg = hessian + Mat8::identity() * (ridge * lambda_max);
    let chol = Cholesky::new(reg).ok_or(ObserverError::SingularHessian { min_ratio })?;
    let x: Vec8 = chol.solve(&vee(integral).0) * k;
    Ok(wedge(&Coordinates8(x)))
}

pub fn correction_inverse_hessian(
    h_hat: &GroupElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
    k: f64,
    ridge: f64,
) -> Result<AlgebraElement, ObserverError> {
    let m = correction_integral(h_hat, i, reference, grid);
    let hess = cost_hessian(reference, grid);
    inverse_hessian_gain(&hess, &m, k, ridge)
}

pub fn correction_dual_gain(
    h_hat: &GroupElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
    k_s: f64,
    k_a: f64,
) -> Result<AlgebraElement, ObserverError> {
    let m = correction_integral(h_hat, i, reference, grid);
    correction_from_integral(&GainConfig::DualGain { k_s, k_a }, &m, None, reference, grid)
}

/// Advances the estimate by one split exponential step:
/// H_hat+ = pr_SL3( exp(dt Delta) H_hat exp(dt U) ).
pub fn apply_correction(
    state: &ObserverState,
    delta: &AlgebraElement,
    u: &AlgebraElement,
    dt: f64,
) -> ObserverState {
    let next = group_exp(&delta.scale(dt))
        .compose(&state.h_hat)
        .compose(&group_exp(&u.scale(dt)));
    let h_hat = project_sl3(next.matrix()).expect("group product stays invertible");
    ObserverState { h_hat, t: state.t + dt, gains: state.gains }
}

/// One full observer step: compute Delta from the configured gains, then the
/// split exponential update. `hessian` is the per-run cache for the
/// inverse-Hessian variant; pass `None` to recompute on the fly.
pub fn step(
    state: &ObserverState,
    u: &AlgebraElement,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
    dt: f64,
    hessian: Option<&Mat8>,
) -> Result<ObserverState, ObserverError> {
    let m = correction_integral(&state.h_hat, i, reference, grid);
    let delta = correction_from_integral(&state.gains, &m, hessian, reference, grid)?;
    Ok(apply_correction(state, &delta, u, dt))
}

/// H+ = pr_SL3(H exp(dt U)): exact for constant-velocity flows because they
/// are one-parameter subgroups.
pub fn propagate_truth(truth: &TruthState, dt: f64) -> TruthState {
    let next = truth.h.compose(&group_exp(&truth.velocity.scale(dt)));
    let h = project_sl3(next.matrix()).expect("group product stays invertible");
    TruthState { h, velocity: truth.velocity.clone() }
}

/// eps_h, eps_i and the cost for the current estimate against the truth.
/// eps_i always uses uniform per-pixel normalization, independent of the
/// grid quadrature.
pub fn error_metrics(
    truth: &TruthState,
    state: &ObserverState,
    i: &SphericalImage,
    reference: &SphericalImage,
    grid: &PixelGrid,
) -> ErrorReport {
    let e = state.h_hat.compose(&truth.h.inverse());
    let eps_h = (Mat3::identity() - e.matrix()).norm_squared();
    let eval = evaluate(&state.h_hat, i, reference, grid);
    ErrorReport { t: state.t, eps_h, eps_i: eval.eps_i, cost: eval.cost }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Observable,
    Degenerate,
}

/// Spectrum report of the cost Hessian.
#[derive(Debug, Clone)]
pub struct NondegeneracyReport {
    /// Eigenvalues in descending order.
    pub eigenvalues: [f64; 8],
    /// lambda_min / lambda_max (zero when the Hessian vanishes).
    pub min_ratio: f64,
    pub verdict: Verdict,
    /// Eigen-directions below the degeneracy threshold: candidate stabilizer
    /// generators.
    pub null_directions: Vec<Coordinates8>,
}

/// Eigen-analysis of the cost Hessian: the reference image is observable
/// when every direction of sl(3) is excited, i.e. min_ratio is above
/// [`DEGENERACY_THRESHOLD`].
pub fn check_nondegeneracy(reference: &SphericalImage, grid: &PixelGrid) -> NondegeneracyReport {
    let hess = cost_hessian(reference, grid);
    let eig = SymmetricEigen::new(hess);
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = [0.0; 8];
    let mut null_directions = Vec::new();
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    for (rank, &idx) in order.iter().enumerate() {
        eigenvalues[rank] = eig.eigenvalues[idx];
        if eig.eigenvalues[idx] < DEGENERACY_THRESHOLD * lambda_max || lambda_max == 0.0 {
            null_directions.push(Coordinates8(eig.eigenvectors.column(idx).into_owned()));
        }
    }
    let min_ratio = if lambda_max > 0.0 { eigenvalues[7] / lambda_max } else { 0.0 };
    let verdict = if min_ratio < DEGENERACY_THRESHOLD {
        Verdict::Degenerate
    } else {
        Verdict::Observable
    };
    NondegeneracyReport { eigenvalues, min_ratio, verdict, null_directions }
}
