//! Two-parameter division-model radial distortion.
//!
//! The model maps a distorted image point `p_hat` to its undistorted position
//! by dividing the centered coordinates by `1 + k1*r^2 + k2*r^4`, where `r`
//! is the distance from the center of distortion to `p_hat`. This module
//! provides the forward map, its numeric inverse, recovery of the center of
//! distortion from a radial fundamental matrix, and coefficient estimation
//! from a single board pose via a nested homography fit.

use nalgebra::{DMatrix, Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{self, estimate_homography, Point2};
use crate::lm::{levenberg_marquardt, LmConfig};

/// Denominators at or below this value are treated as singular.
pub const DENOMINATOR_EPS: f64 = 1e-9;

/// Minimum pair count for the radial fundamental matrix estimate.
pub const MIN_CENTER_PAIRS: usize = 9;

/// Minimum pair count for coefficient estimation.
pub const MIN_COEFF_PAIRS: usize = 8;

/// Relative singular-value tolerance for the rank test of the radial
/// fundamental design matrix.
const RANK_REL_TOL: f64 = 1e-10;

/// Minimum relative cost improvement of the refined distortion model over a
/// plain homography fit; below this the data carries no usable distortion
/// signal and the recovered center is meaningless.
const NEAR_ZERO_IMPROVEMENT: f64 = 0.25;

/// Bound on the radius-normalized coefficients `k1*d^2` and `k2*d^4` during
/// estimation. Keeps the denominator within a physically plausible band and
/// blocks the degenerate fit where huge coefficients collapse every point
/// onto the center (which would drive the homography residual to zero).
const NORMALIZED_COEFF_BOUND: f64 = 0.9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DistortionError {
    /// The denominator `1 + k1 r^2 + k2 r^4` vanished.
    #[error("division-model denominator not positive (min = {min:.3e})")]
    ModelSingularity { min: f64 },
    /// Inversion found no radius reproducing the requested point.
    #[error("no real radial root within {max_radius:.1} px for target radius {target:.3}")]
    NoRealRoot { target: f64, max_radius: f64 },
    /// The radial fundamental design matrix is rank deficient.
    #[error("radial fundamental design matrix has numerical rank {rank} < 8")]
    RankDeficient { rank: usize },
    /// The recovered epipole lies at infinity; no finite center exists.
    #[error("epipole of the radial fundamental matrix is at infinity")]
    EpipoleAtInfinity,
    /// Too few correspondences for the requested estimate.
    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientPairs { needed: usize, got: usize },
    #[error("geometry failure during distortion estimation: {0}")]
    Geometry(#[from] geometry::GeometryError),
}

/// Division-model radial distortion: center of distortion plus coefficients
/// `k1` (px^-2) and `k2` (px^-4).
///
/// Construction validates that the denominator stays positive for every
/// radius up to the corner of the supplied image, so the model is invertible
/// over the full frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisionModel {
    center: Point2,
    k1: f64,
    k2: f64,
    max_radius: f64,
}

/// Largest distance from `center` to a corner of a `width x height` frame.
fn corner_radius(center: Point2, width: u32, height: u32) -> f64 {
    let (w, h) = (width as f64, height as f64);
    [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
        .iter()
        .map(|&(u, v)| center.distance_to(Point2::new(u, v)))
        .fold(0.0, f64::max)
}

/// Minimum of `1 + k1 s + k2 s^2` over `s` in `[0, s_max]` (`s = r^2`).
fn min_denominator(k1: f64, k2: f64, s_max: f64) -> f64 {
    let eval = |s: f64| 1.0 + k1 * s + k2 * s * s;
    let mut min = eval(0.0).min(eval(s_max));
    if k2 != 0.0 {
        let s_crit = -k1 / (2.0 * k2);
        if s_crit > 0.0 && s_crit < s_max {
            min = min.min(eval(s_crit));
        }
    }
    min
}

impl DivisionModel {
    /// Builds a model and verifies invertibility across the given frame.
    pub fn new(
        center: Point2,
        k1: f64,
        k2: f64,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self, DistortionError> {
        let max_radius = corner_radius(center, image_width, image_height);
        let min = min_denominator(k1, k2, max_radius * max_radius);
        if min <= 0.0 {
            return Err(DistortionError::ModelSingularity { min });
        }
        Ok(Self {
            center,
            k1,
            k2,
            max_radius,
        })
    }

    /// Identity distortion (k1 = k2 = 0) about the given center.
    pub fn identity(center: Point2, image_width: u32, image_height: u32) -> Self {
        Self::new(center, 0.0, 0.0, image_width, image_height)
            .expect("identity model is always valid")
    }

    pub fn center(&self) -> Point2 {
        self.center
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// Radius of the furthest frame corner used at construction.
    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn is_identity(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }

    /// Maps a distorted point to its undistorted position.
    pub fn undistort(&self, p_distorted: Point2) -> Result<Point2, DistortionError> {
        undistort_raw(self.center, self.k1, self.k2, p_distorted)
            .ok_or(DistortionError::ModelSingularity { min: 0.0 })
    }

    /// Maps an undistorted point to the distorted position the camera would
    /// observe, by solving the scalar radial equation `r / d(r) = rho` with
    /// bisection and a Newton polish.
    pub fn distort(&self, p_undistorted: Point2) -> Result<Point2, DistortionError> {
        let du = p_undistorted.u - self.center.u;
        let dv = p_undistorted.v - self.center.v;
        let rho = du.hypot(dv);
        if rho < 1e-12 {
            return Ok(self.center);
        }
        let r = self.invert_radius(rho)?;
        let scale = r / rho;
        Ok(Point2::new(
            self.center.u + du * scale,
            self.center.v + dv * scale,
        ))
    }

    /// Solves `r / (1 + k1 r^2 + k2 r^4) = rho` for the smallest positive
    /// root within twice the frame radius.
    fn invert_radius(&self, rho: f64) -> Result<f64, DistortionError> {
        let limit = 2.0 * self.max_radius.max(1.0);
        // +inf once the denominator is no longer positive: past the pole the
        // undistorted radius has blown up, so any bracket ends there.
        let g = |r: f64| -> f64 {
            let d = 1.0 + self.k1 * r * r + self.k2 * r.powi(4);
            if d <= 1e-12 {
                f64::INFINITY
            } else {
                r / d - rho
            }
        };
        const SCAN_STEPS: usize = 256;
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=SCAN_STEPS {
            let r = limit * i as f64 / SCAN_STEPS as f64;
            if g(r) >= 0.0 {
                hi = Some(r);
                break;
            }
            lo = r;
        }
        let mut hi = hi.ok_or(DistortionError::NoRealRoot {
            target: rho,
            max_radius: limit,
        })?;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 * hi.max(1.0) {
                break;
            }
        }
        let mut r = 0.5 * (lo + hi);
        // Newton polish on f(r) = r - rho * d(r).
        for _ in 0..4 {
            let d = 1.0 + self.k1 * r * r + self.k2 * r.powi(4);
            let dd = 2.0 * self.k1 * r + 4.0 * self.k2 * r.powi(3);
            let f = r - rho * d;
            let fp = 1.0 - rho * dd;
            if fp.abs() < 1e-15 {
                break;
            }
            let next = r - f / fp;
            if next >= lo && next <= hi {
                r = next;
            } else {
                break;
            }
        }
        Ok(r)
    }
}

fn undistort_raw(center: Point2, k1: f64, k2: f64, p: Point2) -> Option<Point2> {
    if k1 == 0.0 && k2 == 0.0 {
        // Exact identity, not merely identity up to round-off.
        return Some(p);
    }
    let du = p.u - center.u;
    let dv = p.v - center.v;
    let r2 = du * du + dv * dv;
    let denom = 1.0 + k1 * r2 + k2 * r2 * r2;
    if denom <= DENOMINATOR_EPS {
        return None;
    }
    Some(Point2::new(center.u + du / denom, center.v + dv / denom))
}

/// Result of the center-of-distortion estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterEstimate {
    pub center: Point2,
    /// Set when the residual structure indicates vanishing distortion: the
    /// refined radial model barely improves on a plain homography fit, so
    /// the recovered center should not be trusted. Callers are expected to
    /// fall back to the frame center.
    pub near_zero_distortion: bool,
    /// Relative cost improvement of the refined radial model over a plain
    /// homography fit of the raw (distorted) points; near 0 means no usable
    /// distortion signal.
    pub cost_improvement: f64,
    /// Conditioning s1/s8 of the linear design matrix.
    pub conditioning: f64,
    /// Epipole of the linear radial-fundamental stage, before refinement.
    pub linear_center: Point2,
}

fn hartley_matrix(points: impl Iterator<Item = Point2> + Clone) -> Matrix3<f64> {
    let mut n = 0usize;
    let (mut cu, mut cv) = (0.0, 0.0);
    for p in points.clone() {
        cu += p.u;
        cv += p.v;
        n += 1;
    }
    let nf = n as f64;
    cu /= nf;
    cv /= nf;
    let mut mean = 0.0;
    for p in points {
        mean += (p.u - cu).hypot(p.v - cv);
    }
    mean /= nf;
    let s = if mean > 1e-12 {
        std::f64::consts::SQRT_2 / mean
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cu, 0.0, s, -s * cv, 0.0, 0.0, 1.0)
}

/// Homography-consistency residuals for a candidate division model: the
/// camera points are undistorted, a board-to-camera homography is refit, and
/// the per-point transfer errors are returned. `None` when the candidate is
/// infeasible (singular denominator, degenerate homography).
fn homography_consistency_residuals(
    pairs: &[(Point2, Point2)],
    center: Point2,
    k1: f64,
    k2: f64,
    s_max: f64,
) -> Option<nalgebra::DVector<f64>> {
    if min_denominator(k1, k2, s_max) <= DENOMINATOR_EPS {
        return None;
    }
    let mut h_pairs = Vec::with_capacity(pairs.len());
    for (cam, board) in pairs {
        let und = undistort_raw(center, k1, k2, *cam)?;
        h_pairs.push((*board, und));
    }
    let h = estimate_homography(&h_pairs).ok()?;
    let mut res = nalgebra::DVector::zeros(2 * pairs.len());
    for (i, (board, und)) in h_pairs.iter().enumerate() {
        let mapped = geometry::apply_homography(&h, *board).ok()?;
        res[2 * i] = und.u - mapped.u;
        res[2 * i + 1] = und.v - mapped.v;
    }
    Some(res)
}

/// Inner coefficient fit at a fixed center over the radius-normalized
/// parameters; returns the fit and its residual vector.
fn fit_coeffs_at_center(
    pairs: &[(Point2, Point2)],
    center: Point2,
    r2: f64,
    r4: f64,
    config: &LmConfig,
) -> Option<(f64, f64, nalgebra::DVector<f64>, bool, usize)> {
    let n = pairs.len();
    let residuals = |params: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        if params.amax() > NORMALIZED_COEFF_BOUND {
            return nalgebra::DVector::from_element(2 * n, 1e6);
        }
        homography_consistency_residuals(pairs, center, params[0] / r2, params[1] / r4, r2)
            .unwrap_or_else(|| nalgebra::DVector::from_element(2 * n, 1e6))
    };
    let outcome = levenberg_marquardt(
        residuals,
        nalgebra::DVector::from_vec(vec![0.0, 0.0]),
        config,
    );
    let (k1, k2) = (outcome.params[0] / r2, outcome.params[1] / r4);
    let res = homography_consistency_residuals(pairs, center, k1, k2, r2)?;
    Some((k1, k2, res, outcome.converged, outcome.iterations))
}

/// Linear radial-fundamental estimate: normalized least squares over the
/// bilinear constraint, rank-2 projection, left epipole. Returns the epipole
/// and the conditioning of the design matrix.
fn linear_radial_epipole(pairs: &[(Point2, Point2)]) -> Result<(Point2, f64), DistortionError> {
    let t_cam = hartley_matrix(pairs.iter().map(|(c, _)| *c));
    let t_board = hartley_matrix(pairs.iter().map(|(_, b)| *b));

    let mut design = DMatrix::zeros(pairs.len(), 9);
    for (row, (cam, board)) in pairs.iter().enumerate() {
        let c = t_cam * Vector3::new(cam.u, cam.v, 1.0);
        let b = t_board * Vector3::new(board.u, board.v, 1.0);
        let (cu, cv) = (c.x / c.z, c.y / c.z);
        let (bx, by) = (b.x / b.z, b.y / b.z);
        let entries = [cu * bx, cu * by, cu, cv * bx, cv * by, cv, bx, by, 1.0];
        for (col, e) in entries.into_iter().enumerate() {
            design[(row, col)] = e;
        }
    }

    let svd = design.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("finite singular values")
    });
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let rank = sv.iter().filter(|&&s| s > RANK_REL_TOL * sv[0]).count();
    if rank < 8 {
        return Err(DistortionError::RankDeficient { rank });
    }
    let conditioning = if sv[7] > 0.0 {
        sv[0] / sv[7]
    } else {
        f64::INFINITY
    };

    let f_row = v_t.row(order[8]);
    let f_norm = Matrix3::new(
        f_row[0], f_row[1], f_row[2], //
        f_row[3], f_row[4], f_row[5], //
        f_row[6], f_row[7], f_row[8],
    );
    // Undo the normalization: (T_c m_hat)^T F~ (T_b m_b) = m_hat^T (T_c^T F~ T_b) m_b.
    let f_full = t_cam.transpose() * f_norm * t_board;

    // Rank-2 enforcement, then the left epipole from the left singular vector
    // of the vanished singular value.
    let f_svd = f_full.svd(true, true);
    let u = f_svd.u.as_ref().expect("requested U");
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| {
        f_svd.singular_values[b]
            .partial_cmp(&f_svd.singular_values[a])
            .expect("finite singular values")
    });
    let epipole = u.column(idx[2]);
    if epipole[2].abs() < 1e-12 {
        return Err(DistortionError::EpipoleAtInfinity);
    }
    Ok((
        Point2::new(epipole[0] / epipole[2], epipole[1] / epipole[2]),
        conditioning,
    ))
}

/// Recovers the center of distortion from pairs of
/// `(distorted camera point, board point)`.
///
/// Radial distortion displaces points along rays through the center, so the
/// triples (center, undistorted, distorted) are collinear and the pairs
/// satisfy `m_hat^T F m_board = 0` with `F = [center]_x H`: the left null
/// vector of the rank-2-enforced linear estimate of `F` is the center. That
/// linear epipole is exact on noiseless data but very noise-sensitive, so it
/// only seeds a refinement that minimizes the homography-consistency cost of
/// the full division model over (center, k1, k2).
pub fn estimate_center_of_distortion(
    pairs: &[(Point2, Point2)],
) -> Result<CenterEstimate, DistortionError> {
    if pairs.len() < MIN_CENTER_PAIRS {
        return Err(DistortionError::InsufficientPairs {
            needed: MIN_CENTER_PAIRS,
            got: pairs.len(),
        });
    }
    let (linear_center, conditioning) = linear_radial_epipole(pairs)?;

    // Data-driven radius scale: the camera-point spread.
    let n = pairs.len() as f64;
    let centroid = {
        let (su, sv) = pairs
            .iter()
            .fold((0.0, 0.0), |(su, sv), (c, _)| (su + c.u, sv + c.v));
        Point2::new(su / n, sv / n)
    };
    let spread = pairs
        .iter()
        .map(|(c, _)| c.distance_to(centroid))
        .fold(0.0, f64::max)
        .max(1.0);
    let radius = 2.0 * spread;
    let r2 = radius * radius;
    let r4 = r2 * r2;

    let inner_config = LmConfig {
        max_iters: 60,
        ..LmConfig::default()
    };
    // The outer cost is evaluated through a nested fit, so its finite
    // differences need steps well above the inner solver's convergence
    // jitter; for pixel-scale centers this is a fraction of a pixel.
    let outer_config = LmConfig {
        jacobian_step: 1e-3,
        max_iters: 60,
        ..LmConfig::default()
    };

    // Coefficients are profiled out: the outer problem is over the center
    // alone, which avoids the long curved valley the joint problem has.
    let outer_cost = |center: Point2| -> Option<f64> {
        fit_coeffs_at_center(pairs, center, r2, r4, &inner_config)
            .map(|(_, _, res, _, _)| res.norm_squared())
    };

    // Seed from the linear epipole (when plausible) and a coarse grid
    // around the data centroid.
    let mut seeds = Vec::new();
    if linear_center.is_finite() && linear_center.distance_to(centroid) < 3.0 * spread {
        seeds.push(linear_center);
    }
    for du in [-0.5, 0.0, 0.5] {
        for dv in [-0.5, 0.0, 0.5] {
            seeds.push(Point2::new(
                centroid.u + du * spread,
                centroid.v + dv * spread,
            ));
        }
    }
    let seed = seeds
        .into_iter()
        .filter_map(|s| outer_cost(s).map(|c| (s, c)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite costs"))
        .map(|(s, _)| s)
        .unwrap_or(centroid);

    let outer_residuals = |params: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        let center = Point2::new(params[0], params[1]);
        // A center far outside the data region is physically meaningless and
        // would defeat the radius-normalized coefficient bound.
        if center.distance_to(centroid) > 3.0 * spread {
            return nalgebra::DVector::from_element(2 * pairs.len(), 1e6);
        }
        fit_coeffs_at_center(pairs, center, r2, r4, &inner_config)
            .map(|(_, _, res, _, _)| res)
            .unwrap_or_else(|| nalgebra::DVector::from_element(2 * pairs.len(), 1e6))
    };
    let outcome = levenberg_marquardt(
        outer_residuals,
        nalgebra::DVector::from_vec(vec![seed.u, seed.v]),
        &outer_config,
    );
    let center = Point2::new(outcome.params[0], outcome.params[1]);

    // Compare against a plain homography fit of the raw points: when the
    // radial model barely helps, there is no distortion signal to locate a
    // center with.
    let baseline = homography_consistency_residuals(pairs, centroid, 0.0, 0.0, r2)
        .map(|r| r.norm_squared())
        .unwrap_or(f64::INFINITY);
    let cost_improvement = if baseline > 0.0 {
        (baseline - outcome.cost).max(0.0) / baseline
    } else {
        0.0
    };

    Ok(CenterEstimate {
        center,
        near_zero_distortion: cost_improvement < NEAR_ZERO_IMPROVEMENT,
        cost_improvement,
        conditioning,
        linear_center,
    })
}

/// Result of the coefficient fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffEstimate {
    pub k1: f64,
    pub k2: f64,
    /// False when the optimizer hit its iteration budget; the coefficients
    /// are then the best found so far.
    pub converged: bool,
    pub iterations: usize,
    /// Final sum of squared homography-transfer residuals (px^2).
    pub cost: f64,
}

/// Estimates `(k1, k2)` given the center of distortion, from pairs of
/// `(distorted camera point, board point)`.
///
/// The fit encodes the one-shot proportionality assumption: for the true
/// coefficients the undistorted points are an exact homography image of the
/// board. Candidate coefficients undistort all points, a board-to-camera
/// homography is refit, and the summed squared transfer error is minimized
/// over `(k1, k2)` by Levenberg-Marquardt. Internally the coefficients are
/// scaled by the frame radius so both parameters are O(1).
pub fn estimate_division_coeffs(
    pairs: &[(Point2, Point2)],
    center: Point2,
    image_width: u32,
    image_height: u32,
    config: &LmConfig,
) -> Result<CoeffEstimate, DistortionError> {
    if pairs.len() < MIN_COEFF_PAIRS {
        return Err(DistortionError::InsufficientPairs {
            needed: MIN_COEFF_PAIRS,
            got: pairs.len(),
        });
    }
    let radius = corner_radius(center, image_width, image_height).max(1.0);
    let r2 = radius * radius;
    let r4 = r2 * r2;

    let (k1, k2, res, converged, iterations) = fit_coeffs_at_center(pairs, center, r2, r4, config)
        .ok_or(DistortionError::ModelSingularity { min: 0.0 })?;
    // The returned coefficients must satisfy the model invariant.
    let min = min_denominator(k1, k2, r2);
    if min <= 0.0 {
        return Err(DistortionError::ModelSingularity { min });
    }
    Ok(CoeffEstimate {
        k1,
        k2,
        converged,
        iterations,
        cost: res.norm_squared(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    const W: u32 = 1280;
    const H: u32 = 800;

    #[test]
    fn undistort_identity_when_coeffs_zero() {
        let m = DivisionModel::identity(Point2::new(640.0, 400.0), W, H);
        let p = Point2::new(123.4, 567.8);
        assert_eq!(m.undistort(p).unwrap(), p);
    }

    #[test]
    fn center_is_fixed_point() {
        let c = Point2::new(640.0, 400.0);
        let m = DivisionModel::new(c, -5e-8, 1e-15, W, H).unwrap();
        let u = m.undistort(c).unwrap();
        assert_relative_eq!(u.u, c.u);
        assert_relative_eq!(u.v, c.v);
        let d = m.distort(c).unwrap();
        assert_relative_eq!(d.u, c.u);
        assert_relative_eq!(d.v, c.v);
    }

    #[test]
    fn undistort_hand_computed_value() {
        // r = 100, denom = 1 - 1e-7 * 1e4 = 0.999, u = 640 + 100/0.999.
        let m = DivisionModel::new(Point2::new(640.0, 400.0), -1e-7, 0.0, W, H).unwrap();
        let p = m.undistort(Point2::new(740.0, 400.0)).unwrap();
        assert_relative_eq!(p.u, 640.0 + 100.0 / 0.999, epsilon = 1e-9);
        assert_relative_eq!(p.u, 740.1001, epsilon = 1e-4);
        assert_relative_eq!(p.v, 400.0);
    }

    #[test]
    fn distort_is_identity_for_zero_coeffs() {
        let m = DivisionModel::identity(Point2::new(640.0, 400.0), W, H);
        let p = Point2::new(1000.0, 150.0);
        let d = m.distort(p).unwrap();
        assert_relative_eq!(d.u, p.u, epsilon = 1e-12);
        assert_relative_eq!(d.v, p.v, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_random_points_and_models() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..20 {
            let k1 = rng.random_range(-8e-8..4e-8);
            let k2 = rng.random_range(-1e-15..1e-15);
            let c = Point2::new(
                rng.random_range(600.0..700.0),
                rng.random_range(370.0..430.0),
            );
            let Ok(m) = DivisionModel::new(c, k1, k2, W, H) else {
                continue;
            };
            for _ in 0..50 {
                let p = Point2::new(
                    rng.random_range(0.0..W as f64),
                    rng.random_range(0.0..H as f64),
                );
                let d = m.distort(p).unwrap();
                let back = m.undistort(d).unwrap();
                assert!(
                    back.distance_to(p) < 1e-9,
                    "round trip failed for {p:?} with k1={k1:.2e}, k2={k2:.2e}: {back:?}"
                );
            }
        }
    }

    #[test]
    fn radial_symmetry() {
        let c = Point2::new(640.0, 400.0);
        let m = DivisionModel::new(c, -5e-8, 2e-15, W, H).unwrap();
        let r = 250.0;
        let p1 = Point2::new(c.u + r, c.v);
        let p2 = Point2::new(c.u, c.v - r);
        let f1 = m.undistort(p1).unwrap().distance_to(c) / r;
        let f2 = m.undistort(p2).unwrap().distance_to(c) / r;
        assert_relative_eq!(f1, f2, max_relative = 1e-12);
    }

    #[test]
    fn construction_rejects_singular_model() {
        // k1 strongly negative: denominator crosses zero inside the frame.
        let err = DivisionModel::new(Point2::new(640.0, 400.0), -2e-6, 0.0, W, H).unwrap_err();
        assert!(matches!(err, DistortionError::ModelSingularity { .. }));
    }

    #[test]
    fn insufficient_pairs_rejected() {
        let pairs: Vec<(Point2, Point2)> = (0..8)
            .map(|i| (Point2::new(i as f64, 0.0), Point2::new(i as f64, 0.0)))
            .collect();
        assert!(matches!(
            estimate_center_of_distortion(&pairs),
            Err(DistortionError::InsufficientPairs { needed: 9, got: 8 })
        ));
    }
}
