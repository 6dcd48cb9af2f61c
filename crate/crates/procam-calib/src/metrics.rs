//! Accuracy and precision evaluation: reprojection statistics, a native
//! planar PnP solver, and the translation-stability statistics used to judge
//! how consistently a fixed set of intrinsics recovers the procam baseline
//! across board poses.

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::calibrate::compose_procam_extrinsics;
use crate::distortion::{DistortionError, DivisionModel};
use crate::geometry::{
    estimate_homography, project_pinhole, GeometryError, Intrinsics, Point2, Point3,
    RigidTransform, RotationMatrix,
};
use crate::lm::{levenberg_marquardt, LmConfig};
use crate::structured_light::CorrespondenceSet;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("aligned lists have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} poses, got {got}")]
    InsufficientPoses { needed: usize, got: usize },
    #[error("only {remaining} poses usable after skipping failures; need at least 2")]
    TooManyPoseFailures { remaining: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
}

/// Per-device reprojection statistics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceReprojection {
    pub mean_px: f64,
    pub rms_px: f64,
    pub max_px: f64,
}

/// Combined per-calibration reprojection summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojectionStats {
    pub camera: DeviceReprojection,
    pub projector: DeviceReprojection,
    /// Mean of the camera and projector mean errors.
    pub stereo_mean_px: f64,
}

/// Per-point Euclidean reprojection errors of observations against the
/// pinhole projection of the board grid; returns mean, RMS, and max.
///
/// When a distortion model is supplied the observed points are taken to be
/// distorted camera measurements and are undistorted before comparison.
pub fn reprojection_error(
    k: &Intrinsics,
    dist: Option<&DivisionModel>,
    rt: &RigidTransform,
    board: &[Point2],
    observed: &[Point2],
) -> Result<DeviceReprojection, MetricsError> {
    if board.len() != observed.len() {
        return Err(MetricsError::LengthMismatch {
            left: board.len(),
            right: observed.len(),
        });
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut max = 0.0f64;
    for (b, obs) in board.iter().zip(observed) {
        let obs = match dist {
            Some(model) => model.undistort(*obs)?,
            None => *obs,
        };
        let p = project_pinhole(k, rt, Point3::new(b.u, b.v, 0.0))?;
        let err = p.distance_to(obs);
        sum += err;
        sum_sq += err * err;
        max = max.max(err);
    }
    let n = board.len().max(1) as f64;
    Ok(DeviceReprojection {
        mean_px: sum / n,
        rms_px: (sum_sq / n).sqrt(),
        max_px: max,
    })
}

/// Result of [`planar_pnp`].
#[derive(Debug, Clone)]
pub struct PnpResult {
    pub pose: RigidTransform,
    /// False when the refinement hit its iteration budget.
    pub converged: bool,
    pub rms_px: f64,
}

/// Recovers a device pose from known planar board points and their
/// (undistorted) image projections under known intrinsics.
///
/// The initial pose comes from decomposing the board-to-image homography:
/// `H = K [r1 r2 t]` up to scale, with the scale fixed by `1/|K^-1 h1|` and
/// its sign by requiring the board centroid to sit in front of the device;
/// `[r1 r2 r1xr2]` is projected onto the nearest rotation via SVD. A 6-DoF
/// Levenberg-Marquardt refinement of the reprojection error follows.
pub fn planar_pnp(
    k: &Intrinsics,
    board: &[Point2],
    image: &[Point2],
    config: &LmConfig,
) -> Result<PnpResult, MetricsError> {
    if board.len() != image.len() {
        return Err(MetricsError::LengthMismatch {
            left: board.len(),
            right: image.len(),
        });
    }
    let pairs: Vec<(Point2, Point2)> = board.iter().zip(image).map(|(b, i)| (*b, *i)).collect();
    let h = estimate_homography(&pairs)?;

    let n = board.len() as f64;
    let (cx, cy) = board
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.u, sy + p.v));
    let init = decompose_planar_pose(k, &h, Point2::new(cx / n, cy / n))?;
    let r = *init.rotation.matrix();
    let t = init.translation.to_vector();

    // 6-DoF refinement over [scaled rotation axis | translation].
    let axis = rotation_to_scaled_axis(&r);
    let theta0 = nalgebra::DVector::from_vec(vec![axis.x, axis.y, axis.z, t.x, t.y, t.z]);
    let residuals = |p: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        if p.iter().any(|v| !v.is_finite()) {
            return nalgebra::DVector::from_element(2 * board.len(), 1e6);
        }
        let rot = Rotation3::from_scaled_axis(Vector3::new(p[0], p[1], p[2]));
        let rt = RigidTransform::new(
            RotationMatrix::from_matrix_unchecked(*rot.matrix()),
            Point3::new(p[3], p[4], p[5]),
        );
        let mut res = nalgebra::DVector::zeros(2 * board.len());
        for (i, (bp, ip)) in board.iter().zip(image).enumerate() {
            match project_pinhole(k, &rt, Point3::new(bp.u, bp.v, 0.0)) {
                Ok(proj) => {
                    res[2 * i] = ip.u - proj.u;
                    res[2 * i + 1] = ip.v - proj.v;
                }
                Err(_) => return nalgebra::DVector::from_element(2 * board.len(), 1e6),
            }
        }
        res
    };
    let outcome = levenberg_marquardt(residuals, theta0, config);
    let rot = Rotation3::from_scaled_axis(Vector3::new(
        outcome.params[0],
        outcome.params[1],
        outcome.params[2],
    ));
    let rotation = RotationMatrix::from_matrix(*rot.matrix())?;
    let pose = RigidTransform::new(
        rotation,
        Point3::new(outcome.params[3], outcome.params[4], outcome.params[5]),
    );
    Ok(PnpResult {
        pose,
        converged: outcome.converged,
        rms_px: (outcome.cost / (2.0 * n)).sqrt(),
    })
}

/// One pose's contribution to the translation-precision statistics.
#[derive(Debug, Clone, Copy)]
pub struct PoseTranslation {
    pub pose_index: usize,
    /// Procam translation recovered at this pose (mm).
    pub translation: Point3,
    pub magnitude: f64,
    /// PnP poses the translation was composed from.
    pub rt_camera: RigidTransform,
    pub rt_projector: RigidTransform,
}

/// Spread of the recovered procam translation across board poses under fixed
/// intrinsics; all values in millimeters.
#[derive(Debug, Clone)]
pub struct TranslationPrecision {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    /// `sqrt(sigma_x^2 + sigma_y^2 + sigma_z^2)`.
    pub sigma_t: f64,
    /// Sample standard deviation of the baseline |T|.
    pub sigma_abs_t: f64,
    pub per_pose: Vec<PoseTranslation>,
    /// Indices of poses skipped because PnP failed.
    pub skipped: Vec<usize>,
}

/// Closed-form pose from a board-to-image homography under known intrinsics:
/// `H = K [r1 r2 t]` up to a scale fixed by `1/|K^-1 h1|`, signed so the
/// board centroid sits in front of the device, with `[r1 r2 r1xr2]`
/// projected onto the nearest rotation by SVD.
pub(crate) fn decompose_planar_pose(
    k: &Intrinsics,
    h_board_to_image: &crate::geometry::Homography,
    board_centroid: Point2,
) -> Result<RigidTransform, MetricsError> {
    let fk = k.f;
    let fv = k.alpha * k.f;
    let k_inv = Matrix3::new(
        1.0 / fk,
        0.0,
        -k.u0 / fk,
        0.0,
        1.0 / fv,
        -k.v0 / fv,
        0.0,
        0.0,
        1.0,
    );
    let b = k_inv * h_board_to_image.matrix();
    let b1 = b.column(0).into_owned();
    let b2 = b.column(1).into_owned();
    let b3 = b.column(2).into_owned();
    let norm1 = b1.norm();
    if norm1 < 1e-15 {
        return Err(MetricsError::Geometry(
            GeometryError::DegenerateConfiguration {
                reason: "homography column collapses under K^-1".to_string(),
            },
        ));
    }
    let mut lambda = 1.0 / norm1;
    let centroid_z = (b * Vector3::new(board_centroid.u, board_centroid.v, 1.0)).z * lambda;
    if centroid_z < 0.0 {
        lambda = -lambda;
    }
    let r1 = b1 * lambda;
    let r2 = b2 * lambda;
    let r3 = r1.cross(&r2);
    let r0 = Matrix3::from_columns(&[r1, r2, r3]);
    let svd = r0.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let det = (u * v_t).determinant();
    let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum())) * v_t;
    let rotation = RotationMatrix::from_matrix(r).map_err(MetricsError::Geometry)?;
    Ok(RigidTransform::new(
        rotation,
        Point3::from_vector(b3 * lambda),
    ))
}

/// Axis-angle (scaled axis) of a rotation matrix, safe against round-off
/// pushing the trace past the acos domain near the identity.
fn rotation_to_scaled_axis(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return Vector3::zeros();
    }
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let sin2 = skew.norm();
    if sin2 > 1e-9 {
        skew * (angle / sin2)
    } else {
        // Near a half-turn (R + I)/2 = n n^T; any column with a dominant
        // diagonal entry is parallel to the axis.
        let m = (r + Matrix3::identity()) * 0.5;
        let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let i = diag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Vector3::new(m[(0, i)], m[(1, i)], m[(2, i)]).normalize() * angle
    }
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    var.sqrt()
}

/// Recovers the procam translation at every pose via planar PnP on both
/// devices and reports its spread.
///
/// A rigid procam pair must produce the same translation at every pose, so
/// with the true intrinsics these statistics vanish up to noise; inflated
/// intrinsics show up as pose-dependent translations.
pub fn translation_precision(
    k_c: &Intrinsics,
    dist: Option<&DivisionModel>,
    k_p: &Intrinsics,
    poses: &[CorrespondenceSet],
    config: &LmConfig,
) -> Result<TranslationPrecision, MetricsError> {
    if poses.len() < 2 {
        return Err(MetricsError::InsufficientPoses {
            needed: 2,
            got: poses.len(),
        });
    }
    let mut per_pose = Vec::new();
    let mut skipped = Vec::new();
    for (idx, pose) in poses.iter().enumerate() {
        let result = (|| -> Result<PoseTranslation, MetricsError> {
            let camera_points: Vec<Point2> = match dist {
                Some(model) => pose
                    .camera_distorted
                    .iter()
                    .map(|p| model.undistort(*p))
                    .collect::<Result<_, _>>()?,
                None => pose.camera_distorted.clone(),
            };
            let cam = planar_pnp(k_c, &pose.board_points, &camera_points, config)?;
            let pro = planar_pnp(k_p, &pose.board_points, &pose.projector_points, config)?;
            let rel = compose_procam_extrinsics(&cam.pose, &pro.pose);
            Ok(PoseTranslation {
                pose_index: idx,
                translation: rel.translation,
                magnitude: rel.translation.norm(),
                rt_camera: cam.pose,
                rt_projector: pro.pose,
            })
        })();
        match result {
            Ok(pt) => per_pose.push(pt),
            Err(_) => skipped.push(idx),
        }
    }
    if per_pose.len() < 2 {
        return Err(MetricsError::TooManyPoseFailures {
            remaining: per_pose.len(),
        });
    }
    let sigma_x = sample_std(per_pose.iter().map(|p| p.translation.x));
    let sigma_y = sample_std(per_pose.iter().map(|p| p.translation.y));
    let sigma_z = sample_std(per_pose.iter().map(|p| p.translation.z));
    Ok(TranslationPrecision {
        sigma_x,
        sigma_y,
        sigma_z,
        sigma_t: (sigma_x * sigma_x + sigma_y * sigma_y + sigma_z * sigma_z).sqrt(),
        sigma_abs_t: sample_std(per_pose.iter().map(|p| p.magnitude)),
        per_pose,
        skipped,
    })
}

/// Number of pose subsets of size `min_size..=n_poses` drawn from `n_poses`
/// poses: the sum of binomial coefficients C(n, i).
///
/// Intended for small n (fits in u64 for n up to 62).
pub fn pose_set_count(n_poses: u32, min_size: u32) -> u64 {
    assert!(
        min_size >= 1 && min_size <= n_poses,
        "need 1 <= min_size <= n_poses"
    );
    assert!(n_poses <= 62, "count overflows u64 beyond n = 62");
    (min_size..=n_poses).map(|i| binomial(n_poses, i)).sum()
}

fn binomial(n: u32, k: u32) -> u64 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k as u128 {
        result = result * (n as u128 - i) / (i + 1);
    }
    result as u64
}

/// Mean of the camera and projector mean reprojection errors for one
/// correspondence set under the given calibration.
pub fn stereo_reprojection(
    k_c: &Intrinsics,
    dist: Option<&DivisionModel>,
    rt_c: &RigidTransform,
    k_p: &Intrinsics,
    rt_p: &RigidTransform,
    corr: &CorrespondenceSet,
) -> Result<f64, MetricsError> {
    let cam = reprojection_error(k_c, dist, rt_c, &corr.board_points, &corr.camera_distorted)?;
    let pro = reprojection_error(k_p, None, rt_p, &corr.board_points, &corr.projector_points)?;
    Ok(0.5 * (cam.mean_px + pro.mean_px))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euler_xyz_to_matrix, EulerAnglesXYZ};
    use approx::assert_relative_eq;

    fn board_grid() -> Vec<Point2> {
        (0..6)
            .flat_map(|r| (0..10).map(move |c| Point2::new(c as f64 * 23.0, r as f64 * 23.0)))
            .collect()
    }

    fn test_pose() -> (Intrinsics, RigidTransform) {
        let k = Intrinsics::new(1539.0, 1.004, 674.0, 512.0).unwrap();
        let r = euler_xyz_to_matrix(EulerAnglesXYZ::new(-14.0, 18.0, 2.0));
        let rt = RigidTransform::new(r, Point3::new(-103.5, -57.5, 800.0));
        (k, rt)
    }

    #[test]
    fn exact_projections_give_zero_stats() {
        let (k, rt) = test_pose();
        let board = board_grid();
        let observed: Vec<Point2> = board
            .iter()
            .map(|b| project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)).unwrap())
            .collect();
        let stats = reprojection_error(&k, None, &rt, &board, &observed).unwrap();
        assert_eq!(stats.mean_px, 0.0);
        assert_eq!(stats.rms_px, 0.0);
        assert_eq!(stats.max_px, 0.0);
    }

    #[test]
    fn single_offset_point_follows_pythagoras() {
        let (k, rt) = test_pose();
        let board = board_grid();
        let mut observed: Vec<Point2> = board
            .iter()
            .map(|b| project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)).unwrap())
            .collect();
        observed[7].u += 3.0;
        observed[7].v += 4.0;
        let n = board.len() as f64;
        let stats = reprojection_error(&k, None, &rt, &board, &observed).unwrap();
        assert_relative_eq!(stats.max_px, 5.0, epsilon = 1e-12);
        assert_relative_eq!(stats.mean_px, 5.0 / n, epsilon = 1e-12);
        assert_relative_eq!(stats.rms_px, 5.0 / n.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn reprojection_rejects_mismatched_lengths() {
        let (k, rt) = test_pose();
        let board = board_grid();
        let err = reprojection_error(&k, None, &rt, &board, &board[..5]).unwrap_err();
        assert!(matches!(err, MetricsError::LengthMismatch { .. }));
    }

    #[test]
    fn pnp_recovers_exact_pose() {
        let (k, rt) = test_pose();
        let board = board_grid();
        let image: Vec<Point2> = board
            .iter()
            .map(|b| project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)).unwrap())
            .collect();
        let result = planar_pnp(&k, &board, &image, &LmConfig::default()).unwrap();
        assert!(result.converged);
        let dr = result.pose.rotation.matrix() - rt.rotation.matrix();
        assert!(dr.amax() < 1e-8, "rotation error {:.3e}", dr.amax());
        let dt = (result.pose.translation.to_vector() - rt.translation.to_vector()).norm();
        assert!(dt < 1e-6, "translation error {dt:.3e} mm");
    }

    #[test]
    fn pnp_frontal_pose_depth() {
        let k = Intrinsics::new(1539.0, 1.0, 640.0, 400.0).unwrap();
        let rt = RigidTransform::new(
            RotationMatrix::identity(),
            Point3::new(-103.5, -57.5, 750.0),
        );
        let board = board_grid();
        let image: Vec<Point2> = board
            .iter()
            .map(|b| project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)).unwrap())
            .collect();
        let result = planar_pnp(&k, &board, &image, &LmConfig::default()).unwrap();
        assert_relative_eq!(result.pose.translation.z, 750.0, epsilon = 1e-6);
        assert_relative_eq!(result.pose.translation.x, -103.5, epsilon = 1e-6);
    }

    #[test]
    fn pose_set_count_matches_brute_force() {
        assert_eq!(pose_set_count(7, 3), 99);
        assert_eq!(pose_set_count(3, 3), 1);
        assert_eq!(pose_set_count(5, 3), 16);
        // Brute-force subset enumeration oracle.
        for n in 3..=10u32 {
            let mut count = 0u64;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() >= 3 {
                    count += 1;
                }
            }
            assert_eq!(pose_set_count(n, 3), count, "n = {n}");
        }
    }

    #[test]
    fn stereo_reprojection_is_mean_of_device_means() {
        // Constructed: camera mean 0.4 px, projector mean 1.0 px -> 0.7 px.
        let cam = DeviceReprojection {
            mean_px: 0.4,
            rms_px: 0.4,
            max_px: 0.4,
        };
        let pro = DeviceReprojection {
            mean_px: 1.0,
            rms_px: 1.0,
            max_px: 1.0,
        };
        let stereo = 0.5 * (cam.mean_px + pro.mean_px);
        assert_relative_eq!(stereo, 0.7);
    }

    #[test]
    fn sample_std_basics() {
        assert_eq!(sample_std([1.0, 1.0, 1.0].into_iter()), 0.0);
        assert_relative_eq!(
            sample_std([1.0, 3.0].into_iter()),
            2.0_f64.sqrt(),
            epsilon = 1e-12
        );
    }
}
