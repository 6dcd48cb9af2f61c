//! Single-pose procam calibration.
//!
//! Both devices are optimized independently over a six-parameter set that
//! pins the principal axis to a fixed point on the board plane: the camera
//! over `{f, alpha, phi, O}` with its principal point frozen at the estimated
//! center of distortion, and the projector over `{f, v0, phi, O}` with its
//! horizontal principal coordinate fixed at half the frame width. The
//! device-to-device extrinsics follow by composition.

use nalgebra::DVector;
use thiserror::Error;

use crate::distortion::{
    estimate_center_of_distortion, estimate_division_coeffs, DistortionError, DivisionModel,
};
use crate::geometry::{
    apply_homography, estimate_homography, matrix_to_euler_xyz, project_pinhole, rotation_about_z,
    GeometryError, Homography, Intrinsics, Point2, Point3, RigidTransform, RotationMatrix,
};
use crate::lm::{levenberg_marquardt, LmConfig};
use crate::metrics::DeviceReprojection;
use crate::structured_light::{CorrespondenceSet, ImageDims};

/// Residual value substituted when a parameter trial is geometrically
/// infeasible; the optimizer sees an enormous cost and rejects the step.
pub const RESIDUAL_SENTINEL: f64 = 1e6;

/// Minimum correspondences for the camera path (the distortion stage needs
/// at least nine pairs).
pub const MIN_CAMERA_CORRESPONDENCES: usize = 9;

/// Minimum correspondences for the projector path.
pub const MIN_PROJECTOR_CORRESPONDENCES: usize = 4;

/// Camera poses with |psi| + |nu| below this are flagged as frontal, where
/// single-pose focal recovery is known to be weakly constrained.
pub const CAMERA_FRONTAL_WARN_DEG: f64 = 10.0;

/// Projector poses with |nu| below this are flagged likewise.
pub const PROJECTOR_FRONTAL_WARN_DEG: f64 = 13.0;

/// Pipeline stage labels attached to propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    DistortionCenter,
    DistortionCoeffs,
    DistortionModel,
    Undistort,
    CameraHomography,
    ProjectorHomography,
    PrincipalProjection,
    Orientation,
    CameraOptimization,
    ProjectorOptimization,
    Extrinsics,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::DistortionCenter => "distortion-center estimation",
            Stage::DistortionCoeffs => "distortion-coefficient estimation",
            Stage::DistortionModel => "distortion-model construction",
            Stage::Undistort => "undistortion",
            Stage::CameraHomography => "camera-to-board homography",
            Stage::ProjectorHomography => "projector-to-board homography",
            Stage::PrincipalProjection => "principal-point projection",
            Stage::Orientation => "orientation detection",
            Stage::CameraOptimization => "camera optimization",
            Stage::ProjectorOptimization => "projector optimization",
            Stage::Extrinsics => "extrinsic composition",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CalibrateError {
    #[error("{stage}: {source}")]
    Geometry { stage: Stage, source: GeometryError },
    #[error("{stage}: {source}")]
    Distortion {
        stage: Stage,
        source: DistortionError,
    },
    #[error("principal axis is degenerate: {reason}")]
    DegenerateAxis { reason: String },
    #[error("need at least {needed} correspondences for the {device} path, got {got}")]
    InsufficientCorrespondences {
        device: &'static str,
        needed: usize,
        got: usize,
    },
}

fn geo(stage: Stage) -> impl Fn(GeometryError) -> CalibrateError {
    move |source| CalibrateError::Geometry { stage, source }
}

fn dist(stage: Stage) -> impl Fn(DistortionError) -> CalibrateError {
    move |source| CalibrateError::Distortion { stage, source }
}

/// Camera parameter set: focal length, aspect ratio, roll about the
/// principal axis (degrees), and the center of projection in board
/// coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParamSet {
    pub f: f64,
    pub alpha: f64,
    pub phi_deg: f64,
    pub center_of_projection: Point3,
}

/// Projector parameter set: focal length, vertical principal coordinate,
/// roll (degrees), and the center of projection in board coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorParamSet {
    pub f: f64,
    pub v0: f64,
    pub phi_deg: f64,
    pub center_of_projection: Point3,
}

impl CameraParamSet {
    pub fn pack(&self) -> DVector<f64> {
        let o = self.center_of_projection;
        DVector::from_vec(vec![self.f, self.alpha, self.phi_deg, o.x, o.y, o.z])
    }

    pub fn unpack(v: &DVector<f64>) -> Self {
        Self {
            f: v[0],
            alpha: v[1],
            phi_deg: v[2],
            center_of_projection: Point3::new(v[3], v[4], v[5]),
        }
    }
}

impl ProjectorParamSet {
    pub fn pack(&self) -> DVector<f64> {
        let o = self.center_of_projection;
        DVector::from_vec(vec![self.f, self.v0, self.phi_deg, o.x, o.y, o.z])
    }

    pub fn unpack(v: &DVector<f64>) -> Self {
        Self {
            f: v[0],
            v0: v[1],
            phi_deg: v[2],
            center_of_projection: Point3::new(v[3], v[4], v[5]),
        }
    }
}

/// Initial parameter values: focal lengths from the image-plane diagonal,
/// unit aspect ratio, zero roll, the projector's vertical principal
/// coordinate at half the frame height, and both centers of projection at
/// twice the board width along z.
pub fn initial_values(
    camera_dims: ImageDims,
    projector_dims: ImageDims,
    board_width_mm: f64,
) -> (CameraParamSet, ProjectorParamSet) {
    let diag = |d: ImageDims| ((d.width as f64).powi(2) + (d.height as f64).powi(2)).sqrt();
    let z0 = 2.0 * board_width_mm;
    (
        CameraParamSet {
            f: diag(camera_dims),
            alpha: 1.0,
            phi_deg: 0.0,
            center_of_projection: Point3::new(0.0, 0.0, z0),
        },
        ProjectorParamSet {
            f: diag(projector_dims),
            v0: projector_dims.height as f64 / 2.0,
            phi_deg: 0.0,
            center_of_projection: Point3::new(0.0, 0.0, z0),
        },
    )
}

/// Projects a device principal point onto the board plane through the
/// device-to-board homography, yielding the 3D anchor of the principal axis.
pub fn board_principal_projection(
    h_device_to_board: &Homography,
    principal_point: Point2,
) -> Result<Point3, GeometryError> {
    let p = apply_homography(h_device_to_board, principal_point)?;
    Ok(Point3::new(p.u, p.v, 0.0))
}

/// Builds the principal-axis frame for a device whose axis passes through
/// board point `q` from center of projection `o`, rolled by `phi` degrees.
///
/// Returns `(A, A_dev)` where the columns of `A` are the device axes in
/// board coordinates (`Z` from `o` toward `q`, `Y = Z x [1 0 0]`,
/// `X = Y x Z`) and `A_dev = A * R_Z(phi)`.
pub fn principal_axis_frame(
    q: Point3,
    o: Point3,
    phi_deg: f64,
) -> Result<(RotationMatrix, RotationMatrix), CalibrateError> {
    let z = q.to_vector() - o.to_vector();
    let z_norm = z.norm();
    if z_norm <= 1e-6 {
        return Err(CalibrateError::DegenerateAxis {
            reason: format!("center of projection within {z_norm:.2e} mm of the board anchor"),
        });
    }
    let y = z.cross(&nalgebra::Vector3::x());
    if y.norm() < 1e-9 * z_norm {
        return Err(CalibrateError::DegenerateAxis {
            reason: "principal axis is parallel to the board x-axis".to_string(),
        });
    }
    let x = y.cross(&z);
    let a = nalgebra::Matrix3::from_columns(&[x.normalize(), y.normalize(), z.normalize()]);
    let a = RotationMatrix::from_matrix(a).map_err(|e| CalibrateError::DegenerateAxis {
        reason: format!("frame construction failed: {e}"),
    })?;
    let a_dev = a.compose(&rotation_about_z(phi_deg));
    Ok((a, a_dev))
}

/// Converts a device frame into a board-to-device rigid transform:
/// `R = A_dev^T`, `T = -A_dev^T * O`, so the device's center of projection
/// maps to the device-frame origin.
pub fn extrinsics_from_frame(a_dev: &RotationMatrix, o: Point3) -> RigidTransform {
    let r = a_dev.transpose();
    let t = Point3::from_vector(-(r.matrix() * o.to_vector()));
    RigidTransform::new(r, t)
}

/// Roll angle (degrees) that completes the principal-axis parameterization
/// of a given board-to-device rotation whose axis passes through `anchor`
/// from `center`: the `phi` with `rotation = (A(anchor, center) * R_Z(phi))^T`.
pub fn roll_matching_rotation(
    anchor: Point3,
    center: Point3,
    rotation: &RotationMatrix,
) -> Result<f64, CalibrateError> {
    let (a, _) = principal_axis_frame(anchor, center, 0.0)?;
    Ok(extract_roll_deg(&a, &rotation.transpose()))
}

/// Procam extrinsics from the two board poses: `R = R_p R_c^T`,
/// `T = T_p - R T_c`.
pub fn compose_procam_extrinsics(rt_c: &RigidTransform, rt_p: &RigidTransform) -> RigidTransform {
    let r = rt_p.rotation.compose(&rt_c.rotation.transpose());
    let t = Point3::from_vector(
        rt_p.translation.to_vector() - r.matrix() * rt_c.translation.to_vector(),
    );
    RigidTransform::new(r, t)
}

fn sentinel_residuals(n: usize) -> DVector<f64> {
    DVector::from_element(2 * n, RESIDUAL_SENTINEL)
}

/// Camera residual model. The board anchor of the principal axis (`c_ob`)
/// and the principal point are fixed at construction and never touched by
/// the optimizer.
#[derive(Debug, Clone)]
pub struct CameraModel<'a> {
    board: &'a [Point2],
    observed_undistorted: &'a [Point2],
    c_ob: Point3,
    principal_point: Point2,
}

impl<'a> CameraModel<'a> {
    pub fn new(
        board: &'a [Point2],
        observed_undistorted: &'a [Point2],
        c_ob: Point3,
        principal_point: Point2,
    ) -> Self {
        assert_eq!(board.len(), observed_undistorted.len());
        Self {
            board,
            observed_undistorted,
            c_ob,
            principal_point,
        }
    }

    /// The fixed board anchor of the principal axis; identical for every
    /// residual evaluation by construction.
    pub fn board_anchor(&self) -> Point3 {
        self.c_ob
    }

    /// Residual vector `[du_0, dv_0, du_1, dv_1, ...]` of observed minus
    /// modeled projections. Infeasible parameters yield sentinel residuals.
    pub fn residuals(&self, theta: &CameraParamSet) -> DVector<f64> {
        let n = self.board.len();
        let Ok(k) = Intrinsics::new(
            theta.f,
            theta.alpha,
            self.principal_point.u,
            self.principal_point.v,
        ) else {
            return sentinel_residuals(n);
        };
        let Ok((_, a_dev)) =
            principal_axis_frame(self.c_ob, theta.center_of_projection, theta.phi_deg)
        else {
            return sentinel_residuals(n);
        };
        let rt = extrinsics_from_frame(&a_dev, theta.center_of_projection);
        let mut res = DVector::zeros(2 * n);
        for (i, (b, obs)) in self.board.iter().zip(self.observed_undistorted).enumerate() {
            match project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)) {
                Ok(p) => {
                    res[2 * i] = obs.u - p.u;
                    res[2 * i + 1] = obs.v - p.v;
                }
                Err(_) => return sentinel_residuals(n),
            }
        }
        res
    }

    fn residuals_packed(&self, v: &DVector<f64>) -> DVector<f64> {
        self.residuals(&CameraParamSet::unpack(v))
    }
}

/// Free-function form of the camera residual evaluation.
pub fn camera_residuals(
    theta: &CameraParamSet,
    principal_point: Point2,
    board: &[Point2],
    observed_undistorted: &[Point2],
    c_ob: Point3,
) -> DVector<f64> {
    CameraModel::new(board, observed_undistorted, c_ob, principal_point).residuals(theta)
}

/// Projector residual model. Unlike the camera, the board anchor of the
/// principal axis depends on the free parameter `v0` and is therefore
/// recomputed on every evaluation from the projector-to-board homography.
#[derive(Debug, Clone)]
pub struct ProjectorModel<'a> {
    board: &'a [Point2],
    observed: &'a [Point2],
    h_proj_to_board: &'a Homography,
    u0: f64,
}

impl<'a> ProjectorModel<'a> {
    pub fn new(
        board: &'a [Point2],
        observed: &'a [Point2],
        h_proj_to_board: &'a Homography,
        u0: f64,
    ) -> Self {
        assert_eq!(board.len(), observed.len());
        Self {
            board,
            observed,
            h_proj_to_board,
            u0,
        }
    }

    /// Board intersection of the principal axis for a given `v0`; as `v0`
    /// sweeps, this point travels along a straight line on the board.
    pub fn principal_point_on_board(&self, v0: f64) -> Result<Point3, GeometryError> {
        board_principal_projection(self.h_proj_to_board, Point2::new(self.u0, v0))
    }

    pub fn residuals(&self, theta: &ProjectorParamSet) -> DVector<f64> {
        let n = self.board.len();
        let Ok(p_ob) = self.principal_point_on_board(theta.v0) else {
            return sentinel_residuals(n);
        };
        let Ok(k) = Intrinsics::new(theta.f, 1.0, self.u0, theta.v0) else {
            return sentinel_residuals(n);
        };
        let Ok((_, a_dev)) = principal_axis_frame(p_ob, theta.center_of_projection, theta.phi_deg)
        else {
            return sentinel_residuals(n);
        };
        let rt = extrinsics_from_frame(&a_dev, theta.center_of_projection);
        let mut res = DVector::zeros(2 * n);
        for (i, (b, obs)) in self.board.iter().zip(self.observed).enumerate() {
            match project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)) {
                Ok(p) => {
                    res[2 * i] = obs.u - p.u;
                    res[2 * i + 1] = obs.v - p.v;
                }
                Err(_) => return sentinel_residuals(n),
            }
        }
        res
    }

    fn residuals_packed(&self, v: &DVector<f64>) -> DVector<f64> {
        self.residuals(&ProjectorParamSet::unpack(v))
    }
}

/// Free-function form of the projector residual evaluation.
pub fn projector_residuals(
    theta: &ProjectorParamSet,
    u0: f64,
    h_proj_to_board: &Homography,
    board: &[Point2],
    observed: &[Point2],
) -> DVector<f64> {
    ProjectorModel::new(board, observed, h_proj_to_board, u0).residuals(theta)
}

/// Options threaded through the calibration paths.
#[derive(Debug, Clone, Default)]
pub struct CalibrateOptions {
    pub lm: LmConfig,
    /// Use this as the camera principal point / center of distortion instead
    /// of estimating it from the correspondences.
    pub principal_point_override: Option<Point2>,
    /// Use these division-model coefficients instead of estimating them.
    pub distortion_override: Option<(f64, f64)>,
}

/// Per-device optimizer and residual diagnostics.
#[derive(Debug, Clone)]
pub struct DeviceDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Final optimizer cost (sum of squared residuals, px^2).
    pub final_cost: f64,
    /// Recovered board-to-device Euler angles, when decomposable.
    pub euler_deg: Option<crate::geometry::EulerAnglesXYZ>,
    pub warnings: Vec<String>,
}

/// Camera calibration output.
#[derive(Debug, Clone)]
pub struct CameraCalibration {
    pub intrinsics: Intrinsics,
    pub distortion: DivisionModel,
    pub rt: RigidTransform,
    pub params: CameraParamSet,
    pub reprojection: DeviceReprojection,
    pub diagnostics: DeviceDiagnostics,
}

/// Projector calibration output.
#[derive(Debug, Clone)]
pub struct ProjectorCalibration {
    pub intrinsics: Intrinsics,
    pub rt: RigidTransform,
    pub params: ProjectorParamSet,
    pub reprojection: DeviceReprojection,
    pub diagnostics: DeviceDiagnostics,
}

/// Full procam calibration output.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub camera: CameraCalibration,
    pub projector: ProjectorCalibration,
    /// Camera-to-projector transform composed from the two board poses.
    pub rt_procam: RigidTransform,
    pub stereo_mean_px: f64,
}

impl CalibrationResult {
    /// The procam baseline |T| in millimeters.
    pub fn baseline_mm(&self) -> f64 {
        self.rt_procam.translation.norm()
    }
}

fn board_centroid(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let (su, sv) = points
        .iter()
        .fold((0.0, 0.0), |(su, sv), p| (su + p.u, sv + p.v));
    Point2::new(su / n, sv / n)
}

/// Which side of the board plane the device sits on, read off the
/// orientation of the board-to-image map at the board centroid.
///
/// The 2D Jacobian determinant of a homography at a point with homogeneous
/// scale `w` has the sign of `det(H) * w`; a device on the negative-z side of
/// the board (our frontal convention) sees a positively oriented board.
/// Returns +1 for that case and -1 for the mirrored side.
fn orientation_sign(
    h_board_to_image: &Homography,
    board_centroid: Point2,
) -> Result<f64, CalibrateError> {
    let m = h_board_to_image.matrix();
    let det = m.determinant();
    let w = m[(2, 0)] * board_centroid.u + m[(2, 1)] * board_centroid.v + m[(2, 2)];
    let sign = det * w;
    if sign == 0.0 || !sign.is_finite() {
        return Err(CalibrateError::Geometry {
            stage: Stage::Orientation,
            source: GeometryError::DegenerateConfiguration {
                reason: "board-to-image map has vanishing Jacobian at the board centroid"
                    .to_string(),
            },
        });
    }
    Ok(sign.signum())
}

/// Roll angle (degrees) best aligning `a_dev = a * R_Z(phi)` with the target
/// frame `target_a_dev`, read off the in-plane components of `a^T *
/// target_a_dev`.
fn extract_roll_deg(a: &RotationMatrix, target_a_dev: &RotationMatrix) -> f64 {
    let m = a.matrix().transpose() * target_a_dev.matrix();
    (m[(1, 0)] - m[(0, 1)])
        .atan2(m[(0, 0)] + m[(1, 1)])
        .to_degrees()
}

/// Alternative optimizer start from decomposing the board-to-image
/// homography under the initial intrinsics guess. The documented start
/// (board-width heuristics) works at desk scale; this one tracks the data
/// when the device sits much closer or further than twice the board width.
fn decomposed_start(
    k0: &Intrinsics,
    h_board_to_image: &Homography,
    board_centroid: Point2,
    axis_anchor: Point3,
) -> Option<(Point3, f64)> {
    let rt = crate::metrics::decompose_planar_pose(k0, h_board_to_image, board_centroid).ok()?;
    let center = rt.device_center();
    let (a, _) = principal_axis_frame(axis_anchor, center, 0.0).ok()?;
    // R = A_dev^T, so the decomposed frame to match is R^T.
    let phi = extract_roll_deg(&a, &rt.rotation.transpose());
    Some((center, phi))
}

fn lower_cost(a: crate::lm::LmOutcome, b: crate::lm::LmOutcome) -> crate::lm::LmOutcome {
    if b.cost < a.cost {
        b
    } else {
        a
    }
}

fn reprojection_stats(
    k: &Intrinsics,
    rt: &RigidTransform,
    board: &[Point2],
    observed: &[Point2],
) -> DeviceReprojection {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut max = 0.0f64;
    let n = board.len().max(1) as f64;
    for (b, obs) in board.iter().zip(observed) {
        let err = match project_pinhole(k, rt, Point3::new(b.u, b.v, 0.0)) {
            Ok(p) => p.distance_to(*obs),
            Err(_) => f64::INFINITY,
        };
        sum += err;
        sum_sq += err * err;
        max = max.max(err);
    }
    DeviceReprojection {
        mean_px: sum / n,
        rms_px: (sum_sq / n).sqrt(),
        max_px: max,
    }
}

/// Calibrates the camera from a single board pose.
///
/// Pipeline: center of distortion (radial fundamental matrix, unless
/// overridden) -> division coefficients (nested homography fit) ->
/// undistort -> camera-to-board homography -> principal-point projection ->
/// Levenberg-Marquardt over the camera parameter set -> extrinsics.
///
/// When the distortion stage reports no usable distortion signal the
/// pipeline falls back to the frame center with zero coefficients and
/// records a warning.
pub fn calibrate_camera(
    corr: &CorrespondenceSet,
    opts: &CalibrateOptions,
) -> Result<CameraCalibration, CalibrateError> {
    let n = corr.len();
    if n < MIN_CAMERA_CORRESPONDENCES {
        return Err(CalibrateError::InsufficientCorrespondences {
            device: "camera",
            needed: MIN_CAMERA_CORRESPONDENCES,
            got: n,
        });
    }
    let mut warnings = Vec::new();
    let pairs: Vec<(Point2, Point2)> = corr
        .camera_distorted
        .iter()
        .zip(&corr.board_points)
        .map(|(c, b)| (*c, *b))
        .collect();

    // Center of distortion; doubles as the camera principal point and is
    // never optimized.
    let (center, distortion_unusable) = match opts.principal_point_override {
        Some(pp) => (pp, false),
        None => match estimate_center_of_distortion(&pairs) {
            Ok(est) if est.near_zero_distortion => {
                warnings.push(format!(
                    "distortion signal too weak for a stable center (radial model improves the \
                     homography fit by only {:.1}%); falling back to the frame center with zero \
                     coefficients",
                    est.cost_improvement * 100.0
                ));
                (corr.camera_dims.center(), true)
            }
            Ok(est) => (est.center, false),
            Err(
                e @ (DistortionError::RankDeficient { .. } | DistortionError::EpipoleAtInfinity),
            ) => {
                warnings.push(format!(
                    "center-of-distortion estimate degenerate ({e}); falling back to the frame \
                     center with zero coefficients"
                ));
                (corr.camera_dims.center(), true)
            }
            Err(e) => return Err(dist(Stage::DistortionCenter)(e)),
        },
    };

    let (k1, k2) = match opts.distortion_override {
        Some(k) => k,
        None if distortion_unusable => (0.0, 0.0),
        None => {
            let est = estimate_division_coeffs(
                &pairs,
                center,
                corr.camera_dims.width,
                corr.camera_dims.height,
                &opts.lm,
            )
            .map_err(dist(Stage::DistortionCoeffs))?;
            if !est.converged {
                warnings.push(format!(
                    "distortion-coefficient fit stopped at the iteration limit \
                     (cost {:.3e} px^2)",
                    est.cost
                ));
            }
            (est.k1, est.k2)
        }
    };

    let distortion = DivisionModel::new(
        center,
        k1,
        k2,
        corr.camera_dims.width,
        corr.camera_dims.height,
    )
    .map_err(dist(Stage::DistortionModel))?;

    let undistorted: Vec<Point2> = corr
        .camera_distorted
        .iter()
        .map(|p| distortion.undistort(*p))
        .collect::<Result<_, _>>()
        .map_err(dist(Stage::Undistort))?;

    let h_pairs: Vec<(Point2, Point2)> = undistorted
        .iter()
        .zip(&corr.board_points)
        .map(|(c, b)| (*c, *b))
        .collect();
    let h_cam_to_board = estimate_homography(&h_pairs).map_err(geo(Stage::CameraHomography))?;
    let c_ob = board_principal_projection(&h_cam_to_board, center)
        .map_err(geo(Stage::PrincipalProjection))?;

    let h_board_to_cam = h_cam_to_board
        .inverse()
        .map_err(geo(Stage::CameraHomography))?;
    let centroid = board_centroid(&corr.board_points);
    let side = orientation_sign(&h_board_to_cam, centroid)?;

    let (mut theta0, _) =
        initial_values(corr.camera_dims, corr.projector_dims, corr.board.width_mm());
    // The diagonal formula fixes the magnitude of the initial z; its sign
    // must put the device on the side of the board the data was seen from.
    theta0.center_of_projection.z *= -side;

    let model = CameraModel::new(&corr.board_points, &undistorted, c_ob, center);
    let mut outcome = levenberg_marquardt(|v| model.residuals_packed(v), theta0.pack(), &opts.lm);
    // Second start from the homography decomposition; keep whichever
    // converges lower.
    let k0 = Intrinsics::new(theta0.f, 1.0, center.u, center.v)
        .map_err(geo(Stage::CameraOptimization))?;
    if let Some((o_init, phi_init)) = decomposed_start(&k0, &h_board_to_cam, centroid, c_ob) {
        let alt = CameraParamSet {
            f: theta0.f,
            alpha: 1.0,
            phi_deg: phi_init,
            center_of_projection: o_init,
        };
        let alt_outcome = levenberg_marquardt(|v| model.residuals_packed(v), alt.pack(), &opts.lm);
        outcome = lower_cost(outcome, alt_outcome);
    }
    let theta = CameraParamSet::unpack(&outcome.params);

    let (_, a_dev) = principal_axis_frame(c_ob, theta.center_of_projection, theta.phi_deg)?;
    let rt = extrinsics_from_frame(&a_dev, theta.center_of_projection);
    let intrinsics = Intrinsics::new(theta.f, theta.alpha, center.u, center.v)
        .map_err(geo(Stage::CameraOptimization))?;

    if !outcome.converged {
        warnings.push(format!(
            "camera optimization did not converge within {} iterations (cost {:.3e} px^2)",
            outcome.iterations, outcome.cost
        ));
    }
    let euler = matrix_to_euler_xyz(&rt.rotation).ok();
    if let Some(e) = euler {
        if e.psi.abs() + e.nu.abs() < CAMERA_FRONTAL_WARN_DEG {
            warnings.push(format!(
                "near-frontal board pose (|psi| + |nu| = {:.1} deg < {CAMERA_FRONTAL_WARN_DEG} \
                 deg): focal length is weakly constrained",
                e.psi.abs() + e.nu.abs()
            ));
        }
    }

    let reprojection = reprojection_stats(&intrinsics, &rt, &corr.board_points, &undistorted);

    Ok(CameraCalibration {
        intrinsics,
        distortion,
        rt,
        params: theta,
        reprojection,
        diagnostics: DeviceDiagnostics {
            iterations: outcome.iterations,
            converged: outcome.converged,
            final_cost: outcome.cost,
            euler_deg: euler,
            warnings,
        },
    })
}

/// Calibrates the projector from a single board pose.
///
/// The horizontal principal coordinate is fixed at half the projector width;
/// `v0` stays free, so the board anchor of the principal axis is recomputed
/// on every residual evaluation.
pub fn calibrate_projector(
    corr: &CorrespondenceSet,
    opts: &CalibrateOptions,
) -> Result<ProjectorCalibration, CalibrateError> {
    let n = corr.len();
    if n < MIN_PROJECTOR_CORRESPONDENCES {
        return Err(CalibrateError::InsufficientCorrespondences {
            device: "projector",
            needed: MIN_PROJECTOR_CORRESPONDENCES,
            got: n,
        });
    }
    let mut warnings = Vec::new();

    let h_pairs: Vec<(Point2, Point2)> = corr
        .projector_points
        .iter()
        .zip(&corr.board_points)
        .map(|(p, b)| (*p, *b))
        .collect();
    let h_proj_to_board = estimate_homography(&h_pairs).map_err(geo(Stage::ProjectorHomography))?;
    let h_board_to_proj = h_proj_to_board
        .inverse()
        .map_err(geo(Stage::ProjectorHomography))?;
    let centroid = board_centroid(&corr.board_points);
    let side = orientation_sign(&h_board_to_proj, centroid)?;

    let u0 = corr.projector_dims.width as f64 / 2.0;
    let (_, mut theta0) =
        initial_values(corr.camera_dims, corr.projector_dims, corr.board.width_mm());
    theta0.center_of_projection.z *= -side;

    let model = ProjectorModel::new(
        &corr.board_points,
        &corr.projector_points,
        &h_proj_to_board,
        u0,
    );
    let mut outcome = levenberg_marquardt(|v| model.residuals_packed(v), theta0.pack(), &opts.lm);
    // The vertical principal coordinate is only weakly coupled to the cost
    // near frontal poses, which leaves the optimizer in a flat valley when
    // the start is far off. Additional starts from homography-decomposed
    // poses at several v0 hypotheses cover the frame; the lowest final cost
    // wins.
    let height = corr.projector_dims.height as f64;
    for v0_start in [0.0, 0.5 * height, height] {
        let Ok(k0) = Intrinsics::new(theta0.f, 1.0, u0, v0_start) else {
            continue;
        };
        let Ok(anchor) = model.principal_point_on_board(v0_start) else {
            continue;
        };
        let Some((o_init, phi_init)) = decomposed_start(&k0, &h_board_to_proj, centroid, anchor)
        else {
            continue;
        };
        let alt = ProjectorParamSet {
            f: theta0.f,
            v0: v0_start,
            phi_deg: phi_init,
            center_of_projection: o_init,
        };
        let alt_outcome = levenberg_marquardt(|v| model.residuals_packed(v), alt.pack(), &opts.lm);
        outcome = lower_cost(outcome, alt_outcome);
    }
    let theta = ProjectorParamSet::unpack(&outcome.params);

    let p_ob = model
        .principal_point_on_board(theta.v0)
        .map_err(geo(Stage::PrincipalProjection))?;
    let (_, a_dev) = principal_axis_frame(p_ob, theta.center_of_projection, theta.phi_deg)?;
    let rt = extrinsics_from_frame(&a_dev, theta.center_of_projection);
    let intrinsics =
        Intrinsics::new(theta.f, 1.0, u0, theta.v0).map_err(geo(Stage::ProjectorOptimization))?;

    if !outcome.converged {
        warnings.push(format!(
            "projector optimization did not converge within {} iterations (cost {:.3e} px^2)",
            outcome.iterations, outcome.cost
        ));
    }
    let euler = matrix_to_euler_xyz(&rt.rotation).ok();
    if let Some(e) = euler {
        if e.nu.abs() < PROJECTOR_FRONTAL_WARN_DEG {
            warnings.push(format!(
                "projector tilt |nu| = {:.1} deg below {PROJECTOR_FRONTAL_WARN_DEG} deg: focal \
                 length is weakly constrained",
                e.nu.abs()
            ));
        }
    }

    let reprojection =
        reprojection_stats(&intrinsics, &rt, &corr.board_points, &corr.projector_points);

    Ok(ProjectorCalibration {
        intrinsics,
        rt,
        params: theta,
        reprojection,
        diagnostics: DeviceDiagnostics {
            iterations: outcome.iterations,
            converged: outcome.converged,
            final_cost: outcome.cost,
            euler_deg: euler,
            warnings,
        },
    })
}

/// Runs the camera and projector paths and composes the procam extrinsics.
pub fn calibrate_procam(
    corr: &CorrespondenceSet,
    opts: &CalibrateOptions,
) -> Result<CalibrationResult, CalibrateError> {
    let camera = calibrate_camera(corr, opts)?;
    let projector = calibrate_projector(corr, opts)?;
    let rt_procam = compose_procam_extrinsics(&camera.rt, &projector.rt);
    let stereo_mean_px = 0.5 * (camera.reprojection.mean_px + projector.reprojection.mean_px);
    Ok(CalibrationResult {
        camera,
        projector,
        rt_procam,
        stereo_mean_px,
    })
}
