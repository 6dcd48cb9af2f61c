//! Projective-geometry primitives shared by every stage of the pipeline:
//! 2D/3D points, pinhole intrinsics, rotations, rigid transforms,
//! homographies, and XYZ-Euler angle conversions.
//!
//! Conventions:
//! - angles are stored in degrees (converted to radians internally);
//! - Euler angles compose as the intrinsic sequence `R = R_X(psi) * R_Y(nu) * R_Z(phi)`;
//! - rigid transforms map board-frame points into the device frame,
//!   `M_dev = R * M_board + T`;
//! - homographies are kept in canonical form (bottom-right entry 1 whenever
//!   its magnitude allows, unit Frobenius norm otherwise).

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Orthonormality and determinant tolerance enforced on every rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Below this magnitude a homogeneous scale is treated as a point at infinity.
pub const HOMOGENEOUS_EPS: f64 = 1e-12;

/// Minimum depth (device-frame z) accepted by the pinhole projection.
pub const MIN_PROJECTION_DEPTH: f64 = 1e-9;

/// Errors raised by the geometric primitives.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    /// A point ended up behind (or on) the device's focal plane.
    #[error("point has non-positive depth in the device frame (z = {depth:.6e})")]
    NonPositiveDepth { depth: f64 },
    /// The input point set cannot determine a homography.
    #[error("degenerate configuration: {reason}")]
    DegenerateConfiguration { reason: String },
    /// A homogeneous point mapped to (or was given at) infinity.
    #[error("point maps to infinity (|w| < {HOMOGENEOUS_EPS:e})")]
    PointAtInfinity,
    /// Euler decomposition is not unique at |nu| = 90 degrees.
    #[error("gimbal lock: |cos(nu)| below 1e-9, XYZ-Euler decomposition not unique")]
    GimbalLock,
    /// A matrix failed the rotation invariants.
    #[error("matrix is not a rotation: {reason}")]
    NotARotation { reason: String },
    /// Intrinsics must have positive focal length and aspect ratio.
    #[error("invalid intrinsics: {reason}")]
    InvalidIntrinsics { reason: String },
    /// Too few point pairs for the requested estimate.
    #[error("need at least {needed} point pairs, got {got}")]
    InsufficientPairs { needed: usize, got: usize },
}

/// A 2D point; pixels on an image plane or millimeters on the board plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance_to(&self, other: Point2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// A 3D point in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Pinhole intrinsic parameters: focal length `f` (pixels), aspect ratio
/// `alpha` scaling the vertical focal length, and the principal point
/// `(u0, v0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub f: f64,
    pub alpha: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Intrinsics {
    pub fn new(f: f64, alpha: f64, u0: f64, v0: f64) -> Result<Self, GeometryError> {
        if !(f.is_finite() && f > 0.0) {
            return Err(GeometryError::InvalidIntrinsics {
                reason: format!("focal length must be positive and finite, got {f}"),
            });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(GeometryError::InvalidIntrinsics {
                reason: format!("aspect ratio must be positive and finite, got {alpha}"),
            });
        }
        if !u0.is_finite() || !v0.is_finite() {
            return Err(GeometryError::InvalidIntrinsics {
                reason: "principal point must be finite".to_string(),
            });
        }
        Ok(Self { f, alpha, u0, v0 })
    }

    /// The 3x3 calibration matrix `[[f, 0, u0], [0, alpha*f, v0], [0, 0, 1]]`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.f,
            0.0,
            self.u0,
            0.0,
            self.alpha * self.f,
            self.v0,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn principal_point(&self) -> Point2 {
        Point2::new(self.u0, self.v0)
    }
}

/// A 3x3 rotation matrix with orthonormality and determinant verified at
/// construction (tolerance [`ROTATION_TOL`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NotARotation {
                reason: "non-finite entries".to_string(),
            });
        }
        let gram = m.transpose() * m;
        let defect = (gram - Matrix3::identity()).amax();
        if defect > ROTATION_TOL {
            return Err(GeometryError::NotARotation {
                reason: format!("max |R^T R - I| = {defect:.3e} exceeds {ROTATION_TOL:e}"),
            });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::NotARotation {
                reason: format!("det = {det:.12} differs from 1 by more than {ROTATION_TOL:e}"),
            });
        }
        Ok(Self(m))
    }

    /// Construction for products of already-validated rotations.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        debug_assert!(
            (m.transpose() * m - Matrix3::identity()).amax() < 1e-7,
            "internal rotation drifted from orthonormality"
        );
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &RotationMatrix) -> Self {
        Self::from_matrix_unchecked(self.0 * rhs.0)
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.0 * p.to_vector())
    }
}

/// A rigid board-to-device transform: `M_dev = R * M_board + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Point3,
}

impl RigidTransform {
    pub fn new(rotation: RotationMatrix, translation: Point3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(RotationMatrix::identity(), Point3::new(0.0, 0.0, 0.0))
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation.matrix() * p.to_vector() + self.translation.to_vector())
    }

    /// The device's center of projection expressed in the board frame,
    /// `-R^T * T`.
    pub fn device_center(&self) -> Point3 {
        Point3::from_vector(-(self.rotation.matrix().transpose() * self.translation.to_vector()))
    }
}

/// An invertible 3x3 plane-to-plane projective map, stored in canonical form.
///
/// Canonical form divides by the bottom-right entry; when that entry's
/// magnitude falls below [`HOMOGENEOUS_EPS`] the matrix is normalized to unit
/// Frobenius norm instead and flagged as not affine-canonical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    affine_canonical: bool,
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
            affine_canonical: true,
        }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration {
                reason: "homography has non-finite entries".to_string(),
            });
        }
        let norm = m.norm();
        if norm < HOMOGENEOUS_EPS {
            return Err(GeometryError::DegenerateConfiguration {
                reason: "homography is numerically zero".to_string(),
            });
        }
        // Rank-3 check on the scale-free matrix.
        let scaled = m / norm;
        if scaled.determinant().abs() < 1e-15 {
            return Err(GeometryError::DegenerateConfiguration {
                reason: "homography is rank deficient".to_string(),
            });
        }
        let pivot = m[(2, 2)];
        if pivot.abs() >= HOMOGENEOUS_EPS * norm {
            Ok(Self {
                m: m / pivot,
                affine_canonical: true,
            })
        } else {
            Ok(Self {
                m: scaled,
                affine_canonical: false,
            })
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Whether canonical form `m[2][2] = 1` was achievable.
    pub fn is_affine_canonical(&self) -> bool {
        self.affine_canonical
    }

    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| GeometryError::DegenerateConfiguration {
                reason: "homography not invertible".to_string(),
            })?;
        Homography::from_matrix(inv)
    }

    /// Composition `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Homography) -> Result<Homography, GeometryError> {
        Homography::from_matrix(self.m * rhs.m)
    }
}

/// Intrinsic XYZ-Euler angles in degrees: `psi` about x, `nu` about y,
/// `phi` about z, composing as `R_X(psi) * R_Y(nu) * R_Z(phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAnglesXYZ {
    pub psi: f64,
    pub nu: f64,
    pub phi: f64,
}

impl EulerAnglesXYZ {
    pub const fn new(psi: f64, nu: f64, phi: f64) -> Self {
        Self { psi, nu, phi }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Projects a board-frame 3D point through a pinhole device.
///
/// Computes `s * m = K * (R * M + T)` and dehomogenizes by the (positive)
/// scale `s`. Fails with [`GeometryError::NonPositiveDepth`] when the point's
/// device-frame depth is at or below [`MIN_PROJECTION_DEPTH`].
pub fn project_pinhole(
    k: &Intrinsics,
    rt: &RigidTransform,
    m: Point3,
) -> Result<Point2, GeometryError> {
    let dev = rt.apply(m);
    if dev.z <= MIN_PROJECTION_DEPTH {
        return Err(GeometryError::NonPositiveDepth { depth: dev.z });
    }
    Ok(Point2::new(
        k.f * dev.x / dev.z + k.u0,
        k.alpha * k.f * dev.y / dev.z + k.v0,
    ))
}

/// Applies a homography to a 2D point and dehomogenizes.
pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    let m = h.matrix();
    let w = m[(2, 0)] * p.u + m[(2, 1)] * p.v + m[(2, 2)];
    if w.abs() < HOMOGENEOUS_EPS {
        return Err(GeometryError::PointAtInfinity);
    }
    Ok(Point2::new(
        (m[(0, 0)] * p.u + m[(0, 1)] * p.v + m[(0, 2)]) / w,
        (m[(1, 0)] * p.u + m[(1, 1)] * p.v + m[(1, 2)]) / w,
    ))
}

/// Isotropic (Hartley) normalization: translate the centroid to the origin
/// and scale the mean distance from it to sqrt(2).
fn hartley_normalization(points: impl Iterator<Item = Point2> + Clone) -> Matrix3<f64> {
    let mut n = 0usize;
    let (mut cu, mut cv) = (0.0, 0.0);
    for p in points.clone() {
        cu += p.u;
        cv += p.v;
        n += 1;
    }
    let n_f = n as f64;
    cu /= n_f;
    cv /= n_f;
    let mut mean_dist = 0.0;
    for p in points {
        mean_dist += (p.u - cu).hypot(p.v - cv);
    }
    mean_dist /= n_f;
    let scale = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(
        scale,
        0.0,
        -scale * cu,
        0.0,
        scale,
        -scale * cv,
        0.0,
        0.0,
        1.0,
    )
}

/// Smallest eigenvector of the 9x9 normal matrix `A^T A`, i.e. the right
/// singular vector of `A` for its smallest singular value. Also returns the
/// sorted eigenvalues (squared singular values, descending) for rank checks.
fn smallest_normal_eigenvector(ata: &nalgebra::SMatrix<f64, 9, 9>) -> ([f64; 9], Vec<f64>) {
    let eig = ata.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a symmetric matrix are finite")
    });
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let col = eig.eigenvectors.column(order[8]);
    let mut v = [0.0; 9];
    for (dst, src) in v.iter_mut().zip(col.iter()) {
        *dst = *src;
    }
    (v, spectrum)
}

/// Estimates the homography `H` with `dst ~= H * src` from at least four
/// point pairs `(src, dst)` by the normalized direct linear transform.
///
/// On exact planar data the transfer error is at the level of floating-point
/// round-off (well below 1e-8 px for pixel-scale coordinates).
pub fn estimate_homography(pairs: &[(Point2, Point2)]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::InsufficientPairs {
            needed: 4,
            got: pairs.len(),
        });
    }
    for (s, d) in pairs {
        if !s.is_finite() || !d.is_finite() {
            return Err(GeometryError::DegenerateConfiguration {
                reason: "non-finite input point".to_string(),
            });
        }
    }
    let t_src = hartley_normalization(pairs.iter().map(|(s, _)| *s));
    let t_dst = hartley_normalization(pairs.iter().map(|(_, d)| *d));

    let mut ata = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for (s, d) in pairs {
        let sn = t_src * Vector3::new(s.u, s.v, 1.0);
        let dn = t_dst * Vector3::new(d.u, d.v, 1.0);
        let (x, y) = (sn.x / sn.z, sn.y / sn.z);
        let (u, v) = (dn.x / dn.z, dn.y / dn.z);
        let rows: [[f64; 9]; 2] = [
            [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u],
            [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v],
        ];
        for row in rows {
            for i in 0..9 {
                for j in i..9 {
                    ata[(i, j)] += row[i] * row[j];
                }
            }
        }
    }
    for i in 0..9 {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }

    let (h_vec, spectrum) = smallest_normal_eigenvector(&ata);
    // Rank of the design matrix must be 8; eigenvalues are squared singular
    // values, so compare against the square of the relative tolerance.
    if spectrum[7] < 1e-12 * spectrum[0].max(f64::MIN_POSITIVE) {
        return Err(GeometryError::DegenerateConfiguration {
            reason: "design matrix rank below 8 (collinear or coincident points)".to_string(),
        });
    }

    let h_norm = Matrix3::new(
        h_vec[0], h_vec[1], h_vec[2], h_vec[3], h_vec[4], h_vec[5], h_vec[6], h_vec[7], h_vec[8],
    );
    let t_dst_inv = t_dst
        .try_inverse()
        .expect("similarity transforms are invertible");
    Homography::from_matrix(t_dst_inv * h_norm * t_src)
}

fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

/// Rotation by `phi` degrees about the z-axis.
pub fn rotation_about_z(phi_deg: f64) -> RotationMatrix {
    let (s, c) = deg_to_rad(phi_deg).sin_cos();
    RotationMatrix::from_matrix_unchecked(Matrix3::new(
        c, -s, 0.0, //
        s, c, 0.0, //
        0.0, 0.0, 1.0,
    ))
}

/// Builds `R = R_X(psi) * R_Y(nu) * R_Z(phi)` from degrees.
pub fn euler_xyz_to_matrix(e: EulerAnglesXYZ) -> RotationMatrix {
    let (s1, c1) = deg_to_rad(e.psi).sin_cos();
    let (s2, c2) = deg_to_rad(e.nu).sin_cos();
    let (s3, c3) = deg_to_rad(e.phi).sin_cos();
    RotationMatrix::from_matrix_unchecked(Matrix3::new(
        c2 * c3,
        -c2 * s3,
        s2,
        c1 * s3 + s1 * s2 * c3,
        c1 * c3 - s1 * s2 * s3,
        -s1 * c2,
        s1 * s3 - c1 * s2 * c3,
        s1 * c3 + c1 * s2 * s3,
        c1 * c2,
    ))
}

/// Recovers XYZ-Euler angles (degrees) from a rotation matrix.
///
/// `nu` is taken in [-90, 90]; the decomposition is unique away from
/// |nu| = 90 degrees, where [`GeometryError::GimbalLock`] is raised.
pub fn matrix_to_euler_xyz(r: &RotationMatrix) -> Result<EulerAnglesXYZ, GeometryError> {
    let m = r.matrix();
    let s2 = m[(0, 2)].clamp(-1.0, 1.0);
    let c2 = (m[(1, 2)].powi(2) + m[(2, 2)].powi(2)).sqrt();
    if c2 < 1e-9 {
        return Err(GeometryError::GimbalLock);
    }
    let nu = s2.asin();
    let psi = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let phi = (-m[(0, 1)]).atan2(m[(0, 0)]);
    Ok(EulerAnglesXYZ::new(
        psi.to_degrees(),
        nu.to_degrees(),
        phi.to_degrees(),
    ))
}
