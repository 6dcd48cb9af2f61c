//! Projector-camera calibration from a single pose of a planar chessboard.
//!
//! A procam pair is calibrated from one board orientation alone: Gray-code
//! patterns projected onto the board give dense camera-projector
//! correspondences, the camera's radial distortion is recovered from a
//! radial fundamental matrix plus a homography-consistency fit, and each
//! device's remaining parameters are optimized by Levenberg-Marquardt over a
//! principal-axis parameterization that keeps the optical axis anchored to a
//! fixed point on the board. Device-to-device extrinsics follow by
//! composition.
//!
//! The crate also ships a synthetic scene generator and evaluation harness:
//! exact forward projections with seeded noise, Gray-code stack rendering,
//! rotation sweeps measuring focal-length recovery against board
//! orientation, and PnP-based translation-stability statistics.
//!
//! # Modules
//!
//! - [`geometry`]: points, intrinsics, rotations, homographies, Euler angles
//! - [`lm`]: the Levenberg-Marquardt solver
//! - [`distortion`]: division-model distortion and its estimation
//! - [`structured_light`]: Gray-code patterns, decoding, corner lifting
//! - [`calibrate`]: the single-pose calibration paths
//! - [`metrics`]: reprojection, planar PnP, translation precision
//! - [`simulator`]: synthetic scenes and rotation sweeps
//! - [`formats`]: JSON/PGM/CSV file formats and the CLI schemas

pub mod calibrate;
pub mod distortion;
pub mod formats;
pub mod geometry;
pub mod lm;
pub mod metrics;
pub mod simulator;
pub mod structured_light;

pub use calibrate::{calibrate_camera, calibrate_procam, calibrate_projector, CalibrationResult};
pub use geometry::{Point2, Point3};
pub use simulator::SceneConfig;
pub use structured_light::CorrespondenceSet;
