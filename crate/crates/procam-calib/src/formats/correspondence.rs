//! The correspondence file: one board pose's aligned board / camera /
//! projector corner triples, with an optional ground-truth block written by
//! the simulator.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::common::{point2_from, BoardDto, DimsDto, DistortionDto, IntrinsicsDto, TransformDto};
use super::{FormatError, SCHEMA_VERSION};
use crate::calibrate::compose_procam_extrinsics;
use crate::simulator::GroundTruth;
use crate::structured_light::CorrespondenceSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointTripleDto {
    board: [f64; 2],
    camera_distorted: [f64; 2],
    projector: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthDto {
    camera: IntrinsicsDto,
    distortion: DistortionDto,
    projector: IntrinsicsDto,
    rt_camera: TransformDto,
    rt_projector: TransformDto,
    rt_procam: TransformDto,
    baseline_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrespondenceFileDto {
    schema_version: u32,
    board: BoardDto,
    camera: DimsDto,
    projector: DimsDto,
    points: Vec<PointTripleDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruthDto>,
}

/// Serializes aligned correspondence triples without enforcing the complete
/// -grid invariant; the decode command uses this when corners had to be
/// dropped (such files are rejected by the calibrate loader by design).
pub fn correspondence_parts_to_json(
    board: &crate::structured_light::BoardSpec,
    camera_dims: crate::structured_light::ImageDims,
    projector_dims: crate::structured_light::ImageDims,
    triples: &[(
        crate::geometry::Point2,
        crate::geometry::Point2,
        crate::geometry::Point2,
    )],
) -> Vec<u8> {
    let dto = CorrespondenceFileDto {
        schema_version: SCHEMA_VERSION,
        board: BoardDto::from_domain(board),
        camera: DimsDto::from_domain(camera_dims),
        projector: DimsDto::from_domain(projector_dims),
        points: triples
            .iter()
            .map(|(b, c, p)| PointTripleDto {
                board: [b.u, b.v],
                camera_distorted: [c.u, c.v],
                projector: [p.u, p.v],
            })
            .collect(),
        ground_truth: None,
    };
    let mut bytes = serde_json::to_vec_pretty(&dto).expect("serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// Serializes a correspondence set (plus optional ground truth) to JSON.
pub fn correspondence_to_json(
    corr: &CorrespondenceSet,
    ground_truth: Option<&GroundTruth>,
) -> Vec<u8> {
    let dto = CorrespondenceFileDto {
        schema_version: SCHEMA_VERSION,
        board: BoardDto::from_domain(&corr.board),
        camera: DimsDto::from_domain(corr.camera_dims),
        projector: DimsDto::from_domain(corr.projector_dims),
        points: corr
            .board_points
            .iter()
            .zip(&corr.camera_distorted)
            .zip(&corr.projector_points)
            .map(|((b, c), p)| PointTripleDto {
                board: [b.u, b.v],
                camera_distorted: [c.u, c.v],
                projector: [p.u, p.v],
            })
            .collect(),
        ground_truth: ground_truth.map(|gt| GroundTruthDto {
            camera: IntrinsicsDto::from_domain(&gt.camera_intrinsics),
            distortion: DistortionDto::from_domain(&gt.distortion),
            projector: IntrinsicsDto::from_domain(&gt.projector_intrinsics),
            rt_camera: TransformDto::from_domain(&gt.rt_camera),
            rt_projector: TransformDto::from_domain(&gt.rt_projector),
            rt_procam: TransformDto::from_domain(&gt.rt_procam),
            baseline_mm: gt.baseline_mm(),
        }),
    };
    let mut bytes = serde_json::to_vec_pretty(&dto).expect("serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// Parses and validates a correspondence file from raw JSON bytes.
pub fn correspondence_from_json(
    bytes: &[u8],
) -> Result<(CorrespondenceSet, Option<GroundTruth>), FormatError> {
    let dto: CorrespondenceFileDto =
        serde_json::from_slice(bytes).map_err(|e| FormatError::json(e.to_string()))?;
    if dto.schema_version != SCHEMA_VERSION {
        return Err(FormatError::schema(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            dto.schema_version
        )));
    }
    let board = dto.board.to_domain()?;
    let camera_dims = dto.camera.to_domain("camera")?;
    let projector_dims = dto.projector.to_domain("projector")?;
    if dto.points.len() != board.corner_count() {
        return Err(FormatError::schema(format!(
            "points has {} entries for a {}x{} board (expected {})",
            dto.points.len(),
            board.rows,
            board.cols,
            board.corner_count()
        )));
    }
    let mut board_points = Vec::with_capacity(dto.points.len());
    let mut camera_points = Vec::with_capacity(dto.points.len());
    let mut projector_points = Vec::with_capacity(dto.points.len());
    for (i, p) in dto.points.iter().enumerate() {
        board_points.push(point2_from(p.board, &format!("points[{i}].board"))?);
        camera_points.push(point2_from(
            p.camera_distorted,
            &format!("points[{i}].camera_distorted"),
        )?);
        projector_points.push(point2_from(p.projector, &format!("points[{i}].projector"))?);
    }
    let corr = CorrespondenceSet::new(
        board,
        camera_dims,
        projector_dims,
        board_points,
        camera_points,
        projector_points,
    )
    .map_err(|e| FormatError::schema(e.to_string()))?;

    let ground_truth = match dto.ground_truth {
        None => None,
        Some(gt) => {
            let camera_intrinsics = gt.camera.to_domain("ground_truth.camera")?;
            let distortion = gt
                .distortion
                .to_domain(camera_dims, "ground_truth.distortion")?;
            let projector_intrinsics = gt.projector.to_domain("ground_truth.projector")?;
            let rt_camera = gt.rt_camera.to_domain("ground_truth.rt_camera")?;
            let rt_projector = gt.rt_projector.to_domain("ground_truth.rt_projector")?;
            let rt_procam = gt.rt_procam.to_domain("ground_truth.rt_procam")?;
            // The stored procam block must be consistent with composition.
            let recomposed = compose_procam_extrinsics(&rt_camera, &rt_projector);
            let dr = (recomposed.rotation.matrix() - rt_procam.rotation.matrix()).amax();
            let dt =
                (recomposed.translation.to_vector() - rt_procam.translation.to_vector()).norm();
            if dr > 1e-6 || dt > 1e-6 {
                return Err(FormatError::schema(format!(
                    "ground_truth.rt_procam inconsistent with composition \
                     (rotation defect {dr:.2e}, translation defect {dt:.2e} mm)"
                )));
            }
            Some(GroundTruth {
                camera_intrinsics,
                distortion,
                projector_intrinsics,
                rt_camera,
                rt_projector,
                rt_procam,
            })
        }
    };
    Ok((corr, ground_truth))
}

pub fn save_correspondences(
    path: impl AsRef<Path>,
    corr: &CorrespondenceSet,
    ground_truth: Option<&GroundTruth>,
) -> Result<(), FormatError> {
    super::write_bytes(path, &correspondence_to_json(corr, ground_truth))
}

pub fn load_correspondences(
    path: impl AsRef<Path>,
) -> Result<(CorrespondenceSet, Option<GroundTruth>), FormatError> {
    let bytes = super::read_bytes(&path)?;
    correspondence_from_json(&bytes).map_err(|e| e.with_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{synthesize_observations, SceneConfig};

    #[test]
    fn round_trip_preserves_everything() {
        let mut cfg = SceneConfig::reference_rig();
        cfg.noise_sigma_px = 0.4;
        let (corr, gt) = synthesize_observations(&cfg).unwrap();
        let bytes = correspondence_to_json(&corr, Some(&gt));
        let (corr2, gt2) = correspondence_from_json(&bytes).unwrap();
        assert_eq!(corr, corr2);
        let gt2 = gt2.expect("ground truth preserved");
        assert_eq!(gt.camera_intrinsics, gt2.camera_intrinsics);
        assert_eq!(gt.distortion, gt2.distortion);
        assert_eq!(gt.rt_procam, gt2.rt_procam);
    }

    #[test]
    fn wrong_point_count_is_schema_error() {
        let cfg = SceneConfig::reference_rig();
        let (corr, _) = synthesize_observations(&cfg).unwrap();
        let mut value: serde_json::Value =
            serde_json::from_slice(&correspondence_to_json(&corr, None)).unwrap();
        let points = value["points"].as_array_mut().unwrap();
        points.pop();
        let bytes = serde_json::to_vec(&value).unwrap();
        let err = correspondence_from_json(&bytes).unwrap_err();
        assert!(matches!(err, FormatError::Schema { .. }), "{err}");
        assert!(err.to_string().contains("59"));
    }

    #[test]
    fn malformed_json_names_the_problem() {
        let err = correspondence_from_json(b"{ not json").unwrap_err();
        assert!(matches!(err, FormatError::Json { .. }));

        let err = correspondence_from_json(br#"{"schema_version": 1}"#).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("board"),
            "message should name the missing field: {msg}"
        );
    }
}
