//! The calibration file: recovered intrinsics, distortion, per-device board
//! poses, procam extrinsics, residual statistics and diagnostics.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::common::{DimsDto, DistortionDto, IntrinsicsDto, TransformDto};
use super::{FormatError, SCHEMA_VERSION};
use crate::calibrate::CalibrationResult;
use crate::distortion::DivisionModel;
use crate::geometry::{Intrinsics, RigidTransform};
use crate::structured_light::ImageDims;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorIntrinsicsDto {
    pub f: f64,
    pub u0: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceReprojectionDto {
    pub mean_px: f64,
    pub rms_px: f64,
    pub max_px: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualsDto {
    pub camera: DeviceReprojectionDto,
    pub projector: DeviceReprojectionDto,
    pub stereo_mean_px: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDiagnosticsDto {
    pub iterations: usize,
    pub converged: bool,
    pub final_cost_px2: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsDto {
    pub camera: DeviceDiagnosticsDto,
    pub projector: DeviceDiagnosticsDto,
}

/// On-disk calibration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub camera_dims: DimsDto,
    pub projector_dims: DimsDto,
    pub k_c: IntrinsicsDto,
    pub distortion: DistortionDto,
    pub k_p: ProjectorIntrinsicsDto,
    pub rt_c: TransformDto,
    pub rt_p: TransformDto,
    pub rt_procam: TransformDto,
    pub residuals: ResidualsDto,
    pub diagnostics: DiagnosticsDto,
}

/// Calibration file contents converted back to validated domain types.
#[derive(Debug, Clone)]
pub struct LoadedCalibration {
    pub camera_dims: ImageDims,
    pub projector_dims: ImageDims,
    pub camera: Intrinsics,
    pub distortion: DivisionModel,
    pub projector: Intrinsics,
    pub rt_camera: RigidTransform,
    pub rt_projector: RigidTransform,
    pub rt_procam: RigidTransform,
    pub file: CalibrationFile,
}

/// Serializes a calibration result (with the frame sizes it was computed
/// from) to JSON.
pub fn calibration_to_json(
    result: &CalibrationResult,
    camera_dims: ImageDims,
    projector_dims: ImageDims,
) -> Vec<u8> {
    let cam = &result.camera;
    let pro = &result.projector;
    let dto = CalibrationFile {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        camera_dims: DimsDto::from_domain(camera_dims),
        projector_dims: DimsDto::from_domain(projector_dims),
        k_c: IntrinsicsDto::from_domain(&cam.intrinsics),
        distortion: DistortionDto::from_domain(&cam.distortion),
        k_p: ProjectorIntrinsicsDto {
            f: pro.intrinsics.f,
            u0: pro.intrinsics.u0,
            v0: pro.intrinsics.v0,
        },
        rt_c: TransformDto::from_domain(&cam.rt),
        rt_p: TransformDto::from_domain(&pro.rt),
        rt_procam: TransformDto::from_domain(&result.rt_procam),
        residuals: ResidualsDto {
            camera: DeviceReprojectionDto {
                mean_px: cam.reprojection.mean_px,
                rms_px: cam.reprojection.rms_px,
                max_px: cam.reprojection.max_px,
            },
            projector: DeviceReprojectionDto {
                mean_px: pro.reprojection.mean_px,
                rms_px: pro.reprojection.rms_px,
                max_px: pro.reprojection.max_px,
            },
            stereo_mean_px: result.stereo_mean_px,
        },
        diagnostics: DiagnosticsDto {
            camera: DeviceDiagnosticsDto {
                iterations: cam.diagnostics.iterations,
                converged: cam.diagnostics.converged,
                final_cost_px2: cam.diagnostics.final_cost,
                warnings: cam.diagnostics.warnings.clone(),
            },
            projector: DeviceDiagnosticsDto {
                iterations: pro.diagnostics.iterations,
                converged: pro.diagnostics.converged,
                final_cost_px2: pro.diagnostics.final_cost,
                warnings: pro.diagnostics.warnings.clone(),
            },
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&dto).expect("serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// Parses and validates a calibration document: intrinsics must be positive,
/// rotation blocks must pass the rotation invariants, and the distortion
/// model must be invertible over the stated camera frame.
pub fn calibration_from_json(bytes: &[u8]) -> Result<LoadedCalibration, FormatError> {
    let dto: CalibrationFile =
        serde_json::from_slice(bytes).map_err(|e| FormatError::json(e.to_string()))?;
    if dto.schema_version != SCHEMA_VERSION {
        return Err(FormatError::schema(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            dto.schema_version
        )));
    }
    let camera_dims = dto.camera_dims.to_domain("camera_dims")?;
    let projector_dims = dto.projector_dims.to_domain("projector_dims")?;
    let camera = dto.k_c.to_domain("k_c")?;
    let distortion = dto.distortion.to_domain(camera_dims, "distortion")?;
    let projector = Intrinsics::new(dto.k_p.f, 1.0, dto.k_p.u0, dto.k_p.v0)
        .map_err(|e| FormatError::schema(format!("k_p: {e}")))?;
    let rt_camera = dto.rt_c.to_domain("rt_c")?;
    let rt_projector = dto.rt_p.to_domain("rt_p")?;
    let rt_procam = dto.rt_procam.to_domain("rt_procam")?;
    Ok(LoadedCalibration {
        camera_dims,
        projector_dims,
        camera,
        distortion,
        projector,
        rt_camera,
        rt_projector,
        rt_procam,
        file: dto,
    })
}

pub fn save_calibration(
    path: impl AsRef<Path>,
    result: &CalibrationResult,
    camera_dims: ImageDims,
    projector_dims: ImageDims,
) -> Result<(), FormatError> {
    super::write_bytes(
        path,
        &calibration_to_json(result, camera_dims, projector_dims),
    )
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<LoadedCalibration, FormatError> {
    let bytes = super::read_bytes(&path)?;
    calibration_from_json(&bytes).map_err(|e| e.with_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{calibrate_procam, CalibrateOptions};
    use crate::simulator::{synthesize_observations, SceneConfig};

    #[test]
    fn round_trip_is_numerically_exact() {
        let cfg = SceneConfig::reference_rig();
        let (corr, _) = synthesize_observations(&cfg).unwrap();
        let result = calibrate_procam(&corr, &CalibrateOptions::default()).unwrap();
        let bytes = calibration_to_json(&result, corr.camera_dims, corr.projector_dims);
        let loaded = calibration_from_json(&bytes).unwrap();

        assert_eq!(loaded.camera.f, result.camera.intrinsics.f);
        assert_eq!(loaded.camera.alpha, result.camera.intrinsics.alpha);
        assert_eq!(loaded.distortion.k1(), result.camera.distortion.k1());
        assert_eq!(loaded.distortion.k2(), result.camera.distortion.k2());
        assert_eq!(loaded.projector.f, result.projector.intrinsics.f);
        assert_eq!(loaded.rt_procam.translation, result.rt_procam.translation);
        assert_eq!(
            loaded.rt_procam.rotation.matrix(),
            result.rt_procam.rotation.matrix()
        );

        // A second write of the loaded contents must be byte-identical.
        let again = serde_json::to_vec_pretty(&loaded.file).map(|mut b| {
            b.push(b'\n');
            b
        });
        assert_eq!(again.unwrap(), bytes);
    }

    #[test]
    fn corrupted_rotation_is_rejected() {
        let cfg = SceneConfig::reference_rig();
        let (corr, _) = synthesize_observations(&cfg).unwrap();
        let result = calibrate_procam(&corr, &CalibrateOptions::default()).unwrap();
        let bytes = calibration_to_json(&result, corr.camera_dims, corr.projector_dims);
        let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        value["rt_c"]["rotation"][0] = serde_json::json!(1.5);
        let err = calibration_from_json(&serde_json::to_vec(&value).unwrap()).unwrap_err();
        assert!(matches!(err, FormatError::Schema { .. }), "{err}");
    }
}
