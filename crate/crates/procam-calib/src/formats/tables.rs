//! CSV and JSON tables for the sweep and evaluation commands.

use serde::{Deserialize, Serialize};
use std::io::Write;

use super::SCHEMA_VERSION;
use crate::metrics::TranslationPrecision;
use crate::simulator::SweepResult;

/// Per-pose evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseReport {
    pub pose_id: usize,
    pub translation_mm: [f64; 3],
    pub magnitude_mm: f64,
    pub reproj_cam_px: f64,
    pub reproj_pro_px: f64,
    pub reproj_stereo_px: f64,
}

/// Full evaluation report (JSON form).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub poses: Vec<PoseReport>,
    pub skipped_poses: Vec<usize>,
    pub sigma_x_mm: f64,
    pub sigma_y_mm: f64,
    pub sigma_z_mm: f64,
    pub sigma_t_mm: f64,
    pub sigma_abs_t_mm: f64,
}

impl EvaluationReport {
    pub fn new(precision: &TranslationPrecision, poses: Vec<PoseReport>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            poses,
            skipped_poses: precision.skipped.clone(),
            sigma_x_mm: precision.sigma_x,
            sigma_y_mm: precision.sigma_y,
            sigma_z_mm: precision.sigma_z,
            sigma_t_mm: precision.sigma_t,
            sigma_abs_t_mm: precision.sigma_abs_t,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("serialization cannot fail");
        bytes.push(b'\n');
        bytes
    }
}

/// Writes the evaluation CSV: one row per pose, then a summary row labeled
/// `sigma` carrying sigma_X, sigma_Y, sigma_Z, sigma_T, sigma_|T| in the
/// X, Y, Z, absT and reproj_cam columns respectively.
pub fn write_evaluation_csv(
    out: &mut impl Write,
    report: &EvaluationReport,
) -> std::io::Result<()> {
    writeln!(
        out,
        "pose_id,X,Y,Z,absT,reproj_cam,reproj_pro,reproj_stereo"
    )?;
    for p in &report.poses {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.pose_id,
            p.translation_mm[0],
            p.translation_mm[1],
            p.translation_mm[2],
            p.magnitude_mm,
            p.reproj_cam_px,
            p.reproj_pro_px,
            p.reproj_stereo_px
        )?;
    }
    writeln!(
        out,
        "sigma,{},{},{},{},{},,",
        report.sigma_x_mm,
        report.sigma_y_mm,
        report.sigma_z_mm,
        report.sigma_t_mm,
        report.sigma_abs_t_mm
    )
}

/// Writes the sweep CSV: `psi_deg,nu_deg,delta_f_px,reproj_mean_px,converged`.
pub fn write_sweep_csv(out: &mut impl Write, sweep: &SweepResult) -> std::io::Result<()> {
    writeln!(out, "psi_deg,nu_deg,delta_f_px,reproj_mean_px,converged")?;
    for cell in &sweep.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            cell.psi_deg, cell.nu_deg, cell.delta_f_px, cell.reproj_mean_px, cell.converged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::metrics::PoseTranslation;

    #[test]
    fn evaluation_csv_shape() {
        let precision = TranslationPrecision {
            sigma_x: 1.0,
            sigma_y: 2.0,
            sigma_z: 3.0,
            sigma_t: (14.0f64).sqrt(),
            sigma_abs_t: 0.5,
            per_pose: vec![PoseTranslation {
                pose_index: 0,
                translation: Point3::new(-170.0, -40.0, -65.0),
                magnitude: 187.0,
                rt_camera: crate::geometry::RigidTransform::identity(),
                rt_projector: crate::geometry::RigidTransform::identity(),
            }],
            skipped: vec![],
        };
        let report = EvaluationReport::new(
            &precision,
            vec![PoseReport {
                pose_id: 0,
                translation_mm: [-170.0, -40.0, -65.0],
                magnitude_mm: 187.0,
                reproj_cam_px: 0.3,
                reproj_pro_px: 0.9,
                reproj_stereo_px: 0.6,
            }],
        );
        let mut buf = Vec::new();
        write_evaluation_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("pose_id,"));
        assert!(lines[1].starts_with("0,-170,"));
        assert!(lines[2].starts_with("sigma,1,2,3,"));
        for line in &lines {
            assert_eq!(line.matches(',').count(), 7);
        }
    }
}
