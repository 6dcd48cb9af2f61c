//! Integration tests driving each estimation stage against the synthetic
//! scene generator as the oracle.

use procam_calib::calibrate::{
    board_principal_projection, calibrate_camera, calibrate_procam, calibrate_projector,
    camera_residuals, roll_matching_rotation, CalibrateError, CalibrateOptions, CameraModel,
    CameraParamSet, ProjectorModel, ProjectorParamSet,
};
use procam_calib::distortion::{
    estimate_center_of_distortion, estimate_division_coeffs, DistortionError,
};
use procam_calib::geometry::{
    estimate_homography, project_pinhole, EulerAnglesXYZ, Intrinsics, Point2, Point3,
};
use procam_calib::lm::{levenberg_marquardt, LmConfig};
use procam_calib::metrics::{planar_pnp, reprojection_error, stereo_reprojection};
use procam_calib::simulator::{
    anchored_pose, generate_board, synthesize_graycode_stack, synthesize_observations, GroundTruth,
    SceneConfig,
};
use procam_calib::structured_light::{decode, lift_corners, CorrespondenceSet, DecodeConfig};

fn camera_board_pairs(corr: &CorrespondenceSet) -> Vec<(Point2, Point2)> {
    corr.camera_distorted
        .iter()
        .zip(&corr.board_points)
        .map(|(c, b)| (*c, *b))
        .collect()
}

/// Close-up camera scene with strong radial leverage: the board nearly fills
/// the frame, as a one-shot distortion capture would be staged.
fn close_up_scene() -> SceneConfig {
    let mut cfg = SceneConfig::reference_rig();
    cfg.camera.distortion_center = Some(Point2::new(679.0, 517.0));
    cfg.camera.pose = anchored_pose(
        &cfg.camera.intrinsics,
        cfg.camera.dims,
        &cfg.board,
        280.0,
        EulerAnglesXYZ::new(-10.0, -10.0, 0.0),
    );
    cfg
}

/// Reference rig with the projector's model error removed (principal point
/// at half width, unit aspect): the setting in which the method's projector
/// parameters are exactly recoverable.
fn model_consistent_scene() -> SceneConfig {
    let mut cfg = SceneConfig::reference_rig();
    cfg.projector.intrinsics = Intrinsics::new(2421.0, 1.0, 960.0, 1065.0).unwrap();
    cfg
}

/// Analytic oracle: intersection of the device principal axis with the
/// board plane z = 0.
fn principal_axis_board_intersection(gt: &GroundTruth, camera: bool) -> Point3 {
    let rt = if camera {
        &gt.rt_camera
    } else {
        &gt.rt_projector
    };
    let center = rt.device_center();
    let r = rt.rotation.matrix();
    // Axis direction in board coordinates is the third row of R.
    let d = Point3::new(r[(2, 0)], r[(2, 1)], r[(2, 2)]);
    let t = -center.z / d.z;
    Point3::new(center.x + t * d.x, center.y + t * d.y, 0.0)
}

// ---------------------------------------------------------------------------
// distortion estimation
// ---------------------------------------------------------------------------

#[test]
fn center_of_distortion_noiseless_within_2px() {
    let (corr, gt) = synthesize_observations(&close_up_scene()).unwrap();
    let est = estimate_center_of_distortion(&camera_board_pairs(&corr)).unwrap();
    let err = est.center.distance_to(gt.distortion.center());
    assert!(err < 2.0, "center error {err:.3} px");
    assert!(!est.near_zero_distortion);
}

#[test]
fn center_of_distortion_noisy_median_within_10px() {
    let mut errors = Vec::new();
    for seed in 0..100 {
        let mut cfg = close_up_scene();
        cfg.noise_sigma_px = 0.2;
        cfg.rng_seed = 9000 + seed;
        let (corr, gt) = synthesize_observations(&cfg).unwrap();
        let est = estimate_center_of_distortion(&camera_board_pairs(&corr)).unwrap();
        errors.push(est.center.distance_to(gt.distortion.center()));
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errors[errors.len() / 2];
    assert!(
        median < 10.0,
        "median center error {median:.2} px over 100 trials"
    );
}

#[test]
fn center_of_distortion_rejects_pure_homography_data() {
    let mut cfg = close_up_scene();
    cfg.camera.k1 = 0.0;
    cfg.camera.k2 = 0.0;
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    let err = estimate_center_of_distortion(&camera_board_pairs(&corr)).unwrap_err();
    assert!(
        matches!(err, DistortionError::RankDeficient { .. }),
        "{err}"
    );
}

#[test]
fn center_of_distortion_flags_noisy_zero_distortion() {
    let mut flagged = 0;
    for seed in 0..50 {
        let mut cfg = close_up_scene();
        cfg.camera.k1 = 0.0;
        cfg.camera.k2 = 0.0;
        cfg.noise_sigma_px = 0.2;
        cfg.rng_seed = 4000 + seed;
        let (corr, _) = synthesize_observations(&cfg).unwrap();
        match estimate_center_of_distortion(&camera_board_pairs(&corr)) {
            Ok(est) if est.near_zero_distortion => flagged += 1,
            Ok(_) => {}
            Err(_) => flagged += 1,
        }
    }
    assert!(
        flagged >= 45,
        "only {flagged}/50 noisy zero-distortion sets flagged"
    );
}

#[test]
fn division_coeffs_recovered_from_known_center() {
    // Single-coefficient model.
    let mut cfg = close_up_scene();
    cfg.camera.k1 = -5e-8;
    cfg.camera.k2 = 0.0;
    let (corr, gt) = synthesize_observations(&cfg).unwrap();
    let est = estimate_division_coeffs(
        &camera_board_pairs(&corr),
        gt.distortion.center(),
        corr.camera_dims.width,
        corr.camera_dims.height,
        &LmConfig::default(),
    )
    .unwrap();
    assert!(
        ((est.k1 - -5e-8) / 5e-8).abs() < 0.05,
        "k1 = {:.4e}, off by more than 5%",
        est.k1
    );
    // |k2| must be negligible against the scale set by the frame radius.
    let diag: f64 = (1280.0f64.powi(2) + 800.0f64.powi(2)).sqrt();
    assert!(
        est.k2.abs() < 1e-12 / diag.powi(4) * 1e12,
        "k2 = {:.3e}",
        est.k2
    );

    // Two-coefficient model.
    let mut cfg = close_up_scene();
    cfg.camera.k1 = -8e-8;
    cfg.camera.k2 = 2e-15;
    let (corr, gt) = synthesize_observations(&cfg).unwrap();
    let est = estimate_division_coeffs(
        &camera_board_pairs(&corr),
        gt.distortion.center(),
        corr.camera_dims.width,
        corr.camera_dims.height,
        &LmConfig::default(),
    )
    .unwrap();
    assert!(
        ((est.k1 - -8e-8) / 8e-8).abs() < 0.10,
        "k1 = {:.4e}",
        est.k1
    );
    assert!(
        ((est.k2 - 2e-15) / 2e-15).abs() < 0.10,
        "k2 = {:.4e}",
        est.k2
    );
}

#[test]
fn division_coeffs_zero_distortion_returns_zero() {
    let mut cfg = close_up_scene();
    cfg.camera.k1 = 0.0;
    cfg.camera.k2 = 0.0;
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    let pairs = camera_board_pairs(&corr);
    let center = corr.camera_dims.center();
    let est = estimate_division_coeffs(
        &pairs,
        center,
        corr.camera_dims.width,
        corr.camera_dims.height,
        &LmConfig::default(),
    )
    .unwrap();
    // The fit cannot improve on (0, 0) by more than numerical dust.
    let h_pairs: Vec<(Point2, Point2)> = pairs.iter().map(|(c, b)| (*b, *c)).collect();
    let h = estimate_homography(&h_pairs).unwrap();
    let cost_at_zero: f64 = h_pairs
        .iter()
        .map(|(b, c)| {
            let m = procam_calib::geometry::apply_homography(&h, *b).unwrap();
            (c.u - m.u).powi(2) + (c.v - m.v).powi(2)
        })
        .sum();
    assert!(
        cost_at_zero - est.cost < 1e-10,
        "residual improvement {:.3e} over the zero model",
        cost_at_zero - est.cost
    );
    let diag: f64 = (1280.0f64.powi(2) + 800.0f64.powi(2)).sqrt();
    assert!((est.k1 * diag * diag).abs() < 1e-5, "k1 = {:.3e}", est.k1);
}

/// After the estimation chain, undistorted points fit a homography at least
/// three orders of magnitude better than the raw distorted points.
#[test]
fn full_chain_drops_transfer_residual_three_orders() {
    let (corr, _) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let pairs = camera_board_pairs(&corr);
    let est = estimate_center_of_distortion(&pairs).unwrap();
    let coeffs = estimate_division_coeffs(
        &pairs,
        est.center,
        corr.camera_dims.width,
        corr.camera_dims.height,
        &LmConfig::default(),
    )
    .unwrap();
    let model = procam_calib::distortion::DivisionModel::new(
        est.center,
        coeffs.k1,
        coeffs.k2,
        corr.camera_dims.width,
        corr.camera_dims.height,
    )
    .unwrap();

    let transfer_cost = |points: &[Point2]| -> f64 {
        let h_pairs: Vec<(Point2, Point2)> = corr
            .board_points
            .iter()
            .zip(points)
            .map(|(b, c)| (*b, *c))
            .collect();
        let h = estimate_homography(&h_pairs).unwrap();
        h_pairs
            .iter()
            .map(|(b, c)| {
                let m = procam_calib::geometry::apply_homography(&h, *b).unwrap();
                (c.u - m.u).powi(2) + (c.v - m.v).powi(2)
            })
            .sum()
    };
    let distorted_cost = transfer_cost(&corr.camera_distorted);
    let undistorted: Vec<Point2> = corr
        .camera_distorted
        .iter()
        .map(|p| model.undistort(*p).unwrap())
        .collect();
    let undistorted_cost = transfer_cost(&undistorted);
    assert!(
        undistorted_cost < distorted_cost / 1e3,
        "residual only dropped from {distorted_cost:.3e} to {undistorted_cost:.3e}"
    );
}

// ---------------------------------------------------------------------------
// camera path
// ---------------------------------------------------------------------------

#[test]
fn camera_residuals_vanish_at_ground_truth() {
    let (corr, gt) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let anchor = principal_axis_board_intersection(&gt, true);
    let center = gt.rt_camera.device_center();
    let phi = roll_matching_rotation(anchor, center, &gt.rt_camera.rotation).unwrap();
    let theta = CameraParamSet {
        f: gt.camera_intrinsics.f,
        alpha: gt.camera_intrinsics.alpha,
        phi_deg: phi,
        center_of_projection: center,
    };
    let undistorted: Vec<Point2> = corr
        .camera_distorted
        .iter()
        .map(|p| gt.distortion.undistort(*p).unwrap())
        .collect();
    let res = camera_residuals(
        &theta,
        gt.camera_intrinsics.principal_point(),
        &corr.board_points,
        &undistorted,
        anchor,
    );
    let max = res.amax();
    assert!(max < 1e-8, "max residual {max:.3e} px at ground truth");
}

#[test]
fn camera_cost_increases_when_f_perturbed() {
    let (corr, gt) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let anchor = principal_axis_board_intersection(&gt, true);
    let center = gt.rt_camera.device_center();
    let phi = roll_matching_rotation(anchor, center, &gt.rt_camera.rotation).unwrap();
    let undistorted: Vec<Point2> = corr
        .camera_distorted
        .iter()
        .map(|p| gt.distortion.undistort(*p).unwrap())
        .collect();
    let model = CameraModel::new(
        &corr.board_points,
        &undistorted,
        anchor,
        gt.camera_intrinsics.principal_point(),
    );
    let base = CameraParamSet {
        f: gt.camera_intrinsics.f,
        alpha: gt.camera_intrinsics.alpha,
        phi_deg: phi,
        center_of_projection: center,
    };
    let cost_at = |theta: &CameraParamSet| model.residuals(theta).norm_squared();
    let c0 = cost_at(&base);
    let perturbed = CameraParamSet {
        f: base.f * 1.01,
        ..base
    };
    assert!(
        cost_at(&perturbed) > c0,
        "cost did not increase under +1% focal perturbation"
    );
}

#[test]
fn camera_board_anchor_matches_ray_plane_oracle() {
    let (corr, gt) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    // Homography from exact undistorted camera points to the board.
    let undistorted: Vec<Point2> = corr
        .camera_distorted
        .iter()
        .map(|p| gt.distortion.undistort(*p).unwrap())
        .collect();
    let pairs: Vec<(Point2, Point2)> = undistorted
        .iter()
        .zip(&corr.board_points)
        .map(|(c, b)| (*c, *b))
        .collect();
    let h = estimate_homography(&pairs).unwrap();
    let projected = board_principal_projection(&h, gt.camera_intrinsics.principal_point()).unwrap();
    let oracle = principal_axis_board_intersection(&gt, true);
    assert!(
        (projected.to_vector() - oracle.to_vector()).norm() < 1e-6,
        "projected {projected:?} vs ray-plane {oracle:?}"
    );
}

#[test]
fn camera_calibration_recovers_focal_length() {
    let (corr, gt) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let cal = calibrate_camera(&corr, &CalibrateOptions::default()).unwrap();
    let rel = (cal.intrinsics.f - gt.camera_intrinsics.f).abs() / gt.camera_intrinsics.f;
    assert!(rel < 0.005, "f_c off by {:.4}%", rel * 100.0);
    assert!(cal.diagnostics.converged);
    // The optimizer reaches machine-level cost on noiseless data from the
    // documented start.
    assert!(
        cal.diagnostics.final_cost < 1e-10,
        "final cost {:.3e} px^2",
        cal.diagnostics.final_cost
    );
    // Side product: the recovered pose matches the ground-truth Euler angles.
    let euler = cal.diagnostics.euler_deg.unwrap();
    assert!((euler.psi - -15.0).abs() < 0.01, "psi = {}", euler.psi);
    assert!((euler.nu - -15.0).abs() < 0.01, "nu = {}", euler.nu);
}

#[test]
fn camera_frontal_pose_completes_with_warning() {
    let mut cfg = SceneConfig::reference_rig();
    cfg.camera.pose = cfg
        .camera
        .pose
        .with_euler_keeping_translation(EulerAnglesXYZ::zero());
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    let cal = calibrate_camera(&corr, &CalibrateOptions::default()).unwrap();
    assert!(
        cal.diagnostics
            .warnings
            .iter()
            .any(|w| w.contains("near-frontal")),
        "no frontal warning in {:?}",
        cal.diagnostics.warnings
    );
}

#[test]
fn camera_rejects_too_few_correspondences() {
    let board = generate_board(2, 2, 23.0);
    let corr = CorrespondenceSet::new(
        procam_calib::structured_light::BoardSpec {
            rows: 2,
            cols: 2,
            spacing_mm: 23.0,
        },
        procam_calib::structured_light::ImageDims::new(1280, 800),
        procam_calib::structured_light::ImageDims::new(1920, 1080),
        board.clone(),
        board.clone(),
        board,
    )
    .unwrap();
    let err = calibrate_camera(&corr, &CalibrateOptions::default()).unwrap_err();
    assert!(matches!(
        err,
        CalibrateError::InsufficientCorrespondences {
            device: "camera",
            needed: 9,
            got: 4,
        }
    ));
}

// ---------------------------------------------------------------------------
// projector path
// ---------------------------------------------------------------------------

#[test]
fn projector_residuals_vanish_at_ground_truth() {
    let (corr, gt) = synthesize_observations(&model_consistent_scene()).unwrap();
    let h_pairs: Vec<(Point2, Point2)> = corr
        .projector_points
        .iter()
        .zip(&corr.board_points)
        .map(|(p, b)| (*p, *b))
        .collect();
    let h = estimate_homography(&h_pairs).unwrap();
    let model = ProjectorModel::new(
        &corr.board_points,
        &corr.projector_points,
        &h,
        corr.projector_dims.width as f64 / 2.0,
    );
    let anchor = principal_axis_board_intersection(&gt, false);
    let center = gt.rt_projector.device_center();
    let phi = roll_matching_rotation(anchor, center, &gt.rt_projector.rotation).unwrap();
    let theta = ProjectorParamSet {
        f: gt.projector_intrinsics.f,
        v0: gt.projector_intrinsics.v0,
        phi_deg: phi,
        center_of_projection: center,
    };
    let max = model.residuals(&theta).amax();
    assert!(max < 1e-8, "max residual {max:.3e} px at ground truth");
}

#[test]
fn projector_anchor_sweeps_along_a_line() {
    let (corr, _) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let h_pairs: Vec<(Point2, Point2)> = corr
        .projector_points
        .iter()
        .zip(&corr.board_points)
        .map(|(p, b)| (*p, *b))
        .collect();
    let h = estimate_homography(&h_pairs).unwrap();
    let model = ProjectorModel::new(
        &corr.board_points,
        &corr.projector_points,
        &h,
        corr.projector_dims.width as f64 / 2.0,
    );
    let anchors: Vec<Point3> = (0..10)
        .map(|i| {
            model
                .principal_point_on_board(200.0 + 120.0 * i as f64)
                .unwrap()
        })
        .collect();
    // Collinearity: every anchor lies on the line through the first two.
    let a = anchors[0].to_vector();
    let dir = (anchors[9].to_vector() - a).normalize();
    for p in &anchors {
        let d = p.to_vector() - a;
        let off_line = (d - dir * d.dot(&dir)).norm();
        assert!(
            off_line < 1e-6,
            "anchor {p:?} off the line by {off_line:.2e} mm"
        );
    }
}

#[test]
fn projector_calibration_recovers_focal_length_in_model_consistent_scene() {
    let (corr, gt) = synthesize_observations(&model_consistent_scene()).unwrap();
    let cal = calibrate_projector(&corr, &CalibrateOptions::default()).unwrap();
    let rel = (cal.intrinsics.f - gt.projector_intrinsics.f).abs() / gt.projector_intrinsics.f;
    assert!(rel < 0.005, "f_p off by {:.4}%", rel * 100.0);
    assert_eq!(cal.intrinsics.u0, 960.0);
    assert!(
        (cal.intrinsics.v0 - 1065.0).abs() < 0.5,
        "v0 = {}",
        cal.intrinsics.v0
    );
}

#[test]
fn projector_ground_truth_is_a_fixed_point_of_the_optimizer() {
    let (corr, gt) = synthesize_observations(&model_consistent_scene()).unwrap();
    let h_pairs: Vec<(Point2, Point2)> = corr
        .projector_points
        .iter()
        .zip(&corr.board_points)
        .map(|(p, b)| (*p, *b))
        .collect();
    let h = estimate_homography(&h_pairs).unwrap();
    let model = ProjectorModel::new(
        &corr.board_points,
        &corr.projector_points,
        &h,
        corr.projector_dims.width as f64 / 2.0,
    );
    let anchor = principal_axis_board_intersection(&gt, false);
    let center = gt.rt_projector.device_center();
    let phi = roll_matching_rotation(anchor, center, &gt.rt_projector.rotation).unwrap();
    let theta = ProjectorParamSet {
        f: gt.projector_intrinsics.f,
        v0: gt.projector_intrinsics.v0,
        phi_deg: phi,
        center_of_projection: center,
    };
    let outcome = levenberg_marquardt(
        |v| {
            let t = ProjectorParamSet::unpack(v);
            model.residuals(&t)
        },
        theta.pack(),
        &LmConfig::default(),
    );
    assert!(outcome.converged);
    assert!(
        outcome.last_step_norm < 1e-8,
        "optimizer moved by {:.3e} from the ground truth",
        outcome.last_step_norm
    );
}

#[test]
fn projector_near_frontal_tilt_warns_but_converges() {
    let mut cfg = SceneConfig::reference_rig();
    cfg.projector.pose = cfg
        .projector
        .pose
        .with_euler_keeping_translation(EulerAnglesXYZ::new(0.0, 0.5, 0.0));
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    let cal = calibrate_projector(&corr, &CalibrateOptions::default()).unwrap();
    assert!(
        cal.diagnostics
            .warnings
            .iter()
            .any(|w| w.contains("weakly constrained")),
        "no tilt warning in {:?}",
        cal.diagnostics.warnings
    );
}

// ---------------------------------------------------------------------------
// full pipeline
// ---------------------------------------------------------------------------

#[test]
fn procam_baseline_recovered_in_model_consistent_scene() {
    let (corr, gt) = synthesize_observations(&model_consistent_scene()).unwrap();
    let result = calibrate_procam(&corr, &CalibrateOptions::default()).unwrap();
    let rel = (result.baseline_mm() - gt.baseline_mm()).abs() / gt.baseline_mm();
    assert!(rel < 0.005, "baseline off by {:.4}%", rel * 100.0);

    // The stored procam block recomposes from the device poses.
    let recomposed =
        procam_calib::calibrate::compose_procam_extrinsics(&result.camera.rt, &result.projector.rt);
    assert!((recomposed.rotation.matrix() - result.rt_procam.rotation.matrix()).amax() < 1e-12);
    assert!(
        (recomposed.translation.to_vector() - result.rt_procam.translation.to_vector()).norm()
            < 1e-9
    );
}

#[test]
fn noisy_favorable_pose_keeps_camera_reprojection_below_one_px() {
    let mut means = Vec::new();
    for seed in 0..20 {
        let mut cfg = SceneConfig::reference_rig();
        cfg.noise_sigma_px = 0.5;
        cfg.rng_seed = 7000 + seed;
        let (corr, _) = synthesize_observations(&cfg).unwrap();
        let result = calibrate_procam(&corr, &CalibrateOptions::default()).unwrap();
        means.push(result.camera.reprojection.mean_px);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    assert!(
        mean < 1.0,
        "camera reprojection mean {mean:.3} px at 0.5 px noise"
    );
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

#[test]
fn pnp_translation_error_under_noise() {
    let k = Intrinsics::new(1539.0, 1.004, 674.0, 512.0).unwrap();
    let board_spec = procam_calib::structured_light::BoardSpec {
        rows: 6,
        cols: 10,
        spacing_mm: 23.0,
    };
    let dims = procam_calib::structured_light::ImageDims::new(1280, 800);
    let pose = anchored_pose(
        &k,
        dims,
        &board_spec,
        500.0,
        EulerAnglesXYZ::new(-12.0, 15.0, 0.0),
    );
    let rt = pose.extrinsics();
    let board = generate_board(6, 10, 23.0);
    let exact: Vec<Point2> = board
        .iter()
        .map(|b| project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)).unwrap())
        .collect();

    use rand::SeedableRng;
    use rand_distr::Distribution;
    let normal = rand_distr::Normal::new(0.0, 0.5).unwrap();
    let mut errors = Vec::new();
    for seed in 0..100u64 {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
        let noisy: Vec<Point2> = exact
            .iter()
            .map(|p| Point2::new(p.u + normal.sample(&mut rng), p.v + normal.sample(&mut rng)))
            .collect();
        let result = planar_pnp(&k, &board, &noisy, &LmConfig::default()).unwrap();
        let dt = (result.pose.translation.to_vector() - rt.translation.to_vector()).norm();
        errors.push(dt);
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errors[errors.len() / 2];
    assert!(median < 5.0, "median |dT| = {median:.3} mm at 500 mm depth");
}

#[test]
fn reprojection_mean_matches_rayleigh_oracle() {
    // Per-axis sigma = 0.5 makes the radial error Rayleigh with mean
    // sigma * sqrt(pi/2).
    let k = Intrinsics::new(1539.0, 1.0, 640.0, 400.0).unwrap();
    let board_spec = procam_calib::structured_light::BoardSpec {
        rows: 6,
        cols: 10,
        spacing_mm: 23.0,
    };
    let dims = procam_calib::structured_light::ImageDims::new(1280, 800);
    let pose = anchored_pose(&k, dims, &board_spec, 700.0, EulerAnglesXYZ::zero());
    let rt = pose.extrinsics();
    let board = generate_board(6, 10, 23.0);
    let exact: Vec<Point2> = board
        .iter()
        .map(|b| project_pinhole(&k, &rt, Point3::new(b.u, b.v, 0.0)).unwrap())
        .collect();

    use rand::SeedableRng;
    use rand_distr::Distribution;
    let normal = rand_distr::Normal::new(0.0, 0.5).unwrap();
    let mut total = 0.0;
    let trials = 100;
    for seed in 0..trials as u64 {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(100 + seed);
        let noisy: Vec<Point2> = exact
            .iter()
            .map(|p| Point2::new(p.u + normal.sample(&mut rng), p.v + normal.sample(&mut rng)))
            .collect();
        let stats = reprojection_error(&k, None, &rt, &board, &noisy).unwrap();
        total += stats.mean_px;
    }
    let mean = total / trials as f64;
    let expected = 0.5 * (std::f64::consts::PI / 2.0).sqrt();
    assert!(
        (mean - expected).abs() / expected < 0.15,
        "mean radial error {mean:.4} vs Rayleigh {expected:.4}"
    );
}

/// A single noiseless sweep cell at a mildly tilted pose recovers the focal
/// length within half a percent despite the deliberate principal-point
/// offset.
#[test]
fn sweep_cell_noiseless_focal_error_below_half_percent() {
    let mut cfg = SceneConfig::reference_rig();
    cfg.noise_sigma_px = 0.0;
    let sweep = procam_calib::simulator::rotation_sweep(
        &cfg,
        procam_calib::simulator::SweepDevice::Camera,
        (10.0, 10.0),
        (10.0, 10.0),
        5.0,
        1,
    );
    let cell = &sweep.cells[0];
    assert!(cell.converged);
    assert!(
        cell.delta_f_px < 0.005 * cfg.camera.intrinsics.f,
        "|df_c| = {:.2} px at (10, 10) noiseless",
        cell.delta_f_px
    );
}

#[test]
fn repeated_identical_poses_have_zero_sigma() {
    let (corr, gt) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let poses: Vec<CorrespondenceSet> = vec![corr; 7];
    let precision = procam_calib::metrics::translation_precision(
        &gt.camera_intrinsics,
        Some(&gt.distortion),
        &gt.projector_intrinsics,
        &poses,
        &LmConfig::default(),
    )
    .unwrap();
    // Identical poses give identical PnP results; the spreads vanish up to
    // the rounding of the mean itself.
    assert!(precision.sigma_x < 1e-9);
    assert!(precision.sigma_y < 1e-9);
    assert!(precision.sigma_z < 1e-9);
    assert!(precision.sigma_t < 1e-9);
    assert!(precision.sigma_abs_t < 1e-9);
    // sigma_T is the root of the summed component variances.
    let expected = (precision.sigma_x.powi(2)
        + precision.sigma_y.powi(2)
        + precision.sigma_z.powi(2))
    .sqrt();
    assert!((precision.sigma_t - expected).abs() <= 1e-9 * expected.max(1e-30));
}

/// More observation noise never reduces the expected reprojection error of
/// the ground-truth parameters.
#[test]
fn noise_monotonically_inflates_ground_truth_reprojection() {
    let mut means = Vec::new();
    for sigma in [0.0, 0.25, 0.5, 1.0] {
        let mut total = 0.0;
        let trials = 30;
        for seed in 0..trials {
            let mut cfg = SceneConfig::reference_rig();
            cfg.noise_sigma_px = sigma;
            cfg.rng_seed = 5000 + seed;
            let (corr, gt) = synthesize_observations(&cfg).unwrap();
            let stats = reprojection_error(
                &gt.camera_intrinsics,
                Some(&gt.distortion),
                &gt.rt_camera,
                &corr.board_points,
                &corr.camera_distorted,
            )
            .unwrap();
            total += stats.mean_px;
        }
        means.push(total / trials as f64);
    }
    for pair in means.windows(2) {
        assert!(
            pair[1] >= pair[0],
            "mean reprojection decreased with noise: {means:?}"
        );
    }
}

/// Noiseless, distortion-free synthesis induces exact plane homographies on
/// both devices.
#[test]
fn distortion_free_synthesis_is_homography_exact() {
    let mut cfg = SceneConfig::reference_rig();
    cfg.camera.k1 = 0.0;
    cfg.camera.k2 = 0.0;
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    for observed in [&corr.camera_distorted, &corr.projector_points] {
        let pairs: Vec<(Point2, Point2)> = corr
            .board_points
            .iter()
            .zip(observed)
            .map(|(b, o)| (*b, *o))
            .collect();
        let h = estimate_homography(&pairs).unwrap();
        for (b, o) in &pairs {
            let m = procam_calib::geometry::apply_homography(&h, *b).unwrap();
            assert!(
                m.distance_to(*o) < 1e-8,
                "transfer error {}",
                m.distance_to(*o)
            );
        }
    }
}

#[test]
fn stereo_reprojection_near_zero_on_exact_data() {
    let (corr, gt) = synthesize_observations(&SceneConfig::reference_rig()).unwrap();
    let err = stereo_reprojection(
        &gt.camera_intrinsics,
        Some(&gt.distortion),
        &gt.rt_camera,
        &gt.projector_intrinsics,
        &gt.rt_projector,
        &corr,
    )
    .unwrap();
    assert!(err < 1e-6, "stereo reprojection {err:.3e} px on exact data");
}

// ---------------------------------------------------------------------------
// structured light against the rendered stack
// ---------------------------------------------------------------------------

#[test]
fn decode_matches_ground_truth_map() {
    let cfg = SceneConfig::reference_rig();
    let (stack, layout, map) = synthesize_graycode_stack(&cfg).unwrap();
    let decoded = decode(&stack, &layout, &DecodeConfig::default()).unwrap();
    let mut lit = 0usize;
    let mut within = 0usize;
    for y in (0..decoded.height()).step_by(7) {
        for x in (0..decoded.width()).step_by(7) {
            if let Some((pc, pr)) = decoded.get(x, y) {
                lit += 1;
                let truth = map.eval(Point2::new(x as f64, y as f64)).unwrap();
                let d = ((pc as f64 - truth.u).powi(2) + (pr as f64 - truth.v).powi(2)).sqrt();
                if d <= 1.0 {
                    within += 1;
                }
            }
        }
    }
    assert!(lit > 10_000, "only {lit} sampled pixels decoded");
    let frac = within as f64 / lit as f64;
    assert!(
        frac >= 0.99,
        "only {:.2}% of decoded pixels within 1 px",
        frac * 100.0
    );
}

#[test]
fn lifted_corners_match_projector_ground_truth() {
    let cfg = SceneConfig::reference_rig();
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    let (stack, layout, _) = synthesize_graycode_stack(&cfg).unwrap();
    let map = decode(&stack, &layout, &DecodeConfig::default()).unwrap();
    let lifted = lift_corners(&map, &corr.camera_distorted, 15).unwrap();
    for (i, (l, truth)) in lifted.iter().zip(&corr.projector_points).enumerate() {
        let d = l.distance_to(*truth);
        assert!(d < 0.3, "corner {i} lifted {d:.3} px from ground truth");
    }
}

#[test]
fn lift_is_stable_under_window_size_changes() {
    // Without camera distortion the camera-to-projector map is an exact
    // homography, so the window size must not matter.
    let mut cfg = SceneConfig::reference_rig();
    cfg.camera.k1 = 0.0;
    cfg.camera.k2 = 0.0;
    let (corr, _) = synthesize_observations(&cfg).unwrap();
    let (stack, layout, _) = synthesize_graycode_stack(&cfg).unwrap();
    let map = decode(&stack, &layout, &DecodeConfig::default()).unwrap();
    let corners = &corr.camera_distorted[..12];
    let base = lift_corners(&map, corners, 15).unwrap();
    for radius in [11, 19] {
        let other = lift_corners(&map, corners, radius).unwrap();
        for (a, b) in base.iter().zip(&other) {
            assert!(
                a.distance_to(*b) < 0.1,
                "window radius {radius} moved a corner by {:.3} px",
                a.distance_to(*b)
            );
        }
    }
}
