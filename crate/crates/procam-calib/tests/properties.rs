//! Property suites over randomized inputs.

use nalgebra::Matrix3;
use proptest::prelude::*;

use procam_calib::calibrate::compose_procam_extrinsics;
use procam_calib::distortion::DivisionModel;
use procam_calib::geometry::{
    apply_homography, estimate_homography, euler_xyz_to_matrix, matrix_to_euler_xyz,
    EulerAnglesXYZ, Homography, Point2, Point3, RigidTransform,
};
use procam_calib::lm::{levenberg_marquardt, LmConfig};
use procam_calib::simulator::{synthesize_observations, SceneConfig};
use procam_calib::structured_light::{decode, generate_patterns, DecodeConfig, GrayImage};

fn euler_strategy() -> impl Strategy<Value = EulerAnglesXYZ> {
    (-80.0..80.0f64, -80.0..80.0f64, -80.0..80.0f64)
        .prop_map(|(psi, nu, phi)| EulerAnglesXYZ::new(psi, nu, phi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Euler angles away from gimbal lock round-trip through the matrix.
    #[test]
    fn euler_round_trip(e in euler_strategy()) {
        let back = matrix_to_euler_xyz(&euler_xyz_to_matrix(e)).unwrap();
        prop_assert!((back.psi - e.psi).abs() < 1e-9);
        prop_assert!((back.nu - e.nu).abs() < 1e-9);
        prop_assert!((back.phi - e.phi).abs() < 1e-9);
    }

    /// Every constructed rotation satisfies the orthonormality invariants,
    /// including long products.
    #[test]
    fn rotation_products_stay_orthonormal(es in prop::collection::vec(euler_strategy(), 1..6)) {
        let mut r = euler_xyz_to_matrix(es[0]);
        for e in &es[1..] {
            r = r.compose(&euler_xyz_to_matrix(*e));
        }
        let m = r.matrix();
        prop_assert!(((m.transpose() * m) - Matrix3::identity()).amax() < 1e-9);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
    }

    /// Homography estimation is exact on noiseless planar data.
    #[test]
    fn homography_estimation_is_exact_on_planar_data(
        h00 in 0.5..1.5f64, h01 in -0.3..0.3f64, h02 in -50.0..50.0f64,
        h10 in -0.3..0.3f64, h11 in 0.5..1.5f64, h12 in -50.0..50.0f64,
        h20 in -2e-4..2e-4f64, h21 in -2e-4..2e-4f64,
    ) {
        let truth = Homography::from_matrix(Matrix3::new(
            h00, h01, h02, h10, h11, h12, h20, h21, 1.0,
        )).unwrap();
        let mut pairs = Vec::new();
        for i in 0..8 {
            for j in 0..5 {
                let s = Point2::new(i as f64 * 37.0 + 10.0, j as f64 * 29.0 + 5.0);
                pairs.push((s, apply_homography(&truth, s).unwrap()));
            }
        }
        let est = estimate_homography(&pairs).unwrap();
        for (s, d) in &pairs {
            let m = apply_homography(&est, *s).unwrap();
            prop_assert!(m.distance_to(*d) < 1e-8, "transfer error {}", m.distance_to(*d));
        }
    }

    /// Distortion round trip: distort then undistort is the identity.
    #[test]
    fn distortion_round_trip(
        k1 in -8e-8..4e-8f64,
        k2 in -1e-15..1e-15f64,
        cu in 600.0..700.0f64,
        cv in 370.0..430.0f64,
        pu in 0.0..1280.0f64,
        pv in 0.0..800.0f64,
    ) {
        let center = Point2::new(cu, cv);
        if let Ok(model) = DivisionModel::new(center, k1, k2, 1280, 800) {
            let p = Point2::new(pu, pv);
            let d = model.distort(p).unwrap();
            let back = model.undistort(d).unwrap();
            prop_assert!(back.distance_to(p) < 1e-9, "round trip error {}", back.distance_to(p));
        }
    }

    /// Accepted Levenberg-Marquardt steps never increase the cost.
    #[test]
    fn lm_accepted_costs_monotone(
        a in 0.5..5.0f64,
        b in -3.0..3.0f64,
        c in -3.0..3.0f64,
        x0 in -4.0..4.0f64,
        y0 in -4.0..4.0f64,
    ) {
        let residuals = move |x: &nalgebra::DVector<f64>| {
            nalgebra::DVector::from_vec(vec![
                a * (x[1] - x[0] * x[0]),
                1.0 - x[0] + b,
                0.3 * (x[0] + x[1] + c),
            ])
        };
        let outcome = levenberg_marquardt(
            residuals,
            nalgebra::DVector::from_vec(vec![x0, y0]),
            &LmConfig::default(),
        );
        for w in outcome.accepted_costs.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    /// Composed procam extrinsics route any board point consistently:
    /// R (R_c M + T_c) + T = R_p M + T_p.
    #[test]
    fn procam_composition_frame_consistency(
        e_c in euler_strategy(),
        e_p in euler_strategy(),
        t_c in (-200.0..200.0f64, -200.0..200.0f64, 400.0..1200.0f64),
        t_p in (-200.0..200.0f64, -200.0..200.0f64, 400.0..1200.0f64),
        m in (-300.0..300.0f64, -300.0..300.0f64),
    ) {
        let rt_c = RigidTransform::new(
            euler_xyz_to_matrix(e_c),
            Point3::new(t_c.0, t_c.1, t_c.2),
        );
        let rt_p = RigidTransform::new(
            euler_xyz_to_matrix(e_p),
            Point3::new(t_p.0, t_p.1, t_p.2),
        );
        let rel = compose_procam_extrinsics(&rt_c, &rt_p);
        let point = Point3::new(m.0, m.1, 0.0);
        let via = rel.apply(rt_c.apply(point));
        let direct = rt_p.apply(point);
        let err = (via.to_vector() - direct.to_vector()).norm();
        prop_assert!(err < 1e-9, "frame consistency violated by {err:.2e} mm");
    }

    /// Decoding is invariant to monotone per-pixel intensity rescaling
    /// applied uniformly to the stack.
    #[test]
    fn decode_invariant_to_monotone_rescale(
        gain in 0.4..0.9f64,
        offset in 0u8..60u8,
        gamma in 0.5..1.8f64,
    ) {
        let set = generate_patterns(32, 16);
        let reference = decode(&set.patterns, &set.layout, &DecodeConfig::default()).unwrap();
        let rescale = |v: u8| -> u8 {
            let x = (v as f64 / 255.0).powf(gamma) * 255.0 * gain + offset as f64;
            x.min(255.0) as u8
        };
        let stack: Vec<GrayImage> = set
            .patterns
            .iter()
            .map(|img| {
                let mut img = img.clone();
                img.map_intensities(rescale);
                img
            })
            .collect();
        let remapped = decode(&stack, &set.layout, &DecodeConfig::default()).unwrap();
        for y in 0..16 {
            for x in 0..32 {
                prop_assert_eq!(reference.get(x, y), remapped.get(x, y));
            }
        }
    }

    /// The simulator is bit-deterministic in its seed and sensitive to it.
    #[test]
    fn simulator_determinism(seed in any::<u64>()) {
        let mut cfg = SceneConfig::reference_rig();
        cfg.noise_sigma_px = 0.5;
        cfg.rng_seed = seed;
        let (a, _) = synthesize_observations(&cfg).unwrap();
        let (b, _) = synthesize_observations(&cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let bytes_a = procam_calib::formats::correspondence_to_json(&a, None);
        let bytes_b = procam_calib::formats::correspondence_to_json(&b, None);
        prop_assert_eq!(bytes_a, bytes_b);
    }
}
