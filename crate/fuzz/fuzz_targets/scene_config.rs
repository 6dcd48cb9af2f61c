//! Scene-config loader: arbitrary JSON must merge with the reference rig or
//! error, never panic; accepted configs must be serializable and reloadable.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = procam_calib::formats::scene_from_json(data) {
        let bytes = procam_calib::formats::scene_to_json(&cfg);
        let back = procam_calib::formats::scene_from_json(&bytes)
            .expect("re-serialized config must parse");
        assert_eq!(cfg, back);
    }
});
