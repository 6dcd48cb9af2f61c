//! Corners-file loader: arbitrary JSON must validate or error, never panic.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = procam_calib::formats::corners_from_json(data) {
        let _ = file.to_domain();
    }
});
