//! Calibration-file loader: arbitrary JSON must validate (rotation
//! invariants, model invertibility) or error, never panic.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = procam_calib::formats::calibration_from_json(data);
});
