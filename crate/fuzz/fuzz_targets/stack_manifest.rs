//! Stack-manifest loader: arbitrary JSON must validate or error, never
//! panic; valid manifests must expose a consistent layout.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = procam_calib::formats::manifest_from_json(data) {
        if let Ok(layout) = manifest.layout() {
            assert_eq!(layout.slots.len(), manifest.files.len());
        }
    }
});
