//! Correspondence-file loader: arbitrary JSON must validate or error, never
//! panic; accepted documents must survive a serialize/parse cycle.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((corr, gt)) = procam_calib::formats::correspondence_from_json(data) {
        let bytes = procam_calib::formats::correspondence_to_json(&corr, gt.as_ref());
        let (corr2, _) = procam_calib::formats::correspondence_from_json(&bytes)
            .expect("re-serialized file must parse");
        assert_eq!(corr, corr2);
    }
});
