//! Binary PGM parser: arbitrary bytes must parse or error, never panic,
//! and accepted images must round-trip.

#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = procam_calib::formats::parse_pgm(data) {
        let mut buf = Vec::new();
        procam_calib::formats::write_pgm(&mut buf, &img).unwrap();
        let back = procam_calib::formats::parse_pgm(&buf).unwrap();
        assert_eq!(back, img, "PGM round trip must be lossless");
    }
});
