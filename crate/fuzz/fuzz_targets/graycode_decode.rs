//! Gray-code decoder: arbitrary frame stacks over small projector layouts
//! must decode or error, never panic, and decoded coordinates must stay in
//! range.

#![no_main]
use libfuzzer_sys::fuzz_target;

use procam_calib::structured_light::{
    decode, lift_corners, DecodeConfig, GrayImage, PatternLayout,
};

fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let width = 2 + (data[0] % 16) as u32;
    let height = 2 + (data[1] % 16) as u32;
    let config = DecodeConfig {
        contrast_threshold: data[2],
        span_threshold: data[3],
    };
    let layout = PatternLayout::canonical(width, height);
    let frame_len = (width * height) as usize;
    let payload = &data[4..];

    let mut stack = Vec::with_capacity(layout.slots.len());
    for i in 0..layout.slots.len() {
        let mut frame = vec![0u8; frame_len];
        for (j, byte) in frame.iter_mut().enumerate() {
            let idx = i * frame_len + j;
            if !payload.is_empty() {
                *byte = payload[idx % payload.len()];
            }
        }
        stack.push(GrayImage::new(width, height, frame).unwrap());
    }

    if let Ok(map) = decode(&stack, &layout, &config) {
        for y in 0..map.height() {
            for x in 0..map.width() {
                if let Some((c, r)) = map.get(x, y) {
                    assert!(c < width && r < height, "decoded coordinate out of range");
                }
            }
        }
        let corner = procam_calib::geometry::Point2::new((width / 2) as f64, (height / 2) as f64);
        let _ = lift_corners(&map, &[corner], 3);
    }
});
