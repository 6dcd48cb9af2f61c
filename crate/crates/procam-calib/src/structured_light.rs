//! Gray-code structured light: pattern generation, image-stack decoding into
//! a per-pixel camera-to-projector correspondence map, and lifting of
//! subpixel chessboard corners into projector coordinates through local
//! homographies.

use thiserror::Error;

use crate::geometry::{apply_homography, estimate_homography, GeometryError, Point2};

/// Minimum number of decodable pixels required inside a corner's window.
pub const MIN_WINDOW_SUPPORT: usize = 16;

/// Default half-size of the square window used for local homographies.
pub const DEFAULT_WINDOW_RADIUS: u32 = 15;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StructuredLightError {
    #[error("stack/layout mismatch: {reason}")]
    DimensionMismatch { reason: String },
    #[error("pattern layout is malformed: {reason}")]
    MalformedLayout { reason: String },
    #[error(
        "corner {corner_index} has insufficient decoded support ({decodable} pixels, need {MIN_WINDOW_SUPPORT}) or a degenerate fit"
    )]
    InsufficientSupport {
        corner_index: usize,
        decodable: usize,
    },
    #[error("image buffer length {len} does not match {width}x{height}")]
    BadImageBuffer { width: u32, height: u32, len: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// An 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, StructuredLightError> {
        if data.len() != width as usize * height as usize {
            return Err(StructuredLightError::BadImageBuffer {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Applies a per-pixel intensity map in place.
    pub fn map_intensities(&mut self, f: impl Fn(u8) -> u8) {
        for p in &mut self.data {
            *p = f(*p);
        }
    }
}

/// Which projector axis a bit plane encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Bits of the pixel column index.
    Column,
    /// Bits of the pixel row index.
    Row,
}

/// Role of one frame in the projected sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternSlot {
    /// One Gray-code bit plane, direct or inverted.
    Bit { axis: Axis, bit: u8, inverted: bool },
    /// Full-on reference frame.
    White,
    /// Full-off reference frame.
    Black,
}

/// Frame ordering and projector geometry for a pattern sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternLayout {
    pub projector_width: u32,
    pub projector_height: u32,
    pub slots: Vec<PatternSlot>,
}

impl PatternLayout {
    /// The canonical ordering: column bits MSB to LSB with each direct frame
    /// followed by its inverse, then row bits likewise, then white, then
    /// black.
    pub fn canonical(projector_width: u32, projector_height: u32) -> Self {
        assert!(
            projector_width >= 2 && projector_height >= 2,
            "projector dimensions must be at least 2x2"
        );
        let mut slots = Vec::new();
        for (axis, extent) in [
            (Axis::Column, projector_width),
            (Axis::Row, projector_height),
        ] {
            let bits = bits_for(extent);
            for bit in (0..bits).rev() {
                for inverted in [false, true] {
                    slots.push(PatternSlot::Bit {
                        axis,
                        bit: bit as u8,
                        inverted,
                    });
                }
            }
        }
        slots.push(PatternSlot::White);
        slots.push(PatternSlot::Black);
        Self {
            projector_width,
            projector_height,
            slots,
        }
    }

    pub fn pattern_count(&self) -> usize {
        self.slots.len()
    }

    pub fn column_bits(&self) -> u32 {
        bits_for(self.projector_width)
    }

    pub fn row_bits(&self) -> u32 {
        bits_for(self.projector_height)
    }
}

/// A full pattern sequence: layout plus the rendered frames.
#[derive(Debug, Clone)]
pub struct PatternSet {
    pub layout: PatternLayout,
    pub patterns: Vec<GrayImage>,
}

/// Number of Gray-code bit planes needed to address `extent` pixels.
pub fn bits_for(extent: u32) -> u32 {
    assert!(extent >= 2, "extent must be at least 2");
    32 - (extent - 1).leading_zeros()
}

/// Reflected-binary encoding of `n`.
pub fn gray_encode(n: u32) -> u32 {
    n ^ (n >> 1)
}

/// Inverse of [`gray_encode`].
pub fn gray_decode(g: u32) -> u32 {
    let mut n = g;
    n ^= n >> 16;
    n ^= n >> 8;
    n ^= n >> 4;
    n ^= n >> 2;
    n ^= n >> 1;
    n
}

/// Renders the single frame described by `slot` at projector resolution.
pub fn render_pattern(layout: &PatternLayout, slot: PatternSlot) -> GrayImage {
    let (w, h) = (layout.projector_width, layout.projector_height);
    match slot {
        PatternSlot::White => GrayImage::filled(w, h, 255),
        PatternSlot::Black => GrayImage::filled(w, h, 0),
        PatternSlot::Bit {
            axis,
            bit,
            inverted,
        } => {
            let on = if inverted { 0u8 } else { 255u8 };
            let off = 255 - on;
            let mut img = GrayImage::filled(w, h, 0);
            match axis {
                Axis::Column => {
                    // Column patterns are constant down each column; render the
                    // first row and copy it.
                    let row: Vec<u8> = (0..w)
                        .map(|c| {
                            if gray_encode(c) >> bit & 1 == 1 {
                                on
                            } else {
                                off
                            }
                        })
                        .collect();
                    for y in 0..h {
                        let start = y as usize * w as usize;
                        img.data[start..start + w as usize].copy_from_slice(&row);
                    }
                }
                Axis::Row => {
                    for y in 0..h {
                        let value = if gray_encode(y) >> bit & 1 == 1 {
                            on
                        } else {
                            off
                        };
                        let start = y as usize * w as usize;
                        img.data[start..start + w as usize].fill(value);
                    }
                }
            }
            img
        }
    }
}

/// Generates the full Gray-code sequence for a projector of the given size:
/// one direct and one inverted frame per bit of each axis, plus an all-white
/// and an all-black reference frame. The frame count is
/// `2 * (ceil(log2 w) + ceil(log2 h)) + 2`.
pub fn generate_patterns(projector_width: u32, projector_height: u32) -> PatternSet {
    let layout = PatternLayout::canonical(projector_width, projector_height);
    let patterns = layout
        .slots
        .iter()
        .map(|&slot| render_pattern(&layout, slot))
        .collect();
    PatternSet { layout, patterns }
}

/// Decoder thresholds, in 8-bit intensity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    /// Minimum |direct - inverse| for a bit to count as decodable.
    pub contrast_threshold: u8,
    /// Minimum white-minus-black span for a pixel to be lit at all.
    pub span_threshold: u8,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 5,
            span_threshold: 10,
        }
    }
}

/// Per-camera-pixel decode result: projector (column, row) where decodable.
#[derive(Debug, Clone)]
pub struct CorrespondenceMap {
    width: u32,
    height: u32,
    codes: Vec<Option<(u32, u32)>>,
    /// White-minus-black span per pixel.
    contrast: Vec<u8>,
}

impl CorrespondenceMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<(u32, u32)> {
        self.codes[y as usize * self.width as usize + x as usize]
    }

    pub fn contrast(&self, x: u32, y: u32) -> u8 {
        self.contrast[y as usize * self.width as usize + x as usize]
    }

    pub fn decoded_count(&self) -> usize {
        self.codes.iter().filter(|c| c.is_some()).count()
    }

    /// Exact identity map at the given size (test and reference aid).
    pub fn identity(width: u32, height: u32) -> Self {
        let codes = (0..height)
            .flat_map(|y| (0..width).map(move |x| Some((x, y))))
            .collect();
        Self {
            width,
            height,
            codes,
            contrast: vec![255; width as usize * height as usize],
        }
    }
}

/// Decodes a captured frame stack (ordered per `layout`) into a per-pixel
/// projector-coordinate map.
///
/// Each bit is read as `direct > inverse`; a pixel becomes undecodable when
/// any bit's |direct - inverse| falls below the contrast threshold, when its
/// white-black span is below the span threshold, or when the decoded
/// coordinate lies outside the projector frame. Every pixel is decoded
/// independently, so the output does not depend on traversal order.
pub fn decode(
    stack: &[GrayImage],
    layout: &PatternLayout,
    config: &DecodeConfig,
) -> Result<CorrespondenceMap, StructuredLightError> {
    if stack.len() != layout.slots.len() {
        return Err(StructuredLightError::DimensionMismatch {
            reason: format!(
                "stack has {} frames but the layout lists {}",
                stack.len(),
                layout.slots.len()
            ),
        });
    }
    let (width, height) = match stack.first() {
        Some(img) => (img.width(), img.height()),
        None => {
            return Err(StructuredLightError::DimensionMismatch {
                reason: "empty stack".to_string(),
            })
        }
    };
    for (i, img) in stack.iter().enumerate() {
        if img.width() != width || img.height() != height {
            return Err(StructuredLightError::DimensionMismatch {
                reason: format!(
                    "frame {i} is {}x{}, expected {width}x{height}",
                    img.width(),
                    img.height()
                ),
            });
        }
    }

    let col_bits = layout.column_bits();
    let row_bits = layout.row_bits();
    // (direct, inverse) frame indices per bit, columns first then rows.
    let mut bit_frames: Vec<(Option<usize>, Option<usize>)> =
        vec![(None, None); (col_bits + row_bits) as usize];
    let mut white = None;
    let mut black = None;
    for (i, slot) in layout.slots.iter().enumerate() {
        match *slot {
            PatternSlot::White => white = Some(i),
            PatternSlot::Black => black = Some(i),
            PatternSlot::Bit {
                axis,
                bit,
                inverted,
            } => {
                let bits = match axis {
                    Axis::Column => col_bits,
                    Axis::Row => row_bits,
                };
                if u32::from(bit) >= bits {
                    return Err(StructuredLightError::MalformedLayout {
                        reason: format!("bit {bit} out of range for {axis:?}"),
                    });
                }
                let base = match axis {
                    Axis::Column => 0,
                    Axis::Row => col_bits as usize,
                };
                let entry = &mut bit_frames[base + bit as usize];
                let slot_ref = if inverted { &mut entry.1 } else { &mut entry.0 };
                if slot_ref.is_some() {
                    return Err(StructuredLightError::MalformedLayout {
                        reason: format!("duplicate frame for {axis:?} bit {bit}"),
                    });
                }
                *slot_ref = Some(i);
            }
        }
    }
    let white = white.ok_or_else(|| StructuredLightError::MalformedLayout {
        reason: "missing white frame".to_string(),
    })?;
    let black = black.ok_or_else(|| StructuredLightError::MalformedLayout {
        reason: "missing black frame".to_string(),
    })?;
    let bit_frames: Vec<(usize, usize)> = bit_frames
        .into_iter()
        .enumerate()
        .map(|(i, (d, inv))| match (d, inv) {
            (Some(d), Some(inv)) => Ok((d, inv)),
            _ => Err(StructuredLightError::MalformedLayout {
                reason: format!("bit plane {i} lacks a direct/inverse frame pair"),
            }),
        })
        .collect::<Result<_, _>>()?;

    let n = width as usize * height as usize;
    let mut codes = vec![None; n];
    let mut contrast = vec![0u8; n];
    for idx in 0..n {
        let w_val = stack[white].data[idx];
        let b_val = stack[black].data[idx];
        let span = w_val.saturating_sub(b_val);
        contrast[idx] = span;
        if span < config.span_threshold {
            continue;
        }
        let mut gray_col = 0u32;
        let mut gray_row = 0u32;
        let mut ok = true;
        for (bit_idx, &(direct, inverse)) in bit_frames.iter().enumerate() {
            let d = stack[direct].data[idx];
            let i = stack[inverse].data[idx];
            if d.abs_diff(i) < config.contrast_threshold {
                ok = false;
                break;
            }
            if d > i {
                if (bit_idx as u32) < col_bits {
                    gray_col |= 1 << bit_idx;
                } else {
                    gray_row |= 1 << (bit_idx as u32 - col_bits);
                }
            }
        }
        if !ok {
            continue;
        }
        let column = gray_decode(gray_col);
        let row = gray_decode(gray_row);
        if column < layout.projector_width && row < layout.projector_height {
            codes[idx] = Some((column, row));
        }
    }

    Ok(CorrespondenceMap {
        width,
        height,
        codes,
        contrast,
    })
}

/// Lifts subpixel camera-frame corners into projector coordinates.
///
/// For each corner, the decodable pixels within a square window of the given
/// radius are used to fit a camera-to-projector homography, and the corner is
/// mapped through it.
pub fn lift_corners(
    map: &CorrespondenceMap,
    corners: &[Point2],
    window_radius: u32,
) -> Result<Vec<Point2>, StructuredLightError> {
    let r = window_radius as i64;
    let mut lifted = Vec::with_capacity(corners.len());
    for (corner_index, corner) in corners.iter().enumerate() {
        let cx = corner.u.round() as i64;
        let cy = corner.v.round() as i64;
        let mut pairs = Vec::new();
        for y in (cy - r).max(0)..=(cy + r).min(map.height() as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(map.width() as i64 - 1) {
                if let Some((pc, pr)) = map.get(x as u32, y as u32) {
                    pairs.push((
                        Point2::new(x as f64, y as f64),
                        Point2::new(pc as f64, pr as f64),
                    ));
                }
            }
        }
        if pairs.len() < MIN_WINDOW_SUPPORT {
            return Err(StructuredLightError::InsufficientSupport {
                corner_index,
                decodable: pairs.len(),
            });
        }
        let h =
            estimate_homography(&pairs).map_err(|_| StructuredLightError::InsufficientSupport {
                corner_index,
                decodable: pairs.len(),
            })?;
        lifted.push(apply_homography(&h, *corner)?);
    }
    Ok(lifted)
}

/// Chessboard corner-grid metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardSpec {
    /// Corner rows.
    pub rows: u32,
    /// Corner columns.
    pub cols: u32,
    /// Corner-to-corner pitch in millimeters.
    pub spacing_mm: f64,
}

impl BoardSpec {
    pub fn corner_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Board width: the x-extent of the corner grid.
    pub fn width_mm(&self) -> f64 {
        (self.cols.saturating_sub(1)) as f64 * self.spacing_mm
    }
}

/// Image-plane size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// Aligned board / camera / projector correspondences for one chessboard
/// pose: entry `i` of each array refers to the same physical corner.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub board: BoardSpec,
    pub camera_dims: ImageDims,
    pub projector_dims: ImageDims,
    /// Corner positions on the board plane (mm).
    pub board_points: Vec<Point2>,
    /// Corner positions as observed by the camera, still distorted (px).
    pub camera_distorted: Vec<Point2>,
    /// Corner positions in the projector frame (px).
    pub projector_points: Vec<Point2>,
}

impl CorrespondenceSet {
    pub fn new(
        board: BoardSpec,
        camera_dims: ImageDims,
        projector_dims: ImageDims,
        board_points: Vec<Point2>,
        camera_distorted: Vec<Point2>,
        projector_points: Vec<Point2>,
    ) -> Result<Self, StructuredLightError> {
        let n = board_points.len();
        if camera_distorted.len() != n || projector_points.len() != n {
            return Err(StructuredLightError::DimensionMismatch {
                reason: format!(
                    "array lengths differ: board {n}, camera {}, projector {}",
                    camera_distorted.len(),
                    projector_points.len()
                ),
            });
        }
        if n != board.corner_count() {
            return Err(StructuredLightError::DimensionMismatch {
                reason: format!(
                    "{n} correspondences for a {}x{} board (expected {})",
                    board.rows,
                    board.cols,
                    board.corner_count()
                ),
            });
        }
        Ok(Self {
            board,
            camera_dims,
            projector_dims,
            board_points,
            camera_distorted,
            projector_points,
        })
    }

    pub fn len(&self) -> usize {
        self.board_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.board_points.is_empty()
    }
}
