use super::{ActionableFlow, FlowError};
use crate::geometry::CameraIntrinsics;
use crate::pnm::RgbImage;

const EARLY: [f64; 3] = [0.0, 0.0, 255.0];
const LATE: [f64; 3] = [255.0, 0.0, 0.0];

fn ramp(s: f64) -> [u8; 3] {
    let s = s.clamp(0.0, 1.0);
    let mix = |i: usize| (EARLY[i] + (LATE[i] - EARLY[i]) * s).round() as u8;
    [mix(0), mix(1), mix(2)]
}

/// Draws every keypoint trajectory as a polyline over `background`, blue at
/// the first frame fading to red at the last. With `id` set, the number is
/// stamped in the top-left corner.
pub fn render_flow_image(
    flow: &ActionableFlow,
    intr: &CameraIntrinsics,
    background: &RgbImage,
    id: Option<u32>,
) -> Result<RgbImage, FlowError> {
    if background.width != intr.width || background.height != intr.height {
        return Err(FlowError::Shape(format!(
            "background is {}x{}, camera is {}x{}",
            background.width, background.height, intr.width, intr.height
        )));
    }
    let mut img = background.clone();
    let last = (flow.frames.max(2) - 1) as f64;
    for k in 0..flow.keypoints {
        let pix: Vec<Option<(f64, f64)>> = (0..flow.frames)
            .map(|t| intr.project(flow.position(t, k)).ok())
            .collect();
        if flow.frames == 1 {
            if let Some((u, v)) = pix[0] {
                img.put(u.floor() as i64, v.floor() as i64, ramp(0.0));
            }
            continue;
        }
        for t in 0..flow.frames - 1 {
            if let (Some(a), Some(b)) = (pix[t], pix[t + 1]) {
                draw_line(
                    &mut img,
                    a,
                    b,
                    ramp(t as f64 / last),
                    ramp((t + 1) as f64 / last),
                );
            }
        }
    }
    if let Some(id) = id {
        draw_label(&mut img, &id.to_string(), 4, 4, 2);
    }
    Ok(img)
}

/// Bresenham line with per-pixel colour interpolation.
fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), ca: [u8; 3], cb: [u8; 3]) {
    // Guard against far off-screen endpoints blowing up the step count.
    let lim = 4.0 * (img.width.max(img.height) as f64);
    let clampf = |x: f64| x.clamp(-lim, lim);
    let (mut x0, mut y0) = (clampf(a.0).floor() as i64, clampf(a.1).floor() as i64);
    let (x1, y1) = (clampf(b.0).floor() as i64, clampf(b.1).floor() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let total = dx.max(-dy).max(1) as f64;
    let mut err = dx + dy;
    let mut step = 0.0;
    loop {
        let s = step / total;
        let c = [0, 1, 2].map(|i| (ca[i] as f64 + (cb[i] as f64 - ca[i] as f64) * s).round() as u8);
        img.put(x0, y0, c);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
        step += 1.0;
    }
}

// 3x5 bitmap digits, one row per entry, bit 2 = leftmost column.
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];

fn draw_label(img: &mut RgbImage, text: &str, x: i64, y: i64, scale: i64) {
    let glyph_w = 4 * scale;
    // dark backing box so the digits read on any background
    let w = glyph_w * text.len() as i64 + scale;
    for yy in y - scale..y + 6 * scale {
        for xx in x - scale..x + w {
            img.put(xx, yy, [0, 0, 0]);
        }
    }
    for (n, ch) in text.chars().enumerate() {
        let Some(d) = ch.to_digit(10) else { continue };
        let ox = x + n as i64 * glyph_w;
        for (row, bits) in DIGITS[d as usize].iter().enumerate() {
            for col in 0..3 {
                if bits & (4 >> col) != 0 {
                    for py in 0..scale {
                        for px in 0..scale {
                            img.put(
                                ox + col * scale + px,
                                y + row as i64 * scale + py,
                                [255, 255, 255],
                            );
                        }
                    }
                }
            }
        }
    }
}
