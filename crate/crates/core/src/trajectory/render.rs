use super::arm::{ArmConfig, Point2};

const OBJECT_INTENSITY: f64 = 0.6;

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + s * dx - p[0], a[1] + s * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

/// Grayscale `H × W` frame (row-major, top row first) of the arm links and
/// the block.
///
/// Links are drawn as one-pixel anti-aliased strokes and the block as a
/// filled disc, so pixel values vary continuously with the joint angles, the
/// block position and its size. `object_size = 0` draws no block.
pub fn render_sensory(arm: &ArmConfig, joint_angles: &[f64], target: Point2, object_size: f64) -> Vec<f32> {
    let (h, w) = (arm.height, arm.width);
    let (x0, y0, sx, sy) = arm.view_box();
    let to_px = |p: Point2| -> Point2 {
        [(p[0] - x0) / sx * w as f64, (y0 + sy - p[1]) / sy * h as f64]
    };
    let joints: Vec<Point2> = arm.joint_positions(joint_angles).into_iter().map(to_px).collect();
    let center = to_px(target);
    // Radius in pixels, measured along the horizontal axis.
    let radius = object_size.max(0.0) / sx * w as f64;
    let fade = radius.min(1.0);

    let mut img = vec![0.0f32; h * w];
    for r in 0..h {
        for c in 0..w {
            let p = [c as f64 + 0.5, r as f64 + 0.5];
            let mut v: f64 = 0.0;
            for seg in joints.windows(2) {
                v = v.max((1.0 - segment_distance(p, seg[0], seg[1])).clamp(0.0, 1.0));
            }
            if fade > 0.0 {
                let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
                let cover = (radius + 0.5 - d).clamp(0.0, 1.0) * fade;
                v = v.max(OBJECT_INTENSITY * cover);
            }
            img[r * w + c] = v as f32;
        }
    }
    img
}
