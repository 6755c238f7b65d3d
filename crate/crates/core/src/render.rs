//! Scene rasters with per-object brightness driven by a posterior.

use crate::model::Environment;
use crate::pnm::RgbImage;
use crate::synth::scene_blocks;

const BACKGROUND: [u8; 3] = [30, 30, 30];
/// Brightness of the least likely object relative to its true colour.
pub const DIM_FLOOR: f64 = 0.2;

/// Paints every block; with `probs`, each block's colour is scaled by
/// `DIM_FLOOR + (1 - DIM_FLOOR) * p / p_max`.
pub fn render_scene(env: &Environment, probs: Option<&[f64]>, width: usize, height: usize) -> RgbImage {
    let mut img = RgbImage::new(width, height, BACKGROUND);
    let p_max = probs
        .map(|p| p.iter().copied().fold(0.0f64, f64::max))
        .unwrap_or(1.0);
    for (o, b) in scene_blocks(env).iter().enumerate() {
        let gain = match probs {
            Some(p) if p_max > 0.0 => DIM_FLOOR + (1.0 - DIM_FLOOR) * p[o] / p_max,
            _ => 1.0,
        };
        let rgb = b.rgb.map(|c| (c as f64 * gain).round().clamp(0.0, 255.0) as u8);
        let x0 = (b.x * width as f64).round().max(0.0) as usize;
        let y0 = (b.y * height as f64).round().max(0.0) as usize;
        let x1 = (((b.x + b.width) * width as f64).round() as usize).min(width);
        let y1 = (((b.y + b.height) * height as f64).round() as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                img.put(x, y, rgb);
            }
        }
    }
    img
}
