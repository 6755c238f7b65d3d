//! Per-object perceptual measurements and their per-symbol encodings.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::lexicon::{Channel, Lexicon};
use crate::pnm::{GrayImage, RgbImage};
use crate::{Error, Result};

/// Pixels at or below this saturation carry no usable hue.
pub const HUE_SATURATION_FLOOR: f64 = 0.05;
/// Histogram resolution for the lightness mode.
pub const LIGHT_BINS: usize = 32;
const ZERO_STD: f64 = 1e-9;

/// The seven raw channels of one object, all relative to the image extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub x_pos: f64,
    pub y_pos: f64,
    pub width: f64,
    pub height: f64,
    pub size: f64,
    /// Circular mean hue in turns.
    pub hue: f64,
    pub light: f64,
    /// No pixel was saturated enough to define a hue; `hue` is then 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub achromatic: bool,
}

impl RawFeatures {
    pub fn channel(&self, c: Channel) -> f64 {
        match c {
            Channel::XPos => self.x_pos,
            Channel::YPos => self.y_pos,
            Channel::Width => self.width,
            Channel::Height => self.height,
            Channel::Size => self.size,
            Channel::Hue => self.hue,
            Channel::Light => self.light,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for c in Channel::ALL {
            let v = self.channel(c);
            if !v.is_finite() {
                return Err(format!("{} is not finite", c.name()));
            }
            let ok = match c {
                Channel::XPos | Channel::YPos | Channel::Light => (0.0..=1.0).contains(&v),
                Channel::Width | Channel::Height | Channel::Size => v > 0.0 && v <= 1.0,
                Channel::Hue => (0.0..1.0).contains(&v),
            };
            if !ok {
                return Err(format!("{} = {v} out of range", c.name()));
            }
        }
        Ok(())
    }
}

/// Hexcone HSL. Hue is in turns, zero for achromatic input.
pub fn rgb_to_hsl(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let r = r as f64 / 255.0;
    let g = g as f64 / 255.0;
    let b = b as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let light = (max + min) / 2.0;
    let delta = max - min;
    if delta == 0.0 {
        return (0.0, 0.0, light);
    }
    let sat = delta / (1.0 - (2.0 * light - 1.0).abs());
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut hue = sector / 6.0;
    if hue >= 1.0 {
        hue -= 1.0;
    }
    (hue, sat.min(1.0), light)
}

pub fn hsl_to_rgb(hue: f64, sat: f64, light: f64) -> [u8; 3] {
    let c = (1.0 - (2.0 * light - 1.0).abs()) * sat;
    let hp = hue.rem_euclid(1.0) * 6.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = light - c / 2.0;
    let q = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Measures the cluster labelled `object_id` in `mask`.
pub fn extract_cluster_features(
    image: &RgbImage,
    mask: &GrayImage,
    object_id: u8,
) -> Result<RawFeatures> {
    if image.width != mask.width || image.height != mask.height {
        return Err(Error::RasterMismatch(
            image.width,
            image.height,
            mask.width,
            mask.height,
        ));
    }
    let total = image.width * image.height;
    if total == 0 {
        return Err(Error::EmptyImage);
    }
    if object_id == 0 {
        return Err(Error::ObjectNotFound(0));
    }

    let mut count = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (usize::MAX, 0, usize::MAX, 0);
    let (mut hc, mut hs, mut chromatic) = (0.0, 0.0, 0usize);
    let mut hist = [0usize; LIGHT_BINS];

    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) != object_id {
                continue;
            }
            count += 1;
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);

            let [r, g, b] = image.get(x, y);
            let (h, s, l) = rgb_to_hsl(r, g, b);
            if s > HUE_SATURATION_FLOOR {
                hc += (TAU * h).cos();
                hs += (TAU * h).sin();
                chromatic += 1;
            }
            let bin = ((l * LIGHT_BINS as f64) as usize).min(LIGHT_BINS - 1);
            hist[bin] += 1;
        }
    }
    if count == 0 {
        return Err(Error::ObjectNotFound(object_id as u32));
    }

    let (hue, achromatic) = if chromatic == 0 {
        (0.0, true)
    } else {
        let mut h = hs.atan2(hc) / TAU;
        if h < 0.0 {
            h += 1.0;
        }
        if h >= 1.0 {
            h = 0.0;
        }
        (h, false)
    };
    // first maximum wins, so ties go to the lower bin
    let mut mode = 0;
    for (i, &n) in hist.iter().enumerate() {
        if n > hist[mode] {
            mode = i;
        }
    }

    let w = image.width as f64;
    let h = image.height as f64;
    Ok(RawFeatures {
        x_pos: sx / count as f64 / w,
        y_pos: sy / count as f64 / h,
        width: (max_x - min_x + 1) as f64 / w,
        height: (max_y - min_y + 1) as f64 / h,
        size: count as f64 / total as f64,
        hue,
        light: (mode as f64 + 0.5) / LIGHT_BINS as f64,
        achromatic,
    })
}

/// Extracts every labelled cluster in the mask, ordered by label.
pub fn extract_all(image: &RgbImage, mask: &GrayImage) -> Result<Vec<(u8, RawFeatures)>> {
    let mut present = [false; 256];
    for &v in &mask.data {
        present[v as usize] = true;
    }
    (1..=255u8)
        .filter(|&id| present[id as usize])
        .map(|id| extract_cluster_features(image, mask, id).map(|f| (id, f)))
        .collect()
}

/// Per-channel mean and population standard deviation over one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStats {
    mean: [f64; 7],
    std: [f64; 7],
}

impl EnvStats {
    pub fn mean(&self, c: Channel) -> f64 {
        self.mean[c as usize]
    }

    pub fn std(&self, c: Channel) -> f64 {
        self.std[c as usize]
    }

    /// Standardized value, zero when the channel is (numerically) constant.
    pub fn zscore(&self, c: Channel, v: f64) -> f64 {
        let s = self.std(c);
        if s < ZERO_STD {
            0.0
        } else {
            (v - self.mean(c)) / s
        }
    }
}

/// Hue is left out; its encoding needs no context.
pub fn compute_env_stats(objects: &[RawFeatures]) -> EnvStats {
    assert!(!objects.is_empty(), "environment statistics need an object");
    let n = objects.len() as f64;
    let mut mean = [0.0; 7];
    let mut std = [0.0; 7];
    for c in Channel::SCALAR {
        let m = objects.iter().map(|o| o.channel(c)).sum::<f64>() / n;
        let var = objects
            .iter()
            .map(|o| (o.channel(c) - m).powi(2))
            .sum::<f64>()
            / n;
        mean[c as usize] = m;
        std[c as usize] = var.sqrt();
    }
    EnvStats { mean, std }
}

/// Writes the feature vector of symbol `sym` into `out` (length `lex.dim(sym)`).
///
/// Scalar channels emit `[raw, zscore]`. Hue emits the unit phasor
/// `[cos 2πh, sin 2πh]`, or `[0, 0]` for achromatic objects.
pub fn write_symbol_features(
    lex: &Lexicon,
    sym: usize,
    raw: &RawFeatures,
    stats: &EnvStats,
    out: &mut [f64],
) {
    let mut k = 0;
    for &c in lex.channels(sym) {
        match c {
            Channel::Hue => {
                if raw.achromatic {
                    out[k] = 0.0;
                    out[k + 1] = 0.0;
                } else {
                    out[k] = (TAU * raw.hue).cos();
                    out[k + 1] = (TAU * raw.hue).sin();
                }
            }
            _ => {
                let v = raw.channel(c);
                out[k] = v;
                out[k + 1] = stats.zscore(c, v);
            }
        }
        k += c.encoded_dim();
    }
}

pub fn symbol_features(lex: &Lexicon, sym: usize, raw: &RawFeatures, stats: &EnvStats) -> Vec<f64> {
    let mut out = vec![0.0; lex.dim(sym)];
    write_symbol_features(lex, sym, raw, stats, &mut out);
    out
}
