use ndarray::{Array3, ArrayView3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Result};

/// Uniform sampling ranges for the five augmentation attributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    /// Rotation angle range in degrees.
    pub rotation_degrees: (f64, f64),
    pub hue_shift_turns: (f64, f64),
    pub saturation_factor: (f64, f64),
    pub contrast_factor: (f64, f64),
    pub sharpness_factor: (f64, f64),
}

impl Default for AugmentationParams {
    fn default() -> Self {
        Self {
            rotation_degrees: (-30.0, 30.0),
            hue_shift_turns: (-0.1, 0.1),
            saturation_factor: (0.5, 1.5),
            contrast_factor: (0.5, 1.5),
            sharpness_factor: (0.5, 1.5),
        }
    }
}

impl AugmentationParams {
    /// Parameters that leave every image unchanged.
    pub fn identity() -> Self {
        Self {
            rotation_degrees: (0.0, 0.0),
            hue_shift_turns: (0.0, 0.0),
            saturation_factor: (1.0, 1.0),
            contrast_factor: (1.0, 1.0),
            sharpness_factor: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rotation_degrees", self.rotation_degrees),
            ("hue_shift_turns", self.hue_shift_turns),
            ("saturation_factor", self.saturation_factor),
            ("contrast_factor", self.contrast_factor),
            ("sharpness_factor", self.sharpness_factor),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(DataError::InvalidParams(format!("{name} range ({lo}, {hi}) is not ordered")));
            }
        }
        for (name, (lo, _)) in &ranges[2..] {
            if *lo <= 0.0 {
                return Err(DataError::InvalidParams(format!("{name} must be positive")));
            }
        }
        let (lo, hi) = self.hue_shift_turns;
        if lo < -0.5 || hi > 0.5 {
            return Err(DataError::InvalidParams("hue shift must lie in [-0.5, 0.5] turns".into()));
        }
        Ok(())
    }

    /// Draw one concrete augmentation. Attributes are drawn in application order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledAugmentation {
        let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        SampledAugmentation {
            rotation_degrees: draw(self.rotation_degrees),
            hue_shift_turns: draw(self.hue_shift_turns),
            saturation_factor: draw(self.saturation_factor),
            contrast_factor: draw(self.contrast_factor),
            sharpness_factor: draw(self.sharpness_factor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAugmentation {
    pub rotation_degrees: f64,
    pub hue_shift_turns: f64,
    pub saturation_factor: f64,
    pub contrast_factor: f64,
    pub sharpness_factor: f64,
}

impl SampledAugmentation {
    /// rotate → hue → saturation → contrast → sharpness, then clamp to [0, 1].
    pub fn apply(&self, image: ArrayView3<'_, f32>) -> Result<Array3<f32>> {
        let channels = image.dim().2;
        if channels != 3 {
            return Err(DataError::NotRgb { channels });
        }
        let mut img = rotate(image, self.rotation_degrees);
        shift_hue_and_saturation(&mut img, self.hue_shift_turns, self.saturation_factor);
        adjust_contrast(&mut img, self.contrast_factor);
        let mut img = adjust_sharpness(&img, self.sharpness_factor);
        img.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Ok(img)
    }
}

/// Apply a randomly drawn augmentation to an RGB image.
pub fn augment<R: Rng + ?Sized>(image: ArrayView3<'_, f32>, params: &AugmentationParams, rng: &mut R) -> Result<Array3<f32>> {
    params.validate()?;
    params.sample(rng).apply(image)
}

/// Rotation about the image center with bilinear sampling; taps outside the image read zero.
fn rotate(image: ArrayView3<'_, f32>, degrees: f64) -> Array3<f32> {
    if degrees == 0.0 {
        return image.to_owned();
    }
    let (h, w, c) = image.dim();
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let fetch = |y: i64, x: i64, ch: usize| -> f64 {
        if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
            0.0
        } else {
            image[[y as usize, x as usize, ch]] as f64
        }
    };
    let mut out = Array3::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            // Inverse map: rotate the destination point back by -angle.
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            for ch in 0..c {
                let top = fetch(y0, x0, ch) * (1.0 - fx) + fetch(y0, x0 + 1, ch) * fx;
                let bottom = fetch(y0 + 1, x0, ch) * (1.0 - fx) + fetch(y0 + 1, x0 + 1, ch) * fx;
                out[[y, x, ch]] = (top * (1.0 - fy) + bottom * fy) as f32;
            }
        }
    }
    out
}

/// RGB in [0,1] to (hue in turns [0,1), saturation, value).
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue, sat, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    if s == 0.0 {
        return (v, v, v);
    }
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u8 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn shift_hue_and_saturation(img: &mut Array3<f32>, hue_shift: f64, saturation: f64) {
    let (h, w, _) = img.dim();
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = (img[[y, x, 0]] as f64, img[[y, x, 1]] as f64, img[[y, x, 2]] as f64);
            let (hue, sat, val) = rgb_to_hsv(r, g, b);
            let (r, g, b) = hsv_to_rgb(hue + hue_shift, (sat * saturation).clamp(0.0, 1.0), val);
            img[[y, x, 0]] = r as f32;
            img[[y, x, 1]] = g as f32;
            img[[y, x, 2]] = b as f32;
        }
    }
}

/// Blend toward the mean intensity of the whole image.
fn adjust_contrast(img: &mut Array3<f32>, factor: f64) {
    if factor == 1.0 {
        return;
    }
    let mean = img.iter().map(|&v| v as f64).sum::<f64>() / img.len() as f64;
    img.mapv_inplace(|v| (factor * v as f64 + (1.0 - factor) * mean) as f32);
}

/// Per-channel 3×3 mean filter with edge replication.
pub fn box_blur3(img: ArrayView3<'_, f32>) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let mut out = Array3::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0f64;
                for dy in [-1i64, 0, 1] {
                    for dx in [-1i64, 0, 1] {
                        let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        acc += img[[yy, xx, ch]] as f64;
                    }
                }
                out[[y, x, ch]] = (acc / 9.0) as f32;
            }
        }
    }
    out
}

/// factor 1 keeps the image, 0 gives the blurred image, above 1 sharpens.
fn adjust_sharpness(img: &Array3<f32>, factor: f64) -> Array3<f32> {
    if factor == 1.0 {
        return img.clone();
    }
    let blurred = box_blur3(img.view());
    let mut out = img.clone();
    ndarray::Zip::from(&mut out)
        .and(&blurred)
        .for_each(|o, &b| *o = (factor * *o as f64 + (1.0 - factor) * b as f64) as f32);
    out
}
