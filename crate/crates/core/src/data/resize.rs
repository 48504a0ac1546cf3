use ndarray::{Array3, ArrayView3};

/// Source tap positions and weight for one output coordinate, half-pixel centers,
/// clamped to the edge.
fn taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f32) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, (pos - lo as f64) as f32)
}

/// Bilinear resampling of an H×W×C image to `target_h`×`target_w`.
///
/// Each output value is a convex combination of at most four source values and is
/// clamped to their range, so the output never leaves `[min, max]` of the input.
pub fn resize_bilinear(image: ArrayView3<'_, f32>, target_h: usize, target_w: usize) -> Array3<f32> {
    let (h, w, c) = image.dim();
    assert!(h > 0 && w > 0 && target_h > 0 && target_w > 0, "resize dimensions must be positive");
    if (h, w) == (target_h, target_w) {
        return image.to_owned();
    }
    let cols: Vec<_> = (0..target_w).map(|x| taps(x, w, target_w)).collect();
    let mut out = Array3::zeros((target_h, target_w, c));
    for y in 0..target_h {
        let (y0, y1, fy) = taps(y, h, target_h);
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            for ch in 0..c {
                let a = image[[y0, x0, ch]];
                let b = image[[y0, x1, ch]];
                let p = image[[y1, x0, ch]];
                let q = image[[y1, x1, ch]];
                let top = a * (1.0 - fx) + b * fx;
                let bottom = p * (1.0 - fx) + q * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                let lo = a.min(b).min(p).min(q);
                let hi = a.max(b).max(p).max(q);
                out[[y, x, ch]] = v.clamp(lo, hi);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_to_one_pixel() {
        let img = Array3::from_shape_vec((2, 2, 1), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let out = resize_bilinear(img.view(), 1, 1);
        assert_eq!(out[[0, 0, 0]], 1.5);
    }

    #[test]
    fn identity_size_is_exact() {
        let img = Array3::from_shape_fn((5, 7, 3), |(y, x, c)| ((y * 31 + x * 7 + c) % 13) as f32 / 13.0);
        assert_eq!(resize_bilinear(img.view(), 5, 7), img);
    }

    #[test]
    fn upsample_row() {
        // Half-pixel mapping of 2 → 4: source positions -0.25, 0.25, 0.75, 1.25 (clamped at the ends).
        let img = Array3::from_shape_vec((1, 2, 1), vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(img.view(), 1, 4);
        assert_eq!(out.iter().copied().collect::<Vec<_>>(), vec![0.0, 0.25, 0.75, 1.0]);
    }

    proptest! {
        #[test]
        fn output_within_input_range(
            h in 1usize..9, w in 1usize..9, th in 1usize..12, tw in 1usize..12,
            values in prop::collection::vec(-3.0f32..3.0, 81),
        ) {
            let img = Array3::from_shape_fn((h, w, 1), |(y, x, _)| values[y * 9 + x]);
            let lo = img.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = img.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let out = resize_bilinear(img.view(), th, tw);
            prop_assert_eq!(out.dim(), (th, tw, 1));
            prop_assert!(out.iter().all(|&v| v >= lo && v <= hi));
        }
    }
}
