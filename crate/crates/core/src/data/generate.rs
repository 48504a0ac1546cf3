//! Synthetic datasets: maximum-entropy noise, augmented replicas, and separable blobs.

use ndarray::{Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{default_class_names, AugmentationParams, DataError, LabeledImageSet, Result};

const GAUSSIAN_MEAN: f64 = 0.5;
const GAUSSIAN_STD: f64 = 0.25;

// Independent ChaCha streams so label draws do not depend on the image shape.
const PIXEL_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct GaussianDataset {
    pub set: LabeledImageSet,
    /// How many times the label vector was redrawn because a class came up empty.
    pub label_retries: usize,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_shape(n: usize, h: usize, w: usize, c: usize, classes: usize) -> Result<()> {
    if n == 0 || h == 0 || w == 0 || classes == 0 {
        return Err(DataError::InvalidShape(format!("n={n} h={h} w={w} classes={classes}")));
    }
    if c != 1 && c != 3 {
        return Err(DataError::InvalidShape(format!("{c} channels, expected 1 or 3")));
    }
    if n < classes {
        return Err(DataError::InvalidShape(format!("{n} samples cannot cover {classes} classes")));
    }
    Ok(())
}

/// Pixels drawn independently per channel from Normal(0.5, 0.25) clamped to [0, 1];
/// labels drawn uniformly, redrawn whole until every class occurs.
pub fn generate_gaussian(
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    num_classes: usize,
    seed: u64,
) -> Result<GaussianDataset> {
    check_shape(n, h, w, c, num_classes)?;
    let normal = Normal::new(GAUSSIAN_MEAN, GAUSSIAN_STD).expect("constant parameters are valid");
    let mut pixels = stream(seed, PIXEL_STREAM);
    let images = Array4::from_shape_simple_fn((n, h, w, c), || normal.sample(&mut pixels).clamp(0.0, 1.0) as f32);

    let mut label_rng = stream(seed, LABEL_STREAM);
    let mut label_retries = 0;
    let labels = loop {
        let labels: Vec<usize> = (0..n).map(|_| label_rng.random_range(0..num_classes)).collect();
        let mut seen = vec![false; num_classes];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            break labels;
        }
        label_retries += 1;
    };
    let set = LabeledImageSet::new(format!("gaussian-{seed}"), images, labels, default_class_names(num_classes))?;
    Ok(GaussianDataset { set, label_retries })
}

/// `n_per_class` independently augmented copies of each class's single source image.
///
/// Output is grouped by class in source order.
pub fn generate_replicated(
    source: &LabeledImageSet,
    n_per_class: usize,
    params: &AugmentationParams,
    seed: u64,
) -> Result<LabeledImageSet> {
    params.validate()?;
    if n_per_class == 0 {
        return Err(DataError::InvalidShape("n_per_class must be positive".into()));
    }
    if source.class_counts().iter().any(|&c| c != 1) {
        return Err(DataError::InvalidShape("replication source must hold exactly one image per class".into()));
    }
    let channels = source.channels();
    if channels != 3 {
        return Err(DataError::NotRgb { channels });
    }
    let classes = source.num_classes();
    let (h, w) = (source.height(), source.width());
    let mut images = Array4::zeros((classes * n_per_class, h, w, channels));
    let mut labels = Vec::with_capacity(classes * n_per_class);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = 0;
    for class in 0..classes {
        let src = source.labels().iter().position(|&l| l == class).expect("each class present once");
        let image = source.image(src);
        for _ in 0..n_per_class {
            let aug = params.sample(&mut rng).apply(image)?;
            images.index_axis_mut(Axis(0), row).assign(&aug);
            labels.push(class);
            row += 1;
        }
    }
    LabeledImageSet::new(format!("{}-replicated", source.id()), images, labels, source.class_names().to_vec())
}

/// Class `k` of `C` centered on the constant image `(k + 0.5) / C` with isotropic
/// Gaussian noise of standard deviation `spread`, clamped to [0, 1].
///
/// Every pixel separates the class means by `1 / C`, so for `spread` well below
/// `1 / (2C)` each single feature orders the classes without overlap.
pub fn generate_blobs(
    n_per_class: usize,
    h: usize,
    w: usize,
    c: usize,
    num_classes: usize,
    spread: f64,
    seed: u64,
) -> Result<LabeledImageSet> {
    check_shape(n_per_class * num_classes, h, w, c, num_classes)?;
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(DataError::InvalidParams(format!("spread {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * num_classes;
    let mut images = Array4::zeros((n, h, w, c));
    let labels: Vec<usize> = (0..n).map(|i| i / n_per_class).collect();
    for (mut img, &label) in images.axis_iter_mut(Axis(0)).zip(&labels) {
        let center = (label as f64 + 0.5) / num_classes as f64;
        let noise = Normal::new(center, spread).expect("spread checked above");
        img.mapv_inplace(|_| noise.sample(&mut rng).clamp(0.0, 1.0) as f32);
    }
    LabeledImageSet::new(format!("blobs-{seed}"), images, labels, default_class_names(num_classes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_deterministic() {
        let a = generate_gaussian(50, 4, 4, 3, 5, 3).unwrap();
        let b = generate_gaussian(50, 4, 4, 3, 5, 3).unwrap();
        assert_eq!(a.set, b.set);
        let c = generate_gaussian(50, 4, 4, 3, 5, 4).unwrap();
        assert_ne!(a.set, c.set);
    }

    #[test]
    fn gaussian_statistics() {
        let g = generate_gaussian(10_000, 2, 2, 3, 10, 17).unwrap();
        let mean = g.set.images().iter().map(|&v| v as f64).sum::<f64>() / g.set.images().len() as f64;
        assert!((0.48..=0.52).contains(&mean), "mean {mean}");
        for count in g.set.class_counts() {
            assert!((1000usize.abs_diff(count)) <= 105, "count {count}");
        }
        assert_eq!(g.label_retries, 0);
    }

    #[test]
    fn gaussian_mean_matches_direct_simulation() {
        // Independent oracle: Box-Muller from a plain uniform stream, clamped the same way.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut total = 0.0;
        let draws = 120_000;
        for _ in 0..draws / 2 {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            total += (0.5 + 0.25 * r * c).clamp(0.0, 1.0) + (0.5 + 0.25 * r * s).clamp(0.0, 1.0);
        }
        let oracle = total / draws as f64;
        let g = generate_gaussian(10_000, 2, 2, 3, 10, 5).unwrap();
        let mean = g.set.images().iter().map(|&v| v as f64).sum::<f64>() / g.set.images().len() as f64;
        assert!((mean - oracle).abs() < 0.005, "generator {mean} vs simulation {oracle}");
    }

    #[test]
    fn gaussian_retries_until_all_classes_present() {
        // 3 samples over 3 classes: the first draw rarely covers all classes.
        let retries: usize = (0..20).map(|s| generate_gaussian(3, 1, 1, 1, 3, s).unwrap().label_retries).sum();
        assert!(retries > 0);
        for s in 0..20 {
            let g = generate_gaussian(3, 1, 1, 1, 3, s).unwrap();
            assert_eq!(g.set.class_counts(), vec![1, 1, 1]);
        }
    }

    #[test]
    fn gaussian_shape_errors() {
        assert!(matches!(generate_gaussian(10, 0, 4, 1, 2, 0), Err(DataError::InvalidShape(_))));
        assert!(matches!(generate_gaussian(1, 4, 4, 1, 2, 0), Err(DataError::InvalidShape(_))));
    }

    fn sources() -> LabeledImageSet {
        let images = Array4::from_shape_fn((3, 6, 6, 3), |(i, y, x, c)| ((i * 5 + y * 3 + x + c * 2) % 9) as f32 / 8.0);
        LabeledImageSet::new("src", images, vec![2, 0, 1], default_class_names(3)).unwrap()
    }

    #[test]
    fn replicated_counts_and_determinism() {
        let src = sources();
        let a = generate_replicated(&src, 4, &AugmentationParams::default(), 1).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(a.class_counts(), vec![4, 4, 4]);
        let b = generate_replicated(&src, 4, &AugmentationParams::default(), 1).unwrap();
        assert_eq!(a, b);
        // Augmented copies differ from one another.
        assert_ne!(a.image(0), a.image(1));
    }

    #[test]
    fn replicated_identity_is_source() {
        let src = sources();
        let out = generate_replicated(&src, 1, &AugmentationParams::identity(), 0).unwrap();
        for class in 0..3 {
            let s = src.labels().iter().position(|&l| l == class).unwrap();
            let diff = out
                .image(class)
                .iter()
                .zip(src.image(s).iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(diff <= 1e-6);
        }
    }

    #[test]
    fn replicated_requires_one_per_class() {
        let images = Array4::zeros((3, 2, 2, 3));
        let src = LabeledImageSet::new("s", images, vec![0, 0, 1], default_class_names(2)).unwrap();
        assert!(generate_replicated(&src, 2, &AugmentationParams::default(), 0).is_err());
    }

    #[test]
    fn blobs_are_separated_per_pixel() {
        let set = generate_blobs(20, 4, 4, 3, 10, 0.005, 2).unwrap();
        assert_eq!(set.class_counts(), vec![20; 10]);
        let flat = set.flattened();
        for f in 0..flat.ncols() {
            for a in 0..set.len() {
                for b in 0..set.len() {
                    if set.labels()[a] < set.labels()[b] {
                        assert!(flat[[a, f]] < flat[[b, f]]);
                    }
                }
            }
        }
    }
}
