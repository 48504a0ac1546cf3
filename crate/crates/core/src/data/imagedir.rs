use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage};
use ndarray::{Array3, Array4, Axis};

use super::{resize_bilinear, DataError, LabeledImageSet, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectoryLoadReport {
    /// Single-channel (with or without alpha) images dropped by the RGB filter.
    pub skipped_non_rgb: usize,
    pub per_class: Vec<(String, usize)>,
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

fn is_gray(color: ColorType) -> bool {
    matches!(color, ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16)
}

fn to_array(img: &DynamicImage) -> Array3<f32> {
    let rgb = img.to_rgb32f();
    let (w, h) = rgb.dimensions();
    Array3::from_shape_vec((h as usize, w as usize, 3), rgb.into_raw()).expect("RGB buffer is h*w*3")
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    Ok(entries)
}

/// Load a class-per-subdirectory tree of PNG/JPEG files as RGB.
///
/// Classes are the subdirectory names in lexicographic order. With `drop_non_rgb`,
/// grayscale files are skipped and counted; otherwise they are replicated to RGB.
/// Images are resampled to `target` when given and must otherwise share one size.
pub fn load_image_directory(
    root: impl AsRef<Path>,
    drop_non_rgb: bool,
    target: Option<(usize, usize)>,
) -> Result<(LabeledImageSet, DirectoryLoadReport)> {
    let root = root.as_ref();
    let mut report = DirectoryLoadReport::default();
    let mut class_names = Vec::new();
    let mut images: Vec<Array3<f32>> = Vec::new();
    let mut labels = Vec::new();

    for class_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let name = class_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let class = class_names.len();
        let mut kept = 0;
        for file in sorted_entries(&class_dir)?.into_iter().filter(|p| p.is_file() && is_image_file(p)) {
            let img = image::open(&file)?;
            if drop_non_rgb && is_gray(img.color()) {
                report.skipped_non_rgb += 1;
                continue;
            }
            let mut arr = to_array(&img);
            if let Some((th, tw)) = target {
                arr = resize_bilinear(arr.view(), th, tw);
            }
            if let Some(first) = images.first() {
                if first.dim() != arr.dim() {
                    return Err(DataError::InvalidShape(format!(
                        "{} is {:?}, expected {:?}; pass a target size",
                        file.display(),
                        arr.dim(),
                        first.dim()
                    )));
                }
            }
            images.push(arr);
            labels.push(class);
            kept += 1;
        }
        if kept == 0 {
            return Err(DataError::EmptyClass(name));
        }
        report.per_class.push((name.clone(), kept));
        class_names.push(name);
    }
    if images.is_empty() {
        return Err(DataError::InvalidShape(format!("{} holds no class directories", root.display())));
    }
    let views: Vec<_> = images.iter().map(|a| a.view().insert_axis(Axis(0))).collect();
    let stacked: Array4<f32> = ndarray::concatenate(Axis(0), &views).expect("shapes checked above");
    let stacked = stacked.mapv(|v| v.clamp(0.0, 1.0));
    let id = root.file_name().and_then(|n| n.to_str()).unwrap_or("images").to_string();
    Ok((LabeledImageSet::new(id, stacked, labels, class_names)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, RgbImage};

    fn rgb(path: &Path, w: u32, h: u32, v: u8) {
        RgbImage::from_pixel(w, h, image::Rgb([v, 0, 255 - v])).save(path).unwrap();
    }

    #[test]
    fn two_classes() {
        let dir = tempfile::tempdir().unwrap();
        for (class, v) in [("b_dog", 10u8), ("a_cat", 200)] {
            fs::create_dir(dir.path().join(class)).unwrap();
            rgb(&dir.path().join(class).join("0.png"), 4, 3, v);
        }
        let (set, report) = load_image_directory(dir.path(), false, None).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.class_names(), &["a_cat".to_string(), "b_dog".to_string()]);
        assert_eq!((set.height(), set.width(), set.channels()), (3, 4, 3));
        assert_eq!(set.labels(), &[0, 1]);
        assert!((set.pixel(0, 0, 0, 0) - 200.0 / 255.0).abs() < 1e-6);
        assert_eq!(report.skipped_non_rgb, 0);
    }

    #[test]
    fn grayscale_filtering() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("a")).unwrap();
        rgb(&dir.path().join("a").join("0.png"), 2, 2, 5);
        GrayImage::from_pixel(2, 2, image::Luma([9])).save(dir.path().join("a").join("1.png")).unwrap();

        let (set, report) = load_image_directory(dir.path(), true, None).unwrap();
        assert_eq!((set.len(), report.skipped_non_rgb), (1, 1));

        let (set, _) = load_image_directory(dir.path(), false, None).unwrap();
        assert_eq!(set.len(), 2);

        fs::create_dir(dir.path().join("b")).unwrap();
        GrayImage::from_pixel(2, 2, image::Luma([9])).save(dir.path().join("b").join("0.png")).unwrap();
        assert!(matches!(load_image_directory(dir.path(), true, None), Err(DataError::EmptyClass(c)) if c == "b"));
    }

    #[test]
    fn mixed_sizes_need_target() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("a")).unwrap();
        rgb(&dir.path().join("a").join("0.png"), 2, 2, 5);
        rgb(&dir.path().join("a").join("1.png"), 3, 5, 5);
        assert!(matches!(load_image_directory(dir.path(), false, None), Err(DataError::InvalidShape(_))));
        let (set, _) = load_image_directory(dir.path(), false, Some((8, 8))).unwrap();
        assert_eq!((set.height(), set.width()), (8, 8));
    }
}
