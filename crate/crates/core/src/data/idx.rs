use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array4;

use super::{default_class_names, DataError, LabeledImageSet, Result};

const DTYPE_U8: u8 = 0x08;
const DTYPE_F32: u8 = 0x0D;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

/// An n-dimensional array in IDX layout: big-endian u32 dims, row-major data.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: IdxData,
}

impl IdxArray {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_idx<R: Read>(mut reader: R) -> Result<IdxArray> {
    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| DataError::MalformedHeader("file shorter than the 4-byte magic".into()))?;
    if magic[0] != 0 || magic[1] != 0 {
        return Err(DataError::MalformedHeader(format!("magic must start with two zero bytes, got {magic:02x?}")));
    }
    let dtype = magic[2];
    let ndims = magic[3] as usize;
    if ndims == 0 {
        return Err(DataError::MalformedHeader("zero dimensions".into()));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let mut b = [0u8; 4];
        reader
            .read_exact(&mut b)
            .map_err(|_| DataError::MalformedHeader("truncated dimension list".into()))?;
        dims.push(u32::from_be_bytes(b) as usize);
    }
    let count: usize = dims.iter().product();
    let data = match dtype {
        DTYPE_U8 => {
            let mut buf = vec![0u8; count];
            reader
                .read_exact(&mut buf)
                .map_err(|_| DataError::MalformedHeader(format!("expected {count} data bytes")))?;
            IdxData::U8(buf)
        }
        DTYPE_F32 => {
            let mut buf = vec![0u8; count * 4];
            reader
                .read_exact(&mut buf)
                .map_err(|_| DataError::MalformedHeader(format!("expected {} data bytes", count * 4)))?;
            IdxData::F32(buf.chunks_exact(4).map(|b| f32::from_be_bytes([b[0], b[1], b[2], b[3]])).collect())
        }
        other => return Err(DataError::MalformedHeader(format!("unsupported dtype code 0x{other:02x}"))),
    };
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(DataError::MalformedHeader("trailing bytes after data".into()));
    }
    Ok(IdxArray { dims, data })
}

pub fn write_idx<W: Write>(mut writer: W, array: &IdxArray) -> Result<()> {
    let (dtype, len) = match &array.data {
        IdxData::U8(v) => (DTYPE_U8, v.len()),
        IdxData::F32(v) => (DTYPE_F32, v.len()),
    };
    if len != array.len() || array.dims.is_empty() || array.dims.len() > 255 {
        return Err(DataError::MalformedHeader(format!("dims {:?} do not describe {len} values", array.dims)));
    }
    writer.write_all(&[0, 0, dtype, array.dims.len() as u8])?;
    for &d in &array.dims {
        let d = u32::try_from(d).map_err(|_| DataError::MalformedHeader(format!("dimension {d} exceeds u32")))?;
        writer.write_all(&d.to_be_bytes())?;
    }
    match &array.data {
        IdxData::U8(v) => writer.write_all(v)?,
        IdxData::F32(v) => {
            for x in v {
                writer.write_all(&x.to_be_bytes())?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_idx_file(path: impl AsRef<Path>, array: &IdxArray) -> Result<()> {
    write_idx(BufWriter::new(File::create(path)?), array)
}

fn read_idx_file(path: &Path) -> Result<IdxArray> {
    read_idx(BufReader::new(File::open(path)?))
}

/// Load an IDX image/label pair. Classes are `0..=max(label)`, each of which must occur.
///
/// Images are `N×H×W` (one channel) or `N×H×W×C`; unsigned-byte intensities are scaled by 1/255.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let (images, labels) = read_pair(images_path.as_ref(), labels_path.as_ref())?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let id = dataset_id(images_path.as_ref());
    LabeledImageSet::new(id, images, labels, default_class_names(classes))
}

/// Load an IDX pair against a known class list; labels outside it are rejected.
pub fn load_idx_with_classes(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    id: impl Into<String>,
    class_names: Vec<String>,
) -> Result<LabeledImageSet> {
    let (images, labels) = read_pair(images_path.as_ref(), labels_path.as_ref())?;
    LabeledImageSet::new(id, images, labels, class_names)
}

fn read_pair(images_path: &Path, labels_path: &Path) -> Result<(Array4<f32>, Vec<usize>)> {
    let images = read_idx_file(images_path)?;
    let labels = read_idx_file(labels_path)?;

    let shape = match images.dims.as_slice() {
        &[n, h, w] => (n, h, w, 1),
        &[n, h, w, c] => (n, h, w, c),
        other => return Err(DataError::MalformedHeader(format!("image file has dims {other:?}"))),
    };
    let pixels: Vec<f32> = match images.data {
        IdxData::U8(v) => v.into_iter().map(|b| b as f32 / 255.0).collect(),
        IdxData::F32(v) => v,
    };
    let labels: Vec<usize> = match (labels.dims.as_slice(), labels.data) {
        (&[_], IdxData::U8(v)) => v.into_iter().map(usize::from).collect(),
        (dims, _) => return Err(DataError::MalformedHeader(format!("label file must be 1-D unsigned bytes, dims {dims:?}"))),
    };
    if labels.len() != shape.0 {
        return Err(DataError::LengthMismatch { images: shape.0, labels: labels.len() });
    }
    let images = Array4::from_shape_vec(shape, pixels).expect("IDX reader checked the element count");
    Ok((images, labels))
}

fn dataset_id(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("idx").to_string()
}

/// Quantize a set to unsigned bytes (`round(255·x)`) in `N×H×W×C` layout.
pub(crate) fn images_to_idx(set: &LabeledImageSet) -> IdxArray {
    let (n, h, w, c) = set.images().dim();
    let data = set.images().iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    IdxArray { dims: vec![n, h, w, c], data: IdxData::U8(data) }
}

pub(crate) fn labels_to_idx(labels: &[usize]) -> Result<IdxArray> {
    let data = labels
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| DataError::MalformedHeader(format!("label {l} does not fit in a byte"))))
        .collect::<Result<Vec<u8>>>()?;
    Ok(IdxArray { dims: vec![labels.len()], data: IdxData::U8(data) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn write(dir: &Path, name: &str, array: &IdxArray) -> std::path::PathBuf {
        let p = dir.join(name);
        write_idx_file(&p, array).unwrap();
        p
    }

    #[test]
    fn single_white_image() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img.idx", &IdxArray { dims: vec![1, 2, 3], data: IdxData::U8(vec![255; 6]) });
        let lab = write(dir.path(), "lab.idx", &IdxArray { dims: vec![1], data: IdxData::U8(vec![0]) });
        let set = load_idx(&img, &lab).unwrap();
        assert_eq!((set.len(), set.height(), set.width(), set.channels()), (1, 2, 3, 1));
        assert!(set.images().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn label_outside_class_list() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img.idx", &IdxArray { dims: vec![2, 1, 1], data: IdxData::U8(vec![0, 9]) });
        let lab = write(dir.path(), "lab.idx", &IdxArray { dims: vec![2], data: IdxData::U8(vec![3, 10]) });
        let names = default_class_names(10);
        let err = load_idx_with_classes(&img, &lab, "x", names).unwrap_err();
        assert!(matches!(err, DataError::InvalidLabel { label: 10, classes: 10, .. }));
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img.idx", &IdxArray { dims: vec![2, 1, 1], data: IdxData::U8(vec![0, 9]) });
        let lab = write(dir.path(), "lab.idx", &IdxArray { dims: vec![3], data: IdxData::U8(vec![0, 1, 1]) });
        assert!(matches!(load_idx(&img, &lab), Err(DataError::LengthMismatch { images: 2, labels: 3 })));
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(matches!(read_idx(Cursor::new(vec![1, 0, 8, 1, 0, 0, 0, 1, 5])), Err(DataError::MalformedHeader(_))));
        assert!(matches!(read_idx(Cursor::new(vec![0, 0, 0x0B, 1, 0, 0, 0, 1, 5])), Err(DataError::MalformedHeader(_))));
        assert!(matches!(read_idx(Cursor::new(vec![0, 0, 8, 1, 0, 0, 0, 3, 5])), Err(DataError::MalformedHeader(_))));
        assert!(matches!(read_idx(Cursor::new(vec![0, 0])), Err(DataError::MalformedHeader(_))));
    }

    #[test]
    fn known_bytes() {
        let mut buf = Vec::new();
        write_idx(&mut buf, &IdxArray { dims: vec![2], data: IdxData::F32(vec![1.0, -2.5]) }).unwrap();
        assert_eq!(&buf[..8], &[0, 0, 0x0D, 1, 0, 0, 0, 2]);
        assert_eq!(&buf[8..12], &1.0f32.to_be_bytes());
    }

    proptest! {
        #[test]
        fn u8_round_trip(dims in prop::collection::vec(1usize..5, 1..4), seed in any::<u8>()) {
            let n: usize = dims.iter().product();
            let data: Vec<u8> = (0..n).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
            let a = IdxArray { dims, data: IdxData::U8(data) };
            let mut buf = Vec::new();
            write_idx(&mut buf, &a).unwrap();
            let b = read_idx(Cursor::new(&buf)).unwrap();
            let mut again = Vec::new();
            write_idx(&mut again, &b).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(buf, again);
        }

        #[test]
        fn f32_round_trip(values in prop::collection::vec(-1e6f32..1e6, 1..40)) {
            let a = IdxArray { dims: vec![values.len()], data: IdxData::F32(values) };
            let mut buf = Vec::new();
            write_idx(&mut buf, &a).unwrap();
            prop_assert_eq!(read_idx(Cursor::new(&buf)).unwrap(), a);
        }
    }
}
