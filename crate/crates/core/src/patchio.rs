//! Patch datasets: the in-memory types, the SATBIN container, CSV import and
//! export, a seeded synthetic generator and the shuffled train/test split.
//!
//! # SATBIN layout
//!
//! All integers little-endian.
//!
//! ```text
//! magic        4 bytes  "SATP"
//! version      u8       1
//! width        u16
//! height       u16
//! band_count   u8       4
//! class_count  u8
//! record_count u32
//! records      record_count × (label u8, band_count planes of width×height bytes)
//! ```
//!
//! Planes are stored band-sequentially (red, green, blue, nir), each plane
//! row-major.
//!
//! # CSV layout
//!
//! Header `label,px_0,...,px_{N-1}` with `N = 4·width·height` pixel columns in
//! the same plane-sequential order as SATBIN. Patches are assumed square.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{rng_from_seed, Error, Result};

pub const PATCH_SIZE: usize = 28;
pub const BAND_COUNT: usize = 4;
pub const SATBIN_MAGIC: &[u8; 4] = b"SATP";
pub const SATBIN_VERSION: u8 = 1;
const HEADER_LEN: u64 = 15;

/// Amplitude (in byte units) of the synthetic texture modulation.
pub const TEXTURE_AMPLITUDE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Red = 0,
    Green = 1,
    Blue = 2,
    Nir = 3,
}

/// A four-band image block, stored plane-sequentially.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("empty patch {width}×{height}")));
        }
        let expected = width * height * BAND_COUNT;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "patch {width}×{height}×{BAND_COUNT} needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height * BAND_COUNT])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, band: Band) -> &[u8] {
        let n = self.pixel_count();
        let start = band as usize * n;
        &self.data[start..start + n]
    }

    pub fn get(&self, band: Band, y: usize, x: usize) -> u8 {
        self.plane(band)[y * self.width + x]
    }

    /// All samples, plane-sequential.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Samples scaled by 1/255, plane-sequential. This is the raw-pixel input
    /// vector used by the baseline networks.
    pub fn scaled_pixels(&self) -> Vec<f64> {
        self.data.iter().map(|&b| b as f64 / 255.0).collect()
    }
}

/// Class labelling scheme. Schemes compare equal when their class counts are
/// equal, so a custom 6-class scheme is the SAT-6 scheme.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Scheme {
    Sat4,
    Sat6,
    Custom(u8),
}

impl Scheme {
    pub fn from_class_count(k: usize) -> Result<Self> {
        match k {
            4 => Ok(Scheme::Sat4),
            6 => Ok(Scheme::Sat6),
            2..=255 => Ok(Scheme::Custom(k as u8)),
            _ => Err(Error::Format(format!("unsupported class count {k}"))),
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            Scheme::Sat4 => 4,
            Scheme::Sat6 => 6,
            Scheme::Custom(k) => *k as usize,
        }
    }

    pub fn class_name(&self, index: usize) -> String {
        const SAT4: [&str; 4] = ["barren land", "trees", "grassland", "other"];
        const SAT6: [&str; 6] = [
            "barren land",
            "trees",
            "grassland",
            "roads",
            "buildings",
            "water bodies",
        ];
        match self {
            Scheme::Sat4 if index < 4 => SAT4[index].to_string(),
            Scheme::Sat6 if index < 6 => SAT6[index].to_string(),
            _ => format!("class {index}"),
        }
    }
}

impl PartialEq for Scheme {
    fn eq(&self, other: &Self) -> bool {
        self.class_count() == other.class_count()
    }
}

impl Eq for Scheme {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassLabel {
    pub scheme: Scheme,
    pub index: usize,
}

impl ClassLabel {
    pub fn new(scheme: Scheme, index: usize) -> Result<Self> {
        if index >= scheme.class_count() {
            return Err(Error::Label {
                index,
                class_count: scheme.class_count(),
            });
        }
        Ok(Self { scheme, index })
    }
}

/// Ordered labeled patches sharing one scheme and one geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    scheme: Scheme,
    patches: Vec<Patch>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(scheme: Scheme, patches: Vec<Patch>, labels: Vec<usize>) -> Result<Self> {
        if patches.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} patches but {} labels",
                patches.len(),
                labels.len()
            )));
        }
        if let Some(&index) = labels.iter().find(|&&l| l >= scheme.class_count()) {
            return Err(Error::Label {
                index,
                class_count: scheme.class_count(),
            });
        }
        if let Some(first) = patches.first() {
            let (w, h) = (first.width, first.height);
            if patches.iter().any(|p| p.width != w || p.height != h) {
                return Err(Error::Geometry("patches differ in size".into()));
            }
        }
        Ok(Self {
            scheme,
            patches,
            labels,
        })
    }

    pub fn empty(scheme: Scheme) -> Self {
        Self {
            scheme,
            patches: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// Label indices, parallel to [`Dataset::patches`].
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> ClassLabel {
        ClassLabel {
            scheme: self.scheme,
            index: self.labels[i],
        }
    }

    /// `(width, height)` of the patches, if any.
    pub fn geometry(&self) -> Option<(usize, usize)> {
        self.patches.first().map(|p| (p.width, p.height))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Patch, usize)> {
        self.patches.iter().zip(self.labels.iter().copied())
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            scheme: self.scheme,
            patches: indices.iter().map(|&i| self.patches[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Raw-pixel matrix (n × 4·w·h), scaled to [0,1].
    pub fn pixel_matrix(&self) -> ndarray::Array2<f64> {
        let d = self.patches.first().map_or(0, |p| p.data.len());
        let mut out = ndarray::Array2::zeros((self.len(), d));
        for (mut row, patch) in out.rows_mut().into_iter().zip(&self.patches) {
            for (dst, &b) in row.iter_mut().zip(&patch.data) {
                *dst = b as f64 / 255.0;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Satbin,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "satbin" => Ok(Format::Satbin),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<Dataset> {
    let file = BufReader::new(File::open(path)?);
    match format {
        Format::Satbin => read_satbin(file),
        Format::Csv => read_csv(file, None),
    }
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    match format {
        Format::Satbin => write_satbin(dataset, &mut file)?,
        Format::Csv => write_csv(dataset, &mut file)?,
    }
    file.flush()?;
    Ok(())
}

pub fn write_satbin<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let (w, h) = dataset.geometry().unwrap_or((PATCH_SIZE, PATCH_SIZE));
    let width = u16::try_from(w).map_err(|_| Error::Geometry(format!("width {w} exceeds u16")))?;
    let height =
        u16::try_from(h).map_err(|_| Error::Geometry(format!("height {h} exceeds u16")))?;
    let count = u32::try_from(dataset.len())
        .map_err(|_| Error::Size(format!("{} records exceed u32", dataset.len())))?;
    let classes = u8::try_from(dataset.scheme.class_count())
        .map_err(|_| Error::Format("class count exceeds u8".into()))?;

    out.write_all(SATBIN_MAGIC)?;
    out.write_all(&[SATBIN_VERSION])?;
    out.write_all(&width.to_le_bytes())?;
    out.write_all(&height.to_le_bytes())?;
    out.write_all(&[BAND_COUNT as u8, classes])?;
    out.write_all(&count.to_le_bytes())?;
    for (patch, label) in dataset.iter() {
        out.write_all(&[label as u8])?;
        out.write_all(&patch.data)?;
    }
    Ok(())
}

pub fn read_satbin<R: Read>(mut input: R) -> Result<Dataset> {
    let mut header = [0u8; HEADER_LEN as usize];
    read_exact_at(&mut input, &mut header, 0, "header")?;
    if &header[0..4] != SATBIN_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&header[0..4])
        )));
    }
    if header[4] != SATBIN_VERSION {
        return Err(Error::Format(format!("unsupported version {}", header[4])));
    }
    let width = u16::from_le_bytes([header[5], header[6]]) as usize;
    let height = u16::from_le_bytes([header[7], header[8]]) as usize;
    let bands = header[9] as usize;
    let classes = header[10] as usize;
    let count = u32::from_le_bytes([header[11], header[12], header[13], header[14]]) as usize;
    if bands != BAND_COUNT {
        return Err(Error::Format(format!("expected {BAND_COUNT} bands, got {bands}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("invalid geometry {width}×{height}")));
    }
    let scheme = Scheme::from_class_count(classes)?;

    let record_len = 1 + bands * width * height;
    let mut record = vec![0u8; record_len];
    let mut patches = Vec::with_capacity(count.min(1 << 20));
    let mut labels = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let offset = HEADER_LEN + (i * record_len) as u64;
        read_exact_at(&mut input, &mut record, offset, &format!("record {i}"))?;
        let label = record[0] as usize;
        if label >= classes {
            return Err(Error::Label {
                index: label,
                class_count: classes,
            });
        }
        labels.push(label);
        patches.push(Patch {
            width,
            height,
            data: record[1..].to_vec(),
        });
    }
    Ok(Dataset {
        scheme,
        patches,
        labels,
    })
}

fn read_exact_at<R: Read>(input: &mut R, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    offset: offset + filled as u64,
                    detail: format!("{what}: expected {} bytes, got {filled}", buf.len()),
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let (w, h) = dataset.geometry().unwrap_or((PATCH_SIZE, PATCH_SIZE));
    let n = BAND_COUNT * w * h;
    let mut writer = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(n + 1);
    header.push("label".to_string());
    header.extend((0..n).map(|i| format!("px_{i}")));
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(n + 1);
    for (patch, label) in dataset.iter() {
        row.clear();
        row.push(label.to_string());
        row.extend(patch.data.iter().map(|b| b.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads the CSV layout. CSV carries no class count, so when `scheme` is
/// `None` it is inferred from the largest label: up to 4 classes reads as
/// SAT-4, up to 6 as SAT-6, otherwise a custom scheme.
pub fn read_csv<R: Read>(input: R, scheme: Option<Scheme>) -> Result<Dataset> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::Format("first CSV column must be `label`".into()));
    }
    let n = header.len() - 1;
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("px_{i}") {
            return Err(Error::Format(format!("unexpected CSV column {name:?}")));
        }
    }
    if n % BAND_COUNT != 0 {
        return Err(Error::Format(format!("{n} pixel columns is not a multiple of {BAND_COUNT}")));
    }
    let side = ((n / BAND_COUNT) as f64).sqrt().round() as usize;
    if side == 0 || side * side * BAND_COUNT != n {
        return Err(Error::Format(format!("{n} pixel columns do not form square patches")));
    }

    let mut patches = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |s: &str| -> Result<u8> {
            s.trim()
                .parse::<u8>()
                .map_err(|_| Error::Format(format!("row {}: invalid byte {s:?}", line + 1)))
        };
        labels.push(parse(&record[0])? as usize);
        let data = record.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        patches.push(Patch::new(side, side, data)?);
    }
    let scheme = match scheme {
        Some(s) => s,
        None => {
            let k = labels.iter().max().map_or(4, |m| m + 1);
            match k {
                0..=4 => Scheme::Sat4,
                5..=6 => Scheme::Sat6,
                _ => Scheme::from_class_count(k)?,
            }
        }
    };
    Dataset::new(scheme, patches, labels)
}

/// Appearance of one synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAppearance {
    /// Mean byte value of red, green, blue and NIR.
    pub band_means: [f64; 4],
    pub noise_std: f64,
    /// Period in pixels of the sinusoidal texture; 1 disables the texture.
    pub texture_period: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: Vec<ClassAppearance>,
    pub patches_per_class: usize,
    pub width: usize,
    pub height: usize,
}

impl SyntheticSpec {
    /// Four texture-differentiated classes. Classes 0 and 3 share band means,
    /// as do classes 1 and 2; within each pair only texture and noise differ.
    pub fn texture_preset(patches_per_class: usize) -> Self {
        let bare = [150.0, 130.0, 110.0, 140.0];
        let green = [70.0, 100.0, 70.0, 170.0];
        let classes = vec![
            ClassAppearance { band_means: bare, noise_std: 14.0, texture_period: 7 },
            ClassAppearance { band_means: green, noise_std: 14.0, texture_period: 3 },
            ClassAppearance { band_means: green, noise_std: 5.0, texture_period: 9 },
            ClassAppearance { band_means: bare, noise_std: 5.0, texture_period: 2 },
        ];
        Self {
            classes,
            patches_per_class,
            width: PATCH_SIZE,
            height: PATCH_SIZE,
        }
    }

    /// A preset with `class_count` classes, reusing the four texture classes
    /// with shifted band means when more than four are requested.
    pub fn with_classes(class_count: usize, patches_per_class: usize) -> Self {
        let base = Self::texture_preset(patches_per_class);
        let classes = (0..class_count)
            .map(|c| {
                let mut appearance = base.classes[c % 4].clone();
                let shift = (c / 4) as f64 * 35.0;
                for m in appearance.band_means.iter_mut() {
                    *m = (*m + shift).min(240.0);
                }
                appearance
            })
            .collect();
        Self { classes, ..base }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 || self.classes.len() > 255 {
            return Err(Error::Config(format!(
                "class count must be in [2, 255], got {}",
                self.classes.len()
            )));
        }
        if self.patches_per_class == 0 {
            return Err(Error::Config("patches_per_class must be ≥ 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("patch dimensions must be positive".into()));
        }
        for (c, class) in self.classes.iter().enumerate() {
            if class.band_means.iter().any(|m| !(0.0..=255.0).contains(m)) {
                return Err(Error::Config(format!("class {c}: band means must lie in [0, 255]")));
            }
            if !(class.noise_std >= 0.0 && class.noise_std.is_finite()) {
                return Err(Error::Config(format!("class {c}: noise std must be ≥ 0")));
            }
            if class.texture_period == 0 {
                return Err(Error::Config(format!("class {c}: texture period must be ≥ 1")));
            }
        }
        Ok(())
    }
}

/// Generates `classes × patches_per_class` patches, class-major.
///
/// Each sample is `clamp(round(mean + texture + noise), 0, 255)` where the
/// texture is `A·sin(2π(x+ox)/p)·sin(2π(y+oy)/p)` with amplitude
/// [`TEXTURE_AMPLITUDE`], the class period `p`, and a per-patch integer shift
/// `(ox, oy)` drawn uniformly from `[0, p)`. The same texture is applied to all
/// four bands; noise is independent per sample.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let (w, h) = (spec.width, spec.height);
    let total = spec.classes.len() * spec.patches_per_class;
    let mut patches = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut texture = vec![0.0; w * h];

    for (label, class) in spec.classes.iter().enumerate() {
        let noise = Normal::new(0.0, class.noise_std)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        let period = class.texture_period as usize;
        for _ in 0..spec.patches_per_class {
            let ox = rng.random_range(0..period);
            let oy = rng.random_range(0..period);
            let step = std::f64::consts::TAU / period as f64;
            for y in 0..h {
                let sy = (((y + oy) % period) as f64 * step).sin();
                for x in 0..w {
                    let sx = (((x + ox) % period) as f64 * step).sin();
                    texture[y * w + x] = TEXTURE_AMPLITUDE * sx * sy;
                }
            }
            let mut data = Vec::with_capacity(w * h * BAND_COUNT);
            for &mean in &class.band_means {
                for &t in &texture {
                    let n = if class.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    data.push((mean + t + n).round().clamp(0.0, 255.0) as u8);
                }
            }
            patches.push(Patch { width: w, height: h, data });
            labels.push(label);
        }
    }
    Ok(Dataset {
        scheme: Scheme::from_class_count(spec.classes.len())?,
        patches,
        labels,
    })
}

/// Shuffles with the seeded generator and splits into `(train, test)` with
/// `floor(train_fraction · n)` training records.
pub fn shuffle_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::Size(format!("cannot split a dataset of {n} patches")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let train_len = split_sizes(n, train_fraction).0;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    Ok((dataset.subset(&order[..train_len]), dataset.subset(&order[train_len..])))
}

/// `(floor(fraction · n), n − floor(fraction · n))`.
pub fn split_sizes(n: usize, train_fraction: f64) -> (usize, usize) {
    let train = ((train_fraction * n as f64).floor() as usize).min(n);
    (train, n - train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            classes: vec![
                ClassAppearance { band_means: [100.0, 100.0, 100.0, 200.0], noise_std: 10.0, texture_period: 4 },
                ClassAppearance { band_means: [100.0, 100.0, 100.0, 50.0], noise_std: 10.0, texture_period: 6 },
            ],
            patches_per_class: 20,
            width: PATCH_SIZE,
            height: PATCH_SIZE,
        }
    }

    fn satbin_bytes(d: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_satbin(d, &mut buf).unwrap();
        buf
    }

    #[test]
    fn zero_count_file_is_empty_dataset() {
        let bytes = satbin_bytes(&Dataset::empty(Scheme::Sat4));
        let d = read_satbin(&bytes[..]).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.scheme(), Scheme::Sat4);
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let mut bytes = satbin_bytes(&Dataset::empty(Scheme::Sat4));
        bytes[0] = b'X';
        assert!(matches!(read_satbin(&bytes[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_reports_offset() {
        let d = generate_synthetic(&tiny_spec(), 1).unwrap();
        let bytes = satbin_bytes(&d);
        let cut = 15 + 3137 + 100;
        match read_satbin(&bytes[..cut]) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, cut as u64),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let d = Dataset::new(Scheme::Sat4, vec![Patch::filled(2, 2, 0).unwrap()], vec![3]).unwrap();
        let mut bytes = satbin_bytes(&d);
        bytes[15] = 4;
        assert!(matches!(
            read_satbin(&bytes[..]),
            Err(Error::Label { index: 4, class_count: 4 })
        ));
    }

    #[test]
    fn zero_patch_and_scheme_survive_round_trip() {
        let d = Dataset::new(Scheme::Sat6, vec![Patch::filled(28, 28, 0).unwrap()], vec![5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.satbin");
        save_dataset(&d, &path, Format::Satbin).unwrap();
        let back = load_dataset(&path, Format::Satbin).unwrap();
        assert_eq!(back, d);
        assert!(matches!(back.scheme(), Scheme::Sat6));
    }

    #[test]
    fn non_square_geometry_loads() {
        let p = Patch::new(3, 5, (0..60).collect()).unwrap();
        let d = Dataset::new(Scheme::Custom(3), vec![p], vec![2]).unwrap();
        assert_eq!(read_satbin(&satbin_bytes(&d)[..]).unwrap(), d);
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_synthetic(&tiny_spec(), 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("label,px_0,px_1,"));
        assert!(header.ends_with(",px_3135"));
        let back = read_csv(&buf[..], Some(Scheme::Custom(2))).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn degenerate_generator_is_flat() {
        let spec = SyntheticSpec {
            classes: vec![
                ClassAppearance { band_means: [100.0; 4], noise_std: 0.0, texture_period: 1 };
                2
            ],
            patches_per_class: 3,
            width: PATCH_SIZE,
            height: PATCH_SIZE,
        };
        let d = generate_synthetic(&spec, 9).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.patches().iter().all(|p| p.as_bytes().iter().all(|&b| b == 100)));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_synthetic(&tiny_spec(), 42).unwrap();
        let b = generate_synthetic(&tiny_spec(), 42).unwrap();
        let c = generate_synthetic(&tiny_spec(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn nir_mean_follows_class_means() {
        let d = generate_synthetic(&tiny_spec(), 5).unwrap();
        let mean_nir = |class: usize| {
            let (sum, count) = d
                .iter()
                .filter(|(_, l)| *l == class)
                .flat_map(|(p, _)| p.plane(Band::Nir).iter())
                .fold((0.0, 0usize), |(s, c), &b| (s + b as f64, c + 1));
            sum / count as f64
        };
        assert!(mean_nir(0) > mean_nir(1));
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = tiny_spec();
        spec.classes[0].texture_period = 0;
        assert!(matches!(generate_synthetic(&spec, 0), Err(Error::Config(_))));
        spec = tiny_spec();
        spec.classes.truncate(1);
        assert!(generate_synthetic(&spec, 0).is_err());
    }

    #[test]
    fn split_sizes_follow_floor() {
        assert_eq!(split_sizes(10, 0.8), (8, 2));
        assert_eq!(split_sizes(500_000, 0.8), (400_000, 100_000));
        assert_eq!(split_sizes(7, 0.5), (3, 4));
    }

    #[test]
    fn split_is_a_partition() {
        let d = generate_synthetic(&tiny_spec(), 11).unwrap();
        let (train, test) = shuffle_split(&d, 0.8, 2).unwrap();
        assert_eq!((train.len(), test.len()), (32, 8));
        let mut all: Vec<_> = train.iter().chain(test.iter()).map(|(p, l)| (p.clone(), l)).collect();
        let mut orig: Vec<_> = d.iter().map(|(p, l)| (p.clone(), l)).collect();
        all.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        orig.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        assert_eq!(all, orig);
        let again = shuffle_split(&d, 0.8, 2).unwrap();
        assert_eq!(again.0, train);
    }

    #[test]
    fn split_rejects_tiny_dataset() {
        let d = Dataset::new(Scheme::Sat4, vec![Patch::filled(2, 2, 1).unwrap()], vec![0]).unwrap();
        assert!(matches!(shuffle_split(&d, 0.8, 0), Err(Error::Size(_))));
    }
}
