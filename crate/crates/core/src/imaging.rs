//! Image tensors, the discrete Laplacian, high-frequency energy functionals
//! and Jacobian heatmaps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::SubspaceJacobian;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("image dimensions must be at least 1, got {0}")]
    EmptyShape(Shape),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("render target must be non-empty, got {0}x{1}")]
    EmptyTarget(usize, usize),
    #[error("expected a 3-channel image, got {0} channels")]
    NotRgb(usize),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("encoding {path}: {message}")]
    Encode { path: String, message: String },
}

/// `C×H×W` layout of a generator output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    /// A flat vector of `n` values, laid out as `1×1×n`.
    pub const fn flat(n: usize) -> Self {
        Self::new(1, 1, n)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A finite `C×H×W` real array stored channel-major, then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self, ImagingError> {
        if shape.channels == 0 || shape.height == 0 || shape.width == 0 {
            return Err(ImagingError::EmptyShape(shape));
        }
        if data.len() != shape.len() {
            return Err(ImagingError::Shape {
                expected: shape.len(),
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(ImagingError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    /// Builds an image from `f(c, i, j)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for i in 0..shape.height {
                for j in 0..shape.width {
                    data.push(f(c, i, j));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.shape.height + i) * self.shape.width + j]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.pixels();
        &self.data[c * n..(c + 1) * n]
    }
}

/// Per-channel 5-point Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]` with
/// replicate (edge-clamp) padding. The output has the input's shape.
pub fn laplacian(img: &ImageTensor) -> ImageTensor {
    let Shape {
        channels,
        height,
        width,
    } = img.shape;
    let mut out = Vec::with_capacity(img.data.len());
    for c in 0..channels {
        let ch = img.channel(c);
        let at = |i: usize, j: usize| ch[i * width + j];
        for i in 0..height {
            let up = i.saturating_sub(1);
            let down = (i + 1).min(height - 1);
            for j in 0..width {
                let left = j.saturating_sub(1);
                let right = (j + 1).min(width - 1);
                out.push(at(up, j) + at(down, j) + at(i, left) + at(i, right) - 4.0 * at(i, j));
            }
        }
    }
    ImageTensor {
        shape: img.shape,
        data: out,
    }
}

/// Population variance (divide by N) over every channel-pixel entry.
pub fn variance_energy(field: &ImageTensor) -> f64 {
    population_variance(&field.data)
}

pub(crate) fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Mean absolute value over every entry.
pub fn mav_energy(field: &ImageTensor) -> f64 {
    field.data.iter().map(|v| v.abs()).sum::<f64>() / field.data.len() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    #[default]
    Variance,
    Mav,
}

/// Projected high-frequency energy: the energy of `laplacian(p1)`.
pub fn phfe(p1: &ImageTensor, mode: EnergyMode) -> f64 {
    let response = laplacian(p1);
    match mode {
        EnergyMode::Variance => variance_energy(&response),
        EnergyMode::Mav => mav_energy(&response),
    }
}

/// Static high-frequency energy of an image, `Var(∇²x)`.
pub fn hfe(img: &ImageTensor) -> f64 {
    variance_energy(&laplacian(img))
}

/// Per-pixel Laplacian magnitude averaged over channels, row-major.
pub fn hf_magnitude_map(img: &ImageTensor) -> Vec<f64> {
    let lap = laplacian(img);
    let n = img.shape.pixels();
    let c = img.shape.channels as f64;
    let mut m = vec![0.0; n];
    for ch in 0..img.shape.channels {
        for (acc, v) in m.iter_mut().zip(lap.channel(ch)) {
            *acc += v.abs();
        }
    }
    m.iter_mut().for_each(|v| *v /= c);
    m
}

/// Share of the total magnitude held by the top `k_percent` of entries.
///
/// Exactly `max(1, ⌊k%·n⌋)` entries are selected; equal magnitudes are
/// ranked by ascending index.
pub fn topk_share(magnitudes: &[f64], k_percent: f64, floor: f64) -> f64 {
    let n = magnitudes.len();
    if n == 0 {
        return 0.0;
    }
    let count = ((k_percent / 100.0 * n as f64 + 1e-9).floor() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| magnitudes[b].total_cmp(&magnitudes[a]).then(a.cmp(&b)));
    // Dividing by the largest entry first makes uniform maps sum exactly.
    let peak = magnitudes[order[0]];
    let unit = if peak > 0.0 && peak.is_finite() { peak } else { 1.0 };
    let selected: f64 = order[..count].iter().map(|&i| magnitudes[i] / unit).sum();
    let total: f64 = magnitudes.iter().map(|m| m / unit).sum();
    selected / (total + floor / unit)
}

/// Top-k high-frequency concentration of an image.
pub fn topk_hf_share(img: &ImageTensor, k_percent: f64, floor: f64) -> f64 {
    topk_share(&hf_magnitude_map(img), k_percent, floor)
}

/// Default `+ε` in the Top-k share denominator.
pub const TOPK_FLOOR: f64 = 1e-12;

/// A single-channel map normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
    /// `(min, max)` of the raw values before normalization.
    pub normalization: (f64, f64),
}

impl HeatMap {
    /// Min-max normalizes raw row-major values. Constant input maps to zeros.
    pub fn normalized(height: usize, width: usize, raw: Vec<f64>) -> Result<Self, ImagingError> {
        if raw.len() != height * width {
            return Err(ImagingError::Shape {
                expected: height * width,
                got: raw.len(),
            });
        }
        if height == 0 || width == 0 {
            return Err(ImagingError::EmptyShape(Shape::new(1, height, width)));
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let data = if span > 0.0 {
            raw.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Ok(Self {
            height,
            width,
            data,
            normalization: (min, max),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    /// Raw CSV dump, one row per line, 9 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<(), ImagingError> {
        let io_err = |source| ImagingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for row in self.data.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
            writeln!(out, "{}", line.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Pixel-wise Frobenius norm of the subspace Jacobian, aggregated over
/// channels and probed columns, then min-max normalized.
pub fn jacobian_norm_map(j: &SubspaceJacobian, shape: Shape) -> Result<HeatMap, ImagingError> {
    let matrix = j.matrix();
    if matrix.nrows() != shape.len() {
        return Err(ImagingError::Shape {
            expected: shape.len(),
            got: matrix.nrows(),
        });
    }
    let pixels = shape.pixels();
    let mut sq = vec![0.0; pixels];
    for c in 0..shape.channels {
        for (p, acc) in sq.iter_mut().enumerate() {
            let row = matrix.row(c * pixels + p);
            *acc += row.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let raw = sq.into_iter().map(f64::sqrt).collect();
    HeatMap::normalized(shape.height, shape.width, raw)
}

/// `|∇²P₁|` averaged over channels, normalized to `[0, 1]`.
pub fn laplacian_magnitude_map(p1: &ImageTensor) -> Result<HeatMap, ImagingError> {
    let shape = p1.shape();
    HeatMap::normalized(shape.height, shape.width, hf_magnitude_map(p1))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Upsample {
    Nearest,
    #[default]
    Bilinear,
}

/// Number of entries in the heatmap color ramp.
pub const RAMP_LEN: usize = 256;

/// Ramp entry `i`: red rises linearly from 0 to 1 while blue falls from 1
/// to 0; green stays 0. Entry 0 is pure blue, entry 255 pure red.
pub fn ramp_color(index: usize) -> [f64; 3] {
    let t = index.min(RAMP_LEN - 1) as f64 / (RAMP_LEN - 1) as f64;
    [t, 0.0, 1.0 - t]
}

fn ramp_index(value: f64) -> usize {
    (value.clamp(0.0, 1.0) * (RAMP_LEN - 1) as f64).round() as usize
}

/// Upsamples a normalized heatmap and maps it through the fixed color ramp,
/// producing a `3×H'×W'` image with entries in `[0, 1]`.
pub fn render_heatmap(
    map: &HeatMap,
    target: (usize, usize),
    mode: Upsample,
) -> Result<ImageTensor, ImagingError> {
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(ImagingError::EmptyTarget(th, tw));
    }
    let sample = |i: usize, j: usize| -> f64 {
        match mode {
            Upsample::Nearest => {
                let si = (i * map.height / th).min(map.height - 1);
                let sj = (j * map.width / tw).min(map.width - 1);
                map.get(si, sj)
            }
            Upsample::Bilinear => {
                let src = |d: usize, dst: usize, src: usize| {
                    (((d as f64 + 0.5) * src as f64 / dst as f64) - 0.5).clamp(0.0, (src - 1) as f64)
                };
                let y = src(i, th, map.height);
                let x = src(j, tw, map.width);
                let (y0, x0) = (y.floor() as usize, x.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(map.height - 1), (x0 + 1).min(map.width - 1));
                let (fy, fx) = (y - y0 as f64, x - x0 as f64);
                let top = map.get(y0, x0) * (1.0 - fx) + map.get(y0, x1) * fx;
                let bottom = map.get(y1, x0) * (1.0 - fx) + map.get(y1, x1) * fx;
                top * (1.0 - fy) + bottom * fy
            }
        }
    };
    let mut values = vec![0.0; th * tw];
    for i in 0..th {
        for j in 0..tw {
            values[i * tw + j] = sample(i, j);
        }
    }
    let shape = Shape::new(3, th, tw);
    Ok(ImageTensor::from_fn(shape, |c, i, j| {
        ramp_color(ramp_index(values[i * tw + j]))[c]
    }))
}

/// Writes a 3-channel `[0, 1]` image as an 8-bit RGB PNG.
pub fn write_png(img: &ImageTensor, path: &Path) -> Result<(), ImagingError> {
    let shape = img.shape();
    if shape.channels != 3 {
        return Err(ImagingError::NotRgb(shape.channels));
    }
    let mut bytes = Vec::with_capacity(shape.len());
    for i in 0..shape.height {
        for j in 0..shape.width {
            for c in 0..3 {
                bytes.push((img.get(c, i, j).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| ImagingError::Io {
        path: display.clone(),
        source,
    })?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), shape.width as u32, shape.height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| ImagingError::Encode {
        path: display.clone(),
        message: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(height: usize, width: usize, data: Vec<f64>) -> ImageTensor {
        ImageTensor::new(Shape::new(1, height, width), data).unwrap()
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let img = ImageTensor::from_fn(Shape::new(2, 3, 4), |_, _, _| 7.25);
        assert!(laplacian(&img).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_stamps_kernel() {
        let mut data = vec![0.0; 25];
        data[12] = 1.0;
        let lap = laplacian(&single(5, 5, data));
        for i in 0..5 {
            for j in 0..5 {
                let expected = match (i, j) {
                    (2, 2) => -4.0,
                    (1, 2) | (3, 2) | (2, 1) | (2, 3) => 1.0,
                    _ => 0.0,
                };
                assert_eq!(lap.get(0, i, j), expected, "({i},{j})");
            }
        }
    }

    #[test]
    fn ramp_rows_pick_up_clamped_edges() {
        // x_ij = i on 4x4: second difference vanishes inside; the clamped
        // first row sees (0 + 1 - 0) and the clamped last row (2 + 3 - 6).
        let img = ImageTensor::from_fn(Shape::new(1, 4, 4), |_, i, _| i as f64);
        let lap = laplacian(&img);
        for j in 0..4 {
            assert_eq!(lap.get(0, 0, j), 1.0);
            assert_eq!(lap.get(0, 1, j), 0.0);
            assert_eq!(lap.get(0, 2, j), 0.0);
            assert_eq!(lap.get(0, 3, j), -1.0);
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(variance_energy(&single(1, 4, vec![3.0; 4])), 0.0);
        assert_eq!(variance_energy(&single(1, 4, vec![0.0, 0.0, 2.0, 2.0])), 1.0);
        assert_eq!(variance_energy(&single(1, 4, vec![0.0, 1.0, 2.0, 3.0])), 1.25);
        assert_eq!(mav_energy(&single(1, 2, vec![-1.0, 1.0])), 1.0);
        assert_eq!(mav_energy(&single(1, 2, vec![0.0, 0.0])), 0.0);
        assert_eq!(mav_energy(&single(1, 2, vec![0.0, 3.0])), 1.5);
    }

    #[test]
    fn phfe_of_centered_impulse() {
        let mut data = vec![0.0; 25];
        data[12] = 1.0;
        let p1 = single(5, 5, data);
        // Stamp entries: -4 once, 1 four times, mean 0 → (16 + 4) / 25.
        assert!((phfe(&p1, EnergyMode::Variance) - 0.8).abs() < 1e-15);
        assert!((phfe(&p1, EnergyMode::Mav) - 8.0 / 25.0).abs() < 1e-15);
        let constant = single(5, 5, vec![2.0; 25]);
        assert_eq!(phfe(&constant, EnergyMode::Variance), 0.0);
        assert_eq!(phfe(&constant, EnergyMode::Mav), 0.0);
    }

    #[test]
    fn topk_examples() {
        assert!((topk_share(&[1.0; 100], 10.0, 0.0) - 0.1).abs() == 0.0);
        let mut single_hot = vec![0.0; 100];
        single_hot[37] = 2.5;
        assert!((topk_share(&single_hot, 5.0, 1e-12) - 1.0).abs() < 1e-12);
        assert_eq!(topk_share(&[4.0, 3.0, 2.0, 1.0], 25.0, 0.0), 0.4);
        assert_eq!(topk_share(&[1.0, 4.0, 2.0, 3.0], 50.0, 0.0), 0.7);
        // tiny k still selects one entry
        assert_eq!(topk_share(&[1.0, 4.0, 2.0, 3.0], 1.0, 0.0), 0.4);
    }

    #[test]
    fn norm_map_examples() {
        let j = SubspaceJacobian::from_parts(
            nalgebra::DMatrix::from_row_slice(1, 2, &[3.0, 4.0]),
            1e-3,
            Shape::new(1, 1, 1),
        );
        let map = jacobian_norm_map(&j, Shape::new(1, 1, 1)).unwrap();
        assert_eq!(map.normalization, (5.0, 5.0));
        assert_eq!(map.data, vec![0.0]);

        let j = SubspaceJacobian::from_parts(
            nalgebra::DMatrix::from_row_slice(2, 1, &[1.0, -3.0]),
            1e-3,
            Shape::new(1, 1, 2),
        );
        let map = jacobian_norm_map(&j, Shape::new(1, 1, 2)).unwrap();
        assert_eq!(map.data, vec![0.0, 1.0]);

        let zero = SubspaceJacobian::from_parts(nalgebra::DMatrix::zeros(4, 3), 1e-3, Shape::new(1, 2, 2));
        let map = jacobian_norm_map(&zero, Shape::new(1, 2, 2)).unwrap();
        assert!(map.data.iter().all(|&v| v == 0.0));

        assert!(jacobian_norm_map(&zero, Shape::new(1, 3, 2)).is_err());
    }

    #[test]
    fn render_examples() {
        let map = HeatMap::normalized(1, 1, vec![0.5]).unwrap();
        let img = render_heatmap(&map, (2, 3), Upsample::Bilinear).unwrap();
        assert_eq!(img.shape(), Shape::new(3, 2, 3));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!([img.get(0, i, j), img.get(1, i, j), img.get(2, i, j)], ramp_color(0));
            }
        }

        let map = HeatMap::normalized(2, 2, vec![0.0, 1.0, 0.25, 0.75]).unwrap();
        let img = render_heatmap(&map, (4, 4), Upsample::Nearest).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let v = map.get(i / 2, j / 2);
                assert_eq!(img.get(0, i, j), ramp_color(ramp_index(v))[0]);
            }
        }
        assert_eq!(img.get(0, 0, 2), 1.0);
        assert_eq!(img.get(2, 0, 2), 0.0);
        assert!(matches!(
            render_heatmap(&map, (0, 4), Upsample::Nearest),
            Err(ImagingError::EmptyTarget(0, 4))
        ));
    }

    #[test]
    fn rejects_bad_tensors() {
        assert!(matches!(
            ImageTensor::new(Shape::new(1, 2, 2), vec![0.0; 3]),
            Err(ImagingError::Shape { expected: 4, got: 3 })
        ));
        assert!(matches!(
            ImageTensor::new(Shape::new(1, 1, 2), vec![0.0, f64::NAN]),
            Err(ImagingError::NonFinite { index: 1 })
        ));
        assert!(ImageTensor::new(Shape::new(1, 0, 2), vec![]).is_err());
    }

    fn image_strategy() -> impl Strategy<Value = (ImageTensor, ImageTensor)> {
        (1usize..4, 1usize..7, 1usize..7).prop_flat_map(|(c, h, w)| {
            let shape = Shape::new(c, h, w);
            let values = proptest::collection::vec(-10.0f64..10.0, shape.len());
            (values.clone(), values).prop_map(move |(a, b)| {
                (ImageTensor::new(shape, a).unwrap(), ImageTensor::new(shape, b).unwrap())
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_is_linear((x, y) in image_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let combo = ImageTensor::new(
                x.shape(),
                x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
            ).unwrap();
            let lhs = laplacian(&combo);
            let (lx, ly) = (laplacian(&x), laplacian(&y));
            for ((l, p), q) in lhs.data().iter().zip(lx.data()).zip(ly.data()) {
                prop_assert!((l - (a * p + b * q)).abs() < 1e-10);
            }
        }

        #[test]
        fn energies_are_homogeneous((x, _) in image_strategy(), c in -5.0f64..5.0) {
            let scaled = x.scaled(c);
            let v = variance_energy(&x);
            prop_assert!((variance_energy(&scaled) - c * c * v).abs() <= 1e-9 * (1.0 + c * c * v));
            let m = mav_energy(&x);
            prop_assert!((mav_energy(&scaled) - c.abs() * m).abs() <= 1e-9 * (1.0 + c.abs() * m));
            let p = phfe(&x, EnergyMode::Variance);
            prop_assert!((phfe(&scaled, EnergyMode::Variance) - c * c * p).abs() <= 1e-9 * (1.0 + c * c * p));
        }

        #[test]
        fn topk_is_bounded_and_monotone((x, _) in image_strategy(), k in 1.0f64..99.0) {
            let lo = topk_hf_share(&x, k, TOPK_FLOOR);
            let hi = topk_hf_share(&x, (k + 10.0).min(99.9), TOPK_FLOOR);
            prop_assert!((0.0..=1.0).contains(&lo));
            prop_assert!(hi >= lo);
        }

        #[test]
        fn rendered_heatmaps_stay_in_range(
            raw in proptest::collection::vec(-5.0f64..5.0, 6),
            th in 1usize..9,
            tw in 1usize..9,
            nearest in any::<bool>(),
        ) {
            let map = HeatMap::normalized(2, 3, raw).unwrap();
            let mode = if nearest { Upsample::Nearest } else { Upsample::Bilinear };
            let img = render_heatmap(&map, (th, tw), mode).unwrap();
            prop_assert_eq!(img.shape(), Shape::new(3, th, tw));
            prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
