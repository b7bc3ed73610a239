//! Planar image containers, sRGB/Lab conversion and PNG/JPEG I/O.
//!
//! All samples are `f64`. Quantization to 8 bits happens only in
//! [`save_image`].

use std::path::Path;
use std::sync::OnceLock;

use ::image::{ColorType, DynamicImage, ImageError, RgbImage};

use crate::error::{Result, SfpError};

/// Smallest accepted side length of a [`PlanarImage`].
pub const MIN_SIDE: usize = 8;

/// Rec. 709 luma weights.
pub const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// A single-channel `f64` plane in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(SfpError::Dimension(format!("empty map {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(SfpError::Dimension(format!(
                "map of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SfpError::Numerical(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produced a non-finite value")
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Row-major mean.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarMap {
        ScalarMap::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
        .expect("map produced a non-finite value")
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> ScalarMap {
        ScalarMap::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|v| v.clamp(lo, hi)).collect(),
        )
    }

    pub(crate) fn check_same_dims(&self, other: &ScalarMap, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(SfpError::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Three-plane RGB image with every sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl PlanarImage {
    /// Builds an image from R, G, B planes. Samples outside `[0, 1]` are
    /// rejected; use [`PlanarImage::from_planes_clamped`] to clamp instead.
    pub fn from_planes(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        Self::check_shape(width, height, &planes)?;
        for (c, plane) in planes.iter().enumerate() {
            if let Some(i) = plane.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(SfpError::Param(format!(
                    "channel {c} sample {i} = {} outside [0, 1]",
                    plane[i]
                )));
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Builds an image from planes, clamping every sample into `[0, 1]`.
    /// Non-finite samples are an error.
    pub fn from_planes_clamped(
        width: usize,
        height: usize,
        mut planes: [Vec<f64>; 3],
    ) -> Result<Self> {
        Self::check_shape(width, height, &planes)?;
        for (c, plane) in planes.iter_mut().enumerate() {
            for (i, v) in plane.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(SfpError::Numerical(format!(
                        "channel {c} sample {i} is not finite"
                    )));
                }
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    pub fn from_maps_clamped(maps: [&ScalarMap; 3]) -> Result<Self> {
        let (w, h) = maps[0].dims();
        maps[0].check_same_dims(maps[1], "planes")?;
        maps[0].check_same_dims(maps[2], "planes")?;
        Self::from_planes_clamped(w, h, maps.map(|m| m.data().to_vec()))
    }

    /// Uniform color image.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_planes(width, height, rgb.map(|v| vec![v; width * height]))
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let n = width * height;
        let mut planes = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in 0..3 {
                    planes[c].push(px[c]);
                }
            }
        }
        Self::from_planes(width, height, planes)
    }

    fn check_shape(width: usize, height: usize, planes: &[Vec<f64>; 3]) -> Result<()> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(SfpError::Dimension(format!(
                "image {width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(SfpError::Dimension(format!(
                "planes do not match {width}x{height}"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    pub fn channel(&self, c: usize) -> ScalarMap {
        ScalarMap::from_raw(self.width, self.height, self.planes[c].clone())
    }

    #[inline]
    pub fn pixel(&self, i: usize) -> [f64; 3] {
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixel(y * self.width + x)
    }

    /// Row-major per-channel means.
    pub fn channel_means(&self) -> [f64; 3] {
        let n = self.pixel_count() as f64;
        [0, 1, 2].map(|c| self.planes[c].iter().sum::<f64>() / n)
    }

    pub(crate) fn check_same_dims(&self, w: usize, h: usize, what: &str) -> Result<()> {
        if self.dims() != (w, h) {
            return Err(SfpError::Dimension(format!(
                "{what}: image is {}x{}, expected {w}x{h}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// CIE L*a*b* planes (D65 white).
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabImage {
    pub fn l_map(&self) -> ScalarMap {
        ScalarMap::from_raw(self.width, self.height, self.l.clone())
    }

    pub fn a_map(&self) -> ScalarMap {
        ScalarMap::from_raw(self.width, self.height, self.a.clone())
    }

    pub fn b_map(&self) -> ScalarMap {
        ScalarMap::from_raw(self.width, self.height, self.b.clone())
    }

    pub fn mean_a(&self) -> f64 {
        self.a.iter().sum::<f64>() / self.a.len() as f64
    }

    pub fn mean_b(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.b.len() as f64
    }
}

fn io_error(path: &Path, err: ImageError) -> SfpError {
    match err {
        ImageError::IoError(source) => SfpError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => SfpError::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Reads an 8- or 16-bit PNG/JPEG. Grayscale is replicated to three planes and
/// alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<PlanarImage> {
    let path = path.as_ref();
    let decoded = ::image::ImageReader::open(path)
        .map_err(|source| SfpError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| SfpError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|e| io_error(path, e))?;
    decode_dynamic(&decoded)
}

pub fn decode_dynamic(decoded: &DynamicImage) -> Result<PlanarImage> {
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let n = w * h;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    match decoded.color() {
        ColorType::L16 | ColorType::La16 | ColorType::Rgb16 | ColorType::Rgba16 => {
            for px in decoded.to_rgb16().pixels() {
                for c in 0..3 {
                    planes[c].push(f64::from(px.0[c]) / 65535.0);
                }
            }
        }
        ColorType::Rgb32F | ColorType::Rgba32F => {
            for px in decoded.to_rgb32f().pixels() {
                for c in 0..3 {
                    planes[c].push(f64::from(px.0[c]));
                }
            }
            return PlanarImage::from_planes_clamped(w, h, planes);
        }
        _ => {
            for px in decoded.to_rgb8().pixels() {
                for c in 0..3 {
                    planes[c].push(f64::from(px.0[c]) / 255.0);
                }
            }
        }
    }
    PlanarImage::from_planes(w, h, planes)
}

/// 8-bit code for a sample, `round(s * 255)` with halves rounded up.
#[inline]
pub fn quantize(s: f64) -> u8 {
    (s.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn to_rgb8(img: &PlanarImage) -> RgbImage {
    let mut out = RgbImage::new(img.width() as u32, img.height() as u32);
    for (i, px) in out.pixels_mut().enumerate() {
        let p = img.pixel(i);
        px.0 = [quantize(p[0]), quantize(p[1]), quantize(p[2])];
    }
    out
}

/// Writes an 8-bit RGB PNG.
pub fn save_image(img: &PlanarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    to_rgb8(img)
        .save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| io_error(path, e))
}

/// Writes a map as 8-bit grayscale PNG, mapping `[0, 1]` linearly onto codes.
pub fn save_gray(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: Vec<u8> = map.data().iter().map(|&v| quantize(v)).collect();
    ::image::GrayImage::from_raw(map.width() as u32, map.height() as u32, buf)
        .expect("buffer sized from map")
        .save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| io_error(path, e))
}

pub fn luminance(img: &PlanarImage) -> ScalarMap {
    let data = (0..img.pixel_count())
        .map(|i| {
            let p = img.pixel(i);
            REC709[0] * p[0] + REC709[1] * p[1] + REC709[2] * p[2]
        })
        .collect();
    ScalarMap::from_raw(img.width(), img.height(), data)
}

// sRGB primaries, D65 white (IEC 61966-2-1).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const SRGB_LINEAR_KNEE: f64 = 0.04045;
const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

struct LabTables {
    xyz_to_rgb: [[f64; 3]; 3],
    white: [f64; 3],
}

fn tables() -> &'static LabTables {
    static TABLES: OnceLock<LabTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let m = RGB_TO_XYZ;
        // reference white is the image of RGB (1,1,1) so that white maps to a = b = 0
        let white = [0, 1, 2].map(|r| m[r][0] + m[r][1] + m[r][2]);
        LabTables {
            xyz_to_rgb: invert3(&m),
            white,
        }
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ]
}

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= SRGB_LINEAR_KNEE {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(l: f64) -> f64 {
    // knee taken from the forward branch so the two are exact inverses
    if l <= SRGB_LINEAR_KNEE / 12.92 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    if f > 6.0 / 29.0 {
        f * f * f
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

/// Converts one sRGB pixel in `[0, 1]` to `(L, a, b)`.
pub fn srgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let t = tables();
    let lin = rgb.map(srgb_to_linear);
    let mut f = [0.0; 3];
    for r in 0..3 {
        let xyz = RGB_TO_XYZ[r][0] * lin[0] + RGB_TO_XYZ[r][1] * lin[1] + RGB_TO_XYZ[r][2] * lin[2];
        f[r] = lab_f(xyz / t.white[r]);
    }
    [
        (116.0 * f[1] - 16.0).clamp(0.0, 100.0),
        (500.0 * (f[0] - f[1])).clamp(-128.0, 127.0),
        (200.0 * (f[1] - f[2])).clamp(-128.0, 127.0),
    ]
}

/// Converts one `(L, a, b)` triple back to sRGB, clamped to `[0, 1]`.
pub fn lab_pixel_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let t = tables();
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * t.white[0],
        lab_f_inv(fy) * t.white[1],
        lab_f_inv(fz) * t.white[2],
    ];
    let m = &t.xyz_to_rgb;
    [0, 1, 2].map(|r| {
        let lin = m[r][0] * xyz[0] + m[r][1] * xyz[1] + m[r][2] * xyz[2];
        linear_to_srgb(lin.max(0.0)).clamp(0.0, 1.0)
    })
}

pub fn rgb_to_lab(img: &PlanarImage) -> LabImage {
    let n = img.pixel_count();
    let (mut l, mut a, mut b) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let lab = srgb_pixel_to_lab(img.pixel(i));
        l.push(lab[0]);
        a.push(lab[1]);
        b.push(lab[2]);
    }
    LabImage {
        width: img.width(),
        height: img.height(),
        l,
        a,
        b,
    }
}

pub fn lab_to_rgb(lab: &LabImage) -> PlanarImage {
    let n = lab.width * lab.height;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for i in 0..n {
        let rgb = lab_pixel_to_srgb([lab.l[i], lab.a[i], lab.b[i]]);
        for c in 0..3 {
            planes[c].push(rgb[c]);
        }
    }
    PlanarImage::from_planes(lab.width, lab.height, planes).expect("lab planes sized from image")
}

/// Box mean over `(2r+1)²` windows with edge replication, via running sums.
pub fn box_mean(map: &ScalarMap, radius: usize) -> ScalarMap {
    let (w, h) = map.dims();
    let r = radius as isize;
    let norm = (2 * radius + 1) as f64;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let src = map.data();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let mut sum: f64 = (-r..=r).map(|k| row[clamp(k, w)]).sum();
        for x in 0..w {
            rows[y * w + x] = sum;
            let xi = x as isize;
            sum += row[clamp(xi + r + 1, w)] - row[clamp(xi - r, w)];
        }
    }

    let mut out = vec![0.0; w * h];
    for x in 0..w {
        let mut sum: f64 = (-r..=r).map(|k| rows[clamp(k, h) * w + x]).sum();
        for y in 0..h {
            out[y * w + x] = sum / (norm * norm);
            let yi = y as isize;
            sum += rows[clamp(yi + r + 1, h) * w + x] - rows[clamp(yi - r, h) * w + x];
        }
    }
    ScalarMap::from_raw(w, h, out)
}
