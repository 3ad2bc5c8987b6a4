//! Optional conversion from native planar samples to interleaved RGB.
//!
//! The matrix/range equations and chroma locations follow ITU-T H.273.
//! Output retains the source transfer function and primaries: this is not
//! an ICC transform, sRGB conversion, linearisation or HDR tone mapping.
use crate::{DecodedImage, HeifError, Result, MAX_IMAGE_PIXELS};
use rayon::prelude::*;

/// Coding-independent colour information from `colr/nclx` or SPS VUI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorInfo {
    pub color_primaries: u16,
    pub transfer_characteristics: u16,
    pub matrix_coefficients: u16,
    pub full_range: bool,
}

impl Default for ColorInfo {
    /// Unlabelled/unspecified matrices use BT.709 limited range. Primaries
    /// and transfer remain unspecified; this does not declare sRGB.
    fn default() -> Self {
        Self { color_primaries: 2, transfer_characteristics: 2, matrix_coefficients: 1, full_range: false }
    }
}

/// Position of the returned chroma raster relative to the luma raster.
/// Positions are in luma pixels, with luma sample (0,0) at the origin.
/// Crops can move the first chroma sample outside the luma output window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaSampling {
    pub sub_x: u32,
    pub sub_y: u32,
    pub origin_x: f32,
    pub origin_y: f32,
}

impl ChromaSampling {
    pub(crate) fn coded(format: u32, location: Option<u32>) -> Self {
        let (sub_x, sub_y) = match format { 1 => (2, 2), 2 => (2, 1), _ => (1, 1) };
        // H.265's inferred 4:2:0 location is type 0 (left, vertically centred).
        let (origin_x, origin_y) = if format == 1 {
            match location.unwrap_or(0) {
                1 => (0.5, 0.5), 2 => (0.0, 0.0), 3 => (0.5, 0.0),
                4 => (0.0, 1.0), 5 => (0.5, 1.0), _ => (0.0, 0.5),
            }
        } else { (0.0, 0.0) };
        Self { sub_x, sub_y, origin_x, origin_y }
    }
}

/// Chroma reconstruction filter, with edge samples extended at boundaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ChromaUpsampling {
    Nearest,
    #[default]
    Bilinear,
}

/// Optional overrides for applications with external colour information.
#[derive(Debug, Clone, Copy, Default)]
pub struct RgbOptions {
    /// Override the file's matrix and range; `None` uses file information.
    pub color: Option<ColorInfo>,
    pub upsampling: ChromaUpsampling,
}

/// Tightly packed RGB triples, row-major. `u16` values span 0..=65535,
/// preserving higher-depth input without an intermediate 8-bit conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

/// Tightly packed RGBA. Alpha spans the entire destination range, independently
/// of the colour range. `premultiplied` preserves the container's `prem` flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbaImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
    pub premultiplied: bool,
}

impl DecodedImage {
    /// Convert to RGB8 using file colour information and bilinear chroma.
    /// Alpha is omitted; premultiplied colour is not unpremultiplied.
    pub fn to_rgb8(&self) -> Result<RgbImage<u8>> { self.to_rgb8_with_options(&RgbOptions::default()) }
    /// Convert to RGB16 using file colour information and bilinear chroma.
    /// Alpha is omitted; premultiplied colour is not unpremultiplied.
    pub fn to_rgb16(&self) -> Result<RgbImage<u16>> { self.to_rgb16_with_options(&RgbOptions::default()) }
    pub fn to_rgb8_with_options(&self, options: &RgbOptions) -> Result<RgbImage<u8>> { convert::<_, 3>(self, options) }
    pub fn to_rgb16_with_options(&self, options: &RgbOptions) -> Result<RgbImage<u16>> { convert::<_, 3>(self, options) }
    /// Convert to RGBA8, using an opaque alpha channel when none is present.
    pub fn to_rgba8(&self) -> Result<RgbaImage<u8>> { self.to_rgba8_with_options(&RgbOptions::default()) }
    /// Convert to RGBA16 without an intermediate 8-bit colour or alpha plane.
    pub fn to_rgba16(&self) -> Result<RgbaImage<u16>> { self.to_rgba16_with_options(&RgbOptions::default()) }
    pub fn to_rgba8_with_options(&self, options: &RgbOptions) -> Result<RgbaImage<u8>> { convert_rgba(self, options) }
    pub fn to_rgba16_with_options(&self, options: &RgbOptions) -> Result<RgbaImage<u16>> { convert_rgba(self, options) }

}

trait RgbSample: Copy + Default + Send + Sync {
    fn quantize(value: f32) -> Self;
    fn alpha(sample: u32, max: u32) -> Self;
}
impl RgbSample for u8 {
    fn alpha(sample: u32, max: u32) -> Self { ((u64::from(sample) * 255 + u64::from(max / 2)) / u64::from(max)) as u8 }
    fn quantize(value: f32) -> Self { (value * 255.0).round().clamp(0.0, 255.0) as u8 }
}
impl RgbSample for u16 {
    fn alpha(sample: u32, max: u32) -> Self { ((u64::from(sample) * 65535 + u64::from(max / 2)) / u64::from(max)) as u16 }
    fn quantize(value: f32) -> Self { (value * 65535.0).round().clamp(0.0, 65535.0) as u16 }
}

struct Axis { lo: usize, hi: usize, weight: f32 }
fn axis(count: usize, samples: usize, sub: u32, origin: f32, filter: ChromaUpsampling) -> Result<Vec<Axis>> {
    let mut result = Vec::new();
    result.try_reserve_exact(count).map_err(|_| HeifError::LimitExceeded("RGB: sampling allocation failed"))?;
    result.extend((0..count).map(|pixel| {
        // Use f64 for coordinates: f32 rounds large raster indices and
        // could otherwise round the last valid index up to `samples`.
        let position = ((pixel as f64 - f64::from(origin)) / f64::from(sub)).clamp(0.0, (samples - 1) as f64);
        if filter == ChromaUpsampling::Nearest {
            let index = position.round() as usize;
            Axis { lo: index, hi: index, weight: 0.0 }
        } else {
            let lo = position.floor() as usize;
            Axis { lo, hi: (lo + 1).min(samples - 1), weight: (position - lo as f64) as f32 }
        }
    }));
    Ok(result)
}

struct Matrix {
    identity: bool,
    y_offset: f32, y_scale: f32, c_offset: f32, c_scale: f32,
    red_cr: f32, blue_cb: f32, green_cb: f32, green_cr: f32,
}
impl Matrix {
    fn new(info: ColorInfo, y_depth: u32, c_depth: u32) -> Result<Self> {
        let (kr, kb) = match info.matrix_coefficients {
            0 => (0.0, 0.0), 1 | 2 => (0.2126, 0.0722), 4 => (0.30, 0.11),
            5 | 6 => (0.299, 0.114), 7 => (0.212, 0.087), 9 => (0.2627, 0.0593),
            _ => return Err(HeifError::Unsupported("RGB: unsupported matrix coefficients")),
        };
        let y_shift = (1u32 << (y_depth - 8)) as f32;
        let c_shift = (1u32 << (c_depth - 8)) as f32;
        let (y_offset, y_scale, c_offset, c_scale) = if info.full_range {
            (0.0, 1.0 / ((1u32 << y_depth) - 1) as f32, (1u32 << (c_depth - 1)) as f32, 1.0 / ((1u32 << c_depth) - 1) as f32)
        } else { (16.0 * y_shift, 1.0 / (219.0 * y_shift), 128.0 * c_shift, 1.0 / (224.0 * c_shift)) };
        let kg = 1.0 - kr - kb;
        Ok(Self { identity: info.matrix_coefficients == 0, y_offset, y_scale, c_offset, c_scale,
            red_cr: 2.0 * (1.0 - kr), blue_cb: 2.0 * (1.0 - kb),
            green_cb: -2.0 * kb * (1.0 - kb) / kg, green_cr: -2.0 * kr * (1.0 - kr) / kg })
    }
    fn rgb(&self, y: f32, cb: f32, cr: f32, c_depth: u32, full_range: bool) -> [f32; 3] {
        let y = (y - self.y_offset) * self.y_scale;
        if self.identity {
            // Identity coding stores G, B, R in the nominal Y, Cb, Cr planes.
            let shift = (1u32 << (c_depth - 8)) as f32;
            let (offset, scale) = if full_range { (0.0, 1.0 / ((1u32 << c_depth) - 1) as f32) }
                else { (16.0 * shift, 1.0 / (219.0 * shift)) };
            return [(cr - offset) * scale, y, (cb - offset) * scale];
        }
        let cb = (cb - self.c_offset) * self.c_scale;
        let cr = (cr - self.c_offset) * self.c_scale;
        [y + self.red_cr * cr, y + self.green_cb * cb + self.green_cr * cr, y + self.blue_cb * cb]
    }
}

fn convert<T: RgbSample, const CHANNELS: usize>(image: &DecodedImage, options: &RgbOptions) -> Result<RgbImage<T>> {
    let bad = || HeifError::MalformedHevc("RGB: invalid plane geometry or sampling");
    let monochrome = image.chroma_format_idc == 0;
    if image.width == 0 || image.height == 0 || (!monochrome && (image.cb_width == 0 || image.cb_height == 0)) { return Err(bad()); }
    let pixels = image.width.checked_mul(image.height).ok_or_else(bad)?;
    if pixels as u64 > MAX_IMAGE_PIXELS { return Err(HeifError::LimitExceeded("RGB: picture larger than MAX_IMAGE_PIXELS")); }
    let cpixels = image.cb_width.checked_mul(image.cb_height).ok_or_else(bad)?;
    let s = image.chroma_sampling;
    let valid_subsampling = match image.chroma_format_idc {
        0 => (s.sub_x, s.sub_y) == (1, 1),
        1 => (s.sub_x, s.sub_y) == (2, 2),
        2 => matches!((s.sub_x, s.sub_y), (2, 1) | (1, 2)),
        3 => (s.sub_x, s.sub_y) == (1, 1),
        _ => false,
    };
    let chroma_shape_valid = if monochrome { image.cb_width == 0 && image.cb_height == 0 }
        else { image.cb_width == image.width.div_ceil(s.sub_x.max(1) as usize) && image.cb_height == image.height.div_ceil(s.sub_y.max(1) as usize) };
    if !matches!(s.sub_x, 1 | 2) || !matches!(s.sub_y, 1 | 2) || !s.origin_x.is_finite() || !s.origin_y.is_finite()
        || !valid_subsampling || s.origin_x.abs() > 2.0 || s.origin_y.abs() > 2.0
        || !chroma_shape_valid
        || image.y.len() != pixels || image.cb.len() != cpixels || image.cr.len() != cpixels
        || !(8..=16).contains(&image.bit_depth_luma) || !(8..=16).contains(&image.bit_depth_chroma) { return Err(bad()); }
    for (plane, depth) in [(&image.y, image.bit_depth_luma), (&image.cb, image.bit_depth_chroma), (&image.cr, image.bit_depth_chroma)] {
        if plane.iter().any(|&v| v < 0 || v as u32 >= 1u32 << depth) { return Err(HeifError::MalformedHevc("RGB: sample outside coded range")); }
    }
    let info = options.color.or(image.color_info).unwrap_or_default();
    let matrix = Matrix::new(if monochrome { ColorInfo { matrix_coefficients: 1, ..info } } else { info }, image.bit_depth_luma, image.bit_depth_chroma)?;
    if matrix.identity && (s.sub_x != 1 || s.sub_y != 1) { return Err(HeifError::Unsupported("RGB: identity matrix requires 4:4:4")); }
    let xs = if monochrome { Vec::new() } else { axis(image.width, image.cb_width, s.sub_x, s.origin_x, options.upsampling)? };
    let ys = if monochrome { Vec::new() } else { axis(image.height, image.cb_height, s.sub_y, s.origin_y, options.upsampling)? };
    let length = pixels.checked_mul(CHANNELS).ok_or_else(bad)?;
    let mut data = Vec::new();
    data.try_reserve_exact(length).map_err(|_| HeifError::LimitExceeded("RGB: output allocation failed"))?;
    data.resize(length, T::default());
    let row_length = image.width * CHANNELS;
    data.par_chunks_mut(row_length).enumerate().for_each(|(row, output)| {
        for (x, rgb) in output.chunks_mut(CHANNELS).enumerate() {
            let values = if monochrome {
                [(image.y[row * image.width + x] as f32 - matrix.y_offset) * matrix.y_scale; 3]
            } else {
                let ay = &ys[row];
                let ax = &xs[x];
                let interpolate = |plane: &[i32]| {
                    let top = plane[ay.lo * image.cb_width + ax.lo] as f32 * (1.0 - ax.weight) + plane[ay.lo * image.cb_width + ax.hi] as f32 * ax.weight;
                    let bottom = plane[ay.hi * image.cb_width + ax.lo] as f32 * (1.0 - ax.weight) + plane[ay.hi * image.cb_width + ax.hi] as f32 * ax.weight;
                    top * (1.0 - ay.weight) + bottom * ay.weight
                };
                matrix.rgb(image.y[row * image.width + x] as f32, interpolate(&image.cb), interpolate(&image.cr), image.bit_depth_chroma, info.full_range)
            };
            for (channel, value) in rgb.iter_mut().zip(values) { *channel = T::quantize(value); }
            if CHANNELS == 4 {
                rgb[3] = match &image.alpha {
                    Some(alpha) => T::alpha(alpha.samples[row * image.width + x] as u32, (1u32 << alpha.bit_depth) - 1),
                    None => T::alpha(1, 1),
                };
            }
        }
    });
    Ok(RgbImage { width: image.width, height: image.height, data })
}

fn convert_rgba<T: RgbSample>(image: &DecodedImage, options: &RgbOptions) -> Result<RgbaImage<T>> {
    if let Some(alpha) = &image.alpha {
        let pixels = image.width.checked_mul(image.height).ok_or(HeifError::MalformedHevc("RGBA: dimensions overflow"))?;
        if !(8..=16).contains(&alpha.bit_depth) || alpha.samples.len() != pixels {
            return Err(HeifError::MalformedHevc("RGBA: invalid alpha geometry or bit depth"));
        }
        let max = (1i32 << alpha.bit_depth) - 1;
        if alpha.samples.iter().any(|&v| v < 0 || v > max) { return Err(HeifError::MalformedHevc("RGBA: alpha outside coded range")); }
    }
    let rgb = convert::<T, 4>(image, options)?;
    Ok(RgbaImage { width: rgb.width, height: rgb.height, data: rgb.data,
        premultiplied: image.alpha.as_ref().is_some_and(|alpha| alpha.premultiplied) })
}
