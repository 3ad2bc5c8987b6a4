//! Feature images: per-PU (IPM, PUS, BN) values replicated over each PU.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::syntax::{check_tiling, ParsedPicture, PuRecord};

pub const FIMG_MAGIC: &[u8; 4] = b"FIMG";
pub const FIMG_VERSION: u8 = 1;
const FLAG_COMPACT: u8 = 1;

/// Intra mode 0..=34 to 0..=255, rounding half up.
pub fn map_ipm(ipm: u8) -> Result<u8> {
    if ipm > 34 {
        return Err(Error::InvalidValue(format!(
            "intra mode {ipm} outside [0, 34]"
        )));
    }
    Ok(((2 * ipm as u32 * 255 + 34) / 68) as u8)
}

pub fn map_pus(size: u32) -> Result<u8> {
    match size {
        4 => Ok(0),
        8 => Ok(85),
        16 => Ok(170),
        32 => Ok(255),
        _ => Err(Error::InvalidValue(format!(
            "PU size {size} not in {{4, 8, 16, 32}}"
        ))),
    }
}

/// Min-max maps each record's bin count to 0..=255 (half up); a constant
/// bin count maps to 0.
pub fn map_bn(records: &[PuRecord]) -> Result<Vec<u8>> {
    let min = records
        .iter()
        .map(|r| r.bins)
        .min()
        .ok_or(Error::EmptyRecordList)?;
    let max = records.iter().map(|r| r.bins).max().unwrap();
    let range = (max - min) as u128;
    Ok(records
        .iter()
        .map(|r| {
            if range == 0 {
                0
            } else {
                ((2 * (r.bins - min) as u128 * 255 + range) / (2 * range)) as u8
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureImage {
    pub width: usize,
    pub height: usize,
    pub qp: u8,
    pub ipm: Vec<u8>,
    pub pus: Vec<u8>,
    pub bn: Vec<u8>,
}

/// Builds the full-resolution feature image of a tiled record set.
pub fn assemble(records: &[PuRecord], width: u32, height: u32, qp: u8) -> Result<FeatureImage> {
    if records.is_empty() {
        return Err(Error::EmptyRecordList);
    }
    check_tiling(records, width, height)?;
    let bn = map_bn(records)?;
    let (w, h) = (width as usize, height as usize);
    let mut img = FeatureImage {
        width: w,
        height: h,
        qp,
        ipm: vec![0; w * h],
        pus: vec![0; w * h],
        bn: vec![0; w * h],
    };
    for (r, &b) in records.iter().zip(&bn) {
        let vi = map_ipm(r.ipm)?;
        let vp = map_pus(r.size)?;
        for y in r.y as usize..(r.y + r.size) as usize {
            let row = y * w;
            let span = row + r.x as usize..row + (r.x + r.size) as usize;
            img.ipm[span.clone()].fill(vi);
            img.pus[span.clone()].fill(vp);
            img.bn[span].fill(b);
        }
    }
    Ok(img)
}

impl FeatureImage {
    pub fn from_picture(pic: &ParsedPicture) -> Result<Self> {
        assemble(&pic.records, pic.width, pic.height, pic.slice_qp as u8)
    }

    /// Planes in channel order (IPM, PUS, BN).
    pub fn planes(&self) -> [&[u8]; 3] {
        [&self.ipm, &self.pus, &self.bn]
    }

    /// Interleaved HWC bytes in channel order.
    pub fn interleaved(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        for i in 0..self.width * self.height {
            out.extend_from_slice(&[self.ipm[i], self.pus[i], self.bn[i]]);
        }
        out
    }

    fn check_compactable(&self) -> Result<()> {
        if self.width % 4 != 0 || self.height % 4 != 0 {
            return Err(Error::InvalidValue(
                "compact form needs dimensions divisible by 4".into(),
            ));
        }
        for plane in self.planes() {
            for y in 0..self.height {
                for x in 0..self.width {
                    if plane[y * self.width + x] != plane[(y & !3) * self.width + (x & !3)] {
                        return Err(Error::InvalidValue(format!(
                            "plane not constant over the 4x4 block at ({}, {})",
                            x & !3,
                            y & !3
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Serializes to FIMG; `compact` stores one value per 4x4 block.
    pub fn to_fimg(&self, compact: bool) -> Result<Vec<u8>> {
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(Error::InvalidValue(
                "feature image too large for FIMG".into(),
            ));
        }
        if compact {
            self.check_compactable()?;
        }
        let mut out = Vec::with_capacity(12 + 3 * self.width * self.height);
        out.extend_from_slice(FIMG_MAGIC);
        out.push(FIMG_VERSION);
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.push(self.qp);
        out.push(if compact { FLAG_COMPACT } else { 0 });
        for plane in self.planes() {
            if compact {
                for y in (0..self.height).step_by(4) {
                    for x in (0..self.width).step_by(4) {
                        out.push(plane[y * self.width + x]);
                    }
                }
            } else {
                out.extend_from_slice(plane);
            }
        }
        Ok(out)
    }

    pub fn from_fimg(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 11 || &bytes[..4] != FIMG_MAGIC {
            return Err(Error::Format("not a FIMG file".into()));
        }
        if bytes[4] != FIMG_VERSION {
            return Err(Error::Format(format!(
                "unsupported FIMG version {}",
                bytes[4]
            )));
        }
        let width = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
        let height = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
        let qp = bytes[9];
        let flags = bytes[10];
        if flags & !FLAG_COMPACT != 0 {
            return Err(Error::Format(format!("unknown FIMG flags {flags:#04x}")));
        }
        let compact = flags & FLAG_COMPACT != 0;
        if compact && (width % 4 != 0 || height % 4 != 0) {
            return Err(Error::Format(
                "compact FIMG with dimensions not divisible by 4".into(),
            ));
        }
        let plane_len = if compact {
            (width / 4) * (height / 4)
        } else {
            width * height
        };
        let body = &bytes[11..];
        if body.len() != 3 * plane_len {
            return Err(Error::Format(format!(
                "FIMG payload is {} bytes, expected {}",
                body.len(),
                3 * plane_len
            )));
        }
        let expand = |p: &[u8]| -> Vec<u8> {
            if !compact {
                return p.to_vec();
            }
            let cw = width / 4;
            let mut out = vec![0u8; width * height];
            for y in 0..height {
                for x in 0..width {
                    out[y * width + x] = p[(y / 4) * cw + x / 4];
                }
            }
            out
        };
        Ok(FeatureImage {
            width,
            height,
            qp,
            ipm: expand(&body[..plane_len]),
            pus: expand(&body[plane_len..2 * plane_len]),
            bn: expand(&body[2 * plane_len..]),
        })
    }

    pub fn save(&self, path: &Path, compact: bool) -> Result<()> {
        std::fs::write(path, self.to_fimg(compact)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_fimg(&std::fs::read(path)?)
    }

    /// Binary PPM (P6) with IPM, PUS, BN as R, G, B.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 3 * self.width * self.height);
        let _ = write!(out, "P6\n{} {}\n255\n", self.width, self.height);
        out.extend_from_slice(&self.interleaved());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(x: u32, y: u32, size: u32, ipm: u8, bins: u64) -> PuRecord {
        PuRecord {
            x,
            y,
            size,
            ipm,
            bins,
        }
    }

    #[test]
    fn ipm_mapping() {
        assert_eq!(map_ipm(0).unwrap(), 0);
        assert_eq!(map_ipm(34).unwrap(), 255);
        assert_eq!(map_ipm(17).unwrap(), 128);
        assert!(map_ipm(35).is_err());
        let mut seen: Vec<u8> = (0..=34).map(|m| map_ipm(m).unwrap()).collect();
        seen.dedup();
        assert_eq!(seen.len(), 35);
    }

    #[test]
    fn pus_mapping() {
        let got: Vec<u8> = [4, 8, 16, 32]
            .iter()
            .map(|&s| map_pus(s).unwrap())
            .collect();
        assert_eq!(got, vec![0, 85, 170, 255]);
        assert!(map_pus(64).is_err());
    }

    #[test]
    fn bn_mapping() {
        let r = [rec(0, 0, 4, 0, 5), rec(4, 0, 4, 0, 25), rec(0, 4, 4, 0, 15)];
        assert_eq!(map_bn(&r).unwrap(), vec![0, 255, 128]);
        let flat = [rec(0, 0, 4, 0, 9), rec(4, 0, 4, 0, 9)];
        assert_eq!(map_bn(&flat).unwrap(), vec![0, 0]);
        assert!(matches!(map_bn(&[]), Err(Error::EmptyRecordList)));
    }

    fn quadrants() -> Vec<PuRecord> {
        vec![
            rec(0, 0, 32, 0, 10),
            rec(32, 0, 32, 26, 20),
            rec(0, 32, 32, 10, 30),
            rec(32, 32, 32, 34, 40),
        ]
    }

    #[test]
    fn assemble_constant_blocks() {
        let img = assemble(&quadrants(), 64, 64, 32).unwrap();
        assert_eq!(img.ipm[0], 0);
        assert_eq!(img.ipm[63], map_ipm(26).unwrap());
        assert_eq!(img.ipm[64 * 63], map_ipm(10).unwrap());
        assert_eq!(img.bn[64 * 64 - 1], 255);
        assert!(img.pus.iter().all(|&v| v == 255));
        assert_eq!(img.bn[64 * 40 + 10], 170);
    }

    #[test]
    fn assemble_rejects_gaps() {
        let r = quadrants();
        assert!(matches!(
            assemble(&r[..3], 64, 64, 32),
            Err(Error::TilingGap { .. })
        ));
    }

    #[test]
    fn fimg_round_trips() {
        let img = assemble(&quadrants(), 64, 64, 22).unwrap();
        for compact in [false, true] {
            let bytes = img.to_fimg(compact).unwrap();
            let back = FeatureImage::from_fimg(&bytes).unwrap();
            assert_eq!(back, img);
            assert_eq!(back.to_fimg(compact).unwrap(), bytes);
        }
        assert_eq!(img.to_fimg(true).unwrap().len(), 11 + 3 * 256);
        assert_eq!(img.to_fimg(false).unwrap().len(), 11 + 3 * 4096);
    }

    #[test]
    fn fimg_header_layout() {
        let img = assemble(&quadrants(), 64, 64, 42).unwrap();
        let b = img.to_fimg(true).unwrap();
        assert_eq!(&b[..11], &[b'F', b'I', b'M', b'G', 1, 64, 0, 64, 0, 42, 1]);
    }

    #[test]
    fn fimg_rejects_bad_input() {
        assert!(matches!(
            FeatureImage::from_fimg(b"NOPE"),
            Err(Error::Format(_))
        ));
        let img = assemble(&quadrants(), 64, 64, 42).unwrap();
        let mut b = img.to_fimg(false).unwrap();
        b.pop();
        assert!(matches!(FeatureImage::from_fimg(&b), Err(Error::Format(_))));
    }

    #[test]
    fn ppm_header() {
        let img = assemble(&quadrants(), 64, 64, 42).unwrap();
        let p = img.to_ppm();
        assert!(p.starts_with(b"P6\n64 64\n255\n"));
        assert_eq!(p.len(), 13 + 3 * 4096);
    }
}
