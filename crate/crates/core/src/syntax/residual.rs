//! residual_coding(): walked only to stay in sync with the arithmetic
//! decoder. Levels are tracked just far enough to drive Rice adaptation.

use std::sync::OnceLock;

use crate::cabac::tables::{
    CODED_SUB_BLOCK_FLAG, COEFF_ABS_LEVEL_GREATER1_FLAG, COEFF_ABS_LEVEL_GREATER2_FLAG,
    LAST_SIG_COEFF_X_PREFIX, LAST_SIG_COEFF_Y_PREFIX, SIG_COEFF_FLAG,
};
use crate::cabac::CabacState;
use crate::error::{Error, Result};

pub const SCAN_DIAG: usize = 0;
pub const SCAN_HORIZ: usize = 1;
pub const SCAN_VERT: usize = 2;

/// `scans[log2_size][scan_idx]` lists (x, y) positions for blocks of
/// 1x1 up to 8x8 (4x4 coefficients inside a sub-block and sub-blocks
/// inside a transform block share these tables).
struct ScanTables {
    scans: [[Vec<(u8, u8)>; 3]; 4],
}

fn diagonal(size: usize) -> Vec<(u8, u8)> {
    let mut out = Vec::with_capacity(size * size);
    let (mut x, mut y) = (0i32, 0i32);
    while out.len() < size * size {
        while y >= 0 {
            if (x as usize) < size && (y as usize) < size {
                out.push((x as u8, y as u8));
            }
            y -= 1;
            x += 1;
        }
        y = x;
        x = 0;
    }
    out
}

fn horizontal(size: usize) -> Vec<(u8, u8)> {
    (0..size)
        .flat_map(|y| (0..size).map(move |x| (x as u8, y as u8)))
        .collect()
}

fn vertical(size: usize) -> Vec<(u8, u8)> {
    (0..size)
        .flat_map(|x| (0..size).map(move |y| (x as u8, y as u8)))
        .collect()
}

fn tables() -> &'static ScanTables {
    static TABLES: OnceLock<ScanTables> = OnceLock::new();
    TABLES.get_or_init(|| ScanTables {
        scans: std::array::from_fn(|log2| {
            let size = 1 << log2;
            [diagonal(size), horizontal(size), vertical(size)]
        }),
    })
}

pub fn scan_order(log2_size: usize, scan_idx: usize) -> &'static [(u8, u8)] {
    &tables().scans[log2_size][scan_idx]
}

const CTX_IDX_MAP_4X4: [u8; 16] = [0, 1, 4, 5, 2, 3, 4, 5, 6, 6, 8, 8, 7, 7, 8, 8];

/// Scan order for a block coded with the given intra mode.
pub fn scan_idx_for(log2_size: u8, c_idx: u8, pred_mode: u8) -> usize {
    if log2_size == 2 || (log2_size == 3 && c_idx == 0) {
        match pred_mode {
            6..=14 => SCAN_VERT,
            22..=30 => SCAN_HORIZ,
            _ => SCAN_DIAG,
        }
    } else {
        SCAN_DIAG
    }
}

fn last_prefix(c: &mut CabacState, base: usize, log2: u8, c_idx: u8) -> Result<u32> {
    let (offset, shift) = if c_idx == 0 {
        (
            3 * (log2 as usize - 2) + ((log2 as usize - 1) >> 2),
            (log2 as usize + 1) >> 2,
        )
    } else {
        (15, log2 as usize - 2)
    };
    let c_max = (2 * log2 as u32) - 1;
    let mut v = 0u32;
    while v < c_max && c.decode_bin(base + offset + (v as usize >> shift))? == 1 {
        v += 1;
    }
    Ok(v)
}

fn last_position(c: &mut CabacState, prefix: u32) -> Result<u32> {
    if prefix <= 3 {
        return Ok(prefix);
    }
    let nb = (prefix >> 1) - 1;
    let suffix = c.decode_bypass_n(nb)?;
    Ok((1 << nb) * (2 + (prefix & 1)) + suffix)
}

fn abs_level_remaining(c: &mut CabacState, rice: u32) -> Result<u64> {
    let mut prefix = 0u32;
    while c.decode_bypass()? == 1 {
        prefix += 1;
        if prefix > 32 {
            return Err(Error::malformed(
                "coeff_abs_level_remaining prefix exceeds 32",
            ));
        }
    }
    let mut read = |n: u32| -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | c.decode_bypass()? as u64;
        }
        Ok(v)
    };
    if prefix < 3 {
        Ok(((prefix as u64) << rice) + read(rice)?)
    } else {
        let n = prefix - 3 + rice;
        Ok((((1u64 << (prefix - 3)) + 2) << rice) + read(n)?)
    }
}

/// Decodes one residual block and discards the coefficients.
pub fn residual_coding(
    c: &mut CabacState,
    log2: u8,
    c_idx: u8,
    scan_idx: usize,
    sign_hiding: bool,
) -> Result<()> {
    let chroma = c_idx > 0;
    let x_prefix = last_prefix(c, LAST_SIG_COEFF_X_PREFIX, log2, c_idx)?;
    let y_prefix = last_prefix(c, LAST_SIG_COEFF_Y_PREFIX, log2, c_idx)?;
    let mut last_x = last_position(c, x_prefix)?;
    let mut last_y = last_position(c, y_prefix)?;
    if scan_idx == SCAN_VERT {
        std::mem::swap(&mut last_x, &mut last_y);
    }
    let size = 1u32 << log2;
    if last_x >= size || last_y >= size {
        return Err(Error::malformed(
            "last significant coefficient outside the block",
        ));
    }

    let log2_sb = (log2 - 2) as usize;
    let sb_count = 1usize << log2_sb;
    let sub_scan = scan_order(log2_sb, scan_idx);
    let pos_scan = scan_order(2, scan_idx);
    let last_sb_xy = ((last_x >> 2) as u8, (last_y >> 2) as u8);
    let last_pos_xy = ((last_x & 3) as u8, (last_y & 3) as u8);
    let last_sub_block = sub_scan.iter().position(|&p| p == last_sb_xy).unwrap();
    let last_scan_pos = pos_scan.iter().position(|&p| p == last_pos_xy).unwrap();

    let mut csbf = [[false; 8]; 8];
    let mut greater1_ctx_state: Option<u32> = None;

    for i in (0..=last_sub_block).rev() {
        let (xs, ys) = (sub_scan[i].0 as usize, sub_scan[i].1 as usize);
        let right = xs + 1 < sb_count && csbf[xs + 1][ys];
        let below = ys + 1 < sb_count && csbf[xs][ys + 1];
        let mut infer_sb_dc = false;
        if i < last_sub_block && i > 0 {
            let inc = (right as usize + below as usize).min(1) + if chroma { 2 } else { 0 };
            csbf[xs][ys] = c.decode_bin(CODED_SUB_BLOCK_FLAG + inc)? == 1;
            infer_sb_dc = true;
        } else {
            csbf[xs][ys] = true;
        }

        let mut sig = [false; 16];
        let start: i32 = if i == last_sub_block {
            sig[last_scan_pos] = true;
            last_scan_pos as i32 - 1
        } else {
            15
        };
        if csbf[xs][ys] {
            let prev_csbf = right as u8 + 2 * below as u8;
            for n in (0..=start).rev() {
                let n = n as usize;
                if n > 0 || !infer_sb_dc {
                    let (xp, yp) = pos_scan[n];
                    let xc = (xs << 2) + xp as usize;
                    let yc = (ys << 2) + yp as usize;
                    let inc = sig_ctx_inc(log2, c_idx, scan_idx, xc, yc, xp, yp, prev_csbf);
                    sig[n] = c.decode_bin(SIG_COEFF_FLAG + inc)? == 1;
                    if sig[n] {
                        infer_sb_dc = false;
                    }
                } else {
                    sig[0] = true;
                }
            }
        }

        if !sig.iter().any(|&s| s) {
            continue;
        }

        let mut ctx_set = if i == 0 || chroma { 0 } else { 2 };
        if greater1_ctx_state == Some(0) {
            ctx_set += 1;
        }
        let mut greater1_ctx = 1u32;
        let mut g1 = [false; 16];
        let mut num_greater1 = 0;
        let mut last_greater1_pos: Option<usize> = None;
        let mut first_sig = 16usize;
        let mut last_sig: Option<usize> = None;
        for n in (0..16).rev() {
            if !sig[n] {
                continue;
            }
            if num_greater1 < 8 {
                let inc = ctx_set * 4 + greater1_ctx as usize + if chroma { 16 } else { 0 };
                g1[n] = c.decode_bin(COEFF_ABS_LEVEL_GREATER1_FLAG + inc)? == 1;
                num_greater1 += 1;
                if g1[n] {
                    greater1_ctx = 0;
                    if last_greater1_pos.is_none() {
                        last_greater1_pos = Some(n);
                    }
                } else if greater1_ctx > 0 && greater1_ctx < 3 {
                    greater1_ctx += 1;
                }
            }
            if last_sig.is_none() {
                last_sig = Some(n);
            }
            first_sig = n;
        }
        greater1_ctx_state = Some(greater1_ctx);
        let last_sig = last_sig.unwrap();
        let sign_hidden = sign_hiding && last_sig - first_sig > 3;

        let mut g2 = false;
        if last_greater1_pos.is_some() {
            let inc = ctx_set + if chroma { 4 } else { 0 };
            g2 = c.decode_bin(COEFF_ABS_LEVEL_GREATER2_FLAG + inc)? == 1;
        }

        for n in (0..16).rev() {
            if sig[n] && !(sign_hidden && n == first_sig) {
                c.decode_bypass()?;
            }
        }

        let mut num_sig = 0;
        let mut rice = 0u32;
        for n in (0..16).rev() {
            if !sig[n] {
                continue;
            }
            let base = 1 + g1[n] as u64 + (g2 && Some(n) == last_greater1_pos) as u64;
            let threshold = if num_sig < 8 {
                if Some(n) == last_greater1_pos {
                    3
                } else {
                    2
                }
            } else {
                1
            };
            if base == threshold {
                let rem = abs_level_remaining(c, rice)?;
                if base + rem > 3 * (1u64 << rice) {
                    rice = (rice + 1).min(4);
                }
            }
            num_sig += 1;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sig_ctx_inc(
    log2: u8,
    c_idx: u8,
    scan_idx: usize,
    xc: usize,
    yc: usize,
    xp: u8,
    yp: u8,
    prev_csbf: u8,
) -> usize {
    let mut sig_ctx: usize = if log2 == 2 {
        CTX_IDX_MAP_4X4[(yc << 2) + xc] as usize
    } else if xc + yc == 0 {
        0
    } else {
        let v = match prev_csbf {
            0 => match xp + yp {
                0 => 2,
                1 | 2 => 1,
                _ => 0,
            },
            1 => match yp {
                0 => 2,
                1 => 1,
                _ => 0,
            },
            2 => match xp {
                0 => 2,
                1 => 1,
                _ => 0,
            },
            _ => 2,
        };
        let mut v = v;
        if c_idx == 0 {
            if (xc >> 2) + (yc >> 2) > 0 {
                v += 3;
            }
            v += if log2 == 3 {
                if scan_idx == 0 {
                    9
                } else {
                    15
                }
            } else {
                21
            };
        } else {
            v += if log2 == 3 { 9 } else { 12 };
        }
        v
    };
    if c_idx > 0 {
        sig_ctx += 27;
    }
    sig_ctx
}
