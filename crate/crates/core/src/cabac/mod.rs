//! CABAC arithmetic decoder with bin accounting.

pub mod tables;

use std::fmt::Write as _;

use crate::bitio::BitReader;
use crate::error::{Error, Result};

use tables::{INIT_VALUES, NUM_CONTEXTS, RANGE_TAB_LPS, TRANS_IDX_LPS, TRANS_IDX_MPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContextModel {
    pub p_state_idx: u8,
    pub val_mps: u8,
}

/// Derives a context model from its 8-bit initialization value and the slice QP.
pub fn init_context(init_value: u8, qp: i32) -> ContextModel {
    let slope = (init_value as i32 >> 4) * 5 - 45;
    let offset = ((init_value as i32 & 15) << 3) - 16;
    let pre = (((slope * qp.clamp(0, 51)) >> 4) + offset).clamp(1, 126);
    if pre <= 63 {
        ContextModel {
            p_state_idx: (63 - pre) as u8,
            val_mps: 0,
        }
    } else {
        ContextModel {
            p_state_idx: (pre - 64) as u8,
            val_mps: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinMode {
    Regular,
    Bypass,
    Terminate,
}

impl BinMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BinMode::Regular => "regular",
            BinMode::Bypass => "bypass",
            BinMode::Terminate => "terminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinLogEntry {
    pub index: u64,
    pub mode: BinMode,
    /// Context index for regular bins.
    pub ctx: Option<u16>,
    pub value: u8,
}

/// Renders a bin log as CSV with the header `bin_index,mode,ctx_index,bin_value`.
/// Bypass and terminate bins leave `ctx_index` empty.
pub fn bin_log_csv(log: &[BinLogEntry]) -> String {
    let mut out = String::from("bin_index,mode,ctx_index,bin_value\n");
    for e in log {
        let ctx = e.ctx.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", e.index, e.mode.as_str(), ctx, e.value);
    }
    out
}

/// Decoder state for one slice.
#[derive(Debug, Clone)]
pub struct CabacState<'a> {
    range: u32,
    offset: u32,
    reader: BitReader<'a>,
    contexts: [ContextModel; NUM_CONTEXTS],
    bins_decoded: u64,
    bin_log: Option<Vec<BinLogEntry>>,
}

impl<'a> CabacState<'a> {
    /// Initializes all I-slice contexts for `slice_qp` and loads the first
    /// nine bits of slice data.
    pub fn init_slice(mut reader: BitReader<'a>, slice_qp: i32) -> Result<Self> {
        let mut contexts = [ContextModel::default(); NUM_CONTEXTS];
        for (ctx, &v) in contexts.iter_mut().zip(INIT_VALUES.iter()) {
            *ctx = init_context(v, slice_qp);
        }
        let offset = reader.read_bits(9)?;
        if offset >= 510 {
            return Err(Error::malformed("initial arithmetic decoder offset >= 510"));
        }
        Ok(CabacState {
            range: 510,
            offset,
            reader,
            contexts,
            bins_decoded: 0,
            bin_log: None,
        })
    }

    /// Starts recording every decoded bin.
    pub fn enable_bin_log(&mut self) {
        self.bin_log.get_or_insert_with(Vec::new);
    }

    pub fn bin_log(&self) -> Option<&[BinLogEntry]> {
        self.bin_log.as_deref()
    }

    pub fn take_bin_log(&mut self) -> Option<Vec<BinLogEntry>> {
        self.bin_log.take()
    }

    pub fn bins_decoded(&self) -> u64 {
        self.bins_decoded
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn context(&self, idx: usize) -> ContextModel {
        self.contexts[idx]
    }

    /// Bits consumed from the slice data so far.
    pub fn bit_position(&self) -> usize {
        self.reader.position()
    }

    pub fn mark(&self) -> u64 {
        self.bins_decoded
    }

    pub fn bins_since(&self, mark: u64) -> u64 {
        self.bins_decoded - mark
    }

    #[inline]
    fn record(&mut self, mode: BinMode, ctx: Option<u16>, value: u32) {
        if let Some(log) = self.bin_log.as_mut() {
            log.push(BinLogEntry {
                index: self.bins_decoded,
                mode,
                ctx,
                value: value as u8,
            });
        }
        self.bins_decoded += 1;
    }

    /// Regular-mode bin using context `ctx_idx`.
    pub fn decode_bin(&mut self, ctx_idx: usize) -> Result<u32> {
        let ctx = &mut self.contexts[ctx_idx];
        let lps = RANGE_TAB_LPS[ctx.p_state_idx as usize][((self.range >> 6) & 3) as usize] as u32;
        self.range -= lps;
        let bin;
        if self.offset >= self.range {
            bin = 1 - ctx.val_mps as u32;
            self.offset -= self.range;
            self.range = lps;
            if ctx.p_state_idx == 0 {
                ctx.val_mps = 1 - ctx.val_mps;
            }
            ctx.p_state_idx = TRANS_IDX_LPS[ctx.p_state_idx as usize];
        } else {
            bin = ctx.val_mps as u32;
            ctx.p_state_idx = TRANS_IDX_MPS[ctx.p_state_idx as usize];
        }
        while self.range < 256 {
            self.range <<= 1;
            self.offset = (self.offset << 1) | self.reader.read_bit()?;
        }
        debug_assert!((256..=510).contains(&self.range));
        self.record(BinMode::Regular, Some(ctx_idx as u16), bin);
        Ok(bin)
    }

    pub fn decode_bypass(&mut self) -> Result<u32> {
        self.offset = (self.offset << 1) | self.reader.read_bit()?;
        let bin = if self.offset >= self.range {
            self.offset -= self.range;
            1
        } else {
            0
        };
        self.record(BinMode::Bypass, None, bin);
        Ok(bin)
    }

    /// `n` bypass bins (at most 32), most significant first.
    pub fn decode_bypass_n(&mut self, n: u32) -> Result<u32> {
        debug_assert!(n <= 32);
        let mut v = 0u32;
        for _ in 0..n {
            v = (v << 1) | self.decode_bypass()?;
        }
        Ok(v)
    }

    pub fn decode_terminate(&mut self) -> Result<u32> {
        self.range -= 2;
        let bin = if self.offset >= self.range {
            1
        } else {
            while self.range < 256 {
                self.range <<= 1;
                self.offset = (self.offset << 1) | self.reader.read_bit()?;
            }
            0
        };
        self.record(BinMode::Terminate, None, bin);
        Ok(bin)
    }

    /// Checks the slice tail after `end_of_slice_segment_flag` decoded as 1.
    ///
    /// The last bit pulled into the offset register is the stop bit, so it
    /// must be 1, the rest of its byte zero, and any following bytes zero
    /// (cabac_zero_words). Returns the number of alignment bits after the
    /// stop bit.
    pub fn finish_slice(&self) -> Result<u32> {
        let data = self.reader.data();
        let pos = self.reader.position();
        if pos == 0 || pos > data.len() * 8 {
            return Err(Error::malformed("slice data ended without a stop bit"));
        }
        let stop = pos - 1;
        if (data[stop >> 3] >> (7 - (stop & 7))) & 1 != 1 {
            return Err(Error::malformed(format!(
                "expected rbsp_stop_one_bit at slice data bit {stop}"
            )));
        }
        let mut check = BitReader::new(data);
        check.skip_bits(pos)?;
        let align = ((8 - pos % 8) % 8) as u32;
        if check.read_bits(align)? != 0 {
            return Err(Error::malformed(
                "nonzero alignment bits after end of slice",
            ));
        }
        let tail = &data[pos.div_ceil(8)..];
        if tail.iter().any(|&b| b != 0) {
            return Err(Error::malformed(format!(
                "{} unread bytes after end of slice",
                tail.len()
            )));
        }
        Ok(align)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fnv(hash: &mut u64, v: u16) {
        for b in v.to_le_bytes() {
            *hash ^= b as u64;
            *hash = hash.wrapping_mul(0x100_0000_01b3);
        }
    }

    #[test]
    fn tables_match_checksum() {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for row in RANGE_TAB_LPS.iter() {
            for &v in row {
                fnv(&mut h, v as u16);
            }
        }
        for &v in TRANS_IDX_MPS.iter().chain(TRANS_IDX_LPS.iter()) {
            fnv(&mut h, v as u16);
        }
        for &v in INIT_VALUES.iter() {
            fnv(&mut h, v as u16);
        }
        assert_eq!(h, tables::TABLES_CHECKSUM);
    }

    #[test]
    fn init_context_examples() {
        let c = init_context(154, 32);
        assert_eq!((c.p_state_idx, c.val_mps), (0, 1));
        let c = init_context(154, 22);
        assert_eq!((c.p_state_idx, c.val_mps), (0, 1));
        let c = init_context(0, 0);
        assert_eq!((c.p_state_idx, c.val_mps), (62, 0));
    }

    #[test]
    fn init_context_state_range() {
        for v in 0..=255u8 {
            for qp in 0..=51 {
                let c = init_context(v, qp);
                assert!(c.p_state_idx <= 62 && c.val_mps <= 1);
            }
        }
    }

    #[test]
    fn empty_payload_is_out_of_bits() {
        let err = CabacState::init_slice(BitReader::new(&[]), 32).unwrap_err();
        assert!(matches!(err, Error::OutOfBits));
    }

    #[test]
    fn init_is_deterministic() {
        let data = [0x12, 0x34, 0x56, 0x78];
        let a = CabacState::init_slice(BitReader::new(&data), 27).unwrap();
        let b = CabacState::init_slice(BitReader::new(&data), 27).unwrap();
        assert_eq!(a.range, b.range);
        assert_eq!(a.offset, b.offset);
        assert_eq!(a.contexts, b.contexts);
        assert_eq!(a.range, 510);
        assert_eq!(a.bins_decoded, 0);
    }

    #[test]
    fn counters_and_marks() {
        let data = [0x5A; 16];
        let mut s = CabacState::init_slice(BitReader::new(&data), 30).unwrap();
        let m = s.mark();
        assert_eq!(s.bins_since(m), 0);
        for i in 0..3 {
            s.decode_bin(i).unwrap();
        }
        s.decode_bypass().unwrap();
        s.decode_bypass().unwrap();
        assert_eq!(s.bins_since(m), 5);
        let before = s.bins_decoded();
        assert_eq!(s.decode_bypass_n(0).unwrap(), 0);
        assert_eq!(s.bins_decoded(), before);
        s.decode_terminate().unwrap();
        assert_eq!(s.bins_since(m), 6);
    }

    #[test]
    fn bin_log_csv_format() {
        let data = [0xA5; 8];
        let mut s = CabacState::init_slice(BitReader::new(&data), 30).unwrap();
        s.enable_bin_log();
        s.decode_bin(4).unwrap();
        s.decode_bypass().unwrap();
        let csv = bin_log_csv(s.bin_log().unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_index,mode,ctx_index,bin_value");
        assert!(lines[1].starts_with("0,regular,4,"));
        assert!(lines[2].starts_with("1,bypass,,"));
    }

    #[test]
    fn range_stays_normalized() {
        let data: Vec<u8> = (0..256u32).map(|i| (i * 37 + 11) as u8).collect();
        let mut s = CabacState::init_slice(BitReader::new(&data), 22).unwrap();
        for i in 0..1500 {
            match i % 3 {
                0 => s.decode_bin(i % NUM_CONTEXTS).unwrap(),
                1 => s.decode_bypass().unwrap(),
                _ => {
                    if s.decode_terminate().unwrap() == 1 {
                        break;
                    }
                    0
                }
            };
            assert!((256..=510).contains(&s.range()), "range {}", s.range());
        }
    }
}
