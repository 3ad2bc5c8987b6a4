//! Annex-B byte streams, NAL units and the MSB-first bit reader.

use std::ops::Range;

use crate::error::{Error, Result};

pub const NAL_VPS: u8 = 32;
pub const NAL_SPS: u8 = 33;
pub const NAL_PPS: u8 = 34;
pub const NAL_EOS: u8 = 36;
pub const NAL_EOB: u8 = 37;

/// One NAL unit with its emulation-prevention bytes removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NalUnit {
    pub nal_unit_type: u8,
    pub nuh_layer_id: u8,
    pub temporal_id: u8,
    /// Payload after the two header bytes, emulation prevention removed.
    pub rbsp: Vec<u8>,
    /// Byte range of the escaped unit (header included) in the source stream.
    pub span: Range<usize>,
    /// Length of the start code that preceded the unit (3 or 4).
    pub start_code_len: u8,
}

impl NalUnit {
    pub fn is_vcl(&self) -> bool {
        self.nal_unit_type < 32
    }

    /// IDR, CRA or BLA picture.
    pub fn is_irap(&self) -> bool {
        (16..=23).contains(&self.nal_unit_type)
    }

    pub fn is_idr(&self) -> bool {
        self.nal_unit_type == 19 || self.nal_unit_type == 20
    }

    pub fn header_bytes(&self) -> [u8; 2] {
        [
            (self.nal_unit_type << 1) | (self.nuh_layer_id >> 5),
            ((self.nuh_layer_id & 0x1f) << 3) | (self.temporal_id + 1),
        ]
    }

    /// Re-escapes the unit and prefixes its original start code.
    pub fn to_annexb(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.rbsp.len() + 8);
        if self.start_code_len == 4 {
            out.push(0);
        }
        out.extend_from_slice(&[0, 0, 1]);
        out.extend_from_slice(&self.header_bytes());
        out.extend_from_slice(&insert_emulation_prevention(&self.rbsp));
        out
    }
}

/// Splits an Annex-B byte stream into NAL units, in stream order.
///
/// Both 3- and 4-byte start codes are accepted; zero bytes trailing a unit
/// (including after the last one) are not part of the unit.
pub fn split_annexb(stream: &[u8]) -> Result<Vec<NalUnit>> {
    let starts = find_start_codes(stream);
    if starts.is_empty() {
        return Err(Error::NoStartCode);
    }
    let mut units = Vec::with_capacity(starts.len());
    for (i, &(code_pos, payload_pos)) in starts.iter().enumerate() {
        let limit = starts.get(i + 1).map_or(stream.len(), |&(next, _)| next);
        let mut end = limit;
        while end > payload_pos && stream[end - 1] == 0 {
            end -= 1;
        }
        let start_code_len = (payload_pos - code_pos) as u8;
        units.push(parse_nal(stream, payload_pos..end, start_code_len)?);
    }
    Ok(units)
}

/// Returns (start-code position, payload position) pairs. A start code
/// preceded by a zero byte is reported as 4 bytes long.
fn find_start_codes(stream: &[u8]) -> Vec<(usize, usize)> {
    let mut found = Vec::new();
    let mut i = 0;
    while i + 3 <= stream.len() {
        if stream[i + 2] > 1 {
            i += 3;
            continue;
        }
        if stream[i] == 0 && stream[i + 1] == 0 && stream[i + 2] == 1 {
            let code_pos = if i > 0 && stream[i - 1] == 0 {
                i - 1
            } else {
                i
            };
            found.push((code_pos, i + 3));
            i += 3;
        } else {
            i += 1;
        }
    }
    found
}

fn parse_nal(stream: &[u8], span: Range<usize>, start_code_len: u8) -> Result<NalUnit> {
    let bytes = &stream[span.clone()];
    if bytes.len() < 2 {
        return Err(Error::TruncatedNal { offset: span.start });
    }
    if bytes[0] & 0x80 != 0 {
        return Err(Error::malformed(format!(
            "forbidden_zero_bit set in NAL unit at byte {}",
            span.start
        )));
    }
    let nal_unit_type = (bytes[0] >> 1) & 0x3f;
    let nuh_layer_id = ((bytes[0] & 1) << 5) | (bytes[1] >> 3);
    let tid_plus1 = bytes[1] & 7;
    if tid_plus1 == 0 {
        return Err(Error::malformed(format!(
            "nuh_temporal_id_plus1 is zero in NAL unit at byte {}",
            span.start
        )));
    }
    let rbsp = remove_emulation_prevention(&bytes[2..]);
    if rbsp.is_empty() && nal_unit_type != NAL_EOS && nal_unit_type != NAL_EOB {
        return Err(Error::TruncatedNal { offset: span.start });
    }
    Ok(NalUnit {
        nal_unit_type,
        nuh_layer_id,
        temporal_id: tid_plus1 - 1,
        rbsp,
        span,
        start_code_len,
    })
}

/// Drops every `0x03` that follows two zero bytes.
pub fn remove_emulation_prevention(ebsp: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ebsp.len());
    let mut zeros = 0;
    for &b in ebsp {
        if zeros >= 2 && b == 3 {
            zeros = 0;
            continue;
        }
        zeros = if b == 0 { zeros + 1 } else { 0 };
        out.push(b);
    }
    out
}

/// Inserts `0x03` wherever two zero bytes are followed by a byte <= 3, and
/// after a trailing pair of zero bytes.
pub fn insert_emulation_prevention(rbsp: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(rbsp.len() + rbsp.len() / 64 + 1);
    let mut zeros = 0;
    for &b in rbsp {
        if zeros >= 2 && b <= 3 {
            out.push(3);
            zeros = 0;
        }
        zeros = if b == 0 { zeros + 1 } else { 0 };
        out.push(b);
    }
    if zeros >= 2 {
        out.push(3);
    }
    out
}

/// MSB-first reader over an RBSP.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0 }
    }

    /// Bit offset from the start of the data.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn bits_left(&self) -> usize {
        self.data.len() * 8 - self.pos
    }

    pub fn is_byte_aligned(&self) -> bool {
        self.pos % 8 == 0
    }

    pub fn data(&self) -> &'a [u8] {
        self.data
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<u32> {
        let byte = *self.data.get(self.pos >> 3).ok_or(Error::OutOfBits)?;
        let bit = (byte >> (7 - (self.pos & 7))) & 1;
        self.pos += 1;
        Ok(bit as u32)
    }

    pub fn read_flag(&mut self) -> Result<bool> {
        Ok(self.read_bit()? == 1)
    }

    /// Reads `n` (at most 32) bits, most significant first.
    pub fn read_bits(&mut self, n: u32) -> Result<u32> {
        assert!(n <= 32, "read_bits supports at most 32 bits, got {n}");
        if (n as usize) > self.bits_left() {
            return Err(Error::OutOfBits);
        }
        let mut value: u64 = 0;
        let mut remaining = n;
        while remaining > 0 {
            let byte = self.data[self.pos >> 3];
            let offset = (self.pos & 7) as u32;
            let take = remaining.min(8 - offset);
            let chunk = (byte >> (8 - offset - take)) & ((1u16 << take) - 1) as u8;
            value = (value << take) | chunk as u64;
            self.pos += take as usize;
            remaining -= take;
        }
        Ok(value as u32)
    }

    pub fn skip_bits(&mut self, n: usize) -> Result<()> {
        if n > self.bits_left() {
            return Err(Error::OutOfBits);
        }
        self.pos += n;
        Ok(())
    }

    /// Unsigned Exp-Golomb code, ue(v).
    pub fn read_ue(&mut self) -> Result<u32> {
        let mut leading_zeros = 0u32;
        while self.read_bit()? == 0 {
            leading_zeros += 1;
            if leading_zeros > 31 {
                return Err(Error::malformed("Exp-Golomb prefix longer than 31 bits"));
            }
        }
        if leading_zeros == 0 {
            return Ok(0);
        }
        let suffix = self.read_bits(leading_zeros)?;
        Ok(((1u64 << leading_zeros) - 1 + suffix as u64) as u32)
    }

    /// Signed Exp-Golomb code, se(v).
    pub fn read_se(&mut self) -> Result<i32> {
        let code = self.read_ue()? as i64;
        let magnitude = (code + 1) / 2;
        Ok(if code % 2 == 1 { magnitude } else { -magnitude } as i32)
    }

    /// Reads an unsigned Exp-Golomb value and checks it against `max`.
    pub fn read_ue_max(&mut self, max: u32, what: &str) -> Result<u32> {
        let v = self.read_ue()?;
        if v > max {
            return Err(Error::malformed(format!("{what} = {v} exceeds {max}")));
        }
        Ok(v)
    }

    pub fn read_se_range(&mut self, min: i32, max: i32, what: &str) -> Result<i32> {
        let v = self.read_se()?;
        if v < min || v > max {
            return Err(Error::malformed(format!(
                "{what} = {v} outside [{min}, {max}]"
            )));
        }
        Ok(v)
    }
}

/// MSB-first writer, used to synthesize parameter sets and test streams.
#[derive(Debug, Clone, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> usize {
        self.bits
    }

    pub fn write_bit(&mut self, bit: bool) {
        if self.bits % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }

    pub fn write_bits(&mut self, value: u32, n: u32) {
        assert!(n <= 32);
        for i in (0..n).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    pub fn write_ue(&mut self, value: u32) {
        let code = value as u64 + 1;
        let len = 64 - code.leading_zeros() - 1;
        self.write_bits(0, len);
        self.write_bits(1, 1);
        self.write_bits((code - (1 << len)) as u32, len);
    }

    pub fn write_se(&mut self, value: i32) {
        let code = if value > 0 {
            2 * value as i64 - 1
        } else {
            -2 * value as i64
        };
        self.write_ue(code as u32);
    }

    /// Appends a stop bit and zero bits up to the next byte boundary.
    pub fn write_trailing_bits(&mut self) {
        self.write_bit(true);
        while self.bits % 8 != 0 {
            self.write_bit(false);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_single_vps_unit() {
        let units = split_annexb(&[0, 0, 1, 0x40, 0x01, 0xAA]).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].nal_unit_type, NAL_VPS);
        assert_eq!(units[0].nuh_layer_id, 0);
        assert_eq!(units[0].temporal_id, 0);
        assert_eq!(units[0].rbsp, vec![0xAA]);
        assert_eq!(units[0].start_code_len, 3);
    }

    #[test]
    fn removes_emulation_prevention_byte() {
        let units = split_annexb(&[0, 0, 0, 1, 0x42, 0x01, 0, 0, 3, 2]).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].nal_unit_type, NAL_SPS);
        assert_eq!(units[0].rbsp, vec![0, 0, 2]);
        assert_eq!(units[0].start_code_len, 4);
    }

    #[test]
    fn empty_stream_has_no_start_code() {
        assert!(matches!(split_annexb(&[]), Err(Error::NoStartCode)));
        assert!(matches!(
            split_annexb(&[1, 2, 3, 4]),
            Err(Error::NoStartCode)
        ));
    }

    #[test]
    fn one_byte_unit_is_truncated() {
        let err = split_annexb(&[0, 0, 1, 0x40]).unwrap_err();
        assert!(matches!(err, Error::TruncatedNal { offset: 3 }));
    }

    #[test]
    fn trailing_zero_bytes_are_ignored() {
        let units = split_annexb(&[0, 0, 1, 0x40, 0x01, 0xAA, 0, 0, 0, 0]).unwrap();
        assert_eq!(units[0].rbsp, vec![0xAA]);
        let stream = [0, 0, 1, 0x40, 0x01, 0xAA, 0, 0, 0, 1, 0x42, 0x01, 0x55];
        let units = split_annexb(&stream).unwrap();
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].rbsp, vec![0xAA]);
        assert_eq!(units[1].start_code_len, 4);
        assert_eq!(units[1].rbsp, vec![0x55]);
    }

    #[test]
    fn forbidden_bit_is_rejected() {
        let err = split_annexb(&[0, 0, 1, 0xC0, 0x01, 0xAA]).unwrap_err();
        assert!(matches!(err, Error::MalformedCode(_)));
    }

    #[test]
    fn read_bits_msb_first() {
        let data = [0b1010_0000];
        let mut r = BitReader::new(&data);
        assert_eq!(r.read_bits(3).unwrap(), 5);
        assert_eq!(r.position(), 3);
    }

    #[test]
    fn read_zero_bits_is_identity() {
        let data = [0xFF];
        let mut r = BitReader::new(&data);
        assert_eq!(r.read_bits(0).unwrap(), 0);
        assert_eq!(r.position(), 0);
    }

    #[test]
    fn read_past_end_is_out_of_bits() {
        let data = [0xFF];
        let mut r = BitReader::new(&data);
        assert!(matches!(r.read_bits(9), Err(Error::OutOfBits)));
        assert_eq!(r.position(), 0);
    }

    #[test]
    fn read_full_word_across_bytes() {
        let data = [0x12, 0x34, 0x56, 0x78, 0x9A];
        let mut r = BitReader::new(&data);
        assert_eq!(r.read_bits(4).unwrap(), 0x1);
        assert_eq!(r.read_bits(32).unwrap(), 0x2345_6789);
        assert_eq!(r.bits_left(), 4);
    }

    fn reader_for(bits: &str) -> (Vec<u8>, usize) {
        let mut bytes = vec![0u8; bits.len().div_ceil(8).max(1)];
        for (i, c) in bits.chars().enumerate() {
            if c == '1' {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        (bytes, bits.len())
    }

    #[test]
    fn exp_golomb_codewords() {
        for (bits, expected) in [
            ("1", 0),
            ("010", 1),
            ("011", 2),
            ("00100", 3),
            ("0001000", 7),
        ] {
            let (bytes, len) = reader_for(bits);
            let mut r = BitReader::new(&bytes);
            assert_eq!(r.read_ue().unwrap(), expected, "{bits}");
            assert_eq!(r.position(), len);
        }
    }

    #[test]
    fn signed_exp_golomb_codewords() {
        for (bits, expected) in [
            ("1", 0),
            ("010", 1),
            ("011", -1),
            ("00100", 2),
            ("00101", -2),
        ] {
            let (bytes, _) = reader_for(bits);
            assert_eq!(
                BitReader::new(&bytes).read_se().unwrap(),
                expected,
                "{bits}"
            );
        }
    }

    #[test]
    fn exp_golomb_prefix_cap() {
        let bytes = [0u8; 5];
        let err = BitReader::new(&bytes).read_ue().unwrap_err();
        assert!(matches!(err, Error::MalformedCode(_)));
        // 31 zeros, a one, then 31 suffix bits is still legal.
        let mut bytes = [0u8; 8];
        bytes[3] = 0x01;
        bytes[4..8].copy_from_slice(&[0xFF, 0xFF, 0xFF, 0xFE]);
        assert_eq!(BitReader::new(&bytes).read_ue().unwrap(), u32::MAX - 1);
    }

    #[test]
    fn exp_golomb_out_of_bits() {
        let bytes = [0x00];
        assert!(matches!(
            BitReader::new(&bytes).read_ue(),
            Err(Error::OutOfBits)
        ));
    }

    #[test]
    fn writer_round_trip() {
        let mut w = BitWriter::new();
        w.write_ue(0);
        w.write_ue(4095);
        w.write_se(-7);
        w.write_bits(0x2AB, 10);
        w.write_ue(u32::MAX - 1);
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read_ue().unwrap(), 0);
        assert_eq!(r.read_ue().unwrap(), 4095);
        assert_eq!(r.read_se().unwrap(), -7);
        assert_eq!(r.read_bits(10).unwrap(), 0x2AB);
        assert_eq!(r.read_ue().unwrap(), u32::MAX - 1);
    }

    #[test]
    fn emulation_prevention_inverse() {
        let rbsp = [0, 0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0, 4, 0, 0];
        let escaped = insert_emulation_prevention(&rbsp);
        assert_eq!(
            escaped,
            vec![0, 0, 3, 0, 0, 3, 1, 0, 0, 3, 2, 0, 0, 3, 3, 0, 0, 4, 0, 0, 3]
        );
        assert_eq!(remove_emulation_prevention(&escaped), rbsp);
    }
}
