use std::fs;
use std::path::Path;

use hevcface_core::bitio::{
    insert_emulation_prevention, remove_emulation_prevention, split_annexb, BitReader, BitWriter,
};
use hevcface_core::{parse_stream, Error};
use proptest::prelude::*;

fn stream(name: &str) -> Vec<u8> {
    fs::read(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/data/conformance")
            .join(name),
    )
    .unwrap()
}

#[test]
fn truncated_stream_reports_ctu() {
    let bytes = stream("face_128_qp22.hevc");
    for cut in [bytes.len() * 2 / 3, bytes.len() - 40, bytes.len() / 2] {
        let err = parse_stream(&bytes[..cut]).unwrap_err();
        assert!(err.is_malformed_stream(), "cut {cut}: {err}");
        assert!(err.to_string().contains("CTU ("), "cut {cut}: {err}");
    }
}

#[test]
fn corrupted_slice_never_panics() {
    let bytes = stream("coffee_064_qp22.hevc");
    let nals = split_annexb(&bytes).unwrap();
    let slice = nals.iter().find(|n| n.is_vcl()).unwrap();
    for i in 0..64 {
        let mut b = bytes.clone();
        let pos = slice.span.start + 8 + (i * 37) % (slice.span.len() - 8);
        b[pos] ^= 1 << (i % 8);
        if let Err(e) = parse_stream(&b) {
            assert!(e.is_malformed_stream() || e.is_unsupported(), "{e}");
        }
    }
}

#[test]
fn parameter_sets_only_has_no_slice() {
    let bytes = stream("face_064_qp32.hevc");
    let nals = split_annexb(&bytes).unwrap();
    let slice = nals.iter().find(|n| n.is_vcl()).unwrap();
    let head = &bytes[..slice.span.start - slice.start_code_len as usize];
    let err = parse_stream(head).unwrap_err();
    assert!(matches!(err, Error::MalformedCode(_)));
}

#[test]
fn empty_and_garbage_input() {
    assert!(matches!(parse_stream(&[]), Err(Error::NoStartCode)));
    assert!(matches!(parse_stream(&[0xFF; 64]), Err(Error::NoStartCode)));
}

proptest! {
    #[test]
    fn ue_round_trip(values in prop::collection::vec(0u32..(1 << 16), 1..64)) {
        let mut w = BitWriter::new();
        for &v in &values {
            w.write_ue(v);
        }
        let total = w.bit_len();
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        for &v in &values {
            prop_assert_eq!(r.read_ue().unwrap(), v);
        }
        prop_assert_eq!(r.position(), total);
    }

    #[test]
    fn se_round_trip(values in prop::collection::vec(-(1i32 << 15)..(1 << 15), 1..64)) {
        let mut w = BitWriter::new();
        for &v in &values {
            w.write_se(v);
        }
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        for &v in &values {
            prop_assert_eq!(r.read_se().unwrap(), v);
        }
    }

    #[test]
    fn emulation_prevention_round_trip(rbsp in prop::collection::vec(prop_oneof![3 => Just(0u8), 1 => 1u8..4, 1 => any::<u8>()], 0..256)) {
        let escaped = insert_emulation_prevention(&rbsp);
        for w in escaped.windows(3) {
            prop_assert!(!(w[0] == 0 && w[1] == 0 && w[2] <= 2));
        }
        prop_assert_eq!(remove_emulation_prevention(&escaped), rbsp);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let mut framed = vec![0, 0, 1];
        framed.extend_from_slice(&bytes);
        let _ = parse_stream(&framed);
    }
}
