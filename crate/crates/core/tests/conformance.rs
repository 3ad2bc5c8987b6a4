//! Parser output against the instrumented reference decoder's traces.
//!
//! Each stream under tests/data/conformance has:
//!   .trace.csv  x,y,size,ipm per PU in decoding order
//!   .bins       total bins of the slice
//!   .bintrace   mode and value of the first 100 bins

use std::fs;
use std::path::{Path, PathBuf};

use hevcface_core::bitio::split_annexb;
use hevcface_core::cabac::BinMode;
use hevcface_core::syntax::{check_tiling, parse_stream_with, ParseOptions, ParsedPicture};
use hevcface_core::FeatureImage;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/conformance")
}

fn streams() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(data_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "hevc"))
        .collect();
    v.sort();
    assert!(v.len() >= 10, "expected at least 10 conformance streams");
    v
}

fn parse(path: &Path) -> ParsedPicture {
    let bytes = fs::read(path).unwrap();
    let opts = ParseOptions { bin_log: true };
    let mut pics =
        parse_stream_with(&bytes, &opts).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(pics.len(), 1);
    pics.remove(0)
}

fn sidecar(path: &Path, ext: &str) -> String {
    fs::read_to_string(path.with_extension(ext)).unwrap()
}

#[test]
fn records_match_reference_trace() {
    for path in streams() {
        let pic = parse(&path);
        let expected: Vec<(u32, u32, u32, u8)> = sidecar(&path, "trace.csv")
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<u32> = l.split(',').map(|v| v.parse().unwrap()).collect();
                (f[0], f[1], f[2], f[3] as u8)
            })
            .collect();
        let got: Vec<(u32, u32, u32, u8)> = pic
            .records
            .iter()
            .map(|r| (r.x, r.y, r.size, r.ipm))
            .collect();
        assert_eq!(
            got.len(),
            expected.len(),
            "{}: record count",
            path.display()
        );
        for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
            assert_eq!(g, e, "{}: record {i}", path.display());
        }
    }
}

#[test]
fn bin_totals_match_reference() {
    for path in streams() {
        let pic = parse(&path);
        let expected: u64 = sidecar(&path, "bins").trim().parse().unwrap();
        assert_eq!(pic.total_bins, expected, "{}", path.display());
    }
}

#[test]
fn first_bins_match_reference_trace() {
    for path in streams() {
        let pic = parse(&path);
        let log = pic.bin_log.as_ref().unwrap();
        for (i, line) in sidecar(&path, "bintrace").lines().skip(1).enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let mode = match f[1] {
                "regular" => BinMode::Regular,
                "bypass" => BinMode::Bypass,
                "terminate" => BinMode::Terminate,
                other => panic!("unknown mode {other}"),
            };
            let e = log[i];
            assert_eq!(e.index, i as u64);
            assert_eq!(
                (e.mode, e.value),
                (mode, f[2].parse::<u8>().unwrap()),
                "{}: bin {i}",
                path.display()
            );
        }
    }
}

#[test]
fn slice_ends_cleanly() {
    for path in streams() {
        let pic = parse(&path);
        assert!(pic.alignment_bits <= 7, "{}", path.display());
        let log = pic.bin_log.as_ref().unwrap();
        let terminates: Vec<u8> = log
            .iter()
            .filter(|e| e.mode == BinMode::Terminate)
            .map(|e| e.value)
            .collect();
        let ctus = pic.sps.width_in_ctbs() * pic.sps.height_in_ctbs();
        assert_eq!(terminates.len() as u32, ctus, "{}", path.display());
        assert_eq!(*terminates.last().unwrap(), 1);
        assert!(terminates[..terminates.len() - 1].iter().all(|&v| v == 0));
    }
}

#[test]
fn tiling_and_bin_conservation() {
    for path in streams() {
        let pic = parse(&path);
        check_tiling(&pic.records, pic.width, pic.height).unwrap();
        let area: u64 = pic.records.iter().map(|r| (r.size * r.size) as u64).sum();
        assert_eq!(area, (pic.width * pic.height) as u64);
        let bins: u64 = pic.records.iter().map(|r| r.bins).sum();
        assert_eq!(bins, pic.total_bins, "{}", path.display());
    }
}

#[test]
fn mode_map_matches_records() {
    for path in streams() {
        let pic = parse(&path);
        let gw = (pic.width / 4) as usize;
        for r in &pic.records {
            for by in r.y / 4..(r.y + r.size) / 4 {
                for bx in r.x / 4..(r.x + r.size) / 4 {
                    assert_eq!(pic.mode_map[by as usize * gw + bx as usize], r.ipm);
                }
            }
        }
    }
}

#[test]
fn slice_qp_matches_encode_qp() {
    for path in streams() {
        let name = path.file_stem().unwrap().to_str().unwrap().to_string();
        let Some(qp) = name
            .split('_')
            .find_map(|t| t.strip_prefix("qp").and_then(|v| v.parse::<i32>().ok()))
        else {
            continue;
        };
        let pic = parse(&path);
        assert_eq!(pic.slice_qp, qp, "{name}");
    }
}

#[test]
fn sequence_params_of_reference_stream() {
    let pic = parse(&data_dir().join("face_064_qp32.hevc"));
    assert_eq!((pic.sps.pic_width_luma, pic.sps.pic_height_luma), (64, 64));
    assert_eq!(pic.sps.ctb_log2_size, 6);
    assert!(!pic.pps.tiles_enabled);
    assert!(!pic.pps.entropy_sync_enabled);
    assert_eq!(pic.slice_qp, 32);
}

#[test]
fn annexb_round_trip_on_streams() {
    for path in streams() {
        let bytes = fs::read(&path).unwrap();
        for nal in split_annexb(&bytes).unwrap() {
            let start = nal.span.start - nal.start_code_len as usize;
            assert_eq!(
                nal.to_annexb(),
                &bytes[start..nal.span.end],
                "{}",
                path.display()
            );
        }
    }
}

#[test]
fn feature_images_are_deterministic() {
    for path in streams().iter().take(4) {
        let a = FeatureImage::from_picture(&parse(path)).unwrap();
        let b = FeatureImage::from_picture(&parse(path)).unwrap();
        assert_eq!(a.to_fimg(false).unwrap(), b.to_fimg(false).unwrap());
    }
}

#[test]
fn ipm_and_pus_planes_match_trace_oracle() {
    let mut checked = 0;
    for path in streams() {
        let planes = path.with_extension("planes");
        if !planes.exists() {
            continue;
        }
        let expected = fs::read(&planes).unwrap();
        let img = FeatureImage::from_picture(&parse(&path)).unwrap();
        let n = img.width * img.height;
        assert_eq!(
            &expected[..n],
            &img.ipm[..],
            "{}: IPM plane",
            path.display()
        );
        assert_eq!(
            &expected[n..],
            &img.pus[..],
            "{}: PUS plane",
            path.display()
        );
        checked += 1;
    }
    assert!(checked >= 3);
}
