//! Decodes an Annex-B HEVC stream with an instrumented reference decoder and
//! writes the oracle files consumed by the conformance tests:
//!
//!   <out>.trace.csv  x,y,size,ipm per prediction unit (decode order)
//!   <out>.bins       total CABAC bins of the slice
//!   <out>.bintrace  bin_index,mode,bin_value for the first 100 bins
//!   <out>.y          reconstructed 8-bit luma (raw, cropped)
//!
//! Usage: ref-trace <in.hevc> <out-prefix>

use std::fs;
use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: ref-trace <in.hevc> <out-prefix>");
        return ExitCode::from(1);
    }
    let bytes = fs::read(&args[1]).expect("read input");
    let trace = match heic_decoder::trace_annexb(&bytes) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: decode failed: {e}", args[1]);
            return ExitCode::from(2);
        }
    };
    let mut csv = String::from("x,y,size,ipm\n");
    for (x, y, size, ipm) in &trace.pus {
        csv.push_str(&format!("{x},{y},{size},{ipm}\n"));
    }
    fs::write(format!("{}.trace.csv", args[2]), csv).expect("write trace");
    fs::write(format!("{}.bins", args[2]), format!("{}\n", trace.bins)).expect("write bins");
    let mut bt = String::from("bin_index,mode,bin_value\n");
    for (i, (mode, value)) in trace.bin_log.iter().take(100).enumerate() {
        let mode = ["regular", "bypass", "terminate"][*mode as usize];
        bt.push_str(&format!("{i},{mode},{value}\n"));
    }
    fs::write(format!("{}.bintrace", args[2]), bt).expect("write bin trace");
    let [left, right, top, bottom] = trace.crop.map(|v| v as usize);
    let mut luma = Vec::new();
    for y in top..trace.height - bottom {
        for x in left..trace.width - right {
            luma.push(trace.luma[y * trace.width + x] as u8);
        }
    }
    fs::write(format!("{}.y", args[2]), luma).expect("write luma");
    println!(
        "{}: {}x{} qp={} pus={} bins={}",
        args[1],
        trace.width,
        trace.height,
        trace.slice_qp,
        trace.pus.len(),
        trace.bins
    );
    ExitCode::SUCCESS
}
