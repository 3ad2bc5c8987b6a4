//! Intra slice-data syntax: coding quadtree, coding units, transform tree
//! and residuals, producing one [`PuRecord`] per prediction unit.
//!
//! Bin attribution: every bin decoded inside a CU goes to that CU's
//! prediction units. Under NxN, per-PU mode syntax and the transform
//! subtree of each quadrant go to that quadrant's PU; CU-wide bins
//! (part_mode, chroma mode, depth-0 chroma cbfs, cu_qp_delta, CU-wide 4x4
//! chroma residuals) are split equally with the remainder on the first PU.
//! split_cu_flag bins go to the next PU emitted, which is the first PU of
//! the region the flag governs, and each CTU's end_of_slice_segment_flag
//! goes to the last PU emitted in that CTU. The per-PU bins therefore sum to
//! the slice total.

pub mod residual;

use crate::bitio::{split_annexb, NalUnit, NAL_PPS, NAL_SPS, NAL_VPS};
use crate::cabac::tables::{
    CBF_CHROMA, CBF_LUMA, CU_QP_DELTA_ABS, INTRA_CHROMA_PRED_MODE, PART_MODE,
    PREV_INTRA_LUMA_PRED_FLAG, SPLIT_CU_FLAG, SPLIT_TRANSFORM_FLAG,
};
use crate::cabac::{BinLogEntry, CabacState};
use crate::error::{Error, Location, Result};
use crate::paramsets::{
    parse_pps, parse_slice_header, parse_sps, parse_vps, peek_slice_pps_id, PictureParams,
    SequenceParams, SliceHeader,
};

use residual::{residual_coding, scan_idx_for};

/// One prediction unit: position and size in luma samples, intra mode, bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PuRecord {
    pub x: u32,
    pub y: u32,
    pub size: u32,
    pub ipm: u8,
    pub bins: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Record every CABAC bin of the slice.
    pub bin_log: bool,
}

#[derive(Debug, Clone)]
pub struct ParsedPicture {
    pub width: u32,
    pub height: u32,
    pub slice_qp: i32,
    /// Records in decoding (z-scan within raster CTU) order.
    pub records: Vec<PuRecord>,
    /// All bins decoded for the slice, terminate bins included.
    pub total_bins: u64,
    /// Zero bits between the stop bit and the end of its byte.
    pub alignment_bits: u32,
    /// Luma intra mode per 4x4 block, row-major, `width / 4` per row.
    pub mode_map: Vec<u8>,
    pub sps: SequenceParams,
    pub pps: PictureParams,
    pub slice: SliceHeader,
    pub bin_log: Option<Vec<BinLogEntry>>,
}

impl ParsedPicture {
    pub fn records_csv(&self) -> String {
        records_csv(&self.records)
    }
}

/// `x,y,size,ipm,bins` with a header line.
pub fn records_csv(records: &[PuRecord]) -> String {
    let mut out = String::from("x,y,size,ipm,bins\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.x, r.y, r.size, r.ipm, r.bins
        ));
    }
    out
}

/// Verifies that the records are disjoint, inside the picture and cover it.
pub fn check_tiling(records: &[PuRecord], width: u32, height: u32) -> Result<()> {
    let gap = |detail: String| Error::TilingGap {
        width: width as usize,
        height: height as usize,
        detail,
    };
    if width % 4 != 0 || height % 4 != 0 {
        return Err(gap("dimensions are not multiples of 4".into()));
    }
    let gw = (width / 4) as usize;
    let mut covered = vec![false; gw * (height / 4) as usize];
    for r in records {
        if ![4, 8, 16, 32].contains(&r.size) || r.x % 4 != 0 || r.y % 4 != 0 {
            return Err(gap(format!("invalid record {r:?}")));
        }
        if r.x + r.size > width || r.y + r.size > height {
            return Err(gap(format!("record {r:?} extends outside the picture")));
        }
        for by in (r.y / 4)..(r.y + r.size) / 4 {
            for bx in (r.x / 4)..(r.x + r.size) / 4 {
                let cell = &mut covered[by as usize * gw + bx as usize];
                if *cell {
                    return Err(gap(format!("overlap at luma ({}, {})", bx * 4, by * 4)));
                }
                *cell = true;
            }
        }
    }
    if let Some(i) = covered.iter().position(|&c| !c) {
        return Err(gap(format!(
            "luma ({}, {}) not covered",
            (i % gw) * 4,
            (i / gw) * 4
        )));
    }
    Ok(())
}

/// Splits `total` into `n` equal parts, the remainder going to the first.
pub fn split_even(total: u64, n: usize) -> Vec<u64> {
    let base = total / n as u64;
    let mut parts = vec![base; n];
    parts[0] += total % n as u64;
    parts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sink {
    Shared,
    Pu(usize),
}

/// Routes the bins of one CU to its shared pool or to individual PUs.
#[derive(Debug)]
struct BinLedger {
    shared: u64,
    pu: [u64; 4],
    sink: Sink,
    mark: u64,
}

impl BinLedger {
    fn new(mark: u64) -> Self {
        BinLedger {
            shared: 0,
            pu: [0; 4],
            sink: Sink::Shared,
            mark,
        }
    }

    fn switch(&mut self, now: u64, to: Sink) -> Sink {
        let n = now - self.mark;
        match self.sink {
            Sink::Shared => self.shared += n,
            Sink::Pu(i) => self.pu[i] += n,
        }
        self.mark = now;
        std::mem::replace(&mut self.sink, to)
    }

    fn finish(&mut self, now: u64, n_pu: usize) -> Vec<u64> {
        self.switch(now, Sink::Shared);
        let shared = split_even(self.shared, n_pu);
        (0..n_pu).map(|i| shared[i] + self.pu[i]).collect()
    }
}

const UNSET: u8 = u8::MAX;

struct CuInfo {
    intra_split: bool,
    max_trafo_depth: u8,
    chroma_mode: u8,
}

struct Picture<'p> {
    sps: &'p SequenceParams,
    pps: &'p PictureParams,
    width: u32,
    height: u32,
    grid_w: usize,
    ct_depth: Vec<u8>,
    ipm: Vec<u8>,
    log2_min_cu_qp_delta: u8,
    is_cu_qp_delta_coded: bool,
    pending_split_bins: u64,
    records: Vec<PuRecord>,
    ledger: BinLedger,
    location: Location,
}

impl<'p> Picture<'p> {
    fn new(sps: &'p SequenceParams, pps: &'p PictureParams) -> Result<Self> {
        if pps.diff_cu_qp_delta_depth as u32 > (sps.ctb_log2_size - sps.min_cb_log2_size) as u32 {
            return Err(Error::malformed(
                "diff_cu_qp_delta_depth exceeds the coding tree depth",
            ));
        }
        let grid_w = (sps.pic_width_luma / 4) as usize;
        let grid_h = (sps.pic_height_luma / 4) as usize;
        Ok(Picture {
            sps,
            pps,
            width: sps.pic_width_luma,
            height: sps.pic_height_luma,
            grid_w,
            ct_depth: vec![UNSET; grid_w * grid_h],
            ipm: vec![UNSET; grid_w * grid_h],
            log2_min_cu_qp_delta: sps.ctb_log2_size - pps.diff_cu_qp_delta_depth,
            is_cu_qp_delta_coded: false,
            pending_split_bins: 0,
            records: Vec::new(),
            ledger: BinLedger::new(0),
            location: Location {
                ctu_x: 0,
                ctu_y: 0,
                cu_x: 0,
                cu_y: 0,
            },
        })
    }

    fn cell(&self, x: i64, y: i64) -> Option<usize> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some((y as usize / 4) * self.grid_w + x as usize / 4)
    }

    fn fill(map: &mut [u8], grid_w: usize, x: u32, y: u32, size: u32, value: u8) {
        for by in (y / 4)..(y + size) / 4 {
            let row = by as usize * grid_w;
            map[row + (x / 4) as usize..row + ((x + size) / 4) as usize].fill(value);
        }
    }

    fn coding_quadtree(
        &mut self,
        c: &mut CabacState,
        x0: u32,
        y0: u32,
        log2: u8,
        depth: u8,
    ) -> Result<()> {
        let size = 1u32 << log2;
        let split = if x0 + size <= self.width
            && y0 + size <= self.height
            && log2 > self.sps.min_cb_log2_size
        {
            let mut inc = 0;
            if let Some(i) = self.cell(x0 as i64 - 1, y0 as i64) {
                inc += (self.ct_depth[i] != UNSET && self.ct_depth[i] > depth) as usize;
            }
            if let Some(i) = self.cell(x0 as i64, y0 as i64 - 1) {
                inc += (self.ct_depth[i] != UNSET && self.ct_depth[i] > depth) as usize;
            }
            let mark = c.mark();
            let bin = c.decode_bin(SPLIT_CU_FLAG + inc)?;
            self.pending_split_bins += c.bins_since(mark);
            bin == 1
        } else {
            log2 > self.sps.min_cb_log2_size
        };
        if self.pps.cu_qp_delta_enabled && log2 >= self.log2_min_cu_qp_delta {
            self.is_cu_qp_delta_coded = false;
        }
        if split {
            let half = size / 2;
            for (dx, dy) in [(0, 0), (half, 0), (0, half), (half, half)] {
                if x0 + dx < self.width && y0 + dy < self.height {
                    self.coding_quadtree(c, x0 + dx, y0 + dy, log2 - 1, depth + 1)?;
                }
            }
            Ok(())
        } else {
            self.coding_unit(c, x0, y0, log2, depth)
        }
    }

    /// Candidate intra mode of a neighbouring block; unavailable blocks and
    /// above neighbours outside the current CTB row count as DC.
    fn neighbour_mode(&self, x: i64, y: i64, cur_y: u32, above: bool) -> u8 {
        if above {
            let ctb_top = (cur_y >> self.sps.ctb_log2_size) << self.sps.ctb_log2_size;
            if y < ctb_top as i64 {
                return 1;
            }
        }
        match self.cell(x, y) {
            Some(i) if self.ipm[i] != UNSET => self.ipm[i],
            _ => 1,
        }
    }

    fn derive_luma_mode(&self, x: u32, y: u32, prev_flag: bool, idx_or_rem: u32) -> u8 {
        let a = self.neighbour_mode(x as i64 - 1, y as i64, y, false);
        let b = self.neighbour_mode(x as i64, y as i64 - 1, y, true);
        let mut list = mpm_list(a, b);
        if prev_flag {
            list[idx_or_rem as usize]
        } else {
            list.sort_unstable();
            let mut mode = idx_or_rem as u8;
            for cand in list {
                if mode >= cand {
                    mode += 1;
                }
            }
            mode
        }
    }

    fn coding_unit(
        &mut self,
        c: &mut CabacState,
        x0: u32,
        y0: u32,
        log2: u8,
        depth: u8,
    ) -> Result<()> {
        self.location.cu_x = x0 as usize;
        self.location.cu_y = y0 as usize;
        self.ledger = BinLedger::new(c.mark());
        let size = 1u32 << log2;
        let nxn = log2 == self.sps.min_cb_log2_size && c.decode_bin(PART_MODE)? == 0;
        let n_pu = if nxn { 4 } else { 1 };
        let pb = if nxn { size / 2 } else { size };
        let pu_sink = |i: usize| if nxn { Sink::Pu(i) } else { Sink::Shared };
        let pu_pos = |i: usize| (x0 + (i as u32 & 1) * pb, y0 + (i as u32 >> 1) * pb);

        let mut prev = [false; 4];
        for (i, p) in prev.iter_mut().enumerate().take(n_pu) {
            self.ledger.switch(c.mark(), pu_sink(i));
            *p = c.decode_bin(PREV_INTRA_LUMA_PRED_FLAG)? == 1;
        }
        let mut modes = [0u8; 4];
        for i in 0..n_pu {
            self.ledger.switch(c.mark(), pu_sink(i));
            let value = if prev[i] {
                if c.decode_bypass()? == 0 {
                    0
                } else {
                    1 + c.decode_bypass()?
                }
            } else {
                c.decode_bypass_n(5)?
            };
            let (px, py) = pu_pos(i);
            modes[i] = self.derive_luma_mode(px, py, prev[i], value);
            Self::fill(&mut self.ipm, self.grid_w, px, py, pb, modes[i]);
        }
        self.ledger.switch(c.mark(), Sink::Shared);
        let chroma_syntax = if c.decode_bin(INTRA_CHROMA_PRED_MODE)? == 0 {
            4
        } else {
            c.decode_bypass_n(2)?
        };
        let chroma_mode = derive_chroma_mode(chroma_syntax, modes[0]);
        Self::fill(&mut self.ct_depth, self.grid_w, x0, y0, size, depth);

        let cu = CuInfo {
            intra_split: nxn,
            max_trafo_depth: self.sps.max_transform_hierarchy_depth_intra + nxn as u8,
            chroma_mode,
        };
        self.transform_tree(c, &cu, x0, y0, log2, 0, 0, false, false)?;

        let bins = self.ledger.finish(c.mark(), n_pu);
        let first = self.records.len();
        if log2 == 6 {
            for ((dx, dy), b) in [(0, 0), (32, 0), (0, 32), (32, 32)]
                .into_iter()
                .zip(split_even(bins[0], 4))
            {
                self.records.push(PuRecord {
                    x: x0 + dx,
                    y: y0 + dy,
                    size: 32,
                    ipm: modes[0],
                    bins: b,
                });
            }
        } else {
            for (i, &b) in bins.iter().enumerate() {
                let (px, py) = pu_pos(i);
                self.records.push(PuRecord {
                    x: px,
                    y: py,
                    size: pb,
                    ipm: modes[i],
                    bins: b,
                });
            }
        }
        self.records[first].bins += std::mem::take(&mut self.pending_split_bins);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn transform_tree(
        &mut self,
        c: &mut CabacState,
        cu: &CuInfo,
        x0: u32,
        y0: u32,
        log2: u8,
        depth: u8,
        blk_idx: u8,
        parent_cbf_cb: bool,
        parent_cbf_cr: bool,
    ) -> Result<()> {
        let sps = self.sps;
        let split = if log2 <= sps.max_tb_log2_size
            && log2 > sps.min_tb_log2_size
            && depth < cu.max_trafo_depth
            && !(cu.intra_split && depth == 0)
        {
            c.decode_bin(SPLIT_TRANSFORM_FLAG + 5 - log2 as usize)? == 1
        } else {
            log2 > sps.max_tb_log2_size || (cu.intra_split && depth == 0)
        };
        let (cbf_cb, cbf_cr) = if log2 > 2 {
            let cb =
                (depth == 0 || parent_cbf_cb) && c.decode_bin(CBF_CHROMA + depth as usize)? == 1;
            let cr =
                (depth == 0 || parent_cbf_cr) && c.decode_bin(CBF_CHROMA + depth as usize)? == 1;
            (cb, cr)
        } else {
            (parent_cbf_cb, parent_cbf_cr)
        };
        if split {
            let half = 1u32 << (log2 - 1);
            for (k, (dx, dy)) in [(0, 0), (half, 0), (0, half), (half, half)]
                .into_iter()
                .enumerate()
            {
                let per_pu = cu.intra_split && depth == 0;
                if per_pu {
                    self.ledger.switch(c.mark(), Sink::Pu(k));
                }
                self.transform_tree(
                    c,
                    cu,
                    x0 + dx,
                    y0 + dy,
                    log2 - 1,
                    depth + 1,
                    k as u8,
                    cbf_cb,
                    cbf_cr,
                )?;
                if per_pu {
                    self.ledger.switch(c.mark(), Sink::Shared);
                }
            }
            return Ok(());
        }
        let cbf_luma = c.decode_bin(CBF_LUMA + (depth == 0) as usize)? == 1;
        self.transform_unit(
            c, cu, x0, y0, log2, depth, blk_idx, cbf_luma, cbf_cb, cbf_cr,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn transform_unit(
        &mut self,
        c: &mut CabacState,
        cu: &CuInfo,
        x0: u32,
        y0: u32,
        log2: u8,
        depth: u8,
        blk_idx: u8,
        cbf_luma: bool,
        cbf_cb: bool,
        cbf_cr: bool,
    ) -> Result<()> {
        if !(cbf_luma || cbf_cb || cbf_cr) {
            return Ok(());
        }
        if self.pps.cu_qp_delta_enabled && !self.is_cu_qp_delta_coded {
            let prev = self.ledger.switch(c.mark(), Sink::Shared);
            let mut abs = 0u32;
            while abs < 5 && c.decode_bin(CU_QP_DELTA_ABS + (abs > 0) as usize)? == 1 {
                abs += 1;
            }
            if abs == 5 {
                let mut k = 0u32;
                while c.decode_bypass()? == 1 {
                    k += 1;
                    if k > 16 {
                        return Err(Error::malformed("cu_qp_delta_abs suffix too long"));
                    }
                }
                abs += (1 << k) - 1 + c.decode_bypass_n(k)?;
            }
            if abs > 0 {
                c.decode_bypass()?;
            }
            if abs > 26 {
                return Err(Error::malformed(format!(
                    "cu_qp_delta_abs = {abs} out of range"
                )));
            }
            self.is_cu_qp_delta_coded = true;
            self.ledger.switch(c.mark(), prev);
        }
        let sdh = self.pps.sign_data_hiding_enabled;
        if cbf_luma {
            let mode = self.ipm[self.cell(x0 as i64, y0 as i64).unwrap()];
            residual_coding(c, log2, 0, scan_idx_for(log2, 0, mode), sdh)?;
        }
        if log2 > 2 {
            let log2_c = log2 - 1;
            let scan = scan_idx_for(log2_c, 1, cu.chroma_mode);
            if cbf_cb {
                residual_coding(c, log2_c, 1, scan, sdh)?;
            }
            if cbf_cr {
                residual_coding(c, log2_c, 2, scan, sdh)?;
            }
        } else if blk_idx == 3 {
            // 4:2:0 chroma of four 4x4 luma blocks, coded with the last one
            let cu_wide = cu.intra_split && depth == 1;
            let prev = if cu_wide {
                Some(self.ledger.switch(c.mark(), Sink::Shared))
            } else {
                None
            };
            let scan = scan_idx_for(2, 1, cu.chroma_mode);
            if cbf_cb {
                residual_coding(c, 2, 1, scan, sdh)?;
            }
            if cbf_cr {
                residual_coding(c, 2, 2, scan, sdh)?;
            }
            if let Some(prev) = prev {
                self.ledger.switch(c.mark(), prev);
            }
        }
        Ok(())
    }
}

/// The three most-probable-mode candidates for left mode `a` and above mode `b`.
pub fn mpm_list(a: u8, b: u8) -> [u8; 3] {
    if a == b {
        if a < 2 {
            [0, 1, 26]
        } else {
            [a, 2 + ((a + 29) % 32), 2 + ((a - 2 + 1) % 32)]
        }
    } else {
        let c = if a != 0 && b != 0 {
            0
        } else if a != 1 && b != 1 {
            1
        } else {
            26
        };
        [a, b, c]
    }
}

/// Chroma intra mode from `intra_chroma_pred_mode` and the CU's first luma mode.
pub fn derive_chroma_mode(syntax: u32, luma: u8) -> u8 {
    if syntax == 4 {
        return luma;
    }
    let cand = [0u8, 26, 10, 1][syntax as usize];
    if cand == luma {
        34
    } else {
        cand
    }
}

/// Decodes the slice data of one picture.
pub fn parse_slice(
    nal: &NalUnit,
    sps: &SequenceParams,
    pps: &PictureParams,
    options: &ParseOptions,
) -> Result<ParsedPicture> {
    let (header, reader) = parse_slice_header(nal, sps, pps)?;
    let mut cabac = CabacState::init_slice(reader, header.slice_qp)?;
    if options.bin_log {
        cabac.enable_bin_log();
    }
    let mut pic = Picture::new(sps, pps)?;
    let ctb = sps.ctb_size();
    let (wc, hc) = (sps.width_in_ctbs(), sps.height_in_ctbs());
    for addr in 0..wc * hc {
        let (cx, cy) = (addr % wc, addr / wc);
        pic.location = Location {
            ctu_x: cx as usize,
            ctu_y: cy as usize,
            cu_x: (cx * ctb) as usize,
            cu_y: (cy * ctb) as usize,
        };
        let end = pic
            .coding_quadtree(&mut cabac, cx * ctb, cy * ctb, sps.ctb_log2_size, 0)
            .and_then(|_| cabac.decode_terminate())
            .map_err(|e| e.at(pic.location))?;
        pic.records.last_mut().expect("every CTU emits a PU").bins += 1;
        let last = addr + 1 == wc * hc;
        if end == 1 && !last {
            return Err(Error::UnsupportedFeature("multi_slice"));
        }
        if end == 0 && last {
            return Err(
                Error::malformed("end_of_slice_segment_flag missing after the last CTU")
                    .at(pic.location),
            );
        }
    }
    let alignment_bits = cabac.finish_slice()?;
    let total_bins = cabac.bins_decoded();
    debug_assert_eq!(pic.records.iter().map(|r| r.bins).sum::<u64>(), total_bins);
    let Picture {
        records,
        ipm,
        width,
        height,
        ..
    } = pic;
    Ok(ParsedPicture {
        width,
        height,
        slice_qp: header.slice_qp,
        records,
        total_bins,
        alignment_bits,
        mode_map: ipm,
        sps: sps.clone(),
        pps: pps.clone(),
        slice: header,
        bin_log: cabac.take_bin_log(),
    })
}

/// Parameter-set store plus picture decoding over a NAL unit sequence.
#[derive(Debug, Default)]
pub struct StreamParser {
    options: ParseOptions,
    sps: Vec<Option<SequenceParams>>,
    pps: Vec<Option<PictureParams>>,
}

impl StreamParser {
    pub fn new(options: ParseOptions) -> Self {
        StreamParser {
            options,
            sps: vec![None; 16],
            pps: vec![None; 64],
        }
    }

    /// Consumes one NAL unit; returns a picture for each coded slice.
    pub fn push(&mut self, nal: &NalUnit) -> Result<Option<ParsedPicture>> {
        if nal.nuh_layer_id > 0 {
            log::debug!("skipping NAL unit of layer {}", nal.nuh_layer_id);
            return Ok(None);
        }
        match nal.nal_unit_type {
            NAL_VPS => {
                parse_vps(nal)?;
            }
            NAL_SPS => {
                let sps = parse_sps(nal)?;
                let id = sps.sps_id as usize;
                self.sps[id] = Some(sps);
            }
            NAL_PPS => {
                let pps = parse_pps(nal)?;
                let id = pps.pps_id as usize;
                self.pps[id] = Some(pps);
            }
            0..=9 | 16..=21 => {
                let (first, pps_id) = peek_slice_pps_id(nal)?;
                if !first {
                    return Err(Error::UnsupportedFeature("multi_slice"));
                }
                let pps = self.pps[pps_id as usize].as_ref().ok_or_else(|| {
                    Error::malformed(format!("slice refers to missing PPS {pps_id}"))
                })?;
                let sps = self.sps[pps.sps_id as usize].as_ref().ok_or_else(|| {
                    Error::malformed(format!("PPS {pps_id} refers to missing SPS {}", pps.sps_id))
                })?;
                return parse_slice(nal, sps, pps, &self.options).map(Some);
            }
            other => log::trace!("skipping NAL unit type {other}"),
        }
        Ok(None)
    }
}

/// Parses the first picture found in a list of NAL units.
pub fn parse_picture(nals: &[NalUnit]) -> Result<ParsedPicture> {
    parse_picture_with(nals, &ParseOptions::default())
}

pub fn parse_picture_with(nals: &[NalUnit], options: &ParseOptions) -> Result<ParsedPicture> {
    let mut parser = StreamParser::new(options.clone());
    for nal in nals {
        if let Some(p) = parser.push(nal)? {
            return Ok(p);
        }
    }
    Err(Error::malformed("stream contains no coded slice"))
}

/// Parses every picture of an Annex-B stream.
pub fn parse_stream(stream: &[u8]) -> Result<Vec<ParsedPicture>> {
    parse_stream_with(stream, &ParseOptions::default())
}

pub fn parse_stream_with(stream: &[u8], options: &ParseOptions) -> Result<Vec<ParsedPicture>> {
    let nals = split_annexb(stream)?;
    let mut parser = StreamParser::new(options.clone());
    let mut pictures = Vec::new();
    for nal in &nals {
        if let Some(p) = parser.push(nal)? {
            pictures.push(p);
        }
    }
    if pictures.is_empty() {
        return Err(Error::malformed("stream contains no coded slice"));
    }
    Ok(pictures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mpm_defaults_at_corner() {
        assert_eq!(mpm_list(1, 1), [0, 1, 26]);
        let mut list = mpm_list(1, 1);
        list.sort_unstable();
        let mut mode = 0u8;
        for cand in list {
            if mode >= cand {
                mode += 1;
            }
        }
        assert_eq!(mode, 2);
    }

    #[test]
    fn mpm_angular_neighbours() {
        assert_eq!(mpm_list(2, 2), [2, 33, 3]);
        assert_eq!(mpm_list(34, 34), [34, 33, 3]);
        assert_eq!(mpm_list(10, 26), [10, 26, 0]);
        assert_eq!(mpm_list(0, 26), [0, 26, 1]);
        assert_eq!(mpm_list(0, 1), [0, 1, 26]);
    }

    #[test]
    fn chroma_mode_substitution() {
        assert_eq!(derive_chroma_mode(4, 17), 17);
        assert_eq!(derive_chroma_mode(0, 5), 0);
        assert_eq!(derive_chroma_mode(0, 0), 34);
        assert_eq!(derive_chroma_mode(1, 26), 34);
        assert_eq!(derive_chroma_mode(2, 26), 10);
        assert_eq!(derive_chroma_mode(3, 1), 34);
    }

    #[test]
    fn even_split_remainder_first() {
        assert_eq!(split_even(10, 4), vec![4, 2, 2, 2]);
        assert_eq!(split_even(3, 4), vec![3, 0, 0, 0]);
        assert_eq!(split_even(7, 1), vec![7]);
    }

    #[test]
    fn ledger_routes_bins() {
        let mut l = BinLedger::new(100);
        l.switch(103, Sink::Pu(0));
        l.switch(105, Sink::Pu(3));
        let prev = l.switch(106, Sink::Shared);
        assert_eq!(prev, Sink::Pu(3));
        l.switch(110, prev);
        let bins = l.finish(112, 4);
        // shared = 3 + 4 = 7 -> [4, 1, 1, 1]; pu0 = 2, pu3 = 1 + 2
        assert_eq!(bins, vec![6, 1, 1, 4]);
        assert_eq!(bins.iter().sum::<u64>(), 12);
    }

    #[test]
    fn tiling_detects_gaps_and_overlaps() {
        let full = [
            PuRecord {
                x: 0,
                y: 0,
                size: 4,
                ipm: 0,
                bins: 0,
            },
            PuRecord {
                x: 4,
                y: 0,
                size: 4,
                ipm: 0,
                bins: 0,
            },
            PuRecord {
                x: 0,
                y: 4,
                size: 4,
                ipm: 0,
                bins: 0,
            },
            PuRecord {
                x: 4,
                y: 4,
                size: 4,
                ipm: 0,
                bins: 0,
            },
        ];
        check_tiling(&full, 8, 8).unwrap();
        assert!(matches!(
            check_tiling(&full[..3], 8, 8),
            Err(Error::TilingGap { .. })
        ));
        let mut dup = full.to_vec();
        dup[3] = dup[0];
        assert!(matches!(
            check_tiling(&dup, 8, 8),
            Err(Error::TilingGap { .. })
        ));
    }
}
