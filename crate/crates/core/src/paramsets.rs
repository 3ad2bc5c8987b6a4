//! Video, sequence and picture parameter sets and slice segment headers.
//!
//! Only the all-intra, 8-bit 4:2:0, single-slice subset is accepted; every
//! other feature that changes slice-data syntax is rejected with
//! [`Error::UnsupportedFeature`].

use crate::bitio::{BitReader, NalUnit, NAL_PPS, NAL_SPS, NAL_VPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChromaFormat {
    Yuv420,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoParams {
    pub vps_id: u8,
    pub max_sub_layers_minus1: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShortTermRps {
    pub negative: Vec<i32>,
    pub positive: Vec<i32>,
}

impl ShortTermRps {
    pub fn num_delta_pocs(&self) -> usize {
        self.negative.len() + self.positive.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceParams {
    pub sps_id: u8,
    pub vps_id: u8,
    pub pic_width_luma: u32,
    pub pic_height_luma: u32,
    pub chroma_format: ChromaFormat,
    pub bit_depth_luma: u8,
    pub bit_depth_chroma: u8,
    pub log2_max_poc_lsb: u8,
    pub ctb_log2_size: u8,
    pub min_cb_log2_size: u8,
    pub min_tb_log2_size: u8,
    pub max_tb_log2_size: u8,
    pub max_transform_hierarchy_depth_intra: u8,
    pub amp_enabled: bool,
    pub sao_enabled: bool,
    pub short_term_rps: Vec<ShortTermRps>,
    pub long_term_ref_pics_present: bool,
    pub num_long_term_ref_pics_sps: u32,
    pub temporal_mvp_enabled: bool,
    pub strong_intra_smoothing: bool,
}

impl SequenceParams {
    pub fn ctb_size(&self) -> u32 {
        1 << self.ctb_log2_size
    }

    pub fn width_in_ctbs(&self) -> u32 {
        self.pic_width_luma.div_ceil(self.ctb_size())
    }

    pub fn height_in_ctbs(&self) -> u32 {
        self.pic_height_luma.div_ceil(self.ctb_size())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PictureParams {
    pub pps_id: u8,
    pub sps_id: u8,
    pub output_flag_present: bool,
    pub num_extra_slice_header_bits: u8,
    pub sign_data_hiding_enabled: bool,
    pub init_qp: i32,
    pub constrained_intra_pred: bool,
    pub transform_skip_enabled: bool,
    pub cu_qp_delta_enabled: bool,
    pub diff_cu_qp_delta_depth: u8,
    pub cb_qp_offset: i32,
    pub cr_qp_offset: i32,
    pub slice_chroma_qp_offsets_present: bool,
    pub tiles_enabled: bool,
    pub entropy_sync_enabled: bool,
    pub loop_filter_across_slices_enabled: bool,
    pub deblocking_filter_override_enabled: bool,
    pub deblocking_filter_disabled: bool,
    pub lists_modification_present: bool,
    pub slice_header_extension_present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceType {
    I,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceHeader {
    pub first_slice_in_pic: bool,
    pub pps_id: u8,
    pub slice_type: SliceType,
    pub slice_qp: i32,
    pub sao_luma: bool,
    pub sao_chroma: bool,
    pub first_ctb_address: u32,
    pub cb_qp_offset: i32,
    pub cr_qp_offset: i32,
    pub deblocking_filter_disabled: bool,
    /// Byte offset of the first slice-data byte within the RBSP.
    pub data_offset: usize,
}

fn flag(r: &mut BitReader) -> Result<bool> {
    r.read_flag()
}

fn ceil_log2(n: usize) -> u32 {
    usize::BITS - (n.max(1) - 1).leading_zeros()
}

fn expect_type(nal: &NalUnit, ty: u8, what: &str) -> Result<()> {
    if nal.nal_unit_type != ty {
        return Err(Error::InvalidValue(format!(
            "expected {what} NAL unit, got type {}",
            nal.nal_unit_type
        )));
    }
    Ok(())
}

fn profile_tier_level(r: &mut BitReader, max_sub_layers_minus1: u8) -> Result<()> {
    // general profile space .. general_level_idc
    r.skip_bits(88)?;
    r.skip_bits(8)?;
    let mut profile_present = [false; 8];
    let mut level_present = [false; 8];
    for i in 0..max_sub_layers_minus1 as usize {
        profile_present[i] = flag(r)?;
        level_present[i] = flag(r)?;
    }
    if max_sub_layers_minus1 > 0 {
        r.skip_bits(2 * (8 - max_sub_layers_minus1 as usize))?;
    }
    for i in 0..max_sub_layers_minus1 as usize {
        if profile_present[i] {
            r.skip_bits(88)?;
        }
        if level_present[i] {
            r.skip_bits(8)?;
        }
    }
    Ok(())
}

fn sub_layer_hrd(r: &mut BitReader, cpb_cnt: u32, sub_pic: bool) -> Result<()> {
    for _ in 0..cpb_cnt {
        r.read_ue()?;
        r.read_ue()?;
        if sub_pic {
            r.read_ue()?;
            r.read_ue()?;
        }
        flag(r)?;
    }
    Ok(())
}

fn hrd_parameters(r: &mut BitReader, common: bool, max_sub_layers_minus1: u8) -> Result<()> {
    let mut nal_hrd = false;
    let mut vcl_hrd = false;
    let mut sub_pic = false;
    if common {
        nal_hrd = flag(r)?;
        vcl_hrd = flag(r)?;
        if nal_hrd || vcl_hrd {
            sub_pic = flag(r)?;
            if sub_pic {
                r.skip_bits(8 + 5 + 1 + 5)?;
            }
            r.skip_bits(4 + 4)?;
            if sub_pic {
                r.skip_bits(4)?;
            }
            r.skip_bits(5 + 5 + 5)?;
        }
    }
    for _ in 0..=max_sub_layers_minus1 {
        let general = flag(r)?;
        let within_cvs = if general { true } else { flag(r)? };
        let mut low_delay = false;
        if within_cvs {
            r.read_ue()?;
        } else {
            low_delay = flag(r)?;
        }
        let mut cpb_cnt = 1;
        if !low_delay {
            cpb_cnt = r.read_ue_max(31, "cpb_cnt_minus1")? + 1;
        }
        if nal_hrd {
            sub_layer_hrd(r, cpb_cnt, sub_pic)?;
        }
        if vcl_hrd {
            sub_layer_hrd(r, cpb_cnt, sub_pic)?;
        }
    }
    Ok(())
}

pub fn parse_vps(nal: &NalUnit) -> Result<VideoParams> {
    expect_type(nal, NAL_VPS, "VPS")?;
    let mut r = BitReader::new(&nal.rbsp);
    let vps_id = r.read_bits(4)? as u8;
    r.skip_bits(2)?;
    let max_layers_minus1 = r.read_bits(6)?;
    let max_sub_layers_minus1 = r.read_bits(3)? as u8;
    if max_sub_layers_minus1 > 6 {
        return Err(Error::malformed("vps_max_sub_layers_minus1 > 6"));
    }
    flag(&mut r)?;
    if r.read_bits(16)? != 0xffff {
        return Err(Error::malformed("vps_reserved_0xffff_16bits mismatch"));
    }
    if max_layers_minus1 != 0 {
        log::debug!(
            "VPS declares {} layers; only the base layer is decoded",
            max_layers_minus1 + 1
        );
    }
    profile_tier_level(&mut r, max_sub_layers_minus1)?;
    let ordering_all = flag(&mut r)?;
    let first = if ordering_all {
        0
    } else {
        max_sub_layers_minus1
    };
    for _ in first..=max_sub_layers_minus1 {
        r.read_ue()?;
        r.read_ue()?;
        r.read_ue()?;
    }
    let max_layer_id = r.read_bits(6)?;
    let num_layer_sets_minus1 = r.read_ue_max(1023, "vps_num_layer_sets_minus1")?;
    r.skip_bits(num_layer_sets_minus1 as usize * (max_layer_id as usize + 1))?;
    if flag(&mut r)? {
        r.skip_bits(64)?;
        if flag(&mut r)? {
            r.read_ue()?;
        }
        let num_hrd = r.read_ue_max(num_layer_sets_minus1 + 1, "vps_num_hrd_parameters")?;
        for i in 0..num_hrd {
            r.read_ue()?; // hrd_layer_set_idx
            let common = if i > 0 { flag(&mut r)? } else { true };
            hrd_parameters(&mut r, common, max_sub_layers_minus1)?;
        }
    }
    Ok(VideoParams {
        vps_id,
        max_sub_layers_minus1,
    })
}

fn st_ref_pic_set(
    r: &mut BitReader,
    idx: usize,
    num_in_sps: usize,
    previous: &[ShortTermRps],
) -> Result<ShortTermRps> {
    let inter = idx != 0 && flag(r)?;
    if inter {
        let delta_idx = if idx == num_in_sps {
            r.read_ue_max(idx as u32 - 1, "delta_idx_minus1")? as usize + 1
        } else {
            1
        };
        let sign = flag(r)?;
        let abs = r.read_ue_max(1 << 15, "abs_delta_rps_minus1")? as i32 + 1;
        let delta_rps = if sign { -abs } else { abs };
        let reference = &previous[idx - delta_idx];
        let ref_pocs: Vec<i32> = reference
            .negative
            .iter()
            .chain(reference.positive.iter())
            .copied()
            .collect();
        let mut out = ShortTermRps::default();
        for j in 0..=ref_pocs.len() {
            let used = flag(r)?;
            let use_delta = if used { true } else { flag(r)? };
            if !use_delta {
                continue;
            }
            let d = ref_pocs.get(j).copied().unwrap_or(0) + delta_rps;
            if d < 0 {
                out.negative.push(d);
            } else if d > 0 {
                out.positive.push(d);
            }
        }
        out.negative.sort_unstable_by(|a, b| b.cmp(a));
        out.positive.sort_unstable();
        Ok(out)
    } else {
        let num_negative = r.read_ue_max(16, "num_negative_pics")?;
        let num_positive = r.read_ue_max(16, "num_positive_pics")?;
        let mut out = ShortTermRps::default();
        let mut poc = 0i32;
        for _ in 0..num_negative {
            poc -= r.read_ue_max(1 << 15, "delta_poc_s0_minus1")? as i32 + 1;
            flag(r)?;
            out.negative.push(poc);
        }
        poc = 0;
        for _ in 0..num_positive {
            poc += r.read_ue_max(1 << 15, "delta_poc_s1_minus1")? as i32 + 1;
            flag(r)?;
            out.positive.push(poc);
        }
        Ok(out)
    }
}

fn vui_parameters(r: &mut BitReader, max_sub_layers_minus1: u8) -> Result<()> {
    if flag(r)? && r.read_bits(8)? == 255 {
        r.skip_bits(32)?;
    }
    if flag(r)? {
        flag(r)?;
    }
    if flag(r)? {
        r.skip_bits(4)?;
        if flag(r)? {
            r.skip_bits(24)?;
        }
    }
    if flag(r)? {
        r.read_ue()?;
        r.read_ue()?;
    }
    r.skip_bits(3)?;
    if flag(r)? {
        for _ in 0..4 {
            r.read_ue()?;
        }
    }
    if flag(r)? {
        r.skip_bits(64)?;
        if flag(r)? {
            r.read_ue()?;
        }
        if flag(r)? {
            hrd_parameters(r, true, max_sub_layers_minus1)?;
        }
    }
    if flag(r)? {
        r.skip_bits(3)?;
        for _ in 0..5 {
            r.read_ue()?;
        }
    }
    Ok(())
}

pub fn parse_sps(nal: &NalUnit) -> Result<SequenceParams> {
    expect_type(nal, NAL_SPS, "SPS")?;
    let mut r = BitReader::new(&nal.rbsp);
    let r = &mut r;
    let vps_id = r.read_bits(4)? as u8;
    let max_sub_layers_minus1 = r.read_bits(3)? as u8;
    if max_sub_layers_minus1 > 6 {
        return Err(Error::malformed("sps_max_sub_layers_minus1 > 6"));
    }
    flag(r)?;
    profile_tier_level(r, max_sub_layers_minus1)?;
    let sps_id = r.read_ue_max(15, "sps_seq_parameter_set_id")? as u8;
    let chroma_format_idc = r.read_ue_max(3, "chroma_format_idc")?;
    if chroma_format_idc == 3 && flag(r)? {
        return Err(Error::UnsupportedFeature("separate_colour_plane"));
    }
    if chroma_format_idc != 1 {
        return Err(Error::UnsupportedFeature("chroma_format"));
    }
    let pic_width_luma = r.read_ue_max(16888, "pic_width_in_luma_samples")?;
    let pic_height_luma = r.read_ue_max(16888, "pic_height_in_luma_samples")?;
    if pic_width_luma == 0 || pic_height_luma == 0 {
        return Err(Error::malformed("zero picture dimension"));
    }
    if flag(r)? {
        for _ in 0..4 {
            r.read_ue()?;
        }
    }
    let bit_depth_luma = r.read_ue_max(8, "bit_depth_luma_minus8")? as u8 + 8;
    let bit_depth_chroma = r.read_ue_max(8, "bit_depth_chroma_minus8")? as u8 + 8;
    if bit_depth_luma != 8 || bit_depth_chroma != 8 {
        return Err(Error::UnsupportedFeature("bit_depth"));
    }
    let log2_max_poc_lsb = r.read_ue_max(12, "log2_max_pic_order_cnt_lsb_minus4")? as u8 + 4;
    let ordering_all = flag(r)?;
    let first = if ordering_all {
        0
    } else {
        max_sub_layers_minus1
    };
    for _ in first..=max_sub_layers_minus1 {
        r.read_ue()?;
        r.read_ue()?;
        r.read_ue()?;
    }
    let min_cb_log2_size = r.read_ue_max(3, "log2_min_luma_coding_block_size_minus3")? as u8 + 3;
    let ctb_log2_size =
        min_cb_log2_size + r.read_ue_max(3, "log2_diff_max_min_luma_coding_block_size")? as u8;
    if !(4..=6).contains(&ctb_log2_size) {
        return Err(Error::malformed(format!(
            "CTB log2 size {ctb_log2_size} outside [4, 6]"
        )));
    }
    let min_tb_log2_size = r.read_ue_max(3, "log2_min_luma_transform_block_size_minus2")? as u8 + 2;
    let max_tb_log2_size =
        min_tb_log2_size + r.read_ue_max(3, "log2_diff_max_min_luma_transform_block_size")? as u8;
    if min_tb_log2_size >= min_cb_log2_size || max_tb_log2_size > ctb_log2_size.min(5) {
        return Err(Error::malformed(
            "transform block sizes inconsistent with coding block sizes",
        ));
    }
    let max_depth_limit = (ctb_log2_size - min_tb_log2_size) as u32;
    r.read_ue_max(max_depth_limit, "max_transform_hierarchy_depth_inter")?;
    let max_transform_hierarchy_depth_intra =
        r.read_ue_max(max_depth_limit, "max_transform_hierarchy_depth_intra")? as u8;
    if flag(r)? {
        return Err(Error::UnsupportedFeature("scaling_lists"));
    }
    let amp_enabled = flag(r)?;
    let sao_enabled = flag(r)?;
    if flag(r)? {
        return Err(Error::UnsupportedFeature("pcm"));
    }
    let num_st = r.read_ue_max(64, "num_short_term_ref_pic_sets")? as usize;
    let mut short_term_rps = Vec::with_capacity(num_st);
    for i in 0..num_st {
        let rps = st_ref_pic_set(r, i, num_st, &short_term_rps)?;
        short_term_rps.push(rps);
    }
    let long_term_ref_pics_present = flag(r)?;
    let mut num_long_term_ref_pics_sps = 0;
    if long_term_ref_pics_present {
        num_long_term_ref_pics_sps = r.read_ue_max(32, "num_long_term_ref_pics_sps")?;
        for _ in 0..num_long_term_ref_pics_sps {
            r.skip_bits(log2_max_poc_lsb as usize + 1)?;
        }
    }
    let temporal_mvp_enabled = flag(r)?;
    let strong_intra_smoothing = flag(r)?;
    if flag(r)? {
        vui_parameters(r, max_sub_layers_minus1)?;
    }
    if flag(r)? {
        return Err(Error::UnsupportedFeature("sps_extension"));
    }
    let min_cb = 1u32 << min_cb_log2_size;
    if pic_width_luma % min_cb != 0 || pic_height_luma % min_cb != 0 {
        return Err(Error::malformed(
            "picture dimensions are not multiples of the minimum coding block size",
        ));
    }
    Ok(SequenceParams {
        sps_id,
        vps_id,
        pic_width_luma,
        pic_height_luma,
        chroma_format: ChromaFormat::Yuv420,
        bit_depth_luma,
        bit_depth_chroma,
        log2_max_poc_lsb,
        ctb_log2_size,
        min_cb_log2_size,
        min_tb_log2_size,
        max_tb_log2_size,
        max_transform_hierarchy_depth_intra,
        amp_enabled,
        sao_enabled,
        short_term_rps,
        long_term_ref_pics_present,
        num_long_term_ref_pics_sps,
        temporal_mvp_enabled,
        strong_intra_smoothing,
    })
}

pub fn parse_pps(nal: &NalUnit) -> Result<PictureParams> {
    expect_type(nal, NAL_PPS, "PPS")?;
    let mut r = BitReader::new(&nal.rbsp);
    let r = &mut r;
    let pps_id = r.read_ue_max(63, "pps_pic_parameter_set_id")? as u8;
    let sps_id = r.read_ue_max(15, "pps_seq_parameter_set_id")? as u8;
    if flag(r)? {
        return Err(Error::UnsupportedFeature("dependent_slices"));
    }
    let output_flag_present = flag(r)?;
    let num_extra_slice_header_bits = r.read_bits(3)? as u8;
    let sign_data_hiding_enabled = flag(r)?;
    flag(r)?; // cabac_init_present_flag, irrelevant for I slices
    r.read_ue_max(14, "num_ref_idx_l0_default_active_minus1")?;
    r.read_ue_max(14, "num_ref_idx_l1_default_active_minus1")?;
    let init_qp = 26 + r.read_se_range(-26, 25, "init_qp_minus26")?;
    let constrained_intra_pred = flag(r)?;
    let transform_skip_enabled = flag(r)?;
    if transform_skip_enabled {
        return Err(Error::UnsupportedFeature("transform_skip"));
    }
    let cu_qp_delta_enabled = flag(r)?;
    let diff_cu_qp_delta_depth = if cu_qp_delta_enabled {
        r.read_ue_max(3, "diff_cu_qp_delta_depth")? as u8
    } else {
        0
    };
    let cb_qp_offset = r.read_se_range(-12, 12, "pps_cb_qp_offset")?;
    let cr_qp_offset = r.read_se_range(-12, 12, "pps_cr_qp_offset")?;
    let slice_chroma_qp_offsets_present = flag(r)?;
    flag(r)?; // weighted_pred_flag
    flag(r)?; // weighted_bipred_flag
    if flag(r)? {
        return Err(Error::UnsupportedFeature("transquant_bypass"));
    }
    let tiles_enabled = flag(r)?;
    if tiles_enabled {
        return Err(Error::UnsupportedFeature("tiles"));
    }
    let entropy_sync_enabled = flag(r)?;
    if entropy_sync_enabled {
        return Err(Error::UnsupportedFeature("wavefronts"));
    }
    let loop_filter_across_slices_enabled = flag(r)?;
    let mut deblocking_filter_override_enabled = false;
    let mut deblocking_filter_disabled = false;
    if flag(r)? {
        deblocking_filter_override_enabled = flag(r)?;
        deblocking_filter_disabled = flag(r)?;
        if !deblocking_filter_disabled {
            r.read_se_range(-6, 6, "pps_beta_offset_div2")?;
            r.read_se_range(-6, 6, "pps_tc_offset_div2")?;
        }
    }
    if flag(r)? {
        return Err(Error::UnsupportedFeature("scaling_lists"));
    }
    let lists_modification_present = flag(r)?;
    r.read_ue()?; // log2_parallel_merge_level_minus2
    let slice_header_extension_present = flag(r)?;
    if flag(r)? {
        return Err(Error::UnsupportedFeature("pps_extension"));
    }
    Ok(PictureParams {
        pps_id,
        sps_id,
        output_flag_present,
        num_extra_slice_header_bits,
        sign_data_hiding_enabled,
        init_qp,
        constrained_intra_pred,
        transform_skip_enabled,
        cu_qp_delta_enabled,
        diff_cu_qp_delta_depth,
        cb_qp_offset,
        cr_qp_offset,
        slice_chroma_qp_offsets_present,
        tiles_enabled,
        entropy_sync_enabled,
        loop_filter_across_slices_enabled,
        deblocking_filter_override_enabled,
        deblocking_filter_disabled,
        lists_modification_present,
        slice_header_extension_present,
    })
}

/// Reads only the fields that precede `slice_pic_parameter_set_id`.
pub fn peek_slice_pps_id(nal: &NalUnit) -> Result<(bool, u8)> {
    let mut r = BitReader::new(&nal.rbsp);
    let first = flag(&mut r)?;
    if nal.is_irap() {
        flag(&mut r)?;
    }
    let pps_id = r.read_ue_max(63, "slice_pic_parameter_set_id")? as u8;
    Ok((first, pps_id))
}

/// Parses a slice segment header and returns a reader positioned at the
/// first byte of slice data.
pub fn parse_slice_header<'a>(
    nal: &'a NalUnit,
    sps: &SequenceParams,
    pps: &PictureParams,
) -> Result<(SliceHeader, BitReader<'a>)> {
    if !nal.is_vcl() {
        return Err(Error::InvalidValue(format!(
            "NAL type {} is not a coded slice",
            nal.nal_unit_type
        )));
    }
    let mut reader = BitReader::new(&nal.rbsp);
    let r = &mut reader;
    let first_slice_in_pic = flag(r)?;
    if nal.is_irap() {
        flag(r)?; // no_output_of_prior_pics_flag
    }
    let pps_id = r.read_ue_max(63, "slice_pic_parameter_set_id")? as u8;
    if pps_id != pps.pps_id {
        return Err(Error::InvalidValue(format!(
            "slice refers to PPS {pps_id}, got PPS {}",
            pps.pps_id
        )));
    }
    if !first_slice_in_pic {
        return Err(Error::UnsupportedFeature("multi_slice"));
    }
    r.skip_bits(pps.num_extra_slice_header_bits as usize)?;
    let slice_type = r.read_ue_max(2, "slice_type")?;
    if slice_type != 2 {
        return Err(Error::UnsupportedFeature("inter_slice"));
    }
    if pps.output_flag_present {
        flag(r)?;
    }
    if !nal.is_idr() {
        r.skip_bits(sps.log2_max_poc_lsb as usize)?;
        let num_st = sps.short_term_rps.len();
        if !flag(r)? {
            st_ref_pic_set(r, num_st, num_st, &sps.short_term_rps)?;
        } else if num_st > 1 {
            let idx = r.read_bits(ceil_log2(num_st))? as usize;
            if idx >= num_st {
                return Err(Error::malformed("short_term_ref_pic_set_idx out of range"));
            }
        }
        if sps.long_term_ref_pics_present {
            let num_lt_sps = if sps.num_long_term_ref_pics_sps > 0 {
                r.read_ue_max(sps.num_long_term_ref_pics_sps, "num_long_term_sps")?
            } else {
                0
            };
            let num_lt_pics = r.read_ue_max(32, "num_long_term_pics")?;
            for i in 0..num_lt_sps + num_lt_pics {
                if i < num_lt_sps {
                    if sps.num_long_term_ref_pics_sps > 1 {
                        r.skip_bits(ceil_log2(sps.num_long_term_ref_pics_sps as usize) as usize)?;
                    }
                } else {
                    r.skip_bits(sps.log2_max_poc_lsb as usize + 1)?;
                }
                if flag(r)? {
                    r.read_ue()?;
                }
            }
        }
        if sps.temporal_mvp_enabled {
            flag(r)?;
        }
    }
    let mut sao_luma = false;
    let mut sao_chroma = false;
    if sps.sao_enabled {
        sao_luma = flag(r)?;
        sao_chroma = flag(r)?;
    }
    let slice_qp = pps.init_qp + r.read_se()?;
    if !(0..=51).contains(&slice_qp) {
        return Err(Error::malformed(format!(
            "SliceQpY = {slice_qp} outside [0, 51]"
        )));
    }
    let mut cb_qp_offset = 0;
    let mut cr_qp_offset = 0;
    if pps.slice_chroma_qp_offsets_present {
        cb_qp_offset = r.read_se_range(-12, 12, "slice_cb_qp_offset")?;
        cr_qp_offset = r.read_se_range(-12, 12, "slice_cr_qp_offset")?;
    }
    let mut deblocking_filter_disabled = pps.deblocking_filter_disabled;
    if pps.deblocking_filter_override_enabled && flag(r)? {
        deblocking_filter_disabled = flag(r)?;
        if !deblocking_filter_disabled {
            r.read_se_range(-6, 6, "slice_beta_offset_div2")?;
            r.read_se_range(-6, 6, "slice_tc_offset_div2")?;
        }
    }
    if pps.loop_filter_across_slices_enabled
        && (sao_luma || sao_chroma || !deblocking_filter_disabled)
    {
        flag(r)?;
    }
    if pps.slice_header_extension_present {
        let len = r.read_ue_max(256, "slice_segment_header_extension_length")?;
        r.skip_bits(8 * len as usize)?;
    }
    if !flag(r)? {
        return Err(Error::malformed("alignment_bit_equal_to_one is zero"));
    }
    while !r.is_byte_aligned() {
        if flag(r)? {
            return Err(Error::malformed("nonzero alignment_bit_equal_to_zero"));
        }
    }
    if sao_luma || sao_chroma {
        return Err(Error::UnsupportedFeature("sao"));
    }
    let header = SliceHeader {
        first_slice_in_pic,
        pps_id,
        slice_type: SliceType::I,
        slice_qp,
        sao_luma,
        sao_chroma,
        first_ctb_address: 0,
        cb_qp_offset,
        cr_qp_offset,
        deblocking_filter_disabled,
        data_offset: reader.position() / 8,
    };
    Ok((header, reader))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitio::BitWriter;

    fn nal(ty: u8, w: BitWriter) -> NalUnit {
        let mut w = w;
        w.write_trailing_bits();
        let rbsp = w.into_bytes();
        NalUnit {
            nal_unit_type: ty,
            nuh_layer_id: 0,
            temporal_id: 0,
            span: 0..rbsp.len() + 2,
            rbsp,
            start_code_len: 4,
        }
    }

    fn ptl(w: &mut BitWriter) {
        w.write_bits(0, 2);
        w.write_bits(0, 1);
        w.write_bits(1, 5);
        w.write_bits(0x6000_0000, 32);
        w.write_bits(0b1001, 4);
        w.write_bits(0, 32);
        w.write_bits(0, 12);
        w.write_bits(93, 8);
    }

    pub(crate) struct SpsFields {
        pub chroma_format_idc: u32,
        pub bit_depth_luma: u32,
        pub scaling_list: bool,
        pub pcm: bool,
    }

    impl Default for SpsFields {
        fn default() -> Self {
            SpsFields {
                chroma_format_idc: 1,
                bit_depth_luma: 8,
                scaling_list: false,
                pcm: false,
            }
        }
    }

    fn sps_bits(f: &SpsFields) -> BitWriter {
        let mut w = BitWriter::new();
        w.write_bits(0, 4);
        w.write_bits(0, 3);
        w.write_bits(1, 1);
        ptl(&mut w);
        w.write_ue(0);
        w.write_ue(f.chroma_format_idc);
        if f.chroma_format_idc == 3 {
            w.write_bits(0, 1);
        }
        w.write_ue(64);
        w.write_ue(64);
        w.write_bits(0, 1);
        w.write_ue(f.bit_depth_luma - 8);
        w.write_ue(0);
        w.write_ue(4);
        w.write_bits(1, 1);
        w.write_ue(1);
        w.write_ue(1);
        w.write_ue(0);
        // log2_min_cb_minus3, diff, min_tb_minus2, diff_tb, inter depth, intra depth
        for v in [0, 3, 0, 3, 1, 1] {
            w.write_ue(v);
        }
        w.write_bits(f.scaling_list as u32, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_bits(f.pcm as u32, 1);
        w.write_ue(0);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_bits(1, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w
    }

    #[test]
    fn synthetic_sps_parses() {
        let sps = parse_sps(&nal(NAL_SPS, sps_bits(&SpsFields::default()))).unwrap();
        assert_eq!(sps.pic_width_luma, 64);
        assert_eq!(sps.min_cb_log2_size, 3);
        assert_eq!(sps.ctb_log2_size, 6);
        assert_eq!(sps.min_tb_log2_size, 2);
        assert_eq!(sps.max_tb_log2_size, 5);
        assert_eq!(sps.max_transform_hierarchy_depth_intra, 1);
    }

    #[test]
    fn ten_bit_sps_is_unsupported() {
        let f = SpsFields {
            bit_depth_luma: 10,
            ..Default::default()
        };
        let err = parse_sps(&nal(NAL_SPS, sps_bits(&f))).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature("bit_depth")));
    }

    #[test]
    fn yuv444_sps_is_unsupported() {
        let f = SpsFields {
            chroma_format_idc: 3,
            ..Default::default()
        };
        let err = parse_sps(&nal(NAL_SPS, sps_bits(&f))).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature("chroma_format")));
    }

    #[test]
    fn scaling_lists_and_pcm_are_unsupported() {
        let f = SpsFields {
            scaling_list: true,
            ..Default::default()
        };
        let err = parse_sps(&nal(NAL_SPS, sps_bits(&f))).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature("scaling_lists")));
        let f = SpsFields {
            pcm: true,
            ..Default::default()
        };
        let err = parse_sps(&nal(NAL_SPS, sps_bits(&f))).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature("pcm")));
    }

    #[derive(Default)]
    struct PpsFields {
        dependent_slices: bool,
        tiles: bool,
        wavefronts: bool,
        transform_skip: bool,
        init_qp_minus26: i32,
    }

    fn pps_bits(f: &PpsFields) -> BitWriter {
        let mut w = BitWriter::new();
        w.write_ue(0);
        w.write_ue(0);
        w.write_bits(f.dependent_slices as u32, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 3);
        w.write_bits(1, 1);
        w.write_bits(0, 1);
        w.write_ue(0);
        w.write_ue(0);
        w.write_se(f.init_qp_minus26);
        w.write_bits(0, 1);
        w.write_bits(f.transform_skip as u32, 1);
        w.write_bits(0, 1);
        w.write_se(0);
        w.write_se(0);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_bits(f.tiles as u32, 1);
        w.write_bits(f.wavefronts as u32, 1);
        w.write_bits(1, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w.write_ue(0);
        w.write_bits(0, 1);
        w.write_bits(0, 1);
        w
    }

    #[test]
    fn synthetic_pps_parses() {
        let f = PpsFields {
            init_qp_minus26: 6,
            ..Default::default()
        };
        let pps = parse_pps(&nal(NAL_PPS, pps_bits(&f))).unwrap();
        assert_eq!(pps.init_qp, 32);
        assert!(pps.sign_data_hiding_enabled);
        assert!(!pps.tiles_enabled);
    }

    #[test]
    fn pps_gates() {
        let cases: [(PpsFields, &str); 4] = [
            (
                PpsFields {
                    tiles: true,
                    ..Default::default()
                },
                "tiles",
            ),
            (
                PpsFields {
                    dependent_slices: true,
                    ..Default::default()
                },
                "dependent_slices",
            ),
            (
                PpsFields {
                    wavefronts: true,
                    ..Default::default()
                },
                "wavefronts",
            ),
            (
                PpsFields {
                    transform_skip: true,
                    ..Default::default()
                },
                "transform_skip",
            ),
        ];
        for (f, name) in cases {
            match parse_pps(&nal(NAL_PPS, pps_bits(&f))).unwrap_err() {
                Error::UnsupportedFeature(n) => assert_eq!(n, name),
                other => panic!("{name}: {other}"),
            }
        }
    }

    fn slice_nal(ty: u8, slice_type: u32, qp_delta: i32) -> NalUnit {
        let mut w = BitWriter::new();
        w.write_bits(1, 1);
        if (16..=23).contains(&ty) {
            w.write_bits(0, 1);
        }
        w.write_ue(0);
        w.write_ue(slice_type);
        w.write_se(qp_delta);
        w.write_bits(1, 1); // slice_loop_filter_across_slices_enabled_flag
        w.write_trailing_bits();
        w.write_bits(0xAB, 8);
        let rbsp = w.into_bytes();
        NalUnit {
            nal_unit_type: ty,
            nuh_layer_id: 0,
            temporal_id: 0,
            span: 0..rbsp.len() + 2,
            rbsp,
            start_code_len: 4,
        }
    }

    fn params() -> (SequenceParams, PictureParams) {
        let sps = parse_sps(&nal(NAL_SPS, sps_bits(&SpsFields::default()))).unwrap();
        let pps = parse_pps(&nal(NAL_PPS, pps_bits(&PpsFields::default()))).unwrap();
        (sps, pps)
    }

    #[test]
    fn slice_header_qp_and_alignment() {
        let (sps, pps) = params();
        let n = slice_nal(19, 2, 6);
        let (h, mut r) = parse_slice_header(&n, &sps, &pps).unwrap();
        assert_eq!(h.slice_qp, 32);
        assert_eq!(h.slice_type, SliceType::I);
        assert!(r.is_byte_aligned());
        assert_eq!(r.read_bits(8).unwrap(), 0xAB);
    }

    #[test]
    fn p_slice_is_unsupported() {
        let (sps, pps) = params();
        let n = slice_nal(1, 1, 0);
        let err = parse_slice_header(&n, &sps, &pps).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFeature("inter_slice")));
    }

    #[test]
    fn slice_qp_out_of_range_is_malformed() {
        let (sps, pps) = params();
        let n = slice_nal(19, 2, 34);
        let err = parse_slice_header(&n, &sps, &pps).unwrap_err();
        assert!(matches!(err, Error::MalformedCode(_)));
    }

    #[test]
    fn inter_rps_prediction() {
        let mut w = BitWriter::new();
        // set 0: two negative pictures at -1 and -3
        w.write_ue(2);
        w.write_ue(0);
        w.write_ue(0);
        w.write_bits(1, 1);
        w.write_ue(1);
        w.write_bits(1, 1);
        // set 1 predicted from set 0 with deltaRps = -1, all used
        w.write_bits(1, 1);
        w.write_bits(1, 1);
        w.write_ue(0);
        for _ in 0..3 {
            w.write_bits(1, 1);
        }
        w.write_trailing_bits();
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        let s0 = st_ref_pic_set(&mut r, 0, 2, &[]).unwrap();
        assert_eq!(s0.negative, vec![-1, -3]);
        let s1 = st_ref_pic_set(&mut r, 1, 2, &[s0]).unwrap();
        assert_eq!(s1.negative, vec![-1, -2, -4]);
        assert!(s1.positive.is_empty());
    }
}
