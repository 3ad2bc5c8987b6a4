// @generated by tools/tables/gen_cabac_tables.py. Do not edit by hand.

//! Arithmetic-decoder state tables and I-slice context initialization values.

/// LPS sub-range indexed by `[p_state_idx][(range >> 6) & 3]`.
#[rustfmt::skip]
pub const RANGE_TAB_LPS: [[u8; 4]; 64] = [
    [128, 176, 208, 240], [128, 167, 197, 227], [128, 158, 187, 216], [123, 150, 178, 205],
    [116, 142, 169, 195], [111, 135, 160, 185], [105, 128, 152, 175], [100, 122, 144, 166],
    [95, 116, 137, 158], [90, 110, 130, 150], [85, 104, 123, 142], [81, 99, 117, 135],
    [77, 94, 111, 128], [73, 89, 105, 122], [69, 85, 100, 116], [66, 80, 95, 110],
    [62, 76, 90, 104], [59, 72, 86, 99], [56, 69, 81, 94], [53, 65, 77, 89],
    [51, 62, 73, 85], [48, 59, 69, 80], [46, 56, 66, 76], [43, 53, 63, 72],
    [41, 50, 59, 69], [39, 48, 56, 65], [37, 45, 54, 62], [35, 43, 51, 59],
    [33, 41, 48, 56], [32, 39, 46, 53], [30, 37, 43, 50], [29, 35, 41, 48],
    [27, 33, 39, 45], [26, 31, 37, 43], [24, 30, 35, 41], [23, 28, 33, 39],
    [22, 27, 32, 37], [21, 26, 30, 35], [20, 24, 29, 33], [19, 23, 27, 31],
    [18, 22, 26, 30], [17, 21, 25, 28], [16, 20, 23, 27], [15, 19, 22, 25],
    [14, 18, 21, 24], [14, 17, 20, 23], [13, 16, 19, 22], [12, 15, 18, 21],
    [12, 14, 17, 20], [11, 14, 16, 19], [11, 13, 15, 18], [10, 12, 15, 17],
    [10, 12, 14, 16], [9, 11, 13, 15], [9, 11, 12, 14], [8, 10, 12, 14],
    [8, 9, 11, 13], [7, 9, 11, 12], [7, 9, 10, 12], [7, 8, 10, 11],
    [6, 8, 9, 11], [6, 7, 9, 10], [6, 7, 8, 9], [2, 2, 2, 2],
];

#[rustfmt::skip]
pub const TRANS_IDX_MPS: [u8; 64] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16,
    17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32,
    33, 34, 35, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 46, 47, 48,
    49, 50, 51, 52, 53, 54, 55, 56, 57, 58, 59, 60, 61, 62, 62, 63,
];

#[rustfmt::skip]
pub const TRANS_IDX_LPS: [u8; 64] = [
    0, 0, 1, 2, 2, 4, 4, 5, 6, 7, 8, 9, 9, 11, 11, 12,
    13, 13, 15, 15, 16, 16, 18, 18, 19, 19, 21, 21, 22, 22, 23, 24,
    24, 25, 26, 26, 27, 27, 28, 29, 29, 30, 30, 30, 31, 32, 32, 33,
    33, 33, 34, 34, 35, 35, 35, 36, 36, 36, 37, 37, 37, 38, 38, 63,
];

pub const SPLIT_CU_FLAG: usize = 0;
pub const PART_MODE: usize = 3;
pub const PREV_INTRA_LUMA_PRED_FLAG: usize = 4;
pub const INTRA_CHROMA_PRED_MODE: usize = 5;
pub const SPLIT_TRANSFORM_FLAG: usize = 6;
pub const CBF_LUMA: usize = 9;
pub const CBF_CHROMA: usize = 11;
pub const CU_QP_DELTA_ABS: usize = 15;
pub const LAST_SIG_COEFF_X_PREFIX: usize = 17;
pub const LAST_SIG_COEFF_Y_PREFIX: usize = 35;
pub const CODED_SUB_BLOCK_FLAG: usize = 53;
pub const SIG_COEFF_FLAG: usize = 57;
pub const COEFF_ABS_LEVEL_GREATER1_FLAG: usize = 99;
pub const COEFF_ABS_LEVEL_GREATER2_FLAG: usize = 123;

/// Number of context models used by the intra-slice syntax.
pub const NUM_CONTEXTS: usize = 129;

/// initType 0 initialization values, indexed by context index.
#[rustfmt::skip]
pub const INIT_VALUES: [u8; NUM_CONTEXTS] = [
    // SPLIT_CU_FLAG
    139, 141, 157,
    // PART_MODE
    184,
    // PREV_INTRA_LUMA_PRED_FLAG
    184,
    // INTRA_CHROMA_PRED_MODE
    63,
    // SPLIT_TRANSFORM_FLAG
    153, 138, 138,
    // CBF_LUMA
    111, 141,
    // CBF_CHROMA
    94, 138, 182, 154,
    // CU_QP_DELTA_ABS
    154, 154,
    // LAST_SIG_COEFF_X_PREFIX
    110, 110, 124, 125, 140, 153, 125, 127, 140, 109, 111, 143, 127, 111, 79, 108,
    123, 63,
    // LAST_SIG_COEFF_Y_PREFIX
    110, 110, 124, 125, 140, 153, 125, 127, 140, 109, 111, 143, 127, 111, 79, 108,
    123, 63,
    // CODED_SUB_BLOCK_FLAG
    91, 171, 134, 141,
    // SIG_COEFF_FLAG
    111, 111, 125, 110, 110, 94, 124, 108, 124, 107, 125, 141, 179, 153, 125, 107,
    125, 141, 179, 153, 125, 107, 125, 141, 179, 153, 125, 140, 139, 182, 182, 152,
    136, 152, 136, 153, 136, 139, 111, 136, 139, 111,
    // COEFF_ABS_LEVEL_GREATER1_FLAG
    140, 92, 137, 138, 140, 152, 138, 139, 153, 74, 149, 92, 139, 107, 122, 152,
    140, 179, 166, 182, 140, 227, 122, 197,
    // COEFF_ABS_LEVEL_GREATER2_FLAG
    138, 153, 136, 167, 152, 152,
];

/// FNV-1a 64 checksum of all tables above, as emitted by the generator.
pub const TABLES_CHECKSUM: u64 = 0xf196a7d6ce5bd3af;
