use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no Annex-B start code found")]
    NoStartCode,

    #[error("NAL unit at byte {offset} is truncated")]
    TruncatedNal { offset: usize },

    #[error("ran out of bits")]
    OutOfBits,

    #[error("malformed bitstream: {0}")]
    MalformedCode(String),

    #[error("unsupported feature: {0}")]
    UnsupportedFeature(&'static str),

    #[error("{source} (at {location})")]
    At {
        location: Location,
        #[source]
        source: Box<Error>,
    },

    #[error("record list is empty")]
    EmptyRecordList,

    #[error("prediction units do not tile the {width}x{height} picture: {detail}")]
    TilingGap {
        width: usize,
        height: usize,
        detail: String,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedCode(msg.into())
    }

    /// The innermost error, with any location wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_unsupported(&self) -> bool {
        matches!(self.root(), Error::UnsupportedFeature(_))
    }

    /// True for errors caused by a damaged or non-conforming stream.
    pub fn is_malformed_stream(&self) -> bool {
        matches!(
            self.root(),
            Error::NoStartCode
                | Error::TruncatedNal { .. }
                | Error::OutOfBits
                | Error::MalformedCode(_)
        )
    }

    pub(crate) fn at(self, location: Location) -> Self {
        match self {
            already @ Error::At { .. } => already,
            other => Error::At {
                location,
                source: Box::new(other),
            },
        }
    }
}

/// Where in the picture a parse error happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub ctu_x: usize,
    pub ctu_y: usize,
    pub cu_x: usize,
    pub cu_y: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CTU ({}, {}), CU at luma ({}, {})",
            self.ctu_x, self.ctu_y, self.cu_x, self.cu_y
        )
    }
}
