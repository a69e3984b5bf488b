use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its documented domain.
    Parameter(String),
    /// Two images (or an image and a mask) disagree on shape.
    ShapeMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },
    /// Two images disagree on sample depth.
    DepthMismatch,
    /// A batch or dataset operation was given nothing to work on.
    Empty(&'static str),
    IndexOutOfRange { index: usize, len: usize },
    /// CutMix needs a second source image, which only exists at batch scope.
    CutMixNeedsBatch,
    /// Malformed external data (buffer lengths, labels).
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ShapeMismatch { expected, found } => write!(
                f,
                "shape mismatch: expected {}x{}x{}, found {}x{}x{}",
                expected.0, expected.1, expected.2, found.0, found.1, found.2
            ),
            Error::DepthMismatch => f.write_str("sample depth mismatch"),
            Error::Empty(what) => write!(f, "{what} is empty"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::CutMixNeedsBatch => f.write_str(
                "cutmix draws its donor patch from a different image; use generate_batch with at least two images",
            ),
            Error::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
