use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A dataset record did not have the fixed on-disk length.
    RecordLength { expected: usize, actual: usize },
    /// A shard's byte length is not a whole number of records.
    ShardLength { len: usize },
    LabelOutOfRange { label: usize },
    SampleCountTooLarge { requested: usize, available: usize },
    ClassUnderfilled { class: u8, needed: usize, available: usize },
    NegativeInput { name: &'static str, value: f64 },
    InvalidConfig(String),
    ShapeMismatch { what: &'static str, expected: String, actual: String },
    /// An autoencoder spec violates its shape contract.
    SpecInvariant(String),
    NonFinite { what: &'static str, epoch: usize, batch: usize },
    MissingLabels,
    MismatchedEvaluation(String),
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::RecordLength { expected, actual } => {
                write!(f, "record must be {expected} bytes, got {actual}")
            }
            Error::ShardLength { len } => {
                write!(f, "shard length {len} is not a multiple of the record size")
            }
            Error::LabelOutOfRange { label } => write!(f, "label {label} outside 0..=9"),
            Error::SampleCountTooLarge { requested, available } => {
                write!(f, "requested {requested} samples but the split holds {available}")
            }
            Error::ClassUnderfilled { class, needed, available } => write!(
                f,
                "class {class} has {available} images, stratified subset needs {needed}"
            ),
            Error::NegativeInput { name, value } => write!(f, "{name} must be >= 0, got {value}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::ShapeMismatch { what, expected, actual } => {
                write!(f, "{what}: expected shape {expected}, got {actual}")
            }
            Error::SpecInvariant(msg) => write!(f, "autoencoder spec invalid: {msg}"),
            Error::NonFinite { what, epoch, batch } => {
                write!(f, "non-finite {what} at epoch {epoch}, batch {batch}")
            }
            Error::MissingLabels => f.write_str("labels required but the batch has none"),
            Error::MismatchedEvaluation(msg) => write!(f, "mismatched evaluation settings: {msg}"),
            Error::Empty(what) => write!(f, "{what} is empty"),
        }
    }
}

impl core::error::Error for Error {}
