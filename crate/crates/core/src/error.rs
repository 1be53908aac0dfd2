//! Error types for every subsystem, each carrying a stable machine-readable code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("bad magic number 0x{0:08x}")]
    BadMagic(u32),
    #[error("truncated record at offset {0}")]
    TruncatedRecord(u64),
    #[error("truncated global header")]
    TruncatedHeader,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PcapError {
    pub fn code(&self) -> &'static str {
        match self {
            PcapError::BadMagic(_) => "pcap.bad_magic",
            PcapError::TruncatedRecord(_) => "pcap.truncated_record",
            PcapError::TruncatedHeader => "pcap.truncated_header",
            PcapError::Io(_) => "pcap.io",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChloError {
    /// The byte stream does not start with a TLS handshake record.
    #[error("stream is not a TLS handshake")]
    NotTls,
    /// More bytes are needed before a complete ClientHello is available.
    #[error("incomplete ClientHello, need more bytes")]
    Incomplete,
    #[error("malformed ClientHello at offset {0}")]
    Malformed(usize),
}

impl ChloError {
    pub fn code(&self) -> &'static str {
        match self {
            ChloError::NotTls => "tls.not_tls",
            ChloError::Incomplete => "tls.incomplete",
            ChloError::Malformed(_) => "tls.malformed",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuicError {
    #[error("no initial-key salt for version 0x{0:08x}")]
    UnknownVersionSalt(u32),
    #[error("packet failed AEAD authentication")]
    AuthFailure,
    #[error("malformed packet at offset {0}")]
    Malformed(usize),
    #[error("gap in CRYPTO stream at offset {0}")]
    Gap(u64),
    #[error("CRYPTO stream ends before the ClientHello is complete")]
    Incomplete,
    #[error("unexpected frame type 0x{0:02x} in Initial packet")]
    UnexpectedFrame(u64),
}

impl QuicError {
    pub fn code(&self) -> &'static str {
        match self {
            QuicError::UnknownVersionSalt(_) => "quic.unknown_version_salt",
            QuicError::AuthFailure => "quic.auth_failure",
            QuicError::Malformed(_) => "quic.malformed",
            QuicError::Gap(_) => "quic.gap",
            QuicError::Incomplete => "quic.incomplete",
            QuicError::UnexpectedFrame(_) => "quic.unexpected_frame",
        }
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("new value {value:?} for field {field} on a frozen dictionary")]
    FrozenDictionary { field: String, value: String },
    #[error("dictionary for field {0} exhausted its code space")]
    DictionaryOverflow(String),
    #[error("dictionary file schema is {found}, expected {expected}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("attribute registry invalid: {0}")]
    InvalidRegistry(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::FrozenDictionary { .. } => "codec.frozen_dictionary",
            CodecError::DictionaryOverflow(_) => "codec.dictionary_overflow",
            CodecError::SchemaVersionMismatch { .. } => "codec.schema_version_mismatch",
            CodecError::InvalidRegistry(_) => "codec.invalid_registry",
            CodecError::Io(_) => "codec.io",
            CodecError::Json(_) => "codec.json",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RankError {
    #[error("column has {column} values but labels has {labels}")]
    LengthMismatch { column: usize, labels: usize },
    #[error("empty input")]
    EmptyInput,
}

impl RankError {
    pub fn code(&self) -> &'static str {
        match self {
            RankError::LengthMismatch { .. } => "rank.length_mismatch",
            RankError::EmptyInput => "rank.empty_input",
        }
    }
}

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training data has a single class; forest is degenerate")]
    DegenerateData,
    #[error("vector length {found} does not match model layout length {expected}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("class {class} has {count} samples, fewer than {k} folds")]
    InsufficientClassSamples { class: String, count: usize, k: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model file schema is {found}, expected {expected}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ForestError {
    pub fn code(&self) -> &'static str {
        match self {
            ForestError::EmptyTrainingSet => "forest.empty_training_set",
            ForestError::DegenerateData => "forest.degenerate_data",
            ForestError::LayoutMismatch { .. } => "forest.layout_mismatch",
            ForestError::InsufficientClassSamples { .. } => "forest.insufficient_class_samples",
            ForestError::InvalidConfig(_) => "forest.invalid_config",
            ForestError::SchemaVersionMismatch { .. } => "forest.schema_version_mismatch",
            ForestError::Io(_) => "forest.io",
            ForestError::Json(_) => "forest.json",
        }
    }
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("no models for provider {provider} over {protocol}")]
    MissingModel { provider: String, protocol: String },
    #[error("model {path}: {reason}")]
    BadModel { path: String, reason: String },
    #[error("bank manifest schema is {found}, expected {expected}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BankError {
    pub fn code(&self) -> &'static str {
        match self {
            BankError::MissingModel { .. } => "bank.missing_model",
            BankError::BadModel { .. } => "bank.bad_model",
            BankError::SchemaVersionMismatch { .. } => "bank.schema_version_mismatch",
            BankError::Forest(e) => e.code(),
            BankError::Io(_) => "bank.io",
            BankError::Json(_) => "bank.json",
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("profile {0} is malformed: {1}")]
    BadProfile(String, String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Quic(#[from] QuicError),
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthError::BadProfile(_, _) => "synth.bad_profile",
            SynthError::Io(_) => "synth.io",
            SynthError::Json(_) => "synth.json",
            SynthError::Pcap(e) => e.code(),
            SynthError::Quic(e) => e.code(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReportError {
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::Io(_) => "report.io",
            ReportError::Csv(_) => "report.csv",
            ReportError::Json(_) => "report.json",
        }
    }
}

/// Top-level error joining every subsystem, used by the pipeline and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Chlo(#[from] ChloError),
    #[error(transparent)]
    Quic(#[from] QuicError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Stable module-qualified code for machine consumption.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Pcap(e) => e.code(),
            Error::Chlo(e) => e.code(),
            Error::Quic(e) => e.code(),
            Error::Codec(e) => e.code(),
            Error::Rank(e) => e.code(),
            Error::Forest(e) => e.code(),
            Error::Bank(e) => e.code(),
            Error::Synth(e) => e.code(),
            Error::Report(e) => e.code(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Other(_) => "other",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
