//! Reading and writing Flow Cytometry Standard (FCS) list-mode files.
//!
//! An FCS file has three segments: a fixed 58-byte HEADER holding ASCII byte
//! offsets, a delimiter-separated TEXT segment of keyword/value pairs, and a
//! packed DATA segment holding one row per event. Versions 3.0 and 3.1 are
//! read and written (writing always emits 3.1); 2.0 files are accepted on read.
//!
//! No compensation or scale transformation is applied: the event matrix holds
//! the stored channel values, widened or narrowed to `f32`.

mod data;
mod header;
mod text;
mod write;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use data::{decode_data, ByteOrder, DataType, EventMatrix};
pub use header::{parse_header, FcsHeader, FcsVersion, HEADER_LEN};
pub use text::{parse_parameters, parse_text, ParameterInfo, TextSegment};
pub use write::{to_bytes, write_file};

/// Errors raised while parsing or writing FCS files.
#[derive(Debug, Error)]
pub enum FcsError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file is {len} bytes, shorter than the {HEADER_LEN}-byte header")]
    Truncated { len: usize },
    #[error("unknown FCS version string {0:?}")]
    UnknownVersion(String),
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("malformed offset field {field:?} at byte {offset}")]
    MalformedOffset { field: String, offset: usize },
    #[error("{segment} segment [{begin}, {end}] lies outside the {file_len}-byte file")]
    SegmentOutOfBounds {
        segment: &'static str,
        begin: u64,
        end: u64,
        file_len: u64,
    },
    #[error("TEXT segment starting at byte {offset} is not terminated")]
    UnterminatedSegment { offset: u64 },
    #[error("empty keyword or value in TEXT segment at byte {offset}")]
    EmptyValue { offset: u64 },
    #[error("missing required keyword {0}")]
    MissingRequiredKeyword(String),
    #[error("invalid value {value:?} for keyword {keyword}")]
    InvalidKeyword { keyword: String, value: String },
    #[error("unsupported $MODE {0:?}; only list mode (L) is supported")]
    UnsupportedMode(String),
    #[error("unsupported $DATATYPE {0:?}")]
    UnsupportedDatatype(String),
    #[error("unsupported $BYTEORD {0:?}")]
    UnsupportedByteOrder(String),
    #[error("parameter {index} ({name}) has unsupported bit width {bits} for $DATATYPE={datatype}")]
    UnsupportedBitWidth {
        index: usize,
        name: String,
        bits: u32,
        datatype: char,
    },
    #[error("duplicate parameter short name {0:?}")]
    DuplicateParameterName(String),
    #[error("DATA segment at byte {offset} has {actual} bytes, expected {expected}")]
    LengthMismatch { offset: u64, expected: u64, actual: u64 },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}

pub type Result<T, E = FcsError> = std::result::Result<T, E>;

/// One parsed acquisition (a single tube).
#[derive(Debug, Clone, PartialEq)]
pub struct FcsDataset {
    pub header: FcsHeader,
    pub text: TextSegment,
    pub params: Vec<ParameterInfo>,
    pub events: EventMatrix,
    pub source_path: Option<PathBuf>,
}

/// Keywords that the writer regenerates and that therefore carry no meaning
/// when comparing two datasets' keyword sets.
pub(crate) const OFFSET_KEYWORDS: [&str; 7] = [
    "$BEGINANALYSIS",
    "$ENDANALYSIS",
    "$BEGINDATA",
    "$ENDDATA",
    "$BEGINSTEXT",
    "$ENDSTEXT",
    "$NEXTDATA",
];

impl FcsDataset {
    /// Builds an in-memory float dataset from parameters and events.
    ///
    /// The TEXT segment is populated with every required keyword plus
    /// `extra` (which must not redefine `$`-reserved layout keywords).
    pub fn from_events(
        params: Vec<ParameterInfo>,
        events: EventMatrix,
        extra: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        if params.len() != events.n_params() {
            return Err(FcsError::InvalidDataset(format!(
                "{} parameters but event matrix has {} columns",
                params.len(),
                events.n_params()
            )));
        }
        let mut text = TextSegment::new(b'/');
        text.insert("$BEGINANALYSIS", "0");
        text.insert("$ENDANALYSIS", "0");
        text.insert("$BEGINSTEXT", "0");
        text.insert("$ENDSTEXT", "0");
        text.insert("$BEGINDATA", "0");
        text.insert("$ENDDATA", "0");
        text.insert("$BYTEORD", "1,2,3,4");
        text.insert("$DATATYPE", "F");
        text.insert("$MODE", "L");
        text.insert("$NEXTDATA", "0");
        text.insert("$PAR", &params.len().to_string());
        text.insert("$TOT", &events.n_events().to_string());
        let mut params = params;
        for (i, p) in params.iter_mut().enumerate() {
            p.index = i + 1;
            p.bits = 32;
            p.write_keywords(&mut text);
        }
        for (k, v) in extra {
            text.insert(&k, &v);
        }
        let dataset = FcsDataset {
            header: FcsHeader::empty(FcsVersion::Fcs3_1),
            text,
            params,
            events,
            source_path: None,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn n_events(&self) -> usize {
        self.events.n_events()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Column index of the parameter whose `$PnN` equals `name`.
    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.short_name == name)
    }

    pub fn keyword(&self, key: &str) -> Option<&str> {
        self.text.get(key)
    }

    /// Checks the structural invariants a writer relies on.
    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.events.n_params() {
            return Err(FcsError::InvalidDataset(format!(
                "{} parameters but event matrix has {} columns",
                self.params.len(),
                self.events.n_params()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.params {
            if p.short_name.is_empty() {
                return Err(FcsError::InvalidDataset(format!(
                    "parameter {} has an empty name",
                    p.index
                )));
            }
            if !seen.insert(p.short_name.as_str()) {
                return Err(FcsError::DuplicateParameterName(p.short_name.clone()));
            }
        }
        Ok(())
    }

    /// Keyword pairs excluding segment offsets, upper-cased and sorted;
    /// equal for a dataset and its write/parse round trip.
    pub fn semantic_keywords(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .text
            .iter()
            .filter(|(k, _)| !OFFSET_KEYWORDS.contains(&k.to_ascii_uppercase().as_str()))
            .map(|(k, v)| (k.to_ascii_uppercase(), v.to_string()))
            .collect();
        out.sort();
        out
    }
}

/// Shape and keyword summary, the `parse` subcommand's output.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub version: String,
    pub n_events: usize,
    pub n_params: usize,
    pub datatype: String,
    pub parameters: Vec<ParameterInfo>,
    pub keywords: indexmap::IndexMap<String, String>,
}

/// Reads and fully decodes one FCS file.
pub fn parse_file(path: impl AsRef<Path>) -> Result<FcsDataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| FcsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut dataset = parse_bytes(&bytes)?;
    dataset.source_path = Some(path.to_path_buf());
    Ok(dataset)
}

/// Parses an in-memory FCS image. Never panics on malformed input.
pub fn parse_bytes(bytes: &[u8]) -> Result<FcsDataset> {
    let (header, text, params) = parse_metadata(bytes)?;
    let (begin, end) = data_range(&header, &text, bytes.len() as u64)?;
    let segment = match (begin, end) {
        (0, 0) => &bytes[0..0],
        _ => &bytes[begin as usize..=end as usize],
    };
    let events = decode_data(segment, &text, &params).map_err(|e| match e {
        FcsError::LengthMismatch { expected, actual, .. } => FcsError::LengthMismatch {
            offset: begin,
            expected,
            actual,
        },
        other => other,
    })?;
    Ok(FcsDataset {
        header,
        text,
        params,
        events,
        source_path: None,
    })
}

/// Parses HEADER and TEXT only; the DATA segment is never touched.
pub fn parse_metadata(bytes: &[u8]) -> Result<(FcsHeader, TextSegment, Vec<ParameterInfo>)> {
    if bytes.len() < HEADER_LEN {
        return Err(FcsError::Truncated { len: bytes.len() });
    }
    let header = parse_header(&bytes[..HEADER_LEN])?;
    let file_len = bytes.len() as u64;
    if header.text_end >= file_len || header.text_begin < HEADER_LEN as u64 {
        return Err(FcsError::SegmentOutOfBounds {
            segment: "TEXT",
            begin: header.text_begin,
            end: header.text_end,
            file_len,
        });
    }
    let text = parse_text(bytes, header.text_begin, header.text_end, header.version)?;
    let params = parse_parameters(&text)?;
    Ok((header, text, params))
}

/// Summarizes a file's keywords and shape without decoding events.
pub fn summarize_metadata(bytes: &[u8]) -> Result<DatasetSummary> {
    let (header, text, params) = parse_metadata(bytes)?;
    let n_events = text.required_usize("$TOT")?;
    Ok(summary(&header, &text, params, n_events))
}

impl FcsDataset {
    pub fn summary(&self) -> DatasetSummary {
        summary(&self.header, &self.text, self.params.clone(), self.n_events())
    }
}

fn summary(header: &FcsHeader, text: &TextSegment, params: Vec<ParameterInfo>, n_events: usize) -> DatasetSummary {
    DatasetSummary {
        version: header.version.to_string(),
        n_events,
        n_params: params.len(),
        datatype: text.get("$DATATYPE").unwrap_or_default().to_string(),
        parameters: params,
        keywords: text.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    }
}

fn data_range(header: &FcsHeader, text: &TextSegment, file_len: u64) -> Result<(u64, u64)> {
    let (mut begin, mut end) = (header.data_begin, header.data_end);
    if begin == 0 && end == 0 {
        if let (Some(b), Some(e)) = (text.get("$BEGINDATA"), text.get("$ENDDATA")) {
            begin = parse_offset_keyword("$BEGINDATA", b)?;
            end = parse_offset_keyword("$ENDDATA", e)?;
        }
    }
    if (begin, end) == (0, 0) {
        return Ok((0, 0));
    }
    if begin > end || end >= file_len {
        return Err(FcsError::SegmentOutOfBounds {
            segment: "DATA",
            begin,
            end,
            file_len,
        });
    }
    Ok((begin, end))
}

fn parse_offset_keyword(key: &str, value: &str) -> Result<u64> {
    value.trim().parse().map_err(|_| FcsError::InvalidKeyword {
        keyword: key.to_string(),
        value: value.to_string(),
    })
}

impl fmt::Display for FcsVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
