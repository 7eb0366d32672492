use serde::Serialize;

use super::{FcsError, Result};

/// The HEADER segment is always exactly this many bytes.
pub const HEADER_LEN: usize = 58;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FcsVersion {
    #[serde(rename = "FCS2.0")]
    Fcs2_0,
    #[serde(rename = "FCS3.0")]
    Fcs3_0,
    #[serde(rename = "FCS3.1")]
    Fcs3_1,
}

impl FcsVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            FcsVersion::Fcs2_0 => "FCS2.0",
            FcsVersion::Fcs3_0 => "FCS3.0",
            FcsVersion::Fcs3_1 => "FCS3.1",
        }
    }

    fn from_bytes(b: &[u8]) -> Option<Self> {
        match b {
            b"FCS2.0" => Some(FcsVersion::Fcs2_0),
            b"FCS3.0" => Some(FcsVersion::Fcs3_0),
            b"FCS3.1" => Some(FcsVersion::Fcs3_1),
            _ => None,
        }
    }

    pub fn is_3x(self) -> bool {
        !matches!(self, FcsVersion::Fcs2_0)
    }
}

/// Segment byte offsets from the HEADER. Offsets are inclusive; 0 marks a
/// segment that is absent or whose offsets live in TEXT instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FcsHeader {
    pub version: FcsVersion,
    pub text_begin: u64,
    pub text_end: u64,
    pub data_begin: u64,
    pub data_end: u64,
    pub analysis_begin: u64,
    pub analysis_end: u64,
}

impl FcsHeader {
    pub(crate) fn empty(version: FcsVersion) -> Self {
        FcsHeader {
            version,
            text_begin: 0,
            text_end: 0,
            data_begin: 0,
            data_end: 0,
            analysis_begin: 0,
            analysis_end: 0,
        }
    }

    /// Renders the 58-byte header. A segment whose end offset does not fit
    /// in 8 digits gets both offsets written as 0 (they then live in TEXT).
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [b' '; HEADER_LEN];
        out[..6].copy_from_slice(self.version.as_str().as_bytes());
        let pair = |b: u64, e: u64| if e > 99_999_999 { (0, 0) } else { (b, e) };
        let (tb, te) = pair(self.text_begin, self.text_end);
        let (db, de) = pair(self.data_begin, self.data_end);
        let (ab, ae) = pair(self.analysis_begin, self.analysis_end);
        for (i, v) in [tb, te, db, de, ab, ae].iter().enumerate() {
            let s = format!("{v:>8}");
            out[10 + i * 8..18 + i * 8].copy_from_slice(s.as_bytes());
        }
        out
    }
}

const FIELD_NAMES: [&str; 6] = [
    "text_begin",
    "text_end",
    "data_begin",
    "data_end",
    "analysis_begin",
    "analysis_end",
];

/// Decodes the fixed 58-byte HEADER: version, four spaces, six
/// right-justified 8-character ASCII offsets.
pub fn parse_header(bytes: &[u8]) -> Result<FcsHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(FcsError::Truncated { len: bytes.len() });
    }
    let version = FcsVersion::from_bytes(&bytes[..6])
        .ok_or_else(|| FcsError::UnknownVersion(String::from_utf8_lossy(&bytes[..6]).into_owned()))?;
    if bytes[6..10].iter().any(|&b| b != b' ') {
        return Err(FcsError::MalformedHeader {
            offset: 6,
            reason: "expected four spaces after the version".into(),
        });
    }
    let mut offsets = [0u64; 6];
    for (i, slot) in offsets.iter_mut().enumerate() {
        let start = 10 + i * 8;
        let field = &bytes[start..start + 8];
        *slot = parse_offset(field).ok_or_else(|| FcsError::MalformedOffset {
            field: FIELD_NAMES[i].to_string(),
            offset: start,
        })?;
    }
    let [text_begin, text_end, data_begin, data_end, analysis_begin, analysis_end] = offsets;
    if text_begin > text_end {
        return Err(FcsError::MalformedHeader {
            offset: 10,
            reason: format!("TEXT begin {text_begin} exceeds end {text_end}"),
        });
    }
    if data_begin > data_end {
        return Err(FcsError::MalformedHeader {
            offset: 26,
            reason: format!("DATA begin {data_begin} exceeds end {data_end}"),
        });
    }
    Ok(FcsHeader {
        version,
        text_begin,
        text_end,
        data_begin,
        data_end,
        analysis_begin,
        analysis_end,
    })
}

/// Blank fields decode to 0. Leading spaces are padding; anything else
/// non-numeric is rejected.
fn parse_offset(field: &[u8]) -> Option<u64> {
    let s = std::str::from_utf8(field).ok()?;
    let t = s.trim_start_matches(' ');
    if t.is_empty() {
        return Some(0);
    }
    if !t.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}
