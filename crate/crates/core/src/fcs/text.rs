use indexmap::IndexMap;
use serde::Serialize;

use super::data::DataType;
use super::{FcsError, FcsVersion, Result};

/// Decoded TEXT segment. Keys keep their original spelling; lookups are
/// case-insensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSegment {
    pub delimiter: u8,
    // upper-cased key -> (key as written, value)
    entries: IndexMap<String, (String, String)>,
}

impl TextSegment {
    pub fn new(delimiter: u8) -> Self {
        TextSegment {
            delimiter,
            entries: IndexMap::new(),
        }
    }

    /// Decodes keyword/value pairs without checking for required keywords.
    ///
    /// `segment` starts with the delimiter byte. A doubled delimiter inside a
    /// token is a literal delimiter. `base` is the segment's file offset and
    /// only feeds error messages.
    pub fn decode(segment: &[u8], base: u64) -> Result<Self> {
        let Some(&delim) = segment.first() else {
            return Err(FcsError::UnterminatedSegment { offset: base });
        };
        let mut text = TextSegment::new(delim);
        let mut tokens: Vec<(u64, Vec<u8>)> = Vec::new();
        let mut cur = Vec::new();
        let mut start = 1usize;
        let mut i = 1usize;
        let mut terminated = true;
        while i < segment.len() {
            let b = segment[i];
            if b == delim {
                if i + 1 < segment.len() && segment[i + 1] == delim && !cur.is_empty() {
                    cur.push(delim);
                    i += 2;
                    continue;
                }
                if cur.is_empty() {
                    return Err(FcsError::EmptyValue {
                        offset: base + i as u64,
                    });
                }
                tokens.push((base + start as u64, std::mem::take(&mut cur)));
                i += 1;
                start = i;
                terminated = true;
            } else {
                cur.push(b);
                terminated = false;
                i += 1;
            }
        }
        // Some writers pad TEXT with blanks or NULs after the final delimiter.
        if !terminated && cur.iter().any(|&b| b != b' ' && b != 0) {
            return Err(FcsError::UnterminatedSegment { offset: base });
        }
        if !tokens.len().is_multiple_of(2) {
            return Err(FcsError::UnterminatedSegment { offset: base });
        }
        for pair in tokens.chunks_exact(2) {
            let key = String::from_utf8_lossy(&pair[0].1).into_owned();
            let value = String::from_utf8_lossy(&pair[1].1).into_owned();
            text.insert(&key, &value);
        }
        Ok(text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&key.to_ascii_uppercase()).map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(&key.to_ascii_uppercase())
    }

    /// Inserts or replaces (case-insensitively) a keyword.
    pub fn insert(&mut self, key: &str, value: &str) {
        self.entries
            .insert(key.to_ascii_uppercase(), (key.to_string(), value.to_string()));
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.shift_remove(&key.to_ascii_uppercase()).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.values().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| FcsError::MissingRequiredKeyword(key.to_string()))
    }

    pub fn required_usize(&self, key: &str) -> Result<usize> {
        let v = self.required(key)?;
        v.trim().parse().map_err(|_| FcsError::InvalidKeyword {
            keyword: key.to_string(),
            value: v.to_string(),
        })
    }

    /// Checks required keywords for `version` and list mode.
    pub fn validate(&self, version: FcsVersion) -> Result<()> {
        let mut required = vec!["$BYTEORD", "$DATATYPE", "$MODE", "$PAR", "$TOT"];
        if version.is_3x() {
            required.extend(["$BEGINDATA", "$ENDDATA"]);
        }
        for key in required {
            self.required(key)?;
        }
        let n = self.required_usize("$PAR")?;
        self.required_usize("$TOT")?;
        for i in 1..=n {
            let mut keys = vec![format!("$P{i}B"), format!("$P{i}N"), format!("$P{i}R")];
            if version.is_3x() {
                keys.push(format!("$P{i}E"));
            }
            for key in &keys {
                self.required(key)?;
            }
        }
        let mode = self.required("$MODE")?;
        if !mode.trim().eq_ignore_ascii_case("L") {
            return Err(FcsError::UnsupportedMode(mode.to_string()));
        }
        Ok(())
    }
}

/// Decodes and validates the TEXT segment occupying the inclusive byte range
/// `[begin, end]` of `file`.
pub fn parse_text(file: &[u8], begin: u64, end: u64, version: FcsVersion) -> Result<TextSegment> {
    let len = file.len() as u64;
    if begin > end || end >= len {
        return Err(FcsError::SegmentOutOfBounds {
            segment: "TEXT",
            begin,
            end,
            file_len: len,
        });
    }
    let text = TextSegment::decode(&file[begin as usize..=end as usize], begin)?;
    text.validate(version)?;
    Ok(text)
}

/// Per-channel metadata from the `$Pn*` keywords.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterInfo {
    /// 1-based parameter number.
    pub index: usize,
    pub short_name: String,
    pub bits: u32,
    pub range: u64,
    pub amplification: (f64, f64),
    pub stain: Option<String>,
}

impl ParameterInfo {
    /// A 32-bit float channel with linear amplification.
    pub fn float(short_name: &str, range: u64, stain: Option<&str>) -> Self {
        ParameterInfo {
            index: 0,
            short_name: short_name.to_string(),
            bits: 32,
            range,
            amplification: (0.0, 0.0),
            stain: stain.map(str::to_string),
        }
    }

    pub(crate) fn write_keywords(&self, text: &mut TextSegment) {
        let i = self.index;
        text.insert(&format!("$P{i}B"), &self.bits.to_string());
        text.insert(
            &format!("$P{i}E"),
            &format!("{},{}", self.amplification.0, self.amplification.1),
        );
        text.insert(&format!("$P{i}N"), &self.short_name);
        text.insert(&format!("$P{i}R"), &self.range.to_string());
        if let Some(s) = &self.stain {
            text.insert(&format!("$P{i}S"), s);
        }
    }
}

/// Builds the parameter table from a validated TEXT segment.
pub fn parse_parameters(text: &TextSegment) -> Result<Vec<ParameterInfo>> {
    let datatype = DataType::from_keyword(text.required("$DATATYPE")?)?;
    let n = text.required_usize("$PAR")?;
    let mut params = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 1..=n {
        let name = text.required(&format!("$P{i}N"))?.trim().to_string();
        let bits_key = format!("$P{i}B");
        let bits_raw = text.required(&bits_key)?;
        let bits: u32 = bits_raw.trim().parse().map_err(|_| FcsError::InvalidKeyword {
            keyword: bits_key.clone(),
            value: bits_raw.to_string(),
        })?;
        let ok = match datatype {
            DataType::Float => bits == 32,
            DataType::Double => bits == 64,
            DataType::Integer => matches!(bits, 8 | 16 | 32 | 64),
        };
        if !ok {
            return Err(FcsError::UnsupportedBitWidth {
                index: i,
                name,
                bits,
                datatype: datatype.code(),
            });
        }
        let range_key = format!("$P{i}R");
        let range_raw = text.required(&range_key)?;
        let range = parse_range(range_raw).ok_or_else(|| FcsError::InvalidKeyword {
            keyword: range_key,
            value: range_raw.to_string(),
        })?;
        let amp_key = format!("$P{i}E");
        let amplification = match text.get(&amp_key) {
            Some(v) => parse_amplification(v).ok_or_else(|| FcsError::InvalidKeyword {
                keyword: amp_key,
                value: v.to_string(),
            })?,
            None => (0.0, 0.0),
        };
        let stain = text.get(&format!("$P{i}S")).map(str::to_string);
        if !seen.insert(name.clone()) {
            return Err(FcsError::DuplicateParameterName(name));
        }
        params.push(ParameterInfo {
            index: i,
            short_name: name,
            bits,
            range,
            amplification,
            stain,
        });
    }
    Ok(params)
}

// Some instruments write $PnR as a decimal ("262144.0").
fn parse_range(v: &str) -> Option<u64> {
    let v = v.trim();
    if let Ok(r) = v.parse::<u64>() {
        return Some(r);
    }
    let f: f64 = v.parse().ok()?;
    (f.is_finite() && (0.0..1.8e19).contains(&f)).then(|| f.ceil() as u64)
}

fn parse_amplification(v: &str) -> Option<(f64, f64)> {
    let (a, b) = v.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}
