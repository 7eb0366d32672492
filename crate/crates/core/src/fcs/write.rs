use std::path::Path;

use super::{FcsDataset, FcsError, FcsHeader, FcsVersion, Result, TextSegment, HEADER_LEN};

const DELIMITER: u8 = b'/';

/// Serializes a dataset as FCS 3.1 with little-endian 32-bit float DATA.
///
/// Layout keywords (`$BEGINDATA`, `$PnB`, `$DATATYPE`, ...) are regenerated;
/// every other keyword is carried over unchanged.
pub fn to_bytes(dataset: &FcsDataset) -> Result<Vec<u8>> {
    dataset.validate()?;
    let n_events = dataset.n_events();
    let mut text = TextSegment::new(DELIMITER);
    for (k, v) in dataset.text.iter() {
        if !is_layout_keyword(k) {
            text.insert(k, v);
        }
    }
    text.insert("$BYTEORD", "1,2,3,4");
    text.insert("$DATATYPE", "F");
    text.insert("$MODE", "L");
    text.insert("$NEXTDATA", "0");
    text.insert("$BEGINANALYSIS", "0");
    text.insert("$ENDANALYSIS", "0");
    text.insert("$BEGINSTEXT", "0");
    text.insert("$ENDSTEXT", "0");
    text.insert("$PAR", &dataset.n_params().to_string());
    text.insert("$TOT", &n_events.to_string());
    for (i, p) in dataset.params.iter().enumerate() {
        let mut p = p.clone();
        p.index = i + 1;
        p.bits = 32;
        p.write_keywords(&mut text);
    }

    let data_len = (n_events * dataset.n_params() * 4) as u64;
    let text_begin = HEADER_LEN as u64;
    // $BEGINDATA/$ENDDATA change the TEXT length, which moves DATA; iterate
    // until the digits settle (at most a couple of rounds).
    let mut data_begin = 0u64;
    let encoded = loop {
        let (b, e) = data_bounds(data_begin, data_len);
        text.insert("$BEGINDATA", &b.to_string());
        text.insert("$ENDDATA", &e.to_string());
        let encoded = encode_text(&text)?;
        let next_begin = text_begin + encoded.len() as u64;
        if next_begin == data_begin {
            break encoded;
        }
        data_begin = next_begin;
    };
    let (db, de) = data_bounds(data_begin, data_len);
    let header = FcsHeader {
        version: FcsVersion::Fcs3_1,
        text_begin,
        text_end: text_begin + encoded.len() as u64 - 1,
        data_begin: db,
        data_end: de,
        analysis_begin: 0,
        analysis_end: 0,
    };

    let mut out = Vec::with_capacity(HEADER_LEN + encoded.len() + data_len as usize);
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&encoded);
    for v in dataset.events.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Writes `dataset` to `path`, returning the number of bytes written. Nothing
/// is written if the dataset fails validation.
pub fn write_file(dataset: &FcsDataset, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let bytes = to_bytes(dataset)?;
    std::fs::write(path, &bytes).map_err(|source| FcsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(bytes.len() as u64)
}

fn data_bounds(begin: u64, len: u64) -> (u64, u64) {
    if len == 0 {
        (0, 0)
    } else {
        (begin, begin + len - 1)
    }
}

fn is_layout_keyword(key: &str) -> bool {
    let k = key.to_ascii_uppercase();
    if super::OFFSET_KEYWORDS.contains(&k.as_str())
        || matches!(k.as_str(), "$BYTEORD" | "$DATATYPE" | "$MODE" | "$PAR" | "$TOT")
    {
        return true;
    }
    // $PnB/$PnE/$PnN/$PnR/$PnS are rebuilt from the parameter table.
    if let Some(rest) = k.strip_prefix("$P") {
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 && rest.len() == digits + 1 {
            return matches!(&rest[digits..], "B" | "E" | "N" | "R" | "S");
        }
    }
    false
}

fn encode_text(text: &TextSegment) -> Result<Vec<u8>> {
    let mut out = vec![DELIMITER];
    for (k, v) in text.iter() {
        for token in [k, v] {
            let b = token.as_bytes();
            if b.is_empty() {
                return Err(FcsError::InvalidDataset(format!(
                    "keyword {k:?} has an empty key or value"
                )));
            }
            if b[0] == DELIMITER {
                return Err(FcsError::InvalidDataset(format!(
                    "keyword {k:?}: tokens may not start with the delimiter"
                )));
            }
            for &c in b {
                out.push(c);
                if c == DELIMITER {
                    out.push(DELIMITER);
                }
            }
            out.push(DELIMITER);
        }
    }
    Ok(out)
}
