//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

/// Assembles an FCS image by hand, independently of the crate's writer.
///
/// `pairs` are raw keyword/value strings (delimiters inside them must
/// already be doubled). `$BEGINDATA`/`$ENDDATA` and the header offsets are
/// filled in here.
pub fn build_fcs(version: &str, delim: u8, pairs: &[(&str, &str)], data: &[u8]) -> Vec<u8> {
    let d = delim as char;
    let body = |begin: usize, end: usize| {
        let mut s = String::new();
        s.push(d);
        for (k, v) in pairs {
            s.push_str(k);
            s.push(d);
            s.push_str(v);
            s.push(d);
        }
        s.push_str(&format!("$BEGINDATA{d}{begin:012}{d}$ENDDATA{d}{end:012}{d}"));
        s
    };
    let text_len = body(0, 0).len();
    let text_begin = 58;
    let text_end = text_begin + text_len - 1;
    let (data_begin, data_end) = if data.is_empty() {
        (0, 0)
    } else {
        (text_end + 1, text_end + data.len())
    };
    let text = body(data_begin, data_end);
    assert_eq!(text.len(), text_len);
    let mut out = Vec::new();
    out.extend_from_slice(format!("{version:<6}    ").as_bytes());
    for v in [text_begin, text_end, data_begin, data_end, 0, 0] {
        out.extend_from_slice(format!("{v:>8}").as_bytes());
    }
    assert_eq!(out.len(), 58);
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(data);
    out
}

/// Standard keywords for an `n_params` × `n_events` file.
pub fn base_pairs(
    datatype: &str,
    byteord: &str,
    n_events: usize,
    params: &[(&str, u32, u64)],
) -> Vec<(String, String)> {
    let mut v = vec![
        ("$BYTEORD".to_string(), byteord.to_string()),
        ("$DATATYPE".to_string(), datatype.to_string()),
        ("$MODE".to_string(), "L".to_string()),
        ("$NEXTDATA".to_string(), "0".to_string()),
        ("$PAR".to_string(), params.len().to_string()),
        ("$TOT".to_string(), n_events.to_string()),
    ];
    for (i, (name, bits, range)) in params.iter().enumerate() {
        let n = i + 1;
        v.push((format!("$P{n}N"), name.to_string()));
        v.push((format!("$P{n}B"), bits.to_string()));
        v.push((format!("$P{n}R"), range.to_string()));
        v.push((format!("$P{n}E"), "0,0".to_string()));
    }
    v
}

pub fn as_refs(pairs: &[(String, String)]) -> Vec<(&str, &str)> {
    pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect()
}

/// Rows as slices.
pub fn refs(rows: &[Vec<f32>]) -> Vec<&[f32]> {
    rows.iter().map(Vec::as_slice).collect()
}
