use super::{FcsError, ParameterInfo, Result, TextSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    Integer,
    Float,
    Double,
}

impl DataType {
    pub fn from_keyword(v: &str) -> Result<Self> {
        match v.trim() {
            "I" | "i" => Ok(DataType::Integer),
            "F" | "f" => Ok(DataType::Float),
            "D" | "d" => Ok(DataType::Double),
            other => Err(FcsError::UnsupportedDatatype(other.to_string())),
        }
    }

    pub fn code(self) -> char {
        match self {
            DataType::Integer => 'I',
            DataType::Float => 'F',
            DataType::Double => 'D',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    /// Accepts `1,2,...,n` (little-endian) and `n,...,2,1` (big-endian).
    pub fn from_keyword(v: &str) -> Result<Self> {
        let unsupported = || FcsError::UnsupportedByteOrder(v.to_string());
        let digits: Vec<u32> = v
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| unsupported())?;
        let n = digits.len() as u32;
        if n < 2 {
            return Err(unsupported());
        }
        if digits.iter().copied().eq(1..=n) {
            Ok(ByteOrder::Little)
        } else if digits.iter().copied().eq((1..=n).rev()) {
            Ok(ByteOrder::Big)
        } else {
            Err(unsupported())
        }
    }
}

/// Row-major event × parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMatrix {
    n_events: usize,
    n_params: usize,
    values: Vec<f32>,
}

impl EventMatrix {
    pub fn new(n_events: usize, n_params: usize, values: Vec<f32>) -> Result<Self> {
        if n_events.checked_mul(n_params) != Some(values.len()) {
            return Err(FcsError::InvalidDataset(format!(
                "{} values cannot form a {n_events} x {n_params} matrix",
                values.len()
            )));
        }
        Ok(EventMatrix {
            n_events,
            n_params,
            values,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let n_params = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_params);
        for r in rows {
            values.extend_from_slice(r.as_ref());
        }
        EventMatrix::new(rows.len(), n_params, values)
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, event: usize) -> &[f32] {
        &self.values[event * self.n_params..(event + 1) * self.n_params]
    }

    pub fn get(&self, event: usize, param: usize) -> f32 {
        self.values[event * self.n_params + param]
    }

    pub fn column(&self, param: usize) -> impl Iterator<Item = f32> + '_ {
        self.values.iter().skip(param).step_by(self.n_params.max(1)).copied()
    }
}

/// Decodes a DATA segment into an event matrix.
///
/// Integer values are masked to `next_pow2($PnR) - 1`; floats and doubles are
/// read as IEEE-754 and stored as `f32`.
pub fn decode_data(bytes: &[u8], text: &TextSegment, params: &[ParameterInfo]) -> Result<EventMatrix> {
    let datatype = DataType::from_keyword(text.required("$DATATYPE")?)?;
    let order = ByteOrder::from_keyword(text.required("$BYTEORD")?)?;
    let n_events = text.required_usize("$TOT")?;
    let n_params = params.len();

    let row_bytes: u64 = params.iter().map(|p| u64::from(p.bits) / 8).sum();
    let expected = (n_events as u64).checked_mul(row_bytes);
    if expected != Some(bytes.len() as u64) {
        return Err(FcsError::LengthMismatch {
            offset: 0,
            expected: expected.unwrap_or(u64::MAX),
            actual: bytes.len() as u64,
        });
    }
    // The length check above bounds this allocation by the input size.
    let mut values = Vec::with_capacity(n_events * n_params);

    let all_f32_le = datatype == DataType::Float && order == ByteOrder::Little;
    if all_f32_le {
        values.extend(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
        );
        return EventMatrix::new(n_events, n_params, values);
    }

    let masks: Vec<u64> = params.iter().map(|p| integer_mask(p.range, p.bits)).collect();
    let mut pos = 0usize;
    for _ in 0..n_events {
        for (p, mask) in params.iter().zip(&masks) {
            let width = (p.bits / 8) as usize;
            let raw = &bytes[pos..pos + width];
            pos += width;
            let v = match datatype {
                DataType::Float => f32::from_bits(read_uint(raw, order) as u32),
                DataType::Double => f64::from_bits(read_uint(raw, order)) as f32,
                DataType::Integer => (read_uint(raw, order) & mask) as f32,
            };
            values.push(v);
        }
    }
    EventMatrix::new(n_events, n_params, values)
}

fn read_uint(raw: &[u8], order: ByteOrder) -> u64 {
    let fold = |acc: u64, &b: &u8| (acc << 8) | u64::from(b);
    match order {
        ByteOrder::Big => raw.iter().fold(0, fold),
        ByteOrder::Little => raw.iter().rev().fold(0, fold),
    }
}

/// Mask keeping values below the smallest power of two that is at least
/// `range`, never wider than the stored bit width.
pub(crate) fn integer_mask(range: u64, bits: u32) -> u64 {
    let width_mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let range_mask = match range.checked_next_power_of_two() {
        Some(p) => p.wrapping_sub(1),
        None => u64::MAX,
    };
    width_mask & range_mask
}
