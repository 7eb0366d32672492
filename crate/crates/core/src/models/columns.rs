use rayon::prelude::*;

/// Features handled per parallel work item, both when building the store
/// and when scanning for splits.
pub(crate) const FEATURE_BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(C)]
pub struct Entry {
    pub row: u32,
    pub value: f32,
}

/// Column-major copy of a training matrix with every feature's rows
/// presorted by value (ties by row index). Built once per training run;
/// node membership is tracked separately, so the sort is never redone.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    n_rows: usize,
    n_features: usize,
    entries: Vec<Entry>,
}

impl SortedColumns {
    pub fn build(rows: &[&[f32]]) -> Self {
        let n_rows = rows.len();
        let n_features = rows.first().map_or(0, |r| r.len());
        assert!(n_rows <= u32::MAX as usize, "too many rows");
        let mut entries = vec![Entry { row: 0, value: 0.0 }; n_rows * n_features];
        if n_rows > 0 {
            entries
                .par_chunks_mut(FEATURE_BLOCK * n_rows)
                .enumerate()
                .for_each(|(block, chunk)| {
                    let f0 = block * FEATURE_BLOCK;
                    let nf = chunk.len() / n_rows;
                    for (r, row) in rows.iter().enumerate() {
                        for (j, &value) in row[f0..f0 + nf].iter().enumerate() {
                            chunk[j * n_rows + r] = Entry { row: r as u32, value };
                        }
                    }
                    for col in chunk.chunks_exact_mut(n_rows) {
                        col.sort_unstable_by(|a, b| a.value.total_cmp(&b.value).then(a.row.cmp(&b.row)));
                    }
                });
        }
        SortedColumns {
            n_rows,
            n_features,
            entries,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Rows of feature `f` in ascending value order.
    #[inline]
    pub fn feature(&self, f: usize) -> &[Entry] {
        &self.entries[f * self.n_rows..(f + 1) * self.n_rows]
    }
}
