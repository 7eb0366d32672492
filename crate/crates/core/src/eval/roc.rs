use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{check_inputs, EvalError, Result};

/// One operating point: calling positive at `score >= threshold` gives
/// (`fpr`, `tpr`). The first point has an infinite threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve with one point per distinct score (descending) after the
/// (0, 0) origin, tied scores grouped into a single step.
///
/// The trapezoidal area is accumulated in integer units of
/// `1 / (2 · positives · negatives)`, so it equals the Mann–Whitney pair
/// count (ties counted ½) exactly.
pub fn roc(labels: &[u8], scores: &[f64]) -> Result<RocCurve> {
    check_inputs(labels, scores)?;
    let p = labels.iter().filter(|&&y| y == 1).count() as u64;
    let n = labels.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(EvalError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
    }
    let auc = twice_area as f64 / (2 * u128::from(p) * u128::from(n)) as f64;
    Ok(RocCurve { points, auc })
}

/// Writes `threshold,fpr,tpr` rows; the origin's threshold is `inf`.
pub fn write_roc_csv<W: Write>(curve: &RocCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| EvalError::Io(e.into());
    w.write_record(["threshold", "fpr", "tpr"]).map_err(io)?;
    for pt in &curve.points {
        w.write_record([pt.threshold.to_string(), pt.fpr.to_string(), pt.tpr.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        assert_eq!(roc(&[1, 0], &[0.7, 0.3]).unwrap().auc, 1.0);
        assert_eq!(roc(&[1, 0], &[0.3, 0.7]).unwrap().auc, 0.0);
        assert_eq!(roc(&[1, 0], &[0.5, 0.5]).unwrap().auc, 0.5);
        assert!(matches!(roc(&[1, 1], &[0.1, 0.2]), Err(EvalError::SingleClassInput)));
    }

    #[test]
    fn ends_at_one_one() {
        let c = roc(&[1, 0, 1, 0, 0], &[0.9, 0.8, 0.8, 0.1, 0.1]).unwrap();
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(c.points.len(), 4);
        // pairs: (0.9 beats all 3), (0.8 beats 2 of 0.1, ties 0.8) -> 5.5 / 6
        assert!((c.auc - 5.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn csv_header() {
        let c = roc(&[1, 0], &[0.7, 0.3]).unwrap();
        let mut buf = Vec::new();
        write_roc_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("threshold,fpr,tpr\ninf,0,0\n"));
    }
}
