//! Online error accounting, margin traces, aggregation over runs and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_features::FeatureVector;
use crate::learner::{Decision, ModelState};
use crate::streams::Label;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u64,
    pub type1_cum: Option<f64>,
    pub type2_cum: Option<f64>,
    pub margin: Option<f64>,
    pub restarted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpd_stats: Option<Vec<f64>>,
}

/// Per-run trace with exact cumulative ratios.
///
/// Unlabeled events count as normal, so synthetic all-normal streams report
/// Type I error only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTrace {
    pub records: Vec<StepRecord>,
    /// Raw decision log, aligned with `records`.
    pub decisions: Vec<Decision>,
    pub labels: Vec<Option<Label>>,
    pub normal_seen: u64,
    pub outliers_seen: u64,
    pub type1_mistakes: u64,
    pub type2_mistakes: u64,
}

impl MetricTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        MetricTrace {
            records: Vec::with_capacity(n),
            decisions: Vec::with_capacity(n),
            labels: Vec::with_capacity(n),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(
        &mut self,
        index: u64,
        label: Option<Label>,
        decision: Decision,
        margin: Option<f64>,
        restarted: bool,
    ) {
        self.record_with_stats(index, label, decision, margin, restarted, None);
    }

    pub fn record_with_stats(
        &mut self,
        index: u64,
        label: Option<Label>,
        decision: Decision,
        margin: Option<f64>,
        restarted: bool,
        cpd_stats: Option<Vec<f64>>,
    ) {
        match label {
            Some(Label::Outlier) => {
                self.outliers_seen += 1;
                if decision == Decision::Normal {
                    self.type2_mistakes += 1;
                }
            }
            _ => {
                self.normal_seen += 1;
                if decision == Decision::Outlier {
                    self.type1_mistakes += 1;
                }
            }
        }
        self.records.push(StepRecord {
            index,
            type1_cum: ratio(self.type1_mistakes, self.normal_seen),
            type2_cum: ratio(self.type2_mistakes, self.outliers_seen),
            margin,
            restarted,
            cpd_stats,
        });
        self.decisions.push(decision);
        self.labels.push(label);
    }

    pub fn final_type1(&self) -> Option<f64> {
        ratio(self.type1_mistakes, self.normal_seen)
    }

    pub fn final_type2(&self) -> Option<f64> {
        ratio(self.type2_mistakes, self.outliers_seen)
    }

    pub fn restart_indices(&self) -> Vec<u64> {
        self.records.iter().filter(|r| r.restarted).map(|r| r.index).collect()
    }

    pub fn restart_count(&self) -> usize {
        self.records.iter().filter(|r| r.restarted).count()
    }

    /// Type I error over positions `range` of the decision log.
    pub fn window_type1(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let mut normals = 0;
        let mut mistakes = 0;
        for k in range {
            if self.labels[k] != Some(Label::Outlier) {
                normals += 1;
                if self.decisions[k] == Decision::Outlier {
                    mistakes += 1;
                }
            }
        }
        ratio(mistakes, normals)
    }

    /// Type I error over the second half of the trace.
    pub fn tail_type1(&self) -> Option<f64> {
        self.window_type1(self.len() / 2..self.len())
    }

    /// Second-half Type I error of each phase; `boundaries` are the positions
    /// at which a new phase starts.
    pub fn phase_tail_type1(&self, boundaries: &[usize]) -> Result<Vec<Option<f64>>> {
        let mut edges = Vec::with_capacity(boundaries.len() + 2);
        edges.push(0);
        for &b in boundaries {
            if b == 0 || b >= self.len() || b <= *edges.last().unwrap() {
                return Err(Error::input(format!("invalid phase boundary {b}")));
            }
            edges.push(b);
        }
        edges.push(self.len());
        Ok(edges
            .windows(2)
            .map(|w| self.window_type1(w[0] + (w[1] - w[0]) / 2..w[1]))
            .collect())
    }

    pub fn margins(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.margin).collect()
    }

    /// Recomputes the cumulative ratios from the raw decision log.
    pub fn replay(&self) -> MetricTrace {
        let mut t = MetricTrace::with_capacity(self.len());
        for ((r, d), l) in self.records.iter().zip(&self.decisions).zip(&self.labels) {
            t.record_with_stats(r.index, *l, *d, r.margin, r.restarted, r.cpd_stats.clone());
        }
        t
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Pointwise mean, population standard deviation and count of defined values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    pub count: Vec<usize>,
}

impl SeriesStats {
    fn from_columns(len: usize, runs: &[&[StepRecord]], get: impl Fn(&StepRecord) -> Option<f64>) -> Self {
        let mut out = SeriesStats {
            mean: Vec::with_capacity(len),
            std: Vec::with_capacity(len),
            count: Vec::with_capacity(len),
        };
        for k in 0..len {
            let vals: Vec<f64> = runs.iter().filter_map(|r| get(&r[k])).collect();
            let n = vals.len();
            if n == 0 {
                out.mean.push(None);
                out.std.push(None);
            } else {
                // Centered on the first value so identical runs give exactly zero spread.
                let mean = vals[0] + vals.iter().map(|v| v - vals[0]).sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                out.mean.push(Some(mean));
                out.std.push(Some(var.sqrt()));
            }
            out.count.push(n);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateTrace {
    pub index: Vec<u64>,
    pub type1: SeriesStats,
    pub type2: SeriesStats,
    pub margin: SeriesStats,
    /// Fraction of runs that restarted at each step.
    pub restart_rate: Vec<f64>,
}

impl AggregateTrace {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

pub fn aggregate(runs: &[MetricTrace]) -> Result<AggregateTrace> {
    let first = runs.first().ok_or_else(|| Error::input("no runs to aggregate"))?;
    let len = first.len();
    if let Some(bad) = runs.iter().find(|r| r.len() != len) {
        return Err(Error::input(format!("run lengths differ: {} vs {len}", bad.len())));
    }
    let cols: Vec<&[StepRecord]> = runs.iter().map(|r| r.records.as_slice()).collect();
    Ok(AggregateTrace {
        index: first.records.iter().map(|r| r.index).collect(),
        type1: SeriesStats::from_columns(len, &cols, |r| r.type1_cum),
        type2: SeriesStats::from_columns(len, &cols, |r| r.type2_cum),
        margin: SeriesStats::from_columns(len, &cols, |r| r.margin),
        restart_rate: (0..len)
            .map(|k| cols.iter().filter(|c| c[k].restarted).count() as f64 / runs.len() as f64)
            .collect(),
    })
}

fn window_bounds(k: usize, len: usize, window: usize) -> (usize, usize) {
    let left = (window - 1) / 2;
    let right = window / 2;
    (k.saturating_sub(left), (k + right + 1).min(len))
}

/// Centered rolling mean; the window shrinks at the edges.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::config("smoothing window must be at least 1"));
    }
    let mut prefix = Vec::with_capacity(series.len() + 1);
    prefix.push(0.0);
    for v in series {
        prefix.push(prefix.last().unwrap() + v);
    }
    Ok((0..series.len())
        .map(|k| {
            if window == 1 {
                return series[k];
            }
            let (a, b) = window_bounds(k, series.len(), window);
            let mean = (prefix[b] - prefix[a]) / (b - a) as f64;
            // Clamp rounding drift so bounds are preserved.
            let (lo, hi) = series[a..b]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            mean.clamp(lo, hi)
        })
        .collect())
}

/// As [`smooth`], averaging only the defined values inside each window.
pub fn smooth_defined(series: &[Option<f64>], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 {
        return Err(Error::config("smoothing window must be at least 1"));
    }
    Ok((0..series.len())
        .map(|k| {
            let (a, b) = window_bounds(k, series.len(), window);
            let vals: Vec<f64> = series[a..b].iter().flatten().copied().collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfflineEval {
    pub type1: Option<f64>,
    pub type2: Option<f64>,
    /// Outlier is the positive class; absent unless both classes are present.
    pub f1: Option<f64>,
    pub normals: usize,
    pub outliers: usize,
}

/// Classifies every point with a fixed state.
pub fn offline_eval(state: &ModelState, epsilon: f64, data: &[(FeatureVector, Label)]) -> OfflineEval {
    let (mut tp, mut fp, mut fn_, mut normals, mut outliers) = (0u64, 0u64, 0u64, 0, 0);
    for (x, label) in data {
        let flagged = state.classify(x, epsilon).is_outlier();
        match label {
            Label::Normal => {
                normals += 1;
                fp += flagged as u64;
            }
            Label::Outlier => {
                outliers += 1;
                if flagged {
                    tp += 1;
                } else {
                    fn_ += 1;
                }
            }
        }
    }
    let f1 = (normals > 0 && outliers > 0).then(|| {
        let den = 2 * tp + fp + fn_;
        if den == 0 {
            0.0
        } else {
            2.0 * tp as f64 / den as f64
        }
    });
    OfflineEval {
        type1: ratio(fp, normals as u64),
        type2: ratio(fn_, outliers as u64),
        f1,
        normals,
        outliers,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Columns `index,type1_cum,type2_cum,margin,restarted`; missing values are empty cells.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &MetricTrace) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "index,type1_cum,type2_cum,margin,restarted")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.index,
            cell(r.type1_cum),
            cell(r.type2_cum),
            cell(r.margin),
            r.restarted as u8
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(path: impl AsRef<Path>, agg: &AggregateTrace) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "index,type1_mean,type1_std,type2_mean,type2_std,type2_count,margin_mean,margin_std,margin_count,restart_rate"
    )?;
    for k in 0..agg.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:?}",
            agg.index[k],
            cell(agg.type1.mean[k]),
            cell(agg.type1.std[k]),
            cell(agg.type2.mean[k]),
            cell(agg.type2.std[k]),
            agg.type2.count[k],
            cell(agg.margin.mean[k]),
            cell(agg.margin.std[k]),
            agg.margin.count[k],
            agg.restart_rate[k]
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::StepSchedule;
    use proptest::prelude::*;

    fn trace_of(labels: &[Option<Label>], decisions: &[Decision]) -> MetricTrace {
        let mut t = MetricTrace::new();
        for (i, (l, d)) in labels.iter().zip(decisions).enumerate() {
            t.record(i as u64, *l, *d, None, false);
        }
        t
    }

    #[test]
    fn type1_ratio() {
        let mut d = vec![Decision::Normal; 100];
        d[37] = Decision::Outlier;
        let t = trace_of(&[None; 100], &d);
        assert_eq!(t.final_type1(), Some(0.01));
        assert_eq!(t.final_type2(), None);
        assert!(t.records.iter().all(|r| r.type2_cum.is_none()));
    }

    #[test]
    fn type2_ratio() {
        let d: Vec<Decision> = (0..10)
            .map(|i| if i < 4 { Decision::Normal } else { Decision::Outlier })
            .collect();
        let t = trace_of(&[Some(Label::Outlier); 10], &d);
        assert_eq!(t.final_type2(), Some(0.4));
        assert_eq!(t.final_type1(), None);
    }

    #[test]
    fn aggregate_examples() {
        let mut a = MetricTrace::new();
        let mut b = MetricTrace::new();
        a.record(0, None, Decision::Normal, Some(0.4), false);
        b.record(0, None, Decision::Normal, Some(0.6), true);
        a.record(1, None, Decision::Normal, None, false);
        b.record(1, None, Decision::Outlier, Some(0.2), false);
        let agg = aggregate(&[a.clone(), b]).unwrap();
        assert!((agg.margin.mean[0].unwrap() - 0.5).abs() < 1e-15);
        assert!((agg.margin.std[0].unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(agg.margin.count[1], 1);
        assert_eq!(agg.margin.mean[1], Some(0.2));
        assert_eq!(agg.type1.mean[1], Some(0.25));
        assert_eq!(agg.restart_rate, vec![0.5, 0.0]);

        let same = aggregate(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(same.margin.std.iter().flatten().all(|s| *s == 0.0));
        let single = aggregate(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.margin.mean, a.margins());
    }

    #[test]
    fn aggregate_rejects_mismatch() {
        let mut a = MetricTrace::new();
        a.record(0, None, Decision::Normal, None, false);
        assert!(aggregate(&[a, MetricTrace::new()]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[0.0, 1.0, 0.0], 3).unwrap(), vec![0.5, 1.0 / 3.0, 0.5]);
        let s = vec![0.3, -2.0, 7.0];
        assert_eq!(smooth(&s, 1).unwrap(), s);
        assert_eq!(smooth(&[2.5; 50], 7).unwrap(), vec![2.5; 50]);
        assert!(smooth(&s, 0).is_err());
        assert_eq!(
            smooth_defined(&[Some(1.0), None, Some(3.0), None], 3).unwrap(),
            vec![Some(1.0), Some(2.0), Some(3.0), Some(3.0)]
        );
        assert_eq!(smooth_defined(&[None, None], 1).unwrap(), vec![None, None]);
    }

    #[test]
    fn offline_examples() {
        let mut s = ModelState::new(2, StepSchedule::theory());
        s.w = vec![1.0, 0.0];
        s.rho = 0.5;
        let n = FeatureVector::new(vec![1.0, 0.0]).unwrap();
        let o = FeatureVector::new(vec![0.0, 1.0]).unwrap();
        let data = vec![(n.clone(), Label::Normal), (o.clone(), Label::Outlier)];
        let e = offline_eval(&s, 0.0, &data);
        assert_eq!((e.type1, e.type2, e.f1), (Some(0.0), Some(0.0), Some(1.0)));

        s.rho = -1.0;
        let e = offline_eval(&s, 0.0, &data);
        assert_eq!((e.type2, e.f1), (Some(1.0), Some(0.0)));

        let e = offline_eval(&s, 0.0, &data[..1]);
        assert_eq!(e.f1, None);
    }

    #[test]
    fn phase_tails() {
        let mut d = vec![Decision::Normal; 8];
        d[1] = Decision::Outlier; // first half of phase 0, ignored
        d[3] = Decision::Outlier;
        d[7] = Decision::Outlier;
        let t = trace_of(&[None; 8], &d);
        assert_eq!(t.phase_tail_type1(&[4]).unwrap(), vec![Some(0.5), Some(0.5)]);
        assert_eq!(t.tail_type1(), Some(0.25));
        assert!(t.phase_tail_type1(&[9]).is_err());
        assert!(t.phase_tail_type1(&[4, 4]).is_err());
    }

    #[test]
    fn csv_output_marks_missing_values() {
        let mut t = MetricTrace::new();
        t.record(0, None, Decision::Outlier, None, true);
        t.record(1, Some(Label::Outlier), Decision::Normal, Some(0.25), false);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_trace_csv(f.path(), &t).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(
            text,
            "index,type1_cum,type2_cum,margin,restarted\n0,1.0,,,1\n1,1.0,1.0,0.25,0\n"
        );
    }

    fn arb_events() -> impl Strategy<Value = Vec<(Option<Label>, Decision)>> {
        let label = prop_oneof![Just(None), Just(Some(Label::Normal)), Just(Some(Label::Outlier))];
        let dec = prop_oneof![Just(Decision::Normal), Just(Decision::Outlier)];
        prop::collection::vec((label, dec), 1..300)
    }

    proptest! {
        #[test]
        fn ratios_match_raw_counts(events in arb_events()) {
            let (l, d): (Vec<_>, Vec<_>) = events.into_iter().unzip();
            let t = trace_of(&l, &d);
            let mut n = 0u64;
            let mut m = 0u64;
            for (k, r) in t.records.iter().enumerate() {
                if l[k] != Some(Label::Outlier) {
                    n += 1;
                    m += (d[k] == Decision::Outlier) as u64;
                }
                prop_assert_eq!(r.type1_cum, (n > 0).then(|| m as f64 / n as f64));
            }
            prop_assert_eq!(t.replay(), t);
        }

        #[test]
        fn smoothing_preserves_bounds(
            s in prop::collection::vec(-10.0f64..10.0, 1..200),
            w in 1usize..50,
        ) {
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in smooth(&s, w).unwrap() {
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }
}
