use crate::error::{Error, Result};
use crate::kernel_features::{sample_rff, FeatureVector, RffMap};
use crate::learner::Snapshot;
use crate::metrics::{offline_eval, OfflineEval};
use crate::streams::{Label, StreamEvent};

/// Standardizes with full-data statistics (the final running estimates) and
/// embeds every labeled event. Unlabeled events are dropped.
pub fn labeled_dataset(events: &[StreamEvent], map: &RffMap, standardize: bool) -> Result<Vec<(FeatureVector, Label)>> {
    let dim = map.config().input_dim;
    let mut st = crate::streams::RunningStandardizer::new(dim);
    if standardize {
        for e in events {
            st.update(&e.x_raw)?;
        }
    }
    let mean = st.mean().to_vec();
    let sd: Vec<f64> = st
        .variance()
        .iter()
        .map(|v| v.max(crate::streams::DEFAULT_VARIANCE_FLOOR).sqrt())
        .collect();
    events
        .iter()
        .filter_map(|e| e.label.map(|l| (e, l)))
        .map(|(e, l)| {
            let x: Vec<f64> = if standardize {
                e.x_raw
                    .iter()
                    .zip(&mean)
                    .zip(&sd)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            } else {
                e.x_raw.clone()
            };
            let z = map.embed(&x).map_err(|err| Error::Data {
                row: e.index as usize + 1,
                message: err.to_string(),
            })?;
            Ok((z, l))
        })
        .collect()
}

/// Final-iterate offline errors of a saved learner on a labeled dataset.
pub fn evaluate_snapshot(snapshot: &Snapshot, events: &[StreamEvent], standardize: bool) -> Result<OfflineEval> {
    let map = sample_rff(snapshot.rff)?;
    let data = labeled_dataset(events, &map, standardize)?;
    Ok(offline_eval(&snapshot.state, snapshot.params.epsilon, &data))
}
