use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::frame::SeriesFrame;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Level,
    PctChangeMonthly,
    PctChangeMonthlyMa3,
    Diff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub source: String,
    pub kind: TransformKind,
    pub output: String,
}

impl TransformSpec {
    pub fn new(source: impl Into<String>, kind: TransformKind, output: impl Into<String>) -> Self {
        TransformSpec {
            source: source.into(),
            kind,
            output: output.into(),
        }
    }
}

/// Builds a new frame holding one output column per spec, in spec order.
///
/// A zero previous level makes the percent change missing at that month.
pub fn apply_transforms<T: Scalar>(
    frame: &SeriesFrame<T>,
    specs: &[TransformSpec],
) -> Result<SeriesFrame<T>> {
    let mut outputs = BTreeSet::new();
    for spec in specs {
        if !outputs.insert(spec.output.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate transform output '{}'",
                spec.output
            )));
        }
    }
    let mut out = SeriesFrame::from_months(super::Panel::months(frame).to_vec())?;
    for spec in specs {
        let src = frame
            .column(&spec.source)
            .ok_or_else(|| Error::UnknownColumn(spec.source.clone()))?;
        let values = match spec.kind {
            TransformKind::Level => src.to_vec(),
            TransformKind::PctChangeMonthly => pct_change(src),
            TransformKind::PctChangeMonthlyMa3 => moving_average3(&pct_change(src)),
            TransformKind::Diff => diff(src),
        };
        out.push_column(spec.output.clone(), values)?;
    }
    Ok(out)
}

fn pct_change<T: Scalar>(x: &[Option<T>]) -> Vec<Option<T>> {
    let hundred = T::of(100.0);
    (0..x.len())
        .map(|t| match (t.checked_sub(1).and_then(|p| x[p]), x[t]) {
            (Some(prev), Some(cur)) if prev != T::zero() => Some(hundred * (cur / prev - T::one())),
            _ => None,
        })
        .collect()
}

fn moving_average3<T: Scalar>(x: &[Option<T>]) -> Vec<Option<T>> {
    (0..x.len())
        .map(|t| {
            if t < 2 {
                return None;
            }
            let (a, b, c) = (x[t - 2]?, x[t - 1]?, x[t]?);
            Some((a + b + c) / T::of(3.0))
        })
        .collect()
}

fn diff<T: Scalar>(x: &[Option<T>]) -> Vec<Option<T>> {
    (0..x.len())
        .map(|t| match (t.checked_sub(1).and_then(|p| x[p]), x[t]) {
            (Some(prev), Some(cur)) => Some(cur - prev),
            _ => None,
        })
        .collect()
}
