//! Validation sample types: subject records, the ordered sample every
//! cumulative process is built from, realized process paths, and test reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Field, Result};

/// Slack allowed on `pi - delta` so that risks computed as a difference of two
/// probabilities are not rejected for rounding noise.
const RISK_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn from_indicator(a: u8) -> Option<Arm> {
        match a {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }

    pub fn indicator(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn is_treated(self) -> bool {
        self == Arm::Treated
    }
}

/// One trial participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub arm: Arm,
    pub outcome: bool,
    /// Predicted absolute risk reduction.
    pub delta: f64,
    /// Predicted baseline (control) risk.
    pub pi: Option<f64>,
    /// Covariate used for alternate ordering.
    pub order_key: Option<f64>,
}

impl SubjectRecord {
    pub fn new(arm: Arm, outcome: bool, delta: f64) -> Self {
        SubjectRecord {
            arm,
            outcome,
            delta,
            pi: None,
            order_key: None,
        }
    }

    /// Builds a record from raw 0/1 indicators, rejecting anything else.
    pub fn from_indicators(arm: u8, outcome: u8, delta: f64) -> Result<Self> {
        let arm = Arm::from_indicator(arm).ok_or(Error::FieldOutOfRange {
            field: Field::Arm,
            index: 0,
            value: arm as f64,
        })?;
        let outcome = match outcome {
            0 => false,
            1 => true,
            _ => {
                return Err(Error::FieldOutOfRange {
                    field: Field::Outcome,
                    index: 0,
                    value: outcome as f64,
                })
            }
        };
        Ok(SubjectRecord::new(arm, outcome, delta))
    }

    pub fn with_pi(mut self, pi: f64) -> Self {
        self.pi = Some(pi);
        self
    }

    pub fn with_order_key(mut self, key: f64) -> Self {
        self.order_key = Some(key);
        self
    }

    /// Outcome as 0.0 / 1.0.
    pub fn y(&self) -> f64 {
        if self.outcome {
            1.0
        } else {
            0.0
        }
    }

    /// Predicted risk under treatment, `pi - delta`, when `pi` is known.
    pub fn treated_risk(&self) -> Option<f64> {
        self.pi.map(|p| p - self.delta)
    }

    /// Checks the numeric field ranges. `index` is only used for error reporting.
    pub fn validate(&self, index: usize) -> Result<()> {
        let out = |field, value| Error::FieldOutOfRange {
            field,
            index,
            value,
        };
        if !(self.delta.is_finite() && (-1.0..=1.0).contains(&self.delta)) {
            return Err(out(Field::Delta, self.delta));
        }
        if let Some(pi) = self.pi {
            if !(pi.is_finite() && (0.0..=1.0).contains(&pi)) {
                return Err(out(Field::Pi, pi));
            }
            let treated = pi - self.delta;
            if !(-RISK_SLACK..=1.0 + RISK_SLACK).contains(&treated) {
                return Err(out(Field::TreatedRisk, treated));
            }
        }
        if let Some(h) = self.order_key {
            if !h.is_finite() {
                return Err(out(Field::OrderKey, h));
            }
        }
        Ok(())
    }
}

/// Which value a sample is sorted by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderBy {
    /// Predicted treatment effect.
    #[default]
    Delta,
    /// The record's `order_key` covariate.
    OrderKey,
}

/// A validated sample sorted ascending by the active ordering key.
///
/// Sorting is stable, so tied keys keep their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    records: Vec<SubjectRecord>,
    ordering: OrderBy,
    tie_flag: bool,
}

impl OrderedSample {
    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn ordering(&self) -> OrderBy {
        self.ordering
    }

    /// Whether any two records share an ordering-key value.
    pub fn tie_flag(&self) -> bool {
        self.tie_flag
    }

    /// Active ordering-key value of every record, in sample order.
    pub fn keys(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| sort_key(r, self.ordering).unwrap_or(f64::NAN))
            .collect()
    }

    /// `(control, treated)` counts.
    pub fn arm_counts(&self) -> (usize, usize) {
        let treated = self.records.iter().filter(|r| r.arm.is_treated()).count();
        (self.records.len() - treated, treated)
    }

    pub fn into_records(self) -> Vec<SubjectRecord> {
        self.records
    }
}

fn sort_key(r: &SubjectRecord, ordering: OrderBy) -> Option<f64> {
    match ordering {
        OrderBy::Delta => Some(r.delta),
        OrderBy::OrderKey => r.order_key,
    }
}

/// Validates `records` and sorts them by the requested key.
pub fn build_sample(records: Vec<SubjectRecord>, ordering: OrderBy) -> Result<OrderedSample> {
    if records.is_empty() {
        return Err(Error::EmptySample);
    }
    for (i, r) in records.iter().enumerate() {
        r.validate(i)?;
        if sort_key(r, ordering).is_none() {
            return Err(Error::MissingOrderKey { index: i });
        }
    }
    let treated = records.iter().filter(|r| r.arm.is_treated()).count();
    if treated == 0 || treated == records.len() {
        return Err(Error::SingleArmSample);
    }

    let mut records = records;
    // keys are validated finite above
    records.sort_by(|a, b| {
        let ka = sort_key(a, ordering).unwrap_or(f64::NAN);
        let kb = sort_key(b, ordering).unwrap_or(f64::NAN);
        ka.total_cmp(&kb)
    });
    let tie_flag = records
        .windows(2)
        .any(|w| sort_key(&w[0], ordering) == sort_key(&w[1], ordering));

    Ok(OrderedSample {
        records,
        ordering,
        tie_flag,
    })
}

/// Which construction produced a [`ProcessPath`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    Risk,
    IteConditional,
    IteMarginal,
}

impl ProcessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProcessKind::Risk => "risk",
            ProcessKind::IteConditional => "ite-conditional",
            ProcessKind::IteMarginal => "ite-marginal",
        }
    }
}

/// A realized standardized process: times `t_0..t_n`, locations `S_0..S_n`
/// and the unstandardized scaled errors `C_0..C_n`, all starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessPath {
    pub kind: ProcessKind,
    pub times: Vec<f64>,
    pub locations: Vec<f64>,
    pub raw_errors: Vec<f64>,
    /// Ordering-key value of the subject entering at each index; `keys[0]`
    /// repeats the first subject's key so that the vector aligns with `times`.
    pub keys: Vec<f64>,
    /// Terminal standard deviation `s_n` (or its marginal counterpart).
    pub total_sd: f64,
}

impl ProcessPath {
    /// Number of subjects, i.e. one less than the number of vertices.
    pub fn n(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn terminal_location(&self) -> f64 {
        self.locations.last().copied().unwrap_or(0.0)
    }

    pub fn terminal_raw_error(&self) -> f64 {
        self.raw_errors.last().copied().unwrap_or(0.0)
    }

    /// Factor mapping locations onto raw errors, `C_k = S_k * factor`.
    pub fn raw_scale(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            0.0
        } else {
            self.total_sd / n as f64
        }
    }

    /// Assembles a path from cumulative raw errors and cumulative variances,
    /// both of length `n + 1` and starting at zero.
    pub(crate) fn standardize(
        kind: ProcessKind,
        raw_errors: Vec<f64>,
        cum_var: &[f64],
        keys: Vec<f64>,
    ) -> Result<ProcessPath> {
        debug_assert_eq!(raw_errors.len(), cum_var.len());
        let n = raw_errors.len() - 1;
        let total = cum_var[n];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::degenerate(format!(
                "{} process has total variance {total}",
                kind.as_str()
            )));
        }
        let sd = total.sqrt();
        let scale = n as f64 / sd;
        let mut times: Vec<f64> = cum_var.iter().map(|v| v / total).collect();
        times[n] = 1.0;
        let locations = raw_errors.iter().map(|c| c * scale).collect();
        Ok(ProcessPath {
            kind,
            times,
            locations,
            raw_errors,
            keys,
            total_sd: sd,
        })
    }
}

/// Keys aligned with path vertices: index 0 repeats the first key.
pub(crate) fn aligned_keys(keys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(keys.len() + 1);
    out.push(keys.first().copied().unwrap_or(0.0));
    out.extend_from_slice(keys);
    out
}

/// Statistics and p-values of the BM and two-part bridge tests on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestReport {
    /// Terminal location, a z-score for mean calibration.
    pub s_n: f64,
    pub p_mean: f64,
    /// `max_k |S_k - t_k S_n|`.
    pub bridge_stat: f64,
    pub p_bridge: f64,
    pub p_unified: f64,
    /// `max_k |S_k|`.
    pub bm_stat: f64,
    pub p_bm: f64,
    /// Terminal raw error, the mean-calibration estimate.
    pub c_n: f64,
}
