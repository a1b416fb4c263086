//! Cumulative calibration processes for predicted risks, and the per-arm
//! compound test for ITE models that also output risks.

use serde::Serialize;

use crate::domain::{aligned_keys, Arm, OrderedSample, ProcessKind, ProcessPath, TestReport};
use crate::error::{Error, Result};
use crate::inference::{bridge_test, fisher_combine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmLabel {
    All,
    ControlOnly,
    TreatedOnly,
}

/// `(predicted risk, outcome)` pairs sorted ascending by predicted risk.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSampleView {
    pairs: Vec<(f64, bool)>,
    label: ArmLabel,
}

impl RiskSampleView {
    /// Sorts `pairs` by prediction (stable). Predictions must lie in `[0, 1]`.
    pub fn new(mut pairs: Vec<(f64, bool)>, label: ArmLabel) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, &(p, _)) in pairs.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::FieldOutOfRange {
                    field: crate::error::Field::Pi,
                    index: i,
                    value: p,
                });
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(RiskSampleView { pairs, label })
    }

    /// Risk view of one or both arms of an ITE validation sample. The control
    /// arm is judged against `pi`, the treated arm against `pi - delta`.
    pub fn from_sample(sample: &OrderedSample, label: ArmLabel) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, r) in sample.records().iter().enumerate() {
            let pi = r.pi.ok_or(Error::MissingBaselineRisk { index: i })?;
            let pred = match (label, r.arm) {
                (ArmLabel::ControlOnly, Arm::Treated) | (ArmLabel::TreatedOnly, Arm::Control) => {
                    continue
                }
                (_, Arm::Control) => pi,
                // rounding slack from validation
                (_, Arm::Treated) => (pi - r.delta).clamp(0.0, 1.0),
            };
            pairs.push((pred, r.outcome));
        }
        if pairs.is_empty() {
            return Err(Error::SingleArmSample);
        }
        RiskSampleView::new(pairs, label)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn label(&self) -> ArmLabel {
        self.label
    }

    pub fn pairs(&self) -> &[(f64, bool)] {
        &self.pairs
    }
}

/// `C_0..C_n` with `C_k = (1/n) sum_{i<=k} (Y_i - pi_i)`.
pub fn risk_cumulative_errors(view: &RiskSampleView) -> Result<Vec<f64>> {
    if view.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = view.len() as f64;
    let mut out = Vec::with_capacity(view.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for &(p, y) in &view.pairs {
        acc += if y { 1.0 } else { 0.0 } - p;
        out.push(acc / n);
    }
    Ok(out)
}

/// Standardized risk process: `t_k = s_k^2 / s_n^2`, `S_k = n C_k / s_n`
/// with `s_k^2 = sum_{i<=k} pi_i (1 - pi_i)`.
pub fn risk_s_process(view: &RiskSampleView) -> Result<ProcessPath> {
    let raw = risk_cumulative_errors(view)?;
    let mut cum_var = Vec::with_capacity(raw.len());
    cum_var.push(0.0);
    let mut acc = 0.0;
    for (i, &(p, _)) in view.pairs.iter().enumerate() {
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::degenerate(format!(
                "predicted risk {p} at position {i} has zero variance"
            )));
        }
        acc += p * (1.0 - p);
        cum_var.push(acc);
    }
    let keys: Vec<f64> = view.pairs.iter().map(|&(p, _)| p).collect();
    ProcessPath::standardize(ProcessKind::Risk, raw, &cum_var, aligned_keys(&keys))
}

/// Which per-arm test feeds the compound p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerArmTest {
    #[default]
    Bridge,
    Bm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompoundReport {
    pub control: TestReport,
    pub treated: TestReport,
    pub per_arm_test: PerArmTest,
    /// Fisher combination of the two per-arm p-values.
    pub p_compound: f64,
}

/// Tests calibration of predicted risks separately in each arm and merges
/// the two p-values with Fisher's method.
pub fn per_arm_compound_test(sample: &OrderedSample, which: PerArmTest) -> Result<CompoundReport> {
    let control_view = RiskSampleView::from_sample(sample, ArmLabel::ControlOnly)?;
    let treated_view = RiskSampleView::from_sample(sample, ArmLabel::TreatedOnly)?;
    let control = bridge_test(&risk_s_process(&control_view)?);
    let treated = bridge_test(&risk_s_process(&treated_view)?);
    let pick = |r: &TestReport| match which {
        PerArmTest::Bridge => r.p_unified,
        PerArmTest::Bm => r.p_bm,
    };
    Ok(CompoundReport {
        p_compound: fisher_combine(pick(&control), pick(&treated)),
        control,
        treated,
        per_arm_test: which,
    })
}
