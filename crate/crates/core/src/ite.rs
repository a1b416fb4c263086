//! Cumulative-benefit processes for predicted treatment effects.
//!
//! With subjects sorted by predicted effect, `B_k` is `k` times the
//! difference in event rates between the control and treated subjects among
//! the first `k`:
//!
//! ```text
//! B_k = k * ( sum_{i<=k} (1-a_i) Y_i / sum_{i<=k} (1-a_i)
//!           - sum_{i<=k} a_i Y_i     / sum_{i<=k} a_i )
//! ```
//!
//! with `0/0 = 0` while an arm is still empty. Two standardized processes are
//! built on it:
//!
//! - **conditional**: centers each increment by its conditional expectation
//!   given the history, plugging in predicted baseline risks, and uses the
//!   summed conditional variances as the clock. This is a martingale under
//!   the null when the baseline risks are calibrated.
//! - **marginal**: centers `B_k` by `sum_{i<=k} delta_i` and uses the
//!   plug-in marginal variance of `B_k` as the clock. It needs no baseline
//!   risks but is only an approximation; its clock can step backwards.

use serde::Serialize;

use crate::domain::{aligned_keys, Arm, OrderedSample, ProcessKind, ProcessPath};
use crate::error::{Error, Result};

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `B_0..B_n` together with running arm sizes and event counts. All vectors
/// have length `n + 1`; index 0 is the empty prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenefitSeries {
    pub b: Vec<f64>,
    pub n0: Vec<u32>,
    pub n1: Vec<u32>,
    pub y0: Vec<u32>,
    pub y1: Vec<u32>,
}

impl BenefitSeries {
    pub fn n(&self) -> usize {
        self.b.len() - 1
    }

    /// Running event rates `(p0, p1)` at prefix length `k`, 0 for an empty arm.
    pub fn arm_rates(&self, k: usize) -> (f64, f64) {
        (
            ratio(self.y0[k] as f64, self.n0[k] as f64),
            ratio(self.y1[k] as f64, self.n1[k] as f64),
        )
    }

    /// Increment `D_k = B_k - B_{k-1}` for `k >= 1`.
    pub fn increment(&self, k: usize) -> f64 {
        self.b[k] - self.b[k - 1]
    }
}

pub fn cumulative_benefit(sample: &OrderedSample) -> BenefitSeries {
    let n = sample.n();
    let mut s = BenefitSeries {
        b: Vec::with_capacity(n + 1),
        n0: Vec::with_capacity(n + 1),
        n1: Vec::with_capacity(n + 1),
        y0: Vec::with_capacity(n + 1),
        y1: Vec::with_capacity(n + 1),
    };
    let (mut n0, mut n1, mut y0, mut y1) = (0u32, 0u32, 0u32, 0u32);
    s.b.push(0.0);
    s.n0.push(0);
    s.n1.push(0);
    s.y0.push(0);
    s.y1.push(0);
    for (i, r) in sample.records().iter().enumerate() {
        let y = r.outcome as u32;
        match r.arm {
            Arm::Control => {
                n0 += 1;
                y0 += y;
            }
            Arm::Treated => {
                n1 += 1;
                y1 += y;
            }
        }
        let k = (i + 1) as f64;
        s.b.push(k * (ratio(y0 as f64, n0 as f64) - ratio(y1 as f64, n1 as f64)));
        s.n0.push(n0);
        s.n1.push(n1);
        s.y0.push(y0);
        s.y1.push(y1);
    }
    s
}

/// Centered increment `D_k - mu_k` for the subject entering at position `k`
/// (1-based), where `arm_size` counts that subject's arm among the first `k`.
///
/// `pi` is the expected baseline risk and `delta` the expected effect; under
/// the null both are replaced by the model's predictions. No range checks.
pub fn centered_increment(k: usize, arm: Arm, outcome: bool, pi: f64, delta: f64, arm_size: u32) -> f64 {
    let k = k as f64;
    let y = if outcome { 1.0 } else { 0.0 };
    let m = arm_size as f64;
    match arm {
        Arm::Control => k * ratio(y - pi, m),
        Arm::Treated => -k * ratio(y - pi + delta, m),
    }
}

/// Conditional variance of the `k`-th increment given the history.
pub fn increment_variance(k: usize, arm: Arm, pi: f64, delta: f64, arm_size: u32) -> f64 {
    let k = k as f64;
    let m = arm_size as f64;
    let p = match arm {
        Arm::Control => pi,
        Arm::Treated => pi - delta,
    };
    k * k * ratio(p * (1.0 - p), m * m)
}

/// Per-subject conditional moments of the cumulative-benefit increments.
/// Vectors have length `n + 1` with a zero at index 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMoments {
    /// `mu_k = E(D_k | history)`, from the increment formulas.
    pub mu: Vec<f64>,
    /// `D_k - mu_k` evaluated directly.
    pub centered: Vec<f64>,
    /// `Var(D_k | history)`.
    pub sigma2: Vec<f64>,
    /// Running sum of `sigma2`.
    pub s2: Vec<f64>,
}

/// `mu_k` evaluated from the running sums of the first `k - 1` subjects.
///
/// The treated-arm expression follows the control-arm one with the roles of
/// the arms swapped; its numerator is `sum a_i Y_i + (pi - delta)`.
fn expected_increment(series: &BenefitSeries, k: usize, arm: Arm, pi: f64, delta: f64) -> f64 {
    let kf = k as f64;
    let (r0_prev, r1_prev) = series.arm_rates(k - 1);
    match arm {
        Arm::Control => {
            kf * ratio(series.y0[k - 1] as f64 + pi, series.n0[k] as f64)
                - (kf - 1.0) * r0_prev
                - r1_prev
        }
        Arm::Treated => {
            r0_prev
                - (kf * ratio(series.y1[k - 1] as f64 + (pi - delta), series.n1[k] as f64)
                    - (kf - 1.0) * r1_prev)
        }
    }
}

/// Conditional moments with predicted `pi` and `delta` standing in for their
/// true counterparts.
///
/// Requires `pi` on every record, `pi` strictly inside `(0, 1)` for control
/// subjects and `pi - delta` strictly inside `(0, 1)` for treated subjects.
pub fn conditional_moments(series: &BenefitSeries, sample: &OrderedSample) -> Result<ConditionalMoments> {
    let n = sample.n();
    debug_assert_eq!(series.n(), n);
    let mut m = ConditionalMoments {
        mu: vec![0.0; n + 1],
        centered: vec![0.0; n + 1],
        sigma2: vec![0.0; n + 1],
        s2: vec![0.0; n + 1],
    };
    for (i, r) in sample.records().iter().enumerate() {
        let k = i + 1;
        let pi = r.pi.ok_or(Error::MissingBaselineRisk { index: i })?;
        let risk = match r.arm {
            Arm::Control => pi,
            Arm::Treated => pi - r.delta,
        };
        if risk <= 0.0 || risk >= 1.0 {
            return Err(Error::degenerate(format!(
                "predicted {} risk {risk} at position {k} has zero variance",
                if r.arm.is_treated() { "treated" } else { "control" }
            )));
        }
        let arm_size = match r.arm {
            Arm::Control => series.n0[k],
            Arm::Treated => series.n1[k],
        };
        m.mu[k] = expected_increment(series, k, r.arm, pi, r.delta);
        m.centered[k] = centered_increment(k, r.arm, r.outcome, pi, r.delta, arm_size);
        m.sigma2[k] = increment_variance(k, r.arm, pi, r.delta, arm_size);
        m.s2[k] = m.s2[k - 1] + m.sigma2[k];
    }
    Ok(m)
}

/// The conditional standardized process: `C_k = (1/n) sum_{i<=k} (D_i - mu_i)`
/// on the clock `t_k = s_k^2 / s_n^2`.
pub fn conditional_s_process(sample: &OrderedSample) -> Result<ProcessPath> {
    let series = cumulative_benefit(sample);
    let moments = conditional_moments(&series, sample)?;
    let n = sample.n() as f64;
    let mut raw = Vec::with_capacity(moments.centered.len());
    let mut acc = 0.0;
    raw.push(0.0);
    for c in &moments.centered[1..] {
        acc += c;
        raw.push(acc / n);
    }
    ProcessPath::standardize(
        ProcessKind::IteConditional,
        raw,
        &moments.s2,
        aligned_keys(&sample.keys()),
    )
}

/// Marginal variance of `B_k` from the running arm event rates; an empty
/// arm contributes nothing.
pub fn marginal_variance(series: &BenefitSeries, k: usize) -> f64 {
    let kf = k as f64;
    let (p0, p1) = series.arm_rates(k);
    kf * kf
        * (ratio(p0 * (1.0 - p0), series.n0[k] as f64) + ratio(p1 * (1.0 - p1), series.n1[k] as f64))
}

/// The marginal standardized process: `C~_k = (B_k - sum_{i<=k} delta_i)/n`
/// on the clock `t_k = Var(B_k) / Var(B_n)`.
///
/// `C~_n` is the observed ATE minus the mean predicted effect. Time values
/// are kept as computed, including any backward steps.
pub fn marginal_s_process(sample: &OrderedSample) -> Result<ProcessPath> {
    let series = cumulative_benefit(sample);
    let n = sample.n();
    let nf = n as f64;
    let mut raw = Vec::with_capacity(n + 1);
    let mut var = Vec::with_capacity(n + 1);
    raw.push(0.0);
    var.push(0.0);
    let mut delta_sum = 0.0;
    for (i, r) in sample.records().iter().enumerate() {
        let k = i + 1;
        delta_sum += r.delta;
        raw.push((series.b[k] - delta_sum) / nf);
        var.push(marginal_variance(&series, k));
    }
    ProcessPath::standardize(ProcessKind::IteMarginal, raw, &var, aligned_keys(&sample.keys()))
}

/// Which ITE process to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    Conditional,
    Marginal,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Conditional => "conditional",
            Approach::Marginal => "marginal",
        }
    }
}

pub fn ite_s_process(sample: &OrderedSample, approach: Approach) -> Result<ProcessPath> {
    match approach {
        Approach::Conditional => conditional_s_process(sample),
        Approach::Marginal => marginal_s_process(sample),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_sample, OrderBy, SubjectRecord};

    fn sample(a: &[u8], y: &[u8], delta: &[f64], pi: Option<&[f64]>) -> OrderedSample {
        let recs = (0..a.len())
            .map(|i| {
                let r = SubjectRecord::from_indicators(a[i], y[i], delta[i]).unwrap();
                match pi {
                    Some(p) => r.with_pi(p[i]),
                    None => r,
                }
            })
            .collect();
        build_sample(recs, OrderBy::Delta).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn benefit_hand_example() {
        let s = sample(&[0, 1, 0, 1], &[1, 1, 0, 0], &[0.1; 4], None);
        let b = cumulative_benefit(&s);
        let want = [0.0, 1.0, 0.0, -1.5, 0.0];
        for (got, want) in b.b.iter().zip(want) {
            assert!(close(*got, want), "{:?}", b.b);
        }
        assert_eq!(b.n0, vec![0, 1, 1, 2, 2]);
        assert_eq!(b.n1, vec![0, 0, 1, 1, 2]);
    }

    #[test]
    fn no_events_no_benefit() {
        let s = sample(&[0, 1, 1, 0, 1], &[0; 5], &[0.0, 0.1, 0.2, 0.3, 0.4], None);
        assert!(cumulative_benefit(&s).b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn certain_control_risk_has_zero_centered_increment() {
        assert_eq!(centered_increment(3, Arm::Control, true, 1.0, 0.2, 2), 0.0);
    }

    #[test]
    fn two_subject_moments() {
        let s = sample(&[0, 1], &[1, 0], &[0.1, 0.1], Some(&[0.5, 0.5]));
        let series = cumulative_benefit(&s);
        let m = conditional_moments(&series, &s).unwrap();
        assert!(close(m.centered[1], 0.5));
        assert!(close(m.sigma2[1], 0.25));
        // treated non-event raises the benefit estimate: D_2 = 1, mu_2 = 0.2
        assert!(close(m.centered[2], 0.8));
        assert!(close(m.sigma2[2], 0.96));
        for k in 1..=2 {
            assert!(close(series.increment(k) - m.mu[k], m.centered[k]));
        }

        let p = conditional_s_process(&s).unwrap();
        assert!(close(p.times[1], 0.25 / 1.21));
        assert_eq!(p.times[2], 1.0);
        assert!(close(p.locations[1], 2.0 * 0.25 / 1.1));
        assert!((p.locations[1] - 0.4545).abs() < 1e-4);
        assert!(close(p.raw_errors[2], 0.65));
        assert!((p.locations[2] - 1.3 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn conditional_rejects_certain_risks() {
        let s = sample(&[0, 1], &[1, 0], &[0.1, 0.5], Some(&[0.5, 0.5]));
        let e = conditional_s_process(&s).unwrap_err();
        assert!(e.is_degenerate(), "{e}");
        let s = sample(&[0, 1], &[1, 0], &[0.0, 0.1], None);
        assert!(matches!(
            conditional_s_process(&s),
            Err(Error::MissingBaselineRisk { .. })
        ));
    }

    #[test]
    fn marginal_hand_example() {
        let s = sample(&[0, 1, 0, 1], &[1, 1, 0, 0], &[0.1; 4], None);
        let series = cumulative_benefit(&s);
        let want = [0.0, 0.225, -0.05, -0.45, -0.1];
        let p = marginal_s_process(&s).unwrap();
        for (got, want) in p.raw_errors.iter().zip(want) {
            assert!(close(*got, want), "{:?}", p.raw_errors);
        }
        let (p0, p1) = series.arm_rates(4);
        assert!(close(p.terminal_raw_error(), p0 - p1 - 0.1));
    }

    #[test]
    fn marginal_without_events_is_degenerate() {
        let s = sample(&[0, 1, 0, 1], &[0; 4], &[0.0; 4], None);
        let series = cumulative_benefit(&s);
        assert!((0..=4).all(|k| marginal_variance(&series, k) == 0.0));
        assert!(marginal_s_process(&s).unwrap_err().is_degenerate());
    }
}
