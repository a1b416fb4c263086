//! Monte Carlo studies of the ITE calibration tests.
//!
//! Every scenario predicts with a reference logistic model
//! `logit pi_a(x) = b0 + bx x + ba a + bxa x a` (x ~ N(0,1), a ~ Bernoulli(0.5))
//! and draws outcomes from one of three truths:
//!
//! - set 1: the reference model itself (null);
//! - set 2: `b0 + bx x + alpha a + gamma (ba a + bxa x a)`, miscalibrated
//!   linearly on the logit scale among the treated;
//! - set 3: `alpha_a + gamma_a sign(L) |L|^gamma_a` with `L = logit pi_a(x)`,
//!   applied separately in each arm.

mod catalog;
mod metrics;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{build_sample, Arm, OrderBy, OrderedSample, SubjectRecord};
use crate::error::{Error, Result};
use crate::inference::{bm_test, bridge_test};
use crate::ite::{conditional_s_process, marginal_s_process};

pub use catalog::{builtin_catalog, lookup, parse_catalog, CatalogEntry, BUILTIN_CATALOG};
pub use metrics::{true_calibration_metrics, CalibrationError};

/// Significance level used for rejection rates.
pub const ALPHA: f64 = 0.05;
/// Spacing of the p-value ECDF grid.
pub const ECDF_STEP: f64 = 0.01;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Coefficients of the reference prediction model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Beta {
    pub b0: f64,
    pub bx: f64,
    pub ba: f64,
    pub bxa: f64,
}

impl Beta {
    /// Reference model of the power simulations.
    pub const REFERENCE: Beta = Beta {
        b0: 0.0,
        bx: 0.25,
        ba: -0.5,
        bxa: 0.25,
    };

    pub fn linear_predictor(&self, x: f64, arm: Arm) -> f64 {
        let a = arm.indicator() as f64;
        self.b0 + self.bx * x + self.ba * a + self.bxa * x * a
    }

    pub fn risk(&self, x: f64, arm: Arm) -> f64 {
        logistic(self.linear_predictor(x, arm))
    }

    /// Predicted effect `pi_0(x) - pi_1(x)`.
    pub fn delta(&self, x: f64) -> f64 {
        self.risk(x, Arm::Control) - self.risk(x, Arm::Treated)
    }

    fn is_finite(&self) -> bool {
        [self.b0, self.bx, self.ba, self.bxa].iter().all(|v| v.is_finite())
    }
}

/// Outcome-generating model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "set")]
pub enum Truth {
    #[serde(rename = "1")]
    Reference,
    #[serde(rename = "2")]
    LogitLinear { alpha: f64, gamma: f64 },
    #[serde(rename = "3")]
    PowerTransform {
        alpha0: f64,
        gamma0: f64,
        alpha1: f64,
        gamma1: f64,
    },
}

impl Truth {
    pub fn set_id(&self) -> u8 {
        match self {
            Truth::Reference => 1,
            Truth::LogitLinear { .. } => 2,
            Truth::PowerTransform { .. } => 3,
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Truth::Reference => vec![],
            Truth::LogitLinear { alpha, gamma } => vec![alpha, gamma],
            Truth::PowerTransform {
                alpha0,
                gamma0,
                alpha1,
                gamma1,
            } => vec![alpha0, gamma0, alpha1, gamma1],
        }
    }

    /// True outcome risk for covariate `x` in `arm` when predictions come from `beta`.
    pub fn risk(&self, beta: &Beta, x: f64, arm: Arm) -> f64 {
        match *self {
            Truth::Reference => beta.risk(x, arm),
            Truth::LogitLinear { alpha, gamma } => {
                let a = arm.indicator() as f64;
                logistic(beta.b0 + beta.bx * x + alpha * a + gamma * (beta.ba * a + beta.bxa * x * a))
            }
            Truth::PowerTransform {
                alpha0,
                gamma0,
                alpha1,
                gamma1,
            } => {
                let (alpha, gamma) = match arm {
                    Arm::Control => (alpha0, gamma0),
                    Arm::Treated => (alpha1, gamma1),
                };
                let l = beta.linear_predictor(x, arm);
                let bent = if l == 0.0 { 0.0 } else { l.signum() * l.abs().powf(gamma) };
                logistic(alpha + gamma * bent)
            }
        }
    }

    /// True effect `delta*(x)`.
    pub fn delta(&self, beta: &Beta, x: f64) -> f64 {
        self.risk(beta, x, Arm::Control) - self.risk(beta, x, Arm::Treated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    /// Catalog id such as `s12`, if the scenario came from the catalog.
    pub id: Option<String>,
    pub beta: Beta,
    pub truth: Truth,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Probability of assignment to treatment.
    pub p_treat: f64,
}

impl ScenarioSpec {
    pub fn new(beta: Beta, truth: Truth, n: usize, reps: usize, seed: u64) -> Self {
        ScenarioSpec {
            id: None,
            beta,
            truth,
            n,
            reps,
            seed,
            p_treat: 0.5,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn set_id(&self) -> u8 {
        self.truth.set_id()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        if self.n < 2 {
            return bad("sample size must be at least 2");
        }
        if self.reps < 1 {
            return bad("at least one replicate is required");
        }
        if !(self.p_treat > 0.0 && self.p_treat < 1.0) {
            return bad("treatment probability must be in (0, 1)");
        }
        if !self.beta.is_finite() || !self.truth.params().iter().all(|v| v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.truth.set_id() == 3 {
            if let Truth::PowerTransform { gamma0, gamma1, .. } = self.truth {
                if gamma0 < 0.0 || gamma1 < 0.0 {
                    return bad("power-transform exponents must be non-negative");
                }
            }
        }
        Ok(())
    }
}

/// Independent random stream for one replicate: ChaCha8 keyed by the seed,
/// with the replicate index as the stream id, so draw `j` of replicate `r`
/// is fixed by `(seed, r, j)` alone.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws one validation sample. Predictions always come from the reference
/// model; outcomes come from the scenario's truth.
pub fn generate_replicate(spec: &ScenarioSpec, replicate: usize) -> Result<OrderedSample> {
    spec.validate()?;
    let mut rng = replicate_rng(spec.seed, replicate as u64);
    let records = (0..spec.n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let arm = if rng.random::<f64>() < spec.p_treat {
                Arm::Treated
            } else {
                Arm::Control
            };
            let y = rng.random::<f64>() < spec.truth.risk(&spec.beta, x, arm);
            let pi = spec.beta.risk(x, Arm::Control);
            let delta = pi - spec.beta.risk(x, Arm::Treated);
            SubjectRecord::new(arm, y, delta).with_pi(pi)
        })
        .collect();
    build_sample(records, OrderBy::Delta)
}

/// The four tests run per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    ConditionalBm,
    ConditionalBridge,
    MarginalBm,
    MarginalBridge,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::ConditionalBm,
        TestKind::ConditionalBridge,
        TestKind::MarginalBm,
        TestKind::MarginalBridge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::ConditionalBm => "conditional-bm",
            TestKind::ConditionalBridge => "conditional-bridge",
            TestKind::MarginalBm => "marginal-bm",
            TestKind::MarginalBridge => "marginal-bridge",
        }
    }

    fn conditional(self) -> bool {
        matches!(self, TestKind::ConditionalBm | TestKind::ConditionalBridge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateReplicate {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub test: TestKind,
    pub rejections: usize,
    pub rate: f64,
    pub mc_se: f64,
    /// Two-sided KS distance between the p-value ECDF and Uniform(0, 1).
    pub ks_distance: f64,
    /// ECDF of the p-values at `0, ECDF_STEP, ..., 1`.
    pub ecdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub schema: &'static str,
    pub scenario: ScenarioSpec,
    pub alpha: f64,
    pub valid_reps: usize,
    pub degenerate: Vec<DegenerateReplicate>,
    pub tests: Vec<TestSummary>,
    pub true_calibration: CalibrationError,
}

impl McSummary {
    pub fn rate(&self, test: TestKind) -> Option<f64> {
        self.tests.iter().find(|t| t.test == test).map(|t| t.rate)
    }

    pub fn test(&self, test: TestKind) -> Option<&TestSummary> {
        self.tests.iter().find(|t| t.test == test)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Aligned-column text table of rejection rates.
    pub fn to_table(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario: set {}{}  n={}  reps={}  seed={}",
            s.set_id(),
            s.id.as_deref().map(|i| format!(" {i}")).unwrap_or_default(),
            s.n,
            s.reps,
            s.seed
        );
        let _ = writeln!(
            out,
            "true calibration error: mean {:.4}  mean absolute {:.4}",
            self.true_calibration.mce, self.true_calibration.mace
        );
        let _ = writeln!(
            out,
            "valid replicates: {} ({} degenerate)",
            self.valid_reps,
            self.degenerate.len()
        );
        let _ = writeln!(
            out,
            "{:<20} {:>10} {:>8} {:>8} {:>8}",
            "test", "rejected", "rate", "mc_se", "ks"
        );
        for t in &self.tests {
            let _ = writeln!(
                out,
                "{:<20} {:>10} {:>8.4} {:>8.4} {:>8.4}",
                t.test.as_str(),
                t.rejections,
                t.rate,
                t.mc_se,
                t.ks_distance
            );
        }
        out
    }
}

/// p-values of the selected tests on one replicate, in `tests` order.
fn replicate_p_values(spec: &ScenarioSpec, replicate: usize, tests: &[TestKind]) -> Result<Vec<f64>> {
    let sample = generate_replicate(spec, replicate)?;
    let conditional = if tests.iter().any(|t| t.conditional()) {
        Some(conditional_s_process(&sample)?)
    } else {
        None
    };
    let marginal = if tests.iter().any(|t| !t.conditional()) {
        Some(marginal_s_process(&sample)?)
    } else {
        None
    };
    Ok(tests
        .iter()
        .map(|t| {
            let path = if t.conditional() { &conditional } else { &marginal };
            let path = path.as_ref().expect("path built for selected test");
            match t {
                TestKind::ConditionalBm | TestKind::MarginalBm => bm_test(path).p_bm,
                TestKind::ConditionalBridge | TestKind::MarginalBridge => bridge_test(path).p_unified,
            }
        })
        .collect())
}

/// Sup-distance between the ECDF of `sorted` and the Uniform(0, 1) CDF.
pub fn ks_distance_uniform(sorted: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |d, (i, &p)| {
        let above = (i + 1) as f64 / m - p;
        let below = p - i as f64 / m;
        d.max(above).max(below)
    })
}

fn summarize(test: TestKind, mut p: Vec<f64>) -> TestSummary {
    p.sort_by(f64::total_cmp);
    let m = p.len();
    let rejections = p.iter().filter(|&&v| v < ALPHA).count();
    let rate = if m == 0 { 0.0 } else { rejections as f64 / m as f64 };
    let steps = (1.0 / ECDF_STEP).round() as usize;
    let ecdf = (0..=steps)
        .map(|i| {
            let g = i as f64 * ECDF_STEP;
            let below = p.partition_point(|&v| v <= g);
            if m == 0 {
                0.0
            } else {
                below as f64 / m as f64
            }
        })
        .collect();
    TestSummary {
        test,
        rejections,
        rate,
        mc_se: if m == 0 { 0.0 } else { (rate * (1.0 - rate) / m as f64).sqrt() },
        ks_distance: ks_distance_uniform(&p),
        ecdf,
    }
}

/// Runs every replicate of `spec` on the current rayon pool and tallies
/// rejections at [`ALPHA`]. Replicates whose processes cannot be built are
/// listed in `degenerate` and left out of every denominator.
///
/// Output depends only on `(spec, tests)`: replicate results are collected in
/// index order and reduced sequentially.
pub fn run_monte_carlo(spec: &ScenarioSpec, tests: &[TestKind]) -> Result<McSummary> {
    spec.validate()?;
    if tests.is_empty() {
        return Err(Error::InvalidScenario("no tests selected".into()));
    }
    let results: Vec<Result<Vec<f64>>> = (0..spec.reps)
        .into_par_iter()
        .map(|r| replicate_p_values(spec, r, tests))
        .collect();

    let mut per_test: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.reps); tests.len()];
    let mut degenerate = Vec::new();
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(ps) => {
                for (slot, p) in per_test.iter_mut().zip(ps) {
                    slot.push(p);
                }
            }
            Err(e) => degenerate.push(DegenerateReplicate {
                index,
                reason: e.to_string(),
            }),
        }
    }
    let valid_reps = spec.reps - degenerate.len();
    Ok(McSummary {
        schema: "itecal.mc-summary/1",
        scenario: spec.clone(),
        alpha: ALPHA,
        valid_reps,
        degenerate,
        tests: tests
            .iter()
            .zip(per_test)
            .map(|(&t, p)| summarize(t, p))
            .collect(),
        true_calibration: true_calibration_metrics(spec),
    })
}

/// [`run_monte_carlo`] on a dedicated pool of `workers` threads.
pub fn run_monte_carlo_with_workers(
    spec: &ScenarioSpec,
    tests: &[TestKind],
    workers: usize,
) -> Result<McSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| run_monte_carlo(spec, tests))
}
