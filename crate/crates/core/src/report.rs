//! The `assess` pipeline and its versioned JSON report.

use serde::Serialize;

use crate::domain::{build_sample, OrderBy, ProcessKind, ProcessPath, SubjectRecord};
use crate::error::Result;
use crate::inference::{bm_test, bridge_only, bridge_test};
use crate::ite::{ite_s_process, Approach};
use crate::risk::{per_arm_compound_test, risk_s_process, ArmLabel, CompoundReport, PerArmTest, RiskSampleView};

pub const REPORT_SCHEMA: &str = "itecal.assess-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproachSelection {
    Conditional,
    #[default]
    Marginal,
    Both,
    PerArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestSelection {
    Bm,
    #[default]
    Bridge,
    /// Only the bridge part, for models whose terminal value is zero by construction.
    BridgeOnly,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessOptions {
    pub approach: ApproachSelection,
    pub test: TestSelection,
    /// Column the sample was ordered by, if not the predicted effect.
    pub order_column: Option<String>,
    pub alpha: f64,
}

impl Default for AssessOptions {
    fn default() -> Self {
        AssessOptions {
            approach: ApproachSelection::default(),
            test: TestSelection::default(),
            order_column: None,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSummary {
    pub n: usize,
    pub n_control: usize,
    pub n_treated: usize,
    pub ordering: OrderBy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_column: Option<String>,
    pub tie_flag: bool,
}

/// Test results for one process. Fields not covered by the selected test
/// are omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessResult {
    pub approach: String,
    pub kind: ProcessKind,
    pub n: usize,
    pub c_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_bridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_unified: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bm_stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_bm: Option<f64>,
    /// Whether the headline p-value of the selected test is below `alpha`.
    pub reject: bool,
    /// Number of backward steps of the time axis.
    pub negative_time_steps: usize,
}

impl ProcessResult {
    fn from_path(label: &str, path: &ProcessPath, test: TestSelection, alpha: f64) -> Self {
        let mut r = ProcessResult {
            approach: label.to_string(),
            kind: path.kind,
            n: path.n(),
            c_n: path.terminal_raw_error(),
            s_n: None,
            p_mean: None,
            bridge_stat: None,
            p_bridge: None,
            p_unified: None,
            bm_stat: None,
            p_bm: None,
            reject: false,
            negative_time_steps: path.times.windows(2).filter(|w| w[1] < w[0]).count(),
        };
        let headline = match test {
            TestSelection::Bm => {
                let bm = bm_test(path);
                r.bm_stat = Some(bm.bm_stat);
                r.p_bm = Some(bm.p_bm);
                bm.p_bm
            }
            TestSelection::BridgeOnly => {
                let (stat, p) = bridge_only(path);
                r.bridge_stat = Some(stat);
                r.p_bridge = Some(p);
                p
            }
            TestSelection::Bridge | TestSelection::Both => {
                let t = bridge_test(path);
                r.s_n = Some(t.s_n);
                r.p_mean = Some(t.p_mean);
                r.bridge_stat = Some(t.bridge_stat);
                r.p_bridge = Some(t.p_bridge);
                r.p_unified = Some(t.p_unified);
                if test == TestSelection::Both {
                    r.bm_stat = Some(t.bm_stat);
                    r.p_bm = Some(t.p_bm);
                }
                t.p_unified
            }
        };
        r.reject = headline < alpha;
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerArmResult {
    #[serde(flatten)]
    pub compound: CompoundReport,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssessReport {
    pub schema: &'static str,
    pub input: InputSummary,
    pub alpha: f64,
    pub approach: ApproachSelection,
    pub test: TestSelection,
    pub results: Vec<ProcessResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_arm: Option<PerArmResult>,
    pub warnings: Vec<String>,
}

impl AssessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A finished assessment: the report and the paths behind it, for plotting.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub report: AssessReport,
    pub paths: Vec<ProcessPath>,
}

/// Orders the records, builds the requested processes and runs the tests.
pub fn assess(records: Vec<SubjectRecord>, opts: &AssessOptions) -> Result<Assessment> {
    let ordering = if opts.order_column.is_some() {
        OrderBy::OrderKey
    } else {
        OrderBy::Delta
    };
    let sample = build_sample(records, ordering)?;
    let (n_control, n_treated) = sample.arm_counts();
    let mut warnings = Vec::new();
    if sample.tie_flag() {
        warnings.push("ordering key has ties; tied subjects are kept in input order".to_string());
    }

    let mut paths = Vec::new();
    let mut results = Vec::new();
    let mut per_arm = None;
    let approaches: &[Approach] = match opts.approach {
        ApproachSelection::Conditional => &[Approach::Conditional],
        ApproachSelection::Marginal => &[Approach::Marginal],
        ApproachSelection::Both => &[Approach::Conditional, Approach::Marginal],
        ApproachSelection::PerArm => &[],
    };
    for &a in approaches {
        let path = ite_s_process(&sample, a)?;
        let result = ProcessResult::from_path(a.as_str(), &path, opts.test, opts.alpha);
        if a == Approach::Marginal {
            warnings.push("marginal process is an approximation; its p-values are heuristic".to_string());
            if result.negative_time_steps > 0 {
                warnings.push(format!(
                    "marginal time axis steps backwards {} times",
                    result.negative_time_steps
                ));
            }
        }
        results.push(result);
        paths.push(path);
    }
    if opts.approach == ApproachSelection::PerArm {
        let which = match opts.test {
            TestSelection::Bm => PerArmTest::Bm,
            _ => PerArmTest::Bridge,
        };
        let compound = per_arm_compound_test(&sample, which)?;
        for (label, arm) in [("control", ArmLabel::ControlOnly), ("treated", ArmLabel::TreatedOnly)] {
            let path = risk_s_process(&RiskSampleView::from_sample(&sample, arm)?)?;
            results.push(ProcessResult::from_path(label, &path, opts.test, opts.alpha));
            paths.push(path);
        }
        per_arm = Some(PerArmResult {
            reject: compound.p_compound < opts.alpha,
            compound,
        });
    }

    Ok(Assessment {
        report: AssessReport {
            schema: REPORT_SCHEMA,
            input: InputSummary {
                n: sample.n(),
                n_control,
                n_treated,
                ordering,
                order_column: opts.order_column.clone(),
                tie_flag: sample.tie_flag(),
            },
            alpha: opts.alpha,
            approach: opts.approach,
            test: opts.test,
            results,
            per_arm,
            warnings,
        },
        paths,
    })
}
