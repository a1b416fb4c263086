use serde::Serialize;

use super::ScenarioSpec;

/// Mean and mean absolute difference between true and predicted effects
/// over the covariate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationError {
    /// `E(delta* - delta)`.
    pub mce: f64,
    /// `E|delta* - delta|`.
    pub mace: f64,
}

const LIMIT: f64 = 12.0;
const TOL: f64 = 1e-11;

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson integral of `g(x) phi(x)` over `[-12, 12]`, where the
/// normal mass outside is below 1e-32.
pub(crate) fn normal_expectation(g: impl Fn(f64) -> f64) -> f64 {
    let f = |x: f64| g(x) * normal_pdf(x);
    // start from panels so the integrand's peak is never skipped
    let panels = 48;
    let width = 2.0 * LIMIT / panels as f64;
    (0..panels)
        .map(|i| {
            let a = -LIMIT + i as f64 * width;
            let b = a + width;
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            adaptive(&f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), TOL / panels as f64, 40)
        })
        .sum()
}

/// True calibration error of a scenario, integrated over `x ~ N(0, 1)`.
pub fn true_calibration_metrics(spec: &ScenarioSpec) -> CalibrationError {
    let gap = |x: f64| spec.truth.delta(&spec.beta, x) - spec.beta.delta(x);
    CalibrationError {
        mce: normal_expectation(gap),
        mace: normal_expectation(|x| gap(x).abs()),
    }
}
