//! Asymptotic null distributions and the tests built on them.
//!
//! Under the null a standardized path converges to standard Brownian motion
//! on `[0, 1]`, so:
//!
//! - the terminal location is `Normal(0, 1)`;
//! - `max_k |S_k|` follows the law of `sup |W(t)|`;
//! - `max_k |S_k - t_k S_n|` follows the Kolmogorov distribution (the
//!   supremum of the absolute Brownian bridge) and is independent of `S_n`,
//!   so the two parts can be merged with Fisher's method.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::domain::{ProcessPath, TestReport};
use crate::error::{Error, Result};

/// Smallest p-value fed to a logarithm.
pub const P_FLOOR: f64 = 1e-300;

const SERIES_EPS: f64 = 1e-14;
const MAX_TERMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    NormalTwoSided,
    Kolmogorov,
    SupAbsBm,
    Fisher4df,
}

/// A p-value with the reference distribution it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValue {
    pub value: f64,
    pub method: PMethod,
}

impl PValue {
    /// Clamps `value` into `[0, 1]`.
    pub fn new(value: f64, method: PMethod) -> Self {
        let value = if value.is_nan() { 1.0 } else { value.clamp(0.0, 1.0) };
        PValue { value, method }
    }

    /// The value floored at [`P_FLOOR`], safe for `ln`.
    pub fn for_log(&self) -> f64 {
        self.value.max(P_FLOOR)
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(Z > x)` for standard normal `Z`, accurate in the far tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Two-sided p-value of a z-score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() * FRAC_1_SQRT_2).min(1.0)
}

fn check_nonneg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::NegativeArgument(x))
    } else {
        Ok(())
    }
}

/// Survival function of the Kolmogorov distribution, `P(sup|B(t)| > x)` for
/// a standard Brownian bridge `B`.
///
/// Uses the alternating series `2 sum (-1)^(k-1) exp(-2 k^2 x^2)` for
/// `x >= 1`, and the Jacobi-transformed CDF series
/// `sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2))` below that, where the
/// alternating series converges slowly.
pub fn kolmogorov_sf(x: f64) -> Result<f64> {
    check_nonneg(x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let sf = if x >= 1.0 {
        let mut sum = 0.0;
        for k in 1..MAX_TERMS {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < SERIES_EPS {
                break;
            }
        }
        2.0 * sum
    } else {
        1.0 - kolmogorov_cdf_small(x)
    };
    Ok(sf.clamp(0.0, 1.0))
}

fn kolmogorov_cdf_small(x: f64) -> f64 {
    let c = PI * PI / (8.0 * x * x);
    let mut sum = 0.0;
    for k in 1..MAX_TERMS {
        let m = (2 * k - 1) as f64;
        let term = (-m * m * c).exp();
        sum += term;
        if term < SERIES_EPS * sum.max(f64::MIN_POSITIVE) || term == 0.0 {
            break;
        }
    }
    (2.0 * PI).sqrt() / x * sum
}

/// Survival function of `sup_{t in [0,1]} |W(t)|` for standard Brownian motion.
///
/// For `x < 1` the theta series
/// `1 - (4/pi) sum (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 / (8 x^2))` is used
/// directly; for larger `x` the equivalent reflection series
/// `4 sum (-1)^k P(Z > (2k+1) x)` converges in a few terms and keeps
/// relative accuracy in the tail.
pub fn sup_abs_bm_sf(x: f64) -> Result<f64> {
    check_nonneg(x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let sf = if x < 1.0 {
        sup_abs_bm_sf_theta(x)
    } else {
        sup_abs_bm_sf_reflection(x)
    };
    Ok(sf.clamp(0.0, 1.0))
}

pub(crate) fn sup_abs_bm_sf_theta(x: f64) -> f64 {
    let c = PI * PI / (8.0 * x * x);
    let mut sum = 0.0;
    for k in 0..MAX_TERMS {
        let m = (2 * k + 1) as f64;
        let term = (-m * m * c).exp() / m;
        sum += if k % 2 == 0 { term } else { -term };
        if term < SERIES_EPS {
            break;
        }
    }
    1.0 - 4.0 / PI * sum
}

pub(crate) fn sup_abs_bm_sf_reflection(x: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..MAX_TERMS {
        let term = std_normal_sf((2 * k + 1) as f64 * x);
        sum += if k % 2 == 0 { term } else { -term };
        if term <= 1e-17 * sum.abs() || term == 0.0 {
            break;
        }
    }
    4.0 * sum
}

/// Fisher's combination of two independent p-values: the chi-square (4 df)
/// survival of `-2 (ln p1 + ln p2)`, which has the closed form
/// `exp(-X/2) (1 + X/2)`.
pub fn fisher_combine(p1: f64, p2: f64) -> f64 {
    let p1 = PValue::new(p1, PMethod::Fisher4df).for_log();
    let p2 = PValue::new(p2, PMethod::Fisher4df).for_log();
    let half_x = -(p1.ln() + p2.ln());
    if half_x <= 0.0 {
        return 1.0;
    }
    ((-half_x).exp() * (1.0 + half_x)).clamp(0.0, 1.0)
}

/// Finds `x` in `[lo, hi]` with `f(x) = target` for a monotone `f`.
fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above = f(mid) > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal quantile by bisection on [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    bisect(std_normal_cdf, p, -40.0, 40.0, true)
}

/// Critical value `q` with `kolmogorov_sf(q) = alpha`.
pub fn kolmogorov_critical(alpha: f64) -> f64 {
    bisect(|x| kolmogorov_sf(x).unwrap_or(1.0), alpha, 0.0, 20.0, false)
}

/// Critical value `x` with `sup_abs_bm_sf(x) = alpha`.
pub fn sup_abs_bm_critical(alpha: f64) -> f64 {
    bisect(|x| sup_abs_bm_sf(x).unwrap_or(1.0), alpha, 0.0, 40.0, false)
}

/// Result of the one-part BM test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BmResult {
    pub bm_stat: f64,
    pub p_bm: f64,
}

/// `max_k |S_k|` against the law of `sup |W|`.
pub fn bm_test(path: &ProcessPath) -> BmResult {
    let bm_stat = path.locations.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    BmResult {
        bm_stat,
        p_bm: sup_abs_bm_sf(bm_stat).unwrap_or(0.0),
    }
}

/// `max_k |S_k - t_k S_n|` and its Kolmogorov p-value.
///
/// On its own this is the test to use when the terminal value is zero by
/// construction (e.g. after recalibrating intercepts within each arm).
pub fn bridge_only(path: &ProcessPath) -> (f64, f64) {
    let s_n = path.terminal_location();
    let stat = path
        .times
        .iter()
        .zip(&path.locations)
        .fold(0.0_f64, |m, (t, s)| m.max((s - t * s_n).abs()));
    (stat, kolmogorov_sf(stat).unwrap_or(0.0))
}

/// The two-part bridge test; the BM fields are filled as well.
pub fn bridge_test(path: &ProcessPath) -> TestReport {
    let s_n = path.terminal_location();
    let p_mean = normal_two_sided_p(s_n);
    let (bridge_stat, p_bridge) = bridge_only(path);
    let bm = bm_test(path);
    TestReport {
        s_n,
        p_mean,
        bridge_stat,
        p_bridge,
        p_unified: fisher_combine(p_mean, p_bridge),
        bm_stat: bm.bm_stat,
        p_bm: bm.p_bm,
        c_n: path.terminal_raw_error(),
    }
}
