#![allow(dead_code)]

use itecal::simulation::logistic;
use itecal::{Arm, SubjectRecord};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random validation sample with both arms present, outcomes drawn from the
/// predicted risks.
pub fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<SubjectRecord> {
    assert!(n >= 2);
    loop {
        let recs: Vec<SubjectRecord> = (0..n)
            .map(|_| {
                let arm = if rng.random::<bool>() { Arm::Treated } else { Arm::Control };
                let pi: f64 = rng.random_range(0.05..0.95);
                let treated: f64 = rng.random_range(0.02..0.98);
                let delta = pi - treated;
                let risk = if arm.is_treated() { treated } else { pi };
                SubjectRecord::new(arm, rng.random::<f64>() < risk, delta).with_pi(pi)
            })
            .collect();
        let treated = recs.iter().filter(|r| r.arm.is_treated()).count();
        if treated > 0 && treated < n {
            return recs;
        }
    }
}

/// Calibrated single-group risk sample: `x ~ N(0, 1)`, `logit p = -1 + x`.
pub fn risk_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, bool)> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let p = logistic(-1.0 + x);
            (p, rng.random::<f64>() < p)
        })
        .collect()
}

/// `B_k = k (r0_k - r1_k)` straight from the first `k` records, 0/0 taken as 0.
pub fn brute_benefit(records: &[SubjectRecord], k: usize) -> f64 {
    let (mut n0, mut n1, mut y0, mut y1) = (0.0, 0.0, 0.0, 0.0);
    for r in &records[..k] {
        if r.arm.is_treated() {
            n1 += 1.0;
            y1 += r.y();
        } else {
            n0 += 1.0;
            y0 += r.y();
        }
    }
    let rate = |y: f64, m: f64| if m == 0.0 { 0.0 } else { y / m };
    k as f64 * (rate(y0, n0) - rate(y1, n1))
}

/// Per-step increments `D_k` and their conditional means `mu_k`, built from
/// running arm totals of the first `k - 1` subjects.
pub fn running_total_increments(records: &[SubjectRecord]) -> (Vec<f64>, Vec<f64>) {
    let rate = |y: f64, m: f64| if m == 0.0 { 0.0 } else { y / m };
    let (mut n0, mut n1, mut y0, mut y1) = (0.0, 0.0, 0.0, 0.0);
    let mut d = vec![0.0];
    let mut mu = vec![0.0];
    for (i, r) in records.iter().enumerate() {
        let k = (i + 1) as f64;
        let (r0, r1) = (rate(y0, n0), rate(y1, n1));
        let pi = r.pi.unwrap();
        if r.arm.is_treated() {
            let m = n1 + 1.0;
            d.push(r0 - (k * (y1 + r.y()) / m - (k - 1.0) * r1));
            mu.push(r0 - (k * (y1 + pi - r.delta) / m - (k - 1.0) * r1));
            n1 = m;
            y1 += r.y();
        } else {
            let m = n0 + 1.0;
            d.push(k * (y0 + r.y()) / m - (k - 1.0) * r0 - r1);
            mu.push(k * (y0 + pi) / m - (k - 1.0) * r0 - r1);
            n0 = m;
            y0 += r.y();
        }
    }
    (d, mu)
}
