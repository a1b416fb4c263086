//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails. Pass a criterion name (e.g. `ac5`) to
//! run only that one.

mod common;

use std::process::Command;
use std::time::Instant;

use itecal::inference::{
    bridge_test, fisher_combine, kolmogorov_sf, normal_two_sided_p, std_normal_cdf, sup_abs_bm_sf,
};
use itecal::ite::{conditional_moments, conditional_s_process, cumulative_benefit, marginal_s_process};
use itecal::risk::{risk_s_process, ArmLabel, RiskSampleView};
use itecal::simulation::{
    generate_replicate, lookup, replicate_rng, run_monte_carlo, run_monte_carlo_with_workers, Beta,
    McSummary, ScenarioSpec, TestKind, Truth,
};
use itecal::{build_sample, OrderBy, ProcessKind, ProcessPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn ac1_table_arithmetic() -> Outcome {
    let rows = [(1.4611, 1.2672, 0.1440, 0.0806, 0.0633), (1.1577, 1.3988, 0.2470, 0.0400, 0.0554)];
    let mut detail = Vec::new();
    let mut ok = true;
    for (s_n, s_star, p_mean, p_bridge, p_unified) in rows {
        // a three-vertex path realizing both statistics
        let path = ProcessPath {
            kind: ProcessKind::Risk,
            times: vec![0.0, 0.5, 1.0],
            locations: vec![0.0, 0.5 * s_n + s_star, s_n],
            raw_errors: vec![0.0, (0.5 * s_n + s_star) / 2.0, s_n / 2.0],
            keys: vec![0.0, 0.0, 1.0],
            total_sd: 1.0,
        };
        let r = bridge_test(&path);
        let direct = [
            normal_two_sided_p(s_n),
            kolmogorov_sf(s_star).unwrap(),
            fisher_combine(normal_two_sided_p(s_n), kolmogorov_sf(s_star).unwrap()),
        ];
        for (got, want) in [r.p_mean, r.p_bridge, r.p_unified].into_iter().zip([p_mean, p_bridge, p_unified]) {
            ok &= within(got, want, 0.001);
        }
        for (got, want) in direct.into_iter().zip([p_mean, p_bridge, p_unified]) {
            ok &= within(got, want, 0.001);
        }
        detail.push(format!("({s_n}, {s_star}) -> {:.4} {:.4} {:.4}", r.p_mean, r.p_bridge, r.p_unified));
    }
    check(ok, detail.join("; "))
}

fn summary_line(s: &McSummary) -> String {
    s.tests
        .iter()
        .map(|t| format!("{}={:.4}", t.test.as_str(), t.rate))
        .collect::<Vec<_>>()
        .join(" ")
}

fn ac2_null_uniformity() -> Outcome {
    let beta = Beta {
        b0: -1.0,
        bx: 0.25,
        ba: -1.0,
        bxa: 0.25,
    };
    let spec = ScenarioSpec::new(beta, Truth::Reference, 500, 2000, 20_250);
    let s = run_monte_carlo(&spec, &TestKind::ALL).map_err(|e| e.to_string())?;
    let ok = s.tests.iter().all(|t| (0.035..=0.065).contains(&t.rate));
    check(ok, format!("{} (valid reps {})", summary_line(&s), s.valid_reps))
}

fn ac3_power_monotonicity() -> Outcome {
    let scenarios = [
        ("set 2 (0.25, 1.5)", Truth::LogitLinear { alpha: 0.25, gamma: 1.5 }),
        ("set 3 s11", lookup(3, "s11").map_err(|e| e.to_string())?.truth),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, truth) in scenarios {
        let mut runs = Vec::new();
        for n in [500, 2500, 10_000] {
            let spec = ScenarioSpec::new(Beta::REFERENCE, truth, n, 2000, 30_000 + n as u64);
            runs.push(run_monte_carlo(&spec, &TestKind::ALL).map_err(|e| e.to_string())?);
        }
        for t in TestKind::ALL {
            let rates: Vec<_> = runs.iter().map(|s| s.test(t).unwrap()).collect();
            for w in rates.windows(2) {
                ok &= w[1].rate + 2.0 * w[1].mc_se.max(w[0].mc_se) >= w[0].rate;
            }
            ok &= rates[2].rate > 0.065;
            detail.push(format!(
                "{label} {}: {:.3}/{:.3}/{:.3}",
                t.as_str(),
                rates[0].rate,
                rates[1].rate,
                rates[2].rate
            ));
        }
    }
    check(ok, detail.join("; "))
}

fn ac4_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_b, mut worst_c) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=50);
        let sample = build_sample(common::random_records(&mut rng, n), OrderBy::Delta).map_err(|e| e.to_string())?;
        let series = cumulative_benefit(&sample);
        let moments = conditional_moments(&series, &sample).map_err(|e| e.to_string())?;
        let (d, mu) = common::running_total_increments(sample.records());
        let mut rebuilt = 0.0;
        for k in 1..=n {
            rebuilt += d[k];
            let brute = common::brute_benefit(sample.records(), k);
            worst_b = worst_b.max((rebuilt - brute).abs()).max((series.b[k] - brute).abs());
            worst_c = worst_c.max((moments.centered[k] - (d[k] - mu[k])).abs());
        }
    }
    check(
        worst_b <= 1e-10 && worst_c <= 1e-10,
        format!("max |B diff| {worst_b:.1e}, max |centered diff| {worst_c:.1e}"),
    )
}

#[allow(clippy::excessive_precision)]
const PHI_TABLE: [(f64, f64); 10] = [
    (-8.0, 6.22096057427178412351599517259e-16),
    (-5.0, 2.86651571879193911673752332875e-7),
    (-3.5, 0.000232629079035525036349925886728),
    (-1.96, 0.0249978951482204341365842690408),
    (-0.5, 0.308537538725986896362295389392),
    (0.3, 0.617911422188952637306528963121),
    (1.0, 0.841344746068542948585232545632),
    (1.4611, 0.928005999881793408586307999754),
    (2.5, 0.993790334674223864833021895426),
    (6.0, 0.999999999013412354962301859299),
];

fn ac5_distribution_oracles() -> Outcome {
    const WALKS: usize = 100_000;
    const STEPS: usize = 10_000;
    // expected overshoot of a Gaussian walk past a level, in step units
    let shift = 0.5826 / (STEPS as f64).sqrt();
    let grid = [0.5, 1.0, 1.5, 2.0, 2.5];
    let counts = (0..WALKS)
        .into_par_iter()
        .fold(
            || ([0usize; 5], [0usize; 5], vec![0.0f64; STEPS + 1]),
            |(mut bm, mut br, mut buf), w| {
                let mut rng = replicate_rng(5005, w as u64);
                let mut s = 0.0;
                for v in buf.iter_mut().skip(1) {
                    s += rng.sample::<f64, _>(StandardNormal);
                    *v = s;
                }
                let sd = (STEPS as f64).sqrt();
                let end = buf[STEPS];
                let (mut m, mut b) = (0.0f64, 0.0f64);
                for (k, &v) in buf.iter().enumerate() {
                    m = m.max(v.abs());
                    b = b.max((v - k as f64 / STEPS as f64 * end).abs());
                }
                let (m, b) = (m / sd + shift, b / sd + shift);
                for (i, &x) in grid.iter().enumerate() {
                    bm[i] += usize::from(m > x);
                    br[i] += usize::from(b > x);
                }
                (bm, br, buf)
            },
        )
        .map(|(bm, br, _)| (bm, br))
        .reduce(
            || ([0; 5], [0; 5]),
            |(mut a, mut b), (c, d)| {
                for i in 0..5 {
                    a[i] += c[i];
                    b[i] += d[i];
                }
                (a, b)
            },
        );
    let mut ok = true;
    let mut worst = 0.0f64;
    for (i, &x) in grid.iter().enumerate() {
        let bm_mc = counts.0[i] as f64 / WALKS as f64;
        let br_mc = counts.1[i] as f64 / WALKS as f64;
        let e1 = (sup_abs_bm_sf(x).unwrap() - bm_mc).abs();
        let e2 = (kolmogorov_sf(x).unwrap() - br_mc).abs();
        worst = worst.max(e1).max(e2);
        ok &= e1 <= 0.01 && e2 <= 0.01;
    }
    let phi_err = PHI_TABLE
        .iter()
        .map(|&(x, want)| (std_normal_cdf(x) - want).abs())
        .fold(0.0, f64::max);
    ok &= phi_err <= 1e-12;
    check(ok, format!("max series vs MC gap {worst:.4}; max Phi error {phi_err:.1e}"))
}

fn ac6_process_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut t_err, mut id_err, mut drift_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut monotone = true;
    for _ in 0..300 {
        let n = rng.random_range(2..=200);
        let sample = build_sample(common::random_records(&mut rng, n), OrderBy::Delta).map_err(|e| e.to_string())?;
        let view = RiskSampleView::from_sample(&sample, ArmLabel::All).map_err(|e| e.to_string())?;
        let mut paths = vec![
            risk_s_process(&view).map_err(|e| e.to_string())?,
            conditional_s_process(&sample).map_err(|e| e.to_string())?,
        ];
        monotone &= paths.iter().all(|p| p.times.windows(2).all(|w| w[1] > w[0]));
        match marginal_s_process(&sample) {
            Ok(p) => paths.push(p),
            Err(e) if e.is_degenerate() => {}
            Err(e) => return Err(e.to_string()),
        }
        for p in &paths {
            let n = p.n();
            t_err = t_err.max((p.times[n] - 1.0).abs());
            for k in 0..=n {
                id_err = id_err.max((p.locations[k] * p.total_sd / n as f64 - p.raw_errors[k]).abs());
            }
            let c = rng.random_range(-10.0..10.0);
            let mut shifted = p.clone();
            for (s, t) in shifted.locations.iter_mut().zip(&p.times) {
                *s += c * t;
            }
            drift_err = drift_err.max((bridge_test(p).bridge_stat - bridge_test(&shifted).bridge_stat).abs());
        }
    }
    let ok = t_err <= 1e-12 && id_err <= 1e-12 && drift_err <= 1e-12 && monotone;
    check(
        ok,
        format!("|t_n - 1| {t_err:.1e}, identity {id_err:.1e}, drift {drift_err:.1e}, increasing {monotone}"),
    )
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

fn ac7_clt() -> Outcome {
    let reps = 2000;
    let n = 2000;
    let risk: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(7007, r as u64);
            let view = RiskSampleView::new(common::risk_pairs(&mut rng, n), ArmLabel::All).unwrap();
            risk_s_process(&view).unwrap().terminal_location()
        })
        .collect();
    let spec = ScenarioSpec::new(Beta::REFERENCE, Truth::Reference, n, reps, 7008);
    let ite: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sample = generate_replicate(&spec, r).unwrap();
            (
                conditional_s_process(&sample).unwrap().terminal_location(),
                marginal_s_process(&sample).unwrap().terminal_location(),
            )
        })
        .collect();
    let cond: Vec<f64> = ite.iter().map(|p| p.0).collect();
    let marg: Vec<f64> = ite.iter().map(|p| p.1).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, v) in [("risk", &risk), ("conditional", &cond), ("marginal", &marg)] {
        let (m, var) = moments(v);
        ok &= m.abs() <= 0.07 && (0.9..=1.1).contains(&var);
        detail.push(format!("{label}: mean {m:+.4} var {var:.4}"));
    }
    check(ok, detail.join("; "))
}

fn ac8_determinism() -> Outcome {
    let spec = ScenarioSpec::new(Beta::REFERENCE, Truth::Reference, 400, 300, 8008);
    let runs: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&w| run_monte_carlo_with_workers(&spec, &TestKind::ALL, w).map(|s| s.to_json()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let lib_same = runs.iter().all(|r| r == &runs[0]);

    let dir = std::env::temp_dir().join(format!("itecal-ac8-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for w in [1, 4, 8] {
        let out = dir.join(format!("w{w}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_itecal"))
            .args(["simulate", "--set", "3", "--scenario", "s12", "--n", "300", "--reps", "200", "--seed", "17"])
            .arg("--json")
            .arg(&out)
            .env("ITECAL_WORKERS", w.to_string())
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("simulate exited with {status}"));
        }
        files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    let cli_same = files.iter().all(|f| f == &files[0]);
    check(
        lib_same && cli_same,
        format!("library identical {lib_same}, cli identical {cli_same}"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("ac1", "p-value arithmetic", ac1_table_arithmetic),
        ("ac2", "null uniformity", ac2_null_uniformity),
        ("ac3", "power monotonicity", ac3_power_monotonicity),
        ("ac4", "oracle equivalence", ac4_oracle_equivalence),
        ("ac5", "distribution oracles", ac5_distribution_oracles),
        ("ac6", "process invariants", ac6_process_invariants),
        ("ac7", "CLT sanity", ac7_clt),
        ("ac8", "determinism", ac8_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|a| a == id) {
            continue;
        }
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("PASS {id} {name} [{secs:.1}s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id} {name} [{secs:.1}s]: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
