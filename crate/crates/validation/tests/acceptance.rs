//! Acceptance suite: one PASS/FAIL line per criterion with the measured
//! values, tolerances and runtimes. Exits non-zero when any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

use isrs_core::bench::{max_db_error, run_order_sweep, total_power_error_ratio, SweepConfig};
use isrs_core::closedform::{
    power_profile, shaping_function, total_attenuation_coefficient, ClosedFormParams,
};
use isrs_core::inverse::{preemphasis_single_span, Constraint, TargetSpectrum};
use isrs_core::multispan::{propagate_multispan_closedform, Amplifier, LinkSpec, ReceiverBoost};
use isrs_core::ode::{integrate_span, propagate_link_numerical, SolverOptions};
use isrs_core::osnr::{
    ase_accumulate, estimate_osnr, osnr_profile, peak_to_peak_db, target_osnr, AseConfig,
    OsnrTargetOptions,
};
use isrs_core::profiles::units::{db_per_km_to_per_km, dbm_to_watt};
use isrs_core::profiles::{AttenuationProfile, ChannelGrid, FiberSpec, RamanGainModel};
use isrs_core::PowerSpectrum;

const SPACING: f64 = 0.05;
const LAUNCH_DBM: f64 = -1.0;
const PEAK_GAIN: f64 = 0.4;
const ORDER: u32 = 3;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn grid(plan: &str) -> Arc<ChannelGrid> {
    Arc::new(ChannelGrid::standard(plan, SPACING).unwrap())
}

fn flat_launch(plan: &str) -> PowerSpectrum {
    PowerSpectrum::flat_dbm(grid(plan), LAUNCH_DBM).unwrap()
}

fn fiber(attenuation: AttenuationProfile, peak_gain: f64, length: f64) -> FiberSpec {
    FiberSpec::new(
        attenuation,
        RamanGainModel::from_peak(peak_gain).unwrap(),
        length,
    )
    .unwrap()
}

fn table1_fiber(length: f64) -> FiberSpec {
    fiber(AttenuationProfile::standard_smf(), PEAK_GAIN, length)
}

fn steps(n: usize) -> SolverOptions {
    SolverOptions::default().with_steps(n)
}

fn five_span_link(boost: ReceiverBoost) -> LinkSpec {
    let amp = Amplifier::restore_total()
        .with_noise_figure("C", 5.5)
        .with_noise_figure("L", 6.0)
        .with_noise_figure("U", 5.0);
    LinkSpec::homogeneous(table1_fiber(50.0), 5, amp, boost).unwrap()
}

fn db_errors(a: &PowerSpectrum, b: &PowerSpectrum) -> Vec<f64> {
    a.to_dbm()
        .iter()
        .zip(b.to_dbm())
        .map(|(x, y)| x - y)
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn demeaned_max(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().fold(0.0, |m, x| m.max((x - mean).abs()))
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    format!("error: {err}")
}

// 1. Lossless RK4 conserves total power, or photon number with the f_i/f_j
//    correction.
fn oracle_conservation() -> Outcome {
    let launch = flat_launch("CLU");
    let lossless = fiber(AttenuationProfile::Constant(0.0), PEAK_GAIN, 100.0);
    let plain = integrate_span(&launch, &lossless, &steps(50)).map_err(e)?;
    let out = plain.last();
    let power_drift = (out.total() / launch.total() - 1.0).abs();
    let tilt = max_abs(&db_errors(out, &launch));

    let photons = |s: &PowerSpectrum| -> f64 {
        s.powers()
            .iter()
            .zip(s.grid().frequencies())
            .map(|(p, f)| p / f)
            .sum()
    };
    let corrected =
        integrate_span(&launch, &lossless, &steps(50).with_photon_correction(true)).map_err(e)?;
    let photon_drift = (photons(corrected.last()) / photons(&launch) - 1.0).abs();
    verdict(
        power_drift < 1e-9 && photon_drift < 1e-9 && tilt > 1.0,
        format!(
            "total-power drift {power_drift:.2e}, photon-number drift {photon_drift:.2e} \
             (limit 1e-9); ISRS tilt present: {tilt:.2} dB"
        ),
    )
}

// 2. Without Raman both models reduce to exponential attenuation.
fn raman_free_equivalence() -> Outcome {
    let launch = flat_launch("CLU");
    let fiber = fiber(AttenuationProfile::standard_smf(), 0.0, 100.0);
    let params = ClosedFormParams::from_launch(&launch, &fiber, ORDER).map_err(e)?;
    let cf = power_profile(&launch, &params, fiber.length).map_err(e)?;
    // The criterion compares the models, not RK4 truncation: 2000 steps
    // bring the integrator's own error below 1e-9 dB.
    let oracle = integrate_span(&launch, &fiber, &steps(2000)).map_err(e)?;
    let err = max_abs(&db_errors(&cf, oracle.last()));
    verdict(
        err < 1e-8,
        format!("max channel difference {err:.2e} dB (limit 1e-8 dB), RK4 with 2000 steps"),
    )
}

// 3. Constant loss, bandwidth inside the Raman window: closed form vs a
//    10× finer RK4.
fn constant_loss_consistency() -> Outcome {
    let attenuation = AttenuationProfile::Constant(db_per_km_to_per_km(0.2));
    let fiber = fiber(attenuation, PEAK_GAIN, 100.0);
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for plan in ["C", "CL"] {
        let launch = flat_launch(plan);
        let params = ClosedFormParams::from_launch(&launch, &fiber, ORDER).map_err(e)?;
        let cf = power_profile(&launch, &params, fiber.length).map_err(e)?;
        let oracle = integrate_span(&launch, &fiber, &steps(500)).map_err(e)?;
        let err = max_abs(&db_errors(&cf, oracle.last()));
        worst = worst.max(err);
        parts.push(format!("{plan} {err:.2e} dB"));
    }
    verdict(
        worst < 0.01,
        format!(
            "max channel error {} (limit 0.01 dB), 0.2 dB/km, RK4 500 steps",
            parts.join(", ")
        ),
    )
}

// 4. CLU single span, Table 1.
fn clu_single_span() -> Outcome {
    let launch = flat_launch("CLU");
    let fiber = table1_fiber(100.0);
    let params = ClosedFormParams::from_launch(&launch, &fiber, ORDER).map_err(e)?;
    let cf = power_profile(&launch, &params, fiber.length).map_err(e)?;
    let oracle = integrate_span(&launch, &fiber, &steps(50)).map_err(e)?;
    let eps = total_power_error_ratio(&cf, oracle.last()).map_err(e)?;
    let err = max_db_error(&cf, oracle.last()).map_err(e)?;
    verdict(
        (eps - 1.0).abs() < 0.02 && err < 0.5,
        format!(
            "|eps_P - 1| = {:.4} (limit 0.02), max channel error {err:.3} dB (limit 0.5 dB)",
            (eps - 1.0).abs()
        ),
    )
}

// 5. Order sweep: n = 3 or 4 minimizes the mean |ε_P − 1| on wide bands.
fn order_sweep() -> Outcome {
    let config = SweepConfig::default();
    let result = run_order_sweep(&config).map_err(e)?;
    let wide = ["CL", "CLU", "SCLU"];
    let by_order = result.mean_abs_deviation_by_order(&wide);
    let best = result.best_order(&wide).ok_or("no records")?;
    let table: Vec<String> = by_order
        .iter()
        .map(|(n, d)| format!("n={n}: {d:.4}"))
        .collect();
    verdict(
        (best == 3 || best == 4) && result.failures.is_empty(),
        format!(
            "best n = {best} over CL/CLU/SCLU [{}], {} records, {} failures",
            table.join(", "),
            result.records.len(),
            result.failures.len()
        ),
    )
}

// 6. 5 × 50 km CLU: closed form vs RK4 renormalized at every span end.
fn multi_span_agreement() -> Outcome {
    let launch = flat_launch("CLU");
    let link = five_span_link(ReceiverBoost::Off);
    let cf = propagate_multispan_closedform(&launch, &link, ORDER).map_err(e)?;
    let oracle = propagate_link_numerical(&launch, &link, &steps(50)).map_err(e)?;
    let oracle_out = &oracle.trace.spans.last().unwrap().output;
    let err = db_errors(cf.final_output(), oracle_out);
    let per_span: Vec<String> = cf
        .trace
        .spans
        .iter()
        .zip(&oracle.trace.spans)
        .map(|(a, b)| format!("{:.2}", max_abs(&db_errors(&a.output, &b.output))))
        .collect();
    verdict(
        max_abs(&err) < 0.5,
        format!(
            "max channel error {:.3} dB (limit 0.5 dB), {:.3} dB with the mean removed; \
             per-span worst [{}] dB",
            max_abs(&err),
            demeaned_max(&err),
            per_span.join(", ")
        ),
    )
}

// 7. Single-span CLU pre-emphasis for a flat output, checked with RK4.
fn preemphasis_round_trip() -> Outcome {
    let g = grid("CLU");
    let fiber = table1_fiber(100.0);
    let total = dbm_to_watt(LAUNCH_DBM) * g.len() as f64;
    let solved = preemphasis_single_span(
        &TargetSpectrum::flat(g),
        &fiber,
        ORDER,
        Constraint::InputTotalPower(total),
    )
    .map_err(e)?;
    let oracle = integrate_span(&solved.launch, &fiber, &steps(50)).map_err(e)?;
    let err = db_errors(oracle.last(), &solved.output);
    let shape = demeaned_max(&err);
    let cf = power_profile(
        &solved.launch,
        &ClosedFormParams::from_launch(&solved.launch, &fiber, ORDER).map_err(e)?,
        fiber.length,
    )
    .map_err(e)?;
    verdict(
        shape < 0.3,
        format!(
            "RK4 output vs target shape: max {shape:.3} dB (limit 0.3 dB), absolute {:.3} dB; \
             closed-form forward shape error {:.3} dB",
            max_abs(&err),
            demeaned_max(&db_errors(&cf, &solved.output))
        ),
    )
}

fn oracle_osnr(
    launch: &PowerSpectrum,
    link: &LinkSpec,
    ase: &AseConfig,
) -> Result<Vec<f64>, String> {
    let run = propagate_link_numerical(launch, link, &steps(50)).map_err(e)?;
    let noise = ase_accumulate(link, &run.trace, ase).map_err(e)?;
    osnr_profile(&run.trace.received, &noise).map_err(e)
}

// 8. Flat OSNR targeting over 5 × 50 km CLU.
fn osnr_targeting() -> Outcome {
    let g = grid("CLU");
    let link = five_span_link(ReceiverBoost::Ideal);
    let total = dbm_to_watt(LAUNCH_DBM) * g.len() as f64;
    let options = OsnrTargetOptions::default();
    let run = target_osnr(&TargetSpectrum::flat(g.clone()), &link, total, &options).map_err(e)?;
    let flat = PowerSpectrum::flat(g.clone(), total / g.len() as f64).map_err(e)?;
    let flat_cf = estimate_osnr(&flat, &link, ORDER, &options.ase).map_err(e)?;
    let pre_rk4 = peak_to_peak_db(&oracle_osnr(&run.launch, &link, &options.ase)?);
    let flat_rk4 = peak_to_peak_db(&oracle_osnr(&flat, &link, &options.ase)?);
    let rmse = *run.history.last().unwrap();
    let ratio = flat_rk4 / pre_rk4;
    verdict(
        run.history.len() <= 20 && rmse < 1e-5 && ratio >= 4.0,
        format!(
            "RMSE {rmse:.2e} after {} iterations (limits 1e-5, 20); OSNR peak-to-peak on RK4 \
             {pre_rk4:.3} dB pre-emphasized vs {flat_rk4:.3} dB flat, ratio {ratio:.1} (limit 4); \
             closed form {:.4} vs {:.3} dB",
            run.history.len(),
            peak_to_peak_db(&run.osnr),
            peak_to_peak_db(&flat_cf.osnr)
        ),
    )
}

fn positive_spectrum(n: usize) -> impl Strategy<Value = Vec<f64>> {
    // four decades of per-channel power, 1 µW to 10 mW
    prop::collection::vec(-6.0f64..-2.0, n)
        .prop_map(|v| v.into_iter().map(|x| 10f64.powf(x)).collect())
}

fn property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(RunnerConfig {
        cases,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    runner.run(&strategy, test).map_err(|err| err.to_string())
}

fn is_non_decreasing(v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    v.windows(2).all(|w| w[1] >= w[0] - 1e-12 * scale)
}

fn alpha0_monotone() -> Result<String, String> {
    let g = grid("CLU");
    let attenuation = AttenuationProfile::standard_smf();
    property(64, positive_spectrum(g.len()), |powers| {
        let s = PowerSpectrum::new(g.clone(), powers, 0.0).unwrap();
        let a: Vec<f64> = (1..=6)
            .map(|n| total_attenuation_coefficient(&s, &attenuation, n).unwrap())
            .collect();
        prop_assert!(a.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-14)), "{a:?}");
        Ok(())
    })?;
    Ok("alpha0 non-decreasing in n=1..6 (64 random CLU spectra)".into())
}

fn gamma_monotone() -> Result<String, String> {
    for plan in ["C", "CL", "CLU", "SCL", "SCLU"] {
        let gamma = shaping_function(&flat_launch(plan), 15.5).map_err(e)?;
        if !is_non_decreasing(&gamma) {
            return Err(format!("Gamma decreases on the flat {plan} launch"));
        }
    }
    let g = grid("CL");
    property(64, positive_spectrum(g.len()), |powers| {
        let s = PowerSpectrum::new(g.clone(), powers, 0.0).unwrap();
        let gamma = shaping_function(&s, 15.5).unwrap();
        prop_assert!(is_non_decreasing(&gamma));
        Ok(())
    })?;
    Ok("Gamma non-decreasing (flat C..SCLU, 64 random CL spectra)".into())
}

fn epsilon_scale_invariant() -> Result<String, String> {
    let g = grid("C");
    let strategy = (
        positive_spectrum(g.len()),
        positive_spectrum(g.len()),
        -6.0f64..6.0,
    );
    property(128, strategy, |(a, b, log_s)| {
        let s = 10f64.powf(log_s);
        let a = PowerSpectrum::new(g.clone(), a, 0.0).unwrap();
        let b = PowerSpectrum::new(g.clone(), b, 0.0).unwrap();
        let base = total_power_error_ratio(&a, &b).unwrap();
        let scaled = total_power_error_ratio(&a.scaled(s), &b.scaled(s)).unwrap();
        prop_assert!((scaled / base - 1.0).abs() < 1e-12);
        Ok(())
    })?;
    Ok("eps_P scale invariant (128 cases, s in 1e-6..1e6)".into())
}

fn boost_neutral() -> Result<String, String> {
    let launch = flat_launch("CLU");
    let ase = AseConfig::default();
    let noiseless = Amplifier::restore_total()
        .with_noise_figure("C", f64::NEG_INFINITY)
        .with_noise_figure("L", f64::NEG_INFINITY)
        .with_noise_figure("U", f64::NEG_INFINITY);
    let boosts = [
        ReceiverBoost::Off,
        ReceiverBoost::Ideal,
        ReceiverBoost::Amplified(noiseless),
    ];
    let reference = estimate_osnr(&launch, &five_span_link(ReceiverBoost::Off), ORDER, &ase)
        .map_err(e)?
        .osnr;
    let reference_rk4 = oracle_osnr(&launch, &five_span_link(ReceiverBoost::Off), &ase)?;
    for boost in boosts {
        let link = five_span_link(boost.clone());
        let cf = estimate_osnr(&launch, &link, ORDER, &ase).map_err(e)?.osnr;
        let rk4 = oracle_osnr(&launch, &link, &ase)?;
        let worst = cf
            .iter()
            .zip(&reference)
            .chain(rk4.iter().zip(&reference_rk4))
            .fold(0.0f64, |m, (x, y)| m.max((x / y - 1.0).abs()));
        if worst > 1e-12 {
            return Err(format!("{boost:?} changes OSNR by {worst:.2e}"));
        }
    }
    Ok("receiver boost leaves OSNR unchanged (off/ideal/noiseless amplifier, both models)".into())
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli_deterministic() -> Result<String, String> {
    let cases = [
        ("closed-form", "clu_table1.json"),
        ("solve", "clu_table1.json"),
        ("closed-form", "fig4.json"),
        ("closed-form", "fig5a.json"),
        ("closed-form", "fig5b.json"),
        ("closed-form", "fig5c.json"),
        ("closed-form", "fig5d.json"),
        ("multispan", "fig6.json"),
        ("osnr-target", "fig7.json"),
        ("preemph", "clu_preemph.json"),
        ("sweep", "fig3-sweep.json"),
    ];
    let tmp = tempfile::TempDir::new().map_err(e)?;
    let mut files = 0;
    for (command, config) in cases {
        let config_path = configs().join(config);
        let dirs: Vec<PathBuf> = ["a", "b"]
            .iter()
            .map(|r| tmp.path().join(format!("{command}-{config}-{r}")))
            .collect();
        for dir in &dirs {
            let cli = isrs_cli::Cli::from_args([
                "isrs",
                command,
                "--config",
                config_path.to_str().unwrap(),
                "--output",
                dir.to_str().unwrap(),
            ])
            .map_err(e)?;
            isrs_cli::execute(&cli).map_err(|err| format!("{command} {config}: {err}"))?;
        }
        let mut names: Vec<_> = fs::read_dir(&dirs[0])
            .map_err(e)?
            .map(|entry| entry.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            // wall-clock timings are the one intentionally varying output
            if name == "sweep_runtimes.csv" {
                continue;
            }
            let a = fs::read(dirs[0].join(&name)).map_err(e)?;
            let b = fs::read(dirs[1].join(&name)).map_err(e)?;
            if a != b {
                return Err(format!("{command} {config}: {name:?} differs between runs"));
            }
            files += 1;
        }
    }
    Ok(format!(
        "CLI outputs byte-identical across runs ({files} files, {} commands)",
        cases.len()
    ))
}

// 9. Property suites.
fn property_suites() -> Outcome {
    let checks: [fn() -> Result<String, String>; 5] = [
        alpha0_monotone,
        gamma_monotone,
        epsilon_scale_invariant,
        boost_neutral,
        cli_deterministic,
    ];
    let mut passed = Vec::new();
    for check in checks {
        match check() {
            Ok(detail) => passed.push(detail),
            Err(detail) => return Err(format!("{detail}; passed so far: {}", passed.join("; "))),
        }
    }
    Ok(passed.join("; "))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "oracle conservation",
            limit: Duration::from_secs(1),
            check: oracle_conservation,
        },
        Criterion {
            id: 2,
            name: "Raman-free equivalence",
            limit: Duration::from_secs(1),
            check: raman_free_equivalence,
        },
        Criterion {
            id: 3,
            name: "constant-loss consistency",
            limit: Duration::from_secs(5),
            check: constant_loss_consistency,
        },
        Criterion {
            id: 4,
            name: "CLU single-span accuracy",
            limit: Duration::from_secs(5),
            check: clu_single_span,
        },
        Criterion {
            id: 5,
            name: "order sweep shape",
            limit: Duration::from_secs(600),
            check: order_sweep,
        },
        Criterion {
            id: 6,
            name: "multi-span agreement",
            limit: Duration::from_secs(10),
            check: multi_span_agreement,
        },
        Criterion {
            id: 7,
            name: "pre-emphasis round trip",
            limit: Duration::from_secs(10),
            check: preemphasis_round_trip,
        },
        Criterion {
            id: 8,
            name: "OSNR targeting",
            limit: Duration::from_secs(30),
            check: osnr_targeting,
        },
        Criterion {
            id: 9,
            name: "property suites",
            limit: Duration::from_secs(60),
            check: property_suites,
        },
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for c in criteria
        .iter()
        .filter(|c| filter.is_empty() || filter.contains(&c.id))
    {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        println!(
            "{} criterion {}: {} | {} | {:.2} s (limit {} s){}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            if in_time { "" } else { " over time" }
        );
        if !ok {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
}
