//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances and runtime limits are pinned
//! below.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use privcalc::accuracy::{epsilon_for_accuracy, laplace_alpha};
use privcalc::calculus::{DatasetDomain, Domain, MeasureKind};
use privcalc::combinators::{chain_mt, chain_tt, compose_basic};
use privcalc::mechanisms::{laplace_noise, noisy_count, randomized_response, LaplaceScale};
use privcalc::plan::run_plan;
use privcalc::sampagg::{estimator, SampleAggregate};
use privcalc::tester::{exact_divergence_check, stochastic_test, Adjacency, StochasticConfig, Verdict};
use privcalc::{
    seeded_rng, CellKind, Dataset, Measurement, Metric, PrivacyLoss, PrivacyMap, Schema, StabilityMap, Transformation,
    Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

// criterion 1
const EXACT_CLAIM_DIGITS: f64 = 1.0986;
// criterion 2
const LINEAR_TRIPLES: usize = 100;
const NONLINEAR_MAPS: usize = 100;
const SAMPLED_DISTANCES: usize = 20;
// criterion 4
const STOCHASTIC_RUNS: u64 = 20;
const STOCHASTIC_SAMPLES: usize = 500_000;
const STOCHASTIC_SIGNIFICANCE: f64 = 0.01;
const STOCHASTIC_REQUIRED: usize = 19;
// criterion 5
const CALIBRATION_TRIALS: usize = 1_000_000;
const CALIBRATION_BAND: (f64, f64) = (0.045, 0.055);
const ROUND_TRIPS: usize = 1000;
const ROUND_TRIP_TOLERANCE: f64 = 1e-12;
// criterion 6
const SESSIONS: u64 = 1000;
const SESSION_STEPS: usize = 30;
// criterion 7
const SA_RECORDS: usize = 900;
const SA_BLOCKS: usize = 30;
const SA_EPSILON: f64 = 1.0;
const SA_RANGE: (f64, f64) = (0.25, 0.75);
const SA_TOLERANCE: f64 = 0.05;
const SA_TRIALS: u64 = 100;
const SA_REQUIRED: usize = 90;

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(n: u32, title: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let took = start.elapsed();
    let pass = out.pass && took <= limit;
    println!(
        "criterion {n} [{}] {title}: {} ({:.2?} of {:?})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took,
        limit
    );
    pass
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact_divergence() -> Outcome {
    let bits = [Value::Bit(false), Value::Bit(true)];
    let ln3 = 3f64.ln();
    let rr = randomized_response(0.75).unwrap();
    let claim =
        |m: &Measurement, e: f64| exact_divergence_check(m, &bits, &Adjacency::Metric, &PrivacyLoss::Pure(e)).unwrap();
    let at_ln3 = claim(&rr, ln3);
    let at_one = claim(&rr, 1.0);
    let joint = compose_basic(&[rr.clone(), randomized_response(0.75).unwrap()]).unwrap();
    let joint_ok = claim(&joint, 2.0 * ln3);
    let joint_bad = claim(&joint, 2.0 * ln3 - 0.01);
    let digits = claim(&rr, EXACT_CLAIM_DIGITS);
    let pass = (at_ln3.epsilon - ln3).abs() < 1e-12
        && at_ln3.verdict == Verdict::Pass
        && at_one.verdict == Verdict::Fail
        && at_one.witness.is_some()
        && joint_ok.verdict == Verdict::Pass
        && joint_bad.verdict == Verdict::Fail
        && joint_bad.witness.is_some();
    Outcome {
        pass,
        detail: format!(
            "true eps {:.12}; ln 3 {:?}, 1.0 {:?}, joint 2ln3 {:?}, joint 2ln3-0.01 {:?} \
             (literal claim {EXACT_CLAIM_DIGITS} sits {:.1e} below ln 3: {:?})",
            at_ln3.epsilon,
            at_ln3.verdict,
            at_one.verdict,
            joint_ok.verdict,
            joint_bad.verdict,
            ln3 - EXACT_CLAIM_DIGITS,
            digits.verdict
        ),
    }
}

fn scalar_stage(stability: StabilityMap) -> Transformation {
    Transformation::new(
        Domain::Scalar,
        Domain::Scalar,
        Metric::AbsoluteDistance,
        Metric::AbsoluteDistance,
        |x| Ok(x.clone()),
        stability,
    )
    .unwrap()
}

fn scalar_release(privacy: PrivacyMap) -> Measurement {
    Measurement::new(
        Domain::Scalar,
        Metric::AbsoluteDistance,
        Domain::Scalar,
        MeasureKind::PureDp,
        |x, _| Ok(x.clone()),
        privacy,
    )
    .unwrap()
}

fn chaining_laws() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    for i in 0..LINEAR_TRIPLES {
        let (a, b, e): (i64, i64, i64) = (rng.gen_range(1..5000), rng.gen_range(1..5000), rng.gen_range(1..5000));
        let t1 = scalar_stage(StabilityMap::linear(a as f64 / 1000.0).unwrap());
        let t2 = scalar_stage(StabilityMap::linear(b as f64 / 1000.0).unwrap());
        let m = laplace_noise(&LaplaceScale::calibrated(1.0, e as f64 / 1000.0).unwrap()).unwrap();
        let t = chain_tt(&t2, &t1).unwrap();
        let rule2 = t.stability().linear_constant().cloned() == Some(ratio(a * b, 1_000_000));
        let rule1 =
            chain_mt(&m, &t1).unwrap().exact_loss_at(1.0).unwrap().map(|l| l.epsilon) == Some(ratio(a * e, 1_000_000));
        let both = chain_mt(&m, &t).unwrap().exact_loss_at(1.0).unwrap().map(|l| l.epsilon)
            == Some(ratio(a * b * e, 1_000_000_000));
        if !(rule1 && rule2 && both) {
            failures.push(format!("linear triple {i}: ({a}, {b}, {e})/1000"));
        }
    }
    for i in 0..NONLINEAR_MAPS {
        let (p, q, r, s): (f64, f64, f64, f64) =
            (rng.gen_range(0.2..3.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), rng.gen_range(0.2..3.0));
        let f = move |d: f64| q * d.powf(p) + d.ln_1p();
        let g = move |d: f64| r * d.sqrt() + d.powf(s);
        let h = move |d: f64| (1.0 + d).ln() * q + d.powf(p);
        let t1 = scalar_stage(StabilityMap::from_fn(g));
        let t2 = scalar_stage(StabilityMap::from_fn(f));
        let m = scalar_release(PrivacyMap::from_fn(MeasureKind::PureDp, move |d| PrivacyLoss::Pure(h(d))));
        let t = chain_tt(&t2, &t1).unwrap();
        let whole = chain_mt(&m, &t).unwrap();
        for _ in 0..SAMPLED_DISTANCES {
            let d: f64 = rng.gen_range(0.0..50.0);
            if t.stability().eval(d) != f(g(d)) || whole.loss_at(d).unwrap().epsilon() != h(f(g(d))) {
                failures.push(format!("nonlinear map {i} at d = {d}"));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{LINEAR_TRIPLES} linear triples exact, {NONLINEAR_MAPS} nonlinear maps at {SAMPLED_DISTANCES} distances; {} mismatches{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    }
}

fn stability_oracle() -> Outcome {
    let inputs = small_inputs();
    let mut pairs = 0;
    let mut violations = Vec::new();
    let mut names = 0;
    for metric in [Metric::SymmetricDistance, Metric::ChangeOneDistance] {
        for (name, t) in shipped_transformations(metric) {
            let r = exhaustive_stability(&format!("{name}/{metric:?}"), &t, &inputs);
            pairs += r.pairs;
            names += 1;
            violations.extend(r.violations);
        }
    }
    let constant = |metric| {
        let (_, t) = shipped_transformations(metric).into_iter().find(|(n, _)| n == "partition").unwrap();
        t.stability().eval(1.0)
    };
    let (sym, change) = (constant(Metric::SymmetricDistance), constant(Metric::ChangeOneDistance));
    Outcome {
        pass: violations.is_empty() && sym == 1.0 && change == 2.0,
        detail: format!(
            "{names} transformation/metric combinations over {} multisets, {pairs} pairs, {} violations; partition stability {sym} (symmetric), {change} (change-one)",
            inputs.len(),
            violations.len()
        ),
    }
}

fn stochastic_power() -> Outcome {
    let dom = DatasetDomain::new(schema_v());
    let claim = PrivacyLoss::Pure(1.0);
    let correct = noisy_count(&dom, Metric::SymmetricDistance, 1.0).unwrap();
    // Laplace scale 1/(2ε) while claiming ε
    let buggy = noisy_count(&dom, Metric::SymmetricDistance, 2.0).unwrap();
    let verdicts = |m: &Measurement| -> Vec<Verdict> {
        (0..STOCHASTIC_RUNS)
            .map(|seed| {
                let cfg = StochasticConfig::new(STOCHASTIC_SAMPLES, STOCHASTIC_SIGNIFICANCE, 1000 + seed).unwrap();
                stochastic_test(m, &claim, &cfg).unwrap().verdict
            })
            .collect()
    };
    let passed = verdicts(&correct).iter().filter(|v| **v == Verdict::Pass).count();
    let caught = verdicts(&buggy).iter().filter(|v| **v == Verdict::Fail).count();
    Outcome {
        pass: passed >= STOCHASTIC_REQUIRED && caught >= STOCHASTIC_REQUIRED,
        detail: format!(
            "correct passes {passed}/{STOCHASTIC_RUNS}, 2x-scale bug fails {caught}/{STOCHASTIC_RUNS} (n = {STOCHASTIC_SAMPLES}, significance {STOCHASTIC_SIGNIFICANCE}, need {STOCHASTIC_REQUIRED})"
        ),
    }
}

fn accuracy_calibration() -> Outcome {
    let dom = DatasetDomain::new(schema_v());
    let m = noisy_count(&dom, Metric::SymmetricDistance, 1.0).unwrap();
    let x = Value::Dataset(ints(&[0, 1, 1, 2, 2, 2, 0]));
    let truth = 7.0;
    let alpha = laplace_alpha(1.0, 0.05).unwrap();
    let mut rng = seeded_rng(77);
    let exceed = (0..CALIBRATION_TRIALS)
        .filter(|_| (m.invoke(&x, &mut rng).unwrap().as_scalar().unwrap() - truth).abs() > alpha)
        .count();
    let rate = exceed as f64 / CALIBRATION_TRIALS as f64;

    let mut r = ChaCha20Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..ROUND_TRIPS {
        let c: f64 = 10f64.powf(r.gen_range(-3.0..3.0));
        let eps: f64 = 10f64.powf(r.gen_range(-3.0..2.0));
        let beta: f64 = r.gen_range(1e-6..0.999);
        let back = epsilon_for_accuracy(c, laplace_alpha(c / eps, beta).unwrap(), beta).unwrap();
        worst = worst.max(((back - eps) / eps).abs());
    }
    Outcome {
        pass: (CALIBRATION_BAND.0..=CALIBRATION_BAND.1).contains(&rate) && worst <= ROUND_TRIP_TOLERANCE,
        detail: format!(
            "Pr[|error| > ln 20] = {rate:.5} over {CALIBRATION_TRIALS} trials (band {CALIBRATION_BAND:?}); worst round-trip relative error {worst:.2e} over {ROUND_TRIPS} triples"
        ),
    }
}

fn budget_safety() -> Outcome {
    let mut totals = SessionStats::default();
    let mut failures = Vec::new();
    for seed in 0..SESSIONS {
        match random_session(10_000 + seed, SESSION_STEPS) {
            Ok(s) => {
                totals.steps += s.steps;
                totals.granted += s.granted;
                totals.rejected += s.rejected;
                totals.partitions += s.partitions;
                totals.spawns += s.spawns;
            }
            Err(e) => failures.push(format!("session {seed}: {e}")),
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "{SESSIONS} sessions, {} steps ({} granted, {} rejected, {} partitions, {} spawns); {} disagreements with the replay oracle{}",
            totals.steps,
            totals.granted,
            totals.rejected,
            totals.partitions,
            totals.spawns,
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    }
}

fn sample_aggregate_hits(range: (f64, f64)) -> usize {
    let schema = Schema::of(&[("x", CellKind::Float64)]).unwrap();
    let dom = DatasetDomain::new(schema.clone());
    (0..SA_TRIALS)
        .filter(|trial| {
            let mut rng = ChaCha20Rng::seed_from_u64(500 + trial);
            let values: Vec<f64> = (0..SA_RECORDS).map(|_| rng.gen::<f64>()).collect();
            let truth = values.iter().sum::<f64>() / SA_RECORDS as f64;
            let records = values.iter().map(|v| privcalc::Record::new(vec![privcalc::Cell::Float(*v)])).collect();
            let data = Dataset::new(schema.clone(), records).unwrap();
            let f = estimator("mean", &schema, "x").unwrap();
            let sa = SampleAggregate::from_arc(f, SA_BLOCKS, *trial, range.0, range.1).unwrap();
            let m = sa.measurement(&dom, Metric::SymmetricDistance, SA_EPSILON).unwrap();
            let y = m.invoke(&Value::Dataset(data), &mut rng).unwrap().as_scalar().unwrap();
            (y - truth).abs() <= SA_TOLERANCE
        })
        .count()
}

fn sample_aggregate_utility() -> Outcome {
    let hits = sample_aggregate_hits(SA_RANGE);
    let unit = sample_aggregate_hits((0.0, 1.0));
    Outcome {
        pass: hits >= SA_REQUIRED,
        detail: format!(
            "range {SA_RANGE:?}: {hits}/{SA_TRIALS} within {SA_TOLERANCE} (need {SA_REQUIRED}); informational range (0, 1): {unit}/{SA_TRIALS}"
        ),
    }
}

fn determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let plan = std::fs::read_to_string(dir.join("plan.json")).unwrap();
    let run = || {
        run_plan(&plan, |p| Dataset::from_csv_path(p.schema.clone(), &dir.join("people.csv")), 2024).unwrap().to_json()
    };
    let (a, b) = (run(), run());
    let golden = std::fs::read_to_string(dir.join("results.golden.json")).unwrap_or_default();
    Outcome {
        pass: a == b && a == golden,
        detail: format!("two runs identical: {}, golden file identical: {} ({} bytes)", a == b, a == golden, a.len()),
    }
}

fn main() {
    let results = [
        criterion(1, "exact divergence suite", Duration::from_secs(1), exact_divergence),
        criterion(2, "chaining laws", Duration::from_secs(1), chaining_laws),
        criterion(3, "small-instance stability oracle", Duration::from_secs(10), stability_oracle),
        criterion(4, "stochastic tester power and size", Duration::from_secs(300), stochastic_power),
        criterion(5, "accuracy calibration", Duration::from_secs(60), accuracy_calibration),
        criterion(6, "budget safety fuzzing", Duration::from_secs(60), budget_safety),
        criterion(7, "sample-and-aggregate utility", Duration::from_secs(30), sample_aggregate_utility),
        criterion(8, "determinism", Duration::from_secs(1), determinism),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
