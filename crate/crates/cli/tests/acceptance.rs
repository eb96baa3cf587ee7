//! Acceptance criteria AC-1 … AC-10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (no test harness) so every line is printed even
//! when another criterion fails. Exits non-zero if any criterion fails.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use geg_cli::csv_io::{load_csv, CsvSchema};
use geg_cli::experiment::{run_benchmark, Approach, DataSource, ExperimentConfig};
use geg_core::constraints::{
    build_constraint_system, constraint_violations, estimate_moments, per_sample_fairness_signal, ConstraintKind,
    ConstraintSystem, MomentDescriptor,
};
use geg_core::data::{generate_synthetic, kfold_split, Dataset, SyntheticSpec};
use geg_core::geg::{build_cost_sensitive_problem, fit, GegConfig, IterationRecord, PredictionMode};
use geg_core::learners::{Classifier, CostSensitiveOracle, SoftmaxConfig, SoftmaxOracle, WeightedSoftmaxObjective};
use geg_core::metrics::{
    holm_bonferroni, pareto_front, wilcoxon_one_sided, Alternative, MetricsReport, SolutionPoint,
};
use geg_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- AC-6 log

/// Every solver run in this suite reports its iterations here.
struct SimplexAudit {
    runs: usize,
    iterations: usize,
    failures: Vec<String>,
}

static AUDIT: Mutex<SimplexAudit> = Mutex::new(SimplexAudit {
    runs: 0,
    iterations: 0,
    failures: Vec::new(),
});

fn audit(label: &str, ds: &Dataset, system: &ConstraintSystem, records: &[IterationRecord], budget: f64) {
    let signal = per_sample_fairness_signal(system, ds).expect("signal");
    let mut failures = Vec::new();
    for r in records {
        if r.lambda.iter().any(|&l| l.is_nan() || l < 0.0) {
            failures.push(format!("{label} t={}: negative multiplier {:?}", r.t, r.lambda));
        }
        let total: f64 = r.lambda.iter().sum();
        if total > budget {
            failures.push(format!("{label} t={}: sum lambda {total} > B = {budget}", r.t));
        }
        let problem = build_cost_sensitive_problem(&r.lambda, ds, &signal.matrix).expect("problem");
        let w: f64 = problem.weights.iter().sum();
        if (w - ds.n_samples() as f64).abs() > 1e-9 {
            failures.push(format!("{label} t={}: weights sum {w} != N = {}", r.t, ds.n_samples()));
        }
    }
    let mut a = AUDIT.lock().unwrap();
    a.runs += 1;
    a.iterations += records.len();
    a.failures.extend(failures);
}

fn fit_audited(
    label: &str,
    ds: &Dataset,
    system: &ConstraintSystem,
    oracle: &SoftmaxOracle,
    config: &GegConfig,
) -> geg_core::geg::GegFit<geg_core::learners::SoftmaxClassifier> {
    let result = fit(ds, system, oracle, config).expect("solver run");
    audit(label, ds, system, &result.trace.records, config.budget());
    result
}

// ---------------------------------------------------------------- AC-1

fn ac1() -> Outcome {
    let start = Instant::now();
    let dp_block = [[1.0, 0.0, -1.0], [-1.0, 0.0, 1.0], [0.0, 1.0, -1.0], [0.0, -1.0, 1.0]];
    let y_p = 1;
    let dp = build_constraint_system(ConstraintKind::DemographicParity, 2, &[y_p], 0.0).map_err(|e| e.to_string())?;
    let eo = build_constraint_system(ConstraintKind::EqualizedOdds, 2, &[y_p], 0.0).map_err(|e| e.to_string())?;
    let cp = build_constraint_system(ConstraintKind::CombinedParity, 2, &[y_p], 0.0).map_err(|e| e.to_string())?;

    let block = Matrix::from_rows(&dp_block).unwrap();
    check(dp.matrix() == &block, format!("DP matrix {:?}", dp.matrix().to_rows()))?;
    check(eo.matrix() == &block, format!("EO matrix {:?}", eo.matrix().to_rows()))?;
    let mut cp_rows = vec![vec![0.0; 6]; 8];
    for i in 0..4 {
        for j in 0..3 {
            cp_rows[i][j] = dp_block[i][j];
            cp_rows[4 + i][3 + j] = dp_block[i][j];
        }
    }
    check(cp.matrix() == &Matrix::from_rows(&cp_rows).unwrap(), format!("CP matrix {:?}", cp.matrix().to_rows()))?;

    use MomentDescriptor::*;
    let dp_m = vec![Group { group: 0 }, Group { group: 1 }, Overall];
    let eo_m = vec![
        GroupCond { group: 0, label: y_p },
        GroupCond { group: 1, label: y_p },
        OverallCond { label: y_p },
    ];
    check(dp.moments() == dp_m.as_slice(), "DP moment order")?;
    check(eo.moments() == eo_m.as_slice(), "EO moment order")?;
    check(cp.moments() == [dp_m, eo_m].concat().as_slice(), "CP moment order")?;
    for s in [&dp, &eo, &cp] {
        check(s.eps().iter().all(|&e| e == 0.0), "eps not zero")?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("DP 4x3, EO 4x3, CP 8x6 exact ({elapsed:.2?})"))
}

// ---------------------------------------------------------------- AC-2

fn brute_moment(m: &MomentDescriptor, preds: &[usize], ds: &Dataset) -> Option<f64> {
    let mut size = 0usize;
    let mut hits = 0usize;
    for j in 0..ds.n_samples() {
        let (g, y) = (ds.groups()[j], ds.labels()[j]);
        let inside = match *m {
            MomentDescriptor::Group { group } => g == group,
            MomentDescriptor::Overall => true,
            MomentDescriptor::GroupCond { group, label } => g == group && y == label,
            MomentDescriptor::OverallCond { label } => y == label,
        };
        if inside {
            size += 1;
            if preds[j] == ds.positive_label() {
                hits += 1;
            }
        }
    }
    (size > 0).then(|| hits as f64 / size as f64)
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, g: usize, k: usize) -> Dataset {
    let mut groups: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
    for (j, slot) in groups.iter_mut().take(g).enumerate() {
        *slot = j;
    }
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let y_p = rng.random_range(0..k);
    let at = rng.random_range(0..n);
    labels[at] = y_p;
    let x = Matrix::new(n, 1, (0..n).map(|j| j as f64).collect()).unwrap();
    Dataset::with_counts(x, groups, labels, y_p, g, k).unwrap()
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let kinds = [
        ConstraintKind::DemographicParity,
        ConstraintKind::EqualizedOdds,
        ConstraintKind::CombinedParity,
    ];
    for instance in 0..200 {
        let g = rng.random_range(1..=3);
        let k = rng.random_range(1..=4);
        let n = rng.random_range(g..=50);
        let ds = random_dataset(&mut rng, n, g, k);
        let kind = kinds[rng.random_range(0..3)];
        let mut cond: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
        if cond.is_empty() {
            cond.push(ds.positive_label());
        }
        let system = build_constraint_system(kind, g, &cond, 0.0).map_err(|e| e.to_string())?;
        let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let est = estimate_moments(&preds, &ds, system.moments()).map_err(|e| e.to_string())?;

        let expected: Vec<Option<f64>> = system.moments().iter().map(|m| brute_moment(m, &preds, &ds)).collect();
        let mu: Vec<f64> = expected.iter().map(|v| v.unwrap_or(0.0)).collect();
        let undefined: Vec<usize> = (0..expected.len()).filter(|&i| expected[i].is_none()).collect();
        check(est.values == mu, format!("instance {instance}: moments {:?} vs {mu:?}", est.values))?;
        check(est.undefined == undefined, format!("instance {instance}: undefined flags"))?;

        let m = system.matrix();
        let gamma: Vec<f64> = (0..m.rows())
            .map(|i| {
                let mut acc = 0.0;
                for (j, &v) in mu.iter().enumerate() {
                    acc += m.get(i, j) * v;
                }
                acc
            })
            .collect();
        let got = constraint_violations(&system, &est.values).map_err(|e| e.to_string())?;
        check(got == gamma, format!("instance {instance}: violations {got:?} vs {gamma:?}"))?;
    }
    Ok("200 random instances, moments and violations identical".into())
}

// ---------------------------------------------------------------- AC-3

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let empty = ConstraintSystem::unconstrained();
    for i in 0..20u64 {
        let k = rng.random_range(2..=4);
        let mut spec = SyntheticSpec::binary(rng.random_range(60..=200), rng.random_range(0.2..0.6), 0.3, 0.6);
        spec.n_classes = k;
        spec.d = rng.random_range(1..=5);
        spec.positive_label = rng.random_range(0..k);
        spec.noise_scale = rng.random_range(0.5..2.0);
        let ds = generate_synthetic(&spec, i).map_err(|e| e.to_string())?;
        let oracle = SoftmaxOracle::new(k, SoftmaxConfig { seed: i, ..SoftmaxConfig::default() });
        let config = GegConfig {
            max_iter: 1,
            t_min: 1,
            ..GegConfig::default()
        };
        let result = fit_audited(&format!("AC-3 #{i}"), &ds, &empty, &oracle, &config);
        let direct = oracle
            .fit(ds.features(), ds.labels(), &vec![1.0; ds.n_samples()])
            .map_err(|e| e.to_string())?
            .predict(ds.features())
            .map_err(|e| e.to_string())?;
        for mode in [PredictionMode::ExpectedVote, PredictionMode::Sampled { seed: i }] {
            let mixed = result.predict(ds.features(), mode).map_err(|e| e.to_string())?;
            check(mixed == direct, format!("dataset {i}: predictions differ ({mode:?})"))?;
        }
    }
    Ok("20 random datasets, predictions identical".into())
}

// ---------------------------------------------------------------- AC-4

/// Pooled out-of-fold predictions of the baseline and of GEG-SP.
fn ac4_seed(seed: u64) -> (MetricsReport, MetricsReport) {
    let mut spec = SyntheticSpec::binary(4000, 0.05, 0.2, 0.8);
    spec.group_shift = 4.0;
    let ds = generate_synthetic(&spec, seed).expect("data");
    let plan = kfold_split(&ds, 5, seed).expect("folds");
    let oracle = SoftmaxOracle::new(2, SoftmaxConfig::default());
    let system = build_constraint_system(ConstraintKind::DemographicParity, 2, &[], 0.0).expect("system");
    let config = GegConfig {
        eta: 0.05,
        ..GegConfig::default()
    };
    let mut base = vec![0; ds.n_samples()];
    let mut geg = vec![0; ds.n_samples()];
    for fold in 0..5 {
        let train = ds.subset(&plan.train_rows(fold));
        let rows = plan.test_rows(fold);
        let test = ds.subset(&rows);
        let b = oracle
            .fit(train.features(), train.labels(), &vec![1.0; train.n_samples()])
            .expect("baseline")
            .predict(test.features())
            .expect("predict");
        let f = fit_audited(&format!("AC-4 seed {seed} fold {fold}"), &train, &system, &oracle, &config);
        let g = f.predict(test.features(), PredictionMode::ExpectedVote).expect("predict");
        for (i, &r) in rows.iter().enumerate() {
            base[r] = b[i];
            geg[r] = g[i];
        }
    }
    let report = |p: &[usize]| MetricsReport::compute(p, ds.labels(), ds.groups(), 1, 2).expect("metrics");
    (report(&base), report(&geg))
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let per_seed: Vec<(MetricsReport, MetricsReport)> = (0..5u64).into_par_iter().map(ac4_seed).collect();
    let mean = |f: &dyn Fn(&(MetricsReport, MetricsReport)) -> f64| per_seed.iter().map(f).sum::<f64>() / 5.0;
    let base_spd = mean(&|(b, _)| b.spd_p);
    let geg_spd = mean(&|(_, g)| g.spd_p);
    let drop = mean(&|(b, g)| b.accuracy - g.accuracy);
    let elapsed = start.elapsed();
    let summary = format!(
        "baseline SPD-P {base_spd:.3} (>= 0.25), GEG-SP SPD-P {geg_spd:.3} (<= 0.05), accuracy drop {drop:.3} (<= 0.05), {elapsed:.1?}"
    );
    check(base_spd >= 0.25 && geg_spd <= 0.05 && drop <= 0.05, summary.clone())?;
    check(elapsed < Duration::from_secs(120), format!("{summary}; over 2 min"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- AC-5

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let mut spec = SyntheticSpec::binary(1000, 0.05, 0.2, 0.8);
    spec.group_shift = 4.0;
    let ds = generate_synthetic(&spec, 7).map_err(|e| e.to_string())?;
    let system = build_constraint_system(ConstraintKind::DemographicParity, 2, &[], 0.0).map_err(|e| e.to_string())?;
    let budgets = [25usize, 100, 400];
    let jobs: Vec<(usize, u64)> = budgets.iter().flat_map(|&t| (0..5u64).map(move |s| (t, s))).collect();
    let runs: Vec<(usize, f64, bool)> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let oracle = SoftmaxOracle::new(2, SoftmaxConfig { seed, ..SoftmaxConfig::default() });
            let config = GegConfig {
                eta: 0.05,
                max_iter: t,
                ..GegConfig::default()
            };
            let f = fit_audited(&format!("AC-5 T={t} seed {seed}"), &ds, &system, &oracle, &config);
            let nonneg = f.trace.records.iter().all(|r| r.gap >= 0.0);
            (t, f.trace.final_gap().expect("records"), nonneg)
        })
        .collect();
    let medians: Vec<f64> = budgets
        .iter()
        .map(|&t| median(runs.iter().filter(|r| r.0 == t).map(|r| r.1).collect()))
        .collect();
    let elapsed = start.elapsed();
    let summary = format!(
        "median final gap T=25: {:.4}, T=100: {:.4}, T=400: {:.4}; {elapsed:.1?}",
        medians[0], medians[1], medians[2]
    );
    check(runs.iter().all(|r| r.2), format!("{summary}; a recorded gap is negative"))?;
    check(medians.windows(2).all(|w| w[1] <= w[0]), format!("{summary}; not non-increasing"))?;
    check(elapsed < Duration::from_secs(300), format!("{summary}; over 5 min"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- AC-6

fn ac6() -> Outcome {
    let a = AUDIT.lock().unwrap();
    check(a.runs > 0, "no solver runs were audited")?;
    if let Some(first) = a.failures.first() {
        return Err(format!("{} violations, first: {first}", a.failures.len()));
    }
    Ok(format!("{} solver runs, {} iterations checked", a.runs, a.iterations))
}

// ---------------------------------------------------------------- AC-7

fn frac(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Straight counting over rows, one metric at a time.
fn brute_metrics(p: &[usize], t: &[usize], g: &[usize], y_p: usize, k: usize) -> [f64; 10] {
    let n = t.len();
    let count = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&j| f(j)).count();
    let accuracy = count(&|j| p[j] == t[j]) as f64 / n as f64;
    let mut prec = 0.0;
    let mut rec = 0.0;
    for c in 0..k {
        prec += frac(count(&|j| p[j] == c && t[j] == c), count(&|j| p[j] == c)).unwrap_or(0.0);
        rec += frac(count(&|j| p[j] == c && t[j] == c), count(&|j| t[j] == c)).unwrap_or(0.0);
    }
    let (prec, rec) = (prec / k as f64, rec / k as f64);
    let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };

    let rate = |a: usize, y: usize| frac(count(&|j| g[j] == a && p[j] == y), count(&|j| g[j] == a));
    let tpr = |a: usize, y: usize| frac(count(&|j| g[j] == a && t[j] == y && p[j] == y), count(&|j| g[j] == a && t[j] == y));
    let fpr = |a: usize, y: usize| frac(count(&|j| g[j] == a && t[j] != y && p[j] == y), count(&|j| g[j] == a && t[j] != y));
    let diff = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => a - b,
        _ => 0.0,
    };
    let per_class = |y: usize| {
        let spd = diff(rate(1, y), rate(0, y)).abs();
        let eod = diff(tpr(1, y), tpr(0, y)).abs();
        let aod = (0.5 * (diff(fpr(0, y), fpr(1, y)) + diff(tpr(0, y), tpr(1, y)))).abs();
        [spd, eod, aod]
    };
    let mut worst = [0.0f64; 3];
    for y in 0..k {
        let v = per_class(y);
        for i in 0..3 {
            worst[i] = worst[i].max(v[i]);
        }
    }
    let at_p = per_class(y_p);
    [accuracy, prec, rec, f1, worst[0], worst[1], worst[2], at_p[0], at_p[1], at_p[2]]
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut binary = 0;
    for instance in 0..200 {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(2..=60);
        let mut g: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        g[0] = 0;
        g[1] = 1;
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let y_p = if k == 2 { 1 } else { rng.random_range(0..k) };
        let m = MetricsReport::compute(&p, &t, &g, y_p, k).map_err(|e| e.to_string())?;
        let got = [
            m.accuracy,
            m.macro_precision,
            m.macro_recall,
            m.macro_f1,
            m.spd,
            m.eod,
            m.aod,
            m.spd_p,
            m.eod_p,
            m.aod_p,
        ];
        let want = brute_metrics(&p, &t, &g, y_p, k);
        for i in 0..10 {
            check((got[i] - want[i]).abs() <= 1e-12, format!("instance {instance}: metric #{i} {} vs {}", got[i], want[i]))?;
        }
        if k == 2 {
            binary += 1;
            check(m.spd.abs() == m.spd_p, format!("instance {instance}: |SPD| {} != SPD-P {}", m.spd, m.spd_p))?;
        }
    }
    Ok(format!("200 instances within 1e-12; |SPD| = SPD-P on all {binary} binary ones"))
}

// ---------------------------------------------------------------- AC-8

/// p-values by enumerating all 2ⁿ sign assignments over average ranks.
fn enumerate_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|&v| v != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|v| {
            let below = d.iter().filter(|w| w.abs() < v.abs()).count();
            let tied = d.iter().filter(|w| w.abs() == v.abs()).count();
            below as f64 + (tied as f64 + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        ge += u64::from(w >= observed);
        le += u64::from(w <= observed);
    }
    let total = (1u64 << n) as f64;
    (ge as f64 / total, le as f64 / total)
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cases = 0;
    for n in 1..=12 {
        for _ in 0..25 {
            let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-5i32..=5))).collect();
            if x.iter().all(|&v| v == 0.0) {
                continue;
            }
            let y = vec![0.0; n];
            let (ge, le) = enumerate_wilcoxon(&x);
            let g = wilcoxon_one_sided(&x, &y, Alternative::Greater).map_err(|e| e.to_string())?;
            let l = wilcoxon_one_sided(&x, &y, Alternative::Less).map_err(|e| e.to_string())?;
            check(g.exact && l.exact, "exact path not taken")?;
            check(g.p_value == ge && l.p_value == le, format!("{x:?}: {} / {} vs {ge} / {le}", g.p_value, l.p_value))?;
            cases += 1;
        }
    }
    let five = wilcoxon_one_sided(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], Alternative::Greater).map_err(|e| e.to_string())?;
    check(five.p_value == 0.03125, format!("n=5 all positive: p = {}", five.p_value))?;

    let holm = holm_bonferroni(&[0.01, 0.04, 0.03], 0.05).map_err(|e| e.to_string())?;
    check(holm.reject == [true, false, false], format!("Holm rejects {:?}", holm.reject))?;

    let ids = ["a", "b", "c"];
    for set in 0..100 {
        let n = rng.random_range(1..=40);
        let points: Vec<SolutionPoint> = (0..n)
            .map(|i| SolutionPoint {
                approach: ids[rng.random_range(0..3)].into(),
                fold: i,
                effectiveness: f64::from(rng.random_range(0..8)) / 8.0,
                fairness: f64::from(rng.random_range(0..8)) / 8.0,
            })
            .collect();
        let front = pareto_front(&points).map_err(|e| e.to_string())?;
        let brute: Vec<usize> = (0..n)
            .filter(|&i| {
                !points.iter().any(|q| {
                    let p = &points[i];
                    q.effectiveness >= p.effectiveness
                        && q.fairness <= p.fairness
                        && (q.effectiveness > p.effectiveness || q.fairness < p.fairness)
                })
            })
            .collect();
        check(front.indices == brute, format!("set {set}: front {:?} vs {brute:?}", front.indices))?;
        for id in ids {
            let want = brute.iter().filter(|&&i| points[i].approach == id).count();
            let present = points.iter().any(|p| p.approach == id);
            let got = front.counts.get(id).copied();
            check(got == present.then_some(want), format!("set {set}: count of {id} {got:?} vs {want}"))?;
        }
    }
    Ok(format!(
        "{cases} Wilcoxon cases match 2^n enumeration (n <= 12), Holm rejects only 0.01, 100 Pareto sets match brute force"
    ))
}

// ---------------------------------------------------------------- AC-9

fn ac9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for point in 0..20 {
        let n = rng.random_range(5..=30);
        let d = rng.random_range(1..=4);
        let outputs = rng.random_range(2..=4);
        let x = Matrix::new(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..outputs)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let l2 = rng.random_range(0.0..0.5);
        let objective = WeightedSoftmaxObjective::new(&x, &targets, &weights, outputs, l2).map_err(|e| e.to_string())?;
        let params: Vec<f64> = (0..objective.n_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (_, grad) = objective.loss_and_gradient(&params);
        let h = 1e-6;
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus[i] += h;
                minus[i] -= h;
                (objective.loss(&plus) - objective.loss(&minus)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&grad).max(norm(&numeric));
        worst = worst.max(rel);
        check(rel <= 1e-5, format!("point {point}: relative error {rel:e}"))?;
    }
    Ok(format!("20 random points, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- AC-10

fn ac10() -> Option<Outcome> {
    let path = std::env::var_os("GEG_CMC_CSV")?;
    let var = |name: &str, default: &str| std::env::var(name).unwrap_or_else(|_| default.to_string());
    let schema = CsvSchema {
        label: var("GEG_CMC_LABEL", "contraceptive_method"),
        sensitive: var("GEG_CMC_SENSITIVE", "wife_religion"),
        positive: var("GEG_CMC_POSITIVE", "2"),
    };
    Some((|| {
        let start = Instant::now();
        let path = std::path::PathBuf::from(path);
        let ds = load_csv(&path, &schema).map_err(|e| e.to_string())?.dataset;
        let config = ExperimentConfig {
            source: DataSource::Csv { path, schema },
            approaches: vec![Approach::Baseline, Approach::GegSp],
            folds: 10,
            seed: 0,
            geg: GegConfig {
                eta: 0.05,
                ..GegConfig::default()
            },
            oracle: SoftmaxConfig::default(),
            eps: 0.0,
            trace: false,
        };
        let results = run_benchmark(&config, &ds).map_err(|e| e.to_string())?;
        let mean = |a: &str, m: &str| results.summary[a][m].mean;
        let (b_spd, g_spd) = (mean("baseline", "spd_p"), mean("geg-sp", "spd_p"));
        let (b_acc, g_acc) = (mean("baseline", "accuracy"), mean("geg-sp", "accuracy"));
        let elapsed = start.elapsed();
        let summary = format!(
            "baseline SPD-P {b_spd:.3} (in [0.05, 0.20]), GEG-SP SPD-P {g_spd:.3} (<= 0.06), accuracy {b_acc:.3} vs {g_acc:.3} (within 0.04), {elapsed:.1?}"
        );
        check(
            (0.05..=0.20).contains(&b_spd) && g_spd <= 0.06 && (b_acc - g_acc).abs() <= 0.04,
            summary.clone(),
        )?;
        check(elapsed < Duration::from_secs(300), format!("{summary}; over 5 min"))?;
        Ok(summary)
    })())
}

// ----------------------------------------------------------------

fn report(id: &str, outcome: &Outcome) -> bool {
    match outcome {
        Ok(msg) => {
            println!("{id} PASS  {msg}");
            true
        }
        Err(msg) => {
            println!("{id} FAIL  {msg}");
            false
        }
    }
}

fn main() {
    let mut all_ok = report("AC-1", &ac1());
    all_ok &= report("AC-2", &ac2());
    all_ok &= report("AC-3", &ac3());
    let (r4, r5) = rayon::join(ac4, ac5);
    all_ok &= report("AC-4", &r4);
    all_ok &= report("AC-5", &r5);
    all_ok &= report("AC-6", &ac6());
    all_ok &= report("AC-7", &ac7());
    all_ok &= report("AC-8", &ac8());
    all_ok &= report("AC-9", &ac9());
    match ac10() {
        Some(outcome) => all_ok &= report("AC-10", &outcome),
        None => println!("AC-10 SKIPPED  set GEG_CMC_CSV to a local copy of the CMC dataset to run it"),
    }
    if !all_ok {
        std::process::exit(1);
    }
}
