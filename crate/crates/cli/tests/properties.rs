use geg_cli::csv_io::{read_csv, write_csv, CsvSchema};
use geg_cli::experiment::{run_benchmark, summarize, Approach, DataSource, ExperimentConfig};
use geg_core::data::{generate_synthetic, Dataset, SyntheticSpec};
use geg_core::geg::GegConfig;
use geg_core::learners::SoftmaxConfig;
use geg_core::metrics::Metric;
use geg_core::Matrix;
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = Dataset> {
    (3usize..40, 1usize..4, 2usize..4).prop_flat_map(|(n, d, k)| {
        (
            proptest::collection::vec(-1e6f64..1e6, n * d),
            proptest::collection::vec(0..2usize, n),
            proptest::collection::vec(0..k, n),
        )
            .prop_map(move |(x, mut g, mut y)| {
                // make every group and class appear
                g[0] = 0;
                g[1] = 1;
                for c in 0..k.min(n) {
                    y[c] = c;
                }
                Dataset::new(Matrix::new(n, d, x).unwrap(), g, y, 0).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn csv_round_trip_is_lossless(ds in dataset()) {
        let names: Vec<String> = (0..ds.n_features()).map(|i| format!("f{i}")).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds, &names).unwrap();
        let schema = CsvSchema { label: "label".into(), sensitive: "group".into(), positive: "0".into() };
        let back = read_csv(buf.as_slice(), &schema).unwrap();
        prop_assert_eq!(back.dataset.features(), ds.features());
        prop_assert_eq!(back.dataset.labels(), ds.labels());
        prop_assert_eq!(back.dataset.groups(), ds.groups());
        prop_assert_eq!(back.feature_names, names);
    }
}

fn config(spec: SyntheticSpec, approaches: Vec<Approach>, folds: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        source: DataSource::Synthetic { spec },
        approaches,
        folds,
        seed,
        geg: GegConfig {
            eta: 0.05,
            max_iter: 4,
            t_min: 1,
            ..GegConfig::default()
        },
        oracle: SoftmaxConfig {
            max_epochs: 100,
            ..SoftmaxConfig::default()
        },
        eps: 0.0,
        trace: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn every_pair_is_present_and_summaries_recompute(seed in 0u64..500, folds in 2usize..6) {
        let spec = SyntheticSpec::binary(120, 0.4, 0.3, 0.7);
        let ds = generate_synthetic(&spec, seed).unwrap();
        let approaches = vec![Approach::Baseline, Approach::GegSp, Approach::GegCp];
        let results = run_benchmark(&config(spec, approaches.clone(), folds, seed), &ds).unwrap();
        prop_assert_eq!(results.runs.len(), approaches.len() * folds);
        for a in &approaches {
            for f in 0..folds {
                prop_assert!(results.runs.iter().any(|r| r.approach == a.id() && r.fold == f));
            }
        }
        prop_assert_eq!(&summarize(&results.runs), &results.summary);
        for (approach, per_metric) in &results.summary {
            for metric in Metric::ALL {
                let values: Vec<f64> = results
                    .runs
                    .iter()
                    .filter(|r| &r.approach == approach)
                    .map(|r| r.metrics.as_ref().unwrap().get(metric))
                    .collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                prop_assert!((per_metric[metric.name()].mean - mean).abs() <= 1e-12);
            }
        }
    }
}
