use std::collections::BTreeSet;

use spmtl_core::dataset::{load_csv, split, CsvSchema};
use spmtl_core::toy::{generate_toy, ToyConfig};
use spmtl_core::SplitSpec;

fn toy() -> spmtl_core::MultiTaskDataset {
    let cfg = ToyConfig {
        tasks_per_group: 2,
        instances_per_task: 30,
        seed: 8,
        ..Default::default()
    };
    generate_toy(&cfg).unwrap().0
}

#[test]
fn written_csv_loads_back_identically() {
    let data = toy();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.csv");
    data.write_csv(&path).unwrap();
    let back = load_csv(&path, &CsvSchema::default()).unwrap();
    assert_eq!(back, data);

    let again = dir.path().join("again.csv");
    back.write_csv(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn split_parts_recombine_to_the_original_rows() {
    let data = toy();
    let (train, test) = split(&data, &SplitSpec::new(0.15, 4)).unwrap();
    for ((orig, a), b) in data.tasks().iter().zip(train.tasks()).zip(test.tasks()) {
        assert_eq!(a.len(), 5);
        assert_eq!(a.len() + b.len(), orig.len());
        let key = |t: &spmtl_core::TaskData, r: usize| -> Vec<u64> {
            std::iter::once(t.targets[r].to_bits())
                .chain(t.features.row(r).iter().map(|v| v.to_bits()))
                .collect()
        };
        let want: BTreeSet<_> = (0..orig.len()).map(|r| key(orig, r)).collect();
        let got: BTreeSet<_> = (0..a.len())
            .map(|r| key(a, r))
            .chain((0..b.len()).map(|r| key(b, r)))
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn missing_file_is_a_usage_error() {
    let err = load_csv("/nonexistent/data.csv", &CsvSchema::default()).unwrap_err();
    assert!(err.is_usage());
    assert!(err.to_string().contains("/nonexistent/data.csv"));
}
