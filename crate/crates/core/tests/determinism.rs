mod common;

use std::path::Path;

use caea::dataio::{Dataset, StreamMode};
use caea::eval::{
    run_eval, run_grid, write_eval, write_grid, Algorithm, RunConfig, FOLDS_CSV_HEADER,
};

/// Drops the wall-clock column from a folds CSV.
fn without_timing(csv: &str) -> String {
    let fields = FOLDS_CSV_HEADER.split(',').count();
    let col = FOLDS_CSV_HEADER
        .split(',')
        .position(|h| h == "train_seconds")
        .unwrap();
    csv.lines()
        .map(|line| {
            let mut cells: Vec<&str> = line.splitn(fields, ',').collect();
            cells.remove(col);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn blobs() -> Dataset {
    let (pts, ids) = common::two_blobs(&mut common::rng(1), 60);
    let names: Vec<String> = ids.iter().map(|b| format!("blob{b}")).collect();
    Dataset::from_parts("blobs", pts, &names).unwrap()
}

fn assert_repeatable(ds: &Dataset, config: &RunConfig) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_eval(a.path(), &run_eval(ds, config).unwrap()).unwrap();
    write_eval(b.path(), &run_eval(ds, config).unwrap()).unwrap();
    assert_eq!(
        read(a.path(), "summary.json"),
        read(b.path(), "summary.json")
    );
    assert_eq!(
        without_timing(&read(a.path(), "folds.csv")),
        without_timing(&read(b.path(), "folds.csv"))
    );
}

#[test]
fn eval_is_repeatable_for_every_mode() {
    let ds = blobs();
    for algorithm in [Algorithm::Caea, Algorithm::Hcaea] {
        for env in [StreamMode::Stationary, StreamMode::NonStationary] {
            let mut config = RunConfig::new("blobs", algorithm, 10);
            config.environment = env;
            config.seed = 17;
            assert_repeatable(&ds, &config);
        }
    }
}

#[test]
fn eval_on_iris_is_repeatable() {
    let ds = common::load("iris").unwrap();
    let mut config = RunConfig::new("iris", Algorithm::Hcaea, 16);
    config.seed = 3;
    assert_repeatable(&ds, &config);
}

#[test]
fn different_seeds_change_the_folds() {
    let ds = blobs();
    let a = run_eval(
        &ds,
        &RunConfig {
            seed: 1,
            ..RunConfig::new("blobs", Algorithm::Caea, 10)
        },
    )
    .unwrap();
    let b = run_eval(
        &ds,
        &RunConfig {
            seed: 2,
            ..RunConfig::new("blobs", Algorithm::Caea, 10)
        },
    )
    .unwrap();
    let nodes =
        |r: &caea::eval::EvalReport| r.folds.iter().map(|f| f.node_count).collect::<Vec<_>>();
    assert_ne!(nodes(&a), nodes(&b));
}

#[test]
fn grid_outputs_are_repeatable() {
    let ds = blobs();
    let config = RunConfig::new("blobs", Algorithm::Caea, 10);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_grid(a.path(), &run_grid(&ds, &config, &[8, 12]).unwrap()).unwrap();
    write_grid(b.path(), &run_grid(&ds, &config, &[8, 12]).unwrap()).unwrap();
    for name in ["grid_values.csv", "grid_summary.csv", "grid.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}
