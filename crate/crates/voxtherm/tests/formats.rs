use proptest::prelude::*;
use tempfile::TempDir;
use voxtherm::dataset_io::{read_dataset, write_dataset, DataFormat};
use voxtherm::history_io::{read_history, write_history};
use voxtherm::model_io::{read_model, write_model, StoredModel};
use voxtherm::report::{export_scatter, read_predictions, read_scatter, write_predictions};
use voxtherm_core::ert::{Forest, Samples, TrainConfig};
use voxtherm_core::features::{build_dataset, FEATURE_COUNT};
use voxtherm_core::forecast::{iterative_forecast, NoClock, ForecastConfig};
use voxtherm_core::schedule::build_zigzag_schedule;
use voxtherm_core::simulator::{run, SimConfig};
use voxtherm_core::GridSpec;

fn tiny(nx: usize, ny: usize, nz: usize) -> SimConfig {
    let mut c = SimConfig::desk();
    c.grid = GridSpec::new(nx, ny, nz, c.grid.edge_length, c.grid.substrate_temperature).unwrap();
    c
}

#[test]
fn history_round_trips_bitwise() {
    let tmp = TempDir::new().unwrap();
    let c = tiny(6, 4, 2);
    let s = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let h = run(&c, &s).unwrap();
    let path = tmp.path().join("h.csv");
    write_history(&path, &h, &c).unwrap();
    let (back, meta) = read_history(&path).unwrap();
    assert_eq!(back, h);
    assert_eq!(meta.n_steps, h.n_steps());
}

#[test]
fn model_round_trips_and_rejects_garbage() {
    let tmp = TempDir::new().unwrap();
    let c = tiny(6, 4, 2);
    let s = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let ds = build_dataset(&run(&c, &s).unwrap(), &s).unwrap();
    let (x, y) = ds.matrix_where(|_| true);
    let forest = Forest::fit(&Samples::new(&x, &y, FEATURE_COUNT).unwrap(), &TrainConfig::extra_trees(3, 5)).unwrap();
    let model = StoredModel {
        forest,
        train_horizon: Some(12),
    };
    let path = tmp.path().join("m.vxm");
    write_model(&path, &model).unwrap();
    assert_eq!(read_model(&path).unwrap(), model);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(read_model(&path).is_err());
    std::fs::write(&path, b"not a model").unwrap();
    assert!(read_model(&path).is_err());
}

#[test]
fn truncated_binary_dataset_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let c = tiny(4, 2, 1);
    let s = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let ds = build_dataset(&run(&c, &s).unwrap(), &s).unwrap();
    let path = tmp.path().join("d.vxds");
    write_dataset(&path, &ds, DataFormat::Binary).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(read_dataset(&path).is_err());
}

#[test]
fn predictions_round_trip_without_timings() {
    let tmp = TempDir::new().unwrap();
    let c = tiny(6, 4, 2);
    let s = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let h = run(&c, &s).unwrap();
    let mut r = iterative_forecast(&h, &s, &ForecastConfig::new(10, 12, TrainConfig::extra_trees(2, 1)), &NoClock).unwrap();
    let path = tmp.path().join("p.csv");
    write_predictions(&path, &r, &c.grid, Some(&h)).unwrap();
    r.stages.clear();
    assert_eq!(read_predictions(&path, &c.grid).unwrap(), r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn datasets_round_trip_in_both_formats(nx in 1usize..6, ny in 1usize..5, nz in 1usize..3) {
        let tmp = TempDir::new().unwrap();
        let c = tiny(nx, ny, nz);
        let s = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
        let ds = build_dataset(&run(&c, &s).unwrap(), &s).unwrap();
        for (name, fmt) in [("d.csv", DataFormat::Text), ("d.vxds", DataFormat::Binary)] {
            let path = tmp.path().join(name);
            write_dataset(&path, &ds, fmt).unwrap();
            prop_assert_eq!(&read_dataset(&path).unwrap(), &ds);
        }
    }

    #[test]
    fn scatter_round_trips(pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 0..50)) {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("s.csv");
        export_scatter(&path, &pairs).unwrap();
        prop_assert_eq!(read_scatter(&path).unwrap(), pairs);
    }
}
