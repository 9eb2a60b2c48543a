use voxtherm_core::ert::TrainConfig;
use voxtherm_core::features::{build_dataset, VoxelCategory};
use voxtherm_core::forecast::{direct_forecast, iterative_forecast, ForecastConfig, NoClock};
use voxtherm_core::metrics::evaluate;
use voxtherm_core::schedule::{build_zigzag_schedule, schedule_row_count};
use voxtherm_core::simulator::{run, SimConfig};
use voxtherm_core::{GridSpec, TemperatureSource};

fn small() -> SimConfig {
    let mut c = SimConfig::desk();
    c.grid = GridSpec::new(10, 8, 2, c.grid.edge_length, c.grid.substrate_temperature).unwrap();
    c
}

#[test]
fn simulate_dataset_forecast_evaluate() {
    let c = small();
    let schedule = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let history = run(&c, &schedule).unwrap();
    assert_eq!(history.row_count(), schedule_row_count(&schedule));

    let ds = build_dataset(&history, &schedule).unwrap();
    assert_eq!(ds.len(), history.row_count());
    let counts = ds.category_counts();
    assert_eq!(counts.iter().sum::<usize>(), ds.len());

    let cfg = ForecastConfig::new(40, 30, TrainConfig::extra_trees(4, 7));
    let result = iterative_forecast(&history, &schedule, &cfg, &NoClock).unwrap();
    let expected: usize = (41..=70).map(|t| schedule.active_at(t).count()).sum();
    assert_eq!(result.predictions.len(), expected);
    assert_eq!(result.stages.len(), 2);

    let report = evaluate(&result, &history, &schedule).unwrap();
    assert_eq!(report.n_rows, expected);
    let share: f64 = report.per_category.iter().map(|c| c.share_percent).sum();
    assert!((share - 100.0).abs() < 1e-9);
    assert!(report.r2 > 0.5, "r2 {}", report.r2);
    assert!(report.mape_percent.is_finite());
    assert!(report.category(VoxelCategory::Interior).n_rows <= report.n_rows);
}

#[test]
fn forecasts_are_bit_reproducible() {
    let c = small();
    let schedule = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let a = run(&c, &schedule).unwrap();
    let b = run(&c, &schedule).unwrap();
    assert_eq!(a, b);
    let cfg = ForecastConfig::new(40, 30, TrainConfig::extra_trees(3, 11));
    for f in [iterative_forecast, direct_forecast] {
        let x = f(&a, &schedule, &cfg, &NoClock).unwrap();
        let y = f(&b, &schedule, &cfg, &NoClock).unwrap();
        assert_eq!(x.predictions, y.predictions);
    }
}

#[test]
fn every_prediction_targets_an_active_voxel() {
    let c = small();
    let schedule = build_zigzag_schedule(&c.grid, &c.laser).unwrap();
    let history = run(&c, &schedule).unwrap();
    let cfg = ForecastConfig::new(30, 20, TrainConfig::extra_trees(2, 1));
    let result = direct_forecast(&history, &schedule, &cfg, &NoClock).unwrap();
    for p in &result.predictions {
        assert!(p.timestep > 30 && p.timestep <= 50);
        assert!(history.temperature(p.timestep, p.voxel).is_some());
        assert!(p.value.is_finite());
    }
}
