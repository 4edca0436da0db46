use nlosrad::classify::Hypothesis;
use nlosrad::geometry::{Point2, RadarConfig, ReflectiveSurface};
use nlosrad::harness::{
    run_sweep, run_trial, Metric, PipelineConfig, SceneSource, SweepSpec, SweptVariable,
};
use nlosrad::scenario::{ScenarioSpec, SceneClass, SnrSpec, TargetSpec};

fn scene(seed: u64, target_db: f64) -> ScenarioSpec {
    ScenarioSpec {
        radar: RadarConfig::default(),
        surface: Some(ReflectiveSurface::new(Point2::new(2.0, 18.0), 8.0, 25.0)),
        target: Some(TargetSpec::Specular {
            phi_ko_deg: 6.3,
            r2: 11.9,
            rcs_mean_power: 1.0,
        }),
        snr: SnrSpec {
            surface_db: 30.0,
            target_db,
        },
        class: SceneClass::Nlos,
        seed,
        tx_amplitude: 1.0,
    }
}

#[test]
fn reference_scene_is_localized_behind_the_surface() {
    let truth = scene(0, 50.0).target_position().unwrap().unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let rec = run_trial(&scene(seed, 50.0), &PipelineConfig::default());
        assert!(rec.failure.is_none(), "{:?}", rec.failure);
        if rec.hypothesis() == Some(Hypothesis::I1) && rec.errors.distance.unwrap() < 3.0 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10 near {truth:?}");
}

#[test]
fn strong_nlos_target_is_identified() {
    let sweep = SweepSpec {
        name: "strong".into(),
        variable: SweptVariable::DeltaSnr,
        grid: vec![40.0],
        trials_per_point: 40,
        source: SceneSource::Fixed(Box::new(scene(0, 70.0))),
        metrics: vec![Metric::PrI1GivenI1],
        master_seed: 3,
        pipeline: PipelineConfig::default(),
    };
    let r = run_sweep(&sweep, None).unwrap();
    let p = r.points[0]
        .metric(Metric::PrI1GivenI1)
        .unwrap()
        .value
        .unwrap();
    assert!(p >= 0.95, "{p}");
}
