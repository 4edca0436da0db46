//! Single trials and Monte Carlo sweeps over the full pipeline.
//!
//! Trial `j` of every grid point draws from the same seed, so neighbouring
//! points see identical scenes and noise except for the swept quantity.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{decide_with, ClassifierConfig, Hypothesis, HypothesisDecision};
use crate::echo::{synthesize_with, RadarEcho, SynthesisOptions};
use crate::error::{Error, Result};
use crate::geometry::{Point2, ReflectiveSurface};
use crate::localize::{localize, LocalizationResult};
use crate::ra::{compute_ra_map, RangeAngleMap};
use crate::rng::trial_seed;
use crate::scenario::{randomize_scenario_with, ScenarioRanges, ScenarioSpec, SceneClass, SnrSpec};
use crate::surface::{EstimatorId, EstimatorRegistry, StageOneConfig, SurfaceEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub estimator: EstimatorId,
    pub stage_one: StageOneConfig,
    pub classifier: ClassifierConfig,
    /// Size the Stage I peak count from the true surface length when one exists.
    pub truth_k: bool,
    pub add_noise: bool,
    /// Keep the echo and map in the trial record.
    pub keep_products: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorId::Ransac,
            stage_one: StageOneConfig::default(),
            classifier: ClassifierConfig::default(),
            truth_k: true,
            add_noise: true,
            keep_products: false,
        }
    }
}

impl PipelineConfig {
    /// Peak count used for a scene.
    pub fn k_for(&self, spec: &ScenarioSpec) -> usize {
        match (&spec.surface, self.truth_k) {
            (Some(s), true) => ((s.length / spec.radar.range_bin_size()).ceil() as usize).max(1),
            _ => self.stage_one.k_peaks,
        }
    }
}

/// Wall-clock seconds spent in each stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimings {
    pub synthesis: f64,
    pub map: f64,
    pub surface: f64,
    pub decision: f64,
    pub localization: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.synthesis + self.map + self.surface + self.decision + self.localization
    }
}

/// Estimate minus truth for each scored quantity; `None` where either side is missing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TrialErrors {
    pub x_w: Option<f64>,
    pub y_w: Option<f64>,
    pub d_w: Option<f64>,
    pub theta_w: Option<f64>,
    /// Apparent range of the decided peak against the true path length.
    pub range: Option<f64>,
    /// Bearing of the decided peak against the true arrival bearing.
    pub phi: Option<f64>,
    /// Euclidean target position error.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialProducts {
    pub echo: RadarEcho,
    pub map: RangeAngleMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub class: SceneClass,
    pub snr: SnrSpec,
    pub truth_surface: Option<ReflectiveSurface>,
    pub truth_target: Option<Point2>,
    pub k_peaks: usize,
    pub estimate: Option<SurfaceEstimate>,
    pub decision: Option<HypothesisDecision>,
    pub localization: Option<LocalizationResult>,
    pub errors: TrialErrors,
    pub timings: StageTimings,
    /// First stage error, if any stage failed.
    pub failure: Option<String>,
    pub products: Option<TrialProducts>,
}

impl TrialRecord {
    fn empty(spec: &ScenarioSpec) -> Self {
        Self {
            seed: spec.seed,
            class: spec.class,
            snr: spec.snr,
            truth_surface: spec.surface.clone(),
            truth_target: None,
            k_peaks: 0,
            estimate: None,
            decision: None,
            localization: None,
            errors: TrialErrors::default(),
            timings: StageTimings::default(),
            failure: None,
            products: None,
        }
    }

    pub fn hypothesis(&self) -> Option<Hypothesis> {
        self.decision.map(|d| d.hypothesis)
    }
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Synthesize, map, estimate the surface, decide and localize one scene.
/// Stage errors end the trial early and are kept in the record.
pub fn run_trial(spec: &ScenarioSpec, config: &PipelineConfig) -> TrialRecord {
    let registry = EstimatorRegistry::with_builtins(StageOneConfig {
        k_peaks: config.k_for(spec),
        ..config.stage_one
    });
    run_trial_with(spec, config, &registry)
}

pub fn run_trial_with(
    spec: &ScenarioSpec,
    config: &PipelineConfig,
    registry: &EstimatorRegistry,
) -> TrialRecord {
    let mut rec = TrialRecord::empty(spec);
    if let Err(e) = run_stages(spec, config, registry, &mut rec) {
        rec.failure = Some(e.to_string());
    }
    rec
}

fn run_stages(
    spec: &ScenarioSpec,
    config: &PipelineConfig,
    registry: &EstimatorRegistry,
    rec: &mut TrialRecord,
) -> Result<()> {
    let truth = spec.truth()?;
    rec.truth_target = truth.target;
    rec.k_peaks = config.k_for(spec);
    let opts = SynthesisOptions {
        add_noise: config.add_noise,
        keep_components: false,
    };
    let echo = timed(&mut rec.timings.synthesis, || synthesize_with(spec, &opts))?;
    let map = timed(&mut rec.timings.map, || compute_ra_map(&echo))?;

    let estimate = timed(&mut rec.timings.surface, || {
        match (&config.estimator, &spec.surface) {
            (EstimatorId::Truth, Some(s)) => Ok(SurfaceEstimate::from_truth(s)),
            (EstimatorId::Truth, None) => Ok(SurfaceEstimate::undetected(EstimatorId::Truth)),
            (id, _) => registry.estimate(id, &map),
        }
    })?;
    if let (Some(fit), Some(s)) = (&estimate.fit, &spec.surface) {
        rec.errors.x_w = Some(fit.center.x - s.center.x);
        rec.errors.y_w = Some(fit.center.y - s.center.y);
        rec.errors.d_w = Some(fit.length - s.length);
        rec.errors.theta_w = Some(fit.orientation_deg - s.orientation_deg);
    }
    let decision = timed(&mut rec.timings.decision, || {
        decide_with(&estimate, &map, &config.classifier)
    });
    rec.estimate = Some(estimate.clone());
    rec.decision = Some(decision);

    if let Some(target) = truth.target {
        let (path, bearing) = match (spec.class, truth.prp) {
            (SceneClass::Nlos, Some(prp)) => (prp.path_length(), prp.bearing_deg),
            _ => (target.norm(), target.bearing_deg()),
        };
        rec.errors.range = Some(decision.range_m - path);
        rec.errors.phi = Some(decision.angle_deg - bearing);
    }
    if config.keep_products {
        rec.products = Some(TrialProducts { echo, map });
    }

    let loc = timed(&mut rec.timings.localization, || {
        localize(&decision, &estimate)
    })?;
    rec.localization = Some(loc);
    if let Some(target) = truth.target {
        rec.errors.distance = Some(loc.position.distance(target));
    }
    Ok(())
}

/// Quantity varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptVariable {
    /// Target SNR minus surface SNR.
    DeltaSnr,
    /// Surface SNR, keeping the base difference to the target.
    SnrW,
    ThetaW,
    DW,
    SigmaX,
}

impl SweptVariable {
    pub const ALL: [SweptVariable; 5] = [
        SweptVariable::DeltaSnr,
        SweptVariable::SnrW,
        SweptVariable::ThetaW,
        SweptVariable::DW,
        SweptVariable::SigmaX,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweptVariable::DeltaSnr => "delta_snr",
            SweptVariable::SnrW => "snr_w",
            SweptVariable::ThetaW => "theta_w",
            SweptVariable::DW => "d_w",
            SweptVariable::SigmaX => "sigma_x",
        }
    }

    pub fn apply(self, spec: &mut ScenarioSpec, value: f64) -> Result<()> {
        match self {
            SweptVariable::DeltaSnr => spec.snr.target_db = spec.snr.surface_db + value,
            SweptVariable::SnrW => {
                let delta = spec.snr.delta_db();
                spec.snr = SnrSpec {
                    surface_db: value,
                    target_db: value + delta,
                };
            }
            _ => {
                let s = spec.surface.as_mut().ok_or_else(|| {
                    Error::Config(format!(
                        "sweeping {} needs a scene with a surface",
                        self.as_str()
                    ))
                })?;
                match self {
                    SweptVariable::ThetaW => s.orientation_deg = value,
                    SweptVariable::DW => s.length = value,
                    _ => s.irregularity_sigma = value,
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SweptVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweptVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweptVariable::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown swept variable `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RmseD,
    RmseXW,
    RmseYW,
    RmseDW,
    RmseThetaW,
    RmseRange,
    RmsePhi,
    /// Fraction of NLOS trials decided I1.
    #[serde(rename = "pr_i1_i1")]
    PrI1GivenI1,
    /// Fraction of LOS trials decided I1.
    #[serde(rename = "pr_i1_i0")]
    PrI1GivenI0,
    /// Fraction of trials with a detected surface.
    Detection,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::RmseD,
        Metric::RmseXW,
        Metric::RmseYW,
        Metric::RmseDW,
        Metric::RmseThetaW,
        Metric::RmseRange,
        Metric::RmsePhi,
        Metric::PrI1GivenI1,
        Metric::PrI1GivenI0,
        Metric::Detection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RmseD => "rmse_d",
            Metric::RmseXW => "rmse_x_w",
            Metric::RmseYW => "rmse_y_w",
            Metric::RmseDW => "rmse_d_w",
            Metric::RmseThetaW => "rmse_theta_w",
            Metric::RmseRange => "rmse_range",
            Metric::RmsePhi => "rmse_phi",
            Metric::PrI1GivenI1 => "pr_i1_i1",
            Metric::PrI1GivenI0 => "pr_i1_i0",
            Metric::Detection => "detection",
        }
    }

    pub fn evaluate(self, records: &[TrialRecord]) -> Estimate {
        let errors = |f: fn(&TrialErrors) -> Option<f64>| {
            records
                .iter()
                .filter_map(|r| f(&r.errors))
                .collect::<Vec<_>>()
        };
        match self {
            Metric::RmseD => rmse(&errors(|e| e.distance)),
            Metric::RmseXW => rmse(&errors(|e| e.x_w)),
            Metric::RmseYW => rmse(&errors(|e| e.y_w)),
            Metric::RmseDW => rmse(&errors(|e| e.d_w)),
            Metric::RmseThetaW => rmse(&errors(|e| e.theta_w)),
            Metric::RmseRange => rmse(&errors(|e| e.range)),
            Metric::RmsePhi => rmse(&errors(|e| e.phi)),
            Metric::PrI1GivenI1 => proportion(
                records
                    .iter()
                    .filter(|r| r.class.is_nlos())
                    .map(decided_nlos),
            ),
            Metric::PrI1GivenI0 => proportion(
                records
                    .iter()
                    .filter(|r| !r.class.is_nlos())
                    .map(decided_nlos),
            ),
            Metric::Detection => proportion(
                records
                    .iter()
                    .map(|r| r.estimate.as_ref().is_some_and(|e| e.detected())),
            ),
        }
    }
}

fn decided_nlos(r: &TrialRecord) -> bool {
    r.hypothesis() == Some(Hypothesis::I1)
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Aggregate with its standard error over `count` contributing trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub count: usize,
}

/// Root mean square with a delta-method standard error.
pub fn rmse(errors: &[f64]) -> Estimate {
    let n = errors.len();
    if n == 0 {
        return Estimate {
            value: None,
            std_error: None,
            count: 0,
        };
    }
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mean = sq.iter().sum::<f64>() / n as f64;
    let value = mean.sqrt();
    let std_error = if n > 1 && value > 0.0 {
        let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some((var / n as f64).sqrt() / (2.0 * value))
    } else {
        None
    };
    Estimate {
        value: Some(value),
        std_error,
        count: n,
    }
}

pub fn proportion(outcomes: impl Iterator<Item = bool>) -> Estimate {
    let (mut hits, mut n) = (0usize, 0usize);
    for o in outcomes {
        n += 1;
        hits += o as usize;
    }
    if n == 0 {
        return Estimate {
            value: None,
            std_error: None,
            count: 0,
        };
    }
    let p = hits as f64 / n as f64;
    Estimate {
        value: Some(p),
        std_error: Some((p * (1.0 - p) / n as f64).sqrt()),
        count: n,
    }
}

/// Where the scenes of a sweep come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    /// One scene; each trial reseeds it.
    Fixed(Box<ScenarioSpec>),
    /// Fresh randomized scenes, cycling through `classes` by trial index.
    Random {
        classes: Vec<SceneClass>,
        ranges: ScenarioRanges,
        snr: SnrSpec,
        radar: crate::geometry::RadarConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub variable: SweptVariable,
    pub grid: Vec<f64>,
    pub trials_per_point: usize,
    pub source: SceneSource,
    pub metrics: Vec<Metric>,
    pub master_seed: u64,
    pub pipeline: PipelineConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid values must be finite".into()));
        }
        if self.trials_per_point == 0 {
            return Err(Error::Config(
                "trials per point must be at least one".into(),
            ));
        }
        if let SceneSource::Random { classes, .. } = &self.source {
            if classes.is_empty() {
                return Err(Error::Config(
                    "random scene source needs at least one class".into(),
                ));
            }
        }
        Ok(())
    }

    /// Scene of trial `index` at grid value `value`.
    pub fn scene(&self, index: usize, value: f64) -> Result<ScenarioSpec> {
        let seed = trial_seed(self.master_seed, index as u64);
        let mut spec = match &self.source {
            SceneSource::Fixed(s) => ScenarioSpec {
                seed,
                ..(**s).clone()
            },
            SceneSource::Random {
                classes,
                ranges,
                snr,
                radar,
            } => {
                let class = classes[index % classes.len()];
                ScenarioSpec {
                    snr: *snr,
                    ..randomize_scenario_with(class, seed, ranges, radar)?
                }
            }
        };
        self.variable.apply(&mut spec, value)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub value: f64,
    pub trials: usize,
    pub failures: usize,
    pub metrics: Vec<(Metric, Estimate)>,
}

impl PointSummary {
    pub fn metric(&self, m: Metric) -> Option<Estimate> {
        self.metrics.iter().find(|(k, _)| *k == m).map(|(_, e)| *e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub name: String,
    pub variable: SweptVariable,
    pub points: Vec<PointSummary>,
    /// Per-trial records, indexed `[point][trial]`.
    pub records: Vec<Vec<TrialRecord>>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().map(|p| p.failures).sum()
    }

    pub fn trials(&self) -> usize {
        self.points.iter().map(|p| p.trials).sum()
    }
}

fn trial_at(sweep: &SweepSpec, index: usize, value: f64) -> TrialRecord {
    match sweep.scene(index, value) {
        Ok(spec) => run_trial(&spec, &sweep.pipeline),
        Err(e) => {
            let seed = trial_seed(sweep.master_seed, index as u64);
            let class = match &sweep.source {
                SceneSource::Fixed(s) => s.class,
                SceneSource::Random { classes, .. } => classes[index % classes.len()],
            };
            TrialRecord {
                seed,
                class,
                snr: SnrSpec {
                    surface_db: f64::NAN,
                    target_db: f64::NAN,
                },
                truth_surface: None,
                truth_target: None,
                k_peaks: 0,
                estimate: None,
                decision: None,
                localization: None,
                errors: TrialErrors::default(),
                timings: StageTimings::default(),
                failure: Some(e.to_string()),
                products: None,
            }
        }
    }
}

pub fn summarize(value: f64, records: &[TrialRecord], metrics: &[Metric]) -> PointSummary {
    PointSummary {
        value,
        trials: records.len(),
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        metrics: metrics.iter().map(|&m| (m, m.evaluate(records))).collect(),
    }
}

/// Run every trial of every grid point on `workers` threads (all cores when
/// `None`). Output is independent of the worker count.
pub fn run_sweep(sweep: &SweepSpec, workers: Option<usize>) -> Result<SweepResult> {
    sweep.validate()?;
    let jobs: Vec<(usize, usize)> = (0..sweep.grid.len())
        .flat_map(|p| (0..sweep.trials_per_point).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let flat: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| trial_at(sweep, t, sweep.grid[p]))
            .collect()
    });

    let mut records: Vec<Vec<TrialRecord>> = Vec::with_capacity(sweep.grid.len());
    let mut it = flat.into_iter();
    for _ in &sweep.grid {
        records.push(it.by_ref().take(sweep.trials_per_point).collect());
    }
    let points = sweep
        .grid
        .iter()
        .zip(&records)
        .map(|(&v, r)| summarize(v, r, &sweep.metrics))
        .collect();
    Ok(SweepResult {
        name: sweep.name.clone(),
        variable: sweep.variable,
        points,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadarConfig;
    use crate::scenario::TargetSpec;
    use approx::assert_abs_diff_eq;

    fn fig15(seed: u64) -> ScenarioSpec {
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
                target_db: 50.0,
            },
            class: SceneClass::Nlos,
            seed,
            tx_amplitude: 1.0,
        }
    }

    #[test]
    fn truth_k_follows_surface_length() {
        let c = PipelineConfig::default();
        assert_eq!(c.k_for(&fig15(0)), 22);
        let spec = randomize_scenario_with(
            SceneClass::LosNoSurface,
            3,
            &ScenarioRanges::table_ii(),
            &RadarConfig::default(),
        )
        .unwrap();
        assert_eq!(c.k_for(&spec), 35);
        let c = PipelineConfig {
            truth_k: false,
            ..c
        };
        assert_eq!(c.k_for(&fig15(0)), 35);
    }

    #[test]
    fn nlos_trial_localizes_target() {
        let rec = run_trial(&fig15(4), &PipelineConfig::default());
        assert!(rec.failure.is_none(), "{:?}", rec.failure);
        assert_eq!(rec.hypothesis(), Some(Hypothesis::I1));
        assert!(rec.errors.distance.unwrap() < 1.5);
        assert!(rec.errors.theta_w.unwrap().abs() < 3.0);
        assert!(rec.timings.total() > 0.0);
    }

    #[test]
    fn los_without_surface_decides_direct() {
        let spec = randomize_scenario_with(
            SceneClass::LosNoSurface,
            9,
            &ScenarioRanges::table_ii(),
            &RadarConfig::default(),
        )
        .unwrap();
        let spec = ScenarioSpec {
            snr: SnrSpec {
                surface_db: 30.0,
                target_db: 30.0,
            },
            ..spec
        };
        let rec = run_trial(&spec, &PipelineConfig::default());
        assert_eq!(rec.hypothesis(), Some(Hypothesis::I0));
        assert!(!rec.estimate.unwrap().detected());
    }

    #[test]
    fn stage_errors_stay_in_record() {
        let mut spec = fig15(0);
        spec.surface.as_mut().unwrap().length = -1.0;
        let rec = run_trial(&spec, &PipelineConfig::default());
        assert!(rec.failure.is_some());
        assert!(rec.localization.is_none());
    }

    #[test]
    fn rmse_matches_definition() {
        let e = [3.0, -4.0, 0.0, 1.0];
        let r = rmse(&e);
        assert_abs_diff_eq!(r.value.unwrap(), (26.0f64 / 4.0).sqrt(), epsilon = 1e-12);
        assert_eq!(r.count, 4);
        assert!(rmse(&[]).value.is_none());
        let p = proportion([true, false, true, true].into_iter());
        assert_abs_diff_eq!(p.value.unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn swept_variables_edit_the_scene() {
        let mut s = fig15(0);
        SweptVariable::DeltaSnr.apply(&mut s, 10.0).unwrap();
        assert_eq!(s.snr.target_db, 40.0);
        SweptVariable::SnrW.apply(&mut s, 20.0).unwrap();
        assert_eq!((s.snr.surface_db, s.snr.target_db), (20.0, 30.0));
        SweptVariable::SigmaX.apply(&mut s, 0.2).unwrap();
        assert_eq!(s.surface.as_ref().unwrap().irregularity_sigma, 0.2);
        let mut bare = ScenarioSpec {
            surface: None,
            class: SceneClass::LosNoSurface,
            ..fig15(0)
        };
        assert!(SweptVariable::ThetaW.apply(&mut bare, 10.0).is_err());
        for v in SweptVariable::ALL {
            assert_eq!(v.as_str().parse::<SweptVariable>().unwrap(), v);
        }
        for m in Metric::ALL {
            let t: std::collections::BTreeMap<String, Metric> =
                toml::from_str(&format!("m = \"{m}\"")).unwrap();
            assert_eq!(t["m"], m);
        }
    }

    fn small_sweep() -> SweepSpec {
        SweepSpec {
            name: "t".into(),
            variable: SweptVariable::DeltaSnr,
            grid: vec![10.0, 30.0],
            trials_per_point: 3,
            source: SceneSource::Fixed(Box::new(fig15(0))),
            metrics: Metric::ALL.to_vec(),
            master_seed: 5,
            pipeline: PipelineConfig::default(),
        }
    }

    #[test]
    fn sweep_is_worker_count_independent() {
        let s = small_sweep();
        let a = run_sweep(&s, Some(1)).unwrap();
        let b = run_sweep(&s, Some(3)).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.records[1][2].seed, b.records[1][2].seed);
        assert_eq!(a.records[0][1].seed, a.records[1][1].seed);
    }

    #[test]
    fn aggregate_matches_stored_errors() {
        let r = run_sweep(&small_sweep(), None).unwrap();
        for (p, recs) in r.points.iter().zip(&r.records) {
            let e: Vec<f64> = recs.iter().filter_map(|r| r.errors.distance).collect();
            let direct = (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt();
            assert!((p.metric(Metric::RmseD).unwrap().value.unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        let s = SweepSpec {
            grid: vec![],
            ..small_sweep()
        };
        assert!(run_sweep(&s, None).is_err());
        let s = SweepSpec {
            trials_per_point: 0,
            ..small_sweep()
        };
        assert!(run_sweep(&s, None).is_err());
    }
}
