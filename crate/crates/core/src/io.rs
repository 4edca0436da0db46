//! Scene and sweep files, binary and text exports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classify::{FovMasks, HypothesisDecision, Region};
use crate::echo::{RadarEcho, TargetEchoStatus};
use crate::error::{Error, Result};
use crate::geometry::{Point2, PointTarget, RadarConfig, ReflectiveSurface};
use crate::harness::{
    Metric, PipelineConfig, SceneSource, SweepResult, SweepSpec, SweptVariable, TrialRecord,
};
use crate::localize::LocalizationResult;
use crate::ra::RangeAngleMap;
use crate::scenario::{ScenarioRanges, ScenarioSpec, SceneClass, SnrSpec, TargetSpec};
use crate::surface::{EstimatorId, PeakSearch, SurfaceEstimate};

pub const ECHO_MAGIC: &[u8; 8] = b"NLOSECHO";
pub const MAP_MAGIC: &[u8; 8] = b"NLOSRAMP";
pub const HEADER_LEN: usize = 32;

fn one() -> f64 {
    1.0
}

fn default_backscatter() -> f64 {
    0.846
}

fn default_beamwidth() -> f64 {
    14.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub orientation_deg: f64,
    #[serde(default = "default_backscatter")]
    pub backscatter_ratio: f64,
    #[serde(default = "default_beamwidth")]
    pub beamwidth_exponent: f64,
    #[serde(default)]
    pub irregularity_sigma: f64,
}

impl From<&ReflectiveSurface> for SurfaceFile {
    fn from(s: &ReflectiveSurface) -> Self {
        Self {
            x: s.center.x,
            y: s.center.y,
            length: s.length,
            orientation_deg: s.orientation_deg,
            backscatter_ratio: s.backscatter_ratio,
            beamwidth_exponent: s.beamwidth_exponent,
            irregularity_sigma: s.irregularity_sigma,
        }
    }
}

impl From<&SurfaceFile> for ReflectiveSurface {
    fn from(f: &SurfaceFile) -> Self {
        ReflectiveSurface {
            backscatter_ratio: f.backscatter_ratio,
            beamwidth_exponent: f.beamwidth_exponent,
            irregularity_sigma: f.irregularity_sigma,
            ..ReflectiveSurface::new(Point2::new(f.x, f.y), f.length, f.orientation_deg)
        }
    }
}

/// Target given either by position or by a bounce bearing and a post-bounce range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_ko_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default = "one")]
    pub rcs_mean_power: f64,
}

impl From<&TargetSpec> for TargetFile {
    fn from(t: &TargetSpec) -> Self {
        match *t {
            TargetSpec::Position(p) => TargetFile {
                x: Some(p.position.x),
                y: Some(p.position.y),
                rcs_mean_power: p.rcs_mean_power,
                ..Default::default()
            },
            TargetSpec::Specular {
                phi_ko_deg,
                r2,
                rcs_mean_power,
            } => TargetFile {
                phi_ko_deg: Some(phi_ko_deg),
                r2: Some(r2),
                rcs_mean_power,
                ..Default::default()
            },
        }
    }
}

impl TryFrom<&TargetFile> for TargetSpec {
    type Error = Error;
    fn try_from(f: &TargetFile) -> Result<Self> {
        match (f.x, f.y, f.phi_ko_deg, f.r2) {
            (Some(x), Some(y), None, None) => Ok(TargetSpec::Position(PointTarget {
                position: Point2::new(x, y),
                rcs_mean_power: f.rcs_mean_power,
            })),
            (None, None, Some(phi_ko_deg), Some(r2)) => Ok(TargetSpec::Specular {
                phi_ko_deg,
                r2,
                rcs_mean_power: f.rcs_mean_power,
            }),
            _ => Err(Error::Config(
                "target needs either x and y, or phi_ko_deg and r2".into(),
            )),
        }
    }
}

/// One scene as written in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub class: SceneClass,
    #[serde(default)]
    pub seed: u64,
    pub snr: SnrSpec,
    #[serde(default)]
    pub radar: RadarConfig,
    #[serde(default = "one")]
    pub tx_amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetFile>,
}

impl SceneFile {
    pub fn to_spec(&self) -> Result<ScenarioSpec> {
        let spec = ScenarioSpec {
            radar: self.radar.clone(),
            surface: self.surface.as_ref().map(ReflectiveSurface::from),
            target: self.target.as_ref().map(TargetSpec::try_from).transpose()?,
            snr: self.snr,
            class: self.class,
            seed: self.seed,
            tx_amplitude: self.tx_amplitude,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<&ScenarioSpec> for SceneFile {
    fn from(s: &ScenarioSpec) -> Self {
        Self {
            class: s.class,
            seed: s.seed,
            snr: s.snr,
            radar: s.radar.clone(),
            tx_amplitude: s.tx_amplitude,
            surface: s.surface.as_ref().map(SurfaceFile::from),
            target: s.target.as_ref().map(TargetFile::from),
        }
    }
}

pub fn parse_scene(text: &str) -> Result<ScenarioSpec> {
    toml::from_str::<SceneFile>(text)?.to_spec()
}

pub fn read_scene(path: &Path) -> Result<ScenarioSpec> {
    parse_scene(&std::fs::read_to_string(path)?)
}

pub fn scene_to_toml(spec: &ScenarioSpec) -> Result<String> {
    toml::to_string(&SceneFile::from(spec)).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default = "default_k")]
    pub k_peaks: usize,
    #[serde(default = "default_true")]
    pub truth_k: bool,
    #[serde(default = "default_guard")]
    pub guard_m: f64,
    #[serde(default = "default_true")]
    pub add_noise: bool,
    /// Replace subtraction by greedy local maxima with this sidelobe gate, dB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_peaks_margin_db: Option<f64>,
}

fn default_estimator() -> String {
    "ransac".into()
}

fn default_k() -> usize {
    35
}

fn default_true() -> bool {
    true
}

fn default_guard() -> f64 {
    crate::classify::DEFAULT_GUARD_M
}

impl Default for PipelineFile {
    fn default() -> Self {
        Self {
            estimator: default_estimator(),
            k_peaks: default_k(),
            truth_k: true,
            guard_m: default_guard(),
            add_noise: true,
            local_peaks_margin_db: None,
        }
    }
}

impl PipelineFile {
    pub fn to_config(&self) -> Result<PipelineConfig> {
        let mut c = PipelineConfig {
            estimator: self.estimator.parse::<EstimatorId>()?,
            ..Default::default()
        };
        if self.k_peaks == 0 {
            return Err(Error::Config("k_peaks must be at least one".into()));
        }
        if !(self.guard_m >= 0.0) {
            return Err(Error::Config("guard_m must be non-negative".into()));
        }
        c.stage_one.k_peaks = self.k_peaks;
        c.truth_k = self.truth_k;
        c.classifier.guard_m = self.guard_m;
        c.add_noise = self.add_noise;
        if let Some(m) = self.local_peaks_margin_db {
            c.stage_one.search = PeakSearch::Local {
                sidelobe_margin_db: Some(m),
            };
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangesFile {
    /// `table_ii` or `identification`.
    Preset(String),
    Custom(ScenarioRanges),
}

impl RangesFile {
    pub fn resolve(&self) -> Result<ScenarioRanges> {
        match self {
            RangesFile::Preset(p) if p == "table_ii" => Ok(ScenarioRanges::table_ii()),
            RangesFile::Preset(p) if p == "identification" => Ok(ScenarioRanges::identification()),
            RangesFile::Preset(p) => Err(Error::Config(format!("unknown scenario ranges `{p}`"))),
            RangesFile::Custom(r) => Ok(r.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomScenesFile {
    pub classes: Vec<SceneClass>,
    pub ranges: RangesFile,
    pub snr: SnrSpec,
    #[serde(default)]
    pub radar: RadarConfig,
}

fn all_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

/// Sweep definition as written in TOML. Exactly one of `scene` and `random` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub name: String,
    pub variable: SweptVariable,
    pub grid: Vec<f64>,
    pub trials_per_point: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub pipeline: PipelineFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomScenesFile>,
}

impl SweepFile {
    pub fn to_spec(&self) -> Result<SweepSpec> {
        let source = match (&self.scene, &self.random) {
            (Some(s), None) => SceneSource::Fixed(Box::new(s.to_spec()?)),
            (None, Some(r)) => {
                r.radar.validate()?;
                SceneSource::Random {
                    classes: r.classes.clone(),
                    ranges: r.ranges.resolve()?,
                    snr: r.snr,
                    radar: r.radar.clone(),
                }
            }
            _ => {
                return Err(Error::Config(
                    "sweep needs exactly one of [scene] and [random]".into(),
                ))
            }
        };
        let spec = SweepSpec {
            name: self.name.clone(),
            variable: self.variable,
            grid: self.grid.clone(),
            trials_per_point: self.trials_per_point,
            source,
            metrics: self.metrics.clone(),
            master_seed: self.master_seed,
            pipeline: self.pipeline.to_config()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    toml::from_str::<SweepFile>(text)?.to_spec()
}

pub fn read_sweep(path: &Path) -> Result<SweepSpec> {
    parse_sweep(&std::fs::read_to_string(path)?)
}

/// Fixed header shared by the echo and map binaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryHeader {
    pub magic: [u8; 8],
    pub rows: u32,
    pub cols: u32,
    pub range_step: f64,
    pub seed: u64,
}

impl BinaryHeader {
    fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&self.magic)?;
        w.write_all(&self.rows.to_le_bytes())?;
        w.write_all(&self.cols.to_le_bytes())?;
        w.write_all(&self.range_step.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        Ok(())
    }

    fn read(r: &mut impl Read, expected: &[u8; 8]) -> Result<Self> {
        let mut b = [0u8; HEADER_LEN];
        r.read_exact(&mut b)?;
        let magic: [u8; 8] = b[0..8].try_into().unwrap();
        if &magic != expected {
            return Err(Error::Parse(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(Self {
            magic,
            rows: u32::from_le_bytes(b[8..12].try_into().unwrap()),
            cols: u32::from_le_bytes(b[12..16].try_into().unwrap()),
            range_step: f64::from_le_bytes(b[16..24].try_into().unwrap()),
            seed: u64::from_le_bytes(b[24..32].try_into().unwrap()),
        })
    }
}

fn dims(a: (usize, usize)) -> Result<(u32, u32)> {
    let cast = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Config(format!("dimension {n} exceeds u32")))
    };
    Ok((cast(a.0)?, cast(a.1)?))
}

/// Channel-by-sample echo as little-endian `(re, im)` f64 pairs, row-major.
pub fn write_echo_bin(path: &Path, echo: &RadarEcho) -> Result<()> {
    let (rows, cols) = dims(echo.samples.dim())?;
    let mut w = BufWriter::new(File::create(path)?);
    BinaryHeader {
        magic: *ECHO_MAGIC,
        rows,
        cols,
        range_step: echo.radar.range_bin_size(),
        seed: echo.seed,
    }
    .write(&mut w)?;
    for z in echo.samples.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Parse("trailing bytes after payload".into()));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_echo_bin(path: &Path) -> Result<(BinaryHeader, Array2<Complex64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let h = BinaryHeader::read(&mut r, ECHO_MAGIC)?;
    let (rows, cols) = (h.rows as usize, h.cols as usize);
    let v = read_f64s(&mut r, rows * cols * 2)?;
    let data = v
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    let a = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((h, a))
}

/// Sidecar describing an exported echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoMetadata {
    pub layout: String,
    pub seed: u64,
    pub channels: usize,
    pub samples: usize,
    pub range_bin_m: f64,
    pub noise_variance: f64,
    pub surface_power: f64,
    pub reflectors: usize,
    pub target_status: TargetEchoStatus,
    pub radar: RadarConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneFile>,
}

impl EchoMetadata {
    pub fn new(echo: &RadarEcho, scene: Option<&ScenarioSpec>) -> Self {
        Self {
            layout: "channel-major little-endian f64 (re, im) pairs after a 32-byte header".into(),
            seed: echo.seed,
            channels: echo.samples.nrows(),
            samples: echo.samples.ncols(),
            range_bin_m: echo.radar.range_bin_size(),
            noise_variance: echo.noise_variance(),
            surface_power: echo.surface_power,
            reflectors: echo.reflectors.len(),
            target_status: echo.target_status,
            radar: echo.radar.clone(),
            scene: scene.map(SceneFile::from),
        }
    }
}

pub fn write_echo_metadata(path: &Path, meta: &EchoMetadata) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Range-by-angle magnitudes as little-endian f64, row-major.
pub fn write_map_bin(path: &Path, map: &RangeAngleMap, seed: u64) -> Result<()> {
    let (rows, cols) = dims(map.magnitude.dim())?;
    let mut w = BufWriter::new(File::create(path)?);
    BinaryHeader {
        magic: *MAP_MAGIC,
        rows,
        cols,
        range_step: map.axes.range_step,
        seed,
    }
    .write(&mut w)?;
    for m in map.magnitude.iter() {
        w.write_all(&m.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_map_bin(path: &Path) -> Result<(BinaryHeader, Array2<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let h = BinaryHeader::read(&mut r, MAP_MAGIC)?;
    let (rows, cols) = (h.rows as usize, h.cols as usize);
    let v = read_f64s(&mut r, rows * cols)?;
    let a = Array2::from_shape_vec((rows, cols), v).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((h, a))
}

/// One row per range bin, one column per angle bin.
pub fn write_map_csv(path: &Path, map: &RangeAngleMap) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in map.magnitude.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Binary PGM of the masks: 0 excluded, 128 LOS, 255 NLOS. Rows are range bins.
pub fn write_masks_pgm(path: &Path, masks: &FovMasks) -> Result<()> {
    let (h, wd) = masks.los.dim();
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{wd} {h}\n255\n")?;
    let mut bytes = Vec::with_capacity(h * wd);
    for i in 0..h {
        for j in 0..wd {
            bytes.push(match masks.region(i, j) {
                Region::Los => 128u8,
                Region::Nlos => 255,
                Region::Excluded | Region::Guard => 0,
            });
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const ESTIMATE_HEADER: [&str; 7] = [
    "detected",
    "x_w",
    "y_w",
    "d_w",
    "theta_w",
    "inlier_count",
    "estimator_id",
];

pub fn estimate_row(e: &SurfaceEstimate) -> Vec<String> {
    let f = e.fit.as_ref();
    vec![
        e.detected().to_string(),
        opt(f.map(|f| f.center.x)),
        opt(f.map(|f| f.center.y)),
        opt(f.map(|f| f.length)),
        opt(f.map(|f| f.orientation_deg)),
        f.map(|f| f.inlier_count.to_string())
            .unwrap_or_else(|| "0".into()),
        e.estimator.to_string(),
    ]
}

pub const RESULT_HEADER: [&str; 9] = [
    "hypothesis",
    "x",
    "y",
    "r1",
    "r2",
    "phi_ko",
    "x_true",
    "y_true",
    "class_true",
];

pub fn result_row(
    loc: Option<&LocalizationResult>,
    decision: Option<&HypothesisDecision>,
    truth: Option<Point2>,
    class: Option<SceneClass>,
) -> Vec<String> {
    let hyp = loc.map(|l| l.hypothesis).or(decision.map(|d| d.hypothesis));
    vec![
        hyp.map(|h| h.to_string()).unwrap_or_default(),
        opt(loc.map(|l| l.position.x)),
        opt(loc.map(|l| l.position.y)),
        opt(loc.and_then(|l| l.r1)),
        opt(loc.and_then(|l| l.r2)),
        opt(loc.map(|l| l.angle_deg).or(decision.map(|d| d.angle_deg))),
        opt(truth.map(|t| t.x)),
        opt(truth.map(|t| t.y)),
        class.map(|c| c.as_str().to_string()).unwrap_or_default(),
    ]
}

pub fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate table: one row per grid point, value, standard error and count per metric.
pub fn sweep_csv(result: &SweepResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let metrics: Vec<Metric> = result
        .points
        .first()
        .map(|p| p.metrics.iter().map(|(m, _)| *m).collect())
        .unwrap_or_default();
    let mut header = vec![
        result.variable.as_str().to_string(),
        "trials".into(),
        "failures".into(),
    ];
    for m in &metrics {
        header.extend([m.as_str().to_string(), format!("{m}_se"), format!("{m}_n")]);
    }
    w.write_record(&header)?;
    for p in &result.points {
        let mut row = vec![
            p.value.to_string(),
            p.trials.to_string(),
            p.failures.to_string(),
        ];
        for (_, e) in &p.metrics {
            row.extend([opt(e.value), opt(e.std_error), e.count.to_string()]);
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub const TRIAL_HEADER: [&str; 22] = [
    "value",
    "trial",
    "seed",
    "class",
    "snr_w",
    "snr_t",
    "k_peaks",
    "detected",
    "hypothesis",
    "x",
    "y",
    "x_true",
    "y_true",
    "err_x_w",
    "err_y_w",
    "err_d_w",
    "err_theta_w",
    "err_range",
    "err_phi",
    "err_d",
    "inliers",
    "failure",
];

pub fn trial_row(value: f64, index: usize, r: &TrialRecord) -> Vec<String> {
    let e = &r.errors;
    let fit = r.estimate.as_ref().and_then(|e| e.fit.as_ref());
    vec![
        value.to_string(),
        index.to_string(),
        r.seed.to_string(),
        r.class.as_str().into(),
        r.snr.surface_db.to_string(),
        r.snr.target_db.to_string(),
        r.k_peaks.to_string(),
        r.estimate
            .as_ref()
            .is_some_and(|e| e.detected())
            .to_string(),
        r.hypothesis().map(|h| h.to_string()).unwrap_or_default(),
        opt(r.localization.map(|l| l.position.x)),
        opt(r.localization.map(|l| l.position.y)),
        opt(r.truth_target.map(|t| t.x)),
        opt(r.truth_target.map(|t| t.y)),
        opt(e.x_w),
        opt(e.y_w),
        opt(e.d_w),
        opt(e.theta_w),
        opt(e.range),
        opt(e.phi),
        opt(e.distance),
        fit.map(|f| f.inlier_count.to_string()).unwrap_or_default(),
        r.failure.clone().unwrap_or_default(),
    ]
}

/// Every trial of a sweep, in grid then trial order.
pub fn trials_csv(result: &SweepResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_HEADER)?;
    for (p, recs) in result.points.iter().zip(&result.records) {
        for (i, r) in recs.iter().enumerate() {
            w.write_record(trial_row(p.value, i, r))?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::build_masks;
    use crate::echo::synthesize;
    use crate::ra::compute_ra_map;

    const SCENE: &str = r#"
class = "nlos"
seed = 7

[snr]
surface_db = 30
target_db = 50

[surface]
x = 2.0
y = 18.0
length = 8.0
orientation_deg = 25.0

[target]
phi_ko_deg = 6.3
r2 = 11.9
"#;

    #[test]
    fn scene_file_round_trip() {
        let spec = parse_scene(SCENE).unwrap();
        assert_eq!(spec.radar, RadarConfig::default());
        let s = spec.surface.as_ref().unwrap();
        assert_eq!(
            (
                s.backscatter_ratio,
                s.beamwidth_exponent,
                s.irregularity_sigma
            ),
            (0.846, 14.0, 0.0)
        );
        assert_eq!(spec.seed, 7);
        let again = parse_scene(&scene_to_toml(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn scene_file_rejects_mixed_target() {
        let bad = SCENE.replace("r2 = 11.9", "r2 = 11.9\nx = 1.0");
        assert!(parse_scene(&bad).is_err());
        let unknown = SCENE.replace("seed = 7", "seed = 7\ncolour = 3");
        assert!(parse_scene(&unknown).is_err());
    }

    #[test]
    fn sweep_file_needs_one_source() {
        let head =
            "name = \"s\"\nvariable = \"delta_snr\"\ngrid = [10, 20]\ntrials_per_point = 2\n";
        let scene = SCENE
            .replace("[snr]", "[scene.snr]")
            .replace("[surface]", "[scene.surface]")
            .replace("[target]", "[scene.target]");
        let scene = scene.replace("class = \"nlos\"\nseed = 7\n", "");
        let fixed = format!("{head}[scene]\nclass = \"nlos\"\n{scene}");
        let spec = parse_sweep(&fixed).unwrap();
        assert_eq!(spec.metrics, Metric::ALL.to_vec());
        assert!(matches!(spec.source, SceneSource::Fixed(_)));
        let random = format!(
            "{head}[random]\nclasses = [\"nlos\", \"los_no_surface\"]\nranges = \"identification\"\nsnr = {{ surface_db = 30, target_db = 60 }}\n"
        );
        assert!(matches!(
            parse_sweep(&random).unwrap().source,
            SceneSource::Random { .. }
        ));
        assert!(parse_sweep(head).is_err());
        assert!(parse_sweep(&random.replace("identification", "nowhere")).is_err());
    }

    #[test]
    fn echo_and_map_binaries_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let echo = synthesize(&parse_scene(SCENE).unwrap()).unwrap();
        let p = dir.path().join("e.bin");
        write_echo_bin(&p, &echo).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], ECHO_MAGIC);
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 128 * 16);
        let (h, x) = read_echo_bin(&p).unwrap();
        assert_eq!((h.rows, h.cols, h.seed), (16, 128, 7));
        assert_eq!(x, echo.samples);
        assert!(read_map_bin(&p).is_err());

        let map = compute_ra_map(&echo).unwrap();
        let q = dir.path().join("m.bin");
        write_map_bin(&q, &map, 7).unwrap();
        let (h, m) = read_map_bin(&q).unwrap();
        assert_eq!((h.rows, h.cols), (512, 512));
        assert_eq!(m, map.magnitude);

        let meta = EchoMetadata::new(&echo, None);
        let t = dir.path().join("e.toml");
        write_echo_metadata(&t, &meta).unwrap();
        let back: EchoMetadata = toml::from_str(&std::fs::read_to_string(&t).unwrap()).unwrap();
        assert_eq!(back, meta);
    }

    #[test]
    fn pgm_uses_three_levels() {
        let dir = tempfile::tempdir().unwrap();
        let spec = parse_scene(SCENE).unwrap();
        let map = compute_ra_map(&synthesize(&spec).unwrap()).unwrap();
        let est = SurfaceEstimate::from_truth(spec.surface.as_ref().unwrap());
        let masks = build_masks(&est, &map.axes, 1.0).unwrap();
        let p = dir.path().join("m.pgm");
        write_masks_pgm(&p, &masks).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header = b"P5\n512 512\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        assert_eq!(body.len(), 512 * 512);
        for level in [0u8, 128, 255] {
            assert!(body.contains(&level));
        }
        assert!(body.iter().all(|b| [0, 128, 255].contains(b)));
    }

    #[test]
    fn estimate_row_has_seven_fields() {
        let spec = parse_scene(SCENE).unwrap();
        let row = estimate_row(&SurfaceEstimate::from_truth(spec.surface.as_ref().unwrap()));
        assert_eq!(row.len(), ESTIMATE_HEADER.len());
        assert_eq!(row[0], "true");
        assert_eq!(row[6], "truth");
        let none = estimate_row(&SurfaceEstimate::undetected(EstimatorId::Ransac));
        assert_eq!(none, vec!["false", "", "", "", "", "0", "ransac"]);
    }
}
