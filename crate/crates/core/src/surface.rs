//! Stage I: surface parameter estimation from range-angle map peaks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clean::{clean_peaks, CleanConfig};
use crate::error::{Error, Result};
use crate::geometry::{Point2, ReflectiveSurface};
use crate::ra::{
    extract_peaks_with, to_cartesian, PeakConfig, RangeAngleMap, DEFAULT_EXCLUSION_BINS,
};

/// Line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Line through `point` along the unit vector `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2 {
    pub point: Point2,
    pub direction: Point2,
}

impl Line2 {
    pub fn through(a: Point2, b: Point2) -> Option<Self> {
        let d = b - a;
        let n = d.norm();
        (n > 1e-12).then(|| {
            Line2 {
                point: a,
                direction: d * (1.0 / n),
            }
            .canonical()
        })
    }

    fn from_fit(f: LineFit) -> Self {
        let n = (1.0 + f.slope * f.slope).sqrt();
        Line2 {
            point: Point2::new(0.0, f.intercept),
            direction: Point2::new(1.0 / n, f.slope / n),
        }
    }

    /// Direction flipped into the half plane x > 0 (or +y when vertical).
    fn canonical(self) -> Self {
        let d = self.direction;
        if d.x < 0.0 || (d.x == 0.0 && d.y < 0.0) {
            Line2 {
                direction: -d,
                ..self
            }
        } else {
            self
        }
    }

    pub fn distance(&self, p: Point2) -> f64 {
        self.direction.cross(p - self.point).abs()
    }

    pub fn project(&self, p: Point2) -> f64 {
        self.direction.dot(p - self.point)
    }

    pub fn orientation_deg(&self) -> f64 {
        self.direction.y.atan2(self.direction.x).to_degrees()
    }
}

/// Least-squares fit of y on x through the normal equations of `H = [1, x]`.
pub fn fit_ls(points: &[Point2]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::RankDeficient(format!(
            "{} point(s) cannot define a line",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.x - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.x - mx) * (p.y - my)).sum();
    let scale = points.iter().map(|p| p.x.abs()).fold(1.0, f64::max);
    if sxx <= 1e-24 * n * scale * scale {
        return Err(Error::RankDeficient(
            "all points share one x coordinate".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Least-squares line that falls back to fitting x on y for near-vertical
/// point sets.
pub fn fit_line(points: &[Point2]) -> Result<Line2> {
    if points.len() < 2 {
        return Err(Error::RankDeficient(format!(
            "{} point(s) cannot define a line",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.x - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.y - my).powi(2)).sum();
    if sxx * 100.0 >= syy {
        return fit_ls(points).map(Line2::from_fit);
    }
    let rotated: Vec<Point2> = points.iter().map(|p| Point2::new(p.y, -p.x)).collect();
    let f = fit_ls(&rotated)?;
    let l = Line2::from_fit(f);
    let back = |p: Point2| Point2::new(-p.y, p.x);
    Ok(Line2 {
        point: back(l.point),
        direction: back(l.direction),
    }
    .canonical())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Perpendicular distance below which a point supports a hypothesis.
    pub threshold_m: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            threshold_m: 0.4,
            min_inliers: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub line: Line2,
    pub inliers: Vec<bool>,
}

impl RansacFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

pub fn fit_ransac(points: &[Point2], config: &RansacConfig) -> Result<RansacFit> {
    let n = points.len();
    let need = config.min_inliers.max(2);
    if n < need {
        return Err(Error::NoConsensus {
            min_inliers: config.min_inliers,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(usize, f64, Line2)> = None;
    for _ in 0..config.iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(line) = Line2::through(points[i], points[j]) else {
            continue;
        };
        let (mut count, mut cost) = (0usize, 0.0);
        for &p in points {
            let d = line.distance(p);
            if d <= config.threshold_m {
                count += 1;
                cost += d * d;
            }
        }
        let better = match best {
            None => true,
            Some((c, e, _)) => count > c || (count == c && cost < e),
        };
        if better {
            best = Some((count, cost, line));
        }
    }
    let (count, _, hypothesis) = best.ok_or(Error::NoConsensus {
        min_inliers: config.min_inliers,
    })?;
    if count < need {
        return Err(Error::NoConsensus {
            min_inliers: config.min_inliers,
        });
    }
    let inliers: Vec<bool> = points
        .iter()
        .map(|&p| hypothesis.distance(p) <= config.threshold_m)
        .collect();
    let support: Vec<Point2> = points
        .iter()
        .zip(&inliers)
        .filter(|(_, &k)| k)
        .map(|(&p, _)| p)
        .collect();
    let line = fit_line(&support).unwrap_or(hypothesis);
    Ok(RansacFit { line, inliers })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorId {
    Ls,
    Ransac,
    /// Ground-truth surface parameters handed to later stages.
    Truth,
    Plugin(String),
}

impl EstimatorId {
    pub fn as_str(&self) -> &str {
        match self {
            EstimatorId::Ls => "ls",
            EstimatorId::Ransac => "ransac",
            EstimatorId::Truth => "truth",
            EstimatorId::Plugin(s) => s,
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ls" => EstimatorId::Ls,
            "ransac" => EstimatorId::Ransac,
            "truth" => EstimatorId::Truth,
            "" => return Err(Error::Config("empty estimator id".into())),
            other => EstimatorId::Plugin(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFit {
    pub center: Point2,
    pub length: f64,
    pub orientation_deg: f64,
    pub intercept: f64,
    pub inlier_count: usize,
}

impl SurfaceFit {
    pub fn from_surface(s: &ReflectiveSurface) -> Self {
        Self {
            center: s.center,
            length: s.length,
            orientation_deg: s.orientation_deg,
            intercept: s.intercept(),
            inlier_count: 0,
        }
    }

    pub fn to_surface(&self) -> ReflectiveSurface {
        ReflectiveSurface::new(self.center, self.length, self.orientation_deg)
    }
}

/// Stage I output; `fit` is `None` when no surface was detected.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceEstimate {
    pub estimator: EstimatorId,
    pub fit: Option<SurfaceFit>,
}

impl SurfaceEstimate {
    pub fn undetected(estimator: EstimatorId) -> Self {
        Self {
            estimator,
            fit: None,
        }
    }

    pub fn from_truth(surface: &ReflectiveSurface) -> Self {
        Self {
            estimator: EstimatorId::Truth,
            fit: Some(SurfaceFit::from_surface(surface)),
        }
    }

    pub fn detected(&self) -> bool {
        self.fit.is_some()
    }
}

/// How Stage I picks scatterers off the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakSearch {
    /// Greedy local maxima, optionally dropping sidelobes of stronger ones.
    Local { sidelobe_margin_db: Option<f64> },
    /// Successive subtraction of point responses.
    Clean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOneConfig {
    pub k_peaks: usize,
    pub exclusion_radius: f64,
    pub search: PeakSearch,
    pub ransac: RansacConfig,
    /// Shortest extent accepted as a surface, meters.
    pub min_length: f64,
}

impl Default for StageOneConfig {
    fn default() -> Self {
        Self {
            k_peaks: 35,
            exclusion_radius: DEFAULT_EXCLUSION_BINS,
            search: PeakSearch::Clean,
            ransac: RansacConfig::default(),
            min_length: 1.0,
        }
    }
}

/// Surface parameters from a fitted line and the points supporting it.
pub fn surface_from_line(
    line: &Line2,
    support: &[Point2],
    min_inliers: usize,
    min_length: f64,
) -> Option<SurfaceFit> {
    if support.len() < min_inliers.max(2) {
        return None;
    }
    let (lo, hi) = support
        .iter()
        .map(|&p| line.project(p))
        .fold((f64::MAX, f64::MIN), |(a, b), s| (a.min(s), b.max(s)));
    let length = hi - lo;
    if !(length >= min_length) {
        return None;
    }
    let center = line.point + line.direction * ((lo + hi) / 2.0);
    let orientation_deg = line.orientation_deg();
    Some(SurfaceFit {
        center,
        length,
        orientation_deg,
        intercept: center.y - center.x * orientation_deg.to_radians().tan(),
        inlier_count: support.len(),
    })
}

pub fn estimate_surface(
    map: &RangeAngleMap,
    method: &EstimatorId,
    config: &StageOneConfig,
) -> Result<SurfaceEstimate> {
    let undetected = || Ok(SurfaceEstimate::undetected(method.clone()));
    let found = match config.search {
        PeakSearch::Local { sidelobe_margin_db } => {
            let peak_config = PeakConfig {
                k: config.k_peaks,
                exclusion_radius: config.exclusion_radius,
                sidelobe_margin_db,
            };
            extract_peaks_with(map, &peak_config)
        }
        PeakSearch::Clean => clean_peaks(
            map,
            &CleanConfig {
                exclusion_radius: config.exclusion_radius,
                ..CleanConfig::new(config.k_peaks)
            },
        ),
    };
    let peaks = match found {
        Ok(p) => p,
        Err(Error::TooManyPeaks { .. }) | Err(Error::Config(_)) => return undetected(),
        Err(e) => return Err(e),
    };
    let points = to_cartesian(&peaks);
    let fit = match method {
        EstimatorId::Ls => fit_line(&points).ok().and_then(|l| {
            surface_from_line(&l, &points, config.ransac.min_inliers, config.min_length)
        }),
        EstimatorId::Ransac => fit_ransac(&points, &config.ransac).ok().and_then(|f| {
            let support: Vec<Point2> = points
                .iter()
                .zip(&f.inliers)
                .filter(|(_, &k)| k)
                .map(|(&p, _)| p)
                .collect();
            surface_from_line(
                &f.line,
                &support,
                config.ransac.min_inliers,
                config.min_length,
            )
        }),
        other => {
            return Err(Error::Config(format!(
                "estimator `{other}` is not built in"
            )))
        }
    };
    Ok(SurfaceEstimate {
        estimator: method.clone(),
        fit,
    })
}

/// Interchangeable Stage I implementation.
pub trait SurfaceEstimator: Send + Sync {
    fn id(&self) -> EstimatorId;
    fn estimate(&self, map: &RangeAngleMap) -> Result<SurfaceEstimate>;
}

pub struct LsEstimator(pub StageOneConfig);

pub struct RansacEstimator(pub StageOneConfig);

impl SurfaceEstimator for LsEstimator {
    fn id(&self) -> EstimatorId {
        EstimatorId::Ls
    }
    fn estimate(&self, map: &RangeAngleMap) -> Result<SurfaceEstimate> {
        estimate_surface(map, &EstimatorId::Ls, &self.0)
    }
}

impl SurfaceEstimator for RansacEstimator {
    fn id(&self) -> EstimatorId {
        EstimatorId::Ransac
    }
    fn estimate(&self, map: &RangeAngleMap) -> Result<SurfaceEstimate> {
        estimate_surface(map, &EstimatorId::Ransac, &self.0)
    }
}

/// Estimators keyed by id.
pub struct EstimatorRegistry {
    entries: BTreeMap<EstimatorId, Box<dyn SurfaceEstimator>>,
}

impl EstimatorRegistry {
    pub fn with_builtins(config: StageOneConfig) -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register(Box::new(LsEstimator(config)));
        r.register(Box::new(RansacEstimator(config)));
        r
    }

    pub fn register(&mut self, estimator: Box<dyn SurfaceEstimator>) {
        self.entries.insert(estimator.id(), estimator);
    }

    pub fn get(&self, id: &EstimatorId) -> Option<&dyn SurfaceEstimator> {
        self.entries.get(id).map(|b| b.as_ref())
    }

    pub fn estimate(&self, id: &EstimatorId, map: &RangeAngleMap) -> Result<SurfaceEstimate> {
        self.get(id)
            .ok_or_else(|| Error::Config(format!("no estimator registered as `{id}`")))?
            .estimate(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn collinear(slope: f64, intercept: f64, n: usize) -> Vec<Point2> {
        (0..n)
            .map(|i| {
                let x = i as f64 * 0.37 - 2.0;
                Point2::new(x, intercept + slope * x)
            })
            .collect()
    }

    #[test]
    fn ls_exact_on_collinear() {
        let f = fit_ls(&collinear(0.466, 21.761, 12)).unwrap();
        assert_abs_diff_eq!(f.slope, 0.466, epsilon = 1e-9);
        assert_abs_diff_eq!(f.intercept, 21.761, epsilon = 1e-9);
    }

    #[test]
    fn ls_rank_errors() {
        assert!(matches!(
            fit_ls(&[Point2::new(1.0, 2.0)]),
            Err(Error::RankDeficient(_))
        ));
        let vertical = [
            Point2::new(1.0, 2.0),
            Point2::new(1.0, 5.0),
            Point2::new(1.0, 7.0),
        ];
        assert!(matches!(fit_ls(&vertical), Err(Error::RankDeficient(_))));
        let l = fit_line(&vertical).unwrap();
        assert_abs_diff_eq!(l.orientation_deg().abs(), 90.0, epsilon = 1e-9);
        assert!(vertical.iter().all(|&p| l.distance(p) < 1e-12));
    }

    fn fixture(seed: u64) -> (Vec<Point2>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = collinear(0.3, 15.0, 20);
        let mut mask = vec![true; 20];
        for _ in 0..5 {
            let x: f64 = rng.random_range(-3.0..5.0);
            let off: f64 =
                rng.random_range(3.0..8.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            pts.push(Point2::new(x, 15.0 + 0.3 * x + off));
            mask.push(false);
        }
        (pts, mask)
    }

    #[test]
    fn ransac_recovers_planted_inliers() {
        for seed in 0..50 {
            let (pts, mask) = fixture(seed);
            let fit = fit_ransac(
                &pts,
                &RansacConfig {
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(fit.inliers, mask);
            assert_abs_diff_eq!(
                fit.line.orientation_deg(),
                0.3f64.atan().to_degrees(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn ransac_reports_no_consensus() {
        let scattered = [
            Point2::new(0.0, 0.0),
            Point2::new(5.0, 9.0),
            Point2::new(-4.0, 3.0),
            Point2::new(2.0, -7.0),
            Point2::new(9.0, 1.0),
            Point2::new(-8.0, -8.0),
        ];
        assert!(matches!(
            fit_ransac(&scattered, &RansacConfig::default()),
            Err(Error::NoConsensus { .. })
        ));
        assert!(fit_ransac(&scattered[..3], &RansacConfig::default()).is_err());
    }

    #[test]
    fn surface_from_line_extent() {
        let pts = collinear(0.0, 10.0, 11);
        let l = fit_line(&pts).unwrap();
        let s = surface_from_line(&l, &pts, 5, 1.0).unwrap();
        assert_abs_diff_eq!(s.length, 3.7, epsilon = 1e-9);
        assert_abs_diff_eq!(s.center.x, -0.15, epsilon = 1e-9);
        assert_abs_diff_eq!(s.intercept, 10.0, epsilon = 1e-9);
        assert!(surface_from_line(&l, &pts, 5, 10.0).is_none());
        assert!(surface_from_line(&l, &pts[..3], 5, 1.0).is_none());
    }

    #[test]
    fn estimator_ids_parse() {
        assert_eq!("ls".parse::<EstimatorId>().unwrap(), EstimatorId::Ls);
        assert_eq!(
            "cnn".parse::<EstimatorId>().unwrap(),
            EstimatorId::Plugin("cnn".into())
        );
    }

    proptest! {
        #[test]
        fn ransac_inliers_stable_under_far_outliers(
            slope in -1.0f64..1.0, b in 8.0f64..20.0, seed in 0u64..1000,
            far in prop::collection::vec((-50.0f64..50.0, 30.0f64..80.0), 1..4),
        ) {
            let pts = collinear(slope, b, 15);
            let cfg = RansacConfig { seed, ..Default::default() };
            let base = fit_ransac(&pts, &cfg).unwrap();
            let mut more = pts.clone();
            more.extend(far.iter().map(|&(x, dy)| Point2::new(x, b + slope * x + dy)));
            let ext = fit_ransac(&more, &cfg).unwrap();
            prop_assert_eq!(&ext.inliers[..pts.len()], &base.inliers[..]);
            prop_assert!(ext.inliers[pts.len()..].iter().all(|&k| !k));
        }

        #[test]
        fn intercept_consistent(slope in -1.5f64..1.5, b in -5.0f64..25.0) {
            let pts = collinear(slope, b, 9);
            let l = fit_line(&pts).unwrap();
            let s = surface_from_line(&l, &pts, 2, 0.1).unwrap();
            let recomputed = s.center.y - s.center.x * s.orientation_deg.to_radians().tan();
            prop_assert!((recomputed - s.intercept).abs() < 1e-9);
            prop_assert!((s.intercept - b).abs() < 1e-9);
        }
    }
}
