//! Scene descriptions and randomized scene generation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    ground_truth_target, ray_to_line, solve_prp, Point2, PointTarget, PrpSolution, RadarConfig,
    ReflectiveSurface, Segment,
};
use crate::rng::{stream_rng, Stream};

/// Clearance kept between a visible target and the surface.
pub const VISIBILITY_CLEARANCE_M: f64 = 1.0;

const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneClass {
    Nlos,
    LosNoSurface,
    LosWithSurfaceNoMp,
    LosWithSurfaceMp,
}

impl SceneClass {
    pub const ALL: [SceneClass; 4] = [
        SceneClass::Nlos,
        SceneClass::LosNoSurface,
        SceneClass::LosWithSurfaceNoMp,
        SceneClass::LosWithSurfaceMp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SceneClass::Nlos => "nlos",
            SceneClass::LosNoSurface => "los_no_surface",
            SceneClass::LosWithSurfaceNoMp => "los_with_surface_no_mp",
            SceneClass::LosWithSurfaceMp => "los_with_surface_mp",
        }
    }

    pub fn is_nlos(self) -> bool {
        self == SceneClass::Nlos
    }

    pub fn has_surface(self) -> bool {
        self != SceneClass::LosNoSurface
    }
}

impl fmt::Display for SceneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SceneClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scene class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub surface_db: f64,
    pub target_db: f64,
}

impl SnrSpec {
    pub fn delta_db(&self) -> f64 {
        self.target_db - self.surface_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSpec {
    Position(PointTarget),
    /// Target placed by a specular bounce at bearing `phi_ko_deg`, `r2` meters
    /// beyond the reflection point.
    Specular {
        phi_ko_deg: f64,
        r2: f64,
        rcs_mean_power: f64,
    },
}

impl TargetSpec {
    pub fn rcs_mean_power(&self) -> f64 {
        match self {
            TargetSpec::Position(t) => t.rcs_mean_power,
            TargetSpec::Specular { rcs_mean_power, .. } => *rcs_mean_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub radar: RadarConfig,
    pub surface: Option<ReflectiveSurface>,
    pub target: Option<TargetSpec>,
    pub snr: SnrSpec,
    pub class: SceneClass,
    pub seed: u64,
    pub tx_amplitude: f64,
}

/// Quantities derived from a scenario that the pipeline output is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTruth {
    pub target: Option<Point2>,
    /// Specular reflection point between radar and target, when both a surface
    /// and a target are present and the geometry admits one.
    pub prp: Option<PrpSolution>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        if let Some(s) = &self.surface {
            s.validate()?;
        }
        if self.class.has_surface() != self.surface.is_some() {
            return Err(Error::Config(format!(
                "scene class {} {} a surface",
                self.class,
                if self.class.has_surface() {
                    "requires"
                } else {
                    "forbids"
                }
            )));
        }
        if self.class.is_nlos() && self.target.is_none() {
            return Err(Error::Config("nlos scene requires a target".into()));
        }
        if let Some(TargetSpec::Specular { r2, .. }) = self.target {
            if self.surface.is_none() {
                return Err(Error::Config(
                    "specular target placement requires a surface".into(),
                ));
            }
            if !(r2 > 0.0) {
                return Err(Error::Config(format!("r2 must be positive, got {r2}")));
            }
        }
        if let Some(t) = &self.target {
            if !(t.rcs_mean_power() > 0.0) {
                return Err(Error::Config(
                    "target rcs mean power must be positive".into(),
                ));
            }
        }
        if !(self.tx_amplitude > 0.0 && self.tx_amplitude.is_finite()) {
            return Err(Error::Config("transmit amplitude must be positive".into()));
        }
        if !self.snr.surface_db.is_finite() || !self.snr.target_db.is_finite() {
            return Err(Error::Config("SNR levels must be finite".into()));
        }
        Ok(())
    }

    pub fn target_position(&self) -> Result<Option<Point2>> {
        match self.target {
            None => Ok(None),
            Some(TargetSpec::Position(t)) => Ok(Some(t.position)),
            Some(TargetSpec::Specular { phi_ko_deg, r2, .. }) => {
                let s = self.surface.as_ref().ok_or_else(|| {
                    Error::Config("specular target placement requires a surface".into())
                })?;
                let r1 = ray_to_line(s, phi_ko_deg).ok_or_else(|| {
                    Error::Geometry(format!(
                        "bearing {phi_ko_deg} deg does not meet the surface line"
                    ))
                })?;
                ground_truth_target(phi_ko_deg, r1, r2, s.orientation_deg).map(Some)
            }
        }
    }

    pub fn truth(&self) -> Result<SceneTruth> {
        let target = self.target_position()?;
        let prp = match (&self.surface, target) {
            (Some(s), Some(t)) => solve_prp(s, Point2::ORIGIN, t).ok(),
            _ => None,
        };
        Ok(SceneTruth { target, prp })
    }
}

/// True when the straight path from the radar to `p` crosses the surface.
pub fn is_shadowed(surface: &ReflectiveSurface, p: Point2) -> bool {
    Segment::new(Point2::ORIGIN, p).intersects(&surface.segment())
}

/// True when `p` lies within `clearance` of the finite surface.
pub fn near_surface(surface: &ReflectiveSurface, p: Point2, clearance: f64) -> bool {
    surface.signed_distance(p).abs() <= clearance
        && surface.along(p).abs() <= surface.length / 2.0 + clearance
}

/// Sampling ranges for randomized scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRanges {
    pub x_w: (f64, f64),
    pub y_w: (f64, f64),
    pub theta_deg: (f64, f64),
    pub length: (f64, f64),
    pub r2: (f64, f64),
    /// Multipliers applied to the near and far endpoint bearings before drawing
    /// the specular bearing; `None` draws over the full angular extent.
    pub bearing_shrink: Option<(f64, f64)>,
    pub surface_snr_db: (f64, f64),
    pub target_snr_db: (f64, f64),
}

impl ScenarioRanges {
    /// Training-set distribution.
    pub fn table_ii() -> Self {
        Self {
            x_w: (0.0, 6.0),
            y_w: (8.0, 22.0),
            theta_deg: (1.0, 46.0),
            length: (1.0, 13.0),
            r2: (6.0, 11.0),
            bearing_shrink: None,
            surface_snr_db: (0.0, 70.0),
            target_snr_db: (0.0, 80.0),
        }
    }

    /// Evaluation distribution used for the identification experiments.
    pub fn identification() -> Self {
        Self {
            x_w: (0.0, 6.0),
            y_w: (12.0, 22.0),
            theta_deg: (1.0, 45.0),
            length: (4.0, 12.0),
            r2: (7.0, 18.0),
            bearing_shrink: Some((1.25, 0.75)),
            surface_snr_db: (0.0, 70.0),
            target_snr_db: (0.0, 80.0),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Randomized scene of class `class` under the training-set distribution.
pub fn randomize_scenario(class: SceneClass, seed: u64) -> Result<ScenarioSpec> {
    randomize_scenario_with(
        class,
        seed,
        &ScenarioRanges::table_ii(),
        &RadarConfig::default(),
    )
}

pub fn randomize_scenario_with(
    class: SceneClass,
    seed: u64,
    ranges: &ScenarioRanges,
    radar: &RadarConfig,
) -> Result<ScenarioSpec> {
    radar.validate()?;
    let mut rng = stream_rng(seed, Stream::Scenario);
    let window = radar.max_range() - 2.0 * radar.range_bin_size();
    for _ in 0..MAX_ATTEMPTS {
        let snr = SnrSpec {
            surface_db: uniform(&mut rng, ranges.surface_snr_db),
            target_db: uniform(&mut rng, ranges.target_snr_db),
        };
        let base = ScenarioSpec {
            radar: radar.clone(),
            surface: None,
            target: None,
            snr,
            class,
            seed,
            tx_amplitude: 1.0,
        };

        if class == SceneClass::LosNoSurface {
            let range = uniform(&mut rng, (6.0, 0.9 * radar.max_range()));
            let bearing = uniform(
                &mut rng,
                (-radar.fov_half_angle_deg, radar.fov_half_angle_deg),
            );
            let p = Point2::from_polar(range, bearing);
            if !radar.in_fov(p) {
                continue;
            }
            return Ok(ScenarioSpec {
                target: Some(TargetSpec::Position(PointTarget::new(p))),
                ..base
            });
        }

        let center = Point2::new(uniform(&mut rng, ranges.x_w), uniform(&mut rng, ranges.y_w));
        let surface = ReflectiveSurface::new(
            center,
            uniform(&mut rng, ranges.length),
            uniform(&mut rng, ranges.theta_deg),
        );
        let (a, b) = surface.endpoints();
        if !(radar.in_fov(a) && radar.in_fov(b)) || a.norm().max(b.norm()) > window {
            continue;
        }

        let (e1, e2) = surface.endpoint_bearings();
        let (lo, hi) = match ranges.bearing_shrink {
            Some((near, far)) => {
                let lo = (near * e1).clamp(e1, e2);
                let hi = (far * e2).clamp(e1, e2);
                if lo < hi {
                    (lo, hi)
                } else {
                    (e1, e2)
                }
            }
            None => (e1, e2),
        };
        for _ in 0..MAX_ATTEMPTS {
            if let Some(spec) =
                place_target(&mut rng, &surface, class, (lo, hi), ranges, window, &base)
            {
                return Ok(spec);
            }
        }
    }
    Err(Error::Config(format!(
        "no valid {class} scene after {MAX_ATTEMPTS} attempts"
    )))
}

fn place_target<R: Rng>(
    rng: &mut R,
    surface: &ReflectiveSurface,
    class: SceneClass,
    bearings: (f64, f64),
    ranges: &ScenarioRanges,
    window: f64,
    base: &ScenarioSpec,
) -> Option<ScenarioSpec> {
    let phi = uniform(rng, bearings);
    let r2 = uniform(rng, ranges.r2);
    let r1 = ray_to_line(surface, phi)?;
    if r1 + r2 > window {
        return None;
    }
    let target = ground_truth_target(phi, r1, r2, surface.orientation_deg).ok()?;
    if !base.radar.in_fov(target) {
        return None;
    }
    let placed = match class {
        SceneClass::Nlos => TargetSpec::Specular {
            phi_ko_deg: phi,
            r2,
            rcs_mean_power: 1.0,
        },
        _ => {
            if is_shadowed(surface, target)
                || near_surface(surface, target, VISIBILITY_CLEARANCE_M)
                || target.norm() > window
            {
                return None;
            }
            TargetSpec::Position(PointTarget::new(target))
        }
    };
    Some(ScenarioSpec {
        surface: Some(surface.clone()),
        target: Some(placed),
        ..base.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_names_round_trip() {
        for c in SceneClass::ALL {
            assert_eq!(c.as_str().parse::<SceneClass>().unwrap(), c);
        }
        assert!("ghost".parse::<SceneClass>().is_err());
    }

    #[test]
    fn same_seed_same_scene() {
        for c in SceneClass::ALL {
            assert_eq!(
                randomize_scenario(c, 11).unwrap(),
                randomize_scenario(c, 11).unwrap()
            );
        }
        assert_ne!(
            randomize_scenario(SceneClass::Nlos, 11).unwrap(),
            randomize_scenario(SceneClass::Nlos, 12).unwrap()
        );
    }

    #[test]
    fn randomized_scenes_respect_bounds() {
        let ranges = ScenarioRanges::table_ii();
        let mut sum = 0.0;
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        let n = 10_000;
        for seed in 0..n {
            let spec = randomize_scenario(SceneClass::Nlos, seed).unwrap();
            spec.validate().unwrap();
            let s = spec.surface.unwrap();
            assert!((ranges.x_w.0..=ranges.x_w.1).contains(&s.center.x));
            assert!((ranges.y_w.0..=ranges.y_w.1).contains(&s.center.y));
            assert!((ranges.length.0..=ranges.length.1).contains(&s.length));
            assert!((0.0..=70.0).contains(&spec.snr.surface_db));
            assert!((0.0..=80.0).contains(&spec.snr.target_db));
            let Some(TargetSpec::Specular { phi_ko_deg, r2, .. }) = spec.target else {
                panic!()
            };
            assert!((6.0..=11.0).contains(&r2));
            let (e1, e2) = s.endpoint_bearings();
            assert!(phi_ko_deg >= e1 - 1e-9 && phi_ko_deg <= e2 + 1e-9);
            sum += s.orientation_deg;
            lo = lo.min(s.orientation_deg);
            hi = hi.max(s.orientation_deg);
        }
        assert!(lo >= 1.0 && hi <= 46.0);
        assert!((sum / n as f64 - 23.5).abs() < 1.0);
    }

    #[test]
    fn specular_target_reflects_on_surface() {
        for seed in 0..200 {
            let spec = randomize_scenario(SceneClass::Nlos, seed).unwrap();
            let truth = spec.truth().unwrap();
            let prp = truth.prp.unwrap();
            assert!(prp.on_segment);
            let Some(TargetSpec::Specular { phi_ko_deg, r2, .. }) = spec.target else {
                panic!()
            };
            assert!((prp.bearing_deg - phi_ko_deg).abs() < 1e-6);
            assert!((prp.prp_to_target - r2).abs() < 1e-6);
        }
    }

    #[test]
    fn los_with_surface_targets_are_visible() {
        for class in [SceneClass::LosWithSurfaceNoMp, SceneClass::LosWithSurfaceMp] {
            for seed in 0..200 {
                let spec = randomize_scenario(class, seed).unwrap();
                let s = spec.surface.as_ref().unwrap();
                let t = spec.target_position().unwrap().unwrap();
                assert!(!is_shadowed(s, t));
                assert!(spec.radar.in_fov(t));
            }
        }
    }

    #[test]
    fn los_no_surface_has_no_surface() {
        let spec = randomize_scenario(SceneClass::LosNoSurface, 5).unwrap();
        assert!(spec.surface.is_none());
        spec.validate().unwrap();
    }

    #[test]
    fn identification_bearing_is_shrunk() {
        let ranges = ScenarioRanges::identification();
        let radar = RadarConfig::default();
        for seed in 0..300 {
            let spec = randomize_scenario_with(SceneClass::Nlos, seed, &ranges, &radar).unwrap();
            let s = spec.surface.unwrap();
            assert!((4.0..=12.0).contains(&s.length));
            let Some(TargetSpec::Specular { phi_ko_deg, r2, .. }) = spec.target else {
                panic!()
            };
            assert!((7.0..=18.0).contains(&r2));
            let (e1, e2) = s.endpoint_bearings();
            assert!(phi_ko_deg >= e1 - 1e-9 && phi_ko_deg <= e2 + 1e-9);
        }
    }
}
