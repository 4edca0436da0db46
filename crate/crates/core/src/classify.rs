//! Stage II: field-of-view masks and the LOS / NLOS decision.
//!
//! A cell is NLOS when the straight path from the radar to it crosses the
//! estimated surface (extended by the guard width at both ends). Cells within
//! the guard width of the surface belong to neither region, so the surface
//! ridge itself never wins the decision.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Segment};
use crate::ra::{MapAxes, RangeAngleMap};
use crate::surface::{SurfaceEstimate, SurfaceFit};

pub const DEFAULT_GUARD_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Excluded,
    Guard,
    Los,
    Nlos,
}

/// Estimated surface seen as an obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub center: Point2,
    pub direction: Point2,
    pub half_length: f64,
    pub guard: f64,
}

impl Occluder {
    pub fn from_fit(fit: &SurfaceFit, guard: f64) -> Self {
        let (s, c) = fit.orientation_deg.to_radians().sin_cos();
        Self {
            center: fit.center,
            direction: Point2::new(c, s),
            half_length: fit.length / 2.0,
            guard,
        }
    }

    /// Surface segment lengthened by the guard width at both ends.
    pub fn extended(&self) -> Segment {
        let h = self.direction * (self.half_length + self.guard);
        Segment::new(self.center - h, self.center + h)
    }

    pub fn classify(&self, p: Point2) -> Region {
        let rel = p - self.center;
        let along = self.direction.dot(rel);
        let across = self.direction.cross(rel);
        if across.abs() <= self.guard && along.abs() <= self.half_length + self.guard {
            return Region::Guard;
        }
        if Segment::new(Point2::ORIGIN, p).intersects(&self.extended()) {
            Region::Nlos
        } else {
            Region::Los
        }
    }
}

/// Per-cell region labels, indexed like the range-angle map.
#[derive(Debug, Clone, PartialEq)]
pub struct FovMasks {
    pub los: Array2<bool>,
    pub nlos: Array2<bool>,
    pub guard_m: f64,
}

impl FovMasks {
    pub fn region(&self, i: usize, j: usize) -> Region {
        match (self.los[[i, j]], self.nlos[[i, j]]) {
            (true, _) => Region::Los,
            (_, true) => Region::Nlos,
            _ => Region::Excluded,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.los.iter().chain(self.nlos.iter()).any(|&b| b)
    }
}

pub fn build_masks(estimate: &SurfaceEstimate, axes: &MapAxes, guard_m: f64) -> Result<FovMasks> {
    let fit = estimate.fit.as_ref().ok_or(Error::SurfaceNotDetected)?;
    if !(guard_m >= 0.0) {
        return Err(Error::Config(format!(
            "guard width must be non-negative, got {guard_m}"
        )));
    }
    let occ = Occluder::from_fit(fit, guard_m);
    let shape = (axes.num_range(), axes.num_angle());
    let mut los = Array2::from_elem(shape, false);
    let mut nlos = Array2::from_elem(shape, false);
    for j in (0..axes.num_angle()).filter(|&j| axes.in_fov(j)) {
        for i in 0..axes.num_range() {
            let Some(p) = axes.cell_point(i, j) else {
                continue;
            };
            match occ.classify(p) {
                Region::Los => los[[i, j]] = true,
                Region::Nlos => nlos[[i, j]] = true,
                _ => {}
            }
        }
    }
    Ok(FovMasks { los, nlos, guard_m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Strongest target return arrives directly.
    I0,
    /// Strongest target return arrives via the surface.
    I1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::I0 => "I0",
            Hypothesis::I1 => "I1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisDecision {
    pub hypothesis: Hypothesis,
    pub range_bin: usize,
    pub angle_bin: usize,
    pub range_m: f64,
    pub angle_deg: f64,
    pub magnitude: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub guard_m: f64,
    /// Refine the peak bearing by parabolic interpolation.
    pub refine_angle: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            guard_m: DEFAULT_GUARD_M,
            refine_angle: false,
        }
    }
}

/// Strongest cell inside the union of the two masks.
pub fn masked_argmax(map: &RangeAngleMap, masks: &FovMasks) -> Result<(usize, usize)> {
    map.argmax_where(|i, j| masks.los[[i, j]] || masks.nlos[[i, j]])
        .ok_or(Error::EmptyMask)
}

pub fn decide(estimate: &SurfaceEstimate, map: &RangeAngleMap, guard_m: f64) -> HypothesisDecision {
    decide_with(
        estimate,
        map,
        &ClassifierConfig {
            guard_m,
            ..Default::default()
        },
    )
}

pub fn decide_with(
    estimate: &SurfaceEstimate,
    map: &RangeAngleMap,
    config: &ClassifierConfig,
) -> HypothesisDecision {
    let masked = build_masks(estimate, &map.axes, config.guard_m)
        .ok()
        .and_then(|m| masked_argmax(map, &m).ok().map(|c| (c, m.region(c.0, c.1))));
    let ((i, j), region) = masked.unwrap_or_else(|| {
        (
            map.argmax_fov().unwrap_or((0, map.axes.num_angle() / 2)),
            Region::Los,
        )
    });
    let angle_deg = if config.refine_angle {
        map.refined_angle_deg(i, j)
    } else {
        map.axes.angle_deg(j)
    }
    .unwrap_or(0.0);
    HypothesisDecision {
        hypothesis: if region == Region::Nlos {
            Hypothesis::I1
        } else {
            Hypothesis::I0
        },
        range_bin: i,
        angle_bin: j,
        range_m: map.axes.range_m[i],
        angle_deg,
        magnitude: map.magnitude[[i, j]],
        region,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RadarConfig, ReflectiveSurface};
    use crate::surface::EstimatorId;

    fn wall() -> SurfaceEstimate {
        SurfaceEstimate::from_truth(&ReflectiveSurface::new(Point2::new(0.0, 10.0), 8.0, 0.0))
    }

    #[test]
    fn occluder_regions() {
        let occ = Occluder::from_fit(&wall().fit.unwrap(), 1.0);
        assert_eq!(occ.classify(Point2::new(0.0, 5.0)), Region::Los);
        assert_eq!(occ.classify(Point2::new(0.0, 10.5)), Region::Guard);
        assert_eq!(occ.classify(Point2::new(4.8, 10.0)), Region::Guard);
        assert_eq!(occ.classify(Point2::new(0.0, 15.0)), Region::Nlos);
        assert_eq!(occ.classify(Point2::new(12.0, 15.0)), Region::Los);
        assert_eq!(occ.classify(Point2::ORIGIN), Region::Los);
    }

    #[test]
    fn masks_are_disjoint_and_in_fov() {
        let axes = MapAxes::new(&RadarConfig::default());
        let m = build_masks(&wall(), &axes, 1.0).unwrap();
        assert!(!m.is_empty());
        for ((i, j), &l) in m.los.indexed_iter() {
            assert!(!(l && m.nlos[[i, j]]));
            if l || m.nlos[[i, j]] {
                assert!(axes.in_fov(j));
            }
        }
        assert!(m.los[[0, 256]]);
    }

    #[test]
    fn guard_widening_shrinks_los() {
        let axes = MapAxes::new(&RadarConfig::default());
        let count = |g: f64| {
            build_masks(&wall(), &axes, g)
                .unwrap()
                .los
                .iter()
                .filter(|&&b| b)
                .count()
        };
        assert!(count(2.0) <= count(1.0));
        assert!(count(1.0) <= count(0.0));
    }

    #[test]
    fn masks_require_detection() {
        let axes = MapAxes::new(&RadarConfig::default());
        let e = SurfaceEstimate::undetected(EstimatorId::Ransac);
        assert!(matches!(
            build_masks(&e, &axes, 1.0),
            Err(Error::SurfaceNotDetected)
        ));
    }
}
