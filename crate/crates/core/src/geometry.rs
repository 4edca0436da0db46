//! Planar scene geometry.
//!
//! The radar sits at the origin with boresight along +y. Bearings are measured
//! from +y toward +x, so a point at range `r` and bearing `phi` sits at
//! `(r sin phi, r cos phi)`.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(range: f64, bearing_deg: f64) -> Self {
        let (s, c) = bearing_deg.to_radians().sin_cos();
        Self::new(range * s, range * c)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Bearing of this point seen from the origin, degrees.
    pub fn bearing_deg(self) -> f64 {
        self.x.atan2(self.y).to_degrees()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Closed line segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

fn orientation(p: Point2, q: Point2, r: Point2) -> f64 {
    (q - p).cross(r - p)
}

fn within_box(p: Point2, q: Point2, r: Point2) -> bool {
    r.x >= p.x.min(q.x) - EPS
        && r.x <= p.x.max(q.x) + EPS
        && r.y >= p.y.min(q.y) - EPS
        && r.y <= p.y.max(q.y) + EPS
}

impl Segment {
    pub fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, other: &Segment) -> bool {
        let (p1, p2, q1, q2) = (self.a, self.b, other.a, other.b);
        let scale = [p1, p2, q1, q2]
            .iter()
            .map(|p| p.x.abs().max(p.y.abs()))
            .fold(1.0, f64::max);
        let tol = 1e-12 * scale * scale;
        let sgn = |v: f64| {
            if v > tol {
                1
            } else if v < -tol {
                -1
            } else {
                0
            }
        };
        let d1 = sgn(orientation(q1, q2, p1));
        let d2 = sgn(orientation(q1, q2, p2));
        let d3 = sgn(orientation(p1, p2, q1));
        let d4 = sgn(orientation(p1, p2, q2));
        if d1 * d2 < 0 && d3 * d4 < 0 {
            return true;
        }
        (d1 == 0 && within_box(q1, q2, p1))
            || (d2 == 0 && within_box(q1, q2, p2))
            || (d3 == 0 && within_box(p1, p2, q1))
            || (d4 == 0 && within_box(p1, p2, q2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub num_tx: usize,
    pub num_rx: usize,
    pub num_samples: usize,
    pub bandwidth_hz: f64,
    pub carrier_wavelength: f64,
    pub element_spacing: f64,
    pub fov_half_angle_deg: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let wavelength = SPEED_OF_LIGHT / 77e9;
        Self {
            num_tx: 1,
            num_rx: 16,
            num_samples: 128,
            bandwidth_hz: 400e6,
            carrier_wavelength: wavelength,
            element_spacing: wavelength / 2.0,
            fov_half_angle_deg: 60.0,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tx == 0 || self.num_rx == 0 || self.num_samples == 0 {
            return Err(Error::Config(
                "antenna and sample counts must be positive".into(),
            ));
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_wavelength", self.carrier_wavelength),
            ("element_spacing", self.element_spacing),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.fov_half_angle_deg > 0.0 && self.fov_half_angle_deg <= 90.0) {
            return Err(Error::Config(format!(
                "fov half angle must lie in (0, 90], got {}",
                self.fov_half_angle_deg
            )));
        }
        Ok(())
    }

    /// Range resolution c / (2 BW).
    pub fn range_bin_size(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Unambiguous range window N * range bin.
    pub fn max_range(&self) -> f64 {
        self.num_samples as f64 * self.range_bin_size()
    }

    /// Virtual array size; transmitters are spaced by the full receive aperture.
    pub fn num_channels(&self) -> usize {
        self.num_tx * self.num_rx
    }

    /// Width of one angular resolution cell in sine space.
    pub fn angle_cell_sine(&self) -> f64 {
        self.carrier_wavelength / (self.num_channels() as f64 * self.element_spacing)
    }

    /// Total coherent processing gain in dB.
    pub fn processing_gain_db(&self) -> f64 {
        10.0 * ((self.num_tx * self.num_rx * self.num_samples) as f64).log10()
    }

    pub fn in_fov(&self, p: Point2) -> bool {
        p.y > 0.0 && p.bearing_deg().abs() <= self.fov_half_angle_deg
    }

    /// Coarse (range bin, angle cell) index of a point.
    pub fn resolution_cell(&self, p: Point2) -> (i64, i64) {
        let r = (p.norm() / self.range_bin_size()).round() as i64;
        let a = (p.bearing_deg().to_radians().sin() / self.angle_cell_sine()).round() as i64;
        (r, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectiveSurface {
    pub center: Point2,
    pub length: f64,
    /// Orientation of the surface line relative to +x, degrees.
    pub orientation_deg: f64,
    /// Ratio of forward scattering to incident power.
    pub backscatter_ratio: f64,
    pub beamwidth_exponent: f64,
    /// Standard deviation of the x perturbation applied to each sample point.
    pub irregularity_sigma: f64,
}

impl ReflectiveSurface {
    pub fn new(center: Point2, length: f64, orientation_deg: f64) -> Self {
        Self {
            center,
            length,
            orientation_deg,
            backscatter_ratio: 0.846,
            beamwidth_exponent: 14.0,
            irregularity_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Config(format!(
                "surface length must be positive, got {}",
                self.length
            )));
        }
        if !(self.orientation_deg.abs() < 90.0) {
            return Err(Error::Config(format!(
                "surface orientation must lie in (-90, 90), got {}",
                self.orientation_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.backscatter_ratio) {
            return Err(Error::Config(format!(
                "backscatter ratio must lie in [0, 1], got {}",
                self.backscatter_ratio
            )));
        }
        if !(self.beamwidth_exponent >= 0.0) || !(self.irregularity_sigma >= 0.0) {
            return Err(Error::Config(
                "beamwidth exponent and irregularity must be non-negative".into(),
            ));
        }
        if !self.center.x.is_finite() || !self.center.y.is_finite() {
            return Err(Error::Config("surface center must be finite".into()));
        }
        Ok(())
    }

    pub fn direction(&self) -> Point2 {
        let (s, c) = self.orientation_deg.to_radians().sin_cos();
        Point2::new(c, s)
    }

    pub fn normal(&self) -> Point2 {
        let u = self.direction();
        Point2::new(-u.y, u.x)
    }

    /// y-axis intercept b = y - x tan(theta) of the surface line.
    pub fn intercept(&self) -> f64 {
        self.center.y - self.center.x * self.orientation_deg.to_radians().tan()
    }

    pub fn endpoints(&self) -> (Point2, Point2) {
        let h = self.direction() * (self.length / 2.0);
        (self.center - h, self.center + h)
    }

    pub fn segment(&self) -> Segment {
        let (a, b) = self.endpoints();
        Segment::new(a, b)
    }

    pub fn signed_distance(&self, p: Point2) -> f64 {
        self.normal().dot(p - self.center)
    }

    /// Coordinate of `p` along the surface, measured from the center.
    pub fn along(&self, p: Point2) -> f64 {
        self.direction().dot(p - self.center)
    }

    /// Bearings of the two endpoints seen from the radar, ascending.
    pub fn endpoint_bearings(&self) -> (f64, f64) {
        let (a, b) = self.endpoints();
        let (pa, pb) = (a.bearing_deg(), b.bearing_deg());
        (pa.min(pb), pa.max(pb))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTarget {
    pub position: Point2,
    /// Mean of |sigma|^2 for the target reflection coefficient.
    pub rcs_mean_power: f64,
}

impl PointTarget {
    pub fn new(position: Point2) -> Self {
        Self {
            position,
            rcs_mean_power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub position: Point2,
    pub range: f64,
    pub bearing_deg: f64,
    pub range_bin: usize,
}

impl SurfacePoint {
    pub fn at(position: Point2, radar: &RadarConfig) -> Self {
        let range = position.norm();
        Self {
            position,
            range,
            bearing_deg: position.bearing_deg(),
            range_bin: (range / radar.range_bin_size()).round() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfacePointSet {
    pub points: Vec<SurfacePoint>,
    /// Along-surface spacing of the nominal samples.
    pub spacing: f64,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points sharing the coarse resolution cell `cell`.
    pub fn in_cell(&self, radar: &RadarConfig, cell: (i64, i64)) -> Vec<SurfacePoint> {
        self.points
            .iter()
            .filter(|p| radar.resolution_cell(p.position) == cell)
            .copied()
            .collect()
    }

    /// One effective reflector per occupied coarse resolution cell, placed at
    /// the centroid of the samples in that cell. Order follows the first
    /// sample of each cell along the surface.
    pub fn effective_reflectors(&self, radar: &RadarConfig) -> Vec<SurfacePoint> {
        let mut cells: Vec<((i64, i64), Point2, usize)> = Vec::new();
        for p in &self.points {
            let cell = radar.resolution_cell(p.position);
            match cells.iter_mut().find(|(c, _, _)| *c == cell) {
                Some((_, sum, n)) => {
                    *sum = *sum + p.position;
                    *n += 1;
                }
                None => cells.push((cell, p.position, 1)),
            }
        }
        cells
            .into_iter()
            .map(|(_, sum, n)| SurfacePoint::at(sum * (1.0 / n as f64), radar))
            .collect()
    }
}

/// Sample the surface at spacing no coarser than half a range bin, keeping the
/// samples inside the field of view. With a positive irregularity sigma each
/// sample's x coordinate is perturbed by a Gaussian truncated at three sigma.
pub fn discretize_surface(
    surface: &ReflectiveSurface,
    radar: &RadarConfig,
    seed: u64,
) -> Result<SurfacePointSet> {
    surface.validate()?;
    radar.validate()?;
    let max_step = radar.range_bin_size() / 2.0;
    let intervals = (surface.length / max_step).ceil().max(1.0) as usize;
    let spacing = surface.length / intervals as f64;
    let (start, _) = surface.endpoints();
    let u = surface.direction();
    let sigma = surface.irregularity_sigma;
    let mut rng = stream_rng(seed, Stream::Irregularity);

    let mut points = Vec::with_capacity(intervals + 1);
    for i in 0..=intervals {
        let mut p = start + u * (i as f64 * spacing);
        if sigma > 0.0 {
            p.x += sigma * truncated_normal(&mut rng, 3.0);
        }
        if radar.in_fov(p) {
            points.push(SurfacePoint::at(p, radar));
        }
    }
    if points.is_empty() {
        return Err(Error::EmptySurface);
    }
    Ok(SurfacePointSet { points, spacing })
}

fn truncated_normal<R: Rng>(rng: &mut R, limit: f64) -> f64 {
    loop {
        let v: f64 = StandardNormal.sample(rng);
        if v.abs() <= limit {
            return v;
        }
    }
}

/// Point of specular reflection between a radar and a target on the
/// infinite line through the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrpSolution {
    pub point: Point2,
    pub radar_to_prp: f64,
    pub prp_to_target: f64,
    pub bearing_deg: f64,
    /// Whether the reflection point lies on the finite surface.
    pub on_segment: bool,
}

impl PrpSolution {
    pub fn path_length(&self) -> f64 {
        self.radar_to_prp + self.prp_to_target
    }
}

/// Solve the reflection point by the mirror-image construction: reflect the
/// radar across the surface line and intersect the mirror-to-target segment
/// with the line.
pub fn solve_prp(
    surface: &ReflectiveSurface,
    radar: Point2,
    target: Point2,
) -> Result<PrpSolution> {
    let n = surface.normal();
    let sr = surface.signed_distance(radar);
    let st = surface.signed_distance(target);
    if sr.abs() < 1e-9 {
        return Err(Error::Geometry("radar lies on the surface line".into()));
    }
    if st.abs() < 1e-9 {
        return Err(Error::Geometry("target lies on the surface line".into()));
    }
    if sr * st < 0.0 {
        return Err(Error::Geometry(
            "target and radar lie on opposite sides of the surface".into(),
        ));
    }
    let mirror = radar - n * (2.0 * sr);
    let d = target - mirror;
    let denom = n.dot(d);
    if denom.abs() < EPS {
        return Err(Error::NoSolution(
            "mirror ray is parallel to the surface".into(),
        ));
    }
    let point = mirror + d * (sr / denom);
    Ok(PrpSolution {
        point,
        radar_to_prp: point.distance(radar),
        prp_to_target: target.distance(point),
        bearing_deg: (point - radar).bearing_deg(),
        on_segment: surface.along(point).abs() <= surface.length / 2.0 + 1e-9,
    })
}

/// Target position reached from a radar at the origin by a specular bounce at
/// bearing `phi_ko_deg`, range `r1` to the reflection point and `r2` beyond it
/// on a surface oriented at `theta_deg`.
pub fn ground_truth_target(phi_ko_deg: f64, r1: f64, r2: f64, theta_deg: f64) -> Result<Point2> {
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::Geometry(format!(
            "path ranges must be positive, got {r1} and {r2}"
        )));
    }
    let phi = phi_ko_deg.to_radians();
    let out = 2.0 * theta_deg.to_radians() + phi;
    Ok(Point2::new(
        r1 * phi.sin() + r2 * out.sin(),
        r1 * phi.cos() - r2 * out.cos(),
    ))
}

/// Range from the origin along bearing `phi_deg` to the infinite line through
/// the surface, if the ray meets it in front of the radar.
pub fn ray_to_line(surface: &ReflectiveSurface, phi_deg: f64) -> Option<f64> {
    let n = surface.normal();
    let ray = Point2::from_polar(1.0, phi_deg);
    let denom = n.dot(ray);
    if denom.abs() < EPS {
        return None;
    }
    let t = n.dot(surface.center) / denom;
    (t > 0.0).then_some(t)
}
