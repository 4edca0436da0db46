//! Range-angle map formation and peak extraction.
//!
//! The echo is zero padded to 512 x 512. An inverse transform along the
//! sample axis resolves range, a forward transform along the channel axis
//! (shifted so broadside sits at the center column) resolves bearing.

use std::cmp::Ordering;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::echo::{RadarEcho, MAX_TRANSFORM};
use crate::error::{Error, Result};
use crate::geometry::{Point2, RadarConfig};

pub const PADDED: usize = MAX_TRANSFORM;

/// Peaks must exceed the median map magnitude by this many dB.
pub const PEAK_FLOOR_DB: f64 = 12.0;

pub const DEFAULT_EXCLUSION_BINS: f64 = 8.0;

/// Margin above the point response of a stronger peak that a weaker peak
/// must clear to be kept.
pub const DEFAULT_SIDELOBE_MARGIN_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    pub k: usize,
    pub exclusion_radius: f64,
    /// `None` disables sidelobe gating.
    pub sidelobe_margin_db: Option<f64>,
}

impl PeakConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            exclusion_radius: DEFAULT_EXCLUSION_BINS,
            sidelobe_margin_db: Some(DEFAULT_SIDELOBE_MARGIN_DB),
        }
    }
}

/// Envelope of the normalized Dirichlet kernel of an `n`-point transform at
/// an offset of `u` resolution cells.
fn dirichlet_envelope(u: f64, n: usize) -> f64 {
    let s = (std::f64::consts::PI * u / n as f64).sin().abs() * n as f64;
    if s <= 1.0 {
        1.0
    } else {
        1.0 / s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapAxes {
    /// Range of each row, meters.
    pub range_m: Vec<f64>,
    /// Sine of the bearing of each column; magnitudes above one are invisible.
    pub sine: Vec<f64>,
    pub fov_half_angle_deg: f64,
    pub range_step: f64,
    pub coarse_range_bin: f64,
    pub angle_cell_sine: f64,
    /// Unpadded sizes of the sample and channel axes.
    pub num_samples: usize,
    pub num_channels: usize,
}

impl MapAxes {
    pub fn new(radar: &RadarConfig) -> Self {
        let range_step = radar.range_bin_size() * radar.num_samples as f64 / PADDED as f64;
        let half = (PADDED / 2) as f64;
        let scale = radar.carrier_wavelength / radar.element_spacing;
        Self {
            range_m: (0..PADDED).map(|i| i as f64 * range_step).collect(),
            sine: (0..PADDED)
                .map(|j| (j as f64 - half) / PADDED as f64 * scale)
                .collect(),
            fov_half_angle_deg: radar.fov_half_angle_deg,
            range_step,
            coarse_range_bin: radar.range_bin_size(),
            angle_cell_sine: radar.angle_cell_sine(),
            num_samples: radar.num_samples,
            num_channels: radar.num_channels(),
        }
    }

    pub fn num_range(&self) -> usize {
        self.range_m.len()
    }

    pub fn num_angle(&self) -> usize {
        self.sine.len()
    }

    /// Bearing of column `j` in degrees, `None` outside the visible region.
    pub fn angle_deg(&self, j: usize) -> Option<f64> {
        let s = self.sine[j];
        (s.abs() <= 1.0).then(|| s.asin().to_degrees())
    }

    pub fn in_fov(&self, j: usize) -> bool {
        self.angle_deg(j)
            .is_some_and(|a| a.abs() <= self.fov_half_angle_deg + 1e-9)
    }

    pub fn cell_point(&self, i: usize, j: usize) -> Option<Point2> {
        self.angle_deg(j)
            .map(|a| Point2::from_polar(self.range_m[i], a))
    }

    /// Nearest (row, column) to a range and bearing.
    pub fn nearest_cell(&self, range: f64, angle_deg: f64) -> (usize, usize) {
        let i = (range / self.range_step)
            .round()
            .clamp(0.0, (self.num_range() - 1) as f64) as usize;
        let s = angle_deg.to_radians().sin();
        let j = self
            .sine
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - s).abs().total_cmp(&(b.1 - s).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        (i, j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeAngleMap {
    /// Indexed `[range_bin, angle_bin]`.
    pub values: Array2<Complex64>,
    pub magnitude: Array2<f64>,
    pub axes: MapAxes,
    pub windows: MapWindows,
    /// Channel-by-sample input the map was computed from.
    pub samples: Array2<Complex64>,
}

impl RangeAngleMap {
    /// Magnitude in dB relative to the strongest cell.
    pub fn normalized_db(&self) -> Array2<f64> {
        let peak = self.magnitude.iter().copied().fold(0.0, f64::max);
        let peak = if peak > 0.0 { peak } else { 1.0 };
        self.magnitude
            .mapv(|m| 20.0 * (m / peak).max(1e-300).log10())
    }

    /// Strongest in-FOV cell.
    pub fn argmax_fov(&self) -> Option<(usize, usize)> {
        self.argmax_where(|_, j| self.axes.in_fov(j))
    }

    pub fn argmax_where<F: Fn(usize, usize) -> bool>(&self, keep: F) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for ((i, j), &m) in self.magnitude.indexed_iter() {
            if keep(i, j) && best.is_none_or(|(_, b)| m > b) {
                best = Some(((i, j), m));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Bearing of column `j` refined by a parabola through the neighboring
    /// magnitudes of row `i`.
    pub fn refined_angle_deg(&self, i: usize, j: usize) -> Option<f64> {
        let base = self.axes.angle_deg(j)?;
        if j == 0 || j + 1 >= self.axes.num_angle() {
            return Some(base);
        }
        let (l, c, r) = (
            self.magnitude[[i, j - 1]],
            self.magnitude[[i, j]],
            self.magnitude[[i, j + 1]],
        );
        let denom = l - 2.0 * c + r;
        if denom >= 0.0 {
            return Some(base);
        }
        let delta = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        let step = self.axes.sine[1] - self.axes.sine[0];
        let s = self.axes.sine[j] + delta * step;
        Some(if s.abs() <= 1.0 {
            s.asin().to_degrees()
        } else {
            base
        })
    }
}

/// Taper applied along one axis before its transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos()
                })
                .collect(),
        }
    }

    /// Upper envelope of the normalized response at `u` resolution cells from
    /// the peak of an `n`-point transform.
    /// First null of the kernel, in native bins.
    pub fn main_lobe(self) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 2.0,
        }
    }

    pub fn envelope(self, u: f64, n: usize) -> f64 {
        match self {
            Window::Rectangular => dirichlet_envelope(u, n),
            Window::Hann => {
                let u = u.abs();
                if u < 1e-9 {
                    1.0
                } else if (u - 1.0).abs() < 1e-9 {
                    0.5
                } else if u < 2.0 {
                    let x = std::f64::consts::PI * u;
                    (x.sin() / x / (1.0 - u * u)).abs()
                } else {
                    1.0 / (std::f64::consts::PI * u * (u * u - 1.0))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MapWindows {
    pub range: Window,
    pub angle: Window,
}

pub fn compute_ra_map(echo: &RadarEcho) -> Result<RangeAngleMap> {
    compute_ra_map_from(&echo.samples, &echo.radar)
}

pub fn compute_ra_map_from(
    samples: &Array2<Complex64>,
    radar: &RadarConfig,
) -> Result<RangeAngleMap> {
    compute_ra_map_windowed(samples, radar, MapWindows::default())
}

pub fn compute_ra_map_windowed(
    samples: &Array2<Complex64>,
    radar: &RadarConfig,
    windows: MapWindows,
) -> Result<RangeAngleMap> {
    let values = transform(samples, windows)?;
    let magnitude = values.mapv(|z| z.norm());
    Ok(RangeAngleMap {
        values,
        magnitude,
        axes: MapAxes::new(radar),
        windows,
        samples: samples.clone(),
    })
}

/// Zero-padded 2D transform of channel-by-sample data, laid out like the map.
pub(crate) fn transform(
    samples: &Array2<Complex64>,
    windows: MapWindows,
) -> Result<Array2<Complex64>> {
    let (rows, cols) = samples.dim();
    if rows > PADDED || cols > PADDED {
        return Err(Error::DimensionOverflow {
            rows,
            cols,
            limit: PADDED,
        });
    }
    let wr = windows.range.weights(cols);
    let wa = windows.angle.weights(rows);
    let mut planner = FftPlanner::<f64>::new();
    let inverse = planner.plan_fft_inverse(PADDED);
    let forward = planner.plan_fft_forward(PADDED);

    let mut ranged = vec![vec![Complex64::new(0.0, 0.0); PADDED]; rows];
    for (row, buf) in samples.rows().into_iter().zip(ranged.iter_mut()) {
        for ((b, &x), &w) in buf.iter_mut().zip(row.iter()).zip(&wr) {
            *b = x * w;
        }
        inverse.process(buf);
    }

    let half = PADDED / 2;
    let mut values = Array2::zeros((PADDED, PADDED));
    let mut buf = vec![Complex64::new(0.0, 0.0); PADDED];
    for i in 0..PADDED {
        buf.fill(Complex64::new(0.0, 0.0));
        for ((b, r), &w) in buf.iter_mut().zip(&ranged).zip(&wa) {
            *b = r[i] * w;
        }
        forward.process(&mut buf);
        let mut out = values.row_mut(i);
        for (j, v) in out.iter_mut().enumerate() {
            *v = buf[(j + half) % PADDED];
        }
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub range_bin: usize,
    pub angle_bin: usize,
    pub magnitude: f64,
    pub range_m: f64,
    pub angle_deg: f64,
}

impl Peak {
    pub fn position(&self) -> Point2 {
        Point2::from_polar(self.range_m, self.angle_deg)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f64::total_cmp).1
}

fn is_local_max(mag: &Array2<f64>, i: usize, j: usize) -> bool {
    let (n, m) = mag.dim();
    let c = mag[[i, j]];
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a < 0 || b < 0 || a >= n as i64 || b >= m as i64 {
                continue;
            }
            if mag[[a as usize, b as usize]] > c {
                return false;
            }
        }
    }
    true
}

/// Up to `k` in-FOV local maxima, strongest first, each at least
/// `exclusion_radius` bins from every stronger pick and above the noise floor.
pub fn extract_peaks(map: &RangeAngleMap, k: usize, exclusion_radius: f64) -> Result<Vec<Peak>> {
    extract_peaks_with(
        map,
        &PeakConfig {
            exclusion_radius,
            ..PeakConfig::new(k)
        },
    )
}

/// As [`extract_peaks`], additionally dropping candidates that do not rise
/// above the point response of any stronger local maximum, so the range and angle
/// sidelobes of a strong return are not mistaken for scatterers.
pub fn extract_peaks_with(map: &RangeAngleMap, config: &PeakConfig) -> Result<Vec<Peak>> {
    let (k, exclusion_radius) = (config.k, config.exclusion_radius);
    let cells = map.magnitude.len();
    if k == 0 {
        return Err(Error::Config("peak count must be at least one".into()));
    }
    if k > cells {
        return Err(Error::TooManyPeaks {
            requested: k,
            cells,
        });
    }
    let axes = &map.axes;
    let fov_cols: Vec<usize> = (0..axes.num_angle()).filter(|&j| axes.in_fov(j)).collect();
    let floor = median(
        map.magnitude
            .rows()
            .into_iter()
            .flat_map(|row| fov_cols.iter().map(move |&j| row[j]))
            .collect(),
    ) * 10f64.powf(PEAK_FLOOR_DB / 20.0);

    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..axes.num_range() {
        for &j in &fov_cols {
            let m = map.magnitude[[i, j]];
            if m > floor && is_local_max(&map.magnitude, i, j) {
                candidates.push((i, j, m));
            }
        }
    }
    candidates.sort_by(|a, b| match b.2.total_cmp(&a.2) {
        Ordering::Equal => (a.0, a.1).cmp(&(b.0, b.1)),
        o => o,
    });

    let r2 = exclusion_radius * exclusion_radius;
    let gate = config.sidelobe_margin_db.map(|db| 10f64.powf(db / 20.0));
    let (range_scale, angle_scale) = (
        axes.num_samples as f64 / axes.num_range() as f64,
        axes.num_channels as f64 / axes.num_angle() as f64,
    );
    let (rw, aw) = (map.windows.range, map.windows.angle);
    // a local maximum inside another main lobe is a separate scatterer
    let sidelobe_of = |parent: &(usize, usize, f64), i: usize, j: usize, m: f64, g: f64| {
        let ur = (parent.0 as f64 - i as f64) * range_scale;
        let ua = (parent.1 as f64 - j as f64) * angle_scale;
        if ur.abs() < rw.main_lobe() && ua.abs() < aw.main_lobe() {
            return false;
        }
        let er = rw.envelope(ur, axes.num_samples);
        if m > parent.2 * er * g {
            return false;
        }
        m <= parent.2 * er * aw.envelope(ua, axes.num_channels) * g
    };
    let mut picked: Vec<Peak> = Vec::with_capacity(k);
    for (n, &(i, j, m)) in candidates.iter().enumerate() {
        if picked.len() == k {
            break;
        }
        let crowded = picked.iter().any(|p| {
            let (di, dj) = (p.range_bin as f64 - i as f64, p.angle_bin as f64 - j as f64);
            di * di + dj * dj < r2
        });
        if crowded {
            continue;
        }
        if let Some(g) = gate {
            if candidates[..n].iter().any(|c| sidelobe_of(c, i, j, m, g)) {
                continue;
            }
        }
        picked.push(Peak {
            range_bin: i,
            angle_bin: j,
            magnitude: m,
            range_m: axes.range_m[i],
            angle_deg: axes.angle_deg(j).unwrap_or(0.0),
        });
    }
    Ok(picked)
}

pub fn to_cartesian(peaks: &[Peak]) -> Vec<Point2> {
    peaks.iter().map(Peak::position).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{virtual_steering, WaveformConfig};
    use crate::geometry::SPEED_OF_LIGHT;
    use approx::assert_abs_diff_eq;

    fn single(radar: &RadarConfig, range: f64, bearing: f64, amp: f64) -> Array2<Complex64> {
        let w = WaveformConfig::for_radar(radar);
        let beat = w.beat(2.0 * range / SPEED_OF_LIGHT);
        let steer = virtual_steering(radar, bearing, bearing);
        Array2::from_shape_fn((radar.num_channels(), radar.num_samples), |(c, n)| {
            steer[c] * beat[n] * amp
        })
    }

    #[test]
    fn axes_match_radar() {
        let radar = RadarConfig::default();
        let a = MapAxes::new(&radar);
        assert_abs_diff_eq!(a.range_m[4], radar.range_bin_size(), epsilon = 1e-12);
        assert_abs_diff_eq!(a.sine[256], 0.0);
        assert_abs_diff_eq!(a.sine[384], 0.5, epsilon = 1e-12);
        assert_eq!(a.angle_deg(0), Some(-90.0));
        assert!(a.in_fov(256) && !a.in_fov(10));
    }

    #[test]
    fn on_grid_scatterer_peaks_at_its_cell() {
        let radar = RadarConfig::default();
        let r = 40.0 * radar.range_bin_size();
        let bearing = 30.0;
        let map = compute_ra_map_from(&single(&radar, r, bearing, 1.0), &radar).unwrap();
        let (i, j) = map.argmax_fov().unwrap();
        assert_eq!((i, j), (160, 384));
        let expected = (radar.num_channels() * radar.num_samples) as f64;
        assert_abs_diff_eq!(map.magnitude[[i, j]], expected, epsilon = 1e-6);
    }

    #[test]
    fn parseval_holds() {
        let radar = RadarConfig::default();
        let x = &single(&radar, 12.3, -17.0, 0.7) + &single(&radar, 30.1, 41.0, 1.3);
        let map = compute_ra_map_from(&x, &radar).unwrap();
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ez: f64 = map.values.iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(ez / (ex * (PADDED * PADDED) as f64), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn oversize_echo_rejected() {
        let radar = RadarConfig::default();
        let x = Array2::<Complex64>::zeros((513, 128));
        assert!(matches!(
            compute_ra_map_from(&x, &radar),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn peaks_are_ordered_and_separated() {
        let radar = RadarConfig::default();
        let x = &(&single(&radar, 12.0, -20.0, 1.0) + &single(&radar, 20.0, 10.0, 2.0))
            + &single(&radar, 30.0, 35.0, 0.5);
        let map = compute_ra_map_from(&x, &radar).unwrap();
        let peaks = extract_peaks(&map, 3, DEFAULT_EXCLUSION_BINS).unwrap();
        assert_eq!(peaks.len(), 3);
        assert!(peaks.windows(2).all(|w| w[0].magnitude >= w[1].magnitude));
        assert!((peaks[0].range_m - 20.0).abs() < 0.2 && (peaks[0].angle_deg - 10.0).abs() < 1.0);
        for a in &peaks {
            for b in &peaks {
                if a != b {
                    let d = ((a.range_bin as f64 - b.range_bin as f64).powi(2)
                        + (a.angle_bin as f64 - b.angle_bin as f64).powi(2))
                    .sqrt();
                    assert!(d >= DEFAULT_EXCLUSION_BINS);
                }
            }
        }
        assert!(matches!(
            extract_peaks(&map, PADDED * PADDED + 1, 8.0),
            Err(Error::TooManyPeaks { .. })
        ));
        let p = to_cartesian(&peaks[..1]);
        assert!((p[0].distance(Point2::from_polar(20.0, 10.0))) < 0.5);
    }

    #[test]
    fn refinement_moves_toward_true_bearing() {
        let radar = RadarConfig::default();
        let map = compute_ra_map_from(&single(&radar, 20.0, 7.3, 1.0), &radar).unwrap();
        let (i, j) = map.argmax_fov().unwrap();
        let coarse = map.axes.angle_deg(j).unwrap();
        let fine = map.refined_angle_deg(i, j).unwrap();
        assert!((fine - 7.3).abs() <= (coarse - 7.3).abs() + 1e-9);
    }
}
