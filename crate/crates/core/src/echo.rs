//! FMCW beat-signal synthesis for a uniform linear array.
//!
//! Each propagation path contributes `amplitude * steering ⊗ beat(tau)` to the
//! channel-by-sample echo matrix. The surface is modeled as one effective
//! reflector per coarse resolution cell. The target return is a double sum
//! over the surface points that illuminate the target: the specular
//! reflection point plus the samples sharing its resolution cell.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    discretize_surface, Point2, PrpSolution, RadarConfig, ReflectiveSurface, SurfacePoint,
    SurfacePointSet, SPEED_OF_LIGHT,
};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{ScenarioSpec, SceneClass};

/// Range at which the surface path loss is unity.
pub const REFERENCE_RANGE_M: f64 = 10.0;

/// Largest echo dimension accepted by the range-angle transform.
pub const MAX_TRANSFORM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub chirp_duration: f64,
    pub bandwidth_hz: f64,
    pub num_samples: usize,
}

impl WaveformConfig {
    pub fn for_radar(radar: &RadarConfig) -> Self {
        Self {
            chirp_duration: 40e-6,
            bandwidth_hz: radar.bandwidth_hz,
            num_samples: radar.num_samples,
        }
    }

    pub fn slope(&self) -> f64 {
        self.bandwidth_hz / self.chirp_duration
    }

    /// Beat samples for round-trip delay `tau`. The tone sits at range bin
    /// `bandwidth * tau`, i.e. at `c tau / 2` meters.
    pub fn beat(&self, tau: f64) -> Vec<Complex64> {
        let residual = PI * self.slope() * tau * tau;
        let step = -2.0 * PI * self.bandwidth_hz * tau / self.num_samples as f64;
        (0..self.num_samples)
            .map(|n| Complex64::from_polar(1.0, residual + step * n as f64))
            .collect()
    }
}

/// Receive steering vector of an `num_elements` ULA toward `bearing_deg`.
pub fn steering_vector(
    bearing_deg: f64,
    num_elements: usize,
    spacing: f64,
    wavelength: f64,
) -> Vec<Complex64> {
    let k = 2.0 * PI * spacing / wavelength * bearing_deg.to_radians().sin();
    (0..num_elements)
        .map(|m| Complex64::from_polar(1.0, k * m as f64))
        .collect()
}

/// Virtual-array response for a path leaving at `tx_bearing_deg` and
/// returning from `rx_bearing_deg`. Channel `t * num_rx + r` pairs
/// transmitter `t` with receiver `r`.
pub fn virtual_steering(
    radar: &RadarConfig,
    tx_bearing_deg: f64,
    rx_bearing_deg: f64,
) -> Vec<Complex64> {
    let k = 2.0 * PI * radar.element_spacing / radar.carrier_wavelength;
    let st = tx_bearing_deg.to_radians().sin();
    let sr = rx_bearing_deg.to_radians().sin();
    let mut out = Vec::with_capacity(radar.num_channels());
    for t in 0..radar.num_tx {
        for r in 0..radar.num_rx {
            out.push(Complex64::from_polar(
                1.0,
                k * (st * (t * radar.num_rx) as f64 + sr * r as f64),
            ));
        }
    }
    out
}

fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Amplitude gain of forward scattering off a surface oriented at
/// `theta_deg`, for a wave travelling along `incoming_bearing_deg` and leaving
/// along `scatter_bearing_deg`. The squared gain is
/// `lambda^2 ((1 + cos d) / 2)^psi` with `d` the deviation from the specular
/// direction.
pub fn scattering_gain(
    incoming_bearing_deg: f64,
    scatter_bearing_deg: f64,
    theta_deg: f64,
    lambda: f64,
    psi: f64,
) -> f64 {
    let specular = 180.0 - 2.0 * theta_deg - incoming_bearing_deg;
    let d = wrap_deg(scatter_bearing_deg - specular).to_radians();
    lambda * ((1.0 + d.cos()) / 2.0).powf(psi / 2.0)
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn unit_phasor<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

fn add_path(
    out: &mut Array2<Complex64>,
    amplitude: Complex64,
    steering: &[Complex64],
    beat: &[Complex64],
) {
    for (mut row, &s) in out.rows_mut().into_iter().zip(steering) {
        let a = amplitude * s;
        for (x, &b) in row.iter_mut().zip(beat) {
            *x += a * b;
        }
    }
}

fn check_dims(radar: &RadarConfig) -> Result<()> {
    let (rows, cols) = (radar.num_channels(), radar.num_samples);
    if rows > MAX_TRANSFORM || cols > MAX_TRANSFORM {
        return Err(Error::DimensionOverflow {
            rows,
            cols,
            limit: MAX_TRANSFORM,
        });
    }
    Ok(())
}

fn check_window(radar: &RadarConfig, range: f64) -> Result<()> {
    if range > radar.max_range() {
        return Err(Error::OutOfWindow {
            range,
            max_range: radar.max_range(),
        });
    }
    Ok(())
}

/// Complex amplitude of one surface reflector before the steering and beat terms.
pub fn surface_amplitude(
    surface: &ReflectiveSurface,
    reflector: &SurfacePoint,
    coeff: Complex64,
    tx: f64,
) -> Complex64 {
    let loss = (REFERENCE_RANGE_M / reflector.range).powi(2);
    coeff * (tx * (1.0 - surface.backscatter_ratio) * loss)
}

/// Monostatic backscatter of every reflector.
pub fn synthesize_surface_echo(
    radar: &RadarConfig,
    surface: &ReflectiveSurface,
    reflectors: &[SurfacePoint],
    coeffs: &[Complex64],
    waveform: &WaveformConfig,
    tx_amplitude: f64,
) -> Result<Array2<Complex64>> {
    check_dims(radar)?;
    if reflectors.len() != coeffs.len() {
        return Err(Error::Config(
            "one scattering coefficient is required per reflector".into(),
        ));
    }
    let mut out = Array2::zeros((radar.num_channels(), radar.num_samples));
    for (r, &c) in reflectors.iter().zip(coeffs) {
        check_window(radar, r.range)?;
        let amp = surface_amplitude(surface, r, c, tx_amplitude);
        let steer = virtual_steering(radar, r.bearing_deg, r.bearing_deg);
        add_path(
            &mut out,
            amp,
            &steer,
            &waveform.beat(2.0 * r.range / SPEED_OF_LIGHT),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEchoStatus {
    Absent,
    Illuminated,
    /// The specular point falls off the finite surface; no two-bounce return.
    NotIlluminated,
}

/// Surface points that illuminate the target: the specular point first,
/// then every sample sharing its coarse resolution cell.
pub fn illuminated_subset(
    points: &SurfacePointSet,
    prp: &PrpSolution,
    radar: &RadarConfig,
) -> Vec<Point2> {
    let cell = radar.resolution_cell(prp.point);
    std::iter::once(prp.point)
        .chain(points.in_cell(radar, cell).into_iter().map(|p| p.position))
        .collect()
}

struct Leg {
    weight: Complex64,
    bearing: f64,
    length: f64,
}

/// Two-bounce return radar -> k' -> target -> k~ -> radar summed over every
/// ordered pair of illuminating points. `coeffs[0]` belongs to the specular
/// point.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_target_echo(
    radar: &RadarConfig,
    surface: &ReflectiveSurface,
    subset: &[Point2],
    target: Point2,
    prp: &PrpSolution,
    coeffs: &[Complex64],
    target_coeff: Complex64,
    waveform: &WaveformConfig,
) -> Result<(Array2<Complex64>, TargetEchoStatus)> {
    check_dims(radar)?;
    let mut out = Array2::zeros((radar.num_channels(), radar.num_samples));
    if !prp.on_segment {
        return Ok((out, TargetEchoStatus::NotIlluminated));
    }
    if subset.len() != coeffs.len() {
        return Err(Error::Config(
            "one forward-scattering coefficient is required per point".into(),
        ));
    }
    let nominal = prp.path_length();
    let legs: Vec<Leg> = subset
        .iter()
        .zip(coeffs)
        .map(|(&p, &c)| {
            let (rk, kt) = (p.norm(), target.distance(p));
            let gain = scattering_gain(
                p.bearing_deg(),
                (target - p).bearing_deg(),
                surface.orientation_deg,
                surface.backscatter_ratio,
                surface.beamwidth_exponent,
            );
            Leg {
                weight: c * (gain * nominal / (rk + kt)),
                bearing: p.bearing_deg(),
                length: rk + kt,
            }
        })
        .collect();
    for ret in &legs {
        for fwd in &legs {
            let path = fwd.length + ret.length;
            check_window(radar, path / 2.0)?;
            let amp = target_coeff * ret.weight * fwd.weight;
            let steer = virtual_steering(radar, fwd.bearing, ret.bearing);
            add_path(&mut out, amp, &steer, &waveform.beat(path / SPEED_OF_LIGHT));
        }
    }
    Ok((out, TargetEchoStatus::Illuminated))
}

/// Line-of-sight return of a visible target.
pub fn synthesize_direct_echo(
    radar: &RadarConfig,
    target: Point2,
    target_coeff: Complex64,
    waveform: &WaveformConfig,
) -> Result<Array2<Complex64>> {
    check_dims(radar)?;
    check_window(radar, target.norm())?;
    let mut out = Array2::zeros((radar.num_channels(), radar.num_samples));
    let steer = virtual_steering(radar, target.bearing_deg(), target.bearing_deg());
    add_path(
        &mut out,
        target_coeff,
        &steer,
        &waveform.beat(2.0 * target.norm() / SPEED_OF_LIGHT),
    );
    Ok(out)
}

/// Single-bounce ghost of a visible target: radar -> target -> k~ -> radar.
/// The sum is averaged over the subset so the ghost never outshines the
/// direct return.
pub fn synthesize_ghost_echo(
    radar: &RadarConfig,
    surface: &ReflectiveSurface,
    subset: &[Point2],
    target: Point2,
    coeffs: &[Complex64],
    target_coeff: Complex64,
    waveform: &WaveformConfig,
) -> Result<Array2<Complex64>> {
    check_dims(radar)?;
    let mut out = Array2::zeros((radar.num_channels(), radar.num_samples));
    let rt = target.norm();
    let norm = 1.0 / subset.len().max(1) as f64;
    for (&p, &c) in subset.iter().zip(coeffs) {
        let path = rt + target.distance(p) + p.norm();
        check_window(radar, path / 2.0)?;
        let gain = scattering_gain(
            (p - target).bearing_deg(),
            (-p).bearing_deg(),
            surface.orientation_deg,
            surface.backscatter_ratio,
            surface.beamwidth_exponent,
        );
        let amp = target_coeff * c * (norm * gain * 2.0 * rt / path);
        let steer = virtual_steering(radar, target.bearing_deg(), p.bearing_deg());
        add_path(&mut out, amp, &steer, &waveform.beat(path / SPEED_OF_LIGHT));
    }
    Ok(out)
}

/// Random quantities realized for one echo.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScatterDraw {
    pub surface: Vec<Complex64>,
    pub forward: Vec<Complex64>,
    pub target: Complex64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoComponents {
    pub surface: Array2<Complex64>,
    pub target: Array2<Complex64>,
    pub noise: Array2<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarEcho {
    pub radar: RadarConfig,
    /// Channel-by-sample beat matrix.
    pub samples: Array2<Complex64>,
    pub components: Option<EchoComponents>,
    pub draw: ScatterDraw,
    /// Mean per-reflector surface power the noise level is calibrated against.
    pub surface_power: f64,
    pub reflectors: Vec<SurfacePoint>,
    pub target_status: TargetEchoStatus,
    pub seed: u64,
}

impl RadarEcho {
    pub fn noise_variance(&self) -> f64 {
        self.draw.noise_variance
    }

    pub fn range_bin_size(&self) -> f64 {
        self.radar.range_bin_size()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub add_noise: bool,
    pub keep_components: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            add_noise: true,
            keep_components: false,
        }
    }
}

/// Noise variance giving a post-processing SNR of `snr_db` for a return of
/// per-sample power `power`.
pub fn noise_variance_for(power: f64, snr_db: f64, radar: &RadarConfig) -> f64 {
    power / 10f64.powf((snr_db - radar.processing_gain_db()) / 10.0)
}

pub fn synthesize(spec: &ScenarioSpec) -> Result<RadarEcho> {
    synthesize_with(spec, &SynthesisOptions::default())
}

pub fn synthesize_with(spec: &ScenarioSpec, opts: &SynthesisOptions) -> Result<RadarEcho> {
    spec.validate()?;
    check_dims(&spec.radar)?;
    let radar = &spec.radar;
    let waveform = WaveformConfig::for_radar(radar);
    let truth = spec.truth()?;
    let shape = (radar.num_channels(), radar.num_samples);
    let tx = spec.tx_amplitude;

    let mut draw = ScatterDraw::default();
    let mut surface_echo = Array2::zeros(shape);
    let mut reflectors = Vec::new();
    let mut points = None;
    let surface_power = match &spec.surface {
        Some(s) => {
            let set = discretize_surface(s, radar, spec.seed)?;
            reflectors = set.effective_reflectors(radar);
            let mut rng = stream_rng(spec.seed, Stream::SurfaceScatter);
            draw.surface = reflectors
                .iter()
                .map(|_| complex_normal(&mut rng))
                .collect();
            surface_echo =
                synthesize_surface_echo(radar, s, &reflectors, &draw.surface, &waveform, tx)?;
            points = Some(set);
            reflectors
                .iter()
                .zip(&draw.surface)
                .map(|(r, &c)| surface_amplitude(s, r, c, tx).norm_sqr())
                .sum::<f64>()
                / reflectors.len() as f64
        }
        None => tx * tx,
    };
    draw.noise_variance = noise_variance_for(surface_power, spec.snr.surface_db, radar);

    let mut target_echo = Array2::zeros(shape);
    let mut status = TargetEchoStatus::Absent;
    if let (Some(target), Some(t)) = (truth.target, &spec.target) {
        let power = draw.noise_variance
            * 10f64.powf((spec.snr.target_db - radar.processing_gain_db()) / 10.0)
            * t.rcs_mean_power();
        let mut rng = stream_rng(spec.seed, Stream::TargetPhase);
        draw.target = unit_phasor(&mut rng) * power.sqrt();

        let forward = |subset: &[Point2]| -> Vec<Complex64> {
            let mut rng = stream_rng(spec.seed, Stream::ForwardScatter);
            let mut c = vec![unit_phasor(&mut rng)];
            c.extend((1..subset.len()).map(|_| complex_normal(&mut rng)));
            c
        };

        match spec.class {
            SceneClass::Nlos => {
                let (s, set) = (spec.surface.as_ref().unwrap(), points.as_ref().unwrap());
                let prp = truth.prp.ok_or_else(|| {
                    Error::NoSolution("target admits no specular reflection point".into())
                })?;
                let subset = illuminated_subset(set, &prp, radar);
                draw.forward = forward(&subset);
                let (x, st) = synthesize_target_echo(
                    radar,
                    s,
                    &subset,
                    target,
                    &prp,
                    &draw.forward,
                    draw.target,
                    &waveform,
                )?;
                target_echo = x;
                status = st;
            }
            SceneClass::LosNoSurface | SceneClass::LosWithSurfaceNoMp => {
                target_echo = synthesize_direct_echo(radar, target, draw.target, &waveform)?;
                status = TargetEchoStatus::Illuminated;
            }
            SceneClass::LosWithSurfaceMp => {
                target_echo = synthesize_direct_echo(radar, target, draw.target, &waveform)?;
                status = TargetEchoStatus::Illuminated;
                if let (Some(prp), Some(s), Some(set)) =
                    (truth.prp, spec.surface.as_ref(), points.as_ref())
                {
                    if prp.on_segment {
                        let subset = illuminated_subset(set, &prp, radar);
                        draw.forward = forward(&subset);
                        target_echo += &synthesize_ghost_echo(
                            radar,
                            s,
                            &subset,
                            target,
                            &draw.forward,
                            draw.target,
                            &waveform,
                        )?;
                    }
                }
            }
        }
    }

    let mut noise = Array2::zeros(shape);
    if opts.add_noise {
        let mut rng = stream_rng(spec.seed, Stream::Noise);
        let sd = draw.noise_variance.sqrt();
        noise.mapv_inplace(|_: Complex64| complex_normal(&mut rng) * sd);
    }

    let samples = &surface_echo + &target_echo + &noise;
    let components = opts.keep_components.then(|| EchoComponents {
        surface: surface_echo,
        target: target_echo,
        noise,
    });
    Ok(RadarEcho {
        radar: radar.clone(),
        samples,
        components,
        draw,
        surface_power,
        reflectors,
        target_status: status,
        seed: spec.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::solve_prp;
    use crate::scenario::{randomize_scenario, SnrSpec, TargetSpec};
    use approx::assert_abs_diff_eq;

    fn fig5() -> ScenarioSpec {
        ScenarioSpec {
            radar: RadarConfig::default(),
            surface: Some(ReflectiveSurface::new(Point2::new(3.3, 23.3), 8.8, 25.0)),
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
            seed: 5,
            tx_amplitude: 1.0,
        }
    }

    #[test]
    fn gain_at_specular_and_off_axis() {
        let lam = 0.846;
        // Incidence straight up onto a horizontal surface reflects straight back.
        let g0 = scattering_gain(0.0, 180.0, 0.0, lam, 14.0);
        assert_abs_diff_eq!(g0 * g0, lam * lam, epsilon = 1e-12);
        let g90 = scattering_gain(0.0, -90.0, 0.0, lam, 14.0);
        assert_abs_diff_eq!(g90 * g90, lam * lam * 0.5f64.powi(14), epsilon = 1e-15);
        let g180 = scattering_gain(0.0, 0.0, 0.0, lam, 14.0);
        assert_abs_diff_eq!(g180, 0.0, epsilon = 1e-15);
        assert_eq!(scattering_gain(0.0, 180.0, 0.0, 0.0, 14.0), 0.0);
    }

    #[test]
    fn gain_peaks_toward_specular_target() {
        let s = ReflectiveSurface::new(Point2::new(0.0, 10.0), 20.0, 0.0);
        let t = Point2::new(4.0, 4.0);
        let prp = solve_prp(&s, Point2::ORIGIN, t).unwrap();
        let g =
            |p: Point2| scattering_gain(p.bearing_deg(), (t - p).bearing_deg(), 0.0, 0.846, 14.0);
        let at = g(prp.point);
        assert_abs_diff_eq!(at, 0.846, epsilon = 1e-9);
        for dx in [-2.0, -0.5, 0.5, 2.0] {
            assert!(g(prp.point + Point2::new(dx, 0.0)) < at);
        }
    }

    #[test]
    fn beat_tone_lands_on_range_bin() {
        let radar = RadarConfig::default();
        let w = WaveformConfig::for_radar(&radar);
        let r = 10.0 * radar.range_bin_size();
        let b = w.beat(2.0 * r / SPEED_OF_LIGHT);
        // One full cycle every N / 10 samples with negative rotation.
        let ratio = b[1] / b[0];
        assert_abs_diff_eq!(ratio.arg(), -2.0 * PI * 10.0 / 128.0, epsilon = 1e-9);
        assert!(b.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn steering_phase_progression() {
        let radar = RadarConfig::default();
        let a = virtual_steering(&radar, 30.0, 30.0);
        assert_eq!(a.len(), 16);
        assert_abs_diff_eq!((a[1] / a[0]).arg(), PI * 0.5, epsilon = 1e-9);
        let b = steering_vector(30.0, 16, radar.element_spacing, radar.carrier_wavelength);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_backscatter_ratio_silences_target() {
        let mut spec = fig5();
        spec.surface.as_mut().unwrap().backscatter_ratio = 0.0;
        let e = synthesize_with(
            &spec,
            &SynthesisOptions {
                add_noise: false,
                keep_components: true,
            },
        )
        .unwrap();
        let c = e.components.unwrap();
        assert!(c.target.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn off_segment_target_not_illuminated() {
        let radar = RadarConfig::default();
        let s = ReflectiveSurface::new(Point2::new(-5.0, 10.0), 2.0, 0.0);
        let t = Point2::new(4.0, 4.0);
        let prp = solve_prp(&s, Point2::ORIGIN, t).unwrap();
        let set = discretize_surface(&s, &radar, 0).unwrap();
        let sub = illuminated_subset(&set, &prp, &radar);
        let coeffs = vec![Complex64::new(1.0, 0.0); sub.len()];
        let w = WaveformConfig::for_radar(&radar);
        let (x, st) = synthesize_target_echo(
            &radar,
            &s,
            &sub,
            t,
            &prp,
            &coeffs,
            Complex64::new(1.0, 0.0),
            &w,
        )
        .unwrap();
        assert_eq!(st, TargetEchoStatus::NotIlluminated);
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn out_of_window_is_rejected() {
        let radar = RadarConfig::default();
        let w = WaveformConfig::for_radar(&radar);
        let far = Point2::new(0.0, 60.0);
        assert!(matches!(
            synthesize_direct_echo(&radar, far, Complex64::new(1.0, 0.0), &w),
            Err(Error::OutOfWindow { .. })
        ));
    }

    #[test]
    fn oversized_array_is_rejected() {
        let mut spec = fig5();
        spec.radar.num_rx = 600;
        assert!(matches!(
            synthesize(&spec),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn components_sum_to_samples() {
        let spec = fig5();
        let e = synthesize_with(
            &spec,
            &SynthesisOptions {
                add_noise: true,
                keep_components: true,
            },
        )
        .unwrap();
        let c = e.components.as_ref().unwrap();
        let sum = &c.surface + &c.target + &c.noise;
        for (a, b) in sum.iter().zip(e.samples.iter()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
        }
        assert_eq!(e.target_status, TargetEchoStatus::Illuminated);
    }

    #[test]
    fn scaling_transmit_amplitude_scales_everything() {
        let spec = randomize_scenario(SceneClass::Nlos, 3).unwrap();
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&ScenarioSpec {
            tx_amplitude: 3.0,
            ..spec
        })
        .unwrap();
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_abs_diff_eq!((x * 3.0 - y).norm(), 0.0, epsilon = 1e-9 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn noise_power_matches_variance() {
        let mut spec = fig5();
        spec.radar.num_samples = 512;
        spec.radar.num_rx = 32;
        let e = synthesize_with(
            &spec,
            &SynthesisOptions {
                add_noise: true,
                keep_components: true,
            },
        )
        .unwrap();
        let n = &e.components.as_ref().unwrap().noise;
        let p = n.iter().map(|z| z.norm_sqr()).sum::<f64>() / n.len() as f64;
        assert!((p / e.noise_variance() - 1.0).abs() < 0.03);
    }

    #[test]
    fn snr_calibration_relation() {
        let spec = fig5();
        let e = synthesize(&spec).unwrap();
        let g = spec.radar.processing_gain_db();
        let snr_w = 10.0 * (e.surface_power / e.noise_variance()).log10() + g;
        assert_abs_diff_eq!(snr_w, 30.0, epsilon = 1e-9);
        let snr_t = 10.0 * (e.draw.target.norm_sqr() / e.noise_variance()).log10() + g;
        assert_abs_diff_eq!(snr_t, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn ghost_is_weaker_than_direct_return() {
        let radar = RadarConfig::default();
        let w = WaveformConfig::for_radar(&radar);
        let surface = ReflectiveSurface::new(Point2::new(2.0, 18.0), 8.0, 25.0);
        let (a, b) = surface.endpoints();
        let subset: Vec<Point2> = (0..12).map(|k| a + (b - a) * (k as f64 / 11.0)).collect();
        let ones = vec![Complex64::new(1.0, 0.0); subset.len()];
        let target = Point2::new(6.0, 9.0);
        let coeff = Complex64::new(1.0, 0.0);
        let energy = |x: &Array2<Complex64>| x.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let direct = synthesize_direct_echo(&radar, target, coeff, &w).unwrap();
        let ghost =
            synthesize_ghost_echo(&radar, &surface, &subset, target, &ones, coeff, &w).unwrap();
        assert!(energy(&ghost) < energy(&direct));
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = fig5();
        assert_eq!(
            synthesize(&spec).unwrap().samples,
            synthesize(&spec).unwrap().samples
        );
    }
}
