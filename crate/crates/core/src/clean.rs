//! Peak extraction by successive subtraction of point responses.
//!
//! Each step takes the strongest in-FOV cell of the residual map, refines it
//! to a continuous frequency pair, and removes that tone from the samples.
//! Sidelobes of strong returns leave with them, so weak scatterers near a
//! strong target survive as peaks of their own. Extraction stops once the
//! residual maximum no longer clears the residual median by the peak floor.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ra::{
    transform, MapWindows, Peak, RangeAngleMap, DEFAULT_EXCLUSION_BINS, PADDED, PEAK_FLOOR_DB,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    pub k: usize,
    /// Minimum spacing of recorded peaks, padded bins.
    pub exclusion_radius: f64,
    /// Subtractions allowed, recorded or not.
    pub max_iterations: usize,
    /// A component this close to a much stronger pick, in resolution cells,
    /// is taken as shape mismatch of that pick rather than a scatterer.
    pub absorb_radius_cells: f64,
    /// How much stronger the pick must be, dB.
    pub absorb_margin_db: f64,
    /// Range half-width, in resolution cells, of the ring around a dominant
    /// pick where residue is dropped at any angle. A target spread in angle
    /// leaves such residue after its point response is removed.
    pub ring_cells: f64,
    /// Radius, in resolution cells, of the disc around a dominant pick where
    /// residue is dropped. Covers returns smeared in range.
    pub halo_cells: f64,
    /// How much stronger a pick must be to dominate its ring and halo, dB.
    pub dominant_margin_db: f64,
}

impl CleanConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            exclusion_radius: DEFAULT_EXCLUSION_BINS,
            max_iterations: 4 * k,
            absorb_radius_cells: 2.0,
            absorb_margin_db: 10.0,
            ring_cells: 3.0,
            halo_cells: 10.0,
            dominant_margin_db: 30.0,
        }
    }
}

/// Complex tone `amplitude * exp(-j2π u n) * exp(j2π v c)` over sample `n`
/// and channel `c`; this is what a point scatterer contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    /// Cycles per fast-time sample, in `[0, 1)`.
    pub u: f64,
    /// Cycles per channel, in `[-0.5, 0.5)`.
    pub v: f64,
    pub amplitude: Complex64,
}

// P and its first and second partials in (u, v).
struct Response {
    p: Complex64,
    pu: Complex64,
    pv: Complex64,
    puu: Complex64,
    pvv: Complex64,
    puv: Complex64,
}

fn response(x: &Array2<Complex64>, u: f64, v: f64) -> Response {
    let zero = Complex64::new(0.0, 0.0);
    let en: Vec<Complex64> = (0..x.ncols())
        .map(|n| Complex64::from_polar(1.0, TAU * u * n as f64))
        .collect();
    let (mut p, mut pu, mut pv, mut puu, mut pvv, mut puv) = (zero, zero, zero, zero, zero, zero);
    for (c, row) in x.rows().into_iter().enumerate() {
        let (mut s0, mut s1, mut s2) = (zero, zero, zero);
        for (n, (&a, &e)) in row.iter().zip(&en).enumerate() {
            let t = a * e;
            let nf = n as f64;
            s0 += t;
            s1 += t * nf;
            s2 += t * (nf * nf);
        }
        let ec = Complex64::from_polar(1.0, -TAU * v * c as f64);
        let cf = c as f64;
        p += ec * s0;
        pu += ec * s1;
        pv += ec * s0 * cf;
        puu += ec * s2;
        pvv += ec * s0 * (cf * cf);
        puv += ec * s1 * cf;
    }
    let j = Complex64::new(0.0, TAU);
    Response {
        p,
        pu: pu * j,
        pv: -pv * j,
        puu: puu * (j * j),
        pvv: pvv * (j * j),
        puv: puv * TAU * TAU,
    }
}

/// Tone nearest `(u0, v0)` that best explains `x`, found by Newton steps on
/// the response power.
pub fn refine_tone(x: &Array2<Complex64>, u0: f64, v0: f64) -> Tone {
    let bound = 1.0 / PADDED as f64;
    let (mut u, mut v) = (u0, v0);
    for _ in 0..8 {
        let r = response(x, u, v);
        let gu = 2.0 * (r.p.conj() * r.pu).re;
        let gv = 2.0 * (r.p.conj() * r.pv).re;
        let huu = 2.0 * (r.pu.norm_sqr() + (r.p.conj() * r.puu).re);
        let hvv = 2.0 * (r.pv.norm_sqr() + (r.p.conj() * r.pvv).re);
        let huv = 2.0 * ((r.pu.conj() * r.pv).re + (r.p.conj() * r.puv).re);
        let det = huu * hvv - huv * huv;
        if !(huu < 0.0 && det > 0.0) {
            break;
        }
        let du = -(hvv * gu - huv * gv) / det;
        let dv = -(huu * gv - huv * gu) / det;
        if (u + du - u0).abs() > bound || (v + dv - v0).abs() > bound {
            break;
        }
        u += du;
        v += dv;
        if du.abs().max(dv.abs()) < 1e-12 {
            break;
        }
    }
    let scale = (x.nrows() * x.ncols()) as f64;
    Tone {
        u: u.rem_euclid(1.0),
        v: (v + 0.5).rem_euclid(1.0) - 0.5,
        amplitude: response(x, u, v).p / scale,
    }
}

pub fn subtract_tone(x: &mut Array2<Complex64>, tone: &Tone) {
    let en: Vec<Complex64> = (0..x.ncols())
        .map(|n| Complex64::from_polar(1.0, -TAU * tone.u * n as f64))
        .collect();
    for (c, mut row) in x.rows_mut().into_iter().enumerate() {
        let a = tone.amplitude * Complex64::from_polar(1.0, TAU * tone.v * c as f64);
        for (s, &e) in row.iter_mut().zip(&en) {
            *s -= a * e;
        }
    }
}

/// Up to `k` peaks of `map`, strongest first, extracted by CLEAN on the
/// samples behind it. Peak coordinates are continuous; the bin indices are
/// the nearest grid cell.
pub fn clean_peaks(map: &RangeAngleMap, config: &CleanConfig) -> Result<Vec<Peak>> {
    if config.k == 0 {
        return Err(Error::Config("peak count must be at least one".into()));
    }
    let axes = &map.axes;
    if map.samples.dim() != (axes.num_channels, axes.num_samples) {
        return Err(Error::Config("map carries no samples to clean".into()));
    }
    let fov_cols: Vec<usize> = (0..axes.num_angle()).filter(|&j| axes.in_fov(j)).collect();
    let gain = 10f64.powf(PEAK_FLOOR_DB / 10.0);
    let padded = PADDED as f64;
    let half = (PADDED / 2) as f64;
    let sine_scale = (axes.sine[1] - axes.sine[0]) * padded;
    let scale = (axes.num_channels * axes.num_samples) as f64;
    let r2 = config.exclusion_radius * config.exclusion_radius;
    let absorb2 = config.absorb_radius_cells * config.absorb_radius_cells;
    let dominance = 10f64.powf(config.absorb_margin_db / 20.0);
    let ring_dominance = 10f64.powf(config.dominant_margin_db / 20.0);
    let halo2 = config.halo_cells * config.halo_cells;
    let mut residual = map.samples.clone();
    let mut picked: Vec<(Peak, f64, f64)> = Vec::with_capacity(config.k);
    for _ in 0..config.max_iterations {
        if picked.len() == config.k {
            break;
        }
        let power = transform(&residual, MapWindows::default())?.mapv(|z| z.norm_sqr());
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..axes.num_range() {
            for &j in &fov_cols {
                let m = power[[i, j]];
                if best.is_none_or(|b| m > b.2) {
                    best = Some((i, j, m));
                }
            }
        }
        let Some((i, j, m)) = best else { break };
        let mut fov: Vec<f64> = fov_cols
            .iter()
            .flat_map(|&j| power.column(j).to_vec())
            .collect();
        let mid = fov.len() / 2;
        if m <= *fov.select_nth_unstable_by(mid, f64::total_cmp).1 * gain {
            break;
        }
        let tone = refine_tone(&residual, i as f64 / padded, (j as f64 - half) / padded);
        subtract_tone(&mut residual, &tone);

        let (pi, pj) = (tone.u * padded, tone.v * padded + half);
        let sine = tone.v * sine_scale;
        if sine.abs() > 1.0 {
            continue;
        }
        let angle_deg = sine.asin().to_degrees();
        if angle_deg.abs() > axes.fov_half_angle_deg {
            continue;
        }
        let amp = tone.amplitude.norm() * scale;
        let crowded = picked.iter().any(|(p, a, b)| {
            let (di, dj) = (a - pi, b - pj);
            if di * di + dj * dj < r2 {
                return true;
            }
            let ur = di * axes.num_samples as f64 / padded;
            let ua = dj * axes.num_channels as f64 / padded;
            let d2 = ur * ur + ua * ua;
            (p.magnitude > amp * dominance && d2 < absorb2)
                || (p.magnitude > amp * ring_dominance
                    && (ur.abs() < config.ring_cells || d2 < halo2))
        });
        if crowded {
            continue;
        }
        let peak = Peak {
            range_bin: (pi.round() as usize).min(axes.num_range() - 1),
            angle_bin: (pj.round() as usize).min(axes.num_angle() - 1),
            magnitude: amp,
            range_m: pi * axes.range_step,
            angle_deg,
        };
        picked.push((peak, pi, pj));
    }
    let mut peaks: Vec<Peak> = picked.into_iter().map(|(p, _, _)| p).collect();
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadarConfig;
    use crate::ra::compute_ra_map_from;
    use approx::assert_abs_diff_eq;

    fn tone_samples(radar: &RadarConfig, tones: &[Tone]) -> Array2<Complex64> {
        let mut x = Array2::zeros((radar.num_channels(), radar.num_samples));
        for t in tones {
            subtract_tone(
                &mut x,
                &Tone {
                    amplitude: -t.amplitude,
                    ..*t
                },
            );
        }
        x
    }

    #[test]
    fn refine_recovers_off_grid_tone() {
        let radar = RadarConfig::default();
        let t = Tone {
            u: 0.2371,
            v: 0.1234,
            amplitude: Complex64::new(0.3, -1.1),
        };
        let x = tone_samples(&radar, &[t]);
        let r = refine_tone(&x, 121.0 / 512.0, 63.0 / 512.0);
        assert_abs_diff_eq!(r.u, t.u, epsilon = 1e-9);
        assert_abs_diff_eq!(r.v, t.v, epsilon = 1e-9);
        assert_abs_diff_eq!((r.amplitude - t.amplitude).norm(), 0.0, epsilon = 1e-9);
        let mut y = x.clone();
        subtract_tone(&mut y, &r);
        assert!(
            y.iter().map(|z| z.norm_sqr()).sum::<f64>()
                < 1e-15 * x.iter().map(|z| z.norm_sqr()).sum::<f64>()
        );
    }

    #[test]
    fn weak_tone_survives_strong_neighbour() {
        let radar = RadarConfig::default();
        let strong = Tone {
            u: 0.2371,
            v: 0.0312,
            amplitude: Complex64::new(1000.0, 0.0),
        };
        let weak = Tone {
            u: 0.1503,
            v: 0.1607,
            amplitude: Complex64::new(0.0, 0.1),
        };
        let map = compute_ra_map_from(&tone_samples(&radar, &[strong, weak]), &radar).unwrap();
        let peaks = clean_peaks(&map, &CleanConfig::new(2)).unwrap();
        assert_eq!(peaks.len(), 2);
        assert_abs_diff_eq!(
            peaks[0].range_m,
            strong.u * 512.0 * map.axes.range_step,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            peaks[1].range_m,
            weak.u * 512.0 * map.axes.range_step,
            epsilon = 1e-3
        );
        assert!(peaks[0].magnitude > peaks[1].magnitude);
    }

    #[test]
    fn empty_map_gives_no_peaks() {
        let radar = RadarConfig::default();
        let map = compute_ra_map_from(&Array2::zeros((16, 128)), &radar).unwrap();
        assert!(clean_peaks(&map, &CleanConfig::new(5)).unwrap().is_empty());
        assert!(clean_peaks(&map, &CleanConfig::new(0)).is_err());
    }
}
