//! Stage III: target position from the decided peak.

use serde::Serialize;

use crate::classify::{Hypothesis, HypothesisDecision};
use crate::error::{Error, Result};
use crate::geometry::{ground_truth_target, Point2};
use crate::surface::SurfaceEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationResult {
    pub hypothesis: Hypothesis,
    pub position: Point2,
    /// Radar to reflection point, NLOS only.
    pub r1: Option<f64>,
    /// Reflection point to target, NLOS only.
    pub r2: Option<f64>,
    pub angle_deg: f64,
}

/// Range from the radar along bearing `phi_deg` to the line `y = b + x tan(theta)`.
pub fn range_to_prp(intercept: f64, theta_deg: f64, phi_deg: f64) -> Result<f64> {
    let (sp, cp) = phi_deg.to_radians().sin_cos();
    let denom = cp - theta_deg.to_radians().tan() * sp;
    if denom.abs() < 1e-12 {
        return Err(Error::InfeasibleGeometry(format!(
            "bearing {phi_deg} deg runs parallel to the surface"
        )));
    }
    let r = intercept / denom;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InfeasibleGeometry(format!(
            "surface lies behind the radar along {phi_deg} deg"
        )));
    }
    Ok(r)
}

pub fn localize(
    decision: &HypothesisDecision,
    estimate: &SurfaceEstimate,
) -> Result<LocalizationResult> {
    match decision.hypothesis {
        Hypothesis::I0 => Ok(LocalizationResult {
            hypothesis: Hypothesis::I0,
            position: Point2::from_polar(decision.range_m, decision.angle_deg),
            r1: None,
            r2: None,
            angle_deg: decision.angle_deg,
        }),
        Hypothesis::I1 => {
            let fit = estimate.fit.as_ref().ok_or(Error::SurfaceNotDetected)?;
            let r1 = range_to_prp(fit.intercept, fit.orientation_deg, decision.angle_deg)?;
            let r2 = decision.range_m - r1;
            if !(r2 > 0.0) {
                return Err(Error::InfeasibleGeometry(format!(
                    "apparent range {:.3} m does not exceed the {r1:.3} m to the surface",
                    decision.range_m
                )));
            }
            let position = ground_truth_target(decision.angle_deg, r1, r2, fit.orientation_deg)?;
            Ok(LocalizationResult {
                hypothesis: Hypothesis::I1,
                position,
                r1: Some(r1),
                r2: Some(r2),
                angle_deg: decision.angle_deg,
            })
        }
    }
}
