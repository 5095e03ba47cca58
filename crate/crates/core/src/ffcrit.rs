//! Far-field distance criteria and phase-error budgets for two apertures.
//!
//! `D`, `D1`, `D2` are the largest aperture dimensions (the diagonal of a
//! rectangular aperture), `lambda` the wavelength and `d` the
//! aperture-to-aperture separation, all in meters. Phases are in radians.
//!
//! The far-field threshold is a phase deviation of π/8 (22.5°) across the
//! aperture. The criteria differ in how the two apertures are combined:
//!
//! | criterion                | distance                     |
//! |--------------------------|------------------------------|
//! | [`d_fraunhofer`]         | 2D²/λ (largest aperture only) |
//! | [`d_ff_mil`]             | (D1² + D2²)/λ                |
//! | [`d_ff_fourth_order`]    | (2/λ)·√(D1⁴ + D2⁴)           |
//! | [`d_ff_revised`]         | 2(D1² + D2²)/λ               |
//! | [`d_ff_uno`]             | 2(D1 + D2)²/λ                |

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{require_non_negative, require_positive, Error, Result};

/// The far-field phase threshold, π/8.
pub const PHASE_THRESHOLD: f64 = PI / 8.0;

fn check_pair(d1: f64, d2: f64, lambda: f64) -> Result<()> {
    require_non_negative("aperture dimension D1", d1)?;
    require_non_negative("aperture dimension D2", d2)?;
    require_positive("wavelength", lambda)?;
    if d1 == 0.0 && d2 == 0.0 {
        return Err(Error::domain(
            "aperture dimensions",
            0.0,
            "at least one aperture must be non-zero",
        ));
    }
    Ok(())
}

/// Classical Fraunhofer distance 2D²/λ.
pub fn d_fraunhofer(d: f64, lambda: f64) -> Result<f64> {
    require_positive("aperture dimension D", d)?;
    require_positive("wavelength", lambda)?;
    Ok(2.0 * d * d / lambda)
}

/// Distance at which the root-sum-square phase error of both apertures
/// reaches π/8.
pub fn d_ff_fourth_order(d1: f64, d2: f64, lambda: f64) -> Result<f64> {
    check_pair(d1, d2, lambda)?;
    Ok(2.0 / lambda * (d1.powi(4) + d2.powi(4)).sqrt())
}

/// Revised two-aperture criterion with the combined aperture size entering
/// quadratically.
pub fn d_ff_revised(d1: f64, d2: f64, lambda: f64) -> Result<f64> {
    check_pair(d1, d2, lambda)?;
    Ok(2.0 * (d1 * d1 + d2 * d2) / lambda)
}

/// Horn-to-horn criterion of Uno and Adachi.
pub fn d_ff_uno(d1: f64, d2: f64, lambda: f64) -> Result<f64> {
    check_pair(d1, d2, lambda)?;
    Ok(2.0 * (d1 + d2).powi(2) / lambda)
}

/// MIL-STD-449D criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MilDistance {
    pub distance: f64,
    /// The formula is only stated for a smaller aperture larger than a tenth
    /// of the larger one. Advisory only.
    pub applicable: bool,
}

pub fn d_ff_mil(d1: f64, d2: f64, lambda: f64) -> Result<MilDistance> {
    check_pair(d1, d2, lambda)?;
    Ok(MilDistance {
        distance: (d1 * d1 + d2 * d2) / lambda,
        applicable: d1.min(d2) > d1.max(d2) / 10.0,
    })
}

/// Geometric path difference between the edge and center rays of an aperture,
/// D²/(8d).
pub fn path_difference(d_aperture: f64, d: f64) -> Result<f64> {
    require_non_negative("aperture dimension D", d_aperture)?;
    require_positive("separation distance", d)?;
    Ok(d_aperture * d_aperture / (8.0 * d))
}

/// Phase error 2πΔr/λ of a path difference.
pub fn phase_error(delta_r: f64, lambda: f64) -> Result<f64> {
    require_non_negative("path difference", delta_r)?;
    require_positive("wavelength", lambda)?;
    Ok(2.0 * PI * delta_r / lambda)
}

/// Root-sum-square of the two single-aperture phase errors.
pub fn phase_total(d1: f64, d2: f64, lambda: f64, d: f64) -> Result<f64> {
    check_pair(d1, d2, lambda)?;
    let e1 = phase_error(path_difference(d1, d)?, lambda)?;
    let e2 = phase_error(path_difference(d2, d)?, lambda)?;
    Ok(e1.hypot(e2))
}

/// Worst-case path difference with both apertures adding linearly.
pub fn delta_r_max(d1: f64, d2: f64, d: f64) -> Result<f64> {
    Ok(path_difference(d1, d)? + path_difference(d2, d)?)
}

/// Worst-case edge-to-edge phase deviation π(D1² + D2²)/(4λd).
pub fn delta_phi_max(d1: f64, d2: f64, lambda: f64, d: f64) -> Result<f64> {
    check_pair(d1, d2, lambda)?;
    require_positive("separation distance", d)?;
    Ok(PI * (d1 * d1 + d2 * d2) / (4.0 * lambda * d))
}

/// Ratio of the revised to the fourth-order distance,
/// (D1² + D2²)/√(D1⁴ + D2⁴), always in [1, √2].
pub fn approximation_ratio(d1: f64, d2: f64) -> Result<f64> {
    require_non_negative("aperture dimension D1", d1)?;
    require_non_negative("aperture dimension D2", d2)?;
    if d1 == 0.0 && d2 == 0.0 {
        return Err(Error::domain(
            "aperture dimensions",
            0.0,
            "at least one aperture must be non-zero",
        ));
    }
    // Normalize by the larger aperture so D⁴ cannot underflow.
    let big = d1.max(d2);
    let (a, b) = (d1 / big, d2 / big);
    Ok((a * a + b * b) / (a.powi(4) + b.powi(4)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseBudget {
    pub delta_r: f64,
    pub phi_error: f64,
    pub phi_total: f64,
    pub delta_r_max: f64,
    pub delta_phi_max: f64,
}

impl PhaseBudget {
    /// `delta_r` and `phi_error` refer to the larger of the two apertures.
    pub fn new(d1: f64, d2: f64, lambda: f64, d: f64) -> Result<Self> {
        let delta_r = path_difference(d1.max(d2), d)?;
        Ok(Self {
            delta_r,
            phi_error: phase_error(delta_r, lambda)?,
            phi_total: phase_total(d1, d2, lambda, d)?,
            delta_r_max: delta_r_max(d1, d2, d)?,
            delta_phi_max: delta_phi_max(d1, d2, lambda, d)?,
        })
    }

    pub fn within_threshold(&self) -> bool {
        self.delta_phi_max <= PHASE_THRESHOLD
    }
}

/// Every criterion for one aperture pair at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FarFieldDistances {
    /// 2·max(D1, D2)²/λ.
    pub fraunhofer: f64,
    pub mil: MilDistance,
    pub uno: f64,
    pub revised: f64,
    pub fourth_order: f64,
}

impl FarFieldDistances {
    pub fn new(d1: f64, d2: f64, lambda: f64) -> Result<Self> {
        Ok(Self {
            fraunhofer: d_fraunhofer(d1.max(d2), lambda)?,
            mil: d_ff_mil(d1, d2, lambda)?,
            uno: d_ff_uno(d1, d2, lambda)?,
            revised: d_ff_revised(d1, d2, lambda)?,
            fourth_order: d_ff_fourth_order(d1, d2, lambda)?,
        })
    }
}
