//! Physical constants and dB conversions.
//!
//! Power quantities stay linear inside the pipeline; the helpers here are used
//! at the I/O and reporting boundaries.

use std::f64::consts::PI;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn speed_of_light() -> f64 {
    SPEED_OF_LIGHT
}

/// Free-space wavelength in meters.
pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

pub fn power_to_db(power: f64) -> f64 {
    10.0 * power.log10()
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn amplitude_to_db(amplitude: f64) -> f64 {
    20.0 * amplitude.log10()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Free-space path loss 20·log10(4πd/λ) in dB.
pub fn path_loss_db(distance: f64, lambda: f64) -> f64 {
    20.0 * (4.0 * PI * distance / lambda).log10()
}

pub fn to_degrees(rad: f64) -> f64 {
    rad * 180.0 / PI
}

pub fn to_radians(deg: f64) -> f64 {
    deg * PI / 180.0
}
