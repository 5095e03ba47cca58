//! Friis forward model and the three-antenna gain solution.
//!
//! For a pair (x, y) the gain product follows from the measured power ratio
//! and the path loss at the pair's separation:
//!
//! ```text
//! Gx·Gy = |S21,xy|² · (4π·d_xy/λ)²
//! ```
//!
//! Three pairs give three linear equations in the dB gains, which are solved
//! directly. In [`PathLossMode::AveragedPl`] every pair uses the path loss of
//! the mean separation (d_AB + d_AC + d_BC)/3 instead of its own.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::model::PairKey;
use crate::units::{path_loss_db, power_to_db};

/// |S21|² = Gt·Gr·(λ/(4πd))².
pub fn friis_s21(gt_linear: f64, gr_linear: f64, lambda: f64, d: f64) -> Result<f64> {
    require_positive("transmit gain", gt_linear)?;
    require_positive("receive gain", gr_linear)?;
    require_positive("wavelength", lambda)?;
    require_positive("distance", d)?;
    Ok(gt_linear * gr_linear * (lambda / (4.0 * PI * d)).powi(2))
}

/// Gain product Gx·Gy from a measured |S21|², the inverse of [`friis_s21`].
pub fn pair_gain_product(s21_sq_linear: f64, d: f64, lambda: f64) -> Result<f64> {
    require_positive("|S21|^2", s21_sq_linear)?;
    require_positive("distance", d)?;
    require_positive("wavelength", lambda)?;
    Ok(s21_sq_linear * (4.0 * PI * d / lambda).powi(2))
}

/// Path loss of the mean pair separation, in dB.
pub fn averaged_path_loss_db(d_ab: f64, d_ac: f64, d_bc: f64, lambda: f64) -> Result<f64> {
    for d in [d_ab, d_ac, d_bc] {
        require_positive("distance", d)?;
    }
    require_positive("wavelength", lambda)?;
    Ok(path_loss_db((d_ab + d_ac + d_bc) / 3.0, lambda))
}

/// Mean of the three per-pair path losses in dB. Only used to compare against
/// [`averaged_path_loss_db`]; it is not a solver mode.
pub fn mean_of_path_loss_db(d_ab: f64, d_ac: f64, d_bc: f64, lambda: f64) -> Result<f64> {
    for d in [d_ab, d_ac, d_bc] {
        require_positive("distance", d)?;
    }
    require_positive("wavelength", lambda)?;
    Ok((path_loss_db(d_ab, lambda) + path_loss_db(d_ac, lambda) + path_loss_db(d_bc, lambda)) / 3.0)
}

/// Spread (max − min) of the per-pair path losses in dB.
///
/// The averaged-PL gains differ from the exact-PL gains by
/// ½(e_xy + e_xz − e_yz) with e = PL(d_pair) − PL(d̄). Since d̄ lies between
/// the smallest and largest separation, that difference never exceeds this
/// spread.
pub fn path_loss_spread_db(d_ab: f64, d_ac: f64, d_bc: f64, lambda: f64) -> Result<f64> {
    for d in [d_ab, d_ac, d_bc] {
        require_positive("distance", d)?;
    }
    require_positive("wavelength", lambda)?;
    let lo = d_ab.min(d_ac).min(d_bc);
    let hi = d_ab.max(d_ac).max(d_bc);
    Ok(path_loss_db(hi, lambda) - path_loss_db(lo, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLossMode {
    /// Each pair uses the path loss of its own separation.
    #[default]
    ExactPl,
    /// Every pair uses the path loss of the mean separation.
    AveragedPl,
}

impl PathLossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PathLossMode::ExactPl => "exact_pl",
            PathLossMode::AveragedPl => "averaged_pl",
        }
    }
}

/// One pair's measured |S21|² at one separation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGainProduct {
    pub pair: PairKey,
    pub s21_sq: f64,
    pub distance: f64,
}

impl PairGainProduct {
    pub fn new(pair: PairKey, s21_sq: f64, distance: f64) -> Self {
        Self {
            pair,
            s21_sq,
            distance,
        }
    }

    /// Gx·Gy with the pair's own path loss.
    pub fn value_linear(&self, lambda: f64) -> Result<f64> {
        pair_gain_product(self.s21_sq, self.distance, lambda)
    }
}

/// Gains of three antennas, in the order of [`ThreeAntennaGains::ids`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeAntennaGains {
    pub ids: [String; 3],
    pub gain_db: [f64; 3],
}

impl ThreeAntennaGains {
    pub fn get_db(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|i| i == id).map(|k| self.gain_db[k])
    }

    pub fn get_linear(&self, id: &str) -> Option<f64> {
        self.get_db(id).map(crate::units::db_to_power)
    }
}

/// Orders the three pairs as (0,1), (0,2), (1,2) over sorted antenna ids.
fn arrange<'a, T>(items: &'a [(PairKey, T)]) -> Result<([String; 3], [&'a T; 3])> {
    let mut ids: Vec<&str> = items
        .iter()
        .flat_map(|(p, _)| [p.first(), p.second()])
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "the pairs must cover exactly three antennas, found {}",
            ids.len()
        )));
    }
    let ids = [ids[0].to_string(), ids[1].to_string(), ids[2].to_string()];
    let mut slots: [Option<&T>; 3] = [None, None, None];
    for (pair, value) in items {
        let slot = match (
            ids.iter().position(|i| i == pair.first()),
            ids.iter().position(|i| i == pair.second()),
        ) {
            (Some(0), Some(1)) => 0,
            (Some(0), Some(2)) => 1,
            (Some(1), Some(2)) => 2,
            _ => unreachable!("pair keys are sorted and ids deduplicated"),
        };
        if slots[slot].replace(value).is_some() {
            return Err(Error::DuplicatePair(pair.to_string()));
        }
    }
    let names = [
        format!("{}/{}", ids[0], ids[1]),
        format!("{}/{}", ids[0], ids[2]),
        format!("{}/{}", ids[1], ids[2]),
    ];
    let mut out = Vec::with_capacity(3);
    for (slot, name) in slots.into_iter().zip(names) {
        out.push(slot.ok_or(Error::MissingPair(name))?);
    }
    Ok((ids, [out[0], out[1], out[2]]))
}

/// Solves the 3×3 system for per-antenna dB gains given the pair gain
/// products in dB, keyed by pair.
pub fn solve_gain_products_db(products_db: &[(PairKey, f64)]) -> Result<ThreeAntennaGains> {
    if products_db.len() != 3 {
        // Report the first duplicate or missing pair by name.
        arrange(products_db)?;
        return Err(Error::ShapeMismatch(format!(
            "expected three pair products, got {}",
            products_db.len()
        )));
    }
    let (ids, values) = arrange(products_db)?;
    for (k, v) in values.iter().enumerate() {
        if !v.is_finite() {
            let pair = match k {
                0 => format!("{}/{}", ids[0], ids[1]),
                1 => format!("{}/{}", ids[0], ids[2]),
                _ => format!("{}/{}", ids[1], ids[2]),
            };
            return Err(Error::NonPositiveProduct {
                pair,
                value: crate::units::db_to_power(**v),
            });
        }
    }
    let system = Matrix3::new(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0);
    let rhs = Vector3::new(*values[0], *values[1], *values[2]);
    let g = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular three-antenna system".to_string()))?;
    Ok(ThreeAntennaGains {
        ids,
        gain_db: [g[0], g[1], g[2]],
    })
}

/// Three-antenna solution from three pair measurements.
pub fn solve_three_antenna(
    products: &[PairGainProduct],
    lambda: f64,
    mode: PathLossMode,
) -> Result<ThreeAntennaGains> {
    require_positive("wavelength", lambda)?;
    for p in products {
        if !(p.s21_sq.is_finite() && p.s21_sq > 0.0) {
            return Err(Error::NonPositiveProduct {
                pair: p.pair.to_string(),
                value: p.s21_sq,
            });
        }
        require_positive("distance", p.distance)?;
    }
    let keyed: Vec<(PairKey, &PairGainProduct)> =
        products.iter().map(|p| (p.pair.clone(), p)).collect();
    if keyed.len() != 3 {
        arrange(&keyed)?;
        return Err(Error::ShapeMismatch(format!(
            "expected three pair products, got {}",
            keyed.len()
        )));
    }
    let (_, ordered) = arrange(&keyed)?;
    let averaged = match mode {
        PathLossMode::ExactPl => None,
        PathLossMode::AveragedPl => Some(averaged_path_loss_db(
            ordered[0].distance,
            ordered[1].distance,
            ordered[2].distance,
            lambda,
        )?),
    };
    let products_db: Vec<(PairKey, f64)> = products
        .iter()
        .map(|p| {
            let pl = averaged.unwrap_or_else(|| path_loss_db(p.distance, lambda));
            (p.pair.clone(), power_to_db(p.s21_sq) + pl)
        })
        .collect();
    solve_gain_products_db(&products_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{db_to_power, wavelength};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn key(a: &str, b: &str) -> PairKey {
        PairKey::new(a, b).unwrap()
    }

    fn synth(g: [f64; 3], d: [f64; 3], lambda: f64) -> Vec<PairGainProduct> {
        vec![
            PairGainProduct::new(key("A", "B"), friis_s21(g[0], g[1], lambda, d[0]).unwrap(), d[0]),
            PairGainProduct::new(key("A", "C"), friis_s21(g[0], g[2], lambda, d[1]).unwrap(), d[1]),
            PairGainProduct::new(key("B", "C"), friis_s21(g[1], g[2], lambda, d[2]).unwrap(), d[2]),
        ]
    }

    #[test]
    fn friis_spot_values() {
        let lambda = wavelength(170e9);
        assert_relative_eq!(friis_s21(1.0, 1.0, lambda, lambda / (4.0 * PI)).unwrap(), 1.0, max_relative = 1e-12);
        let g = db_to_power(25.0);
        let s = power_to_db(friis_s21(g, g, lambda, 1.0).unwrap());
        // independent: 50 dB minus 20·log10(4π·1 m/λ) evaluated by hand
        assert!((s - (50.0 - 77.0568)).abs() < 1e-3);
        assert!((s + 27.06).abs() < 0.005);
        let near = friis_s21(g, g, lambda, 1.0).unwrap();
        let far = friis_s21(g, g, lambda, 2.0).unwrap();
        assert_relative_eq!(near / far, 4.0, max_relative = 1e-14);
        assert!(friis_s21(0.0, 1.0, lambda, 1.0).is_err());
    }

    #[test]
    fn gain_product_inverts_friis() {
        let lambda = wavelength(170e9);
        for d in [0.1, 1.0, 7.3] {
            let s = friis_s21(316.23, 100.0, lambda, d).unwrap();
            assert_relative_eq!(pair_gain_product(s, d, lambda).unwrap(), 31623.0, max_relative = 1e-9);
        }
        assert_relative_eq!(pair_gain_product(1.0, lambda / (4.0 * PI), lambda).unwrap(), 1.0);
        let p = pair_gain_product(db_to_power(-27.06), 1.0, lambda).unwrap();
        assert!((power_to_db(p) - 50.0).abs() < 0.005);
        assert!(pair_gain_product(0.0, 1.0, lambda).is_err());
    }

    #[test]
    fn averaged_path_loss_values() {
        let lambda = wavelength(170e9);
        assert_relative_eq!(
            averaged_path_loss_db(1.3, 1.3, 1.3, lambda).unwrap(),
            path_loss_db(1.3, lambda),
            max_relative = 1e-15
        );
        assert!((averaged_path_loss_db(1.0, 1.0, 1.0, lambda).unwrap() - 77.06).abs() < 0.005);
        assert_relative_eq!(
            averaged_path_loss_db(1.028, 1.055, 1.000, lambda).unwrap(),
            path_loss_db(3.083 / 3.0, lambda),
            max_relative = 1e-14
        );
        // the mean of dB path losses never exceeds the path loss of the mean
        let a = averaged_path_loss_db(1.0, 1.0, 2.0, lambda).unwrap();
        let m = mean_of_path_loss_db(1.0, 1.0, 2.0, lambda).unwrap();
        assert!(m < a);
    }

    #[test]
    fn equal_distances_recover_in_both_modes() {
        let lambda = wavelength(160e9);
        let g = [316.23, 316.23, 100.0];
        let p = synth(g, [1.2; 3], lambda);
        for mode in [PathLossMode::ExactPl, PathLossMode::AveragedPl] {
            let s = solve_three_antenna(&p, lambda, mode).unwrap();
            for (id, gi) in ["A", "B", "C"].iter().zip(g) {
                assert!((s.get_db(id).unwrap() - power_to_db(gi)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn averaged_mode_deviation_matches_closed_form() {
        let lambda = wavelength(170e9);
        let g = [316.23, 316.23, 100.0];
        let d = [1.015, 1.043, 1.070];
        let p = synth(g, d, lambda);
        let exact = solve_three_antenna(&p, lambda, PathLossMode::ExactPl).unwrap();
        let avg = solve_three_antenna(&p, lambda, PathLossMode::AveragedPl).unwrap();
        for (k, id) in ["A", "B", "C"].iter().enumerate() {
            assert!((exact.get_db(id).unwrap() - power_to_db(g[k])).abs() < 1e-10);
        }
        // oracle: log-mean vs mean-log, written out per antenna
        let mean = (d[0] + d[1] + d[2]) / 3.0;
        let e = |x: f64| 20.0 * (x / mean).log10();
        let expected = [
            0.5 * (e(d[0]) + e(d[1]) - e(d[2])),
            0.5 * (e(d[0]) + e(d[2]) - e(d[1])),
            0.5 * (e(d[1]) + e(d[2]) - e(d[0])),
        ];
        for (k, id) in ["A", "B", "C"].iter().enumerate() {
            let diff = exact.get_db(id).unwrap() - avg.get_db(id).unwrap();
            assert!((diff - expected[k]).abs() < 1e-10, "{id}: {diff} vs {}", expected[k]);
        }
        assert!((expected[0] + 0.2280).abs() < 5e-4);
    }

    #[test]
    fn max_deviation_from_mean_path_loss_is_not_a_bound() {
        // The |PL(d_xy) - PL(d̄)| form fails at d = 1, 1, 2 m; the spread does not.
        let lambda = 0.002;
        let d = [1.0, 1.0, 2.0];
        let p = synth([10.0, 20.0, 30.0], d, lambda);
        let exact = solve_three_antenna(&p, lambda, PathLossMode::ExactPl).unwrap();
        let avg = solve_three_antenna(&p, lambda, PathLossMode::AveragedPl).unwrap();
        let worst = (0..3)
            .map(|k| (exact.gain_db[k] - avg.gain_db[k]).abs())
            .fold(0.0, f64::max);
        let pl_bar = averaged_path_loss_db(d[0], d[1], d[2], lambda).unwrap();
        let max_dev = d
            .iter()
            .map(|x| (path_loss_db(*x, lambda) - pl_bar).abs())
            .fold(0.0, f64::max);
        assert!(worst > max_dev);
        assert!(worst <= path_loss_spread_db(d[0], d[1], d[2], lambda).unwrap());
    }

    #[test]
    fn identical_antennas() {
        let lambda = wavelength(150e9);
        let g = 87.0;
        let p = synth([g; 3], [0.9, 1.1, 1.3], lambda);
        let s = solve_three_antenna(&p, lambda, PathLossMode::ExactPl).unwrap();
        for k in 0..3 {
            assert_relative_eq!(s.gain_db[k], power_to_db(g), max_relative = 1e-12);
        }
    }

    #[test]
    fn structured_errors_name_the_pair() {
        let lambda = 0.002;
        let mut p = synth([10.0, 20.0, 30.0], [1.0; 3], lambda);
        let missing = solve_three_antenna(&p[..2], lambda, PathLossMode::ExactPl).unwrap_err();
        assert!(matches!(missing, Error::MissingPair(ref n) if n == "B/C"), "{missing}");
        p[2].s21_sq = 0.0;
        let zero = solve_three_antenna(&p, lambda, PathLossMode::ExactPl).unwrap_err();
        assert!(matches!(zero, Error::NonPositiveProduct { ref pair, .. } if pair == "B/C"));
        let mut dup = synth([10.0, 20.0, 30.0], [1.0; 3], lambda);
        dup[2] = dup[0].clone();
        let err = solve_three_antenna(&dup, lambda, PathLossMode::ExactPl).unwrap_err();
        assert!(matches!(err, Error::DuplicatePair(ref n) if n == "A/B"), "{err}");
    }

    #[test]
    fn linear_system_equals_square_root_form() {
        let lambda = wavelength(165e9);
        let g = [250.0, 410.0, 95.0];
        let d = [1.2, 1.228, 1.228];
        let p = synth(g, d, lambda);
        let s = solve_three_antenna(&p, lambda, PathLossMode::ExactPl).unwrap();
        let ab = p[0].value_linear(lambda).unwrap();
        let ac = p[1].value_linear(lambda).unwrap();
        let bc = p[2].value_linear(lambda).unwrap();
        let sqrt_form = [
            (ab * ac / bc).sqrt(),
            (ab * bc / ac).sqrt(),
            (ac * bc / ab).sqrt(),
        ];
        for k in 0..3 {
            assert!((s.gain_db[k] - power_to_db(sqrt_form[k])).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn permutation_equivariance(ga in 1.0f64..1e4, gb in 1.0f64..1e4, gc in 1.0f64..1e4,
                                    da in 0.1f64..5.0, db in 0.1f64..5.0, dc in 0.1f64..5.0) {
            let lambda = 0.0018;
            let p = synth([ga, gb, gc], [da, db, dc], lambda);
            let s = solve_three_antenna(&p, lambda, PathLossMode::AveragedPl).unwrap();
            // relabel A→C, B→A, C→B
            let relabel = |k: &PairKey| {
                let m = |x: &str| match x { "A" => "C", "B" => "A", _ => "B" };
                PairKey::new(m(k.first()), m(k.second())).unwrap()
            };
            let q: Vec<_> = p.iter().rev().map(|x| PairGainProduct::new(relabel(&x.pair), x.s21_sq, x.distance)).collect();
            let t = solve_three_antenna(&q, lambda, PathLossMode::AveragedPl).unwrap();
            prop_assert!((t.get_db("C").unwrap() - s.get_db("A").unwrap()).abs() < 1e-10);
            prop_assert!((t.get_db("A").unwrap() - s.get_db("B").unwrap()).abs() < 1e-10);
            prop_assert!((t.get_db("B").unwrap() - s.get_db("C").unwrap()).abs() < 1e-10);
        }

        #[test]
        fn scale_covariance(ga in 1.0f64..1e4, gb in 1.0f64..1e4, gc in 1.0f64..1e4, k in 0.01f64..100.0) {
            let lambda = 0.0019;
            let p = synth([ga, gb, gc], [1.0, 1.1, 1.2], lambda);
            let s = solve_three_antenna(&p, lambda, PathLossMode::ExactPl).unwrap();
            let q: Vec<_> = p.iter().map(|x| PairGainProduct::new(x.pair.clone(), x.s21_sq * k, x.distance)).collect();
            let t = solve_three_antenna(&q, lambda, PathLossMode::ExactPl).unwrap();
            for i in 0..3 {
                prop_assert!((db_to_power(t.gain_db[i]) / db_to_power(s.gain_db[i]) - k.sqrt()).abs() < 1e-9 * k.sqrt());
            }
        }
    }
}
