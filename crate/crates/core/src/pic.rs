//! PIC chiplet model: TIR mirror out-coupling geometry and evanescent
//! waveguide-leakage crosstalk.

use std::f64::consts::LOG10_E;

use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TirMirrorSpec {
    /// Facet angle from the chip surface plane, degrees.
    pub facet_angle_deg: f64,
    pub n_effective: f64,
    pub n_ambient: f64,
    pub n_exit: f64,
}

impl TirMirrorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.facet_angle_deg > 0.0 && self.facet_angle_deg < 90.0) {
            return Err(Error::invalid("facet_angle", "must lie in (0, 90) degrees"));
        }
        for (field, n) in [
            ("n_effective", self.n_effective),
            ("n_ambient", self.n_ambient),
            ("n_exit", self.n_exit),
        ] {
            if !(n >= 1.0) || !n.is_finite() {
                return Err(Error::invalid(field, format!("index must be >= 1, got {n}")));
            }
        }
        Ok(())
    }
}

/// Critical angle at the facet in degrees.
pub fn tir_critical_angle(spec: &TirMirrorSpec) -> Result<f64> {
    spec.validate()?;
    if spec.n_ambient >= spec.n_effective {
        return Err(Error::NoTir {
            n_ambient: spec.n_ambient,
            n_effective: spec.n_effective,
        });
    }
    Ok((spec.n_ambient / spec.n_effective).asin().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcoupling {
    /// Tilt of the reflected ray from the surface normal inside the stack.
    pub internal_tilt_deg: f64,
    /// Tilt from the surface normal after refraction into the exit medium.
    pub exit_angle_deg: f64,
    pub tir_satisfied: bool,
}

/// Ray model for a horizontally guided ray hitting the facet and leaving
/// through a top surface parallel to the chip.
pub fn outcoupling_angle(spec: &TirMirrorSpec) -> Result<Outcoupling> {
    let critical = tir_critical_angle(spec)?;
    let internal_tilt_deg = 2.0 * (spec.facet_angle_deg - 45.0);
    let s = spec.n_effective * internal_tilt_deg.to_radians().sin() / spec.n_exit;
    if s.abs() >= 1.0 {
        return Err(Error::TrappedRay { internal_tilt_deg });
    }
    Ok(Outcoupling {
        internal_tilt_deg,
        exit_angle_deg: s.asin().to_degrees(),
        tir_satisfied: spec.facet_angle_deg >= critical,
    })
}

/// Which exit angle a facet angle produces, inverted: the facet angle that
/// emits at `exit_angle_deg`.
pub fn facet_for_exit_angle(spec: &TirMirrorSpec, exit_angle_deg: f64) -> Result<f64> {
    spec.validate()?;
    let s = spec.n_exit * exit_angle_deg.to_radians().sin() / spec.n_effective;
    if s.abs() >= 1.0 {
        return Err(Error::invalid("exit_angle", "not reachable from inside the stack"));
    }
    Ok(45.0 + 0.5 * s.asin().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageReference {
    /// Waveguide separation of the calibration point, metres.
    pub pitch: f64,
    pub crosstalk_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveguideArraySpec {
    /// Transverse waveguide positions at the out-coupling plane, metres.
    pub positions: Vec<f64>,
    /// Guided-mode MFD (x, y) in metres.
    pub mode_mfd: (f64, f64),
    /// Evanescent field decay constant, 1/m.
    pub leakage_decay: f64,
    pub leakage_reference: LeakageReference,
}

/// Default evanescent decay constant: 1.0 per micrometre.
pub const DEFAULT_LEAKAGE_DECAY: f64 = 1.0e6;

impl WaveguideArraySpec {
    pub fn channel_count(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid("positions", "array needs at least one channel"));
        }
        if !self.positions.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("positions", "must be strictly increasing"));
        }
        ensure_positive("mode_mfd", self.mode_mfd.0)?;
        ensure_positive("mode_mfd", self.mode_mfd.1)?;
        ensure_positive("leakage_decay", self.leakage_decay)?;
        ensure_positive("leakage_reference.pitch", self.leakage_reference.pitch)?;
        Ok(())
    }
}

/// Crosstalk of channel `i` into waveguide `j` from evanescent leakage, dB.
///
/// Single-exponential coupling anchored at the reference point: intensity
/// falls as `exp(-2 * kappa * d)`, i.e. `20 log10(e) * kappa` dB per metre.
pub fn leakage_crosstalk(array: &WaveguideArraySpec, i: usize, j: usize) -> Result<f64> {
    let n = array.channel_count();
    if i >= n || j >= n {
        return Err(Error::invalid(
            "channel",
            format!("index out of range for {n} channels"),
        ));
    }
    if i == j {
        return Err(Error::invalid("channel", "leakage needs two distinct channels"));
    }
    let d = (array.positions[i] - array.positions[j]).abs();
    Ok(leakage_at_distance(array, d))
}

pub fn leakage_at_distance(array: &WaveguideArraySpec, distance: f64) -> f64 {
    let r = &array.leakage_reference;
    r.crosstalk_db + 20.0 * LOG10_E * array.leakage_decay * (r.pitch - distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mirror(facet: f64) -> TirMirrorSpec {
        TirMirrorSpec {
            facet_angle_deg: facet,
            n_effective: 1.466,
            n_ambient: 1.0,
            n_exit: 1.0,
        }
    }

    fn array(positions: Vec<f64>) -> WaveguideArraySpec {
        WaveguideArraySpec {
            positions,
            mode_mfd: (1.93e-6, 5.79e-6),
            leakage_decay: DEFAULT_LEAKAGE_DECAY,
            leakage_reference: LeakageReference {
                pitch: 5e-6,
                crosstalk_db: -30.0,
            },
        }
    }

    #[test]
    fn critical_angle_of_nitride_stack() {
        let c = tir_critical_angle(&mirror(52.0)).unwrap();
        assert!((c - 43.0).abs() < 0.1, "{c}");
        let two = TirMirrorSpec {
            n_effective: 2.0,
            ..mirror(52.0)
        };
        assert_relative_eq!(tir_critical_angle(&two).unwrap(), 30.0, epsilon = 1e-12);
        let equal = TirMirrorSpec {
            n_effective: 1.0,
            ..mirror(52.0)
        };
        assert!(matches!(tir_critical_angle(&equal), Err(Error::NoTir { .. })));
    }

    #[test]
    fn fabricated_facet_out_couples_near_twenty_degrees() {
        let o = outcoupling_angle(&mirror(52.0)).unwrap();
        assert_relative_eq!(o.internal_tilt_deg, 14.0, epsilon = 1e-12);
        // asin(1.466 sin 14 deg) = 20.77 deg.
        assert_relative_eq!(o.exit_angle_deg, 20.7725, epsilon = 1e-3);
        assert!(o.tir_satisfied);
    }

    #[test]
    fn forty_five_degree_facet_emits_normally() {
        for n in [1.2, 1.466, 2.0, 3.5] {
            let spec = TirMirrorSpec {
                n_effective: n,
                n_exit: 1.3,
                ..mirror(45.0)
            };
            assert_eq!(outcoupling_angle(&spec).unwrap().exit_angle_deg, 0.0);
        }
    }

    #[test]
    fn seven_degree_design_point() {
        let o = outcoupling_angle(&mirror(7.0)).unwrap_err();
        // 2 * (7 - 45) = -76 deg internal tilt: trapped, and 7 < 43 anyway.
        assert!(matches!(o, Error::TrappedRay { .. }));
        // Facet that would emit at 7 deg.
        let facet = facet_for_exit_angle(&mirror(52.0), 7.0).unwrap();
        let back = outcoupling_angle(&mirror(facet)).unwrap();
        assert_relative_eq!(back.exit_angle_deg, 7.0, epsilon = 1e-10);
        assert!(back.tir_satisfied);
        assert_relative_eq!(facet, 47.3843, epsilon = 1e-3);
    }

    #[test]
    fn leakage_anchor_and_hand_value() {
        let a = array(vec![0.0, 5e-6, 11e-6]);
        assert_relative_eq!(leakage_crosstalk(&a, 0, 1).unwrap(), -30.0, epsilon = 1e-12);
        assert_relative_eq!(leakage_crosstalk(&a, 1, 2).unwrap(), -38.6859, epsilon = 1e-3);
        assert!(leakage_crosstalk(&a, 1, 1).is_err());
        assert!(leakage_crosstalk(&a, 0, 3).is_err());
    }

    #[test]
    fn array_validation() {
        assert!(array(vec![0.0, 0.0]).validate().is_err());
        assert!(array(vec![]).validate().is_err());
        assert!(array(vec![-1e-6, 1e-6]).validate().is_ok());
    }

    proptest! {
        #[test]
        fn leakage_symmetric_and_decreasing(d1 in 1e-6..20e-6f64, extra in 1e-9..10e-6f64) {
            let a = array(vec![0.0, d1, d1 + extra]);
            prop_assert_eq!(leakage_crosstalk(&a, 0, 1).unwrap(), leakage_crosstalk(&a, 1, 0).unwrap());
            prop_assert!(leakage_at_distance(&a, d1 + extra) < leakage_at_distance(&a, d1));
        }

        #[test]
        fn critical_angle_decreases_with_index(n in 1.01..3.0f64, dn in 1e-3..1.0f64) {
            let lo = tir_critical_angle(&TirMirrorSpec { n_effective: n, ..mirror(50.0) }).unwrap();
            let hi = tir_critical_angle(&TirMirrorSpec { n_effective: n + dn, ..mirror(50.0) }).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn exit_angle_increases_with_facet(a in 45.0..55.0f64, da in 1e-3..1.0f64) {
            // Surface TIR for n_eff 1.466 sets in at internal tilt 43 deg (facet 66.5).
            let e1 = outcoupling_angle(&mirror(a)).unwrap().exit_angle_deg;
            let e2 = outcoupling_angle(&mirror(a + da)).unwrap().exit_angle_deg;
            prop_assert!(e2 > e1);
        }
    }
}
