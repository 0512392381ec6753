//! Equilibrium geometry of a linear Coulomb crystal in a harmonic axial well.
//!
//! Positions are solved in dimensionless form: with the length scale
//! `l = (Z^2 e^2 / (4 pi eps0 m w^2))^(1/3)` the force balance on ion `m` reads
//!
//! ```text
//! u_m - sum_{n<m} 1/(u_m - u_n)^2 + sum_{n>m} 1/(u_m - u_n)^2 = 0
//! ```

use std::f64::consts::PI;

use serde::Serialize;

use crate::constants::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};
use crate::error::{ensure_positive, Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapSpec {
    /// Ion mass in unified atomic mass units.
    pub ion_mass_u: f64,
    /// Charge state in elementary charges.
    pub ion_charge: u32,
    /// Axial trap frequency in Hz (ordinary, not angular).
    pub axial_frequency_hz: f64,
    pub ion_count: usize,
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("ion_mass", self.ion_mass_u)?;
        ensure_positive("axial_frequency", self.axial_frequency_hz)?;
        if self.ion_charge < 1 {
            return Err(Error::invalid("ion_charge", "must be >= 1"));
        }
        if self.ion_count < 1 {
            return Err(Error::invalid("ion_count", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IonCrystal {
    pub dimensionless_positions: Vec<f64>,
    /// Metres per dimensionless unit.
    pub length_scale: f64,
    pub trap: TrapSpec,
}

impl IonCrystal {
    /// Solves the crystal for `trap` at the default tolerance.
    pub fn solve(trap: TrapSpec) -> Result<Self> {
        Self::solve_with_tolerance(trap, DEFAULT_TOLERANCE)
    }

    pub fn solve_with_tolerance(trap: TrapSpec, tolerance: f64) -> Result<Self> {
        let length_scale = length_scale(&trap)?;
        let dimensionless_positions = equilibrium_positions(trap.ion_count, tolerance)?;
        Ok(Self {
            dimensionless_positions,
            length_scale,
            trap,
        })
    }

    /// Physical positions in metres.
    pub fn positions(&self) -> Vec<f64> {
        self.dimensionless_positions
            .iter()
            .map(|u| u * self.length_scale)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.dimensionless_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensionless_positions.is_empty()
    }
}

/// Coulomb-crystal length scale in metres.
pub fn length_scale(trap: &TrapSpec) -> Result<f64> {
    trap.validate()?;
    let charge = f64::from(trap.ion_charge) * ELEMENTARY_CHARGE;
    let mass = trap.ion_mass_u * ATOMIC_MASS_UNIT;
    let omega = 2.0 * PI * trap.axial_frequency_hz;
    Ok((charge * charge / (4.0 * PI * VACUUM_PERMITTIVITY * mass * omega * omega)).cbrt())
}

/// Net dimensionless force on every ion.
pub fn force_residual(positions: &[f64]) -> Vec<f64> {
    positions
        .iter()
        .enumerate()
        .map(|(m, &um)| {
            let coulomb: f64 = positions
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != m)
                .map(|(_, &un)| {
                    let d = um - un;
                    d.signum() / (d * d)
                })
                .sum();
            um - coulomb
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Equilibrium positions of `n` ions, sorted ascending.
///
/// Damped Newton iteration started from uniform spacing over
/// `0.63 * [-n/2, n/2]`. The Jacobian is symmetric positive definite so each
/// step is a Cholesky solve.
pub fn equilibrium_positions(n: usize, tolerance: f64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::invalid("ion_count", "must be >= 1"));
    }
    ensure_positive("tolerance", tolerance)?;
    if n == 1 {
        return Ok(vec![0.0]);
    }

    let half = n as f64 / 2.0;
    let step = n as f64 / (n - 1) as f64;
    let mut u: Vec<f64> = (0..n).map(|i| 0.63 * (-half + step * i as f64)).collect();
    let mut force = force_residual(&u);
    let mut residual = max_abs(&force);

    for _ in 0..MAX_ITERATIONS {
        if residual < tolerance {
            return Ok(symmetrized(u, tolerance));
        }
        let jac = jacobian(&u);
        let neg: Vec<f64> = force.iter().map(|f| -f).collect();
        let delta = solve_spd(jac, neg, n)?;

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let trial_force = force_residual(&trial);
                let trial_residual = max_abs(&trial_force);
                if trial_residual < residual || lambda < 1e-6 {
                    u = trial;
                    force = trial_force;
                    residual = trial_residual;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::Convergence {
                    iterations: MAX_ITERATIONS,
                    residual,
                });
            }
        }
    }
    if residual < tolerance {
        Ok(symmetrized(u, tolerance))
    } else {
        Err(Error::Convergence {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

// Averages mirror pairs; kept only if it does not worsen the residual.
fn symmetrized(u: Vec<f64>, tolerance: f64) -> Vec<f64> {
    let n = u.len();
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (u[i] - u[n - 1 - i])).collect();
    if max_abs(&force_residual(&sym)) < tolerance {
        sym
    } else {
        u
    }
}

fn jacobian(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut jac = vec![0.0; n * n];
    for m in 0..n {
        let mut diag = 1.0;
        for k in 0..n {
            if k == m {
                continue;
            }
            let d = (u[m] - u[k]).abs();
            let c = 2.0 / (d * d * d);
            jac[m * n + k] = -c;
            diag += c;
        }
        jac[m * n + m] = diag;
    }
    jac
}

fn solve_spd(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    // In-place Cholesky, lower triangle.
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::Singular("crystal Jacobian not positive definite".into()));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b)
}

/// Physical gaps between neighbouring ions, in metres.
pub fn ion_spacings(crystal: &IonCrystal) -> Vec<f64> {
    crystal
        .dimensionless_positions
        .windows(2)
        .map(|w| crystal.length_scale * (w[1] - w[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn calcium(f: f64, n: usize) -> TrapSpec {
        TrapSpec {
            ion_mass_u: 40.0,
            ion_charge: 1,
            axial_frequency_hz: f,
            ion_count: n,
        }
    }

    #[test]
    fn calcium_length_scale_at_700_khz() {
        // Closed form with CODATA 2018 constants: 5.6416 um.
        let l = length_scale(&calcium(700e3, 10)).unwrap();
        assert_relative_eq!(l, 5.641_558_5e-6, max_relative = 1e-6);
    }

    #[test]
    fn length_scale_frequency_scaling() {
        let l1 = length_scale(&calcium(500e3, 3)).unwrap();
        let l4 = length_scale(&calcium(2000e3, 3)).unwrap();
        assert_relative_eq!(l4 / l1, 0.25_f64.powf(2.0 / 3.0), max_relative = 1e-12);
    }

    #[test]
    fn length_scale_mass_scaling() {
        let mut heavy = calcium(1e6, 2);
        heavy.ion_mass_u *= 8.0;
        let ratio = length_scale(&heavy).unwrap() / length_scale(&calcium(1e6, 2)).unwrap();
        assert_relative_eq!(ratio, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn invalid_traps_rejected() {
        assert!(matches!(
            length_scale(&calcium(0.0, 2)),
            Err(Error::InvalidInput {
                field: "axial_frequency",
                ..
            })
        ));
        let mut t = calcium(1e6, 2);
        t.ion_mass_u = -1.0;
        assert!(length_scale(&t).is_err());
        t = calcium(1e6, 2);
        t.ion_charge = 0;
        assert!(length_scale(&t).is_err());
        t = calcium(1e6, 0);
        assert!(t.validate().is_err());
    }

    #[test]
    fn analytic_small_crystals() {
        assert_eq!(equilibrium_positions(1, 1e-12).unwrap(), vec![0.0]);
        let two = equilibrium_positions(2, 1e-12).unwrap();
        let a = 0.25_f64.cbrt();
        assert_relative_eq!(two[0], -a, epsilon = 1e-12);
        assert_relative_eq!(two[1], a, epsilon = 1e-12);
        let three = equilibrium_positions(3, 1e-12).unwrap();
        let b = 1.25_f64.cbrt();
        assert_relative_eq!(three[0], -b, epsilon = 1e-12);
        assert!(three[1].abs() < 1e-12);
        assert_relative_eq!(three[2], b, epsilon = 1e-12);
    }

    #[test]
    fn ten_ion_minimum_gap_matches_empirical_law() {
        let u = equilibrium_positions(10, 1e-12).unwrap();
        let min_gap = u.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
        let law = 2.018 / 10f64.powf(0.559);
        assert!((min_gap / law - 1.0).abs() < 0.10, "{min_gap} vs {law}");
    }

    #[test]
    fn deterministic_output() {
        assert_eq!(
            equilibrium_positions(17, 1e-12).unwrap(),
            equilibrium_positions(17, 1e-12).unwrap()
        );
    }

    #[test]
    fn rejects_bad_solver_arguments() {
        assert!(equilibrium_positions(0, 1e-12).is_err());
        assert!(equilibrium_positions(4, 0.0).is_err());
    }

    #[test]
    fn two_ion_gap() {
        let crystal = IonCrystal::solve(calcium(1e6, 2)).unwrap();
        let gaps = ion_spacings(&crystal);
        assert_eq!(gaps.len(), 1);
        assert_relative_eq!(
            gaps[0],
            2.0 * 0.25_f64.cbrt() * crystal.length_scale,
            max_relative = 1e-12
        );
    }

    #[test]
    fn calcium_ten_ion_gaps() {
        // Independent fsolve of the force balance: 3.183..4.348 um.
        let crystal = IonCrystal::solve(calcium(700e3, 10)).unwrap();
        let gaps = ion_spacings(&crystal);
        assert_eq!(gaps.len(), 9);
        assert_relative_eq!(gaps[4], 3.183_008_6e-6, max_relative = 1e-5);
        assert_relative_eq!(gaps[0], 4.348_479_0e-6, max_relative = 1e-5);
        assert_relative_eq!(gaps[8], gaps[0], max_relative = 1e-10);
        let mean = gaps.iter().sum::<f64>() / 9.0;
        assert_relative_eq!(mean, 3.599_095e-6, max_relative = 1e-5);
    }

    #[test]
    fn gaps_scale_with_length_scale() {
        let crystal = IonCrystal::solve(calcium(700e3, 6)).unwrap();
        let mut scaled = crystal.clone();
        scaled.length_scale *= 2.5;
        for (a, b) in ion_spacings(&crystal).iter().zip(ion_spacings(&scaled)) {
            assert_relative_eq!(b, 2.5 * a, max_relative = 1e-14);
        }
    }
}
