//! Physical constants (CODATA 2018 recommended values, SI units).

/// Elementary charge in coulomb (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Atomic mass constant in kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Micrometre in metres.
pub const MICRON: f64 = 1e-6;
