//! Physical constants (CODATA 2018, exact where the SI defines them).

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Standard atmosphere, Pa.
pub const ATMOSPHERE: f64 = 101_325.0;

/// Torr, Pa.
pub const TORR: f64 = 101_325.0 / 760.0;

/// Offset between the Celsius and Kelvin scales.
pub const ZERO_CELSIUS: f64 = 273.15;

/// Ratio between the full width at half maximum and the standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
