//! Spatial layout of the bistatic RIS radar.
//!
//! Positions are in meters. The RIS lies in the YZ plane; the imaging scene
//! is in front of it (positive x). Azimuth is `atan2(Δy, Δx)` and elevation
//! is `asin(Δz / r)`, both measured from the transmitter.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::{Cx, Point};

/// Radio constants of the sensing system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConstants {
    carrier_frequency_hz: f64,
    propagation_speed_m_s: f64,
    wavelength_m: f64,
    power_efficiency: f64,
    pulse_spectrum: Cx,
}

impl RadioConstants {
    /// Wavelength is always derived as `c / f_c`.
    pub fn new(
        carrier_frequency_hz: f64,
        propagation_speed_m_s: f64,
        power_efficiency: f64,
        pulse_spectrum: Cx,
    ) -> Result<Self> {
        if !(carrier_frequency_hz.is_finite() && carrier_frequency_hz > 0.0) {
            return Err(invalid!("carrier frequency must be positive, got {carrier_frequency_hz}"));
        }
        if !(propagation_speed_m_s.is_finite() && propagation_speed_m_s > 0.0) {
            return Err(invalid!("propagation speed must be positive, got {propagation_speed_m_s}"));
        }
        if !(power_efficiency > 0.0 && power_efficiency <= 1.0) {
            return Err(invalid!("power efficiency must lie in (0, 1], got {power_efficiency}"));
        }
        if !(pulse_spectrum.re.is_finite() && pulse_spectrum.im.is_finite()) {
            return Err(invalid!("pulse spectrum must be finite"));
        }
        Ok(Self {
            carrier_frequency_hz,
            propagation_speed_m_s,
            wavelength_m: propagation_speed_m_s / carrier_frequency_hz,
            power_efficiency,
            pulse_spectrum,
        })
    }

    pub fn carrier_frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }

    pub fn propagation_speed_m_s(&self) -> f64 {
        self.propagation_speed_m_s
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn power_efficiency(&self) -> f64 {
        self.power_efficiency
    }

    /// Scalar pulse spectrum `P` at the operating frequency.
    pub fn pulse_spectrum(&self) -> Cx {
        self.pulse_spectrum
    }

    /// Angular carrier frequency `2π f_c`.
    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.carrier_frequency_hz
    }
}

/// Transmit antenna gain as a function of (azimuth, elevation) in radians.
#[derive(Clone, Copy, Default)]
pub enum AntennaPattern {
    /// Unit gain in every direction.
    #[default]
    Isotropic,
    Custom(fn(f64, f64) -> f64),
}

impl AntennaPattern {
    pub fn gain(&self, azimuth: f64, elevation: f64) -> Result<f64> {
        let g = match self {
            AntennaPattern::Isotropic => 1.0,
            AntennaPattern::Custom(f) => f(azimuth, elevation),
        };
        if g.is_finite() && g >= 0.0 {
            Ok(g)
        } else {
            Err(invalid!(
                "antenna gain must be finite and nonnegative, got {g} at ({azimuth}, {elevation})"
            ))
        }
    }
}

impl fmt::Debug for AntennaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AntennaPattern::Isotropic => f.write_str("Isotropic"),
            AntennaPattern::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Range and angles of a point as seen from the transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spherical {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl Spherical {
    /// Cartesian offset `r (cos β cos α, cos β sin α, sin β)`.
    pub fn to_offset(&self) -> Point {
        let (sa, ca) = self.azimuth.sin_cos();
        let (sb, cb) = self.elevation.sin_cos();
        Point::new(cb * ca, cb * sa, sb) * self.range
    }
}

/// Complete spatial description of the radar scene.
#[derive(Debug, Clone)]
pub struct SceneGeometry {
    tx: Point,
    rx: Point,
    ris: Vec<Point>,
    targets: Vec<Point>,
    constants: RadioConstants,
    pattern: AntennaPattern,
}

fn all_finite(p: &Point) -> bool {
    p.iter().all(|c| c.is_finite())
}

impl SceneGeometry {
    pub fn new(
        tx: Point,
        rx: Point,
        ris: Vec<Point>,
        targets: Vec<Point>,
        constants: RadioConstants,
    ) -> Result<Self> {
        if ris.is_empty() {
            return Err(invalid!("the RIS needs at least one element"));
        }
        if targets.is_empty() {
            return Err(invalid!("the target grid needs at least one point"));
        }
        if !all_finite(&tx) || !all_finite(&rx) {
            return Err(invalid!("transmitter and receiver positions must be finite"));
        }
        for (m, e) in ris.iter().enumerate() {
            if !all_finite(e) {
                return Err(invalid!("RIS element {m} has a non-finite position"));
            }
            if *e == tx {
                return Err(Error::DegenerateGeometry(alloc::format!(
                    "RIS element {m} coincides with the transmitter"
                )));
            }
        }
        for (k, t) in targets.iter().enumerate() {
            if !all_finite(t) {
                return Err(invalid!("target {k} has a non-finite position"));
            }
            if *t == rx {
                return Err(Error::DegenerateGeometry(alloc::format!(
                    "target {k} coincides with the receiver"
                )));
            }
            if let Some(m) = ris.iter().position(|e| e == t) {
                return Err(Error::DegenerateGeometry(alloc::format!(
                    "target {k} coincides with RIS element {m}"
                )));
            }
        }
        Ok(Self {
            tx,
            rx,
            ris,
            targets,
            constants,
            pattern: AntennaPattern::Isotropic,
        })
    }

    pub fn with_pattern(mut self, pattern: AntennaPattern) -> Self {
        self.pattern = pattern;
        self
    }

    pub fn tx(&self) -> Point {
        self.tx
    }

    pub fn rx(&self) -> Point {
        self.rx
    }

    pub fn ris_elements(&self) -> &[Point] {
        &self.ris
    }

    pub fn targets(&self) -> &[Point] {
        &self.targets
    }

    pub fn constants(&self) -> &RadioConstants {
        &self.constants
    }

    pub fn pattern(&self) -> AntennaPattern {
        self.pattern
    }

    /// Number of RIS elements `M`.
    pub fn num_elements(&self) -> usize {
        self.ris.len()
    }

    /// Number of grid pixels `K`.
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    /// Attenuation `q_m` from the transmitter to RIS element `m`.
    pub fn attenuation(&self, m: usize) -> Result<Cx> {
        let e = self
            .ris
            .get(m)
            .ok_or_else(|| invalid!("RIS element {m} out of range (M = {})", self.ris.len()))?;
        let s = spherical_from_tx(e, &self.tx)?;
        attenuation_coefficient(&s, &self.pattern, &self.constants)
    }

    /// Two-hop distance `d_{m,k}` from RIS element `m` to the receiver via target `k`.
    pub fn path(&self, m: usize, k: usize) -> Result<f64> {
        let e = self
            .ris
            .get(m)
            .ok_or_else(|| invalid!("RIS element {m} out of range (M = {})", self.ris.len()))?;
        let t = self
            .targets
            .get(k)
            .ok_or_else(|| invalid!("target {k} out of range (K = {})", self.targets.len()))?;
        Ok(path_distance(e, t, &self.rx))
    }

    /// Order-sensitive fingerprint of the target grid.
    pub fn grid_fingerprint(&self) -> u64 {
        crate::fingerprint_f64s(self.targets.iter().flat_map(|p| [p.x, p.y, p.z]))
    }
}

/// Uniform rectangular RIS in the YZ plane.
///
/// Element `(i, j)` sits at `origin + (0, j·spacing, i·spacing)`; rows are
/// the outer index.
pub fn build_ris_rectangular(
    rows: usize,
    cols: usize,
    spacing_m: f64,
    origin: Point,
) -> Result<Vec<Point>> {
    if rows == 0 || cols == 0 {
        return Err(invalid!("RIS dimensions must be positive, got {rows}x{cols}"));
    }
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(invalid!("RIS spacing must be positive, got {spacing_m}"));
    }
    Ok((0..rows)
        .flat_map(|i| {
            (0..cols).map(move |j| {
                origin + Point::new(0.0, j as f64 * spacing_m, i as f64 * spacing_m)
            })
        })
        .collect())
}

/// Rectangular pixel grid in the plane `z = origin.z`.
///
/// Range (x) is the outer index and cross-range (y) the inner one, so pixel
/// `(a, b)` has index `a·crossrange_points + b`.
pub fn build_target_grid(
    range_points: usize,
    crossrange_points: usize,
    spacing_m: f64,
    origin: Point,
) -> Result<Vec<Point>> {
    if range_points == 0 || crossrange_points == 0 {
        return Err(invalid!(
            "grid dimensions must be positive, got {range_points}x{crossrange_points}"
        ));
    }
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(invalid!("grid spacing must be positive, got {spacing_m}"));
    }
    Ok((0..range_points)
        .flat_map(|a| {
            (0..crossrange_points).map(move |b| {
                origin + Point::new(a as f64 * spacing_m, b as f64 * spacing_m, 0.0)
            })
        })
        .collect())
}

pub fn spherical_from_tx(point: &Point, tx: &Point) -> Result<Spherical> {
    let delta = point - tx;
    let range = delta.norm();
    if range == 0.0 {
        return Err(Error::DegenerateGeometry(
            "point coincides with the transmitter".into(),
        ));
    }
    Ok(Spherical {
        range,
        azimuth: delta.y.atan2(delta.x),
        elevation: (delta.z / range).clamp(-1.0, 1.0).asin(),
    })
}

/// `q = λ √(η g(α, β)) / (4π r) · e^{−j 2π r / λ}`.
pub fn attenuation_coefficient(
    at: &Spherical,
    pattern: &AntennaPattern,
    constants: &RadioConstants,
) -> Result<Cx> {
    if !(at.range > 0.0) {
        return Err(Error::DegenerateGeometry(alloc::format!(
            "attenuation needs a positive range, got {}",
            at.range
        )));
    }
    let lambda = constants.wavelength_m();
    let gain = pattern.gain(at.azimuth, at.elevation)?;
    let magnitude = lambda * (constants.power_efficiency() * gain).sqrt() / (4.0 * PI * at.range);
    Ok(Cx::from_polar(magnitude, -2.0 * PI * at.range / lambda))
}

/// `‖ris − target‖ + ‖target − rx‖`.
pub fn path_distance(ris: &Point, target: &Point, rx: &Point) -> f64 {
    (ris - target).norm() + (target - rx).norm()
}
