//! Gaussian beam propagation and link geometry.

use std::f64::consts::PI;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Spherical-wave atmospheric coherence length `(0.55 Cn^2 k^2 z)^(-3/5)`
/// with `k = 2 pi / wavelength`.
pub fn coherence_length_spherical(cn2: f64, wavelength: f64, z: f64) -> Result<f64> {
    ensure_positive("cn2", cn2)?;
    ensure_positive("wavelength", wavelength)?;
    ensure_positive("z", z)?;
    let k = 2.0 * PI / wavelength;
    Ok((0.55 * cn2 * k * k * z).powf(-0.6))
}

/// Beam radius after propagating `z` metres.
///
/// `rho0` is the atmospheric coherence length; `None` means propagation in
/// vacuum (`epsilon = 1`). At `z = 0` the result is `w0` exactly.
pub fn beam_radius_at(w0: f64, wavelength: f64, z: f64, rho0: Option<f64>) -> Result<f64> {
    ensure_positive("w0", w0)?;
    ensure_positive("wavelength", wavelength)?;
    ensure_non_negative("z", z)?;
    let epsilon = match rho0 {
        Some(rho0) => {
            ensure_positive("rho0", rho0)?;
            1.0 + 2.0 * w0 * w0 / (rho0 * rho0)
        }
        None => 1.0,
    };
    if z == 0.0 {
        return Ok(w0);
    }
    let spread = wavelength * z / (PI * w0 * w0);
    Ok(w0 * (1.0 + epsilon * spread * spread).sqrt())
}

/// Normalized Gaussian beam intensity at radial offset `rho` (1/m^2).
pub fn beam_intensity(rho: f64, wz: f64) -> Result<f64> {
    ensure_positive("wz", wz)?;
    ensure_non_negative("rho", rho)?;
    Ok(beam_intensity_unchecked(rho, wz))
}

#[inline]
pub(crate) fn beam_intensity_unchecked(rho: f64, wz: f64) -> f64 {
    let w2 = wz * wz;
    2.0 / (PI * w2) * (-2.0 * rho * rho / w2).exp()
}

/// Parameters of the transmitter that produced a beam radius, kept for provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub w0: f64,
    pub wavelength: f64,
    pub z: f64,
    pub cn2: Option<f64>,
}

/// Beam radius at the receiver together with the detection aperture radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    transmitter: Option<Transmitter>,
    wz: f64,
    ra: f64,
}

impl BeamGeometry {
    /// Geometry from a beam radius that is already known.
    pub fn from_beam_radius(wz: f64, ra: f64) -> Result<Self> {
        ensure_positive("wz", wz)?;
        ensure_positive("ra", ra)?;
        Ok(Self {
            transmitter: None,
            wz,
            ra,
        })
    }

    /// Geometry from transmitter parameters; `cn2 = None` propagates in vacuum.
    pub fn from_link(w0: f64, wavelength: f64, z: f64, cn2: Option<f64>, ra: f64) -> Result<Self> {
        ensure_positive("ra", ra)?;
        ensure_positive("z", z)?;
        let rho0 = cn2
            .map(|cn2| coherence_length_spherical(cn2, wavelength, z))
            .transpose()?;
        let wz = beam_radius_at(w0, wavelength, z, rho0)?;
        Ok(Self {
            transmitter: Some(Transmitter {
                w0,
                wavelength,
                z,
                cn2,
            }),
            wz,
            ra,
        })
    }

    pub fn wz(&self) -> f64 {
        self.wz
    }

    pub fn ra(&self) -> f64 {
        self.ra
    }

    pub fn transmitter(&self) -> Option<&Transmitter> {
        self.transmitter.as_ref()
    }

    pub fn wz_over_ra(&self) -> f64 {
        self.wz / self.ra
    }
}

/// Dimensionless case `w_z / R_a` with an aperture radius (default 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedCase {
    wz_over_ra: f64,
    ra: f64,
}

impl NormalizedCase {
    pub fn new(wz_over_ra: f64) -> Result<Self> {
        Self::with_aperture(wz_over_ra, 1.0)
    }

    pub fn with_aperture(wz_over_ra: f64, ra: f64) -> Result<Self> {
        ensure_positive("wz_over_ra", wz_over_ra)?;
        ensure_positive("ra", ra)?;
        Ok(Self { wz_over_ra, ra })
    }

    pub fn wz_over_ra(&self) -> f64 {
        self.wz_over_ra
    }

    pub fn ra(&self) -> f64 {
        self.ra
    }

    pub fn wz(&self) -> f64 {
        self.wz_over_ra * self.ra
    }
}

/// Anything that reduces to a `(wz, ra)` pair.
pub trait Geometry {
    fn wz(&self) -> f64;
    fn ra(&self) -> f64;
}

impl Geometry for BeamGeometry {
    fn wz(&self) -> f64 {
        self.wz
    }
    fn ra(&self) -> f64 {
        self.ra
    }
}

impl Geometry for NormalizedCase {
    fn wz(&self) -> f64 {
        NormalizedCase::wz(self)
    }
    fn ra(&self) -> f64 {
        self.ra
    }
}

impl From<NormalizedCase> for BeamGeometry {
    fn from(case: NormalizedCase) -> Self {
        Self {
            transmitter: None,
            wz: case.wz(),
            ra: case.ra,
        }
    }
}

impl TryFrom<BeamGeometry> for NormalizedCase {
    type Error = Error;

    fn try_from(g: BeamGeometry) -> Result<Self> {
        NormalizedCase::with_aperture(g.wz / g.ra, g.ra)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_to_infinity, QuadratureSpec};

    #[test]
    fn coherence_length_matches_high_precision_value() {
        // mpmath, 40 digits: (0.55 * 1e-14 * (2 pi / 1.55e-6)^2 * 1000)^(-3/5)
        let rho0 = coherence_length_spherical(1e-14, 1.55e-6, 1000.0).unwrap();
        let want = 0.067_044_720_110_078_670;
        assert!(((rho0 - want) / want).abs() < 1e-13, "{rho0}");
    }

    #[test]
    fn coherence_length_power_law() {
        let base = coherence_length_spherical(1e-14, 1.55e-6, 1000.0).unwrap();
        let far = coherence_length_spherical(1e-14, 1.55e-6, 1000.0 * 2f64.powf(5.0 / 3.0)).unwrap();
        assert!((far / base - 0.5).abs() < 1e-13);
        for z in [10.0, 500.0, 7000.0] {
            let a = coherence_length_spherical(3e-15, 8.5e-7, z).unwrap() * z.powf(0.6);
            let b = coherence_length_spherical(3e-15, 8.5e-7, 1.0).unwrap();
            assert!((a / b - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn coherence_length_rejects_zero_cn2() {
        assert!(matches!(
            coherence_length_spherical(0.0, 1.55e-6, 1000.0),
            Err(Error::Domain(_))
        ));
        assert!(coherence_length_spherical(1e-14, -1.0, 1000.0).is_err());
    }

    #[test]
    fn beam_radius_identities() {
        assert_eq!(beam_radius_at(0.01, 1.55e-6, 0.0, Some(0.05)).unwrap(), 0.01);
        let vac = beam_radius_at(0.01, 1.55e-6, 2000.0, None).unwrap();
        let spread: f64 = 1.55e-6 * 2000.0 / (PI * 1e-4);
        assert!((vac - 0.01 * (1.0 + spread * spread).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn beam_radius_matches_high_precision_value() {
        // mpmath, 40 digits, rho0 from coherence_length_spherical(1e-14, 1.55e-6, 2000)
        let rho0 = coherence_length_spherical(1e-14, 1.55e-6, 2000.0).unwrap();
        let wz = beam_radius_at(0.01, 1.55e-6, 2000.0, Some(rho0)).unwrap();
        let want = 0.104_078_242_506_664_17;
        assert!(((wz - want) / want).abs() < 1e-13, "{wz}");
    }

    #[test]
    fn beam_radius_monotone_in_distance_and_turbulence() {
        let mut prev = 0.0;
        for i in 0..50 {
            let z = 100.0 * i as f64;
            let w = beam_radius_at(0.02, 1.55e-6, z, Some(0.03)).unwrap();
            assert!(w >= prev);
            prev = w;
        }
        let mut prev = 0.0;
        for cn2 in [1e-17, 1e-16, 1e-15, 1e-14, 1e-13] {
            let g = BeamGeometry::from_link(0.02, 1.55e-6, 3000.0, Some(cn2), 0.1).unwrap();
            assert!(g.wz() >= prev);
            prev = g.wz();
        }
    }

    #[test]
    fn intensity_values_and_normalization() {
        assert!((beam_intensity(0.0, 1.0).unwrap() - 2.0 / PI).abs() < 1e-16);
        let wz = 0.7;
        let at_wz = beam_intensity(wz, wz).unwrap();
        assert!((at_wz - 2.0 / PI * (-2.0f64).exp() / (wz * wz)).abs() < 1e-15);

        let spec = QuadratureSpec::new(1e-13, 1e-15, 500).unwrap();
        for wz in [0.05, 1.0, 6.0] {
            let total =
                integrate_to_infinity(|r| beam_intensity_unchecked(r, wz) * 2.0 * PI * r, 0.0, &spec)
                    .unwrap();
            assert!((total - 1.0).abs() < 1e-10, "wz={wz}: {total}");
        }
    }

    #[test]
    fn geometry_reduces_to_normalized_case() {
        let g = BeamGeometry::from_beam_radius(0.4, 0.2).unwrap();
        let n = NormalizedCase::try_from(g).unwrap();
        assert_eq!(n.wz_over_ra(), 2.0);
        assert_eq!(n.wz(), 0.4);
        assert!(g.transmitter().is_none());
        assert!(NormalizedCase::new(0.0).is_err());
        assert!(BeamGeometry::from_beam_radius(1.0, -1.0).is_err());
    }
}
