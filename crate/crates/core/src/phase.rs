//! Phase-space geometry: distribution width parameters, evaluation points,
//! and the pair-combination rule that merges two Gaussian-smoothed points
//! into a classical prefactor plus a single barycentric point.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of a Gaussian-smoothed phase-space distribution.
///
/// `sigma = 1` is the Husimi Q function, `sigma = 2` the Wigner function,
/// and `sigma -> 0` approaches the flat (unsmoothed) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WidthParameter {
    pub sigma: f64,
}

impl WidthParameter {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid(
                "width parameter",
                format!("sigma must be finite and >= 0, got {sigma}"),
            ));
        }
        Ok(WidthParameter { sigma })
    }
}

/// Converts an ordering parameter `s < 1` to a width: `sigma = 2 / (1 - s)`.
///
/// `s = -1` gives the Husimi width 1, `s = 0` the Wigner width 2; `s = 1`
/// (the singular P-function limit) is outside the domain.
pub fn sigma_from_s(s: f64) -> Result<WidthParameter> {
    if !s.is_finite() || s >= 1.0 {
        return Err(Error::domain(format!(
            "ordering parameter must satisfy s < 1 (s = 1 is the singular limit), got {s}"
        )));
    }
    WidthParameter::new(2.0 / (1.0 - s))
}

/// Inverse of [`sigma_from_s`]: `s = 1 - 2 / sigma`, defined for `sigma > 0`.
pub fn s_from_sigma(width: WidthParameter) -> Result<f64> {
    if width.sigma <= 0.0 {
        return Err(Error::domain(format!(
            "sigma must be > 0 to map back to an ordering parameter, got {}",
            width.sigma
        )));
    }
    Ok(1.0 - 2.0 / width.sigma)
}

/// A phase-space evaluation point: one complex amplitude and one width per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    amplitudes: Vec<C64>,
    widths: Vec<f64>,
}

impl PhasePoint {
    pub fn new(amplitudes: Vec<C64>, widths: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.len() != widths.len() {
            return Err(Error::invalid(
                "phase point",
                format!(
                    "need one amplitude and one width per mode, got {} amplitudes and {} widths",
                    amplitudes.len(),
                    widths.len()
                ),
            ));
        }
        for (m, &a) in amplitudes.iter().enumerate() {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(Error::invalid(
                    "phase point",
                    format!("amplitude for mode {m} is not finite: {a}"),
                ));
            }
        }
        for (m, &w) in widths.iter().enumerate() {
            WidthParameter::new(w).map_err(|_| {
                Error::invalid("phase point", format!("width for mode {m} invalid: {w}"))
            })?;
        }
        Ok(PhasePoint { amplitudes, widths })
    }

    /// Single-mode point.
    pub fn single(alpha: C64, sigma: f64) -> Result<Self> {
        PhasePoint::new(vec![alpha], vec![sigma])
    }

    /// Same width on every mode.
    pub fn uniform(amplitudes: Vec<C64>, sigma: f64) -> Result<Self> {
        let widths = vec![sigma; amplitudes.len()];
        PhasePoint::new(amplitudes, widths)
    }

    pub fn mode_count(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }
}

/// Combination of two Gaussian-smoothed points on one mode.
///
/// A product of two width-`sigma` Gaussian factors centered at `alpha_1`,
/// `alpha_2` equals a Gaussian prefactor `exp(-reduced_width |delta_alpha|^2)`
/// times a single factor of width `total_width` centered at `barycenter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// Separation `alpha_2 - alpha_1`.
    pub delta_alpha: C64,
    /// Width-weighted midpoint `(s1 a1 + s2 a2) / (s1 + s2)`.
    pub barycenter: C64,
    /// Harmonic combination `s1 s2 / (s1 + s2)`.
    pub reduced_width: f64,
    /// Sum `s1 + s2`.
    pub total_width: f64,
}

/// Combines two single-mode smoothed points into their pair geometry.
///
/// When both widths are zero the combination degenerates: the reduced width
/// and total width are zero and the barycenter is the unweighted midpoint.
pub fn pair_geometry(a1: C64, s1: f64, a2: C64, s2: f64) -> PairGeometry {
    assert!(s1 >= 0.0 && s2 >= 0.0, "pair geometry needs nonnegative widths");
    let total = s1 + s2;
    if total == 0.0 {
        return PairGeometry {
            delta_alpha: a2 - a1,
            barycenter: 0.5 * (a1 + a2),
            reduced_width: 0.0,
            total_width: 0.0,
        };
    }
    PairGeometry {
        delta_alpha: a2 - a1,
        barycenter: (a1 * s1 + a2 * s2) / total,
        reduced_width: s1 * s2 / total,
        total_width: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ordering_parameter_maps_to_known_widths() {
        assert_relative_eq!(sigma_from_s(-1.0).unwrap().sigma, 1.0);
        assert_relative_eq!(sigma_from_s(0.0).unwrap().sigma, 2.0);
        assert!(sigma_from_s(1.0).is_err());
        assert!(sigma_from_s(1.5).is_err());
    }

    #[test]
    fn width_roundtrip() {
        for &s in &[-3.0, -1.0, -0.25, 0.0, 0.5, 0.99] {
            let w = sigma_from_s(s).unwrap();
            assert_relative_eq!(s_from_sigma(w).unwrap(), s, max_relative = 1e-14);
        }
        assert!(s_from_sigma(WidthParameter { sigma: 0.0 }).is_err());
    }

    #[test]
    fn pair_geometry_equal_widths() {
        let a1 = C64::new(1.0, 2.0);
        let a2 = C64::new(-0.5, 0.25);
        let g = pair_geometry(a1, 1.0, a2, 1.0);
        assert_eq!(g.delta_alpha, a2 - a1);
        let mid = 0.5 * (a1 + a2);
        assert_relative_eq!(g.barycenter.re, mid.re);
        assert_relative_eq!(g.barycenter.im, mid.im);
        assert_relative_eq!(g.reduced_width, 0.5);
        assert_relative_eq!(g.total_width, 2.0);
    }

    #[test]
    fn pair_geometry_degenerate_zero_widths() {
        let a1 = C64::new(0.3, -0.4);
        let a2 = C64::new(1.1, 0.9);
        let g = pair_geometry(a1, 0.0, a2, 0.0);
        assert_eq!(g.reduced_width, 0.0);
        assert_eq!(g.total_width, 0.0);
        let mid = 0.5 * (a1 + a2);
        assert_relative_eq!(g.barycenter.re, mid.re);
        assert_relative_eq!(g.barycenter.im, mid.im);
    }

    #[test]
    fn pair_geometry_weights_toward_wider_factor() {
        let a1 = C64::new(0.0, 0.0);
        let a2 = C64::new(1.0, 0.0);
        let g = pair_geometry(a1, 1.0, a2, 3.0);
        assert_relative_eq!(g.barycenter.re, 0.75);
        assert_relative_eq!(g.reduced_width, 0.75);
        assert_relative_eq!(g.total_width, 4.0);
    }

    #[test]
    fn phase_point_validation() {
        assert!(PhasePoint::new(vec![], vec![]).is_err());
        assert!(PhasePoint::new(vec![C64::new(0.0, 0.0)], vec![1.0, 2.0]).is_err());
        assert!(PhasePoint::single(C64::new(0.0, 0.0), -0.5).is_err());
        assert!(PhasePoint::single(C64::new(f64::NAN, 0.0), 1.0).is_err());
        let p = PhasePoint::uniform(vec![C64::new(1.0, 0.0); 3], 2.0).unwrap();
        assert_eq!(p.mode_count(), 3);
        assert_eq!(p.widths(), &[2.0, 2.0, 2.0]);
    }
}
