use crate::C64;

use super::DiscretizationError;

/// Quadratic PML damping profile on `[0, 1]`.
///
/// Zero on `[eta, 1 - eta]`, rising to `c_pml / eta` at both ends.
pub fn sigma_profile(t: f64, c_pml: f64, eta: f64) -> Result<f64, DiscretizationError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(DiscretizationError::Domain(format!("t = {t} outside [0, 1]")));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(DiscretizationError::Domain(format!("eta = {eta} outside (0, 1/2)")));
    }
    if c_pml <= 0.0 || !c_pml.is_finite() {
        return Err(DiscretizationError::Domain(format!("PML strength {c_pml} must be positive")));
    }
    Ok(sigma_two_sided(t, c_pml, eta, true, true))
}

/// Complex stretch `(1 + i sigma(t) / omega)^{-1}`.
pub fn pml_stretch(t: f64, omega: f64, c_pml: f64, eta: f64) -> Result<C64, DiscretizationError> {
    if omega <= 0.0 || !omega.is_finite() {
        return Err(DiscretizationError::Domain(format!("omega = {omega} must be positive")));
    }
    let sigma = sigma_profile(t, c_pml, eta)?;
    Ok(stretch_from_sigma(sigma, omega))
}

fn sigma_two_sided(t: f64, c_pml: f64, eta: f64, low: bool, high: bool) -> f64 {
    if low && t < eta {
        let r = (t - eta) / eta;
        c_pml / eta * r * r
    } else if high && t > 1.0 - eta {
        let r = (t - 1.0 + eta) / eta;
        c_pml / eta * r * r
    } else {
        0.0
    }
}

fn stretch_from_sigma(sigma: f64, omega: f64) -> C64 {
    if sigma == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(1.0, sigma / omega).inv()
    }
}

/// Stretch function along one axis, with the PML switched on per side.
///
/// A side without PML (Dirichlet) has `s = 1` up to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStretch {
    pub omega: f64,
    pub c_pml: f64,
    pub eta: f64,
    pub low_pml: bool,
    pub high_pml: bool,
}

impl AxisStretch {
    pub fn sigma(&self, t: f64) -> f64 {
        sigma_two_sided(t, self.c_pml, self.eta, self.low_pml, self.high_pml)
    }

    pub fn stretch(&self, t: f64) -> C64 {
        stretch_from_sigma(self.sigma(t), self.omega)
    }
}
