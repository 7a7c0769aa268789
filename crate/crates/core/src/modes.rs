//! Rectangular-waveguide geometry and TE_m0 modal parameters.
//!
//! Fields are expanded over the TE_m0 family only: transverse wavenumber
//! `p_m = m*pi/a`, propagation constant `gamma_m = sqrt(p_m^2 - w^2*mu*eps)`,
//! wave impedance `Z_m = j*w*mu/gamma_m` and the power normalization
//! `G_m = sqrt(2j*w*mu / (gamma_m*a*b*p_m^2))`. The time convention is
//! `e^{+j w t}`, so `e^{-gamma z}` is the forward/decaying factor.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact SI definition).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

/// Relative tolerance factor for cutoff detection: a mode counts as
/// singular when `|gamma| < GAMMA_TOL_FACTOR * (2*pi*f/c)`.
pub const GAMMA_TOL_FACTOR: f64 = 1e-6;

/// Rectangular waveguide cross-section filled with a uniform lossless medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveguide {
    /// Width in meters (the TE_m0 field varies along this dimension).
    pub a: f64,
    /// Height in meters.
    pub b: f64,
    /// Relative permittivity of the fill medium.
    pub eps_r: f64,
    /// Relative permeability of the fill medium.
    pub mu_r: f64,
}

impl Waveguide {
    pub fn new(a: f64, b: f64, eps_r: f64, mu_r: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::invalid(format!(
                "waveguide dimensions must be positive (a = {a}, b = {b})"
            )));
        }
        if !(eps_r >= 1.0) || !(mu_r >= 1.0) {
            return Err(Error::invalid(format!(
                "fill medium must satisfy eps_r >= 1 and mu_r >= 1 (eps_r = {eps_r}, mu_r = {mu_r})"
            )));
        }
        Ok(Waveguide { a, b, eps_r, mu_r })
    }

    /// WR-62 air-filled guide: a = 15.799 mm, b = 7.899 mm.
    pub fn wr62() -> Self {
        Waveguide {
            a: 15.799e-3,
            b: 7.899e-3,
            eps_r: 1.0,
            mu_r: 1.0,
        }
    }

    /// Permeability of the fill medium, H/m.
    pub fn mu(&self) -> f64 {
        MU0 * self.mu_r
    }

    /// Permittivity of the fill medium, F/m.
    pub fn eps(&self) -> f64 {
        EPS0 * self.eps_r
    }

    /// Cutoff frequency of the TE_m0 mode: `m*c / (2*a*sqrt(eps_r*mu_r))`.
    pub fn cutoff_frequency(&self, m: usize) -> Result<f64> {
        if m < 1 {
            return Err(Error::invalid(format!("mode index must be >= 1, got {m}")));
        }
        Ok(m as f64 * C0 / (2.0 * self.a * (self.eps_r * self.mu_r).sqrt()))
    }

    /// Modal parameters of the TE_m0 mode at frequency `f` (Hz).
    pub fn mode_params(&self, m: usize, f: f64) -> Result<ModeParams> {
        if m < 1 {
            return Err(Error::invalid(format!("mode index must be >= 1, got {m}")));
        }
        if !(f > 0.0) {
            return Err(Error::invalid(format!(
                "frequency must be positive, got {f}"
            )));
        }
        let omega = 2.0 * PI * f;
        let mu = self.mu();
        let eps = self.eps();
        let p = m as f64 * PI / self.a;

        // gamma = sqrt(p^2 - w^2 mu eps), branch with Re >= 0 and, on the
        // propagating branch (Re = 0), Im > 0 so e^{-gamma z} travels forward.
        let d = p * p - omega * omega * mu * eps;
        let gamma = if d >= 0.0 {
            Complex64::new(d.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-d).sqrt())
        };

        let tol = GAMMA_TOL_FACTOR * omega / C0;
        if gamma.norm() < tol {
            return Err(Error::CutoffSingular {
                m,
                f_hz: f,
                gamma_abs: gamma.norm(),
                tol,
            });
        }

        let jwm = Complex64::new(0.0, omega * mu);
        let z = jwm / gamma;
        // Principal square root; the overall sign of G cancels in the
        // scattering matrix.
        let g = (2.0 * jwm / (gamma * self.a * self.b * p * p)).sqrt();

        Ok(ModeParams { m, p, gamma, g, z })
    }

    /// Modal parameters for modes 1..=modes at frequency `f`.
    pub fn mode_set(&self, modes: usize, f: f64) -> Result<Vec<ModeParams>> {
        (1..=modes).map(|m| self.mode_params(m, f)).collect()
    }
}

/// Per-mode parameters of one TE_m0 mode at a fixed frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    /// Mode index (>= 1).
    pub m: usize,
    /// Transverse wavenumber `m*pi/a`, rad/m.
    pub p: f64,
    /// Propagation constant, 1/m. Real > 0 for evanescent modes, purely
    /// imaginary with Im > 0 for propagating ones.
    pub gamma: Complex64,
    /// Field normalization `G_m`.
    pub g: Complex64,
    /// Wave impedance `j*w*mu/gamma`, ohms.
    pub z: Complex64,
}

impl ModeParams {
    /// True when the mode carries real power (`Re(gamma) = 0`).
    pub fn is_propagating(&self) -> bool {
        self.gamma.re == 0.0
    }
}

/// Number of propagating modes among 1..=modes at frequency `f`.
pub fn propagating_count(wg: &Waveguide, modes: usize, f: f64) -> Result<usize> {
    let mut n = 0;
    for m in 1..=modes {
        if wg.mode_params(m, f)?.is_propagating() {
            n += 1;
        }
    }
    Ok(n)
}
