//! Holevo bound on Eve's information about Bob's heterodyne outcomes, for a
//! two-mode Gaussian state with covariance blocks `a·I`, `b·I`, `c·Z`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Error, Result};

/// Relative tolerance below which small negative radicands and eigenvalues
/// marginally below 1 are treated as rounding noise.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Averaged covariance data `(Σa, Σb, Σc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTriple {
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_c: f64,
}

impl CovarianceTriple {
    pub fn new(sigma_a: f64, sigma_b: f64, sigma_c: f64) -> Self {
        Self {
            sigma_a,
            sigma_b,
            sigma_c,
        }
    }

    /// Largest correlation for which `(a, b, c)` is a physical state:
    /// `c² ≤ ab − 1 − |a − b|`.
    pub fn max_correlation(a: f64, b: f64) -> f64 {
        (a * b - 1.0 - (a - b).abs()).max(0.0).sqrt()
    }

    /// Checks `a ≥ 1`, `b ≥ 1`, `c ≥ 0` and `ab − c² ≥ 1`, up to [`CLAMP_TOLERANCE`].
    pub fn check_physical(&self) -> Result<()> {
        let (a, b, c) = (self.sigma_a, self.sigma_b, self.sigma_c);
        let fail = |reason| Err(Error::Unphysical { a, b, c, reason });
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return fail("entries must be finite");
        }
        if a < 1.0 - CLAMP_TOLERANCE * a.abs().max(1.0) {
            return fail("sigma_a < 1");
        }
        if b < 1.0 - CLAMP_TOLERANCE * b.abs().max(1.0) {
            return fail("sigma_b < 1");
        }
        if c < 0.0 {
            return fail("sigma_c < 0");
        }
        let det = a * b - c * c;
        if det < 1.0 - CLAMP_TOLERANCE * (a * b).max(1.0) {
            return fail("sigma_a * sigma_b - sigma_c^2 < 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
}

/// Von Neumann entropy in bits of a thermal state with mean photon number `x`.
pub fn g_entropy(x: f64) -> Result<f64> {
    ensure_domain(x >= 0.0, "x", x, ">= 0")?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(((x + 1.0) * (x + 1.0).log2()) - x * x.log2())
}

/// Symplectic eigenvalues `ν1 ≥ ν2` of the two-mode covariance matrix.
///
/// With `Δ = a² + b² − 2c²` and `√D = ab − c²` the eigenvalues satisfy
/// `ν1² + ν2² = Δ` and `ν1 ν2 = √D`. The radicand `Δ² − 4D` factors as
/// `(a − b)²((a + b)² − 4c²)`, so `ν1 ± ν2` are available without cancellation:
/// `ν1 − ν2 = |a − b|`, `ν1 + ν2 = √((a + b)² − 4c²)`.
pub fn symplectic_eigenvalues(cov: &CovarianceTriple) -> Result<(f64, f64)> {
    cov.check_physical()?;
    let (a, b, c) = (cov.sigma_a, cov.sigma_b, cov.sigma_c);
    let sum = a + b;
    let mut s2 = sum * sum - 4.0 * c * c;
    if s2 < 0.0 {
        if s2 < -CLAMP_TOLERANCE * sum * sum {
            return Err(Error::NumericalDegeneracy {
                radicand: (a - b).powi(2) * s2,
            });
        }
        s2 = 0.0;
    }
    let s = s2.sqrt();
    let diff = (a - b).abs();
    Ok(((s + diff) / 2.0, (s - diff) / 2.0))
}

/// Symplectic eigenvalue of Alice's mode conditioned on Bob's heterodyne outcome.
pub fn conditional_nu3(cov: &CovarianceTriple) -> Result<f64> {
    cov.check_physical()?;
    Ok(cov.sigma_a - cov.sigma_c * cov.sigma_c / (1.0 + cov.sigma_b))
}

pub fn symplectic_spectrum(cov: &CovarianceTriple) -> Result<SymplecticSpectrum> {
    let (nu1, nu2) = symplectic_eigenvalues(cov)?;
    Ok(SymplecticSpectrum {
        nu1,
        nu2,
        nu3: conditional_nu3(cov)?,
    })
}

/// `g((ν − 1)/2)`, treating `ν` marginally below 1 as 1.
fn g_of_nu(nu: f64, cov: &CovarianceTriple) -> Result<f64> {
    let x = (nu - 1.0) / 2.0;
    if x < 0.0 {
        let scale = cov.sigma_a.max(cov.sigma_b).max(1.0);
        if x < -CLAMP_TOLERANCE * scale {
            return Err(Error::Unphysical {
                a: cov.sigma_a,
                b: cov.sigma_b,
                c: cov.sigma_c,
                reason: "symplectic eigenvalue below 1",
            });
        }
        return Ok(0.0);
    }
    g_entropy(x)
}

/// Holevo information `χ(Y;E)` in bits per symbol.
pub fn holevo_f(cov: &CovarianceTriple) -> Result<f64> {
    let sp = symplectic_spectrum(cov)?;
    let f = g_of_nu(sp.nu1, cov)? + g_of_nu(sp.nu2, cov)? - g_of_nu(sp.nu3, cov)?;
    // Exact zero for pure states can come out as -1e-15.
    Ok(f.max(0.0))
}
