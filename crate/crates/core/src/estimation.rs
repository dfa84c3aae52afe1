//! Parameter estimation: gamma estimators, the pass/fail test, threshold
//! selection for a target robustness, and the bad-event constants.
//!
//! All `ln` terms here come from exponential tail bounds and use the natural log.

use serde::{Deserialize, Serialize};

use crate::channel::{expected_covariance, ChannelModel, Modulation};
use crate::error::{ensure_domain, Error, Result};
use crate::holevo::CovarianceTriple;

/// Sufficient statistics of Alice's and Bob's raw data, each a vector of `4n` reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub norm_x_sq: f64,
    pub norm_y_sq: f64,
    pub inner_xy: f64,
    pub n: u64,
}

impl SummaryStats {
    pub fn from_vectors(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Precondition(format!(
                "vectors differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if !x.len().is_multiple_of(4) {
            return Err(Error::InputShape {
                len: x.len(),
                multiple: 4,
            });
        }
        let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
        for (&a, &b) in x.iter().zip(y) {
            xx += a * a;
            yy += b * b;
            xy += a * b;
        }
        Ok(Self {
            norm_x_sq: xx,
            norm_y_sq: yy,
            inner_xy: xy,
            n: (x.len() / 4) as u64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimates {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
}

impl GammaEstimates {
    /// Whether the estimates bound `truth` on the safe side:
    /// `Σa ≤ γa`, `Σb ≤ γb`, `Σc ≥ γc`.
    pub fn certifies(&self, truth: &CovarianceTriple) -> bool {
        truth.sigma_a <= self.gamma_a
            && truth.sigma_b <= self.gamma_b
            && truth.sigma_c >= self.gamma_c
    }
}

/// Acceptance region of the estimation test: `γa ≤ Σa^max`, `γb ≤ Σb^max`, `γc ≥ Σc^min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeThresholds {
    pub sigma_a_max: f64,
    pub sigma_b_max: f64,
    pub sigma_c_min: f64,
}

impl PeThresholds {
    /// Accepts everything.
    pub fn unbounded() -> Self {
        Self {
            sigma_a_max: f64::INFINITY,
            sigma_b_max: f64::INFINITY,
            sigma_c_min: f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sigma_a_max.is_finite() && self.sigma_b_max.is_finite() && self.sigma_c_min.is_finite()
    }

    /// Worst-case covariance triple fed to the Holevo bound. A negative
    /// correlation bound is replaced by 0, which can only increase the bound.
    pub fn worst_case_triple(&self) -> CovarianceTriple {
        CovarianceTriple::new(
            self.sigma_a_max,
            self.sigma_b_max,
            self.sigma_c_min.max(0.0),
        )
    }
}

impl From<CovarianceTriple> for PeThresholds {
    fn from(t: CovarianceTriple) -> Self {
        Self {
            sigma_a_max: t.sigma_a,
            sigma_b_max: t.sigma_b,
            sigma_c_min: t.sigma_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadEventConstants {
    pub a: f64,
    pub a_y: f64,
    pub b: f64,
    pub b_y: f64,
    pub c: f64,
    pub d: f64,
}

fn check_eps(name: &'static str, eps: f64) -> Result<()> {
    ensure_domain(eps > 0.0 && eps < 1.0, name, eps, "0 < eps < 1")
}

/// Multiplicative factor `1 + 2√(ln(36/ε)/n)` applied to the squared norms.
pub fn norm_correction(n: u64, eps_pe: f64) -> f64 {
    1.0 + 2.0 * ((36.0 / eps_pe).ln() / n as f64).sqrt()
}

/// Coefficient of `‖X‖² + ‖Y‖²` subtracted from the inner-product estimate.
pub fn inner_product_correction(n: u64, eps_pe: f64) -> f64 {
    5.0 * ((8.0 / eps_pe).ln() / (n as f64).powi(3)).sqrt()
}

/// Maps raw statistics (norms and inner product) to covariance estimates.
fn gammas_from(n: u64, eps_pe: f64, xx: f64, yy: f64, xy: f64) -> GammaEstimates {
    let two_n = 2.0 * n as f64;
    let k = norm_correction(n, eps_pe);
    GammaEstimates {
        gamma_a: k * xx / two_n - 1.0,
        gamma_b: k * yy / two_n - 1.0,
        gamma_c: xy / two_n - inner_product_correction(n, eps_pe) * (xx + yy),
    }
}

pub fn gamma_estimates(stats: &SummaryStats, eps_pe: f64) -> Result<GammaEstimates> {
    ensure_domain(stats.n > 0, "n", stats.n as f64, ">= 1")?;
    check_eps("eps_pe", eps_pe)?;
    Ok(gammas_from(
        stats.n,
        eps_pe,
        stats.norm_x_sq,
        stats.norm_y_sq,
        stats.inner_xy,
    ))
}

/// Inclusive on all three bounds.
pub fn pe_test(g: &GammaEstimates, th: &PeThresholds) -> bool {
    g.gamma_a <= th.sigma_a_max && g.gamma_b <= th.sigma_b_max && g.gamma_c >= th.sigma_c_min
}

/// Mean and standard deviation of `‖X‖²`, `‖Y‖²`, `⟨X,Y⟩` when the `4n`
/// coordinate pairs are i.i.d. centred normals.
///
/// Each real coordinate of Alice's data has variance `(V+1)/2`, Bob's
/// `(b+1)/2`, with covariance `c/2`; `(a, b, c)` is the expected covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStatistics {
    pub mean_x_sq: f64,
    pub mean_y_sq: f64,
    pub mean_xy: f64,
    pub sd_x_sq: f64,
    pub sd_y_sq: f64,
    pub sd_xy: f64,
}

pub fn expected_statistics(ch: &ChannelModel, m: &Modulation, n: u64) -> ExpectedStatistics {
    let e = expected_covariance(ch, m);
    let (sx, sy, cxy) = ((e.a + 1.0) / 2.0, (e.b + 1.0) / 2.0, e.c / 2.0);
    let count = 4.0 * n as f64;
    ExpectedStatistics {
        mean_x_sq: count * sx,
        mean_y_sq: count * sy,
        mean_xy: count * cxy,
        sd_x_sq: sx * (2.0 * count).sqrt(),
        sd_y_sq: sy * (2.0 * count).sqrt(),
        sd_xy: (count * (sx * sy + cxy * cxy)).sqrt(),
    }
}

/// Thresholds `k_sigma` standard deviations on the accepting side of the
/// expected statistics, mapped through the gamma estimators.
pub fn pe_thresholds_with_sigma(
    ch: &ChannelModel,
    m: &Modulation,
    n: u64,
    eps_pe: f64,
    k_sigma: f64,
) -> Result<PeThresholds> {
    ensure_domain(n > 0, "n", n as f64, ">= 1")?;
    check_eps("eps_pe", eps_pe)?;
    let s = expected_statistics(ch, m, n);
    let xx = s.mean_x_sq + k_sigma * s.sd_x_sq;
    let yy = s.mean_y_sq + k_sigma * s.sd_y_sq;
    let xy = s.mean_xy - k_sigma * s.sd_xy;
    let g = gammas_from(n, eps_pe, xx, yy, xy);
    Ok(PeThresholds {
        sigma_a_max: g.gamma_a,
        sigma_b_max: g.gamma_b,
        sigma_c_min: g.gamma_c,
    })
}

pub const DEFAULT_THRESHOLD_SIGMA: f64 = 3.0;

pub fn pe_thresholds(
    ch: &ChannelModel,
    m: &Modulation,
    n: u64,
    eps_pe: f64,
) -> Result<PeThresholds> {
    pe_thresholds_with_sigma(ch, m, n, eps_pe, DEFAULT_THRESHOLD_SIGMA)
}

/// Confidence constants of the bad-event bound. `a`/`b` bound `‖X‖²`-type
/// quantities; `a_y`/`b_y` are the same constants built from `‖Y‖²`.
pub fn bad_event_constants(stats: &SummaryStats, eps: f64) -> Result<BadEventConstants> {
    ensure_domain(stats.n > 0, "n", stats.n as f64, ">= 1")?;
    check_eps("eps", eps)?;
    let n = stats.n as f64;
    let l36 = (36.0 / eps).ln();
    let tail = 1.0 + (360.0 / eps) * (-n / 25.0).exp();
    let k = 1.0 + 1.5 * (l36 / n).sqrt();
    if k * tail > 1.0 + 2.0 * (l36 / n).sqrt() {
        return Err(Error::RegimeViolation { n: stats.n, eps });
    }
    let s = stats.norm_x_sq + stats.norm_y_sq;
    let a = 0.5 * k * stats.norm_x_sq;
    let a_y = 0.5 * k * stats.norm_y_sq;
    let c = 0.5 * stats.inner_xy - ((72.0 / eps).ln() / n).sqrt() * s;
    let d = c - 2.0 * s * (8.0 * (18.0 / eps).ln() / n).sqrt();
    Ok(BadEventConstants {
        a,
        a_y,
        b: a * tail,
        b_y: a_y * tail,
        c,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stats(xx: f64, yy: f64, xy: f64, n: u64) -> SummaryStats {
        SummaryStats {
            norm_x_sq: xx,
            norm_y_sq: yy,
            inner_xy: xy,
            n,
        }
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_estimates(&stats(0.0, 0.0, 0.0, 100), 1e-10).unwrap();
        assert_eq!((g.gamma_a, g.gamma_b, g.gamma_c), (-1.0, -1.0, 0.0));

        // ln(36/eps) -> ln 36 as eps -> 1.
        let n = 400;
        let eps = 1.0 - 1e-15;
        let g = gamma_estimates(&stats(2.0 * n as f64, 0.0, 0.0, n), eps).unwrap();
        assert_relative_eq!(
            g.gamma_a,
            2.0 * (36f64.ln() / n as f64).sqrt(),
            max_relative = 1e-12
        );

        let v = 4.0;
        let n = 10u64.pow(14);
        let g = gamma_estimates(&stats(2.0 * n as f64 * (v + 1.0), 0.0, 0.0, n), 1e-10).unwrap();
        assert_relative_eq!(g.gamma_a, v, max_relative = 1e-5);
    }

    #[test]
    fn gamma_rejects_empty_block() {
        assert!(gamma_estimates(&stats(1.0, 1.0, 0.0, 0), 0.1).is_err());
        assert!(gamma_estimates(&stats(1.0, 1.0, 0.0, 4), 0.0).is_err());
    }

    #[test]
    fn summary_stats_from_vectors() {
        let s = SummaryStats::from_vectors(&[1.0, 2.0, 0.0, 1.0], &[1.0, -1.0, 3.0, 0.5]).unwrap();
        assert_eq!(s, stats(6.0, 11.25, -0.5, 1));
        assert!(SummaryStats::from_vectors(&[1.0; 4], &[1.0; 8]).is_err());
        assert!(SummaryStats::from_vectors(&[1.0; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn pe_test_is_inclusive() {
        let th = PeThresholds {
            sigma_a_max: 2.0,
            sigma_b_max: 3.0,
            sigma_c_min: 1.0,
        };
        let g = GammaEstimates {
            gamma_a: 2.0,
            gamma_b: 3.0,
            gamma_c: 1.0,
        };
        assert!(pe_test(&g, &th));
        assert!(!pe_test(
            &GammaEstimates {
                gamma_c: 0.999,
                ..g
            },
            &th
        ));
        assert!(!pe_test(
            &GammaEstimates {
                gamma_a: 2.001,
                ..g
            },
            &th
        ));
        assert!(pe_test(&g, &PeThresholds::unbounded()));
    }

    /// Independent evaluation of the 3σ threshold recipe for a lossless channel.
    #[test]
    fn threshold_example_lossless() {
        let ch = ChannelModel::new(1.0, 0.0).unwrap();
        let m = Modulation::new(3.0).unwrap();
        let (n, eps) = (1_000_000u64, 1e-41);
        let th = pe_thresholds(&ch, &m, n, eps).unwrap();

        // Per-coordinate variances 2, 2 and covariance √8/2 over 4e6 coordinates.
        let nf = n as f64;
        let cnt: f64 = 4e6;
        let c = 8f64.sqrt() / 2.0;
        let xx = cnt * 2.0 + 3.0 * 2.0 * (2.0 * cnt).sqrt();
        let xy = cnt * c - 3.0 * (cnt * (4.0 + c * c)).sqrt();
        let k = 1.0 + 2.0 * ((36.0 / eps).ln() / nf).sqrt();
        let a = k * xx / (2.0 * nf) - 1.0;
        let cmin = xy / (2.0 * nf) - 5.0 * ((8.0 / eps).ln() / nf.powi(3)).sqrt() * 2.0 * xx;
        assert_relative_eq!(th.sigma_a_max, a, max_relative = 1e-14);
        assert_relative_eq!(th.sigma_b_max, a, max_relative = 1e-14);
        assert_relative_eq!(th.sigma_c_min, cmin, max_relative = 1e-12);
    }

    #[test]
    fn thresholds_converge_to_expected_covariance() {
        let ch = ChannelModel::new(0.5, 0.02).unwrap();
        let m = Modulation::new(4.0).unwrap();
        let e = expected_covariance(&ch, &m);
        let mut prev = f64::INFINITY;
        for p in 4..=16 {
            let th = pe_thresholds(&ch, &m, 10u64.pow(p), 1e-41).unwrap();
            assert!(th.sigma_a_max < prev && th.sigma_a_max > e.a);
            prev = th.sigma_a_max;
        }
        let th = pe_thresholds(&ch, &m, 10u64.pow(18), 1e-41).unwrap();
        assert_relative_eq!(th.sigma_a_max, e.a, max_relative = 1e-6);
        assert_relative_eq!(th.sigma_b_max, e.b, max_relative = 1e-6);
        assert_relative_eq!(th.sigma_c_min, e.c, max_relative = 1e-6);
    }

    #[test]
    fn bad_event_constants_ordering() {
        let n = 100_000_000u64;
        let nf = n as f64;
        let s = stats(2.0 * nf * 5.0, 2.0 * nf * 4.0, 2.0 * nf * 3.0, n);
        let eps = 1e-41;
        let k = bad_event_constants(&s, eps).unwrap();

        let l36 = (36.0f64 / eps).ln();
        let a = 0.5 * (1.0 + 1.5 * (l36 / nf).sqrt()) * s.norm_x_sq;
        let c = 0.5 * s.inner_xy - ((72.0f64 / eps).ln() / nf).sqrt() * (s.norm_x_sq + s.norm_y_sq);
        let d = c - 2.0 * (s.norm_x_sq + s.norm_y_sq) * (8.0 * (18.0f64 / eps).ln() / nf).sqrt();
        assert_relative_eq!(k.a, a, max_relative = 1e-14);
        assert_relative_eq!(k.c, c, max_relative = 1e-12);
        assert_relative_eq!(k.d, d, max_relative = 1e-12);
        // e^{-n/25} underflows at this size.
        assert_eq!(k.b, k.a);
        assert!(k.d <= k.c && k.b >= k.a);
    }

    #[test]
    fn bad_event_ratio_tends_to_one() {
        let eps = 0.01;
        let mut last = f64::INFINITY;
        for n in [2_000u64, 3_000, 5_000, 10_000] {
            let k = bad_event_constants(&stats(1.0, 1.0, 0.5, n), eps).unwrap();
            let r = k.b / k.a;
            assert!(r >= 1.0 && r <= last);
            last = r;
        }
        assert!(last - 1.0 < 1e-100);
    }

    #[test]
    fn bad_event_regime_is_checked() {
        assert_eq!(
            bad_event_constants(&stats(1.0, 1.0, 0.5, 100), 0.01),
            Err(Error::RegimeViolation { n: 100, eps: 0.01 })
        );
    }
}
