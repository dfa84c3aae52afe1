//! Discretization of Bob's outcomes into `2^d` equiprobable symbols.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{ensure_domain, Error, Result};

/// Quantile bins of `N(0, v)`. Symbol `j` (1-based) covers `[edge[j-2], edge[j-1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub d: u32,
    pub variance: f64,
    pub edges: Vec<f64>,
    /// Conditional mean of `N(0, v)` on each bin.
    pub means: Vec<f64>,
}

/// Symbols together with the quantizer that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedKeyMaterial {
    pub symbols: Vec<u32>,
    pub quantile_edges: Vec<f64>,
    pub quantile_means: Vec<f64>,
}

fn check_d(d: u32) -> Result<()> {
    ensure_domain((1..=16).contains(&d), "d", d as f64, "1 <= d <= 16")
}

pub fn build_quantizer(variance: f64, d: u32) -> Result<Quantizer> {
    ensure_domain(
        variance > 0.0 && variance.is_finite(),
        "variance",
        variance,
        "finite and > 0",
    )?;
    check_d(d)?;
    let std = Normal::standard();
    let bins = 1usize << d;
    let sd = variance.sqrt();
    let alphas: Vec<f64> = (1..bins)
        .map(|i| std.inverse_cdf(i as f64 / bins as f64))
        .collect();
    // φ at the standardized edges, with φ(±∞) = 0 at both ends.
    let pdf = |i: usize| {
        if i == 0 || i == bins {
            0.0
        } else {
            std.pdf(alphas[i - 1])
        }
    };
    let means = (0..bins)
        .map(|i| bins as f64 * sd * (pdf(i) - pdf(i + 1)))
        .collect();
    Ok(Quantizer {
        d,
        variance,
        edges: alphas.iter().map(|a| a * sd).collect(),
        means,
    })
}

/// Symbol in `1..=2^d`; a value equal to an edge goes to the upper bin.
pub fn discretize(y: &[f64], q: &Quantizer) -> Vec<u32> {
    y.iter()
        .map(|&v| 1 + q.edges.partition_point(|&e| e <= v) as u32)
        .collect()
}

/// Quantizes `y` with bins matched to its empirical variance `‖y‖²/len`.
pub fn quantize(y: &[f64], d: u32) -> Result<QuantizedKeyMaterial> {
    if y.is_empty() {
        return Err(Error::Precondition(
            "cannot quantize an empty vector".into(),
        ));
    }
    let v = y.iter().map(|a| a * a).sum::<f64>() / y.len() as f64;
    let q = build_quantizer(v, d)?;
    Ok(QuantizedKeyMaterial {
        symbols: discretize(y, &q),
        quantile_edges: q.edges,
        quantile_means: q.means,
    })
}

/// Plug-in (maximum-likelihood) entropy of the symbol frequencies, in bits.
pub fn empirical_entropy(u: &[u32], d: u32) -> Result<f64> {
    check_d(d)?;
    if u.is_empty() {
        return Err(Error::Precondition(
            "empirical entropy of an empty string".into(),
        ));
    }
    let mut counts = vec![0u64; 1 << d];
    for &s in u {
        if s == 0 || s as usize > counts.len() {
            return Err(Error::Domain {
                name: "symbol",
                value: s as f64,
                expected: "1 <= s <= 2^d",
            });
        }
        counts[s as usize - 1] += 1;
    }
    let total = u.len() as f64;
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>())
}
