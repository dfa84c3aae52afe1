//! Passive Gaussian channel between Alice and Bob.
//!
//! Quadrature vectors are interleaved `(q1, p1, q2, p2, ...)`, so with zero-based
//! indexing even positions hold `q` and odd positions hold `p`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Error, Result};

pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    transmittance: f64,
    excess_noise: f64,
}

impl ChannelModel {
    pub fn new(transmittance: f64, excess_noise: f64) -> Result<Self> {
        ensure_domain(
            (0.0..=1.0).contains(&transmittance),
            "transmittance",
            transmittance,
            "0 <= T <= 1",
        )?;
        ensure_domain(
            excess_noise >= 0.0 && excess_noise.is_finite(),
            "excess_noise",
            excess_noise,
            "finite and >= 0",
        )?;
        Ok(Self {
            transmittance,
            excess_noise,
        })
    }

    /// Fibre of `length_km` with the given attenuation.
    pub fn from_distance(length_km: f64, loss_db_per_km: f64, excess_noise: f64) -> Result<Self> {
        Self::new(
            transmittance_from_km(length_km, loss_db_per_km)?,
            excess_noise,
        )
    }

    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    pub fn excess_noise(&self) -> f64 {
        self.excess_noise
    }
}

/// Variance `V` of each mode of Alice's two-mode squeezed state. The
/// prepare-and-measure modulation variance is `V - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    variance: f64,
}

impl Modulation {
    pub fn new(variance: f64) -> Result<Self> {
        ensure_domain(
            variance >= 1.0 && variance.is_finite(),
            "modulation variance",
            variance,
            "finite and >= 1",
        )?;
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn pm_variance(&self) -> f64 {
        self.variance - 1.0
    }
}

/// Covariance entries `(a, b, c)` of the state a Gaussian channel would produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCovariance {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn transmittance_from_km(length_km: f64, loss_db_per_km: f64) -> Result<f64> {
    ensure_domain(
        length_km >= 0.0 && length_km.is_finite(),
        "length_km",
        length_km,
        "finite and >= 0",
    )?;
    ensure_domain(
        loss_db_per_km >= 0.0 && loss_db_per_km.is_finite(),
        "loss_db_per_km",
        loss_db_per_km,
        "finite and >= 0",
    )?;
    Ok(10f64.powf(-loss_db_per_km * length_km / 10.0))
}

pub fn snr(ch: &ChannelModel, m: &Modulation) -> f64 {
    let t = ch.transmittance;
    t * m.pm_variance() / (2.0 + t * ch.excess_noise)
}

/// Shannon information of Alice's and Bob's heterodyne data, summed over both quadratures.
pub fn mutual_information_bits(ch: &ChannelModel, m: &Modulation) -> f64 {
    snr(ch, m).ln_1p() / std::f64::consts::LN_2
}

pub fn expected_covariance(ch: &ChannelModel, m: &Modulation) -> ExpectedCovariance {
    let t = ch.transmittance;
    let v = m.variance;
    ExpectedCovariance {
        a: v,
        b: t * (v - 1.0) + 1.0 + t * ch.excess_noise,
        c: (t * (v * v - 1.0)).sqrt(),
    }
}

/// Maps Alice's heterodyne outcomes on her half of the entangled state to the
/// coherent-state amplitudes she effectively prepared. `p` is conjugated.
pub fn pm_from_eb(x_eb: &[f64], m: &Modulation) -> Result<Vec<f64>> {
    if !x_eb.len().is_multiple_of(4) {
        return Err(Error::InputShape {
            len: x_eb.len(),
            multiple: 4,
        });
    }
    let v = m.variance;
    let s = ((v - 1.0) / (v + 1.0)).sqrt();
    Ok(x_eb
        .iter()
        .enumerate()
        .map(|(i, &x)| if i % 2 == 0 { s * x } else { -s * x })
        .collect())
}
