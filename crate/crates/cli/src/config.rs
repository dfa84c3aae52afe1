//! JSON run configuration, shared by every subcommand.

use std::path::Path;

use cvqkd::finite_size::{Composition, VSearch};
use cvqkd::oracle::{Suite, DEFAULT_EPS_VALUES, DEFAULT_TRIALS};
use cvqkd::{ChannelModel, ProtocolParams, SecurityBudget};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CVQKD_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelSection,
    pub protocol: ProtocolSection,
    pub security: SecuritySection,
    pub optimizer: OptimizerSection,
    pub sweep: SweepSection,
    pub simulate: SimulateSection,
    pub verify: VerifySection,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub distance_km: Option<f64>,
    /// Overrides the distance when set.
    pub transmittance: Option<f64>,
    pub loss_db_per_km: f64,
    pub excess_noise: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            distance_km: None,
            transmittance: None,
            loss_db_per_km: cvqkd::channel::DEFAULT_LOSS_DB_PER_KM,
            excess_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(with = "count::option")]
    pub n: Option<u64>,
    pub d: u32,
    pub beta: f64,
    /// Fixed modulation variance; optimised when absent.
    pub modulation_variance: Option<f64>,
    pub eps_rob: f64,
    pub threshold_sigma: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            n: None,
            d: 5,
            beta: 0.95,
            modulation_variance: None,
            eps_rob: 0.01,
            threshold_sigma: cvqkd::estimation::DEFAULT_THRESHOLD_SIGMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecuritySection {
    pub eps: f64,
    pub eps_sm: f64,
    pub eps_bar: f64,
    pub eps_pe: f64,
    pub eps_cor: f64,
    pub eps_ent: f64,
    pub composition: Composition,
}

impl Default for SecuritySection {
    fn default() -> Self {
        let b = SecurityBudget::default();
        Self {
            eps: b.eps,
            eps_sm: b.eps_sm,
            eps_bar: b.eps_bar,
            eps_pe: b.eps_pe,
            eps_cor: b.eps_cor,
            eps_ent: b.eps_ent,
            composition: Composition::Closed,
        }
    }
}

impl SecuritySection {
    pub fn budget(&self) -> SecurityBudget {
        SecurityBudget {
            eps: self.eps,
            eps_sm: self.eps_sm,
            eps_bar: self.eps_bar,
            eps_pe: self.eps_pe,
            eps_cor: self.eps_cor,
            eps_ent: self.eps_ent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub grid_points: usize,
    pub v_minus_one_min: f64,
    pub v_minus_one_max: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let s = VSearch::default();
        Self {
            grid_points: s.grid_points,
            v_minus_one_min: s.v_minus_one_min,
            v_minus_one_max: s.v_minus_one_max,
        }
    }
}

impl OptimizerSection {
    pub fn search(&self) -> VSearch {
        VSearch {
            grid_points: self.grid_points,
            v_minus_one_min: self.v_minus_one_min,
            v_minus_one_max: self.v_minus_one_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub distances_km: Vec<f64>,
    #[serde(with = "count::list")]
    pub n_values: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        // Half-decade steps from 1e6 to 1e13.
        let n_values = (12..=26)
            .map(|k| 10f64.powf(k as f64 / 2.0).round() as u64)
            .collect();
        Self {
            distances_km: vec![1.0, 10.0, 50.0, 100.0],
            n_values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub trials: u64,
    #[serde(with = "count::plain")]
    pub n: u64,
    /// Symbols altered on Alice's side before the correctness check.
    pub corrupt_symbols: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            trials: 1000,
            n: 10_000,
            corrupt_symbols: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub suites: Vec<String>,
    pub eps_values: Vec<f64>,
    pub trials: u64,
    /// Multiplies every nominal bound; values below 1 make the check adversarial.
    pub bound_scale: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.iter().map(|s| s.name().to_string()).collect(),
            eps_values: DEFAULT_EPS_VALUES.to_vec(),
            trials: DEFAULT_TRIALS,
            bound_scale: 1.0,
        }
    }
}

impl VerifySection {
    pub fn suites(&self) -> Result<Vec<Suite>, CliError> {
        if self.suites.is_empty() {
            return Err(CliError::Config("verify.suites is empty".into()));
        }
        self.suites
            .iter()
            .map(|s| {
                Suite::from_name(s).ok_or_else(|| {
                    let known: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                    CliError::Config(format!(
                        "unknown suite {s:?}; expected one of {}",
                        known.join(", ")
                    ))
                })
            })
            .collect()
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Channel for a given distance, or the configured transmittance when set.
    pub fn channel_at(&self, distance_km: Option<f64>) -> Result<ChannelModel, CliError> {
        let c = &self.channel;
        let ch = match (c.transmittance, distance_km) {
            (Some(t), _) => ChannelModel::new(t, c.excess_noise),
            (None, Some(km)) => ChannelModel::from_distance(km, c.loss_db_per_km, c.excess_noise),
            (None, None) => {
                return Err(CliError::Config(
                    "channel.distance_km or channel.transmittance is required".into(),
                ))
            }
        };
        ch.map_err(config_error)
    }

    pub fn require_n(&self) -> Result<u64, CliError> {
        self.protocol
            .n
            .ok_or_else(|| CliError::Config("protocol.n is required".into()))
    }

    pub fn params(&self, n: u64) -> Result<ProtocolParams, CliError> {
        let p = &self.protocol;
        let params = ProtocolParams {
            eps_rob: p.eps_rob,
            threshold_sigma: p.threshold_sigma,
            ..ProtocolParams::new(n, p.d, p.beta)
        };
        params.validate().map_err(config_error)?;
        Ok(params)
    }

    pub fn budget(&self) -> Result<SecurityBudget, CliError> {
        let b = self.security.budget();
        b.validate(self.security.composition)
            .map_err(config_error)?;
        Ok(b)
    }

    pub fn search(&self) -> Result<VSearch, CliError> {
        let s = self.optimizer.search();
        s.validate().map_err(config_error)?;
        Ok(s)
    }

    /// Checks every section the keyrate and sweep commands read.
    pub fn validate_rate_inputs(&self) -> Result<(), CliError> {
        self.params(self.protocol.n.unwrap_or(1))?;
        self.budget()?;
        self.search()?;
        if let Some(v) = self.protocol.modulation_variance {
            cvqkd::Modulation::new(v).map_err(config_error)?;
        }
        Ok(())
    }
}

pub(crate) fn config_error(e: cvqkd::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Counts that may be written either as integers or as integer-valued floats (`1e10`).
mod count {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Float(f64),
    }

    fn to_count<E: serde::de::Error>(raw: Raw) -> Result<u64, E> {
        match raw {
            Raw::Int(v) => Ok(v),
            Raw::Float(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
            Raw::Float(v) => Err(E::custom(format!(
                "expected a non-negative integer, got {v}"
            ))),
        }
    }

    pub mod plain {
        use super::*;

        pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_u64(*v)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
            to_count(Raw::deserialize(d).map_err(|_| D::Error::custom("expected a count"))?)
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.serialize_some(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
            Option::<Raw>::deserialize(d)
                .map_err(|_| D::Error::custom("expected a count"))?
                .map(to_count)
                .transpose()
        }
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
            Vec::<Raw>::deserialize(d)
                .map_err(|_| D::Error::custom("expected a list of counts"))?
                .into_iter()
                .map(to_count)
                .collect()
        }
    }
}
