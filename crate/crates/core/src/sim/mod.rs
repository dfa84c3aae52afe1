//! End-to-end execution of the protocol on sampled data.
//!
//! A trial runs sample → center → quantize → error-correction accounting and
//! correctness hash → parameter estimation → key length → privacy amplification.
//! Reconciliation itself is idealized: Alice's guess equals Bob's string unless
//! corruption is forced, and its cost is the leakage implied by `beta`.

pub mod bits;
pub mod quantize;
pub mod sampling;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{mutual_information_bits, ChannelModel, Modulation};
use crate::error::{ensure_domain, Error, Result};
use crate::estimation::{
    gamma_estimates, pe_test, pe_thresholds_with_sigma, GammaEstimates, PeThresholds, SummaryStats,
};
use crate::finite_size::{key_length, Composition, ProtocolParams, SecurityBudget};
use crate::holevo::holevo_f;
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::Frequency;

pub use bits::{BitString, ToeplitzHash};
pub use quantize::{
    build_quantizer, discretize, empirical_entropy, quantize, QuantizedKeyMaterial, Quantizer,
};
pub use sampling::{center, sample_outcomes};

const STREAM_SAMPLING: u64 = 0;
const STREAM_CORRECTNESS: u64 = 1;
const STREAM_AMPLIFICATION: u64 = 2;
const STREAM_CORRUPTION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: u64,
    pub d: u32,
    pub modulation: Modulation,
    /// Channel the data is actually sent through.
    pub channel: ChannelModel,
    /// Channel the parties expect; fixes the leakage budget.
    pub nominal_channel: ChannelModel,
    pub beta: f64,
    pub budget: SecurityBudget,
    pub thresholds: PeThresholds,
    /// Number of Alice's symbols altered before the correctness check.
    pub corrupt_symbols: usize,
    pub seed: u64,
}

impl TrialConfig {
    /// Honest run with thresholds `k_sigma` standard deviations from the channel's expectation.
    #[allow(clippy::too_many_arguments)]
    pub fn honest(
        n: u64,
        d: u32,
        modulation: Modulation,
        channel: ChannelModel,
        beta: f64,
        budget: SecurityBudget,
        k_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let thresholds =
            pe_thresholds_with_sigma(&channel, &modulation, n, budget.eps_pe, k_sigma)?;
        let cfg = Self {
            n,
            d,
            modulation,
            channel,
            nominal_channel: channel,
            beta,
            budget,
            thresholds,
            corrupt_symbols: 0,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ProtocolParams::new(self.n, self.d, self.beta).validate()?;
        self.budget.validate(Composition::Closed)?;
        let symbols = 4 * self.n as usize;
        if self.corrupt_symbols > symbols {
            return Err(Error::Configuration(format!(
                "cannot corrupt {} of {symbols} symbols",
                self.corrupt_symbols
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Length of the correctness hash, `⌈log2(1/ε_cor)⌉`.
pub fn hash_length(eps_cor: f64) -> usize {
    (-eps_cor.log2()).ceil().max(0.0) as usize
}

/// Error-correction leakage in bits: `4dn − 2n·β·I` plus the correctness hash.
pub fn ec_accounting(cfg: &TrialConfig, mutual_info_bits: f64) -> Result<f64> {
    ensure_domain(
        cfg.beta > 0.0 && cfg.beta <= 1.0,
        "beta",
        cfg.beta,
        "0 < beta <= 1",
    )?;
    let n = cfg.n as f64;
    let base = 4.0 * cfg.d as f64 * n - cfg.beta * 2.0 * n * mutual_info_bits;
    if base < 0.0 {
        return Err(Error::Configuration(format!(
            "beta * I = {} exceeds 2d = {}: the leakage would be negative",
            cfg.beta * mutual_info_bits,
            2 * cfg.d
        )));
    }
    Ok(base + hash_length(cfg.budget.eps_cor) as f64)
}

/// Compares seeded Toeplitz hashes of length `⌈log2(1/ε_cor)⌉`.
pub fn correctness_check(
    u_a: &BitString,
    u_b: &BitString,
    eps_cor: f64,
    seed: u64,
) -> Result<bool> {
    if u_a.len() != u_b.len() {
        return Err(Error::Precondition(format!(
            "strings differ in length ({} vs {})",
            u_a.len(),
            u_b.len()
        )));
    }
    if u_a == u_b {
        return Ok(true);
    }
    let h = ToeplitzHash::from_seed(u_a.len(), hash_length(eps_cor), seed);
    Ok(h.hash(u_a) == h.hash(u_b))
}

/// Hashes `u` to `l` bits with a seeded Toeplitz matrix.
pub fn privacy_amplify(u: &BitString, l: usize, seed: u64) -> Result<BitString> {
    if l > u.len() {
        return Err(Error::Domain {
            name: "l",
            value: l as f64,
            expected: "l <= input length",
        });
    }
    Ok(ToeplitzHash::from_seed(u.len(), l, seed).hash(u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub passed_pe: bool,
    pub passed_ec: bool,
    pub key_length: u64,
    pub empirical_entropy: f64,
    pub stats: SummaryStats,
    pub gammas: GammaEstimates,
    pub key_alice: BitString,
    pub key_bob: BitString,
}

impl TrialOutcome {
    pub fn aborted(&self) -> bool {
        !(self.passed_pe && self.passed_ec)
    }

    pub fn record(&self) -> TrialRecord {
        TrialRecord {
            seed: self.seed,
            passed_pe: self.passed_pe,
            passed_ec: self.passed_ec,
            key_length: self.key_length,
            empirical_entropy: self.empirical_entropy,
            n: self.stats.n,
            norm_x_sq: self.stats.norm_x_sq,
            norm_y_sq: self.stats.norm_y_sq,
            inner_xy: self.stats.inner_xy,
        }
    }
}

/// One line of a trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub passed_pe: bool,
    pub passed_ec: bool,
    pub key_length: u64,
    pub empirical_entropy: f64,
    pub n: u64,
    pub norm_x_sq: f64,
    pub norm_y_sq: f64,
    pub inner_xy: f64,
}

/// Replaces `count` distinct positions of `u` with a different symbol.
fn corrupt(u: &mut [u32], d: u32, count: usize, seed: u64) {
    let mut rng = rng_from_seed(seed);
    let alphabet = 1u32 << d;
    for i in rand::seq::index::sample(&mut rng, u.len(), count) {
        let shift = rng.random_range(1..alphabet);
        u[i] = (u[i] - 1 + shift) % alphabet + 1;
    }
}

pub fn run_trial(cfg: &TrialConfig) -> Result<TrialOutcome> {
    cfg.validate()?;
    let (x, y) = sample_outcomes(
        &cfg.channel,
        &cfg.modulation,
        cfg.n,
        derive_seed(cfg.seed, STREAM_SAMPLING),
    );
    let x = center(&x)?;
    let y = center(&y)?;
    let stats = SummaryStats::from_vectors(&x, &y)?;

    let material = quantize(&y, cfg.d)?;
    let u_bob = material.symbols;
    let entropy = empirical_entropy(&u_bob, cfg.d)?;
    let leak = ec_accounting(
        cfg,
        mutual_information_bits(&cfg.nominal_channel, &cfg.modulation),
    )?;

    let mut u_alice = u_bob.clone();
    if cfg.corrupt_symbols > 0 {
        corrupt(
            &mut u_alice,
            cfg.d,
            cfg.corrupt_symbols,
            derive_seed(cfg.seed, STREAM_CORRUPTION),
        );
    }
    let bits_bob = BitString::from_symbols(&u_bob, cfg.d);
    let bits_alice = BitString::from_symbols(&u_alice, cfg.d);
    let passed_ec = correctness_check(
        &bits_alice,
        &bits_bob,
        cfg.budget.eps_cor,
        derive_seed(cfg.seed, STREAM_CORRECTNESS),
    )?;

    let gammas = gamma_estimates(&stats, cfg.budget.eps_pe)?;
    let passed_pe = pe_test(&gammas, &cfg.thresholds);

    let mut outcome = TrialOutcome {
        seed: cfg.seed,
        passed_pe,
        passed_ec,
        key_length: 0,
        empirical_entropy: entropy,
        stats,
        gammas,
        key_alice: BitString::new(),
        key_bob: BitString::new(),
    };
    if outcome.aborted() {
        return Ok(outcome);
    }

    let holevo = if cfg.thresholds.is_finite() {
        holevo_f(&cfg.thresholds.worst_case_triple())?
    } else {
        f64::INFINITY
    };
    let mut params = ProtocolParams::new(cfg.n, cfg.d, cfg.beta);
    params.leak_ec = leak;
    let l = key_length(&params, &cfg.budget, entropy, holevo)?.bits;
    if l > 0 {
        let (ka, kb) = derive_keys(
            &bits_alice,
            &bits_bob,
            l as usize,
            derive_seed(cfg.seed, STREAM_AMPLIFICATION),
        )?;
        outcome.key_alice = ka;
        outcome.key_bob = kb;
        outcome.key_length = l;
    }
    Ok(outcome)
}

/// Both parties hash their strings with the same publicly chosen seed.
fn derive_keys(
    alice: &BitString,
    bob: &BitString,
    l: usize,
    seed: u64,
) -> Result<(BitString, BitString)> {
    Ok((
        privacy_amplify(alice, l, seed)?,
        privacy_amplify(bob, l, seed)?,
    ))
}

/// Seed of trial `index` in a batch driven by `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, index)
}

/// Runs `trials` independent trials; results are in trial order.
pub fn run_batch(cfg: &TrialConfig, trials: usize) -> Result<Vec<TrialOutcome>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&cfg.with_seed(trial_seed(cfg.seed, i))))
        .collect()
}

pub const MIN_ROBUSTNESS_TRIALS: usize = 100;

/// Abort frequency of the honest protocol with its binomial standard error.
pub fn estimate_robustness(cfg: &TrialConfig, trials: usize) -> Result<Frequency> {
    if trials < MIN_ROBUSTNESS_TRIALS {
        return Err(Error::Precondition(format!(
            "robustness needs at least {MIN_ROBUSTNESS_TRIALS} trials, got {trials}"
        )));
    }
    let aborts = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&cfg.with_seed(trial_seed(cfg.seed, i))).map(|o| o.aborted() as u64))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(Frequency::new(aborts, trials as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> SecurityBudget {
        SecurityBudget {
            eps: 0.9,
            eps_sm: 1e-3,
            eps_bar: 1e-3,
            eps_pe: 0.01,
            eps_cor: 2f64.powi(-20),
            eps_ent: 0.01,
        }
    }

    fn cfg(n: u64, k_sigma: f64) -> TrialConfig {
        TrialConfig::honest(
            n,
            5,
            Modulation::new(5.0).unwrap(),
            ChannelModel::from_distance(1.0, 0.2, 0.01).unwrap(),
            0.95,
            budget(),
            k_sigma,
            42,
        )
        .unwrap()
    }

    #[test]
    fn hash_length_examples() {
        assert_eq!(hash_length(1e-41), 137);
        assert_eq!(hash_length(2f64.powi(-20)), 20);
    }

    #[test]
    fn leakage_examples() {
        let mut c = cfg(1, 3.0);
        c.d = 1;
        c.beta = 1.0;
        assert_eq!(ec_accounting(&c, 1.0).unwrap(), 4.0 - 2.0 + 20.0);
        c.beta = 0.0;
        assert!(ec_accounting(&c, 1.0).is_err());
        c.beta = 1.0;
        assert!(matches!(
            ec_accounting(&c, 3.0),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn correctness_examples() {
        let a = BitString::from_bits(&[true, false, true]);
        assert!(correctness_check(&a, &a, 1e-9, 1).unwrap());
        assert!(correctness_check(&BitString::new(), &BitString::new(), 1e-9, 1).unwrap());
        assert!(correctness_check(&a, &BitString::new(), 1e-9, 1).is_err());
        let b = BitString::from_bits(&[true, true, true]);
        assert!(!correctness_check(&a, &b, 1e-12, 1).unwrap());
    }

    #[test]
    fn amplification_examples() {
        let u = BitString::from_symbols(&[3, 1, 4, 1, 5], 3);
        assert!(privacy_amplify(&u, 0, 9).unwrap().is_empty());
        assert_eq!(
            privacy_amplify(&u, 8, 9).unwrap(),
            privacy_amplify(&u, 8, 9).unwrap()
        );
        assert_eq!(privacy_amplify(&u, 8, 9).unwrap().len(), 8);
        assert!(privacy_amplify(&u, 16, 9).is_err());
    }

    #[test]
    fn honest_trial_passes_without_key_at_desk_scale() {
        // The inner-product correction keeps the certified Holevo term above
        // beta * I until n is in the hundreds of millions.
        let o = run_trial(&cfg(20_000, 3.0)).unwrap();
        assert!(o.passed_pe && o.passed_ec && !o.aborted());
        assert_eq!(o.key_length, 0);
        assert!(o.key_alice.is_empty() && o.key_bob.is_empty());
        assert!(o.empirical_entropy <= 5.0 && o.empirical_entropy > 4.99);
    }

    #[test]
    fn agreeing_strings_give_agreeing_keys() {
        let u = BitString::from_symbols(&(1..=300).map(|i| 1 + i % 32).collect::<Vec<u32>>(), 5);
        let (ka, kb) = derive_keys(&u, &u.clone(), 700, 5).unwrap();
        assert_eq!(ka, kb);
        assert_eq!(ka.len(), 700);
    }

    #[test]
    fn trials_are_deterministic() {
        let c = cfg(500, 3.0);
        assert_eq!(run_trial(&c).unwrap(), run_trial(&c).unwrap());
        assert_ne!(
            run_trial(&c).unwrap().stats,
            run_trial(&c.with_seed(43)).unwrap().stats
        );
    }

    #[test]
    fn corruption_is_caught() {
        let mut c = cfg(500, 3.0);
        c.corrupt_symbols = 3;
        let o = run_trial(&c).unwrap();
        assert!(!o.passed_ec);
        assert!(o.aborted() && o.key_length == 0 && o.key_alice.is_empty() && o.key_bob.is_empty());
    }

    #[test]
    fn dead_channel_fails_estimation() {
        let mut c = cfg(2000, 3.0);
        c.channel = ChannelModel::new(0.0, 0.0).unwrap();
        let outcomes = run_batch(&c, 20).unwrap();
        assert!(outcomes.iter().all(|o| !o.passed_pe && o.key_length == 0));
    }

    #[test]
    fn robustness_extremes() {
        let mut c = cfg(1000, 3.0);
        c.thresholds = PeThresholds::unbounded();
        assert_eq!(estimate_robustness(&c, 100).unwrap().hits, 0);

        let c0 = cfg(1000, 0.0);
        let f = estimate_robustness(&c0, 200).unwrap();
        assert!(f.frequency > 0.01 + 3.0 * f.std_error, "{f:?}");
        assert!(estimate_robustness(&c0, 99).is_err());
    }
}
