//! Monte Carlo checks of the concentration inequalities behind parameter estimation.
//!
//! Each check samples the random objects of one inequality, counts how often
//! the bad event occurs and compares the frequency with the claimed bound. An
//! event is `respected` when `frequency ≤ bound + 3·stderr`.
//!
//! Trials are split into fixed chunks, each with its own derived seed, so the
//! counts do not depend on the number of threads.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{ensure_domain, Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::stats::Frequency;

pub const MC_SIGMA: f64 = 3.0;
const CHUNK: u64 = 4096;
const SERIES_CUTOFF: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Respected,
    Violated,
    /// The nominal bound could not be evaluated reliably.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub event: String,
    pub nominal_bound: f64,
    /// Factor applied to the nominal bound before judging.
    pub bound_scale: f64,
    pub violations: u64,
    pub frequency: f64,
    pub std_error: f64,
    pub verdict: Verdict,
}

impl EventCheck {
    fn new(event: &str, nominal_bound: f64, hits: u64, trials: u64, bound_ok: bool) -> Self {
        let f = Frequency::new(hits, trials);
        let mut e = Self {
            event: event.to_string(),
            nominal_bound,
            bound_scale: 1.0,
            violations: hits,
            frequency: f.frequency,
            std_error: f.std_error,
            verdict: Verdict::Inconclusive,
        };
        if bound_ok {
            e.judge();
        }
        e
    }

    fn judge(&mut self) {
        self.verdict = if self.frequency
            <= self.bound_scale * self.nominal_bound + MC_SIGMA * self.std_error
        {
            Verdict::Respected
        } else {
            Verdict::Violated
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub check: String,
    pub parameters: BTreeMap<String, f64>,
    pub trials: u64,
    pub seed: u64,
    pub events: Vec<EventCheck>,
    pub verdict: Verdict,
}

impl BoundCheckReport {
    fn new(
        check: &str,
        parameters: &[(&str, f64)],
        trials: u64,
        seed: u64,
        events: Vec<EventCheck>,
    ) -> Self {
        let mut r = Self {
            check: check.to_string(),
            parameters: parameters
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            trials,
            seed,
            events,
            verdict: Verdict::Respected,
        };
        r.update_verdict();
        r
    }

    fn update_verdict(&mut self) {
        let vs: Vec<Verdict> = self.events.iter().map(|e| e.verdict).collect();
        self.verdict = if vs.contains(&Verdict::Violated) {
            Verdict::Violated
        } else if vs.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Respected
        };
    }

    /// Re-judges every event against `scale × nominal bound`.
    pub fn rescaled(&self, scale: f64) -> Self {
        let mut r = self.clone();
        for e in &mut r.events {
            e.bound_scale = scale;
            if e.verdict != Verdict::Inconclusive {
                e.judge();
            }
        }
        r.update_verdict();
        r
    }
}

/// Counts, over `trials` draws, how often each of `K` events occurs.
/// `make` builds a per-chunk trial closure.
fn count_events<const K: usize, F>(trials: u64, seed: u64, make: impl Fn() -> F + Sync) -> [u64; K]
where
    F: FnMut(&mut Rng) -> [bool; K],
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(derive_seed(seed, c));
            let mut trial = make();
            let mut counts = [0u64; K];
            for _ in 0..CHUNK.min(trials - c * CHUNK) {
                for (k, hit) in trial(&mut rng).into_iter().enumerate() {
                    counts[k] += hit as u64;
                }
            }
            counts
        })
        .reduce(
            || [0u64; K],
            |mut a, b| {
                for k in 0..K {
                    a[k] += b[k];
                }
                a
            },
        )
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    ensure_domain(eps > 0.0 && eps < 1.0, "eps", eps, "0 < eps < 1")
}

/// Two-sided chi-squared tail bound with `n` degrees of freedom:
/// `Pr[U − n ≥ 2√(nx) + 2x] ≤ e^{−x}` and `Pr[n − U ≥ 2√(nx)] ≤ e^{−x}`.
pub fn check_chi2_tails(n: u64, x: f64, trials: u64, seed: u64) -> Result<BoundCheckReport> {
    ensure_domain(n >= 1, "n", n as f64, ">= 1")?;
    ensure_domain(x > 0.0, "x", x, "> 0")?;
    check_trials(trials)?;
    let nf = n as f64;
    let upper = nf + 2.0 * (nf * x).sqrt() + 2.0 * x;
    let lower = nf - 2.0 * (nf * x).sqrt();
    let [hi, lo] = count_events(trials, seed, || {
        move |rng: &mut Rng| {
            let u: f64 = (0..n).map(|_| normal(rng).powi(2)).sum();
            [u >= upper, u <= lower]
        }
    });
    let bound = (-x).exp();
    Ok(BoundCheckReport::new(
        "chi2-tails",
        &[("n", nf), ("x", x)],
        trials,
        seed,
        vec![
            EventCheck::new("upper tail", bound, hi, trials, true),
            EventCheck::new("lower tail", bound, lo, trials, true),
        ],
    ))
}

/// Norm of a uniformly random vector of `C^{2n}` (as `4n` reals) projected on
/// the first `n` complex coordinates, against `[1 ± c√(ln(2/ε)/n)]·‖X‖²/2`.
pub fn check_random_projection_norm(
    n: u64,
    trials: u64,
    eps: f64,
    seed: u64,
) -> Result<BoundCheckReport> {
    ensure_domain(n >= 1, "n", n as f64, ">= 1")?;
    check_eps(eps)?;
    check_trials(trials)?;
    let floor = 2.0 * (-(n as f64) / 2.0).exp();
    if eps < floor {
        return Err(Error::Precondition(format!(
            "eps = {eps} is below the validity floor 2e^(-n/2) = {floor:e}"
        )));
    }
    let g = ((2.0 / eps).ln() / n as f64).sqrt();
    let (hi_t, lo_t) = (1.0 + 1.5 * g, 1.0 - 2.2 * g);
    let half = 2 * n;
    let [hi, lo] = count_events(trials, seed, || {
        move |rng: &mut Rng| {
            let s1: f64 = (0..half).map(|_| normal(rng).powi(2)).sum();
            let s2: f64 = (0..half).map(|_| normal(rng).powi(2)).sum();
            let ratio = 2.0 * s1 / (s1 + s2);
            [ratio >= hi_t, ratio <= lo_t]
        }
    });
    Ok(BoundCheckReport::new(
        "random-projection-norm",
        &[("n", n as f64), ("eps", eps)],
        trials,
        seed,
        vec![
            EventCheck::new("upper deviation", eps, hi, trials, true),
            EventCheck::new("lower deviation", eps, lo, trials, true),
        ],
    ))
}

/// Fixed pair of vectors in `R^{4n}`, described up to rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub norm_x: f64,
    pub norm_y: f64,
    /// Cosine of the angle between the vectors.
    pub correlation: f64,
}

impl Default for PairGeometry {
    fn default() -> Self {
        Self {
            norm_x: 1.0,
            norm_y: 1.0,
            correlation: 0.6,
        }
    }
}

/// Squared norms and inner products of both halves of a randomly rotated pair.
#[derive(Debug, Clone, Copy, Default)]
struct Halves {
    xx: [f64; 2],
    yy: [f64; 2],
    xy: [f64; 2],
}

/// Applies a Haar-random rotation of `R^{4n}` to the fixed pair and splits at `2n`.
///
/// The rotated pair is `(|X|u, |Y|(ρu + √(1−ρ²)v))` for a uniformly random
/// orthonormal 2-frame `(u, v)`, obtained by Gram-Schmidt on two Gaussian
/// vectors. Only the six per-half sums of the Gaussian vectors are needed.
fn rotated_halves(rng: &mut Rng, n: u64, geo: &PairGeometry) -> Halves {
    let mut g11 = [0.0; 2];
    let mut g12 = [0.0; 2];
    let mut g22 = [0.0; 2];
    for h in 0..2 {
        for _ in 0..2 * n {
            let (a, b) = (normal(rng), normal(rng));
            g11[h] += a * a;
            g12[h] += a * b;
            g22[h] += b * b;
        }
    }
    let (t11, t12, t22) = (g11[0] + g11[1], g12[0] + g12[1], g22[0] + g22[1]);
    let k = t12 / t11;
    let w_sq = t22 - t12 * k;
    let (w, s11) = (w_sq.sqrt(), t11.sqrt());
    let rho = geo.correlation;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let mut out = Halves::default();
    for h in 0..2 {
        let uu = g11[h] / t11;
        let uv = (g12[h] - k * g11[h]) / (s11 * w);
        let vv = (g22[h] - 2.0 * k * g12[h] + k * k * g11[h]) / w_sq;
        out.xx[h] = geo.norm_x.powi(2) * uu;
        out.yy[h] = geo.norm_y.powi(2) * (rho * rho * uu + 2.0 * rho * s * uv + s * s * vv);
        out.xy[h] = geo.norm_x * geo.norm_y * (rho * uu + s * uv);
    }
    out
}

fn check_geometry(geo: &PairGeometry) -> Result<()> {
    ensure_domain(geo.norm_x > 0.0, "norm_x", geo.norm_x, "> 0")?;
    ensure_domain(geo.norm_y > 0.0, "norm_y", geo.norm_y, "> 0")?;
    ensure_domain(
        geo.correlation.abs() <= 1.0,
        "correlation",
        geo.correlation,
        "|rho| <= 1",
    )
}

/// `|2⟨X1,Y1⟩ − ⟨X,Y⟩| > 1.85√(x/n)(‖X‖² + ‖Y‖²)` for a rotated pair, with
/// `X1, Y1` the first halves (`2n` coordinates). Claimed bound `8e^{−x}`.
pub fn check_inner_product_projection(
    n: u64,
    trials: u64,
    x_level: f64,
    seed: u64,
) -> Result<BoundCheckReport> {
    check_inner_product_projection_with(n, trials, x_level, seed, &PairGeometry::default())
}

pub fn check_inner_product_projection_with(
    n: u64,
    trials: u64,
    x_level: f64,
    seed: u64,
    geo: &PairGeometry,
) -> Result<BoundCheckReport> {
    ensure_domain(n >= 1, "n", n as f64, ">= 1")?;
    ensure_domain(x_level > 0.0, "x_level", x_level, "> 0")?;
    check_trials(trials)?;
    check_geometry(geo)?;
    if x_level > n as f64 / 2.0 {
        return Err(Error::Precondition(format!(
            "x = {x_level} exceeds n/2 = {}",
            n as f64 / 2.0
        )));
    }
    let total_xy = geo.norm_x * geo.norm_y * geo.correlation;
    let dev = 1.85 * (x_level / n as f64).sqrt() * (geo.norm_x.powi(2) + geo.norm_y.powi(2));
    let geo = *geo;
    let [hits] = count_events(trials, seed, || {
        move |rng: &mut Rng| {
            let h = rotated_halves(rng, n, &geo);
            [(2.0 * h.xy[0] - total_xy).abs() > dev]
        }
    });
    Ok(BoundCheckReport::new(
        "inner-product-projection",
        &[
            ("n", n as f64),
            ("x", x_level),
            ("norm_x", geo.norm_x),
            ("norm_y", geo.norm_y),
            ("correlation", geo.correlation),
        ],
        trials,
        seed,
        vec![EventCheck::new(
            "two-sided deviation",
            8.0 * (-x_level).exp(),
            hits,
            trials,
            true,
        )],
    ))
}

/// Second-half statistics against first-half statistics for a rotated pair,
/// with `γ = √(ln(2/ε)/(2n))`:
/// (A) `‖X2‖² ≥ (1+5γ)‖X1‖²` (bound ε), (B) the same for `Y` (bound ε),
/// (C) `⟨X2,Y2⟩ ≤ ⟨X1,Y1⟩ − 4.5γ(‖X1‖² + ‖Y1‖²)` (bound 2ε).
pub fn check_half_vs_half(n: u64, trials: u64, eps: f64, seed: u64) -> Result<BoundCheckReport> {
    check_half_vs_half_with(n, trials, eps, seed, &PairGeometry::default())
}

pub fn check_half_vs_half_with(
    n: u64,
    trials: u64,
    eps: f64,
    seed: u64,
    geo: &PairGeometry,
) -> Result<BoundCheckReport> {
    ensure_domain(n >= 1, "n", n as f64, ">= 1")?;
    check_eps(eps)?;
    check_trials(trials)?;
    check_geometry(geo)?;
    let g2 = (2.0 / eps).ln() / (2.0 * n as f64);
    if g2 > 0.05 {
        return Err(Error::Precondition(format!(
            "ln(2/eps)/(2n) = {g2} is outside the regime <= 0.05"
        )));
    }
    let g = g2.sqrt();
    let geo = *geo;
    let [a, b, c] = count_events(trials, seed, || {
        move |rng: &mut Rng| {
            let h = rotated_halves(rng, n, &geo);
            [
                h.xx[1] >= (1.0 + 5.0 * g) * h.xx[0],
                h.yy[1] >= (1.0 + 5.0 * g) * h.yy[0],
                h.xy[1] <= h.xy[0] - 4.5 * g * (h.xx[0] + h.yy[0]),
            ]
        }
    });
    Ok(BoundCheckReport::new(
        "half-vs-half",
        &[
            ("n", n as f64),
            ("eps", eps),
            ("correlation", geo.correlation),
        ],
        trials,
        seed,
        vec![
            EventCheck::new("(A) second-half X norm", eps, a, trials, true),
            EventCheck::new("(B) second-half Y norm", eps, b, trials, true),
            EventCheck::new("(C) second-half inner product", 2.0 * eps, c, trials, true),
        ],
    ))
}

/// Joint law for the expectation bounds: `x = u²`, `y = w²` with `(u, w)`
/// standard normals of correlation `rho`, so `E[y | x] = ρ²x + 1 − ρ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationScenario {
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// Spacing of the sequence `b_k = b + k·step`.
    pub step: f64,
}

impl ExpectationScenario {
    /// One scenario with a non-empty `A ∩ B_δ`, one with a non-empty `C ∩ D_δ`.
    pub fn defaults() -> [Self; 2] {
        [
            Self {
                rho: 0.9,
                a: 4.0,
                b: 2.0,
                delta: 0.5,
                step: 1.0,
            },
            Self {
                rho: 0.5,
                a: 1.0,
                b: 2.0,
                delta: 0.5,
                step: 1.0,
            },
        ]
    }

    fn conditional_mean(&self, x: f64) -> f64 {
        self.rho * self.rho * x + 1.0 - self.rho * self.rho
    }

    /// Upper bound on `Pr[x ≤ a, y ≥ t]`: `Pr[y ≥ t]`.
    fn upper_tail(&self, t: f64) -> f64 {
        erfc((t.max(0.0) / 2.0).sqrt())
    }

    /// Upper bound on `Pr[x ≥ a, y ≤ b]`: the smaller marginal.
    fn lower_joint(&self) -> f64 {
        erfc((self.a.max(0.0) / 2.0).sqrt()).min(erf((self.b.max(0.0) / 2.0).sqrt()))
    }

    /// `(1/δ)·Σ_{k≥1} b_{k+1}·ε(a, b_k)`, or `None` if the series does not settle.
    fn series_bound(&self) -> Option<f64> {
        let mut sum = 0.0;
        for k in 1..=SERIES_MAX_TERMS {
            let bk = self.b + k as f64 * self.step;
            let term = (bk + self.step) * self.upper_tail(bk);
            sum += term;
            if term < SERIES_CUTOFF && k > 1 {
                return Some(sum / self.delta);
            }
        }
        None
    }
}

/// Frequencies of `A ∩ B_δ` and `C ∩ D_δ` against their expectation-based bounds.
pub fn check_expectation_bounds(
    scenario: &ExpectationScenario,
    trials: u64,
    seed: u64,
) -> Result<BoundCheckReport> {
    let sc = *scenario;
    ensure_domain(sc.rho.abs() <= 1.0, "rho", sc.rho, "|rho| <= 1")?;
    ensure_domain(sc.a >= 0.0, "a", sc.a, ">= 0")?;
    ensure_domain(sc.b >= 0.0, "b", sc.b, ">= 0")?;
    ensure_domain(sc.delta > 0.0, "delta", sc.delta, "> 0")?;
    ensure_domain(sc.step > 0.0, "step", sc.step, "> 0")?;
    check_trials(trials)?;
    let [ab, cd] = count_events(trials, seed, || {
        move |rng: &mut Rng| {
            let u = normal(rng);
            let x = u * u;
            let m = sc.conditional_mean(x);
            [
                x <= sc.a && m >= sc.b + sc.delta,
                x >= sc.a && m <= sc.b - sc.delta,
            ]
        }
    });
    let series = sc.series_bound();
    Ok(BoundCheckReport::new(
        "expectation-bounds",
        &[
            ("rho", sc.rho),
            ("a", sc.a),
            ("b", sc.b),
            ("delta", sc.delta),
            ("step", sc.step),
        ],
        trials,
        seed,
        vec![
            EventCheck::new(
                "A and B_delta",
                series.unwrap_or(f64::NAN),
                ab,
                trials,
                series.is_some(),
            ),
            EventCheck::new(
                "C and D_delta",
                sc.b * sc.lower_joint() / sc.delta,
                cd,
                trials,
                true,
            ),
        ],
    ))
}

/// Named groups of checks in the default suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Chi2,
    Projection,
    InnerProduct,
    HalfVsHalf,
    Expectation,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Chi2,
        Suite::Projection,
        Suite::InnerProduct,
        Suite::HalfVsHalf,
        Suite::Expectation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Chi2 => "chi2",
            Suite::Projection => "projection",
            Suite::InnerProduct => "inner-product",
            Suite::HalfVsHalf => "half-vs-half",
            Suite::Expectation => "expectation",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

pub const DEFAULT_EPS_VALUES: [f64; 3] = [0.01, 0.05, 0.2];
pub const DEFAULT_TRIALS: u64 = 100_000;

/// Runs the selected suites at every `eps`; reports come back in suite order.
///
/// Dimensions: chi-squared with `n = 100, x = ln(1/ε)`; projection with
/// `n = 200`; inner product with `n = 100, x = ln(8/ε)`; half-vs-half with `n = 500`.
pub fn run_suite(
    suites: &[Suite],
    eps_values: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<BoundCheckReport>> {
    if suites.is_empty() {
        return Err(Error::Configuration("no suite selected".into()));
    }
    let mut jobs: Vec<(Suite, Option<f64>, Option<ExpectationScenario>)> = Vec::new();
    for &s in suites {
        if s == Suite::Expectation {
            for sc in ExpectationScenario::defaults() {
                jobs.push((s, None, Some(sc)));
            }
        } else {
            if eps_values.is_empty() {
                return Err(Error::Configuration("no eps values given".into()));
            }
            for &e in eps_values {
                jobs.push((s, Some(e), None));
            }
        }
    }
    jobs.iter()
        .enumerate()
        .map(|(i, &(s, eps, sc))| {
            let seed = derive_seed(seed, i as u64);
            let eps = eps.unwrap_or(0.0);
            match s {
                Suite::Chi2 => check_chi2_tails(100, (1.0 / eps).ln(), trials, seed),
                Suite::Projection => check_random_projection_norm(200, trials, eps, seed),
                Suite::InnerProduct => {
                    check_inner_product_projection(100, trials, (8.0 / eps).ln(), seed)
                }
                Suite::HalfVsHalf => check_half_vs_half(500, trials, eps, seed),
                Suite::Expectation => {
                    check_expectation_bounds(&sc.expect("scenario"), trials, seed)
                }
            }
        })
        .collect()
}
