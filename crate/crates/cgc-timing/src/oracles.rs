//! Independent ground truth: Monte Carlo simulation of the full loop,
//! the truncated-convolution CDF baseline, exact convolution of small
//! lattice sums, and the i.i.d.-gamma benchmark study.
//!
//! Everything here deliberately avoids the saddlepoint code paths it is used
//! to check.

use crate::dist::{exact_gamma_cdf, exact_negbin_pmf, CgfModel, GammaTerm, LatticeTerm};
use crate::error::Error;
use crate::latency::{CurveMethod, LatencyCurve, PmfTable};
use crate::scenario::{ContinuousKind, LatticeKind, ScenarioConfig};
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Samples drawn per independently seeded stream.
const SHARD_SIZE: u64 = 1 << 16;

/// The four latency quantities tracked by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LoopQuantity {
    #[serde(rename = "CL")]
    ControlLink,
    #[serde(rename = "ET")]
    EventTriggered,
    #[serde(rename = "FL")]
    FeedbackLink,
    #[serde(rename = "T")]
    ClosedLoop,
}

impl LoopQuantity {
    pub const ALL: [LoopQuantity; 4] = [
        LoopQuantity::ControlLink,
        LoopQuantity::EventTriggered,
        LoopQuantity::FeedbackLink,
        LoopQuantity::ClosedLoop,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            LoopQuantity::ControlLink => "CL",
            LoopQuantity::EventTriggered => "ET",
            LoopQuantity::FeedbackLink => "FL",
            LoopQuantity::ClosedLoop => "T",
        }
    }
}

impl std::str::FromStr for LoopQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CL" | "cl" => Ok(LoopQuantity::ControlLink),
            "ET" | "et" => Ok(LoopQuantity::EventTriggered),
            "FL" | "fl" => Ok(LoopQuantity::FeedbackLink),
            "T" | "t" => Ok(LoopQuantity::ClosedLoop),
            other => Err(Error::config(format!("unknown quantity `{other}` (want CL, ET, FL, T)"))),
        }
    }
}

/// Mean exceedance estimate at one deadline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessEstimate {
    pub tau: f64,
    pub mean: f64,
    /// Sample standard deviation over sqrt(samples).
    pub std_error: f64,
}

/// Simulation output: per-quantity sorted samples, empirical curves, and the
/// exceedance table. Identical seeds reproduce the report bit for bit.
#[derive(Debug, Clone)]
pub struct McReport {
    pub samples: u64,
    pub seed: u64,
    pub scenario: String,
    pub kappa: f64,
    sorted: [Vec<f64>; 4],
    pub excess_estimates: Vec<ExcessEstimate>,
    pub runtime_secs: f64,
}

impl McReport {
    fn slot(&self, q: LoopQuantity) -> &[f64] {
        let idx = LoopQuantity::ALL.iter().position(|x| *x == q).expect("fixed set");
        &self.sorted[idx]
    }

    /// Empirical CDF at `x`.
    pub fn ecdf(&self, q: LoopQuantity, x: f64) -> f64 {
        let data = self.slot(q);
        let count = data.partition_point(|&v| v <= x);
        count as f64 / data.len() as f64
    }

    /// Empirical quantile (inverse CDF, lower interpolation).
    pub fn quantile(&self, q: LoopQuantity, p: f64) -> f64 {
        let data = self.slot(q);
        let idx = ((p * data.len() as f64).ceil() as usize).clamp(1, data.len());
        data[idx - 1]
    }

    /// Binomial standard error of the empirical CDF at level `p`.
    pub fn ecdf_std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }

    /// Mean exceedance over `tau` with its standard error.
    pub fn excess_mean(&self, tau: f64) -> ExcessEstimate {
        let data = self.slot(LoopQuantity::EventTriggered);
        let n = data.len() as f64;
        let start = data.partition_point(|&v| v <= tau);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &v in &data[start..] {
            let d = v - tau;
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        ExcessEstimate { tau, mean, std_error: (var / n).sqrt() }
    }

    /// Empirical CDF curve on `points` evenly spaced values of
    /// `[0, quantile(0.9999)]`.
    pub fn curve(&self, q: LoopQuantity, points: usize) -> LatencyCurve {
        let hi = self.quantile(q, 0.9999);
        let xs: Vec<f64> = (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect();
        let ps = xs.iter().map(|&x| self.ecdf(q, x)).collect();
        LatencyCurve {
            xs,
            ps,
            method: CurveMethod::MonteCarlo,
            scenario: self.scenario.clone(),
            kappa: self.kappa,
            delta: 0.0,
        }
    }

    /// JSON summary: sizes, seed, quantiles, exceedance table.
    pub fn summary(&self) -> McSummary {
        let levels = [0.5, 0.9, 0.99, 0.999];
        let quantiles = LoopQuantity::ALL
            .iter()
            .map(|&q| {
                let vals = levels.iter().map(|&p| self.quantile(q, p)).collect();
                QuantileRow {
                    quantity: q.token().to_string(),
                    levels: levels.to_vec(),
                    values: vals,
                }
            })
            .collect();
        McSummary {
            samples: self.samples,
            seed: self.seed,
            scenario: self.scenario.clone(),
            kappa: self.kappa,
            runtime_secs: self.runtime_secs,
            quantiles,
            excess: self.excess_estimates.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantileRow {
    pub quantity: String,
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub samples: u64,
    pub seed: u64,
    pub scenario: String,
    pub kappa: f64,
    pub runtime_secs: f64,
    pub quantiles: Vec<QuantileRow>,
    pub excess: Vec<ExcessEstimate>,
}

struct LoopSampler {
    gammas_et: Vec<GammaTerm>,
    gamma_ll: GammaTerm,
    lat_cd: LatticeTerm,
    lat_vi: LatticeTerm,
    lat_hl: LatticeTerm,
    lat_ll: LatticeTerm,
    tau_pf: f64,
}

impl LoopSampler {
    fn new(scenario: &ScenarioConfig, kappa: f64) -> Result<Self> {
        let et = scenario.continuous_cgf(kappa, ContinuousKind::EventTriggered)?;
        let loop_cont = scenario.continuous_cgf(kappa, ContinuousKind::Loop)?;
        let gamma_ll = *loop_cont.gamma_terms().last().expect("loop model has the command term");
        let lattice = scenario.lattice_cgf(kappa, LatticeKind::Loop)?;
        let lt = lattice.lattice_terms();
        Ok(Self {
            gammas_et: et.gamma_terms().to_vec(),
            gamma_ll,
            lat_cd: lt[0],
            lat_vi: lt[1],
            lat_hl: lt[2],
            lat_ll: lt[3],
            tau_pf: scenario.tau_pf,
        })
    }

    /// One loop realization: (T_CL, T_ET, T_FL, T).
    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
        let mut t_et = 0.0;
        for g in &self.gammas_et {
            t_et += g.sample(rng);
        }
        t_et += self.lat_cd.sample(rng) + self.lat_vi.sample(rng);
        let t_cl = self.gamma_ll.sample(rng) + self.lat_hl.sample(rng) + self.lat_ll.sample(rng);
        let t_fl = self.tau_pf.max(t_et);
        (t_cl, t_et, t_fl, t_cl + t_fl)
    }
}

/// Simulate the closed loop with the default exceedance grid (ten deadlines
/// between 70% and 92.5% of the event-triggered mean).
pub fn mc_closed_loop(
    scenario: &ScenarioConfig,
    kappa: f64,
    samples: u64,
    seed: u64,
) -> Result<McReport> {
    let mean = scenario.clt_cumulants(kappa, ContinuousKind::EventTriggered)?.mean;
    let taus: Vec<f64> = (0..10).map(|i| mean * (0.70 + 0.025 * i as f64)).collect();
    mc_closed_loop_with_taus(scenario, kappa, samples, seed, &taus)
}

/// Simulate the closed loop, estimating the exceedance at the given
/// deadlines.
///
/// Sampling is sharded over independently seeded streams and merged in shard
/// order, so the result does not depend on the worker count.
pub fn mc_closed_loop_with_taus(
    scenario: &ScenarioConfig,
    kappa: f64,
    samples: u64,
    seed: u64,
    excess_taus: &[f64],
) -> Result<McReport> {
    if samples < 1_000 {
        return Err(Error::domain(format!("need at least 1000 samples, got {samples}")));
    }
    let start = Instant::now();
    let sampler = LoopSampler::new(scenario, kappa)?;
    let shards = samples.div_ceil(SHARD_SIZE);
    let mut per_shard: Vec<[Vec<f64>; 4]> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = SHARD_SIZE.min(samples - shard * SHARD_SIZE) as usize;
            let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(count));
            for _ in 0..count {
                let (cl, et, fl, t) = sampler.draw(&mut rng);
                out[0].push(cl);
                out[1].push(et);
                out[2].push(fl);
                out[3].push(t);
            }
            out
        })
        .collect();
    let mut sorted: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(samples as usize));
    for shard in &mut per_shard {
        for (i, v) in shard.iter_mut().enumerate() {
            sorted[i].append(v);
        }
    }
    for v in &mut sorted {
        v.sort_by(f64::total_cmp);
    }
    let mut report = McReport {
        samples,
        seed,
        scenario: scenario.preset_name.clone(),
        kappa,
        sorted,
        excess_estimates: Vec::new(),
        runtime_secs: 0.0,
    };
    report.excess_estimates = excess_taus.iter().map(|&t| report.excess_mean(t)).collect();
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// CDF of a sum of gamma terms by discretized convolution: each density is
/// sampled as `f(i d) d` on `[0, cutoff]`, the mass vectors are convolved
/// pairwise, and the result is cumulatively summed.
#[derive(Debug, Clone)]
pub struct ConvolutionCdf {
    pub granularity: f64,
    pub values: Vec<f64>,
}

impl ConvolutionCdf {
    /// Linear interpolation between grid points; clamped at the ends.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let pos = x / self.granularity;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().expect("non-empty grid");
        }
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Gamma density via `ln Gamma`, independent of the CGF machinery.
fn gamma_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - crate::special::ln_gamma(shape)).exp()
}

/// Truncated-convolution baseline for a sum of gamma terms.
///
/// Cost is `O(M (cutoff/granularity)^2)` with pairwise convolution; a budget
/// guard rejects grids whose pairwise product would be unreasonable.
pub fn truncated_convolution_cdf(
    gamma_terms: &[GammaTerm],
    granularity: f64,
    cutoff: f64,
) -> Result<ConvolutionCdf> {
    if gamma_terms.is_empty() || gamma_terms.len() > 6 {
        return Err(Error::Unsupported(format!(
            "truncated convolution expects 1..=6 terms, got {}",
            gamma_terms.len()
        )));
    }
    if !(granularity > 0.0 && cutoff > granularity) {
        return Err(Error::domain(format!(
            "need 0 < granularity < cutoff, got ({granularity}, {cutoff})"
        )));
    }
    let n = (cutoff / granularity).ceil() as usize + 1;
    if n > 2_000_001 {
        return Err(Error::Unsupported(format!(
            "convolution grid of {n} points exceeds the resource budget"
        )));
    }
    let masses: Vec<Vec<f64>> = gamma_terms
        .iter()
        .map(|g| {
            (0..n)
                .map(|i| gamma_pdf(g.shape, g.rate, i as f64 * granularity) * granularity)
                .collect()
        })
        .collect();
    let mut acc = masses[0].clone();
    for m in &masses[1..] {
        acc = convolve_truncated(&acc, m);
    }
    let mut values = acc;
    let mut run = 0.0;
    for v in &mut values {
        run += *v;
        *v = run.min(1.0);
    }
    Ok(ConvolutionCdf { granularity, values })
}

fn convolve_truncated(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().take(n - i).enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Exact PMF of a sum of lattice terms on a common spacing, by direct
/// convolution of the per-term negative binomials truncated where the tail
/// drops below 1e-12. The result is normalized.
pub fn exact_lattice_convolution(lattice_terms: &[LatticeTerm]) -> Result<PmfTable> {
    if lattice_terms.is_empty() {
        return Err(Error::Unsupported("need at least one lattice term".into()));
    }
    let spacing = lattice_terms[0].spacing;
    for l in lattice_terms {
        if (l.spacing - spacing).abs() > 1e-12 * spacing {
            return Err(Error::config("lattice spacings differ"));
        }
    }
    let mut pmfs: Vec<Vec<f64>> = Vec::new();
    for term in lattice_terms {
        let mut pmf = Vec::new();
        let mut k = term.packets as u64;
        let mut cum = 0.0;
        loop {
            let p = exact_negbin_pmf(term, k);
            pmf.push(p);
            cum += p;
            if 1.0 - cum < 1e-12 {
                break;
            }
            k += 1;
            if pmf.len() > 5_000_000 {
                return Err(Error::NonConvergence("lattice tail truncation ran away".into()));
            }
        }
        pmfs.push(pmf);
    }
    let mut acc = pmfs[0].clone();
    for p in &pmfs[1..] {
        let mut out = vec![0.0; acc.len() + p.len() - 1];
        for (i, &ai) in acc.iter().enumerate() {
            for (j, &bj) in p.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        acc = out;
    }
    let total: f64 = acc.iter().sum();
    for v in &mut acc {
        *v /= total;
    }
    let base: u64 = lattice_terms.iter().map(|l| l.packets as u64).sum();
    Ok(PmfTable { base_index: base, spacing, probs: acc, normalized: true })
}

/// The i.i.d.-gamma benchmark: four Gamma(2,1) terms whose sum is exactly
/// Gamma(8,1), compared across the saddlepoint CDF and the truncated
/// convolution on a fixed grid.
#[derive(Debug, Clone)]
pub struct Fig3Study {
    pub shape: f64,
    pub rate: f64,
    pub terms: usize,
    pub granularity: f64,
    pub cutoff: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Default for Fig3Study {
    fn default() -> Self {
        Self {
            shape: 2.0,
            rate: 1.0,
            terms: 4,
            granularity: 1e-3,
            cutoff: 20.0,
            x_max: 16.0,
            points: 400,
        }
    }
}

/// Per-point comparison of the benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct Fig3Report {
    pub xs: Vec<f64>,
    pub exact: Vec<f64>,
    pub spa: Vec<f64>,
    pub conv: Vec<f64>,
    pub max_abs_err_spa: f64,
    pub max_abs_err_conv: f64,
    pub err_at_mean_spa: f64,
    pub spa_no_worse_fraction: f64,
}

impl Fig3Study {
    pub fn model(&self) -> CgfModel {
        let mut m = CgfModel::new();
        for _ in 0..self.terms {
            m.push_gamma(GammaTerm::new(self.shape, self.rate).expect("valid benchmark term"));
        }
        m
    }

    pub fn exact_cdf(&self, x: f64) -> f64 {
        exact_gamma_cdf(self.shape * self.terms as f64, self.rate, x).expect("valid parameters")
    }

    pub fn run(&self) -> Result<Fig3Report> {
        let model = self.model();
        let terms = vec![GammaTerm::new(self.shape, self.rate)?; self.terms];
        let conv = truncated_convolution_cdf(&terms, self.granularity, self.cutoff)?;
        let mean = model.mean();
        let mut xs = Vec::with_capacity(self.points);
        let mut exact = Vec::with_capacity(self.points);
        let mut spa = Vec::with_capacity(self.points);
        let mut conv_vals = Vec::with_capacity(self.points);
        let mut max_spa: f64 = 0.0;
        let mut max_conv: f64 = 0.0;
        let mut no_worse = 0usize;
        for i in 0..self.points {
            let x = self.x_max * i as f64 / (self.points - 1) as f64;
            let e = self.exact_cdf(x);
            let s = if x <= 0.0 {
                0.0
            } else {
                match crate::saddlepoint::spa_cdf(&model, x) {
                    Ok(p) => p,
                    Err(Error::BracketExhausted { .. }) => 0.0,
                    Err(err) => return Err(err),
                }
            };
            let c = conv.eval(x);
            let es = (s - e).abs();
            let ec = (c - e).abs();
            max_spa = max_spa.max(es);
            max_conv = max_conv.max(ec);
            if es <= ec {
                no_worse += 1;
            }
            xs.push(x);
            exact.push(e);
            spa.push(s);
            conv_vals.push(c);
        }
        let err_at_mean_spa =
            (crate::saddlepoint::spa_cdf(&model, mean)? - self.exact_cdf(mean)).abs();
        Ok(Fig3Report {
            xs,
            exact,
            spa,
            conv: conv_vals,
            max_abs_err_spa: max_spa,
            max_abs_err_conv: max_conv,
            err_at_mean_spa,
            spa_no_worse_fraction: no_worse as f64 / self.points as f64,
        })
    }
}

/// Scenario-level regime check for the Gaussian-smoothed route: it needs
/// many packets or a slot time that is small next to the continuous spread.
pub fn clt_regime_ok(scenario: &ScenarioConfig, kappa: f64) -> Result<bool> {
    let lattice = scenario.lattice_cgf(kappa, LatticeKind::Loop)?;
    let packets = lattice.total_packets();
    let cont_sd =
        scenario.continuous_cumulants(kappa, ContinuousKind::EventTriggered)?.variance.sqrt();
    Ok(packets >= 30 || scenario.t_u <= cont_sd)
}
