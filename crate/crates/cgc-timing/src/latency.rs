//! Composition of the engine outputs into the closed-loop latency
//! distributions: the lattice PMF table with tail control, the mixture CDFs
//! of the event-triggered, control-link, feedback-link and closed-loop
//! latencies, their Gaussian-smoothed (CLT) variants, the conditional excess
//! over the feedback deadline, and the compression-ratio gradient of the CDF.

use crate::dist::{exact_gamma_cdf, CgfModel};
use crate::error::Error;
use crate::saddlepoint::{
    lugannani_rice, solve_saddlepoint, spa_cdf, spa_pdf, spa_pmf, MEAN_BRANCH_REL, V_FALLBACK,
};
use crate::scenario::{CompressionKind, ContinuousKind, LatticeKind, ScenarioConfig};
use crate::special::normal_pdf;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;

/// Default tail-control parameter of the PMF-table construction.
pub const DEFAULT_DELTA: f64 = 1e-5;

/// Normalized lattice PMF on `{base_index, base_index+1, ...} * spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    /// Smallest slot count carrying mass.
    pub base_index: u64,
    /// Lattice spacing in seconds.
    pub spacing: f64,
    /// Probabilities for consecutive slot counts starting at `base_index`.
    pub probs: Vec<f64>,
    /// True when the table sums to one. False flags the degenerate
    /// single-point truncation (the tail cutoff fired at the first index).
    pub normalized: bool,
}

impl PmfTable {
    pub fn max_index(&self) -> u64 {
        self.base_index + self.probs.len() as u64 - 1
    }

    pub fn prob(&self, k: u64) -> f64 {
        if k < self.base_index {
            return 0.0;
        }
        self.probs.get((k - self.base_index) as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Enumerate the saddlepoint mass function upward from the base index until
/// it drops below `delta`, then rescale the interior entries so the table
/// sums to one while the exact base probability is kept untouched.
///
/// Deterministic lattices (all failure probabilities zero) yield a unit mass
/// at the base. If even the first enumerated index falls below `delta` the
/// table degenerates to the base point and is flagged unnormalized.
pub fn pmf_discrete_sum(lattice: &CgfModel, delta: f64) -> Result<PmfTable> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let spacing = lattice
        .lattice_spacing()
        .ok_or_else(|| Error::config("PMF table needs lattice terms with a common spacing"))?;
    let base = lattice.total_packets();
    if lattice.lattice_terms().iter().all(|l| l.failure_prob == 0.0) {
        return Ok(PmfTable { base_index: base, spacing, probs: vec![1.0], normalized: true });
    }
    let base_prob = spa_pmf(lattice, base)?;
    let mut probs = vec![base_prob];
    if base_prob >= delta {
        let mut k = base;
        loop {
            k += 1;
            if k - base > 200_000 {
                return Err(Error::NonConvergence(format!(
                    "PMF enumeration exceeded 200000 entries at delta = {delta}"
                )));
            }
            let p = spa_pmf(lattice, k)?;
            probs.push(p);
            if p < delta {
                break;
            }
        }
    }
    if probs.len() == 1 {
        // the cutoff fired immediately: keep the exact base mass, flagged
        return Ok(PmfTable { base_index: base, spacing, probs, normalized: false });
    }
    let interior: f64 = probs[1..].iter().sum();
    if interior > 0.0 {
        let scale = (1.0 - probs[0]) / interior;
        for p in &mut probs[1..] {
            *p *= scale;
        }
    }
    Ok(PmfTable { base_index: base, spacing, probs, normalized: true })
}

/// Evaluation route for a CDF quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CdfRoute {
    /// Lattice PMF table mixed with the continuous saddlepoint CDF.
    Discrete,
    /// Gaussian replacement of the lattice sum, single saddlepoint CDF.
    Clt,
}

/// Method tag attached to exported curves. The wire tokens follow the CLI
/// contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveMethod {
    /// Discrete-mixture route (token `theorem1`).
    #[serde(rename = "theorem1")]
    DiscreteMix,
    /// Gaussian-smoothed route for per-leg quantities (token `lemma3`).
    #[serde(rename = "lemma3")]
    GaussianLeg,
    /// Gaussian-smoothed route for the closed loop (token `theorem2`).
    #[serde(rename = "theorem2")]
    GaussianLoop,
    #[serde(rename = "montecarlo")]
    MonteCarlo,
    #[serde(rename = "truncconv")]
    TruncConv,
    #[serde(rename = "exact")]
    Exact,
}

impl CurveMethod {
    pub fn token(&self) -> &'static str {
        match self {
            CurveMethod::DiscreteMix => "theorem1",
            CurveMethod::GaussianLeg => "lemma3",
            CurveMethod::GaussianLoop => "theorem2",
            CurveMethod::MonteCarlo => "montecarlo",
            CurveMethod::TruncConv => "truncconv",
            CurveMethod::Exact => "exact",
        }
    }

    pub fn route(&self) -> Option<CdfRoute> {
        match self {
            CurveMethod::DiscreteMix => Some(CdfRoute::Discrete),
            CurveMethod::GaussianLeg | CurveMethod::GaussianLoop => Some(CdfRoute::Clt),
            _ => None,
        }
    }
}

impl FromStr for CurveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(CurveMethod::DiscreteMix),
            "lemma3" => Ok(CurveMethod::GaussianLeg),
            "theorem2" => Ok(CurveMethod::GaussianLoop),
            "montecarlo" => Ok(CurveMethod::MonteCarlo),
            "truncconv" => Ok(CurveMethod::TruncConv),
            "exact" => Ok(CurveMethod::Exact),
            other => Err(Error::config(format!(
                "unknown method `{other}` (expected theorem1, lemma3, theorem2, montecarlo, truncconv)"
            ))),
        }
    }
}

impl std::fmt::Display for CurveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// A sampled CDF or PDF curve with provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyCurve {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub method: CurveMethod,
    pub scenario: String,
    pub kappa: f64,
    pub delta: f64,
}

impl LatencyCurve {
    /// Write the curve as CSV with the documented header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x_seconds,probability,method,scenario,kappa,delta")?;
        for (x, p) in self.xs.iter().zip(&self.ps) {
            writeln!(
                w,
                "{x},{p},{},{},{},{}",
                self.method.token(),
                self.scenario,
                self.kappa,
                self.delta
            )?;
        }
        Ok(())
    }
}

/// All per-(scenario, ratio, delta) state needed to evaluate the latency
/// CDFs on a grid: PMF tables and CGF models are built once and reused
/// across the whole grid.
#[derive(Debug, Clone)]
pub struct LoopAnalyzer<'a> {
    scenario: &'a ScenarioConfig,
    kappa: f64,
    delta: f64,
    et_table: PmfTable,
    cl_table: PmfTable,
    loop_table: PmfTable,
    et_cont: CgfModel,
    loop_cont: CgfModel,
    et_clt: CgfModel,
    loop_clt: CgfModel,
}

impl<'a> LoopAnalyzer<'a> {
    pub fn new(scenario: &'a ScenarioConfig, kappa: f64, delta: f64) -> Result<Self> {
        let et_table =
            pmf_discrete_sum(&scenario.lattice_cgf(kappa, LatticeKind::EventTriggered)?, delta)?;
        let cl_table =
            pmf_discrete_sum(&scenario.lattice_cgf(kappa, LatticeKind::ControlLink)?, delta)?;
        let loop_table = pmf_discrete_sum(&scenario.lattice_cgf(kappa, LatticeKind::Loop)?, delta)?;
        Ok(Self {
            scenario,
            kappa,
            delta,
            et_table,
            cl_table,
            loop_table,
            et_cont: scenario.continuous_cgf(kappa, ContinuousKind::EventTriggered)?,
            loop_cont: scenario.continuous_cgf(kappa, ContinuousKind::Loop)?,
            et_clt: scenario.clt_cgf(kappa, ContinuousKind::EventTriggered)?,
            loop_clt: scenario.clt_cgf(kappa, ContinuousKind::Loop)?,
        })
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        self.scenario
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn et_table(&self) -> &PmfTable {
        &self.et_table
    }

    /// Mean and standard deviation of the smoothed event-triggered model.
    pub fn et_mean_sd(&self) -> (f64, f64) {
        (self.et_clt.mean(), self.et_clt.variance().sqrt())
    }

    /// CDF value of the continuous model, with unreachable deep-left points
    /// evaluating to zero.
    fn cont_cdf(model: &CgfModel, y: f64) -> Result<f64> {
        if y <= model.support_infimum() {
            return Ok(0.0);
        }
        match spa_cdf(model, y) {
            Ok(p) => Ok(p),
            Err(Error::BracketExhausted { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    fn mixture_cdf(&self, table: &PmfTable, cont: &CgfModel, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let k_x = (x / table.spacing).floor() as u64;
        if k_x < table.base_index {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (i, p) in table.probs.iter().enumerate() {
            let k = table.base_index + i as u64;
            if k > k_x {
                break;
            }
            let y = x - k as f64 * table.spacing;
            if y <= 0.0 {
                continue;
            }
            total += p * Self::cont_cdf(cont, y)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// CDF of the event-triggered latency (discrete-mixture route).
    pub fn cdf_et(&self, x: f64) -> Result<f64> {
        self.mixture_cdf(&self.et_table, &self.et_cont, x)
    }

    /// CDF of the control-link latency. The continuous part is a single
    /// gamma, so the exact regularized incomplete gamma is used directly —
    /// no saddlepoint involved.
    pub fn cdf_cl(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let table = &self.cl_table;
        let k_x = (x / table.spacing).floor() as u64;
        if k_x < table.base_index {
            return Ok(0.0);
        }
        let c = &self.scenario.compute;
        let shape = c.mec_shape;
        let rate = c.mec_freq * c.rate_ll / c.hl_total_bits;
        let mut total = 0.0;
        for (i, p) in table.probs.iter().enumerate() {
            let k = table.base_index + i as u64;
            if k > k_x {
                break;
            }
            let y = x - k as f64 * table.spacing;
            if y > 0.0 {
                total += p * exact_gamma_cdf(shape, rate, y)?;
            }
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// CDF of the feedback-link latency: zero up to the feedback deadline,
    /// then the event-triggered CDF.
    pub fn cdf_fl(&self, x: f64) -> Result<f64> {
        if x <= self.scenario.tau_pf {
            return Ok(0.0);
        }
        self.cdf_et(x)
    }

    /// CDF of the command-to-feedback path (control link plus event
    /// triggered, discrete-mixture route).
    pub fn cdf_t1(&self, x: f64) -> Result<f64> {
        self.mixture_cdf(&self.loop_table, &self.loop_cont, x)
    }

    /// CDF of the closed-loop latency: the product form
    /// `I{x > tau} F_cl(x - tau) F_t1(x)` with the requested route for the
    /// command-to-feedback factor.
    pub fn cdf_t(&self, x: f64, route: CdfRoute) -> Result<f64> {
        let tau = self.scenario.tau_pf;
        if x <= tau {
            return Ok(0.0);
        }
        let t1 = match route {
            CdfRoute::Discrete => self.cdf_t1(x)?,
            CdfRoute::Clt => Self::cont_cdf(&self.loop_clt, x)?,
        };
        Ok((self.cdf_cl(x - tau)? * t1).clamp(0.0, 1.0))
    }

    /// Gaussian-smoothed CDF of the event-triggered latency.
    pub fn cdf_et_clt(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        Self::cont_cdf(&self.et_clt, x)
    }

    /// Gaussian-smoothed density of the event-triggered latency.
    pub fn pdf_et_clt(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        match spa_pdf(&self.et_clt, x) {
            Ok(d) => Ok(d),
            Err(Error::BracketExhausted { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    /// Gaussian-smoothed CDF of the command-to-feedback path.
    pub fn cdf_t1_clt(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        Self::cont_cdf(&self.loop_clt, x)
    }

    /// Expected exceedance of the event-triggered latency over a feedback
    /// deadline, from single-point CDF/PDF evaluations of the smoothed
    /// model — no discretized density grid.
    ///
    /// At the mean the expression is 0/0; within one mean-branch width the
    /// value is the average of the two adjacent evaluations.
    pub fn conditional_excess(&self, tau: f64) -> Result<f64> {
        let mean = self.et_clt.mean();
        if tau <= 0.0 {
            return Ok(mean - tau);
        }
        let width = (V_FALLBACK * self.et_clt.variance().sqrt())
            .max(MEAN_BRANCH_REL * mean.abs().max(1.0));
        if (tau - mean).abs() <= width {
            let lo = self.excess_off_mean(tau - 2.0 * width)?;
            let hi = self.excess_off_mean(tau + 2.0 * width)?;
            return Ok(0.5 * (lo + hi));
        }
        self.excess_off_mean(tau)
    }

    fn excess_off_mean(&self, tau: f64) -> Result<f64> {
        let model = &self.et_clt;
        let mean = model.mean();
        let sol = match solve_saddlepoint(model, tau) {
            Ok(s) => s,
            // deadline unreachably deep in the left tail: excess is mean - tau
            Err(Error::BracketExhausted { .. }) => return Ok(mean - tau),
            Err(e) => return Err(e),
        };
        let cdf = spa_cdf(model, tau)?;
        let pdf = spa_pdf(model, tau)?;
        Ok(((mean - tau) * (1.0 - cdf) + (tau - mean) / sol.s_star * pdf).max(0.0))
    }

    /// Derivative of the command-to-feedback CDF in the compression ratio,
    /// chained through the PMF mixture (the lattice part does not depend on
    /// the ratio under the fixed-count convention).
    pub fn grad_t1_kappa(&self, x: f64, opts: &GradOptions) -> Result<f64> {
        let mut total = 0.0;
        let table = &self.loop_table;
        let k_x = (x / table.spacing).floor() as u64;
        for (i, p) in table.probs.iter().enumerate() {
            let k = table.base_index + i as u64;
            if k > k_x {
                break;
            }
            let y = x - k as f64 * table.spacing;
            if y <= 0.0 {
                continue;
            }
            total +=
                p * cdf_grad_kappa_with(self.scenario, self.kappa, y, ContinuousKind::Loop, opts)?;
        }
        Ok(total)
    }

    /// Smallest point where the given CDF reaches probability `q`.
    pub fn quantile(&self, q: f64, cdf: impl Fn(&Self, f64) -> Result<f64>) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::domain(format!("quantile level must lie in [0, 1), got {q}")));
        }
        let mut hi = self.et_clt.mean().max(self.scenario.tau_pf) + self.scenario.mean_t_cl();
        let mut guard = 0;
        while cdf(self, hi)? < q {
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(Error::NonConvergence(format!("quantile {q} not reached")));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(self, mid)? < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi.max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Options of the analytic ratio gradient.
#[derive(Debug, Clone, Copy)]
pub struct GradOptions {
    /// Magnitude bound applied to the returned gradient.
    pub clip: f64,
    /// Step of the central finite-difference fallback near the mean branch.
    pub fd_step: f64,
}

impl Default for GradOptions {
    fn default() -> Self {
        Self { clip: 1e6, fd_step: 1e-5 }
    }
}

/// Gradient of the command-to-feedback continuous-part CDF in the
/// compression ratio, via implicit differentiation of the saddlepoint
/// equation (default options, whole-loop continuous sum).
pub fn cdf_grad_kappa(scenario: &ScenarioConfig, kappa: f64, x: f64) -> Result<f64> {
    cdf_grad_kappa_with(scenario, kappa, x, ContinuousKind::Loop, &GradOptions::default())
}

/// As [`cdf_grad_kappa`], selecting the continuous sum and options.
///
/// Under the exponential cost law the compression terms drop out at ratio 1,
/// so the CDF is discontinuous there and the gradient is reported as a
/// domain error rather than a value. Near the mean branch the analytic chain
/// is singular and a central finite difference is used instead. The result
/// magnitude is clipped at `opts.clip`.
pub fn cdf_grad_kappa_with(
    scenario: &ScenarioConfig,
    kappa: f64,
    x: f64,
    kind: ContinuousKind,
    opts: &GradOptions,
) -> Result<f64> {
    let comp = &scenario.compression;
    if comp.kind == CompressionKind::Exp && kappa <= 1.0 {
        return Err(Error::domain(
            "ratio gradient at 1 is a term-dropping discontinuity under the exponential cost law",
        ));
    }
    if !(1.0..=comp.kappa_max).contains(&kappa) {
        return Err(Error::domain(format!("ratio {kappa} outside [1, {}]", comp.kappa_max)));
    }
    let c = &scenario.compute;
    let zc = comp.compress_cycles_per_bit(kappa)?;
    let zd = comp.decompress_cycles_per_bit(kappa)?;
    let zc_d = comp.compress_cycles_per_bit_deriv(kappa)?;
    let zd_d = comp.decompress_cycles_per_bit_deriv(kappa)?;
    // (shape, rate, d rate / d ratio) per gamma term
    let mut terms: Vec<(f64, f64, f64)> = Vec::with_capacity(4);
    let bc = c.ra_freq * c.ra_shape / (c.et_bits * zc);
    terms.push((c.ra_shape, bc, -bc * zc_d / zc));
    let bd = c.mec_freq * c.mec_shape * kappa / (c.et_bits * zd);
    terms.push((c.mec_shape, bd, bd * (1.0 / kappa - zd_d / zd)));
    terms.push((c.mec_shape, c.mec_freq * c.rate_vi / c.et_bits, 0.0));
    if kind == ContinuousKind::Loop {
        terms.push((c.mec_shape, c.mec_freq * c.rate_ll / c.hl_total_bits, 0.0));
    }
    let mut model = CgfModel::new();
    for &(a, b, _) in &terms {
        model.push_gamma(crate::dist::GammaTerm::new(a, b)?);
    }

    let d0 = model.eval(0.0)?;
    if (x - d0.k1).abs() <= MEAN_BRANCH_REL * d0.k1.abs().max(1.0) {
        return grad_by_finite_difference(scenario, kappa, x, kind, opts);
    }
    let sol = solve_saddlepoint(&model, x)?;
    if sol.v.abs() < V_FALLBACK {
        return grad_by_finite_difference(scenario, kappa, x, kind, opts);
    }
    let s = sol.s_star;
    let d = model.eval(s)?;
    // partial derivatives of the CGF in the ratio at fixed s
    let mut dk = 0.0;
    let mut dk1 = 0.0;
    let mut dk2 = 0.0;
    for &(a, b, bp) in &terms {
        let bs = b - s;
        dk += -a * s * bp / (b * bs);
        dk1 += -a * bp / (bs * bs);
        dk2 += -2.0 * a * bp / (bs * bs * bs);
    }
    let dz = -dk1 / d.k2; // implicit differentiation of K'(s*) = x
    let d_omega0 = dk + d.k1 * dz;
    let d_omega2 = dk2 + d.k3 * dz;
    let dv =
        (x * dz - d_omega0) / (s.signum() * (2.0 * (x * s - d.k)).max(f64::MIN_POSITIVE).sqrt());
    let du = d.k2.sqrt() * dz + s / (2.0 * d.k2.sqrt()) * d_omega2;
    let (v, u) = (sol.v, sol.u);
    let grad = normal_pdf(v) * (dv * (v / u - 1.0 / (v * v)) + du / (u * u));
    Ok(grad.clamp(-opts.clip, opts.clip))
}

fn grad_by_finite_difference(
    scenario: &ScenarioConfig,
    kappa: f64,
    x: f64,
    kind: ContinuousKind,
    opts: &GradOptions,
) -> Result<f64> {
    let mut h = opts.fd_step;
    let k_max = scenario.compression.kappa_max;
    while kappa - h <= 1.0 || kappa + h >= k_max {
        h *= 0.5;
        if h < 1e-12 {
            return Err(Error::domain(format!(
                "no room for a finite-difference step around ratio {kappa}"
            )));
        }
    }
    let hi = spa_cdf(&scenario.continuous_cgf(kappa + h, kind)?, x)?;
    let lo = spa_cdf(&scenario.continuous_cgf(kappa - h, kind)?, x)?;
    Ok(((hi - lo) / (2.0 * h)).clamp(-opts.clip, opts.clip))
}

/// Mean-branch value of the Gaussian-smoothed event-triggered CDF, straight
/// from the closed-form cumulants.
pub fn clt_mean_branch(scenario: &ScenarioConfig, kappa: f64) -> Result<f64> {
    let c = scenario.clt_cumulants(kappa, ContinuousKind::EventTriggered)?;
    Ok(0.5 + c.third / (6.0 * crate::special::SQRT_2PI * c.variance.powf(1.5)))
}

/// Convenience single-point wrappers around [`LoopAnalyzer`]. Grid work
/// should construct the analyzer once instead.
pub fn cdf_et(scenario: &ScenarioConfig, kappa: f64, x: f64, delta: f64) -> Result<f64> {
    LoopAnalyzer::new(scenario, kappa, delta)?.cdf_et(x)
}

pub fn cdf_cl(scenario: &ScenarioConfig, x: f64) -> Result<f64> {
    LoopAnalyzer::new(scenario, 1.0, DEFAULT_DELTA)?.cdf_cl(x)
}

pub fn cdf_fl(scenario: &ScenarioConfig, kappa: f64, x: f64, delta: f64) -> Result<f64> {
    LoopAnalyzer::new(scenario, kappa, delta)?.cdf_fl(x)
}

pub fn cdf_t(
    scenario: &ScenarioConfig,
    kappa: f64,
    x: f64,
    delta: f64,
    route: CdfRoute,
) -> Result<f64> {
    LoopAnalyzer::new(scenario, kappa, delta)?.cdf_t(x, route)
}

pub fn cdf_et_clt(scenario: &ScenarioConfig, kappa: f64, x: f64) -> Result<f64> {
    LoopAnalyzer::new(scenario, kappa, DEFAULT_DELTA)?.cdf_et_clt(x)
}

pub fn pdf_et_clt(scenario: &ScenarioConfig, kappa: f64, x: f64) -> Result<f64> {
    LoopAnalyzer::new(scenario, kappa, DEFAULT_DELTA)?.pdf_et_clt(x)
}

pub fn conditional_excess(scenario: &ScenarioConfig, kappa: f64, tau: f64) -> Result<f64> {
    LoopAnalyzer::new(scenario, kappa, DEFAULT_DELTA)?.conditional_excess(tau)
}

/// Raw Lugannani–Rice value without the clamp; exposed for diagnostics of
/// out-of-bound excursions.
pub fn lugannani_rice_raw(v: f64, u: f64) -> f64 {
    lugannani_rice(v, u)
}
