//! Elementary latency terms and their cumulant generating functions.
//!
//! A latency model is a sum of independent terms of three kinds:
//!
//! * [`GammaTerm`] — continuous computation/compression times,
//! * [`LatticeTerm`] — packet transmission times on a fixed spacing
//!   (negative-binomial number of slots: every packet is retransmitted until
//!   its first success),
//! * [`GaussianTerm`] — normal replacements used by the central-limit
//!   smoothing of lattice sums,
//!
//! plus a deterministic shift. [`CgfModel`] evaluates the CGF of the sum and
//! its first three derivatives, which is everything the saddlepoint engine
//! needs.

use crate::error::Error;
use crate::special;
use crate::Result;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

/// Gamma-distributed time in seconds: shape `alpha`, rate `beta` (1/s).
///
/// Effective rates (processor frequency divided by data size and cycles/bit)
/// are folded into `rate` at model-build time, so the engine only ever sees
/// canonical terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTerm {
    pub shape: f64,
    pub rate: f64,
}

impl GammaTerm {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::invalid(format!("gamma shape must be > 0, got {shape}")));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("gamma rate must be > 0, got {rate}")));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn third_cumulant(&self) -> f64 {
        2.0 * self.shape / (self.rate * self.rate * self.rate)
    }

    /// Draw one value. Non-integer shapes (1.25, 1.5, ...) are supported.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// Transmission time of `packets` packets, each taking `spacing` seconds per
/// attempt and failing independently with probability `failure_prob`.
///
/// The number of slots until all packets succeed is negative binomial, so the
/// time lives on the lattice `{packets, packets+1, ...} * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeTerm {
    pub packets: u32,
    pub failure_prob: f64,
    pub spacing: f64,
}

impl LatticeTerm {
    pub fn new(packets: u32, failure_prob: f64, spacing: f64) -> Result<Self> {
        if packets < 1 {
            return Err(Error::invalid("lattice term needs at least one packet"));
        }
        if !(0.0..1.0).contains(&failure_prob) {
            return Err(Error::invalid(format!(
                "failure probability must lie in [0, 1), got {failure_prob}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!("spacing must be > 0, got {spacing}")));
        }
        Ok(Self { packets, failure_prob, spacing })
    }

    /// Mean time: `packets * spacing / (1 - failure_prob)`.
    pub fn mean(&self) -> f64 {
        self.packets as f64 * self.spacing / (1.0 - self.failure_prob)
    }

    pub fn variance(&self) -> f64 {
        let q = 1.0 - self.failure_prob;
        self.failure_prob * self.packets as f64 * self.spacing * self.spacing / (q * q)
    }

    pub fn third_cumulant(&self) -> f64 {
        let e = self.failure_prob;
        let q = 1.0 - e;
        self.packets as f64 * self.spacing.powi(3) * e * (1.0 + e) / (q * q * q)
    }

    /// Draw one value: `spacing` times the total number of slots used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.spacing * self.sample_slots(rng) as f64
    }

    /// Total slot count: one geometric draw per packet.
    pub fn sample_slots<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let eps = self.failure_prob;
        if eps == 0.0 {
            return self.packets as u64;
        }
        let ln_eps = eps.ln();
        let mut total = 0u64;
        for _ in 0..self.packets {
            let w: f64 = 1.0 - rng.random::<f64>(); // in (0, 1]
            let m = (w.ln() / ln_eps).ceil() as u64;
            total += m.max(1);
        }
        total
    }
}

/// Normal term with the given mean (s) and variance (s^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianTerm {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::invalid(format!(
                "gaussian term needs finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }
}

/// CGF value and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgfDerivs {
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// A sum of independent gamma, lattice and Gaussian terms plus a shift.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CgfModel {
    gamma_terms: Vec<GammaTerm>,
    lattice_terms: Vec<LatticeTerm>,
    gaussian_terms: Vec<GaussianTerm>,
    shift: f64,
}

impl CgfModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_gamma(&mut self, term: GammaTerm) -> &mut Self {
        self.gamma_terms.push(term);
        self
    }

    pub fn push_lattice(&mut self, term: LatticeTerm) -> &mut Self {
        self.lattice_terms.push(term);
        self
    }

    pub fn push_gaussian(&mut self, term: GaussianTerm) -> &mut Self {
        self.gaussian_terms.push(term);
        self
    }

    pub fn set_shift(&mut self, shift: f64) -> &mut Self {
        self.shift = shift;
        self
    }

    pub fn gamma_terms(&self) -> &[GammaTerm] {
        &self.gamma_terms
    }

    pub fn lattice_terms(&self) -> &[LatticeTerm] {
        &self.lattice_terms
    }

    pub fn gaussian_terms(&self) -> &[GaussianTerm] {
        &self.gaussian_terms
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_terms.is_empty()
            && self.lattice_terms.is_empty()
            && self.gaussian_terms.is_empty()
    }

    /// True when the model has no continuous term (the sum lives on a lattice).
    pub fn is_lattice_only(&self) -> bool {
        self.gamma_terms.is_empty() && self.gaussian_terms.is_empty() && !self.lattice_terms.is_empty()
    }

    pub fn has_continuous_term(&self) -> bool {
        !self.gamma_terms.is_empty()
            || self.gaussian_terms.iter().any(|g| g.variance > 0.0)
    }

    /// Upper end of the CGF domain: the CGF and its derivatives are finite
    /// for every `s < s_max()`.
    pub fn s_max(&self) -> f64 {
        let mut s = f64::INFINITY;
        for g in &self.gamma_terms {
            s = s.min(g.rate);
        }
        for l in &self.lattice_terms {
            if l.failure_prob > 0.0 {
                s = s.min(-l.failure_prob.ln() / l.spacing);
            }
        }
        s
    }

    /// Essential infimum of the support (`-inf` when a Gaussian term with
    /// positive variance is present).
    pub fn support_infimum(&self) -> f64 {
        if self.gaussian_terms.iter().any(|g| g.variance > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut inf = self.shift;
        for l in &self.lattice_terms {
            inf += l.packets as f64 * l.spacing;
        }
        for g in &self.gaussian_terms {
            inf += g.mean; // zero-variance Gaussian is a shift
        }
        inf
    }

    pub fn mean(&self) -> f64 {
        let mut m = self.shift;
        m += self.gamma_terms.iter().map(GammaTerm::mean).sum::<f64>();
        m += self.lattice_terms.iter().map(LatticeTerm::mean).sum::<f64>();
        m += self.gaussian_terms.iter().map(|g| g.mean).sum::<f64>();
        m
    }

    pub fn variance(&self) -> f64 {
        self.gamma_terms.iter().map(GammaTerm::variance).sum::<f64>()
            + self.lattice_terms.iter().map(LatticeTerm::variance).sum::<f64>()
            + self.gaussian_terms.iter().map(|g| g.variance).sum::<f64>()
    }

    pub fn third_cumulant(&self) -> f64 {
        self.gamma_terms.iter().map(GammaTerm::third_cumulant).sum::<f64>()
            + self.lattice_terms.iter().map(LatticeTerm::third_cumulant).sum::<f64>()
    }

    /// CGF of the sum and its first three derivatives at `s`.
    ///
    /// Domain violations return an explicit error, never a silent NaN.
    pub fn eval(&self, s: f64) -> Result<CgfDerivs> {
        if !s.is_finite() {
            return Err(Error::domain(format!("CGF argument must be finite, got {s}")));
        }
        let smax = self.s_max();
        if s >= smax {
            return Err(Error::domain(format!(
                "CGF argument {s} is at or beyond the convergence bound {smax}"
            )));
        }
        let mut d = CgfDerivs { k: 0.0, k1: 0.0, k2: 0.0, k3: 0.0 };
        for g in &self.gamma_terms {
            let b = g.rate;
            let a = g.shape;
            let bs = b - s;
            d.k += -a * (-s / b).ln_1p();
            d.k1 += a / bs;
            d.k2 += a / (bs * bs);
            d.k3 += 2.0 * a / (bs * bs * bs);
        }
        for l in &self.lattice_terms {
            let n = l.packets as f64;
            let t = l.spacing;
            let e = l.failure_prob;
            let z = e * (t * s).exp();
            let omz = 1.0 - z;
            d.k += n * (t * s + (-e).ln_1p() - (-z).ln_1p());
            d.k1 += n * t / omz;
            d.k2 += n * t * t * z / (omz * omz);
            d.k3 += n * t * t * t * z * (1.0 + z) / (omz * omz * omz);
        }
        for g in &self.gaussian_terms {
            d.k += g.mean * s + 0.5 * g.variance * s * s;
            d.k1 += g.mean + g.variance * s;
            d.k2 += g.variance;
        }
        d.k += self.shift * s;
        d.k1 += self.shift;
        Ok(d)
    }

    /// Rescaled copy in slot-count units: every lattice spacing becomes 1 and
    /// the smallest value of the sum is the total packet count.
    ///
    /// Only valid for lattice-only models whose spacings all agree.
    pub fn count_units(&self) -> Result<CgfModel> {
        if !self.is_lattice_only() || self.shift != 0.0 {
            return Err(Error::Unsupported(
                "count view requires a pure lattice model with zero shift".into(),
            ));
        }
        let t0 = self.lattice_terms[0].spacing;
        for l in &self.lattice_terms {
            if (l.spacing - t0).abs() > 1e-12 * t0 {
                return Err(Error::config(format!(
                    "lattice spacings differ: {} vs {}",
                    l.spacing, t0
                )));
            }
        }
        let mut m = CgfModel::new();
        for l in &self.lattice_terms {
            m.push_lattice(LatticeTerm { spacing: 1.0, ..*l });
        }
        Ok(m)
    }

    /// Common lattice spacing, if the model has lattice terms that agree.
    pub fn lattice_spacing(&self) -> Option<f64> {
        let t0 = self.lattice_terms.first()?.spacing;
        self.lattice_terms
            .iter()
            .all(|l| (l.spacing - t0).abs() <= 1e-12 * t0)
            .then_some(t0)
    }

    /// Total packet count over the lattice terms.
    pub fn total_packets(&self) -> u64 {
        self.lattice_terms.iter().map(|l| l.packets as u64).sum()
    }

    /// Draw one value of the sum (Gaussian terms enter through their mean
    /// plus a normal draw; zero-variance Gaussians are deterministic).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut x = self.shift;
        for g in &self.gamma_terms {
            x += g.sample(rng);
        }
        for l in &self.lattice_terms {
            x += l.sample(rng);
        }
        for g in &self.gaussian_terms {
            if g.variance > 0.0 {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                x += g.mean + g.variance.sqrt() * z;
            } else {
                x += g.mean;
            }
        }
        x
    }
}

/// Exact gamma CDF: regularized lower incomplete gamma at `rate * x`.
pub fn exact_gamma_cdf(shape: f64, rate: f64, x: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::invalid(format!(
            "gamma cdf needs shape > 0 and rate > 0, got ({shape}, {rate})"
        )));
    }
    Ok(special::reg_lower_gamma(shape, rate * x))
}

/// Exact PMF of the total slot count of one lattice term.
///
/// `k` is the total number of slots (`k >= packets`); values below the
/// packet count have probability zero. Evaluated in log space so large `k`
/// does not overflow the binomial coefficient.
pub fn exact_negbin_pmf(term: &LatticeTerm, k: u64) -> f64 {
    let n = term.packets as u64;
    if k < n {
        return 0.0;
    }
    let eps = term.failure_prob;
    if eps == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_p = special::ln_binomial(k - 1, n - 1)
        + n as f64 * (-eps).ln_1p()
        + (k - n) as f64 * eps.ln();
    ln_p.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_cgf_derivatives_at_zero_are_cumulants() {
        let mut m = CgfModel::new();
        m.push_gamma(GammaTerm::new(2.0, 1.0).unwrap());
        let d = m.eval(0.0).unwrap();
        assert_abs_diff_eq!(d.k, 0.0);
        assert_abs_diff_eq!(d.k1, 2.0);
        assert_abs_diff_eq!(d.k2, 2.0);
        assert_abs_diff_eq!(d.k3, 4.0);
    }

    #[test]
    fn lattice_mean_of_single_packet() {
        let mut m = CgfModel::new();
        m.push_lattice(LatticeTerm::new(1, 0.5, 1.0).unwrap());
        let d = m.eval(0.0).unwrap();
        assert_abs_diff_eq!(d.k1, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn shift_and_gaussian_contributions() {
        let mut m = CgfModel::new();
        m.push_gaussian(GaussianTerm::new(0.3, 0.04).unwrap());
        m.set_shift(1.5);
        let d = m.eval(0.7).unwrap();
        assert_abs_diff_eq!(d.k, 0.3 * 0.7 + 0.5 * 0.04 * 0.49 + 1.5 * 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(d.k1, 0.3 + 0.04 * 0.7 + 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.k2, 0.04, epsilon = 1e-16);
        assert_abs_diff_eq!(d.k3, 0.0);
    }

    #[test]
    fn eval_rejects_domain_violation() {
        let mut m = CgfModel::new();
        m.push_gamma(GammaTerm::new(2.0, 1.0).unwrap());
        assert!(matches!(m.eval(1.0), Err(Error::Domain(_))));
        assert!(matches!(m.eval(2.0), Err(Error::Domain(_))));
        assert!(m.eval(1.0 - 1e-9).is_ok());
    }

    #[test]
    fn s_max_over_mixed_terms() {
        let mut m = CgfModel::new();
        m.push_gamma(GammaTerm::new(1.0, 3.0).unwrap());
        m.push_lattice(LatticeTerm::new(2, 0.1, 1.0).unwrap());
        // lattice bound is -ln(0.1)/1 = 2.302...
        assert_abs_diff_eq!(m.s_max(), -(0.1f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn model_cumulants_match_eval_at_zero() {
        let mut m = CgfModel::new();
        m.push_gamma(GammaTerm::new(1.25, 42.0).unwrap());
        m.push_gamma(GammaTerm::new(1.5, 215.0).unwrap());
        m.push_lattice(LatticeTerm::new(20, 1e-3, 5e-3).unwrap());
        m.push_lattice(LatticeTerm::new(3, 1e-4, 5e-3).unwrap());
        m.push_gaussian(GaussianTerm::new(0.115, 5.0e-7).unwrap());
        m.set_shift(0.01);
        let d = m.eval(0.0).unwrap();
        assert_relative_eq!(d.k1, m.mean(), max_relative = 1e-14);
        assert_relative_eq!(d.k2, m.variance(), max_relative = 1e-14);
        assert_relative_eq!(d.k3, m.third_cumulant(), max_relative = 1e-14);
    }

    #[test]
    fn exact_gamma_cdf_reference_values() {
        assert_abs_diff_eq!(
            exact_gamma_cdf(1.0, 1.0, std::f64::consts::LN_2).unwrap(),
            0.5,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            exact_gamma_cdf(8.0, 1.0, 8.0).unwrap(),
            0.547_039_190_513_005_8,
            epsilon = 1e-12
        );
        assert_eq!(exact_gamma_cdf(8.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(exact_gamma_cdf(8.0, 1.0, -3.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_negbin_pmf_reference_values() {
        let t = LatticeTerm::new(1, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(exact_negbin_pmf(&t, 1), 0.5, epsilon = 1e-15);
        let t = LatticeTerm::new(2, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(exact_negbin_pmf(&t, 2), 0.81, epsilon = 1e-14);
        assert_eq!(exact_negbin_pmf(&t, 1), 0.0);
        let t = LatticeTerm::new(3, 0.3, 1.0).unwrap();
        // brute-force value cross-checked against a 3-fold geometric convolution
        assert_relative_eq!(exact_negbin_pmf(&t, 5), 0.185_22, max_relative = 1e-12);
    }

    #[test]
    fn negbin_pmf_sums_to_one_when_truncated_at_tiny_tail() {
        for &(n, eps) in &[(1u32, 0.5f64), (4, 0.3), (20, 1e-3), (7, 0.9)] {
            let t = LatticeTerm::new(n, eps, 1.0).unwrap();
            let mut total = 0.0;
            let mut k = n as u64;
            loop {
                let p = exact_negbin_pmf(&t, k);
                total += p;
                if k > n as u64 + 5 && p < 1e-12 {
                    break;
                }
                k += 1;
                assert!(k < 1_000_000, "runaway tail for n={n} eps={eps}");
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_space_pmf_survives_large_counts() {
        let t = LatticeTerm::new(50, 0.6, 1.0).unwrap();
        let p = exact_negbin_pmf(&t, 5000);
        assert!(p.is_finite() && p >= 0.0);
    }

    #[test]
    fn gamma_sampler_mean_within_lln_bound() {
        let term = GammaTerm::new(2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| term.sample(&mut rng)).sum::<f64>() / n as f64;
        let bound = 3.0 * (2.0f64 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < bound, "mean {mean} outside {bound}");
    }

    #[test]
    fn lattice_sampler_degenerate_case() {
        let term = LatticeTerm::new(1, 0.0, 5e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(term.sample(&mut rng), 5e-3);
        }
    }

    #[test]
    fn lattice_sampler_mean_matches_model() {
        let term = LatticeTerm::new(4, 0.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 500_000;
        let mean = (0..n).map(|_| term.sample(&mut rng)).sum::<f64>() / n as f64;
        let sd = (term.variance() / n as f64).sqrt();
        assert!((mean - term.mean()).abs() < 4.0 * sd);
    }

    #[test]
    fn count_units_requires_uniform_spacing() {
        let mut m = CgfModel::new();
        m.push_lattice(LatticeTerm::new(2, 0.1, 1e-3).unwrap());
        m.push_lattice(LatticeTerm::new(3, 0.2, 2e-3).unwrap());
        assert!(matches!(m.count_units(), Err(Error::Config(_))));
        assert!(m.lattice_spacing().is_none());
    }

    #[test]
    fn parameter_validation() {
        assert!(GammaTerm::new(0.0, 1.0).is_err());
        assert!(GammaTerm::new(1.0, -2.0).is_err());
        assert!(LatticeTerm::new(0, 0.1, 1.0).is_err());
        assert!(LatticeTerm::new(1, 1.0, 1.0).is_err());
        assert!(LatticeTerm::new(1, -0.1, 1.0).is_err());
        assert!(LatticeTerm::new(1, 0.1, 0.0).is_err());
        assert!(GaussianTerm::new(0.0, -1.0).is_err());
    }
}
