//! Generic saddlepoint machinery for any [`CgfModel`]: the saddlepoint
//! equation solver, the Lugannani–Rice CDF, the saddlepoint density, and the
//! saddlepoint mass function for lattice sums.

use crate::dist::CgfModel;
use crate::error::Error;
use crate::special::{normal_cdf, normal_pdf, SQRT_2PI};
use crate::Result;

/// Relative tolerance on `|K'(s*) - x|` (tight, because downstream gradients
/// amplify solver noise).
pub const SOLVER_TOL_REL: f64 = 1e-10;

/// The left bracket is never expanded beyond this point.
pub const BRACKET_LIMIT: f64 = -1e9;

/// Width of the mean-branch trigger, relative on `x` versus `K'(0)`.
pub const MEAN_BRANCH_REL: f64 = 1e-8;

/// Below this value of `|v|` the Lugannani–Rice expression is numerically
/// singular and the mean-branch value is used instead.
pub const V_FALLBACK: f64 = 1e-5;

/// Solution of `K'(s*) = x` together with the Lugannani–Rice intermediates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlepointSolution {
    /// The saddlepoint.
    pub s_star: f64,
    /// `|K'(s*) - x|` actually achieved.
    pub residual: f64,
    /// `sign(s*) * sqrt(2 (x s* - K(s*)))`.
    pub v: f64,
    /// `s* * sqrt(K''(s*))`.
    pub u: f64,
}

/// Solve the saddlepoint equation `K'(s*) = x` by bisection.
///
/// The bracket is `[s_lo, s_max - margin]`: the left end is expanded
/// geometrically (-1, -2, -4, ...) until `K'(s_lo) < x`, the right margin is
/// shrunk until `K'` exceeds `x`. Expansion past [`BRACKET_LIMIT`] reports
/// [`Error::BracketExhausted`] — the target sits unreachably deep in the left
/// tail.
pub fn solve_saddlepoint(model: &CgfModel, x: f64) -> Result<SaddlepointSolution> {
    if !x.is_finite() {
        return Err(Error::domain(format!("saddlepoint target must be finite, got {x}")));
    }
    let inf = model.support_infimum();
    if x <= inf {
        return Err(Error::domain(format!(
            "target {x} is at or below the support infimum {inf}"
        )));
    }
    let d0 = model.eval(0.0)?;
    if d0.k2 <= 0.0 {
        return Err(Error::Unsupported(
            "saddlepoint solve needs a non-degenerate model (K'' > 0)".into(),
        ));
    }
    if x == d0.k1 {
        return Ok(SaddlepointSolution { s_star: 0.0, residual: 0.0, v: 0.0, u: 0.0 });
    }

    let s_max = model.s_max();
    let mut hi;
    if s_max.is_finite() {
        let scale = s_max.abs().max(1.0);
        let mut j = 1;
        loop {
            hi = s_max - scale * 0.5f64.powi(j);
            if hi < s_max && model.eval(hi)?.k1 > x {
                break;
            }
            j += 1;
            if j > 200 || hi >= s_max {
                return Err(Error::NonConvergence(format!(
                    "K' stays below {x} up to the domain bound {s_max}"
                )));
            }
        }
    } else {
        hi = 1.0;
        while model.eval(hi)?.k1 <= x {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::NonConvergence(format!("K' stays below {x} for s up to 1e9")));
            }
        }
    }

    let mut lo = (-1.0_f64).min(hi - 1.0);
    while model.eval(lo)?.k1 >= x {
        lo *= 2.0;
        if lo < BRACKET_LIMIT {
            return Err(Error::BracketExhausted { target: x, reached: lo });
        }
    }

    let tol = SOLVER_TOL_REL * x.abs().max(f64::MIN_POSITIVE);
    let mut mid = 0.5 * (lo + hi);
    let mut best = (mid, f64::INFINITY);
    for _ in 0..300 {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval collapsed to adjacent floats
        }
        let k1 = model.eval(mid)?.k1;
        let r = (k1 - x).abs();
        if r < best.1 {
            best = (mid, r);
        }
        if r <= tol {
            break;
        }
        if k1 < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s, residual) = best;
    let d = model.eval(s)?;
    // float-limited accuracy: K' cannot be resolved below ~K'' * ulp(s)
    let attainable = 8.0 * f64::EPSILON * (d.k2 * s.abs() + x.abs());
    if residual > tol.max(attainable) && residual > 1e-6 * x.abs().max(1.0) {
        return Err(Error::NonConvergence(format!(
            "saddlepoint residual {residual:e} above tolerance at x = {x}"
        )));
    }
    let arg = 2.0 * (x * s - d.k);
    let v = s.signum() * arg.max(0.0).sqrt();
    let u = s * d.k2.sqrt();
    Ok(SaddlepointSolution { s_star: s, residual, v, u })
}

/// Value returned on the mean branch: `1/2 + K'''(0) / (6 sqrt(2 pi) K''(0)^(3/2))`.
pub fn mean_branch_value(model: &CgfModel) -> Result<f64> {
    let d0 = model.eval(0.0)?;
    if d0.k2 <= 0.0 {
        return Err(Error::Unsupported("mean branch needs K''(0) > 0".into()));
    }
    Ok(0.5 + d0.k3 / (6.0 * SQRT_2PI * d0.k2.powf(1.5)))
}

/// Lugannani–Rice CDF approximation, clamped to `[0, 1]`.
///
/// Near the mean (`|x - K'(0)|` within [`MEAN_BRANCH_REL`] relative, or
/// `|v| <` [`V_FALLBACK`]) the dedicated mean-branch value is returned, since
/// the generic expression degenerates to `0/0` there.
pub fn spa_cdf(model: &CgfModel, x: f64) -> Result<f64> {
    let d0 = model.eval(0.0)?;
    if d0.k2 <= 0.0 {
        return Err(Error::Unsupported("CDF approximation needs K''(0) > 0".into()));
    }
    let mean = d0.k1;
    let mean_value = 0.5 + d0.k3 / (6.0 * SQRT_2PI * d0.k2.powf(1.5));
    if (x - mean).abs() <= MEAN_BRANCH_REL * mean.abs().max(1.0) {
        return Ok(mean_value.clamp(0.0, 1.0));
    }
    let sol = solve_saddlepoint(model, x)?;
    if sol.v.abs() < V_FALLBACK {
        return Ok(mean_value.clamp(0.0, 1.0));
    }
    Ok(lugannani_rice(sol.v, sol.u).clamp(0.0, 1.0))
}

/// The raw Lugannani–Rice expression `Phi(v) + phi(v) (1/v - 1/u)`.
#[inline]
pub(crate) fn lugannani_rice(v: f64, u: f64) -> f64 {
    normal_cdf(v) + normal_pdf(v) * (1.0 / v - 1.0 / u)
}

/// Saddlepoint density `exp(K(s*) - x s*) / sqrt(2 pi K''(s*))`.
///
/// Requires at least one continuous term; a purely lattice model has no
/// density.
pub fn spa_pdf(model: &CgfModel, x: f64) -> Result<f64> {
    if !model.has_continuous_term() {
        return Err(Error::Unsupported(
            "density approximation is undefined for a purely lattice model".into(),
        ));
    }
    let sol = solve_saddlepoint(model, x)?;
    let d = model.eval(sol.s_star)?;
    Ok((d.k - x * sol.s_star).exp() / (2.0 * std::f64::consts::PI * d.k2).sqrt())
}

/// Saddlepoint mass function of a lattice-only model at total slot count `k`.
///
/// At the smallest reachable count the exact product of per-packet success
/// probabilities is returned; below it the mass is zero; above it the
/// saddlepoint mass value is computed in count units. No normalization is
/// applied here — that is the job of the PMF-table construction.
pub fn spa_pmf(model: &CgfModel, k: u64) -> Result<f64> {
    let counts = model.count_units()?;
    let base = counts.total_packets();
    if k < base {
        return Ok(0.0);
    }
    if k == base {
        let ln_p: f64 = counts
            .lattice_terms()
            .iter()
            .map(|l| l.packets as f64 * (-l.failure_prob).ln_1p())
            .sum();
        return Ok(ln_p.exp());
    }
    if counts.lattice_terms().iter().all(|l| l.failure_prob == 0.0) {
        return Ok(0.0); // deterministic transmissions: all mass at the base
    }
    let x = k as f64;
    let sol = solve_saddlepoint(&counts, x)?;
    let d = counts.eval(sol.s_star)?;
    Ok((d.k - x * sol.s_star).exp() / (2.0 * std::f64::consts::PI * d.k2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{exact_gamma_cdf, GammaTerm, LatticeTerm};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn gamma_sum(n: usize, shape: f64, rate: f64) -> CgfModel {
        let mut m = CgfModel::new();
        for _ in 0..n {
            m.push_gamma(GammaTerm::new(shape, rate).unwrap());
        }
        m
    }

    #[test]
    fn solve_at_the_mean_is_zero() {
        let m = gamma_sum(1, 2.0, 1.0);
        let sol = solve_saddlepoint(&m, 2.0).unwrap();
        assert_eq!(sol.s_star, 0.0);
        assert_eq!(sol.v, 0.0);
        assert_eq!(sol.u, 0.0);
    }

    #[test]
    fn solve_matches_closed_form_inverse() {
        // K'(s) = 2/(1-s) = 4  =>  s = 1/2
        let m = gamma_sum(1, 2.0, 1.0);
        let sol = solve_saddlepoint(&m, 4.0).unwrap();
        assert_abs_diff_eq!(sol.s_star, 0.5, epsilon = 1e-10);
        assert!(sol.residual <= SOLVER_TOL_REL * 4.0 * 1.01);
        // K'(s) = 8/(1-s) = 12  =>  s = 1/3
        let m = gamma_sum(4, 2.0, 1.0);
        let sol = solve_saddlepoint(&m, 12.0).unwrap();
        assert_abs_diff_eq!(sol.s_star, 1.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn solution_signs_follow_the_mean() {
        let m = gamma_sum(4, 2.0, 1.0); // mean 8
        for &(x, sign) in &[(5.0, -1.0), (7.9, -1.0), (8.1, 1.0), (14.0, 1.0)] {
            let sol = solve_saddlepoint(&m, x).unwrap();
            assert_eq!(sol.s_star.signum(), sign, "x = {x}");
            assert_eq!(sol.v.signum(), sign);
            assert_eq!(sol.u.signum(), sign);
        }
    }

    #[test]
    fn saddlepoint_is_increasing_in_x() {
        let m = gamma_sum(4, 2.0, 1.0);
        let mut last = f64::NEG_INFINITY;
        for i in 1..40 {
            let x = 0.5 + i as f64 * 0.4;
            let s = solve_saddlepoint(&m, x).unwrap().s_star;
            assert!(s > last, "s* not increasing at x = {x}");
            last = s;
        }
    }

    #[test]
    fn solve_rejects_points_outside_the_support() {
        let m = gamma_sum(1, 2.0, 1.0);
        assert!(matches!(solve_saddlepoint(&m, 0.0), Err(Error::Domain(_))));
        assert!(matches!(solve_saddlepoint(&m, -1.0), Err(Error::Domain(_))));
        // reachable only with |s| > 1e9: deep left tail
        assert!(matches!(
            solve_saddlepoint(&m, 1e-12),
            Err(Error::BracketExhausted { .. })
        ));
    }

    #[test]
    fn cdf_mean_branch_value() {
        // 4 x Gamma(2,1): K''(0) = 8, K'''(0) = 16
        let m = gamma_sum(4, 2.0, 1.0);
        let got = spa_cdf(&m, 8.0).unwrap();
        assert_abs_diff_eq!(got, 0.547_015_798_628_979_6, epsilon = 1e-12);
        // against the exact Gamma(8,1) law
        let exact = exact_gamma_cdf(8.0, 1.0, 8.0).unwrap();
        assert!((got - exact).abs() <= 1e-3);
    }

    #[test]
    fn cdf_tracks_exact_gamma_within_tolerance() {
        let m = gamma_sum(4, 2.0, 1.0);
        let mut worst: f64 = 0.0;
        for i in 1..=160 {
            let x = i as f64 * 0.1;
            let got = spa_cdf(&m, x).unwrap();
            let exact = exact_gamma_cdf(8.0, 1.0, x).unwrap();
            worst = worst.max((got - exact).abs());
        }
        assert!(worst <= 5e-3, "worst abs error {worst}");
    }

    #[test]
    fn cdf_is_nondecreasing_and_bounded() {
        let m = gamma_sum(4, 2.0, 1.0);
        let mut last = -1.0;
        for i in 1..=400 {
            let x = i as f64 * 0.04;
            let p = spa_cdf(&m, x).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= last - 1e-12, "decrease at x = {x}");
            last = p;
        }
    }

    #[test]
    fn pdf_reference_ratios() {
        // single exponential: the SPA density carries the Stirling factor
        let m = gamma_sum(1, 1.0, 1.0);
        let got = spa_pdf(&m, 1.0).unwrap();
        let exact = (-1.0f64).exp();
        assert!((got / exact - 1.0).abs() < 0.10, "ratio {}", got / exact);
        // 4 x Gamma(2,1) at the mean
        let m = gamma_sum(4, 2.0, 1.0);
        let got = spa_pdf(&m, 8.0).unwrap();
        assert_relative_eq!(got, 0.139_586_531_950_596_64, max_relative = 0.05);
        // at the mean the density reduces to 1/sqrt(2 pi K''(0))
        assert_abs_diff_eq!(got, 1.0 / (2.0 * std::f64::consts::PI * 8.0).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn pdf_rejects_lattice_only_models() {
        let mut m = CgfModel::new();
        m.push_lattice(LatticeTerm::new(2, 0.3, 1.0).unwrap());
        assert!(matches!(spa_pdf(&m, 3.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn pmf_base_case_is_the_exact_product() {
        let mut m = CgfModel::new();
        m.push_lattice(LatticeTerm::new(20, 1e-3, 5e-3).unwrap());
        m.push_lattice(LatticeTerm::new(3, 1e-4, 5e-3).unwrap());
        let p = spa_pmf(&m, 23).unwrap();
        assert_abs_diff_eq!(p, 0.979_894_837_574_771_6, epsilon = 1e-13);
        assert_eq!(spa_pmf(&m, 22).unwrap(), 0.0);
    }

    #[test]
    fn pmf_handles_deterministic_lattices() {
        let mut m = CgfModel::new();
        m.push_lattice(LatticeTerm::new(4, 0.0, 1.0).unwrap());
        assert_eq!(spa_pmf(&m, 4).unwrap(), 1.0);
        assert_eq!(spa_pmf(&m, 5).unwrap(), 0.0);
    }

    #[test]
    fn pmf_interior_tracks_the_exact_negative_binomial() {
        // single NB term: compare the saddlepoint mass with the exact PMF
        let term = LatticeTerm::new(5, 0.2, 1.0).unwrap();
        let mut m = CgfModel::new();
        m.push_lattice(term);
        for k in 6..=14u64 {
            let exact = crate::dist::exact_negbin_pmf(&term, k);
            let got = spa_pmf(&m, k).unwrap();
            assert!(
                (got - exact).abs() / exact < 0.10,
                "k = {k}: spa {got} vs exact {exact}"
            );
        }
    }
}
