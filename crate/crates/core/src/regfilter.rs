//! Spectral filters, parameter choice rules and filtered frame reconstructions.
//!
//! For a [`Decomposition`] with coefficients `c_k = <y, f_k>` the filtered
//! solution is `z_alpha = sum_k lambda_k g_alpha(lambda_k^2) c_k dual_k`.
//! The unfiltered one is `sum_{lambda_k != 0} c_k / lambda_k dual_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Decomposition;
use crate::hilbert::{check_geometry, Geometry, GridFunction, C64};

/// Spectral filter `g_alpha` with residual `r_alpha(s) = 1 - s g_alpha(s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    /// `g = 1 / (s + alpha)`.
    Tikhonov,
    /// `g = (1 - (1 - s)^{1/alpha}) / s`, defined for `s` in `[0, 1]`.
    Landweber,
    /// `g = 1/s` for `s >= alpha`, else `0`.
    Tsvd,
}

/// Slack allowed above `s = 1` for Landweber before it is a domain error.
const UNIT_SPECTRUM_SLACK: f64 = 1e-12;

impl Filter {
    pub fn name(self) -> &'static str {
        match self {
            Filter::Tikhonov => "tikhonov",
            Filter::Landweber => "landweber",
            Filter::Tsvd => "tsvd",
        }
    }

    fn check(self, alpha: f64, s: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("filter parameter alpha = {alpha}")));
        }
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("filter argument s = {s}")));
        }
        if self == Filter::Landweber && s > 1.0 + UNIT_SPECTRUM_SLACK {
            return Err(Error::Domain(format!(
                "landweber needs s <= 1, got {s}; rescale the operator"
            )));
        }
        Ok(())
    }

    /// `(g_alpha(s), r_alpha(s))`.
    pub fn eval(self, alpha: f64, s: f64) -> Result<(f64, f64)> {
        self.check(alpha, s)?;
        Ok(match self {
            Filter::Tikhonov => (1.0 / (s + alpha), alpha / (s + alpha)),
            Filter::Landweber => {
                let s = s.min(1.0);
                let m = 1.0 / alpha;
                if s == 0.0 {
                    (m, 1.0)
                } else if s == 1.0 {
                    (1.0, 0.0)
                } else {
                    let lr = m * (-s).ln_1p();
                    (-lr.exp_m1() / s, lr.exp())
                }
            }
            Filter::Tsvd => {
                if s >= alpha && s > 0.0 {
                    (1.0 / s, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
        })
    }

    /// `G_alpha = sup_s |g_alpha(s)|` over the filter's domain.
    pub fn sup_g(self, alpha: f64) -> f64 {
        match self {
            Filter::Tikhonov | Filter::Tsvd => 1.0 / alpha,
            Filter::Landweber => (1.0 / alpha).max(1.0),
        }
    }

    /// `sup_s |r_alpha(s)|`.
    pub fn gamma(self) -> f64 {
        1.0
    }

    /// `sup_s |s g_alpha(s)|`.
    pub fn c_bound(self) -> f64 {
        1.0
    }

    /// Largest qualification index `mu`, `None` when unbounded.
    pub fn qualification(self) -> Option<f64> {
        match self {
            Filter::Tikhonov => Some(1.0),
            Filter::Landweber | Filter::Tsvd => None,
        }
    }

    /// Analytic constant `c_mu` with `s^mu |r_alpha(s)| <= c_mu alpha^mu`.
    pub fn c_mu(self, mu: f64) -> Option<f64> {
        if !(mu > 0.0) {
            return None;
        }
        match self {
            Filter::Tikhonov if mu < 1.0 => Some(mu.powf(mu) * (1.0 - mu).powf(1.0 - mu)),
            Filter::Tikhonov if mu == 1.0 => Some(1.0),
            Filter::Tikhonov => None,
            Filter::Landweber => Some((mu / std::f64::consts::E).powf(mu)),
            Filter::Tsvd => Some(1.0),
        }
    }
}

/// Outcome of a numerical qualification sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualificationReport {
    pub holds: bool,
    /// `sup s^mu |r_alpha(s)| / alpha^mu` over `alpha` in `[1e-6, 1]`, `s` in `(0, s_max]`.
    pub c_mu: f64,
}

fn qualification_sup(filter: Filter, mu: f64, alpha_min: f64, s_max: f64) -> Result<f64> {
    const NA: usize = 120;
    const NS: usize = 1500;
    let mut sup: f64 = 0.0;
    for i in 0..NA {
        let alpha = alpha_min * (1.0 / alpha_min).powf(i as f64 / (NA - 1) as f64);
        for j in 0..NS {
            let s = s_max * (1e-12f64).powf(1.0 - j as f64 / (NS - 1) as f64);
            let (_, r) = filter.eval(alpha, s)?;
            sup = sup.max(s.powf(mu) * r.abs() / alpha.powf(mu));
        }
    }
    Ok(sup)
}

/// Checks numerically whether `filter` has qualification `mu`.
///
/// The sup is computed on a grid and recomputed with a smaller `alpha_min`
/// and (where the filter's domain allows) a larger `s_max`. The index holds
/// when both sweeps agree to 1%.
pub fn qualification_check(filter: Filter, mu: f64, s_max: f64) -> Result<QualificationReport> {
    if !(mu > 0.0) || !(s_max > 0.0) {
        return Err(Error::Domain(format!(
            "qualification sweep with mu = {mu}, s_max = {s_max}"
        )));
    }
    let base = qualification_sup(filter, mu, 1e-6, s_max)?;
    let s_wide = if filter == Filter::Landweber {
        s_max
    } else {
        100.0 * s_max
    };
    let wide = qualification_sup(filter, mu, 1e-8, s_wide)?;
    let holds = base.is_finite() && wide.is_finite() && (wide - base).abs() <= 1e-2 * base;
    Ok(QualificationReport { holds, c_mu: base })
}

/// Regularization parameter, possibly the `alpha = infinity` sentinel (`z = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alpha {
    Finite(f64),
    Infinite,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::Finite(a) => a,
            Alpha::Infinite => f64::INFINITY,
        }
    }
}

/// Floor used in place of a zero noise level.
pub const MIN_DELTA: f64 = 1e-15;

/// `alpha = c delta^{2 / (2 mu + 1)}`.
pub fn apriori_alpha(delta: f64, mu: f64, c: f64) -> Result<f64> {
    if !(delta >= 0.0) || !(mu > 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "a-priori rule with delta = {delta}, mu = {mu}, c = {c}"
        )));
    }
    Ok(c * delta.max(MIN_DELTA).powf(2.0 / (2.0 * mu + 1.0)))
}

/// Descending log-spaced grid scanned by the discrepancy principle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            min: 1e-8,
            max: 1e2,
            points: 200,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0) || !(self.max > self.min) || self.points < 40 {
            return Err(Error::Config(format!(
                "alpha grid needs 0 < min < max and at least 40 points, got {self:?}"
            )));
        }
        let n = self.points;
        Ok((0..n)
            .map(|i| self.max * (self.min / self.max).powf(i as f64 / (n - 1) as f64))
            .collect())
    }
}

const BISECTION_STEPS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyChoice {
    pub alpha: Alpha,
    /// `D(alpha) = sum_k |r_alpha(lambda_k^2) c_k|^2` at the chosen alpha.
    pub residual_sq: f64,
    /// `(tau delta)^2`.
    pub threshold_sq: f64,
    /// Set when no grid point met the threshold.
    pub warning: Option<String>,
}

/// `D(alpha)` on precomputed coefficients.
pub fn discrepancy_value(filter: Filter, alpha: f64, lambdas: &[C64], coeffs: &[C64]) -> Result<f64> {
    let mut d = 0.0;
    for (l, c) in lambdas.iter().zip(coeffs) {
        let (_, r) = filter.eval(alpha, l.norm_sqr())?;
        d += r * r * c.norm_sqr();
    }
    Ok(d)
}

/// Largest alpha with `D(alpha) <= (tau delta)^2`, from precomputed coefficients.
pub fn discrepancy_alpha_from_coeffs(
    filter: Filter,
    lambdas: &[C64],
    coeffs: &[C64],
    delta: f64,
    tau: f64,
    grid: &AlphaGrid,
) -> Result<DiscrepancyChoice> {
    if !(tau > 0.0) || !(delta >= 0.0) {
        return Err(Error::Domain(format!(
            "discrepancy rule with tau = {tau}, delta = {delta}"
        )));
    }
    let thr = (tau * delta.max(MIN_DELTA)).powi(2);
    let alphas = grid.values()?;
    let d = |a: f64| discrepancy_value(filter, a, lambdas, coeffs);
    let mut first_ok = None;
    let mut prev_bad = None;
    for (i, &a) in alphas.iter().enumerate() {
        let v = d(a)?;
        if v <= thr {
            first_ok = Some((i, v));
            break;
        }
        prev_bad = Some(a);
    }
    let Some((i, v_ok)) = first_ok else {
        let a = *alphas.last().unwrap();
        return Ok(DiscrepancyChoice {
            alpha: Alpha::Finite(a),
            residual_sq: d(a)?,
            threshold_sq: thr,
            warning: Some(format!(
                "discrepancy threshold not met on the grid; using alpha = {a:.3e}"
            )),
        });
    };
    let lo = alphas[i];
    let hi = match prev_bad {
        Some(a) => a,
        None => {
            let top = 10.0 * lo;
            let v_top = d(top)?;
            if v_top <= thr {
                return Ok(DiscrepancyChoice {
                    alpha: Alpha::Infinite,
                    residual_sq: lambdas.iter().zip(coeffs).map(|(_, c)| c.norm_sqr()).sum(),
                    threshold_sq: thr,
                    warning: None,
                });
            }
            top
        }
    };
    let (mut lo, mut v_lo, mut hi) = (lo, v_ok, hi);
    if v_lo <= d(hi)? {
        for _ in 0..BISECTION_STEPS {
            let mid = (lo * hi).sqrt();
            let v = d(mid)?;
            if v <= thr {
                lo = mid;
                v_lo = v;
            } else {
                hi = mid;
            }
        }
    }
    Ok(DiscrepancyChoice {
        alpha: Alpha::Finite(lo),
        residual_sq: v_lo,
        threshold_sq: thr,
        warning: None,
    })
}

fn check_tau<D: Decomposition + ?Sized>(fd: &D, filter: Filter, tau: f64) -> Result<()> {
    if let Some(c2) = fd.y_upper_bound() {
        let bound = c2.sqrt() * filter.gamma();
        if tau <= bound {
            return Err(Error::Domain(format!(
                "tau = {tau} must exceed sqrt(C2) * gamma = {bound:.6}"
            )));
        }
    }
    Ok(())
}

/// Discrepancy principle on a decomposition.
pub fn discrepancy_alpha<D: Decomposition + ?Sized>(
    fd: &D,
    filter: Filter,
    y: &GridFunction,
    delta: f64,
    tau: f64,
    grid: &AlphaGrid,
) -> Result<DiscrepancyChoice> {
    check_tau(fd, filter, tau)?;
    let c = fd.analyze_y(y)?;
    discrepancy_alpha_from_coeffs(filter, fd.lambdas(), &c, delta, tau, grid)
}

fn real_lambda(l: C64, k: usize) -> Result<f64> {
    if l.im.abs() > 1e-14 * l.norm() {
        return Err(Error::Domain(format!(
            "filtered reconstruction needs real lambda, lambda_{k} = {l}"
        )));
    }
    Ok(l.re)
}

/// Filtered coefficients `lambda_k g_alpha(lambda_k^2) c_k`.
pub fn filtered_coefficients(filter: Filter, alpha: Alpha, lambdas: &[C64], coeffs: &[C64]) -> Result<Vec<C64>> {
    let Alpha::Finite(a) = alpha else {
        return Ok(vec![C64::new(0.0, 0.0); coeffs.len()]);
    };
    lambdas
        .iter()
        .zip(coeffs)
        .enumerate()
        .map(|(k, (&l, &c))| {
            let l = real_lambda(l, k)?;
            let (g, _) = filter.eval(a, l * l)?;
            Ok(c * (l * g))
        })
        .collect()
}

/// `z_alpha = sum_k lambda_k g_alpha(lambda_k^2) <y, f_k> dual_k`.
pub fn filtered_solution<D: Decomposition + ?Sized>(
    fd: &D,
    filter: Filter,
    alpha: Alpha,
    y: &GridFunction,
) -> Result<GridFunction> {
    check_geometry("data", fd.y_geometry(), y.geometry())?;
    if let Alpha::Infinite = alpha {
        return Ok(GridFunction::zeros(fd.x_geometry()));
    }
    let c = fd.analyze_y(y)?;
    fd.synthesize_dual_x(&filtered_coefficients(filter, alpha, fd.lambdas(), &c)?)
}

#[derive(Clone, Debug)]
pub struct PseudoSolution {
    pub x: GridFunction,
    /// `sum_{lambda_k != 0} |<y, f_k>|^2 / |lambda_k|^2`.
    pub picard_sum: f64,
}

/// Unfiltered coefficients `c_k / lambda_k`, zero where `lambda_k = 0`.
pub fn pseudo_coefficients(lambdas: &[C64], coeffs: &[C64]) -> Vec<C64> {
    lambdas
        .iter()
        .zip(coeffs)
        .map(|(l, c)| if l.norm() > 0.0 { c / l } else { C64::new(0.0, 0.0) })
        .collect()
}

/// `sum_{lambda_k != 0} <y, f_k> / lambda_k dual_k` with its Picard sum.
pub fn pseudo_solution<D: Decomposition + ?Sized>(fd: &D, y: &GridFunction) -> Result<PseudoSolution> {
    check_geometry("data", fd.y_geometry(), y.geometry())?;
    let c = fd.analyze_y(y)?;
    let d = pseudo_coefficients(fd.lambdas(), &c);
    let picard_sum = d.iter().map(|z| z.norm_sqr()).sum();
    Ok(PseudoSolution {
        x: fd.synthesize_dual_x(&d)?,
        picard_sum,
    })
}

/// View of a decomposition for the operator `A / scale` and data `y / scale`.
///
/// The filtered solutions of the rescaled problem converge to the same limit
/// as those of the original one; Landweber uses it to bring the spectrum into
/// `(0, 1]`.
pub struct Rescaled<'a, D: ?Sized> {
    inner: &'a D,
    scale: f64,
    lambdas: Vec<C64>,
}

impl<'a, D: Decomposition + ?Sized> Rescaled<'a, D> {
    pub fn new(inner: &'a D, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!("rescaling factor {scale}")));
        }
        let lambdas = inner.lambdas().iter().map(|l| l / scale).collect();
        Ok(Self { inner, scale, lambdas })
    }

    /// Rescales by `max |lambda_k|` so that all `lambda_k^2 <= 1`.
    pub fn unit_spectrum(inner: &'a D) -> Result<Self> {
        let m = inner.lambdas().iter().map(|l| l.norm()).fold(0.0, f64::max);
        Self::new(inner, m)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl<D: Decomposition + ?Sized> Decomposition for Rescaled<'_, D> {
    fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    fn x_geometry(&self) -> Geometry {
        self.inner.x_geometry()
    }

    fn y_geometry(&self) -> Geometry {
        self.inner.y_geometry()
    }

    fn analyze_y(&self, y: &GridFunction) -> Result<Vec<C64>> {
        let s = 1.0 / self.scale;
        Ok(self.inner.analyze_y(y)?.into_iter().map(|c| c * s).collect())
    }

    fn synthesize_dual_x(&self, d: &[C64]) -> Result<GridFunction> {
        self.inner.synthesize_dual_x(d)
    }

    fn y_upper_bound(&self) -> Option<f64> {
        self.inner.y_upper_bound()
    }

    fn x_lower_bound(&self) -> Option<f64> {
        self.inner.x_lower_bound()
    }
}

/// How the regularization parameter is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterRule {
    Fixed {
        alpha: f64,
    },
    /// `alpha = c delta^{2/(2mu+1)}`.
    Apriori {
        c: f64,
        mu: f64,
    },
    /// Discrepancy principle with safety factor `tau`.
    Discrepancy {
        tau: f64,
        #[serde(default)]
        grid: AlphaGrid,
    },
}

impl ParameterRule {
    pub fn name(&self) -> &'static str {
        match self {
            ParameterRule::Fixed { .. } => "fixed",
            ParameterRule::Apriori { .. } => "apriori",
            ParameterRule::Discrepancy { .. } => "aposteriori",
        }
    }
}

/// A reconstruction with the parameter that produced it.
#[derive(Clone, Debug)]
pub struct Regularized {
    pub x: GridFunction,
    /// `None` for the unfiltered reconstruction.
    pub alpha: Option<Alpha>,
    pub warning: Option<String>,
}

/// Coefficient-level reconstruction shared by [`regularize`] and the studies.
///
/// `coeffs` are `<y, f_k>` of the original problem and `delta` its absolute
/// noise level. Landweber is run on the unit-spectrum rescaling.
pub fn regularized_coefficients(
    lambdas: &[C64],
    coeffs: &[C64],
    filter: Option<Filter>,
    rule: &ParameterRule,
    delta: f64,
    y_upper_bound: Option<f64>,
) -> Result<(Vec<C64>, Option<Alpha>, Option<String>)> {
    let Some(filter) = filter else {
        return Ok((pseudo_coefficients(lambdas, coeffs), None, None));
    };
    let scale = if filter == Filter::Landweber {
        lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max)
    } else {
        1.0
    };
    if !(scale > 0.0) {
        return Err(Error::Numeric("all lambdas vanish".into()));
    }
    let lam: Vec<C64> = lambdas.iter().map(|l| l / scale).collect();
    let c: Vec<C64> = coeffs.iter().map(|c| c / scale).collect();
    let (alpha, warning) = match *rule {
        ParameterRule::Fixed { alpha } => (Alpha::Finite(alpha), None),
        ParameterRule::Apriori { c: cc, mu } => (Alpha::Finite(apriori_alpha(delta, mu, cc)?), None),
        ParameterRule::Discrepancy { tau, grid } => {
            if let Some(c2) = y_upper_bound {
                let bound = c2.sqrt() * filter.gamma();
                if tau <= bound {
                    return Err(Error::Domain(format!(
                        "tau = {tau} must exceed sqrt(C2) * gamma = {bound:.6}"
                    )));
                }
            }
            let ch = discrepancy_alpha_from_coeffs(filter, &lam, &c, delta / scale, tau, &grid)?;
            (ch.alpha, ch.warning)
        }
    };
    let d = filtered_coefficients(filter, alpha, &lam, &c)?;
    Ok((d, Some(alpha), warning))
}

/// Filtered (or unfiltered, `filter = None`) reconstruction from data `y`.
pub fn regularize<D: Decomposition + ?Sized>(
    fd: &D,
    filter: Option<Filter>,
    rule: &ParameterRule,
    y: &GridFunction,
    delta: f64,
) -> Result<Regularized> {
    check_geometry("data", fd.y_geometry(), y.geometry())?;
    let c = fd.analyze_y(y)?;
    let (d, alpha, warning) = regularized_coefficients(fd.lambdas(), &c, filter, rule, delta, fd.y_upper_bound())?;
    let x = match alpha {
        Some(Alpha::Infinite) => GridFunction::zeros(fd.x_geometry()),
        _ => fd.synthesize_dual_x(&d)?,
    };
    Ok(Regularized { x, alpha, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spot_values() {
        let (g, r) = Filter::Tikhonov.eval(0.5, 1.5).unwrap();
        assert!((g - 0.5).abs() < 1e-15 && (r - 0.25).abs() < 1e-15);
        let (g, _) = Filter::Landweber.eval(0.5, 0.5).unwrap();
        assert!((g - 1.5).abs() < 1e-14);
        assert_eq!(Filter::Tsvd.eval(0.1, 0.05).unwrap(), (0.0, 1.0));
        let (g, r) = Filter::Tsvd.eval(0.1, 0.2).unwrap();
        assert!((g - 5.0).abs() < 1e-14 && r == 0.0);
    }

    #[test]
    fn landweber_outside_unit_interval_is_domain_error() {
        assert!(matches!(Filter::Landweber.eval(0.1, 1.5), Err(Error::Domain(_))));
        assert!(matches!(Filter::Tikhonov.eval(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn tsvd_is_left_continuous_in_alpha() {
        let s = 0.3;
        let at = Filter::Tsvd.eval(s, s).unwrap().0;
        let below = Filter::Tsvd.eval(s * (1.0 - 1e-12), s).unwrap().0;
        assert_eq!(at, below);
    }

    #[test]
    fn tikhonov_qualification_one_holds_and_two_fails() {
        let q1 = qualification_check(Filter::Tikhonov, 1.0, 1.0).unwrap();
        assert!(q1.holds && q1.c_mu <= 1.0 + 1e-9);
        let q2 = qualification_check(Filter::Tikhonov, 2.0, 1.0).unwrap();
        assert!(!q2.holds);
        let qh = qualification_check(Filter::Tikhonov, 0.5, 1.0).unwrap();
        assert!(qh.holds && qh.c_mu <= Filter::Tikhonov.c_mu(0.5).unwrap() + 1e-9);
    }

    #[test]
    fn landweber_and_tsvd_have_high_qualification() {
        for f in [Filter::Landweber, Filter::Tsvd] {
            let q = qualification_check(f, 2.0, 1.0).unwrap();
            assert!(q.holds);
            assert!(q.c_mu <= f.c_mu(2.0).unwrap() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn apriori_rule() {
        assert!((apriori_alpha(1e-4, 0.5, 2.0).unwrap() - 2e-4).abs() < 1e-16);
        assert!((apriori_alpha(1e-3, 1.0, 1.0).unwrap() - 1e-2).abs() < 1e-14);
        assert!(apriori_alpha(0.0, 1.0, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn discrepancy_attains_threshold_and_sentinel() {
        let lambdas: Vec<C64> = (1..=50).map(|k| C64::new(1.0 / k as f64, 0.0)).collect();
        let coeffs: Vec<C64> = (1..=50).map(|k| C64::new((k as f64).powf(-1.5), 0.0)).collect();
        let grid = AlphaGrid::default();
        let ch = discrepancy_alpha_from_coeffs(Filter::Tikhonov, &lambdas, &coeffs, 0.01, 1.5, &grid).unwrap();
        let Alpha::Finite(a) = ch.alpha else {
            panic!("expected finite alpha")
        };
        assert!(ch.residual_sq <= ch.threshold_sq);
        let above = discrepancy_value(Filter::Tikhonov, a * 1.001, &lambdas, &coeffs).unwrap();
        assert!(above > ch.threshold_sq * 0.999);
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let huge = discrepancy_alpha_from_coeffs(Filter::Tikhonov, &lambdas, &coeffs, norm, 1.5, &grid).unwrap();
        assert_eq!(huge.alpha, Alpha::Infinite);
        // A component below every grid alpha keeps the residual above a zero threshold.
        let mut tiny = lambdas.clone();
        tiny[49] = C64::new(1e-5, 0.0);
        let none = discrepancy_alpha_from_coeffs(Filter::Tsvd, &tiny, &coeffs, 0.0, 1.5, &grid).unwrap();
        assert_eq!(none.alpha, Alpha::Finite(grid.min));
        assert!(none.warning.is_some());
    }

    proptest! {
        #[test]
        fn filter_bounds(alpha in 1e-6f64..1.0, s in 0.0f64..1.0) {
            for f in [Filter::Tikhonov, Filter::Landweber, Filter::Tsvd] {
                let (g, r) = f.eval(alpha, s).unwrap();
                prop_assert!((s * g).abs() <= f.c_bound() + 1e-12);
                prop_assert!(g.abs() <= f.sup_g(alpha) * (1.0 + 1e-12));
                prop_assert!(f.sup_g(alpha) <= 1.0 / alpha * (1.0 + 1e-12));
                prop_assert!(r.abs() <= f.gamma() + 1e-12);
                prop_assert!((r - (1.0 - s * g)).abs() <= 1e-12);
            }
        }

        #[test]
        fn discrepancy_is_monotone_in_alpha(a in 1e-6f64..1.0, ratio in 1.0f64..100.0) {
            let lambdas: Vec<C64> = (1..=20).map(|k| C64::new(1.0 / k as f64, 0.0)).collect();
            let coeffs: Vec<C64> = (1..=20).map(|k| C64::new(1.0 / (k * k) as f64, 0.1)).collect();
            for f in [Filter::Tikhonov, Filter::Landweber, Filter::Tsvd] {
                let lo = discrepancy_value(f, a, &lambdas, &coeffs).unwrap();
                let hi = discrepancy_value(f, (a * ratio).min(1.0), &lambdas, &coeffs).unwrap();
                prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}
