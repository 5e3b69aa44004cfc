//! Discretized Hilbert spaces, weighted inner products and dense linear algebra.
//!
//! A [`GridFunction`] stores one complex value per grid cell. Inner products
//! are quadrature sums `w * sum x_i conj(y_i)` with the uniform cell weight of
//! the [`Geometry`], so matrices acting on coefficient vectors represent the
//! continuum operators up to the quadrature error.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = faer::c64;

/// Sampling grid of a discretized space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// `n x n` pixels on `[-1,1]^2`, column-major with `x` fastest.
    Pixels { n: usize },
    /// `p` detector cells times `n_theta` angles in `[0, pi)`.
    Sinogram { p: usize, n_theta: usize },
    /// The sinogram continued evenly to `2 n_theta` angles in `[0, 2 pi)`.
    ExtendedSinogram { p: usize, n_theta: usize },
    /// Plain coefficient space with a uniform cell weight.
    Abstract { len: usize, cell_area: f64 },
}

impl Geometry {
    /// Coefficient space of length `len` with unit weights.
    pub fn unit(len: usize) -> Self {
        Geometry::Abstract { len, cell_area: 1.0 }
    }

    pub fn len(&self) -> usize {
        match *self {
            Geometry::Pixels { n } => n * n,
            Geometry::Sinogram { p, n_theta } => p * n_theta,
            Geometry::ExtendedSinogram { p, n_theta } => 2 * p * n_theta,
            Geometry::Abstract { len, .. } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one cell.
    pub fn cell_weight(&self) -> f64 {
        match *self {
            Geometry::Pixels { n } => (2.0 / n as f64).powi(2),
            Geometry::Sinogram { p, n_theta } => (2.0 / p as f64) * (2.0 * std::f64::consts::PI / n_theta as f64),
            Geometry::ExtendedSinogram { p, n_theta } => (2.0 / p as f64) * (std::f64::consts::PI / n_theta as f64),
            Geometry::Abstract { cell_area, .. } => cell_area,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match *self {
            Geometry::Pixels { n } => n > 0,
            Geometry::Sinogram { p, n_theta } | Geometry::ExtendedSinogram { p, n_theta } => p > 0 && n_theta > 0,
            Geometry::Abstract { len, cell_area } => len > 0 && cell_area.is_finite() && cell_area > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("degenerate geometry {self:?}")))
        }
    }
}

/// Values of a function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    geometry: Geometry,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(geometry: Geometry, values: Vec<C64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} cells",
                values.len(),
                geometry.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Contract("grid function has non-finite values".into()));
        }
        Ok(Self { geometry, values })
    }

    pub fn from_real(geometry: Geometry, values: &[f64]) -> Result<Self> {
        Self::new(geometry, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zeros(geometry: Geometry) -> Self {
        Self {
            geometry,
            values: vec![C64::new(0.0, 0.0); geometry.len()],
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    /// `<self, other> = w * sum self_i conj(other_i)`.
    pub fn inner(&self, other: &GridFunction) -> Result<C64> {
        self.check_same(other)?;
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a * b.conj();
        }
        Ok(acc * self.geometry.cell_weight())
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.geometry.cell_weight()).sqrt()
    }

    /// Norm of the imaginary part.
    pub fn imag_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.im * v.im).sum();
        (s * self.geometry.cell_weight()).sqrt()
    }

    pub fn scaled(&self, c: C64) -> GridFunction {
        GridFunction {
            geometry: self.geometry,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &GridFunction) -> Result<GridFunction> {
        self.check_same(other)?;
        Ok(GridFunction {
            geometry: self.geometry,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * c).collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn real_part(&self) -> GridFunction {
        GridFunction {
            geometry: self.geometry,
            values: self.values.iter().map(|v| C64::new(v.re, 0.0)).collect(),
        }
    }

    fn check_same(&self, other: &GridFunction) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::Dimension(format!(
                "geometries differ: {:?} vs {:?}",
                self.geometry, other.geometry
            )));
        }
        Ok(())
    }
}

/// A real linear map between discretized spaces.
///
/// `adjoint_real` is the adjoint with respect to the weighted inner products
/// of domain and range, not the plain transpose.
pub trait LinearMap: Sync {
    fn domain(&self) -> Geometry;
    fn range(&self) -> Geometry;
    fn apply_real(&self, x: &[f64], out: &mut [f64]);
    fn adjoint_real(&self, y: &[f64], out: &mut [f64]);

    /// Applies the map to real and imaginary parts separately.
    fn apply(&self, x: &GridFunction) -> Result<GridFunction> {
        check_geometry("operator input", self.domain(), x.geometry())?;
        split_complex(x, self.range().len(), |a, b| self.apply_real(a, b))
            .and_then(|v| GridFunction::new(self.range(), v))
    }

    fn adjoint(&self, y: &GridFunction) -> Result<GridFunction> {
        check_geometry("adjoint input", self.range(), y.geometry())?;
        split_complex(y, self.domain().len(), |a, b| self.adjoint_real(a, b))
            .and_then(|v| GridFunction::new(self.domain(), v))
    }

    /// Ratio `w_range / w_domain` linking the weighted adjoint to the transpose.
    fn adjoint_scale(&self) -> f64 {
        self.range().cell_weight() / self.domain().cell_weight()
    }
}

fn split_complex(x: &GridFunction, out_len: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Vec<C64>> {
    let re = x.real_values();
    let mut out_re = vec![0.0; out_len];
    f(&re, &mut out_re);
    let mut out_im = vec![0.0; out_len];
    if x.values().iter().any(|v| v.im != 0.0) {
        let im = x.imag_values();
        f(&im, &mut out_im);
    }
    Ok(out_re.into_iter().zip(out_im).map(|(r, i)| C64::new(r, i)).collect())
}

pub(crate) fn check_geometry(what: &str, expected: Geometry, got: Geometry) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension(format!("{what}: expected {expected:?}, got {got:?}")));
    }
    Ok(())
}

/// Dense real matrix between two discretized spaces.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    entries: Mat<f64>,
    domain: Geometry,
    range: Geometry,
}

impl DenseOperator {
    pub fn new(entries: Mat<f64>, domain: Geometry, range: Geometry) -> Result<Self> {
        domain.validate()?;
        range.validate()?;
        if entries.nrows() != range.len() || entries.ncols() != domain.len() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, geometries need {}x{}",
                entries.nrows(),
                entries.ncols(),
                range.len(),
                domain.len()
            )));
        }
        Ok(Self { entries, domain, range })
    }

    pub fn entries(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn into_entries(self) -> Mat<f64> {
        self.entries
    }

    /// Operator norm with respect to the weighted inner products.
    pub fn norm(&self) -> Result<f64> {
        let gram = self.entries.transpose() * &self.entries;
        let sym = DenseOperator::new(gram, self.domain, self.domain)?;
        let eig = extremal_eigs_spd(&sym)?;
        Ok((eig.max.max(0.0) * self.adjoint_scale()).sqrt())
    }
}

impl LinearMap for DenseOperator {
    fn domain(&self) -> Geometry {
        self.domain
    }

    fn range(&self) -> Geometry {
        self.range
    }

    fn apply_real(&self, x: &[f64], out: &mut [f64]) {
        matvec(self.entries.as_ref(), x, out);
    }

    fn adjoint_real(&self, y: &[f64], out: &mut [f64]) {
        matvec_t(self.entries.as_ref(), y, out);
        let c = self.adjoint_scale();
        out.iter_mut().for_each(|v| *v *= c);
    }
}

/// `out = a * x`.
pub(crate) fn matvec(a: MatRef<'_, f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, &xj) in x.iter().enumerate().take(a.ncols()) {
        if xj == 0.0 {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(a.col(j).iter()) {
            *o += aij * xj;
        }
    }
}

/// `out = a^T * y`.
pub(crate) fn matvec_t(a: MatRef<'_, f64>, y: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate().take(a.ncols()) {
        *o = a.col(j).iter().zip(y).map(|(p, q)| p * q).sum();
    }
}

/// Top singular triplets, orthonormal in the weighted inner products.
#[derive(Clone, Debug)]
pub struct SingularSystem {
    /// Decreasing positive singular values.
    pub sigmas: Vec<f64>,
    /// Columns are the left vectors `u_k` in range coordinates.
    pub left: Mat<f64>,
    /// Columns are the right vectors `v_k` in domain coordinates.
    pub right: Mat<f64>,
    pub domain: Geometry,
    pub range: Geometry,
}

impl SingularSystem {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }
}

/// Relative residual above which a computed decomposition is rejected.
const SVD_RESIDUAL_TOL: f64 = 1e-8;

/// Computes the `k` largest singular triplets of `a` in the weighted spaces.
///
/// Singular values below `1e-13 * sigma_1 * max(m, n)` are treated as zero and
/// dropped, so fewer than `k` triplets may be returned.
pub fn svd(a: &DenseOperator, k: usize) -> Result<SingularSystem> {
    if k == 0 {
        return Err(Error::Contract("requested zero singular triplets".into()));
    }
    let wd = a.domain.cell_weight();
    let wr = a.range.cell_weight();
    let c = (wr / wd).sqrt();
    let scaled = Mat::from_fn(a.entries.nrows(), a.entries.ncols(), |i, j| c * a.entries[(i, j)]);
    let dec = scaled
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("svd did not converge: {e:?}")))?;
    let s = dec.S().column_vector();
    let (m, n) = (scaled.nrows(), scaled.ncols());
    let s1 = if s.nrows() > 0 { s[0] } else { 0.0 };
    if !(s1 > 0.0) {
        return Err(Error::Numeric("operator is zero".into()));
    }
    let floor = 1e-13 * s1 * m.max(n) as f64;
    let keep = (0..s.nrows().min(k)).take_while(|&i| s[i] > floor).count();

    let u_hat = dec.U().subcols(0, keep).to_owned();
    let mut v_hat = dec.V().subcols(0, keep).to_owned();
    let mut u_hat = u_hat;
    // Fix signs so the largest entry of each right vector is positive.
    for j in 0..keep {
        let col = v_hat.col(j);
        let mut best = 0usize;
        for i in 0..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if v_hat[(best, j)] < 0.0 {
            for i in 0..n {
                v_hat[(i, j)] = -v_hat[(i, j)];
            }
            for i in 0..m {
                u_hat[(i, j)] = -u_hat[(i, j)];
            }
        }
    }
    let sigmas: Vec<f64> = (0..keep).map(|i| s[i]).collect();

    // Residuals ||A v - s u|| and ||A^T u - s v|| relative to sigma_1.
    let av = &scaled * &v_hat;
    let atu = scaled.transpose() * &u_hat;
    let mut worst: f64 = 0.0;
    for j in 0..keep {
        let r1: f64 = (0..m).map(|i| (av[(i, j)] - sigmas[j] * u_hat[(i, j)]).powi(2)).sum();
        let r2: f64 = (0..n).map(|i| (atu[(i, j)] - sigmas[j] * v_hat[(i, j)]).powi(2)).sum();
        worst = worst.max(r1.sqrt()).max(r2.sqrt());
    }
    if worst > SVD_RESIDUAL_TOL * s1 {
        return Err(Error::Numeric(format!(
            "svd residual {:.3e} exceeds {:.1e} * sigma_1",
            worst / s1,
            SVD_RESIDUAL_TOL
        )));
    }

    let su = 1.0 / wr.sqrt();
    let sv = 1.0 / wd.sqrt();
    Ok(SingularSystem {
        sigmas,
        left: Mat::from_fn(m, keep, |i, j| su * u_hat[(i, j)]),
        right: Mat::from_fn(n, keep, |i, j| sv * v_hat[(i, j)]),
        domain: a.domain,
        range: a.range,
    })
}

/// Extremal eigenvalues of a symmetric positive semidefinite operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalEigs {
    pub min: f64,
    pub max: f64,
    /// True when power iteration stalled and the dense solver was used.
    pub dense_fallback: bool,
}

const EIG_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 20_000;
const DENSE_FALLBACK_MAX_DIM: usize = 8_000;

/// `(lambda_min, lambda_max)` of a symmetric operator by power iteration.
///
/// The smallest eigenvalue is obtained by power iteration on
/// `lambda_max I - S`. Iteration stops once the eigen-residual drops below
/// `1e-8 * lambda_max`. If the iteration cap is hit, the dense symmetric
/// eigensolver is used instead for moderate dimensions.
pub fn extremal_eigs_spd(s: &DenseOperator) -> Result<ExtremalEigs> {
    extremal_eigs_spd_capped(s, POWER_MAX_ITER)
}

/// [`extremal_eigs_spd`] with an explicit power-iteration cap.
pub fn extremal_eigs_spd_capped(s: &DenseOperator, max_iter: usize) -> Result<ExtremalEigs> {
    let m = s.entries();
    if m.nrows() != m.ncols() || s.domain != s.range {
        return Err(Error::Contract("operator is not an endomorphism".into()));
    }
    check_symmetric(m)?;
    let n = m.nrows();
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok(ExtremalEigs {
            min: 0.0,
            max: 0.0,
            dense_fallback: false,
        });
    }
    let top = power_iteration(m, 0.0, scale, max_iter);
    let bottom = top.and_then(|hi| power_iteration(m, hi, hi, max_iter).map(|mu| (hi, hi - mu)));
    match bottom {
        Some((hi, lo)) => Ok(ExtremalEigs {
            min: lo,
            max: hi,
            dense_fallback: false,
        }),
        None if n <= DENSE_FALLBACK_MAX_DIM => {
            let ev = m
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
            Ok(ExtremalEigs {
                min: ev[0],
                max: ev[n - 1],
                dense_fallback: true,
            })
        }
        None => Err(Error::Numeric(format!(
            "power iteration did not converge in {max_iter} sweeps"
        ))),
    }
}

/// Dominant eigenvalue of `shift I - M` (or `M` when `shift == 0`).
fn power_iteration(m: MatRef<'_, f64>, shift: f64, scale: f64, max_iter: usize) -> Option<f64> {
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let apply = |v: &[f64], w: &mut [f64]| {
        matvec(m, v, w);
        if shift != 0.0 {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi = shift * vi - *wi;
            }
        }
    };
    for _ in 0..max_iter {
        apply(&v, &mut w);
        let rho: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let res: f64 = v.iter().zip(&w).map(|(a, b)| (b - rho * a).powi(2)).sum::<f64>().sqrt();
        if res <= EIG_TOL * scale {
            return Some(rho);
        }
        v.copy_from_slice(&w);
        if normalize(&mut v) == 0.0 {
            return Some(0.0);
        }
    }
    None
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    n
}

pub(crate) fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut s: f64 = 0.0;
    for j in 0..m.ncols() {
        for &x in m.col(j).iter() {
            s = s.max(x.abs());
        }
    }
    s
}

pub(crate) fn check_symmetric(m: MatRef<'_, f64>) -> Result<()> {
    let scale = max_abs(m);
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::Contract(format!(
            "operator is not self-adjoint (asymmetry {:.3e} relative)",
            worst / scale
        )));
    }
    Ok(())
}

/// Relative residual accepted for regularized solves.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
/// Pivot ratio beyond which an unregularized solve is rejected.
const COND_LIMIT: f64 = 1e12;

/// Solves `(S^T S + alpha I) X = S^T B` for every column of `B`.
///
/// With `alpha == 0` this reduces to `S X = B`, solved by LU; the solve is
/// rejected when the pivots indicate a condition number above `1e12`.
/// Returns the solution together with its relative residual.
pub fn regularized_solve(s: MatRef<'_, f64>, b: MatRef<'_, f64>, alpha: f64) -> Result<(Mat<f64>, f64)> {
    let n = s.nrows();
    if s.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "regularized solve with S {}x{} and rhs {}x{}",
            s.nrows(),
            s.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("regularization parameter {alpha}")));
    }
    if alpha == 0.0 {
        let lu = s.full_piv_lu();
        let u = lu.U();
        let (mut hi, mut lo) = (0.0f64, f64::INFINITY);
        for i in 0..n {
            hi = hi.max(u[(i, i)].abs());
            lo = lo.min(u[(i, i)].abs());
        }
        if !(lo > 0.0) || hi / lo > COND_LIMIT {
            return Err(Error::Numeric(format!(
                "unregularized solve is ill-conditioned (pivot ratio {:.3e})",
                hi / lo
            )));
        }
        let mut x = lu.solve(b);
        let rel = refine(|x| s * x, b.to_owned(), &mut x, |r| lu.solve(r));
        return check_residual(x, rel);
    }
    let mut m = s.transpose() * s;
    for i in 0..n {
        m[(i, i)] += alpha;
    }
    let rhs = s.transpose() * b;
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| Error::Numeric(format!("cholesky failed: {e:?}")))?;
    let mut x = llt.solve(&rhs);
    let rel = refine(|x| &m * x, rhs, &mut x, |r| llt.solve(r));
    check_residual(x, rel)
}

fn check_residual(x: Mat<f64>, rel: f64) -> Result<(Mat<f64>, f64)> {
    if rel > SOLVE_RESIDUAL_TOL {
        return Err(Error::Numeric(format!(
            "regularized solve residual {rel:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}"
        )));
    }
    Ok((x, rel))
}

/// Up to three steps of iterative refinement; returns the final relative residual.
fn refine(
    op: impl Fn(&Mat<f64>) -> Mat<f64>,
    rhs: Mat<f64>,
    x: &mut Mat<f64>,
    solve: impl Fn(&Mat<f64>) -> Mat<f64>,
) -> f64 {
    let denom = rhs.norm_l2().max(f64::MIN_POSITIVE);
    let mut rel = f64::INFINITY;
    for step in 0..4 {
        let r = &rhs - op(x);
        rel = r.norm_l2() / denom;
        if rel <= SOLVE_RESIDUAL_TOL * 1e-2 || step == 3 {
            break;
        }
        *x += solve(&r);
    }
    rel
}

/// Solves `(S^T S + alpha I) x = S^T b` for a self-map `S`.
pub fn solve_regularized(s: &DenseOperator, b: &GridFunction, alpha: f64) -> Result<GridFunction> {
    if s.domain != s.range {
        return Err(Error::Contract("regularized solve needs a self-map".into()));
    }
    check_geometry("right-hand side", s.range, b.geometry())?;
    let n = b.len();
    let rhs = Mat::from_fn(n, 2, |i, j| if j == 0 { b.values()[i].re } else { b.values()[i].im });
    let (x, _) = regularized_solve(s.entries(), rhs.as_ref(), alpha)?;
    GridFunction::new(s.domain, (0..n).map(|i| C64::new(x[(i, 0)], x[(i, 1)])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(m: usize, n: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn cell_weights() {
        assert!((Geometry::Pixels { n: 4 }.cell_weight() - 0.25).abs() < 1e-15);
        let nat = Geometry::Sinogram { p: 10, n_theta: 8 }.cell_weight();
        let ext = Geometry::ExtendedSinogram { p: 10, n_theta: 8 }.cell_weight();
        assert!((nat - 2.0 * ext).abs() < 1e-15);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric() {
        let g = Geometry::Abstract { len: 3, cell_area: 0.5 };
        let x = GridFunction::new(g, vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0), C64::new(3.0, 0.5)]).unwrap();
        let y = GridFunction::new(g, vec![C64::new(-1.0, 1.0), C64::new(2.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        let a = x.inner(&y).unwrap();
        let b = y.inner(&x).unwrap();
        assert!((a - b.conj()).norm() < 1e-14);
        assert!((x.inner(&x).unwrap().re - x.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Geometry::unit(3);
        assert!(matches!(
            GridFunction::from_real(g, &[1.0, 2.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            GridFunction::from_real(g, &[1.0, f64::NAN, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn weighted_adjoint_identity() {
        let a = random_matrix(6, 4, 1);
        let op = DenseOperator::new(a, Geometry::Pixels { n: 2 }, Geometry::Sinogram { p: 3, n_theta: 2 }).unwrap();
        let x = GridFunction::from_real(op.domain(), &[1.0, -2.0, 0.5, 3.0]).unwrap();
        let y = GridFunction::from_real(op.range(), &[0.3, 1.0, -1.0, 2.0, 0.0, 1.5]).unwrap();
        let lhs = op.apply(&x).unwrap().inner(&y).unwrap();
        let rhs = x.inner(&op.adjoint(&y).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn svd_triplets_are_weighted_orthonormal() {
        let a = random_matrix(8, 5, 2);
        let op = DenseOperator::new(
            a,
            Geometry::Abstract { len: 5, cell_area: 0.2 },
            Geometry::Abstract { len: 8, cell_area: 3.0 },
        )
        .unwrap();
        let sys = svd(&op, 5).unwrap();
        assert_eq!(sys.len(), 5);
        for w in sys.sigmas.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for j in 0..5 {
            for k in 0..5 {
                let uu: f64 = (0..8).map(|i| sys.left[(i, j)] * sys.left[(i, k)]).sum::<f64>() * 3.0;
                let vv: f64 = (0..5).map(|i| sys.right[(i, j)] * sys.right[(i, k)]).sum::<f64>() * 0.2;
                let e = if j == k { 1.0 } else { 0.0 };
                assert!((uu - e).abs() < 1e-10);
                assert!((vv - e).abs() < 1e-10);
            }
            let v =
                GridFunction::from_real(op.domain(), &sys.right.col(j).iter().copied().collect::<Vec<_>>()).unwrap();
            let av = op.apply(&v).unwrap();
            let u = GridFunction::from_real(op.range(), &sys.left.col(j).iter().copied().collect::<Vec<_>>()).unwrap();
            assert!(av.sub(&u.scaled(C64::new(sys.sigmas[j], 0.0))).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn svd_drops_null_space() {
        let b = random_matrix(6, 2, 3);
        let a = &b * b.transpose();
        let op = DenseOperator::new(a, Geometry::unit(6), Geometry::unit(6)).unwrap();
        assert_eq!(svd(&op, 6).unwrap().len(), 2);
    }

    #[test]
    fn extremal_eigs_match_dense_solver() {
        let b = random_matrix(30, 30, 4);
        let mut s = b.transpose() * &b;
        for i in 0..30 {
            s[(i, i)] += 0.5;
        }
        let ev = s.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let op = DenseOperator::new(s, Geometry::unit(30), Geometry::unit(30)).unwrap();
        let e = extremal_eigs_spd(&op).unwrap();
        assert!((e.max - ev[29]).abs() <= 1e-7 * ev[29]);
        assert!((e.min - ev[0]).abs() <= 1e-7 * ev[29]);
    }

    #[test]
    fn asymmetric_operator_is_rejected() {
        let mut s = Mat::<f64>::identity(3, 3);
        s[(0, 1)] = 0.1;
        let op = DenseOperator::new(s, Geometry::unit(3), Geometry::unit(3)).unwrap();
        assert!(matches!(extremal_eigs_spd(&op), Err(Error::Contract(_))));
    }

    #[test]
    fn regularized_solve_matches_normal_equations() {
        let s = random_matrix(10, 10, 5);
        let b = random_matrix(10, 1, 6);
        let (x, rel) = regularized_solve(s.as_ref(), b.as_ref(), 0.3).unwrap();
        assert!(rel <= SOLVE_RESIDUAL_TOL);
        let lhs = s.transpose() * &s * &x + &x * faer::Scale(0.3);
        let rhs = s.transpose() * &b;
        assert!((&lhs - &rhs).norm_l2() < 1e-10 * rhs.norm_l2());
    }

    #[test]
    fn singular_unregularized_solve_fails() {
        let mut s = Mat::<f64>::identity(4, 4);
        s[(3, 3)] = 0.0;
        let b = Mat::<f64>::from_fn(4, 1, |i, _| i as f64);
        assert!(matches!(
            regularized_solve(s.as_ref(), b.as_ref(), 0.0),
            Err(Error::Numeric(_))
        ));
    }
}
