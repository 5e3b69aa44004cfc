//! Frames, dual frames and frame decompositions.
//!
//! A frame lives either in a real space (pixel images, sinograms) or in a
//! complex one. In a real space the elements may still be complex; the space
//! is then spanned by their real and imaginary parts and synthesis keeps the
//! real part. All frame operators are handled in real coordinates: a real
//! space of `n` cells has `n` coordinates, a complex one `2n` (real parts
//! stacked over imaginary parts). A dual frame is stored as the real map `G`
//! with `dual_k = G e_k` in those coordinates.

use std::path::Path;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, check_geometry, DenseOperator, Geometry, GridFunction, LinearMap, C64};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    /// Number of real coordinates of a space with `n` cells.
    pub fn real_dim(self, n: usize) -> usize {
        match self {
            Field::Real => n,
            Field::Complex => 2 * n,
        }
    }

    pub fn realify(self, v: &[C64]) -> Vec<f64> {
        match self {
            Field::Real => v.iter().map(|z| z.re).collect(),
            Field::Complex => v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect(),
        }
    }

    pub fn unrealify(self, v: &[f64]) -> Vec<C64> {
        match self {
            Field::Real => v.iter().map(|&x| C64::new(x, 0.0)).collect(),
            Field::Complex => {
                let n = v.len() / 2;
                (0..n).map(|i| C64::new(v[i], v[n + i])).collect()
            }
        }
    }
}

/// Lower and upper frame bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

impl FrameBounds {
    pub fn is_tight(&self, rel_tol: f64) -> bool {
        (self.upper - self.lower).abs() <= rel_tol * self.upper
    }

    /// Contraction factor of the recursive dual for a relaxation sum `r`.
    pub fn recursion_factor(&self, r: f64) -> f64 {
        (1.0 - 2.0 * self.lower / r)
            .abs()
            .max((1.0 - 2.0 * self.upper / r).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DualMethod {
    /// `M` sweeps of the relaxed recursion with relaxation sum `R` (nominally `B1 + B2`).
    Recursive { relaxation_sum: f64, iterations: usize },
    /// `(S^T S + alpha I)^{-1} S^T` applied to the frame elements.
    Explicit { alpha: f64 },
}

/// A computed dual frame, stored as a map on real coordinates.
#[derive(Clone, Debug)]
pub struct DualFrame {
    map: Mat<f64>,
    tol_dual: f64,
    method: DualMethod,
}

impl DualFrame {
    pub fn new(map: Mat<f64>, tol_dual: f64, method: DualMethod) -> Result<Self> {
        if map.nrows() != map.ncols() {
            return Err(Error::Dimension("dual map must be square".into()));
        }
        Ok(Self { map, tol_dual, method })
    }

    pub fn map(&self) -> MatRef<'_, f64> {
        self.map.as_ref()
    }

    /// Reconstruction error bound of the dual on unit vectors.
    pub fn tol_dual(&self) -> f64 {
        self.tol_dual
    }

    pub fn method(&self) -> DualMethod {
        self.method
    }

    /// `G x` in real coordinates.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.map.nrows()];
        hilbert::matvec(self.map.as_ref(), x, &mut out);
        out
    }
}

/// Number of random probes used to measure a dual's reconstruction error.
const DUAL_PROBES: usize = 20;
const PROBE_SEED: u64 = 42;

fn probes(dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    (0..DUAL_PROBES)
        .map(|_| {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
            v
        })
        .collect()
}

/// Largest `||x - G S x||` over the probe vectors (unit in plain coordinates).
///
/// The ratio is the same in the weighted norm because weights are uniform.
pub fn measured_dual_error(s: MatRef<'_, f64>, g: MatRef<'_, f64>) -> f64 {
    let n = s.nrows();
    let mut sx = vec![0.0; n];
    let mut gsx = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for x in probes(n) {
        hilbert::matvec(s, &x, &mut sx);
        hilbert::matvec(g, &sx, &mut gsx);
        let e: f64 = x.iter().zip(&gsx).map(|(a, b)| (a - b).powi(2)).sum();
        worst = worst.max(e.sqrt());
    }
    worst
}

/// Frame bounds as the extremal eigenvalues of the frame operator matrix.
///
/// Fails when `lambda_min < 1e-12 lambda_max`: the family does not span the
/// space at this discretization.
pub fn bounds_from_operator(s: &Mat<f64>, geometry: Geometry) -> Result<FrameBounds> {
    bounds_from_operator_capped(s, geometry, hilbert::POWER_MAX_ITER)
}

/// [`bounds_from_operator`] with an explicit power-iteration cap.
pub fn bounds_from_operator_capped(s: &Mat<f64>, geometry: Geometry, max_iter: usize) -> Result<FrameBounds> {
    let op = DenseOperator::new(s.clone(), geometry, geometry)?;
    let eig = hilbert::extremal_eigs_spd_capped(&op, max_iter)?;
    if !(eig.max > 0.0) || eig.min < 1e-12 * eig.max {
        return Err(Error::Numeric(format!(
            "not a frame at this discretization: lambda_min = {:.3e}, lambda_max = {:.3e}",
            eig.min, eig.max
        )));
    }
    Ok(FrameBounds {
        lower: eig.min,
        upper: eig.max,
    })
}

/// Dual map of the relaxed recursion
/// `dual^m = (2/R) e + (I - 2S/R) dual^{m-1}`, started at `(2/R) e`.
///
/// Diverges (and errors) when the residual grows over three consecutive
/// sweeps, which happens for `R` below the upper frame bound.
pub fn recursive_dual(
    s: MatRef<'_, f64>,
    relaxation_sum: f64,
    iterations: usize,
    bounds: Option<FrameBounds>,
) -> Result<DualFrame> {
    if !(relaxation_sum > 0.0) || !relaxation_sum.is_finite() {
        return Err(Error::Domain(format!("relaxation sum {relaxation_sum}")));
    }
    let n = s.nrows();
    let c = 2.0 / relaxation_sum;
    let mut g = Mat::<f64>::identity(n, n) * faer::Scale(c);
    let mut prev = measured_dual_error(s, g.as_ref());
    let mut growth = 0;
    for _ in 0..iterations {
        let sg = s * &g;
        g = &g - sg * faer::Scale(c);
        for i in 0..n {
            g[(i, i)] += c;
        }
        let err = measured_dual_error(s, g.as_ref());
        if !err.is_finite() {
            return Err(Error::Numeric("recursive dual overflowed".into()));
        }
        if err > prev {
            growth += 1;
            if growth >= 3 {
                return Err(Error::Numeric(format!(
                    "recursive dual diverges for relaxation sum {relaxation_sum}; it must exceed the upper frame bound"
                )));
            }
        } else {
            growth = 0;
        }
        prev = err;
    }
    let tol = match bounds {
        Some(b) if b.recursion_factor(relaxation_sum) < 1.0 => {
            b.recursion_factor(relaxation_sum).powi(iterations as i32 + 1)
        }
        _ => prev,
    };
    DualFrame::new(
        g,
        tol,
        DualMethod::Recursive {
            relaxation_sum,
            iterations,
        },
    )
}

/// Dual map `(S^T S + alpha I)^{-1} S^T`; `alpha = 0` gives the canonical dual.
pub fn explicit_dual(s: MatRef<'_, f64>, alpha: f64) -> Result<DualFrame> {
    let id = Mat::<f64>::identity(s.nrows(), s.nrows());
    let (g, _) = hilbert::regularized_solve(s, id.as_ref(), alpha)?;
    let tol = measured_dual_error(s, g.as_ref());
    DualFrame::new(g, tol, DualMethod::Explicit { alpha })
}

/// A finite frame stored element by element.
#[derive(Clone, Debug)]
pub struct FrameSystem {
    elements: Mat<C64>,
    geometry: Geometry,
    field: Field,
    bounds: Option<FrameBounds>,
    dual: Option<DualFrame>,
}

impl FrameSystem {
    /// Frame whose `k`-th element is column `k` of `elements`.
    pub fn new(elements: Mat<C64>, geometry: Geometry, field: Field) -> Result<Self> {
        geometry.validate()?;
        if elements.nrows() != geometry.len() {
            return Err(Error::Dimension(format!(
                "elements have {} rows, geometry has {} cells",
                elements.nrows(),
                geometry.len()
            )));
        }
        if elements.ncols() == 0 {
            return Err(Error::Contract("a frame needs at least one element".into()));
        }
        for j in 0..elements.ncols() {
            if elements.col(j).iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Contract(format!("frame element {j} is not finite")));
            }
        }
        Ok(Self {
            elements,
            geometry,
            field,
            bounds: None,
            dual: None,
        })
    }

    pub fn from_real(elements: &Mat<f64>, geometry: Geometry) -> Result<Self> {
        let e = Mat::from_fn(elements.nrows(), elements.ncols(), |i, j| {
            C64::new(elements[(i, j)], 0.0)
        });
        Self::new(e, geometry, Field::Real)
    }

    /// Standard basis scaled to be orthonormal in the weighted inner product.
    pub fn orthonormal_basis(geometry: Geometry) -> Result<Self> {
        let n = geometry.len();
        let c = 1.0 / geometry.cell_weight().sqrt();
        Self::new(
            Mat::from_fn(n, n, |i, j| C64::new(if i == j { c } else { 0.0 }, 0.0)),
            geometry,
            Field::Real,
        )
    }

    pub fn len(&self) -> usize {
        self.elements.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.ncols() == 0
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn elements(&self) -> MatRef<'_, C64> {
        self.elements.as_ref()
    }

    pub fn element(&self, k: usize) -> GridFunction {
        GridFunction::new(self.geometry, self.elements.col(k).iter().copied().collect())
            .expect("elements are validated on construction")
    }

    pub fn bounds(&self) -> Option<FrameBounds> {
        self.bounds
    }

    pub fn dual(&self) -> Option<&DualFrame> {
        self.dual.as_ref()
    }

    fn real_dim(&self) -> usize {
        self.field.real_dim(self.geometry.len())
    }

    fn coordinate_geometry(&self) -> Geometry {
        Geometry::Abstract {
            len: self.real_dim(),
            cell_area: self.geometry.cell_weight(),
        }
    }

    /// Coefficients `<x, e_k>`.
    pub fn analyze(&self, x: &GridFunction) -> Result<Vec<C64>> {
        check_geometry("analysis input", self.geometry, x.geometry())?;
        let w = self.geometry.cell_weight();
        Ok((0..self.len())
            .map(|k| {
                let mut acc = C64::new(0.0, 0.0);
                for (xi, ei) in x.values().iter().zip(self.elements.col(k).iter()) {
                    acc += xi * ei.conj();
                }
                acc * w
            })
            .collect())
    }

    /// `sum_k c_k e_k`, real part only for real spaces.
    pub fn synthesize(&self, c: &[C64]) -> Result<GridFunction> {
        if c.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a frame of {} elements",
                c.len(),
                self.len()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.geometry.len()];
        for (k, &ck) in c.iter().enumerate() {
            if ck == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, e) in out.iter_mut().zip(self.elements.col(k).iter()) {
                *o += ck * e;
            }
        }
        if self.field == Field::Real {
            out.iter_mut().for_each(|z| z.im = 0.0);
        }
        GridFunction::new(self.geometry, out)
    }

    /// `S x = sum_k <x, e_k> e_k`.
    pub fn frame_operator_apply(&self, x: &GridFunction) -> Result<GridFunction> {
        self.synthesize(&self.analyze(x)?)
    }

    /// Matrix of the frame operator in real coordinates.
    pub fn frame_operator_matrix(&self) -> Mat<f64> {
        let n = self.geometry.len();
        let k = self.len();
        let e = &self.elements;
        let r = match self.field {
            Field::Real => Mat::from_fn(n, 2 * k, |i, j| if j < k { e[(i, j)].re } else { e[(i, j - k)].im }),
            Field::Complex => Mat::from_fn(2 * n, 2 * k, |i, j| {
                let (row, top) = if i < n { (i, true) } else { (i - n, false) };
                let (col, left) = if j < k { (j, true) } else { (j - k, false) };
                let z = e[(row, col)];
                match (top, left) {
                    (true, true) => z.re,
                    (true, false) => -z.im,
                    (false, true) => z.im,
                    (false, false) => z.re,
                }
            }),
        };
        let w = self.geometry.cell_weight();
        let mut s = &r * r.transpose() * faer::Scale(w);
        symmetrize(&mut s);
        s
    }

    /// Computes and stores the optimal frame bounds.
    pub fn estimate_bounds(&mut self) -> Result<FrameBounds> {
        let b = bounds_from_operator(&self.frame_operator_matrix(), self.coordinate_geometry())?;
        self.bounds = Some(b);
        Ok(b)
    }

    pub fn compute_dual_recursive(&mut self, relaxation_sum: f64, iterations: usize) -> Result<&DualFrame> {
        let s = self.frame_operator_matrix();
        let d = recursive_dual(s.as_ref(), relaxation_sum, iterations, self.bounds)?;
        self.dual = Some(d);
        Ok(self.dual.as_ref().unwrap())
    }

    /// Bounds and explicit dual from a single assembly of the frame operator.
    pub fn estimate_bounds_and_dual(&mut self, alpha: f64) -> Result<FrameBounds> {
        let s = self.frame_operator_matrix();
        let b = bounds_from_operator(&s, self.coordinate_geometry())?;
        self.bounds = Some(b);
        self.dual = Some(explicit_dual(s.as_ref(), alpha)?);
        Ok(b)
    }

    pub fn compute_dual_explicit(&mut self, alpha: f64) -> Result<&DualFrame> {
        let s = self.frame_operator_matrix();
        let d = explicit_dual(s.as_ref(), alpha)?;
        self.dual = Some(d);
        Ok(self.dual.as_ref().unwrap())
    }

    pub fn set_dual(&mut self, dual: DualFrame) -> Result<()> {
        if dual.map.nrows() != self.real_dim() {
            return Err(Error::Dimension("dual map does not match the frame".into()));
        }
        self.dual = Some(dual);
        Ok(())
    }

    fn require_dual(&self) -> Result<&DualFrame> {
        self.dual
            .as_ref()
            .ok_or_else(|| Error::Contract("dual frame has not been computed".into()))
    }

    /// `sum_k c_k dual_k`.
    pub fn synthesize_dual(&self, c: &[C64]) -> Result<GridFunction> {
        let g = self.require_dual()?;
        let v = self.synthesize(c)?;
        let out = g.apply(&self.field.realify(v.values()));
        GridFunction::new(self.geometry, self.field.unrealify(&out))
    }

    /// `dual_k = G e_k`.
    pub fn dual_element(&self, k: usize) -> Result<GridFunction> {
        let g = self.require_dual()?;
        let e: Vec<C64> = self.elements.col(k).iter().copied().collect();
        let v = match self.field {
            Field::Real => {
                let re = g.apply(&e.iter().map(|z| z.re).collect::<Vec<_>>());
                let im = g.apply(&e.iter().map(|z| z.im).collect::<Vec<_>>());
                re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect()
            }
            Field::Complex => self.field.unrealify(&g.apply(&self.field.realify(&e))),
        };
        GridFunction::new(self.geometry, v)
    }

    /// All dual elements as columns.
    pub fn materialize_dual(&self) -> Result<Mat<C64>> {
        let mut out = Mat::<C64>::zeros(self.geometry.len(), self.len());
        for k in 0..self.len() {
            let d = self.dual_element(k)?;
            for (i, v) in d.values().iter().enumerate() {
                out[(i, k)] = *v;
            }
        }
        Ok(out)
    }

    /// `sum_k <x, e_k> dual_k`.
    pub fn reconstruct(&self, x: &GridFunction) -> Result<GridFunction> {
        self.synthesize_dual(&self.analyze(x)?)
    }

    /// `B^{-1} sum_k <x, e_k> e_k` for a tight frame with bound `B`.
    pub fn reconstruct_tight(&self, x: &GridFunction) -> Result<GridFunction> {
        let b = self
            .bounds
            .ok_or_else(|| Error::Contract("frame bounds have not been estimated".into()))?;
        if !b.is_tight(1e-10) {
            return Err(Error::Contract(format!(
                "frame is not tight: bounds {} and {}",
                b.lower, b.upper
            )));
        }
        Ok(self.frame_operator_apply(x)?.scaled(C64::new(1.0 / b.upper, 0.0)))
    }

    /// Writes `meta.json`, `elements.frm` and, when present, `dual.frm` and `dual_map.frm`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = FrameMeta {
            kind: "explicit".into(),
            geometry: self.geometry,
            field: self.field,
            count: self.len(),
            bounds: self.bounds,
            dual: self.dual.as_ref().map(|d| DualMeta {
                method: d.method,
                tol_dual: d.tol_dual,
            }),
        };
        io::write_json(&dir.join("meta.json"), &meta)?;
        io::write_complex_matrix(&dir.join("elements.frm"), &self.elements)?;
        if let Some(d) = &self.dual {
            io::write_complex_matrix(&dir.join("dual.frm"), &self.materialize_dual()?)?;
            io::write_matrix(&dir.join("dual_map.frm"), &d.map)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: FrameMeta = io::read_json(&dir.join("meta.json"))?;
        if meta.kind != "explicit" {
            return Err(Error::Format {
                path: dir.join("meta.json"),
                reason: format!("frame kind {:?} is not an explicit frame", meta.kind),
            });
        }
        let elements = io::read_complex_matrix(&dir.join("elements.frm"))?;
        let mut f = Self::new(elements, meta.geometry, meta.field)?;
        if f.len() != meta.count {
            return Err(Error::Format {
                path: dir.join("elements.frm"),
                reason: format!("{} elements, meta says {}", f.len(), meta.count),
            });
        }
        f.bounds = meta.bounds;
        if let Some(d) = meta.dual {
            let map = io::read_matrix(&dir.join("dual_map.frm"))?;
            f.set_dual(DualFrame::new(map, d.tol_dual, d.method)?)?;
        }
        Ok(f)
    }
}

pub(crate) fn symmetrize(s: &mut Mat<f64>) {
    let n = s.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualMeta {
    #[serde(flatten)]
    pub method: DualMethod,
    pub tol_dual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FrameMeta {
    kind: String,
    geometry: Geometry,
    field: Field,
    count: usize,
    bounds: Option<FrameBounds>,
    dual: Option<DualMeta>,
}

/// The quantities a filtered reconstruction needs from a frame decomposition.
///
/// `y` refers to the data space and `x` to the solution space. The `k`-th
/// data frame function `f_k` and solution frame function `e_k` are linked by
/// `conj(lambda_k) e_k = A^* f_k`.
pub trait Decomposition {
    fn lambdas(&self) -> &[C64];
    fn x_geometry(&self) -> Geometry;
    fn y_geometry(&self) -> Geometry;
    /// `<y, f_k>` for every `k`.
    fn analyze_y(&self, y: &GridFunction) -> Result<Vec<C64>>;
    /// `sum_k d_k dual_k` with the dual of the solution frame.
    fn synthesize_dual_x(&self, d: &[C64]) -> Result<GridFunction>;
    /// Upper frame bound of the data frame, if known.
    fn y_upper_bound(&self) -> Option<f64>;
    /// Lower frame bound of the solution frame, if known.
    fn x_lower_bound(&self) -> Option<f64>;

    /// Indices with `lambda_k != 0`.
    fn nonzero(&self) -> Vec<usize> {
        self.lambdas()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.norm() > 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Frame decomposition with both frames stored explicitly.
#[derive(Clone, Debug)]
pub struct FrameDecomposition {
    operator: DenseOperator,
    x_frame: FrameSystem,
    y_frame: FrameSystem,
    lambdas: Vec<C64>,
    link_residuals: Vec<f64>,
}

/// Relative tolerance of the link relation `conj(lambda) e = A^* f`.
pub const LINK_TOL: f64 = 1e-8;

impl FrameDecomposition {
    /// Assembles a decomposition from given frames, checking the link relation.
    pub fn from_parts(
        operator: DenseOperator,
        x_frame: FrameSystem,
        y_frame: FrameSystem,
        lambdas: Vec<C64>,
    ) -> Result<Self> {
        check_geometry("solution frame", operator.domain(), x_frame.geometry())?;
        check_geometry("data frame", operator.range(), y_frame.geometry())?;
        if x_frame.len() != y_frame.len() || lambdas.len() != y_frame.len() {
            return Err(Error::Dimension(format!(
                "{} solution elements, {} data elements, {} lambdas",
                x_frame.len(),
                y_frame.len(),
                lambdas.len()
            )));
        }
        let astar_f = adjoint_columns(&operator, y_frame.elements());
        let w = operator.domain().cell_weight();
        let e = x_frame.elements();
        let mut link_residuals = Vec::with_capacity(lambdas.len());
        for (k, lam) in lambdas.iter().enumerate() {
            let (mut r, mut a) = (0.0, 0.0);
            for i in 0..e.nrows() {
                let af = astar_f[(i, k)];
                r += (e[(i, k)] * lam.conj() - af).norm_sqr();
                a += af.norm_sqr();
            }
            let (r, scale) = ((w * r).sqrt(), (w * a).sqrt().max(1.0));
            if r > LINK_TOL * scale {
                return Err(Error::Contract(format!(
                    "link relation fails for element {k}: residual {r:.3e}"
                )));
            }
            link_residuals.push(r);
        }
        Ok(Self {
            operator,
            x_frame,
            y_frame,
            lambdas,
            link_residuals,
        })
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.operator
    }

    pub fn x_frame(&self) -> &FrameSystem {
        &self.x_frame
    }

    pub fn x_frame_mut(&mut self) -> &mut FrameSystem {
        &mut self.x_frame
    }

    pub fn y_frame(&self) -> &FrameSystem {
        &self.y_frame
    }

    pub fn y_frame_mut(&mut self) -> &mut FrameSystem {
        &mut self.y_frame
    }

    pub fn link_residuals(&self) -> &[f64] {
        &self.link_residuals
    }
}

/// `A^* f_k` for every column `f_k` of `f`.
fn adjoint_columns(op: &DenseOperator, f: MatRef<'_, C64>) -> Mat<C64> {
    let a = op.entries();
    let re = Mat::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)].re);
    let im = Mat::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)].im);
    let c = faer::Scale(op.adjoint_scale());
    let ar = a.transpose() * &re * c;
    let ai = a.transpose() * &im * c;
    Mat::from_fn(a.ncols(), f.ncols(), |i, j| C64::new(ar[(i, j)], ai[(i, j)]))
}

/// Builds `e_k = alpha_k A^* f_k`, which gives `lambda_k = 1 / conj(alpha_k)`.
pub fn build_decomposition(
    operator: DenseOperator,
    y_frame: FrameSystem,
    alphas: &[C64],
    x_field: Field,
) -> Result<FrameDecomposition> {
    if alphas.len() != y_frame.len() {
        return Err(Error::Dimension(format!(
            "{} scalings for {} data frame elements",
            alphas.len(),
            y_frame.len()
        )));
    }
    if let Some(k) = alphas
        .iter()
        .position(|a| !(a.norm() > 0.0) || !a.re.is_finite() || !a.im.is_finite())
    {
        return Err(Error::Domain(format!("scaling {k} must be finite and nonzero")));
    }
    let mut e = adjoint_columns(&operator, y_frame.elements());
    for (k, a) in alphas.iter().enumerate() {
        e.col_mut(k).iter_mut().for_each(|z| *z *= a);
    }
    let x_frame = FrameSystem::new(e, operator.domain(), x_field)?;
    let lambdas = alphas.iter().map(|a| C64::new(1.0, 0.0) / a.conj()).collect();
    FrameDecomposition::from_parts(operator, x_frame, y_frame, lambdas)
}

impl Decomposition for FrameDecomposition {
    fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    fn x_geometry(&self) -> Geometry {
        self.x_frame.geometry()
    }

    fn y_geometry(&self) -> Geometry {
        self.y_frame.geometry()
    }

    fn analyze_y(&self, y: &GridFunction) -> Result<Vec<C64>> {
        self.y_frame.analyze(y)
    }

    fn synthesize_dual_x(&self, d: &[C64]) -> Result<GridFunction> {
        self.x_frame.synthesize_dual(d)
    }

    fn y_upper_bound(&self) -> Option<f64> {
        self.y_frame.bounds().map(|b| b.upper)
    }

    fn x_lower_bound(&self) -> Option<f64> {
        self.x_frame.bounds().map(|b| b.lower)
    }
}
