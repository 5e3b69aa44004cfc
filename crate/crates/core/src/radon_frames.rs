//! Frame decompositions of the Radon transform.
//!
//! The data frame lives on the evenly extended sinogram (angles in
//! `[0, 2 pi)`) and is a tensor product `f_{a,l}(s, phi) = u_a(s) v_l(phi)`
//! of detector functions `u_a` (Daubechies wavelets or complex exponentials)
//! and angular exponentials `v_l = e^{i l phi} / sqrt(2 pi)`. The solution
//! frame is `e_k = A^* f_k / lambda_k`, never stored element by element: its
//! frame operator is assembled from the tensor structure and the dual frame
//! is kept as the map `G` with `dual_k = G e_k`.

use std::path::Path;
use std::sync::Arc;

use faer::{Mat, MatRef, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{
    bounds_from_operator_capped, explicit_dual, recursive_dual, symmetrize, Decomposition, DualFrame, DualMeta,
    DualMethod, Field, FrameBounds, FrameSystem,
};
use crate::hilbert::{Geometry, GridFunction, LinearMap, C64};
use crate::io;
use crate::radon::{extend_even, fold_even, RadonOperator, TomoGeometry};
use crate::wavelet::{Daubechies, SCALING_SUPPORT, WAVELET_SUPPORT};

fn default_j_max() -> i64 {
    3
}

fn default_depth() -> u32 {
    10
}

/// Daubechies detector functions at levels `j_min..=j_max` plus scaling
/// functions at the coarsest level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletConfig {
    #[serde(default)]
    pub j_min: i64,
    #[serde(default = "default_j_max")]
    pub j_max: i64,
    /// Number of angular modes `L`; defaults to `n_theta`.
    #[serde(default)]
    pub angular_modes: Option<usize>,
    /// Angular modes are `first_mode .. first_mode + L`.
    #[serde(default)]
    pub first_mode: i64,
    /// Sobolev smoothing index of the Radon transform.
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_depth")]
    pub cascade_depth: u32,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            j_min: 0,
            j_max: default_j_max(),
            angular_modes: None,
            first_mode: 0,
            beta: 0.0,
            cascade_depth: default_depth(),
        }
    }
}

/// Complex exponential detector functions `e^{i j pi s} / sqrt(2)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpConfig {
    /// Defaults to `-floor(p/2)`.
    #[serde(default)]
    pub j_min: Option<i64>,
    /// Defaults to `ceil(p/2) - 1`.
    #[serde(default)]
    pub j_max: Option<i64>,
    #[serde(default)]
    pub angular_modes: Option<usize>,
    #[serde(default)]
    pub first_mode: i64,
    #[serde(default)]
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrameConfig {
    Wavelet(WaveletConfig),
    Exponential(ExpConfig),
}

impl FrameConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FrameConfig::Wavelet(_) => "wavelet",
            FrameConfig::Exponential(_) => "exponential",
        }
    }
}

/// Unit in which the explicit dual's Tikhonov parameter is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaUnits {
    /// Applied to the frame operator in quadrature-weighted coordinates.
    Quadrature,
    /// Applied to the frame operator built with plain sums over pixels,
    /// i.e. `alpha * w_X^2` in quadrature coordinates.
    #[default]
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum DualConfig {
    Explicit {
        alpha: f64,
        #[serde(default)]
        units: AlphaUnits,
    },
    /// Relaxation sum defaults to `B1 + B2` of the estimated bounds.
    Recursive {
        #[serde(default)]
        relaxation_sum: Option<f64>,
        iterations: usize,
    },
}

/// Label of a detector function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorLabel {
    /// `true` for scaling functions.
    pub scaling: bool,
    pub j: i64,
    pub k: i64,
}

/// Tensor-product frame on the extended sinogram.
#[derive(Clone, Debug)]
pub struct TensorFrame {
    p: usize,
    n_theta: usize,
    psi_r: Mat<f64>,
    psi_i: Mat<f64>,
    phi_r: Mat<f64>,
    phi_i: Mat<f64>,
    s_lambdas: Vec<f64>,
    labels: Vec<DetectorLabel>,
    modes: Vec<i64>,
}

impl TensorFrame {
    pub fn build(geom: TomoGeometry, config: &FrameConfig) -> Result<Self> {
        let (p, nt) = (geom.p, geom.n_theta);
        let (angular_modes, first_mode) = match config {
            FrameConfig::Wavelet(c) => (c.angular_modes, c.first_mode),
            FrameConfig::Exponential(c) => (c.angular_modes, c.first_mode),
        };
        let l = angular_modes.unwrap_or(nt);
        if l == 0 {
            return Err(Error::Config("angular_modes must be positive".into()));
        }
        let modes: Vec<i64> = (0..l as i64).map(|i| first_mode + i).collect();
        let na = 2 * nt;
        let c_ang = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let angle = |n: usize| n as f64 * std::f64::consts::PI / nt as f64;
        let phi_r = Mat::from_fn(na, l, |n, j| c_ang * (modes[j] as f64 * angle(n)).cos());
        let phi_i = Mat::from_fn(na, l, |n, j| c_ang * (modes[j] as f64 * angle(n)).sin());

        let offsets = geom.offsets();
        let (psi_r, psi_i, s_lambdas, labels) = match config {
            FrameConfig::Exponential(c) => {
                let j_min = c.j_min.unwrap_or(-((p / 2) as i64));
                let j_max = c.j_max.unwrap_or((p as i64 + 1) / 2 - 1);
                if j_max < j_min {
                    return Err(Error::Config(format!("empty frequency range {j_min}..={j_max}")));
                }
                let js: Vec<i64> = (j_min..=j_max).collect();
                let c0 = std::f64::consts::FRAC_1_SQRT_2;
                let pr = Mat::from_fn(p, js.len(), |i, a| {
                    c0 * (js[a] as f64 * std::f64::consts::PI * offsets[i]).cos()
                });
                let pi = Mat::from_fn(p, js.len(), |i, a| {
                    c0 * (js[a] as f64 * std::f64::consts::PI * offsets[i]).sin()
                });
                let lam = js
                    .iter()
                    .map(|&j| (1.0 + (j * j) as f64).powf(-(c.beta + 0.5) / 2.0))
                    .collect();
                let labels = js
                    .iter()
                    .map(|&j| DetectorLabel {
                        scaling: false,
                        j,
                        k: 0,
                    })
                    .collect();
                (pr, pi, lam, labels)
            }
            FrameConfig::Wavelet(c) => {
                if c.j_max < c.j_min {
                    return Err(Error::Config(format!("empty level range {}..={}", c.j_min, c.j_max)));
                }
                let db = Daubechies::sample(c.cascade_depth)?;
                // Detector variable in cell units: u = (s + 1) / h, cells are [i, i+1].
                let h = 2.0 / p as f64;
                let mut cols: Vec<Vec<f64>> = Vec::new();
                let mut lam = Vec::new();
                let mut labels = Vec::new();
                let level_lambda = |j: i64| (1.0 + 2f64.powf(-2.0 * j as f64 * (c.beta + 0.5))).powf(-0.5);
                let mut push = |scaling: bool, j: i64, lambda: f64| {
                    let (lo, hi) = if scaling { SCALING_SUPPORT } else { WAVELET_SUPPORT };
                    let d = 2f64.powi(j as i32);
                    // Keep k whose support (d(lo + k), d(hi + k)) meets (0, p).
                    let k_min = (-hi).floor() as i64;
                    let k_max = (p as f64 / d - lo).ceil() as i64;
                    for k in k_min..=k_max {
                        let (a, b) = (d * (lo + k as f64), d * (hi + k as f64));
                        if !(b > 0.0 && a < p as f64) {
                            continue;
                        }
                        let amp = 1.0 / (h.sqrt() * d.sqrt());
                        let col: Vec<f64> = (0..p)
                            .map(|i| {
                                let x = (i as f64 + 0.5) / d - k as f64;
                                amp * if scaling { db.phi(x) } else { db.psi(x) }
                            })
                            .collect();
                        cols.push(col);
                        lam.push(lambda);
                        labels.push(DetectorLabel { scaling, j, k });
                    }
                };
                for j in c.j_min..=c.j_max {
                    push(false, j, level_lambda(j));
                }
                push(true, c.j_max, level_lambda(c.j_max));
                let ks = cols.len();
                let pr = Mat::from_fn(p, ks, |i, a| cols[a][i]);
                (pr, Mat::zeros(p, ks), lam, labels)
            }
        };
        Ok(Self {
            p,
            n_theta: nt,
            psi_r,
            psi_i,
            phi_r,
            phi_i,
            s_lambdas,
            labels,
            modes,
        })
    }

    /// Number of detector functions.
    pub fn detector_count(&self) -> usize {
        self.psi_r.ncols()
    }

    pub fn angular_count(&self) -> usize {
        self.modes.len()
    }

    pub fn len(&self) -> usize {
        self.detector_count() * self.angular_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[DetectorLabel] {
        &self.labels
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    /// Frame index of detector function `a` and angular mode index `l`.
    pub fn index(&self, a: usize, l: usize) -> usize {
        a * self.angular_count() + l
    }

    /// `lambda_k` for every frame index.
    pub fn lambdas(&self) -> Vec<C64> {
        let l = self.angular_count();
        self.s_lambdas
            .iter()
            .flat_map(|&v| std::iter::repeat_n(C64::new(v, 0.0), l))
            .collect()
    }

    fn weight(&self) -> f64 {
        Geometry::ExtendedSinogram {
            p: self.p,
            n_theta: self.n_theta,
        }
        .cell_weight()
    }

    /// `<u, f_k>` for a real function on the extended grid.
    pub fn analyze_ext(&self, u: &[f64]) -> Vec<C64> {
        let um = MatRef::from_column_major_slice(u, self.p, 2 * self.n_theta);
        let a = self.psi_r.transpose() * um;
        let b = self.psi_i.transpose() * um;
        let cr = &a * &self.phi_r - &b * &self.phi_i;
        let ci = &a * &self.phi_i + &b * &self.phi_r;
        let w = self.weight();
        let (ks, l) = (self.detector_count(), self.angular_count());
        let mut out = vec![C64::new(0.0, 0.0); ks * l];
        for a in 0..ks {
            for j in 0..l {
                out[a * l + j] = C64::new(w * cr[(a, j)], -w * ci[(a, j)]);
            }
        }
        out
    }

    /// Real and imaginary parts of `sum_k d_k f_k` on the extended grid.
    pub fn synthesize_ext(&self, d: &[C64]) -> (Vec<f64>, Vec<f64>) {
        let (ks, l) = (self.detector_count(), self.angular_count());
        let dr = Mat::from_fn(ks, l, |a, j| d[a * l + j].re);
        let di = Mat::from_fn(ks, l, |a, j| d[a * l + j].im);
        let pm = &self.psi_r * &dr - &self.psi_i * &di;
        let qm = &self.psi_r * &di + &self.psi_i * &dr;
        let re = &pm * self.phi_r.transpose() - &qm * self.phi_i.transpose();
        let im = &pm * self.phi_i.transpose() + &qm * self.phi_r.transpose();
        (to_column_major(&re), to_column_major(&im))
    }

    /// Element `k` on the extended grid.
    pub fn element(&self, k: usize) -> Vec<C64> {
        let l = self.angular_count();
        let (a, j) = (k / l, k % l);
        let na = 2 * self.n_theta;
        let mut out = Vec::with_capacity(self.p * na);
        for n in 0..na {
            let v = C64::new(self.phi_r[(n, j)], self.phi_i[(n, j)]);
            for i in 0..self.p {
                out.push(C64::new(self.psi_r[(i, a)], self.psi_i[(i, a)]) * v);
            }
        }
        out
    }

    /// `sum_a weights_a u_a u_a^H` split into real and imaginary parts.
    fn detector_kernel(&self, weights: &[f64]) -> (Mat<f64>, Mat<f64>) {
        let ks = self.detector_count();
        let wr = Mat::from_fn(self.p, ks, |i, a| weights[a] * self.psi_r[(i, a)]);
        let wi = Mat::from_fn(self.p, ks, |i, a| weights[a] * self.psi_i[(i, a)]);
        let kr = &wr * self.psi_r.transpose() + &wi * self.psi_i.transpose();
        let ki = &wi * self.psi_r.transpose() - &wr * self.psi_i.transpose();
        (kr, ki)
    }

    /// `Q(n', n) = sum_l conj(v_l(n')) v_l(n)` split into real and imaginary parts.
    fn angular_kernel(&self) -> (Mat<f64>, Mat<f64>) {
        let qr = &self.phi_r * self.phi_r.transpose() + &self.phi_i * self.phi_i.transpose();
        let qi = &self.phi_r * self.phi_i.transpose() - &self.phi_i * self.phi_r.transpose();
        (qr, qi)
    }

    /// Upper frame bound of the data frame on the extended sinogram.
    ///
    /// Product of the spectral norms of the detector and angular kernels,
    /// which bounds the real-part frame operator from above.
    pub fn upper_bound(&self) -> Result<f64> {
        let ones = vec![1.0; self.detector_count()];
        let (kr, ki) = self.detector_kernel(&ones);
        let (qr, qi) = self.angular_kernel();
        Ok(self.weight() * hermitian_norm(&kr, &ki)? * hermitian_norm(&qr, &qi)?)
    }

    /// The data frame as an explicit [`FrameSystem`] (small geometries only).
    pub fn to_frame_system(&self) -> Result<FrameSystem> {
        let g = Geometry::ExtendedSinogram {
            p: self.p,
            n_theta: self.n_theta,
        };
        let mut e = Mat::<C64>::zeros(g.len(), self.len());
        for k in 0..self.len() {
            for (i, v) in self.element(k).into_iter().enumerate() {
                e[(i, k)] = v;
            }
        }
        FrameSystem::new(e, g, Field::Real)
    }
}

fn to_column_major(m: &Mat<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        out.extend(m.col(j).iter());
    }
    out
}

fn hermitian_norm(re: &Mat<f64>, im: &Mat<f64>) -> Result<f64> {
    let h = Mat::from_fn(re.nrows(), re.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]));
    let ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
    Ok(ev.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Frame decomposition of the Radon transform with a tensor-product data frame.
#[derive(Clone, Debug)]
pub struct RadonFrameDecomposition {
    config: FrameConfig,
    operator: Arc<RadonOperator>,
    frame: TensorFrame,
    lambdas: Vec<C64>,
    frame_operator: Mat<f64>,
    bounds: FrameBounds,
    y_upper: f64,
    dual: Option<DualFrame>,
}

/// Iteration cap for power iteration on the assembled frame operator
/// before the dense eigensolver takes over.
const BOUNDS_POWER_CAP: usize = 300;

impl RadonFrameDecomposition {
    /// Builds the data frame, the solution frame operator and its bounds.
    pub fn build(operator: Arc<RadonOperator>, config: FrameConfig) -> Result<Self> {
        let geom = operator.geometry();
        let frame = TensorFrame::build(geom, &config)?;
        let lambdas = frame.lambdas();
        let frame_operator = structured_frame_operator(&operator, &frame)?;
        let bounds = bounds_from_operator_capped(&frame_operator, geom.image(), BOUNDS_POWER_CAP)?;
        let y_upper = frame.upper_bound()?;
        Ok(Self {
            config,
            operator,
            frame,
            lambdas,
            frame_operator,
            bounds,
            y_upper,
            dual: None,
        })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn operator(&self) -> &Arc<RadonOperator> {
        &self.operator
    }

    pub fn tensor_frame(&self) -> &TensorFrame {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Frame operator of the solution frame in pixel coordinates.
    pub fn frame_operator(&self) -> &Mat<f64> {
        &self.frame_operator
    }

    pub fn bounds(&self) -> FrameBounds {
        self.bounds
    }

    pub fn dual(&self) -> Option<&DualFrame> {
        self.dual.as_ref()
    }

    fn image_weight(&self) -> f64 {
        self.operator.geometry().image().cell_weight()
    }

    /// Computes the dual of the solution frame.
    pub fn compute_dual(&mut self, cfg: &DualConfig) -> Result<&DualFrame> {
        let s = self.frame_operator.as_ref();
        let d = match *cfg {
            DualConfig::Explicit { alpha, units } => {
                let a = match units {
                    AlphaUnits::Quadrature => alpha,
                    AlphaUnits::Plain => alpha * self.image_weight().powi(2),
                };
                let mut d = explicit_dual(s, a)?;
                d = DualFrame::new(d.map().to_owned(), d.tol_dual(), DualMethod::Explicit { alpha })?;
                d
            }
            DualConfig::Recursive {
                relaxation_sum,
                iterations,
            } => {
                let r = relaxation_sum.unwrap_or(self.bounds.lower + self.bounds.upper);
                recursive_dual(s, r, iterations, Some(self.bounds))?
            }
        };
        self.dual = Some(d);
        Ok(self.dual.as_ref().unwrap())
    }

    fn require_dual(&self) -> Result<&DualFrame> {
        self.dual
            .as_ref()
            .ok_or_else(|| Error::Contract("dual frame has not been computed".into()))
    }

    /// `A_ext^* v` for a real function on the extended grid.
    fn adjoint_ext(&self, v: &[f64]) -> Vec<f64> {
        let g = self.operator.geometry();
        let folded = fold_even(g.p, g.n_theta, v);
        let mut out = vec![0.0; g.n * g.n];
        self.operator.transpose_apply(&folded, &mut out);
        let c = 0.5 * g.sinogram().cell_weight() / g.image().cell_weight();
        out.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// Solution frame element `e_k = A^* f_k / lambda_k`.
    pub fn x_element(&self, k: usize) -> GridFunction {
        let f = self.frame.element(k);
        let re = self.adjoint_ext(&f.iter().map(|z| z.re).collect::<Vec<_>>());
        let im = self.adjoint_ext(&f.iter().map(|z| z.im).collect::<Vec<_>>());
        let lam = self.lambdas[k].re;
        GridFunction::new(
            self.operator.geometry().image(),
            re.into_iter()
                .zip(im)
                .map(|(a, b)| C64::new(a / lam, b / lam))
                .collect(),
        )
        .expect("sizes follow the geometry")
    }

    /// The solution frame as an explicit [`FrameSystem`] (small geometries only).
    pub fn x_frame_system(&self) -> Result<FrameSystem> {
        let g = self.operator.geometry().image();
        let mut e = Mat::<C64>::zeros(g.len(), self.len());
        for k in 0..self.len() {
            for (i, v) in self.x_element(k).values().iter().enumerate() {
                e[(i, k)] = *v;
            }
        }
        let mut f = FrameSystem::new(e, g, Field::Real)?;
        if let Some(d) = &self.dual {
            f.set_dual(d.clone())?;
        }
        Ok(f)
    }

    /// `|| conj(lambda_k) e_k - A^* f_k ||` for the given indices, with `A^*`
    /// taken through the weighted adjoint of the native operator.
    pub fn link_residuals(&self, indices: &[usize]) -> Result<Vec<f64>> {
        let g = self.operator.geometry();
        indices
            .iter()
            .map(|&k| {
                let f = self.frame.element(k);
                let fold = |part: fn(&C64) -> f64| {
                    fold_even(g.p, g.n_theta, &f.iter().map(part).collect::<Vec<_>>())
                        .into_iter()
                        .map(|v| 0.5 * v)
                        .collect::<Vec<f64>>()
                };
                let (fr, fi) = (fold(|z| z.re), fold(|z| z.im));
                let native = GridFunction::new(
                    g.sinogram(),
                    fr.into_iter().zip(fi).map(|(a, b)| C64::new(a, b)).collect(),
                )?;
                let astar = self.operator.adjoint(&native)?;
                let lhs = self.x_element(k).scaled(self.lambdas[k].conj());
                Ok(lhs.sub(&astar)?.norm())
            })
            .collect()
    }

    /// Evenly spaced sample of frame indices, at most `count`.
    pub fn sample_indices(&self, count: usize) -> Vec<usize> {
        let n = self.len();
        let step = n.div_ceil(count.max(1)).max(1);
        (0..n).step_by(step).collect()
    }

    /// Dual synthesis together with the norm of the discarded imaginary part.
    pub fn synthesize_dual_x_with_imag(&self, d: &[C64]) -> Result<(GridFunction, f64)> {
        let g = self.require_dual()?;
        if d.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} frame elements",
                d.len(),
                self.len()
            )));
        }
        let scaled: Vec<C64> = d
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| if l.norm() > 0.0 { c / l } else { C64::new(0.0, 0.0) })
            .collect();
        let (re, im) = self.frame.synthesize_ext(&scaled);
        let xr = g.apply(&self.adjoint_ext(&re));
        let xi = g.apply(&self.adjoint_ext(&im));
        let geom = self.operator.geometry().image();
        let imag = GridFunction::from_real(geom, &xi)?.norm();
        Ok((GridFunction::from_real(geom, &xr)?, imag))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = RadonFrameMeta {
            kind: "radon_tensor".into(),
            config: self.config.clone(),
            geometry: self.operator.geometry(),
            count: self.len(),
            detector_functions: self.frame.detector_count(),
            bounds: self.bounds,
            y_upper_bound: self.y_upper,
            dual: self.dual.as_ref().map(|d| DualMeta {
                method: d.method(),
                tol_dual: d.tol_dual(),
            }),
        };
        io::write_json(&dir.join("meta.json"), &meta)?;
        io::write_complex_vector(&dir.join("lambdas.frv"), &self.lambdas)?;
        io::write_matrix(&dir.join("frame_operator.frm"), &self.frame_operator)?;
        if let Some(d) = &self.dual {
            io::write_matrix(&dir.join("dual_map.frm"), &d.map().to_owned())?;
        }
        Ok(())
    }

    /// Loads a saved decomposition; the operator must match the stored geometry.
    pub fn load(dir: &Path, operator: Arc<RadonOperator>) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let meta: RadonFrameMeta = io::read_json(&meta_path)?;
        let bad = |reason: String| Error::Format {
            path: meta_path.clone(),
            reason,
        };
        if meta.kind != "radon_tensor" {
            return Err(bad(format!("frame kind {:?}", meta.kind)));
        }
        if meta.geometry != operator.geometry() {
            return Err(bad(format!(
                "frame built for {:?}, operator is {:?}",
                meta.geometry,
                operator.geometry()
            )));
        }
        let frame = TensorFrame::build(meta.geometry, &meta.config)?;
        let lambdas = io::read_vector(&dir.join("lambdas.frv"))?;
        if lambdas.len() != frame.len() || lambdas.len() != meta.count {
            return Err(bad("lambda count does not match the frame".into()));
        }
        let frame_operator = io::read_matrix(&dir.join("frame_operator.frm"))?;
        let dual = match meta.dual {
            Some(d) => Some(DualFrame::new(
                io::read_matrix(&dir.join("dual_map.frm"))?,
                d.tol_dual,
                d.method,
            )?),
            None => None,
        };
        Ok(Self {
            config: meta.config,
            operator,
            frame,
            lambdas,
            frame_operator,
            bounds: meta.bounds,
            y_upper: meta.y_upper_bound,
            dual,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RadonFrameMeta {
    kind: String,
    config: FrameConfig,
    geometry: TomoGeometry,
    count: usize,
    detector_functions: usize,
    bounds: FrameBounds,
    y_upper_bound: f64,
    dual: Option<DualMeta>,
}

/// `S = A_ext^* W A_ext` with `W u = Re sum_k lambda_k^{-2} <u, f_k> f_k`,
/// one pixel column at a time.
fn structured_frame_operator(op: &RadonOperator, frame: &TensorFrame) -> Result<Mat<f64>> {
    let g = op.geometry();
    let (p, nt) = (g.p, g.n_theta);
    let inv_sq: Vec<f64> = frame.s_lambdas.iter().map(|l| 1.0 / (l * l)).collect();
    let (pr, pi) = frame.detector_kernel(&inv_sq);
    let (qr, qi) = frame.angular_kernel();
    let w = frame.weight();
    let c = 0.5 * g.sinogram().cell_weight() / g.image().cell_weight();
    let cols = op.columns();
    let npix = g.n * g.n;
    let columns: Vec<Vec<f64>> = (0..npix)
        .into_par_iter()
        .map(|j| {
            let mut native = vec![0.0; p * nt];
            for &(r, v) in &cols[j] {
                native[r as usize] = v;
            }
            let ext = extend_even(p, nt, &native);
            let u = MatRef::from_column_major_slice(&ext, p, 2 * nt);
            let t1 = &pr * u;
            let t2 = &pi * u;
            let r = &t1 * &qr - &t2 * &qi;
            let folded = fold_even(p, nt, &to_column_major(&r));
            let mut out = vec![0.0; npix];
            op.transpose_apply(&folded, &mut out);
            out.iter_mut().for_each(|x| *x *= w * c);
            out
        })
        .collect();
    let mut s = Mat::from_fn(npix, npix, |i, j| columns[j][i]);
    drop(columns);
    symmetrize(&mut s);
    Ok(s)
}

impl Decomposition for RadonFrameDecomposition {
    fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    fn x_geometry(&self) -> Geometry {
        self.operator.geometry().image()
    }

    fn y_geometry(&self) -> Geometry {
        self.operator.geometry().sinogram()
    }

    fn analyze_y(&self, y: &GridFunction) -> Result<Vec<C64>> {
        crate::hilbert::check_geometry("data", self.y_geometry(), y.geometry())?;
        let g = self.operator.geometry();
        let mut out = self.frame.analyze_ext(&extend_even(g.p, g.n_theta, &y.real_values()));
        if y.values().iter().any(|v| v.im != 0.0) {
            let im = self.frame.analyze_ext(&extend_even(g.p, g.n_theta, &y.imag_values()));
            for (o, v) in out.iter_mut().zip(im) {
                *o += C64::new(0.0, 1.0) * v;
            }
        }
        Ok(out)
    }

    fn synthesize_dual_x(&self, d: &[C64]) -> Result<GridFunction> {
        self.synthesize_dual_x_with_imag(d).map(|(x, _)| x)
    }

    fn y_upper_bound(&self) -> Option<f64> {
        Some(self.y_upper)
    }

    fn x_lower_bound(&self) -> Option<f64> {
        Some(self.bounds.lower)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Arc<RadonOperator> {
        Arc::new(RadonOperator::assemble(TomoGeometry::new(6, 10, 9).unwrap()).unwrap())
    }

    #[test]
    fn exponential_detector_functions_are_orthonormal() {
        let g = TomoGeometry::new(4, 10, 6).unwrap();
        let f = TensorFrame::build(g, &FrameConfig::Exponential(ExpConfig::default())).unwrap();
        assert_eq!(f.detector_count(), 10);
        let sys = f.to_frame_system().unwrap();
        for a in [0usize, 3, 17, 40] {
            for b in [0usize, 3, 17, 40] {
                let v = sys.element(a).inner(&sys.element(b)).unwrap();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((v - C64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn analysis_matches_explicit_frame() {
        let g = TomoGeometry::new(4, 8, 5).unwrap();
        for cfg in [
            FrameConfig::Exponential(ExpConfig::default()),
            FrameConfig::Wavelet(WaveletConfig {
                j_max: 1,
                cascade_depth: 8,
                ..Default::default()
            }),
        ] {
            let f = TensorFrame::build(g, &cfg).unwrap();
            let sys = f.to_frame_system().unwrap();
            let u: Vec<f64> = (0..g.extended().len()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
            let direct = sys
                .analyze(&GridFunction::from_real(g.extended(), &u).unwrap())
                .unwrap();
            let fast = f.analyze_ext(&u);
            for (a, b) in direct.iter().zip(&fast) {
                assert!((a - b).norm() < 1e-12);
            }
            let d: Vec<C64> = (0..f.len())
                .map(|k| C64::new((k % 5) as f64, (k % 3) as f64 - 1.0))
                .collect();
            let (re, im) = f.synthesize_ext(&d);
            let mut acc = vec![C64::new(0.0, 0.0); g.extended().len()];
            for (k, dk) in d.iter().enumerate() {
                for (o, e) in acc.iter_mut().zip(f.element(k)) {
                    *o += dk * e;
                }
            }
            for i in 0..acc.len() {
                assert!((acc[i].re - re[i]).abs() < 1e-12 && (acc[i].im - im[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn structured_operator_matches_explicit_elements() {
        for cfg in [
            FrameConfig::Exponential(ExpConfig::default()),
            FrameConfig::Wavelet(WaveletConfig {
                j_max: 1,
                cascade_depth: 8,
                ..Default::default()
            }),
        ] {
            let fd = RadonFrameDecomposition::build(small(), cfg).unwrap();
            let explicit = fd.x_frame_system().unwrap().frame_operator_matrix();
            let s = fd.frame_operator();
            let scale = crate::hilbert::max_abs(s.as_ref());
            for i in 0..s.nrows() {
                for j in 0..s.ncols() {
                    assert!((s[(i, j)] - explicit[(i, j)]).abs() < 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn link_relation_holds() {
        let fd = RadonFrameDecomposition::build(small(), FrameConfig::Exponential(ExpConfig::default())).unwrap();
        let idx: Vec<usize> = (0..fd.len()).collect();
        let res = fd.link_residuals(&idx).unwrap();
        assert!(
            res.iter().all(|&r| r < 1e-12),
            "{:?}",
            res.iter().cloned().fold(0.0, f64::max)
        );
    }

    #[test]
    fn dual_synthesis_matches_explicit_frame() {
        let mut fd = RadonFrameDecomposition::build(small(), FrameConfig::Exponential(ExpConfig::default())).unwrap();
        fd.compute_dual(&DualConfig::Explicit {
            alpha: 0.0,
            units: AlphaUnits::Quadrature,
        })
        .unwrap();
        let sys = fd.x_frame_system().unwrap();
        let d: Vec<C64> = (0..fd.len())
            .map(|k| C64::new(((k * 13) % 7) as f64 - 3.0, ((k * 5) % 4) as f64))
            .collect();
        let a = fd.synthesize_dual_x(&d).unwrap();
        let b = sys.synthesize_dual(&d).unwrap();
        assert!(a.sub(&b).unwrap().norm() < 1e-9 * b.norm().max(1.0));
        // Canonical dual reconstructs any image from its frame coefficients.
        let x = GridFunction::from_real(
            fd.x_geometry(),
            &(0..36).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>(),
        )
        .unwrap();
        let r = sys.reconstruct(&x).unwrap();
        assert!(r.sub(&x).unwrap().norm() < 1e-8 * x.norm());
    }

    #[test]
    fn save_and_load_round_trip() {
        let op = small();
        let mut fd =
            RadonFrameDecomposition::build(op.clone(), FrameConfig::Exponential(ExpConfig::default())).unwrap();
        fd.compute_dual(&DualConfig::Recursive {
            relaxation_sum: None,
            iterations: 5,
        })
        .unwrap();
        let dir = std::env::temp_dir().join(format!("framereg-rfd-{}", std::process::id()));
        fd.save(&dir).unwrap();
        let back = RadonFrameDecomposition::load(&dir, op).unwrap();
        assert_eq!(back.len(), fd.len());
        assert_eq!(back.dual().unwrap().tol_dual(), fd.dual().unwrap().tol_dual());
    }
}
