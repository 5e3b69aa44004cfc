//! Parallel-beam Radon transform on a pixel grid.
//!
//! Pixels cover `[-1,1]^2` and are indexed `ix + n * iy` with `iy = 0` at
//! `y = -1`. Angle `k` is `theta_k = k pi / n_theta`, detector `i` sits at
//! `s_i = -1 + (i + 1/2) 2/p`, and sinogram entries are ordered `k * p + i`.
//! The ray `(s, theta)` is `{s w + t w_perp}` with `w = (cos, sin)`; matrix
//! entries are the exact intersection lengths with each pixel.

use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DenseOperator, Geometry, LinearMap};
use crate::io;

/// Discretization of the tomography problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoGeometry {
    /// Image is `n x n` pixels.
    pub n: usize,
    /// Detector cells per angle.
    pub p: usize,
    /// Angles in `[0, pi)`.
    pub n_theta: usize,
}

impl TomoGeometry {
    pub fn new(n: usize, p: usize, n_theta: usize) -> Result<Self> {
        if n == 0 || p == 0 || n_theta == 0 {
            return Err(Error::Config(format!(
                "tomography geometry needs positive sizes, got n={n}, p={p}, n_theta={n_theta}"
            )));
        }
        Ok(Self { n, p, n_theta })
    }

    pub fn image(&self) -> Geometry {
        Geometry::Pixels { n: self.n }
    }

    pub fn sinogram(&self) -> Geometry {
        Geometry::Sinogram {
            p: self.p,
            n_theta: self.n_theta,
        }
    }

    pub fn extended(&self) -> Geometry {
        Geometry::ExtendedSinogram {
            p: self.p,
            n_theta: self.n_theta,
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|k| k as f64 * std::f64::consts::PI / self.n_theta as f64)
            .collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        let h = 2.0 / self.p as f64;
        (0..self.p).map(|i| -1.0 + (i as f64 + 0.5) * h).collect()
    }

    /// Pixel centres `(x, y)` in storage order.
    pub fn pixel_centres(&self) -> Vec<(f64, f64)> {
        let h = 2.0 / self.n as f64;
        (0..self.n * self.n)
            .map(|idx| {
                let (ix, iy) = (idx % self.n, idx / self.n);
                (-1.0 + (ix as f64 + 0.5) * h, -1.0 + (iy as f64 + 0.5) * h)
            })
            .collect()
    }
}

/// Direction components below this are treated as zero.
const AXIS_EPS: f64 = 1e-14;

/// Intersection lengths of one ray with the pixels, sorted by pixel index.
pub fn trace_ray(n: usize, s: f64, theta: f64) -> Vec<(u32, f64)> {
    let (c, sn) = (theta.cos(), theta.sin());
    let (x0, y0) = (s * c, s * sn);
    let (dx, dy) = (-sn, c);
    let mut t_in = f64::NEG_INFINITY;
    let mut t_out = f64::INFINITY;
    for (p0, d) in [(x0, dx), (y0, dy)] {
        if d.abs() < AXIS_EPS {
            if p0.abs() >= 1.0 {
                return Vec::new();
            }
        } else {
            let (a, b) = ((-1.0 - p0) / d, (1.0 - p0) / d);
            t_in = t_in.max(a.min(b));
            t_out = t_out.min(a.max(b));
        }
    }
    if !(t_out > t_in) {
        return Vec::new();
    }
    let h = 2.0 / n as f64;
    let mut ts = vec![t_in, t_out];
    for (p0, d) in [(x0, dx), (y0, dy)] {
        if d.abs() < AXIS_EPS {
            continue;
        }
        for k in 1..n {
            let t = (-1.0 + k as f64 * h - p0) / d;
            if t > t_in && t < t_out {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cell = |v: f64| (((v + 1.0) / h).floor().max(0.0) as usize).min(n - 1);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let idx = (cell(x0 + tm * dx) + n * cell(y0 + tm * dy)) as u32;
        out.push((idx, len));
    }
    out.sort_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(out.len());
    for (i, v) in out {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => merged.push((i, v)),
        }
    }
    merged
}

/// Sparse Radon matrix in compressed row storage.
#[derive(Clone, Debug)]
pub struct RadonOperator {
    geom: TomoGeometry,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl RadonOperator {
    /// Ray-traces every detector/angle pair.
    pub fn assemble(geom: TomoGeometry) -> Result<Self> {
        TomoGeometry::new(geom.n, geom.p, geom.n_theta)?;
        let angles = geom.angles();
        let offsets = geom.offsets();
        let rows: Vec<Vec<(u32, f64)>> = (0..geom.p * geom.n_theta)
            .into_par_iter()
            .map(|r| trace_ray(geom.n, offsets[r % geom.p], angles[r / geom.p]))
            .collect();
        Ok(Self::from_rows(geom, rows))
    }

    fn from_rows(geom: TomoGeometry, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            geom,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn geometry(&self) -> TomoGeometry {
        self.geom
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Nonzeros of row `r` as `(pixel, length)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// Column-wise copy: for each pixel, the rays it meets and the lengths.
    pub fn columns(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = vec![Vec::new(); self.geom.n * self.geom.n];
        for r in 0..self.rows() {
            for (c, v) in self.row(r) {
                out[c].push((r as u32, v));
            }
        }
        out
    }

    /// `out = A^T y` without the weight ratio.
    pub fn transpose_apply(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
    }

    pub fn to_dense(&self) -> DenseOperator {
        let mut m = Mat::<f64>::zeros(self.rows(), self.geom.n * self.geom.n);
        for r in 0..self.rows() {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        DenseOperator::new(m, self.geom.image(), self.geom.sinogram()).expect("assembled shapes match the geometry")
    }

    pub fn from_dense(geom: TomoGeometry, op: &DenseOperator) -> Result<Self> {
        if op.domain() != geom.image() || op.range() != geom.sinogram() {
            return Err(Error::Dimension(format!(
                "dense operator {:?} -> {:?} does not match {geom:?}",
                op.domain(),
                op.range()
            )));
        }
        let m = op.entries();
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter(|&c| m[(r, c)] != 0.0)
                    .map(|c| (c as u32, m[(r, c)]))
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(geom, rows))
    }

    /// Stores `meta.json` and the dense matrix `matrix.frm`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_json(
            &dir.join("meta.json"),
            &OperatorMeta {
                geometry: self.geom,
                nnz: self.nnz(),
            },
        )?;
        io::write_matrix(&dir.join("matrix.frm"), &self.to_dense().into_entries())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: OperatorMeta = io::read_json(&dir.join("meta.json"))?;
        let m = io::read_matrix(&dir.join("matrix.frm"))?;
        let g = meta.geometry;
        let op = DenseOperator::new(m, g.image(), g.sinogram()).map_err(|e| Error::Format {
            path: dir.join("matrix.frm"),
            reason: e.to_string(),
        })?;
        Self::from_dense(g, &op)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OperatorMeta {
    geometry: TomoGeometry,
    nnz: usize,
}

impl LinearMap for RadonOperator {
    fn domain(&self) -> Geometry {
        self.geom.image()
    }

    fn range(&self) -> Geometry {
        self.geom.sinogram()
    }

    fn apply_real(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    fn adjoint_real(&self, y: &[f64], out: &mut [f64]) {
        self.transpose_apply(y, out);
        let c = self.adjoint_scale();
        out.iter_mut().for_each(|v| *v *= c);
    }
}

/// Even continuation `y(-s, theta + pi) = y(s, theta)` to `2 n_theta` angles.
pub fn extend_even(p: usize, n_theta: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * p * n_theta];
    out[..p * n_theta].copy_from_slice(&y[..p * n_theta]);
    for k in 0..n_theta {
        for i in 0..p {
            out[(k + n_theta) * p + i] = y[k * p + (p - 1 - i)];
        }
    }
    out
}

/// Transpose of [`extend_even`] on plain coefficient vectors.
///
/// The weighted adjoint is half of this, since the extended grid has half
/// the native cell weight.
pub fn fold_even(p: usize, n_theta: usize, z: &[f64]) -> Vec<f64> {
    let mut out = z[..p * n_theta].to_vec();
    for k in 0..n_theta {
        for i in 0..p {
            out[k * p + (p - 1 - i)] += z[(k + n_theta) * p + i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_ray_through_centres() {
        let r = trace_ray(4, -0.25, 0.0);
        // theta = 0: vertical line x = -0.25 crosses the column ix = 1.
        assert_eq!(r.len(), 4);
        for (k, (idx, len)) in r.iter().enumerate() {
            assert_eq!(*idx as usize, 1 + 4 * k);
            assert!((len - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn row_sums_are_chord_lengths() {
        let g = TomoGeometry::new(9, 11, 7).unwrap();
        let a = RadonOperator::assemble(g).unwrap();
        for (k, &th) in g.angles().iter().enumerate() {
            for (i, &s) in g.offsets().iter().enumerate() {
                let total: f64 = a.row(k * g.p + i).map(|(_, v)| v).sum();
                // Chord of the square [-1,1]^2 along the ray.
                let (c, sn) = (th.cos(), th.sin());
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for (p0, d) in [(s * c, -sn), (s * sn, c)] {
                    if d.abs() > 1e-14 {
                        let (a, b) = ((-1.0 - p0) / d, (1.0 - p0) / d);
                        lo = lo.max(a.min(b));
                        hi = hi.min(a.max(b));
                    }
                }
                let chord = (hi - lo).max(0.0);
                assert!((total - chord).abs() < 1e-12, "angle {k} detector {i}");
            }
        }
    }

    #[test]
    fn fold_is_transpose_of_extend() {
        let (p, nt) = (5, 3);
        let y: Vec<f64> = (0..p * nt).map(|i| (i as f64).sin()).collect();
        let z: Vec<f64> = (0..2 * p * nt).map(|i| (i as f64 * 0.7).cos()).collect();
        let ey = extend_even(p, nt, &y);
        let fz = fold_even(p, nt, &z);
        let a: f64 = ey.iter().zip(&z).map(|(u, v)| u * v).sum();
        let b: f64 = y.iter().zip(&fz).map(|(u, v)| u * v).sum();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dense_round_trip() {
        let g = TomoGeometry::new(5, 6, 4).unwrap();
        let a = RadonOperator::assemble(g).unwrap();
        let b = RadonOperator::from_dense(g, &a.to_dense()).unwrap();
        assert_eq!(a.nnz(), b.nnz());
        assert_eq!(a.vals, b.vals);
    }
}
