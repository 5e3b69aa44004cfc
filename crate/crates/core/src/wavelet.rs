//! Daubechies scaling function and wavelet with four vanishing moments.
//!
//! Both are tabulated by the cascade algorithm on the dyadic grid
//! `2^{-depth} Z`: the scaling function on `[0, 7]`, the wavelet on `[-3, 4]`.
//! Off-grid points are linearly interpolated.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};

/// Lowpass filter of the 8-tap Daubechies wavelet, normalized to `sum = sqrt(2)`.
pub const DB4: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Tabulated scaling function and wavelet.
#[derive(Clone, Debug)]
pub struct Daubechies {
    depth: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

pub const SCALING_SUPPORT: (f64, f64) = (0.0, 7.0);
pub const WAVELET_SUPPORT: (f64, f64) = (-3.0, 4.0);

/// Highpass coefficient `g_j = (-1)^j h_{1-j}` for `j` in `-6..=1`.
fn highpass(j: i64) -> f64 {
    let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * DB4[(1 - j) as usize]
}

impl Daubechies {
    /// Runs the cascade to `depth` dyadic refinements.
    pub fn sample(depth: u32) -> Result<Self> {
        if !(1..=20).contains(&depth) {
            return Err(Error::Config(format!("cascade depth {depth} outside 1..=20")));
        }
        let r2 = std::f64::consts::SQRT_2;
        // Integer values: phi(k) = sqrt(2) sum_j h_j phi(2k - j), sum phi(k) = 1.
        let m = 8;
        let mut sys = Mat::<f64>::zeros(m, m);
        for k in 0..m {
            for i in 0..m {
                let j = 2 * k as i64 - i as i64;
                if (0..8).contains(&j) {
                    sys[(k, i)] = r2 * DB4[j as usize];
                }
            }
            sys[(k, k)] -= 1.0;
        }
        for i in 0..m {
            sys[(m - 1, i)] = 1.0;
        }
        let mut rhs = Mat::<f64>::zeros(m, 1);
        rhs[(m - 1, 0)] = 1.0;
        let ints = sys.full_piv_lu().solve(&rhs);

        let scale = 1usize << depth;
        let len = 7 * scale + 1;
        let mut phi = vec![0.0; len];
        for k in 0..8 {
            if k * scale < len {
                phi[k * scale] = ints[(k, 0)];
            }
        }
        phi[0] = 0.0;
        phi[len - 1] = 0.0;
        for level in 1..=depth {
            let step = scale >> level;
            let mut idx = step;
            while idx < len {
                let mut acc = 0.0;
                for (j, h) in DB4.iter().enumerate() {
                    let t = 2 * idx as i64 - (j * scale) as i64;
                    if t >= 0 && (t as usize) < len {
                        acc += h * phi[t as usize];
                    }
                }
                phi[idx] = r2 * acc;
                idx += 2 * step;
            }
        }

        // psi(x) = sqrt(2) sum_j g_j phi(2x - j), x = -3 + idx / scale.
        let mut psi = vec![0.0; len];
        for (idx, v) in psi.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in -6i64..=1 {
                let t = 2 * idx as i64 - (6 + j) * scale as i64;
                if t >= 0 && (t as usize) < len {
                    acc += highpass(j) * phi[t as usize];
                }
            }
            *v = r2 * acc;
        }
        Ok(Self { depth, phi, psi })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    fn lookup(table: &[f64], depth: u32, x: f64, start: f64) -> f64 {
        let scale = (1u64 << depth) as f64;
        let t = (x - start) * scale;
        if !(t > 0.0) || t >= (table.len() - 1) as f64 {
            return 0.0;
        }
        let i = t.floor() as usize;
        let f = t - i as f64;
        table[i] * (1.0 - f) + table[i + 1] * f
    }

    /// Scaling function at `x`.
    pub fn phi(&self, x: f64) -> f64 {
        Self::lookup(&self.phi, self.depth, x, SCALING_SUPPORT.0)
    }

    /// Wavelet at `x`.
    pub fn psi(&self, x: f64) -> f64 {
        Self::lookup(&self.psi, self.depth, x, WAVELET_SUPPORT.0)
    }

    /// Grid values of the scaling function on `[0, 7]`, step `2^-depth`.
    pub fn phi_table(&self) -> &[f64] {
        &self.phi
    }

    /// Grid values of the wavelet on `[-3, 4]`, step `2^-depth`.
    pub fn psi_table(&self) -> &[f64] {
        &self.psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_identities() {
        let s: f64 = DB4.iter().sum();
        assert!((s - std::f64::consts::SQRT_2).abs() < 1e-12);
        let e: f64 = DB4.iter().map(|h| h * h).sum();
        assert!((e - 1.0).abs() < 1e-12);
        for m in 1..4 {
            let c: f64 = (0..8 - 2 * m).map(|k| DB4[k] * DB4[k + 2 * m]).sum();
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn cascade_is_orthonormal() {
        let d = Daubechies::sample(10).unwrap();
        let h = 1.0 / 1024.0;
        let phi = d.phi_table();
        let psi = d.psi_table();
        let nphi: f64 = phi.iter().map(|v| v * v).sum::<f64>() * h;
        let npsi: f64 = psi.iter().map(|v| v * v).sum::<f64>() * h;
        assert!((nphi - 1.0).abs() < 1e-3, "{nphi}");
        assert!((npsi - 1.0).abs() < 1e-3, "{npsi}");
        let mass: f64 = phi.iter().sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-6);
        // <phi, psi(. - k)> on the common dyadic grid.
        for k in -6i64..=6 {
            let mut acc = 0.0;
            for (i, v) in phi.iter().enumerate() {
                let x = i as f64 * h;
                acc += v * d.psi(x - k as f64);
            }
            assert!((acc * h).abs() < 2e-3, "shift {k}: {}", acc * h);
        }
    }
}
