//! Second-moment evaluation of the loss.
//!
//! For a banded kernel `Y D = sum_d c_d Y S_d`, so every residual is
//! `E = W Z` with `Z = [Y S_0; ..; Y S_{Q-1}; X; U]` and
//! `W = [c_0 I, .., c_{Q-1} I, -A, -B]`. Accumulating `G = sum_mu Z Z^T` once
//! makes loss and gradient cost independent of `m` and `N`.

use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};
use crate::objective::{shift_columns, Dataset, KernelParam};

#[derive(Debug, Clone)]
pub(crate) enum Target {
    /// Free or fixed banded kernel with this many offsets (`Q`).
    Band { q: usize, bandwidth: usize },
    /// Single precomputed block `Y D` for a fixed dense kernel.
    Fixed,
}

#[derive(Debug, Clone)]
pub(crate) struct Moments {
    n: usize,
    k: usize,
    blocks: usize,
    target: Target,
    gram: DMatrix<f64>,
    abs_gram: DMatrix<f64>,
}

/// Loss and gradient in reduced coordinates.
#[derive(Debug, Clone)]
pub(crate) struct ReducedGradient {
    pub loss: f64,
    pub da: DMatrix<f64>,
    pub db: DMatrix<f64>,
    /// `g_d = sum_k (2 sum_mu Y^T E)[k][k+d]` for `d = 1 .. Q-1`.
    pub diag_sums: Vec<f64>,
}

impl Moments {
    pub fn banded(data: &Dataset, bandwidth: usize) -> Result<Self> {
        if data.q() > bandwidth || bandwidth == 0 || bandwidth > data.m() {
            return Err(Error::Config(format!(
                "bandwidth {bandwidth} incompatible with q={} m={}",
                data.q(),
                data.m()
            )));
        }
        let n = data.state_dim();
        let k = data.input_dim();
        let dim = n * bandwidth + n + k;
        let mut gram = DMatrix::zeros(dim, dim);
        for dm in data.matrices() {
            let mut z = DMatrix::zeros(dim, data.m());
            for d in 0..bandwidth {
                z.rows_mut(d * n, n).copy_from(&shift_columns(&dm.y, d));
            }
            z.rows_mut(bandwidth * n, n).copy_from(&dm.x);
            z.rows_mut(bandwidth * n + n, k).copy_from(&dm.u);
            gram += &z * z.transpose();
        }
        let abs_gram = gram.abs();
        Ok(Self {
            n,
            k,
            abs_gram,
            blocks: bandwidth,
            target: Target::Band {
                q: data.q(),
                bandwidth,
            },
            gram,
        })
    }

    pub fn fixed_dense(data: &Dataset, kernel: &DMatrix<f64>) -> Result<Self> {
        if kernel.shape() != (data.m(), data.m()) {
            return Err(shape_err(
                "fixed kernel",
                format!("{0}x{0}", data.m()),
                format!("{:?}", kernel.shape()),
            ));
        }
        let n = data.state_dim();
        let k = data.input_dim();
        let dim = 2 * n + k;
        let mut gram = DMatrix::zeros(dim, dim);
        for dm in data.matrices() {
            let mut z = DMatrix::zeros(dim, data.m());
            z.rows_mut(0, n).copy_from(&(&dm.y * kernel));
            z.rows_mut(n, n).copy_from(&dm.x);
            z.rows_mut(2 * n, k).copy_from(&dm.u);
            gram += &z * z.transpose();
        }
        let abs_gram = gram.abs();
        Ok(Self {
            n,
            k,
            abs_gram,
            blocks: 1,
            target: Target::Fixed,
            gram,
        })
    }

    /// Whether a kernel parameter can be expressed with these moments.
    pub fn supports(&self, d: &KernelParam) -> bool {
        match (&self.target, d) {
            (Target::Band { q, bandwidth }, KernelParam::Band(k)) => {
                k.q() == *q && k.bandwidth() == *bandwidth
            }
            _ => false,
        }
    }

    fn weights(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, coeffs: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut w = DMatrix::zeros(n, self.gram.nrows());
        for blk in 0..self.blocks {
            let c = if blk == 0 { 1.0 } else { coeffs[blk - 1] };
            for i in 0..n {
                w[(i, blk * n + i)] = c;
            }
        }
        let off = self.blocks * n;
        w.columns_mut(off, n).copy_from(&(-a));
        w.columns_mut(off + n, self.k).copy_from(&(-b));
        w
    }

    /// Loss and reduced gradient at `(A, B, coeffs)`; `coeffs` are the band
    /// super-diagonals (ignored for a fixed dense kernel).
    pub fn evaluate(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, coeffs: &[f64]) -> ReducedGradient {
        let w = self.weights(a, b, coeffs);
        let p = &w * &self.gram;
        let loss = w.dot(&p).max(0.0);
        let n = self.n;
        let off = self.blocks * n;
        let da = p.columns(off, n) * -2.0;
        let db = p.columns(off + n, self.k) * -2.0;
        let diag_sums = match self.target {
            Target::Band { .. } => (1..self.blocks)
                .map(|d| 2.0 * p.view((0, d * n), (n, n)).trace())
                .collect(),
            Target::Fixed => Vec::new(),
        };
        ReducedGradient {
            loss,
            da,
            db,
            diag_sums,
        }
    }

    /// Loss and its rounding scale.
    pub fn loss(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, coeffs: &[f64]) -> (f64, f64) {
        let w = self.weights(a, b, coeffs);
        ((&w * &self.gram).dot(&w).max(0.0), self.scale(&w))
    }

    /// Number of terms summed per loss evaluation.
    pub fn terms(&self) -> usize {
        self.gram.nrows()
    }

    fn scale(&self, w: &DMatrix<f64>) -> f64 {
        let aw = w.abs();
        (&aw * &self.abs_gram).dot(&aw)
    }
}
