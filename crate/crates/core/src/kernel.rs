//! Banded time-invariant causal matrices (memory kernels).
//!
//! A kernel with dimension `m`, nullity `q` and bandwidth `Q` is the `m x m`
//! matrix whose first `q` columns vanish and whose remaining columns carry a
//! unit main diagonal plus `Q - 1` constant super-diagonals `c_1 .. c_{Q-1}`.
//! Only the super-diagonal coefficients are stored.

use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CausalBandKernel {
    m: usize,
    q: usize,
    bandwidth: usize,
    coeffs: Vec<f64>,
}

impl CausalBandKernel {
    /// Builds a kernel from its super-diagonal coefficients `c_1 .. c_{Q-1}`.
    pub fn new(m: usize, q: usize, bandwidth: usize, coeffs: Vec<f64>) -> Result<Self> {
        validate_dims(m, q, bandwidth)?;
        if coeffs.len() + 1 != bandwidth {
            return Err(shape_err(
                "kernel coefficients",
                format!("{} coefficients for bandwidth {bandwidth}", bandwidth - 1),
                coeffs.len(),
            ));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite kernel coefficient {c}")));
        }
        Ok(Self {
            m,
            q,
            bandwidth,
            coeffs,
        })
    }

    /// The kernel with all super-diagonals zero, i.e. `1_m^q` padded to bandwidth `Q`.
    pub fn identity_like(m: usize, q: usize, bandwidth: usize) -> Result<Self> {
        Self::new(m, q, bandwidth, vec![0.0; bandwidth.saturating_sub(1)])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value on offset `d`; offset 0 is the unit diagonal.
    pub fn coeff(&self, d: usize) -> f64 {
        match d {
            0 => 1.0,
            d if d < self.bandwidth => self.coeffs[d - 1],
            _ => 0.0,
        }
    }

    /// Same coefficients at another matrix dimension.
    pub fn with_len(&self, m: usize) -> Result<Self> {
        Self::new(m, self.q, self.bandwidth, self.coeffs.clone())
    }

    /// Re-expresses the kernel at a larger bandwidth by padding zero coefficients.
    pub fn widened(&self, bandwidth: usize) -> Result<Self> {
        if bandwidth < self.bandwidth {
            return Err(Error::Config(format!(
                "cannot narrow bandwidth {} to {bandwidth}",
                self.bandwidth
            )));
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(bandwidth - 1, 0.0);
        Self::new(self.m, self.q, bandwidth, coeffs)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| {
            if j < self.q || j < i {
                0.0
            } else {
                self.coeff(j - i)
            }
        })
    }
}

fn validate_dims(m: usize, q: usize, bandwidth: usize) -> Result<()> {
    if bandwidth == 0 {
        return Err(Error::Config("kernel bandwidth must be at least 1".into()));
    }
    if q > bandwidth || bandwidth > m {
        return Err(Error::Config(format!(
            "kernel dimensions must satisfy q <= Q <= m (q={q}, Q={bandwidth}, m={m})"
        )));
    }
    // Every averaged diagonal must be non-empty: count = m - q for d <= q.
    if m <= q {
        return Err(Error::Config(format!(
            "kernel dimension m={m} must exceed the nullity q={q}"
        )));
    }
    Ok(())
}

/// Number of entries on offset `d` of a `T_m^q(Q)` element, for `d = 1 .. Q-1`.
pub fn band_counts(m: usize, q: usize, bandwidth: usize) -> Vec<usize> {
    (1..bandwidth).map(|d| m - d - q.saturating_sub(d)).collect()
}

/// Euclidean projection of a dense `m x m` matrix onto the normalized banded
/// causal set with nullity `q` and bandwidth `Q`.
///
/// Each free offset `d` is the mean of `M[k][k+d]` over the rows
/// `k = max(0, q-d) ..= m-1-d`; the diagonal is pinned to one.
pub fn project_to_band(mat: &DMatrix<f64>, q: usize, bandwidth: usize) -> Result<CausalBandKernel> {
    let m = mat.nrows();
    if mat.ncols() != m {
        return Err(shape_err(
            "project_to_band",
            "square matrix",
            format!("{}x{}", m, mat.ncols()),
        ));
    }
    validate_dims(m, q, bandwidth)?;
    let coeffs = (1..bandwidth)
        .map(|d| {
            let start = q.saturating_sub(d);
            let sum: f64 = (start..m - d).map(|k| mat[(k, k + d)]).sum();
            sum / (m - d - start) as f64
        })
        .collect();
    CausalBandKernel::new(m, q, bandwidth, coeffs)
}

/// Left pseudoinverse `C^+` with zero leading `q` rows and columns and the
/// inverse of the unit upper-triangular Toeplitz block in the lower right.
pub fn kernel_left_pseudoinverse(kernel: &CausalBandKernel) -> DMatrix<f64> {
    let m = kernel.m();
    let q = kernel.q();
    let inv = toeplitz_inverse_series(kernel, m - q);
    DMatrix::from_fn(m, m, |i, j| {
        if i < q || j < q || j < i {
            0.0
        } else {
            inv[j - i]
        }
    })
}

/// First row of the inverse of the upper-triangular Toeplitz block: the
/// reciprocal power series of `1 + c_1 z + ... + c_{Q-1} z^{Q-1}`.
fn toeplitz_inverse_series(kernel: &CausalBandKernel, len: usize) -> Vec<f64> {
    let mut r = vec![0.0; len];
    if len == 0 {
        return r;
    }
    r[0] = 1.0;
    for j in 1..len {
        let upper = j.min(kernel.bandwidth() - 1);
        r[j] = -(1..=upper).map(|d| kernel.coeff(d) * r[j - d]).sum::<f64>();
    }
    r
}

/// `g_k(alpha) = (-1)^k binom(alpha, k)` for `k = 0 .. len-1`.
pub fn binomial_weights(alpha: f64, len: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(len);
    let mut current = 1.0;
    for k in 0..len {
        if k > 0 {
            current *= (k as f64 - 1.0 - alpha) / k as f64;
        }
        g.push(current);
    }
    g
}

/// Upper-triangular Toeplitz factor with offsets `g_k(alpha)`, before any
/// column is zeroed.
pub fn fractional_toeplitz(alpha: f64, m: usize) -> Result<DMatrix<f64>> {
    check_alpha(alpha, m)?;
    let g = binomial_weights(alpha, m);
    Ok(DMatrix::from_fn(m, m, |i, j| if j >= i { g[j - i] } else { 0.0 }))
}

/// Leading-zero column count of the fractional kernel: `ceil(alpha)`.
pub fn fractional_nullity(alpha: f64) -> usize {
    alpha.ceil() as usize
}

/// Discrete fractional-difference kernel `D_alpha`: the Toeplitz factor with
/// its first `ceil(alpha)` columns zeroed. `D_0` is the identity.
pub fn fractional_band_kernel(alpha: f64, m: usize) -> Result<DMatrix<f64>> {
    let mut t = fractional_toeplitz(alpha, m)?;
    let nullity = fractional_nullity(alpha).min(m);
    t.columns_mut(0, nullity).fill(0.0);
    Ok(t)
}

fn check_alpha(alpha: f64, m: usize) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "fractional order must be finite and nonnegative, got {alpha}"
        )));
    }
    if m == 0 {
        return Err(Error::Config("fractional kernel needs m >= 1".into()));
    }
    Ok(())
}
