//! Constraint sets on `(A, B, D)` and their Euclidean projections.

use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};
use crate::kernel::{project_to_band, CausalBandKernel};
use crate::objective::{KernelParam, ParamPoint};

/// Boolean sparsity pattern, `true` where an entry may be nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    n: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn full(n: usize) -> Self {
        Self {
            n,
            bits: vec![true; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                bits.push(f(i, j));
            }
        }
        Self { n, bits }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(shape_err("mask", format!("{n} columns per row"), bad.len()));
        }
        Ok(Self {
            n,
            bits: rows.concat(),
        })
    }

    /// Diagonal plus the given undirected edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut mask = Self::from_fn(n, |i, j| i == j);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Config(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            mask.bits[i * n + j] = true;
            mask.bits[j * n + i] = true;
        }
        Ok(mask)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        self.bits.chunks(self.n.max(1)).map(<[bool]>::to_vec).take(self.n).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_true_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i))
    }

    fn check(&self, n: usize, what: &str) -> Result<()> {
        if self.n != n {
            return Err(shape_err(format!("{what} mask"), format!("{n}x{n}"), format!("{0}x{0}", self.n)));
        }
        if !self.is_symmetric() {
            return Err(Error::Config(format!("{what} mask must be symmetric")));
        }
        if !self.has_true_diagonal() {
            return Err(Error::Config(format!("{what} mask must contain the diagonal")));
        }
        Ok(())
    }
}

/// Which marginal of the Laplacian part must vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumAxis {
    #[default]
    Columns,
    Rows,
}

/// `{A : A - shift in L(mask)}` where `L` contains matrices supported on the
/// mask with nonnegative off-diagonals and zero sums along `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianConstraint {
    pub mask: Mask,
    pub shift: DMatrix<f64>,
    pub axis: SumAxis,
    pub tol: f64,
    pub max_iter: usize,
}

impl LaplacianConstraint {
    pub const DEFAULT_TOL: f64 = 1e-9;
    pub const DEFAULT_MAX_ITER: usize = 10_000;

    /// Identity shift, column sums, default Dykstra settings.
    pub fn new(mask: Mask) -> Self {
        let n = mask.n();
        Self::with_shift(mask, DMatrix::identity(n, n))
    }

    pub fn with_shift(mask: Mask, shift: DMatrix<f64>) -> Self {
        Self {
            mask,
            shift,
            axis: SumAxis::Columns,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixConstraint {
    Full,
    Fixed(DMatrix<f64>),
    SymmetricMaskedNonneg(Mask),
    ShiftedGraphLaplacian(LaplacianConstraint),
    NonnegativeDiagonal,
    /// Causal band-Toeplitz kernels with nullity `q` and bandwidth `Q`.
    CausalBand { q: usize, bandwidth: usize },
}

impl MatrixConstraint {
    /// Projects a matrix onto the set.
    pub fn project(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            MatrixConstraint::Full => Ok(m.clone()),
            MatrixConstraint::Fixed(f) => {
                if f.shape() != m.shape() {
                    return Err(shape_err("fixed constraint", format!("{:?}", m.shape()), format!("{:?}", f.shape())));
                }
                Ok(f.clone())
            }
            MatrixConstraint::SymmetricMaskedNonneg(mask) => project_symmetric_masked_nonneg(m, mask),
            MatrixConstraint::ShiftedGraphLaplacian(lap) => project_shifted_laplacian(m, lap),
            MatrixConstraint::NonnegativeDiagonal => Ok(project_nonneg_diagonal(m)),
            MatrixConstraint::CausalBand { q, bandwidth } => Ok(project_to_band(m, *q, *bandwidth)?.to_dense()),
        }
    }

    /// Projects a memory-kernel parameter; only `CausalBand` and `Fixed` apply.
    pub fn project_kernel(&self, d: &KernelParam) -> Result<KernelParam> {
        match self {
            MatrixConstraint::CausalBand { q, bandwidth } => match d {
                KernelParam::Band(k) if k.q() == *q && k.bandwidth() == *bandwidth => {
                    Ok(KernelParam::Band(k.clone()))
                }
                KernelParam::Band(k) if k.q() == *q && k.bandwidth() < *bandwidth => {
                    Ok(KernelParam::Band(k.widened(*bandwidth)?))
                }
                other => Ok(KernelParam::Band(project_to_band(&other.to_dense(), *q, *bandwidth)?)),
            },
            MatrixConstraint::Fixed(f) => {
                if f.shape() != (d.dim(), d.dim()) {
                    return Err(shape_err("fixed kernel", format!("{0}x{0}", d.dim()), format!("{:?}", f.shape())));
                }
                match project_to_band_exact(f) {
                    Some(k) => Ok(KernelParam::Band(k)),
                    None => Ok(KernelParam::Dense(f.clone())),
                }
            }
            _ => Err(Error::Config("the memory kernel must be causal_band or fixed".into())),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MatrixConstraint::Full => "full",
            MatrixConstraint::Fixed(_) => "fixed",
            MatrixConstraint::SymmetricMaskedNonneg(_) => "symmetric_masked_nonneg",
            MatrixConstraint::ShiftedGraphLaplacian(_) => "shifted_graph_laplacian",
            MatrixConstraint::NonnegativeDiagonal => "nonnegative_diagonal",
            MatrixConstraint::CausalBand { .. } => "causal_band",
        }
    }
}

/// A fixed kernel that is exactly a causal band matrix, recovered losslessly.
fn project_to_band_exact(f: &DMatrix<f64>) -> Option<CausalBandKernel> {
    let m = f.nrows();
    let q = (0..m).take_while(|&j| f.column(j).iter().all(|&v| v == 0.0)).count();
    if q >= m {
        return None;
    }
    let bandwidth = (0..m)
        .flat_map(|i| (i..m).filter(move |&j| j >= q && f[(i, j)] != 0.0).map(move |j| j - i + 1))
        .max()
        .unwrap_or(1)
        .max(q)
        .min(m);
    let k = project_to_band(f, q, bandwidth).ok()?;
    (k.to_dense() == *f).then_some(k)
}

/// Product constraint on `(A, B, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub on_a: MatrixConstraint,
    pub on_b: MatrixConstraint,
    pub on_d: MatrixConstraint,
}

impl ConstraintSpec {
    pub fn unconstrained(q: usize, bandwidth: usize) -> Self {
        Self {
            on_a: MatrixConstraint::Full,
            on_b: MatrixConstraint::Full,
            on_d: MatrixConstraint::CausalBand { q, bandwidth },
        }
    }

    /// Symmetric, graph-supported, off-diagonally nonnegative `A`; nonnegative diagonal `B`.
    pub fn a1b(mask: Mask, q: usize, bandwidth: usize) -> Self {
        Self {
            on_a: MatrixConstraint::SymmetricMaskedNonneg(mask),
            on_b: MatrixConstraint::NonnegativeDiagonal,
            on_d: MatrixConstraint::CausalBand { q, bandwidth },
        }
    }

    /// `A - I` a graph Laplacian on the mask; nonnegative diagonal `B`.
    pub fn a2b(mask: Mask, q: usize, bandwidth: usize) -> Self {
        Self {
            on_a: MatrixConstraint::ShiftedGraphLaplacian(LaplacianConstraint::new(mask)),
            on_b: MatrixConstraint::NonnegativeDiagonal,
            on_d: MatrixConstraint::CausalBand { q, bandwidth },
        }
    }

    /// Checks shapes and that every factor projects a trivial point.
    pub fn validate(&self, n: usize, k: usize, m: usize) -> Result<()> {
        check_factor(&self.on_a, n, n, "A")?;
        check_factor(&self.on_b, n, k, "B")?;
        match &self.on_d {
            MatrixConstraint::CausalBand { q, bandwidth } => {
                if *bandwidth == 0 || q > bandwidth || *bandwidth > m || *q >= m {
                    return Err(Error::Config(format!(
                        "causal band q={q} Q={bandwidth} invalid for m={m}"
                    )));
                }
            }
            MatrixConstraint::Fixed(f) => {
                if f.shape() != (m, m) {
                    return Err(shape_err("fixed kernel", format!("{m}x{m}"), format!("{:?}", f.shape())));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "the memory kernel must be causal_band or fixed, found {}",
                    other.kind_name()
                )))
            }
        }
        self.on_a.project(&DMatrix::identity(n, n))?;
        self.on_b.project(&DMatrix::zeros(n, k))?;
        self.on_d.project_kernel(&KernelParam::Dense(DMatrix::identity(m, m)))?;
        Ok(())
    }
}

fn check_factor(c: &MatrixConstraint, rows: usize, cols: usize, what: &str) -> Result<()> {
    match c {
        MatrixConstraint::Fixed(f) if f.shape() != (rows, cols) => Err(shape_err(
            format!("fixed {what}"),
            format!("{rows}x{cols}"),
            format!("{:?}", f.shape()),
        )),
        MatrixConstraint::SymmetricMaskedNonneg(mask) => mask.check(rows, what),
        MatrixConstraint::ShiftedGraphLaplacian(lap) => {
            lap.mask.check(rows, what)?;
            if lap.shift.shape() != (rows, cols) {
                return Err(shape_err(format!("{what} shift"), format!("{rows}x{cols}"), format!("{:?}", lap.shift.shape())));
            }
            Ok(())
        }
        MatrixConstraint::CausalBand { .. } => {
            Err(Error::Config(format!("causal_band applies to the memory kernel, not {what}")))
        }
        _ => Ok(()),
    }
}

/// Applies each factor projection independently.
pub fn project_params(theta: &ParamPoint, spec: &ConstraintSpec) -> Result<ParamPoint> {
    Ok(ParamPoint {
        a: spec.on_a.project(&theta.a)?,
        b: spec.on_b.project(&theta.b)?,
        d: spec.on_d.project_kernel(&theta.d)?,
    })
}

pub fn project_symmetric_masked_nonneg(m: &DMatrix<f64>, mask: &Mask) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(shape_err("symmetric projection", "square matrix", format!("{:?}", m.shape())));
    }
    mask.check(n, "A")?;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            m[(i, i)]
        } else if mask.get(i, j) {
            (0.5 * (m[(i, j)] + m[(j, i)])).max(0.0)
        } else {
            0.0
        }
    }))
}

pub fn project_nonneg_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, j)].max(0.0) } else { 0.0 })
}

/// `shift + P_L(m - shift)` by Dykstra's alternating projection.
pub fn project_shifted_laplacian(m: &DMatrix<f64>, lap: &LaplacianConstraint) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.shape() != (n, n) || lap.shift.shape() != (n, n) {
        return Err(shape_err("laplacian projection", format!("{n}x{n}"), format!("{:?}", m.shape())));
    }
    lap.mask.check(n, "A")?;
    if lap.tol <= 0.0 || lap.max_iter == 0 {
        return Err(Error::Config("dykstra tolerance and iteration cap must be positive".into()));
    }
    let mut v = m - &lap.shift;
    if lap.axis == SumAxis::Rows {
        v.transpose_mut();
    }
    let out = dykstra_laplacian(&v, &lap.mask, lap.tol, lap.max_iter)?;
    let out = match lap.axis {
        SumAxis::Columns => out,
        SumAxis::Rows => out.transpose(),
    };
    Ok(out + &lap.shift)
}

fn dykstra_laplacian(v: &DMatrix<f64>, mask: &Mask, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    let n = v.nrows();
    let mut x = v.clone();
    let mut p = DMatrix::zeros(n, n);
    let mut r = DMatrix::zeros(n, n);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let y = affine_zero_sums(&(&x + &p), mask);
        p += &x - &y;
        let x_new = offdiag_cone(&(&y + &r), mask);
        r += &y - &x_new;
        residual = (&x_new - &x).norm().max((&x_new - &y).norm());
        x = x_new;
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::Convergence {
        method: "dykstra",
        iterations: max_iter,
        residual,
    })
}

fn affine_zero_sums(m: &DMatrix<f64>, mask: &Mask) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let support: Vec<usize> = (0..n).filter(|&i| mask.get(i, j)).collect();
        let mean = support.iter().map(|&i| m[(i, j)]).sum::<f64>() / support.len() as f64;
        for &i in &support {
            out[(i, j)] = m[(i, j)] - mean;
        }
    }
    out
}

fn offdiag_cone(m: &DMatrix<f64>, mask: &Mask) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i != j && mask.get(i, j) {
            m[(i, j)].max(0.0)
        } else {
            m[(i, j)]
        }
    })
}
