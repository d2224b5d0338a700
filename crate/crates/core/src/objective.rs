//! The multi-trajectory loss `f(A, B, D) = sum_mu ||Y_mu D - A X_mu - B U_mu||^2`
//! and its derivatives, evaluated literally on the data matrices.

use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};
use crate::kernel::{band_counts, CausalBandKernel};
use crate::model::{build_data_matrices, DataMatrices, StateSpaceModel, Trajectory};

/// A set of trajectories sharing `n`, `k` and the truncation `(q, m)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    q: usize,
    m: usize,
    trajectories: Vec<Trajectory>,
    matrices: Vec<DataMatrices>,
}

impl Dataset {
    pub fn new(q: usize, m: usize, trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::Config("dataset needs at least one trajectory".into()))?;
        let (n, k) = (first.state_dim(), first.input_dim());
        let mut matrices = Vec::with_capacity(trajectories.len());
        for (idx, traj) in trajectories.iter().enumerate() {
            if traj.state_dim() != n || traj.input_dim() != k {
                return Err(shape_err(
                    format!("trajectory {idx} dimensions"),
                    format!("n={n}, k={k}"),
                    format!("n={}, k={}", traj.state_dim(), traj.input_dim()),
                ));
            }
            let dm = build_data_matrices(traj, q, m).map_err(|e| match e {
                Error::Length {
                    what,
                    needed,
                    found,
                    ..
                } => Error::Length {
                    index: idx,
                    what,
                    needed,
                    found,
                },
                other => other,
            })?;
            matrices.push(dm);
        }
        Ok(Self {
            q,
            m,
            trajectories,
            matrices,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.trajectories[0].state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.trajectories[0].input_dim()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn matrices(&self) -> &[DataMatrices] {
        &self.matrices
    }

    /// The same trajectories re-truncated with another nullity.
    pub fn with_nullity(&self, q: usize) -> Result<Self> {
        Self::new(q, self.m, self.trajectories.clone())
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let picked = indices
            .iter()
            .map(|&i| {
                self.trajectories.get(i).cloned().ok_or_else(|| {
                    Error::Config(format!(
                        "trajectory index {i} out of range (dataset has {})",
                        self.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.q, self.m, picked)
    }
}

/// Memory-kernel component of a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelParam {
    Band(CausalBandKernel),
    /// An arbitrary fixed `m x m` kernel, e.g. a fractional-difference matrix.
    Dense(DMatrix<f64>),
}

impl KernelParam {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            KernelParam::Band(k) => k.to_dense(),
            KernelParam::Dense(d) => d.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelParam::Band(k) => k.m(),
            KernelParam::Dense(d) => d.nrows(),
        }
    }

    /// `Y D`, using the band structure when available.
    pub fn apply_right(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            KernelParam::Dense(d) => y * d,
            KernelParam::Band(k) => {
                let m = y.ncols();
                let mut out = DMatrix::zeros(y.nrows(), m);
                for d in 0..k.bandwidth() {
                    let c = k.coeff(d);
                    if c == 0.0 {
                        continue;
                    }
                    for j in k.q().max(d)..m {
                        out.column_mut(j).axpy(c, &y.column(j - d), 1.0);
                    }
                }
                out
            }
        }
    }
}

/// `theta = (A, B, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: KernelParam,
}

impl ParamPoint {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, d: KernelParam) -> Self {
        Self { a, b, d }
    }

    pub fn from_model(model: &StateSpaceModel, m: usize) -> Result<Self> {
        Ok(Self {
            a: model.a().clone(),
            b: model.b().clone(),
            d: KernelParam::Band(model.kernel().with_len(m)?),
        })
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        match &self.d {
            KernelParam::Band(k) => StateSpaceModel::new(self.a.clone(), self.b.clone(), k.clone()),
            KernelParam::Dense(_) => Err(Error::Config(
                "a dense memory kernel has no band representation for simulation".into(),
            )),
        }
    }

    /// The point as an ambient tangent-like tuple (dense `D`).
    pub fn to_tangent(&self) -> TangentTuple {
        TangentTuple {
            da: self.a.clone(),
            db: self.b.clone(),
            dd: self.d.to_dense(),
        }
    }
}

/// A `(dA, dB, dD)` triple in the ambient space, `dD` dense `m x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentTuple {
    pub da: DMatrix<f64>,
    pub db: DMatrix<f64>,
    pub dd: DMatrix<f64>,
}

impl TangentTuple {
    pub fn zeros(n: usize, k: usize, m: usize) -> Self {
        Self {
            da: DMatrix::zeros(n, n),
            db: DMatrix::zeros(n, k),
            dd: DMatrix::zeros(m, m),
        }
    }

    pub fn inner(&self, other: &TangentTuple) -> f64 {
        self.da.dot(&other.da) + self.db.dot(&other.db) + self.dd.dot(&other.dd)
    }

    pub fn norm_squared(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scaled(&self, s: f64) -> TangentTuple {
        TangentTuple {
            da: &self.da * s,
            db: &self.db * s,
            dd: &self.dd * s,
        }
    }

    pub fn add(&self, other: &TangentTuple) -> TangentTuple {
        TangentTuple {
            da: &self.da + &other.da,
            db: &self.db + &other.db,
            dd: &self.dd + &other.dd,
        }
    }

    pub fn sub(&self, other: &TangentTuple) -> TangentTuple {
        self.add(&other.scaled(-1.0))
    }

    /// The point `theta + self` with a dense kernel.
    pub fn offset(&self, theta: &ParamPoint) -> ParamPoint {
        ParamPoint {
            a: &theta.a + &self.da,
            b: &theta.b + &self.db,
            d: KernelParam::Dense(theta.d.to_dense() + &self.dd),
        }
    }
}

fn check_param(theta: &ParamPoint, data: &Dataset) -> Result<()> {
    let n = data.state_dim();
    let k = data.input_dim();
    if theta.a.shape() != (n, n) {
        return Err(shape_err("A", format!("{n}x{n}"), format!("{:?}", theta.a.shape())));
    }
    if theta.b.shape() != (n, k) {
        return Err(shape_err("B", format!("{n}x{k}"), format!("{:?}", theta.b.shape())));
    }
    if theta.d.dim() != data.m() {
        return Err(shape_err("memory kernel dimension", data.m(), theta.d.dim()));
    }
    if let KernelParam::Dense(d) = &theta.d {
        if d.ncols() != d.nrows() {
            return Err(shape_err("memory kernel", "square", format!("{:?}", d.shape())));
        }
    }
    Ok(())
}

fn check_tangent(delta: &TangentTuple, data: &Dataset) -> Result<()> {
    let n = data.state_dim();
    let k = data.input_dim();
    let m = data.m();
    if delta.da.shape() != (n, n) || delta.db.shape() != (n, k) || delta.dd.shape() != (m, m) {
        return Err(shape_err(
            "tangent tuple",
            format!("({n}x{n}, {n}x{k}, {m}x{m})"),
            format!(
                "({:?}, {:?}, {:?})",
                delta.da.shape(),
                delta.db.shape(),
                delta.dd.shape()
            ),
        ));
    }
    Ok(())
}

fn residual(theta: &ParamPoint, dm: &DataMatrices) -> DMatrix<f64> {
    let mut e = theta.d.apply_right(&dm.y);
    e.gemm(-1.0, &theta.a, &dm.x, 1.0);
    e.gemm(-1.0, &theta.b, &dm.u, 1.0);
    e
}

/// Per-trajectory residuals `E_mu = Y_mu D - A X_mu - B U_mu`.
pub fn residuals(theta: &ParamPoint, data: &Dataset) -> Result<Vec<DMatrix<f64>>> {
    check_param(theta, data)?;
    Ok(data.matrices().iter().map(|dm| residual(theta, dm)).collect())
}

pub fn loss(theta: &ParamPoint, data: &Dataset) -> Result<f64> {
    check_param(theta, data)?;
    Ok(data
        .matrices()
        .iter()
        .map(|dm| residual(theta, dm).norm_squared())
        .sum())
}

pub fn gradient(theta: &ParamPoint, data: &Dataset) -> Result<TangentTuple> {
    check_param(theta, data)?;
    let mut out = TangentTuple::zeros(data.state_dim(), data.input_dim(), data.m());
    for dm in data.matrices() {
        let e = residual(theta, dm);
        accumulate_gradient(&mut out, &e, dm);
    }
    Ok(out)
}

fn accumulate_gradient(out: &mut TangentTuple, e: &DMatrix<f64>, dm: &DataMatrices) {
    out.da.gemm(-2.0, e, &dm.x.transpose(), 1.0);
    out.db.gemm(-2.0, e, &dm.u.transpose(), 1.0);
    out.dd.gemm_tr(2.0, &dm.y, e, 1.0);
}

/// Hessian action; independent of the point because `f` is quadratic.
pub fn hessian_apply(delta: &TangentTuple, data: &Dataset) -> Result<TangentTuple> {
    check_tangent(delta, data)?;
    let mut out = TangentTuple::zeros(data.state_dim(), data.input_dim(), data.m());
    for dm in data.matrices() {
        let mut e = &dm.y * &delta.dd;
        e.gemm(-1.0, &delta.da, &dm.x, 1.0);
        e.gemm(-1.0, &delta.db, &dm.u, 1.0);
        accumulate_gradient(&mut out, &e, dm);
    }
    Ok(out)
}

/// `L_f = 2 max(rho_X, rho_U, rho_Y)`, where
/// `rho_Z^2 = sum_mu ||X Z^T||^2 + ||U Z^T||^2 + ||Y Z^T||^2`.
pub fn lipschitz_constant(data: &Dataset) -> f64 {
    let mut rho = [0.0f64; 3];
    for dm in data.matrices() {
        let blocks = [&dm.x, &dm.u, &dm.y];
        for (slot, z) in rho.iter_mut().zip(blocks) {
            for w in blocks {
                *slot += (w * z.transpose()).norm_squared();
            }
        }
    }
    2.0 * rho.iter().map(|r| r.sqrt()).fold(0.0, f64::max)
}

/// `H = sum_mu [X; U][X; U]^T`, the `(A, B)` Hessian for a fixed kernel
/// (up to the factor 2 acting on each row of `[A B]`).
pub fn fixed_d_hessian(data: &Dataset) -> DMatrix<f64> {
    let n = data.state_dim();
    let k = data.input_dim();
    let mut h = DMatrix::zeros(n + k, n + k);
    for dm in data.matrices() {
        let z = stack_rows(&dm.x, &dm.u);
        h.gemm_tr(1.0, &z.transpose(), &z.transpose(), 1.0);
    }
    h
}

pub(crate) fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    z.rows_mut(0, top.nrows()).copy_from(top);
    z.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniquenessMode {
    /// `St(D) = {D}`: positive definiteness of the `(n+k)`-dimensional Hessian.
    FixedKernel,
    /// Free `A`, `B` and a banded kernel with the given bandwidth.
    Full { bandwidth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessReport {
    pub positive_definite: bool,
    pub smallest_eigenvalue: f64,
    pub rank_condition: bool,
}

/// Numerical rank of the stacked `[X; U]` over all trajectories.
pub fn stacked_rank(data: &Dataset) -> usize {
    let zs: Vec<DMatrix<f64>> = data
        .matrices()
        .iter()
        .map(|dm| stack_rows(&dm.x, &dm.u))
        .collect();
    let cols: usize = zs.iter().map(|z| z.ncols()).sum();
    let rows = data.state_dim() + data.input_dim();
    let mut all = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for z in &zs {
        all.columns_mut(at, z.ncols()).copy_from(z);
        at += z.ncols();
    }
    let sv = all.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = smax * rows.max(cols) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Positive-definiteness certificate for the uniqueness of the minimizer.
///
/// In `Full` mode the smallest eigenvalue of the Hessian restricted to
/// `(dA, dB, dD in span of the band offsets)` is located by bisection on the
/// inertia of its Schur complement onto the `Q - 1` kernel directions. Block
/// `(dA, dB)` of that operator is `2 I_n (x) H` with `H` from
/// [`fixed_d_hessian`].
pub fn uniqueness_certificate(data: &Dataset, mode: UniquenessMode) -> Result<UniquenessReport> {
    let h = fixed_d_hessian(data);
    let rank_condition = stacked_rank(data) == h.nrows();
    let eig = h.clone().symmetric_eigen();
    let hmin = eig.eigenvalues.min();
    let hmax = eig.eigenvalues.max().max(0.0);
    let smallest = match mode {
        UniquenessMode::FixedKernel => eig.eigenvalues.min(),
        UniquenessMode::Full { bandwidth } => {
            if bandwidth == 0 || bandwidth > data.m() || data.q() > bandwidth {
                return Err(Error::Config(format!(
                    "bandwidth {bandwidth} incompatible with q={} m={}",
                    data.q(),
                    data.m()
                )));
            }
            full_smallest_eigenvalue(data, bandwidth, &eig, hmin)?
        }
    };
    let scale = match mode {
        UniquenessMode::FixedKernel => hmax,
        UniquenessMode::Full { .. } => 2.0 * hmax,
    };
    let positive_definite = smallest > 1e-10 * scale.max(1.0);
    Ok(UniquenessReport {
        positive_definite,
        smallest_eigenvalue: smallest,
        rank_condition,
    })
}

fn full_smallest_eigenvalue(
    data: &Dataset,
    bandwidth: usize,
    eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
    hmin: f64,
) -> Result<f64> {
    let free = bandwidth - 1;
    if free == 0 {
        return Ok(2.0 * hmin);
    }
    let n = data.state_dim();
    let counts = band_counts(data.m(), data.q(), bandwidth);
    // Shifted outputs and their cross moments with [X; U] and each other.
    let mut cross: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n + data.input_dim()); free];
    let mut tgram = DMatrix::<f64>::zeros(free, free);
    for dm in data.matrices() {
        let z = stack_rows(&dm.x, &dm.u);
        let shifted: Vec<DMatrix<f64>> = (1..bandwidth).map(|d| shift_columns(&dm.y, d)).collect();
        for (d, yd) in shifted.iter().enumerate() {
            cross[d].gemm_tr(1.0, &yd.transpose(), &z.transpose(), 1.0);
            for (e, ye) in shifted.iter().enumerate() {
                tgram[(d, e)] += yd.dot(ye);
            }
        }
    }
    let scale: Vec<f64> = counts.iter().map(|&c| 1.0 / (c as f64).sqrt()).collect();
    // Each F_d expressed in the eigenbasis of H.
    let rotated: Vec<DMatrix<f64>> = cross.iter().map(|f| f * &eig.eigenvectors).collect();
    let schur_pd = |lambda: f64| -> bool {
        let mut s = DMatrix::<f64>::zeros(free, free);
        for d in 0..free {
            for e in 0..free {
                let mut acc = 0.0;
                for (idx, &hv) in eig.eigenvalues.iter().enumerate() {
                    let denom = 2.0 * hv - lambda;
                    let col_d = rotated[d].column(idx);
                    let col_e = rotated[e].column(idx);
                    acc += col_d.dot(&col_e) / denom;
                }
                s[(d, e)] = (2.0 * tgram[(d, e)] - 4.0 * acc) * scale[d] * scale[e];
            }
            s[(d, d)] -= lambda;
        }
        s.cholesky().is_some()
    };
    let upper = 2.0 * hmin;
    // Directions in the degenerate eigenspace of 2 I (x) H that miss the
    // coupling exist whenever n exceeds Q - 1.
    let tnorm = (0..free).map(|d| tgram[(d, d)] * scale[d] * scale[d]).sum::<f64>();
    let mut lo = -(2.0 * tnorm + 1.0);
    let mut hi = upper;
    if schur_pd(hi - 1e-12 * (1.0 + hi.abs())) && n > free {
        return Ok(upper);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if schur_pd(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Columns shifted right by `d` with zero fill: `Y S_d`.
pub(crate) fn shift_columns(y: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let m = y.ncols();
    let mut out = DMatrix::zeros(y.nrows(), m);
    if d < m {
        out.columns_mut(d, m - d).copy_from(&y.columns(0, m - d));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_dataset(rng: &mut ChaCha8Rng, n: usize, k: usize, m: usize, q: usize, count: usize) -> Dataset {
        let trajs = (0..count)
            .map(|_| {
                Trajectory::new(
                    DMatrix::from_fn(n, m + 1, |_, _| rng.random_range(-1.0..1.0)),
                    DMatrix::from_fn(k, m, |_, _| rng.random_range(-1.0..1.0)),
                )
                .unwrap()
            })
            .collect();
        Dataset::new(q, m, trajs).unwrap()
    }

    fn scalar_dataset() -> Dataset {
        let traj = Trajectory::new(
            DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 4.0, 8.0]),
            DMatrix::zeros(1, 3),
        )
        .unwrap();
        Dataset::new(0, 3, vec![traj]).unwrap()
    }

    #[test]
    fn scalar_loss_by_hand() {
        let data = scalar_dataset();
        let kernel = KernelParam::Band(CausalBandKernel::identity_like(3, 0, 1).unwrap());
        let theta = ParamPoint::new(DMatrix::from_element(1, 1, 2.0), DMatrix::zeros(1, 1), kernel.clone());
        assert_eq!(loss(&theta, &data).unwrap(), 0.0);
        let theta = ParamPoint::new(DMatrix::from_element(1, 1, 1.0), DMatrix::zeros(1, 1), kernel);
        assert_eq!(loss(&theta, &data).unwrap(), 21.0);
        // literal Frobenius sum over the residual entries
        let r = residuals(&theta, &data).unwrap();
        assert_eq!(r[0].iter().map(|v| v * v).sum::<f64>(), 21.0);
    }

    #[test]
    fn zero_point_loss_is_masked_output_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_dataset(&mut rng, 3, 2, 7, 2, 2);
        let theta = ParamPoint::new(
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 2),
            KernelParam::Band(CausalBandKernel::identity_like(7, 2, 3).unwrap()),
        );
        let expected: f64 = data.matrices().iter().map(|dm| dm.y.norm_squared()).sum();
        assert_abs_diff_eq!(loss(&theta, &data).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn band_and_dense_kernel_application_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = DMatrix::from_fn(3, 9, |_, _| rng.random_range(-1.0..1.0));
        let k = CausalBandKernel::new(9, 2, 4, vec![0.3, -0.7, 0.2]).unwrap();
        let band = KernelParam::Band(k.clone()).apply_right(&y);
        assert_abs_diff_eq!(band, &y * k.to_dense(), epsilon = 1e-14);
    }

    #[test]
    fn doubled_dataset_doubles_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let single = random_dataset(&mut rng, 2, 2, 6, 1, 1);
        let doubled = Dataset::new(1, 6, vec![single.trajectories()[0].clone(); 2]).unwrap();
        let theta = ParamPoint::new(
            DMatrix::from_element(2, 2, 0.3),
            DMatrix::from_element(2, 2, -0.2),
            KernelParam::Band(CausalBandKernel::new(6, 1, 2, vec![0.1]).unwrap()),
        );
        let g1 = gradient(&theta, &single).unwrap();
        let g2 = gradient(&theta, &doubled).unwrap();
        assert!(g1.scaled(2.0).sub(&g2).norm() <= 1e-12 * g2.norm());
    }

    #[test]
    fn shape_errors_are_reported() {
        let data = scalar_dataset();
        let theta = ParamPoint::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
            KernelParam::Band(CausalBandKernel::identity_like(3, 0, 1).unwrap()),
        );
        assert!(matches!(loss(&theta, &data), Err(Error::Shape { .. })));
        let theta = ParamPoint::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            KernelParam::Band(CausalBandKernel::identity_like(4, 0, 1).unwrap()),
        );
        assert!(gradient(&theta, &data).is_err());
        assert!(hessian_apply(&TangentTuple::zeros(1, 1, 4), &data).is_err());
    }

    #[test]
    fn zero_data_has_zero_curvature() {
        let traj = Trajectory::new(DMatrix::zeros(2, 6), DMatrix::zeros(1, 5)).unwrap();
        let data = Dataset::new(0, 5, vec![traj]).unwrap();
        assert_eq!(lipschitz_constant(&data), 0.0);
        assert_eq!(fixed_d_hessian(&data), DMatrix::zeros(3, 3));
        let rep = uniqueness_certificate(&data, UniquenessMode::FixedKernel).unwrap();
        assert_eq!(rep.smallest_eigenvalue, 0.0);
        assert!(!rep.positive_definite);
        let rep = uniqueness_certificate(&data, UniquenessMode::Full { bandwidth: 2 }).unwrap();
        assert_abs_diff_eq!(rep.smallest_eigenvalue, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_trajectory_hessian_is_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_dataset(&mut rng, 3, 2, 8, 1, 1);
        let dm = &data.matrices()[0];
        let z = stack_rows(&dm.x, &dm.u);
        assert_abs_diff_eq!(fixed_d_hessian(&data), &z * z.transpose(), epsilon = 1e-13);
        assert!(fixed_d_hessian(&data).symmetric_eigen().eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn short_single_trajectory_is_not_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = random_dataset(&mut rng, 3, 2, 4, 0, 1);
        let rep = uniqueness_certificate(&data, UniquenessMode::FixedKernel).unwrap();
        assert!(!rep.rank_condition);
        assert!(!rep.positive_definite);
        assert!(rep.smallest_eigenvalue <= 1e-8);
        let data = random_dataset(&mut rng, 3, 2, 12, 0, 1);
        let rep = uniqueness_certificate(&data, UniquenessMode::FixedKernel).unwrap();
        assert!(rep.rank_condition && rep.positive_definite);
    }

    // Assemble the restricted Hessian column by column with hessian_apply,
    // in an orthonormal basis of (dA, dB, band offsets of dD).
    fn assembled_restricted_min(data: &Dataset, bandwidth: usize) -> f64 {
        let (n, k, m, q) = (data.state_dim(), data.input_dim(), data.m(), data.q());
        let counts = band_counts(m, q, bandwidth);
        let dim = n * n + n * k + bandwidth - 1;
        let basis = |idx: usize| -> TangentTuple {
            let mut t = TangentTuple::zeros(n, k, m);
            if idx < n * n {
                t.da[(idx / n, idx % n)] = 1.0;
            } else if idx < n * n + n * k {
                let j = idx - n * n;
                t.db[(j / k, j % k)] = 1.0;
            } else {
                let d = idx - n * n - n * k + 1;
                let w = 1.0 / (counts[d - 1] as f64).sqrt();
                for kk in q.saturating_sub(d)..m - d {
                    t.dd[(kk, kk + d)] = w;
                }
            }
            t
        };
        let mut mat = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let hj = hessian_apply(&basis(j), data).unwrap();
            for i in 0..dim {
                mat[(i, j)] = basis(i).inner(&hj);
            }
        }
        mat.symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn full_certificate_matches_assembled_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (n, k, m, q, bw, count) in [(2, 1, 9, 1, 3, 2), (3, 2, 10, 2, 3, 1), (2, 2, 5, 0, 2, 1), (1, 1, 8, 0, 3, 2)] {
            let data = random_dataset(&mut rng, n, k, m, q, count);
            let rep = uniqueness_certificate(&data, UniquenessMode::Full { bandwidth: bw }).unwrap();
            let oracle = assembled_restricted_min(&data, bw);
            assert_abs_diff_eq!(rep.smallest_eigenvalue, oracle, epsilon = 1e-8 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn lipschitz_estimate_can_underestimate_worst_case_curvature() {
        // Constant data makes X = U = Y = v; along the unit direction
        // (dA, dB, dD) = (-1, -1, v^T v) / sqrt(3) the gradient moves by 6,
        // while lipschitz_constant gives 2 sqrt(3).
        let c = 1.0 / 2.0f64.sqrt();
        let traj = Trajectory::new(DMatrix::from_element(1, 3, c), DMatrix::from_element(1, 2, c)).unwrap();
        let data = Dataset::new(0, 2, vec![traj]).unwrap();
        let lf = lipschitz_constant(&data);
        assert_abs_diff_eq!(lf, 2.0 * 3.0f64.sqrt(), epsilon = 1e-12);
        let s = 1.0 / 3.0f64.sqrt();
        let v = DVector::from_element(2, c);
        let delta = TangentTuple {
            da: DMatrix::from_element(1, 1, -s),
            db: DMatrix::from_element(1, 1, -s),
            dd: &v * v.transpose() * s,
        };
        assert_abs_diff_eq!(delta.norm(), 1.0, epsilon = 1e-12);
        let gain = hessian_apply(&delta, &data).unwrap().norm();
        assert_abs_diff_eq!(gain, 6.0, epsilon = 1e-12);
        assert!(gain > lf);
    }
}
