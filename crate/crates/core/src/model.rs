//! Non-Markovian state-space models `Y D = A X + B U` and their trajectories.

use nalgebra::DMatrix;

use crate::error::{shape_err, Error, Result};
use crate::kernel::CausalBandKernel;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    kernel: CausalBandKernel,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, kernel: CausalBandKernel) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(shape_err(
                "state matrix A",
                "square",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != a.nrows() {
            return Err(shape_err("input matrix B rows", a.nrows(), b.nrows()));
        }
        Ok(Self { a, b, kernel })
    }

    /// Markovian model `x_{t+1} = A x_t + B u_t`.
    pub fn markovian(a: DMatrix<f64>, b: DMatrix<f64>, m: usize) -> Result<Self> {
        let kernel = CausalBandKernel::identity_like(m.max(1), 0, 1)?;
        Self::new(a, b, kernel)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn kernel(&self) -> &CausalBandKernel {
        &self.kernel
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Number of initial states the recursion consumes (`q + 1`).
    pub fn initial_len(&self) -> usize {
        self.kernel.q() + 1
    }
}

/// One observed run: states `x_0 .. x_len` as columns and inputs
/// `u_0 .. u_{len-1}` as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(states: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        if states.ncols() == 0 {
            return Err(Error::Config("trajectory has no states".into()));
        }
        Ok(Self { states, inputs })
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn num_states(&self) -> usize {
        self.states.ncols()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    /// `E(t)`: the sum of all state components at each time.
    pub fn energy(&self) -> Vec<f64> {
        self.states.column_iter().map(|c| c.sum()).collect()
    }
}

/// `X`, `Y`, `U` with their first `q` columns zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

/// Runs the model forward from `q + 1` initial states.
///
/// The recursion is the column-wise reading of `Y D = A X + B U`:
/// `x_t = A x_{t-1} - sum_j c_j x_{t-j} + B u_{t-1}`, where lag terms that
/// reach the initial values `x_0 .. x_q` drop out because the leading `q`
/// columns of `Y` are zero.
pub fn simulate(
    model: &StateSpaceModel,
    initial: &DMatrix<f64>,
    inputs: &DMatrix<f64>,
) -> Result<Trajectory> {
    let n = model.state_dim();
    let q = model.kernel().q();
    if initial.nrows() != n {
        return Err(shape_err("initial state dimension", n, initial.nrows()));
    }
    if initial.ncols() != q + 1 {
        return Err(shape_err("number of initial states", q + 1, initial.ncols()));
    }
    if inputs.nrows() != model.input_dim() {
        return Err(shape_err(
            "input dimension",
            model.input_dim(),
            inputs.nrows(),
        ));
    }
    let m = inputs.ncols();
    if m < q + 1 {
        return Err(Error::Length {
            index: 0,
            what: "inputs",
            needed: q + 1,
            found: m,
        });
    }
    let kernel = model.kernel();
    let mut states = DMatrix::zeros(n, m + 1);
    states.columns_mut(0, q + 1).copy_from(initial);
    for t in q + 1..=m {
        let mut next = model.a() * states.column(t - 1) + model.b() * inputs.column(t - 1);
        for j in 1..kernel.bandwidth() {
            if t < q + 1 + j {
                break;
            }
            next.axpy(-kernel.coeff(j), &states.column(t - j), 1.0);
        }
        states.set_column(t, &next);
    }
    Trajectory::new(states, inputs.clone())
}

/// Simulates from the first `q + 1` states and all inputs of `traj`.
pub fn resimulate(model: &StateSpaceModel, traj: &Trajectory) -> Result<Trajectory> {
    let need = model.initial_len();
    if traj.num_states() < need {
        return Err(Error::Length {
            index: 0,
            what: "states",
            needed: need,
            found: traj.num_states(),
        });
    }
    let initial = traj.states().columns(0, need).into_owned();
    simulate(model, &initial, traj.inputs())
}

/// Data matrices for the first `m` columns of a trajectory.
pub fn build_data_matrices(traj: &Trajectory, q: usize, m: usize) -> Result<DataMatrices> {
    if m <= q {
        return Err(Error::Config(format!(
            "data length m={m} must exceed the nullity q={q}"
        )));
    }
    if traj.num_states() < m + 1 {
        return Err(Error::Length {
            index: 0,
            what: "states",
            needed: m + 1,
            found: traj.num_states(),
        });
    }
    if traj.num_inputs() < m {
        return Err(Error::Length {
            index: 0,
            what: "inputs",
            needed: m,
            found: traj.num_inputs(),
        });
    }
    let n = traj.state_dim();
    let k = traj.input_dim();
    let mut x = DMatrix::zeros(n, m);
    let mut y = DMatrix::zeros(n, m);
    let mut u = DMatrix::zeros(k, m);
    let w = m - q;
    x.columns_mut(q, w).copy_from(&traj.states().columns(q, w));
    y.columns_mut(q, w).copy_from(&traj.states().columns(q + 1, w));
    u.columns_mut(q, w).copy_from(&traj.inputs().columns(q, w));
    Ok(DataMatrices { x, y, u })
}

/// Stacked (Hankel) form over `Q` consecutive states.
///
/// The stacked state is `s_t = [x_{t-Q+1}; ..; x_t]`, and
/// `s_{t+1} = A_h s_t + B_h [u_{t-Q+1}; ..; u_t]`. The bottom block row of
/// `A_h` is `(0, -c_{Q-1}, .., -c_2, A - c_1)`.
pub fn hankel_companion(model: &StateSpaceModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.state_dim();
    let k = model.input_dim();
    let bw = model.kernel().bandwidth();
    let mut ah = DMatrix::zeros(n * bw, n * bw);
    for blk in 0..bw - 1 {
        ah.view_mut((blk * n, (blk + 1) * n), (n, n))
            .fill_with_identity();
    }
    let last = (bw - 1) * n;
    let identity = DMatrix::<f64>::identity(n, n);
    // block i of the stack is lag Q - i of the next state
    for blk in 1..bw {
        let lag = bw - blk;
        let mut coeff = -model.kernel().coeff(lag) * &identity;
        if lag == 1 {
            coeff += model.a();
        }
        ah.view_mut((last, blk * n), (n, n)).copy_from(&coeff);
    }
    if bw == 1 {
        ah.copy_from(model.a());
    }
    let mut bh = DMatrix::zeros(n * bw, k * bw);
    bh.view_mut((last, (bw - 1) * k), (n, k)).copy_from(model.b());
    (ah, bh)
}

/// Initial-value offset `lambda(t)` of the pseudoinverse ARX form, returned
/// as the columns of an `n x m` matrix `L` with `L D = 0`.
///
/// `L = [X0, -X0 K]` where `X0 = [x_0 .. x_{q-1}]` and
/// `K = D[:q, q:] (D[q:, q:])^{-1}`.
pub fn arx_like_offset(
    model: &StateSpaceModel,
    initial: &DMatrix<f64>,
    m: usize,
) -> Result<DMatrix<f64>> {
    let n = model.state_dim();
    let q = model.kernel().q();
    if initial.nrows() != n || initial.ncols() != q + 1 {
        return Err(shape_err(
            "initial states",
            format!("{n}x{}", q + 1),
            format!("{}x{}", initial.nrows(), initial.ncols()),
        ));
    }
    let kernel = model.kernel().with_len(m)?;
    let mut out = DMatrix::zeros(n, m);
    if q == 0 {
        return Ok(out);
    }
    let dense = kernel.to_dense();
    let pinv = crate::kernel::kernel_left_pseudoinverse(&kernel);
    let k = dense.view((0, q), (q, m - q)) * pinv.view((q, q), (m - q, m - q));
    let x0 = initial.columns(0, q);
    out.columns_mut(0, q).copy_from(&x0);
    out.columns_mut(q, m - q).copy_from(&(-(x0 * k)));
    Ok(out)
}

/// Relative Frobenius error of a resimulated trajectory over the states the
/// model predicts (columns `q+1 ..= len`).
pub fn relative_reconstruction_error(model: &StateSpaceModel, truth: &Trajectory) -> Result<f64> {
    let pred = resimulate(model, truth)?;
    Ok(relative_error_from(pred.states(), truth.states(), model.initial_len()))
}

pub(crate) fn relative_error_from(pred: &DMatrix<f64>, truth: &DMatrix<f64>, start: usize) -> f64 {
    let cols = truth.ncols().min(pred.ncols());
    if start >= cols {
        return 0.0;
    }
    let diff = pred.columns(start, cols - start) - truth.columns(start, cols - start);
    let denom = truth.columns(start, cols - start).norm();
    let num = diff.norm();
    if !num.is_finite() {
        return f64::INFINITY;
    }
    if denom == 0.0 {
        num
    } else {
        num / denom
    }
}
