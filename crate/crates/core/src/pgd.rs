//! Projected gradient descent with backtracking.

use std::io::Write;

use nalgebra::DMatrix;

use crate::constraints::{project_params, ConstraintSpec, MatrixConstraint};
use crate::error::{Error, Result};
use crate::kernel::{band_counts, CausalBandKernel};
use crate::moments::Moments;
use crate::objective::{gradient, Dataset, KernelParam, ParamPoint, TangentTuple};

/// Maximum stepsize divisions within one outer iteration.
pub const MAX_BACKTRACKS: usize = 200;
const MIN_STEPSIZE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Divide `t` by `eta` until the sufficient-decrease test holds.
    Backtracking,
    /// Fixed stepsize, no test.
    Constant(f64),
}

/// How the loss and gradient are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    /// Precomputed second moments; cost independent of `m` per step.
    #[default]
    Moments,
    /// Literal residuals and `m x m` kernel gradients.
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    pub t0: f64,
    pub eta: f64,
    pub max_steps: usize,
    pub theta0: Option<ParamPoint>,
    /// Stop once `f_l - f_{l+1} <= rel_tol * f_l`.
    pub rel_tol: Option<f64>,
    pub step_rule: StepRule,
    pub eval_path: EvalPath,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            t0: 0.3,
            eta: 1.05,
            max_steps: 10_000,
            theta0: None,
            rel_tol: None,
            step_rule: StepRule::Backtracking,
            eval_path: EvalPath::Moments,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::Config(format!("t0 must be positive, got {}", self.t0)));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must exceed 1, got {}", self.eta)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if let StepRule::Constant(t) = self.step_rule {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("constant stepsize must be positive, got {t}")));
            }
        }
        if let Some(tol) = self.rel_tol {
            if tol.is_nan() || tol < 0.0 {
                return Err(Error::Config(format!("rel_tol must be nonnegative, got {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub theta: ParamPoint,
    /// `f` at every iterate, starting with the initial point.
    pub loss_curve: Vec<f64>,
    /// Accepted stepsize of each outer iteration.
    pub stepsize_curve: Vec<f64>,
    pub backtrack_counts: Vec<usize>,
}

impl FitReport {
    pub fn steps(&self) -> usize {
        self.stepsize_curve.len()
    }

    /// `step,loss,stepsize,backtracks`; row 0 is the initial point.
    pub fn write_curve_csv<W: Write>(&self, out: W, t0: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "loss", "stepsize", "backtracks"])?;
        w.write_record(["0".to_string(), self.loss_curve[0].to_string(), t0.to_string(), "0".into()])?;
        for (i, (t, b)) in self.stepsize_curve.iter().zip(&self.backtrack_counts).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                self.loss_curve[i + 1].to_string(),
                t.to_string(),
                b.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "learning curve".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// `(I_n, 0, 1_m^q)` with the kernel padded to the band of `spec`, or the
/// fixed kernel when `D` is fixed.
pub fn default_initial_point(data: &Dataset, spec: &ConstraintSpec) -> Result<ParamPoint> {
    let n = data.state_dim();
    let k = data.input_dim();
    let d = match &spec.on_d {
        MatrixConstraint::CausalBand { q, bandwidth } => {
            KernelParam::Band(CausalBandKernel::identity_like(data.m(), *q, *bandwidth)?)
        }
        other => other.project_kernel(&KernelParam::Dense(DMatrix::identity(data.m(), data.m())))?,
    };
    Ok(ParamPoint::new(DMatrix::identity(n, n), DMatrix::zeros(n, k), d))
}

struct Accepted {
    theta: ParamPoint,
    loss: f64,
    scale: f64,
    t: f64,
    backtracks: usize,
}

struct Current<'a> {
    theta: &'a ParamPoint,
    loss: f64,
    scale: f64,
}

/// Fits `(A, B, D)` to the dataset within the constraint set.
pub fn pgd_fit(data: &Dataset, spec: &ConstraintSpec, cfg: &PgdConfig) -> Result<FitReport> {
    cfg.validate()?;
    let n = data.state_dim();
    let k = data.input_dim();
    let m = data.m();
    spec.validate(n, k, m)?;
    if let MatrixConstraint::CausalBand { q, .. } = spec.on_d {
        if q != data.q() {
            return Err(Error::Config(format!(
                "kernel nullity {q} differs from the dataset nullity {}",
                data.q()
            )));
        }
    }
    let mut theta = match &cfg.theta0 {
        Some(t) => t.clone(),
        None => default_initial_point(data, spec)?,
    };
    crate::objective::loss(&theta, data)?;

    let moments = match (cfg.eval_path, &spec.on_d) {
        (EvalPath::Dense, _) => None,
        (EvalPath::Moments, MatrixConstraint::CausalBand { bandwidth, .. }) => {
            Some(Moments::banded(data, *bandwidth)?)
        }
        (EvalPath::Moments, MatrixConstraint::Fixed(f)) => Some(Moments::fixed_dense(data, f)?),
        _ => None,
    };
    let fixed_d = match &spec.on_d {
        MatrixConstraint::Fixed(f) => Some(f),
        _ => None,
    };
    let counts = match spec.on_d {
        MatrixConstraint::CausalBand { q, bandwidth } => band_counts(m, q, bandwidth),
        _ => Vec::new(),
    };
    let on_moments = |theta: &ParamPoint| -> bool {
        let Some(mom) = &moments else { return false };
        match fixed_d {
            Some(f) => theta.d.to_dense() == *f,
            None => mom.supports(&theta.d),
        }
    };

    let (mut f, mut scale) = if on_moments(&theta) {
        let mom = moments.as_ref().expect("moments available");
        mom.loss(&theta.a, &theta.b, &coeffs_of(&theta.d))
    } else {
        dense_loss(&theta, data)?
    };
    check_finite(f, 0, "loss")?;

    let mut t = match cfg.step_rule {
        StepRule::Backtracking => cfg.t0,
        StepRule::Constant(c) => c,
    };
    let mut report = FitReport {
        theta: theta.clone(),
        loss_curve: vec![f],
        stepsize_curve: Vec::with_capacity(cfg.max_steps),
        backtrack_counts: Vec::with_capacity(cfg.max_steps),
    };
    for step in 1..=cfg.max_steps {
        let cur = Current {
            theta: &theta,
            loss: f,
            scale,
        };
        let acc = if on_moments(&theta) {
            let mom = moments.as_ref().expect("moments available");
            moments_step(mom, &counts, spec, &cur, t, cfg, step)?
        } else {
            dense_step(data, spec, &cur, t, cfg, step)?
        };
        let prev = f;
        theta = acc.theta;
        f = acc.loss;
        scale = acc.scale;
        t = acc.t;
        report.loss_curve.push(f);
        report.stepsize_curve.push(t);
        report.backtrack_counts.push(acc.backtracks);
        if let Some(tol) = cfg.rel_tol {
            if prev - f <= tol * prev {
                break;
            }
        }
    }
    report.theta = theta;
    Ok(report)
}

fn coeffs_of(d: &KernelParam) -> Vec<f64> {
    match d {
        KernelParam::Band(k) => k.coeffs().to_vec(),
        KernelParam::Dense(_) => Vec::new(),
    }
}

fn check_finite(v: f64, step: usize, what: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step, what })
    }
}

/// Rounding allowance for comparing two loss evaluations of this scale.
fn slack(scale_a: f64, scale_b: f64, terms: usize) -> f64 {
    4.0 * f64::EPSILON * (terms as f64).sqrt() * (scale_a + scale_b)
}

/// Literal loss together with `sum ||(|Y||D| + |A||X| + |B||U|)||^2`.
fn dense_loss(theta: &ParamPoint, data: &Dataset) -> Result<(f64, f64)> {
    let loss = crate::objective::loss(theta, data)?;
    let ad = theta.d.to_dense().abs();
    let aa = theta.a.abs();
    let ab = theta.b.abs();
    let scale = data
        .matrices()
        .iter()
        .map(|dm| (dm.y.abs() * &ad + &aa * dm.x.abs() + &ab * dm.u.abs()).norm_squared())
        .sum();
    Ok((loss, scale))
}

fn backtrack(t: f64, eta: f64, count: usize, step: usize) -> Result<f64> {
    let next = t / eta;
    if count >= MAX_BACKTRACKS || next < MIN_STEPSIZE {
        return Err(Error::BacktrackUnderflow { step, stepsize: next });
    }
    Ok(next)
}

fn dense_step(
    data: &Dataset,
    spec: &ConstraintSpec,
    cur: &Current<'_>,
    mut t: f64,
    cfg: &PgdConfig,
    step: usize,
) -> Result<Accepted> {
    let g = gradient(cur.theta, data)?;
    check_finite(g.norm_squared(), step, "gradient")?;
    let here = cur.theta.to_tangent();
    let terms = data.m() * (data.state_dim() + data.input_dim() + data.m());
    let mut backtracks = 0;
    loop {
        let ambient = here.sub(&g.scaled(t));
        let raw = ParamPoint::new(ambient.da, ambient.db, KernelParam::Dense(ambient.dd));
        let cand = project_params(&raw, spec)?;
        let diff: TangentTuple = cand.to_tangent().sub(&here);
        let (fc, sc) = dense_loss(&cand, data)?;
        check_finite(fc, step, "loss")?;
        let accept = match cfg.step_rule {
            StepRule::Constant(_) => true,
            StepRule::Backtracking => {
                let bound = cur.loss + diff.inner(&g) + diff.norm_squared() / (2.0 * t);
                fc <= bound + slack(cur.scale, sc, terms)
            }
        };
        if accept {
            return Ok(Accepted {
                theta: cand,
                loss: fc,
                scale: sc,
                t,
                backtracks,
            });
        }
        t = backtrack(t, cfg.eta, backtracks, step)?;
        backtracks += 1;
    }
}

fn moments_step(
    mom: &Moments,
    counts: &[usize],
    spec: &ConstraintSpec,
    cur: &Current<'_>,
    mut t: f64,
    cfg: &PgdConfig,
    step: usize,
) -> Result<Accepted> {
    let theta = cur.theta;
    let coeffs = coeffs_of(&theta.d);
    let g = mom.evaluate(&theta.a, &theta.b, &coeffs);
    check_finite(g.da.norm_squared() + g.db.norm_squared() + g.loss, step, "gradient")?;
    let mut backtracks = 0;
    loop {
        let a = spec.on_a.project(&(&theta.a - &g.da * t))?;
        let b = spec.on_b.project(&(&theta.b - &g.db * t))?;
        let c: Vec<f64> = coeffs
            .iter()
            .zip(&g.diag_sums)
            .zip(counts)
            .map(|((c, s), &cnt)| c - t * s / cnt as f64)
            .collect();
        let (fc, sc) = mom.loss(&a, &b, &c);
        check_finite(fc, step, "loss")?;
        let accept = match cfg.step_rule {
            StepRule::Constant(_) => true,
            StepRule::Backtracking => {
                let da = &a - &theta.a;
                let db = &b - &theta.b;
                let mut inner = da.dot(&g.da) + db.dot(&g.db);
                let mut norm = da.norm_squared() + db.norm_squared();
                for (((cn, co), s), &cnt) in c.iter().zip(&coeffs).zip(&g.diag_sums).zip(counts) {
                    let delta = cn - co;
                    inner += delta * s;
                    norm += cnt as f64 * delta * delta;
                }
                let bound = cur.loss + inner + norm / (2.0 * t);
                fc <= bound + slack(cur.scale, sc, mom.terms())
            }
        };
        if accept {
            let d = match &theta.d {
                KernelParam::Band(k) if !c.is_empty() => {
                    KernelParam::Band(CausalBandKernel::new(k.m(), k.q(), k.bandwidth(), c)?)
                }
                other => other.clone(),
            };
            return Ok(Accepted {
                theta: ParamPoint::new(a, b, d),
                loss: fc,
                scale: sc,
                t,
                backtracks,
            });
        }
        t = backtrack(t, cfg.eta, backtracks, step)?;
        backtracks += 1;
    }
}
