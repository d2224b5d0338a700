//! Dynamic mode decomposition with control: truncated-SVD least squares.

use std::io::Write;

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::model::{relative_reconstruction_error, StateSpaceModel};
use crate::objective::{stack_rows, Dataset};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Which trajectories supply the fitting data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSelection {
    Single(usize),
    Pooled,
}

impl Default for FitSelection {
    fn default() -> Self {
        FitSelection::Single(0)
    }
}

/// SVD of `Z = [X; U]` with Markovian pairing, reusable across ranks.
#[derive(Debug, Clone)]
pub struct DmdcFactors {
    n: usize,
    y: DMatrix<f64>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    attainable: usize,
}

impl DmdcFactors {
    pub fn new(data: &Dataset, selection: FitSelection) -> Result<Self> {
        let data = if data.q() == 0 {
            data.clone()
        } else {
            data.with_nullity(0)?
        };
        let picked: Vec<usize> = match selection {
            FitSelection::Single(i) if i < data.len() => vec![i],
            FitSelection::Single(i) => {
                return Err(Error::Config(format!(
                    "fitting trajectory {i} out of range for {} trajectories",
                    data.len()
                )))
            }
            FitSelection::Pooled => (0..data.len()).collect(),
        };
        if picked.is_empty() {
            return Err(Error::Config("no trajectories to fit".into()));
        }
        let n = data.state_dim();
        let k = data.input_dim();
        let m = data.m();
        let cols = m * picked.len();
        let mut z = DMatrix::zeros(n + k, cols);
        let mut y = DMatrix::zeros(n, cols);
        for (slot, &i) in picked.iter().enumerate() {
            let dm = &data.matrices()[i];
            z.columns_mut(slot * m, m).copy_from(&stack_rows(&dm.x, &dm.u));
            y.columns_mut(slot * m, m).copy_from(&dm.y);
        }
        let svd = SVD::new(z, true, true);
        let smax = svd.singular_values.max();
        let attainable = if smax > 0.0 {
            svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count()
        } else {
            0
        };
        Ok(Self { n, y, svd, attainable })
    }

    /// Numerical rank of `Z`.
    pub fn attainable_rank(&self) -> usize {
        self.attainable
    }

    /// `[A B] = Y V_r S_r^{-1} W_r^T`.
    pub fn fit(&self, rank: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if rank == 0 || rank > self.attainable {
            return Err(Error::Rank {
                requested: rank,
                attainable: self.attainable,
            });
        }
        let u = self.svd.u.as_ref().expect("left vectors computed");
        let vt = self.svd.v_t.as_ref().expect("right vectors computed");
        let mut yv = &self.y * vt.rows(0, rank).transpose();
        for (j, s) in self.svd.singular_values.iter().take(rank).enumerate() {
            yv.column_mut(j).unscale_mut(*s);
        }
        let ab = yv * u.columns(0, rank).transpose();
        let n = self.n;
        Ok((ab.columns(0, n).into_owned(), ab.columns(n, ab.ncols() - n).into_owned()))
    }
}

pub fn dmdc_fit(data: &Dataset, selection: FitSelection, rank: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    DmdcFactors::new(data, selection)?.fit(rank)
}

/// Result of scanning every feasible truncation rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScan {
    pub best_rank: usize,
    /// `(rank, mean relative self-reconstruction error)`; non-finite errors
    /// are recorded as infinity.
    pub errors: Vec<(usize, f64)>,
}

impl RankScan {
    pub fn best_error(&self) -> f64 {
        self.errors
            .iter()
            .find(|(r, _)| *r == self.best_rank)
            .map_or(f64::INFINITY, |e| e.1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "mean_self_reconstruction_error"])?;
        for (r, e) in &self.errors {
            w.write_record([r.to_string(), e.to_string()])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "rank scan".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Fits at every rank and keeps the one that best reconstructs the training
/// trajectories by free simulation; ties go to the smaller rank.
pub fn dmdc_rank_scan(train: &Dataset, selection: FitSelection) -> Result<RankScan> {
    if train.is_empty() {
        return Err(Error::Config("rank scan needs at least one trajectory".into()));
    }
    let factors = DmdcFactors::new(train, selection)?;
    let max_rank = factors.attainable_rank();
    if max_rank == 0 {
        return Err(Error::Rank {
            requested: 1,
            attainable: 0,
        });
    }
    let mut errors = Vec::with_capacity(max_rank);
    for r in 1..=max_rank {
        let (a, b) = factors.fit(r)?;
        let model = StateSpaceModel::markovian(a, b, train.m())?;
        let mut total = 0.0;
        for traj in train.trajectories() {
            total += relative_reconstruction_error(&model, traj)?;
        }
        let mean = total / train.len() as f64;
        errors.push((r, if mean.is_finite() { mean } else { f64::INFINITY }));
    }
    let best_rank = errors
        .iter()
        .fold((0, f64::INFINITY), |best, &(r, e)| if e < best.1 { (r, e) } else { best })
        .0;
    let best_rank = if best_rank == 0 { 1 } else { best_rank };
    Ok(RankScan { best_rank, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, Trajectory};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn markov_case(seed: u64, m: usize, count: usize) -> (DMatrix<f64>, DMatrix<f64>, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 0.6 } else { rng.random_range(-0.2..0.2) });
        let b = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let model = StateSpaceModel::markovian(a.clone(), b.clone(), m).unwrap();
        let trajs = (0..count)
            .map(|_| {
                let init = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
                let u = DMatrix::from_fn(2, m, |_, _| rng.random_range(-1.0..1.0));
                simulate(&model, &init, &u).unwrap()
            })
            .collect();
        (a, b, Dataset::new(0, m, trajs).unwrap())
    }

    #[test]
    fn full_rank_recovers_markovian_system() {
        let (a, b, data) = markov_case(1, 12, 1);
        let (fa, fb) = dmdc_fit(&data, FitSelection::Single(0), 5).unwrap();
        assert!((&fa - &a).norm() <= 1e-8 * a.norm());
        assert!((&fb - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn full_rank_equals_pseudoinverse_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traj = Trajectory::new(
            DMatrix::from_fn(3, 11, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(2, 10, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let data = Dataset::new(0, 10, vec![traj]).unwrap();
        let (fa, fb) = dmdc_fit(&data, FitSelection::Single(0), 5).unwrap();
        let dm = &data.matrices()[0];
        let z = stack_rows(&dm.x, &dm.u);
        let oracle = &dm.y * z.clone().pseudo_inverse(1e-14).unwrap();
        assert!((fa - oracle.columns(0, 3)).amax() <= 1e-10);
        assert!((fb - oracle.columns(3, 2)).amax() <= 1e-10);
        let normal = &dm.y * z.transpose() * (&z * z.transpose()).try_inverse().unwrap();
        assert!((oracle - normal).amax() <= 1e-9);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut states = DMatrix::from_fn(2, 9, |_, _| rng.random_range(-1.0..1.0));
        states.columns_mut(1, 8).fill(0.0);
        let inputs = DMatrix::from_fn(1, 8, |_, _| rng.random_range(-1.0..1.0));
        let data = Dataset::new(0, 1, vec![Trajectory::new(states, inputs).unwrap()]).unwrap();
        let (fa, fb) = dmdc_fit(&data, FitSelection::Pooled, 1).unwrap();
        assert_eq!(fa.amax(), 0.0);
        assert_eq!(fb.amax(), 0.0);
    }

    #[test]
    fn rank_beyond_numerical_rank_is_reported() {
        let states = DMatrix::from_fn(2, 6, |_, j| j as f64);
        let inputs = DMatrix::from_fn(2, 5, |_, j| 2.0 * j as f64);
        let data = Dataset::new(0, 5, vec![Trajectory::new(states, inputs).unwrap()]).unwrap();
        let err = dmdc_fit(&data, FitSelection::Single(0), 3).unwrap_err();
        assert!(matches!(err, Error::Rank { requested: 3, attainable: 1 }));
        assert!(matches!(
            dmdc_fit(&data, FitSelection::Single(4), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scan_picks_full_rank_for_exact_data() {
        let (_, _, data) = markov_case(4, 15, 3);
        let scan = dmdc_rank_scan(&data, FitSelection::Single(0)).unwrap();
        assert_eq!(scan.errors.len(), 5);
        assert_eq!(scan.best_rank, 5);
        assert!(scan.best_error() <= 1e-6);
        assert!(scan.errors[..4].iter().all(|&(_, e)| e > scan.best_error()));
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,mean_self_reconstruction_error\n1,"));
    }

    #[test]
    fn scan_with_single_feasible_rank() {
        let states = DMatrix::from_fn(1, 5, |_, j| 0.5f64.powi(j as i32));
        let inputs = DMatrix::zeros(1, 4);
        let data = Dataset::new(0, 4, vec![Trajectory::new(states, inputs).unwrap()]).unwrap();
        let scan = dmdc_rank_scan(&data, FitSelection::Pooled).unwrap();
        assert_eq!(scan.best_rank, 1);
        assert_eq!(scan.errors.len(), 1);
    }

    #[test]
    fn non_markov_data_uses_markov_pairing() {
        let (_, _, data) = markov_case(5, 10, 2);
        let shifted = data.with_nullity(2).unwrap();
        let direct = dmdc_fit(&data, FitSelection::Pooled, 5).unwrap();
        let paired = dmdc_fit(&shifted, FitSelection::Pooled, 5).unwrap();
        assert_eq!(direct, paired);
    }
}
