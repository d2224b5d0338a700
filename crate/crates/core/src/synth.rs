//! Synthetic diffusion benchmark on a cylindrical grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::constraints::Mask;
use crate::error::{Error, Result};
use crate::kernel::CausalBandKernel;
use crate::model::{simulate, StateSpaceModel, Trajectory};
use crate::objective::Dataset;

/// Weighted grid graph on a cylinder of circumference `lx` and height `ly`.
///
/// Cell `(x, y)` has index `x + lx * y`; rows wrap horizontally, columns do
/// not wrap vertically.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderGrid {
    lx: usize,
    ly: usize,
    w0: f64,
    w1: f64,
    seed: u64,
    edges: Vec<(usize, usize, f64)>,
}

impl CylinderGrid {
    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn weight_range(&self) -> (f64, f64) {
        (self.w0, self.w1)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.lx * self.ly
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        x + self.lx * y
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.lx, i / self.lx)
    }

    /// Undirected edges `(i, j, kappa_ij)` in generation order.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b, _)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Weighted adjacency `K`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut k = DMatrix::zeros(n, n);
        for &(i, j, w) in &self.edges {
            k[(i, j)] = w;
            k[(j, i)] = w;
        }
        k
    }

    /// `L = K - diag(degree)`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = self.adjacency();
        for i in 0..self.n() {
            let deg: f64 = l.row(i).sum();
            l[(i, i)] = -deg;
        }
        l
    }

    /// Diagonal plus neighbor pairs.
    pub fn mask(&self) -> Mask {
        Mask::from_edges(self.n(), self.edges.iter().map(|&(i, j, _)| (i, j))).expect("edges in range")
    }
}

/// Uniform draw in `[0, 1)` from the top 53 bits of a 64-bit word.
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn build_cylinder_graph(lx: usize, ly: usize, w0: f64, w1: f64, seed: u64) -> Result<CylinderGrid> {
    if lx < 3 || ly < 1 {
        return Err(Error::Config(format!("cylinder needs lx >= 3 and ly >= 1, got {lx}x{ly}")));
    }
    if !(w0 > 0.0 && w0 <= w1 && w1.is_finite()) {
        return Err(Error::Config(format!("weights need 0 < w0 <= w1, got [{w0}, {w1}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(2 * lx * ly);
    for y in 0..ly {
        for x in 0..lx {
            let i = x + lx * y;
            let right = (x + 1) % lx + lx * y;
            edges.push((i, right, w0 + (w1 - w0) * unit_uniform(&mut rng)));
            if y + 1 < ly {
                edges.push((i, i + lx, w0 + (w1 - w0) * unit_uniform(&mut rng)));
            }
        }
    }
    Ok(CylinderGrid {
        lx,
        ly,
        w0,
        w1,
        seed,
        edges,
    })
}

/// `(markov, nonmarkov)` with `A = I + L h`, `B = h I` and the given kernel
/// for the non-Markovian system.
pub fn ground_truth_models(
    grid: &CylinderGrid,
    h: f64,
    m: usize,
    q: usize,
    bandwidth: usize,
    coeffs: &[f64],
) -> Result<(StateSpaceModel, StateSpaceModel)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {h}")));
    }
    let n = grid.n();
    let a = DMatrix::identity(n, n) + grid.laplacian() * h;
    let b = DMatrix::identity(n, n) * h;
    let markov = StateSpaceModel::markovian(a.clone(), b.clone(), m)?;
    let kernel = CausalBandKernel::new(m, q, bandwidth, coeffs.to_vec())?;
    let nonmarkov = StateSpaceModel::new(a, b, kernel)?;
    Ok((markov, nonmarkov))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Drives row `y = xi` with sign `sigma^x`.
    Parallel,
    /// Drives column `x = xi` with sign `sigma^y`.
    Perpendicular,
}

/// `u_{i,t} = sigma^x delta(xi, y) sin(2 pi nu t h)` (parallel) or the
/// transposed pattern (perpendicular), for `t = 0 .. m-1`.
pub fn make_input(
    grid: &CylinderGrid,
    orientation: Orientation,
    sigma: i32,
    nu: u32,
    xi: usize,
    m: usize,
    h: f64,
) -> Result<DMatrix<f64>> {
    let limit = match orientation {
        Orientation::Parallel => grid.ly(),
        Orientation::Perpendicular => grid.lx(),
    };
    if xi >= limit {
        return Err(Error::Config(format!("input index {xi} out of range 0..{limit}")));
    }
    let n = grid.n();
    let mut u = DMatrix::zeros(n, m);
    for i in 0..n {
        let (x, y) = grid.coords(i);
        let (on, power) = match orientation {
            Orientation::Parallel => (y == xi, x),
            Orientation::Perpendicular => (x == xi, y),
        };
        if !on {
            continue;
        }
        let sign = f64::from(sigma).powi(power as i32);
        for t in 0..m {
            u[(i, t)] = sign * (2.0 * PI * f64::from(nu) * t as f64 * h).sin();
        }
    }
    Ok(u)
}

/// Parameters of a benchmark suite; missing fields take full-scale values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(rename = "Lx")]
    pub lx: usize,
    #[serde(rename = "Ly")]
    pub ly: usize,
    pub w0: f64,
    pub w1: f64,
    pub seed: u64,
    pub m: usize,
    pub q: usize,
    #[serde(rename = "Q")]
    pub bandwidth: usize,
    pub coeffs: Vec<f64>,
    pub train_sigmas: Vec<i32>,
    pub train_nus: Vec<u32>,
    pub test_nus: Vec<u32>,
}

impl SuiteConfig {
    /// `20 x 5` cylinder, `m = 1000`.
    pub fn full_scale() -> Self {
        Self {
            lx: 20,
            ly: 5,
            w0: 0.5,
            w1: 1.5,
            seed: 42,
            m: 1000,
            q: 2,
            bandwidth: 3,
            coeffs: vec![0.03, -0.01],
            train_sigmas: vec![1, -1],
            train_nus: vec![3, 6],
            test_nus: (1..=8).collect(),
        }
    }

    /// `10 x 3` cylinder, `m = 200`.
    pub fn desk_scale() -> Self {
        Self {
            lx: 10,
            ly: 3,
            m: 200,
            ..Self::full_scale()
        }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.m as f64 - 1.0)
    }
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

/// One labelled trajectory of a generated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLabel {
    pub orientation: Orientation,
    pub sigma: i32,
    pub nu: u32,
    pub xi: usize,
}

#[derive(Debug, Clone)]
pub struct GroundTruthSets {
    pub model: StateSpaceModel,
    pub train: Dataset,
    pub test: Dataset,
    pub energy: Dataset,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSuite {
    pub config: SuiteConfig,
    pub grid: CylinderGrid,
    pub h: f64,
    pub train_labels: Vec<InputLabel>,
    pub test_labels: Vec<InputLabel>,
    pub markov: GroundTruthSets,
    pub nonmarkov: GroundTruthSets,
}

fn train_labels(cfg: &SuiteConfig) -> Vec<InputLabel> {
    let mut out = Vec::new();
    for &sigma in &cfg.train_sigmas {
        for &nu in &cfg.train_nus {
            for xi in 0..cfg.ly {
                out.push(InputLabel {
                    orientation: Orientation::Parallel,
                    sigma,
                    nu,
                    xi,
                });
            }
        }
    }
    out
}

fn test_labels(cfg: &SuiteConfig) -> Vec<InputLabel> {
    cfg.test_nus
        .iter()
        .map(|&nu| InputLabel {
            orientation: Orientation::Perpendicular,
            sigma: 1,
            nu,
            xi: 0,
        })
        .collect()
}

/// Train, test and energy sets for one ground truth.
pub fn make_datasets(
    model: &StateSpaceModel,
    grid: &CylinderGrid,
    cfg: &SuiteConfig,
) -> Result<(Dataset, Dataset, Dataset)> {
    let n = grid.n();
    let q = model.kernel().q();
    let m = cfg.m;
    let h = cfg.h();
    let zero_init = DMatrix::zeros(n, q + 1);
    let run = |labels: &[InputLabel]| -> Result<Dataset> {
        let trajs = labels
            .iter()
            .map(|l| {
                let u = make_input(grid, l.orientation, l.sigma, l.nu, l.xi, m, h)?;
                simulate(model, &zero_init, &u)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(q, m, trajs)
    };
    let train = run(&train_labels(cfg))?;
    let test = run(&test_labels(cfg))?;
    let ones = DMatrix::from_element(n, q + 1, 1.0);
    let energy = Dataset::new(q, m, vec![simulate(model, &ones, &DMatrix::zeros(n, m))?])?;
    Ok((train, test, energy))
}

pub fn generate_suite(cfg: &SuiteConfig) -> Result<BenchmarkSuite> {
    if cfg.m < 2 {
        return Err(Error::Config("m must be at least 2".into()));
    }
    if cfg.train_sigmas.iter().any(|s| s.abs() != 1) {
        return Err(Error::Config("train sigmas must be +1 or -1".into()));
    }
    let grid = build_cylinder_graph(cfg.lx, cfg.ly, cfg.w0, cfg.w1, cfg.seed)?;
    let h = cfg.h();
    let (markov, nonmarkov) = ground_truth_models(&grid, h, cfg.m, cfg.q, cfg.bandwidth, &cfg.coeffs)?;
    let sets = |model: StateSpaceModel| -> Result<GroundTruthSets> {
        let (train, test, energy) = make_datasets(&model, &grid, cfg)?;
        Ok(GroundTruthSets {
            model,
            train,
            test,
            energy,
        })
    };
    Ok(BenchmarkSuite {
        config: cfg.clone(),
        h,
        train_labels: train_labels(cfg),
        test_labels: test_labels(cfg),
        markov: sets(markov)?,
        nonmarkov: sets(nonmarkov)?,
        grid,
    })
}

/// `dE(t) = sum_i pred_t,i - sum_i truth_t,i`.
pub fn energy_deviation(pred: &Trajectory, truth: &Trajectory) -> Result<Vec<f64>> {
    if pred.num_states() != truth.num_states() || pred.state_dim() != truth.state_dim() {
        return Err(crate::error::shape_err(
            "energy deviation",
            format!("{}x{}", truth.state_dim(), truth.num_states()),
            format!("{}x{}", pred.state_dim(), pred.num_states()),
        ));
    }
    Ok(pred.energy().iter().zip(truth.energy()).map(|(p, t)| p - t).collect())
}

/// `max_t |dE(t)| / |E_truth(0)|`.
pub fn max_relative_energy_deviation(pred: &Trajectory, truth: &Trajectory) -> Result<f64> {
    let dev = energy_deviation(pred, truth)?;
    let e0 = truth.energy()[0].abs();
    let worst = dev.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    Ok(if e0 > 0.0 { worst / e0 } else { worst })
}
