//! JSON wire formats for kernels, models, datasets, graphs and constraints.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSpec, LaplacianConstraint, Mask, MatrixConstraint, SumAxis};
use crate::error::{shape_err, Error, Result};
use crate::kernel::CausalBandKernel;
use crate::model::{StateSpaceModel, Trajectory};
use crate::objective::Dataset;
use crate::synth::CylinderGrid;

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a matrix from rows; `cols` fixes the width when there are no rows.
pub fn rows_to_matrix(rows: &[Vec<f64>], cols: Option<usize>, what: &str) -> Result<DMatrix<f64>> {
    let width = rows.first().map(Vec::len).or(cols).unwrap_or(0);
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(shape_err(what, format!("rows of length {width}"), format!("a row of length {}", bad.len())));
    }
    if let Some(c) = cols {
        if c != width {
            return Err(shape_err(what, format!("{c} columns"), width));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    pub m: usize,
    pub q: usize,
    #[serde(rename = "Q")]
    pub bandwidth: usize,
    pub coeffs: Vec<f64>,
}

impl From<&CausalBandKernel> for KernelJson {
    fn from(k: &CausalBandKernel) -> Self {
        Self {
            m: k.m(),
            q: k.q(),
            bandwidth: k.bandwidth(),
            coeffs: k.coeffs().to_vec(),
        }
    }
}

impl KernelJson {
    pub fn into_kernel(self) -> Result<CausalBandKernel> {
        CausalBandKernel::new(self.m, self.q, self.bandwidth, self.coeffs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryJson {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

impl From<&Trajectory> for TrajectoryJson {
    fn from(t: &Trajectory) -> Self {
        Self {
            states: matrix_to_rows(t.states()),
            inputs: matrix_to_rows(t.inputs()),
        }
    }
}

impl TrajectoryJson {
    pub fn into_trajectory(self) -> Result<Trajectory> {
        let states = rows_to_matrix(&self.states, None, "trajectory states")?;
        let len = states.ncols().saturating_sub(1);
        let inputs = rows_to_matrix(&self.inputs, Some(len), "trajectory inputs")?;
        Trajectory::new(states, inputs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub kernel: KernelJson,
}

impl From<&StateSpaceModel> for ModelJson {
    fn from(m: &StateSpaceModel) -> Self {
        Self {
            n: m.state_dim(),
            k: m.input_dim(),
            a: matrix_to_rows(m.a()),
            b: matrix_to_rows(m.b()),
            kernel: m.kernel().into(),
        }
    }
}

impl ModelJson {
    pub fn into_model(self) -> Result<StateSpaceModel> {
        let a = rows_to_matrix(&self.a, Some(self.n), "A")?;
        let b = rows_to_matrix(&self.b, Some(self.k), "B")?;
        if a.nrows() != self.n || b.nrows() != self.n {
            return Err(shape_err("model", format!("{} rows", self.n), format!("{} and {}", a.nrows(), b.nrows())));
        }
        StateSpaceModel::new(a, b, self.kernel.into_kernel()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetJson {
    pub q: usize,
    pub m: usize,
    pub trajectories: Vec<TrajectoryJson>,
}

impl From<&Dataset> for DatasetJson {
    fn from(d: &Dataset) -> Self {
        Self {
            q: d.q(),
            m: d.m(),
            trajectories: d.trajectories().iter().map(Into::into).collect(),
        }
    }
}

impl DatasetJson {
    pub fn into_dataset(self) -> Result<Dataset> {
        let trajs = self
            .trajectories
            .into_iter()
            .map(TrajectoryJson::into_trajectory)
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.q, self.m, trajs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    #[serde(rename = "Lx")]
    pub lx: usize,
    #[serde(rename = "Ly")]
    pub ly: usize,
    pub w0: f64,
    pub w1: f64,
    pub seed: u64,
    /// `[i, j, weight]` per undirected edge.
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&CylinderGrid> for GraphJson {
    fn from(g: &CylinderGrid) -> Self {
        let (w0, w1) = g.weight_range();
        Self {
            lx: g.lx(),
            ly: g.ly(),
            w0,
            w1,
            seed: g.seed(),
            edges: g.edges().to_vec(),
        }
    }
}

impl GraphJson {
    pub fn mask(&self) -> Result<Mask> {
        Mask::from_edges(self.lx * self.ly, self.edges.iter().map(|&(i, j, _)| (i, j)))
    }
}

/// Where a constraint's sparsity mask comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSource {
    /// `"dataset_graph"` or `"full"`.
    Named(String),
    Inline(Vec<Vec<bool>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftJson {
    Identity,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisJson {
    Columns,
    Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixConstraintJson {
    Full,
    Fixed {
        matrix: Vec<Vec<f64>>,
    },
    SymmetricMaskedNonneg {
        mask_from: MaskSource,
    },
    ShiftedGraphLaplacian {
        mask_from: MaskSource,
        #[serde(default = "default_shift")]
        shift: ShiftJson,
        #[serde(default = "default_axis")]
        sums: AxisJson,
        #[serde(default)]
        dykstra_tol: Option<f64>,
        #[serde(default)]
        dykstra_max_iter: Option<usize>,
    },
    NonnegativeDiagonal,
    CausalBand {
        q: usize,
        #[serde(rename = "Q")]
        bandwidth: usize,
    },
}

fn default_shift() -> ShiftJson {
    ShiftJson::Identity
}

fn default_axis() -> AxisJson {
    AxisJson::Columns
}

fn resolve_mask(src: &MaskSource, graph: Option<&Mask>, n: usize) -> Result<Mask> {
    match src {
        MaskSource::Named(name) if name == "dataset_graph" => graph
            .cloned()
            .ok_or_else(|| Error::Config("mask_from \"dataset_graph\" needs a graph file".into())),
        MaskSource::Named(name) if name == "full" => Ok(Mask::full(n)),
        MaskSource::Named(name) => Err(Error::Config(format!("unknown mask source \"{name}\""))),
        MaskSource::Inline(rows) => Mask::from_rows(rows),
    }
}

impl MatrixConstraintJson {
    /// Resolves against a graph mask and the state dimension `n`.
    pub fn resolve(&self, graph: Option<&Mask>, n: usize) -> Result<MatrixConstraint> {
        Ok(match self {
            MatrixConstraintJson::Full => MatrixConstraint::Full,
            MatrixConstraintJson::Fixed { matrix } => MatrixConstraint::Fixed(rows_to_matrix(matrix, None, "fixed matrix")?),
            MatrixConstraintJson::SymmetricMaskedNonneg { mask_from } => {
                MatrixConstraint::SymmetricMaskedNonneg(resolve_mask(mask_from, graph, n)?)
            }
            MatrixConstraintJson::ShiftedGraphLaplacian {
                mask_from,
                shift,
                sums,
                dykstra_tol,
                dykstra_max_iter,
            } => {
                let mask = resolve_mask(mask_from, graph, n)?;
                let size = mask.n();
                let shift = match shift {
                    ShiftJson::Identity => DMatrix::identity(size, size),
                    ShiftJson::Zero => DMatrix::zeros(size, size),
                };
                let mut lap = LaplacianConstraint::with_shift(mask, shift);
                lap.axis = match sums {
                    AxisJson::Columns => SumAxis::Columns,
                    AxisJson::Rows => SumAxis::Rows,
                };
                if let Some(t) = dykstra_tol {
                    lap.tol = *t;
                }
                if let Some(it) = dykstra_max_iter {
                    lap.max_iter = *it;
                }
                MatrixConstraint::ShiftedGraphLaplacian(lap)
            }
            MatrixConstraintJson::NonnegativeDiagonal => MatrixConstraint::NonnegativeDiagonal,
            MatrixConstraintJson::CausalBand { q, bandwidth } => MatrixConstraint::CausalBand {
                q: *q,
                bandwidth: *bandwidth,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpecJson {
    #[serde(rename = "A")]
    pub on_a: MatrixConstraintJson,
    #[serde(rename = "B")]
    pub on_b: MatrixConstraintJson,
    #[serde(rename = "D")]
    pub on_d: MatrixConstraintJson,
}

impl ConstraintSpecJson {
    pub fn resolve(&self, graph: Option<&Mask>, n: usize) -> Result<ConstraintSpec> {
        Ok(ConstraintSpec {
            on_a: self.on_a.resolve(graph, n)?,
            on_b: self.on_b.resolve(graph, n)?,
            on_d: self.on_d.resolve(graph, n)?,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

/// Parses JSON text; `origin` names the source in error messages.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: origin.to_string(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: "<memory>".into(),
        source,
    })?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<StateSpaceModel> {
    read_json::<ModelJson>(path)?.into_model()
}

pub fn save_model(path: &Path, model: &StateSpaceModel) -> Result<()> {
    write_json(path, &ModelJson::from(model))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_json::<DatasetJson>(path)?.into_dataset()
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_json(path, &DatasetJson::from(data))
}
