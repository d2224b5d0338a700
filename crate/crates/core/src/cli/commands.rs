use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::load_run_config;
use super::{Cli, Command, CompareArgs, ConstraintPreset, DmdcArgs, EvaluateArgs, FitArgs, PlotArgs, PlotKind, ShiftArg, SimulateArgs};
use crate::constraints::{ConstraintSpec, LaplacianConstraint, MatrixConstraint};
use crate::dmdc::{dmdc_fit, dmdc_rank_scan, FitSelection};
use crate::error::{Error, Result};
use crate::io::{
    load_dataset, load_model, read_json, save_dataset, save_model, write_json, write_text, ConstraintSpecJson, GraphJson,
};
use crate::model::{relative_error_from, resimulate, StateSpaceModel, Trajectory};
use crate::objective::{Dataset, ParamPoint};
use crate::pgd::{pgd_fit, PgdConfig};
use crate::plot::{render, Panel, Series};
use crate::synth::{energy_deviation, generate_suite, SuiteConfig};

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate => generate(cli),
        Command::Fit(args) => fit(cli, args),
        Command::Dmdc(args) => dmdc(cli, args),
        Command::Simulate(args) => simulate(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Plot(args) => plot(cli, args),
        Command::Compare(args) => compare(cli, args),
    }
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct GridSummary {
    #[serde(rename = "Lx")]
    lx: usize,
    #[serde(rename = "Ly")]
    ly: usize,
    w0: f64,
    w1: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SetPaths {
    train: String,
    test: String,
    energy: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ModelPaths {
    markov: String,
    nonmarkov: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct DatasetPaths {
    markov: SetPaths,
    nonmarkov: SetPaths,
}

/// Suite manifest; paths are relative to the manifest's directory.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Manifest {
    grid: GridSummary,
    h: f64,
    config: SuiteConfig,
    graph: String,
    models: ModelPaths,
    datasets: DatasetPaths,
}

fn generate(cli: &Cli) -> Result<()> {
    let cfg = load_run_config(cli.config.as_deref(), cli.preset, cli.seed)?;
    let suite = generate_suite(&cfg.suite)?;
    let dir = out_path(cli, "suite");
    let sets = |name: &str| SetPaths {
        train: format!("{name}/train.json"),
        test: format!("{name}/test.json"),
        energy: format!("{name}/energy.json"),
    };
    let manifest = Manifest {
        grid: GridSummary {
            lx: cfg.suite.lx,
            ly: cfg.suite.ly,
            w0: cfg.suite.w0,
            w1: cfg.suite.w1,
            seed: cfg.suite.seed,
        },
        h: suite.h,
        config: cfg.suite.clone(),
        graph: "graph.json".into(),
        models: ModelPaths {
            markov: "models/markov.json".into(),
            nonmarkov: "models/nonmarkov.json".into(),
        },
        datasets: DatasetPaths {
            markov: sets("markov"),
            nonmarkov: sets("nonmarkov"),
        },
    };
    write_json(&dir.join("graph.json"), &GraphJson::from(&suite.grid))?;
    save_model(&dir.join(&manifest.models.markov), &suite.markov.model)?;
    save_model(&dir.join(&manifest.models.nonmarkov), &suite.nonmarkov.model)?;
    let mut rows = Vec::new();
    for (name, gt, paths) in [
        ("markov", &suite.markov, &manifest.datasets.markov),
        ("nonmarkov", &suite.nonmarkov, &manifest.datasets.nonmarkov),
    ] {
        for (set, data, path) in [
            ("train", &gt.train, &paths.train),
            ("test", &gt.test, &paths.test),
            ("energy", &gt.energy, &paths.energy),
        ] {
            save_dataset(&dir.join(path), data)?;
            rows.push(format!(
                "{name:<10} {set:<7} {:>5} {:>5} {:>5} {:>6} {:>3}",
                data.len(),
                data.state_dim(),
                data.input_dim(),
                data.m(),
                data.q()
            ));
        }
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    if !cli.quiet {
        println!("{:<10} {:<7} {:>5} {:>5} {:>5} {:>6} {:>3}", "truth", "set", "count", "n", "k", "m", "q");
        for r in rows {
            println!("{r}");
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn fit_constraints(args: &FitArgs, data: &Dataset) -> Result<ConstraintSpec> {
    let q = data.q();
    let bandwidth = args.bandwidth.unwrap_or(q + 1);
    let graph_mask = match &args.graph {
        Some(p) => Some(read_json::<GraphJson>(p)?.mask()?),
        None => None,
    };
    let needs_graph = || {
        graph_mask
            .clone()
            .ok_or_else(|| Error::Config(format!("--constraints {} needs --graph", args.constraints)))
    };
    let preset = ConstraintPreset::from_str_opt(&args.constraints);
    Ok(match preset {
        Some(ConstraintPreset::A1b) => ConstraintSpec::a1b(needs_graph()?, q, bandwidth),
        Some(ConstraintPreset::A2b) => {
            let mask = needs_graph()?;
            let n = mask.n();
            let shift = match args.laplacian_shift {
                ShiftArg::Identity => nalgebra::DMatrix::identity(n, n),
                ShiftArg::Zero => nalgebra::DMatrix::zeros(n, n),
            };
            ConstraintSpec {
                on_a: MatrixConstraint::ShiftedGraphLaplacian(LaplacianConstraint::with_shift(mask.clone(), shift)),
                ..ConstraintSpec::a2b(mask, q, bandwidth)
            }
        }
        Some(ConstraintPreset::None) => ConstraintSpec::unconstrained(q, bandwidth),
        None => read_json::<ConstraintSpecJson>(Path::new(&args.constraints))?
            .resolve(graph_mask.as_ref(), data.state_dim())?,
    })
}

impl ConstraintPreset {
    fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "a1b" => Some(Self::A1b),
            "a2b" => Some(Self::A2b),
            "none" => Some(Self::None),
            _ => None,
        }
    }
}

fn fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let run = load_run_config(cli.config.as_deref(), cli.preset, cli.seed)?;
    let data = load_dataset(&args.train)?;
    let spec = fit_constraints(args, &data)?;
    let theta0 = match &args.init {
        Some(p) => Some(ParamPoint::from_model(&load_model(p)?, data.m())?),
        None => None,
    };
    let cfg = PgdConfig {
        t0: args.t0.unwrap_or(run.fit.t0),
        eta: args.eta.unwrap_or(run.fit.eta),
        max_steps: args.steps.unwrap_or(run.fit.steps),
        theta0,
        ..PgdConfig::default()
    };
    let report = pgd_fit(&data, &spec, &cfg)?;
    let model = report.theta.to_model()?;
    let out = out_path(cli, "model.json");
    save_model(&out, &model)?;
    if let Some(curve) = &args.curve {
        report.write_curve_csv(create(curve)?, cfg.t0)?;
    }
    if !cli.quiet {
        let last_bt = report.backtrack_counts.iter().rposition(|&b| b > 0).map_or(0, |i| i + 1);
        println!(
            "steps {}  loss {:.6e} -> {:.6e}  stepsize {:.6e}  last backtrack at step {}",
            report.steps(),
            report.loss_curve[0],
            report.loss_curve.last().copied().unwrap_or(f64::NAN),
            report.stepsize_curve.last().copied().unwrap_or(cfg.t0),
            last_bt
        );
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn dmdc(cli: &Cli, args: &DmdcArgs) -> Result<()> {
    let data = load_dataset(&args.train)?;
    let selection = if args.pooled {
        FitSelection::Pooled
    } else {
        FitSelection::Single(args.fit_index)
    };
    let rank = match args.rank {
        Some(r) => r,
        None => {
            let scan = dmdc_rank_scan(&data, selection)?;
            if let Some(p) = &args.scan {
                scan.write_csv(create(p)?)?;
            }
            if !cli.quiet {
                println!("rank scan over 1..={}: best rank {} (mean error {:.6e})", scan.errors.len(), scan.best_rank, scan.best_error());
            }
            scan.best_rank
        }
    };
    let (a, b) = dmdc_fit(&data, selection, rank)?;
    let model = StateSpaceModel::markovian(a, b, data.m())?;
    let out = out_path(cli, "dmdc.json");
    save_model(&out, &model)?;
    if !cli.quiet {
        println!("rank {rank}; wrote {}", out.display());
    }
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_dataset(&args.dataset)?;
    let preds = data
        .trajectories()
        .iter()
        .map(|t| resimulate(&model, t))
        .collect::<Result<Vec<_>>>()?;
    let out = out_path(cli, "prediction.json");
    save_dataset(&out, &Dataset::new(data.q(), data.m(), preds)?)?;
    if !cli.quiet {
        println!("simulated {} trajectories; wrote {}", data.len(), out.display());
    }
    Ok(())
}

/// Aggregate evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct EvaluationSummary {
    trajectories: usize,
    mean_relative_error: f64,
    max_relative_error: f64,
    max_abs_energy_deviation: f64,
}

const REPORT_HEADER: [&str; 3] = ["trajectory", "relative_error", "max_abs_energy_deviation"];

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load_dataset(&args.dataset)?;
    let out = out_path(cli, "report.csv");
    let mut w = csv::Writer::from_writer(create(&out)?);
    w.write_record(REPORT_HEADER)?;
    let mut summary = EvaluationSummary {
        trajectories: data.len(),
        mean_relative_error: 0.0,
        max_relative_error: 0.0,
        max_abs_energy_deviation: 0.0,
    };
    for (i, truth) in data.trajectories().iter().enumerate() {
        let pred = resimulate(&model, truth)?;
        let err = relative_error_from(pred.states(), truth.states(), model.initial_len());
        let de = energy_deviation(&pred, truth)?.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        w.write_record([i.to_string(), err.to_string(), de.to_string()])?;
        summary.mean_relative_error += err / data.len().max(1) as f64;
        summary.max_relative_error = summary.max_relative_error.max(err);
        summary.max_abs_energy_deviation = summary.max_abs_energy_deviation.max(de);
    }
    w.flush().map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    let summary_path = args.summary.clone().unwrap_or_else(|| out.with_extension("summary.json"));
    write_json(&summary_path, &summary)?;
    if !cli.quiet {
        println!(
            "{} trajectories  mean error {:.6e}  max error {:.6e}  max |dE| {:.6e}",
            summary.trajectories, summary.mean_relative_error, summary.max_relative_error, summary.max_abs_energy_deviation
        );
    }
    Ok(())
}

fn labels_for(inputs: &[PathBuf], labels: &[String]) -> Vec<String> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            labels.get(i).cloned().unwrap_or_else(|| {
                p.file_stem().map_or_else(|| format!("series{i}"), |s| s.to_string_lossy().into_owned())
            })
        })
        .collect()
}

/// Reads named numeric columns from a CSV with a header row.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers()?.clone();
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::Config(format!("{} has no column \"{n}\"", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, &i) in cols.iter_mut().zip(&idx) {
            let field = rec.get(i).unwrap_or("");
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: \"{field}\" is not a number", path.display())))?;
            c.push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(Error::Config(format!("{} has no data rows", path.display())));
    }
    Ok(cols)
}

fn plot(cli: &Cli, args: &PlotArgs) -> Result<()> {
    if args.inputs.is_empty() {
        return Err(Error::Config("plot needs at least one --input".into()));
    }
    let labels = labels_for(&args.inputs, &args.labels);
    let panels = match args.kind {
        PlotKind::Curve | PlotKind::Scan => {
            let (x, y, x_label, y_label, title) = match args.kind {
                PlotKind::Curve => ("step", "loss", "step", "training loss", "Learning curve"),
                _ => ("rank", "mean_self_reconstruction_error", "rank", "mean relative error", "DMDc rank scan"),
            };
            let series = args
                .inputs
                .iter()
                .zip(&labels)
                .map(|(p, l)| {
                    let cols = read_columns(p, &[x, y])?;
                    Ok(Series::new(l.clone(), cols[0].iter().copied().zip(cols[1].iter().copied()).collect()))
                })
                .collect::<Result<Vec<_>>>()?;
            vec![Panel {
                title: args.title.clone().unwrap_or_else(|| title.into()),
                x_label: x_label.into(),
                y_label: y_label.into(),
                log_y: true,
                series,
            }]
        }
        PlotKind::Traces | PlotKind::Energy => {
            let truth_path = args
                .truth
                .as_ref()
                .ok_or_else(|| Error::Config("this plot needs --truth".into()))?;
            let truth = load_dataset(truth_path)?;
            let preds = args.inputs.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>>>()?;
            let pick = |d: &Dataset| {
                d.trajectories().get(args.trajectory).cloned().ok_or_else(|| {
                    Error::Config(format!("trajectory {} out of range for {} trajectories", args.trajectory, d.len()))
                })
            };
            let t_truth = pick(&truth)?;
            let t_preds = preds.iter().map(pick).collect::<Result<Vec<_>>>()?;
            if args.kind == PlotKind::Energy {
                let series = t_preds
                    .iter()
                    .zip(&labels)
                    .map(|(p, l)| {
                        let dev = energy_deviation(p, &t_truth)?;
                        Ok(Series::new(l.clone(), dev.iter().enumerate().map(|(t, d)| (t as f64, *d)).collect()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                vec![Panel {
                    title: args.title.clone().unwrap_or_else(|| "Energy deviation".into()),
                    x_label: "t".into(),
                    y_label: "dE(t)".into(),
                    log_y: false,
                    series,
                }]
            } else {
                let n = t_truth.state_dim();
                if args.cells.is_empty() {
                    return Err(Error::Config("--cells must list at least one cell".into()));
                }
                args.cells
                    .iter()
                    .map(|&c| {
                        if c >= n {
                            return Err(Error::Config(format!("cell {c} out of range for {n} states")));
                        }
                        let row = |tr: &Trajectory| -> Vec<(f64, f64)> {
                            tr.states().row(c).iter().enumerate().map(|(t, v)| (t as f64, *v)).collect()
                        };
                        let mut series = vec![Series::new("truth", row(&t_truth))];
                        for (p, l) in t_preds.iter().zip(&labels) {
                            series.push(Series::new(l.clone(), row(p)).dashed());
                        }
                        Ok(Panel {
                            title: format!("{} cell {c}", args.title.clone().unwrap_or_else(|| "State".into())),
                            x_label: "t".into(),
                            y_label: format!("x_{c}"),
                            log_y: false,
                            series,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        }
    };
    let out = out_path(cli, "plot.svg");
    write_text(&out, &render(&panels))?;
    if !cli.quiet {
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn compare(cli: &Cli, args: &CompareArgs) -> Result<()> {
    let labels = labels_for(&args.inputs, &args.labels);
    let out = out_path(cli, "comparison.csv");
    let mut rows = Vec::new();
    for (p, l) in args.inputs.iter().zip(&labels) {
        let cols = read_columns(p, &REPORT_HEADER)?;
        let count = cols[1].len();
        let mean = cols[1].iter().sum::<f64>() / count as f64;
        let max = cols[1].iter().copied().fold(0.0f64, f64::max);
        let de = cols[2].iter().copied().fold(0.0f64, f64::max);
        rows.push((l.clone(), count, mean, max, de));
    }
    let mut w = csv::Writer::from_writer(create(&out)?);
    w.write_record(["report", "trajectories", "mean_relative_error", "max_relative_error", "max_abs_energy_deviation"])?;
    for (l, c, mean, max, de) in &rows {
        w.write_record([l.clone(), c.to_string(), mean.to_string(), max.to_string(), de.to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    if !cli.quiet {
        println!("{:<20} {:>6} {:>14} {:>14} {:>14}", "report", "count", "mean error", "max error", "max |dE|");
        let best = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        for (l, c, mean, max, de) in &rows {
            let ratio = if best > 0.0 { mean / best } else { f64::NAN };
            println!("{l:<20} {c:>6} {mean:>14.6e} {max:>14.6e} {de:>14.6e}  x{ratio:.2}");
        }
    }
    Ok(())
}
