//! Kernel methods selectable from the command line.

use clap::ValueEnum;
use heatpar_core::bessel::{Lattice, LatticeKernel};
use heatpar_core::embed1d::{averaged_parametrix, build_bumps, build_voronoi, IntervalDomain};
use heatpar_core::oracle::{expm_heat_kernel, Snapshots, SpectralDecomposition};
use heatpar_core::parametrix::{
    diagonal_parametrix, dirichlet_parametrix, heat_kernel, restriction_parametrix, CompleteSubgraphKernel,
    NeumannSeriesResult,
};
use heatpar_core::{ClosedFormKernel, KernelSeries, Matrix, Parametrix, TimeGrid, Truncation};

use crate::document::{AmbientKernelKind, GraphDocument};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Spectral,
    Expm,
    ParametrixRestriction,
    ParametrixDiagonal,
    ParametrixEmbed,
    Dirichlet,
    ClosedFormComplete,
    ClosedFormHalfline,
}

impl Method {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    fn is_parametrix(self) -> bool {
        matches!(self, Method::ParametrixRestriction | Method::ParametrixDiagonal | Method::ParametrixEmbed | Method::Dirichlet)
    }
}

/// Boundary condition at 0 for the half-line closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub t_max: f64,
    pub steps: usize,
    pub tol: f64,
    pub boundary: Boundary,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(CliError::Input(format!("--t-max must be positive, got {}", self.t_max)));
        }
        if self.steps < 1 {
            return Err(CliError::Input("--steps must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Input(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn uniform_grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::uniform(self.t_max, self.steps)?)
    }

    /// Graded grid for embedded parametrices; `steps` caps the largest step at t_max/steps.
    pub fn graded_grid(&self) -> Result<TimeGrid, CliError> {
        let h_max = (self.t_max / self.steps as f64).min(2.5e-3);
        Ok(TimeGrid::graded(self.t_max, h_max.min(1e-6), 0.0125, h_max)?)
    }
}

/// A parametrix run with its intermediate series.
pub struct ParametrixRun {
    pub parametrix: Parametrix,
    pub series: NeumannSeriesResult,
    pub kernel: KernelSeries,
}

impl ParametrixRun {
    pub fn summary(&self) -> String {
        let tail = self.series.certified_tail.map_or("none (observed truncation)".to_string(), |t| format!("{t:.3e}"));
        format!("{} Neumann terms, certified tail {tail}", self.series.terms_used)
    }
}

/// Kernel values at a list of times.
pub struct KernelTable {
    pub snapshots: Snapshots,
    pub note: Option<String>,
}

fn ambient<'a>(doc: &'a GraphDocument, m: Method) -> Result<&'a crate::document::Ambient, CliError> {
    doc.ambient
        .as_ref()
        .ok_or_else(|| CliError::Input(format!("method {} needs an [ambient] block", m.name())))
}

pub fn run_parametrix(doc: &GraphDocument, m: Method, cfg: &RunConfig) -> Result<ParametrixRun, CliError> {
    let (parametrix, truncation) = match m {
        Method::ParametrixDiagonal => (diagonal_parametrix(&doc.graph, &cfg.uniform_grid()?)?, Truncation::FactorialBound { tol: cfg.tol }),
        Method::ParametrixRestriction | Method::Dirichlet => {
            let a = ambient(doc, m)?;
            let grid = cfg.uniform_grid()?;
            let kernel: Box<dyn ClosedFormKernel> = match a.kind {
                AmbientKernelKind::Complete => Box::new(a.complete_kernel()?),
                AmbientKernelKind::Integers => Box::new(a.lattice_kernel()?),
            };
            let p = if m == Method::Dirichlet {
                dirichlet_parametrix(&a.embedding, kernel.as_ref(), &grid)?
            } else {
                restriction_parametrix(&a.embedding, kernel.as_ref(), &grid)?
            };
            (p, Truncation::FactorialBound { tol: cfg.tol })
        }
        Method::ParametrixEmbed => {
            let pos = doc
                .positions
                .as_ref()
                .ok_or_else(|| CliError::Input("method parametrix-embed needs a [positions] block".into()))?;
            let grid = cfg.graded_grid()?;
            let d = IntervalDomain::certified(pos.length, grid.node(1), 512)?;
            let bumps = build_bumps(&build_voronoi(&pos.at, pos.length, pos.delta_fraction)?)?;
            (averaged_parametrix(&d, &bumps, &doc.graph, &grid, pos.normalization)?, Truncation::Observed { tol: cfg.tol })
        }
        _ => return Err(CliError::Input(format!("{} is not a parametrix method", m.name()))),
    };
    let (kernel, series) = heat_kernel(&parametrix, truncation)?;
    Ok(ParametrixRun { parametrix, series, kernel })
}

/// Evaluates a pointwise method at the given times.
pub fn evaluate_at(doc: &GraphDocument, m: Method, cfg: &RunConfig, times: &[f64]) -> Result<Snapshots, CliError> {
    let n = doc.graph.n();
    let ids: Vec<usize> = (0..n).collect();
    let from_kernel = |k: &dyn ClosedFormKernel| -> Result<Snapshots, CliError> {
        times.iter().map(|&t| Ok((t, Matrix::from_rows(&rows(k.block(&ids, &ids, t)?, n))?))).collect()
    };
    match m {
        Method::Spectral => {
            let dec = SpectralDecomposition::new(&doc.graph)?;
            Ok(times.iter().map(|&t| (t, dec.heat_kernel(t))).collect())
        }
        Method::Expm => times.iter().map(|&t| Ok((t, expm_heat_kernel(&doc.graph, t)?))).collect(),
        Method::ClosedFormComplete => match &doc.ambient {
            Some(a) if a.kind == AmbientKernelKind::Complete => from_kernel(&CompleteSubgraphKernel::new(&a.embedding)?),
            Some(_) => Err(CliError::Input("closed-form-complete needs a complete ambient graph".into())),
            None => {
                let unit_complete = (0..n).all(|x| (0..n).all(|y| doc.graph.weight(x, y) == if x == y { 0.0 } else { 1.0 }));
                if !unit_complete || n < 2 {
                    return Err(CliError::Input("closed-form-complete needs a unit-weight complete graph or a complete ambient".into()));
                }
                from_kernel(&heatpar_core::parametrix::complete_graph_kernel(n)?)
            }
        },
        Method::ClosedFormHalfline => {
            let lattice = match cfg.boundary {
                Boundary::Neumann => Lattice::HalfLine,
                Boundary::Dirichlet => Lattice::DirichletHalfLine,
            };
            from_kernel(&LatticeKernel::new(doc.halfline_labels()?, lattice)?)
        }
        _ => Err(CliError::Input(format!("{} is not a pointwise method", m.name()))),
    }
}

fn rows(flat: Vec<f64>, n: usize) -> Vec<Vec<f64>> {
    flat.chunks(n).map(|c| c.to_vec()).collect()
}

pub fn kernel_table(doc: &GraphDocument, m: Method, cfg: &RunConfig) -> Result<KernelTable, CliError> {
    if m.is_parametrix() {
        let run = run_parametrix(doc, m, cfg)?;
        let note = Some(run.summary());
        let snapshots = heatpar_core::oracle::series_snapshots(&run.kernel);
        Ok(KernelTable { snapshots, note })
    } else {
        let times = cfg.uniform_grid()?.nodes().to_vec();
        Ok(KernelTable { snapshots: evaluate_at(doc, m, cfg, &times)?, note: None })
    }
}

/// `reference` evaluated on the times produced by `method`.
pub fn paired_tables(doc: &GraphDocument, method: Method, reference: Method, cfg: &RunConfig) -> Result<(KernelTable, KernelTable), CliError> {
    let a = kernel_table(doc, method, cfg)?;
    let b = if reference.is_parametrix() {
        kernel_table(doc, reference, cfg)?
    } else {
        let times: Vec<f64> = a.snapshots.iter().map(|(t, _)| *t).collect();
        KernelTable { snapshots: evaluate_at(doc, reference, cfg, &times)?, note: None }
    };
    Ok((a, b))
}
