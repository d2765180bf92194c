//! Convergence experiments, error metrics, the Monte Carlo oracle and the
//! command-line driver behind `hhw-bench`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::adi::{integrate, StepperConfig};
use crate::analytic;
use crate::discretize::{assemble, SemidiscreteSystem};
use crate::error::{Error, Result};
use crate::grid::{build_uniform_meshes, Grid3D, GridSpec};
use crate::model::{case_params, theta_default, CaseId, HhwParams, OptionKind, OptionSpec, SchemeId};

/// Open box `(K/2, 3K/2) x (0, 1) x (0, 1/4)` on which errors are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOfInterest {
    pub s: (f64, f64),
    pub v: (f64, f64),
    pub r: (f64, f64),
}

impl RegionOfInterest {
    pub fn for_strike(k: f64) -> Self {
        Self {
            s: (0.5 * k, 1.5 * k),
            v: (0.0, 1.0),
            r: (0.0, 0.25),
        }
    }

    pub fn contains(&self, s: f64, v: f64, r: f64) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| lo < x && x < hi;
        inside(s, self.s) && inside(v, self.v) && inside(r, self.r)
    }

    /// Flat indices of the active grid points inside the region.
    pub fn indices(&self, grid: &Grid3D) -> Vec<usize> {
        (0..grid.size())
            .filter(|&l| {
                let (s, v, r) = grid.point(l);
                self.contains(s, v, r)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Spatial,
    Temporal,
}

/// Maximum-norm error over the region of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub kind: ErrorKind,
    /// `m` for spatial errors, `dt` for temporal ones.
    pub resolution: f64,
    pub value: f64,
    pub point: (usize, usize, usize),
}

/// Largest `|a_l - b_l|` over `indices`.
pub fn max_error(
    kind: ErrorKind,
    resolution: f64,
    grid: &Grid3D,
    indices: &[usize],
    a: &[f64],
    b: &[f64],
) -> Result<ErrorReport> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter(
            "no grid points inside the region of interest".into(),
        ));
    }
    let mut best = (0.0, indices[0]);
    for &l in indices {
        let e = (a[l] - b[l]).abs();
        if !e.is_finite() {
            return Err(Error::NonFinite(format!("error at grid point {l}")));
        }
        if e > best.0 {
            best = (e, l);
        }
    }
    Ok(ErrorReport {
        kind,
        resolution,
        value: best.0,
        point: grid.unmap(best.1),
    })
}

/// Least-squares slope of `ln(error)` against `ln(h)` and the RMS residual.
pub fn fit_order(rows: &[(f64, f64)]) -> Result<(f64, f64)> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("need at least two rows to fit".into()));
    }
    if rows.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(Error::InvalidParameter(
            "order fit needs positive step sizes and errors".into(),
        ));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("step sizes are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - (my + slope * (x - mx));
            d * d
        })
        .sum();
    Ok((slope, (ss / n).sqrt()))
}

/// `(h, error)` rows sorted by decreasing `h`, with the fitted order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<(f64, f64)>,
    pub fitted_order: Option<f64>,
    pub fit_residual: Option<f64>,
}

impl ConvergenceTable {
    pub fn new(mut rows: Vec<(f64, f64)>) -> Self {
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let fit = if rows.len() >= 3 { fit_order(&rows).ok() } else { None };
        Self {
            rows,
            fitted_order: fit.map(|f| f.0),
            fit_residual: fit.map(|f| f.1),
        }
    }

    pub fn from_reports(reports: &[ErrorReport]) -> Self {
        Self::new(
            reports
                .iter()
                .map(|r| match r.kind {
                    ErrorKind::Spatial => (1.0 / r.resolution, r.value),
                    ErrorKind::Temporal => (r.resolution, r.value),
                })
                .collect(),
        )
    }

    /// True when the errors never increase as `h` decreases.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// A priced contract: model constants plus payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub case: CaseId,
    pub params: HhwParams,
    pub option: OptionSpec,
}

impl Problem {
    /// Case constants with the given option kind; `barrier` is used only for
    /// the up-and-out call.
    pub fn new(case: CaseId, kind: OptionKind, barrier: f64, zero_cross: bool) -> Result<Self> {
        let (mut params, mut option) = case_params(case);
        if zero_cross {
            params = params.without_cross_correlations();
        }
        if kind == OptionKind::UpAndOutCall {
            option = option.with_barrier(barrier)?;
        }
        Ok(Self { case, params, option })
    }

    pub fn grid(&self, m: usize, uniform: bool) -> Result<Grid3D> {
        let mut spec = GridSpec::default_spec(self.option.strike, self.option.maturity, self.params.c1, m, uniform);
        if let Some(b) = self.option.barrier {
            spec = spec.with_barrier(b);
        }
        spec.validate()?;
        if uniform {
            Ok(build_uniform_meshes(&spec, self.option.kind))
        } else {
            Grid3D::build(&spec, self.option.kind)
        }
    }

    pub fn system(&self, m: usize, uniform: bool) -> Result<SemidiscreteSystem> {
        assemble(&self.params, &self.option, &self.grid(m, uniform)?)
    }

    pub fn theta(&self, scheme: SchemeId) -> f64 {
        theta_default(scheme, self.params.gamma_measure())
    }
}

/// Number of steps `T / dt`, required to be integral.
pub fn steps_for(maturity: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = (maturity / dt).round();
    if n < 1.0 || (n * dt - maturity).abs() > 1e-9 * maturity {
        return Err(Error::InvalidParameter(format!(
            "T / dt = {} is not an integer",
            maturity / dt
        )));
    }
    Ok(n as usize)
}

/// Time integration of `sys` to maturity.
pub fn solve(
    sys: &SemidiscreteSystem,
    scheme: SchemeId,
    theta: f64,
    steps: usize,
    damping: bool,
) -> Result<Vec<f64>> {
    let config = StepperConfig::new(scheme, theta, sys.option.maturity, steps, damping);
    Ok(integrate(sys, &sys.u0, &config)?.u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct RefKey {
    case: CaseId,
    kind: OptionKind,
    barrier_bits: u64,
    zero_cross: bool,
    m: usize,
    ref_steps: usize,
}

type RefSlot = Arc<Mutex<Option<Arc<Vec<f64>>>>>;

/// Shared state for temporal studies: the read-through cache of reference
/// solutions.
#[derive(Default)]
pub struct Harness {
    cache: Mutex<HashMap<RefKey, RefSlot>>,
    computed: AtomicUsize,
}

impl Harness {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of reference solutions computed so far.
    pub fn reference_computations(&self) -> usize {
        self.computed.load(Ordering::SeqCst)
    }

    /// MCS solution with `ref_steps` steps at default `theta`. Barrier
    /// references start with damping.
    pub fn reference(&self, problem: &Problem, sys: &SemidiscreteSystem, m: usize, ref_steps: usize) -> Result<Arc<Vec<f64>>> {
        let key = RefKey {
            case: problem.case,
            kind: problem.option.kind,
            barrier_bits: problem.option.barrier.unwrap_or(0.0).to_bits(),
            zero_cross: problem.params.rho13 == 0.0 && problem.params.rho23 == 0.0,
            m,
            ref_steps,
        };
        let slot = {
            let mut cache = self.cache.lock().expect("cache lock");
            cache.entry(key).or_default().clone()
        };
        let mut guard = slot.lock().expect("slot lock");
        if let Some(u) = guard.as_ref() {
            return Ok(u.clone());
        }
        let theta = problem.theta(SchemeId::Mcs);
        let u = Arc::new(solve(sys, SchemeId::Mcs, theta, ref_steps, problem.option.is_barrier())?);
        self.computed.fetch_add(1, Ordering::SeqCst);
        *guard = Some(u.clone());
        Ok(u)
    }

    /// Global temporal error at `dt` against the cached reference.
    #[allow(clippy::too_many_arguments)]
    pub fn temporal_error(
        &self,
        problem: &Problem,
        scheme: SchemeId,
        theta: f64,
        m: usize,
        dt: f64,
        damping: bool,
        ref_steps: usize,
    ) -> Result<ErrorReport> {
        let steps = steps_for(problem.option.maturity, dt)?;
        if ref_steps < steps {
            return Err(Error::InvalidParameter(format!(
                "reference steps {ref_steps} below the {steps} steps under study"
            )));
        }
        let sys = problem.system(m, false)?;
        let reference = self.reference(problem, &sys, m, ref_steps)?;
        let u = solve(&sys, scheme, theta, steps, damping)?;
        let roi = RegionOfInterest::for_strike(problem.option.strike).indices(&sys.grid);
        max_error(ErrorKind::Temporal, dt, &sys.grid, &roi, &reference, &u)
    }

    /// Temporal errors over a step-size sweep, computed concurrently.
    #[allow(clippy::too_many_arguments)]
    pub fn temporal_sweep(
        &self,
        problem: &Problem,
        scheme: SchemeId,
        theta: f64,
        m: usize,
        dts: &[f64],
        damping: bool,
        ref_steps: usize,
    ) -> Result<Vec<ErrorReport>> {
        let sys = problem.system(m, false)?;
        self.reference(problem, &sys, m, ref_steps)?;
        dts.par_iter()
            .map(|&dt| self.temporal_error(problem, scheme, theta, m, dt, damping, ref_steps))
            .collect()
    }
}

/// Analytic call values at the grid points `indices` (calendar time 0).
pub fn analytic_values(problem: &Problem, grid: &Grid3D, indices: &[usize]) -> Result<Vec<f64>> {
    indices
        .par_iter()
        .map(|&l| {
            let (s, v, r) = grid.point(l);
            analytic::call_price(s, v, r, 0.0, &problem.params, &problem.option)
        })
        .collect()
}

fn require_closed_form(problem: &Problem) -> Result<()> {
    if problem.params.rho13 != 0.0 || problem.params.rho23 != 0.0 {
        return Err(Error::Domain(
            "spatial errors need rho13 = rho23 = 0 (use --zero-cross-corr)".into(),
        ));
    }
    if problem.option.is_barrier() {
        return Err(Error::Domain("spatial errors are defined for the vanilla call".into()));
    }
    Ok(())
}

/// Global spatial error of the MCS solution (`ref_steps` steps) against the
/// closed-form price.
pub fn spatial_error(problem: &Problem, m: usize, ref_steps: usize, uniform: bool) -> Result<ErrorReport> {
    require_closed_form(problem)?;
    let sys = problem.system(m, uniform)?;
    let u = solve(&sys, SchemeId::Mcs, problem.theta(SchemeId::Mcs), ref_steps, false)?;
    let roi = RegionOfInterest::for_strike(problem.option.strike).indices(&sys.grid);
    let exact = analytic_values(problem, &sys.grid, &roi)?;
    let mut full = vec![0.0; u.len()];
    for (&l, &e) in roi.iter().zip(&exact) {
        full[l] = e;
    }
    max_error(ErrorKind::Spatial, m as f64, &sys.grid, &roi, &full, &u)
}

/// Spatial errors on the stretched and on the uniform grid.
pub fn uniform_comparison(problem: &Problem, m: usize, ref_steps: usize) -> Result<(ErrorReport, ErrorReport)> {
    Ok((
        spatial_error(problem, m, ref_steps, false)?,
        spatial_error(problem, m, ref_steps, true)?,
    ))
}

/// Lower Cholesky factor of a symmetric positive definite 3x3 matrix.
pub fn cholesky3(c: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = c[i][i] - s;
                if !(d > 0.0) {
                    return Err(Error::InvalidParameter(
                        "correlation matrix is not positive definite".into(),
                    ));
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (c[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

const MC_CHUNK: usize = 4096;

/// Monte Carlo value and standard error at `(s, v, r)`, calendar time 0.
///
/// Log-Euler for the asset, full-truncation Euler for the variance, Euler for
/// the rate; discounting by the left-point integral of the simulated rate.
/// Paths are generated in fixed chunks, each with its own stream, so the
/// result depends only on `seed`.
#[allow(clippy::too_many_arguments)]
pub fn mc_oracle(
    params: &HhwParams,
    option: &OptionSpec,
    s: f64,
    v: f64,
    r: f64,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if paths < 1 || steps < 1 {
        return Err(Error::InvalidParameter("paths and steps must be at least 1".into()));
    }
    option.validate()?;
    let chol = cholesky3(&params.correlation_matrix())?;
    let p = *params;
    let dt = option.maturity / steps as f64;
    let sq = dt.sqrt();
    let chunks = paths.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(paths - c * MC_CHUNK);
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..count {
                let (mut ls, mut vt, mut rt) = (s.ln(), v, r);
                let mut integral = 0.0;
                let mut alive = true;
                for n in 0..steps {
                    let t = n as f64 * dt;
                    let z: [f64; 3] = [
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    ];
                    let w = [
                        chol[0][0] * z[0],
                        chol[1][0] * z[0] + chol[1][1] * z[1],
                        chol[2][0] * z[0] + chol[2][1] * z[1] + chol[2][2] * z[2],
                    ];
                    let vp = vt.max(0.0);
                    let b = p.c1 - p.c2 * (-p.c3 * t).exp();
                    integral += rt * dt;
                    ls += (rt - 0.5 * vp) * dt + vp.sqrt() * sq * w[0];
                    vt += p.kappa * (p.eta - vp) * dt + p.sigma1 * vp.sqrt() * sq * w[1];
                    rt += p.a * (b - rt) * dt + p.sigma2 * sq * w[2];
                    if let Some(barrier) = option.barrier {
                        if ls.exp() >= barrier {
                            alive = false;
                            break;
                        }
                    }
                }
                let x = if alive {
                    (-integral).exp() * option.payoff(ls.exp())
                } else {
                    0.0
                };
                sum += x;
                sum2 += x * x;
            }
            (sum, sum2)
        })
        .collect();
    let (sum, sum2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = paths as f64;
    let mean = sum / n;
    let var = if paths > 1 {
        ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// Value at grid node `(i, j, k)`, including Dirichlet boundary nodes.
pub fn node_value(grid: &Grid3D, option: &OptionSpec, u: &[f64], i: usize, j: usize, k: usize) -> f64 {
    match grid.try_index(i, j, k) {
        Some(l) => u[l],
        None if i == 0 || option.is_barrier() => 0.0,
        None => grid.s.points[i],
    }
}

/// Default step-size sweep: `T / round(T 10^(p/10))` steps for
/// `p = 0, ..., 10 decades`, without duplicates.
pub fn default_dt_sweep(maturity: f64, decades: usize) -> Vec<f64> {
    let mut steps: Vec<usize> = (0..=10 * decades)
        .map(|p| ((maturity * 10f64.powf(p as f64 / 10.0)).round() as usize).max(1))
        .collect();
    steps.dedup();
    steps.into_iter().map(|n| maturity / n as f64).collect()
}

/// One CSV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(usize),
    Real(f64),
}

/// Header plus rows; reals use 17 significant digits.
pub fn format_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            match cell {
                Cell::Int(n) => write!(out, "{n}"),
                Cell::Real(x) => write!(out, "{x:.16e}"),
            }
            .expect("write to string");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Spatial,
    Temporal,
    Price,
    UniformCompare,
    BarrierSurface,
}

impl ExperimentKind {
    fn name(self) -> &'static str {
        match self {
            Self::Spatial => "spatial",
            Self::Temporal => "temporal",
            Self::Price => "price",
            Self::UniformCompare => "uniform-compare",
            Self::BarrierSurface => "barrier-surface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptionArg {
    Call,
    Uoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Command-line arguments of `hhw-bench`.
#[derive(Debug, Clone, Parser)]
#[command(name = "hhw-bench", about = "Convergence experiments for the Heston-Hull-White ADI solvers", arg_required_else_help = true)]
pub struct Args {
    #[arg(long, value_enum)]
    pub experiment: ExperimentKind,
    #[arg(long, default_value = "A")]
    pub case: CaseId,
    #[arg(long, value_enum, default_value = "call")]
    pub option: OptionArg,
    #[arg(long, default_value = "mcs")]
    pub scheme: SchemeId,
    /// Overrides the scheme's default theta.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Grid size (`m1 = 2m`, `m2 = m3 = m`); the largest size for sweeps.
    #[arg(long, default_value_t = 25)]
    pub m: usize,
    /// Time steps for the price surfaces.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Comma-separated step sizes for the temporal study.
    #[arg(long, value_delimiter = ',')]
    pub dt_sweep: Option<Vec<f64>>,
    /// Defaults to on for up-and-out calls.
    #[arg(long, value_enum)]
    pub damping: Option<Switch>,
    #[arg(long)]
    pub zero_cross_corr: bool,
    #[arg(long, default_value_t = 120.0)]
    pub barrier: f64,
    /// Reference steps: 4000 for temporal, 200 for spatial studies.
    #[arg(long)]
    pub ref_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub summary: String,
    pub fitted_order: Option<f64>,
}

fn spatial_sizes(max_m: usize) -> Result<Vec<usize>> {
    if max_m < 10 {
        return Err(Error::InvalidParameter("spatial sweeps need --m >= 10".into()));
    }
    let mut ms: Vec<usize> = (10..=max_m).step_by(5).collect();
    if *ms.last().expect("nonempty") != max_m {
        ms.push(max_m);
    }
    Ok(ms)
}

fn surface_csv(problem: &Problem, sys: &SemidiscreteSystem, u: &[f64]) -> String {
    let grid = &sys.grid;
    let k = grid.r.nearest(problem.case.display_rate());
    let mut rows = Vec::new();
    for j in 0..=grid.m2() {
        if grid.v.points[j] >= 1.0 {
            break;
        }
        for i in 0..=grid.m1() {
            rows.push(vec![
                Cell::Real(grid.s.points[i]),
                Cell::Real(grid.v.points[j]),
                Cell::Real(grid.r.points[k]),
                Cell::Real(node_value(grid, &problem.option, u, i, j, k)),
            ]);
        }
    }
    format_csv(&["s", "v", "r", "value"], &rows)
}

/// Runs the experiment named in `args` and returns its CSV text.
pub fn run_experiment(args: &Args) -> Result<Outcome> {
    let start = Instant::now();
    let kind = match (args.experiment, args.option) {
        (ExperimentKind::BarrierSurface, _) | (_, OptionArg::Uoc) => OptionKind::UpAndOutCall,
        _ => OptionKind::Call,
    };
    let problem = Problem::new(args.case, kind, args.barrier, args.zero_cross_corr)?;
    let theta = args.theta.unwrap_or_else(|| problem.theta(args.scheme));
    let damping = match args.damping {
        Some(s) => s == Switch::On,
        None => problem.option.is_barrier(),
    };
    let mut fitted_order = None;
    let csv = match args.experiment {
        ExperimentKind::Temporal => {
            let ref_steps = args.ref_steps.unwrap_or(4000);
            let dts = match &args.dt_sweep {
                Some(d) => d.clone(),
                None => default_dt_sweep(problem.option.maturity, 2),
            };
            let harness = Harness::new();
            let reports = harness.temporal_sweep(&problem, args.scheme, theta, args.m, &dts, damping, ref_steps)?;
            let table = ConvergenceTable::from_reports(&reports);
            fitted_order = table.fitted_order;
            let rows: Vec<Vec<Cell>> = table.rows.iter().map(|&(h, e)| vec![Cell::Real(h), Cell::Real(e)]).collect();
            format_csv(&["dt", "error"], &rows)
        }
        ExperimentKind::Spatial => {
            require_closed_form(&problem)?;
            let ref_steps = args.ref_steps.unwrap_or(200);
            let reports = spatial_sizes(args.m)?
                .into_iter()
                .map(|m| spatial_error(&problem, m, ref_steps, false))
                .collect::<Result<Vec<_>>>()?;
            fitted_order = ConvergenceTable::from_reports(&reports).fitted_order;
            let rows: Vec<Vec<Cell>> = reports
                .iter()
                .map(|r| vec![Cell::Int(r.resolution as usize), Cell::Real(r.value)])
                .collect();
            format_csv(&["m", "error"], &rows)
        }
        ExperimentKind::UniformCompare => {
            require_closed_form(&problem)?;
            let ref_steps = args.ref_steps.unwrap_or(200);
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for m in spatial_sizes(args.m)? {
                let (nu, un) = uniform_comparison(&problem, m, ref_steps)?;
                rows.push(vec![Cell::Int(m), Cell::Real(nu.value), Cell::Real(un.value)]);
                reports.push(nu);
            }
            fitted_order = ConvergenceTable::from_reports(&reports).fitted_order;
            format_csv(&["m", "nonuniform_error", "uniform_error"], &rows)
        }
        ExperimentKind::Price | ExperimentKind::BarrierSurface => {
            if args.steps < 1 {
                return Err(Error::InvalidParameter("--steps must be at least 1".into()));
            }
            let sys = problem.system(args.m, false)?;
            let u = solve(&sys, args.scheme, theta, args.steps, damping)?;
            surface_csv(&problem, &sys, &u)
        }
    };
    let order = fitted_order.map_or_else(|| "n/a".to_string(), |p| format!("{p:.3}"));
    let summary = format!(
        "experiment={} case={} order={} wall_time={:.2}s",
        args.experiment.name(),
        args.case,
        order,
        start.elapsed().as_secs_f64()
    );
    Ok(Outcome {
        csv,
        summary,
        fitted_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_is_open() {
        let roi = RegionOfInterest::for_strike(100.0);
        assert!(roi.contains(100.0, 0.5, 0.1));
        assert!(!roi.contains(50.0, 0.5, 0.1));
        assert!(!roi.contains(100.0, 0.0, 0.1));
        assert!(!roi.contains(100.0, 0.5, 0.25));
    }

    #[test]
    fn fit_exact_orders() {
        let (p, res) = fit_order(&[(1.0, 1.0), (0.5, 0.25), (0.25, 1.0 / 16.0)]).unwrap();
        assert!((p - 2.0).abs() < 1e-14 && res < 1e-14);
        let (p, _) = fit_order(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)]).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
        assert!(fit_order(&[(1.0, 1.0), (0.5, 0.0), (0.25, 0.1)]).is_err());
    }

    #[test]
    fn table_sorted_and_monotone() {
        let t = ConvergenceTable::new(vec![(0.25, 0.1), (1.0, 1.6), (0.5, 0.4)]);
        assert_eq!(t.rows[0].0, 1.0);
        assert!(t.is_monotone());
        assert!(t.fitted_order.unwrap() > 1.9);
        assert!(ConvergenceTable::new(vec![(1.0, 1.0), (0.5, 0.5)]).fitted_order.is_none());
    }

    #[test]
    fn integral_steps() {
        assert_eq!(steps_for(1.0, 0.1).unwrap(), 10);
        assert_eq!(steps_for(0.25, 0.25 / 3.0).unwrap(), 3);
        assert!(steps_for(1.0, 0.3).is_err());
        assert!(steps_for(1.0, 0.0).is_err());
    }

    #[test]
    fn sweep_has_no_duplicates() {
        let d = default_dt_sweep(1.0, 2);
        assert_eq!(d[0], 1.0);
        assert!((d.last().unwrap() - 0.01).abs() < 1e-15);
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        for dt in d {
            steps_for(1.0, dt).unwrap();
        }
    }

    #[test]
    fn csv_format() {
        let s = format_csv(&["m", "error"], &[vec![Cell::Int(10), Cell::Real(0.1)]]);
        assert_eq!(s, "m,error\n10,1.0000000000000001e-1\n");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let c = [[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]];
        assert!(cholesky3(&c).is_err());
        let c = [[1.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 1.0]];
        let l = cholesky3(&c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let x: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((x - c[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn spatial_needs_zero_cross() {
        let p = Problem::new(CaseId::A, OptionKind::Call, 120.0, false).unwrap();
        assert!(matches!(spatial_error(&p, 10, 20, false), Err(Error::Domain(_))));
    }

    #[test]
    fn self_comparison_is_zero() {
        let p = Problem::new(CaseId::C, OptionKind::Call, 120.0, false).unwrap();
        let h = Harness::new();
        let theta = p.theta(SchemeId::Mcs);
        let e = h.temporal_error(&p, SchemeId::Mcs, theta, 8, 0.25 / 40.0, false, 40).unwrap();
        assert_eq!(e.value, 0.0);
        h.temporal_error(&p, SchemeId::Do, 0.5, 8, 0.25 / 10.0, false, 40).unwrap();
        assert_eq!(h.reference_computations(), 1);
    }
}
