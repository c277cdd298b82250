//! Simulation, depth ranking, contour grids and the convergence table.

use ilr_depth::depth::{
    depth_reports, ilr_depth_hpp, rank, rescaled_depth_from_values, simplified_ilr_depth, time_rescaled_depth,
    CardinalityDistribution, DepthReport,
};
use ilr_depth::geometry::{build_contrast_matrix, ilr, InterEventTimes, PointProcess, TimeDomain};
use ilr_depth::intensity::{
    conditional_cumulative, convergence_experiment, cumulative, histogram_estimate, imi_cumulative, imi_estimate,
    BinRule, ConvergenceRow,
};
use ilr_depth::simulation::{simulate_hpp, simulate_hpp_conditional, simulate_imi, simulate_ipp, SeededRng};
use ilr_depth::stats::{integrate, linspace};

use crate::expr::Expr;
use crate::io::{fmt_num, CliError, CliResult, Sample};

/// Quadrature panels across the whole window for expression intensities.
const EXPR_PANELS: usize = 512;
/// Rejection draws allowed per requested realization when conditioning on a
/// cardinality.
const MAX_DRAWS_PER_REALIZATION: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    Hpp,
    Ipp,
    Imi,
}

#[derive(Debug, Clone)]
pub struct SimulateOpts {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub domain: TimeDomain,
    pub rate: f64,
    pub intensity: Option<Expr>,
    pub gap_intensity: Option<Expr>,
    pub bound: Option<f64>,
    pub cardinality: Option<usize>,
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, why: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("{flag} is required {why}")))
}

fn time_only(e: &Expr, flag: &str) -> CliResult<()> {
    if e.uses_gap() {
        return Err(CliError::Usage(format!("{flag} may only depend on t, got '{}'", e.source())));
    }
    Ok(())
}

pub fn simulate(o: &SimulateOpts) -> CliResult<Sample> {
    let mut rng = SeededRng::new(o.seed);
    let d = o.domain;
    let mut draw: Box<dyn FnMut(&mut SeededRng) -> CliResult<PointProcess>> = match o.family {
        Family::Hpp => {
            if let Some(k) = o.cardinality {
                Box::new(move |rng| Ok(simulate_hpp_conditional(k, d, rng)?))
            } else {
                let rate = o.rate;
                Box::new(move |rng| Ok(simulate_hpp(rate, d, rng)?))
            }
        }
        Family::Ipp => {
            let lam = require(&o.intensity, "--intensity", "for ipp")?.clone();
            time_only(&lam, "--intensity")?;
            let bound = *require(&o.bound, "--bound", "for ipp")?;
            Box::new(move |rng| Ok(simulate_ipp(|t| lam.eval_t(t), bound, d, rng)?))
        }
        Family::Imi => {
            let lam1 = require(&o.intensity, "--intensity", "for imi")?.clone();
            time_only(&lam1, "--intensity")?;
            let lam2 = require(&o.gap_intensity, "--gap-intensity", "for imi")?.clone();
            if lam2.uses_time() {
                return Err(CliError::Usage("--gap-intensity may only depend on tau".into()));
            }
            let bound = *require(&o.bound, "--bound", "for imi")?;
            Box::new(move |rng| Ok(simulate_imi(|t| lam1.eval_t(t), |tau| lam2.eval(0.0, tau), bound, d, rng)?))
        }
    };
    let conditioned = o.cardinality.filter(|_| o.family != Family::Hpp);
    let mut sample = Sample::default();
    let mut draws = 0usize;
    let budget = MAX_DRAWS_PER_REALIZATION.saturating_mul(o.n.max(1));
    while sample.len() < o.n {
        let p = draw(&mut rng)?;
        draws += 1;
        if conditioned.is_some_and(|k| p.len() != k) {
            if draws >= budget {
                return Err(CliError::Numeric(format!(
                    "only {} of {} realizations with the requested cardinality after {draws} draws",
                    sample.len(),
                    o.n
                )));
            }
            continue;
        }
        sample.push(sample.len().to_string(), p);
    }
    Ok(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Hpp,
    Simplified,
    IppHistogram,
    Imi,
    GivenIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CardinalityModel {
    Empirical,
    Poisson,
}

#[derive(Debug, Clone)]
pub struct DepthOpts {
    pub mode: Mode,
    pub r: f64,
    pub bins: Option<usize>,
    pub bins_t: Option<usize>,
    pub bins_tau: Option<usize>,
    pub intensity: Option<Expr>,
    pub cardinality: CardinalityModel,
}

impl Default for DepthOpts {
    fn default() -> Self {
        Self {
            mode: Mode::Hpp,
            r: 1.0,
            bins: None,
            bins_t: None,
            bins_tau: None,
            intensity: None,
            cardinality: CardinalityModel::Empirical,
        }
    }
}

fn positive_constant(c: f64) -> CliResult<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CliError::Numeric(format!("constant intensity must be positive, got {c}")));
    }
    Ok(())
}

/// Ranked depth reports for every realization in the sample.
pub fn depth(sample: &Sample, o: &DepthOpts) -> CliResult<Vec<DepthReport>> {
    if sample.is_empty() {
        return Err(CliError::Data("input holds no realizations".into()));
    }
    let n = sample.len();
    let procs = &sample.processes;
    let dist = match o.cardinality {
        CardinalityModel::Empirical => CardinalityDistribution::from_counts(procs.iter().map(PointProcess::len))?,
        CardinalityModel::Poisson => {
            let mean = procs.iter().map(PointProcess::len).sum::<usize>() as f64 / n as f64;
            CardinalityDistribution::poisson(mean)?
        }
    };
    let default_bins = BinRule::FourthRoot.bins(n);
    let reports = match o.mode {
        Mode::Hpp => depth_reports(&sample.ids, procs, &dist, |_, p| Ok(ilr_depth_hpp(p)), o.r)?,
        Mode::Simplified => depth_reports(&sample.ids, procs, &dist, |_, p| Ok(simplified_ilr_depth(p)), o.r)?,
        Mode::IppHistogram => {
            let cum = cumulative(&histogram_estimate(procs, o.bins.unwrap_or(default_bins))?);
            depth_reports(&sample.ids, procs, &dist, |_, p| time_rescaled_depth(p, |t| cum.eval(t)), o.r)?
        }
        Mode::Imi => {
            let m1 = o.bins_t.or(o.bins).unwrap_or(default_bins);
            let m2 = o.bins_tau.or(o.bins).unwrap_or(default_bins);
            let model = imi_estimate(procs, m1, m2)?;
            depth_reports(
                &sample.ids,
                procs,
                &dist,
                |_, p| rescaled_depth_from_values(p, &imi_cumulative(&model, p)),
                o.r,
            )?
        }
        Mode::GivenIntensity => {
            let e = require(&o.intensity, "--intensity", "for given-intensity")?;
            if let Some(c) = e.constant() {
                positive_constant(c)?;
                depth_reports(&sample.ids, procs, &dist, |_, p| Ok(ilr_depth_hpp(p)), o.r)?
            } else {
                let cond = |_: usize, p: &PointProcess| {
                    let values = conditional_cumulative(p, |t, last| e.eval(t, t - last), EXPR_PANELS);
                    rescaled_depth_from_values(p, &values)
                };
                depth_reports(&sample.ids, procs, &dist, cond, o.r)?
            }
        }
    };
    Ok(rank(reports))
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

pub fn depth_csv(reports: &[DepthReport]) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["id", "k", "d1", "w", "d_cond", "d_overall", "rank"],
        reports.iter().map(|r| {
            vec![
                r.id.clone(),
                r.k.to_string(),
                fmt_num(r.d1),
                fmt_num(r.w),
                fmt_num(r.d_cond),
                fmt_num(r.d_overall),
                r.rank.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ContourMode {
    Hpp,
    IppHistogram,
    GivenIntensity,
}

#[derive(Debug, Clone)]
pub struct ContourOpts {
    pub k: usize,
    pub resolution: usize,
    pub mode: ContourMode,
    pub bins: Option<usize>,
    pub intensity: Option<Expr>,
    pub domain: TimeDomain,
}

/// One lattice point: inter-event times, ILR coordinates (interior points
/// only) and depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourRow {
    pub u: [f64; 3],
    pub ilr: Option<[f64; 2]>,
    pub depth: f64,
}

/// Barycentric lattice `(i, j, l) / resolution` scaled to the window,
/// ordered by `i` then `j`.
pub fn lattice(resolution: usize) -> Vec<[usize; 3]> {
    let r = resolution;
    (0..=r).flat_map(|i| (0..=r - i).map(move |j| [i, j, r - i - j])).collect()
}

pub fn contours(sample: Option<&Sample>, o: &ContourOpts) -> CliResult<Vec<ContourRow>> {
    if o.k != 2 {
        return Err(CliError::Usage(format!("contour grids are ternary and need k = 2, got k = {}", o.k)));
    }
    if o.resolution == 0 {
        return Err(CliError::Usage("--resolution must be at least 1".into()));
    }
    let (domain, cum): (TimeDomain, Box<dyn Fn(f64) -> f64>) = match o.mode {
        ContourMode::Hpp => (o.domain, Box::new(|t| t)),
        ContourMode::IppHistogram => {
            let s = sample.ok_or_else(|| CliError::Usage("--input is required for ipp-histogram".into()))?;
            if s.is_empty() {
                return Err(CliError::Data("input holds no realizations".into()));
            }
            let bins = o.bins.unwrap_or_else(|| BinRule::FourthRoot.bins(s.len()));
            let c = cumulative(&histogram_estimate(&s.processes, bins)?);
            (c.domain(), Box::new(move |t| c.eval(t)))
        }
        ContourMode::GivenIntensity => {
            let e = require(&o.intensity, "--intensity", "for given-intensity")?.clone();
            time_only(&e, "--intensity")?;
            if let Some(c) = e.constant() {
                positive_constant(c)?;
            }
            let t1 = o.domain.t1();
            let width = o.domain.width();
            let f = move |t: f64| {
                let panels = ((t - t1) / width * EXPR_PANELS as f64).ceil().max(1.0) as usize;
                integrate(|x| e.eval_t(x), t1, t, panels)
            };
            (o.domain, Box::new(f))
        }
    };
    let psi = build_contrast_matrix(2)?;
    let total = domain.width();
    let res = o.resolution as f64;
    let hpp = o.mode == ContourMode::Hpp;
    let mut rows = Vec::new();
    for [i, j, l] in lattice(o.resolution) {
        let u = [i as f64 / res * total, j as f64 / res * total, l as f64 / res * total];
        let s1 = domain.t1() + u[0];
        let s2 = (s1 + u[1]).min(domain.t2());
        let p = PointProcess::new(domain, vec![s1, s2])?;
        let interior = i > 0 && j > 0 && l > 0;
        let coords = if interior {
            let v = ilr(&InterEventTimes::new(u.to_vec(), total)?, &psi)?;
            Some([v.as_slice()[0], v.as_slice()[1]])
        } else {
            None
        };
        let depth = if !interior {
            0.0
        } else if hpp {
            ilr_depth_hpp(&p)
        } else {
            time_rescaled_depth(&p, &cum)?
        };
        rows.push(ContourRow { u, ilr: coords, depth });
    }
    Ok(rows)
}

pub fn contours_csv(rows: &[ContourRow]) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["u1", "u2", "u3", "ilr_x", "ilr_y", "depth"],
        rows.iter().map(|r| {
            let (x, y) = match r.ilr {
                Some([x, y]) => (fmt_num(x), fmt_num(y)),
                None => (String::new(), String::new()),
            };
            vec![fmt_num(r.u[0]), fmt_num(r.u[1]), fmt_num(r.u[2]), x, y, fmt_num(r.depth)]
        }),
    )
}

/// Parses `fourth-root`, `sqrt`, `linear` or `fixed:M`.
pub fn parse_bin_rule(s: &str) -> Result<BinRule, String> {
    match s {
        "fourth-root" => Ok(BinRule::FourthRoot),
        "sqrt" => Ok(BinRule::Sqrt),
        "linear" => Ok(BinRule::Linear),
        _ => match s.strip_prefix("fixed:").map(str::parse::<usize>) {
            Some(Ok(m)) if m > 0 => Ok(BinRule::Fixed(m)),
            _ => Err(format!("unknown bin rule '{s}' (fourth-root, sqrt, linear, fixed:M)")),
        },
    }
}

pub const DEFAULT_N_GRID: [usize; 4] = [100, 1_000, 10_000, 100_000];
/// Headroom over the sampled maximum when no thinning bound is given.
const BOUND_HEADROOM: f64 = 1.05;

#[derive(Debug, Clone)]
pub struct ConvergenceOpts {
    pub intensity: Expr,
    pub domain: TimeDomain,
    pub n_grid: Vec<usize>,
    pub rule: BinRule,
    pub seed: u64,
    pub lambda_max: Option<f64>,
}

pub fn convergence(o: &ConvergenceOpts) -> CliResult<Vec<ConvergenceRow>> {
    time_only(&o.intensity, "--intensity")?;
    if o.n_grid.is_empty() {
        return Err(CliError::Usage("--n-grid is empty".into()));
    }
    let e = &o.intensity;
    let bound = match o.lambda_max {
        Some(b) => b,
        None => {
            let peak = linspace(o.domain.t1(), o.domain.t2(), 10_001)
                .into_iter()
                .map(|t| e.eval_t(t))
                .fold(f64::NEG_INFINITY, f64::max);
            if !(peak > 0.0 && peak.is_finite()) {
                return Err(CliError::Numeric(format!("intensity has no positive finite maximum ({peak})")));
            }
            peak * BOUND_HEADROOM
        }
    };
    let lam = |t: f64| e.eval_t(t);
    Ok(convergence_experiment(&lam, bound, o.domain, &o.n_grid, o.rule, o.seed)?)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["n", "m", "sup_error"],
        rows.iter().map(|r| vec![r.n.to_string(), r.m.to_string(), fmt_num(r.sup_error)]),
    )
}
