//! Scaling sweeps, log-log slope fits, and cross-engine comparisons.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::{
    fully_connected_profile, hub_ring_profile, line_bound_profile, ring_profile, LineReading, Topology,
};
use crate::error::{AoiError, Result};
use crate::exact::{ExactSolver, DEFAULT_SUBSET_LIMIT};
use crate::model::{validate, NetworkSpec, NodeSubset};
use crate::numfmt::sig;
use crate::simulator::{simulate, SimConfig, SimEstimate};

/// Minimum number of points a slope fit accepts.
pub const MIN_FIT_POINTS: usize = 5;

/// `coef * n^power * ln(n)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub coef: f64,
    #[serde(default)]
    pub power: f64,
    #[serde(default)]
    pub log_power: f64,
}

impl Scale {
    pub const fn constant(c: f64) -> Self {
        Scale {
            coef: c,
            power: 0.0,
            log_power: 0.0,
        }
    }

    pub const fn power(coef: f64, power: f64) -> Self {
        Scale {
            coef,
            power,
            log_power: 0.0,
        }
    }

    pub const fn log(coef: f64) -> Self {
        Scale {
            coef,
            power: 0.0,
            log_power: 1.0,
        }
    }

    pub fn eval(&self, n: usize) -> f64 {
        let nf = n as f64;
        let mut v = self.coef;
        if self.power != 0.0 {
            v *= nf.powf(self.power);
        }
        if self.log_power != 0.0 {
            v *= nf.ln().powf(self.log_power);
        }
        v
    }

    /// Ceiling of [`Scale::eval`], at least 1.
    pub fn ceil(&self, n: usize) -> usize {
        (self.eval(n) - 1e-9).ceil().max(1.0) as usize
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.coef != 1.0 || (self.power == 0.0 && self.log_power == 0.0) {
            parts.push(format!("{}", self.coef));
        }
        if self.power != 0.0 {
            parts.push(format!("n^{}", self.power));
        }
        if self.log_power != 0.0 {
            parts.push(if self.log_power == 1.0 {
                "ln(n)".to_string()
            } else {
                format!("ln(n)^{}", self.log_power)
            });
        }
        parts.join("*")
    }
}

/// Gap `d` as a function of `n` and the chosen `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapRule {
    /// `d = ⌈n / q⌉`.
    NOverQ,
    /// `d = ⌈scale(n)⌉`.
    Scaled(Scale),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ring,
    FullyConnected,
    LineBound,
    /// Single sensing hub feeding a ring of non-sensing nodes.
    HubRing,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ring => Topology::Ring.as_str(),
            Family::FullyConnected => Topology::FullyConnected.as_str(),
            Family::LineBound => Topology::LineBound.as_str(),
            Family::HubRing => Topology::HubRing.as_str(),
        }
    }
}

/// How rates and layout scale with `n`.
///
/// `lambda` is the per-node sensing rate for rings and fully connected
/// networks, the total renewal rate for the line bound (each of the `q`
/// sensors gets `lambda / q`), and the hub rate for the hub ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPolicy {
    pub family: Family,
    pub lambda: Scale,
    pub eta: Scale,
    #[serde(default)]
    pub q: Option<Scale>,
    #[serde(default)]
    pub d: Option<GapRule>,
    #[serde(default)]
    pub line_reading: LineReading,
}

impl SweepPolicy {
    pub fn describe(&self) -> String {
        let mut s = match self.family {
            Family::LineBound => format!("lambda={}/q, eta={}", self.lambda.describe(), self.eta.describe()),
            _ => format!("lambda={}, eta={}", self.lambda.describe(), self.eta.describe()),
        };
        if let Some(q) = self.q {
            s.push_str(&format!(", q=ceil({})", q.describe()));
        }
        match self.d {
            Some(GapRule::NOverQ) => s.push_str(", d=ceil(n/q)"),
            Some(GapRule::Scaled(d)) => s.push_str(&format!(", d=ceil({})", d.describe())),
            None => {}
        }
        s
    }
}

/// One evaluated sweep point. The stored parameters reproduce the value
/// through [`evaluate_point`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub q: Option<usize>,
    pub d: Option<usize>,
    /// Rate actually used per sensing node.
    pub lambda: f64,
    pub eta: f64,
    pub value: Option<f64>,
    /// How many times `d` was bumped to satisfy `(d + 1) q >= n`.
    pub d_bumps: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingCurve {
    pub id: String,
    pub family: Family,
    pub policy: String,
    pub line_reading: Option<LineReading>,
    pub points: Vec<CurvePoint>,
    pub fitted_slope: Option<f64>,
    pub fit_window: (usize, usize),
    /// Slope range the curve is expected to fall in, if any.
    pub expected_slope: Option<(f64, f64)>,
}

impl ScalingCurve {
    pub fn values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.points.iter().filter_map(|p| p.value.map(|v| (p.n, v)))
    }

    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).and_then(|p| p.value)
    }

    /// Whether the fitted slope lies in the expected range. `None` when no
    /// expectation is attached.
    pub fn slope_ok(&self) -> Option<bool> {
        let (lo, hi) = self.expected_slope?;
        Some(self.fitted_slope.is_some_and(|s| s >= lo && s <= hi))
    }
}

/// Single-node value of a closed-form family at one parameter point.
pub fn evaluate_point(
    family: Family,
    n: usize,
    q: Option<usize>,
    d: Option<usize>,
    lambda: f64,
    eta: f64,
    reading: LineReading,
) -> Result<f64> {
    let profile = match family {
        Family::Ring => ring_profile(n, lambda, eta)?,
        Family::FullyConnected => fully_connected_profile(n, lambda, eta)?,
        Family::HubRing => hub_ring_profile(n, lambda, eta)?,
        Family::LineBound => {
            let q = q.ok_or_else(|| AoiError::Precondition("line bound needs q".into()))?;
            let d = d.ok_or_else(|| AoiError::Precondition("line bound needs d".into()))?;
            line_bound_profile(n, q, d, lambda, eta, reading)?
        }
    };
    Ok(profile.v1())
}

fn sweep_point(n: usize, policy: &SweepPolicy) -> CurvePoint {
    let eta = policy.eta.eval(n);
    let mut point = CurvePoint {
        n,
        q: None,
        d: None,
        lambda: policy.lambda.eval(n),
        eta,
        value: None,
        d_bumps: 0,
        note: None,
    };
    if policy.family == Family::LineBound {
        let q = policy.q.map_or(n, |s| s.ceil(n)).min(n);
        let mut d = match policy.d {
            Some(GapRule::NOverQ) | None => n.div_ceil(q),
            Some(GapRule::Scaled(s)) => s.ceil(n),
        };
        while (d + 1) * q < n {
            d += 1;
            point.d_bumps += 1;
        }
        point.q = Some(q);
        point.d = Some(d);
        point.lambda /= q as f64;
    }
    match evaluate_point(
        policy.family,
        n,
        point.q,
        point.d,
        point.lambda,
        eta,
        policy.line_reading,
    ) {
        Ok(v) => point.value = Some(v),
        Err(e) => point.note = Some(e.to_string()),
    }
    point
}

/// Evaluates the closed-form single-node value at every grid point and fits
/// the log-log slope over the top decade of the grid. Points that fail to
/// evaluate are kept with a note and excluded from the fit.
pub fn scaling_sweep(id: &str, grid: &[usize], policy: &SweepPolicy) -> Result<ScalingCurve> {
    if grid.is_empty() {
        return Err(AoiError::Precondition("empty grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AoiError::Precondition("grid must be strictly ascending".into()));
    }
    let points: Vec<CurvePoint> = grid.iter().map(|&n| sweep_point(n, policy)).collect();
    let n_max = *grid.last().expect("non-empty");
    let mut curve = ScalingCurve {
        id: id.to_string(),
        family: policy.family,
        policy: policy.describe(),
        line_reading: (policy.family == Family::LineBound).then_some(policy.line_reading),
        points,
        fitted_slope: None,
        fit_window: (n_max.div_ceil(10).max(grid[0]), n_max),
        expected_slope: None,
    };
    curve.fitted_slope = fit_loglog_slope(&curve, curve.fit_window).ok();
    Ok(curve)
}

/// Ordinary least-squares slope of `ln(value)` against `ln(n)` for the
/// valid points with `n` in `window`.
pub fn fit_loglog_slope(curve: &ScalingCurve, window: (usize, usize)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .values()
        .filter(|&(n, _)| n >= window.0 && n <= window.1)
        .map(|(n, v)| (n as f64, v))
        .collect();
    fit_slope(&pts)
}

/// Least-squares slope on log-log axes of raw `(x, y)` pairs.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < MIN_FIT_POINTS {
        return Err(AoiError::Fit(format!(
            "need at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(AoiError::Fit(format!("non-positive point ({x}, {y}) on log axes")));
    }
    let m = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    if sxx == 0.0 {
        return Err(AoiError::Fit("all points share one n".into()));
    }
    Ok(sxy / sxx)
}

/// About `count` log-spaced integers from `min` to `max`, deduplicated.
pub fn log_grid(min: usize, max: usize, count: usize) -> Vec<usize> {
    assert!(min >= 1 && max >= min && count >= 2);
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut grid: Vec<usize> = (0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    grid[0] = min;
    grid[count - 1] = max;
    grid.dedup();
    grid
}

/// Default grid for line-bound presets: 10^3 to 10^5.
pub fn default_line_grid() -> Vec<usize> {
    log_grid(1_000, 100_000, 21)
}

/// Default grid for ring and hub presets: 10^2 to 10^4.
pub fn default_ring_grid() -> Vec<usize> {
    log_grid(100, 10_000, 21)
}

/// Default grid for fully connected presets: 10 to 10^4.
pub fn default_fc_grid() -> Vec<usize> {
    log_grid(10, 10_000, 31)
}

fn line_policy(q: Scale, d: GapRule) -> SweepPolicy {
    SweepPolicy {
        family: Family::LineBound,
        lambda: Scale::constant(1.0),
        eta: Scale::constant(1.0),
        q: Some(q),
        d: Some(d),
        line_reading: LineReading::InsideCount,
    }
}

fn with_expected(mut curve: ScalingCurve, lo: f64, hi: f64) -> ScalingCurve {
    curve.expected_slope = Some((lo, hi));
    curve
}

/// Line bound with total renewal rate 1 and `d = ⌈n/q⌉` for
/// `q = ⌈√n⌉`, `⌈ln n⌉`, `⌈n^{1/5}⌉`.
pub fn reproduce_fig3(grid: &[usize]) -> Result<Vec<ScalingCurve>> {
    Ok(vec![
        with_expected(
            scaling_sweep("fig3-q-sqrt", grid, &line_policy(Scale::power(1.0, 0.5), GapRule::NOverQ))?,
            0.45,
            0.55,
        ),
        with_expected(
            scaling_sweep("fig3-q-log", grid, &line_policy(Scale::log(1.0), GapRule::NOverQ))?,
            0.85,
            1.0,
        ),
        with_expected(
            scaling_sweep("fig3-q-fifth-root", grid, &line_policy(Scale::power(1.0, 0.2), GapRule::NOverQ))?,
            0.75,
            0.85,
        ),
    ])
}

/// Line bound with `q = ⌈√n⌉` and `d = ⌈n^{2/3}⌉`, `⌈n^{3/4}⌉`, `⌈n^{4/5}⌉`.
pub fn reproduce_fig4(grid: &[usize]) -> Result<Vec<ScalingCurve>> {
    let sqrt = Scale::power(1.0, 0.5);
    [("fig4-d-two-thirds", 2.0 / 3.0), ("fig4-d-three-quarters", 0.75), ("fig4-d-four-fifths", 0.8)]
        .into_iter()
        .map(|(id, exp)| {
            let curve = scaling_sweep(id, grid, &line_policy(sqrt, GapRule::Scaled(Scale::power(1.0, exp))))?;
            Ok(with_expected(curve, exp - 0.1, exp + 0.1))
        })
        .collect()
}

/// Ring with `λ = 1/n`, `η = 1/2`.
pub fn ring_sqrt(grid: &[usize]) -> Result<ScalingCurve> {
    let policy = SweepPolicy {
        family: Family::Ring,
        lambda: Scale::power(1.0, -1.0),
        eta: Scale::constant(0.5),
        q: None,
        d: None,
        line_reading: LineReading::default(),
    };
    Ok(with_expected(scaling_sweep("ring-sqrt", grid, &policy)?, 0.45, 0.55))
}

/// Fully connected network with `λ = η = 1/n`.
pub fn fc_log(grid: &[usize]) -> Result<ScalingCurve> {
    let policy = SweepPolicy {
        family: Family::FullyConnected,
        lambda: Scale::power(1.0, -1.0),
        eta: Scale::power(1.0, -1.0),
        q: None,
        d: None,
        line_reading: LineReading::default(),
    };
    Ok(with_expected(scaling_sweep("fc-log", grid, &policy)?, 0.0, 0.15))
}

/// Distributed sensing (every ring node at `1/n`, neighbor rate 1/2) against
/// a single hub sensing at 1 and pushing to each ring node at `1/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedCurves {
    pub distributed: ScalingCurve,
    pub single_view: ScalingCurve,
    /// Largest `max(a/b, b/a)` over the grid.
    pub max_ratio: f64,
}

pub fn distributed_vs_single_view(grid: &[usize]) -> Result<PairedCurves> {
    let distributed = ring_sqrt(grid)?;
    let mut distributed = distributed;
    distributed.id = "distributed-ring".into();
    let hub = SweepPolicy {
        family: Family::HubRing,
        lambda: Scale::constant(1.0),
        eta: Scale::constant(0.5),
        q: None,
        d: None,
        line_reading: LineReading::default(),
    };
    let single_view = with_expected(scaling_sweep("single-view-hub", grid, &hub)?, 0.45, 0.55);
    let max_ratio = distributed
        .values()
        .zip(single_view.values())
        .map(|((_, a), (_, b))| (a / b).max(b / a))
        .fold(1.0, f64::max);
    Ok(PairedCurves {
        distributed,
        single_view,
        max_ratio,
    })
}

/// Writes curves as CSV rows:
/// `experiment_id,family,n,q,d,lambda,eta,method,subset,value,stderr,seed`.
pub fn write_curves_csv<W: Write>(out: W, curves: &[&ScalingCurve]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment_id",
        "family",
        "n",
        "q",
        "d",
        "lambda",
        "eta",
        "method",
        "subset",
        "value",
        "stderr",
        "seed",
    ])?;
    let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
    for curve in curves {
        for p in curve.points.iter().filter(|p| p.value.is_some()) {
            w.write_record([
                curve.id.clone(),
                curve.family.as_str().to_string(),
                p.n.to_string(),
                opt(p.q),
                opt(p.d),
                sig(p.lambda),
                sig(p.eta),
                "closed_form".to_string(),
                "0".to_string(),
                sig(p.value.expect("filtered")),
                String::new(),
                String::new(),
            ])?;
        }
    }
    w.flush()
}

/// Recognizes uniform rings and fully connected networks built with every
/// node sensing, returning the family and `(λ, η)`.
pub fn recognize_symmetric(spec: &NetworkSpec) -> Option<(Family, f64, f64)> {
    let n = spec.n();
    if n < 2 || spec.num_sensing() != n {
        return None;
    }
    let lambda = spec.sensing_rate(0);
    if spec.sensing_rates().values().any(|&r| r != lambda) {
        return None;
    }
    let edges = spec.gossip_rates();
    let eta = *edges.values().next()?;
    if edges.values().any(|&r| r != eta) {
        return None;
    }
    if edges.len() == n * (n - 1) && n != 2 {
        return Some((Family::FullyConnected, lambda, eta));
    }
    if n == 2 {
        // merged 2-ring carries 2η per direction
        return (edges.len() == 2).then_some((Family::Ring, lambda, eta / 2.0));
    }
    let ring = edges.len() == 2 * n
        && (0..n).all(|i| edges.contains_key(&((i + 1) % n, i)) && edges.contains_key(&((i + n - 1) % n, i)));
    ring.then_some((Family::Ring, lambda, eta))
}

/// Whether `subset` is a run of consecutive labels around a ring of `n`.
fn is_ring_arc(subset: NodeSubset, n: usize) -> bool {
    let k = subset.len();
    if k == 0 || k == n {
        return k == n;
    }
    (0..n).any(|start| (0..k).all(|o| subset.contains((start + o) % n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub subset: NodeSubset,
    pub exact: f64,
    pub simulated: SimEstimate,
    pub closed_form: Option<f64>,
    pub sim_abs_delta: f64,
    pub sim_rel_delta: f64,
    pub closed_form_abs_delta: Option<f64>,
    /// `|simulated - exact| <= 3 * stderr`.
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.within_3se)
    }
}

/// Exact vs simulated vs (where the topology allows) closed-form values.
pub fn compare_methods(spec: &NetworkSpec, subsets: &[NodeSubset], sim_config: &SimConfig) -> Result<ComparisonReport> {
    let solver = ExactSolver::build(spec, DEFAULT_SUBSET_LIMIT)?;
    let exact: Vec<f64> = subsets.iter().map(|&s| solver.value(s)).collect::<Result<_>>()?;
    let simulated = simulate(spec, subsets, sim_config)?;
    let symmetric = recognize_symmetric(spec);
    let rows = subsets
        .iter()
        .zip(exact)
        .zip(simulated)
        .map(|((&subset, exact), sim)| {
            let closed_form = symmetric.and_then(|(family, lambda, eta)| {
                let k = subset.len();
                let profile = match family {
                    Family::Ring if is_ring_arc(subset, spec.n()) => ring_profile(spec.n(), lambda, eta).ok()?,
                    Family::FullyConnected => fully_connected_profile(spec.n(), lambda, eta).ok()?,
                    _ => return None,
                };
                Some(profile.v(k))
            });
            let delta = sim.mean - exact;
            ComparisonRow {
                subset,
                exact,
                closed_form,
                sim_abs_delta: delta.abs(),
                sim_rel_delta: if exact != 0.0 { delta.abs() / exact } else { delta.abs() },
                closed_form_abs_delta: closed_form.map(|c| (c - exact).abs()),
                within_3se: delta.abs() <= 3.0 * sim.stderr,
                simulated: sim,
            }
        })
        .collect();
    Ok(ComparisonReport { rows })
}

/// Random spec with `n` in `nodes`, each ordered pair carrying an edge with
/// probability `edge_prob`, each node sensing with probability 1/2 (at least
/// one), and every rate uniform in `rates`. Resamples until every node has
/// an update path from some sensor.
pub fn random_spec<R: Rng>(
    rng: &mut R,
    nodes: std::ops::RangeInclusive<usize>,
    rates: std::ops::RangeInclusive<f64>,
    edge_prob: f64,
) -> NetworkSpec {
    loop {
        let n = rng.random_range(nodes.clone());
        let mut spec = NetworkSpec::new(n).expect("n >= 1");
        for i in 0..n {
            if rng.random_bool(0.5) {
                spec.set_sensing(i, rng.random_range(rates.clone())).expect("index in range");
            }
        }
        if spec.num_sensing() == 0 {
            let i = rng.random_range(0..n);
            spec.set_sensing(i, rng.random_range(rates.clone())).expect("index in range");
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(edge_prob) {
                    spec.add_gossip(i, j, rng.random_range(rates.clone())).expect("valid edge");
                }
            }
        }
        if validate(&spec).is_empty() {
            return spec;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_fully_connected, build_ring};

    fn synthetic(f: impl Fn(f64) -> f64) -> ScalingCurve {
        let points = log_grid(10, 10_000, 13)
            .into_iter()
            .map(|n| CurvePoint {
                n,
                q: None,
                d: None,
                lambda: 1.0,
                eta: 1.0,
                value: Some(f(n as f64)),
                d_bumps: 0,
                note: None,
            })
            .collect();
        ScalingCurve {
            id: "synthetic".into(),
            family: Family::Ring,
            policy: String::new(),
            line_reading: None,
            points,
            fitted_slope: None,
            fit_window: (10, 10_000),
            expected_slope: None,
        }
    }

    #[test]
    fn exact_power_law() {
        let c = synthetic(|n| n.sqrt());
        assert!((fit_loglog_slope(&c, (1, 100_000)).unwrap() - 0.5).abs() < 1e-12);
        let c = synthetic(|_| 3.0);
        assert!(fit_loglog_slope(&c, (1, 100_000)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fit_needs_points() {
        let c = synthetic(|n| n);
        assert!(matches!(fit_loglog_slope(&c, (10, 20)), Err(AoiError::Fit(_))));
        assert!(fit_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0), (5.0, 1.0)]).is_err());
    }

    #[test]
    fn fc_harmonic_flattens() {
        let curve = fc_log(&log_grid(1_000, 10_000, 11)).unwrap();
        let s = fit_loglog_slope(&curve, (1_000, 10_000)).unwrap();
        assert!(s > 0.0 && s < 0.15, "{s}");
        for (n, v) in curve.values() {
            assert!(v <= (n as f64).ln());
        }
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(1_000, 100_000, 21);
        assert_eq!(g.first(), Some(&1_000));
        assert_eq!(g.last(), Some(&100_000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let policy = SweepPolicy {
            family: Family::Ring,
            lambda: Scale::constant(1.0),
            eta: Scale::constant(1.0),
            q: None,
            d: None,
            line_reading: LineReading::default(),
        };
        assert!(scaling_sweep("x", &[10, 5], &policy).is_err());
    }

    #[test]
    fn infeasible_gap_is_bumped() {
        let policy = line_policy(Scale::power(1.0, 0.5), GapRule::Scaled(Scale::constant(1.0)));
        let curve = scaling_sweep("bump", &[100], &policy).unwrap();
        let p = &curve.points[0];
        assert_eq!(p.q, Some(10));
        assert_eq!(p.d, Some(9));
        assert_eq!(p.d_bumps, 8);
        assert!(p.value.is_some());
    }

    #[test]
    fn failing_points_are_excluded() {
        // the as-printed reading hits a non-positive denominator here
        let mut policy = line_policy(Scale::constant(2.0), GapRule::Scaled(Scale::constant(10.0)));
        policy.line_reading = LineReading::AsPrinted;
        policy.eta = Scale::constant(0.5);
        let curve = scaling_sweep("bad", &[21], &policy).unwrap();
        assert!(curve.points[0].value.is_none());
        assert!(curve.points[0].note.as_deref().unwrap().contains("regime violation"));
    }

    #[test]
    fn recognizes_topologies() {
        let ring = build_ring(6, 0.5, 0.25).unwrap();
        assert_eq!(recognize_symmetric(&ring), Some((Family::Ring, 0.5, 0.25)));
        let two = build_ring(2, 0.5, 0.25).unwrap();
        assert_eq!(recognize_symmetric(&two), Some((Family::Ring, 0.5, 0.25)));
        let fc = build_fully_connected(5, 0.5, 0.25).unwrap();
        assert_eq!(recognize_symmetric(&fc), Some((Family::FullyConnected, 0.5, 0.25)));
        let line = crate::model::build_line(5, &[0, 1, 2, 3, 4], 1.0, 1.0).unwrap();
        assert_eq!(recognize_symmetric(&line), None);
    }

    #[test]
    fn ring_arcs() {
        assert!(is_ring_arc(NodeSubset::from_members([5, 0, 1]), 6));
        assert!(!is_ring_arc(NodeSubset::from_members([0, 2]), 6));
        assert!(is_ring_arc(NodeSubset::full(4), 4));
    }

    #[test]
    fn point_metadata_reproduces_value() {
        for curve in reproduce_fig4(&log_grid(1_000, 5_000, 6)).unwrap() {
            for p in &curve.points {
                let again = evaluate_point(curve.family, p.n, p.q, p.d, p.lambda, p.eta, curve.line_reading.unwrap())
                    .unwrap();
                assert_eq!(again.to_bits(), p.value.unwrap().to_bits());
            }
        }
    }

    #[test]
    fn random_specs_are_valid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let spec = random_spec(&mut rng, 2..=5, 0.1..=10.0, 0.5);
            assert!(validate(&spec).is_empty());
            assert!((2..=5).contains(&spec.n()));
        }
    }
}
