//! O(n) age profiles for symmetric topologies.
//!
//! Each profile holds `v_k` for k = 1..=n, the mean age of a connected set
//! of k nodes (any k nodes for the fully connected network), evaluated from
//! `v_n = 0` downward. No factorials or Gamma functions appear on these paths,
//! so they stay finite for n in the millions.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{AoiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    FullyConnected,
    /// Ring of non-sensing nodes fed by one external sensing hub.
    HubRing,
    LineBound,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Ring => "ring",
            Topology::FullyConnected => "fully_connected",
            Topology::HubRing => "hub_ring",
            Topology::LineBound => "line_bound",
        }
    }
}

/// Which step formula a line-bound entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LineRegime {
    /// `((q - f) λ + η v') / (f λ + η)`, f = ⌊(n-k-q)/(d+1)⌋⁺.
    OutsideFloor,
    /// `(k λ + η v') / ((q - k) λ + η)`, below the boundary n - q - m d.
    SmallSet,
    /// `((q - g) λ + η v') / (g λ + η)`, g = ⌊k/(d+1)⌋.
    InsideFloor,
}

/// How to read the line-network bound recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineReading {
    /// The two-regime recursion exactly as printed, with the floor term
    /// counting sensing nodes outside the set and sitting in the
    /// inside-sensing position.
    AsPrinted,
    /// Single regime where the floor term is the guaranteed number of
    /// sensing nodes inside a connected set of k nodes, ⌊k/(d+1)⌋. Every
    /// window of d+1 consecutive nodes holds a sensor, so this is a valid
    /// lower bound on the inside count and `q` minus it bounds the outside.
    #[default]
    InsideCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiProfile {
    pub topology: Topology,
    pub n: usize,
    pub lambda: f64,
    pub eta: f64,
    /// β = 2η/λ for rings, α = λ/η for fully connected, η/λ for the line bound.
    pub shape: f64,
    /// `values[k - 1]` is `v_k`.
    pub values: Vec<f64>,
    /// Per-k regime flags, line bound only.
    pub regimes: Option<Vec<LineRegime>>,
}

impl AoiProfile {
    pub fn v(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    /// Single-node value.
    pub fn v1(&self) -> f64 {
        self.values[0]
    }
}

fn check_inputs(n: usize, lambda: f64, eta: f64) -> Result<()> {
    if n < 2 {
        return Err(AoiError::InvalidTopology(format!("profile needs n >= 2, got {n}")));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(AoiError::InvalidRate(format!("lambda = {lambda} must be finite and positive")));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(AoiError::InvalidRate(format!("eta = {eta} must be finite and non-negative")));
    }
    Ok(())
}

/// Evaluates `v_k = step(k, v_{k+1})` from `v_n = 0` down to `v_1`.
fn descend(n: usize, mut step: impl FnMut(usize, f64) -> Result<f64>) -> Result<Vec<f64>> {
    let mut values = vec![0.0; n];
    for k in (1..n).rev() {
        values[k - 1] = step(k, values[k])?;
    }
    Ok(values)
}

/// Ring where every node senses at `lambda` and hears both neighbors at `eta`:
/// `v_k = ((n-k) λ + 2η v_{k+1}) / (k λ + 2η)`.
pub fn ring_profile(n: usize, lambda: f64, eta: f64) -> Result<AoiProfile> {
    check_inputs(n, lambda, eta)?;
    let nf = n as f64;
    let values = descend(n, |k, next| {
        let k = k as f64;
        Ok(((nf - k) * lambda + 2.0 * eta * next) / (k * lambda + 2.0 * eta))
    })?;
    Ok(AoiProfile {
        topology: Topology::Ring,
        n,
        lambda,
        eta,
        shape: 2.0 * eta / lambda,
        values,
        regimes: None,
    })
}

/// Fully connected network, every node sensing at `lambda`, every edge at `eta`:
/// `v_k = ((n-k) λ + (n-k) k η v_{k+1}) / (k λ + (n-k) k η)`.
pub fn fully_connected_profile(n: usize, lambda: f64, eta: f64) -> Result<AoiProfile> {
    check_inputs(n, lambda, eta)?;
    if eta == 0.0 {
        return Err(AoiError::Unbounded {
            subset: crate::model::NodeSubset::EMPTY,
        });
    }
    let nf = n as f64;
    let values = descend(n, |k, next| {
        let k = k as f64;
        let gossip = (nf - k) * k * eta;
        Ok(((nf - k) * lambda + gossip * next) / (k * lambda + gossip))
    })?;
    Ok(AoiProfile {
        topology: Topology::FullyConnected,
        n,
        lambda,
        eta,
        shape: lambda / eta,
        values,
        regimes: None,
    })
}

/// Single-view ring: `ring_size` non-sensing nodes on a ring (neighbor rate
/// `eta`), each fed directly by a hub that senses at `source_rate` and pushes
/// to every ring node at `source_rate / ring_size`. Sets containing the hub
/// have age 0, so for arcs of k ring nodes
/// `v_k = (λ0 + 2η v_{k+1}) / (k λ0 / n + 2η)` with `v_n = 1`.
///
/// `values[k - 1]` is the arc of k ring nodes; `n` is the ring size.
pub fn hub_ring_profile(ring_size: usize, source_rate: f64, eta: f64) -> Result<AoiProfile> {
    check_inputs(ring_size, source_rate, eta)?;
    let nf = ring_size as f64;
    let push = source_rate / nf;
    let mut values = vec![0.0; ring_size];
    // all ring nodes, hub outside: renewal source_rate over inflow n * push
    values[ring_size - 1] = source_rate / (nf * push);
    for k in (1..ring_size).rev() {
        values[k - 1] = (source_rate + 2.0 * eta * values[k]) / (k as f64 * push + 2.0 * eta);
    }
    Ok(AoiProfile {
        topology: Topology::HubRing,
        n: ring_size,
        lambda: source_rate,
        eta,
        shape: 2.0 * eta / push,
        values,
        regimes: None,
    })
}

/// Upper-bound profile `\bar v_k` for a line (or ring) with `q` sensing nodes
/// at per-node rate `lambda`, longest non-sensing run `d`, and neighbor rate
/// `eta`. Requires `(d + 1) q >= n`.
pub fn line_bound_profile(
    n: usize,
    q: usize,
    d: usize,
    lambda: f64,
    eta: f64,
    reading: LineReading,
) -> Result<AoiProfile> {
    check_inputs(n, lambda, eta)?;
    if eta == 0.0 {
        return Err(AoiError::InvalidRate("line bound needs eta > 0".into()));
    }
    if q == 0 || q > n {
        return Err(AoiError::Precondition(format!("need 1 <= q <= n, got q = {q}, n = {n}")));
    }
    if (d + 1) * q < n {
        return Err(AoiError::InfeasibleLayout { n, q, d });
    }
    let qf = q as f64;
    let mut regimes = vec![LineRegime::InsideFloor; n];
    let values = match reading {
        LineReading::InsideCount => descend(n, |k, next| {
            let inside = (k / (d + 1)) as f64;
            guarded(k, (qf - inside) * lambda + eta * next, inside * lambda + eta)
        })?,
        LineReading::AsPrinted => {
            // n - q = d m + p; with d = 0 the small-set regime never applies.
            let boundary = (n - q).checked_div(d).map_or(0, |m| n - q - m * d);
            descend(n, |k, next| {
                if k >= boundary {
                    regimes[k - 1] = LineRegime::OutsideFloor;
                    let gap = (n as i64 - k as i64 - q as i64).div_euclid(d as i64 + 1);
                    let f = gap.max(0) as f64;
                    guarded(k, (qf - f) * lambda + eta * next, f * lambda + eta)
                } else {
                    regimes[k - 1] = LineRegime::SmallSet;
                    let kf = k as f64;
                    guarded(k, kf * lambda + eta * next, (qf - kf) * lambda + eta)
                }
            })?
        }
    };
    Ok(AoiProfile {
        topology: Topology::LineBound,
        n,
        lambda,
        eta,
        shape: eta / lambda,
        values,
        regimes: Some(regimes),
    })
}

fn guarded(k: usize, numerator: f64, denominator: f64) -> Result<f64> {
    if !(denominator > 0.0) {
        return Err(AoiError::RegimeViolation { k, denominator });
    }
    Ok(numerator / denominator)
}

/// Largest n accepted by [`ring_gamma_series_check`].
pub const GAMMA_SERIES_MAX_N: usize = 150;

/// Ring `v_1` via the Gamma-function series
/// `Γ(1+β) Σ_{k=1}^{n-1} (n-k) β^{k-1} / Γ(1+k+β)`, evaluated in the log
/// domain. Unrolling the ring recursion multiplies the k-th term by
/// `Π_{l<k} β/(l+β)`, which is where the `β^{k-1}` factor comes from.
pub fn ring_gamma_series(n: usize, beta: f64) -> Result<f64> {
    if n > GAMMA_SERIES_MAX_N {
        return Err(AoiError::Capacity {
            what: format!("Gamma series check is limited to n <= {GAMMA_SERIES_MAX_N}, got {n}"),
            limit: GAMMA_SERIES_MAX_N,
        });
    }
    if n < 2 {
        return Err(AoiError::InvalidTopology(format!("ring needs n >= 2, got {n}")));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(AoiError::InvalidRate(format!("beta = {beta} must be finite and positive")));
    }
    let head = ln_gamma(1.0 + beta);
    let ln_beta = beta.ln();
    Ok((1..n)
        .map(|k| {
            let kf = k as f64;
            (n - k) as f64 * (head + (kf - 1.0) * ln_beta - ln_gamma(1.0 + kf + beta)).exp()
        })
        .sum())
}

/// True iff the Gamma series matches the ring recursion to relative 1e-9.
pub fn ring_gamma_series_check(n: usize, beta: f64) -> Result<bool> {
    let series = ring_gamma_series(n, beta)?;
    // λ = 1, η = β/2 gives 2η/λ = β
    let recursion = ring_profile(n, 1.0, beta / 2.0)?.v1();
    Ok((series - recursion).abs() <= 1e-9 * recursion.abs())
}
