//! Correlated geometric Brownian motion market simulation and realized
//! per-asset statistics.
//!
//! Prices evolve with the exact log-normal step
//! `S(t_n) = S(t_{n-1}) * exp((mu - sigma^2/2) dt + sigma z_n sqrt(dt))`
//! where the standard normals `z_n` of different assets are correlated through
//! the Cholesky factor of a uniform correlation matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identity of the pseudo-random stream, recorded in instance metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha20 (rand_chacha 0.9, seed_from_u64) + ziggurat StandardNormal (rand_distr 0.5)";

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_assets: usize,
    /// Annual drift.
    pub mu: f64,
    /// Annual volatility of log-returns.
    pub sigma: f64,
    /// Uniform pairwise correlation of the driving noise.
    pub rho: f64,
    /// Annual risk-free rate.
    pub r0: f64,
    /// Simulation horizon in years.
    pub horizon: f64,
    /// Step in years.
    pub dt: f64,
    pub s0: f64,
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            n_assets: 24,
            mu: 0.075,
            sigma: 0.15,
            rho: 0.1,
            r0: 0.015,
            horizon: 1.0,
            dt: 1.0 / 12.0,
            s0: 100.0,
            seed: 0,
        }
    }
}

impl GbmParams {
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_assets == 0 {
            return bad("n_assets must be at least 1".into());
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be > 0, got {}", self.horizon));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!(
                "horizon {} is not an integer multiple of dt {}",
                self.horizon, self.dt
            ));
        }
        if !(self.s0 > 0.0) {
            return bad(format!("initial price must be > 0, got {}", self.s0));
        }
        let lower = if self.n_assets > 1 {
            -1.0 / (self.n_assets as f64 - 1.0)
        } else {
            -1.0
        };
        if !(self.rho >= lower && self.rho <= 1.0) {
            return bad(format!(
                "correlation {} outside the admissible range [{lower}, 1] for {} assets",
                self.rho, self.n_assets
            ));
        }
        Ok(())
    }

    /// `n x n` matrix with unit diagonal and `rho` elsewhere.
    pub fn correlation_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_assets;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 1.0 } else { self.rho })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketScenario {
    /// `prices[asset][step]`, `n_steps + 1` observations per asset.
    pub prices: Vec<Vec<f64>>,
    /// `log_returns[asset][step]`.
    pub log_returns: Vec<Vec<f64>>,
    pub dt: f64,
}

impl MarketScenario {
    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    pub fn n_steps(&self) -> usize {
        self.log_returns.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetStats {
    pub realized_return: Vec<f64>,
    pub realized_vol: Vec<f64>,
    pub sharpe: Vec<f64>,
    pub corr: Vec<Vec<f64>>,
}

/// Lower-triangular `L` with `L * L^T = corr`.
pub fn cholesky_factor(corr: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = corr.len();
    for (i, row) in corr.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let pivot = corr[i][i] - dot;
                if pivot <= PIVOT_EPS {
                    return Err(Error::NotPositiveDefinite { row: i, pivot });
                }
                l[i][i] = pivot.sqrt();
            } else {
                l[i][j] = (corr[i][j] - dot) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Advance prices from `s0` using pre-correlated normals `z[step][asset]`.
pub fn evolve_prices(params: &GbmParams, z: &[Vec<f64>]) -> Result<MarketScenario> {
    let n = params.n_assets;
    let drift = (params.mu - 0.5 * params.sigma * params.sigma) * params.dt;
    let diffusion = params.sigma * params.dt.sqrt();
    let mut prices = vec![Vec::with_capacity(z.len() + 1); n];
    let mut log_returns = vec![Vec::with_capacity(z.len()); n];
    for p in prices.iter_mut() {
        p.push(params.s0);
    }
    for (step, zs) in z.iter().enumerate() {
        if zs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "step {step} has {} normals for {n} assets",
                zs.len()
            )));
        }
        for asset in 0..n {
            let prev = prices[asset][step];
            let next = prev * (drift + diffusion * zs[asset]).exp();
            prices[asset].push(next);
            log_returns[asset].push((next / prev).ln());
        }
    }
    Ok(MarketScenario {
        prices,
        log_returns,
        dt: params.dt,
    })
}

/// Simulate one scenario; deterministic in `params.seed`.
pub fn simulate_scenario(params: &GbmParams) -> Result<MarketScenario> {
    params.validate()?;
    let chol = cholesky_factor(&params.correlation_matrix())?;
    let n = params.n_assets;
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut eps = vec![0.0; n];
    let z: Vec<Vec<f64>> = (0..params.n_steps())
        .map(|_| {
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(&mut rng);
            }
            chol.iter()
                .map(|row| row.iter().zip(&eps).map(|(l, e)| l * e).sum())
                .collect()
        })
        .collect();
    evolve_prices(params, &z)
}

/// Annualized return, volatility, Sharpe ratio and realized correlation.
///
/// Volatility is the sample standard deviation (n-1 denominator) of the
/// per-step log-returns scaled by `1/sqrt(dt)`. The return is the GBM drift
/// estimate `mean(log-return)/dt + vol^2/2`, the annual expected return that
/// enters the Sharpe ratio.
pub fn realized_stats(scenario: &MarketScenario, r0: f64) -> Result<AssetStats> {
    let n = scenario.n_assets();
    let steps = scenario.n_steps();
    if steps < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least 2 log-returns per asset, got {steps}"
        )));
    }
    let dt = scenario.dt;
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    for (asset, r) in scenario.log_returns.iter().enumerate() {
        if r.len() != steps {
            return Err(Error::DimensionMismatch(format!(
                "asset {asset} has {} returns, expected {steps}",
                r.len()
            )));
        }
        let m = r.iter().sum::<f64>() / steps as f64;
        let var = r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (steps - 1) as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * m.abs().max(1e-300) || sd == 0.0 {
            return Err(Error::ZeroVolatility { asset });
        }
        means.push(m);
        sds.push(sd);
    }

    let realized_vol: Vec<f64> = sds.iter().map(|sd| sd / dt.sqrt()).collect();
    let realized_return: Vec<f64> = means
        .iter()
        .zip(&realized_vol)
        .map(|(m, v)| m / dt + 0.5 * v * v)
        .collect();
    let sharpe = realized_return
        .iter()
        .zip(&realized_vol)
        .map(|(r, v)| (r - r0) / v)
        .collect();

    let mut corr = vec![vec![0.0; n]; n];
    for i in 0..n {
        corr[i][i] = 1.0;
        for j in (i + 1)..n {
            let ri = &scenario.log_returns[i];
            let rj = &scenario.log_returns[j];
            let cov: f64 = ri
                .iter()
                .zip(rj)
                .map(|(x, y)| (x - means[i]) * (y - means[j]))
                .sum::<f64>()
                / (steps - 1) as f64;
            let c = (cov / (sds[i] * sds[j])).clamp(-1.0, 1.0);
            corr[i][j] = c;
            corr[j][i] = c;
        }
    }

    Ok(AssetStats {
        realized_return,
        realized_vol,
        sharpe,
        corr,
    })
}

/// JSON export shape: `{"params": {...}, "prices": [[...]], "seed": n}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioExport {
    pub params: GbmParams,
    pub prices: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioExport {
    pub fn new(params: &GbmParams, scenario: &MarketScenario) -> Self {
        ScenarioExport {
            params: params.clone(),
            prices: scenario.prices.clone(),
            seed: params.seed,
        }
    }
}
