//! Instance ensembles, parameter sweeps, time-to-solution estimates and
//! percentile reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{derive_seed, EngineConfig, Schedule};
use crate::chimera::ChimeraGraph;
use crate::error::{Error, Result};
use crate::market::{realized_stats, simulate_scenario, GbmParams, RNG_ALGORITHM};
use crate::qubo::{bucketize, exact_solve_capped, BucketMap, QuboInstance, Selection};
use crate::solvers::{anneal_solve, ga_solve, greedy_selection, AnnealParams, GaConfig};

pub const DEFAULT_ALPHA: f64 = 0.99;
/// Reads with value at most `best_known + SUCCESS_TOL` count as successes.
pub const SUCCESS_TOL: f64 = 1e-9;
pub const MAX_EMBEDDABLE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsEstimate {
    pub p: f64,
    pub alpha: f64,
    pub t_run: f64,
    /// `None` when no read succeeded.
    pub tts: Option<f64>,
    pub n_reads: usize,
    pub n_success: usize,
}

impl TtsEstimate {
    pub fn new(n_reads: usize, n_success: usize, alpha: f64, t_run: f64) -> Result<Self> {
        let p = if n_reads == 0 {
            0.0
        } else {
            n_success as f64 / n_reads as f64
        };
        let tts = match tts(p, alpha, t_run) {
            Ok(v) => Some(v),
            Err(Error::UndefinedTts) => None,
            Err(e) => return Err(e),
        };
        Ok(TtsEstimate {
            p,
            alpha,
            t_run,
            tts,
            n_reads,
            n_success,
        })
    }
}

/// Expected time to observe a success with confidence `alpha`:
/// `t_run * ln(1 - alpha) / ln(1 - p)`, clamped to one run when `p >= alpha`.
pub fn tts(p: f64, alpha: f64, t_run: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidFraction {
            name: "p",
            value: p,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidFraction {
            name: "alpha",
            value: alpha,
        });
    }
    if !(t_run > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "t_run must be > 0, got {t_run}"
        )));
    }
    if p == 0.0 {
        return Err(Error::UndefinedTts);
    }
    if p >= alpha {
        return Ok(t_run);
    }
    Ok(t_run * (1.0 - alpha).ln() / (1.0 - p).ln())
}

/// `(p, successes, reads)` for a list of read values.
pub fn estimate_success(values: &[f64], best_known: f64) -> (f64, usize, usize) {
    let hits = values
        .iter()
        .filter(|&&v| v <= best_known + SUCCESS_TOL)
        .count();
    let p = if values.is_empty() {
        0.0
    } else {
        hits as f64 / values.len() as f64
    };
    (p, hits, values.len())
}

/// Percentile by linear interpolation between order statistics of a sorted
/// slice (`q` in `[0, 1]`).
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Range {
    pub fn single(v: f64) -> Self {
        Range {
            min: v,
            max: v,
            step: 1.0,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.step > 0.0) || !(self.max >= self.min) {
            return Err(Error::InvalidConfig(format!(
                "{name} range {}-{}({}) is empty or has a non-positive step",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| {
                let v = self.min + k as f64 * self.step;
                // round away float noise from repeated steps
                (v * 1e9).round() / 1e9
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Forward,
    Reverse,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Forward => "forward",
            ProtocolKind::Reverse => "reverse",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(ProtocolKind::Forward),
            "reverse" => Ok(ProtocolKind::Reverse),
            other => Err(Error::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub chain_strength: Range,
    #[serde(default)]
    pub s_p: Option<Range>,
    #[serde(default)]
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub chain_strength: f64,
    pub tau: f64,
    pub rho: Option<f64>,
    pub s_p: Option<f64>,
}

impl GridPoint {
    /// Modeled time of one read.
    pub fn t_run(&self) -> f64 {
        match self.rho {
            Some(rho) => 2.0 * self.tau + rho,
            None => self.tau,
        }
    }
}

impl ParameterGrid {
    pub fn validate(&self, kind: ProtocolKind) -> Result<()> {
        self.chain_strength.validate("J_F")?;
        if self.tau.is_empty() || self.tau.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidConfig(
                "tau values must be non-empty and > 0".into(),
            ));
        }
        if kind == ProtocolKind::Reverse {
            let sp = self
                .s_p
                .ok_or_else(|| Error::InvalidConfig("reverse sweeps need an s_p range".into()))?;
            sp.validate("s_p")?;
            if sp.min < 0.0 || sp.max > 1.0 {
                return Err(Error::InvalidFraction {
                    name: "s_p",
                    value: if sp.min < 0.0 { sp.min } else { sp.max },
                });
            }
            if self.rho.is_empty() || self.rho.iter().any(|&r| !(r >= 0.0)) {
                return Err(Error::InvalidConfig(
                    "rho values must be non-empty and >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Every grid point for the protocol, in `J_F`, `s_p`, `rho`, `tau` order.
    pub fn points(&self, kind: ProtocolKind) -> Result<Vec<GridPoint>> {
        self.validate(kind)?;
        let mut out = Vec::new();
        for jf in self.chain_strength.values() {
            match kind {
                ProtocolKind::Forward => {
                    for &tau in &self.tau {
                        out.push(GridPoint {
                            chain_strength: jf,
                            tau,
                            rho: None,
                            s_p: None,
                        });
                    }
                }
                ProtocolKind::Reverse => {
                    for sp in self.s_p.expect("validated").values() {
                        for &rho in &self.rho {
                            for &tau in &self.tau {
                                out.push(GridPoint {
                                    chain_strength: jf,
                                    tau,
                                    rho: Some(rho),
                                    s_p: Some(sp),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Search space used for problem size `n` in the reference benchmark; `None`
/// for sizes without a preset. Sizes up to 36 carry no reverse parameters.
pub fn table2_grid(n: usize) -> Option<ParameterGrid> {
    let jf = |min, max| Range {
        min,
        max,
        step: 0.5,
    };
    let reverse = |chain_strength| ParameterGrid {
        chain_strength,
        s_p: Some(Range {
            min: 0.32,
            max: 0.5,
            step: 0.02,
        }),
        rho: vec![1.0, 8.0, 15.0],
        tau: vec![1.0],
    };
    match n {
        24 | 30 | 36 => Some(ParameterGrid {
            chain_strength: jf(3.0, 7.0),
            s_p: None,
            rho: vec![],
            tau: vec![1.0],
        }),
        42 | 48 | 54 => Some(reverse(jf(5.0, 8.0))),
        60 => Some(reverse(jf(6.0, 9.0))),
        _ => None,
    }
}

/// Registry entry for one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: String,
    pub n: usize,
    pub seed: u64,
    pub best_known: f64,
    /// Solver that produced the best-known value.
    pub best_known_source: String,
    pub optimal_cardinality: usize,
    pub best_bits: Vec<u8>,
    pub greedy_value: f64,
    #[serde(skip)]
    pub instance: Option<QuboInstance>,
}

impl RegistryEntry {
    pub fn instance(&self) -> &QuboInstance {
        self.instance
            .as_ref()
            .expect("registry entry without instance")
    }

    pub fn greedy_solved(&self) -> bool {
        self.greedy_value <= self.best_known + SUCCESS_TOL
    }

    /// Replace the incumbent if `sel` improves it.
    pub fn refresh(&mut self, sel: &Selection, source: &str) -> bool {
        if sel.value < self.best_known - SUCCESS_TOL {
            self.best_known = sel.value;
            self.best_known_source = source.to_string();
            self.optimal_cardinality = sel.cardinality;
            self.best_bits = sel.bits.clone();
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub sizes: Vec<usize>,
    pub per_size: usize,
    pub gbm: GbmParams,
    pub buckets: BucketMap,
    pub seed: u64,
    /// Sizes up to this cap get their best-known value from the exact solver.
    pub exact_cap: usize,
    /// Fallback for larger sizes: greedy-seeded GA runs.
    pub ga: GaConfig,
    pub ga_restarts: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            sizes: vec![24],
            per_size: 30,
            gbm: GbmParams::default(),
            buckets: BucketMap::default(),
            seed: 0,
            exact_cap: crate::qubo::DEFAULT_EXACT_CAP,
            ga: GaConfig {
                max_iterations: 5000,
                ..GaConfig::default()
            },
            ga_restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub config: EnsembleConfig,
    pub rng: String,
    pub entries: Vec<RegistryEntry>,
}

/// One instance from `(n, index)` of the ensemble.
pub fn generate_instance(cfg: &EnsembleConfig, n: usize, index: usize) -> Result<QuboInstance> {
    let seed = derive_seed(cfg.seed, n as u64, index as u64);
    let gbm = GbmParams {
        n_assets: n,
        seed,
        ..cfg.gbm.clone()
    };
    let scenario = simulate_scenario(&gbm)?;
    let stats = realized_stats(&scenario, gbm.r0)?;
    let mut q = bucketize(&stats, &cfg.buckets)?;
    q.metadata.id = Some(instance_id(n, index));
    q.metadata.seed = Some(seed);
    q.metadata.gbm = Some(gbm);
    q.metadata.rng = Some(RNG_ALGORITHM.to_string());
    Ok(q)
}

pub fn instance_id(n: usize, index: usize) -> String {
    format!("n{n:02}_i{index:03}")
}

/// Best-known selection: exact when `n <= exact_cap`, otherwise the best of
/// greedy and several greedy-seeded GA runs.
pub fn best_known(q: &QuboInstance, cfg: &EnsembleConfig) -> Result<(Selection, String)> {
    if q.n() <= cfg.exact_cap {
        return Ok((exact_solve_capped(q, cfg.exact_cap)?, "exact".into()));
    }
    let greedy = greedy_selection(q);
    let mut best = (greedy.clone(), "greedy".to_string());
    for r in 0..cfg.ga_restarts.max(1) {
        let ga_cfg = GaConfig {
            seed: derive_seed(cfg.ga.seed, q.metadata.seed.unwrap_or(0), r as u64),
            ..cfg.ga.clone()
        };
        let init = (r % 2 == 0).then_some(greedy.bits.as_slice());
        let res = ga_solve(q, &ga_cfg, init)?;
        if res.best.value < best.0.value - SUCCESS_TOL {
            best = (res.best, "ga".into());
        }
    }
    Ok(best)
}

pub fn generate_ensemble(cfg: &EnsembleConfig) -> Result<Registry> {
    if let Some(&n) = cfg
        .sizes
        .iter()
        .find(|&&n| !(2..=MAX_EMBEDDABLE).contains(&n))
    {
        return Err(Error::TooLarge {
            n,
            max: MAX_EMBEDDABLE,
        });
    }
    cfg.gbm.validate()?;
    cfg.buckets.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.per_size).map(move |i| (n, i)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(n, i)| {
            let q = generate_instance(cfg, n, i)?;
            let (best, source) = best_known(&q, cfg)?;
            Ok(RegistryEntry {
                id: instance_id(n, i),
                n,
                seed: q.metadata.seed.unwrap_or_default(),
                best_known: best.value,
                best_known_source: source,
                optimal_cardinality: best.cardinality,
                best_bits: best.bits,
                greedy_value: greedy_selection(&q).value,
                instance: Some(q),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Registry {
        config: cfg.clone(),
        rng: RNG_ALGORITHM.to_string(),
        entries,
    })
}

impl Registry {
    /// Write `manifest.json` and `instances/<id>.json` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let inst_dir = dir.join("instances");
        std::fs::create_dir_all(&inst_dir).map_err(|e| Error::io(&inst_dir, e))?;
        for e in &self.entries {
            e.instance()
                .save(&inst_dir.join(format!("{}.json", e.id)))?;
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut reg: Registry = serde_json::from_str(&text)?;
        for e in reg.entries.iter_mut() {
            e.instance = Some(QuboInstance::load(
                &dir.join("instances").join(format!("{}.json", e.id)),
            )?);
        }
        Ok(reg)
    }
}

/// Produces read values for one instance at one grid point.
pub trait BatchSampler: Sync {
    fn sample(
        &self,
        entry: &RegistryEntry,
        point: &GridPoint,
        kind: ProtocolKind,
    ) -> Result<Vec<f64>>;
}

/// Sampler backed by the annealing engine. Reverse runs start from the greedy
/// solution.
pub struct EngineSampler {
    pub graph: ChimeraGraph,
    pub schedule: Schedule,
    pub engine: EngineConfig,
    /// Reads per grid point, run in batches of `engine.reads_per_batch`.
    pub reads: usize,
}

impl BatchSampler for EngineSampler {
    fn sample(
        &self,
        entry: &RegistryEntry,
        point: &GridPoint,
        kind: ProtocolKind,
    ) -> Result<Vec<f64>> {
        let q = entry.instance();
        let params = AnnealParams {
            chain_strength: point.chain_strength,
            tau: point.tau,
            rho: point.rho.unwrap_or(0.0),
            s_p: point.s_p.unwrap_or(1.0),
            max_reads: self.reads,
            target: None,
        };
        let cfg = EngineConfig {
            seed: derive_seed(self.engine.seed, entry.seed, point_key(point)),
            ..self.engine.clone()
        };
        let seed = match kind {
            ProtocolKind::Forward => None,
            ProtocolKind::Reverse => Some(greedy_selection(q).bits),
        };
        let out = anneal_solve(
            q,
            &self.graph,
            &params,
            seed.as_deref(),
            &self.schedule,
            &cfg,
        )?;
        Ok(out.reads.energies)
    }
}

fn point_key(p: &GridPoint) -> u64 {
    let mut h = p.chain_strength.to_bits();
    for v in [p.tau, p.rho.unwrap_or(-1.0), p.s_p.unwrap_or(-1.0)] {
        h = derive_seed(h, v.to_bits(), 0);
    }
    h
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub instance_id: String,
    pub n: usize,
    pub solver: String,
    pub chain_strength: f64,
    pub tau: f64,
    pub rho: Option<f64>,
    pub s_p: Option<f64>,
    pub reads: usize,
    pub successes: usize,
    pub p: f64,
    pub t_run: f64,
    pub tts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub solver: String,
    pub instances: usize,
    pub solved: usize,
    pub unsolved: usize,
    pub median_tts: Option<f64>,
    pub p30_tts: Option<f64>,
    pub p70_tts: Option<f64>,
    /// Per-instance optimal chain strengths (solved instances).
    pub optimal_chain_strength: Vec<f64>,
    /// Per-instance optimal pause locations (reverse, solved instances).
    pub optimal_s_p: Vec<f64>,
    pub optimal_rho: Vec<f64>,
}

impl SizeSummary {
    pub fn unsolved_note(&self) -> String {
        format!("{} of {} unsolved", self.unsolved, self.instances)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub alpha: f64,
    pub success_definition: String,
    pub points: Vec<PointResult>,
    /// Minimum-TTS row per instance (the first grid point when none succeeded).
    pub best: Vec<PointResult>,
    pub sizes: Vec<SizeSummary>,
}

pub fn success_definition() -> String {
    format!("read value <= best-known objective value + {SUCCESS_TOL:e}")
}

/// Score every grid point for every eligible instance and aggregate.
///
/// Reverse sweeps skip instances the greedy seed already solves.
pub fn sweep<S: BatchSampler>(
    entries: &[RegistryEntry],
    grid: &ParameterGrid,
    kind: ProtocolKind,
    sampler: &S,
    alpha: f64,
) -> Result<BenchReport> {
    let points = grid.points(kind)?;
    let eligible: Vec<&RegistryEntry> = entries
        .iter()
        .filter(|e| kind == ProtocolKind::Forward || !e.greedy_solved())
        .collect();
    let jobs: Vec<(&RegistryEntry, &GridPoint)> = eligible
        .iter()
        .flat_map(|e| points.iter().map(move |p| (*e, p)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(e, p)| {
            let values = sampler.sample(e, p, kind)?;
            let (_, hits, reads) = estimate_success(&values, e.best_known);
            let est = TtsEstimate::new(reads, hits, alpha, p.t_run())?;
            Ok(PointResult {
                instance_id: e.id.clone(),
                n: e.n,
                solver: kind.name().to_string(),
                chain_strength: p.chain_strength,
                tau: p.tau,
                rho: p.rho,
                s_p: p.s_p,
                reads,
                successes: hits,
                p: est.p,
                t_run: p.t_run(),
                tts: est.tts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(rows, alpha))
}

/// Per-instance minima and per-size percentiles from raw rows.
pub fn aggregate(points: Vec<PointResult>, alpha: f64) -> BenchReport {
    let mut by_instance: BTreeMap<(String, String), Vec<&PointResult>> = BTreeMap::new();
    for p in &points {
        by_instance
            .entry((p.solver.clone(), p.instance_id.clone()))
            .or_default()
            .push(p);
    }
    let best: Vec<PointResult> = by_instance
        .values()
        .map(|rows| {
            rows.iter()
                .filter(|r| r.tts.is_some())
                .min_by(|a, b| a.tts.unwrap().total_cmp(&b.tts.unwrap()))
                .unwrap_or(&rows[0])
                .to_owned()
                .clone()
        })
        .collect();

    let mut by_size: BTreeMap<(String, usize), Vec<&PointResult>> = BTreeMap::new();
    for b in &best {
        by_size.entry((b.solver.clone(), b.n)).or_default().push(b);
    }
    let sizes = by_size
        .into_iter()
        .map(|((solver, n), rows)| {
            let mut finite: Vec<f64> = rows.iter().filter_map(|r| r.tts).collect();
            finite.sort_by(f64::total_cmp);
            let solved: Vec<&&PointResult> = rows.iter().filter(|r| r.tts.is_some()).collect();
            SizeSummary {
                n,
                solver,
                instances: rows.len(),
                solved: finite.len(),
                unsolved: rows.len() - finite.len(),
                median_tts: percentile(&finite, 0.5),
                p30_tts: percentile(&finite, 0.3),
                p70_tts: percentile(&finite, 0.7),
                optimal_chain_strength: solved.iter().map(|r| r.chain_strength).collect(),
                optimal_s_p: solved.iter().filter_map(|r| r.s_p).collect(),
                optimal_rho: solved.iter().filter_map(|r| r.rho).collect(),
            }
        })
        .collect();

    BenchReport {
        alpha,
        success_definition: success_definition(),
        points,
        best,
        sizes,
    }
}

pub const RESULTS_HEADER: &str =
    "instance_id,N,solver,J_F,tau_us,rho_us,s_p,reads,successes,p,t_run_us,tts_us";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn results_csv(rows: &[PointResult]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.instance_id,
            r.n,
            r.solver,
            r.chain_strength,
            r.tau,
            opt(r.rho),
            opt(r.s_p),
            r.reads,
            r.successes,
            r.p,
            r.t_run,
            r.tts.map_or_else(|| "inf".to_string(), |t| t.to_string())
        );
    }
    out
}

pub fn parse_results_csv(text: &str) -> Result<Vec<PointResult>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        None => return Ok(vec![]),
        Some(h) if h.trim() == RESULTS_HEADER => {}
        Some(h) => {
            return Err(Error::InvalidConfig(format!(
                "unexpected results header {h:?}"
            )))
        }
    }
    let num = |s: &str, row: usize| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::InvalidConfig(format!("results row {row}: {e}")))
    };
    let opt_num = |s: &str, row: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s, row).map(Some)
        }
    };
    lines
        .enumerate()
        .map(|(row, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 12 {
                return Err(Error::InvalidConfig(format!(
                    "results row {} has {} columns",
                    row + 1,
                    f.len()
                )));
            }
            Ok(PointResult {
                instance_id: f[0].to_string(),
                n: num(f[1], row)? as usize,
                solver: f[2].to_string(),
                chain_strength: num(f[3], row)?,
                tau: num(f[4], row)?,
                rho: opt_num(f[5], row)?,
                s_p: opt_num(f[6], row)?,
                reads: num(f[7], row)? as usize,
                successes: num(f[8], row)? as usize,
                p: num(f[9], row)?,
                t_run: num(f[10], row)?,
                tts: if f[11] == "inf" {
                    None
                } else {
                    Some(num(f[11], row)?)
                },
            })
        })
        .collect()
}

/// Median TTS per `(solver, N, tau)` over per-instance minima at that `tau`.
pub fn tau_comparison(points: &[PointResult]) -> String {
    let mut per: BTreeMap<(String, usize, u64, String), Option<f64>> = BTreeMap::new();
    for p in points {
        let key = (
            p.solver.clone(),
            p.n,
            p.tau.to_bits(),
            p.instance_id.clone(),
        );
        let slot = per.entry(key).or_insert(None);
        if let Some(t) = p.tts {
            *slot = Some(slot.map_or(t, |s: f64| s.min(t)));
        }
    }
    let mut groups: BTreeMap<(String, usize, u64), (Vec<f64>, usize)> = BTreeMap::new();
    for ((solver, n, tau, _), v) in per {
        let g = groups.entry((solver, n, tau)).or_default();
        match v {
            Some(t) => g.0.push(t),
            None => g.1 += 1,
        }
    }
    let mut out = String::from("# solver N tau_us median_tts_us unsolved\n");
    for ((solver, n, tau), (mut v, unsolved)) in groups {
        v.sort_by(f64::total_cmp);
        let med = percentile(&v, 0.5).map_or_else(|| "nan".to_string(), |m| m.to_string());
        let _ = writeln!(out, "{solver} {n} {} {med} {unsolved}", f64::from_bits(tau));
    }
    out
}

/// gnuplot-ready `N median p30 p70` table.
pub fn tts_vs_n(report: &BenchReport) -> String {
    let mut out = String::from("# solver N median_tts_us p30_tts_us p70_tts_us solved instances\n");
    for s in &report.sizes {
        let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            s.solver,
            s.n,
            f(s.median_tts),
            f(s.p30_tts),
            f(s.p70_tts),
            s.solved,
            s.instances
        );
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    alpha: f64,
    success_definition: &'a str,
    sizes: Vec<SummaryRow<'a>>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    #[serde(flatten)]
    size: &'a SizeSummary,
    note: String,
}

pub fn summary_json(report: &BenchReport) -> Result<String> {
    let s = Summary {
        alpha: report.alpha,
        success_definition: &report.success_definition,
        sizes: report
            .sizes
            .iter()
            .map(|size| SummaryRow {
                size,
                note: size.unsolved_note(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&s)? + "\n")
}

/// Write `results.csv`, `best.csv`, `summary.json`, `tts_vs_n.dat` and, when
/// more than one `tau` was swept, `tau_comparison.dat`.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    };
    write("results.csv", results_csv(&report.points))?;
    write("best.csv", results_csv(&report.best))?;
    write("summary.json", summary_json(report)?)?;
    write("tts_vs_n.dat", tts_vs_n(report))?;
    let mut taus: Vec<u64> = report.points.iter().map(|p| p.tau.to_bits()).collect();
    taus.sort_unstable();
    taus.dedup();
    if taus.len() > 1 {
        write("tau_comparison.dat", tau_comparison(&report.points))?;
    }
    Ok(())
}
