//! Forward and reverse annealing on a classical transverse-field surrogate.
//!
//! The default back-end is spin-vector Monte Carlo: each qubit is a planar
//! rotor with angle `theta` in `[0, pi]` and classical energy
//! `-A(s) sum sin(theta_q) + B(s) [sum h_q cos(theta_q) + sum J_qr cos(theta_q) cos(theta_r)]`.
//! Metropolis sweeps advance the schedule parameter `s` along the protocol
//! trajectory; the readout is `sign(cos(theta))`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chimera::{decode_majority, EmbeddedIsing};
use crate::error::{Error, Result};
use crate::qubo::spins_to_bits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub s: f64,
    pub a: f64,
    pub b: f64,
}

/// Piecewise-linear annealing schedule `A(s)`, `B(s)` in units of the
/// temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    points: Vec<SchedulePoint>,
}

impl Schedule {
    pub fn new(points: Vec<SchedulePoint>) -> Result<Self> {
        let bad = |m: String| Err(Error::MalformedSchedule(m));
        if points.len() < 2 {
            return bad("need at least two points".into());
        }
        if points[0].s != 0.0 || points[points.len() - 1].s != 1.0 {
            return bad("s must run from 0 to 1".into());
        }
        for w in points.windows(2) {
            if !(w[1].s > w[0].s) {
                return bad(format!("s not strictly increasing at s = {}", w[1].s));
            }
            if w[1].a > w[0].a {
                return bad(format!("A increases at s = {}", w[1].s));
            }
            if w[1].b < w[0].b {
                return bad(format!("B decreases at s = {}", w[1].s));
            }
        }
        if points
            .iter()
            .any(|p| !p.a.is_finite() || !p.b.is_finite() || p.a < 0.0 || p.b < 0.0)
        {
            return bad("A and B must be finite and non-negative".into());
        }
        if points[points.len() - 1].a.abs() > 1e-12 {
            return bad("A(1) must be 0".into());
        }
        Ok(Schedule { points })
    }

    pub fn points(&self) -> &[SchedulePoint] {
        &self.points
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, 1.0);
        let idx = self.points.partition_point(|p| p.s <= s);
        if idx >= self.points.len() {
            return (self.points.len() - 2, 1.0);
        }
        let i = idx - 1;
        let (p, q) = (&self.points[i], &self.points[i + 1]);
        (i, (s - p.s) / (q.s - p.s))
    }

    pub fn a(&self, s: f64) -> f64 {
        let (i, w) = self.locate(s);
        self.points[i].a + w * (self.points[i + 1].a - self.points[i].a)
    }

    pub fn b(&self, s: f64) -> f64 {
        let (i, w) = self.locate(s);
        self.points[i].b + w * (self.points[i + 1].b - self.points[i].b)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,A,B\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.s, p.a, p.b);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.replace(' ', "").eq_ignore_ascii_case("s,A,B") => {}
            other => {
                return Err(Error::MalformedSchedule(format!(
                    "expected header \"s,A,B\", got {other:?}"
                )))
            }
        }
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedSchedule(format!("row {}: {e}", row + 1)))?;
            if vals.len() != 3 {
                return Err(Error::MalformedSchedule(format!(
                    "row {} has {} columns",
                    row + 1,
                    vals.len()
                )));
            }
            points.push(SchedulePoint {
                s: vals[0],
                a: vals[1],
                b: vals[2],
            });
        }
        Schedule::new(points)
    }
}

/// `A(s) = 6 (1 - s)^2`, `B(s) = 12 s`, sampled at 101 points.
pub fn default_schedule() -> Schedule {
    let points = (0..=100)
        .map(|i| {
            let s = i as f64 / 100.0;
            SchedulePoint {
                s,
                a: 6.0 * (1.0 - s) * (1.0 - s),
                b: 12.0 * s,
            }
        })
        .collect();
    Schedule::new(points).expect("default schedule is well formed")
}

pub fn load_schedule(path: &Path) -> Result<Schedule> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Schedule::from_csv(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Logical selection bits; chains start uniform.
    Logical(Vec<u8>),
    /// Physical spins over the embedded qubits.
    Physical(Vec<i8>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnnealProtocol {
    Forward {
        tau: f64,
    },
    Reverse {
        tau: f64,
        rho: f64,
        s_p: f64,
        initial: Option<InitialState>,
    },
}

pub fn build_forward_protocol(tau: f64) -> Result<AnnealProtocol> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    Ok(AnnealProtocol::Forward { tau })
}

/// Three-phase reverse protocol: `s` goes `1 -> s_p` over `tau`, holds for
/// `rho`, then returns `s_p -> 1` over `tau`.
pub fn build_reverse_protocol(
    tau: f64,
    rho: f64,
    s_p: f64,
    initial: Option<InitialState>,
) -> Result<AnnealProtocol> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig(format!("tau must be > 0, got {tau}")));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!("rho must be >= 0, got {rho}")));
    }
    if !(0.0..=1.0).contains(&s_p) {
        return Err(Error::InvalidFraction {
            name: "s_p",
            value: s_p,
        });
    }
    Ok(AnnealProtocol::Reverse {
        tau,
        rho,
        s_p,
        initial,
    })
}

impl AnnealProtocol {
    /// Modeled time of one read in microseconds.
    pub fn duration(&self) -> f64 {
        match *self {
            AnnealProtocol::Forward { tau } => tau,
            AnnealProtocol::Reverse { tau, rho, .. } => 2.0 * tau + rho,
        }
    }

    /// Times at which the trajectory changes phase.
    pub fn phase_boundaries(&self) -> Vec<f64> {
        match *self {
            AnnealProtocol::Forward { .. } => vec![],
            AnnealProtocol::Reverse { tau, rho, .. } => vec![tau, tau + rho],
        }
    }

    /// Schedule fraction at time `t` in `[0, duration]`.
    pub fn s_at(&self, t: f64) -> f64 {
        match *self {
            AnnealProtocol::Forward { tau } => (t / tau).clamp(0.0, 1.0),
            AnnealProtocol::Reverse { tau, rho, s_p, .. } => {
                let s = if t <= tau {
                    1.0 + (s_p - 1.0) * t / tau
                } else if t <= tau + rho {
                    s_p
                } else {
                    ((1.0 - s_p) * (t - rho) - (1.0 - 2.0 * s_p) * tau) / tau
                };
                s.clamp(0.0, 1.0)
            }
        }
    }

    pub fn is_reverse(&self) -> bool {
        matches!(self, AnnealProtocol::Reverse { .. })
    }

    pub fn with_initial(self, state: InitialState) -> Self {
        match self {
            AnnealProtocol::Reverse { tau, rho, s_p, .. } => AnnealProtocol::Reverse {
                tau,
                rho,
                s_p,
                initial: Some(state),
            },
            fwd => fwd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub sweeps_per_microsecond: usize,
    /// Temperature in schedule energy units.
    pub temperature: f64,
    pub seed: u64,
    pub reads_per_batch: usize,
    /// Number of batches, each under its own spin-reversal transformation.
    pub gauges: usize,
    /// Rescale `h` into `[-2, 2]` and `J` into `[-1, 1]` before annealing, as
    /// the hardware does when programming a problem.
    pub auto_scale: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            sweeps_per_microsecond: 100,
            temperature: 1.0,
            seed: 0,
            reads_per_batch: 1500,
            gauges: 1,
            auto_scale: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps_per_microsecond < 1 {
            return Err(Error::InvalidConfig(
                "sweeps_per_microsecond must be >= 1".into(),
            ));
        }
        if self.reads_per_batch < 1 {
            return Err(Error::InvalidConfig("reads_per_batch must be >= 1".into()));
        }
        if self.gauges < 1 {
            return Err(Error::InvalidConfig("gauges must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn total_reads(&self) -> usize {
        self.reads_per_batch * self.gauges
    }

    pub fn sweeps(&self, duration: f64) -> usize {
        (duration * self.sweeps_per_microsecond as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadSet {
    pub physical: Vec<Vec<i8>>,
    pub decoded: Vec<Vec<u8>>,
    /// Logical objective value (QUBO value) of each decoded read.
    pub energies: Vec<f64>,
    pub gauge_index: Vec<usize>,
    /// Modeled anneal time of one read in microseconds.
    pub t_run_us: f64,
}

impl ReadSet {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn best(&self) -> Option<usize> {
        (0..self.len()).min_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]))
    }

    /// CSV with columns
    /// `read_index,gauge_index,energy,cardinality,bitstring,t_run_us`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("read_index,gauge_index,energy,cardinality,bitstring,t_run_us\n");
        for i in 0..self.len() {
            let card = self.decoded[i].iter().filter(|&&b| b != 0).count();
            let _ = writeln!(
                out,
                "{i},{},{},{card},{},{}",
                self.gauge_index[i],
                self.energies[i],
                bits_to_hex(&self.decoded[i]),
                self.t_run_us
            );
        }
        out
    }
}

/// Hex encoding of a bitstring, most significant bit first: bit 0 is the high
/// bit of the first digit; the tail is zero-padded to a full digit.
pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|c| {
            let v = c
                .iter()
                .chain(std::iter::repeat(&0))
                .take(4)
                .fold(0u32, |acc, &b| (acc << 1) | u32::from(b != 0));
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

pub fn hex_to_bits(hex: &str, n: usize) -> Result<Vec<u8>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for ch in hex.chars() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| Error::InvalidConfig(format!("invalid hex digit {ch:?}")))?;
        for shift in (0..4).rev() {
            bits.push(((v >> shift) & 1) as u8);
        }
    }
    if bits.len() < n || bits[n..].iter().any(|&b| b != 0) || bits.len() >= n + 4 {
        return Err(Error::InvalidConfig(format!(
            "hex string {hex:?} does not encode {n} bits"
        )));
    }
    bits.truncate(n);
    Ok(bits)
}

/// Spin-reversal transformation: `h'_q = g_q h_q`, `J'_qr = g_q g_r J_qr`.
pub fn apply_gauge(e: &EmbeddedIsing, g: &[i8]) -> Result<EmbeddedIsing> {
    if g.len() != e.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "gauge covers {} qubits, problem has {}",
            g.len(),
            e.n_qubits()
        )));
    }
    let mut out = e.clone();
    for (h, &s) in out.h.iter_mut().zip(g) {
        if s < 0 {
            *h = -*h;
        }
    }
    for c in out.couplers.iter_mut() {
        if g[c.0] * g[c.1] < 0 {
            c.2 = -c.2;
        }
    }
    Ok(out)
}

/// Dense-neighbor view of an embedded problem used by the sampler.
struct Lattice {
    h: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl Lattice {
    fn new(e: &EmbeddedIsing, scale: f64) -> Self {
        let n = e.n_qubits();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, j) in &e.couplers {
            adj[a].push((b, j / scale));
            adj[b].push((a, j / scale));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for row in adj {
            neighbors.extend(row);
            offsets.push(neighbors.len());
        }
        Lattice {
            h: e.h.iter().map(|h| h / scale).collect(),
            offsets,
            neighbors,
        }
    }

    fn n(&self) -> usize {
        self.h.len()
    }
}

/// Sampling back-end for a single read.
pub trait AnnealBackend: Sync {
    /// One read on the (gauged) problem; returns physical spins.
    fn sample(
        &self,
        problem: &EmbeddedIsing,
        protocol: &AnnealProtocol,
        schedule: &Schedule,
        cfg: &EngineConfig,
        initial: Option<&[i8]>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<i8>;
}

/// Spin-vector Monte Carlo with uniform angle proposals.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpinVectorMonteCarlo;

impl AnnealBackend for SpinVectorMonteCarlo {
    fn sample(
        &self,
        problem: &EmbeddedIsing,
        protocol: &AnnealProtocol,
        schedule: &Schedule,
        cfg: &EngineConfig,
        initial: Option<&[i8]>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<i8> {
        let scale = if cfg.auto_scale {
            problem_scale(problem)
        } else {
            1.0
        };
        let lat = Lattice::new(problem, scale);
        let n = lat.n();
        let pi = std::f64::consts::PI;
        let mut theta: Vec<f64> = match initial {
            Some(s) => s.iter().map(|&x| if x > 0 { 0.0 } else { pi }).collect(),
            None => (0..n).map(|_| rng.random::<f64>() * pi).collect(),
        };
        let mut cos: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let mut sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let duration = protocol.duration();
        let sweeps = cfg.sweeps(duration);
        let temp = cfg.temperature;
        for sweep in 0..sweeps {
            let t = (sweep as f64 + 0.5) * duration / sweeps as f64;
            let s = protocol.s_at(t);
            let a = schedule.a(s);
            let b = schedule.b(s);
            for q in 0..n {
                let mut field = lat.h[q];
                for &(r, j) in &lat.neighbors[lat.offsets[q]..lat.offsets[q + 1]] {
                    field += j * cos[r];
                }
                let proposal = rng.random::<f64>() * pi;
                let (ps, pc) = proposal.sin_cos();
                let delta = -a * (ps - sin[q]) + b * field * (pc - cos[q]);
                let accept =
                    delta <= 0.0 || (temp > 0.0 && rng.random::<f64>() < (-delta / temp).exp());
                if accept {
                    theta[q] = proposal;
                    cos[q] = pc;
                    sin[q] = ps;
                }
            }
        }
        cos.iter().map(|&c| if c < 0.0 { -1 } else { 1 }).collect()
    }
}

/// Common rescaling factor bringing `|h| <= 2` and `|J| <= 1`.
pub fn problem_scale(e: &EmbeddedIsing) -> f64 {
    let hmax = e.h.iter().map(|h| h.abs()).fold(0.0, f64::max);
    let jmax = e.couplers.iter().map(|c| c.2.abs()).fold(0.0, f64::max);
    let s = (hmax / 2.0).max(jmax);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent stream derived from `(seed, stream, index)`.
pub(crate) fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(stream)) ^ index)
}

const READ_STREAM: u64 = 1;
const GAUGE_STREAM: u64 = 2;

/// Random gauge for batch `batch` of a run seeded with `seed`.
pub fn batch_gauge(seed: u64, batch: usize, n: usize) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, GAUGE_STREAM, batch as u64));
    (0..n)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect()
}

/// Run a protocol with the spin-vector Monte Carlo back-end.
pub fn run(
    e: &EmbeddedIsing,
    protocol: &AnnealProtocol,
    schedule: &Schedule,
    cfg: &EngineConfig,
) -> Result<ReadSet> {
    run_with(&SpinVectorMonteCarlo, e, protocol, schedule, cfg)
}

/// Run a protocol with any back-end. Reads are independent and seeded by
/// index, so the output does not depend on the thread count.
pub fn run_with<B: AnnealBackend>(
    backend: &B,
    e: &EmbeddedIsing,
    protocol: &AnnealProtocol,
    schedule: &Schedule,
    cfg: &EngineConfig,
) -> Result<ReadSet> {
    cfg.validate()?;
    let n = e.n_qubits();
    if e.h.len() != n || e.embedding.n_logical != e.logical.n() {
        return Err(Error::DimensionMismatch(
            "inconsistent embedded problem".into(),
        ));
    }
    let initial: Option<Vec<i8>> = match protocol {
        AnnealProtocol::Forward { .. } => None,
        AnnealProtocol::Reverse { initial, .. } => match initial {
            None => return Err(Error::MissingInitialState),
            Some(InitialState::Logical(bits)) => {
                if bits.len() != e.logical.n() {
                    return Err(Error::DimensionMismatch(format!(
                        "initial state has {} bits for {} variables",
                        bits.len(),
                        e.logical.n()
                    )));
                }
                Some(e.chain_uniform(&crate::qubo::bits_to_spins(bits)))
            }
            Some(InitialState::Physical(spins)) => {
                if spins.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "initial state has {} spins for {n} qubits",
                        spins.len()
                    )));
                }
                Some(spins.clone())
            }
        },
    };

    let gauges: Vec<Vec<i8>> = (0..cfg.gauges)
        .map(|g| batch_gauge(cfg.seed, g, n))
        .collect();
    let gauged: Vec<EmbeddedIsing> = gauges
        .iter()
        .map(|g| apply_gauge(e, g))
        .collect::<Result<_>>()?;

    let total = cfg.total_reads();
    let physical: Vec<Vec<i8>> = (0..total)
        .into_par_iter()
        .map(|read| {
            let batch = read / cfg.reads_per_batch;
            let g = &gauges[batch];
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, READ_STREAM, read as u64));
            let init: Option<Vec<i8>> = initial
                .as_ref()
                .map(|s| s.iter().zip(g).map(|(a, b)| a * b).collect());
            let out = backend.sample(
                &gauged[batch],
                protocol,
                schedule,
                cfg,
                init.as_deref(),
                &mut rng,
            );
            out.iter().zip(g).map(|(a, b)| a * b).collect()
        })
        .collect();

    let offset = e.logical.offset;
    let mut decoded = Vec::with_capacity(total);
    let mut energies = Vec::with_capacity(total);
    for p in &physical {
        let spins = decode_majority(p, e);
        energies.push(e.logical.energy_unchecked(&spins) + offset);
        decoded.push(spins_to_bits(&spins));
    }
    Ok(ReadSet {
        physical,
        decoded,
        energies,
        gauge_index: (0..total).map(|r| r / cfg.reads_per_batch).collect(),
        t_run_us: protocol.duration(),
    })
}
