//! Classical solvers: greedy descent, mutation-only genetic algorithm, the
//! desirability-shift cardinality loop and the greedy-seeded reverse
//! annealing driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anneal::{
    self, build_forward_protocol, build_reverse_protocol, derive_seed, EngineConfig, InitialState,
    ReadSet, Schedule,
};
use crate::chimera::{clique_embed, embed_ising, ChimeraGraph};
use crate::error::{Error, Result};
use crate::qubo::{
    exact_solve_capped, qubo_to_ising, shift_desirability, spins_to_bits, IsingInstance,
    QuboInstance, Selection,
};

/// Greedy descent on an Ising model.
///
/// Every variable starts with its local field as effective field. The free
/// variable with the largest effective field magnitude (smaller index on ties)
/// is fixed against its field, `-1` if the field is positive and `+1`
/// otherwise, and its coupling is folded into the effective fields of the
/// remaining variables.
pub fn greedy_search(m: &IsingInstance) -> Vec<i8> {
    let n = m.n();
    let mut field = m.h().to_vec();
    let mut solution = vec![0i8; n];
    let mut free: Vec<usize> = (0..n).collect();
    while !free.is_empty() {
        let (pos, &i) = free
            .iter()
            .enumerate()
            .max_by(|(_, &x), (_, &y)| {
                field[x]
                    .abs()
                    .total_cmp(&field[y].abs())
                    .then_with(|| y.cmp(&x))
            })
            .expect("non-empty");
        free.remove(pos);
        let s: i8 = if field[i] > 0.0 { -1 } else { 1 };
        solution[i] = s;
        let row = m.j_row(i);
        for &k in &free {
            field[k] += s as f64 * row[k];
        }
    }
    solution
}

/// Greedy selection for a QUBO instance.
pub fn greedy_selection(q: &QuboInstance) -> Selection {
    let spins = greedy_search(&qubo_to_ising(q));
    Selection::evaluate(q, spins_to_bits(&spins)).expect("greedy output has length n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub best: Selection,
    pub objective_calls: u64,
    /// Best value found so far, one entry per iteration or batch.
    pub trace: Vec<f64>,
    /// Modeled time in microseconds.
    pub elapsed_model_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_us: Option<f64>,
}

/// Modeled cost of one objective evaluation: 30 us at `n = 60`, scaling as
/// `n^2`.
pub fn objective_cost_us(n: usize) -> f64 {
    let r = n as f64 / 60.0;
    30.0 * r * r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Population size `L`.
    pub population: usize,
    /// Survivors `K` kept per generation.
    pub survivors: usize,
    /// Mutants per survivor; `population = survivors * offspring_per_survivor`.
    pub offspring_per_survivor: usize,
    /// `(genes flipped, probability)`.
    pub mutation: Vec<(usize, f64)>,
    pub max_iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub target_value: Option<f64>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            survivors: 10,
            offspring_per_survivor: 10,
            mutation: vec![(1, 0.8), (2, 0.2)],
            max_iterations: 1000,
            seed: 0,
            target_value: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.survivors < 1 {
            return bad("survivors must be >= 1".into());
        }
        if self.population != self.survivors * self.offspring_per_survivor {
            return bad(format!(
                "population {} != survivors {} x offspring {}",
                self.population, self.survivors, self.offspring_per_survivor
            ));
        }
        if self.mutation.is_empty() || self.mutation.iter().any(|&(_, p)| !(p >= 0.0)) {
            return bad("mutation distribution must be non-empty with p >= 0".into());
        }
        let total: f64 = self.mutation.iter().map(|m| m.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("mutation probabilities sum to {total}"));
        }
        Ok(())
    }

    fn draw_flips(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(k, p) in &self.mutation {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.mutation.last().expect("validated").0
    }
}

fn flip_delta(q: &QuboInstance, bits: &[u8], i: usize) -> f64 {
    let row = q.b_row(i);
    let coupled: f64 = bits
        .iter()
        .zip(row)
        .filter(|(&b, _)| b != 0)
        .map(|(_, v)| v)
        .sum();
    let sign = if bits[i] != 0 { -1.0 } else { 1.0 };
    sign * (q.a()[i] + coupled)
}

#[derive(Clone)]
struct Chromosome {
    bits: Vec<u8>,
    value: f64,
}

fn rank(pop: &mut [Chromosome]) {
    pop.sort_by(|x, y| x.value.total_cmp(&y.value));
}

/// Mutation-only genetic algorithm.
///
/// Generation 0 is `L` random chromosomes (the first replaced by `initial`
/// when given). Each iteration keeps the `K` best and replaces the population
/// by `m` mutants of each survivor.
pub fn ga_solve(q: &QuboInstance, cfg: &GaConfig, initial: Option<&[u8]>) -> Result<SolverResult> {
    cfg.validate()?;
    let n = q.n();
    if let Some(init) = initial {
        if init.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: init.len(),
            });
        }
    }
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut calls: u64 = 0;
    let mut pop: Vec<Chromosome> = (0..cfg.population)
        .map(|idx| {
            let bits: Vec<u8> = match initial {
                Some(init) if idx == 0 => init.to_vec(),
                _ => (0..n).map(|_| u8::from(rng.random::<bool>())).collect(),
            };
            calls += 1;
            let value = q.evaluate_unchecked(&bits);
            Chromosome { bits, value }
        })
        .collect();
    rank(&mut pop);
    let mut best = pop[0].clone();
    let mut trace = vec![best.value];
    let reached = |v: f64| cfg.target_value.is_some_and(|t| v <= t + 1e-9);

    let mut iteration = 0;
    while iteration < cfg.max_iterations && !reached(best.value) {
        let mut next = Vec::with_capacity(cfg.population);
        for parent in pop.iter().take(cfg.survivors) {
            for _ in 0..cfg.offspring_per_survivor {
                let mut child = parent.clone();
                let flips = cfg.draw_flips(&mut rng).min(n);
                let mut flipped: Vec<usize> = Vec::with_capacity(flips);
                while flipped.len() < flips {
                    let g = rng.random_range(0..n);
                    if !flipped.contains(&g) {
                        flipped.push(g);
                        child.value += flip_delta(q, &child.bits, g);
                        child.bits[g] ^= 1;
                    }
                }
                calls += 1;
                next.push(child);
            }
        }
        pop = next;
        rank(&mut pop);
        if pop[0].value < best.value {
            best = pop[0].clone();
        }
        trace.push(best.value);
        iteration += 1;
    }

    // Delta updates accumulate rounding; report the exact value.
    let best = Selection::evaluate(q, best.bits)?;
    if let Some(last) = trace.last_mut() {
        *last = best.value;
    }
    Ok(SolverResult {
        best,
        objective_calls: calls,
        trace,
        elapsed_model_time: calls as f64 * objective_cost_us(n),
        wall_clock_us: Some(start.elapsed().as_secs_f64() * 1e6),
    })
}

/// Any solver mapping a QUBO instance to a selection.
pub trait QuboSolver {
    fn solve(&self, q: &QuboInstance) -> Result<Selection>;
}

#[derive(Debug, Clone, Copy)]
pub struct ExactSolver {
    pub max_n: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver {
            max_n: crate::qubo::DEFAULT_EXACT_CAP,
        }
    }
}

impl QuboSolver for ExactSolver {
    fn solve(&self, q: &QuboInstance) -> Result<Selection> {
        exact_solve_capped(q, self.max_n)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedySolver;

impl QuboSolver for GreedySolver {
    fn solve(&self, q: &QuboInstance) -> Result<Selection> {
        Ok(greedy_selection(q))
    }
}

#[derive(Debug, Clone, Default)]
pub struct GaSolver {
    pub config: GaConfig,
    pub greedy_seed: bool,
}

impl QuboSolver for GaSolver {
    fn solve(&self, q: &QuboInstance) -> Result<Selection> {
        let seed = self.greedy_seed.then(|| greedy_selection(q).bits);
        Ok(ga_solve(q, &self.config, seed.as_deref())?.best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityResult {
    /// Selection evaluated on the unshifted objective.
    pub selection: Selection,
    pub delta: f64,
    pub rounds: usize,
    /// False when no round produced exactly the target cardinality; the
    /// closest selection is returned instead.
    pub attained: bool,
}

pub const CARDINALITY_ROUND_CAP: usize = 64;

/// Shift bound guaranteeing an empty (full) optimum at `+bound` (`-bound`).
pub fn cardinality_shift_bound(q: &QuboInstance) -> f64 {
    2.0 * q.max_abs_row_sum() + q.max_abs_a()
}

/// Binary search on the desirability shift until the inner solver returns a
/// selection of `target` assets.
pub fn cardinality_search(
    q: &QuboInstance,
    target: usize,
    inner: &dyn QuboSolver,
) -> Result<CardinalityResult> {
    if target > q.n() {
        return Err(Error::InvalidConfig(format!(
            "target {target} exceeds {} assets",
            q.n()
        )));
    }
    let bound = cardinality_shift_bound(q);
    let (mut lo, mut hi) = (-bound, bound);
    let mut delta = 0.0;
    let mut closest: Option<(usize, Vec<u8>, f64)> = None;
    for round in 1..=CARDINALITY_ROUND_CAP {
        let sel = inner.solve(&shift_desirability(q, delta))?;
        let m = sel.cardinality;
        let gap = m.abs_diff(target);
        if m == target {
            return Ok(CardinalityResult {
                selection: Selection::evaluate(q, sel.bits)?,
                delta,
                rounds: round,
                attained: true,
            });
        }
        if closest.as_ref().is_none_or(|c| gap < c.0) {
            closest = Some((gap, sel.bits, delta));
        }
        if m > target {
            lo = delta;
        } else {
            hi = delta;
        }
        delta = 0.5 * (lo + hi);
    }
    let (_, bits, delta) = closest.expect("at least one round");
    Ok(CardinalityResult {
        selection: Selection::evaluate(q, bits)?,
        delta,
        rounds: CARDINALITY_ROUND_CAP,
        attained: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealParams {
    pub chain_strength: f64,
    pub tau: f64,
    /// Pause duration (reverse only).
    pub rho: f64,
    /// Pause location (reverse only).
    pub s_p: f64,
    /// Total read budget; consumed in batches of `reads_per_batch`.
    pub max_reads: usize,
    #[serde(default)]
    pub target: Option<f64>,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            chain_strength: 5.0,
            tau: 1.0,
            rho: 1.0,
            s_p: 0.4,
            max_reads: 1500,
            target: None,
        }
    }
}

/// Result of an annealing solve: summary plus the raw reads.
#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub result: SolverResult,
    pub reads: ReadSet,
}

/// Embed, anneal in batches and keep the best decoded read.
///
/// `seed_state` selects reverse annealing from that logical state; `None`
/// runs forward annealing. Each batch uses its own gauge.
pub fn anneal_solve(
    q: &QuboInstance,
    graph: &ChimeraGraph,
    params: &AnnealParams,
    seed_state: Option<&[u8]>,
    schedule: &Schedule,
    cfg: &EngineConfig,
) -> Result<AnnealOutcome> {
    cfg.validate()?;
    let ising = qubo_to_ising(q);
    let embedding = clique_embed(graph, q.n())?;
    let emb = embed_ising(graph, &ising, &embedding, params.chain_strength)?;
    let protocol = match seed_state {
        None => build_forward_protocol(params.tau)?,
        Some(bits) => build_reverse_protocol(
            params.tau,
            params.rho,
            params.s_p,
            Some(InitialState::Logical(bits.to_vec())),
        )?,
    };
    let t_run = protocol.duration();
    let mut best: Option<Selection> = None;
    let mut trace = Vec::new();
    let mut reads = ReadSet {
        physical: vec![],
        decoded: vec![],
        energies: vec![],
        gauge_index: vec![],
        t_run_us: t_run,
    };
    let mut batch = 0usize;
    while reads.len() < params.max_reads {
        if let (Some(t), Some(b)) = (params.target, &best) {
            if b.value <= t + 1e-9 {
                break;
            }
        }
        let size = cfg.reads_per_batch.min(params.max_reads - reads.len());
        let batch_cfg = EngineConfig {
            reads_per_batch: size,
            gauges: 1,
            seed: derive_seed(cfg.seed, 3, batch as u64),
            ..cfg.clone()
        };
        let rs = anneal::run(&emb, &protocol, schedule, &batch_cfg)?;
        if let Some(i) = rs.best() {
            if best.as_ref().is_none_or(|b| rs.energies[i] < b.value) {
                best = Some(Selection::evaluate(q, rs.decoded[i].clone())?);
            }
        }
        trace.push(best.as_ref().map_or(f64::INFINITY, |b| b.value));
        reads.physical.extend(rs.physical);
        reads.decoded.extend(rs.decoded);
        reads.energies.extend(rs.energies);
        reads.gauge_index.extend(std::iter::repeat_n(batch, size));
        batch += 1;
    }
    let best = match best {
        Some(b) => b,
        None => Selection::evaluate(q, seed_state.map_or_else(|| vec![0; q.n()], <[u8]>::to_vec))?,
    };
    let n_reads = reads.len() as u64;
    Ok(AnnealOutcome {
        result: SolverResult {
            best,
            objective_calls: n_reads,
            trace,
            elapsed_model_time: n_reads as f64 * t_run,
            wall_clock_us: None,
        },
        reads,
    })
}

/// Greedy-seeded reverse annealing.
///
/// The greedy solution seeds every read and is kept as a candidate, so the
/// result is never worse than the seed. Greedy time is not counted in the
/// modeled time.
pub fn hybrid_reverse_solve(
    q: &QuboInstance,
    graph: &ChimeraGraph,
    params: &AnnealParams,
    schedule: &Schedule,
    cfg: &EngineConfig,
) -> Result<AnnealOutcome> {
    let seed = greedy_selection(q);
    let mut out = anneal_solve(q, graph, params, Some(&seed.bits), schedule, cfg)?;
    if out.reads.is_empty() || seed.value < out.result.best.value {
        out.result.best = seed.clone();
    }
    out.result.trace.insert(0, seed.value);
    for v in out.result.trace.iter_mut() {
        *v = v.min(seed.value);
    }
    Ok(out)
}
