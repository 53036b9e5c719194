//! Portfolio QUBO construction, the equivalent Ising form, objective
//! evaluation and an exact solver.
//!
//! The objective over selection bits `q` is
//! `O(q) = sum_i a_i q_i + sum_{i<j} b_ij q_i q_j + constant`,
//! where `constant` is only non-zero after a cardinality penalty was expanded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{AssetStats, GbmParams};

/// Default upper bound on `n` for [`exact_solve`].
pub const DEFAULT_EXACT_CAP: usize = 28;

const TIE_TOL: f64 = 1e-9;

/// Integer coefficient tables used to coarse-grain Sharpe ratios and
/// correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketMap {
    /// One coefficient per equal-width Sharpe bucket, worst bucket first.
    pub sharpe_coeffs: Vec<i32>,
    pub corr_breakpoints: Vec<f64>,
    pub corr_coeffs: Vec<i32>,
}

impl Default for BucketMap {
    fn default() -> Self {
        BucketMap {
            sharpe_coeffs: vec![15, 12, 9, 6, 3, 0, -3, -6, -9, -12, -15],
            corr_breakpoints: vec![-0.25, -0.15, -0.05, 0.05, 0.15, 0.25],
            corr_coeffs: vec![-5, -3, -1, 0, 1, 3, 5],
        }
    }
}

impl BucketMap {
    pub fn validate(&self) -> Result<()> {
        if self.sharpe_coeffs.is_empty() {
            return Err(Error::InvalidConfig("sharpe_coeffs is empty".into()));
        }
        if self.corr_coeffs.len() != self.corr_breakpoints.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} correlation breakpoints need {} coefficients, got {}",
                self.corr_breakpoints.len(),
                self.corr_breakpoints.len() + 1,
                self.corr_coeffs.len()
            )));
        }
        if self.corr_breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(
                "correlation breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Bucket index of `x` in `[min, max]` split into equal-width intervals;
    /// lower-closed, the last interval closed at `max`.
    fn sharpe_bucket(&self, x: f64, min: f64, max: f64) -> usize {
        let k = self.sharpe_coeffs.len();
        let width = (max - min) / k as f64;
        let idx = ((x - min) / width).floor();
        (idx.max(0.0) as usize).min(k - 1)
    }

    pub fn corr_coeff(&self, rho: f64) -> i32 {
        let idx = self.corr_breakpoints.partition_point(|&bp| bp <= rho);
        self.corr_coeffs[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Target number of selected assets.
    pub target: usize,
    /// Penalty strength.
    pub strength: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuboMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gbm: Option<GbmParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    /// Cumulative shift added to every linear coefficient.
    #[serde(default)]
    pub delta_shift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltyConfig>,
    /// Constant term of the objective (expanded penalty).
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    n: usize,
    a: Vec<f64>,
    /// Dense symmetric `n * n`, zero diagonal.
    b: Vec<f64>,
    pub metadata: QuboMetadata,
}

impl QuboInstance {
    pub fn new(a: Vec<f64>) -> Self {
        let n = a.len();
        QuboInstance {
            n,
            a,
            b: vec![0.0; n * n],
            metadata: QuboMetadata::default(),
        }
    }

    /// Build from linear terms and `(i, j, v)` couplings with `i < j`.
    pub fn from_terms(a: Vec<f64>, b: &[(usize, usize, f64)]) -> Result<Self> {
        let mut q = QuboInstance::new(a);
        for &(i, j, v) in b {
            if i >= j || j >= q.n {
                return Err(Error::MalformedInstance(format!(
                    "coupling ({i}, {j}) must satisfy i < j < {}",
                    q.n
                )));
            }
            q.set_b(i, j, v);
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    /// Row `i` of the symmetric coupling matrix.
    pub fn b_row(&self, i: usize) -> &[f64] {
        &self.b[i * self.n..(i + 1) * self.n]
    }

    pub fn set_b(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j, "no self-coupling in the objective");
        self.b[i * self.n + j] = v;
        self.b[j * self.n + i] = v;
    }

    pub fn constant(&self) -> f64 {
        self.metadata.constant
    }

    /// Nonzero couplings `(i, j, v)` with `i < j` in row-major order.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let v = self.b(i, j);
                (v != 0.0).then_some((i, j, v))
            })
        })
    }

    /// `max_i sum_j |b_ij|`.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.b_row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_a(&self) -> f64 {
        self.a.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn evaluate(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: bits.len(),
            });
        }
        Ok(self.evaluate_unchecked(bits))
    }

    pub(crate) fn evaluate_unchecked(&self, bits: &[u8]) -> f64 {
        let mut total = self.metadata.constant;
        for i in 0..self.n {
            if bits[i] == 0 {
                continue;
            }
            total += self.a[i];
            let row = self.b_row(i);
            for j in (i + 1)..self.n {
                if bits[j] != 0 {
                    total += row[j];
                }
            }
        }
        total
    }
}

/// Objective value of `bits`.
pub fn evaluate(q: &QuboInstance, bits: &[u8]) -> Result<f64> {
    q.evaluate(bits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    n: usize,
    h: Vec<f64>,
    /// Dense symmetric `n * n`, zero diagonal.
    j: Vec<f64>,
    pub offset: f64,
}

impl IsingInstance {
    pub fn new(h: Vec<f64>, couplings: &[(usize, usize, f64)], offset: f64) -> Self {
        let n = h.len();
        let mut m = IsingInstance {
            n,
            h,
            j: vec![0.0; n * n],
            offset,
        };
        for &(i, k, v) in couplings {
            assert!(i != k && i < n && k < n);
            m.j[i * n + k] = v;
            m.j[k * n + i] = v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn j(&self, i: usize, k: usize) -> f64 {
        self.j[i * self.n + k]
    }

    pub fn j_row(&self, i: usize) -> &[f64] {
        &self.j[i * self.n..(i + 1) * self.n]
    }

    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |k| {
                let v = self.j(i, k);
                (v != 0.0).then_some((i, k, v))
            })
        })
    }

    /// `sum_i h_i s_i + sum_{i<k} J_ik s_i s_k`, without the offset.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: spins.len(),
            });
        }
        Ok(self.energy_unchecked(spins))
    }

    pub(crate) fn energy_unchecked(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n {
            let si = spins[i] as f64;
            e += self.h[i] * si;
            let row = self.j_row(i);
            for k in (i + 1)..self.n {
                e += row[k] * si * spins[k] as f64;
            }
        }
        e
    }
}

pub fn evaluate_ising(m: &IsingInstance, spins: &[i8]) -> Result<f64> {
    m.energy(spins)
}

/// A selection of assets with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub bits: Vec<u8>,
    pub value: f64,
    pub cardinality: usize,
}

impl Selection {
    pub fn evaluate(q: &QuboInstance, bits: Vec<u8>) -> Result<Self> {
        let value = q.evaluate(&bits)?;
        let cardinality = bits.iter().filter(|&&b| b != 0).count();
        Ok(Selection {
            bits,
            value,
            cardinality,
        })
    }

    pub fn from_spins(q: &QuboInstance, spins: &[i8]) -> Result<Self> {
        Selection::evaluate(q, spins_to_bits(spins))
    }
}

pub fn spins_to_bits(spins: &[i8]) -> Vec<u8> {
    spins.iter().map(|&s| u8::from(s > 0)).collect()
}

pub fn bits_to_spins(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| if b != 0 { 1 } else { -1 }).collect()
}

/// Map asset statistics to integer QUBO coefficients.
pub fn bucketize(stats: &AssetStats, map: &BucketMap) -> Result<QuboInstance> {
    map.validate()?;
    let n = stats.sharpe.len();
    if stats.corr.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} Sharpe values but a {}x{} correlation matrix",
            stats.corr.len(),
            stats.corr.len()
        )));
    }
    if let Some(i) = stats.sharpe.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "asset {i} has non-finite Sharpe"
        )));
    }
    let min = stats.sharpe.iter().copied().fold(f64::INFINITY, f64::min);
    let max = stats
        .sharpe
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::DegenerateRange(min));
    }
    let a = stats
        .sharpe
        .iter()
        .map(|&s| map.sharpe_coeffs[map.sharpe_bucket(s, min, max)] as f64)
        .collect();
    let mut q = QuboInstance::new(a);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = map.corr_coeff(stats.corr[i][j]);
            if v != 0 {
                q.set_b(i, j, v as f64);
            }
        }
    }
    Ok(q)
}

/// Add `P * (M - sum_i q_i)^2` to the objective.
pub fn add_penalty(q: &QuboInstance, cfg: PenaltyConfig) -> QuboInstance {
    let p = cfg.strength;
    let m = cfg.target as f64;
    let mut out = q.clone();
    // (sum q)^2 = sum q_i + 2 sum_{i<j} q_i q_j for binary q.
    for ai in out.a.iter_mut() {
        *ai += p * (1.0 - 2.0 * m);
    }
    for i in 0..out.n {
        for j in (i + 1)..out.n {
            let v = out.b(i, j) + 2.0 * p;
            out.set_b(i, j, v);
        }
    }
    out.metadata.constant += p * m * m;
    out.metadata.penalty = Some(cfg);
    out
}

/// Shift every linear coefficient by `delta`.
pub fn shift_desirability(q: &QuboInstance, delta: f64) -> QuboInstance {
    let mut out = q.clone();
    for ai in out.a.iter_mut() {
        *ai += delta;
    }
    out.metadata.delta_shift += delta;
    out
}

/// Exact Ising form under `s = 2q - 1`.
pub fn qubo_to_ising(q: &QuboInstance) -> IsingInstance {
    let n = q.n;
    let mut h: Vec<f64> = q.a.iter().map(|a| a / 2.0).collect();
    let mut offset = q.metadata.constant + q.a.iter().sum::<f64>() / 2.0;
    let mut couplings = Vec::new();
    for (i, j, v) in q.couplings() {
        h[i] += v / 4.0;
        h[j] += v / 4.0;
        offset += v / 4.0;
        couplings.push((i, j, v / 4.0));
    }
    debug_assert_eq!(h.len(), n);
    IsingInstance::new(h, &couplings, offset)
}

/// Global minimum of `q`; ties go to the lexicographically smallest bitstring.
pub fn exact_solve(q: &QuboInstance) -> Result<Selection> {
    exact_solve_capped(q, DEFAULT_EXACT_CAP)
}

/// [`exact_solve`] with an explicit size cap.
///
/// Depth-first branch and bound over variables in index order, zero branch
/// first, so leaves are visited in lexicographic order. The bound on a subtree
/// with the first `k` variables fixed is
/// `partial + sum_{i>=k} min(0, c_i + sum_{j>i} min(0, b_ij))` where `c_i` is
/// `a_i` plus the couplings to already selected variables.
pub fn exact_solve_capped(q: &QuboInstance, max_n: usize) -> Result<Selection> {
    let n = q.n;
    if n > max_n {
        return Err(Error::TooLarge { n, max: max_n });
    }
    if n == 0 {
        return Ok(Selection {
            bits: vec![],
            value: q.constant(),
            cardinality: 0,
        });
    }
    // A good incumbent speeds up pruning without affecting the tie-break.
    let seed = crate::solvers::greedy_search(&qubo_to_ising(q));
    let seed_value = q.evaluate_unchecked(&spins_to_bits(&seed)) - q.constant();
    let mut bb = BranchAndBound::new(q, seed_value);
    bb.run();
    let bits = bb
        .best_bits
        .expect("branch and bound always reaches a leaf");
    Selection::evaluate(q, bits)
}

struct BranchAndBound<'a> {
    q: &'a QuboInstance,
    n: usize,
    /// `sum_{j>i} min(0, b_ij)`.
    neg_tail: Vec<f64>,
    /// `c[depth * n + i]`, linear field of `i` given fixed prefix.
    c: Vec<f64>,
    bits: Vec<u8>,
    best_value: f64,
    best_bits: Option<Vec<u8>>,
}

impl<'a> BranchAndBound<'a> {
    fn new(q: &'a QuboInstance, incumbent: f64) -> Self {
        let n = q.n;
        let neg_tail = (0..n)
            .map(|i| q.b_row(i)[i + 1..].iter().map(|v| v.min(0.0)).sum())
            .collect();
        let mut c = vec![0.0; (n + 1) * n];
        c[..n].copy_from_slice(&q.a);
        BranchAndBound {
            q,
            n,
            neg_tail,
            c,
            bits: vec![0; n],
            best_value: incumbent,
            best_bits: None,
        }
    }

    fn bound(&self, depth: usize, partial: f64) -> f64 {
        let c = &self.c[depth * self.n..(depth + 1) * self.n];
        partial
            + (depth..self.n)
                .map(|i| (c[i] + self.neg_tail[i]).min(0.0))
                .sum::<f64>()
    }

    fn accepts(&self, value: f64) -> bool {
        match self.best_bits {
            // Incumbent from a heuristic: an equal value found in DFS order
            // is lexicographically smaller and must replace it.
            None => value <= self.best_value + TIE_TOL,
            Some(_) => value < self.best_value - TIE_TOL,
        }
    }

    fn run(&mut self) {
        self.descend(0, 0.0);
    }

    fn descend(&mut self, depth: usize, partial: f64) {
        if depth == self.n {
            if self.accepts(partial) {
                self.best_value = partial;
                self.best_bits = Some(self.bits.clone());
            }
            return;
        }
        if !self.accepts(self.bound(depth, partial)) {
            return;
        }
        let n = self.n;
        // q_depth = 0
        let (head, tail) = self.c.split_at_mut((depth + 1) * n);
        tail[..n].copy_from_slice(&head[depth * n..]);
        self.bits[depth] = 0;
        self.descend(depth + 1, partial);

        // q_depth = 1
        let gain = self.c[depth * n + depth];
        let row = self.q.b_row(depth);
        let (head, tail) = self.c.split_at_mut((depth + 1) * n);
        let prev = &head[depth * n..];
        for i in 0..n {
            tail[i] = prev[i] + row[i];
        }
        self.bits[depth] = 1;
        self.descend(depth + 1, partial + gain);
        self.bits[depth] = 0;
    }
}

/// Minimum energy and all minimizing states of a sparse Ising model, by
/// Gray-code enumeration. Intended for small `n` (at most ~24).
pub fn ising_ground_states(
    h: &[f64],
    couplings: &[(usize, usize, f64)],
    tol: f64,
) -> (f64, Vec<Vec<i8>>) {
    let n = h.len();
    assert!(n < 40, "enumeration over 2^{n} states is not feasible");
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, k, v) in couplings {
        adj[i].push((k, v));
        adj[k].push((i, v));
    }
    let mut s = vec![-1i8; n];
    let mut energy: f64 = -h.iter().sum::<f64>() + couplings.iter().map(|c| c.2).sum::<f64>();
    // local field f_i = h_i + sum_k J_ik s_k
    let mut field: Vec<f64> = (0..n)
        .map(|i| h[i] - adj[i].iter().map(|(_, v)| v).sum::<f64>())
        .collect();
    let mut best = energy;
    let mut states = vec![s.clone()];
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let old = s[i] as f64;
        energy -= 2.0 * old * field[i];
        s[i] = -s[i];
        for &(k, v) in &adj[i] {
            field[k] -= 2.0 * old * v;
        }
        if energy < best - tol {
            best = energy;
            states.clear();
            states.push(s.clone());
        } else if energy <= best + tol {
            states.push(s.clone());
        }
    }
    (best, states)
}

/// On-disk instance representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<CouplingEntry>,
    #[serde(default)]
    pub metadata: QuboMetadata,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

impl From<&QuboInstance> for InstanceFile {
    fn from(q: &QuboInstance) -> Self {
        InstanceFile {
            n: q.n,
            a: q.a.clone(),
            b: q.couplings()
                .map(|(i, j, v)| CouplingEntry { i, j, v })
                .collect(),
            metadata: q.metadata.clone(),
        }
    }
}

impl TryFrom<InstanceFile> for QuboInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.a.len() != f.n {
            return Err(Error::MalformedInstance(format!(
                "n = {} but {} linear coefficients",
                f.n,
                f.a.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let mut q = QuboInstance::new(f.a);
        for e in &f.b {
            if e.i >= e.j {
                return Err(Error::MalformedInstance(format!(
                    "coupling ({}, {}) must have i < j",
                    e.i, e.j
                )));
            }
            if e.j >= f.n {
                return Err(Error::MalformedInstance(format!(
                    "coupling ({}, {}) out of range for n = {}",
                    e.i, e.j, f.n
                )));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::MalformedInstance(format!(
                    "duplicate coupling ({}, {})",
                    e.i, e.j
                )));
            }
            q.set_b(e.i, e.j, e.v);
        }
        q.metadata = f.metadata;
        Ok(q)
    }
}

impl QuboInstance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(s)?;
        f.try_into()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> QuboInstance {
        QuboInstance::from_terms(vec![2.0, 0.0], &[(0, 1, 4.0)]).unwrap()
    }

    fn all_bits(n: usize) -> impl Iterator<Item = Vec<u8>> {
        (0u32..(1 << n)).map(move |m| (0..n).map(|i| ((m >> (n - 1 - i)) & 1) as u8).collect())
    }

    fn brute_min(q: &QuboInstance) -> (f64, Vec<u8>) {
        // all_bits enumerates in lexicographic order; keep the first minimum.
        let mut best: Option<(f64, Vec<u8>)> = None;
        for bits in all_bits(q.n()) {
            let v = q.evaluate(&bits).unwrap();
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, bits));
            }
        }
        best.unwrap()
    }

    fn random_qubo(n: usize, seed: u64) -> QuboInstance {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = (0..n)
            .map(|_| (rng.random_range(-5..=5) * 3) as f64)
            .collect();
        let mut q = QuboInstance::new(a);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = [-5, -3, -1, 0, 1, 3, 5][rng.random_range(0..7)];
                q.set_b(i, j, v as f64);
            }
        }
        q
    }

    #[test]
    fn bucket_boundaries() {
        let m = BucketMap::default();
        assert_eq!(m.corr_coeff(0.20), 3);
        assert_eq!(m.corr_coeff(0.05), 1);
        assert_eq!(m.corr_coeff(0.0499), 0);
        assert_eq!(m.corr_coeff(-1.0), -5);
        assert_eq!(m.corr_coeff(-0.25), -3);
        assert_eq!(m.corr_coeff(1.0), 5);
    }

    #[test]
    fn sharpe_extremes_map_to_table_ends() {
        let stats = AssetStats {
            realized_return: vec![0.0; 4],
            realized_vol: vec![1.0; 4],
            sharpe: vec![-0.3, 1.9, 0.4, 0.8],
            corr: vec![
                vec![1.0, 0.2, 0.05, -0.3],
                vec![0.2, 1.0, 0.0, 0.0],
                vec![0.05, 0.0, 1.0, 0.0],
                vec![-0.3, 0.0, 0.0, 1.0],
            ],
        };
        let q = bucketize(&stats, &BucketMap::default()).unwrap();
        assert_eq!(q.a()[0], 15.0);
        assert_eq!(q.a()[1], -15.0);
        assert_eq!(q.b(0, 1), 3.0);
        assert_eq!(q.b(0, 2), 1.0);
        assert_eq!(q.b(0, 3), -5.0);
        assert_eq!(q.b(1, 2), 0.0);
    }

    #[test]
    fn degenerate_sharpe_range() {
        let stats = AssetStats {
            realized_return: vec![0.0; 2],
            realized_vol: vec![1.0; 2],
            sharpe: vec![0.4, 0.4],
            corr: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(matches!(
            bucketize(&stats, &BucketMap::default()),
            Err(Error::DegenerateRange(_))
        ));
    }

    #[test]
    fn bucket_map_validation() {
        let mut m = BucketMap::default();
        m.corr_breakpoints.swap(0, 1);
        assert!(m.validate().is_err());
        let mut m = BucketMap::default();
        m.corr_coeffs.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn evaluate_small() {
        let q = small();
        assert_eq!(q.evaluate(&[0, 0]).unwrap(), 0.0);
        assert_eq!(q.evaluate(&[1, 1]).unwrap(), 6.0);
        assert_eq!(q.evaluate(&[1, 0]).unwrap(), 2.0);
        assert!(matches!(
            q.evaluate(&[1]),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn ising_of_small_instance() {
        let m = qubo_to_ising(&small());
        assert_eq!(m.j(0, 1), 1.0);
        assert_eq!(m.h(), &[2.0, 1.0]);
        assert_eq!(m.offset, 2.0);
        let q = small();
        for bits in all_bits(2) {
            let e = m.energy(&bits_to_spins(&bits)).unwrap() + m.offset;
            assert_eq!(e, q.evaluate(&bits).unwrap());
        }
    }

    #[test]
    fn ising_of_zero_qubo() {
        let m = qubo_to_ising(&QuboInstance::new(vec![0.0; 3]));
        assert!(m.h().iter().all(|&x| x == 0.0));
        assert_eq!(m.couplings().count(), 0);
        assert_eq!(m.offset, 0.0);
    }

    #[test]
    fn all_up_spins_sum_fields_and_couplings() {
        let m = IsingInstance::new(vec![0.5, -1.0, 2.0], &[(0, 1, 0.25), (1, 2, -3.0)], 0.0);
        assert_eq!(m.energy(&[1, 1, 1]).unwrap(), 1.5 + 0.25 - 3.0);
    }

    #[test]
    fn penalty_contributions() {
        let q = QuboInstance::new(vec![0.0; 3]);
        let cfg = PenaltyConfig {
            target: 2,
            strength: 10.0,
        };
        let p = add_penalty(&q, cfg);
        assert_eq!(p.evaluate(&[1, 1, 0]).unwrap(), 0.0);
        assert_eq!(p.evaluate(&[0, 0, 0]).unwrap(), 40.0);
        assert_eq!(p.evaluate(&[1, 1, 1]).unwrap(), 10.0);
    }

    #[test]
    fn penalty_forces_cardinality() {
        let q = random_qubo(6, 11);
        let values: Vec<f64> = all_bits(6).map(|b| q.evaluate(&b).unwrap()).collect();
        let spread = values.iter().copied().fold(f64::MIN, f64::max)
            - values.iter().copied().fold(f64::MAX, f64::min);
        for target in 0..=6 {
            let p = add_penalty(
                &q,
                PenaltyConfig {
                    target,
                    strength: spread + 1.0,
                },
            );
            let (_, bits) = brute_min(&p);
            assert_eq!(bits.iter().filter(|&&b| b == 1).count(), target);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let q = random_qubo(5, 1);
        let s = shift_desirability(&q, 0.0);
        assert_eq!(s, q);
    }

    #[test]
    fn large_shift_empties_selection() {
        for seed in 0..10 {
            let q = random_qubo(6, seed);
            let spread = q.a().iter().copied().fold(f64::MIN, f64::max)
                - q.a().iter().copied().fold(f64::MAX, f64::min);
            let sum_abs_b: f64 = q.couplings().map(|c| c.2.abs()).sum();
            let delta = 2.0 * sum_abs_b + spread.max(q.max_abs_a());
            let (_, bits) = brute_min(&shift_desirability(&q, delta));
            assert!(bits.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn optimal_cardinality_non_increasing_in_shift() {
        for seed in 0..5 {
            let q = random_qubo(6, 100 + seed);
            let mut last = usize::MAX;
            for k in 0..20 {
                let delta = -40.0 + 4.0 * k as f64;
                let (_, bits) = brute_min(&shift_desirability(&q, delta));
                let m = bits.iter().filter(|&&b| b == 1).count();
                assert!(m <= last, "seed {seed} delta {delta}: {m} > {last}");
                last = m;
            }
        }
    }

    #[test]
    fn exact_single_variable() {
        let s = exact_solve(&QuboInstance::new(vec![-3.0])).unwrap();
        assert_eq!(s.bits, vec![1]);
        assert_eq!(s.value, -3.0);
    }

    #[test]
    fn exact_tie_break_is_lexicographic() {
        let s = exact_solve(&small()).unwrap();
        assert_eq!(s.bits, vec![0, 0]);
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn exact_too_large() {
        let q = QuboInstance::new(vec![0.0; 30]);
        assert!(matches!(
            exact_solve(&q),
            Err(Error::TooLarge { n: 30, max: 28 })
        ));
        assert!(exact_solve_capped(&q, 30).is_ok());
    }

    #[test]
    fn exact_matches_enumeration() {
        for seed in 0..60 {
            let n = 1 + (seed as usize % 12);
            let q = random_qubo(n, seed);
            let (v, bits) = brute_min(&q);
            let s = exact_solve(&q).unwrap();
            assert_eq!(s.value, v, "seed {seed}");
            assert_eq!(s.bits, bits, "seed {seed}");
        }
    }

    #[test]
    fn exact_matches_enumeration_with_degenerate_optima() {
        // all-zero couplings and many zero linear terms produce many ties
        for seed in 0..20 {
            let mut q = random_qubo(8, 500 + seed);
            for i in 0..8 {
                for j in (i + 1)..8 {
                    if (i + j) % 2 == 0 {
                        q.set_b(i, j, 0.0);
                    }
                }
            }
            let (v, bits) = brute_min(&q);
            let s = exact_solve(&q).unwrap();
            assert_eq!((s.value, s.bits), (v, bits));
        }
    }

    #[test]
    fn ground_state_enumeration() {
        let (e, states) = ising_ground_states(&[0.5, 0.5], &[(0, 1, -2.0)], 1e-12);
        assert_eq!(e, -3.0);
        assert_eq!(states, vec![vec![-1, -1]]);
        let (e, states) = ising_ground_states(&[0.0, 0.0], &[(0, 1, 1.0)], 1e-12);
        assert_eq!(e, -1.0);
        assert_eq!(states.len(), 2);
    }

    #[test]
    fn instance_file_rejects_bad_pairs() {
        let dup = r#"{"n":3,"a":[1,2,3],"b":[{"i":0,"j":1,"v":1},{"i":0,"j":1,"v":2}]}"#;
        assert!(matches!(
            QuboInstance::from_json(dup),
            Err(Error::MalformedInstance(_))
        ));
        let lower = r#"{"n":3,"a":[1,2,3],"b":[{"i":1,"j":0,"v":1}]}"#;
        assert!(matches!(
            QuboInstance::from_json(lower),
            Err(Error::MalformedInstance(_))
        ));
        let diag = r#"{"n":3,"a":[1,2,3],"b":[{"i":1,"j":1,"v":1}]}"#;
        assert!(QuboInstance::from_json(diag).is_err());
        let short = r#"{"n":3,"a":[1,2],"b":[]}"#;
        assert!(QuboInstance::from_json(short).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip(n in 1usize..8, seed in 0u64..1000, delta in -3.0f64..3.0) {
            let mut q = shift_desirability(&random_qubo(n, seed), delta);
            q.metadata.id = Some("x".into());
            let back = QuboInstance::from_json(&q.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, q);
        }

        #[test]
        fn ising_identity(n in 1usize..9, seed in 0u64..10_000, pen in proptest::option::of((0usize..9, 0.5f64..20.0))) {
            let mut q = random_qubo(n, seed);
            if let Some((t, p)) = pen {
                q = add_penalty(&q, PenaltyConfig { target: t.min(n), strength: p });
            }
            let m = qubo_to_ising(&q);
            for bits in all_bits(n) {
                let lhs = m.energy(&bits_to_spins(&bits)).unwrap() + m.offset;
                prop_assert!((lhs - q.evaluate(&bits).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn penalty_adds_exact_term(n in 1usize..8, seed in 0u64..1000, t in 0usize..8, p in 0.5f64..50.0) {
            let q = random_qubo(n, seed);
            let cfg = PenaltyConfig { target: t.min(n), strength: p };
            let pq = add_penalty(&q, cfg);
            for bits in all_bits(n) {
                let card = bits.iter().filter(|&&b| b == 1).count() as f64;
                let expected = q.evaluate(&bits).unwrap() + p * (cfg.target as f64 - card).powi(2);
                prop_assert!((pq.evaluate(&bits).unwrap() - expected).abs() < 1e-9);
            }
        }

        #[test]
        fn shift_changes_value_by_cardinality(n in 1usize..10, seed in 0u64..1000, delta in -10.0f64..10.0, mask in 0u32..1024) {
            let q = random_qubo(n, seed);
            let s = shift_desirability(&q, delta);
            let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            let m = bits.iter().filter(|&&b| b == 1).count() as f64;
            prop_assert!((s.evaluate(&bits).unwrap() - q.evaluate(&bits).unwrap() - m * delta).abs() < 1e-9);
        }
    }
}
