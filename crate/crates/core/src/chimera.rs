//! Chimera hardware graph, native clique embedding, embedded Ising model and
//! majority-vote decoding.
//!
//! Qubits are addressed by `(x, y, u, k)`: cell row `x`, cell column `y`,
//! orientation `u` (0 vertical, 1 horizontal) and shore index `k` in `0..4`.
//! The linear id is `8 * (m * x + y) + 4 * u + k`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::IsingInstance;

pub const SHORE: usize = 4;
pub const DEFAULT_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Qubit {
    pub x: usize,
    pub y: usize,
    pub u: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChimeraGraph {
    m: usize,
    defects: BTreeSet<usize>,
}

impl ChimeraGraph {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn defects(&self) -> &BTreeSet<usize> {
        &self.defects
    }

    /// Qubits of the ideal graph, defective or not.
    pub fn total_qubits(&self) -> usize {
        2 * SHORE * self.m * self.m
    }

    pub fn active_qubits(&self) -> usize {
        self.total_qubits() - self.defects.len()
    }

    pub fn id(&self, q: Qubit) -> usize {
        2 * SHORE * (self.m * q.x + q.y) + SHORE * q.u + q.k
    }

    pub fn coords(&self, id: usize) -> Qubit {
        let cell = id / (2 * SHORE);
        let rem = id % (2 * SHORE);
        Qubit {
            x: cell / self.m,
            y: cell % self.m,
            u: rem / SHORE,
            k: rem % SHORE,
        }
    }

    pub fn is_active(&self, id: usize) -> bool {
        id < self.total_qubits() && !self.defects.contains(&id)
    }

    /// Neighbors in the ideal graph (ignoring defects).
    fn ideal_neighbors(&self, id: usize) -> Vec<usize> {
        let q = self.coords(id);
        let mut out = Vec::with_capacity(6);
        for k in 0..SHORE {
            out.push(self.id(Qubit { u: 1 - q.u, k, ..q }));
        }
        if q.u == 0 {
            if q.x > 0 {
                out.push(self.id(Qubit { x: q.x - 1, ..q }));
            }
            if q.x + 1 < self.m {
                out.push(self.id(Qubit { x: q.x + 1, ..q }));
            }
        } else {
            if q.y > 0 {
                out.push(self.id(Qubit { y: q.y - 1, ..q }));
            }
            if q.y + 1 < self.m {
                out.push(self.id(Qubit { y: q.y + 1, ..q }));
            }
        }
        out
    }

    /// Active neighbors of an active qubit.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        if !self.is_active(id) {
            return Vec::new();
        }
        let mut v = self.ideal_neighbors(id);
        v.retain(|&r| self.is_active(r));
        v
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.is_active(a) && self.is_active(b) && self.ideal_neighbors(a).contains(&b)
    }

    /// All active edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.total_qubits() {
            for b in self.neighbors(a) {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// `m x m` Chimera graph with the given disabled qubits.
pub fn build_chimera(m: usize, defects: &[usize]) -> Result<ChimeraGraph> {
    if m == 0 {
        return Err(Error::InvalidConfig("grid size must be at least 1".into()));
    }
    let total = 2 * SHORE * m * m;
    let mut set = BTreeSet::new();
    for &d in defects {
        if d >= total {
            return Err(Error::InvalidDefectId(d));
        }
        set.insert(d);
    }
    Ok(ChimeraGraph { m, defects: set })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueEmbedding {
    pub n_logical: usize,
    /// Qubit ids per logical variable, in path order.
    pub chains: Vec<Vec<usize>>,
    pub chain_length: usize,
}

/// Chain length of the clique layout for `n` logical variables.
pub fn chain_length_for(n: usize) -> usize {
    n.div_ceil(SHORE) + 1
}

/// Native clique embedding.
///
/// Variable `v = 4 g + k` runs down column `g` on vertical qubits of shore
/// index `k` from row 0 to row `g`, turns onto the horizontal qubit of the
/// diagonal cell `(g, g)` and runs along row `g` up to column `G - 1`, where
/// `G = ceil(n / 4)`. Chains of groups `g1 < g2` meet in cell `(g1, g2)`;
/// chains sharing a group meet twice in the diagonal cell.
pub fn clique_embed(graph: &ChimeraGraph, n: usize) -> Result<CliqueEmbedding> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "clique embedding needs at least 2 variables, got {n}"
        )));
    }
    let capacity = SHORE * graph.m;
    if n > capacity {
        return Err(Error::TooLarge { n, max: capacity });
    }
    let groups = n.div_ceil(SHORE);
    let chains: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let (g, k) = (v / SHORE, v % SHORE);
            let vertical = (0..=g).map(move |x| Qubit { x, y: g, u: 0, k });
            let horizontal = (g..groups).map(move |y| Qubit { x: g, y, u: 1, k });
            vertical.chain(horizontal).map(|q| graph.id(q)).collect()
        })
        .collect();
    for chain in &chains {
        if let Some(&bad) = chain.iter().find(|&&q| !graph.is_active(q)) {
            return Err(Error::InfeasibleWithDefects { n, qubit: bad });
        }
    }
    let e = CliqueEmbedding {
        n_logical: n,
        chains,
        chain_length: chain_length_for(n),
    };
    e.validate(graph)?;
    Ok(e)
}

impl CliqueEmbedding {
    /// Check disjointness, chain connectivity (as ordered paths), pairwise
    /// adjacency and the chain length formula.
    pub fn validate(&self, graph: &ChimeraGraph) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(format!("invalid embedding: {msg}")));
        if self.chains.len() != self.n_logical {
            return fail(format!(
                "{} chains for {} variables",
                self.chains.len(),
                self.n_logical
            ));
        }
        let mut owner = std::collections::HashMap::new();
        for (i, chain) in self.chains.iter().enumerate() {
            if chain.len() != self.chain_length {
                return fail(format!("chain {i} has length {}", chain.len()));
            }
            for &q in chain {
                if !graph.is_active(q) {
                    return fail(format!("chain {i} uses inactive qubit {q}"));
                }
                if let Some(j) = owner.insert(q, i) {
                    return fail(format!("qubit {q} shared by chains {j} and {i}"));
                }
            }
            for w in chain.windows(2) {
                if !graph.has_edge(w[0], w[1]) {
                    return fail(format!("chain {i} broken between {} and {}", w[0], w[1]));
                }
            }
        }
        if self.chain_length != chain_length_for(self.n_logical) {
            return fail(format!(
                "chain length {} differs from ceil(n/4)+1 = {}",
                self.chain_length,
                chain_length_for(self.n_logical)
            ));
        }
        let couplers = self.logical_couplers(graph);
        for i in 0..self.n_logical {
            for j in (i + 1)..self.n_logical {
                if couplers[i * self.n_logical + j].is_empty() {
                    return fail(format!("chains {i} and {j} are not adjacent"));
                }
            }
        }
        Ok(())
    }

    /// Physical couplers `(qa, qb)` joining chain `i` to chain `j`, indexed
    /// `[i * n + j]` for `i < j` with `qa` in chain `i`.
    pub fn logical_couplers(&self, graph: &ChimeraGraph) -> Vec<Vec<(usize, usize)>> {
        let n = self.n_logical;
        let mut owner = std::collections::HashMap::new();
        for (i, chain) in self.chains.iter().enumerate() {
            for &q in chain {
                owner.insert(q, i);
            }
        }
        let mut out = vec![Vec::new(); n * n];
        for (i, chain) in self.chains.iter().enumerate() {
            for &qa in chain {
                for qb in graph.neighbors(qa) {
                    if let Some(&j) = owner.get(&qb) {
                        if j > i {
                            out[i * n + j].push((qa, qb));
                        }
                    }
                }
            }
        }
        for v in out.iter_mut() {
            v.sort_unstable();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            n: usize,
            chains: &'a [Vec<usize>],
        }
        Ok(serde_json::to_string_pretty(&Export {
            n: self.n_logical,
            chains: &self.chains,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Import {
            n: usize,
            chains: Vec<Vec<usize>>,
        }
        let imp: Import = serde_json::from_str(s)?;
        let chain_length = imp.chains.first().map_or(0, Vec::len);
        Ok(CliqueEmbedding {
            n_logical: imp.n,
            chains: imp.chains,
            chain_length,
        })
    }
}

/// Ising model on physical qubits.
///
/// Only the qubits used by chains are represented. Local index `l` refers to
/// `qubits[l]`; chain `i` occupies local indices `i * Nc .. (i + 1) * Nc` in
/// path order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedIsing {
    pub qubits: Vec<usize>,
    pub h: Vec<f64>,
    /// `(a, b, J)` over local indices, `a < b`.
    pub couplers: Vec<(usize, usize, f64)>,
    pub chain_strength: f64,
    pub logical: IsingInstance,
    pub embedding: CliqueEmbedding,
}

impl EmbeddedIsing {
    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn chain_length(&self) -> usize {
        self.embedding.chain_length
    }

    pub fn chain_range(&self, i: usize) -> std::ops::Range<usize> {
        let c = self.chain_length();
        i * c..(i + 1) * c
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n_qubits() {
            return Err(Error::LengthMismatch {
                expected: self.n_qubits(),
                got: spins.len(),
            });
        }
        let mut e: f64 = self.h.iter().zip(spins).map(|(h, &s)| h * s as f64).sum();
        for &(a, b, j) in &self.couplers {
            e += j * (spins[a] * spins[b]) as f64;
        }
        Ok(e)
    }

    /// Physical state with every chain set to the logical spin.
    pub fn chain_uniform(&self, logical: &[i8]) -> Vec<i8> {
        let c = self.chain_length();
        logical
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, c))
            .collect()
    }

    /// Fraction of chains whose qubits all agree.
    pub fn unbroken_fraction(&self, spins: &[i8]) -> f64 {
        let n = self.embedding.n_logical;
        let intact = (0..n)
            .filter(|&i| {
                let r = &spins[self.chain_range(i)];
                r.iter().all(|&s| s == r[0])
            })
            .count();
        intact as f64 / n as f64
    }
}

/// `max_i (|h_i| + sum_j |J_ij|)`: a chain strength strictly above this makes
/// every physical ground state chain-uniform.
pub fn chain_break_bound(m: &IsingInstance) -> f64 {
    (0..m.n())
        .map(|i| m.h()[i].abs() + m.j_row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Embedded Ising for a logical model.
///
/// Fields are spread evenly along each chain, consecutive chain qubits are
/// coupled at `-|J_F|`, and each logical coupling is split evenly over the
/// physical couplers available between the two chains.
pub fn embed_ising(
    graph: &ChimeraGraph,
    m: &IsingInstance,
    e: &CliqueEmbedding,
    chain_strength: f64,
) -> Result<EmbeddedIsing> {
    if m.n() != e.n_logical {
        return Err(Error::DimensionMismatch(format!(
            "Ising has {} variables, embedding has {}",
            m.n(),
            e.n_logical
        )));
    }
    let c = e.chain_length;
    let qubits: Vec<usize> = e.chains.iter().flatten().copied().collect();
    let local: std::collections::HashMap<usize, usize> =
        qubits.iter().enumerate().map(|(l, &q)| (q, l)).collect();
    let mut h = vec![0.0; qubits.len()];
    let mut couplers = Vec::new();
    let jf = -chain_strength.abs();
    for i in 0..m.n() {
        h[i * c..(i + 1) * c].fill(m.h()[i] / c as f64);
        for l in i * c..(i + 1) * c - 1 {
            couplers.push((l, l + 1, jf));
        }
    }
    let available = e.logical_couplers(graph);
    for i in 0..m.n() {
        for j in (i + 1)..m.n() {
            let jij = m.j(i, j);
            if jij == 0.0 {
                continue;
            }
            let pairs = &available[i * m.n() + j];
            if pairs.is_empty() {
                return Err(Error::MissingCoupler(i, j));
            }
            let share = jij / pairs.len() as f64;
            for &(qa, qb) in pairs {
                let (a, b) = (local[&qa], local[&qb]);
                couplers.push((a.min(b), a.max(b), share));
            }
        }
    }
    Ok(EmbeddedIsing {
        qubits,
        h,
        couplers,
        chain_strength: chain_strength.abs(),
        logical: m.clone(),
        embedding: e.clone(),
    })
}

/// Decode a physical readout (local indices) to logical spins.
///
/// Each chain takes the sign of its spin sum. Tied chains are then resolved
/// in index order by the sign minimizing the logical energy given the spins
/// decoded so far, with `+1` on a zero field.
pub fn decode_majority(readout: &[i8], e: &EmbeddedIsing) -> Vec<i8> {
    let n = e.embedding.n_logical;
    let mut out = vec![0i8; n];
    let mut tied = Vec::new();
    for (i, s) in out.iter_mut().enumerate() {
        let sum: i32 = readout[e.chain_range(i)].iter().map(|&x| x as i32).sum();
        match sum.signum() {
            1 => *s = 1,
            -1 => *s = -1,
            _ => tied.push(i),
        }
    }
    for i in tied {
        let field = e.logical.h()[i]
            + (0..n)
                .filter(|&j| out[j] != 0)
                .map(|j| e.logical.j(i, j) * out[j] as f64)
                .sum::<f64>();
        out[i] = if field > 0.0 { -1 } else { 1 };
    }
    out
}
