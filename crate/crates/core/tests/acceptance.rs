//! Acceptance criteria 1-10. Each test prints one PASS/FAIL line to stdout
//! (visible without `--nocapture`) and then asserts the verdict.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;
use std::time::{Duration, Instant};

use portfolio_anneal::anneal::{
    apply_gauge, build_forward_protocol, build_reverse_protocol, default_schedule, EngineConfig,
};
use portfolio_anneal::bench::{
    estimate_success, generate_instance, percentile, sweep, table2_grid, tts, BatchSampler,
    EnsembleConfig, GridPoint, ParameterGrid, ProtocolKind, Range, RegistryEntry,
};
use portfolio_anneal::chimera::{
    build_chimera, chain_break_bound, clique_embed, embed_ising, ChimeraGraph, CliqueEmbedding,
    EmbeddedIsing,
};
use portfolio_anneal::market::{realized_stats, simulate_scenario, GbmParams};
use portfolio_anneal::qubo::{
    add_penalty, exact_solve_capped, ising_ground_states, qubo_to_ising, IsingInstance,
    PenaltyConfig, QuboInstance,
};
use portfolio_anneal::solvers::{anneal_solve, ga_solve, greedy_selection, AnnealParams, GaConfig};
use portfolio_anneal::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!(
        "acceptance criterion {id:>2} {}: {name} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // bypass the test harness capture so the line is always shown
    let _ = std::io::stdout().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

/// Direct sum of linear and pairwise terms plus the constant.
fn qubo_oracle(a: &[f64], b: &[(usize, usize, f64)], constant: f64, bits: &[u8]) -> f64 {
    let lin: f64 = a.iter().zip(bits).map(|(a, &q)| a * q as f64).sum();
    let quad: f64 = b
        .iter()
        .map(|&(i, j, v)| v * (bits[i] * bits[j]) as f64)
        .sum();
    lin + quad + constant
}

fn random_qubo(rng: &mut ChaCha8Rng, n: usize) -> QuboInstance {
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-15..=15) as f64).collect();
    let mut b = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(-5..=5);
            if v != 0 {
                b.push((i, j, v as f64));
            }
        }
    }
    let q = QuboInstance::from_terms(a, &b).unwrap();
    if rng.random_bool(0.3) {
        add_penalty(
            &q,
            PenaltyConfig {
                target: rng.random_range(0..=n),
                strength: rng.random_range(0.5..4.0),
            },
        )
    } else {
        q
    }
}

fn spins(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect()
}

#[test]
fn criterion_01_qubo_ising_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut checked = 0u64;
    for inst in 0..1000 {
        let exhaustive = inst < 200;
        let n = if exhaustive {
            rng.random_range(1..=10)
        } else {
            rng.random_range(11..=16)
        };
        let q = random_qubo(&mut rng, n);
        let ising = qubo_to_ising(&q);
        let terms: Vec<_> = q.couplings().collect();
        let mut check = |bits: &[u8]| {
            let direct = qubo_oracle(q.a(), &terms, q.constant(), bits);
            let via = ising.energy(&spins(bits)).unwrap() + ising.offset;
            worst = worst.max((direct - via).abs());
            checked += 1;
        };
        if exhaustive {
            for mask in 0u32..(1 << n) {
                let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                check(&bits);
            }
        } else {
            for _ in 0..10_000 {
                let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
                check(&bits);
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "QUBO/Ising equivalence",
        worst <= 1e-9 && elapsed < Duration::from_secs(30),
        format!("{checked} assignments, max |diff| {worst:.2e}, {elapsed:.1?}"),
    );
}

/// Independent structural checks of a clique embedding.
fn embedding_problems(g: &ChimeraGraph, e: &CliqueEmbedding, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    let expected_len = n.div_ceil(4) + 1;
    let mut seen = BTreeSet::new();
    for (v, chain) in e.chains.iter().enumerate() {
        if chain.len() != expected_len {
            out.push(format!("chain {v} length {}", chain.len()));
        }
        for &q in chain {
            if !seen.insert(q) {
                out.push(format!("qubit {q} reused"));
            }
        }
        // breadth-first search restricted to the chain
        let members: BTreeSet<usize> = chain.iter().copied().collect();
        let mut reached = BTreeSet::from([chain[0]]);
        let mut queue = VecDeque::from([chain[0]]);
        while let Some(q) = queue.pop_front() {
            for &r in &members {
                if !reached.contains(&r) && g.has_edge(q, r) {
                    reached.insert(r);
                    queue.push_back(r);
                }
            }
        }
        if reached.len() != members.len() {
            out.push(format!("chain {v} disconnected"));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = e.chains[i]
                .iter()
                .any(|&p| e.chains[j].iter().any(|&r| g.has_edge(p, r)));
            if !adjacent {
                out.push(format!("chains {i},{j} not adjacent"));
            }
        }
    }
    out
}

#[test]
fn criterion_02_embedding_validity() {
    let start = Instant::now();
    let g = build_chimera(16, &[]).unwrap();
    let qubits = g.total_qubits();
    let edges = g.edges().len();
    let mut problems = Vec::new();
    for n in (4..=64).step_by(4) {
        let e = clique_embed(&g, n).unwrap();
        if let Err(err) = e.validate(&g) {
            problems.push(format!("N={n}: {err}"));
        }
        problems.extend(
            embedding_problems(&g, &e, n)
                .into_iter()
                .map(|p| format!("N={n}: {p}")),
        );
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "clique embedding validity on C16",
        qubits == 2048 && edges == 6016 && problems.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{qubits} qubits, {edges} edges, 16 sizes, {} problems {:?}, {elapsed:.1?}",
            problems.len(),
            problems.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

fn physical_energy(e: &EmbeddedIsing, s: &[i8]) -> f64 {
    let lin: f64 = e.h.iter().zip(s).map(|(h, &x)| h * x as f64).sum();
    let quad: f64 = e
        .couplers
        .iter()
        .map(|&(a, b, j)| j * (s[a] * s[b]) as f64)
        .sum();
    lin + quad
}

#[test]
fn criterion_03_embedded_ground_state_decode() {
    let start = Instant::now();
    let g = build_chimera(16, &[]).unwrap();
    let emb = clique_embed(&g, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut failures = Vec::new();
    for inst in 0..20 {
        let h: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut j = Vec::new();
        for a in 0..6 {
            for b in (a + 1)..6 {
                j.push((a, b, rng.random_range(-1.0..1.0)));
            }
        }
        let logical = IsingInstance::new(h.clone(), &j, 0.0);
        let jf = 1.0 + chain_break_bound(&logical);
        let e = embed_ising(&g, &logical, &emb, jf).unwrap();
        let nq = e.n_qubits();
        assert_eq!(nq, 18);

        let (_, logical_ground) = ising_ground_states(&h, &j, 1e-9);
        let mut best = f64::INFINITY;
        let mut ground: Vec<u32> = Vec::new();
        let mut state = vec![0i8; nq];
        for mask in 0u32..(1 << nq) {
            for (q, s) in state.iter_mut().enumerate() {
                *s = if (mask >> q) & 1 == 1 { 1 } else { -1 };
            }
            let en = physical_energy(&e, &state);
            if en < best - 1e-9 {
                best = en;
                ground.clear();
                ground.push(mask);
            } else if (en - best).abs() <= 1e-9 {
                ground.push(mask);
            }
        }
        for &mask in &ground {
            let s: Vec<i8> = (0..nq)
                .map(|q| if (mask >> q) & 1 == 1 { 1 } else { -1 })
                .collect();
            let mut decoded = Vec::with_capacity(6);
            for v in 0..6 {
                let chain = &s[e.chain_range(v)];
                if chain.iter().any(|&x| x != chain[0]) {
                    failures.push(format!("instance {inst}: broken chain {v}"));
                }
                decoded.push(chain[0]);
            }
            if !logical_ground.contains(&decoded) {
                failures.push(format!("instance {inst}: decodes off the logical optimum"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        "embedded ground states decode to the logical optimum",
        failures.is_empty() && elapsed < Duration::from_secs(600),
        format!(
            "20 instances x 2^18 states, {} failures {:?}, {elapsed:.1?}",
            failures.len(),
            failures.first()
        ),
    );
}

#[test]
fn criterion_04_tts_formula() {
    let v = tts(0.5, 0.99, 1.0).unwrap();
    let expected = 0.01f64.ln() / 0.5f64.ln();
    let rel = ((v - expected) / expected).abs();
    let clamp = tts(0.99, 0.99, 1.0).unwrap();
    let clamp_above = tts(0.999, 0.99, 2.5).unwrap();
    let undefined = matches!(tts(0.0, 0.99, 1.0), Err(Error::UndefinedTts));
    verdict(
        4,
        "time-to-solution formula",
        rel <= 1e-9 && clamp == 1.0 && clamp_above == 2.5 && undefined,
        format!(
            "tts(0.5,0.99,1)={v:.6} rel err {rel:.1e}, clamp {clamp}, p=0 undefined: {undefined}"
        ),
    );
}

#[test]
fn criterion_05_greedy_solve_rate() {
    let start = Instant::now();
    let cfg = EnsembleConfig::default();
    let mut rates = Vec::new();
    for n in [24, 30, 36] {
        let solved = (0..30)
            .filter(|&i| {
                let q = generate_instance(&cfg, n, i).unwrap();
                let exact = exact_solve_capped(&q, 36).unwrap();
                greedy_selection(&q).value <= exact.value + 1e-9
            })
            .count();
        rates.push((n, 100.0 * solved as f64 / 30.0));
    }
    let r24 = rates[0].1;
    let r36 = rates[2].1;
    verdict(
        5,
        "greedy solve rate",
        r24 >= 50.0 && (r36 - 93.0).abs() <= 25.0,
        format!(
            "solve rates {} (need N=24 >= 50%, N=36 within 93 +/- 25), {:.1?}",
            rates
                .iter()
                .map(|(n, r)| format!("N={n}: {r:.1}%"))
                .collect::<Vec<_>>()
                .join(", "),
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_06_ga_completeness() {
    let start = Instant::now();
    let cfg = EnsembleConfig::default();
    let budget = 1_000_000u64;
    let mut missed = Vec::new();
    let mut max_calls = 0;
    for i in 0..30 {
        let q = generate_instance(&cfg, 24, i).unwrap();
        let exact = exact_solve_capped(&q, 24).unwrap();
        let greedy = greedy_selection(&q);
        let ga = GaConfig {
            seed: i as u64,
            max_iterations: (budget / 100 - 1) as usize,
            target_value: Some(exact.value),
            ..GaConfig::default()
        };
        let r = ga_solve(&q, &ga, Some(&greedy.bits)).unwrap();
        max_calls = max_calls.max(r.objective_calls);
        if r.best.value > exact.value + 1e-9 || r.objective_calls > budget {
            missed.push(i);
        }
    }
    verdict(
        6,
        "greedy-seeded GA reaches the optimum on all N=24 instances",
        missed.is_empty(),
        format!(
            "30 instances, missed {missed:?}, max objective calls {max_calls} (budget {budget}), {:.1?}",
            start.elapsed()
        ),
    );
}

#[test]
fn criterion_07_gbm_statistics() {
    let start = Instant::now();
    let base = GbmParams::default();

    // one asset, 1e5 monthly steps
    let single = GbmParams {
        n_assets: 1,
        horizon: 100_000.0 * base.dt,
        seed: 7,
        ..base.clone()
    };
    let r = &simulate_scenario(&single).unwrap().log_returns[0];
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let expected = (base.mu - 0.5 * base.sigma * base.sigma) * base.dt;
    let z = (mean - expected) / (sd / n.sqrt());

    // 1e4 scenarios of 24 assets, 12 monthly observations each
    let (mut corr_sum, mut corr_n, mut sharpe_sum, mut sharpe_n) = (0.0, 0usize, 0.0, 0usize);
    for s in 0..10_000u64 {
        let p = GbmParams {
            seed: 1_000 + s,
            ..base.clone()
        };
        let stats = realized_stats(&simulate_scenario(&p).unwrap(), p.r0).unwrap();
        for i in 0..p.n_assets {
            sharpe_sum += stats.sharpe[i];
            sharpe_n += 1;
            for j in (i + 1)..p.n_assets {
                corr_sum += stats.corr[i][j];
                corr_n += 1;
            }
        }
    }
    let corr = corr_sum / corr_n as f64;
    let sharpe = sharpe_sum / sharpe_n as f64;
    verdict(
        7,
        "GBM statistics",
        z.abs() <= 3.0 && (corr - 0.1).abs() <= 0.02 && (sharpe - 0.4).abs() <= 0.05,
        format!(
            "mean log-return z={z:.3}, mean pairwise corr {corr:.4}, mean Sharpe {sharpe:.4} over {sharpe_n} asset paths, {:.1?}",
            start.elapsed()
        ),
    );
}

fn energy_multiset(e: &EmbeddedIsing) -> Vec<f64> {
    let n = e.n_qubits();
    let mut out: Vec<f64> = (0u32..(1 << n))
        .map(|mask| {
            let s: Vec<i8> = (0..n)
                .map(|q| if (mask >> q) & 1 == 1 { 1 } else { -1 })
                .collect();
            e.energy(&s).unwrap()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn criterion_08_gauge_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut mismatches = 0;
    let mut trials = 0;
    for _ in 0..10 {
        // 10 fully coupled spins, one qubit per variable
        let h: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut j = Vec::new();
        for a in 0..10 {
            for b in (a + 1)..10 {
                j.push((a, b, rng.random_range(-1.0..1.0)));
            }
        }
        let logical = IsingInstance::new(h.clone(), &j, 0.0);
        let e = EmbeddedIsing {
            qubits: (0..10).collect(),
            h,
            couplers: j,
            chain_strength: 1.0,
            logical,
            embedding: CliqueEmbedding {
                n_logical: 10,
                chains: (0..10).map(|q| vec![q]).collect(),
                chain_length: 1,
            },
        };
        let reference = energy_multiset(&e);
        for _ in 0..5 {
            let g: Vec<i8> = (0..10)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            trials += 1;
            if energy_multiset(&apply_gauge(&e, &g).unwrap()) != reference {
                mismatches += 1;
            }
        }
    }
    verdict(
        8,
        "gauge invariance of the energy spectrum",
        mismatches == 0,
        format!("{trials} random gauges on 2^10-state enumerations, {mismatches} mismatches"),
    );
}

#[test]
fn criterion_09_reverse_annealing_benefit() {
    let start = Instant::now();
    let cfg = EnsembleConfig::default();
    let graph = build_chimera(16, &[]).unwrap();
    let schedule = default_schedule();
    let engine = EngineConfig::default();
    let mut instances = Vec::new();
    let mut scanned = 0;
    while instances.len() < 12 {
        let q = generate_instance(&cfg, 16, scanned).unwrap();
        let exact = exact_solve_capped(&q, 16).unwrap();
        let greedy = greedy_selection(&q);
        if greedy.value > exact.value + 1e-9 {
            instances.push((q, exact.value, greedy.bits));
        }
        scanned += 1;
    }
    // equal modeled budget: forward tau=3 vs reverse 2*1 + 1
    let forward = AnnealParams {
        chain_strength: 3.0,
        tau: 3.0,
        max_reads: 1500,
        ..AnnealParams::default()
    };
    let reverse = AnnealParams {
        chain_strength: 3.0,
        tau: 1.0,
        rho: 1.0,
        s_p: 0.3,
        max_reads: 1500,
        target: None,
    };
    let (mut pf, mut pr) = (Vec::new(), Vec::new());
    for (q, best, seed) in &instances {
        let f = anneal_solve(q, &graph, &forward, None, &schedule, &engine).unwrap();
        let r = anneal_solve(q, &graph, &reverse, Some(seed), &schedule, &engine).unwrap();
        assert_eq!(f.reads.t_run_us, r.reads.t_run_us);
        pf.push(estimate_success(&f.reads.energies, *best).0);
        pr.push(estimate_success(&r.reads.energies, *best).0);
    }
    pf.sort_by(f64::total_cmp);
    pr.sort_by(f64::total_cmp);
    let (mf, mr) = (percentile(&pf, 0.5).unwrap(), percentile(&pr, 0.5).unwrap());
    verdict(
        9,
        "greedy-seeded reverse annealing vs forward at equal sweep budget",
        instances.len() >= 10 && mr >= mf,
        format!(
            "{} greedy-suboptimal N=16 instances (of {scanned} scanned), median p reverse {mr:.4} vs forward {mf:.4}, {:.1?}",
            instances.len(),
            start.elapsed()
        ),
    );
}

/// Deterministic stub: success probability is a fixed function of the grid point.
struct StubSampler;

impl StubSampler {
    fn p(entry: &RegistryEntry, pt: &GridPoint) -> f64 {
        let key = pt.chain_strength * 7.0
            + pt.s_p.unwrap_or(0.0) * 100.0
            + pt.rho.unwrap_or(0.0) * 3.0
            + entry.seed as f64;
        let k = (key.round() as u64 * 2654435761) % 97;
        if k < 10 {
            0.0
        } else {
            k as f64 / 200.0
        }
    }
}

impl BatchSampler for StubSampler {
    fn sample(
        &self,
        entry: &RegistryEntry,
        pt: &GridPoint,
        _: ProtocolKind,
    ) -> portfolio_anneal::Result<Vec<f64>> {
        let hits = (Self::p(entry, pt) * 200.0).round() as usize;
        let mut v = vec![entry.best_known; hits];
        v.extend(vec![entry.best_known + 1.0; 200 - hits]);
        Ok(v)
    }
}

fn stub_entry(i: usize) -> RegistryEntry {
    RegistryEntry {
        id: format!("stub{i}"),
        n: 48,
        seed: i as u64,
        best_known: -10.0,
        best_known_source: "stub".into(),
        optimal_cardinality: 0,
        best_bits: vec![],
        greedy_value: -9.0,
        instance: None,
    }
}

#[test]
fn criterion_10_sweep_bookkeeping() {
    let grid = table2_grid(48).unwrap();
    let points = grid.points(ProtocolKind::Reverse).unwrap();
    let mut problems = Vec::new();
    if points.len() != 210 {
        problems.push(format!("{} reverse points", points.len()));
    }

    let entries: Vec<RegistryEntry> = (0..3).map(stub_entry).collect();
    let rev = sweep(&entries, &grid, ProtocolKind::Reverse, &StubSampler, 0.99).unwrap();
    for best in &rev.best {
        let rows: Vec<_> = rev
            .points
            .iter()
            .filter(|r| r.instance_id == best.instance_id)
            .collect();
        let min = rows
            .iter()
            .filter_map(|r| r.tts)
            .fold(f64::INFINITY, f64::min);
        if best.tts != Some(min) {
            problems.push(format!(
                "{}: reported {:?}, grid min {min}",
                best.instance_id, best.tts
            ));
        }
        // independent recomputation of the selected point
        let entry = entries.iter().find(|e| e.id == best.instance_id).unwrap();
        let pt = GridPoint {
            chain_strength: best.chain_strength,
            tau: best.tau,
            rho: best.rho,
            s_p: best.s_p,
        };
        let t_run = 2.0 * best.tau + best.rho.unwrap();
        let by_hand = t_run * 0.01f64.ln() / (1.0 - StubSampler::p(entry, &pt)).ln();
        if (best.tts.unwrap() - by_hand).abs() > 1e-9 * by_hand {
            problems.push(format!(
                "{}: tts {:?} vs hand {by_hand}",
                best.instance_id, best.tts
            ));
        }
    }
    for r in &rev.points {
        let proto = build_reverse_protocol(r.tau, r.rho.unwrap(), r.s_p.unwrap(), None).unwrap();
        if r.t_run != 2.0 * r.tau + r.rho.unwrap() || r.t_run != proto.duration() {
            problems.push(format!(
                "reverse t_run {} at tau {} rho {:?}",
                r.t_run, r.tau, r.rho
            ));
        }
        if r.p == 0.0 && r.tts.is_some() {
            problems.push("p=0 point has finite tts".into());
        }
    }

    let fwd_grid = ParameterGrid {
        chain_strength: Range {
            min: 3.0,
            max: 7.0,
            step: 0.5,
        },
        s_p: None,
        rho: vec![],
        tau: vec![1.0, 10.0],
    };
    let fwd = sweep(
        &entries,
        &fwd_grid,
        ProtocolKind::Forward,
        &StubSampler,
        0.99,
    )
    .unwrap();
    for r in &fwd.points {
        if r.t_run != r.tau || r.t_run != build_forward_protocol(r.tau).unwrap().duration() {
            problems.push(format!("forward t_run {} at tau {}", r.t_run, r.tau));
        }
    }
    if fwd.points.len() != 3 * 9 * 2 || rev.points.len() != 3 * 210 {
        problems.push(format!(
            "row counts {} / {}",
            fwd.points.len(),
            rev.points.len()
        ));
    }
    verdict(
        10,
        "sweep bookkeeping",
        problems.is_empty(),
        format!(
            "N=48 reverse grid {} points, {} reverse rows, {} forward rows, problems {:?}",
            points.len(),
            rev.points.len(),
            fwd.points.len(),
            problems.iter().take(3).collect::<Vec<_>>()
        ),
    );
}
