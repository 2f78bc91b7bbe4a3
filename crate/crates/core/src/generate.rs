//! Seeded random instance generators.
//!
//! Everything here is deterministic in the seed: the CLI self-test modes and
//! the acceptance suite draw their instances from these functions, so a
//! failing case can always be replayed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::FiniteAbelianGroup;
use crate::holo::{Transformer, TransformerAssignment};
use crate::nfg::{Nfg, PortRef};
use crate::perfmatch::{Connection, Matchgate, PlanarEmbedding, WeightedGraph};
use crate::rewrite::{Mark, MarkedFactorGraph};
use crate::tensor::{Alphabet, LocalFunction};
use crate::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_values(rng: &mut ChaCha8Rng, ports: Vec<Alphabet>) -> LocalFunction {
    let len: usize = ports.iter().map(Alphabet::size).product();
    let values = (0..len).map(|_| random_complex(rng)).collect();
    LocalFunction::new(ports, values).expect("finite random values")
}

/// Shape constraints for random NFGs.
#[derive(Clone, Debug)]
pub struct NfgParams {
    pub max_vertices: usize,
    pub max_internal_edges: usize,
    pub max_arity: usize,
    pub alphabets: Vec<Alphabet>,
    /// `Some(true)` forces a closed NFG, `Some(false)` at least one dangling
    /// edge, `None` leaves it to chance.
    pub closed: Option<bool>,
}

impl Default for NfgParams {
    fn default() -> Self {
        NfgParams {
            max_vertices: 6,
            max_internal_edges: 8,
            max_arity: 3,
            alphabets: mixed_alphabet_pool(),
            closed: None,
        }
    }
}

/// Alphabets of size at most 4, plain and grouped.
pub fn mixed_alphabet_pool() -> Vec<Alphabet> {
    vec![
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(2).unwrap()),
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(3).unwrap()),
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(4).unwrap()),
        Alphabet::Grouped(FiniteAbelianGroup::new(vec![2, 2]).unwrap()),
        Alphabet::Plain(2),
        Alphabet::Plain(3),
    ]
}

/// Group alphabets only, for dualization instances.
pub fn group_alphabet_pool() -> Vec<Alphabet> {
    vec![
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(2).unwrap()),
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(3).unwrap()),
        Alphabet::Grouped(FiniteAbelianGroup::new(vec![2, 2]).unwrap()),
    ]
}

/// A random valid NFG within the given shape bounds.
pub fn random_nfg(rng: &mut ChaCha8Rng, p: &NfgParams) -> Nfg {
    let nv = rng.gen_range(1..=p.max_vertices);
    let mut arities: Vec<usize> = (0..nv).map(|_| rng.gen_range(1..=p.max_arity)).collect();

    if p.closed == Some(true) {
        // make the count pairable within the edge budget
        loop {
            let total: usize = arities.iter().sum();
            if total.is_multiple_of(2) && total / 2 <= p.max_internal_edges {
                break;
            }
            let v = rng.gen_range(0..nv);
            if total / 2 >= p.max_internal_edges && arities[v] > 1 {
                arities[v] -= 1;
            } else if total % 2 == 1 {
                arities[v] += 1;
            }
        }
    }

    let mut half_edges: Vec<(usize, usize)> = arities
        .iter()
        .enumerate()
        .flat_map(|(v, &a)| (0..a).map(move |port| (v, port)))
        .collect();
    half_edges.shuffle(rng);

    let total = half_edges.len();
    let n_internal = match p.closed {
        Some(true) => total / 2,
        Some(false) => {
            let cap = p.max_internal_edges.min(total.saturating_sub(1) / 2);
            if cap == 0 {
                0
            } else {
                rng.gen_range(0..=cap)
            }
        }
        None => {
            let cap = p.max_internal_edges.min(total / 2);
            rng.gen_range(0..=cap)
        }
    };

    let mut port_alphabet: BTreeMap<(usize, usize), Alphabet> = BTreeMap::new();
    let mut internal = Vec::with_capacity(n_internal);
    for k in 0..n_internal {
        let a = half_edges[2 * k];
        let b = half_edges[2 * k + 1];
        let alphabet = p.alphabets[rng.gen_range(0..p.alphabets.len())].clone();
        port_alphabet.insert(a, alphabet.clone());
        port_alphabet.insert(b, alphabet);
        internal.push((a, b));
    }
    let mut dangling = Vec::new();
    for (k, &he) in half_edges.iter().enumerate().skip(2 * n_internal) {
        let alphabet = p.alphabets[rng.gen_range(0..p.alphabets.len())].clone();
        port_alphabet.insert(he, alphabet);
        dangling.push((he, format!("x{}", k - 2 * n_internal)));
    }

    let vertices: BTreeMap<String, LocalFunction> = (0..nv)
        .map(|v| {
            let ports: Vec<Alphabet> = (0..arities[v])
                .map(|port| port_alphabet[&(v, port)].clone())
                .collect();
            (format!("v{v}"), random_values(rng, ports))
        })
        .collect();
    let internal = internal
        .into_iter()
        .map(|((va, pa), (vb, pb))| {
            (
                PortRef::new(format!("v{va}"), pa),
                PortRef::new(format!("v{vb}"), pb),
            )
        })
        .collect();
    let dangling = dangling
        .into_iter()
        .map(|((v, port), label)| (PortRef::new(format!("v{v}"), port), label))
        .collect();
    Nfg::new(vertices, internal, dangling).expect("construction satisfies the invariants")
}

/// A random invertible transformer on the alphabet with condition number at
/// most `max_condition`.
pub fn random_transformer(
    rng: &mut ChaCha8Rng,
    alphabet: &Alphabet,
    max_condition: f64,
) -> Transformer {
    loop {
        let n = alphabet.size();
        let values: Vec<C64> = (0..n * n).map(|_| random_complex(rng)).collect();
        if let Ok(t) = Transformer::new(alphabet.clone(), alphabet.clone(), values) {
            if t.condition_number() <= max_condition {
                return t;
            }
        }
    }
}

/// A random valid assignment: inverse pairs on internal edges, arbitrary
/// invertible transformers on dangling edges. Occasionally picks identity or
/// the Fourier kernel to vary the mix.
pub fn random_assignment(
    rng: &mut ChaCha8Rng,
    n: &Nfg,
    max_condition: f64,
) -> TransformerAssignment {
    let pick = |rng: &mut ChaCha8Rng, alphabet: &Alphabet| -> Transformer {
        match rng.gen_range(0..10) {
            0 => Transformer::identity(alphabet),
            1 => match alphabet.group() {
                Some(g) => Transformer::kappa(g),
                None => random_transformer(rng, alphabet, max_condition),
            },
            _ => random_transformer(rng, alphabet, max_condition),
        }
    };
    let mut assignment = TransformerAssignment::new();
    for (a, b) in n.internal_edges() {
        let alphabet = n.port_alphabet(a).expect("valid NFG");
        let t = pick(rng, alphabet);
        assignment.insert(b.vertex.clone(), b.port, t.invert());
        assignment.insert(a.vertex.clone(), a.port, t);
    }
    for (p, _) in n.dangling() {
        let alphabet = n.port_alphabet(p).expect("valid NFG");
        let t = pick(rng, alphabet);
        assignment.insert(p.vertex.clone(), p.port, t);
    }
    assignment
}

/// A random marked factor graph over Z2: at most `max_factors` factors and
/// `max_variables` variables, arbitrary degrees, no degree-one internal
/// variables.
pub fn random_marked_graph(
    rng: &mut ChaCha8Rng,
    max_factors: usize,
    max_variables: usize,
) -> MarkedFactorGraph {
    let z2 = Alphabet::Grouped(FiniteAbelianGroup::cyclic(2).unwrap());
    let n_factors = rng.gen_range(1..=max_factors);
    let n_vars = rng.gen_range(1..=max_variables);

    let mut factor_vars: Vec<Vec<String>> = vec![Vec::new(); n_factors];
    let mut degree = vec![0usize; n_vars];
    for (v, deg) in degree.iter_mut().enumerate() {
        let d = rng.gen_range(1..=3);
        for _ in 0..d {
            factor_vars[rng.gen_range(0..n_factors)].push(format!("x{v}"));
            *deg += 1;
        }
    }
    // factors must involve at least one variable
    for vars in factor_vars.iter_mut() {
        if vars.is_empty() {
            let v = rng.gen_range(0..n_vars);
            vars.push(format!("x{v}"));
            degree[v] += 1;
        }
    }

    let variables: BTreeMap<String, (Alphabet, Mark)> = (0..n_vars)
        .map(|v| {
            let mark = if degree[v] == 1 || rng.gen_bool(0.5) {
                Mark::External
            } else {
                Mark::Internal
            };
            (format!("x{v}"), (z2.clone(), mark))
        })
        .collect();
    let factors: BTreeMap<String, (LocalFunction, Vec<String>)> = factor_vars
        .into_iter()
        .enumerate()
        .map(|(f, vars)| {
            let fun = random_values(rng, vec![z2.clone(); vars.len()]);
            (format!("f{f}"), (fun, vars))
        })
        .collect();
    MarkedFactorGraph::new(variables, factors).expect("construction satisfies the invariants")
}

/// A random matchgate: a small weighted graph with distinct external
/// vertices.
pub fn random_matchgate(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
    n_external: usize,
) -> Matchgate {
    let nv = rng.gen_range(n_external.max(1)..=max_vertices);
    let mut edges = Vec::new();
    for u in 0..nv {
        for v in u + 1..nv {
            if rng.gen_bool(0.5) {
                edges.push((u, v, random_complex(rng)));
            }
        }
    }
    let mut ids: Vec<usize> = (0..nv).collect();
    ids.shuffle(rng);
    let external = ids[..n_external].to_vec();
    Matchgate::new(
        WeightedGraph::new(nv, edges).expect("simple by construction"),
        external,
    )
    .expect("distinct externals")
}

/// A random assembly: gates with at most `max_gate_vertices` vertices and
/// `max_external` external vertices each, all external slots paired across
/// different gates.
pub fn random_assembly(
    rng: &mut ChaCha8Rng,
    max_gates: usize,
    max_gate_vertices: usize,
    max_external: usize,
) -> (Vec<Matchgate>, Vec<Connection>) {
    'outer: loop {
        let n_gates = rng.gen_range(2..=max_gates);
        let mut externals: Vec<usize> = (0..n_gates)
            .map(|_| rng.gen_range(1..=max_external))
            .collect();
        if externals.iter().sum::<usize>() % 2 == 1 {
            let g = rng.gen_range(0..n_gates);
            if externals[g] < max_external {
                externals[g] += 1;
            } else if externals[g] > 1 {
                externals[g] -= 1;
            } else {
                continue;
            }
        }
        let gates: Vec<Matchgate> = externals
            .iter()
            .map(|&ne| random_matchgate(rng, max_gate_vertices, ne))
            .collect();

        let mut slots: Vec<(usize, usize)> = gates
            .iter()
            .enumerate()
            .flat_map(|(g, gate)| (0..gate.external().len()).map(move |s| (g, s)))
            .collect();
        for _ in 0..64 {
            slots.shuffle(rng);
            if slots.chunks(2).all(|pair| pair[0].0 != pair[1].0) {
                let connections = slots
                    .chunks(2)
                    .map(|pair| (pair[0], pair[1]))
                    .collect();
                return (gates, connections);
            }
        }
        continue 'outer;
    }
}

/// A random planar weighted graph with its rotation-system embedding:
/// grids, wheels, and cycles with random complex weights and random edge
/// deletions (deletion preserves the embedding).
pub fn random_planar_graph(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
) -> (WeightedGraph, PlanarEmbedding) {
    // candidate edges with, per vertex, the cyclic order of its candidates
    let (n, candidates, cyclic): Skeleton = match rng.gen_range(0..3) {
        0 => grid_skeleton(rng, max_vertices),
        1 => wheel_skeleton(rng, max_vertices),
        _ => cycle_skeleton(rng, max_vertices),
    };

    let keep: Vec<bool> = candidates
        .iter()
        .map(|_| rng.gen_bool(0.8))
        .collect();
    let mut new_index = vec![usize::MAX; candidates.len()];
    let mut edges = Vec::new();
    for (k, &(u, v)) in candidates.iter().enumerate() {
        if keep[k] {
            new_index[k] = edges.len();
            edges.push((u, v, random_complex(rng)));
        }
    }
    let rotation: Vec<Vec<usize>> = cyclic
        .iter()
        .map(|order| {
            order
                .iter()
                .filter(|&&k| keep[k])
                .map(|&k| new_index[k])
                .collect()
        })
        .collect();
    (
        WeightedGraph::new(n, edges).expect("simple by construction"),
        PlanarEmbedding::new(rotation),
    )
}

/// Vertex count, candidate edges, and per-vertex cyclic candidate order.
type Skeleton = (usize, Vec<(usize, usize)>, Vec<Vec<usize>>);

fn grid_skeleton(rng: &mut ChaCha8Rng, max_vertices: usize) -> Skeleton {
    let rows = rng.gen_range(2..=3);
    let cols_cap = (max_vertices / rows).max(2);
    let cols = rng.gen_range(2..=cols_cap.min(4));
    let n = rows * cols;
    let idx = |r: usize, c: usize| r * cols + c;
    let mut candidates = Vec::new();
    let mut edge_at: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edge_at.insert((idx(r, c), idx(r, c + 1)), candidates.len());
                candidates.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edge_at.insert((idx(r, c), idx(r + 1, c)), candidates.len());
                candidates.push((idx(r, c), idx(r + 1, c)));
            }
        }
    }
    let mut cyclic = vec![Vec::new(); n];
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            let v = idx(r as usize, c as usize);
            // north, east, south, west
            for (dr, dc) in [(-1i64, 0i64), (0, 1), (1, 0), (0, -1)] {
                let (nr, nc) = (r + dr, c + dc);
                if (0..rows as i64).contains(&nr) && (0..cols as i64).contains(&nc) {
                    let u = idx(nr as usize, nc as usize);
                    cyclic[v].push(edge_at[&(v.min(u), v.max(u))]);
                }
            }
        }
    }
    (n, candidates, cyclic)
}

fn wheel_skeleton(rng: &mut ChaCha8Rng, max_vertices: usize) -> Skeleton {
    let n = rng.gen_range(5..=max_vertices.max(5));
    let rim = n - 1; // vertices 1..n counterclockwise, hub 0
    let spoke = |i: usize| i - 1; // candidate index of spoke to rim vertex i
    let rim_edge = |i: usize| rim + (i - 1); // candidate joining i to its successor
    let succ = |i: usize| if i == rim { 1 } else { i + 1 };
    let pred = |i: usize| if i == 1 { rim } else { i - 1 };

    let mut candidates = Vec::new();
    for i in 1..=rim {
        candidates.push((0, i));
    }
    for i in 1..=rim {
        candidates.push((i.min(succ(i)), i.max(succ(i))));
    }
    let mut cyclic = vec![(1..=rim).map(spoke).collect::<Vec<_>>()];
    cyclic.extend((1..=rim).map(|i| vec![rim_edge(i), spoke(i), rim_edge(pred(i))]));
    (n, candidates, cyclic)
}

fn cycle_skeleton(rng: &mut ChaCha8Rng, max_vertices: usize) -> Skeleton {
    let n = rng.gen_range(3..=max_vertices.max(3));
    let mut candidates = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        candidates.push((i.min(j), i.max(j)));
    }
    let cyclic = (0..n).map(|i| vec![(i + n - 1) % n, i]).collect();
    (n, candidates, cyclic)
}

/// A random skew-symmetric complex matrix of dimension `n`.
pub fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in r + 1..n {
            let z = random_complex(rng);
            m[r * n + c] = z;
            m[c * n + r] = -z;
        }
    }
    m
}
