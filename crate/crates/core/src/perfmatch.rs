//! Weighted perfect matchings, matchgates, and the reduction pipeline.
//!
//! `perfmatch` of a weighted graph is the sum over perfect matchings of the
//! edge-weight products; [`perfmatch_brute`] enumerates matchings directly
//! and is the authoritative oracle. A [`Matchgate`] is a weighted graph with
//! ordered external vertices; its [`Matchgate::signature`] maps each deletion
//! pattern of the external vertices to the matching sum of what remains.
//! [`assemble`] wires matchgates into a larger graph with weight-one
//! connecting edges and the closed NFG of their signatures, whose exterior
//! equals the matching sum of the assembled graph ([`verify_decomposition`]).
//!
//! The fast path: [`pfaffian`] for skew-symmetric complex matrices, and
//! [`fkt_perfmatch`], which builds an orientation from a rotation-system
//! embedding such that the matching sum equals a Pfaffian up to a global
//! sign, fixed against one reference matching.
//!
//! [`holographic_reduce`] ties it together: transform a closed binary NFG,
//! check each transformed function against a supplied matchgate signature,
//! assemble, and compare the matching sum with the directly evaluated
//! exterior.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::holo::{holographic_transform, TransformerAssignment};
use crate::nfg::{Nfg, PortRef};
use crate::rewrite::RewriteReport;
use crate::tensor::{for_each_index, Alphabet, LocalFunction};
use crate::{max_deviation, C64};

/// Default cap on the vertex count for brute matching enumeration.
pub const DEFAULT_MATCHING_CAP: usize = 24;

/// A connection between two (gate index, external slot) endpoints.
pub type Connection = ((usize, usize), (usize, usize));

/// A simple undirected graph with complex edge weights.
#[derive(Clone, PartialEq, Debug)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, C64)>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, C64)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v, w) in &edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) outside vertex range 0..{n}"
                )));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
            if !w.re.is_finite() || !w.im.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "non-finite weight on edge ({u}, {v})"
                )));
            }
        }
        Ok(WeightedGraph { n, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, C64)] {
        &self.edges
    }

    /// Per-vertex list of (neighbor, edge index).
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (k, &(u, v, _)) in self.edges.iter().enumerate() {
            adj[u].push((v, k));
            adj[v].push((u, k));
        }
        adj
    }

    /// The graph with the flagged vertices (and their edges) removed,
    /// remaining vertices renumbered in order.
    pub fn delete_vertices(&self, remove: &[bool]) -> WeightedGraph {
        debug_assert_eq!(remove.len(), self.n);
        let mut relabel = vec![usize::MAX; self.n];
        let mut next = 0;
        for v in 0..self.n {
            if !remove[v] {
                relabel[v] = next;
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v, _)| !remove[u] && !remove[v])
            .map(|&(u, v, w)| (relabel[u], relabel[v], w))
            .collect();
        WeightedGraph { n: next, edges }
    }
}

/// Sum over all perfect matchings of the edge-weight products, by direct
/// enumeration. The empty graph counts 1 (the empty matching); an odd vertex
/// count gives 0.
pub fn perfmatch_brute(h: &WeightedGraph) -> Result<C64> {
    perfmatch_brute_capped(h, DEFAULT_MATCHING_CAP)
}

pub fn perfmatch_brute_capped(h: &WeightedGraph, cap: usize) -> Result<C64> {
    if h.n > cap {
        return Err(Error::PerfMatchCapExceeded(h.n, cap));
    }
    if h.n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let adj = h.adjacency();
    let mut matched = vec![false; h.n];
    Ok(match_rest(h, &adj, &mut matched))
}

fn match_rest(h: &WeightedGraph, adj: &[Vec<(usize, usize)>], matched: &mut [bool]) -> C64 {
    let u = match matched.iter().position(|m| !m) {
        None => return C64::new(1.0, 0.0),
        Some(u) => u,
    };
    let mut acc = C64::new(0.0, 0.0);
    matched[u] = true;
    for &(v, e) in &adj[u] {
        if !matched[v] {
            matched[v] = true;
            acc += h.edges[e].2 * match_rest(h, adj, matched);
            matched[v] = false;
        }
    }
    matched[u] = false;
    acc
}

/// One perfect matching as a list of edge indices, if any exists.
fn find_one_matching(h: &WeightedGraph) -> Option<Vec<usize>> {
    if h.n % 2 == 1 {
        return None;
    }
    let adj = h.adjacency();
    let mut matched = vec![false; h.n];
    let mut picked = Vec::new();
    if find_rest(&adj, &mut matched, &mut picked) {
        Some(picked)
    } else {
        None
    }
}

fn find_rest(
    adj: &[Vec<(usize, usize)>],
    matched: &mut [bool],
    picked: &mut Vec<usize>,
) -> bool {
    let u = match matched.iter().position(|m| !m) {
        None => return true,
        Some(u) => u,
    };
    matched[u] = true;
    for &(v, e) in &adj[u] {
        if !matched[v] {
            matched[v] = true;
            picked.push(e);
            if find_rest(adj, matched, picked) {
                return true;
            }
            picked.pop();
            matched[v] = false;
        }
    }
    matched[u] = false;
    false
}

/// A weighted graph with an ordered subset of external vertices.
#[derive(Clone, Debug)]
pub struct Matchgate {
    graph: WeightedGraph,
    external: Vec<usize>,
}

impl Matchgate {
    pub fn new(graph: WeightedGraph, external: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &v in &external {
            if v >= graph.vertex_count() {
                return Err(Error::InvalidMatchgate(format!(
                    "external vertex {v} outside the graph"
                )));
            }
            if !seen.insert(v) {
                return Err(Error::InvalidMatchgate(format!(
                    "external vertex {v} listed twice"
                )));
            }
        }
        Ok(Matchgate { graph, external })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn external(&self) -> &[usize] {
        &self.external
    }

    /// The signature: a {0,1}-port function, one binary port per external
    /// vertex in declared order. Entry `x` is the matching sum of the gate
    /// with external vertex `j` deleted exactly when `x_j = 1`.
    pub fn signature(&self) -> Result<LocalFunction> {
        let ports = vec![Alphabet::Plain(2); self.external.len()];
        let sizes = vec![2usize; self.external.len()];
        let mut values = Vec::with_capacity(1 << self.external.len());
        let mut failure = None;
        for_each_index(&sizes, |idx| {
            if failure.is_some() {
                return;
            }
            let mut remove = vec![false; self.graph.vertex_count()];
            for (j, &bit) in idx.iter().enumerate() {
                if bit == 1 {
                    remove[self.external[j]] = true;
                }
            }
            match perfmatch_brute(&self.graph.delete_vertices(&remove)) {
                Ok(v) => values.push(v),
                Err(e) => failure = Some(e),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        LocalFunction::new(ports, values)
    }
}

/// Connects matchgates through their external vertices with weight-one
/// edges. Every external vertex of every gate must be used by exactly one
/// connection, and a connection must join two different gates.
///
/// Returns the assembled weighted graph and the closed NFG whose vertices
/// `g0, g1, ...` hold the gate signatures and whose edges mirror the
/// connections.
pub fn assemble(gates: &[Matchgate], connections: &[Connection]) -> Result<(WeightedGraph, Nfg)> {
    let mut used: Vec<Vec<bool>> = gates
        .iter()
        .map(|g| vec![false; g.external().len()])
        .collect();
    for &((gi, si), (gj, sj)) in connections {
        for &(g, s) in &[(gi, si), (gj, sj)] {
            if g >= gates.len() {
                return Err(Error::InvalidAssembly(format!("no gate {g}")));
            }
            if s >= gates[g].external().len() {
                return Err(Error::InvalidAssembly(format!(
                    "gate {g} has no external slot {s}"
                )));
            }
            if used[g][s] {
                return Err(Error::InvalidAssembly(format!(
                    "external slot {s} of gate {g} used twice"
                )));
            }
            used[g][s] = true;
        }
        if gi == gj {
            return Err(Error::InvalidAssembly(format!(
                "connection joins gate {gi} to itself"
            )));
        }
    }
    for (g, slots) in used.iter().enumerate() {
        if let Some(s) = slots.iter().position(|u| !u) {
            return Err(Error::InvalidAssembly(format!(
                "external slot {s} of gate {g} left unconnected"
            )));
        }
    }

    let mut offset = Vec::with_capacity(gates.len());
    let mut total = 0usize;
    for g in gates {
        offset.push(total);
        total += g.graph().vertex_count();
    }
    let mut edges: Vec<(usize, usize, C64)> = Vec::new();
    for (k, g) in gates.iter().enumerate() {
        for &(u, v, w) in g.graph().edges() {
            edges.push((offset[k] + u, offset[k] + v, w));
        }
    }
    for &((gi, si), (gj, sj)) in connections {
        edges.push((
            offset[gi] + gates[gi].external()[si],
            offset[gj] + gates[gj].external()[sj],
            C64::new(1.0, 0.0),
        ));
    }
    let h = WeightedGraph::new(total, edges)?;

    let mut vertices = BTreeMap::new();
    for (k, g) in gates.iter().enumerate() {
        vertices.insert(format!("g{k}"), g.signature()?);
    }
    let internal: Vec<(PortRef, PortRef)> = connections
        .iter()
        .map(|&((gi, si), (gj, sj))| {
            (
                PortRef::new(format!("g{gi}"), si),
                PortRef::new(format!("g{gj}"), sj),
            )
        })
        .collect();
    let nfg = Nfg::new(vertices, internal, vec![])?;
    Ok((h, nfg))
}

/// Compares the assembled graph's matching sum against the exterior function
/// of the signature NFG.
pub fn verify_decomposition(gates: &[Matchgate], connections: &[Connection]) -> Result<RewriteReport> {
    let (h, nfg) = assemble(gates, connections)?;
    let pi = perfmatch_brute(&h)?;
    let z = nfg.exterior()?;
    let before = LocalFunction::scalar(pi);
    let dev = max_deviation(before.values(), z.values());
    Ok(RewriteReport {
        before,
        after: z,
        max_deviation: dev,
    })
}

fn check_skew(matrix: &[C64], n: usize) -> Result<()> {
    let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((matrix[r * n + c] + matrix[c * n + r]).norm());
        }
    }
    if worst > 1e-9 * scale.max(1.0) {
        return Err(Error::NotSkewSymmetric(worst));
    }
    Ok(())
}

/// Pfaffian of a skew-symmetric matrix: combinatorial expansion up to 8x8,
/// skew-preserving elimination beyond. Satisfies `Pf(A)^2 = det(A)`.
pub fn pfaffian(matrix: &[C64], n: usize) -> Result<C64> {
    if matrix.len() != n * n {
        return Err(Error::ValueLengthMismatch {
            expected: n * n,
            got: matrix.len(),
        });
    }
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    check_skew(matrix, n)?;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if n <= 8 {
        let live: Vec<usize> = (0..n).collect();
        Ok(pfaffian_expand(matrix, n, &live))
    } else {
        Ok(pfaffian_eliminate(matrix, n))
    }
}

/// Expansion along the first live row:
/// `Pf = sum_k (-1)^k a[i0][ik] Pf(minor without i0, ik)`.
fn pfaffian_expand(a: &[C64], n: usize, live: &[usize]) -> C64 {
    if live.is_empty() {
        return C64::new(1.0, 0.0);
    }
    let i0 = live[0];
    let mut acc = C64::new(0.0, 0.0);
    let mut sign = 1.0;
    for (pos, &ik) in live.iter().enumerate().skip(1) {
        let entry = a[i0 * n + ik];
        if entry.norm() != 0.0 {
            let rest: Vec<usize> = live
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != 0 && p != pos)
                .map(|(_, &v)| v)
                .collect();
            acc += entry * pfaffian_expand(a, n, &rest) * sign;
        }
        sign = -sign;
    }
    acc
}

fn pfaffian_eliminate(matrix: &[C64], n: usize) -> C64 {
    let mut a = matrix.to_vec();
    let mut pf = C64::new(1.0, 0.0);
    let mut k = 0;
    while k < n {
        // pivot: largest entry in row k right of the diagonal
        let (best, mag) = (k + 1..n)
            .map(|j| (j, a[k * n + j].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("even dimension");
        if mag == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if best != k + 1 {
            for c in 0..n {
                a.swap((k + 1) * n + c, best * n + c);
            }
            for r in 0..n {
                a.swap(r * n + (k + 1), r * n + best);
            }
            pf = -pf;
        }
        let pivot = a[k * n + k + 1];
        pf *= pivot;
        for i in k + 2..n {
            let factor = a[k * n + i] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for c in 0..n {
                let sub = factor * a[(k + 1) * n + c];
                a[i * n + c] -= sub;
            }
            for r in 0..n {
                let sub = factor * a[r * n + (k + 1)];
                a[r * n + i] -= sub;
            }
        }
        k += 2;
    }
    pf
}

/// A combinatorial embedding: the cyclic order of incident edge indices
/// around every vertex.
#[derive(Clone, Debug)]
pub struct PlanarEmbedding {
    rotation: Vec<Vec<usize>>,
}

/// A directed half-edge: edge index plus direction (`true` = from
/// `endpoints.0` to `endpoints.1`).
type HalfEdge = (usize, bool);

impl PlanarEmbedding {
    pub fn new(rotation: Vec<Vec<usize>>) -> Self {
        PlanarEmbedding { rotation }
    }

    pub fn rotation(&self) -> &[Vec<usize>] {
        &self.rotation
    }

    /// Checks the rotation lists against the graph's incidences and the
    /// genus through face counting: every connected component with at least
    /// one edge must satisfy `V - E + F = 2`.
    pub fn validate(&self, h: &WeightedGraph) -> Result<()> {
        if self.rotation.len() != h.vertex_count() {
            return Err(Error::InvalidEmbedding(format!(
                "rotation lists {} vertices, graph has {}",
                self.rotation.len(),
                h.vertex_count()
            )));
        }
        let adj = h.adjacency();
        for (v, rot) in self.rotation.iter().enumerate() {
            let mut have: Vec<usize> = rot.clone();
            have.sort_unstable();
            let mut want: Vec<usize> = adj[v].iter().map(|&(_, e)| e).collect();
            want.sort_unstable();
            if have != want {
                return Err(Error::InvalidEmbedding(format!(
                    "rotation of vertex {v} does not list its incident edges exactly once"
                )));
            }
        }

        let faces = self.faces(h)?;
        // component id per vertex
        let mut comp = vec![usize::MAX; h.vertex_count()];
        let mut n_comp = 0;
        for start in 0..h.vertex_count() {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut queue = vec![start];
            comp[start] = n_comp;
            while let Some(u) = queue.pop() {
                for &(v, _) in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = n_comp;
                        queue.push(v);
                    }
                }
            }
            n_comp += 1;
        }
        let mut v_count = vec![0usize; n_comp];
        let mut e_count = vec![0usize; n_comp];
        let mut f_count = vec![0usize; n_comp];
        for v in 0..h.vertex_count() {
            v_count[comp[v]] += 1;
        }
        for &(u, _, _) in h.edges() {
            e_count[comp[u]] += 1;
        }
        for face in &faces {
            let (e, _) = face[0];
            f_count[comp[h.edges()[e].0]] += 1;
        }
        for c in 0..n_comp {
            if e_count[c] == 0 {
                continue;
            }
            let euler = v_count[c] as i64 - e_count[c] as i64 + f_count[c] as i64;
            if euler != 2 {
                return Err(Error::InvalidEmbedding(format!(
                    "component {c} has V - E + F = {euler}, not 2"
                )));
            }
        }
        Ok(())
    }

    /// Face cycles of the embedding; every half-edge appears in exactly one
    /// face.
    fn faces(&self, h: &WeightedGraph) -> Result<Vec<Vec<HalfEdge>>> {
        let m = h.edges().len();
        // position of edge e in the rotation of vertex v
        let mut pos: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (v, rot) in self.rotation.iter().enumerate() {
            for (k, &e) in rot.iter().enumerate() {
                pos.insert((v, e), k);
            }
        }
        let half_tail = |(e, d): HalfEdge| -> usize {
            let (u, v, _) = h.edges()[e];
            if d {
                u
            } else {
                v
            }
        };
        let half_head = |(e, d): HalfEdge| -> usize {
            let (u, v, _) = h.edges()[e];
            if d {
                v
            } else {
                u
            }
        };

        let mut visited = vec![false; 2 * m];
        let slot = |(e, d): HalfEdge| e * 2 + usize::from(d);
        let mut faces = Vec::new();
        for e in 0..m {
            for d in [true, false] {
                if visited[slot((e, d))] {
                    continue;
                }
                let start = (e, d);
                let mut face = Vec::new();
                let mut cur = start;
                loop {
                    if visited[slot(cur)] {
                        return Err(Error::InvalidEmbedding(
                            "face traversal revisited a half-edge".into(),
                        ));
                    }
                    visited[slot(cur)] = true;
                    face.push(cur);
                    let w = half_head(cur);
                    let rot = &self.rotation[w];
                    let p = pos[&(w, cur.0)];
                    let next_edge = rot[(p + 1) % rot.len()];
                    let next = (next_edge, h.edges()[next_edge].0 == w);
                    debug_assert_eq!(half_tail(next), w);
                    if next == start {
                        break;
                    }
                    cur = next;
                }
                faces.push(face);
            }
        }
        Ok(faces)
    }
}

/// An orientation with every face but one per component oddly oriented:
/// all perfect matchings then carry the same sign in the Pfaffian.
fn pfaffian_orientation(h: &WeightedGraph, emb: &PlanarEmbedding) -> Result<Vec<bool>> {
    let n = h.vertex_count();
    let m = h.edges().len();
    let adj = h.adjacency();

    // spanning forest, oriented from parent to child
    let mut orientation: Vec<Option<bool>> = vec![None; m];
    let mut tree = vec![false; m];
    let mut seen = vec![false; n];
    let mut roots = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        roots.push(start);
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, e) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    tree[e] = true;
                    orientation[e] = Some(h.edges()[e].0 == u);
                    queue.push_back(v);
                }
            }
        }
    }

    let faces = emb.faces(h)?;
    let mut face_of = vec![usize::MAX; 2 * m];
    for (fid, face) in faces.iter().enumerate() {
        for &(e, d) in face {
            face_of[e * 2 + usize::from(d)] = fid;
        }
    }

    // dual forest over faces through the non-tree edges, one root face per
    // component; children are fixed before their parents so each face has
    // exactly one undecided edge when its turn comes
    let mut face_state = vec![usize::MAX; faces.len()]; // depth
    let mut parent_edge = vec![usize::MAX; faces.len()];
    let mut face_order: Vec<usize> = Vec::new();
    let mut dual_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); faces.len()];
    for e in 0..m {
        if !tree[e] {
            let f0 = face_of[e * 2 + 1];
            let f1 = face_of[e * 2];
            dual_adj[f0].push((f1, e));
            dual_adj[f1].push((f0, e));
        }
    }
    for root_vertex in roots {
        // any face touching the component serves as its outer face
        let root_face = (0..faces.len())
            .find(|&f| {
                let (e, _) = faces[f][0];
                let (u, v, _) = h.edges()[e];
                component_contains(&adj, root_vertex, u) || component_contains(&adj, root_vertex, v)
            });
        let root_face = match root_face {
            Some(f) => f,
            None => continue, // component without edges
        };
        face_state[root_face] = 0;
        let mut queue = std::collections::VecDeque::from([root_face]);
        while let Some(f) = queue.pop_front() {
            face_order.push(f);
            for &(g, e) in &dual_adj[f] {
                if face_state[g] == usize::MAX {
                    face_state[g] = face_state[f] + 1;
                    parent_edge[g] = e;
                    queue.push_back(g);
                }
            }
        }
    }
    if face_state.contains(&usize::MAX) {
        return Err(Error::InvalidEmbedding(
            "dual face graph is not connected per component".into(),
        ));
    }

    // deepest faces first; set each parent edge to make the face odd
    face_order.sort_by_key(|&f| std::cmp::Reverse(face_state[f]));
    for &f in &face_order {
        let pe = parent_edge[f];
        if pe == usize::MAX {
            continue; // root face stays unconstrained
        }
        let mut agree = 0usize;
        let mut my_half: Option<bool> = None;
        for &(e, d) in &faces[f] {
            if e == pe {
                my_half = Some(d);
                continue;
            }
            match orientation[e] {
                Some(o) if o == d => agree += 1,
                Some(_) => {}
                None => {
                    return Err(Error::InvalidEmbedding(
                        "face has more than one undecided edge".into(),
                    ))
                }
            }
        }
        let d = my_half.ok_or_else(|| {
            Error::InvalidEmbedding("parent edge missing from its face".into())
        })?;
        // want total agreements odd
        orientation[pe] = Some(if agree.is_multiple_of(2) { d } else { !d });
    }

    Ok(orientation
        .into_iter()
        .map(|o| o.expect("all edges oriented"))
        .collect())
}

fn component_contains(adj: &[Vec<(usize, usize)>], root: usize, target: usize) -> bool {
    // tiny graphs; a fresh BFS per query is fine
    let mut seen = vec![false; adj.len()];
    let mut queue = vec![root];
    seen[root] = true;
    while let Some(u) = queue.pop() {
        if u == target {
            return true;
        }
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push(v);
            }
        }
    }
    false
}

/// Sign of the permutation sending `0..n` to the matching's pair sequence,
/// times the orientation factors of the matched edges.
fn matching_sign(h: &WeightedGraph, matching: &[usize], orientation: &[bool]) -> f64 {
    let mut pairs: Vec<(usize, usize)> = matching
        .iter()
        .map(|&e| {
            let (u, v, _) = h.edges()[e];
            (u.min(v), u.max(v))
        })
        .collect();
    pairs.sort_unstable();
    let seq: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    let mut sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
    for &e in matching {
        let (u, v, _) = h.edges()[e];
        // orientation true means the edge points endpoints.0 -> endpoints.1;
        // the pair sequence lists each pair low vertex first
        let points_lo_to_hi = if u < v { orientation[e] } else { !orientation[e] };
        if !points_lo_to_hi {
            sign = -sign;
        }
    }
    sign
}

/// Matching sum by the Pfaffian of an oriented skew adjacency matrix. The
/// orientation makes every matching term carry one global sign, which is
/// fixed by evaluating one reference matching; no matching means zero.
pub fn fkt_perfmatch(h: &WeightedGraph, emb: &PlanarEmbedding) -> Result<C64> {
    emb.validate(h)?;
    if h.vertex_count() % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let reference = match find_one_matching(h) {
        None => return Ok(C64::new(0.0, 0.0)),
        Some(m) => m,
    };
    let orientation = pfaffian_orientation(h, emb)?;

    let n = h.vertex_count();
    let mut b = vec![C64::new(0.0, 0.0); n * n];
    for (e, &(u, v, w)) in h.edges().iter().enumerate() {
        if orientation[e] {
            b[u * n + v] = w;
            b[v * n + u] = -w;
        } else {
            b[u * n + v] = -w;
            b[v * n + u] = w;
        }
    }
    let pf = pfaffian(&b, n)?;
    let sign = matching_sign(h, &reference, &orientation);
    Ok(pf * sign)
}

/// Result of a holographic reduction: the matching sum of the assembled
/// graph and the directly evaluated exterior, which must agree.
#[derive(Clone, Debug)]
pub struct ReduceReport {
    pub perfmatch: C64,
    pub direct: C64,
    pub max_deviation: f64,
    pub graph: WeightedGraph,
}

/// Transforms a closed binary NFG, checks every transformed function against
/// the supplied matchgate's signature, assembles the gates along the NFG
/// topology, and compares the matching sum (FKT when an embedding of the
/// assembled graph is supplied, brute enumeration otherwise) with the
/// exterior evaluated directly.
pub fn holographic_reduce(
    n: &Nfg,
    assignment: &TransformerAssignment,
    gate_map: &BTreeMap<String, Matchgate>,
    embedding: Option<&PlanarEmbedding>,
) -> Result<ReduceReport> {
    if !n.is_closed() {
        return Err(Error::OpenNfg);
    }
    for (k, (a, _)) in n.internal_edges().iter().enumerate() {
        let size = n.port_alphabet(a)?.size();
        if size != 2 {
            return Err(Error::NonBinaryEdge(format!("internal {k}"), size));
        }
    }

    let transformed = holographic_transform(n, assignment)?;
    let ids: Vec<String> = transformed.vertices().keys().cloned().collect();
    let gate_index: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();

    let mut gates = Vec::with_capacity(ids.len());
    for id in &ids {
        let gate = gate_map
            .get(id)
            .ok_or_else(|| Error::MissingGate(id.clone()))?;
        let f_v = transformed.vertex(id)?;
        let sig = gate.signature()?;
        if sig.arity() != f_v.arity() {
            return Err(Error::SignatureMismatch {
                vertex: id.clone(),
                deviation: f64::INFINITY,
            });
        }
        let dev = max_deviation(sig.values(), f_v.values());
        if dev > 1e-9 {
            return Err(Error::SignatureMismatch {
                vertex: id.clone(),
                deviation: dev,
            });
        }
        gates.push(gate.clone());
    }

    let connections: Vec<Connection> = transformed
        .internal_edges()
        .iter()
        .map(|(a, b)| {
            (
                (gate_index[a.vertex.as_str()], a.port),
                (gate_index[b.vertex.as_str()], b.port),
            )
        })
        .collect();
    let (h, _signature_nfg) = assemble(&gates, &connections)?;

    let pi = match embedding {
        Some(emb) => fkt_perfmatch(&h, emb)?,
        None => perfmatch_brute(&h)?,
    };
    let direct = n
        .exterior()?
        .scalar_value()
        .expect("closed NFG evaluates to a scalar");
    let dev = max_deviation(&[pi], &[direct]);
    Ok(ReduceReport {
        perfmatch: pi,
        direct,
        max_deviation: dev,
        graph: h,
    })
}
