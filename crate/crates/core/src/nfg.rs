//! The NFG data model and exterior-function evaluation.
//!
//! An NFG is a set of vertices holding local functions, a set of internal
//! edges (each joining two ports of equal alphabet), and an ordered list of
//! dangling edges carrying unique external labels. The exterior function sums
//! the product of all local functions over every internal-edge variable;
//! the dangling order fixes the port order of the result.
//!
//! Evaluation comes in two modes that must always agree: `Brute` enumerates
//! the full internal configuration space, `Eliminate` contracts internal
//! edges one at a time in a given order (self-loops contract as traces).
//! Intermediate tensors are capped at a configurable entry count and fail
//! loudly beyond it.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result, Violation};
use crate::tensor::{config_count, for_each_index, Alphabet, LocalFunction};
use crate::C64;

/// Default cap on intermediate tensor entries and brute-force configurations.
pub const DEFAULT_SIZE_CAP: usize = 1 << 24;

/// One endpoint of an edge: a vertex id and a port index into its function.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PortRef {
    pub vertex: String,
    pub port: usize,
}

impl PortRef {
    pub fn new(vertex: impl Into<String>, port: usize) -> Self {
        PortRef {
            vertex: vertex.into(),
            port,
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.vertex, self.port)
    }
}

/// Addresses an edge of an NFG by its kind and position.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EdgeRef {
    Internal(usize),
    Dangling(usize),
}

#[derive(Clone, Debug)]
pub enum EvalMode {
    Brute,
    Eliminate(Vec<usize>),
}

/// Vertex functions, internal edges, and labelled dangling edges of an NFG.
pub type NfgParts = (
    BTreeMap<String, LocalFunction>,
    Vec<(PortRef, PortRef)>,
    Vec<(PortRef, String)>,
);

/// A validated normal factor graph.
#[derive(Clone, PartialEq, Debug)]
pub struct Nfg {
    vertices: BTreeMap<String, LocalFunction>,
    internal_edges: Vec<(PortRef, PortRef)>,
    dangling: Vec<(PortRef, String)>,
    size_cap: usize,
}

impl Nfg {
    /// Builds and validates an NFG, reporting every violated invariant.
    pub fn new(
        vertices: BTreeMap<String, LocalFunction>,
        internal_edges: Vec<(PortRef, PortRef)>,
        dangling: Vec<(PortRef, String)>,
    ) -> Result<Self> {
        let mut violations = Vec::new();

        let check_port = |p: &PortRef, violations: &mut Vec<Violation>| -> bool {
            match vertices.get(&p.vertex) {
                None => {
                    violations.push(Violation::UnknownVertex(p.vertex.clone()));
                    false
                }
                Some(f) if p.port >= f.arity() => {
                    violations.push(Violation::PortOutOfRange {
                        vertex: p.vertex.clone(),
                        port: p.port,
                        arity: f.arity(),
                    });
                    false
                }
                Some(_) => true,
            }
        };

        let mut coverage: BTreeMap<PortRef, usize> = BTreeMap::new();
        for (k, (a, b)) in internal_edges.iter().enumerate() {
            let a_ok = check_port(a, &mut violations);
            let b_ok = check_port(b, &mut violations);
            if a_ok {
                *coverage.entry(a.clone()).or_insert(0) += 1;
            }
            if b_ok {
                *coverage.entry(b.clone()).or_insert(0) += 1;
            }
            if a_ok && b_ok {
                let left = &vertices[&a.vertex].ports()[a.port];
                let right = &vertices[&b.vertex].ports()[b.port];
                if left != right {
                    violations.push(Violation::EdgeAlphabetMismatch {
                        edge: k,
                        left: left.to_string(),
                        right: right.to_string(),
                    });
                }
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for (p, label) in &dangling {
            if check_port(p, &mut violations) {
                *coverage.entry(p.clone()).or_insert(0) += 1;
            }
            if !labels.insert(label.clone()) {
                violations.push(Violation::DuplicateExternalLabel(label.clone()));
            }
        }

        for (id, f) in &vertices {
            for port in 0..f.arity() {
                let key = PortRef::new(id.clone(), port);
                match coverage.get(&key).copied().unwrap_or(0) {
                    0 => violations.push(Violation::UncoveredPort {
                        vertex: id.clone(),
                        port,
                    }),
                    1 => {}
                    _ => violations.push(Violation::DoubleCoveredPort {
                        vertex: id.clone(),
                        port,
                    }),
                }
            }
        }

        if !violations.is_empty() {
            return Err(Error::InvalidNfg(violations));
        }
        Ok(Nfg {
            vertices,
            internal_edges,
            dangling,
            size_cap: DEFAULT_SIZE_CAP,
        })
    }

    pub fn with_size_cap(mut self, cap: usize) -> Self {
        self.size_cap = cap;
        self
    }

    pub fn size_cap(&self) -> usize {
        self.size_cap
    }

    pub fn vertices(&self) -> &BTreeMap<String, LocalFunction> {
        &self.vertices
    }

    pub fn vertex(&self, id: &str) -> Result<&LocalFunction> {
        self.vertices
            .get(id)
            .ok_or_else(|| Error::NoSuchVertex(id.to_string()))
    }

    pub fn internal_edges(&self) -> &[(PortRef, PortRef)] {
        &self.internal_edges
    }

    pub fn dangling(&self) -> &[(PortRef, String)] {
        &self.dangling
    }

    pub fn is_closed(&self) -> bool {
        self.dangling.is_empty()
    }

    pub fn into_parts(self) -> NfgParts {
        (self.vertices, self.internal_edges, self.dangling)
    }

    pub fn port_alphabet(&self, p: &PortRef) -> Result<&Alphabet> {
        let f = self.vertex(&p.vertex)?;
        f.ports().get(p.port).ok_or(Error::BadPort {
            port: p.port,
            arity: f.arity(),
        })
    }

    pub fn edge_alphabet(&self, e: EdgeRef) -> Result<&Alphabet> {
        match e {
            EdgeRef::Internal(k) => {
                let (a, _) = self.internal_edges.get(k).ok_or(Error::NoSuchEdge(k))?;
                self.port_alphabet(a)
            }
            EdgeRef::Dangling(k) => {
                let (p, _) = self.dangling.get(k).ok_or(Error::NoSuchEdge(k))?;
                self.port_alphabet(p)
            }
        }
    }

    /// Alphabets of the exterior ports, in dangling order.
    pub fn exterior_ports(&self) -> Vec<Alphabet> {
        self.dangling
            .iter()
            .map(|(p, _)| self.port_alphabet(p).expect("validated").clone())
            .collect()
    }

    /// External labels in dangling order.
    pub fn exterior_labels(&self) -> Vec<String> {
        self.dangling.iter().map(|(_, l)| l.clone()).collect()
    }

    /// A vertex id based on `base` that does not collide with existing ids.
    pub fn fresh_id(&self, base: &str) -> String {
        if !self.vertices.contains_key(base) {
            return base.to_string();
        }
        let mut k = 0usize;
        loop {
            let candidate = format!("{base}{k}");
            if !self.vertices.contains_key(&candidate) {
                return candidate;
            }
            k += 1;
        }
    }

    pub fn eval_exterior(&self, mode: &EvalMode) -> Result<LocalFunction> {
        match mode {
            EvalMode::Brute => self.eval_brute(),
            EvalMode::Eliminate(order) => self.eval_eliminate(order),
        }
    }

    /// Exterior function via greedy elimination in the default order.
    pub fn exterior(&self) -> Result<LocalFunction> {
        self.eval_eliminate(&self.default_elimination_order())
    }

    /// Exterior function by direct summation over all internal configurations.
    pub fn exterior_brute(&self) -> Result<LocalFunction> {
        self.eval_brute()
    }

    fn eval_brute(&self) -> Result<LocalFunction> {
        let ext_count = self.dangling.len();
        let mut slot_of: BTreeMap<PortRef, usize> = BTreeMap::new();
        let mut sizes = Vec::with_capacity(ext_count + self.internal_edges.len());
        let mut out_ports = Vec::with_capacity(ext_count);
        for (k, (p, _)) in self.dangling.iter().enumerate() {
            let a = self.port_alphabet(p)?.clone();
            sizes.push(a.size());
            out_ports.push(a);
            slot_of.insert(p.clone(), k);
        }
        for (k, (a, b)) in self.internal_edges.iter().enumerate() {
            sizes.push(self.port_alphabet(a)?.size());
            slot_of.insert(a.clone(), ext_count + k);
            slot_of.insert(b.clone(), ext_count + k);
        }

        let int_sizes = &sizes[ext_count..];
        let int_configs = config_count(int_sizes);
        if int_configs > self.size_cap as u128 {
            return Err(Error::SizeCapExceeded {
                needed: int_configs,
                cap: self.size_cap,
            });
        }
        let out_len = config_count(&sizes[..ext_count]);
        if out_len > self.size_cap as u128 {
            return Err(Error::SizeCapExceeded {
                needed: out_len,
                cap: self.size_cap,
            });
        }

        // per vertex: (slot, stride) for each port, so a full edge
        // configuration indexes straight into the value table
        let mut access: Vec<(&LocalFunction, Vec<(usize, usize)>)> = Vec::new();
        for (id, f) in &self.vertices {
            let strides = f.strides();
            let mut ports = Vec::with_capacity(f.arity());
            for port in 0..f.arity() {
                let slot = slot_of[&PortRef::new(id.clone(), port)];
                ports.push((slot, strides[port]));
            }
            access.push((f, ports));
        }

        let ext_sizes = sizes[..ext_count].to_vec();
        let int_sizes = sizes[ext_count..].to_vec();
        let mut buf = vec![0usize; sizes.len()];
        let mut out_values = Vec::with_capacity(out_len as usize);
        for_each_index(&ext_sizes, |ext_idx| {
            buf[..ext_count].copy_from_slice(ext_idx);
            let mut acc = C64::new(0.0, 0.0);
            for_each_index(&int_sizes, |int_idx| {
                buf[ext_count..].copy_from_slice(int_idx);
                let mut prod = C64::new(1.0, 0.0);
                for (f, ports) in &access {
                    let mut flat = 0usize;
                    for &(slot, stride) in ports {
                        flat += buf[slot] * stride;
                    }
                    prod *= f.values()[flat];
                }
                acc += prod;
            });
            out_values.push(acc);
        });
        LocalFunction::new(out_ports, out_values)
    }

    fn eval_eliminate(&self, order: &[usize]) -> Result<LocalFunction> {
        let n_edges = self.internal_edges.len();
        if order.len() != n_edges {
            return Err(Error::BadEliminationOrder(format!(
                "order lists {} edges, NFG has {}",
                order.len(),
                n_edges
            )));
        }
        let mut seen = vec![false; n_edges];
        for &e in order {
            if e >= n_edges {
                return Err(Error::BadEliminationOrder(format!("no edge {e}")));
            }
            if seen[e] {
                return Err(Error::BadEliminationOrder(format!("edge {e} repeated")));
            }
            seen[e] = true;
        }

        struct Piece {
            tags: Vec<PortRef>,
            fun: LocalFunction,
        }

        let mut pieces: Vec<Option<Piece>> = Vec::new();
        let mut owner: BTreeMap<PortRef, usize> = BTreeMap::new();
        for (id, f) in &self.vertices {
            let idx = pieces.len();
            let tags: Vec<PortRef> = (0..f.arity())
                .map(|p| PortRef::new(id.clone(), p))
                .collect();
            for t in &tags {
                owner.insert(t.clone(), idx);
            }
            pieces.push(Some(Piece {
                tags,
                fun: f.clone(),
            }));
        }

        // merging two pieces contracts over every edge they share at once,
        // so parallel edges never survive as doubled open axes; edges
        // consumed early are skipped when their turn comes
        let mut done = vec![false; n_edges];
        for &e in order {
            if done[e] {
                continue;
            }
            done[e] = true;
            let (p, q) = &self.internal_edges[e];
            let ip = owner[p];
            let iq = owner[q];
            if ip == iq {
                let piece = pieces[ip].take().expect("live piece");
                let ap = piece.tags.iter().position(|t| t == p).expect("tagged");
                let aq = piece.tags.iter().position(|t| t == q).expect("tagged");
                let fun = piece.fun.trace(ap, aq)?;
                let tags: Vec<PortRef> = piece
                    .tags
                    .into_iter()
                    .enumerate()
                    .filter(|&(k, _)| k != ap && k != aq)
                    .map(|(_, t)| t)
                    .collect();
                owner.remove(p);
                owner.remove(q);
                pieces[ip] = Some(Piece { tags, fun });
            } else {
                let a = pieces[ip].take().expect("live piece");
                let b = pieces[iq].take().expect("live piece");
                // gather every not-yet-consumed edge joining the two pieces
                let mut pairing: Vec<(usize, usize)> = Vec::new();
                let mut shared: u128 = 1;
                for (k, (x, y)) in self.internal_edges.iter().enumerate() {
                    if done[k] && k != e {
                        continue;
                    }
                    let (in_a, in_b) = match (owner.get(x).copied(), owner.get(y).copied()) {
                        (Some(ox), Some(oy)) if ox == ip && oy == iq => (x, y),
                        (Some(ox), Some(oy)) if ox == iq && oy == ip => (y, x),
                        _ => continue,
                    };
                    done[k] = true;
                    let pos_a = a.tags.iter().position(|t| t == in_a).expect("tagged");
                    let pos_b = b.tags.iter().position(|t| t == in_b).expect("tagged");
                    pairing.push((pos_a, pos_b));
                    shared *= a.fun.ports()[pos_a].size() as u128;
                }

                let needed =
                    (a.fun.len() as u128 / shared) * (b.fun.len() as u128 / shared);
                if needed > self.size_cap as u128 {
                    return Err(Error::SizeCapExceeded {
                        needed,
                        cap: self.size_cap,
                    });
                }
                let fun = a.fun.contract(&b.fun, &pairing)?;
                let paired_a: Vec<usize> = pairing.iter().map(|&(x, _)| x).collect();
                let paired_b: Vec<usize> = pairing.iter().map(|&(_, y)| y).collect();
                let mut tags: Vec<PortRef> = Vec::with_capacity(fun.arity());
                for (k, t) in a.tags.into_iter().enumerate() {
                    if !paired_a.contains(&k) {
                        tags.push(t);
                    } else {
                        owner.remove(&t);
                    }
                }
                for (k, t) in b.tags.into_iter().enumerate() {
                    if !paired_b.contains(&k) {
                        tags.push(t);
                    } else {
                        owner.remove(&t);
                    }
                }
                for t in &tags {
                    owner.insert(t.clone(), ip);
                }
                pieces[iq] = None;
                pieces[ip] = Some(Piece { tags, fun });
            }
        }

        // disconnected remainders tensor together
        let mut acc_tags: Vec<PortRef> = Vec::new();
        let mut acc = LocalFunction::scalar(C64::new(1.0, 0.0));
        for piece in pieces.into_iter().flatten() {
            let needed = acc.len() as u128 * piece.fun.len() as u128;
            if needed > self.size_cap as u128 {
                return Err(Error::SizeCapExceeded {
                    needed,
                    cap: self.size_cap,
                });
            }
            acc = acc.contract(&piece.fun, &[])?;
            acc_tags.extend(piece.tags);
        }

        let perm: Vec<usize> = self
            .dangling
            .iter()
            .map(|(p, _)| {
                acc_tags
                    .iter()
                    .position(|t| t == p)
                    .expect("dangling port survives elimination")
            })
            .collect();
        acc.permute(&perm)
    }

    /// A greedy elimination order that always picks the edge whose
    /// contraction yields the smallest intermediate tensor.
    pub fn default_elimination_order(&self) -> Vec<usize> {
        let ids: Vec<&String> = self.vertices.keys().collect();
        let index_of: BTreeMap<&String, usize> = ids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        // union-find over vertices, tracking each group's open tensor size
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        let mut size: Vec<u128> = ids
            .iter()
            .map(|id| self.vertices[*id].len() as u128)
            .collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }

        let mut remaining: Vec<usize> = (0..self.internal_edges.len()).collect();
        let mut order = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let mut best: Option<(u128, usize, usize)> = None; // (cost, pos, edge)
            for (pos, &e) in remaining.iter().enumerate() {
                let (p, q) = &self.internal_edges[e];
                let s = self.port_alphabet(p).expect("validated").size() as u128;
                let rp = find(&mut parent, index_of[&p.vertex]);
                let rq = find(&mut parent, index_of[&q.vertex]);
                let cost = if rp == rq {
                    size[rp] / (s * s)
                } else {
                    (size[rp] / s) * (size[rq] / s)
                };
                if best.is_none_or(|(c, _, be)| cost < c || (cost == c && e < be)) {
                    best = Some((cost, pos, e));
                }
            }
            let (cost, pos, e) = best.expect("nonempty");
            let (p, q) = &self.internal_edges[e];
            let rp = find(&mut parent, index_of[&p.vertex]);
            let rq = find(&mut parent, index_of[&q.vertex]);
            if rp == rq {
                size[rp] = cost;
            } else {
                parent[rq] = rp;
                size[rp] = cost;
            }
            remaining.swap_remove(pos);
            order.push(e);
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FiniteAbelianGroup;
    use crate::max_deviation;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn z2() -> Alphabet {
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(2).unwrap())
    }

    fn vmap(entries: Vec<(&str, LocalFunction)>) -> BTreeMap<String, LocalFunction> {
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// f = (1, 1) and g = (1, 2) joined on one binary edge; Z = 3.
    pub(crate) fn closed_pair() -> Nfg {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(1.0)]).unwrap();
        let g = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        Nfg::new(
            vmap(vec![("f", f), ("g", g)]),
            vec![(PortRef::new("f", 0), PortRef::new("g", 0))],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn build_accepts_two_dangling_ports() {
        let f = LocalFunction::new(vec![z2(), z2()], vec![c(1.0); 4]).unwrap();
        let n = Nfg::new(
            vmap(vec![("f", f)]),
            vec![],
            vec![
                (PortRef::new("f", 0), "x1".into()),
                (PortRef::new("f", 1), "x2".into()),
            ],
        );
        assert!(n.is_ok());
    }

    #[test]
    fn build_reports_uncovered_port() {
        let f = LocalFunction::new(vec![z2(), z2()], vec![c(1.0); 4]).unwrap();
        let err = Nfg::new(
            vmap(vec![("f", f)]),
            vec![],
            vec![(PortRef::new("f", 0), "x1".into())],
        )
        .unwrap_err();
        match err {
            Error::InvalidNfg(v) => assert!(v.contains(&Violation::UncoveredPort {
                vertex: "f".into(),
                port: 1
            })),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn build_reports_alphabet_mismatch() {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0); 2]).unwrap();
        let g = LocalFunction::new(vec![Alphabet::Plain(3)], vec![c(1.0); 3]).unwrap();
        let err = Nfg::new(
            vmap(vec![("f", f), ("g", g)]),
            vec![(PortRef::new("f", 0), PortRef::new("g", 0))],
            vec![],
        )
        .unwrap_err();
        match err {
            Error::InvalidNfg(v) => assert!(v
                .iter()
                .any(|x| matches!(x, Violation::EdgeAlphabetMismatch { .. }))),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn build_reports_every_violation_at_once() {
        let f = LocalFunction::new(vec![z2(), z2()], vec![c(1.0); 4]).unwrap();
        let err = Nfg::new(
            vmap(vec![("f", f)]),
            vec![(PortRef::new("f", 0), PortRef::new("ghost", 0))],
            vec![
                (PortRef::new("f", 0), "x".into()),
                (PortRef::new("f", 5), "x".into()),
            ],
        )
        .unwrap_err();
        match err {
            Error::InvalidNfg(v) => {
                assert!(v.iter().any(|x| matches!(x, Violation::UnknownVertex(_))));
                assert!(v.iter().any(|x| matches!(x, Violation::PortOutOfRange { .. })));
                assert!(v.iter().any(|x| matches!(x, Violation::DoubleCoveredPort { .. })));
                assert!(v
                    .iter()
                    .any(|x| matches!(x, Violation::DuplicateExternalLabel(_))));
                assert!(v.iter().any(|x| matches!(x, Violation::UncoveredPort { .. })));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn closed_pair_evaluates_to_three() {
        let n = closed_pair();
        for mode in [EvalMode::Brute, EvalMode::Eliminate(vec![0])] {
            let z = n.eval_exterior(&mode).unwrap();
            assert!(z.is_scalar());
            assert!((z.scalar_value().unwrap() - c(3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_factor_passes_function_through() {
        // chain f(x1, s) -- g(s, x2) with f = delta_eq realizes g itself
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        let g = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(2.0), c(3.0), c(4.0)])
            .unwrap();
        let n = Nfg::new(
            vmap(vec![("f", eq), ("g", g.clone())]),
            vec![(PortRef::new("f", 1), PortRef::new("g", 0))],
            vec![
                (PortRef::new("f", 0), "x1".into()),
                (PortRef::new("g", 1), "x2".into()),
            ],
        )
        .unwrap();
        let z = n.exterior_brute().unwrap();
        assert!(max_deviation(z.values(), g.values()) < 1e-12);
        let z2v = n.exterior().unwrap();
        assert!(max_deviation(z2v.values(), g.values()) < 1e-12);
    }

    /// The five-vertex NFG: f1(x1,x3,x4) f2(x3,x5,x6) f3(x2,x4,x5,x7,x8)
    /// f4(x6,x7,x9) f5(x8,x9), dangling x1 and x2.
    fn five_vertex_example() -> Nfg {
        let a = z2();
        let fun = |arity: usize, seed: f64| {
            LocalFunction::from_fn(vec![a.clone(); arity], |idx| {
                let mut v = seed;
                for (k, &x) in idx.iter().enumerate() {
                    v += (k as f64 + 1.0) * x as f64;
                }
                C64::new(v, 0.25 * v)
            })
        };
        Nfg::new(
            vmap(vec![
                ("f1", fun(3, 1.0)),
                ("f2", fun(3, 2.0)),
                ("f3", fun(5, 3.0)),
                ("f4", fun(3, 4.0)),
                ("f5", fun(2, 5.0)),
            ]),
            vec![
                (PortRef::new("f1", 1), PortRef::new("f2", 0)), // x3
                (PortRef::new("f1", 2), PortRef::new("f3", 1)), // x4
                (PortRef::new("f2", 1), PortRef::new("f3", 2)), // x5
                (PortRef::new("f2", 2), PortRef::new("f4", 0)), // x6
                (PortRef::new("f3", 3), PortRef::new("f4", 1)), // x7
                (PortRef::new("f3", 4), PortRef::new("f5", 0)), // x8
                (PortRef::new("f4", 2), PortRef::new("f5", 1)), // x9
            ],
            vec![
                (PortRef::new("f1", 0), "x1".into()),
                (PortRef::new("f3", 0), "x2".into()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn five_vertex_example_has_expected_exterior_ports() {
        let n = five_vertex_example();
        let z = n.exterior().unwrap();
        assert_eq!(z.arity(), 2);
        assert_eq!(n.exterior_labels(), vec!["x1".to_string(), "x2".to_string()]);
        let brute = n.exterior_brute().unwrap();
        assert!(max_deviation(z.values(), brute.values()) < 1e-10);
    }

    #[test]
    fn elimination_order_independence() {
        let n = five_vertex_example();
        let reference = n.exterior_brute().unwrap();
        let orders: Vec<Vec<usize>> = vec![
            (0..7).collect(),
            (0..7).rev().collect(),
            vec![3, 1, 4, 0, 6, 2, 5],
            n.default_elimination_order(),
        ];
        for order in orders {
            let z = n.eval_exterior(&EvalMode::Eliminate(order)).unwrap();
            assert_eq!(z.ports(), reference.ports());
            assert!(max_deviation(z.values(), reference.values()) < 1e-10);
        }
    }

    mod order_properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn any_elimination_order_matches_brute(
                order in Just((0..7usize).collect::<Vec<_>>()).prop_shuffle()
            ) {
                let n = five_vertex_example();
                let reference = n.exterior_brute().unwrap();
                let z = n.eval_exterior(&EvalMode::Eliminate(order)).unwrap();
                prop_assert!(max_deviation(z.values(), reference.values()) < 1e-10);
            }
        }
    }

    #[test]
    fn self_loop_contracts_as_trace() {
        let m = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(2.0), c(3.0), c(4.0)])
            .unwrap();
        let n = Nfg::new(
            vmap(vec![("f", m)]),
            vec![(PortRef::new("f", 0), PortRef::new("f", 1))],
            vec![],
        )
        .unwrap();
        for mode in [EvalMode::Brute, EvalMode::Eliminate(vec![0])] {
            let z = n.eval_exterior(&mode).unwrap();
            assert!((z.scalar_value().unwrap() - c(5.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn multi_edge_pair_contracts_both_axes() {
        let f = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(2.0), c(3.0), c(4.0)])
            .unwrap();
        let g = LocalFunction::new(vec![z2(), z2()], vec![c(5.0), c(6.0), c(7.0), c(8.0)])
            .unwrap();
        let n = Nfg::new(
            vmap(vec![("f", f.clone()), ("g", g.clone())]),
            vec![
                (PortRef::new("f", 0), PortRef::new("g", 0)),
                (PortRef::new("f", 1), PortRef::new("g", 1)),
            ],
            vec![],
        )
        .unwrap();
        let want: C64 = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| a * b)
            .sum();
        for mode in [EvalMode::Brute, EvalMode::Eliminate(vec![0, 1]), EvalMode::Eliminate(vec![1, 0])] {
            let z = n.eval_exterior(&mode).unwrap();
            assert!((z.scalar_value().unwrap() - want).norm() < 1e-12);
        }
    }

    #[test]
    fn disconnected_components_tensor_together() {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        let g = LocalFunction::new(vec![z2()], vec![c(3.0), c(5.0)]).unwrap();
        let n = Nfg::new(
            vmap(vec![("a", f.clone()), ("b", g.clone())]),
            vec![],
            vec![
                (PortRef::new("b", 0), "y".into()),
                (PortRef::new("a", 0), "x".into()),
            ],
        )
        .unwrap();
        let z = n.exterior().unwrap();
        let brute = n.exterior_brute().unwrap();
        assert!(max_deviation(z.values(), brute.values()) < 1e-12);
        // dangling order decides the port order: y before x
        assert_eq!(z.value_at(&[0, 1]), c(3.0) * c(2.0));
    }

    #[test]
    fn default_order_covers_every_edge() {
        let n = five_vertex_example();
        let mut order = n.default_elimination_order();
        assert_eq!(order.len(), 7);
        order.sort_unstable();
        assert_eq!(order, (0..7).collect::<Vec<_>>());

        let single = Nfg::new(
            vmap(vec![(
                "f",
                LocalFunction::new(vec![z2()], vec![c(1.0), c(0.0)]).unwrap(),
            )]),
            vec![],
            vec![(PortRef::new("f", 0), "x".into())],
        )
        .unwrap();
        assert!(single.default_elimination_order().is_empty());
    }

    #[test]
    fn path_of_three_vertices_has_order_of_length_two() {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        let m = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(0.5), c(2.0), c(1.5)])
            .unwrap();
        let n = Nfg::new(
            vmap(vec![("a", f.clone()), ("b", m), ("c", f)]),
            vec![
                (PortRef::new("a", 0), PortRef::new("b", 0)),
                (PortRef::new("b", 1), PortRef::new("c", 0)),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(n.default_elimination_order().len(), 2);
        let z = n.exterior().unwrap();
        let brute = n.exterior_brute().unwrap();
        assert!((z.scalar_value().unwrap() - brute.scalar_value().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn bad_elimination_orders_are_rejected() {
        let n = closed_pair();
        assert!(matches!(
            n.eval_exterior(&EvalMode::Eliminate(vec![])),
            Err(Error::BadEliminationOrder(_))
        ));
        assert!(matches!(
            n.eval_exterior(&EvalMode::Eliminate(vec![0, 0])),
            Err(Error::BadEliminationOrder(_))
        ));
        assert!(matches!(
            n.eval_exterior(&EvalMode::Eliminate(vec![1])),
            Err(Error::BadEliminationOrder(_))
        ));
    }

    #[test]
    fn size_cap_fails_loudly() {
        let n = closed_pair().with_size_cap(1);
        assert!(matches!(
            n.eval_exterior(&EvalMode::Brute),
            Err(Error::SizeCapExceeded { .. })
        ));
    }

    #[test]
    fn scalar_vertex_is_allowed() {
        let n = Nfg::new(
            vmap(vec![("s", LocalFunction::scalar(c(7.0)))]),
            vec![],
            vec![],
        )
        .unwrap();
        let z = n.exterior().unwrap();
        assert_eq!(z.scalar_value().unwrap(), c(7.0));
        let zb = n.exterior_brute().unwrap();
        assert_eq!(zb.scalar_value().unwrap(), c(7.0));
    }
}
