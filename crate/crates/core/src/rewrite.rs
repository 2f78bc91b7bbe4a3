//! Exterior-function-preserving rewrites.
//!
//! Every procedure here returns a new NFG realizing the same exterior
//! function: grouping a set of vertices into one (summing out the edges
//! between them), splitting a vertex into a fragment NFG that realizes its
//! function, splicing an equality indicator into an edge or removing one,
//! and splicing or removing a dual pair of kernels. Inputs are never
//! mutated. [`verify_preserved`] recomputes both exteriors and reports the
//! deviation; it is opt-in since it costs a full evaluation.
//!
//! [`MarkedFactorGraph`] represents an arbitrary sum-of-products form, and
//! [`MarkedFactorGraph::normalize`] replicates variables until every internal
//! variable has degree two and every external variable degree one, producing
//! a proper NFG.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::nfg::{EdgeRef, Nfg, PortRef};
use crate::tensor::{config_count, for_each_index, Alphabet, LocalFunction};
use crate::{max_deviation, Tolerance, C64};

/// Outcome of an opt-in preservation check: both exterior tensors and their
/// largest relative deviation.
#[derive(Clone, Debug)]
pub struct RewriteReport {
    pub before: LocalFunction,
    pub after: LocalFunction,
    pub max_deviation: f64,
}

/// Recomputes the exterior of both NFGs and compares them entrywise.
pub fn verify_preserved(before: &Nfg, after: &Nfg) -> Result<RewriteReport> {
    let zb = before.exterior()?;
    let za = after.exterior()?;
    if zb.ports() != za.ports() {
        return Err(Error::Format(
            "exterior port shapes differ between the two NFGs".into(),
        ));
    }
    let dev = max_deviation(zb.values(), za.values());
    Ok(RewriteReport {
        before: zb,
        after: za,
        max_deviation: dev,
    })
}

/// Replaces the vertices in `members` by a single vertex holding the
/// exterior function of the induced sub-NFG. Edges leaving the set become
/// the ports of the new vertex; the overall exterior function is unchanged.
pub fn vertex_group(n: &Nfg, members: &BTreeSet<String>, new_id: &str) -> Result<Nfg> {
    if members.is_empty() {
        return Err(Error::Format("vertex_group needs a nonempty set".into()));
    }
    for id in members {
        n.vertex(id)?;
    }

    let in_set = |p: &PortRef| members.contains(&p.vertex);

    // boundary half-edges in deterministic order: crossing internal edges by
    // index, then dangling edges by index
    let mut boundary: Vec<PortRef> = Vec::new();
    for (a, b) in n.internal_edges() {
        match (in_set(a), in_set(b)) {
            (true, false) => boundary.push(a.clone()),
            (false, true) => boundary.push(b.clone()),
            _ => {}
        }
    }
    for (p, _) in n.dangling() {
        if in_set(p) {
            boundary.push(p.clone());
        }
    }

    // the induced sub-NFG: interior edges stay, boundary ports dangle
    let sub_vertices: BTreeMap<String, LocalFunction> = members
        .iter()
        .map(|id| (id.clone(), n.vertex(id).expect("checked").clone()))
        .collect();
    let sub_internal: Vec<(PortRef, PortRef)> = n
        .internal_edges()
        .iter()
        .filter(|(a, b)| in_set(a) && in_set(b))
        .cloned()
        .collect();
    let sub_dangling: Vec<(PortRef, String)> = boundary
        .iter()
        .enumerate()
        .map(|(k, p)| (p.clone(), format!("b{k}")))
        .collect();
    let sub = Nfg::new(sub_vertices, sub_internal, sub_dangling)?.with_size_cap(n.size_cap());
    let grouped = sub.exterior()?;

    let mut vertices: BTreeMap<String, LocalFunction> = n
        .vertices()
        .iter()
        .filter(|(id, _)| !members.contains(*id))
        .map(|(id, f)| (id.clone(), f.clone()))
        .collect();
    if vertices.contains_key(new_id) {
        return Err(Error::Format(format!(
            "vertex id `{new_id}` already exists outside the grouped set"
        )));
    }
    vertices.insert(new_id.to_string(), grouped);

    let boundary_port = |p: &PortRef| -> PortRef {
        let k = boundary.iter().position(|b| b == p).expect("boundary port");
        PortRef::new(new_id, k)
    };
    let map_port = |p: &PortRef| -> PortRef {
        if in_set(p) {
            boundary_port(p)
        } else {
            p.clone()
        }
    };

    let internal: Vec<(PortRef, PortRef)> = n
        .internal_edges()
        .iter()
        .filter(|(a, b)| !(in_set(a) && in_set(b)))
        .map(|(a, b)| (map_port(a), map_port(b)))
        .collect();
    let dangling: Vec<(PortRef, String)> = n
        .dangling()
        .iter()
        .map(|(p, l)| (map_port(p), l.clone()))
        .collect();

    Ok(Nfg::new(vertices, internal, dangling)?.with_size_cap(n.size_cap()))
}

/// Substitutes `fragment` for vertex `v` after verifying that the fragment's
/// exterior function equals the vertex function. Fragment dangling edge `k`
/// (in declared order) takes over whatever covered port `k` of `v`.
///
/// Returns the rewritten NFG and the ids the fragment vertices received.
pub fn vertex_split(n: &Nfg, v: &str, fragment: &Nfg) -> Result<(Nfg, Vec<String>)> {
    let f_v = n.vertex(v)?;
    let frag_ports = fragment.exterior_ports();
    if frag_ports.len() != f_v.arity() {
        return Err(Error::SplitShapeMismatch {
            vertex: v.to_string(),
            reason: format!(
                "fragment has {} dangling edges, vertex has arity {}",
                frag_ports.len(),
                f_v.arity()
            ),
        });
    }
    for (k, (fp, vp)) in frag_ports.iter().zip(f_v.ports()).enumerate() {
        if fp != vp {
            return Err(Error::SplitShapeMismatch {
                vertex: v.to_string(),
                reason: format!("port {k}: fragment {fp}, vertex {vp}"),
            });
        }
    }
    let realized = fragment.exterior()?;
    let dev = max_deviation(realized.values(), f_v.values());
    if !Tolerance::default().close_slices(realized.values(), f_v.values()) {
        return Err(Error::SplitMismatch {
            vertex: v.to_string(),
            deviation: dev,
        });
    }

    // remap fragment vertex ids around collisions with the host
    let mut vertices: BTreeMap<String, LocalFunction> = n
        .vertices()
        .iter()
        .filter(|(id, _)| id.as_str() != v)
        .map(|(id, f)| (id.clone(), f.clone()))
        .collect();
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut new_ids = Vec::new();
    for (fid, fun) in fragment.vertices() {
        let mut candidate = fid.clone();
        if vertices.contains_key(&candidate) {
            candidate = format!("{v}.{fid}");
        }
        let mut k = 0usize;
        while vertices.contains_key(&candidate) {
            candidate = format!("{v}.{fid}.{k}");
            k += 1;
        }
        vertices.insert(candidate.clone(), fun.clone());
        rename.insert(fid.clone(), candidate.clone());
        new_ids.push(candidate);
    }

    let frag_port = |p: &PortRef| PortRef::new(rename[&p.vertex].clone(), p.port);
    // port k of v is replaced by the fragment's k-th dangling attachment
    let splice = |p: &PortRef| -> PortRef {
        if p.vertex == v {
            frag_port(&fragment.dangling()[p.port].0)
        } else {
            p.clone()
        }
    };

    let mut internal: Vec<(PortRef, PortRef)> = n
        .internal_edges()
        .iter()
        .map(|(a, b)| (splice(a), splice(b)))
        .collect();
    internal.extend(
        fragment
            .internal_edges()
            .iter()
            .map(|(a, b)| (frag_port(a), frag_port(b))),
    );
    let dangling: Vec<(PortRef, String)> = n
        .dangling()
        .iter()
        .map(|(p, l)| (splice(p), l.clone()))
        .collect();

    Ok((
        Nfg::new(vertices, internal, dangling)?.with_size_cap(n.size_cap()),
        new_ids,
    ))
}

/// Splices a binary equality indicator into the given edge (regular or
/// dangling). Returns the rewritten NFG and the id of the new vertex.
pub fn equality_insert(n: &Nfg, edge: EdgeRef) -> Result<(Nfg, String)> {
    let alphabet = n.edge_alphabet(edge)?.clone();
    let id = n.fresh_id("eq");
    let eq = LocalFunction::delta_eq(&alphabet, 2)?;

    let mut vertices = n.vertices().clone();
    vertices.insert(id.clone(), eq);
    let mut internal = n.internal_edges().to_vec();
    let mut dangling = n.dangling().to_vec();
    match edge {
        EdgeRef::Internal(k) => {
            let (a, b) = internal[k].clone();
            internal[k] = (a, PortRef::new(id.clone(), 0));
            internal.push((PortRef::new(id.clone(), 1), b));
        }
        EdgeRef::Dangling(k) => {
            let (p, label) = dangling[k].clone();
            dangling[k] = (PortRef::new(id.clone(), 1), label);
            internal.push((p, PortRef::new(id.clone(), 0)));
        }
    }
    Ok((
        Nfg::new(vertices, internal, dangling)?.with_size_cap(n.size_cap()),
        id,
    ))
}

/// What covers a given vertex port.
enum Cover {
    Internal { edge: usize, other: PortRef },
    Dangling { index: usize },
}

fn cover_of(n: &Nfg, p: &PortRef) -> Result<Cover> {
    for (k, (a, b)) in n.internal_edges().iter().enumerate() {
        if a == p {
            return Ok(Cover::Internal {
                edge: k,
                other: b.clone(),
            });
        }
        if b == p {
            return Ok(Cover::Internal {
                edge: k,
                other: a.clone(),
            });
        }
    }
    for (k, (q, _)) in n.dangling().iter().enumerate() {
        if q == p {
            return Ok(Cover::Dangling { index: k });
        }
    }
    Err(Error::NoSuchVertex(p.vertex.clone()))
}

fn is_binary_equality(f: &LocalFunction) -> Option<String> {
    if f.arity() != 2 {
        return Some(format!("arity {} instead of 2", f.arity()));
    }
    if f.ports()[0] != f.ports()[1] {
        return Some("ports carry different alphabets".into());
    }
    let eq = LocalFunction::delta_eq(&f.ports()[0], 2).expect("arity 2");
    if !Tolerance::default().close_slices(f.values(), eq.values()) {
        return Some("values differ from the equality indicator".into());
    }
    None
}

/// Removes vertices and joins the cut edges at the two named open ports.
fn join_after_removal(
    n: &Nfg,
    removed: &BTreeSet<String>,
    open: [&PortRef; 2],
    drop_edges: &BTreeSet<usize>,
) -> Result<Nfg> {
    let c0 = cover_of(n, open[0])?;
    let c1 = cover_of(n, open[1])?;

    let vertices: BTreeMap<String, LocalFunction> = n
        .vertices()
        .iter()
        .filter(|(id, _)| !removed.contains(*id))
        .map(|(id, f)| (id.clone(), f.clone()))
        .collect();

    let mut skip = drop_edges.clone();
    let mut dangling = n.dangling().to_vec();
    let joined: Option<(PortRef, PortRef)> = match (c0, c1) {
        (
            Cover::Internal { edge: e0, other: o0 },
            Cover::Internal { edge: e1, other: o1 },
        ) => {
            if e0 == e1 {
                // the two open ports close on each other; removal would drop
                // a scalar factor
                return Err(Error::UndeletableVertex {
                    vertex: open[0].vertex.clone(),
                    reason: "its open ports are joined by a self-loop".into(),
                });
            }
            skip.insert(e0);
            skip.insert(e1);
            Some((o0, o1))
        }
        (Cover::Internal { edge, other }, Cover::Dangling { index })
        | (Cover::Dangling { index }, Cover::Internal { edge, other }) => {
            skip.insert(edge);
            dangling[index].0 = other;
            None
        }
        (Cover::Dangling { .. }, Cover::Dangling { .. }) => {
            return Err(Error::UndeletableVertex {
                vertex: open[0].vertex.clone(),
                reason: "both ports dangle; the joined edge would have two free ends".into(),
            });
        }
    };

    let mut internal: Vec<(PortRef, PortRef)> = n
        .internal_edges()
        .iter()
        .enumerate()
        .filter(|(k, _)| !skip.contains(k))
        .map(|(_, e)| e.clone())
        .collect();
    if let Some((a, b)) = joined {
        if removed.contains(&a.vertex) || removed.contains(&b.vertex) {
            return Err(Error::UndeletableVertex {
                vertex: open[0].vertex.clone(),
                reason: "the cut edges loop back into the deleted pair".into(),
            });
        }
        internal.push((a, b));
    }
    if let Some((p, _)) = dangling.iter().find(|(p, _)| removed.contains(&p.vertex)) {
        return Err(Error::UndeletableVertex {
            vertex: p.vertex.clone(),
            reason: "a dangling edge still attaches to the deleted pair".into(),
        });
    }
    Ok(Nfg::new(vertices, internal, dangling)?.with_size_cap(n.size_cap()))
}

/// Removes a binary equality vertex and joins the two edges it separated.
pub fn equality_delete(n: &Nfg, v: &str) -> Result<Nfg> {
    let f = n.vertex(v)?;
    if let Some(reason) = is_binary_equality(f) {
        return Err(Error::NotEquality {
            vertex: v.to_string(),
            reason,
        });
    }
    let removed: BTreeSet<String> = [v.to_string()].into();
    join_after_removal(
        n,
        &removed,
        [&PortRef::new(v, 0), &PortRef::new(v, 1)],
        &BTreeSet::new(),
    )
}

/// True iff contracting the two bivariate kernels over their coupling ports
/// yields the equality indicator on the remaining alphabet.
pub fn dual_pair_check(
    phi: &LocalFunction,
    phihat: &LocalFunction,
    phi_coupling: usize,
    phihat_coupling: usize,
) -> Result<bool> {
    Ok(dual_pair_deviation(phi, phihat, phi_coupling, phihat_coupling)? <= 1e-9)
}

/// Deviation of the coupled contraction from the equality indicator.
pub fn dual_pair_deviation(
    phi: &LocalFunction,
    phihat: &LocalFunction,
    phi_coupling: usize,
    phihat_coupling: usize,
) -> Result<f64> {
    if phi.arity() != 2 {
        return Err(Error::KernelArity(phi.arity()));
    }
    if phihat.arity() != 2 {
        return Err(Error::KernelArity(phihat.arity()));
    }
    if phi_coupling > 1 || phihat_coupling > 1 {
        return Err(Error::BadPort {
            port: phi_coupling.max(phihat_coupling),
            arity: 2,
        });
    }
    let x_phi = &phi.ports()[1 - phi_coupling];
    let x_phihat = &phihat.ports()[1 - phihat_coupling];
    if x_phi != x_phihat {
        return Err(Error::AlphabetMismatch {
            left: x_phi.to_string(),
            right: x_phihat.to_string(),
        });
    }
    let product = phi.contract(phihat, &[(phi_coupling, phihat_coupling)])?;
    let eq = LocalFunction::delta_eq(x_phi, 2)?;
    Ok(max_deviation(product.values(), eq.values()))
}

/// Splices a dual pair into the given edge. Both kernels are bivariate with
/// port 0 on the edge alphabet and port 1 on the coupling alphabet; the new
/// edge between them carries the coupling alphabet.
///
/// Returns the rewritten NFG and the two new vertex ids (phi side first).
pub fn dual_vertex_insert(
    n: &Nfg,
    edge: EdgeRef,
    phi: &LocalFunction,
    phihat: &LocalFunction,
) -> Result<(Nfg, String, String)> {
    if phi.arity() != 2 {
        return Err(Error::KernelArity(phi.arity()));
    }
    if phihat.arity() != 2 {
        return Err(Error::KernelArity(phihat.arity()));
    }
    let x = n.edge_alphabet(edge)?.clone();
    if phi.ports()[0] != x || phihat.ports()[0] != x {
        return Err(Error::AlphabetMismatch {
            left: phi.ports()[0].to_string(),
            right: x.to_string(),
        });
    }
    if phi.ports()[1] != phihat.ports()[1] {
        return Err(Error::AlphabetMismatch {
            left: phi.ports()[1].to_string(),
            right: phihat.ports()[1].to_string(),
        });
    }
    let dev = dual_pair_deviation(phi, phihat, 1, 1)?;
    if dev > 1e-9 {
        return Err(Error::NotDualPair { deviation: dev });
    }

    let id_phi = n.fresh_id("phi");
    let mut vertices = n.vertices().clone();
    vertices.insert(id_phi.clone(), phi.clone());
    let mut id_hat = "phihat".to_string();
    let mut k = 0usize;
    while vertices.contains_key(&id_hat) {
        id_hat = format!("phihat{k}");
        k += 1;
    }
    vertices.insert(id_hat.clone(), phihat.clone());

    let mut internal = n.internal_edges().to_vec();
    let mut dangling = n.dangling().to_vec();
    match edge {
        EdgeRef::Internal(e) => {
            let (a, b) = internal[e].clone();
            internal[e] = (a, PortRef::new(id_phi.clone(), 0));
            internal.push((
                PortRef::new(id_phi.clone(), 1),
                PortRef::new(id_hat.clone(), 1),
            ));
            internal.push((PortRef::new(id_hat.clone(), 0), b));
        }
        EdgeRef::Dangling(e) => {
            let (p, label) = dangling[e].clone();
            dangling[e] = (PortRef::new(id_hat.clone(), 0), label);
            internal.push((p, PortRef::new(id_phi.clone(), 0)));
            internal.push((
                PortRef::new(id_phi.clone(), 1),
                PortRef::new(id_hat.clone(), 1),
            ));
        }
    }
    Ok((
        Nfg::new(vertices, internal, dangling)?.with_size_cap(n.size_cap()),
        id_phi,
        id_hat,
    ))
}

/// Removes a dual pair of vertices joined by their coupling edge and joins
/// the two cut edges. The pair is verified, not trusted.
pub fn dual_vertex_delete(n: &Nfg, v1: &str, v2: &str) -> Result<Nfg> {
    if v1 == v2 {
        return Err(Error::NoCouplingEdge {
            v1: v1.to_string(),
            v2: v2.to_string(),
        });
    }
    let f1 = n.vertex(v1)?;
    let f2 = n.vertex(v2)?;
    if f1.arity() != 2 {
        return Err(Error::KernelArity(f1.arity()));
    }
    if f2.arity() != 2 {
        return Err(Error::KernelArity(f2.arity()));
    }

    let mut joining: Vec<(usize, usize, usize)> = Vec::new(); // (edge, v1 port, v2 port)
    for (k, (a, b)) in n.internal_edges().iter().enumerate() {
        if a.vertex == v1 && b.vertex == v2 {
            joining.push((k, a.port, b.port));
        } else if a.vertex == v2 && b.vertex == v1 {
            joining.push((k, b.port, a.port));
        }
    }
    if joining.len() != 1 {
        return Err(Error::NoCouplingEdge {
            v1: v1.to_string(),
            v2: v2.to_string(),
        });
    }
    let (edge, cp1, cp2) = joining[0];
    let dev = dual_pair_deviation(f1, f2, cp1, cp2)?;
    if dev > 1e-9 {
        return Err(Error::NotDualPair { deviation: dev });
    }

    let removed: BTreeSet<String> = [v1.to_string(), v2.to_string()].into();
    let drop: BTreeSet<usize> = [edge].into();
    join_after_removal(
        n,
        &removed,
        [&PortRef::new(v1, 1 - cp1), &PortRef::new(v2, 1 - cp2)],
        &drop,
    )
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mark {
    Internal,
    External,
}

/// An arbitrary sum-of-products form: factors over named variables, each
/// variable marked internal (summed over) or external (kept).
#[derive(Clone, Debug)]
pub struct MarkedFactorGraph {
    variables: BTreeMap<String, (Alphabet, Mark)>,
    factors: BTreeMap<String, (LocalFunction, Vec<String>)>,
}

impl MarkedFactorGraph {
    pub fn new(
        variables: BTreeMap<String, (Alphabet, Mark)>,
        factors: BTreeMap<String, (LocalFunction, Vec<String>)>,
    ) -> Result<Self> {
        let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
        for (fid, (fun, vars)) in &factors {
            if fun.arity() != vars.len() {
                return Err(Error::InvalidMarkedGraph(format!(
                    "factor `{fid}` has arity {} but lists {} variables",
                    fun.arity(),
                    vars.len()
                )));
            }
            for (k, name) in vars.iter().enumerate() {
                let (alphabet, _) = variables.get(name).ok_or_else(|| {
                    Error::InvalidMarkedGraph(format!(
                        "factor `{fid}` references unknown variable `{name}`"
                    ))
                })?;
                if &fun.ports()[k] != alphabet {
                    return Err(Error::InvalidMarkedGraph(format!(
                        "factor `{fid}` port {k} disagrees with variable `{name}` on the alphabet"
                    )));
                }
                *degree.entry(name).or_insert(0) += 1;
            }
        }
        for name in variables.keys() {
            if degree.get(name.as_str()).copied().unwrap_or(0) == 0 {
                return Err(Error::InvalidMarkedGraph(format!(
                    "variable `{name}` appears in no factor"
                )));
            }
        }
        Ok(MarkedFactorGraph { variables, factors })
    }

    pub fn variables(&self) -> &BTreeMap<String, (Alphabet, Mark)> {
        &self.variables
    }

    pub fn factors(&self) -> &BTreeMap<String, (LocalFunction, Vec<String>)> {
        &self.factors
    }

    /// Degree of each variable: the number of factor slots it fills.
    fn degrees(&self) -> BTreeMap<String, usize> {
        let mut degree: BTreeMap<String, usize> = BTreeMap::new();
        for (_, vars) in self.factors.values() {
            for name in vars {
                *degree.entry(name.clone()).or_insert(0) += 1;
            }
        }
        degree
    }

    /// Slots referencing each variable, ordered by factor id then port.
    fn slots(&self) -> BTreeMap<String, Vec<PortRef>> {
        let mut slots: BTreeMap<String, Vec<PortRef>> = BTreeMap::new();
        for (fid, (_, vars)) in &self.factors {
            for (port, name) in vars.iter().enumerate() {
                slots
                    .entry(name.clone())
                    .or_default()
                    .push(PortRef::new(fid.clone(), port));
            }
        }
        slots
    }

    /// Direct summation over all variable configurations, independent of any
    /// NFG machinery. Output ports are the external variables in name order.
    pub fn eval_direct(&self) -> Result<LocalFunction> {
        let names: Vec<&String> = self.variables.keys().collect();
        let position: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(k, n)| (n.as_str(), k))
            .collect();
        let ext: Vec<usize> = names
            .iter()
            .enumerate()
            .filter(|(_, n)| self.variables[**n].1 == Mark::External)
            .map(|(k, _)| k)
            .collect();
        let int: Vec<usize> = names
            .iter()
            .enumerate()
            .filter(|(_, n)| self.variables[**n].1 == Mark::Internal)
            .map(|(k, _)| k)
            .collect();
        let size_of = |k: usize| self.variables[names[k]].0.size();
        let ext_sizes: Vec<usize> = ext.iter().map(|&k| size_of(k)).collect();
        let int_sizes: Vec<usize> = int.iter().map(|&k| size_of(k)).collect();
        let total = config_count(&ext_sizes).saturating_mul(config_count(&int_sizes));
        if total > crate::nfg::DEFAULT_SIZE_CAP as u128 {
            return Err(Error::SizeCapExceeded {
                needed: total,
                cap: crate::nfg::DEFAULT_SIZE_CAP,
            });
        }

        let access: Vec<(&LocalFunction, Vec<usize>)> = self
            .factors
            .values()
            .map(|(fun, vars)| {
                let idx = vars.iter().map(|v| position[v.as_str()]).collect();
                (fun, idx)
            })
            .collect();

        let out_ports: Vec<Alphabet> = ext
            .iter()
            .map(|&k| self.variables[names[k]].0.clone())
            .collect();
        let mut assignment = vec![0usize; names.len()];
        let mut out_values = Vec::new();
        let mut scratch: Vec<usize> = Vec::new();
        for_each_index(&ext_sizes.clone(), |e_idx| {
            for (slot, &var) in ext.iter().enumerate() {
                assignment[var] = e_idx[slot];
            }
            let mut acc = C64::new(0.0, 0.0);
            for_each_index(&int_sizes, |i_idx| {
                for (slot, &var) in int.iter().enumerate() {
                    assignment[var] = i_idx[slot];
                }
                let mut prod = C64::new(1.0, 0.0);
                for (fun, vars) in &access {
                    scratch.clear();
                    scratch.extend(vars.iter().map(|&v| assignment[v]));
                    prod *= fun.value_at(&scratch);
                }
                acc += prod;
            });
            out_values.push(acc);
        });
        LocalFunction::new(out_ports, out_values)
    }

    /// Replicates every variable violating the normal degree restriction
    /// (internal degree two, external degree one) through a fresh equality
    /// vertex; variables already normal map straight onto edges. The result
    /// realizes the same function, with external ports in variable name
    /// order.
    pub fn normalize(&self) -> Result<Nfg> {
        let degrees = self.degrees();
        let slots = self.slots();

        let mut vertices: BTreeMap<String, LocalFunction> = self
            .factors
            .iter()
            .map(|(fid, (fun, _))| (fid.clone(), fun.clone()))
            .collect();
        let mut internal: Vec<(PortRef, PortRef)> = Vec::new();
        let mut dangling: Vec<(PortRef, String)> = Vec::new();

        for (name, (alphabet, mark)) in &self.variables {
            let d = degrees[name];
            let var_slots = &slots[name];
            match (mark, d) {
                (Mark::Internal, 1) => {
                    return Err(Error::DegreeOneInternal(name.clone()));
                }
                (Mark::Internal, 2) => {
                    internal.push((var_slots[0].clone(), var_slots[1].clone()));
                }
                (Mark::Internal, _) => {
                    let eq_id = fresh_key(&vertices, &format!("eq_{name}"));
                    vertices.insert(eq_id.clone(), LocalFunction::delta_eq(alphabet, d)?);
                    for (k, slot) in var_slots.iter().enumerate() {
                        internal.push((slot.clone(), PortRef::new(eq_id.clone(), k)));
                    }
                }
                (Mark::External, 1) => {
                    dangling.push((var_slots[0].clone(), name.clone()));
                }
                (Mark::External, _) => {
                    let eq_id = fresh_key(&vertices, &format!("eq_{name}"));
                    vertices.insert(eq_id.clone(), LocalFunction::delta_eq(alphabet, d + 1)?);
                    for (k, slot) in var_slots.iter().enumerate() {
                        internal.push((slot.clone(), PortRef::new(eq_id.clone(), k)));
                    }
                    dangling.push((PortRef::new(eq_id.clone(), d), name.clone()));
                }
            }
        }
        Nfg::new(vertices, internal, dangling)
    }
}

fn fresh_key(map: &BTreeMap<String, LocalFunction>, base: &str) -> String {
    if !map.contains_key(base) {
        return base.to_string();
    }
    let mut k = 0usize;
    loop {
        let candidate = format!("{base}.{k}");
        if !map.contains_key(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FiniteAbelianGroup;
    use crate::nfg::EvalMode;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn z2() -> Alphabet {
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(2).unwrap())
    }

    fn z3() -> Alphabet {
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(3).unwrap())
    }

    fn vmap(entries: Vec<(&str, LocalFunction)>) -> BTreeMap<String, LocalFunction> {
        entries
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    fn closed_pair() -> Nfg {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(1.0)]).unwrap();
        let g = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        Nfg::new(
            vmap(vec![("f", f), ("g", g)]),
            vec![(PortRef::new("f", 0), PortRef::new("g", 0))],
            vec![],
        )
        .unwrap()
    }

    fn open_pair() -> Nfg {
        // f(x1, s) -- g(s, x2), generic values
        let f = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(-2.0), c(0.5), c(3.0)])
            .unwrap();
        let g = LocalFunction::new(vec![z2(), z2()], vec![c(2.0), c(1.0), c(4.0), c(-1.0)])
            .unwrap();
        Nfg::new(
            vmap(vec![("f", f), ("g", g)]),
            vec![(PortRef::new("f", 1), PortRef::new("g", 0))],
            vec![
                (PortRef::new("f", 0), "x1".into()),
                (PortRef::new("g", 1), "x2".into()),
            ],
        )
        .unwrap()
    }

    fn kappa_fun(g: &FiniteAbelianGroup) -> LocalFunction {
        let a = Alphabet::Grouped(g.clone());
        LocalFunction::new(vec![a.clone(), a], g.kappa_matrix()).unwrap()
    }

    fn kappa_hat_fun(g: &FiniteAbelianGroup) -> LocalFunction {
        let a = Alphabet::Grouped(g.clone());
        LocalFunction::new(vec![a.clone(), a], g.kappa_hat_matrix()).unwrap()
    }

    #[test]
    fn grouping_closed_pair_yields_scalar_three() {
        let n = closed_pair();
        let members: BTreeSet<String> = ["f".to_string(), "g".to_string()].into();
        let grouped = vertex_group(&n, &members, "fg").unwrap();
        assert_eq!(grouped.vertices().len(), 1);
        let f = grouped.vertex("fg").unwrap();
        assert!(f.is_scalar());
        assert!((f.scalar_value().unwrap() - c(3.0)).norm() < 1e-12);
    }

    #[test]
    fn grouping_single_vertex_preserves_everything() {
        let n = open_pair();
        let members: BTreeSet<String> = ["f".to_string()].into();
        let grouped = vertex_group(&n, &members, "f2").unwrap();
        assert_eq!(grouped.vertices().len(), 2);
        let report = verify_preserved(&n, &grouped).unwrap();
        assert!(report.max_deviation < 1e-10);
    }

    #[test]
    fn grouping_everything_reproduces_the_exterior() {
        let n = open_pair();
        let members: BTreeSet<String> = n.vertices().keys().cloned().collect();
        let grouped = vertex_group(&n, &members, "all").unwrap();
        let z = n.exterior_brute().unwrap();
        let f = grouped.vertex("all").unwrap();
        assert!(max_deviation(f.values(), z.values()) < 1e-10);
        let report = verify_preserved(&n, &grouped).unwrap();
        assert!(report.max_deviation < 1e-10);
    }

    #[test]
    fn split_accepts_kappa_chain_for_equality() {
        // an equality vertex splits into kappa joined to kappa_hat
        let g = FiniteAbelianGroup::cyclic(2).unwrap();
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        let host = {
            let f = LocalFunction::new(vec![z2()], vec![c(2.0), c(-1.0)]).unwrap();
            let h = LocalFunction::new(vec![z2()], vec![c(1.0), c(5.0)]).unwrap();
            Nfg::new(
                vmap(vec![("a", f), ("eq", eq), ("b", h)]),
                vec![
                    (PortRef::new("a", 0), PortRef::new("eq", 0)),
                    (PortRef::new("eq", 1), PortRef::new("b", 0)),
                ],
                vec![],
            )
            .unwrap()
        };
        let fragment = Nfg::new(
            vmap(vec![("k", kappa_fun(&g)), ("kh", kappa_hat_fun(&g))]),
            vec![(PortRef::new("k", 1), PortRef::new("kh", 1))],
            vec![
                (PortRef::new("k", 0), "p0".into()),
                (PortRef::new("kh", 0), "p1".into()),
            ],
        )
        .unwrap();
        let (split, new_ids) = vertex_split(&host, "eq", &fragment).unwrap();
        assert_eq!(new_ids.len(), 2);
        let report = verify_preserved(&host, &split).unwrap();
        assert!(report.max_deviation < 1e-10);
    }

    #[test]
    fn split_rejects_wrong_fragment() {
        let host = open_pair();
        // fragment realizing 2 * f instead of f
        let doubled = host.vertex("f").unwrap().scaled(c(2.0));
        let fragment = Nfg::new(
            vmap(vec![("d", doubled)]),
            vec![],
            vec![
                (PortRef::new("d", 0), "p0".into()),
                (PortRef::new("d", 1), "p1".into()),
            ],
        )
        .unwrap();
        assert!(matches!(
            vertex_split(&host, "f", &fragment),
            Err(Error::SplitMismatch { vertex, .. }) if vertex == "f"
        ));
    }

    #[test]
    fn split_then_group_restores_exterior() {
        let host = open_pair();
        let g = FiniteAbelianGroup::cyclic(2).unwrap();
        // fragment: f with a dual pair spliced onto its second port
        let f = host.vertex("f").unwrap().clone();
        let fragment = Nfg::new(
            vmap(vec![
                ("core", f),
                ("k", kappa_fun(&g)),
                ("kh", kappa_hat_fun(&g)),
            ]),
            vec![
                (PortRef::new("core", 1), PortRef::new("k", 0)),
                (PortRef::new("k", 1), PortRef::new("kh", 1)),
            ],
            vec![
                (PortRef::new("core", 0), "p0".into()),
                (PortRef::new("kh", 0), "p1".into()),
            ],
        )
        .unwrap();
        let (split, new_ids) = vertex_split(&host, "f", &fragment).unwrap();
        let report = verify_preserved(&host, &split).unwrap();
        assert!(report.max_deviation < 1e-10);

        let members: BTreeSet<String> = new_ids.into_iter().collect();
        let regrouped = vertex_group(&split, &members, "f").unwrap();
        let report = verify_preserved(&host, &regrouped).unwrap();
        assert!(report.max_deviation < 1e-10);
    }

    #[test]
    fn equality_insert_preserves_closed_pair() {
        let n = closed_pair();
        let (spliced, eq_id) = equality_insert(&n, EdgeRef::Internal(0)).unwrap();
        assert_eq!(spliced.vertices().len(), 3);
        let z = spliced.exterior().unwrap();
        assert!((z.scalar_value().unwrap() - c(3.0)).norm() < 1e-12);

        let deleted = equality_delete(&spliced, &eq_id).unwrap();
        assert_eq!(deleted.vertices().len(), 2);
        assert_eq!(deleted.internal_edges().len(), 1);
        let report = verify_preserved(&n, &deleted).unwrap();
        assert!(report.max_deviation < 1e-12);
    }

    #[test]
    fn equality_insert_into_dangling_edge() {
        let n = open_pair();
        let before = n.exterior_brute().unwrap();
        let (spliced, eq_id) = equality_insert(&n, EdgeRef::Dangling(1)).unwrap();
        let after = spliced.exterior_brute().unwrap();
        assert!(max_deviation(before.values(), after.values()) < 1e-12);

        let deleted = equality_delete(&spliced, &eq_id).unwrap();
        let report = verify_preserved(&n, &deleted).unwrap();
        assert!(report.max_deviation < 1e-12);
    }

    #[test]
    fn equality_delete_rejects_other_vertices() {
        let n = open_pair();
        assert!(matches!(
            equality_delete(&n, "f"),
            Err(Error::NotEquality { .. })
        ));
    }

    #[test]
    fn dual_pair_check_examples() {
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        assert!(dual_pair_check(&eq, &eq, 1, 1).unwrap());

        let g3 = FiniteAbelianGroup::cyclic(3).unwrap();
        assert!(dual_pair_check(&kappa_fun(&g3), &kappa_hat_fun(&g3), 1, 1).unwrap());

        // Hadamard-like kernel against itself gives 2x the identity
        let h = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(1.0), c(1.0), c(-1.0)])
            .unwrap();
        assert!(!dual_pair_check(&h, &h, 1, 1).unwrap());
    }

    #[test]
    fn dual_insert_preserves_and_deletes_back() {
        let n = closed_pair();
        let g = FiniteAbelianGroup::cyclic(2).unwrap();
        let (spliced, id_phi, id_hat) =
            dual_vertex_insert(&n, EdgeRef::Internal(0), &kappa_fun(&g), &kappa_hat_fun(&g))
                .unwrap();
        let z = spliced.exterior().unwrap();
        assert!((z.scalar_value().unwrap() - c(3.0)).norm() < 1e-10);

        let deleted = dual_vertex_delete(&spliced, &id_phi, &id_hat).unwrap();
        let report = verify_preserved(&n, &deleted).unwrap();
        assert!(report.max_deviation < 1e-10);
    }

    #[test]
    fn dual_insert_with_equality_pair() {
        let n = open_pair();
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        let (spliced, _, _) = dual_vertex_insert(&n, EdgeRef::Dangling(0), &eq, &eq).unwrap();
        let report = verify_preserved(&n, &spliced).unwrap();
        assert!(report.max_deviation < 1e-10);
    }

    #[test]
    fn dual_insert_rejects_non_dual_pair() {
        let n = closed_pair();
        let h = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(1.0), c(1.0), c(-1.0)])
            .unwrap();
        assert!(matches!(
            dual_vertex_insert(&n, EdgeRef::Internal(0), &h, &h),
            Err(Error::NotDualPair { .. })
        ));
    }

    fn fig7_marked_graph() -> MarkedFactorGraph {
        // sum over x1, x4 of f1(x1,x2,x3) f2(x1,x3,x4,x5) f3(x1,x3,x4,x5)
        let fun = |arity: usize, seed: f64| {
            LocalFunction::from_fn(vec![z2(); arity], |idx| {
                let mut v = seed;
                for (k, &x) in idx.iter().enumerate() {
                    v += (k as f64 + 0.5) * x as f64;
                }
                C64::new(v, 0.1 * seed * v)
            })
        };
        let variables: BTreeMap<String, (Alphabet, Mark)> = [
            ("x1".to_string(), (z2(), Mark::Internal)),
            ("x2".to_string(), (z2(), Mark::External)),
            ("x3".to_string(), (z2(), Mark::External)),
            ("x4".to_string(), (z2(), Mark::Internal)),
            ("x5".to_string(), (z2(), Mark::External)),
        ]
        .into();
        let factors: BTreeMap<String, (LocalFunction, Vec<String>)> = [
            (
                "f1".to_string(),
                (fun(3, 1.0), vec!["x1".into(), "x2".into(), "x3".into()]),
            ),
            (
                "f2".to_string(),
                (
                    fun(4, 2.0),
                    vec!["x1".into(), "x3".into(), "x4".into(), "x5".into()],
                ),
            ),
            (
                "f3".to_string(),
                (
                    fun(4, 3.0),
                    vec!["x1".into(), "x3".into(), "x4".into(), "x5".into()],
                ),
            ),
        ]
        .into();
        MarkedFactorGraph::new(variables, factors).unwrap()
    }

    #[test]
    fn normalize_replicates_only_where_needed() {
        let m = fig7_marked_graph();
        let n = m.normalize().unwrap();

        // equality vertices: x1 (internal, degree 3) arity 3; x3 (external,
        // degree 3) arity 4; x5 (external, degree 2) arity 3. x4 is internal
        // of degree 2 and stays a plain edge; x2 dangles straight off f1.
        let eq_arities: BTreeMap<&str, usize> = n
            .vertices()
            .iter()
            .filter(|(id, _)| id.starts_with("eq_"))
            .map(|(id, f)| (id.as_str(), f.arity()))
            .collect();
        assert_eq!(eq_arities, [("eq_x1", 3), ("eq_x3", 4), ("eq_x5", 3)].into());
        assert!(n
            .internal_edges()
            .iter()
            .any(|(a, b)| (a.vertex == "f2" && b.vertex == "f3")
                || (a.vertex == "f3" && b.vertex == "f2")));
        assert!(n.dangling().iter().any(|(p, l)| l == "x2" && p.vertex == "f1"));

        let direct = m.eval_direct().unwrap();
        let via_nfg = n.exterior().unwrap();
        assert_eq!(n.exterior_labels(), vec!["x2", "x3", "x5"]);
        assert!(max_deviation(direct.values(), via_nfg.values()) < 1e-10);
        let brute = n.exterior_brute().unwrap();
        assert!(max_deviation(direct.values(), brute.values()) < 1e-10);
    }

    #[test]
    fn normalize_keeps_already_normal_graphs_bare() {
        let variables: BTreeMap<String, (Alphabet, Mark)> = [
            ("s".to_string(), (z2(), Mark::Internal)),
            ("x".to_string(), (z2(), Mark::External)),
            ("y".to_string(), (z3(), Mark::External)),
        ]
        .into();
        let f = LocalFunction::from_fn(vec![z2(), z2()], |i| c(1.0 + (i[0] * 2 + i[1]) as f64));
        let g = LocalFunction::from_fn(vec![z2(), z3()], |i| c(2.0 + (i[0] * 3 + i[1]) as f64));
        let factors: BTreeMap<String, (LocalFunction, Vec<String>)> = [
            ("f".to_string(), (f, vec!["x".into(), "s".into()])),
            ("g".to_string(), (g, vec!["s".into(), "y".into()])),
        ]
        .into();
        let m = MarkedFactorGraph::new(variables, factors).unwrap();
        let n = m.normalize().unwrap();
        assert_eq!(n.vertices().len(), 2);
        assert_eq!(n.internal_edges().len(), 1);
        assert_eq!(n.dangling().len(), 2);
        let direct = m.eval_direct().unwrap();
        let z = n.exterior().unwrap();
        assert!(max_deviation(direct.values(), z.values()) < 1e-12);
    }

    #[test]
    fn normalize_rejects_degree_one_internal() {
        let variables: BTreeMap<String, (Alphabet, Mark)> = [
            ("s".to_string(), (z2(), Mark::Internal)),
            ("x".to_string(), (z2(), Mark::External)),
        ]
        .into();
        let f = LocalFunction::from_fn(vec![z2(), z2()], |i| c((i[0] + i[1]) as f64));
        let factors: BTreeMap<String, (LocalFunction, Vec<String>)> =
            [("f".to_string(), (f, vec!["x".into(), "s".into()]))].into();
        let m = MarkedFactorGraph::new(variables, factors).unwrap();
        assert!(matches!(
            m.normalize(),
            Err(Error::DegreeOneInternal(name)) if name == "s"
        ));
    }

    #[test]
    fn grouping_handles_self_loops_and_multi_edges() {
        // a carries a self-loop; a and b share two parallel edges; b also
        // reaches c across the boundary
        let a = LocalFunction::from_fn(vec![z2(); 4], |i| {
            c(1.0 + (i[0] * 8 + i[1] * 4 + i[2] * 2 + i[3]) as f64)
        });
        let b = LocalFunction::from_fn(vec![z2(); 3], |i| {
            c(-2.0 + (i[0] * 4 + i[1] * 2 + i[2]) as f64 * 0.5)
        });
        let cc = LocalFunction::new(vec![z2()], vec![c(3.0), c(-1.0)]).unwrap();
        let n = Nfg::new(
            vmap(vec![("a", a), ("b", b), ("c", cc)]),
            vec![
                (PortRef::new("a", 0), PortRef::new("a", 1)), // self-loop
                (PortRef::new("a", 2), PortRef::new("b", 0)),
                (PortRef::new("a", 3), PortRef::new("b", 1)),
                (PortRef::new("b", 2), PortRef::new("c", 0)),
            ],
            vec![],
        )
        .unwrap();
        let members: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        let grouped = vertex_group(&n, &members, "ab").unwrap();
        assert_eq!(grouped.vertices().len(), 2);
        assert_eq!(grouped.vertex("ab").unwrap().arity(), 1);
        let report = verify_preserved(&n, &grouped).unwrap();
        assert!(report.max_deviation < 1e-12);
    }

    #[test]
    fn split_a_self_looped_vertex() {
        // v's two ports are joined by one edge; the fragment edges must be
        // rewired onto each other
        let v = LocalFunction::from_fn(vec![z2(), z2()], |i| {
            c(1.0 + (i[0] * 2 + i[1]) as f64)
        });
        let w = LocalFunction::new(vec![z2()], vec![c(2.0), c(5.0)]).unwrap();
        let x = LocalFunction::new(vec![z2()], vec![c(1.0), c(1.0)]).unwrap();
        let n = Nfg::new(
            vmap(vec![("v", v.clone()), ("w", w), ("x", x)]),
            vec![
                (PortRef::new("v", 0), PortRef::new("v", 1)),
                (PortRef::new("w", 0), PortRef::new("x", 0)),
            ],
            vec![],
        )
        .unwrap();
        // fragment: v with an equality vertex on port 0
        let fragment = Nfg::new(
            vmap(vec![
                ("core", v),
                ("eq", LocalFunction::delta_eq(&z2(), 2).unwrap()),
            ]),
            vec![(PortRef::new("core", 0), PortRef::new("eq", 0))],
            vec![
                (PortRef::new("eq", 1), "p0".into()),
                (PortRef::new("core", 1), "p1".into()),
            ],
        )
        .unwrap();
        let (split, _) = vertex_split(&n, "v", &fragment).unwrap();
        let report = verify_preserved(&n, &split).unwrap();
        assert!(report.max_deviation < 1e-12);
    }

    #[test]
    fn dual_delete_rejects_ambiguous_and_dangling_sites() {
        let g = FiniteAbelianGroup::cyclic(2).unwrap();
        // two parallel edges between the kernels: no unique coupling edge
        let twin = Nfg::new(
            vmap(vec![("k", kappa_fun(&g)), ("kh", kappa_hat_fun(&g))]),
            vec![
                (PortRef::new("k", 0), PortRef::new("kh", 0)),
                (PortRef::new("k", 1), PortRef::new("kh", 1)),
            ],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            dual_vertex_delete(&twin, "k", "kh"),
            Err(Error::NoCouplingEdge { .. })
        ));

        // both cut edges dangle: the joined edge would have two free ends
        let open = Nfg::new(
            vmap(vec![("k", kappa_fun(&g)), ("kh", kappa_hat_fun(&g))]),
            vec![(PortRef::new("k", 1), PortRef::new("kh", 1))],
            vec![
                (PortRef::new("k", 0), "x".into()),
                (PortRef::new("kh", 0), "y".into()),
            ],
        )
        .unwrap();
        assert!(matches!(
            dual_vertex_delete(&open, "k", "kh"),
            Err(Error::UndeletableVertex { .. })
        ));
    }

    #[test]
    fn equality_delete_rejects_self_loop() {
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        let n = Nfg::new(
            vmap(vec![("eq", eq), ("f", f.clone()), ("g", f)]),
            vec![
                (PortRef::new("eq", 0), PortRef::new("eq", 1)),
                (PortRef::new("f", 0), PortRef::new("g", 0)),
            ],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            equality_delete(&n, "eq"),
            Err(Error::UndeletableVertex { .. })
        ));
    }

    #[test]
    fn insert_then_delete_is_structurally_identity() {
        let n = open_pair();
        let (spliced, eq_id) = equality_insert(&n, EdgeRef::Internal(0)).unwrap();
        let back = equality_delete(&spliced, &eq_id).unwrap();
        assert_eq!(back.vertices().len(), n.vertices().len());
        assert_eq!(back.internal_edges().len(), n.internal_edges().len());
        assert_eq!(back.dangling().len(), n.dangling().len());
        let a = n.eval_exterior(&EvalMode::Brute).unwrap();
        let b = back.eval_exterior(&EvalMode::Brute).unwrap();
        assert!(max_deviation(a.values(), b.values()) < 1e-12);
    }
}
