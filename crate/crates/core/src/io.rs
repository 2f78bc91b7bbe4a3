//! JSON file formats.
//!
//! NFG documents:
//!
//! ```json
//! {
//!   "alphabets": { "b": "Z2", "t": 3 },
//!   "vertices": {
//!     "f": { "ports": ["b", "b"], "values": [[1, 0], [0, 0], [0, 0], [1, 0]] },
//!     "g": { "ports": ["b", "b"], "values": "delta_eq" }
//!   },
//!   "internal_edges": [ [["f", 0], ["g", 0]] ],
//!   "dangling": [ [["f", 1], "x1"], [["g", 1], "x2"] ]
//! }
//! ```
//!
//! Alphabet literals are group names (`"Z2"`, `"Z2xZ4"`, case-insensitive)
//! or plain sizes (numbers). Vertex values are row-major `[re, im]` pairs or
//! the shorthands `"delta_eq"` / `"delta_plus"`. Marked factor graphs mirror
//! this with per-variable marks; assignments map `"vertex:port"` to a matrix
//! (rows over the edge alphabet), `"identity"`, `"kappa"`, or `"kappa_hat"`;
//! weighted graphs list `[u, v, [re, im]]` edges with an optional rotation
//! system and external vertices. Serialization is deterministic: map keys
//! are sorted and floats print shortest-round-trip.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAbelianGroup;
use crate::duality::GroupCode;
use crate::error::{Error, Result};
use crate::holo::{Transformer, TransformerAssignment};
use crate::nfg::{Nfg, PortRef};
use crate::perfmatch::{Connection, Matchgate, PlanarEmbedding, WeightedGraph};
use crate::rewrite::{Mark, MarkedFactorGraph};
use crate::tensor::{Alphabet, LocalFunction};
use crate::C64;

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(untagged)]
enum AlphabetLit {
    Size(usize),
    Literal(String),
}

impl AlphabetLit {
    fn to_alphabet(&self) -> Result<Alphabet> {
        match self {
            AlphabetLit::Size(n) => {
                if *n == 0 {
                    Err(Error::Format("alphabet size 0".into()))
                } else {
                    Ok(Alphabet::Plain(*n))
                }
            }
            AlphabetLit::Literal(s) => {
                if s.chars().all(|c| c.is_ascii_digit()) && !s.is_empty() {
                    let n: usize = s
                        .parse()
                        .map_err(|_| Error::Format(format!("bad alphabet size `{s}`")))?;
                    if n == 0 {
                        return Err(Error::Format("alphabet size 0".into()));
                    }
                    Ok(Alphabet::Plain(n))
                } else {
                    Ok(Alphabet::Grouped(FiniteAbelianGroup::parse(s)?))
                }
            }
        }
    }

    fn of_alphabet(a: &Alphabet) -> AlphabetLit {
        match a {
            Alphabet::Plain(n) => AlphabetLit::Size(*n),
            Alphabet::Grouped(g) => AlphabetLit::Literal(g.to_string()),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(untagged)]
enum ValuesDoc {
    Shorthand(String),
    Dense(Vec<[f64; 2]>),
}

#[derive(Serialize, Deserialize, Debug)]
struct VertexDoc {
    ports: Vec<String>,
    values: ValuesDoc,
}

#[derive(Serialize, Deserialize, Debug)]
struct NfgDoc {
    alphabets: BTreeMap<String, AlphabetLit>,
    vertices: BTreeMap<String, VertexDoc>,
    #[serde(default)]
    internal_edges: Vec<((String, usize), (String, usize))>,
    #[serde(default)]
    dangling: Vec<((String, usize), String)>,
}

fn resolve_values(ports: &[Alphabet], values: &ValuesDoc) -> Result<LocalFunction> {
    match values {
        ValuesDoc::Dense(pairs) => LocalFunction::new(
            ports.to_vec(),
            pairs.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        ),
        ValuesDoc::Shorthand(name) => match name.as_str() {
            "delta_eq" => {
                if ports.is_empty() || ports.iter().any(|p| p != &ports[0]) {
                    return Err(Error::Format(
                        "delta_eq needs ports with one common alphabet".into(),
                    ));
                }
                LocalFunction::delta_eq(&ports[0], ports.len())
            }
            "delta_plus" => {
                if ports.len() != 2 || ports[0] != ports[1] {
                    return Err(Error::Format(
                        "delta_plus needs two ports with one common alphabet".into(),
                    ));
                }
                let group = ports[0].group().ok_or_else(|| {
                    Error::Format("delta_plus needs a group alphabet".into())
                })?;
                Ok(LocalFunction::delta_plus(group))
            }
            other => Err(Error::Format(format!("unknown value shorthand `{other}`"))),
        },
    }
}

pub fn parse_nfg(json: &str) -> Result<Nfg> {
    let doc: NfgDoc = serde_json::from_str(json)?;
    let mut alphabets = BTreeMap::new();
    for (label, lit) in &doc.alphabets {
        alphabets.insert(label.clone(), lit.to_alphabet()?);
    }
    let mut vertices = BTreeMap::new();
    for (id, v) in &doc.vertices {
        let ports: Vec<Alphabet> = v
            .ports
            .iter()
            .map(|label| {
                alphabets
                    .get(label)
                    .cloned()
                    .ok_or_else(|| Error::Format(format!("unknown alphabet label `{label}`")))
            })
            .collect::<Result<_>>()?;
        vertices.insert(id.clone(), resolve_values(&ports, &v.values)?);
    }
    let internal = doc
        .internal_edges
        .into_iter()
        .map(|((va, pa), (vb, pb))| (PortRef::new(va, pa), PortRef::new(vb, pb)))
        .collect();
    let dangling = doc
        .dangling
        .into_iter()
        .map(|((v, p), label)| (PortRef::new(v, p), label))
        .collect();
    Nfg::new(vertices, internal, dangling)
}

fn alphabet_label(a: &Alphabet) -> String {
    match a {
        Alphabet::Plain(n) => format!("p{n}"),
        Alphabet::Grouped(g) => g.to_string(),
    }
}

pub fn nfg_to_json(n: &Nfg) -> String {
    let mut alphabets: BTreeMap<String, AlphabetLit> = BTreeMap::new();
    let mut vertices = BTreeMap::new();
    for (id, f) in n.vertices() {
        let mut port_labels = Vec::with_capacity(f.arity());
        for a in f.ports() {
            let label = alphabet_label(a);
            alphabets.insert(label.clone(), AlphabetLit::of_alphabet(a));
            port_labels.push(label);
        }
        let values = ValuesDoc::Dense(f.values().iter().map(|z| [z.re, z.im]).collect());
        vertices.insert(
            id.clone(),
            VertexDoc {
                ports: port_labels,
                values,
            },
        );
    }
    let doc = NfgDoc {
        alphabets,
        vertices,
        internal_edges: n
            .internal_edges()
            .iter()
            .map(|(a, b)| ((a.vertex.clone(), a.port), (b.vertex.clone(), b.port)))
            .collect(),
        dangling: n
            .dangling()
            .iter()
            .map(|(p, l)| ((p.vertex.clone(), p.port), l.clone()))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

#[derive(Serialize, Deserialize, Debug)]
struct VariableDoc {
    alphabet: String,
    mark: String,
}

#[derive(Serialize, Deserialize, Debug)]
struct FactorDoc {
    vars: Vec<String>,
    values: ValuesDoc,
}

#[derive(Serialize, Deserialize, Debug)]
struct MarkedDoc {
    alphabets: BTreeMap<String, AlphabetLit>,
    variables: BTreeMap<String, VariableDoc>,
    factors: BTreeMap<String, FactorDoc>,
}

pub fn parse_marked(json: &str) -> Result<MarkedFactorGraph> {
    let doc: MarkedDoc = serde_json::from_str(json)?;
    let mut alphabets = BTreeMap::new();
    for (label, lit) in &doc.alphabets {
        alphabets.insert(label.clone(), lit.to_alphabet()?);
    }
    let mut variables = BTreeMap::new();
    for (name, v) in &doc.variables {
        let alphabet = alphabets
            .get(&v.alphabet)
            .cloned()
            .ok_or_else(|| Error::Format(format!("unknown alphabet label `{}`", v.alphabet)))?;
        let mark = match v.mark.as_str() {
            "internal" => Mark::Internal,
            "external" => Mark::External,
            other => {
                return Err(Error::Format(format!(
                    "mark must be `internal` or `external`, got `{other}`"
                )))
            }
        };
        variables.insert(name.clone(), (alphabet, mark));
    }
    let mut factors = BTreeMap::new();
    for (id, f) in &doc.factors {
        let ports: Vec<Alphabet> = f
            .vars
            .iter()
            .map(|name| {
                variables
                    .get(name)
                    .map(|(a, _)| a.clone())
                    .ok_or_else(|| Error::Format(format!("unknown variable `{name}`")))
            })
            .collect::<Result<_>>()?;
        let fun = resolve_values(&ports, &f.values)?;
        factors.insert(id.clone(), (fun, f.vars.clone()));
    }
    MarkedFactorGraph::new(variables, factors)
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(untagged)]
enum AssignEntryDoc {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
    Extended {
        matrix: Vec<Vec<[f64; 2]>>,
        codomain: AlphabetLit,
    },
}

fn matrix_values(rows: &[Vec<[f64; 2]>], n: usize) -> Result<Vec<C64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!("expected a {n}x{n} matrix")));
    }
    Ok(rows
        .iter()
        .flat_map(|r| r.iter().map(|&[re, im]| C64::new(re, im)))
        .collect())
}

/// Parses an assignment document against the NFG it applies to; the NFG
/// supplies the domain alphabet of every port.
pub fn parse_assignment(json: &str, n: &Nfg) -> Result<TransformerAssignment> {
    let doc: BTreeMap<String, AssignEntryDoc> = serde_json::from_str(json)?;
    let mut assignment = TransformerAssignment::new();
    for (key, entry) in &doc {
        let (vertex, port) = key
            .rsplit_once(':')
            .ok_or_else(|| Error::Format(format!("assignment key `{key}` is not vertex:port")))?;
        let port: usize = port
            .parse()
            .map_err(|_| Error::Format(format!("bad port in assignment key `{key}`")))?;
        let domain = n.port_alphabet(&PortRef::new(vertex, port))?.clone();
        let t = match entry {
            AssignEntryDoc::Named(name) => match name.as_str() {
                "identity" => Transformer::identity(&domain),
                "kappa" => Transformer::kappa(domain.group().ok_or_else(|| {
                    Error::Format(format!("`kappa` on non-group alphabet at `{key}`"))
                })?),
                "kappa_hat" => Transformer::kappa_hat(domain.group().ok_or_else(|| {
                    Error::Format(format!("`kappa_hat` on non-group alphabet at `{key}`"))
                })?),
                other => {
                    return Err(Error::Format(format!(
                        "unknown transformer shorthand `{other}`"
                    )))
                }
            },
            AssignEntryDoc::Matrix(rows) => {
                let values = matrix_values(rows, domain.size())?;
                Transformer::new(domain.clone(), domain.clone(), values)?
            }
            AssignEntryDoc::Extended { matrix, codomain } => {
                let codomain = codomain.to_alphabet()?;
                let values = matrix_values(matrix, domain.size())?;
                Transformer::new(domain.clone(), codomain, values)?
            }
        };
        assignment.insert(vertex.to_string(), port, t);
    }
    Ok(assignment)
}

#[derive(Serialize, Deserialize, Debug)]
struct GraphDoc {
    vertices: usize,
    #[serde(default)]
    edges: Vec<(usize, usize, [f64; 2])>,
    #[serde(default)]
    rotation: Option<BTreeMap<String, Vec<usize>>>,
    #[serde(default)]
    external: Option<Vec<usize>>,
}

fn rotation_from_doc(
    doc: &BTreeMap<String, Vec<usize>>,
    vertex_count: usize,
) -> Result<PlanarEmbedding> {
    let mut rotation = vec![Vec::new(); vertex_count];
    for (key, order) in doc {
        let v: usize = key
            .parse()
            .map_err(|_| Error::Format(format!("bad rotation vertex `{key}`")))?;
        if v >= vertex_count {
            return Err(Error::Format(format!("rotation vertex {v} out of range")));
        }
        rotation[v] = order.clone();
    }
    Ok(PlanarEmbedding::new(rotation))
}

fn graph_from_doc(doc: &GraphDoc) -> Result<(WeightedGraph, Option<PlanarEmbedding>)> {
    let edges = doc
        .edges
        .iter()
        .map(|&(u, v, [re, im])| (u, v, C64::new(re, im)))
        .collect();
    let g = WeightedGraph::new(doc.vertices, edges)?;
    let emb = match &doc.rotation {
        Some(r) => Some(rotation_from_doc(r, doc.vertices)?),
        None => None,
    };
    Ok((g, emb))
}

pub fn parse_graph(json: &str) -> Result<(WeightedGraph, Option<PlanarEmbedding>)> {
    let doc: GraphDoc = serde_json::from_str(json)?;
    graph_from_doc(&doc)
}

pub fn parse_matchgate(json: &str) -> Result<(Matchgate, Option<PlanarEmbedding>)> {
    let doc: GraphDoc = serde_json::from_str(json)?;
    let (g, emb) = graph_from_doc(&doc)?;
    let external = doc.external.clone().unwrap_or_default();
    Ok((Matchgate::new(g, external)?, emb))
}

#[derive(Serialize, Deserialize, Debug)]
struct AssemblyDoc {
    gates: Vec<GraphDoc>,
    #[serde(default)]
    connections: Vec<Connection>,
}

pub fn parse_assembly(json: &str) -> Result<(Vec<Matchgate>, Vec<Connection>)> {
    let doc: AssemblyDoc = serde_json::from_str(json)?;
    let mut gates = Vec::with_capacity(doc.gates.len());
    for g in &doc.gates {
        let (graph, _) = graph_from_doc(g)?;
        gates.push(Matchgate::new(graph, g.external.clone().unwrap_or_default())?);
    }
    Ok((gates, doc.connections))
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(untagged)]
enum AmbientDoc {
    One(String),
    Many(Vec<String>),
}

#[derive(Serialize, Deserialize, Debug)]
struct CodeDoc {
    ambient: AmbientDoc,
    #[serde(default)]
    length: Option<usize>,
    #[serde(default)]
    codewords: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    generators: Option<Vec<Vec<usize>>>,
}

pub fn parse_code(json: &str) -> Result<GroupCode> {
    let doc: CodeDoc = serde_json::from_str(json)?;
    let ambient: Vec<FiniteAbelianGroup> = match &doc.ambient {
        AmbientDoc::One(lit) => {
            let g = FiniteAbelianGroup::parse(lit)?;
            let len = doc.length.ok_or_else(|| {
                Error::Format("a single ambient literal needs a `length`".into())
            })?;
            vec![g; len]
        }
        AmbientDoc::Many(lits) => lits
            .iter()
            .map(|l| FiniteAbelianGroup::parse(l))
            .collect::<Result<_>>()?,
    };
    match (&doc.codewords, &doc.generators) {
        (Some(words), None) => GroupCode::new(ambient, words.clone()),
        (None, Some(gens)) => GroupCode::from_generators(ambient, gens.clone()),
        _ => Err(Error::Format(
            "exactly one of `codewords` or `generators` is required".into(),
        )),
    }
}

#[derive(Serialize, Deserialize, Debug)]
struct GateMapDoc {
    gates: BTreeMap<String, GraphDoc>,
    #[serde(default)]
    rotation: Option<BTreeMap<String, Vec<usize>>>,
    #[serde(default)]
    assembled_vertices: Option<usize>,
}

/// Gate map for reductions: one matchgate per NFG vertex id, plus an
/// optional rotation system for the assembled graph (keyed by its vertex
/// numbering: gates in vertex-id order, each gate's vertices consecutively).
pub fn parse_gate_map(
    json: &str,
) -> Result<(BTreeMap<String, Matchgate>, Option<PlanarEmbedding>)> {
    let doc: GateMapDoc = serde_json::from_str(json)?;
    let mut gates = BTreeMap::new();
    let mut total = 0usize;
    for (id, g) in &doc.gates {
        let (graph, _) = graph_from_doc(g)?;
        total += graph.vertex_count();
        gates.insert(
            id.clone(),
            Matchgate::new(graph, g.external.clone().unwrap_or_default())?,
        );
    }
    let emb = match &doc.rotation {
        Some(r) => Some(rotation_from_doc(
            r,
            doc.assembled_vertices.unwrap_or(total),
        )?),
        None => None,
    };
    Ok((gates, emb))
}

#[derive(Serialize, Deserialize, Debug)]
struct KernelPairDoc {
    phi: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    phihat: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    coupling: Option<AlphabetLit>,
}

/// Parses a dual-kernel document against the edge alphabet it splices into.
/// `phi` has rows over the edge alphabet and columns over the coupling
/// alphabet (defaulting to the edge alphabet); a missing `phihat` is derived
/// by inversion.
pub fn parse_kernel_pair(
    json: &str,
    edge_alphabet: &Alphabet,
) -> Result<(LocalFunction, LocalFunction)> {
    let doc: KernelPairDoc = serde_json::from_str(json)?;
    let coupling = match &doc.coupling {
        Some(lit) => lit.to_alphabet()?,
        None => edge_alphabet.clone(),
    };
    let n = edge_alphabet.size();
    if coupling.size() != n {
        return Err(Error::Format(format!(
            "coupling alphabet size {} does not match the edge alphabet size {n}",
            coupling.size()
        )));
    }
    let phi_values = matrix_values(&doc.phi, n)?;
    let phi = Transformer::new(edge_alphabet.clone(), coupling.clone(), phi_values)?;
    let phihat = match &doc.phihat {
        Some(rows) => {
            let values = matrix_values(rows, n)?;
            LocalFunction::new(vec![edge_alphabet.clone(), coupling], values)?
        }
        None => phi.invert().as_local_function(),
    };
    Ok((phi.as_local_function(), phihat))
}

#[derive(Serialize, Deserialize, Debug)]
struct TensorDoc {
    labels: Vec<String>,
    ports: Vec<AlphabetLit>,
    values: Vec<[f64; 2]>,
}

/// Machine-readable tensor output: external labels, port alphabets, and
/// row-major values.
pub fn tensor_to_json(f: &LocalFunction, labels: &[String]) -> String {
    let doc = TensorDoc {
        labels: labels.to_vec(),
        ports: f.ports().iter().map(AlphabetLit::of_alphabet).collect(),
        values: f.values().iter().map(|z| [z.re, z.im]).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

/// `x` rounded to at most `sig` significant digits, trailing zeros trimmed.
pub fn format_significant(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = sig as i32 - 1 - mag;
    let x = if decimals < 0 {
        let scale = 10f64.powi(-decimals);
        (x / scale).round() * scale
    } else {
        x
    };
    let decimals = decimals.max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Complex formatting `a+bi` with 12 significant digits per part.
pub fn format_complex(z: C64) -> String {
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    let re_s = format_significant(re, 12);
    if im < 0.0 {
        format!("{re_s}-{}i", format_significant(-im, 12))
    } else {
        format!("{re_s}+{}i", format_significant(im, 12))
    }
}
