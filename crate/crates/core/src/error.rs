use thiserror::Error;

/// A single violated NFG invariant, reported by validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("unknown vertex `{0}` referenced by an edge")]
    UnknownVertex(String),
    #[error("port {port} of vertex `{vertex}` is out of range (arity {arity})")]
    PortOutOfRange {
        vertex: String,
        port: usize,
        arity: usize,
    },
    #[error("port {port} of vertex `{vertex}` is not covered by any edge")]
    UncoveredPort { vertex: String, port: usize },
    #[error("port {port} of vertex `{vertex}` is covered by more than one edge")]
    DoubleCoveredPort { vertex: String, port: usize },
    #[error("internal edge {edge} joins ports with mismatched alphabets ({left} vs {right})")]
    EdgeAlphabetMismatch {
        edge: usize,
        left: String,
        right: String,
    },
    #[error("duplicate external label `{0}`")]
    DuplicateExternalLabel(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("group/element arity mismatch: element has {element} residues, group has {group} factors")]
    ArityMismatch { group: usize, element: usize },

    #[error("invalid group literal `{0}`")]
    InvalidGroupLiteral(String),

    #[error("cyclic factor order must be >= 2, got {0}")]
    InvalidGroupOrder(usize),

    #[error("value table has {got} entries, expected {expected}")]
    ValueLengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at flat index {0}")]
    NonFiniteValue(usize),

    #[error("port index {port} out of range for arity {arity}")]
    BadPort { port: usize, arity: usize },

    #[error("port {0} paired more than once in a contraction")]
    PortPairedTwice(usize),

    #[error("paired ports have mismatched alphabets ({left} vs {right})")]
    AlphabetMismatch { left: String, right: String },

    #[error("equality indicator needs arity >= 2, got {0}")]
    DeltaArity(usize),

    #[error("operation requires a group-structured alphabet, got plain alphabet of size {0}")]
    NotGroupAlphabet(usize),

    #[error("invalid NFG:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidNfg(Vec<Violation>),

    #[error("unknown vertex `{0}`")]
    NoSuchVertex(String),

    #[error("no edge with index {0}")]
    NoSuchEdge(usize),

    #[error("elimination order is invalid: {0}")]
    BadEliminationOrder(String),

    #[error("tensor of {needed} entries exceeds the size cap of {cap}")]
    SizeCapExceeded { needed: u128, cap: usize },

    #[error("vertex `{vertex}` does not hold a binary equality indicator: {reason}")]
    NotEquality { vertex: String, reason: String },

    #[error("cannot delete `{vertex}`: {reason}")]
    UndeletableVertex { vertex: String, reason: String },

    #[error("fragment exterior does not match the split vertex `{vertex}` (deviation {deviation:.3e})")]
    SplitMismatch { vertex: String, deviation: f64 },

    #[error("fragment port shape does not match vertex `{vertex}`: {reason}")]
    SplitShapeMismatch { vertex: String, reason: String },

    #[error("functions are not a dual pair (deviation {deviation:.3e} from the equality indicator)")]
    NotDualPair { deviation: f64 },

    #[error("vertices `{v1}` and `{v2}` are not joined by a unique coupling edge")]
    NoCouplingEdge { v1: String, v2: String },

    #[error("dual-pair kernel must be bivariate, got arity {0}")]
    KernelArity(usize),

    #[error("marked factor graph is invalid: {0}")]
    InvalidMarkedGraph(String),

    #[error("internal variable `{0}` has degree 1")]
    DegreeOneInternal(String),

    #[error("matrix is singular (|det| = {det_abs:.3e})")]
    SingularMatrix { det_abs: f64 },

    #[error("transformer must be square: domain size {domain} != codomain size {codomain}")]
    NotSquare { domain: usize, codomain: usize },

    #[error("transformer assignment is missing an entry for port {port} of vertex `{vertex}`")]
    MissingAssignment { vertex: String, port: usize },

    #[error("transformer at port {port} of vertex `{vertex}` does not act on the edge alphabet ({expected} expected, {got} assigned)")]
    AssignmentDomainMismatch {
        vertex: String,
        port: usize,
        expected: String,
        got: String,
    },

    #[error("transformers on internal edge {edge} are not inverse to each other (deviation {deviation:.3e})")]
    NotInversePair { edge: usize, deviation: f64 },

    #[error("transformers on internal edge {edge} have different codomain alphabets")]
    CodomainMismatch { edge: usize },

    #[error("non-group alphabet on edge {0}; dualization needs group-structured variables")]
    NonGroupEdge(String),

    #[error("invalid group code: {0}")]
    InvalidCode(String),

    #[error("local function of vertex `{0}` is not {{0,1}}-valued")]
    NotIndicatorValued(String),

    #[error("exterior function is not proportional to an indicator: {0}")]
    NotProportionalToIndicator(String),

    #[error("exterior support does not match the {which} code ({got} words in support, {expected} expected)")]
    SupportMismatch {
        which: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid weighted graph: {0}")]
    InvalidGraph(String),

    #[error("graph has {0} vertices, above the perfect-matching enumeration cap of {1}")]
    PerfMatchCapExceeded(usize, usize),

    #[error("pfaffian needs an even dimension, got {0}")]
    OddDimension(usize),

    #[error("matrix is not skew-symmetric (max |A + A^T| entry {0:.3e})")]
    NotSkewSymmetric(f64),

    #[error("invalid planar embedding: {0}")]
    InvalidEmbedding(String),

    #[error("invalid matchgate: {0}")]
    InvalidMatchgate(String),

    #[error("invalid assembly: {0}")]
    InvalidAssembly(String),

    #[error("NFG has dangling edges; reduction needs a closed NFG")]
    OpenNfg,

    #[error("edge alphabet on {0} has size {1}; reduction needs binary edges")]
    NonBinaryEdge(String, usize),

    #[error("no matchgate supplied for vertex `{0}`")]
    MissingGate(String),

    #[error("matchgate signature does not match the transformed function at vertex `{vertex}` (deviation {deviation:.3e})")]
    SignatureMismatch { vertex: String, deviation: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
