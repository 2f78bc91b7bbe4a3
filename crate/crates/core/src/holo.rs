//! Separable transformations and holographic transformation of an NFG.
//!
//! A [`Transformer`] is an invertible bivariate kernel on `X x Y` with
//! `|X| = |Y|`; its inverse is the unique kernel making the pair dual with
//! respect to the coupling alphabet `Y`. A [`TransformerAssignment`] gives
//! one transformer per (vertex, port); the two transformers meeting on an
//! internal edge must be inverse to each other, and transformers on dangling
//! edges define the external change of basis.
//!
//! [`holographic_transform`] replaces every local function `f_v` by its
//! contraction with the surrounding kernels, leaving the topology untouched.
//! [`verify_holant`] computes both sides of the identity
//! `Z_transformed(y) = <Z(x), prod_e Phi_e(x_e, y_e)>` (a scalar equality
//! when the NFG is closed) and reports the deviation.

use std::collections::BTreeMap;

use crate::algebra::FiniteAbelianGroup;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nfg::Nfg;
use crate::rewrite::{dual_pair_deviation, RewriteReport};
use crate::tensor::{Alphabet, LocalFunction};
use crate::{max_deviation, C64};

/// An invertible square kernel `Phi(x, y)` from a domain alphabet to an
/// equally sized codomain alphabet. The inverse matrix and a condition
/// estimate are fixed at construction; near-singular kernels are rejected
/// here rather than at transform time.
#[derive(Clone, Debug)]
pub struct Transformer {
    domain: Alphabet,
    codomain: Alphabet,
    values: Vec<C64>,
    inverse: Vec<C64>,
    condition: f64,
}

impl Transformer {
    /// `values` is the row-major `|X| x |Y|` table of `Phi(x, y)`.
    pub fn new(domain: Alphabet, codomain: Alphabet, values: Vec<C64>) -> Result<Self> {
        let n = domain.size();
        if codomain.size() != n {
            return Err(Error::NotSquare {
                domain: n,
                codomain: codomain.size(),
            });
        }
        if values.len() != n * n {
            return Err(Error::ValueLengthMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        let (inverse, det) = linalg::inverse(&values, n)?;
        // reject determinants far below the entry scale
        let scale: f64 = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| values[r * n + c].norm())
                    .fold(0.0, f64::max)
                    .max(1e-300)
            })
            .product();
        if det.norm() < 1e-12 * scale {
            return Err(Error::SingularMatrix {
                det_abs: det.norm(),
            });
        }
        let condition = linalg::inf_norm(&values, n) * linalg::inf_norm(&inverse, n);
        Ok(Transformer {
            domain,
            codomain,
            values,
            inverse,
            condition,
        })
    }

    pub fn identity(alphabet: &Alphabet) -> Self {
        let n = alphabet.size();
        let mut values = vec![C64::new(0.0, 0.0); n * n];
        for k in 0..n {
            values[k * n + k] = C64::new(1.0, 0.0);
        }
        Transformer::new(alphabet.clone(), alphabet.clone(), values).expect("identity")
    }

    pub fn kappa(group: &FiniteAbelianGroup) -> Self {
        let a = Alphabet::Grouped(group.clone());
        Transformer::new(a.clone(), a, group.kappa_matrix()).expect("kappa is invertible")
    }

    pub fn kappa_hat(group: &FiniteAbelianGroup) -> Self {
        let a = Alphabet::Grouped(group.clone());
        Transformer::new(a.clone(), a, group.kappa_hat_matrix()).expect("kappa_hat is invertible")
    }

    pub fn domain(&self) -> &Alphabet {
        &self.domain
    }

    pub fn codomain(&self) -> &Alphabet {
        &self.codomain
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn size(&self) -> usize {
        self.domain.size()
    }

    /// The inverse transformer: the unique kernel dual to this one with
    /// respect to the codomain. As a function on `X x Y` its table is the
    /// transposed matrix inverse, so the pair couples over `Y`.
    pub fn invert(&self) -> Transformer {
        let n = self.size();
        let mut values = vec![C64::new(0.0, 0.0); n * n];
        for x in 0..n {
            for y in 0..n {
                values[x * n + y] = self.inverse[y * n + x];
            }
        }
        let (inverse, _) = linalg::inverse(&values, n).expect("inverse of invertible");
        let condition = linalg::inf_norm(&values, n) * linalg::inf_norm(&inverse, n);
        Transformer {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            values,
            inverse,
            condition,
        }
    }

    /// The kernel as a bivariate local function with ports `[X, Y]`.
    pub fn as_local_function(&self) -> LocalFunction {
        LocalFunction::new(
            vec![self.domain.clone(), self.codomain.clone()],
            self.values.clone(),
        )
        .expect("finite kernel")
    }

    /// Whether `self` and `other` are dual with respect to the codomain.
    pub fn is_inverse_pair(&self, other: &Transformer) -> Result<f64> {
        dual_pair_deviation(&self.as_local_function(), &other.as_local_function(), 1, 1)
    }
}

/// Product alphabet of a sequence of alphabets: the direct product group
/// when all parts are grouped, else a plain alphabet of the product size.
fn product_alphabet(parts: &[&Alphabet]) -> Alphabet {
    if parts.iter().all(|a| a.group().is_some()) {
        let orders: Vec<usize> = parts
            .iter()
            .flat_map(|a| a.group().expect("checked").orders().iter().copied())
            .collect();
        Alphabet::Grouped(FiniteAbelianGroup::new(orders).expect("orders >= 2"))
    } else {
        Alphabet::Plain(parts.iter().map(|a| a.size()).product())
    }
}

/// Kronecker product of the parts, as a transformer on the product alphabet.
/// Index order matches row-major composite indexing, so composing `kappa` on
/// each factor of a direct product gives `kappa` on the product group.
pub fn separable_compose(parts: &[Transformer]) -> Result<Transformer> {
    if parts.is_empty() {
        return Err(Error::Format(
            "separable_compose needs at least one part".into(),
        ));
    }
    let domain = product_alphabet(&parts.iter().map(|t| t.domain()).collect::<Vec<_>>());
    let codomain = product_alphabet(&parts.iter().map(|t| t.codomain()).collect::<Vec<_>>());
    let n: usize = parts.iter().map(|t| t.size()).product();
    let sizes: Vec<usize> = parts.iter().map(|t| t.size()).collect();
    let mut values = vec![C64::new(0.0, 0.0); n * n];
    for x in 0..n {
        for y in 0..n {
            let mut prod = C64::new(1.0, 0.0);
            let mut xr = x;
            let mut yr = y;
            // decode both composite indices factor by factor, last factor
            // least significant
            for k in (0..parts.len()).rev() {
                let s = sizes[k];
                let xi = xr % s;
                let yi = yr % s;
                xr /= s;
                yr /= s;
                prod *= parts[k].values()[xi * s + yi];
            }
            values[x * n + y] = prod;
        }
    }
    Transformer::new(domain, codomain, values)
}

/// One transformer per (vertex id, port index).
#[derive(Clone, Debug, Default)]
pub struct TransformerAssignment {
    entries: BTreeMap<(String, usize), Transformer>,
}

impl TransformerAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, vertex: impl Into<String>, port: usize, t: Transformer) {
        self.entries.insert((vertex.into(), port), t);
    }

    pub fn get(&self, vertex: &str, port: usize) -> Option<&Transformer> {
        self.entries.get(&(vertex.to_string(), port))
    }

    pub fn entries(&self) -> &BTreeMap<(String, usize), Transformer> {
        &self.entries
    }

    /// The all-identity assignment for an NFG.
    pub fn identity_for(n: &Nfg) -> Self {
        let mut a = Self::new();
        for (id, f) in n.vertices() {
            for (port, alphabet) in f.ports().iter().enumerate() {
                a.insert(id.clone(), port, Transformer::identity(alphabet));
            }
        }
        a
    }

    /// Inverts every entry. Internal-edge pairs stay inverse pairs, so the
    /// result is again a valid assignment for the transformed NFG.
    pub fn inverted(&self) -> Self {
        let mut out = Self::new();
        for ((v, p), t) in &self.entries {
            out.insert(v.clone(), *p, t.invert());
        }
        out
    }

    /// Totality, domain agreement, and the inverse-pair condition on every
    /// internal edge.
    pub fn validate_for(&self, n: &Nfg) -> Result<()> {
        for (id, f) in n.vertices() {
            for (port, alphabet) in f.ports().iter().enumerate() {
                let t = self
                    .get(id, port)
                    .ok_or_else(|| Error::MissingAssignment {
                        vertex: id.clone(),
                        port,
                    })?;
                if t.domain() != alphabet {
                    return Err(Error::AssignmentDomainMismatch {
                        vertex: id.clone(),
                        port,
                        expected: alphabet.to_string(),
                        got: t.domain().to_string(),
                    });
                }
            }
        }
        for (k, (a, b)) in n.internal_edges().iter().enumerate() {
            let ta = self.get(&a.vertex, a.port).expect("checked total");
            let tb = self.get(&b.vertex, b.port).expect("checked total");
            if ta.codomain() != tb.codomain() {
                return Err(Error::CodomainMismatch { edge: k });
            }
            let dev = ta.is_inverse_pair(tb)?;
            if dev > 1e-9 {
                return Err(Error::NotInversePair { edge: k, deviation: dev });
            }
        }
        Ok(())
    }
}

/// Applies the holographic transformation: each local function is contracted
/// with its per-port kernels, the topology stays identical, and each edge
/// alphabet becomes the assigned codomain.
pub fn holographic_transform(n: &Nfg, assignment: &TransformerAssignment) -> Result<Nfg> {
    assignment.validate_for(n)?;
    let mut vertices = BTreeMap::new();
    for (id, f) in n.vertices() {
        let mut out = f.clone();
        for port in 0..f.arity() {
            let t = assignment.get(id, port).expect("validated total");
            out = out.axis_transform(port, t.values(), t.codomain().clone())?;
        }
        vertices.insert(id.clone(), out);
    }
    Ok(Nfg::new(
        vertices,
        n.internal_edges().to_vec(),
        n.dangling().to_vec(),
    )?
    .with_size_cap(n.size_cap()))
}

/// Evaluates both sides of the transformation identity by brute force:
/// `before` is the exterior of the original NFG pushed through the dangling
/// transformers, `after` the exterior of the transformed NFG.
pub fn verify_holant(n: &Nfg, assignment: &TransformerAssignment) -> Result<RewriteReport> {
    let transformed = holographic_transform(n, assignment)?;
    let after = transformed.exterior_brute()?;

    let mut before = n.exterior_brute()?;
    for (k, (p, _)) in n.dangling().iter().enumerate() {
        let t = assignment
            .get(&p.vertex, p.port)
            .expect("validated total");
        before = before.axis_transform(k, t.values(), t.codomain().clone())?;
    }
    let dev = max_deviation(before.values(), after.values());
    Ok(RewriteReport {
        before,
        after,
        max_deviation: dev,
    })
}
