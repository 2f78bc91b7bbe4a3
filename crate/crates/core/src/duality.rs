//! NFG dualization and code duality.
//!
//! Dualizing an NFG Fourier-transforms every local function and splices an
//! additive-inverse indicator into every internal edge; under the character
//! identification the edge alphabets stay the same concrete groups. The
//! exteriors then satisfy `Z_dual = |X_int| * F[Z]` with `|X_int|` the
//! product of the internal edge alphabet sizes; [`verify_duality`] checks
//! this numerically.
//!
//! [`GroupCode`] is an explicit group code over a sequence of symbol groups.
//! A code NFG (all local functions {0,1}-valued, exterior proportional to a
//! code indicator) dualizes, up to scale, to the indicator of the dual code;
//! [`verify_code_duality`] measures both scale constants against the
//! brute-force dual.

use std::collections::BTreeMap;

use crate::algebra::{fourier, FiniteAbelianGroup, FourierDirection};
use crate::error::{Error, Result};
use crate::nfg::{Nfg, PortRef};
use crate::tensor::{config_count, for_each_index, Alphabet, LocalFunction};
use crate::{max_deviation, C64};

/// Scale constant used and largest deviation observed by a duality check.
#[derive(Clone, Debug)]
pub struct DualityReport {
    pub scale: f64,
    pub max_deviation: f64,
    pub dual_exterior: LocalFunction,
    pub scaled_fourier: LocalFunction,
}

/// The dual NFG: every vertex Fourier-transformed, every internal edge
/// spliced with an additive-inverse indicator. Fails on any plain (non-group)
/// edge alphabet.
pub fn dualize(n: &Nfg) -> Result<Nfg> {
    for (k, (a, _)) in n.internal_edges().iter().enumerate() {
        if n.port_alphabet(a)?.group().is_none() {
            return Err(Error::NonGroupEdge(format!("internal {k}")));
        }
    }
    for (p, label) in n.dangling() {
        if n.port_alphabet(p)?.group().is_none() {
            return Err(Error::NonGroupEdge(format!("dangling `{label}`")));
        }
    }

    let mut vertices: BTreeMap<String, LocalFunction> = BTreeMap::new();
    for (id, f) in n.vertices() {
        vertices.insert(id.clone(), fourier(f, FourierDirection::Forward)?);
    }

    let mut internal: Vec<(PortRef, PortRef)> = Vec::new();
    for (k, (a, b)) in n.internal_edges().iter().enumerate() {
        let group = n.port_alphabet(a)?.group().expect("checked").clone();
        // fix endpoint order for reproducible serialization
        let (first, second) = if (a.vertex.as_str(), a.port) <= (b.vertex.as_str(), b.port) {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        let mut id = format!("dplus{k}");
        let mut bump = 0usize;
        while vertices.contains_key(&id) {
            id = format!("dplus{k}.{bump}");
            bump += 1;
        }
        vertices.insert(id.clone(), LocalFunction::delta_plus(&group));
        internal.push((first, PortRef::new(id.clone(), 0)));
        internal.push((PortRef::new(id, 1), second));
    }

    Ok(Nfg::new(vertices, internal, n.dangling().to_vec())?.with_size_cap(n.size_cap()))
}

/// Product of the internal edge alphabet sizes.
pub fn internal_space_size(n: &Nfg) -> Result<f64> {
    let mut s = 1.0;
    for (a, _) in n.internal_edges() {
        s *= n.port_alphabet(a)?.size() as f64;
    }
    Ok(s)
}

/// Checks `Z_dual = |X_int| * F[Z]` entrywise by evaluating both sides.
pub fn verify_duality(n: &Nfg) -> Result<DualityReport> {
    let dual = dualize(n)?;
    let dual_exterior = dual.exterior()?;

    let scale = internal_space_size(n)?;
    let z = n.exterior()?;
    let fz = if z.is_scalar() {
        z
    } else {
        fourier(&z, FourierDirection::Forward)?
    };
    let scaled_fourier = fz.scaled(C64::new(scale, 0.0));

    let max_deviation = max_deviation(dual_exterior.values(), scaled_fourier.values());
    Ok(DualityReport {
        scale,
        max_deviation,
        dual_exterior,
        scaled_fourier,
    })
}

/// An explicit group code: ambient symbol groups and the codeword set,
/// stored as per-position element indices in sorted order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupCode {
    ambient: Vec<FiniteAbelianGroup>,
    codewords: Vec<Vec<usize>>,
}

impl GroupCode {
    /// Validates membership, presence of zero, and closure under addition
    /// and negation.
    pub fn new(ambient: Vec<FiniteAbelianGroup>, codewords: Vec<Vec<usize>>) -> Result<Self> {
        let mut words = codewords;
        for w in &words {
            if w.len() != ambient.len() {
                return Err(Error::InvalidCode(format!(
                    "codeword has {} symbols, ambient has {} positions",
                    w.len(),
                    ambient.len()
                )));
            }
            for (x, g) in w.iter().zip(&ambient) {
                if *x >= g.size() {
                    return Err(Error::InvalidCode(format!(
                        "symbol index {x} outside group {g}"
                    )));
                }
            }
        }
        words.sort_unstable();
        words.dedup();

        let code = GroupCode {
            ambient,
            codewords: words,
        };
        if !code.contains(&vec![0; code.ambient.len()]) {
            return Err(Error::InvalidCode("zero word missing".into()));
        }
        for a in &code.codewords {
            let neg = code.neg_word(a);
            if !code.contains(&neg) {
                return Err(Error::InvalidCode("not closed under negation".into()));
            }
            for b in &code.codewords {
                let sum = code.add_words(a, b);
                if !code.contains(&sum) {
                    return Err(Error::InvalidCode("not closed under addition".into()));
                }
            }
        }
        Ok(code)
    }

    /// The subgroup generated by the given words.
    pub fn from_generators(
        ambient: Vec<FiniteAbelianGroup>,
        generators: Vec<Vec<usize>>,
    ) -> Result<Self> {
        for w in &generators {
            if w.len() != ambient.len() {
                return Err(Error::InvalidCode(format!(
                    "generator has {} symbols, ambient has {} positions",
                    w.len(),
                    ambient.len()
                )));
            }
            for (x, g) in w.iter().zip(&ambient) {
                if *x >= g.size() {
                    return Err(Error::InvalidCode(format!(
                        "symbol index {x} outside group {g}"
                    )));
                }
            }
        }
        let proto = GroupCode {
            ambient,
            codewords: vec![],
        };
        let zero = vec![0; proto.ambient.len()];
        let mut words: Vec<Vec<usize>> = vec![zero];
        let mut frontier = words.clone();
        while let Some(w) = frontier.pop() {
            for g in &generators {
                let next = proto.add_words(&w, g);
                if let Err(pos) = words.binary_search(&next) {
                    words.insert(pos, next.clone());
                    frontier.push(next);
                }
            }
        }
        GroupCode::new(proto.ambient, words)
    }

    fn add_words(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
        a.iter()
            .zip(b)
            .zip(&self.ambient)
            .map(|((&x, &y), g)| {
                let ex = g.element_of_index(x);
                let ey = g.element_of_index(y);
                g.index_of(&g.add(&ex, &ey).expect("same group"))
                    .expect("same group")
            })
            .collect()
    }

    fn neg_word(&self, a: &[usize]) -> Vec<usize> {
        a.iter()
            .zip(&self.ambient)
            .map(|(&x, g)| g.neg_index(x))
            .collect()
    }

    pub fn contains(&self, word: &Vec<usize>) -> bool {
        self.codewords.binary_search(word).is_ok()
    }

    pub fn ambient(&self) -> &[FiniteAbelianGroup] {
        &self.ambient
    }

    pub fn codewords(&self) -> &[Vec<usize>] {
        &self.codewords
    }

    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn ambient_size(&self) -> u128 {
        self.ambient.iter().map(|g| g.size() as u128).product()
    }

    /// The indicator function of the code, one grouped port per position.
    pub fn indicator(&self) -> LocalFunction {
        let ports: Vec<Alphabet> = self
            .ambient
            .iter()
            .map(|g| Alphabet::Grouped(g.clone()))
            .collect();
        LocalFunction::from_fn(ports, |idx| {
            if self.contains(&idx.to_vec()) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Exact pairing-orthogonality test between two words, in integer
    /// arithmetic: the phase `sum x_j*y_j/n_j` must be an integer.
    fn orthogonal(&self, a: &[usize], b: &[usize]) -> bool {
        let mut lcm: u64 = 1;
        for g in &self.ambient {
            for &n in g.orders() {
                lcm = lcm / gcd(lcm, n as u64) * n as u64;
            }
        }
        let mut num: u64 = 0;
        for ((&x, &y), g) in a.iter().zip(b).zip(&self.ambient) {
            let ex = g.element_of_index(x);
            let ey = g.element_of_index(y);
            for ((&xr, &yr), &n) in ex.residues().iter().zip(ey.residues()).zip(g.orders()) {
                let n = n as u64;
                num = (num + (xr as u64 * yr as u64 % n) * (lcm / n)) % lcm;
            }
        }
        num == 0
    }

    /// The dual code by exhaustive scan of the ambient space.
    pub fn dual_brute(&self) -> Result<GroupCode> {
        let total = self.ambient_size();
        if total > 1_000_000 {
            return Err(Error::SizeCapExceeded {
                needed: total,
                cap: 1_000_000,
            });
        }
        let sizes: Vec<usize> = self.ambient.iter().map(|g| g.size()).collect();
        debug_assert_eq!(config_count(&sizes), total);
        let mut dual_words = Vec::new();
        for_each_index(&sizes, |candidate| {
            if self.codewords.iter().all(|w| self.orthogonal(w, candidate)) {
                dual_words.push(candidate.to_vec());
            }
        });
        GroupCode::new(self.ambient.clone(), dual_words)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Result of checking a code NFG against a claimed code and its dual.
#[derive(Clone, Debug)]
pub struct CodeDualityReport {
    /// Uniform value of the exterior on the claimed codewords.
    pub primal_scale: C64,
    /// Uniform value of the dual exterior on the dual codewords.
    pub dual_scale: C64,
    pub code_size: usize,
    pub dual_size: usize,
    pub max_deviation: f64,
}

fn indicator_scale(
    z: &LocalFunction,
    code: &GroupCode,
    which: &'static str,
) -> Result<(C64, f64)> {
    let expected_ports: Vec<Alphabet> = code
        .ambient()
        .iter()
        .map(|g| Alphabet::Grouped(g.clone()))
        .collect();
    if z.ports() != expected_ports.as_slice() {
        return Err(Error::NotProportionalToIndicator(format!(
            "exterior ports do not match the {which} code's ambient groups"
        )));
    }
    let max_abs = z.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_abs == 0.0 {
        return Err(Error::NotProportionalToIndicator(
            "exterior function is identically zero".into(),
        ));
    }
    let threshold = 1e-9 * max_abs;
    let sizes = z.sizes();
    let mut support = Vec::new();
    for_each_index(&sizes, |idx| {
        if z.value_at(idx).norm() > threshold {
            support.push(idx.to_vec());
        }
    });
    if support.len() != code.size() || support.iter().any(|w| !code.contains(w)) {
        return Err(Error::SupportMismatch {
            which,
            got: support.len(),
            expected: code.size(),
        });
    }
    let scale = z.value_at(&support[0]);
    let mut dev: f64 = 0.0;
    for w in &support {
        dev = dev.max((z.value_at(w) - scale).norm() / scale.norm());
    }
    Ok((scale, dev))
}

/// Confirms that `n` is a code NFG for `claimed` (exterior proportional to
/// the code indicator with a uniform scale), dualizes it, and confirms the
/// dual exterior is proportional to the indicator of the brute-forced dual
/// code. Reports both scales.
pub fn verify_code_duality(n: &Nfg, claimed: &GroupCode) -> Result<CodeDualityReport> {
    for (id, f) in n.vertices() {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let indicator_valued = f
            .values()
            .iter()
            .all(|v| (v - zero).norm() <= 1e-9 || (v - one).norm() <= 1e-9);
        if !indicator_valued {
            return Err(Error::NotIndicatorValued(id.clone()));
        }
    }

    let z = n.exterior()?;
    let (primal_scale, primal_dev) = indicator_scale(&z, claimed, "claimed")?;

    let dual_code = claimed.dual_brute()?;
    let dual_nfg = dualize(n)?;
    let z_dual = dual_nfg.exterior()?;
    let (dual_scale, dual_dev) = indicator_scale(&z_dual, &dual_code, "dual")?;

    Ok(CodeDualityReport {
        primal_scale,
        dual_scale,
        code_size: claimed.size(),
        dual_size: dual_code.size(),
        max_deviation: primal_dev.max(dual_dev),
    })
}
