//! Finite abelian groups, their characters, and Fourier transforms.
//!
//! Groups are direct products of cyclic groups `Z_{n_1} x ... x Z_{n_k}`,
//! written additively. The character group is identified with the group
//! itself through the standard pairing
//! `kappa(x, y) = exp(2*pi*i * sum_j x_j*y_j / n_j)`, which makes characters
//! concrete group elements and keeps dualized edges over the same alphabet.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{Alphabet, LocalFunction};
use crate::C64;

/// A finite abelian group given by the orders of its cyclic factors.
///
/// Zero factors (`orders` empty) is the trivial group of size 1.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FiniteAbelianGroup {
    orders: Vec<usize>,
}

/// An element of a [`FiniteAbelianGroup`], one residue per cyclic factor.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GroupElement {
    residues: Vec<usize>,
}

impl GroupElement {
    pub fn residues(&self) -> &[usize] {
        &self.residues
    }
}

impl FiniteAbelianGroup {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if let Some(&n) = orders.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGroupOrder(n));
        }
        Ok(FiniteAbelianGroup { orders })
    }

    pub fn trivial() -> Self {
        FiniteAbelianGroup { orders: vec![] }
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn size(&self) -> usize {
        self.orders.iter().product()
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement {
            residues: vec![0; self.orders.len()],
        }
    }

    fn check(&self, x: &GroupElement) -> Result<()> {
        if x.residues.len() != self.orders.len() {
            return Err(Error::ArityMismatch {
                group: self.orders.len(),
                element: x.residues.len(),
            });
        }
        Ok(())
    }

    /// Builds an element from residues, reducing each modulo its order.
    pub fn element(&self, residues: Vec<usize>) -> Result<GroupElement> {
        if residues.len() != self.orders.len() {
            return Err(Error::ArityMismatch {
                group: self.orders.len(),
                element: residues.len(),
            });
        }
        let residues = residues
            .into_iter()
            .zip(&self.orders)
            .map(|(r, &n)| r % n)
            .collect();
        Ok(GroupElement { residues })
    }

    pub fn add(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement> {
        self.check(x)?;
        self.check(y)?;
        let residues = x
            .residues
            .iter()
            .zip(&y.residues)
            .zip(&self.orders)
            .map(|((a, b), &n)| (a + b) % n)
            .collect();
        Ok(GroupElement { residues })
    }

    pub fn neg(&self, x: &GroupElement) -> Result<GroupElement> {
        self.check(x)?;
        let residues = x
            .residues
            .iter()
            .zip(&self.orders)
            .map(|(&r, &n)| (n - r) % n)
            .collect();
        Ok(GroupElement { residues })
    }

    /// Decodes the lexicographic index (first factor most significant) into
    /// an element. This matches the row-major layout of tensor ports.
    pub fn element_of_index(&self, mut index: usize) -> GroupElement {
        debug_assert!(index < self.size());
        let mut residues = vec![0; self.orders.len()];
        for j in (0..self.orders.len()).rev() {
            residues[j] = index % self.orders[j];
            index /= self.orders[j];
        }
        GroupElement { residues }
    }

    pub fn index_of(&self, x: &GroupElement) -> Result<usize> {
        self.check(x)?;
        let mut idx = 0;
        for (r, &n) in x.residues.iter().zip(&self.orders) {
            idx = idx * n + r;
        }
        Ok(idx)
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.size()).map(|i| self.element_of_index(i))
    }

    /// Index of the additive inverse of the element with the given index.
    pub fn neg_index(&self, index: usize) -> usize {
        let x = self.element_of_index(index);
        let nx = self.neg(&x).expect("decoded element");
        self.index_of(&nx).expect("negated element")
    }

    /// The character pairing `kappa(x, y) = exp(2*pi*i * sum_j x_j*y_j / n_j)`.
    ///
    /// Symmetric in its arguments, unit modulus, and multiplicative in each.
    /// Quarter-turn phases evaluate to exact units, so kernels over Z2 and Z4
    /// stay integer-valued.
    pub fn kappa(&self, x: &GroupElement, y: &GroupElement) -> Result<C64> {
        self.check(x)?;
        self.check(y)?;
        // exact phase as num/lcm
        let mut lcm: u64 = 1;
        for &n in &self.orders {
            let n = n as u64;
            lcm = lcm / gcd(lcm, n) * n;
        }
        let mut num: u64 = 0;
        for ((a, b), &n) in x.residues.iter().zip(&y.residues).zip(&self.orders) {
            let n = n as u64;
            num = (num + ((*a as u64 * *b as u64) % n) * (lcm / n)) % lcm;
        }
        let quarter = 4 * num;
        if quarter.is_multiple_of(lcm) {
            return Ok(match quarter / lcm {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, 1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, -1.0),
            });
        }
        Ok(C64::from_polar(1.0, TAU * (num as f64 / lcm as f64)))
    }

    /// The reflected, normalized kernel `kappa(x, -y) / |X|`; the dual pair
    /// partner of `kappa` and the inverse Fourier kernel.
    pub fn kappa_hat(&self, x: &GroupElement, y: &GroupElement) -> Result<C64> {
        let k = self.kappa(x, &self.neg(y)?)?;
        Ok(k / self.size() as f64)
    }

    /// Dense `|X| x |X|` kappa kernel, row index `x`, column index `y`.
    pub fn kappa_matrix(&self) -> Vec<C64> {
        let n = self.size();
        let mut m = Vec::with_capacity(n * n);
        for i in 0..n {
            let x = self.element_of_index(i);
            for j in 0..n {
                let y = self.element_of_index(j);
                m.push(self.kappa(&x, &y).expect("decoded elements"));
            }
        }
        m
    }

    pub fn kappa_hat_matrix(&self) -> Vec<C64> {
        let n = self.size();
        let mut m = Vec::with_capacity(n * n);
        for i in 0..n {
            let x = self.element_of_index(i);
            for j in 0..n {
                let y = self.element_of_index(j);
                m.push(self.kappa_hat(&x, &y).expect("decoded elements"));
            }
        }
        m
    }

    /// Parses a group literal such as `"Z2"`, `"z3"`, or `"Z2xZ4"`.
    /// `"Z1"` denotes the trivial group.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("z1") {
            return Ok(Self::trivial());
        }
        let mut orders = Vec::new();
        for part in t.split(['x', 'X']) {
            let part = part.trim();
            let digits = part
                .strip_prefix('Z')
                .or_else(|| part.strip_prefix('z'))
                .ok_or_else(|| Error::InvalidGroupLiteral(s.to_string()))?;
            let n: usize = digits
                .parse()
                .map_err(|_| Error::InvalidGroupLiteral(s.to_string()))?;
            if n < 2 {
                return Err(Error::InvalidGroupLiteral(s.to_string()));
            }
            orders.push(n);
        }
        if orders.is_empty() {
            return Err(Error::InvalidGroupLiteral(s.to_string()));
        }
        Self::new(orders)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.orders.is_empty() {
            return write!(f, "Z1");
        }
        let parts: Vec<String> = self.orders.iter().map(|n| format!("Z{n}")).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FourierDirection {
    Forward,
    Inverse,
}

/// Fourier transform of a local function, applied independently on each port.
///
/// Forward contracts each variable against `kappa`, inverse against
/// `kappa_hat`; `fourier(fourier(f, Forward), Inverse)` returns `f`. Every
/// port alphabet must be group-structured.
pub fn fourier(f: &LocalFunction, direction: FourierDirection) -> Result<LocalFunction> {
    let mut out = f.clone();
    for axis in 0..f.arity() {
        let group = match f.ports()[axis] {
            Alphabet::Grouped(ref g) => g.clone(),
            Alphabet::Plain(n) => return Err(Error::NotGroupAlphabet(n)),
        };
        let kernel = match direction {
            FourierDirection::Forward => group.kappa_matrix(),
            FourierDirection::Inverse => group.kappa_hat_matrix(),
        };
        // kappa and kappa_hat are symmetric, so one orientation serves both
        // the "sum over x" and "sum over x-hat" readings.
        out = out.axis_transform(axis, &kernel, Alphabet::Grouped(group))?;
    }
    Ok(out)
}
