//! Dense complex tensors over finite alphabets.
//!
//! A [`LocalFunction`] is a complex-valued function on a product of finite
//! alphabets, stored densely in row-major lexicographic order (first port
//! most significant). Scalars are the zero-port case. The same value, read
//! with different port counts, plays the role of vector, matrix, or tensor;
//! [`LocalFunction::contract`] covers dot, matrix, and outer products through
//! its port pairing alone.

use std::fmt;

use crate::algebra::FiniteAbelianGroup;
use crate::error::{Error, Result};
use crate::C64;

/// A variable alphabet: either a bare size or a finite abelian group.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Alphabet {
    Plain(usize),
    Grouped(FiniteAbelianGroup),
}

impl Alphabet {
    pub fn size(&self) -> usize {
        match self {
            Alphabet::Plain(n) => *n,
            Alphabet::Grouped(g) => g.size(),
        }
    }

    pub fn group(&self) -> Option<&FiniteAbelianGroup> {
        match self {
            Alphabet::Plain(_) => None,
            Alphabet::Grouped(g) => Some(g),
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::Plain(n) => write!(f, "{n}"),
            Alphabet::Grouped(g) => write!(f, "{g}"),
        }
    }
}

/// Runs `f` on every multi-index over `sizes` in row-major lexicographic
/// order. An empty `sizes` yields exactly one empty index.
pub fn for_each_index(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; sizes.len()];
    loop {
        f(&idx);
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Total number of configurations over `sizes`, wide enough not to overflow.
pub fn config_count(sizes: &[usize]) -> u128 {
    sizes.iter().map(|&s| s as u128).product()
}

/// A dense complex multivariate function on ordered ports.
#[derive(Clone, PartialEq, Debug)]
pub struct LocalFunction {
    ports: Vec<Alphabet>,
    values: Vec<C64>,
}

impl LocalFunction {
    pub fn new(ports: Vec<Alphabet>, values: Vec<C64>) -> Result<Self> {
        let expected: usize = ports.iter().map(Alphabet::size).product();
        if ports.iter().any(|p| p.size() == 0) {
            return Err(Error::ValueLengthMismatch {
                expected: 0,
                got: values.len(),
            });
        }
        if values.len() != expected {
            return Err(Error::ValueLengthMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteValue(bad));
        }
        Ok(LocalFunction { ports, values })
    }

    pub fn from_fn(ports: Vec<Alphabet>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let sizes: Vec<usize> = ports.iter().map(Alphabet::size).collect();
        let mut values = Vec::with_capacity(sizes.iter().product());
        for_each_index(&sizes, |idx| values.push(f(idx)));
        LocalFunction { ports, values }
    }

    pub fn scalar(z: C64) -> Self {
        LocalFunction {
            ports: vec![],
            values: vec![z],
        }
    }

    /// Equality indicator: 1 iff all arguments are equal. Arity >= 2.
    pub fn delta_eq(alphabet: &Alphabet, arity: usize) -> Result<Self> {
        if arity < 2 {
            return Err(Error::DeltaArity(arity));
        }
        let ports = vec![alphabet.clone(); arity];
        Ok(Self::from_fn(ports, |idx| {
            if idx.iter().all(|&x| x == idx[0]) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Additive-inverse indicator on a group alphabet: 1 iff `x + y = 0`.
    pub fn delta_plus(group: &FiniteAbelianGroup) -> Self {
        let a = Alphabet::Grouped(group.clone());
        Self::from_fn(vec![a.clone(), a], |idx| {
            if group.neg_index(idx[0]) == idx[1] {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn ports(&self) -> &[Alphabet] {
        &self.ports
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn arity(&self) -> usize {
        self.ports.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.ports.is_empty()
    }

    /// The single value of a zero-port function.
    pub fn scalar_value(&self) -> Option<C64> {
        if self.is_scalar() {
            Some(self.values[0])
        } else {
            None
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ports.iter().map(Alphabet::size).collect()
    }

    /// Row-major strides: last port has stride 1.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.sizes())
    }

    pub fn index_of(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.ports.len());
        let mut flat = 0;
        for (x, p) in idx.iter().zip(&self.ports) {
            debug_assert!(*x < p.size());
            flat = flat * p.size() + x;
        }
        flat
    }

    pub fn value_at(&self, idx: &[usize]) -> C64 {
        self.values[self.index_of(idx)]
    }

    pub fn scaled(&self, factor: C64) -> Self {
        LocalFunction {
            ports: self.ports.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Contraction over paired ports: output ports are the unpaired ports of
    /// `self` in order, then those of `other`. An empty pairing is the outer
    /// product; pairing every port of both sides yields a scalar.
    pub fn contract(&self, other: &LocalFunction, pairing: &[(usize, usize)]) -> Result<Self> {
        let mut f_paired = vec![false; self.arity()];
        let mut g_paired = vec![false; other.arity()];
        for &(pf, pg) in pairing {
            if pf >= self.arity() {
                return Err(Error::BadPort {
                    port: pf,
                    arity: self.arity(),
                });
            }
            if pg >= other.arity() {
                return Err(Error::BadPort {
                    port: pg,
                    arity: other.arity(),
                });
            }
            if f_paired[pf] {
                return Err(Error::PortPairedTwice(pf));
            }
            if g_paired[pg] {
                return Err(Error::PortPairedTwice(pg));
            }
            if self.ports[pf] != other.ports[pg] {
                return Err(Error::AlphabetMismatch {
                    left: self.ports[pf].to_string(),
                    right: other.ports[pg].to_string(),
                });
            }
            f_paired[pf] = true;
            g_paired[pg] = true;
        }

        let f_strides = self.strides();
        let g_strides = other.strides();
        let free_f: Vec<usize> = (0..self.arity()).filter(|&p| !f_paired[p]).collect();
        let free_g: Vec<usize> = (0..other.arity()).filter(|&p| !g_paired[p]).collect();

        let mut out_ports = Vec::with_capacity(free_f.len() + free_g.len());
        let mut free_sizes = Vec::new();
        // stride of each free axis in (self, other); exactly one is nonzero
        let mut free_strides: Vec<(usize, usize)> = Vec::new();
        for &p in &free_f {
            out_ports.push(self.ports[p].clone());
            free_sizes.push(self.ports[p].size());
            free_strides.push((f_strides[p], 0));
        }
        for &p in &free_g {
            out_ports.push(other.ports[p].clone());
            free_sizes.push(other.ports[p].size());
            free_strides.push((0, g_strides[p]));
        }

        let bound_sizes: Vec<usize> = pairing.iter().map(|&(pf, _)| self.ports[pf].size()).collect();
        let bound_strides: Vec<(usize, usize)> = pairing
            .iter()
            .map(|&(pf, pg)| (f_strides[pf], g_strides[pg]))
            .collect();

        let out_len: usize = free_sizes.iter().product();
        let mut out_values = Vec::with_capacity(out_len);
        for_each_index(&free_sizes, |free_idx| {
            let mut f_base = 0;
            let mut g_base = 0;
            for (x, &(sf, sg)) in free_idx.iter().zip(&free_strides) {
                f_base += x * sf;
                g_base += x * sg;
            }
            let mut acc = C64::new(0.0, 0.0);
            for_each_index(&bound_sizes, |b_idx| {
                let mut fo = f_base;
                let mut go = g_base;
                for (x, &(sf, sg)) in b_idx.iter().zip(&bound_strides) {
                    fo += x * sf;
                    go += x * sg;
                }
                acc += self.values[fo] * other.values[go];
            });
            out_values.push(acc);
        });

        Ok(LocalFunction {
            ports: out_ports,
            values: out_values,
        })
    }

    /// Sums the diagonal of two ports of equal alphabet (a partial trace).
    pub fn trace(&self, p: usize, q: usize) -> Result<Self> {
        if p >= self.arity() || q >= self.arity() {
            return Err(Error::BadPort {
                port: p.max(q),
                arity: self.arity(),
            });
        }
        if p == q {
            return Err(Error::PortPairedTwice(p));
        }
        if self.ports[p] != self.ports[q] {
            return Err(Error::AlphabetMismatch {
                left: self.ports[p].to_string(),
                right: self.ports[q].to_string(),
            });
        }
        let strides = self.strides();
        let keep: Vec<usize> = (0..self.arity()).filter(|&k| k != p && k != q).collect();
        let out_ports: Vec<Alphabet> = keep.iter().map(|&k| self.ports[k].clone()).collect();
        let out_sizes: Vec<usize> = keep.iter().map(|&k| self.ports[k].size()).collect();
        let keep_strides: Vec<usize> = keep.iter().map(|&k| strides[k]).collect();
        let diag_stride = strides[p] + strides[q];
        let n = self.ports[p].size();

        let mut out_values = Vec::with_capacity(out_sizes.iter().product());
        for_each_index(&out_sizes, |idx| {
            let base: usize = idx.iter().zip(&keep_strides).map(|(x, s)| x * s).sum();
            let mut acc = C64::new(0.0, 0.0);
            for d in 0..n {
                acc += self.values[base + d * diag_stride];
            }
            out_values.push(acc);
        });
        Ok(LocalFunction {
            ports: out_ports,
            values: out_values,
        })
    }

    /// Reorders ports so that output port `k` is input port `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.arity() {
            return Err(Error::BadPort {
                port: perm.len(),
                arity: self.arity(),
            });
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= self.arity() {
                return Err(Error::BadPort {
                    port: p,
                    arity: self.arity(),
                });
            }
            if seen[p] {
                return Err(Error::PortPairedTwice(p));
            }
            seen[p] = true;
        }
        let strides = self.strides();
        let out_ports: Vec<Alphabet> = perm.iter().map(|&p| self.ports[p].clone()).collect();
        let out_sizes: Vec<usize> = out_ports.iter().map(Alphabet::size).collect();
        let in_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
        let mut out_values = Vec::with_capacity(self.values.len());
        for_each_index(&out_sizes, |idx| {
            let flat: usize = idx.iter().zip(&in_strides).map(|(x, s)| x * s).sum();
            out_values.push(self.values[flat]);
        });
        Ok(LocalFunction {
            ports: out_ports,
            values: out_values,
        })
    }

    /// Transforms one axis by a dense kernel:
    /// `out[.., j, ..] = sum_i in[.., i, ..] * kernel[i * n_out + j]`.
    pub fn axis_transform(
        &self,
        axis: usize,
        kernel: &[C64],
        out_alphabet: Alphabet,
    ) -> Result<Self> {
        if axis >= self.arity() {
            return Err(Error::BadPort {
                port: axis,
                arity: self.arity(),
            });
        }
        let n_in = self.ports[axis].size();
        let n_out = out_alphabet.size();
        if kernel.len() != n_in * n_out {
            return Err(Error::ValueLengthMismatch {
                expected: n_in * n_out,
                got: kernel.len(),
            });
        }
        let sizes = self.sizes();
        let inner: usize = sizes[axis + 1..].iter().product();
        let outer: usize = sizes[..axis].iter().product();

        let mut out_ports = self.ports.clone();
        out_ports[axis] = out_alphabet;
        let mut out_values = vec![C64::new(0.0, 0.0); outer * n_out * inner];
        for o in 0..outer {
            for j in 0..n_out {
                for inn in 0..inner {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..n_in {
                        acc += self.values[(o * n_in + i) * inner + inn] * kernel[i * n_out + j];
                    }
                    out_values[(o * n_out + j) * inner + inn] = acc;
                }
            }
        }
        Ok(LocalFunction {
            ports: out_ports,
            values: out_values,
        })
    }
}

pub(crate) fn strides_of(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * sizes[k + 1];
    }
    strides
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::max_deviation;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn z2() -> Alphabet {
        Alphabet::Grouped(FiniteAbelianGroup::cyclic(2).unwrap())
    }

    #[test]
    fn delta_eq_is_identity_matrix() {
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        assert_eq!(eq.values(), &[c(1.0), c(0.0), c(0.0), c(1.0)]);

        let eq3 = LocalFunction::delta_eq(&Alphabet::Plain(3), 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(eq3.value_at(&[i, j]), c(want));
            }
        }
    }

    #[test]
    fn delta_eq_arity_three() {
        let eq = LocalFunction::delta_eq(&z2(), 3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let want = if i == j && j == k { 1.0 } else { 0.0 };
                    assert_eq!(eq.value_at(&[i, j, k]), c(want));
                }
            }
        }
        assert!(matches!(
            LocalFunction::delta_eq(&z2(), 1),
            Err(Error::DeltaArity(1))
        ));
    }

    #[test]
    fn delta_plus_tables() {
        let g2 = FiniteAbelianGroup::cyclic(2).unwrap();
        let dp = LocalFunction::delta_plus(&g2);
        let eq = LocalFunction::delta_eq(&Alphabet::Grouped(g2), 2).unwrap();
        assert_eq!(dp.values(), eq.values());

        let g3 = FiniteAbelianGroup::cyclic(3).unwrap();
        let dp3 = LocalFunction::delta_plus(&g3);
        for i in 0..3 {
            for j in 0..3 {
                let want = if (i + j) % 3 == 0 { 1.0 } else { 0.0 };
                assert_eq!(dp3.value_at(&[i, j]), c(want));
            }
        }

        let g22 = FiniteAbelianGroup::new(vec![2, 2]).unwrap();
        let dp22 = LocalFunction::delta_plus(&g22);
        let eq22 = LocalFunction::delta_eq(&Alphabet::Grouped(g22), 2).unwrap();
        assert_eq!(dp22.values(), eq22.values());
    }

    #[test]
    fn contract_full_pairing_is_dot_product() {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(1.0)]).unwrap();
        let g = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        let s = f.contract(&g, &[(0, 0)]).unwrap();
        assert_eq!(s.scalar_value().unwrap(), c(3.0));
    }

    #[test]
    fn contract_with_identity_acts_as_identity() {
        let eq = LocalFunction::delta_eq(&z2(), 2).unwrap();
        let g = LocalFunction::new(vec![z2()], vec![c(0.25), c(-2.0)]).unwrap();
        let out = eq.contract(&g, &[(1, 0)]).unwrap();
        assert_eq!(out.values(), g.values());
    }

    #[test]
    fn contract_empty_pairing_is_outer_product() {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(2.0)]).unwrap();
        let g = LocalFunction::new(vec![z2()], vec![c(3.0), c(4.0)]).unwrap();
        let out = f.contract(&g, &[]).unwrap();
        assert_eq!(out.values(), &[c(3.0), c(4.0), c(6.0), c(8.0)]);
        assert_eq!(out.arity(), 2);
    }

    #[test]
    fn contract_matrix_product_case() {
        // A 2x2 times 2x2 through the shared port recovers the matrix product.
        let a = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(2.0), c(3.0), c(4.0)])
            .unwrap();
        let b = LocalFunction::new(vec![z2(), z2()], vec![c(5.0), c(6.0), c(7.0), c(8.0)])
            .unwrap();
        let ab = a.contract(&b, &[(1, 0)]).unwrap();
        assert_eq!(ab.values(), &[c(19.0), c(22.0), c(43.0), c(50.0)]);
    }

    #[test]
    fn contract_rejects_mismatch_and_reuse() {
        let f = LocalFunction::new(vec![z2()], vec![c(1.0), c(1.0)]).unwrap();
        let g3 = LocalFunction::new(vec![Alphabet::Plain(3)], vec![c(1.0); 3]).unwrap();
        assert!(matches!(
            f.contract(&g3, &[(0, 0)]),
            Err(Error::AlphabetMismatch { .. })
        ));
        let h = LocalFunction::new(vec![z2(), z2()], vec![c(1.0); 4]).unwrap();
        assert!(matches!(
            h.contract(&h.clone(), &[(0, 0), (0, 1)]),
            Err(Error::PortPairedTwice(0))
        ));
    }

    #[test]
    fn contract_associativity_at_value_level() {
        let f = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(-2.0), c(0.5), c(3.0)])
            .unwrap();
        let g = LocalFunction::new(vec![z2(), z2()], vec![c(2.0), c(1.0), c(4.0), c(-1.0)])
            .unwrap();
        let h = LocalFunction::new(vec![z2()], vec![c(-1.0), c(2.0)]).unwrap();
        // (f ; g) ; h over the chain f.1-g.0 and g.1-h.0
        let fg = f.contract(&g, &[(1, 0)]).unwrap();
        let left = fg.contract(&h, &[(1, 0)]).unwrap();
        // f ; (g ; h)
        let gh = g.contract(&h, &[(1, 0)]).unwrap();
        let right = f.contract(&gh, &[(1, 0)]).unwrap();
        assert!(max_deviation(left.values(), right.values()) < 1e-12);
    }

    #[test]
    fn trace_sums_diagonal() {
        let m = LocalFunction::new(vec![z2(), z2()], vec![c(1.0), c(2.0), c(3.0), c(4.0)])
            .unwrap();
        let t = m.trace(0, 1).unwrap();
        assert_eq!(t.scalar_value().unwrap(), c(5.0));
    }

    #[test]
    fn permute_reorders_axes() {
        let m = LocalFunction::new(
            vec![z2(), Alphabet::Plain(3)],
            (0..6).map(|k| c(k as f64)).collect(),
        )
        .unwrap();
        let t = m.permute(&[1, 0]).unwrap();
        assert_eq!(t.ports()[0], Alphabet::Plain(3));
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t.value_at(&[j, i]), m.value_at(&[i, j]));
            }
        }
    }

    #[test]
    fn rejects_bad_value_tables() {
        assert!(matches!(
            LocalFunction::new(vec![z2()], vec![c(1.0)]),
            Err(Error::ValueLengthMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            LocalFunction::new(vec![z2()], vec![c(1.0), C64::new(f64::NAN, 0.0)]),
            Err(Error::NonFiniteValue(1))
        ));
    }

    #[test]
    fn scalar_round_trip() {
        let s = LocalFunction::scalar(c(7.0));
        assert!(s.is_scalar());
        assert_eq!(s.value_at(&[]), c(7.0));
        let outer = s.contract(&LocalFunction::scalar(c(3.0)), &[]).unwrap();
        assert_eq!(outer.scalar_value().unwrap(), c(21.0));
    }
}
