//! Normal factor graphs under the exterior-function semantics.
//!
//! An NFG is a graph whose vertices hold complex-valued local functions,
//! whose regular edges are variables shared by exactly two functions, and
//! whose dangling edges are variables free in exactly one function. The graph
//! realizes its *exterior function*: the product of all local functions
//! summed over every regular-edge variable.
//!
//! The crate covers:
//!
//! - dense complex tensors over finite alphabets and their contractions
//!   ([`tensor`]);
//! - finite abelian groups, characters, and Fourier transforms ([`algebra`]);
//! - the NFG data model and exact exterior-function evaluation, both by brute
//!   enumeration and by greedy edge elimination ([`nfg`]);
//! - the exterior-function-preserving rewrites: vertex grouping/splitting,
//!   equality insertion/deletion, dual-vertex insertion/deletion, and the
//!   normalization of arbitrary sum-of-products forms ([`rewrite`]);
//! - holographic transformations and numerical verification of the
//!   generalized Holant identity ([`holo`]);
//! - NFG dualization, the duality identity `Z_dual = |X_int| * F[Z]`, and
//!   group codes with dual-code checks ([`duality`]);
//! - PerfMatch, matchgate signatures, the Pfaffian/FKT fast path, and the
//!   holographic reduction pipeline ([`perfmatch`]);
//! - JSON file formats for all of the above ([`io`]) and seeded random
//!   instance generators ([`generate`]).

pub mod algebra;
pub mod duality;
mod error;
pub mod generate;
pub mod holo;
pub mod io;
pub mod linalg;
pub mod nfg;
pub mod perfmatch;
pub mod rewrite;
pub mod tensor;

pub use error::{Error, Result, Violation};

/// Complex double precision, the scalar type of every stored tensor.
pub type C64 = num_complex::Complex64;

/// Comparison tolerance: relative with an absolute floor.
///
/// Two values compare equal when `|a - b| <= max(abs, rel * scale)` where
/// `scale` is the magnitude of the values (for tensors, the largest entry
/// magnitude of either side).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-9,
            abs: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn with_rel(rel: f64) -> Self {
        Tolerance {
            rel,
            ..Tolerance::default()
        }
    }

    pub fn close(&self, a: C64, b: C64) -> bool {
        (a - b).norm() <= self.abs.max(self.rel * a.norm().max(b.norm()))
    }

    /// Entrywise closeness relative to the global magnitude of both slices.
    pub fn close_slices(&self, a: &[C64], b: &[C64]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let scale = slice_scale(a).max(slice_scale(b));
        let bound = self.abs.max(self.rel * scale);
        a.iter().zip(b).all(|(x, y)| (x - y).norm() <= bound)
    }
}

fn slice_scale(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation between two equal-length slices, relative to
/// their global magnitude. Falls back to the absolute deviation when both
/// sides are essentially zero, so comparing two near-zero tensors reports a
/// tiny number rather than a 0/0 blow-up.
pub fn max_deviation(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len(), "deviation of unequal-length slices");
    let scale = slice_scale(a).max(slice_scale(b));
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
