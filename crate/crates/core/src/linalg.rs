//! Small dense complex matrix helpers: LU with partial pivoting, inverse,
//! determinant, and an infinity-norm condition estimate. Matrices are
//! row-major `Vec<C64>` of dimension `n * n`; everything here is desk scale.

use crate::error::{Error, Result};
use crate::C64;

pub fn inf_norm(m: &[C64], n: usize) -> f64 {
    (0..n)
        .map(|r| (0..n).map(|c| m[r * n + c].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

struct Lu {
    factors: Vec<C64>,
    pivots: Vec<usize>,
    det: C64,
}

fn lu_decompose(m: &[C64], n: usize) -> Result<Lu> {
    let mut a = m.to_vec();
    let mut pivots = Vec::with_capacity(n);
    let mut det = C64::new(1.0, 0.0);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for k in 0..n {
        let (pivot_row, pivot_mag) = (k..n)
            .map(|r| (r, a[r * n + k].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty range");
        if pivot_mag <= 1e-14 * scale.max(1.0) {
            return Err(Error::SingularMatrix { det_abs: 0.0 });
        }
        pivots.push(pivot_row);
        if pivot_row != k {
            for c in 0..n {
                a.swap(k * n + c, pivot_row * n + c);
            }
            det = -det;
        }
        det *= a[k * n + k];
        let inv_pivot = C64::new(1.0, 0.0) / a[k * n + k];
        for r in k + 1..n {
            let factor = a[r * n + k] * inv_pivot;
            a[r * n + k] = factor;
            for c in k + 1..n {
                let sub = factor * a[k * n + c];
                a[r * n + c] -= sub;
            }
        }
    }
    Ok(Lu {
        factors: a,
        pivots,
        det,
    })
}

pub fn determinant(m: &[C64], n: usize) -> C64 {
    match lu_decompose(m, n) {
        Ok(lu) => lu.det,
        Err(_) => C64::new(0.0, 0.0),
    }
}

/// Inverse and determinant in one pass; errors on singular input.
pub fn inverse(m: &[C64], n: usize) -> Result<(Vec<C64>, C64)> {
    let lu = lu_decompose(m, n)?;
    let mut inv = vec![C64::new(0.0, 0.0); n * n];
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for (v, slot) in col.iter_mut().enumerate() {
            *slot = if v == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
        for (k, &p) in lu.pivots.iter().enumerate() {
            col.swap(k, p);
        }
        // forward substitution (unit lower triangle)
        for r in 0..n {
            for k in 0..r {
                let sub = lu.factors[r * n + k] * col[k];
                col[r] -= sub;
            }
        }
        // back substitution
        for r in (0..n).rev() {
            for k in r + 1..n {
                let sub = lu.factors[r * n + k] * col[k];
                col[r] -= sub;
            }
            col[r] /= lu.factors[r * n + r];
        }
        for r in 0..n {
            inv[r * n + j] = col[r];
        }
    }
    Ok((inv, lu.det))
}

/// Infinity-norm condition number `|A| * |A^-1|`; infinite when singular.
pub fn condition_number(m: &[C64], n: usize) -> f64 {
    match inverse(m, n) {
        Ok((inv, _)) => inf_norm(m, n) * inf_norm(&inv, n),
        Err(_) => f64::INFINITY,
    }
}
