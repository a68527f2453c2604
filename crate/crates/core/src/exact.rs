//! Exact rational linear algebra shared by the quadratic-space, lattice and
//! quaternion layers.

use num::bigint::BigInt;
use num::integer::Integer;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rational = BigRational;

/// Row-major square or rectangular matrix of rationals.
pub type RatMatrix = Vec<Vec<Rational>>;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"`, `"p"` or a decimal-free integer string.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).ok()?;
            let q = BigInt::from_str(q.trim()).ok()?;
            if q.is_zero() {
                None
            } else {
                Some(Rational::new(p, q))
            }
        }
        None => BigInt::from_str(s).ok().map(Rational::from_integer),
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn matrix_to_f64(m: &RatMatrix) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(to_f64).collect()).collect()
}

pub fn from_i64_rows(rows: &[&[i64]]) -> RatMatrix {
    rows.iter().map(|r| r.iter().map(|&x| rat(x)).collect()).collect()
}

pub fn identity(n: usize) -> RatMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect()
}

pub fn is_symmetric(m: &RatMatrix) -> bool {
    let n = m.len();
    m.iter().all(|r| r.len() == n) && (0..n).all(|i| (0..i).all(|j| m[i][j] == m[j][i]))
}

pub fn mat_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![Rational::zero(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += &a[i][l] * &b[l][j];
            }
        }
    }
    out
}

pub fn transpose(a: &RatMatrix) -> RatMatrix {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// `x^T G y` over the rationals.
pub fn bilinear(g: &RatMatrix, x: &[Rational], y: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (i, xi) in x.iter().enumerate() {
        if xi.is_zero() {
            continue;
        }
        for (j, yj) in y.iter().enumerate() {
            acc += xi * &g[i][j] * yj;
        }
    }
    acc
}

/// `B G B^T` for a basis given as rows.
pub fn congruence(basis: &RatMatrix, g: &RatMatrix) -> RatMatrix {
    mat_mul(&mat_mul(basis, g), &transpose(basis))
}

pub fn determinant(m: &RatMatrix) -> Rational {
    let n = m.len();
    let mut a = m.clone();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &p;
            for c in col..n {
                let t = &f * &a[col][c];
                a[r][c] -= t;
            }
        }
    }
    det
}

pub fn inverse(m: &RatMatrix) -> Option<RatMatrix> {
    let n = m.len();
    let mut a: RatMatrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(piv, col);
        let p = a[col][col].clone();
        for c in 0..2 * n {
            a[col][c] = &a[col][c] / &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..2 * n {
                let t = &f * &a[col][c];
                a[r][c] -= t;
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Coordinates `c` with `c · basis = x` (basis as rows, full rank square).
pub fn coordinates(basis_inv: &RatMatrix, x: &[Rational]) -> Vec<Rational> {
    let n = basis_inv.len();
    (0..n)
        .map(|j| {
            let mut acc = Rational::zero();
            for (i, xi) in x.iter().enumerate() {
                acc += xi * &basis_inv[i][j];
            }
            acc
        })
        .collect()
}

pub fn is_integral(x: &Rational) -> bool {
    x.denom().is_one()
}

fn lcm_of_denominators(rows: &[Vec<Rational>]) -> BigInt {
    let mut l = BigInt::one();
    for r in rows {
        for x in r {
            l = l.lcm(x.denom());
        }
    }
    l
}

/// Row-style Hermite normal form of an integer matrix; returns the nonzero
/// rows, upper triangular with positive pivots.
pub fn hermite_normal_form(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    if a.is_empty() {
        return a;
    }
    let ncols = a[0].len();
    let mut pivot_row = 0;
    for col in 0..ncols {
        if pivot_row >= a.len() {
            break;
        }
        // Euclid on the column below pivot_row.
        loop {
            let mut best: Option<usize> = None;
            for r in pivot_row..a.len() {
                if !a[r][col].is_zero()
                    && best.is_none_or(|b| a[r][col].abs() < a[b][col].abs())
                {
                    best = Some(r);
                }
            }
            let Some(b) = best else { break };
            a.swap(pivot_row, b);
            let mut done = true;
            for r in pivot_row + 1..a.len() {
                if a[r][col].is_zero() {
                    continue;
                }
                let q = a[r][col].div_floor(&a[pivot_row][col]);
                for c in col..ncols {
                    let t = &q * &a[pivot_row][c];
                    a[r][c] -= t;
                }
                if !a[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[pivot_row][col].is_zero() {
            continue;
        }
        if a[pivot_row][col].is_negative() {
            for c in col..ncols {
                a[pivot_row][c] = -a[pivot_row][c].clone();
            }
        }
        for r in 0..pivot_row {
            let q = a[r][col].div_floor(&a[pivot_row][col]);
            if q.is_zero() {
                continue;
            }
            for c in col..ncols {
                let t = &q * &a[pivot_row][c];
                a[r][c] -= t;
            }
        }
        pivot_row += 1;
    }
    a.truncate(pivot_row);
    a
}

/// A basis (rows) of the Z-module spanned by rational generators.
pub fn lattice_basis(generators: &[Vec<Rational>]) -> RatMatrix {
    let l = lcm_of_denominators(generators);
    let ints: Vec<Vec<BigInt>> = generators
        .iter()
        .map(|r| r.iter().map(|x| (x * Rational::from_integer(l.clone())).to_integer()).collect())
        .collect();
    hermite_normal_form(&ints)
        .into_iter()
        .map(|r| r.into_iter().map(|x| Rational::new(x, l.clone())).collect())
        .collect()
}

/// Dual lattice with respect to the standard dot product on coordinates.
pub fn dual_basis(basis: &RatMatrix) -> Option<RatMatrix> {
    inverse(basis).map(|inv| transpose(&inv))
}

/// Intersection of two full-rank lattices (bases as rows).
pub fn lattice_intersection(a: &RatMatrix, b: &RatMatrix) -> Option<RatMatrix> {
    let mut gens = dual_basis(a)?;
    gens.extend(dual_basis(b)?);
    let sum = lattice_basis(&gens);
    dual_basis(&sum).map(|d| lattice_basis(&d))
}

/// Integer square root of a non-negative rational that is a perfect square
/// integer.
pub fn exact_sqrt_integer(x: &Rational) -> Option<BigInt> {
    if !is_integral(x) || x.is_negative() {
        return None;
    }
    let n = x.to_integer();
    let r = n.sqrt();
    (&r * &r == n).then_some(r)
}
