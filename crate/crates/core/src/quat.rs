//! Indefinite rational quaternion algebras `(a, b)` with `i² = a`, `j² = b`,
//! `k = ij = −ji`: local invariants, orders, units, optimal embeddings of
//! imaginary quadratic orders and their fixed points on the upper half plane.

use crate::exact::{self, RatMatrix, Rational};
use crate::lattice::{EmbeddedLattice, LatticeError};
use crate::qspace::{HxHChart, PlanePoint, QSpaceError, QuadSpace, Splitting};
use num::complex::Complex64;
use num::integer::Integer;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::Deserialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuatError {
    #[error("quaternion parameters must be nonzero")]
    ZeroParameter,
    #[error("algebra ({0}, {1}) is split (discriminant 1)")]
    Split(i64, i64),
    #[error("algebra ({0}, {1}) is definite")]
    Definite(i64, i64),
    #[error("parameter {0} does not fit in a machine integer")]
    TooLarge(String),
    #[error("basis does not span an order: {0}")]
    NotAnOrder(String),
    #[error("no saturating element found at p = {0}")]
    SaturationFailure(u64),
    #[error("discriminant {0} is not negative")]
    PositiveDiscriminant(i64),
    #[error("discriminant {0} is not fundamental")]
    NonFundamentalDiscriminant(i64),
    #[error("discriminant {disc} is not coprime to d(B) = {level}")]
    NotCoprime { disc: i64, level: u64 },
    #[error("reduced norm {0} is not a prime")]
    NotPrimeNorm(String),
    #[error("prime {0} divides the algebra discriminant")]
    DividesDiscriminant(u64),
    #[error("{d} is not a divisor > 1 of d(B) = {level}")]
    NotADivisor { d: u64, level: u64 },
    #[error("fixed point is not in the upper half plane")]
    NotInUpperHalfPlane,
    #[error("no element of reduced norm {norm} up to majorant {radius}")]
    NotFound { norm: i64, radius: f64 },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("cannot parse algebra spec {0:?}")]
    Parse(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    QSpace(#[from] QSpaceError),
}

pub type Result<T> = std::result::Result<T, QuatError>;

/// A place of ℚ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Place {
    Infinite,
    Finite(u64),
}

/// An element `x₀ + x₁i + x₂j + x₃k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Quaternion(pub [Rational; 4]);

impl Quaternion {
    pub fn from_ints(c: [i64; 4]) -> Self {
        Self(c.map(exact::rat))
    }

    pub fn from_coords(c: &[Rational]) -> Self {
        Self([c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone()])
    }

    pub fn scalar(x: Rational) -> Self {
        Self([x, Rational::zero(), Rational::zero(), Rational::zero()])
    }

    pub fn one() -> Self {
        Self::from_ints([1, 0, 0, 0])
    }

    pub fn coords(&self) -> &[Rational; 4] {
        &self.0
    }

    pub fn to_f64(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| exact::to_f64(&self.0[k]))
    }

    pub fn add(&self, o: &Self) -> Self {
        Self([0, 1, 2, 3].map(|k| &self.0[k] + &o.0[k]))
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self([0, 1, 2, 3].map(|k| &self.0[k] - &o.0[k]))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self([0, 1, 2, 3].map(|k| &self.0[k] * c))
    }

    pub fn conj(&self) -> Self {
        let [x0, x1, x2, x3] = &self.0;
        Self([x0.clone(), -x1.clone(), -x2.clone(), -x3.clone()])
    }

    pub fn trd(&self) -> Rational {
        &self.0[0] * exact::rat(2)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }
}

#[derive(Debug, Deserialize)]
struct PresetFile {
    preset: Vec<PresetEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PresetEntry {
    pub name: String,
    pub a: i64,
    pub b: i64,
}

const PRESETS: &str = include_str!("../presets.toml");

/// Named algebras shipped with the crate.
pub fn presets() -> Vec<PresetEntry> {
    let file: PresetFile = toml::from_str(PRESETS).expect("bundled presets parse");
    file.preset
}

/// An indefinite division quaternion algebra over ℚ. The parameters are kept
/// as integers; rational input is rescaled by squares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuaternionAlgebra {
    a: i64,
    b: i64,
    ramified: Vec<u64>,
    name: Option<String>,
}

impl QuaternionAlgebra {
    pub fn new(a: &Rational, b: &Rational) -> Result<Self> {
        let a = integral_representative(a)?;
        let b = integral_representative(b)?;
        Self::from_ints(a, b)
    }

    pub fn from_ints(a: i64, b: i64) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(QuatError::ZeroParameter);
        }
        if a < 0 && b < 0 {
            return Err(QuatError::Definite(a, b));
        }
        let (ra, rb) = (exact::rat(a), exact::rat(b));
        let mut candidates = prime_factors((2 * a as i128 * b as i128).unsigned_abs());
        candidates.dedup();
        let ramified: Vec<u64> =
            candidates.into_iter().filter(|&p| hilbert_symbol(&ra, &rb, Place::Finite(p)) == -1).collect();
        if ramified.is_empty() {
            return Err(QuatError::Split(a, b));
        }
        Ok(Self { a, b, ramified, name: None })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let entry =
            presets().into_iter().find(|p| p.name == name).ok_or_else(|| QuatError::UnknownPreset(name.into()))?;
        let mut alg = Self::from_ints(entry.a, entry.b)?;
        alg.name = Some(entry.name);
        Ok(alg)
    }

    /// A preset name or a pair `a,b` of rationals.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some((a, b)) = spec.split_once(',') {
            let a = exact::parse_rational(a.trim()).ok_or_else(|| QuatError::Parse(spec.into()))?;
            let b = exact::parse_rational(b.trim()).ok_or_else(|| QuatError::Parse(spec.into()))?;
            return Self::new(&a, &b);
        }
        Self::preset(spec.trim())
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn ramified_primes(&self) -> &[u64] {
        &self.ramified
    }

    /// `d(B)`, the product of the finite ramified primes.
    pub fn discriminant(&self) -> u64 {
        self.ramified.iter().product()
    }

    /// `|W_B| = 2^{ω(d(B))}`.
    pub fn atkin_lehner_order(&self) -> usize {
        1 << self.ramified.len()
    }

    pub fn mul(&self, x: &Quaternion, y: &Quaternion) -> Quaternion {
        let (a, b) = (exact::rat(self.a), exact::rat(self.b));
        let ab = &a * &b;
        let [x0, x1, x2, x3] = &x.0;
        let [y0, y1, y2, y3] = &y.0;
        Quaternion([
            x0 * y0 + &a * x1 * y1 + &b * x2 * y2 - &ab * x3 * y3,
            x0 * y1 + x1 * y0 - &b * x2 * y3 + &b * x3 * y2,
            x0 * y2 + x2 * y0 + &a * x1 * y3 - &a * x3 * y1,
            x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
        ])
    }

    pub fn nrd(&self, x: &Quaternion) -> Rational {
        let (a, b) = (exact::rat(self.a), exact::rat(self.b));
        let [x0, x1, x2, x3] = &x.0;
        x0 * x0 - &a * x1 * x1 - &b * x2 * x2 + &a * &b * x3 * x3
    }

    pub fn trd(&self, x: &Quaternion) -> Rational {
        x.trd()
    }

    pub fn inverse(&self, x: &Quaternion) -> Option<Quaternion> {
        let n = self.nrd(x);
        (!n.is_zero()).then(|| x.conj().scale(&n.recip()))
    }

    /// `trd(x ȳ)`, the polarization of the reduced norm.
    pub fn trace_pairing(&self, x: &Quaternion, y: &Quaternion) -> Rational {
        self.mul(x, &y.conj()).trd()
    }

    /// Gram matrix of `trd(x ȳ)` on `{1, i, j, k}`: `diag(2, −2a, −2b, 2ab)`.
    pub fn norm_gram(&self) -> RatMatrix {
        let d = [2, -2 * self.a, -2 * self.b, 2 * self.a * self.b];
        (0..4).map(|i| (0..4).map(|j| exact::rat(if i == j { d[i] } else { 0 })).collect()).collect()
    }

    /// `(B, nrd)` as a quadratic space of signature `(2, 2)`.
    pub fn quad_space(&self) -> QuadSpace {
        QuadSpace::new(self.norm_gram()).expect("norm form of an indefinite algebra is nondegenerate")
    }

    /// 2×2 real images of `1, i, j, k`. The generator with positive square
    /// goes to a diagonal matrix.
    pub fn splitting_images(&self) -> [[f64; 4]; 4] {
        let (a, b) = (self.a as f64, self.b as f64);
        if self.a > 0 {
            let r = a.sqrt();
            [[1.0, 0.0, 0.0, 1.0], [r, 0.0, 0.0, -r], [0.0, b, 1.0, 0.0], [0.0, r * b, -r, 0.0]]
        } else {
            let r = b.sqrt();
            [[1.0, 0.0, 0.0, 1.0], [0.0, a, 1.0, 0.0], [r, 0.0, 0.0, -r], [0.0, -a * r, r, 0.0]]
        }
    }

    pub fn splitting(&self) -> Splitting {
        Splitting::new(&self.quad_space(), self.splitting_images()).expect("splitting matches the norm form")
    }

    /// `ι_∞(x)` as `(m11, m12, m21, m22)`.
    pub fn matrix(&self, x: &Quaternion) -> [f64; 4] {
        let img = self.splitting_images();
        let c = x.to_f64();
        let mut m = [0.0; 4];
        for k in 0..4 {
            for r in 0..4 {
                m[r] += c[k] * img[k][r];
            }
        }
        m
    }

    pub fn chart(&self) -> HxHChart {
        HxHChart::new(self.quad_space(), self.splitting())
    }

    /// The base plane used for all majorants: the chart point `(i, i)`, where
    /// the majorant is half the squared Frobenius norm of `ι_∞(x)`.
    pub fn base_point(&self) -> PlanePoint {
        let i = Complex64::new(0.0, 1.0);
        self.chart().plane(i, i).expect("(i, i) lies in the chart")
    }

    /// Whether `ℚ(√D)` embeds: no ramified prime of `B` splits in it.
    pub fn embeds_field(&self, disc: i64) -> bool {
        if disc > 0 && is_perfect_square(disc) {
            return false;
        }
        self.ramified.iter().all(|&p| !is_local_square(disc, p))
    }
}

fn integral_representative(x: &Rational) -> Result<i64> {
    if x.is_zero() {
        return Err(QuatError::ZeroParameter);
    }
    let v = x.numer() * x.denom();
    v.to_i64().ok_or_else(|| QuatError::TooLarge(exact::format_rational(x)))
}

fn is_perfect_square(n: i64) -> bool {
    n >= 0 && {
        let r = (n as f64).sqrt().round() as i64;
        (r - 1..=r + 1).any(|s| s >= 0 && s * s == n)
    }
}

/// Prime factors with multiplicity, ascending.
pub fn prime_factors(mut n: u128) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p: u128 = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p as u64);
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n as u64);
    }
    out
}

fn distinct_primes(n: u128) -> Vec<u64> {
    let mut v = prime_factors(n);
    v.dedup();
    v
}

fn pow_mod(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

/// Legendre symbol `(u/p)` for an odd prime `p`.
fn legendre(u: i128, p: u64) -> i8 {
    let p = p as u128;
    let r = u.rem_euclid(p as i128) as u128;
    if r == 0 {
        return 0;
    }
    if pow_mod(r, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// Kronecker symbol `(D/m)` for `m > 0`.
pub fn kronecker(d: i64, m: u64) -> i8 {
    let mut out = 1i8;
    for p in prime_factors(m as u128) {
        let s = if p == 2 {
            match d.rem_euclid(8) {
                1 | 7 => 1,
                3 | 5 => -1,
                _ => 0,
            }
        } else {
            legendre(d as i128, p)
        };
        out *= s;
    }
    out
}

fn split_valuation(mut x: i128, p: u64) -> (u32, i128) {
    let p = p as i128;
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    (v, x)
}

/// The Hilbert symbol `(a, b)_p`.
pub fn hilbert_symbol(a: &Rational, b: &Rational, place: Place) -> i8 {
    assert!(!a.is_zero() && !b.is_zero(), "Hilbert symbol needs nonzero arguments");
    let p = match place {
        Place::Infinite => return if a.is_negative() && b.is_negative() { -1 } else { 1 },
        Place::Finite(p) => p,
    };
    let to_int = |x: &Rational| (x.numer() * x.denom()).to_i128().expect("Hilbert symbol argument fits in i128");
    let (alpha, u) = split_valuation(to_int(a), p);
    let (beta, v) = split_valuation(to_int(b), p);
    if p == 2 {
        let eps = |x: i128| (((x.rem_euclid(8)) - 1) / 2 % 2) as u32;
        let omega = |x: i128| {
            let r = x.rem_euclid(8);
            (((r * r - 1) / 8) % 2) as u32
        };
        let e = eps(u) * eps(v) + alpha * omega(v) + beta * omega(u);
        if e % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        let mut s: i8 = if (alpha * beta) % 2 == 1 && (p - 1) / 2 % 2 == 1 { -1 } else { 1 };
        if beta % 2 == 1 {
            s *= legendre(u, p);
        }
        if alpha % 2 == 1 {
            s *= legendre(v, p);
        }
        s
    }
}

/// The ramified finite primes of `B`.
pub fn ramified_set(alg: &QuaternionAlgebra) -> Vec<u64> {
    alg.ramified.clone()
}

pub fn discriminant(alg: &QuaternionAlgebra) -> u64 {
    alg.discriminant()
}

/// Whether `d` is a square in `ℚ_p`, tested against generators of
/// `ℚ_p^× / ℚ_p^{×2}` through the Hilbert pairing.
fn is_local_square(d: i64, p: u64) -> bool {
    let dr = exact::rat(d);
    let gens: Vec<i64> = if p == 2 {
        vec![-1, 2, 5]
    } else {
        let nonresidue = (2..p as i64).find(|&u| legendre(u as i128, p) == -1).expect("odd prime has a nonresidue");
        vec![p as i64, nonresidue]
    };
    gens.into_iter().all(|g| hilbert_symbol(&dr, &exact::rat(g), Place::Finite(p)) == 1)
}

pub fn is_fundamental_discriminant(d: i64) -> bool {
    let squarefree = |m: i64| {
        let f = prime_factors(m.unsigned_abs() as u128);
        f.windows(2).all(|w| w[0] != w[1])
    };
    if d == 0 || d == 1 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => squarefree(d),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && squarefree(m)
        }
        _ => false,
    }
}

fn check_negative_fundamental(d: i64) -> Result<()> {
    if d >= 0 {
        return Err(QuatError::PositiveDiscriminant(d));
    }
    if !is_fundamental_discriminant(d) {
        return Err(QuatError::NonFundamentalDiscriminant(d));
    }
    Ok(())
}

/// Class number of the imaginary quadratic order of discriminant `d` by
/// counting reduced primitive forms `(a, b, c)`.
pub fn class_number(d: i64) -> Result<usize> {
    check_negative_fundamental(d)?;
    let n = -d;
    let mut h = 0;
    let mut a = 1i64;
    while 3 * a * a <= n {
        for b in -a + 1..=a {
            if (b * b + n) % (4 * a) != 0 {
                continue;
            }
            let c = (b * b + n) / (4 * a);
            if c < a || (c == a && b < 0) {
                continue;
            }
            if a.gcd(&b).gcd(&c) == 1 {
                h += 1;
            }
        }
        a += 1;
    }
    Ok(h)
}

/// Class number from Dirichlet's formula `h = −(w / 2|D|) Σ_{a<|D|} (D/a) a`.
pub fn class_number_dirichlet(d: i64) -> Result<usize> {
    check_negative_fundamental(d)?;
    let n = d.unsigned_abs();
    let w: i64 = match d {
        -3 => 6,
        -4 => 4,
        _ => 2,
    };
    let s: i64 = (1..n).map(|a| kronecker(d, a) as i64 * a as i64).sum();
    let num = -w * s;
    let den = 2 * n as i64;
    assert_eq!(num % den, 0, "Dirichlet sum is not divisible");
    Ok((num / den) as usize)
}

/// A full-rank order of `B`, basis in `{1, i, j, k}` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuaternionOrder {
    algebra: QuaternionAlgebra,
    basis: Vec<Quaternion>,
    basis_inv: RatMatrix,
    discriminant: u64,
}

fn basis_matrix(basis: &[Quaternion]) -> RatMatrix {
    basis.iter().map(|q| q.0.to_vec()).collect()
}

fn is_integral_lattice(alg: &QuaternionAlgebra, rows: &RatMatrix) -> bool {
    let qs: Vec<Quaternion> = rows.iter().map(|r| Quaternion::from_coords(r)).collect();
    qs.iter().all(|x| exact::is_integral(&x.trd()) && exact::is_integral(&alg.nrd(x)))
        && (0..4).all(|i| (i + 1..4).all(|j| exact::is_integral(&alg.trace_pairing(&qs[i], &qs[j]))))
}

/// The ring generated by `gens` and 1, if it is integral.
fn ring_closure(alg: &QuaternionAlgebra, gens: &[Quaternion]) -> Option<Vec<Quaternion>> {
    let mut rows: Vec<Vec<Rational>> = gens.iter().map(|g| g.0.to_vec()).collect();
    rows.push(Quaternion::one().0.to_vec());
    let mut basis = exact::lattice_basis(&rows);
    loop {
        if basis.len() != 4 || !is_integral_lattice(alg, &basis) {
            return None;
        }
        let qs: Vec<Quaternion> = basis.iter().map(|r| Quaternion::from_coords(r)).collect();
        let mut gens = basis.clone();
        for x in &qs {
            for y in &qs {
                gens.push(alg.mul(x, y).0.to_vec());
            }
        }
        let next = exact::lattice_basis(&gens);
        if next == basis {
            return Some(qs);
        }
        basis = next;
    }
}

impl QuaternionOrder {
    pub fn from_basis(algebra: &QuaternionAlgebra, basis: Vec<Quaternion>) -> Result<Self> {
        if basis.len() != 4 {
            return Err(QuatError::NotAnOrder(format!("{} basis elements", basis.len())));
        }
        let m = basis_matrix(&basis);
        let basis_inv = exact::inverse(&m).ok_or_else(|| QuatError::NotAnOrder("basis is singular".into()))?;
        let in_lattice = |x: &Quaternion| exact::coordinates(&basis_inv, &x.0).iter().all(exact::is_integral);
        if !in_lattice(&Quaternion::one()) {
            return Err(QuatError::NotAnOrder("1 is not in the lattice".into()));
        }
        for x in &basis {
            for y in &basis {
                if !in_lattice(&algebra.mul(x, y)) {
                    return Err(QuatError::NotAnOrder("not closed under multiplication".into()));
                }
            }
        }
        let gram = exact::congruence(&m, &algebra.norm_gram());
        let det = exact::determinant(&gram).abs();
        let d = exact::exact_sqrt_integer(&det)
            .and_then(|d| d.to_u64())
            .ok_or_else(|| QuatError::NotAnOrder("trace form determinant is not a square".into()))?;
        Ok(Self { algebra: algebra.clone(), basis, basis_inv, discriminant: d })
    }

    /// `ℤ⟨1, i, j, k⟩`.
    pub fn standard(algebra: &QuaternionAlgebra) -> Self {
        let basis = (0..4).map(|k| Quaternion::from_ints([0, 1, 2, 3].map(|i| (i == k) as i64))).collect();
        Self::from_basis(algebra, basis).expect("integer parameters give an order")
    }

    pub fn algebra(&self) -> &QuaternionAlgebra {
        &self.algebra
    }

    pub fn basis(&self) -> &[Quaternion] {
        &self.basis
    }

    pub fn basis_matrix(&self) -> RatMatrix {
        basis_matrix(&self.basis)
    }

    /// Reduced discriminant `d(O)`.
    pub fn discriminant(&self) -> u64 {
        self.discriminant
    }

    pub fn is_maximal(&self) -> bool {
        self.discriminant == self.algebra.discriminant()
    }

    pub fn coordinates(&self, x: &Quaternion) -> Vec<Rational> {
        exact::coordinates(&self.basis_inv, &x.0)
    }

    pub fn contains(&self, x: &Quaternion) -> bool {
        self.coordinates(x).iter().all(exact::is_integral)
    }

    pub fn is_suborder_of(&self, other: &Self) -> bool {
        self.basis.iter().all(|x| other.contains(x))
    }

    /// `[other : self]` when `self ⊆ other`.
    pub fn index_in(&self, other: &Self) -> Option<BigInt> {
        if !self.is_suborder_of(other) {
            return None;
        }
        let rows: RatMatrix = self.basis.iter().map(|x| other.coordinates(x)).collect();
        let d = exact::determinant(&rows).abs();
        exact::is_integral(&d).then(|| d.to_integer())
    }

    pub fn element(&self, coords: &[i64]) -> Quaternion {
        let mut out = Quaternion::from_ints([0; 4]);
        for (c, e) in coords.iter().zip(&self.basis) {
            out = out.add(&e.scale(&exact::rat(*c)));
        }
        out
    }

    /// The order as a lattice in `(B, nrd)`.
    pub fn lattice(&self) -> EmbeddedLattice {
        EmbeddedLattice::new(self.basis_matrix(), &self.algebra.norm_gram()).expect("order lattice is well formed")
    }

    /// Whether `w O w⁻¹ = O`.
    pub fn is_normalized_by(&self, w: &Quaternion) -> bool {
        let Some(inv) = self.algebra.inverse(w) else { return false };
        self.basis.iter().all(|e| self.contains(&self.algebra.mul(&self.algebra.mul(w, e), &inv)))
    }

    /// All `x ∈ O` with `nrd(x) = m` and majorant at the base point `≤ radius`.
    pub fn elements_of_norm(&self, m: i64, radius: f64) -> Result<Vec<Quaternion>> {
        let lat = self.lattice();
        let coords = lat.vectors_of_norm(&self.algebra.base_point(), &exact::rat(m), radius)?;
        Ok(coords.iter().map(|c| Quaternion::from_coords(&lat.vector_exact(c))).collect())
    }

    /// Some element of reduced norm `m`, doubling the search radius from
    /// `radius` up to `max_radius`.
    pub fn find_element_of_norm(&self, m: i64, radius: f64, max_radius: f64) -> Result<Quaternion> {
        let mut r = radius;
        while r <= max_radius {
            let found = self.elements_of_norm(m, r)?;
            if let Some(x) = found.into_iter().min_by(|x, y| self.majorant(x).total_cmp(&self.majorant(y))) {
                return Ok(x);
            }
            r *= 2.0;
        }
        Err(QuatError::NotFound { norm: m, radius: max_radius })
    }

    pub fn majorant(&self, x: &Quaternion) -> f64 {
        let m = self.algebra.matrix(x);
        m.iter().map(|v| v * v).sum::<f64>() / 2.0
    }
}

/// Enlarges `order` prime by prime until its discriminant equals `d(B)`.
pub fn saturate(order: &QuaternionOrder) -> Result<QuaternionOrder> {
    let alg = order.algebra().clone();
    let target = alg.discriminant();
    let mut current = order.clone();
    while current.discriminant() != target {
        let d = current.discriminant();
        if !d.is_multiple_of(target) {
            return Err(QuatError::NotAnOrder(format!("discriminant {d} is not a multiple of d(B) = {target}")));
        }
        let p = *distinct_primes((d / target) as u128).first().expect("index > 1 has a prime factor");
        current = saturate_at(&current, p)?;
    }
    Ok(current)
}

fn saturate_at(order: &QuaternionOrder, p: u64) -> Result<QuaternionOrder> {
    let alg = order.algebra();
    let inv_p = Rational::new(BigInt::one(), BigInt::from(p));
    let pi = p as i64;
    for idx in 1..pi.pow(4) {
        let c = [idx % pi, idx / pi % pi, idx / (pi * pi) % pi, idx / (pi * pi * pi)];
        let x = order.element(&c).scale(&inv_p);
        if !exact::is_integral(&x.trd()) || !exact::is_integral(&alg.nrd(&x)) {
            continue;
        }
        let mut gens = order.basis().to_vec();
        gens.push(x);
        if let Some(basis) = ring_closure(alg, &gens) {
            let bigger = QuaternionOrder::from_basis(alg, basis)?;
            if bigger.discriminant() < order.discriminant() {
                return Ok(bigger);
            }
        }
    }
    Err(QuatError::SaturationFailure(p))
}

/// A maximal order containing `ℤ⟨1, i, j, k⟩`.
pub fn maximal_order(alg: &QuaternionAlgebra) -> Result<QuaternionOrder> {
    saturate(&QuaternionOrder::standard(alg))
}

/// `O ∩ v⁻¹ O v` for `nrd(v) = p` prime, `p ∤ d(B)`.
pub fn eichler_order(order: &QuaternionOrder, v: &Quaternion) -> Result<QuaternionOrder> {
    let alg = order.algebra();
    let n = alg.nrd(v);
    let text = exact::format_rational(&n);
    let p = exact::is_integral(&n)
        .then(|| n.to_integer().to_u64())
        .flatten()
        .filter(|&p| p > 1 && prime_factors(p as u128).len() == 1)
        .ok_or(QuatError::NotPrimeNorm(text))?;
    if alg.discriminant().is_multiple_of(p) {
        return Err(QuatError::DividesDiscriminant(p));
    }
    let inv = alg.inverse(v).expect("nonzero norm");
    let conj: RatMatrix = order.basis().iter().map(|e| alg.mul(&alg.mul(&inv, e), v).0.to_vec()).collect();
    let meet = exact::lattice_intersection(&order.basis_matrix(), &conj)
        .ok_or_else(|| QuatError::NotAnOrder("degenerate intersection".into()))?;
    QuaternionOrder::from_basis(alg, meet.iter().map(|r| Quaternion::from_coords(r)).collect())
}

/// Some element of `O` with reduced norm `d`, for `d | d(B)`, `d > 1`.
pub fn atkin_lehner_element(order: &QuaternionOrder, d: u64) -> Result<Quaternion> {
    let level = order.algebra().discriminant();
    if d <= 1 || !level.is_multiple_of(d) {
        return Err(QuatError::NotADivisor { d, level });
    }
    order.find_element_of_norm(d as i64, 4.0 * d as f64, 1e4 * d as f64)
}

/// All `γ ∈ O` with `nrd(γ) = 1` and majorant `≤ radius`.
pub fn unit_elements(order: &QuaternionOrder, radius: f64) -> Result<Vec<Quaternion>> {
    order.elements_of_norm(1, radius)
}

/// All `w ∈ O` with `trd(w) = t`, `nrd(w) = n`, majorant `≤ radius`.
pub fn embeddings_with_invariants(order: &QuaternionOrder, t: i64, n: i64, radius: f64) -> Result<Vec<Quaternion>> {
    let d = t * t - 4 * n;
    check_negative_fundamental(d)?;
    let level = order.algebra().discriminant();
    if (d.unsigned_abs()).gcd(&level) != 1 {
        return Err(QuatError::NotCoprime { disc: d, level });
    }
    let tr = exact::rat(t);
    Ok(order.elements_of_norm(n, radius)?.into_iter().filter(|w| w.trd() == tr).collect())
}

/// A fixed point of `ι_∞(w)` on the upper half plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CmPoint {
    pub tau: Complex64,
    pub generator: Quaternion,
    pub trace: i64,
    pub norm: i64,
}

impl CmPoint {
    pub fn disc(&self) -> i64 {
        self.trace * self.trace - 4 * self.norm
    }
}

pub fn mobius(m: &[f64; 4], tau: Complex64) -> Complex64 {
    (tau * m[0] + m[1]) / (tau * m[2] + m[3])
}

/// The root with positive imaginary part of `cτ² + (d − a)τ − b = 0`.
pub fn cm_point(alg: &QuaternionAlgebra, w: &Quaternion) -> Result<CmPoint> {
    let tr = w.trd();
    let nr = alg.nrd(w);
    let as_int = |x: &Rational| exact::is_integral(x).then(|| x.to_integer().to_i64()).flatten();
    let (t, n) = match (as_int(&tr), as_int(&nr)) {
        (Some(t), Some(n)) => (t, n),
        _ => return Err(QuatError::NotInUpperHalfPlane),
    };
    let disc = t * t - 4 * n;
    if disc >= 0 {
        return Err(QuatError::PositiveDiscriminant(disc));
    }
    let [a, b, c, d] = alg.matrix(w);
    if c == 0.0 {
        return Err(QuatError::NotInUpperHalfPlane);
    }
    let tau = Complex64::new((a - d) / (2.0 * c), (-disc as f64).sqrt() / (2.0 * c.abs()));
    let residual = (tau * tau * c + tau * (d - a) - b).norm();
    let scale = a.abs() + b.abs() + c.abs() + d.abs();
    debug_assert!(residual <= 1e-10 * scale.max(1.0) * (1.0 + tau.norm_sqr()), "fixed point residual {residual}");
    Ok(CmPoint { tau, generator: w.clone(), trace: t, norm: n })
}

const EQUIVALENCE_TOL: f64 = 1e-8;

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= EQUIVALENCE_TOL * a.norm().max(1.0)
}

/// A unit `γ` of majorant `≤ radius` with `ι_∞(γ)·τ₁ = τ₂`.
pub fn gamma_equivalent(
    tau1: Complex64,
    tau2: Complex64,
    order: &QuaternionOrder,
    radius: f64,
) -> Result<Option<Quaternion>> {
    if !(tau1.im > 0.0 && tau2.im > 0.0) {
        return Err(QuatError::NotInUpperHalfPlane);
    }
    let alg = order.algebra();
    let mut units = unit_elements(order, radius)?;
    units.sort_by(|x, y| order.majorant(x).total_cmp(&order.majorant(y)).then_with(|| y.0.cmp(&x.0)));
    Ok(units.into_iter().find(|g| close(mobius(&alg.matrix(g), tau1), tau2)))
}

/// Spatial hash of points in the upper half plane.
struct PointIndex {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl PointIndex {
    fn new(points: &[Complex64]) -> Self {
        let cell = 1e-6;
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(cell, *p)).or_default().push(i);
        }
        Self { cell, map }
    }

    fn key(cell: f64, p: Complex64) -> (i64, i64) {
        ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64)
    }

    fn find(&self, points: &[Complex64], q: Complex64) -> Option<usize> {
        let (kx, ky) = Self::key(self.cell, q);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.map.get(&(kx + dx, ky + dy)) {
                    if let Some(&i) = v.iter().find(|&&i| close(points[i], q)) {
                        return Some(i);
                    }
                }
            }
        }
        None
    }
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition of points into orbits under the given unit matrices; returns a
/// class label per point, labels numbered by first occurrence.
pub fn orbit_partition(points: &[Complex64], units: &[[f64; 4]]) -> Vec<usize> {
    let index = PointIndex::new(points);
    let mut parent: Vec<usize> = (0..points.len()).collect();
    for (i, &p) in points.iter().enumerate() {
        for g in units {
            if let Some(j) = index.find(points, mobius(g, p)) {
                let (ri, rj) = (find_root(&mut parent, i), find_root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut labels = HashMap::new();
    (0..points.len())
        .map(|i| {
            let r = find_root(&mut parent, i);
            let next = labels.len();
            *labels.entry(r).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CmClass {
    pub representative: CmPoint,
    pub size: usize,
}

/// Conjugacy classes of embeddings at one radius.
#[derive(Debug, Clone)]
pub struct CmPartition {
    pub radius: f64,
    pub unit_radius: f64,
    pub embeddings: usize,
    pub units: usize,
    pub classes: Vec<CmClass>,
}

/// Embedding classes under radius doubling.
#[derive(Debug, Clone)]
pub struct CmReport {
    pub disc: i64,
    pub trace: i64,
    pub norm: i64,
    pub embeds: bool,
    pub class_number: usize,
    pub expected: usize,
    pub schedule: Vec<CmPartition>,
    pub stabilized: bool,
}

impl CmReport {
    pub fn last(&self) -> &CmPartition {
        self.schedule.last().expect("non-empty schedule")
    }

    pub fn count(&self) -> usize {
        self.last().classes.len()
    }

    pub fn matches(&self) -> bool {
        self.stabilized && self.count() == self.expected
    }
}

/// Unit radius that connects any two fixed points of embeddings with
/// majorant `≤ radius`: for `w` with fixed point `τ`, the majorant is
/// `t²/4 + (|D|/4) cosh 2d(τ, i)`, and a unit moving `τ₁` to `τ₂` displaces
/// `i` by at most `d(τ₁, i) + d(τ₂, i)`.
fn connecting_unit_radius(radius: f64, t: i64, disc: i64) -> f64 {
    (4.0 * (radius - (t * t) as f64 / 4.0) / disc.unsigned_abs() as f64).max(1.0) * (1.0 + 1e-9) + 1e-9
}

/// Classes of embeddings at a single radius.
pub fn cm_partition(order: &QuaternionOrder, t: i64, n: i64, radius: f64) -> Result<CmPartition> {
    let alg = order.algebra();
    let ws = embeddings_with_invariants(order, t, n, radius)?;
    let points: Vec<CmPoint> = ws.iter().map(|w| cm_point(alg, w)).collect::<Result<_>>()?;
    let unit_radius = connecting_unit_radius(radius, t, t * t - 4 * n);
    let units: Vec<[f64; 4]> = unit_elements(order, unit_radius)?.iter().map(|g| alg.matrix(g)).collect();
    let taus: Vec<Complex64> = points.iter().map(|p| p.tau).collect();
    let labels = orbit_partition(&taus, &units);
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut classes: Vec<Option<CmClass>> = vec![None; count];
    for (p, &l) in points.iter().zip(&labels) {
        let entry = classes[l].get_or_insert_with(|| CmClass { representative: p.clone(), size: 0 });
        entry.size += 1;
        if order.majorant(&p.generator) < order.majorant(&entry.representative.generator) {
            entry.representative = p.clone();
        }
    }
    Ok(CmPartition {
        radius,
        unit_radius,
        embeddings: ws.len(),
        units: units.len(),
        classes: classes.into_iter().map(|c| c.expect("every label is used")).collect(),
    })
}

/// Doubles the radius from `radius` until the class count is unchanged over
/// two consecutive doublings (at most `max_doublings`).
pub fn cm_set(order: &QuaternionOrder, t: i64, n: i64, radius: f64) -> Result<CmReport> {
    cm_set_with(order, t, n, radius, 6)
}

pub fn cm_set_with(order: &QuaternionOrder, t: i64, n: i64, radius: f64, max_doublings: usize) -> Result<CmReport> {
    let disc = t * t - 4 * n;
    let h = class_number(disc)?;
    let embeds = order.algebra().embeds_field(disc);
    let expected = if embeds { h * order.algebra().atkin_lehner_order() } else { 0 };
    let mut schedule: Vec<CmPartition> = Vec::new();
    let mut r = radius;
    let mut stabilized = false;
    for _ in 0..=max_doublings {
        schedule.push(cm_partition(order, t, n, r)?);
        let k = schedule.len();
        if k >= 3 {
            let c: Vec<usize> = schedule[k - 3..].iter().map(|p| p.classes.len()).collect();
            if c[0] == c[1] && c[1] == c[2] {
                stabilized = true;
                break;
            }
        }
        r *= 2.0;
    }
    Ok(CmReport {
        disc,
        trace: t,
        norm: n,
        embeds,
        class_number: h,
        expected,
        schedule,
        stabilized,
    })
}

/// `(t, n)` with `t ∈ {0, 1}` and `t² − 4n = d`.
pub fn trace_norm_for(d: i64) -> (i64, i64) {
    let t = d.rem_euclid(2);
    (t, (t * t - d) / 4)
}

/// For each ramified `p`, whether `u ≡ u₀` modulo the maximal ideal above
/// `p` (otherwise `u ≡ ū₀` for roots of the same polynomial).
pub fn residue_pattern(order: &QuaternionOrder, u: &Quaternion, u0: &Quaternion) -> Vec<bool> {
    let alg = order.algebra();
    let n = alg.nrd(&u.sub(u0));
    alg.ramified_primes()
        .iter()
        .map(|&p| {
            let q = &n / exact::rat(p as i64);
            exact::is_integral(&q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, rat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn preset6() -> QuaternionAlgebra {
        QuaternionAlgebra::preset("preset6").unwrap()
    }

    /// Solubility of `a x² + b y² = z²` with a primitive solution mod `p^k`
    /// having a unit coordinate, lifted by Hensel's lemma.
    fn brute_hilbert(a: i64, b: i64, p: u64) -> i8 {
        let k = if p == 2 { 6 } else { 3 };
        let m = (p as i64).pow(k);
        // Reduce to the cases where valuations are 0 or 1.
        let reduce = |x: i64| {
            let mut x = x;
            while x % (p as i64 * p as i64) == 0 {
                x /= p as i64 * p as i64;
            }
            x
        };
        let (a, b) = (reduce(a), reduce(b));
        let pi = p as i64;
        let mut any_root = vec![false; m as usize];
        let mut unit_root = vec![false; m as usize];
        for z in 0..m {
            let r = (z * z % m) as usize;
            any_root[r] = true;
            if z % pi != 0 {
                unit_root[r] = true;
            }
        }
        for x in 0..m {
            for y in 0..m {
                let r = (a * x * x + b * y * y).rem_euclid(m) as usize;
                let primitive_xy = x % pi != 0 || y % pi != 0;
                if (primitive_xy && any_root[r]) || unit_root[r] {
                    return 1;
                }
            }
        }
        -1
    }

    #[test]
    fn hilbert_symbol_matches_brute_force() {
        for (a, b) in [(-1, -1), (-1, 3), (2, 5), (-2, 5), (3, 5), (-1, 11), (6, -7), (5, 10)] {
            for p in [2u64, 3, 5, 7, 11] {
                let s = hilbert_symbol(&rat(a), &rat(b), Place::Finite(p));
                assert_eq!(s, brute_hilbert(a, b, p), "({a},{b})_{p}");
            }
        }
        assert_eq!(hilbert_symbol(&rat(-1), &rat(-1), Place::Finite(2)), -1);
        assert_eq!(hilbert_symbol(&rat(1), &frac(7, 3), Place::Finite(7)), 1);
    }

    #[test]
    fn reciprocity_and_discriminants() {
        for (a, b) in [(-1i64, 3i64), (-2, 5), (-1, 11), (3, 7), (-3, 10)] {
            let mut places: Vec<Place> = prime_factors((2 * a * b).unsigned_abs() as u128)
                .into_iter()
                .map(Place::Finite)
                .collect();
            places.dedup();
            places.push(Place::Infinite);
            let prod: i8 = places.iter().map(|&v| hilbert_symbol(&rat(a), &rat(b), v)).product();
            assert_eq!(prod, 1);
        }
        assert_eq!(preset6().discriminant(), 6);
        let b10 = QuaternionAlgebra::preset("preset10").unwrap();
        assert_eq!(b10.discriminant(), 10);
        assert_eq!(b10.ramified_primes().len() % 2, 0);
        assert_eq!(QuaternionAlgebra::preset("preset22").unwrap().discriminant(), 22);
        assert!(matches!(QuaternionAlgebra::from_ints(1, 1), Err(QuatError::Split(..))));
        assert!(matches!(QuaternionAlgebra::from_ints(-1, -1), Err(QuatError::Definite(..))));
        let scaled = QuaternionAlgebra::new(&frac(-1, 4), &rat(3)).unwrap();
        assert_eq!(scaled.discriminant(), 6);
    }

    #[test]
    fn norm_trace_and_multiplicativity() {
        let alg = preset6();
        let one = Quaternion::one();
        assert_eq!(alg.nrd(&one), rat(1));
        assert_eq!(alg.trd(&one), rat(2));
        let i = Quaternion::from_ints([0, 1, 0, 0]);
        assert_eq!(alg.nrd(&i), rat(1));
        assert_eq!(alg.trd(&i), rat(0));
        assert_eq!(alg.mul(&i, &i), Quaternion::scalar(rat(-1)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut r = || Quaternion([0; 4].map(|_| frac(rng.gen_range(-9..=9), rng.gen_range(1..=5))));
        for _ in 0..100 {
            let (x, y) = (r(), r());
            assert_eq!(alg.nrd(&alg.mul(&x, &y)), alg.nrd(&x) * alg.nrd(&y));
            assert_eq!(alg.mul(&x, &x.conj()), Quaternion::scalar(alg.nrd(&x)));
            assert_eq!(x.conj().trd(), x.trd());
        }
    }

    #[test]
    fn splitting_is_an_algebra_map() {
        for name in ["preset6", "preset10", "preset22"] {
            let alg = QuaternionAlgebra::preset(name).unwrap();
            let mm = |x: [f64; 4], y: [f64; 4]| {
                [x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]]
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for _ in 0..100 {
                let x = Quaternion([0; 4].map(|_| frac(rng.gen_range(-20..=20), rng.gen_range(1..=4))));
                let y = Quaternion([0; 4].map(|_| frac(rng.gen_range(-20..=20), rng.gen_range(1..=4))));
                let m = alg.matrix(&x);
                let det = m[0] * m[3] - m[1] * m[2];
                let n = exact::to_f64(&alg.nrd(&x));
                assert!((det - n).abs() <= 1e-10 * n.abs().max(1.0));
                assert!((m[0] + m[3] - exact::to_f64(&x.trd())).abs() < 1e-10);
                let lhs = alg.matrix(&alg.mul(&x, &y));
                let rhs = mm(m, alg.matrix(&y));
                for k in 0..4 {
                    assert!((lhs[k] - rhs[k]).abs() <= 1e-9 * (1.0 + lhs[k].abs()));
                }
            }
        }
    }

    #[test]
    fn maximal_orders_have_algebra_discriminant() {
        for name in ["preset6", "preset10", "preset22"] {
            let alg = QuaternionAlgebra::preset(name).unwrap();
            let o = maximal_order(&alg).unwrap();
            assert_eq!(o.discriminant(), alg.discriminant(), "{name}");
            assert!(o.is_maximal());
            let again = saturate(&o).unwrap();
            assert_eq!(again.basis_matrix(), o.basis_matrix());
        }
        let std = QuaternionOrder::standard(&preset6());
        assert_eq!(std.discriminant(), 12);
    }

    #[test]
    fn class_numbers_agree() {
        assert_eq!(class_number(-4).unwrap(), 1);
        assert_eq!(class_number(-23).unwrap(), 3);
        assert_eq!(class_number(-20).unwrap(), 2);
        assert_eq!(class_number(-91).unwrap(), 2);
        for d in -2000i64..-2 {
            if is_fundamental_discriminant(d) {
                assert_eq!(class_number(d).unwrap(), class_number_dirichlet(d).unwrap(), "D = {d}");
            }
        }
        assert!(matches!(class_number(-12), Err(QuatError::NonFundamentalDiscriminant(-12))));
    }

    #[test]
    fn units_and_norm_minus_one() {
        let o = maximal_order(&preset6()).unwrap();
        let units = unit_elements(&o, 60.0).unwrap();
        assert!(units.contains(&Quaternion::one()));
        assert!(units.contains(&Quaternion::scalar(rat(-1))));
        let small: Vec<&Quaternion> = units.iter().filter(|u| o.majorant(u) <= 5.0).collect();
        for x in &small {
            for y in &small {
                let p = o.algebra().mul(x, y);
                assert!(units.contains(&p));
            }
        }
        let e = o.find_element_of_norm(-1, 2.0, 1e3).unwrap();
        assert_eq!(o.algebra().nrd(&e), rat(-1));
        assert!(o.contains(&e));
    }

    #[test]
    fn eichler_orders() {
        let o = maximal_order(&preset6()).unwrap();
        for p in [5i64, 7] {
            let v = o.find_element_of_norm(p, 4.0, 1e4).unwrap();
            let e = eichler_order(&o, &v).unwrap();
            assert_eq!(e.discriminant(), p as u64 * 6);
            assert_eq!(e.index_in(&o), Some(BigInt::from(p)));
        }
        assert!(matches!(eichler_order(&o, &Quaternion::one()), Err(QuatError::NotPrimeNorm(_))));
        let v2 = o.find_element_of_norm(2, 4.0, 1e4).unwrap();
        assert!(matches!(eichler_order(&o, &v2), Err(QuatError::DividesDiscriminant(2))));
    }

    #[test]
    fn atkin_lehner_elements_normalize() {
        let o = maximal_order(&preset6()).unwrap();
        for d in [2u64, 3, 6] {
            let w = atkin_lehner_element(&o, d).unwrap();
            assert_eq!(o.algebra().nrd(&w), rat(d as i64));
            assert_eq!(o.algebra().nrd(&o.algebra().mul(&w, &w)), rat((d * d) as i64));
            assert!(o.is_normalized_by(&w));
        }
        assert!(matches!(atkin_lehner_element(&o, 1), Err(QuatError::NotADivisor { .. })));
        assert_eq!(o.algebra().atkin_lehner_order(), 4);
    }

    #[test]
    fn cm_points_and_equivariance() {
        let alg = QuaternionAlgebra::from_ints(3, -1).unwrap();
        // ι(j) = [[0, −1], [1, 0]] for a > 0.
        let j = Quaternion::from_ints([0, 0, 1, 0]);
        assert_eq!(alg.matrix(&j), [0.0, -1.0, 1.0, 0.0]);
        let p = cm_point(&alg, &j).unwrap();
        assert!((p.tau - Complex64::new(0.0, 1.0)).norm() < 1e-14);

        let o = maximal_order(&preset6()).unwrap();
        let (t, n) = trace_norm_for(-19);
        let ws = embeddings_with_invariants(&o, t, n, 60.0).unwrap();
        assert!(!ws.is_empty());
        let units = unit_elements(&o, 20.0).unwrap();
        for w in ws.iter().take(5) {
            assert_eq!(o.algebra().mul(w, w).sub(&w.scale(&rat(t))), Quaternion::scalar(rat(-n)));
            let tau = cm_point(o.algebra(), w).unwrap().tau;
            for g in units.iter().take(8) {
                let conj = o.algebra().mul(&o.algebra().mul(g, w), &o.algebra().inverse(g).unwrap());
                let lhs = cm_point(o.algebra(), &conj).unwrap().tau;
                let rhs = mobius(&o.algebra().matrix(g), tau);
                assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
                let found = gamma_equivalent(tau, rhs, &o, 20.0).unwrap();
                assert!(found.is_some());
            }
            assert_eq!(gamma_equivalent(tau, tau, &o, 20.0).unwrap(), Some(Quaternion::one()));
        }
        let other = embeddings_with_invariants(&o, 1, 11, 200.0).unwrap();
        let tau_a = cm_point(o.algebra(), &ws[0]).unwrap().tau;
        let tau_b = cm_point(o.algebra(), &other[0]).unwrap().tau;
        assert_eq!(gamma_equivalent(tau_a, tau_b, &o, 50.0).unwrap(), None);
    }

    #[test]
    fn embedding_guards_and_non_embedding_fields() {
        let o = maximal_order(&preset6()).unwrap();
        assert!(matches!(embeddings_with_invariants(&o, 4, 1, 10.0), Err(QuatError::PositiveDiscriminant(12))));
        assert!(matches!(embeddings_with_invariants(&o, 0, 3, 10.0), Err(QuatError::NonFundamentalDiscriminant(-12))));
        assert!(matches!(embeddings_with_invariants(&o, 0, 5, 10.0), Err(QuatError::NotCoprime { .. })));
        // 3 splits in Q(√−23): no embedding into d(B) = 6.
        assert!(!o.algebra().embeds_field(-23));
        let (t, n) = trace_norm_for(-23);
        assert!(embeddings_with_invariants(&o, t, n, 400.0).unwrap().is_empty());
        assert!(o.algebra().embeds_field(-19));
    }

    #[test]
    fn cm_count_d6_disc_minus_19() {
        let o = maximal_order(&preset6()).unwrap();
        let (t, n) = trace_norm_for(-19);
        let r = cm_set(&o, t, n, 40.0).unwrap();
        assert!(r.stabilized);
        assert_eq!(r.count(), 4);
        assert!(r.matches());
    }

    #[test]
    fn residue_patterns_are_binary() {
        let o = maximal_order(&preset6()).unwrap();
        let (t, n) = trace_norm_for(-19);
        let ws = embeddings_with_invariants(&o, t, n, 100.0).unwrap();
        let u0 = &ws[0];
        assert!(residue_pattern(&o, u0, u0).iter().all(|&b| b));
        assert!(residue_pattern(&o, &u0.conj(), u0).iter().all(|&b| !b));
    }
}
