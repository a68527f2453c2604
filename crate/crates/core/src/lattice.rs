//! Enumeration of lattice vectors in ellipsoids: short vectors of a positive
//! definite form, and vectors of fixed norm under an indefinite form inside
//! a majorant ball.
//!
//! Bounding boxes come from a floating-point Cholesky factor with a small
//! slack; every candidate is then accepted or rejected with exact integer
//! arithmetic, so the returned sets are exact.

use crate::exact::{self, RatMatrix, Rational};
use crate::kernels::{KernelError, KernelParams};
use crate::linalg::{self, Mat};
use crate::qspace::{MomentMatrix, PlanePoint};
use num::integer::Integer;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("gram matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("about {predicted:.3e} candidates predicted, above the cap of {cap}")]
    BoundTooLarge { predicted: f64, cap: usize },
    #[error("moment matrix is not positive definite")]
    DegenerateT,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("integer overflow in exact arithmetic")]
    Overflow,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Coords = Vec<i64>;

pub const DEFAULT_CAP: usize = 10_000_000;

/// A symmetric rational form rescaled to integers: `(x, y) = xᵀ G y / den`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerForm {
    gram: Vec<Vec<i128>>,
    den: i128,
}

impl IntegerForm {
    pub fn new(gram: &RatMatrix) -> Result<Self, LatticeError> {
        let mut den = BigInt::one();
        for row in gram {
            for x in row {
                den = den.lcm(x.denom());
            }
        }
        let d = Rational::from_integer(den.clone());
        let rows: Option<Vec<Vec<i128>>> =
            gram.iter().map(|r| r.iter().map(|x| (x * &d).to_integer().to_i128()).collect()).collect();
        Ok(Self { gram: rows.ok_or(LatticeError::Overflow)?, den: den.to_i128().ok_or(LatticeError::Overflow)? })
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    /// `den · (x, y)`.
    pub fn scaled_pairing(&self, x: &[i64], y: &[i64]) -> i128 {
        let mut acc = 0i128;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            let row: i128 = self.gram[i].iter().zip(y).map(|(g, &yj)| g * yj as i128).sum();
            acc += xi as i128 * row;
        }
        acc
    }

    pub fn den(&self) -> i128 {
        self.den
    }

    pub fn pairing(&self, x: &[i64], y: &[i64]) -> Rational {
        Rational::new(BigInt::from(self.scaled_pairing(x, y)), BigInt::from(self.den))
    }

    /// Whether `(x, x) / 2 == m` exactly.
    pub fn has_norm(&self, x: &[i64], m: &Rational) -> bool {
        // (x,x) = 2m  ⟺  scaled · m_den = 2 · den · m_num
        let lhs = BigInt::from(self.scaled_pairing(x, x)) * m.denom();
        let rhs = BigInt::from(2 * self.den) * m.numer();
        lhs == rhs
    }
}

/// Float ellipsoid enumeration `xᵀ G x ≤ bound` (with slack), excluding 0.
fn enumerate_ellipsoid(g: &Mat, bound: f64, cap: usize) -> Result<Vec<Coords>, LatticeError> {
    let n = g.len();
    let l = linalg::cholesky(g).ok_or(LatticeError::NotPositiveDefinite)?;
    let det: f64 = (0..n).map(|i| l[i][i] * l[i][i]).product();
    let predicted = ball_volume(n, bound.max(0.0).sqrt()) / det.sqrt();
    if predicted > cap as f64 {
        return Err(LatticeError::BoundTooLarge { predicted, cap });
    }
    if bound < 0.0 {
        return Ok(Vec::new());
    }
    // xᵀGx = Σ_i qd_i (x_i + Σ_{j>i} mu_ij x_j)², mu from Gᵀ = R ᵀR, R = Lᵀ.
    let qd: Vec<f64> = (0..n).map(|i| l[i][i] * l[i][i]).collect();
    let mu: Mat = (0..n).map(|i| (0..n).map(|j| if j > i { l[j][i] / l[i][i] } else { 0.0 }).collect()).collect();
    let budget = bound * (1.0 + 1e-9) + 1e-12;
    let top = n - 1;
    let half = (budget / qd[top]).sqrt() + 1e-9;
    let hi = half.floor() as i64;
    let count = AtomicUsize::new(0);
    let overflow = AtomicBool::new(false);
    let chunks: Vec<Vec<Coords>> = (-hi..=hi)
        .into_par_iter()
        .map(|xt| {
            let mut out = Vec::new();
            let mut x = vec![0i64; n];
            x[top] = xt;
            let rest = budget - qd[top] * (xt as f64).powi(2);
            if rest >= 0.0 {
                descend(&qd, &mu, top, rest, &mut x, &mut out, &count, &overflow, cap);
            }
            out
        })
        .collect();
    if overflow.load(Ordering::Relaxed) {
        return Err(LatticeError::BoundTooLarge { predicted: count.load(Ordering::Relaxed) as f64, cap });
    }
    Ok(chunks.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn descend(
    qd: &[f64],
    mu: &Mat,
    level: usize,
    budget: f64,
    x: &mut Vec<i64>,
    out: &mut Vec<Coords>,
    count: &AtomicUsize,
    overflow: &AtomicBool,
    cap: usize,
) {
    if overflow.load(Ordering::Relaxed) {
        return;
    }
    if level == 0 {
        if x.iter().any(|&c| c != 0) {
            out.push(x.clone());
            if count.fetch_add(1, Ordering::Relaxed) + 1 > cap {
                overflow.store(true, Ordering::Relaxed);
            }
        }
        return;
    }
    let i = level - 1;
    let center: f64 = -(i + 1..x.len()).map(|j| mu[i][j] * x[j] as f64).sum::<f64>();
    let half = (budget.max(0.0) / qd[i]).sqrt() + 1e-9;
    let lo = (center - half).ceil() as i64;
    let hi = (center + half).floor() as i64;
    for xi in lo..=hi {
        let d = xi as f64 - center;
        let rest = budget - qd[i] * d * d;
        if rest < -1e-12 {
            continue;
        }
        x[i] = xi;
        descend(qd, mu, i, rest, x, out, count, overflow, cap);
    }
    x[i] = 0;
}

fn ball_volume(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    let (lg, _) = crate::specfun::ln_gamma_real(nf / 2.0 + 1.0).unwrap_or((0.0, 1.0));
    (nf / 2.0 * std::f64::consts::PI.ln() - lg + nf * r.ln()).exp()
}

/// A positive definite lattice `Zⁿ` with rational Gram matrix; `q(x) = xᵀGx`.
#[derive(Debug, Clone)]
pub struct Lattice {
    gram: RatMatrix,
    gram_f: Mat,
    form: IntegerForm,
    cap: usize,
}

impl Lattice {
    pub fn new(gram: RatMatrix) -> Result<Self, LatticeError> {
        if !exact::is_symmetric(&gram) || !leading_minors_positive(&gram) {
            return Err(LatticeError::NotPositiveDefinite);
        }
        let gram_f = exact::matrix_to_f64(&gram);
        let form = IntegerForm::new(&gram)?;
        Ok(Self { gram, gram_f, form, cap: DEFAULT_CAP })
    }

    pub fn with_cap(self, cap: usize) -> Self {
        Self { cap, ..self }
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    pub fn gram(&self) -> &RatMatrix {
        &self.gram
    }

    pub fn q(&self, x: &[i64]) -> Rational {
        self.form.pairing(x, x)
    }

    /// All nonzero `x` with `q(x) ≤ bound`, in lexicographic order.
    pub fn short_vectors(&self, bound: &Rational) -> Result<Vec<Coords>, LatticeError> {
        let mut out = enumerate_ellipsoid(&self.gram_f, exact::to_f64(bound), self.cap)?;
        let lhs_scale = bound.denom().clone();
        let rhs = BigInt::from(self.form.den) * bound.numer();
        out.retain(|x| BigInt::from(self.form.scaled_pairing(x, x)) * &lhs_scale <= rhs);
        out.sort();
        Ok(out)
    }
}

fn leading_minors_positive(g: &RatMatrix) -> bool {
    (1..=g.len()).all(|k| {
        let sub: RatMatrix = g[..k].iter().map(|r| r[..k].to_vec()).collect();
        exact::determinant(&sub).is_positive()
    })
}

/// All `λ` with `Q(λ) = m` under the (possibly indefinite) `ambient` form and
/// `λᵀ M λ ≤ radius` for the positive definite majorant Gram `M`.
pub fn vectors_of_norm(
    ambient: &IntegerForm,
    majorant: &Mat,
    m: &Rational,
    radius: f64,
    cap: usize,
) -> Result<Vec<Coords>, LatticeError> {
    if majorant.len() != ambient.rank() {
        return Err(LatticeError::DimensionMismatch { expected: ambient.rank(), found: majorant.len() });
    }
    let mut out = enumerate_ellipsoid(majorant, radius, cap)?;
    out.retain(|x| ambient.has_norm(x, m) && quad_int(majorant, x) <= radius);
    out.sort();
    Ok(out)
}

fn to_f(x: &[i64]) -> Vec<f64> {
    x.iter().map(|&c| c as f64).collect()
}

fn quad_int(m: &Mat, x: &[i64]) -> f64 {
    linalg::quad_form(m, &to_f(x))
}

/// All pairs `(v, w)` with moment matrix `T` and both majorants `≤ radius`.
pub fn pairs_with_moment(
    ambient: &IntegerForm,
    majorant: &Mat,
    t: &MomentMatrix<Rational>,
    radius: f64,
    cap: usize,
) -> Result<Vec<(Coords, Coords)>, LatticeError> {
    if !t.is_positive_definite() {
        return Err(LatticeError::DegenerateT);
    }
    let vs = vectors_of_norm(ambient, majorant, &t.a, radius, cap)?;
    let ws = if t.c == t.a { vs.clone() } else { vectors_of_norm(ambient, majorant, &t.c, radius, cap)? };
    // (v, w) = 2b  ⟺  vᵀ G_int w · b_den = 2 den b_num
    let target = BigInt::from(2 * ambient.den()) * t.b.numer();
    let bden = t.b.denom().clone();
    let mut out: Vec<(Coords, Coords)> = vs
        .par_iter()
        .flat_map_iter(|v| {
            let gv: Vec<i128> =
                (0..v.len()).map(|j| (0..v.len()).map(|i| v[i] as i128 * ambient.gram[i][j]).sum()).collect();
            let target = &target;
            let bden = &bden;
            ws.iter().filter_map(move |w| {
                let ip: i128 = gv.iter().zip(w).map(|(a, &b)| a * b as i128).sum();
                (BigInt::from(ip) * bden == *target).then(|| (v.clone(), w.clone()))
            })
        })
        .collect();
    out.sort();
    Ok(out)
}

/// `Σ majorant(λ)^{−(s+s₀)/2}` over `Q(λ) = m` within the radius.
pub fn domination_sum(
    ambient: &IntegerForm,
    majorant: &Mat,
    m: &Rational,
    p: &KernelParams,
    radius: f64,
    cap: usize,
) -> Result<f64, LatticeError> {
    let s = p.real_s()?;
    let e = (s + p.s0()) / 2.0;
    let vs = vectors_of_norm(ambient, majorant, m, radius, cap)?;
    Ok(vs.iter().map(|x| quad_int(majorant, x).powf(-e)).sum())
}

/// A full-rank lattice in a rational quadratic space, given by basis rows in
/// ambient coordinates.
#[derive(Debug, Clone)]
pub struct EmbeddedLattice {
    basis: RatMatrix,
    basis_f: Mat,
    form: IntegerForm,
    gram: RatMatrix,
}

impl EmbeddedLattice {
    /// `space_gram` is the ambient bilinear form in the coordinates the basis
    /// rows are written in.
    pub fn new(basis: RatMatrix, space_gram: &RatMatrix) -> Result<Self, LatticeError> {
        let n = space_gram.len();
        if basis.iter().any(|r| r.len() != n) {
            return Err(LatticeError::DimensionMismatch { expected: n, found: basis[0].len() });
        }
        let gram = exact::congruence(&basis, space_gram);
        let form = IntegerForm::new(&gram)?;
        let basis_f = exact::matrix_to_f64(&basis);
        Ok(Self { basis, basis_f, form, gram })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &RatMatrix {
        &self.basis
    }

    pub fn gram(&self) -> &RatMatrix {
        &self.gram
    }

    pub fn form(&self) -> &IntegerForm {
        &self.form
    }

    /// Ambient real vector of the lattice element with coordinates `x`.
    pub fn vector(&self, x: &[i64]) -> Vec<f64> {
        let n = self.basis_f[0].len();
        let mut out = vec![0.0; n];
        for (xi, row) in x.iter().zip(&self.basis_f) {
            if *xi != 0 {
                for k in 0..n {
                    out[k] += *xi as f64 * row[k];
                }
            }
        }
        out
    }

    pub fn vector_exact(&self, x: &[i64]) -> Vec<Rational> {
        let n = self.basis[0].len();
        let mut out = vec![Rational::zero(); n];
        for (xi, row) in x.iter().zip(&self.basis) {
            if *xi != 0 {
                let c = exact::rat(*xi);
                for k in 0..n {
                    out[k] += &c * &row[k];
                }
            }
        }
        out
    }

    /// Majorant Gram `B M Bᵀ` in lattice coordinates.
    pub fn majorant_gram(&self, z: &PlanePoint) -> Mat {
        let m = z.majorant_matrix();
        let bm = linalg::mat_mul(&self.basis_f, &m);
        linalg::mat_mul(&bm, &linalg::transpose(&self.basis_f))
    }

    pub fn vectors_of_norm(&self, z: &PlanePoint, m: &Rational, radius: f64) -> Result<Vec<Coords>, LatticeError> {
        vectors_of_norm(&self.form, &self.majorant_gram(z), m, radius, DEFAULT_CAP)
    }

    pub fn pairs_with_moment(
        &self,
        z: &PlanePoint,
        t: &MomentMatrix<Rational>,
        radius: f64,
    ) -> Result<Vec<(Coords, Coords)>, LatticeError> {
        pairs_with_moment(&self.form, &self.majorant_gram(z), t, radius, DEFAULT_CAP)
    }

    pub fn moment(&self, v: &[i64], w: &[i64]) -> MomentMatrix<Rational> {
        let half = exact::frac(1, 2);
        MomentMatrix::new(
            self.form.pairing(v, v) * &half,
            self.form.pairing(v, w) * &half,
            self.form.pairing(w, w) * &half,
        )
    }
}
