//! Rational quadratic spaces `(V, Q)` with `Q(v) = (v, v)/2`, points of the
//! symmetric domain of oriented negative definite planes, projections,
//! majorants, Siegel Gaussians and moment matrices.

use crate::exact::{self, RatMatrix, Rational};
use crate::linalg::{self, Mat};
use num::complex::Complex64;
use num::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QSpaceError {
    #[error("gram matrix is not square and symmetric")]
    NotSymmetric,
    #[error("gram matrix is degenerate (zero determinant)")]
    DegenerateForm,
    #[error("stored signature {stored:?} does not match computed {computed:?}")]
    SignatureMismatch { stored: (usize, usize), computed: (usize, usize) },
    #[error("vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("spanning vectors do not span a negative definite plane")]
    NotNegativeDefinite,
    #[error("plane basis is degenerate (gram determinant {0:.3e})")]
    DegeneratePlane(f64),
    #[error("the H x H chart needs signature (2, 2), got {0:?}")]
    ChartUnavailable((usize, usize)),
    #[error("chart point {0} is not in the upper half-plane")]
    NotInUpperHalfPlane(Complex64),
    #[error("splitting does not carry Q to det (max deviation {0:.3e})")]
    SplittingMismatch(f64),
    #[error("vector is isotropic; reflection undefined")]
    Isotropic,
    #[error("malformed quadratic space description: {0}")]
    Parse(String),
}

/// A non-degenerate rational quadratic space given by the Gram matrix of the
/// bilinear form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadSpace {
    gram: RatMatrix,
    gram_f: Mat,
    signature: (usize, usize),
}

impl QuadSpace {
    pub fn new(gram: RatMatrix) -> Result<Self, QSpaceError> {
        if gram.is_empty() || !exact::is_symmetric(&gram) {
            return Err(QSpaceError::NotSymmetric);
        }
        let signature = signature_of(&gram)?;
        let gram_f = exact::matrix_to_f64(&gram);
        Ok(Self { gram, gram_f, signature })
    }

    /// Builds a space and checks that the supplied signature is the true one.
    pub fn with_signature(gram: RatMatrix, signature: (usize, usize)) -> Result<Self, QSpaceError> {
        let space = Self::new(gram)?;
        if space.signature != signature {
            return Err(QSpaceError::SignatureMismatch { stored: signature, computed: space.signature });
        }
        Ok(space)
    }

    pub fn diagonal(entries: &[i64]) -> Result<Self, QSpaceError> {
        let n = entries.len();
        let gram = (0..n)
            .map(|i| (0..n).map(|j| if i == j { exact::rat(entries[i]) } else { Rational::zero() }).collect())
            .collect();
        Self::new(gram)
    }

    /// `diag(1, …, 1, −1, −1)` with `n` positive entries: signature `(n, 2)`.
    pub fn standard(n: usize) -> Self {
        let mut d = vec![1i64; n];
        d.extend([-1, -1]);
        Self::diagonal(&d).expect("standard form is non-degenerate")
    }

    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    pub fn gram(&self) -> &RatMatrix {
        &self.gram
    }

    pub fn gram_f64(&self) -> &Mat {
        &self.gram_f
    }

    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        linalg::bilinear(&self.gram_f, u, v)
    }

    /// `Q(v) = (v, v)/2`.
    pub fn q(&self, v: &[f64]) -> f64 {
        0.5 * self.bilinear(v, v)
    }

    pub fn bilinear_exact(&self, u: &[Rational], v: &[Rational]) -> Rational {
        exact::bilinear(&self.gram, u, v)
    }

    pub fn q_exact(&self, v: &[Rational]) -> Rational {
        self.bilinear_exact(v, v) / exact::rat(2)
    }

    fn check_len(&self, v: &[f64]) -> Result<(), QSpaceError> {
        if v.len() != self.dim() {
            return Err(QSpaceError::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(())
    }

    /// Reflection `x ↦ x − (x, r)/Q(r) · r` as a matrix acting on columns.
    pub fn reflection(&self, r: &[f64]) -> Result<Mat, QSpaceError> {
        self.check_len(r)?;
        let qr = self.q(r);
        if qr.abs() < 1e-12 * linalg::norm_inf(r).powi(2).max(1e-300) {
            return Err(QSpaceError::Isotropic);
        }
        let gr = linalg::mat_vec(&self.gram_f, r);
        let n = self.dim();
        Ok((0..n)
            .map(|i| (0..n).map(|j| (if i == j { 1.0 } else { 0.0 }) - r[i] * gr[j] / qr).collect())
            .collect())
    }

    /// Basis of the orthogonal complement of `vecs` in `V ⊗ R`.
    pub fn orthogonal_complement(&self, vecs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let rows: Mat = vecs.iter().map(|v| linalg::mat_vec(&self.gram_f, v)).collect();
        linalg::nullspace(&rows, self.dim(), 1e-12)
    }
}

/// Counts of positive and negative squares, by exact congruence
/// diagonalization over Q.
pub fn signature(space: &QuadSpace) -> (usize, usize) {
    space.signature
}

fn signature_of(gram: &RatMatrix) -> Result<(usize, usize), QSpaceError> {
    let n = gram.len();
    let mut a = gram.clone();
    let (mut pos, mut neg) = (0, 0);
    for k in 0..n {
        if a[k][k].is_zero() {
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
            } else if let Some(j) = (k + 1..n).find(|&j| !a[k][j].is_zero()) {
                // e_k ← e_k + e_j makes the diagonal entry 2 a_kj ≠ 0.
                for c in 0..n {
                    let t = a[j][c].clone();
                    a[k][c] += t;
                }
                for r in 0..n {
                    let t = a[r][j].clone();
                    a[r][k] += t;
                }
            } else {
                return Err(QSpaceError::DegenerateForm);
            }
        }
        let p = a[k][k].clone();
        if p.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for r in k + 1..n {
            if a[r][k].is_zero() {
                continue;
            }
            let f = &a[r][k] / &p;
            for c in k..n {
                let t = &f * &a[k][c];
                a[r][c] -= t;
            }
        }
        for c in k + 1..n {
            a[k][c] = Rational::zero();
        }
        for r in k + 1..n {
            a[r][k] = Rational::zero();
        }
    }
    Ok((pos, neg))
}

#[derive(Serialize, Deserialize)]
struct QuadSpaceRepr {
    dim: usize,
    gram: Vec<String>,
    signature: (usize, usize),
}

impl Serialize for QuadSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        QuadSpaceRepr {
            dim: self.dim(),
            gram: self.gram.iter().flatten().map(exact::format_rational).collect(),
            signature: self.signature,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = QuadSpaceRepr::deserialize(d)?;
        if r.gram.len() != r.dim * r.dim {
            return Err(D::Error::custom(QSpaceError::Parse(format!(
                "gram has {} entries, expected {}",
                r.gram.len(),
                r.dim * r.dim
            ))));
        }
        let vals: Option<Vec<Rational>> = r.gram.iter().map(|s| exact::parse_rational(s)).collect();
        let vals = vals.ok_or_else(|| D::Error::custom(QSpaceError::Parse("bad rational".into())))?;
        let gram = vals.chunks(r.dim).map(|c| c.to_vec()).collect();
        QuadSpace::with_signature(gram, r.signature).map_err(D::Error::custom)
    }
}

/// An oriented negative definite plane in `V ⊗ R`.
///
/// The basis is orthonormalized once at construction, `(e_k, e_k) = −1`,
/// so projections cost two inner products.
#[derive(Debug, Clone)]
pub struct PlanePoint {
    gram: Mat,
    basis: [Vec<f64>; 2],
    orientation: i8,
    chart: Option<(Complex64, Complex64)>,
}

impl PlanePoint {
    pub fn new(space: &QuadSpace, u1: &[f64], u2: &[f64]) -> Result<Self, QSpaceError> {
        Self::from_gram(space.gram_f64().clone(), u1, u2)
    }

    fn from_gram(gram: Mat, u1: &[f64], u2: &[f64]) -> Result<Self, QSpaceError> {
        let n = gram.len();
        for u in [u1, u2] {
            if u.len() != n {
                return Err(QSpaceError::DimensionMismatch { expected: n, found: u.len() });
            }
        }
        let g11 = linalg::bilinear(&gram, u1, u1);
        let g12 = linalg::bilinear(&gram, u1, u2);
        let g22 = linalg::bilinear(&gram, u2, u2);
        let det = g11 * g22 - g12 * g12;
        let scale = (g11.abs() * g22.abs()).max(f64::MIN_POSITIVE);
        if det.abs() <= 1e-10 * scale {
            return Err(QSpaceError::DegeneratePlane(det));
        }
        if !(g11 < 0.0 && det > 0.0) {
            return Err(QSpaceError::NotNegativeDefinite);
        }
        let e1 = linalg::scale(1.0 / (-g11).sqrt(), u1);
        let c = linalg::bilinear(&gram, u2, &e1);
        let w = linalg::axpy(c, &e1, u2);
        let nw = linalg::bilinear(&gram, &w, &w);
        let e2 = linalg::scale(1.0 / (-nw).sqrt(), &w);
        Ok(Self { gram, basis: [e1, e2], orientation: 1, chart: None })
    }

    pub fn with_orientation(mut self, orientation: i8) -> Self {
        self.orientation = if orientation < 0 { -1 } else { 1 };
        self
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn basis(&self) -> &[Vec<f64>; 2] {
        &self.basis
    }

    pub fn chart(&self) -> Option<(Complex64, Complex64)> {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.gram.len()
    }

    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        linalg::bilinear(&self.gram, u, v)
    }

    pub fn q(&self, v: &[f64]) -> f64 {
        0.5 * self.bilinear(v, v)
    }

    /// `(v_z, v_perp)` with `v_z ∈ z` and `v_perp ⊥ z`.
    pub fn project(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut vz = vec![0.0; v.len()];
        for e in &self.basis {
            let c = -self.bilinear(v, e);
            for (x, ei) in vz.iter_mut().zip(e) {
                *x += c * ei;
            }
        }
        let vp = linalg::sub(v, &vz);
        (vz, vp)
    }

    /// `Q(v_z)`, which is ≤ 0.
    pub fn q_z(&self, v: &[f64]) -> f64 {
        -0.5 * self.basis.iter().map(|e| self.bilinear(v, e).powi(2)).sum::<f64>()
    }

    /// `Q(v_perp) − Q(v_z)`.
    pub fn majorant(&self, v: &[f64]) -> f64 {
        self.q(v) - 2.0 * self.q_z(v)
    }

    /// Matrix `M` with `majorant(v) = vᵀ M v`.
    pub fn majorant_matrix(&self) -> Mat {
        let n = self.dim();
        let ge: Vec<Vec<f64>> = self.basis.iter().map(|e| linalg::mat_vec(&self.gram, e)).collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| 0.5 * self.gram[i][j] + ge.iter().map(|g| g[i] * g[j]).sum::<f64>())
                    .collect()
            })
            .collect()
    }

    /// Image of the plane under a linear isometry (matrix acting on columns).
    pub fn transform(&self, h: &Mat) -> Result<Self, QSpaceError> {
        let u1 = linalg::mat_vec(h, &self.basis[0]);
        let u2 = linalg::mat_vec(h, &self.basis[1]);
        Ok(Self::from_gram(self.gram.clone(), &u1, &u2)?.with_orientation(self.orientation))
    }

    /// Moves the plane along the geodesic in the direction of a positive
    /// vector `dir` orthogonal to it: `e₁ ↦ cosh t·e₁ + sinh t·d̂`.
    pub fn boost(&self, dir: &[f64], t: f64) -> Result<Self, QSpaceError> {
        let (_, dp) = self.project(dir);
        let nd = self.bilinear(&dp, &dp);
        if nd <= 0.0 {
            return Err(QSpaceError::NotNegativeDefinite);
        }
        let d = linalg::scale(1.0 / nd.sqrt(), &dp);
        let u1 = linalg::axpy(t.sinh(), &d, &linalg::scale(t.cosh(), &self.basis[0]));
        Ok(Self::from_gram(self.gram.clone(), &u1, &self.basis[1])?.with_orientation(self.orientation))
    }
}

pub fn project(v: &[f64], z: &PlanePoint) -> (Vec<f64>, Vec<f64>) {
    z.project(v)
}

pub fn majorant(v: &[f64], z: &PlanePoint) -> f64 {
    z.majorant(v)
}

/// Siegel Gaussian `exp(−2π (Q(v_perp) − Q(v_z)))`.
pub fn gaussian(v: &[f64], z: &PlanePoint) -> f64 {
    (-2.0 * PI * z.majorant(v)).exp()
}

/// `T = [[a, b], [b, c]]`, a 2×2 symmetric moment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix<S = Rational> {
    pub a: S,
    pub b: S,
    pub c: S,
}

impl<S: Clone> MomentMatrix<S> {
    pub fn new(a: S, b: S, c: S) -> Self {
        Self { a, b, c }
    }

    /// `[[a, b], [b, c]] ↦ [[c, b], [b, a]]`.
    pub fn iota(&self) -> Self {
        Self { a: self.c.clone(), b: self.b.clone(), c: self.a.clone() }
    }
}

impl MomentMatrix<Rational> {
    pub fn det(&self) -> Rational {
        &self.a * &self.c - &self.b * &self.b
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a.is_positive() && self.det().is_positive()
    }

    pub fn to_f64(&self) -> MomentMatrix<f64> {
        MomentMatrix { a: exact::to_f64(&self.a), b: exact::to_f64(&self.b), c: exact::to_f64(&self.c) }
    }

    pub fn from_ints(a: i64, b: (i64, i64), c: i64) -> Self {
        Self { a: exact::rat(a), b: exact::frac(b.0, b.1), c: exact::rat(c) }
    }
}

impl MomentMatrix<f64> {
    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0.0 && self.det() > 0.0
    }
}

pub fn iota<S: Clone>(t: &MomentMatrix<S>) -> MomentMatrix<S> {
    t.iota()
}

/// `T(v, w) = ½ [[(v,v), (v,w)], [(v,w), (w,w)]]`.
pub fn moment_matrix(space: &QuadSpace, v: &[f64], w: &[f64]) -> MomentMatrix<f64> {
    MomentMatrix {
        a: 0.5 * space.bilinear(v, v),
        b: 0.5 * space.bilinear(v, w),
        c: 0.5 * space.bilinear(w, w),
    }
}

pub fn moment_matrix_exact(space: &QuadSpace, v: &[Rational], w: &[Rational]) -> MomentMatrix<Rational> {
    let half = exact::frac(1, 2);
    MomentMatrix {
        a: space.bilinear_exact(v, v) * &half,
        b: space.bilinear_exact(v, w) * &half,
        c: space.bilinear_exact(w, w) * &half,
    }
}

/// A real splitting of a 4-dimensional space by 2×2 matrices carrying `Q`
/// to the determinant. `images[i]` is the matrix `(m11, m12, m21, m22)` of
/// the i-th coordinate vector.
#[derive(Debug, Clone)]
pub struct Splitting {
    images: [[f64; 4]; 4],
    inverse: Mat,
}

fn det_bilinear(m: &[f64; 4], n: &[f64; 4]) -> f64 {
    m[0] * n[3] + m[3] * n[0] - m[1] * n[2] - m[2] * n[1]
}

impl Splitting {
    pub fn new(space: &QuadSpace, images: [[f64; 4]; 4]) -> Result<Self, QSpaceError> {
        if space.dim() != 4 || space.signature() != (2, 2) {
            return Err(QSpaceError::ChartUnavailable(space.signature()));
        }
        let g = space.gram_f64();
        let mut dev: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let scale = g[i][j].abs().max(1.0);
                dev = dev.max((det_bilinear(&images[i], &images[j]) - g[i][j]).abs() / scale);
            }
        }
        if dev > 1e-12 {
            return Err(QSpaceError::SplittingMismatch(dev));
        }
        let cols: Mat = (0..4).map(|r| (0..4).map(|i| images[i][r]).collect()).collect();
        let inverse = linalg::inverse(&cols).ok_or(QSpaceError::SplittingMismatch(f64::INFINITY))?;
        Ok(Self { images, inverse })
    }

    pub fn to_matrix(&self, x: &[f64]) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (xi, img) in x.iter().zip(&self.images) {
            for k in 0..4 {
                m[k] += xi * img[k];
            }
        }
        m
    }

    pub fn from_matrix(&self, m: &[f64; 4]) -> Vec<f64> {
        linalg::mat_vec(&self.inverse, m)
    }
}

/// The point of `D` attached to `(z₁, z₂) ∈ H × H`: the plane spanned by the
/// real and imaginary parts of the isotropic matrix `[[z₁z₂, z₁], [z₂, 1]]`.
pub fn hxh_to_plane(
    z1: Complex64,
    z2: Complex64,
    space: &QuadSpace,
    splitting: &Splitting,
) -> Result<PlanePoint, QSpaceError> {
    if space.signature() != (2, 2) {
        return Err(QSpaceError::ChartUnavailable(space.signature()));
    }
    for z in [z1, z2] {
        if !(z.im > 0.0) {
            return Err(QSpaceError::NotInUpperHalfPlane(z));
        }
    }
    let w = [z1 * z2, z1, z2, Complex64::new(1.0, 0.0)];
    let re = splitting.from_matrix(&[w[0].re, w[1].re, w[2].re, w[3].re]);
    let im = splitting.from_matrix(&[w[0].im, w[1].im, w[2].im, w[3].im]);
    let mut p = PlanePoint::new(space, &re, &im)?;
    p.chart = Some((z1, z2));
    Ok(p)
}

/// A signature `(2, 2)` space together with its splitting, so chart points
/// can be turned into planes repeatedly.
#[derive(Debug, Clone)]
pub struct HxHChart {
    pub space: QuadSpace,
    pub splitting: Splitting,
}

impl HxHChart {
    pub fn new(space: QuadSpace, splitting: Splitting) -> Self {
        Self { space, splitting }
    }

    pub fn plane(&self, z1: Complex64, z2: Complex64) -> Result<PlanePoint, QSpaceError> {
        hxh_to_plane(z1, z2, &self.space, &self.splitting)
    }
}

/// `(w, w)` and `(w, w̄)` for the isotropic chart vector, evaluated through
/// the bilinear form of `space` (complex-bilinear extension).
pub fn chart_vector_products(
    z1: Complex64,
    z2: Complex64,
    space: &QuadSpace,
    splitting: &Splitting,
) -> (Complex64, Complex64) {
    let w = [z1 * z2, z1, z2, Complex64::new(1.0, 0.0)];
    let re = splitting.from_matrix(&[w[0].re, w[1].re, w[2].re, w[3].re]);
    let im = splitting.from_matrix(&[w[0].im, w[1].im, w[2].im, w[3].im]);
    let rr = space.bilinear(&re, &re);
    let ii = space.bilinear(&im, &im);
    let ri = space.bilinear(&re, &im);
    (Complex64::new(rr - ii, 2.0 * ri), Complex64::new(rr + ii, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{from_i64_rows, rat};

    fn split_m2() -> (QuadSpace, Splitting) {
        // (x, y) = m11 n22 + m22 n11 − m12 n21 − m21 n12 on entries.
        let gram = from_i64_rows(&[&[0, 0, 0, 1], &[0, 0, -1, 0], &[0, -1, 0, 0], &[1, 0, 0, 0]]);
        let space = QuadSpace::new(gram).unwrap();
        let images = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let s = Splitting::new(&space, images).unwrap();
        (space, s)
    }

    #[test]
    fn signature_of_diagonal_forms() {
        assert_eq!(QuadSpace::diagonal(&[1, 1, -1, -1]).unwrap().signature(), (2, 2));
        assert_eq!(QuadSpace::diagonal(&[1]).unwrap().signature(), (1, 0));
    }

    #[test]
    fn signature_with_zero_diagonal() {
        let (space, _) = split_m2();
        assert_eq!(signature(&space), (2, 2));
        let hyp = QuadSpace::new(from_i64_rows(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(hyp.signature(), (1, 1));
    }

    #[test]
    fn degenerate_gram_rejected() {
        let g = from_i64_rows(&[&[1, 1], &[1, 1]]);
        assert_eq!(QuadSpace::new(g), Err(QSpaceError::DegenerateForm));
        let g = from_i64_rows(&[&[1, 2], &[3, 1]]);
        assert_eq!(QuadSpace::new(g), Err(QSpaceError::NotSymmetric));
    }

    #[test]
    fn stored_signature_checked() {
        let g = from_i64_rows(&[&[1, 0], &[0, -1]]);
        assert!(matches!(QuadSpace::with_signature(g, (2, 0)), Err(QSpaceError::SignatureMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let g = vec![vec![exact::frac(1, 2), rat(0)], vec![rat(0), rat(-3)]];
        let space = QuadSpace::new(g).unwrap();
        let s = serde_json::to_string(&space).unwrap();
        assert!(s.contains("\"1/2\""));
        let back: QuadSpace = serde_json::from_str(&s).unwrap();
        assert_eq!(back, space);
        let bad = r#"{"dim":2,"gram":["1","0","0","1"],"signature":[1,1]}"#;
        assert!(serde_json::from_str::<QuadSpace>(bad).is_err());
    }

    #[test]
    fn projection_edge_cases() {
        let space = QuadSpace::standard(2);
        let z = PlanePoint::new(&space, &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let v = [0.0, 0.0, 2.0, -1.0];
        let (vz, vp) = z.project(&v);
        assert!(linalg::norm_inf(&linalg::sub(&vz, &v)) < 1e-15 && linalg::norm_inf(&vp) < 1e-15);
        let v = [1.0, -3.0, 0.0, 0.0];
        let (vz, vp) = z.project(&v);
        assert!(linalg::norm_inf(&vz) < 1e-15 && linalg::norm_inf(&linalg::sub(&vp, &v)) < 1e-15);
    }

    #[test]
    fn majorant_values() {
        let space = QuadSpace::standard(2);
        let z = PlanePoint::new(&space, &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(z.majorant(&[0.0; 4]), 0.0);
        // Q(v) = −1 inside z, majorant = 1.
        let v = [0.0, 0.0, 2f64.sqrt(), 0.0];
        assert!((z.majorant(&v) - 1.0).abs() < 1e-14);
        assert!((gaussian(&v, &z) - (-2.0 * PI).exp()).abs() < 1e-16);
        assert!(((-2.0 * PI).exp() - 0.001_867_442_731_707_988).abs() < 1e-15);
        assert_eq!(gaussian(&[0.0; 4], &z), 1.0);
    }

    #[test]
    fn degenerate_plane_rejected() {
        let space = QuadSpace::standard(2);
        let u = [0.0, 0.0, 1.0, 0.0];
        assert!(matches!(PlanePoint::new(&space, &u, &u), Err(QSpaceError::DegeneratePlane(_))));
        let r = PlanePoint::new(&space, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.unwrap_err(), QSpaceError::NotNegativeDefinite);
    }

    #[test]
    fn moment_matrix_cases() {
        let space = QuadSpace::standard(2);
        let v = [2f64.sqrt(), 0.0, 0.0, 0.0];
        let w = [0.0, 2f64.sqrt(), 0.0, 0.0];
        let t = moment_matrix(&space, &v, &w);
        assert!((t.a - 1.0).abs() < 1e-15 && t.b.abs() < 1e-15 && (t.c - 1.0).abs() < 1e-15);
        assert!(moment_matrix(&space, &v, &v).det().abs() < 1e-15);
        assert_eq!(moment_matrix(&space, &w, &v), moment_matrix(&space, &v, &w).iota());
    }

    #[test]
    fn iota_is_an_involution() {
        let t = MomentMatrix::from_ints(1, (0, 1), 5);
        assert_eq!(t.iota(), MomentMatrix::from_ints(5, (0, 1), 1));
        assert_eq!(t.iota().iota(), t);
        let s = MomentMatrix::from_ints(2, (1, 2), 2);
        assert_eq!(s.iota(), s);
    }

    #[test]
    fn chart_at_i_i() {
        let (space, s) = split_m2();
        let i = Complex64::new(0.0, 1.0);
        let (ww, wwbar) = chart_vector_products(i, i, &space, &s);
        assert!(ww.norm() < 1e-14);
        assert!((wwbar.re + 4.0).abs() < 1e-14);
        let p = hxh_to_plane(i, i, &space, &s).unwrap();
        assert_eq!(p.chart(), Some((i, i)));
        assert!(hxh_to_plane(-i, i, &space, &s).is_err());
        let euclid = QuadSpace::diagonal(&[1, 1, 1, 1]).unwrap();
        assert!(matches!(hxh_to_plane(i, i, &euclid, &s), Err(QSpaceError::ChartUnavailable(_))));
    }
}
