//! Truncated lattice sums of the secondary spherical function, and the
//! pair-counting reports for the quaternion example.
//!
//! The sum runs over lattice vectors up to sign: `λ` and `−λ` have the same
//! divisor and contribute one term.

use crate::exact::{self, Rational};
use crate::kernels::{self, KernelError, KernelParams};
use crate::lattice::{self, Coords, EmbeddedLattice, LatticeError, DEFAULT_CAP};
use crate::linalg::{self, Mat};
use crate::qspace::{MomentMatrix, PlanePoint, QuadSpace};
use crate::quat::{self, Quaternion, QuaternionOrder, QuatError};
use crate::specfun;
use num::Signed;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("radius schedule must be non-empty and strictly increasing")]
    BadSchedule,
    #[error("vector must have positive norm")]
    NonPositiveNorm,
    #[error("point is not orthogonal to v (deviation {0:.3e})")]
    NotOnDivisor(f64),
    #[error("w is proportional to v")]
    Proportional,
    #[error("moment matrix must have the shape [[1, t/2], [t/2, n]] with integral t, n")]
    BadMomentShape,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Quat(#[from] QuatError),
}

pub type Result<T> = std::result::Result<T, GreenError>;

/// Which vectors enter the sum.
#[derive(Debug, Clone)]
pub enum SumMode {
    /// Every lattice vector of the given norm.
    Lattice,
    /// Vectors reachable from the seed by the given lattice automorphisms
    /// (integer matrices acting on coordinate rows), within the ball.
    Orbit { generators: Vec<Vec<Vec<i64>>> },
}

#[derive(Debug, Clone)]
pub struct GreenOptions {
    /// Summands with hypergeometric ratio above this abort with `NearDivisor`.
    pub divisor_guard: f64,
    /// Center of the truncation ball; the evaluation point when `None`.
    pub ball_center: Option<PlanePoint>,
    pub mode: SumMode,
    /// Relative tail size below which the sum counts as converged.
    pub tolerance: f64,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self { divisor_guard: 1.0 - 1e-3, ball_center: None, mode: SumMode::Lattice, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub mode: String,
    pub radii: Vec<f64>,
    pub term_counts: Vec<usize>,
    pub partial_sums: Vec<f64>,
    pub increments: Vec<f64>,
    pub increment_ratios: Vec<f64>,
    pub tail_estimates: Vec<f64>,
    /// `C · Σ majorant^{−(s+s₀)/2}` over each radius shell.
    pub domination_increments: Vec<f64>,
    pub domination_constant: f64,
    pub dominated: bool,
    pub converged: bool,
}

fn check_schedule(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(GreenError::BadSchedule);
    }
    Ok(())
}

/// Kahan–Babuška summation.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// One representative of each `±λ`: the first nonzero coordinate is positive.
fn is_sign_representative(x: &[i64]) -> bool {
    x.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

struct Term {
    ball: f64,
    value: f64,
    ratio: f64,
    majorant: f64,
}

struct SumInput<'a> {
    lattice: &'a EmbeddedLattice,
    seed: &'a [i64],
    norm: Rational,
    z: &'a PlanePoint,
    params: KernelParams,
}

fn collect_terms(input: &SumInput, radius: f64, opts: &GreenOptions) -> Result<Vec<Term>> {
    let center = opts.ball_center.as_ref().unwrap_or(input.z);
    let mut found = input.lattice.vectors_of_norm(center, &input.norm, radius)?;
    if let SumMode::Orbit { generators } = &opts.mode {
        found = orbit_filter(&found, input.seed, generators);
    }
    found.retain(|x| is_sign_representative(x));
    let ball_gram = input.lattice.majorant_gram(center);
    let rows: Vec<Result<Term>> = found
        .par_iter()
        .map(|x| {
            let v = input.lattice.vector(x);
            let xf: Vec<f64> = x.iter().map(|&c| c as f64).collect();
            let ball = linalg::quad_form(&ball_gram, &xf);
            let m = input.z.q(&v);
            let perp = m - input.z.q_z(&v);
            let ratio = m / perp;
            if ratio > opts.divisor_guard {
                return Err(GreenError::Kernel(KernelError::NearDivisor(ratio)));
            }
            let value = 2.0 * kernels::phi2(m, perp, &input.params)?;
            Ok(Term { ball, value, ratio, majorant: input.z.majorant(&v) })
        })
        .collect();
    let mut terms: Vec<Term> = rows.into_iter().collect::<Result<_>>()?;
    terms.sort_by(|a, b| a.ball.total_cmp(&b.ball));
    Ok(terms)
}

fn orbit_filter(found: &[Coords], seed: &[i64], generators: &[Vec<Vec<i64>>]) -> Vec<Coords> {
    let members: HashSet<&Coords> = found.iter().collect();
    let mut seen: HashSet<Coords> = HashSet::new();
    let mut queue = VecDeque::new();
    for s in [seed.to_vec(), seed.iter().map(|c| -c).collect()] {
        if members.contains(&s) && seen.insert(s.clone()) {
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        for g in generators {
            let y: Coords = (0..x.len()).map(|j| (0..x.len()).map(|i| x[i] * g[i][j]).sum()).collect();
            if members.contains(&y) && seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    let mut out: Vec<Coords> = seen.into_iter().collect();
    out.sort();
    out
}

fn truncated(input: SumInput, radii: &[f64], opts: &GreenOptions) -> Result<(f64, TruncationReport)> {
    check_schedule(radii)?;
    let m = exact::to_f64(&input.norm);
    if !(m > 0.0) {
        return Err(GreenError::NonPositiveNorm);
    }
    let terms = collect_terms(&input, *radii.last().expect("non-empty"), opts)?;
    let p = &input.params;
    let s = p.real_s()?;
    let e = (s + p.s0()) / 2.0;
    let alpha = (s + p.rho0()) / 2.0;

    // |2 φ⁽²⁾| ≤ |pref| F(r_max) (2m)^α maj^{−α}, and maj^{−α} ≤ maj_min^{α−e} maj^{−e}.
    let r_max = terms.iter().map(|t| t.ratio).fold(0.0, f64::max);
    let maj_min = terms.iter().map(|t| t.majorant).fold(f64::INFINITY, f64::min);
    let beta = (s - p.rho0()) / 2.0 + 1.0;
    let (la, _) = specfun::ln_gamma_real(alpha).map_err(KernelError::from)?;
    let (lb, _) = specfun::ln_gamma_real(beta).map_err(KernelError::from)?;
    let (lc, _) = specfun::ln_gamma_real(s + 1.0).map_err(KernelError::from)?;
    let f_max = if r_max > 0.0 {
        specfun::hyp2f1(alpha, beta, s + 1.0, r_max, p.policy()).map_err(KernelError::from)?
    } else {
        1.0
    };
    let domination_constant = if terms.is_empty() {
        0.0
    } else {
        (la + lb - lc).exp() * f_max * (2.0 * m).powf(alpha) * maj_min.powf(e - alpha)
    };

    let mut partial_sums = Vec::with_capacity(radii.len());
    let mut term_counts = Vec::with_capacity(radii.len());
    let mut domination_increments = Vec::with_capacity(radii.len());
    let mut start = 0;
    let mut running: Vec<f64> = Vec::new();
    for &r in radii {
        let end = terms.partition_point(|t| t.ball <= r);
        running.extend(terms[start..end].iter().map(|t| t.value));
        domination_increments
            .push(domination_constant * compensated_sum(terms[start..end].iter().map(|t| t.majorant.powf(-e))));
        partial_sums.push(compensated_sum(running.iter().copied()));
        term_counts.push(end);
        start = end;
    }
    let increments: Vec<f64> =
        partial_sums.iter().enumerate().map(|(k, &v)| if k == 0 { v } else { v - partial_sums[k - 1] }).collect();
    let increment_ratios: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0] == 0.0 { if w[1] == 0.0 { 0.0 } else { f64::INFINITY } } else { (w[1] / w[0]).abs() })
        .collect();
    let tail_estimates: Vec<f64> = (0..increments.len())
        .map(|k| match k.checked_sub(1).map(|j| increment_ratios[j]) {
            Some(q) if q < 1.0 => increments[k].abs() * q / (1.0 - q),
            _ => partial_sums[k].abs(),
        })
        .collect();
    let value = *partial_sums.last().expect("non-empty");
    let dominated = increments
        .iter()
        .zip(&domination_increments)
        .all(|(d, b)| d.abs() <= b * (1.0 + 1e-12) + f64::MIN_POSITIVE);
    let converged = radii.len() >= 3
        && *tail_estimates.last().expect("non-empty") <= opts.tolerance * value.abs()
        && increment_ratios.iter().all(|&q| q < 1.0);
    let mode = match opts.mode {
        SumMode::Lattice => "lattice-sum surrogate",
        SumMode::Orbit { .. } => "orbit-restricted",
    };
    Ok((
        value,
        TruncationReport {
            mode: mode.into(),
            radii: radii.to_vec(),
            term_counts,
            partial_sums,
            increments,
            increment_ratios,
            tail_estimates,
            domination_increments,
            domination_constant,
            dominated,
            converged,
        },
    ))
}

/// `2 Σ φ⁽²⁾(λ, z)` over `λ` with `Q(λ) = Q(v)` and ball majorant `≤ r`, for
/// each `r` of the schedule.
pub fn green_truncated(
    lattice: &EmbeddedLattice,
    v: &[i64],
    z: &PlanePoint,
    p: &KernelParams,
    radii: &[f64],
    opts: &GreenOptions,
) -> Result<(f64, TruncationReport)> {
    let norm = lattice.form().pairing(v, v) * exact::frac(1, 2);
    truncated(SumInput { lattice, seed: v, norm, z, params: *p }, radii, opts)
}

/// The lattice `π(L)` in `v^⊥`, the orthogonal projection of `L`,
/// with basis rows in ambient coordinates.
pub fn projected_lattice(lattice: &EmbeddedLattice, space: &QuadSpace, v: &[Rational]) -> Result<EmbeddedLattice> {
    let vv = space.bilinear_exact(v, v);
    if !vv.is_positive() {
        return Err(GreenError::NonPositiveNorm);
    }
    let gens: Vec<Vec<Rational>> = lattice
        .basis()
        .iter()
        .map(|e| {
            let c = space.bilinear_exact(e, v) / &vv;
            e.iter().zip(v).map(|(a, b)| a - &c * b).collect()
        })
        .collect();
    let basis = exact::lattice_basis(&gens);
    Ok(EmbeddedLattice::new(basis, space.gram())?)
}

/// The pair Green function: the truncated sum inside `v^⊥` for the class of
/// `p_{v⊥}(w)` in the projected lattice, with kernel parameters for
/// signature `(n−1, 2)`.
pub fn green_pair_truncated(
    lattice: &EmbeddedLattice,
    space: &QuadSpace,
    v: &[i64],
    w: &[i64],
    z: &PlanePoint,
    p: &KernelParams,
    radii: &[f64],
    opts: &GreenOptions,
) -> Result<(f64, TruncationReport)> {
    let ve = lattice.vector_exact(v);
    let we = lattice.vector_exact(w);
    let vf = lattice.vector(v);
    let dev = z.basis().iter().map(|e| space.bilinear(e, &vf).abs()).fold(0.0, f64::max);
    if dev > 1e-9 * (1.0 + linalg::norm_inf(&vf)) {
        return Err(GreenError::NotOnDivisor(dev));
    }
    let sub = projected_lattice(lattice, space, &ve)?;
    let vv = space.bilinear_exact(&ve, &ve);
    let c = space.bilinear_exact(&we, &ve) / &vv;
    let w_perp: Vec<Rational> = we.iter().zip(&ve).map(|(a, b)| a - &c * b).collect();
    if w_perp.iter().all(num::Zero::is_zero) {
        return Err(GreenError::Proportional);
    }
    let coords = sub_coordinates(&sub, &w_perp);
    let norm = space.q_exact(&w_perp);
    let params = p.with_n(p.n() - 1)?;
    truncated(SumInput { lattice: &sub, seed: &coords, norm, z, params }, radii, opts)
}

fn sub_coordinates(sub: &EmbeddedLattice, x: &[Rational]) -> Coords {
    // Solve c · B = x on the pivot columns of the echelon basis.
    let b = sub.basis();
    let r = b.len();
    let mut c: Vec<Rational> = Vec::with_capacity(r);
    let mut rest = x.to_vec();
    for row in b {
        let piv = row.iter().position(|e| !num::Zero::is_zero(e)).expect("nonzero row");
        let k = &rest[piv] / &row[piv];
        for (t, e) in rest.iter_mut().zip(row) {
            *t -= &k * e;
        }
        c.push(k);
    }
    c.iter().map(|k| k.to_integer().try_into().expect("projected vector lies in the projected lattice")).collect()
}

/// Integer matrices of `x ↦ γx` and `x ↦ xγ` on order coordinates, for the
/// units of majorant `≤ radius`.
pub fn unit_actions(order: &QuaternionOrder, radius: f64) -> Result<Vec<Vec<Vec<i64>>>> {
    let alg = order.algebra();
    let units = quat::unit_elements(order, radius)?;
    let mut out = Vec::new();
    for g in &units {
        for left in [true, false] {
            let rows: Vec<Vec<i64>> = order
                .basis()
                .iter()
                .map(|e| {
                    let y = if left { alg.mul(g, e) } else { alg.mul(e, g) };
                    order.coordinates(&y).iter().map(|c| c.to_integer().try_into().expect("small")).collect()
                })
                .collect();
            out.push(rows);
        }
    }
    Ok(out)
}

/// Conjugation `x ↦ γxγ⁻¹` in `{1, i, j, k}` coordinates.
pub fn conjugation_matrix(order: &QuaternionOrder, g: &Quaternion) -> Mat {
    let alg = order.algebra();
    let inv = alg.inverse(g).expect("unit");
    let mut h = vec![vec![0.0; 4]; 4];
    for k in 0..4 {
        let e = Quaternion::from_ints([0, 1, 2, 3].map(|i| (i == k) as i64));
        let y = alg.mul(&alg.mul(g, &e), &inv).to_f64();
        for r in 0..4 {
            h[r][k] = y[r];
        }
    }
    h
}

fn moment_shape(t: &MomentMatrix<Rational>) -> Result<(i64, i64)> {
    use num::ToPrimitive;
    let two_b = &t.b * exact::rat(2);
    if t.a != exact::rat(1) || !exact::is_integral(&two_b) || !exact::is_integral(&t.c) {
        return Err(GreenError::BadMomentShape);
    }
    let tr = two_b.to_integer().to_i64().ok_or(GreenError::BadMomentShape)?;
    let n = t.c.to_integer().to_i64().ok_or(GreenError::BadMomentShape)?;
    Ok((tr, n))
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedCycleReport {
    pub trace: i64,
    pub norm: i64,
    pub disc: i64,
    pub radius: f64,
    pub pair_count: usize,
    /// Distinct residue patterns of `w v̄` at the ramified primes.
    pub coset_count: usize,
    pub expected_cosets: usize,
    /// Unit-conjugacy classes of the fixed points of those `w v̄` with
    /// majorant `≤ radius`.
    pub class_count: usize,
    pub class_number: usize,
    pub expected_degree: usize,
    pub cm_count: usize,
    pub cm_stabilized: bool,
    pub matches: bool,
    pub surrogate: String,
}

/// Pairs `(v, w) ∈ O²` with moment matrix `[[1, t/2], [t/2, n]]`, reduced to
/// `(1, w v̄)` by the unit `v`.
pub fn weighted_cycle_count(t: &MomentMatrix<Rational>, order: &QuaternionOrder, radius: f64) -> Result<WeightedCycleReport> {
    let (tr, n) = moment_shape(t)?;
    let alg = order.algebra();
    let disc = tr * tr - 4 * n;
    let h = quat::class_number(disc)?;
    let cm = quat::cm_set(order, tr, n, radius)?;
    let lat = order.lattice();
    let pairs = lat.pairs_with_moment(&alg.base_point(), t, radius)?;
    let us: Vec<Quaternion> = pairs
        .iter()
        .map(|(v, w)| {
            let v = Quaternion::from_coords(&lat.vector_exact(v));
            let w = Quaternion::from_coords(&lat.vector_exact(w));
            alg.mul(&w, &v.conj())
        })
        .collect();
    let mut patterns: BTreeSet<Vec<bool>> = BTreeSet::new();
    if let Some(u0) = us.first() {
        for u in &us {
            patterns.insert(quat::residue_pattern(order, u, u0));
        }
    }
    let mut distinct: Vec<Quaternion> = us.iter().filter(|u| order.majorant(u) <= radius).cloned().collect();
    distinct.sort_by(|a, b| a.0.cmp(&b.0));
    distinct.dedup();
    let taus: Vec<_> = distinct.iter().map(|u| quat::cm_point(alg, u).map(|p| p.tau)).collect::<std::result::Result<_, _>>()?;
    let unit_radius = (4.0 * radius / disc.unsigned_abs() as f64).max(1.0) * (1.0 + 1e-9);
    let units: Vec<[f64; 4]> = quat::unit_elements(order, unit_radius)?.iter().map(|g| alg.matrix(g)).collect();
    let labels = quat::orbit_partition(&taus, &units);
    let class_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let expected_cosets = alg.atkin_lehner_order();
    let expected_degree = h * expected_cosets;
    Ok(WeightedCycleReport {
        trace: tr,
        norm: n,
        disc,
        radius,
        pair_count: pairs.len(),
        coset_count: patterns.len(),
        expected_cosets,
        class_count,
        class_number: h,
        expected_degree,
        cm_count: cm.count(),
        cm_stabilized: cm.stabilized,
        matches: patterns.len() == expected_cosets && class_count == expected_degree && cm.matches(),
        surrogate: "lattice pairs in a majorant ball at the base point".into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IotaPairReport {
    pub t: [String; 3],
    pub t_iota: [String; 3],
    pub radius: f64,
    pub count: usize,
    pub count_iota: usize,
    pub bijection_exact: bool,
    pub v_norms: Vec<String>,
    pub v_norms_iota: Vec<String>,
    pub symmetric: bool,
}

/// Pairs for `T` and for `T^ι`, with the swap `(v, w) ↦ (w, v)` checked to be
/// a bijection between the enumerated sets.
pub fn iota_pair_report(t: &MomentMatrix<Rational>, order: &QuaternionOrder, radius: f64) -> Result<IotaPairReport> {
    let alg = order.algebra();
    let lat = order.lattice();
    let z0 = alg.base_point();
    let ti = t.iota();
    let pairs = lat.pairs_with_moment(&z0, t, radius)?;
    let pairs_iota = lat.pairs_with_moment(&z0, &ti, radius)?;
    let mut swapped: Vec<(Coords, Coords)> = pairs.iter().map(|(v, w)| (w.clone(), v.clone())).collect();
    swapped.sort();
    let norms = |ps: &[(Coords, Coords)]| -> Vec<String> {
        let set: BTreeSet<Rational> = ps.iter().map(|(v, _)| lat.form().pairing(v, v) * exact::frac(1, 2)).collect();
        set.iter().map(exact::format_rational).collect()
    };
    let fmt = |m: &MomentMatrix<Rational>| [&m.a, &m.b, &m.c].map(exact::format_rational);
    Ok(IotaPairReport {
        t: fmt(t),
        t_iota: fmt(&ti),
        radius,
        count: pairs.len(),
        count_iota: pairs_iota.len(),
        bijection_exact: swapped == pairs_iota,
        v_norms: norms(&pairs),
        v_norms_iota: norms(&pairs_iota),
        symmetric: t.a == t.c,
    })
}

/// `Σ majorant^{−(s+s₀)/2}` over the norm-`m` vectors of the ball at `z`.
pub fn domination_sum(
    lattice: &EmbeddedLattice,
    z: &PlanePoint,
    m: &Rational,
    p: &KernelParams,
    radius: f64,
) -> Result<f64> {
    Ok(lattice::domination_sum(lattice.form(), &lattice.majorant_gram(z), m, p, radius, DEFAULT_CAP)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{maximal_order, QuaternionAlgebra};
    use num::complex::Complex64;

    fn setup() -> (QuaternionOrder, EmbeddedLattice) {
        let o = maximal_order(&QuaternionAlgebra::preset("preset6").unwrap()).unwrap();
        let lat = o.lattice();
        (o, lat)
    }

    fn coords_of(o: &QuaternionOrder, x: &Quaternion) -> Vec<i64> {
        o.coordinates(x).iter().map(|c| c.to_integer().try_into().unwrap()).collect()
    }

    fn generic_point(o: &QuaternionOrder) -> PlanePoint {
        o.algebra().chart().plane(Complex64::new(0.45, 0.7), Complex64::new(0.7, 1.9)).unwrap()
    }

    #[test]
    fn single_term_regime() {
        let (o, lat) = setup();
        let one = coords_of(&o, &Quaternion::one());
        let z = generic_point(&o);
        let p = KernelParams::new(3.0, 2).unwrap();
        let all = lat.vectors_of_norm(&z, &exact::rat(1), 200.0).unwrap();
        let gram = lat.majorant_gram(&z);
        let mut majs: Vec<(f64, Coords)> = all
            .iter()
            .filter(|x| is_sign_representative(x))
            .map(|x| (linalg::quad_form(&gram, &x.iter().map(|&c| c as f64).collect::<Vec<_>>()), x.clone()))
            .collect();
        majs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let r = 0.5 * (majs[0].0 + majs[1].0);
        let (val, rep) = green_truncated(&lat, &one, &z, &p, &[r], &GreenOptions::default()).unwrap();
        assert_eq!(rep.term_counts, vec![1]);
        let expected = 2.0 * kernels::phi2_at(&lat.vector(&majs[0].1), &z, &p).unwrap();
        assert!((val - expected).abs() < 1e-14 * expected.abs());
    }

    #[test]
    fn increments_decay_and_are_dominated() {
        let (o, lat) = setup();
        let one = coords_of(&o, &Quaternion::one());
        let z = generic_point(&o);
        let p = KernelParams::new(3.0, 2).unwrap();
        let radii = [20.0, 40.0, 80.0, 160.0, 320.0];
        let (val, rep) = green_truncated(&lat, &one, &z, &p, &radii, &GreenOptions::default()).unwrap();
        assert!(val < 0.0);
        assert!(rep.dominated, "{rep:?}");
        assert!(rep.increments.iter().all(|d| *d <= 0.0));
        let q = &rep.increment_ratios;
        assert!(q.iter().all(|&x| x < 1.0), "{q:?}");
        // Shell sums fall off like 1/R, so increments roughly halve per doubling.
        assert!(q.iter().skip(1).all(|&x| (0.3..0.7).contains(&x)), "{q:?}");
    }

    #[test]
    fn unit_invariance_gap_shrinks() {
        let (o, lat) = setup();
        let one = coords_of(&o, &Quaternion::one());
        let z = generic_point(&o);
        let p = KernelParams::new(3.0, 2).unwrap();
        let g = quat::unit_elements(&o, 6.0)
            .unwrap()
            .into_iter()
            .find(|g| g.0[0].abs() != exact::rat(1))
            .unwrap();
        let gz = z.transform(&conjugation_matrix(&o, &g)).unwrap();
        let opts = GreenOptions { ball_center: Some(o.algebra().base_point()), ..Default::default() };
        let radii = [25.0, 50.0, 100.0, 200.0, 400.0];
        let (_, a) = green_truncated(&lat, &one, &z, &p, &radii, &opts).unwrap();
        let (_, b) = green_truncated(&lat, &one, &gz, &p, &radii, &opts).unwrap();
        let gaps: Vec<f64> = a.partial_sums.iter().zip(&b.partial_sums).map(|(x, y)| (x - y).abs() / x.abs()).collect();
        assert!(gaps.windows(2).skip(1).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn orbit_mode_is_a_subsum() {
        let (o, lat) = setup();
        let one = coords_of(&o, &Quaternion::one());
        let z = generic_point(&o);
        let p = KernelParams::new(3.0, 2).unwrap();
        let gens = unit_actions(&o, 8.0).unwrap();
        let opts = GreenOptions { mode: SumMode::Orbit { generators: gens }, ..Default::default() };
        let (orb, rep) = green_truncated(&lat, &one, &z, &p, &[50.0], &opts).unwrap();
        let (full, full_rep) = green_truncated(&lat, &one, &z, &p, &[50.0], &GreenOptions::default()).unwrap();
        assert!(rep.term_counts[0] <= full_rep.term_counts[0]);
        assert!(orb >= full - 1e-12);
    }

    #[test]
    fn guard_raises_near_divisor() {
        let (o, lat) = setup();
        let one = coords_of(&o, &Quaternion::one());
        let z = o.algebra().base_point().boost(&[1.0, 0.0, 0.0, 0.0], 1e-3).unwrap();
        let p = KernelParams::new(3.0, 2).unwrap();
        let r = green_truncated(&lat, &one, &z, &p, &[10.0], &GreenOptions::default());
        assert!(matches!(r, Err(GreenError::Kernel(KernelError::NearDivisor(_)))));
    }

    #[test]
    fn pair_green_uses_subspace_parameters_and_log_singularity() {
        let (o, lat) = setup();
        let space = o.algebra().quad_space();
        let v = coords_of(&o, &Quaternion::one());
        let w = coords_of(&o, &Quaternion::from_ints([1, 1, 0, 0]));
        let p = KernelParams::new(3.0, 2).unwrap();
        let z0 = o.algebra().base_point();
        assert_eq!(p.with_n(1).unwrap().rho0(), p.s0());
        let opts = GreenOptions { divisor_guard: 1.0 - 1e-12, ..Default::default() };
        let radii = [30.0, 60.0];
        let mut diffs = Vec::new();
        for t in [1e-2, 1e-3, 1e-4] {
            let z = z0.boost(&[0.0, 1.0, 0.0, 0.0], t).unwrap();
            let (val, _) = green_pair_truncated(&lat, &space, &v, &w, &z, &p, &radii, &opts).unwrap();
            diffs.push(val - 2.0 * t.ln());
        }
        let spread = diffs.iter().cloned().fold(f64::MIN, f64::max) - diffs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.05, "{diffs:?}");
        let off = generic_point(&o);
        assert!(matches!(
            green_pair_truncated(&lat, &space, &v, &w, &off, &p, &radii, &opts),
            Err(GreenError::NotOnDivisor(_))
        ));
    }

    #[test]
    fn weighted_cycle_counts_for_d6() {
        let (o, _) = setup();
        let (t, n) = quat::trace_norm_for(-91);
        let tm = MomentMatrix::new(exact::rat(1), exact::frac(t, 2), exact::rat(n));
        let r = weighted_cycle_count(&tm, &o, 200.0).unwrap();
        assert_eq!(r.expected_cosets, 4);
        assert_eq!(r.expected_degree, 8);
        assert_eq!(r.coset_count, 4, "{r:?}");
        assert_eq!(r.cm_count, 8, "{r:?}");
        assert_eq!(r.class_count, 8, "{r:?}");
        assert!(r.matches);
    }

    #[test]
    fn iota_bijection() {
        let o = maximal_order(&QuaternionAlgebra::preset("preset22").unwrap()).unwrap();
        let t = MomentMatrix::new(exact::rat(1), exact::rat(0), exact::rat(5));
        let r = iota_pair_report(&t, &o, 60.0).unwrap();
        assert!(r.count > 0);
        assert_eq!(r.count, r.count_iota);
        assert!(r.bijection_exact);
        assert_eq!(r.v_norms, vec!["1".to_string()]);
        assert_eq!(r.v_norms_iota, vec!["5".to_string()]);
        let sym = MomentMatrix::new(exact::rat(1), exact::frac(1, 2), exact::rat(1));
        let s = iota_pair_report(&sym, &o, 30.0).unwrap();
        assert!(s.symmetric && s.bijection_exact && s.count == s.count_iota);
    }
}
