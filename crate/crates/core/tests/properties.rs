use num::complex::Complex64;
use num::Zero;
use orthogreen::exact::{self, frac, rat, RatMatrix, Rational};
use orthogreen::lattice::Lattice;
use orthogreen::linalg;
use orthogreen::qspace::{iota, MomentMatrix, PlanePoint, QuadSpace};
use orthogreen::quat::{Quaternion, QuaternionAlgebra};
use orthogreen::specfun::{self, SeriesPolicy};
use proptest::prelude::*;

fn plane(n: usize, dir: &[f64], t: f64) -> PlanePoint {
    let space = QuadSpace::standard(n);
    let mut u1 = vec![0.0; n + 2];
    let mut u2 = vec![0.0; n + 2];
    u1[n] = 1.0;
    u2[n + 1] = 1.0;
    PlanePoint::new(&space, &u1, &u2).unwrap().boost(dir, t).unwrap()
}

fn rational() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=7).prop_map(|(n, d)| frac(n, d))
}

fn quaternion() -> impl Strategy<Value = Quaternion> {
    [rational(), rational(), rational(), rational()].prop_map(Quaternion)
}

/// Division algebras `(a, b)` with small parameters; `from_ints` rejects split ones.
fn algebra() -> impl Strategy<Value = QuaternionAlgebra> {
    let param = prop_oneof![-11i64..=-1, 1i64..=11];
    (param.clone(), param).prop_filter_map("split algebra", |(a, b)| QuaternionAlgebra::from_ints(a, b).ok())
}

fn box_oracle(g: &RatMatrix, bound: &Rational) -> Vec<Vec<i64>> {
    let n = g.len();
    let gi = exact::inverse(g).unwrap();
    let w: Vec<i64> = (0..n).map(|i| (exact::to_f64(bound) * exact::to_f64(&gi[i][i])).sqrt() as i64 + 1).collect();
    let mut out = Vec::new();
    let mut x: Vec<i64> = w.iter().map(|c| -c).collect();
    'outer: loop {
        let xr: Vec<Rational> = x.iter().map(|&c| rat(c)).collect();
        if x.iter().any(|&c| c != 0) && exact::bilinear(g, &xr, &xr) <= *bound {
            out.push(x.clone());
        }
        for i in 0..n {
            x[i] += 1;
            if x[i] <= w[i] {
                continue 'outer;
            }
            x[i] = -w[i];
        }
        break;
    }
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_splits_the_form(dir in prop::collection::vec(-1.0f64..1.0, 6), t in -1.5f64..1.5,
                                  v in prop::collection::vec(-3.0f64..3.0, 6)) {
        let z = plane(4, &dir, t);
        let (vz, vp) = z.project(&v);
        let sum: Vec<f64> = vz.iter().zip(&vp).map(|(a, b)| a + b).collect();
        prop_assert!(linalg::norm_inf(&linalg::sub(&sum, &v)) < 1e-9 * (1.0 + linalg::norm_inf(&v)));
        let scale = 1.0 + z.majorant(&v);
        prop_assert!((z.q(&v) - z.q(&vz) - z.q(&vp)).abs() < 1e-9 * scale);
        prop_assert!(z.q_z(&v) <= 1e-12 * scale);
        prop_assert!(z.majorant(&v) + 1e-9 * scale >= z.q(&v).abs());
    }

    #[test]
    fn majorant_matrix_is_positive_definite(dir in prop::collection::vec(-1.0f64..1.0, 4), t in -2.0f64..2.0) {
        let z = plane(2, &dir, t);
        let ev = linalg::symmetric_eigenvalues(&z.majorant_matrix());
        prop_assert!(ev.iter().all(|&e| e > 0.0), "{ev:?}");
    }

    #[test]
    fn chart_planes_are_negative_definite(x1 in -2.0f64..2.0, y1 in 0.1f64..3.0, x2 in -2.0f64..2.0, y2 in 0.1f64..3.0) {
        let alg = QuaternionAlgebra::preset("preset6").unwrap();
        let z = alg.chart().plane(Complex64::new(x1, y1), Complex64::new(x2, y2)).unwrap();
        let [e1, e2] = z.basis();
        let g = [[z.q(e1), 0.5 * z.bilinear(e1, e2)], [0.5 * z.bilinear(e1, e2), z.q(e2)]];
        prop_assert!(g[0][0] < 0.0 && g[0][0] * g[1][1] - g[0][1] * g[1][0] > 0.0);
    }

    #[test]
    fn iota_is_an_involution_preserving_det(a in rational(), b in rational(), c in rational()) {
        let t = MomentMatrix::new(a, b, c);
        let s = iota(&t);
        prop_assert_eq!(s.det(), t.det());
        prop_assert_eq!(iota(&s), t);
    }

    #[test]
    fn reduced_norm_and_trace_are_compatible(alg in algebra(), x in quaternion(), y in quaternion()) {
        let xy = alg.mul(&x, &y);
        prop_assert_eq!(alg.nrd(&xy), alg.nrd(&x) * alg.nrd(&y));
        prop_assert_eq!(alg.trd(&xy), alg.trd(&alg.mul(&y, &x)));
        prop_assert_eq!(alg.mul(&x, &x.conj()), Quaternion::scalar(alg.nrd(&x)));
        prop_assert_eq!(alg.mul(&x, &y).conj(), alg.mul(&y.conj(), &x.conj()));
    }

    #[test]
    fn splitting_is_a_homomorphism(alg in algebra(), x in quaternion(), y in quaternion()) {
        prop_assume!(alg.a() > 0 || alg.b() > 0);
        let (mx, my, mxy) = (alg.matrix(&x), alg.matrix(&y), alg.matrix(&alg.mul(&x, &y)));
        let prod = [
            mx[0] * my[0] + mx[1] * my[2], mx[0] * my[1] + mx[1] * my[3],
            mx[2] * my[0] + mx[3] * my[2], mx[2] * my[1] + mx[3] * my[3],
        ];
        let scale = 1.0 + mxy.iter().map(|c| c.abs()).fold(0.0, f64::max);
        for k in 0..4 {
            prop_assert!((prod[k] - mxy[k]).abs() < 1e-10 * scale);
        }
        let n = exact::to_f64(&alg.nrd(&x));
        prop_assert!((mx[0] * mx[3] - mx[1] * mx[2] - n).abs() < 1e-10 * (1.0 + n.abs()));
    }

    #[test]
    fn short_vectors_match_box_oracle(entries in prop::collection::vec(-2i64..=2, 9), dim in 2usize..=3, bound in 1i64..=20) {
        let l: Vec<Vec<i64>> = (0..dim).map(|i| (0..dim).map(|j| if j <= i { entries[3 * i + j] } else { 0 }).collect()).collect();
        let g: RatMatrix = (0..dim)
            .map(|i| (0..dim).map(|j| rat((0..dim).map(|k| l[i][k] * l[j][k]).sum::<i64>() + (i == j) as i64)).collect())
            .collect();
        let bound = frac(bound, 2);
        let got = Lattice::new(g.clone()).unwrap().short_vectors(&bound).unwrap();
        prop_assert_eq!(got, box_oracle(&g, &bound));
    }

    #[test]
    fn gamma_recurrence(x in 0.05f64..20.0) {
        let lhs = specfun::gamma_real(x + 1.0).unwrap();
        let rhs = x * specfun::gamma_real(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }

    #[test]
    fn hyp2f1_is_symmetric(a in 0.1f64..4.0, b in 0.1f64..4.0, c in 1.1f64..6.0, x in 0.0f64..0.95) {
        let p = SeriesPolicy::default();
        let f = specfun::hyp2f1(a, b, c, x, &p).unwrap();
        let g = specfun::hyp2f1(b, a, c, x, &p).unwrap();
        prop_assert!((f - g).abs() <= 1e-12 * f.abs());
    }

    #[test]
    fn kummer_contiguous_relation(a in 1.1f64..4.0, b in 0.6f64..5.0, z in 0.0f64..15.0) {
        // (b−a) M(a−1) + (2a−b+z) M(a) − a M(a+1) = 0
        let p = SeriesPolicy::default();
        let m = |a: f64| specfun::kummer_m(a, b, z, &p).unwrap();
        let terms = [(b - a) * m(a - 1.0), (2.0 * a - b + z) * m(a), -a * m(a + 1.0)];
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        prop_assert!(terms.iter().sum::<f64>().abs() <= 1e-12 * scale);
    }
}

#[test]
fn zero_quaternion_has_zero_norm() {
    let alg = QuaternionAlgebra::preset("preset10").unwrap();
    assert!(alg.nrd(&Quaternion::from_ints([0; 4])).is_zero());
}
