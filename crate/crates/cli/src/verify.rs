//! Verification suites. Each check reports its worst error against a named
//! tolerance that `--tol name=value` can override.

use crate::config::{Format, RunConfig, Suite};
use crate::output::{stamp, Report, Table};
use crate::{Result, Verdict};
use num::complex::Complex64;
use num::ToPrimitive;
use orthogreen::exact::{self, frac, rat, RatMatrix, Rational};
use orthogreen::kernels::{self, Configuration, KernelParams};
use orthogreen::lattice::Lattice;
use orthogreen::qspace::MomentMatrix;
use orthogreen::quat::{self, Quaternion, QuaternionAlgebra};
use orthogreen::specfun::{self, SeriesPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder<'_> {
    /// Records `error` against the tolerance `name` (default `default`).
    fn record(&mut self, name: &'static str, error: f64, default: f64) {
        let tolerance = self.cfg.tol(name, default);
        self.checks.push(Check { suite: self.suite, name, error, tolerance, pass: error <= tolerance });
    }

    /// Records an exact check: `error` counts mismatches.
    fn exact(&mut self, name: &'static str, mismatches: usize) {
        self.checks.push(Check { suite: self.suite, name, error: mismatches as f64, tolerance: 0.0, pass: mismatches == 0 });
    }
}

pub fn run(cfg: &RunConfig, suite: Suite) -> Result<(Report, Verdict)> {
    let suites: Vec<Suite> = match suite {
        Suite::All => vec![Suite::Kernels, Suite::Lattice, Suite::Quat, Suite::Cm],
        s => vec![s],
    };
    let mut checks = Vec::new();
    for s in suites {
        let mut rec = Recorder { cfg, suite: suite_name(s), checks: Vec::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        match s {
            Suite::Kernels => kernel_suite(&mut rec, &mut rng)?,
            Suite::Lattice => lattice_suite(&mut rec, &mut rng)?,
            Suite::Quat => quat_suite(&mut rec, &mut rng)?,
            Suite::Cm => cm_suite(&mut rec)?,
            Suite::All => unreachable!("expanded above"),
        }
        checks.extend(rec.checks);
    }
    let pass = checks.iter().all(|c| c.pass);
    let header = ["suite", "name", "error", "tolerance", "pass"].map(String::from).to_vec();
    let rows = checks
        .iter()
        .map(|c| vec![c.suite.into(), c.name.into(), format!("{:e}", c.error), format!("{:e}", c.tolerance), c.pass.to_string()])
        .collect();
    let body = stamp(cfg, json!({ "suite": suite_name(suite), "checks": checks, "pass": pass }));
    Ok((Report { json: body, table: Some(Table { header, rows }), default_format: Format::Json }, Verdict::from_bool(pass)))
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Kernels => "kernels",
        Suite::Lattice => "lattice",
        Suite::Quat => "quat",
        Suite::Cm => "cm",
        Suite::All => "all",
    }
}

fn relative_residual(terms: &[f64]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    terms.iter().sum::<f64>().abs() / scale
}

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64, f64) {
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    (f0, (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}

fn kernel_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut laplace = 0.0f64;
    let mut configs: Vec<(MomentMatrix<f64>, f64, u32, f64)> = Vec::new();
    for n in [2u32, 4] {
        for s in [2.0, 3.0, 4.5] {
            for ratio in [0.1, 0.5, 0.9] {
                for t in [MomentMatrix::new(1.0, 0.0, 1.0), MomentMatrix::new(1.0, 0.5, 2.0)] {
                    configs.push((t, ratio, n, s));
                }
            }
        }
    }
    for _ in 0..8 {
        let a: f64 = rng.gen_range(0.5..3.0);
        let c: f64 = rng.gen_range(0.5..3.0);
        let b = rng.gen_range(-0.9..0.9) * (a * c).sqrt();
        configs.push((MomentMatrix::new(a, b, c), rng.gen_range(0.05..0.95), 2 * rng.gen_range(1..3), rng.gen_range(2.0..5.0)));
    }
    for (t, ratio, n, s) in &configs {
        let cfg = Configuration::build(t, *ratio, *n)?;
        let c = kernels::laplace_check(&cfg.v, &cfg.w, &cfg.z, &KernelParams::new(*s, *n)?)?;
        laplace = laplace.max(c.abs_err / c.lhs.abs());
    }
    rec.record("laplace", laplace, 1e-8);

    let mut wn = 0.0f64;
    for n in [2u32, 4, 6] {
        for a in [1.0, 3.0, 10.0] {
            wn = wn.max((kernels::w_normalization(a, &KernelParams::new(3.0, n)?)? - 1.0).abs());
        }
    }
    rec.record("w_normalization", wn, 1e-10);

    let pol = SeriesPolicy::default();
    let h = 1e-4;
    let (mut hyp, mut kum, mut whit, mut small, mut large) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for s in [2.0, 3.0, 4.5] {
        for s0 in [0.5, 1.0, 1.5] {
            let (a, b, c) = ((s + s0) / 2.0, (s - s0) / 2.0 + 1.0, s + 1.0);
            for x in [0.2, 0.5, 0.8] {
                let (f, d1, d2) = central(|x| specfun::hyp2f1(a, b, c, x, &pol).unwrap_or(f64::NAN), x, h);
                hyp = hyp.max(relative_residual(&[x * (1.0 - x) * d2, (c - (a + b + 1.0) * x) * d1, -a * b * f]));
            }
            let (mu, nu) = (s / 2.0, (s0 - 1.0) / 2.0);
            let (ka, kb) = (0.5 + mu - nu, 1.0 + 2.0 * mu);
            for z in [1.0, 5.0, 20.0] {
                let (f, d1, d2) = central(|z| specfun::kummer_m(ka, kb, z, &pol).unwrap_or(f64::NAN), z, h);
                kum = kum.max(relative_residual(&[z * d2, (kb - z) * d1, -ka * f]));
                let (f, _, d2) = central(|z| specfun::whittaker_m(nu, mu, z, &pol).unwrap_or(f64::NAN), z, h);
                whit = whit.max(relative_residual(&[d2, -0.25 * f, nu / z * f, -(mu * mu - 0.25) / (z * z) * f]));
            }
            let z = 1e-6;
            small = small.max((specfun::whittaker_m(nu, mu, z, &pol)? / z.powf(mu + 0.5) - 1.0).abs());
            let z = (100.0 * ((kb - ka) * (1.0 - ka)).abs()).max(80.0);
            let (lw, sw) = specfun::ln_whittaker_m(nu, mu, z, &pol)?;
            let (lg1, _) = specfun::ln_gamma_real(mu - nu + 0.5)?;
            let (lg2, _) = specfun::ln_gamma_real(1.0 + 2.0 * mu)?;
            large = large.max((sw * (lw + lg1 - lg2 - z / 2.0 + nu * z.ln()).exp() - 1.0).abs());
        }
    }
    rec.record("ode_hyp2f1", hyp, 1e-6);
    rec.record("ode_kummer", kum, 1e-6);
    rec.record("ode_whittaker", whit, 1e-6);
    rec.record("whittaker_small_z", small, 1e-4);
    rec.record("whittaker_large_z", large, 0.02);

    let (mut mt, mut constant) = (0.0f64, 0.0f64);
    for (t, tau, s, n) in [
        (MomentMatrix::new(1.0, 0.5, 2.0), Complex64::new(0.3, 0.9), 3.0, 2u32),
        (MomentMatrix::new(1.0, 0.0, 1.0), Complex64::new(-0.7, 1.4), 2.5, 2),
        (MomentMatrix::new(2.0, -0.3, 1.0), Complex64::new(0.1, 0.6), 4.5, 4),
    ] {
        let c = kernels::m_t_tilde_check(&t, tau, &KernelParams::new(s, n)?, 1e-5)?;
        mt = mt.max(c.rel_err);
        constant = constant.max((c.constant_ratio - Complex64::new(0.0, PI)).norm() / PI);
    }
    rec.record("m_tilde", mt, 1e-6);
    rec.record("m_tilde_constant", constant, 1e-12);
    Ok(())
}

fn box_short_vectors(g: &RatMatrix, bound: &Rational) -> Vec<Vec<i64>> {
    let n = g.len();
    let gi = exact::inverse(g).expect("positive definite");
    let widths: Vec<i64> =
        (0..n).map(|i| (exact::to_f64(bound) * exact::to_f64(&gi[i][i])).sqrt().floor() as i64 + 1).collect();
    let mut out = Vec::new();
    let mut x: Vec<i64> = widths.iter().map(|w| -w).collect();
    loop {
        let xr: Vec<Rational> = x.iter().map(|&c| rat(c)).collect();
        if x.iter().any(|&c| c != 0) && exact::bilinear(g, &xr, &xr) <= *bound {
            out.push(x.clone());
        }
        let mut i = 0;
        loop {
            if i == n {
                out.sort();
                return out;
            }
            x[i] += 1;
            if x[i] <= widths[i] {
                break;
            }
            x[i] = -widths[i];
            i += 1;
        }
    }
}

fn lattice_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut mismatches = 0;
    let mut unstable = 0;
    for _ in 0..12 {
        let n = rng.gen_range(2..=4);
        // G = L Lᵀ + I with small integer L is positive definite.
        let l: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| if j <= i { rng.gen_range(-2..=2) } else { 0 }).collect()).collect();
        let g: RatMatrix = (0..n)
            .map(|i| (0..n).map(|j| rat((0..n).map(|k| l[i][k] * l[j][k]).sum::<i64>() + (i == j) as i64)).collect())
            .collect();
        let bound = frac(rng.gen_range(2..=24), rng.gen_range(1..=2));
        let lat = Lattice::new(g.clone())?;
        let got = lat.short_vectors(&bound)?;
        if got != box_short_vectors(&g, &bound) {
            mismatches += 1;
        }
        if lat.short_vectors(&bound)? != got {
            unstable += 1;
        }
    }
    rec.exact("short_vectors_vs_box", mismatches);
    rec.exact("deterministic_order", unstable);
    Ok(())
}

fn quat_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut disc_mismatch = 0;
    let mut split = 0.0f64;
    for name in ["preset6", "preset10"] {
        let alg = QuaternionAlgebra::preset(name)?;
        if quat::maximal_order(&alg)?.discriminant() != alg.discriminant() {
            disc_mismatch += 1;
        }
        for _ in 0..50 {
            let x = Quaternion([0; 4].map(|_| frac(rng.gen_range(-30..=30), rng.gen_range(1..=6))));
            let m = alg.matrix(&x);
            let nrd = exact::to_f64(&alg.nrd(&x));
            split = split.max((m[0] * m[3] - m[1] * m[2] - nrd).abs() / nrd.abs().max(1.0));
            split = split.max((m[0] + m[3] - exact::to_f64(&x.trd())).abs());
        }
    }
    rec.exact("maximal_order_discriminant", disc_mismatch);
    rec.record("splitting", split, 1e-10);
    let alg = QuaternionAlgebra::preset("preset6")?;
    let o = quat::maximal_order(&alg)?;
    let mut eichler = 0;
    for p in [5u64, 7] {
        let v = o.find_element_of_norm(p as i64, 4.0, 1e4)?;
        let e = quat::eichler_order(&o, &v)?;
        let index = e.index_in(&o).and_then(|i| i.to_u64());
        if e.discriminant() != p * alg.discriminant() || index != Some(p) {
            eichler += 1;
        }
    }
    rec.exact("eichler_orders", eichler);
    let u = o.find_element_of_norm(-1, 2.0, 1e3)?;
    rec.exact("norm_minus_one_unit", usize::from(alg.nrd(&u) != rat(-1)));
    Ok(())
}

fn cm_suite(rec: &mut Recorder) -> Result<()> {
    let mut disagree = 0;
    for d in -2000i64..-2 {
        if quat::is_fundamental_discriminant(d) && quat::class_number(d)? != quat::class_number_dirichlet(d)? {
            disagree += 1;
        }
    }
    rec.exact("class_number_methods", disagree);
    let mut wrong = 0;
    for (name, d) in [("preset6", -19i64), ("preset6", -43), ("preset10", -43), ("preset10", -3)] {
        let o = quat::maximal_order(&QuaternionAlgebra::preset(name)?)?;
        let (t, n) = quat::trace_norm_for(d);
        if !quat::cm_set(&o, t, n, 2.0 * d.unsigned_abs() as f64)?.matches() {
            wrong += 1;
        }
    }
    rec.exact("cm_counts", wrong);
    Ok(())
}
