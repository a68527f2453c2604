use crate::config::{
    parse_f64_list, CmArgs, Command, EnumerateArgs, GreenArgs, GreenMode, KernelArgs, KernelKind, OrbitsArgs, RunConfig,
};
use crate::output::{stamp, Report, Table};
use crate::{usage, verify, Result, Verdict};
use num::complex::Complex64;
use num::ToPrimitive;
use orthogreen::exact::{format_rational, parse_rational, RatMatrix, Rational};
use orthogreen::green::{self, GreenOptions, SumMode};
use orthogreen::kernels::{self, KernelParams};
use orthogreen::lattice::Lattice;
use orthogreen::qspace::{MomentMatrix, PlanePoint};
use orthogreen::quat::{self, QuaternionAlgebra, QuaternionOrder};
use rayon::prelude::*;
use serde_json::{json, Value};

pub fn dispatch(cfg: &RunConfig) -> Result<(Report, Verdict)> {
    match &cfg.command {
        Command::Verify(a) => verify::run(cfg, a.suite.unwrap_or(crate::config::Suite::All)),
        Command::Kernel(a) => kernel(cfg, a),
        Command::Enumerate(a) => enumerate(cfg, a),
        Command::Green(a) => green_cmd(cfg, a),
        Command::Cm(a) => cm(cfg, a),
        Command::Orbits(a) => orbits(cfg, a),
    }
}

fn parse_rat(s: &str) -> Result<Rational> {
    parse_rational(s.trim()).ok_or_else(|| usage(format!("not a rational number: {s:?}")))
}

fn parse_moment(s: &str) -> Result<MomentMatrix<Rational>> {
    let parts: Vec<Rational> = s.split(',').map(parse_rat).collect::<Result<_>>()?;
    match parts.as_slice() {
        [a, b, c] => Ok(MomentMatrix::new(a.clone(), b.clone(), c.clone())),
        _ => Err(usage("moment matrix expects a,b,c")),
    }
}

fn parse_gram(s: &str) -> Result<RatMatrix> {
    s.split(';').map(|row| row.split(',').map(parse_rat).collect::<Result<Vec<_>>>()).collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let start: f64 = start.trim().parse().map_err(|_| usage("grid start is not a number"))?;
            let stop: f64 = stop.trim().parse().map_err(|_| usage("grid stop is not a number"))?;
            let count: usize = count.trim().parse().map_err(|_| usage("grid count is not an integer"))?;
            if count == 0 {
                return Err(usage("grid count must be positive"));
            }
            if count == 1 {
                return Ok(vec![start]);
            }
            Ok((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect())
        }
        [_] => parse_f64_list(s),
        _ => Err(usage("grid expects start:stop:count or x1,x2,...")),
    }
}

fn algebra(cfg: &RunConfig) -> Result<QuaternionAlgebra> {
    QuaternionAlgebra::parse(&cfg.algebra).map_err(|e| usage(format!("algebra {:?}: {e}", cfg.algebra)))
}

fn chart_point(alg: &QuaternionAlgebra, point: Option<&str>) -> Result<PlanePoint> {
    match point {
        None => Ok(alg.base_point()),
        Some(s) => {
            let c = parse_f64_list(s)?;
            if c.len() != 4 {
                return Err(usage("point expects x1,y1,x2,y2"));
            }
            Ok(alg.chart().plane(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3]))?)
        }
    }
}

fn rat_strings(xs: &[Rational]) -> Vec<String> {
    xs.iter().map(format_rational).collect()
}

fn moment_strings(t: &MomentMatrix<Rational>) -> [String; 3] {
    [format_rational(&t.a), format_rational(&t.b), format_rational(&t.c)]
}

fn last_radius(cfg: &RunConfig, default: f64) -> f64 {
    cfg.radius.as_ref().and_then(|r| r.last().copied()).unwrap_or(default)
}

fn kernel(cfg: &RunConfig, a: &KernelArgs) -> Result<(Report, Verdict)> {
    let kind = a.kernel.ok_or_else(|| usage("kernel requires --kernel"))?;
    let n = a.n.unwrap_or(2);
    let s = a.s.unwrap_or(3.0);
    let s_im = a.s_im.unwrap_or(0.0);
    if s_im != 0.0 && kind != KernelKind::CConst {
        return Err(usage("complex s is only accepted by the c-const kernel"));
    }
    let default_grid = match kind {
        KernelKind::Phi2 => "0.05:0.95:19",
        KernelKind::CConst => "2:5:7",
        _ => "0.1:3:30",
    };
    let xs = parse_grid(a.grid.as_deref().unwrap_or(default_grid))?;
    let moment = a.moment.as_deref().map(parse_moment).transpose()?.map(|t| t.to_f64());
    let need_moment = || moment.clone().ok_or_else(|| usage("this kernel requires --moment a,b,c"));
    let eval = |x: f64| -> Result<Complex64> {
        Ok(match kind {
            KernelKind::Phi2 => kernels::phi2(x, 1.0, &KernelParams::new(s, n)?)?.into(),
            KernelKind::MT => kernels::m_t(&need_moment()?, x, &KernelParams::new(s, n)?)?.into(),
            KernelKind::W => kernels::w_kernel(a.a.unwrap_or(1.0), x, &KernelParams::new(s, n)?)?.into(),
            KernelKind::MTTilde => {
                let tau = Complex64::new(a.tau_re.unwrap_or(0.0), x);
                kernels::m_t_tilde(&need_moment()?, tau, &KernelParams::new(s, n)?)?
            }
            KernelKind::CConst => kernels::c_const(&need_moment()?, &KernelParams::complex(Complex64::new(x, s_im), n)?)?,
        })
    };
    let values: Vec<Complex64> = xs.par_iter().map(|&x| eval(x)).collect::<Result<_>>()?;
    let name = match kind {
        KernelKind::Phi2 => "phi2",
        KernelKind::MT => "m-t",
        KernelKind::W => "w",
        KernelKind::MTTilde => "m-t-tilde",
        KernelKind::CConst => "c-const",
    };
    let input = match kind {
        KernelKind::Phi2 => "ratio",
        KernelKind::CConst => "s_re",
        _ => "y",
    };
    let header = vec!["kernel".into(), "s".into(), "s_im".into(), "n".into(), input.into(), "value_re".into(), "value_im".into()];
    let rows: Vec<Vec<String>> = xs
        .iter()
        .zip(&values)
        .map(|(x, v)| {
            let s_col = if kind == KernelKind::CConst { *x } else { s };
            vec![name.into(), s_col.to_string(), s_im.to_string(), n.to_string(), x.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)]
        })
        .collect();
    let points: Vec<Value> = xs.iter().zip(&values).map(|(x, v)| json!({ input: x, "value_re": v.re, "value_im": v.im })).collect();
    let body = stamp(cfg, json!({ "kernel": name, "s": s, "s_im": s_im, "n": n, "points": points }));
    Ok((Report { json: body, table: Some(Table { header, rows }), default_format: crate::config::Format::Csv }, Verdict::Pass))
}

fn enumerate(cfg: &RunConfig, a: &EnumerateArgs) -> Result<(Report, Verdict)> {
    if let Some(g) = &a.gram {
        let gram = parse_gram(g)?;
        let bound = parse_rat(a.bound.as_deref().ok_or_else(|| usage("--gram requires --bound"))?)?;
        let lat = Lattice::new(gram)?;
        let vs = lat.short_vectors(&bound)?;
        let rank = lat.rank();
        let mut header: Vec<String> = (1..=rank).map(|i| format!("x{i}")).collect();
        header.push("q".into());
        let rows = vs
            .iter()
            .map(|x| x.iter().map(|c| c.to_string()).chain([format_rational(&lat.q(x))]).collect())
            .collect();
        let vectors: Vec<Value> = vs.iter().map(|x| json!({ "coords": x, "q": format_rational(&lat.q(x)) })).collect();
        let body = stamp(cfg, json!({ "kind": "short_vectors", "bound": format_rational(&bound), "count": vs.len(), "vectors": vectors }));
        return Ok((Report { json: body, table: Some(Table { header, rows }), default_format: crate::config::Format::Json }, Verdict::Pass));
    }
    let alg = algebra(cfg)?;
    let order = quat::maximal_order(&alg)?;
    let lat = order.lattice();
    let z = chart_point(&alg, a.point.as_deref())?;
    let radius = last_radius(cfg, 20.0);
    let mg = lat.majorant_gram(&z);
    let maj = |x: &[i64]| orthogreen::linalg::quad_form(&mg, &x.iter().map(|&c| c as f64).collect::<Vec<_>>());
    match (&a.norm, &a.moment) {
        (Some(m), None) => {
            let m = parse_rat(m)?;
            let vs = lat.vectors_of_norm(&z, &m, radius)?;
            let header = vec!["c1".into(), "c2".into(), "c3".into(), "c4".into(), "nrd".into(), "majorant".into()];
            let rows = vs
                .iter()
                .map(|x| x.iter().map(|c| c.to_string()).chain([format_rational(&m), maj(x).to_string()]).collect())
                .collect();
            let vectors: Vec<Value> = vs
                .iter()
                .map(|x| json!({ "coords": x, "element": rat_strings(&lat.vector_exact(x)), "nrd": format_rational(&m), "majorant": maj(x) }))
                .collect();
            let body = stamp(
                cfg,
                json!({ "kind": "vectors_of_norm", "algebra": alg_json(&alg), "radius": radius, "count": vs.len(), "vectors": vectors }),
            );
            Ok((Report { json: body, table: Some(Table { header, rows }), default_format: crate::config::Format::Json }, Verdict::Pass))
        }
        (None, Some(t)) => {
            let t = parse_moment(t)?;
            let pairs = lat.pairs_with_moment(&z, &t, radius)?;
            let header = vec!["v".into(), "w".into(), "a".into(), "b".into(), "c".into()];
            let join = |x: &[i64]| x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
            let rows = pairs
                .iter()
                .map(|(v, w)| {
                    let m = moment_strings(&lat.moment(v, w));
                    vec![join(v), join(w), m[0].clone(), m[1].clone(), m[2].clone()]
                })
                .collect();
            let list: Vec<Value> = pairs
                .iter()
                .map(|(v, w)| json!({ "v": v, "w": w, "moment": moment_strings(&lat.moment(v, w)) }))
                .collect();
            let body = stamp(
                cfg,
                json!({ "kind": "pairs_with_moment", "algebra": alg_json(&alg), "moment": moment_strings(&t), "radius": radius, "count": pairs.len(), "pairs": list }),
            );
            Ok((Report { json: body, table: Some(Table { header, rows }), default_format: crate::config::Format::Json }, Verdict::Pass))
        }
        _ => Err(usage("enumerate requires --gram with --bound, or exactly one of --norm / --moment")),
    }
}

fn alg_json(alg: &QuaternionAlgebra) -> Value {
    json!({ "name": alg.name(), "a": alg.a(), "b": alg.b(), "discriminant": alg.discriminant(), "ramified": alg.ramified_primes() })
}

fn one_coords(order: &QuaternionOrder) -> Vec<i64> {
    order.coordinates(&quat::Quaternion::one()).iter().map(|c| c.to_integer().to_i64().expect("small")).collect()
}

fn green_cmd(cfg: &RunConfig, a: &GreenArgs) -> Result<(Report, Verdict)> {
    let alg = algebra(cfg)?;
    let order = quat::maximal_order(&alg)?;
    let lat = order.lattice();
    let p = KernelParams::new(a.s.unwrap_or(2.5), 2)?;
    let v = match &a.vector {
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<i64>().map_err(|_| usage(format!("not an integer: {t:?}"))))
            .collect::<Result<Vec<_>>>()?,
        None => one_coords(&order),
    };
    if v.len() != 4 {
        return Err(usage("vector expects four order coordinates"));
    }
    // The base point lies on the divisor of the element 1, so default to a generic point.
    let z = chart_point(&alg, Some(a.point.as_deref().unwrap_or("0.45,0.7,0.7,1.9")))?;
    let radii = cfg.radius.clone().unwrap_or_else(|| vec![20.0, 40.0, 80.0, 160.0]);
    let mode = match a.mode.unwrap_or(GreenMode::Lattice) {
        GreenMode::Lattice => SumMode::Lattice,
        GreenMode::Orbit => SumMode::Orbit { generators: green::unit_actions(&order, a.unit_radius.unwrap_or(6.0))? },
    };
    let mut opts = GreenOptions { mode, tolerance: cfg.tol("green", 1e-3), ..Default::default() };
    if let Some(g) = a.guard {
        opts.divisor_guard = g;
    }
    let s_floor = p.s0() + 2.0;
    let (value, report) = green::green_truncated(&lat, &v, &z, &p, &radii, &opts)?;
    let ok = report.dominated && report.increment_ratios.iter().all(|&q| q < 1.0);
    let body = stamp(
        cfg,
        json!({
            "algebra": alg_json(&alg),
            "s": p.real_s()?,
            "convergent_range": p.real_s()? >= s_floor,
            "vector": v,
            "value": value,
            "report": report,
            "pass": ok,
        }),
    );
    Ok((Report::json(body), Verdict::from_bool(ok)))
}

fn cm(cfg: &RunConfig, a: &CmArgs) -> Result<(Report, Verdict)> {
    let alg = algebra(cfg)?;
    let disc = a.disc.ok_or_else(|| usage("cm requires --disc"))?;
    if disc >= 0 || !quat::is_fundamental_discriminant(disc) {
        return Err(usage(format!("{disc} is not a negative fundamental discriminant")));
    }
    let order = quat::maximal_order(&alg)?;
    let (t, n) = quat::trace_norm_for(disc);
    let h = quat::class_number(disc)?;
    if !alg.embeds_field(disc) {
        let body = stamp(
            cfg,
            json!({
                "algebra": alg_json(&alg), "disc": disc, "embeds": false, "class_number": h,
                "embeddings": 0, "classes": [], "count": 0, "expected": 0, "stabilized": true, "match": true,
            }),
        );
        return Ok((Report::json(body), Verdict::Pass));
    }
    let start = cfg.radius.as_ref().map(|r| r[0]).unwrap_or(2.0 * disc.unsigned_abs() as f64);
    let report = quat::cm_set_with(&order, t, n, start, a.max_doublings.unwrap_or(6))?;
    let last = report.last();
    let schedule: Vec<Value> = report
        .schedule
        .iter()
        .map(|p| json!({ "radius": p.radius, "unit_radius": p.unit_radius, "embeddings": p.embeddings, "units": p.units, "classes": p.classes.len() }))
        .collect();
    let classes: Vec<Value> = last
        .classes
        .iter()
        .map(|c| {
            json!({
                "tau": [c.representative.tau.re, c.representative.tau.im],
                "generator": rat_strings(&c.representative.generator.0),
                "size": c.size,
            })
        })
        .collect();
    let ok = report.matches();
    let body = stamp(
        cfg,
        json!({
            "algebra": alg_json(&alg),
            "disc": disc,
            "trace": t,
            "norm": n,
            "embeds": true,
            "class_number": h,
            "atkin_lehner_order": alg.atkin_lehner_order(),
            "schedule": schedule,
            "embeddings": last.embeddings,
            "classes": classes,
            "count": report.count(),
            "expected": report.expected,
            "stabilized": report.stabilized,
            "match": ok,
        }),
    );
    Ok((Report::json(body), Verdict::from_bool(ok)))
}

fn orbits(cfg: &RunConfig, a: &OrbitsArgs) -> Result<(Report, Verdict)> {
    let alg = algebra(cfg)?;
    let order = quat::maximal_order(&alg)?;
    let t = parse_moment(a.moment.as_deref().ok_or_else(|| usage("orbits requires --moment a,b,c"))?)?;
    let radius = last_radius(cfg, 60.0);
    let (report, ok) = if a.iota {
        let r = green::iota_pair_report(&t, &order, radius)?;
        let ok = r.bijection_exact;
        (serde_json::to_value(r).expect("serializable"), ok)
    } else {
        let r = green::weighted_cycle_count(&t, &order, radius)?;
        let ok = r.matches;
        (serde_json::to_value(r).expect("serializable"), ok)
    };
    let body = stamp(cfg, json!({ "algebra": alg_json(&alg), "iota": a.iota, "report": report, "pass": ok }));
    Ok((Report::json(body), Verdict::from_bool(ok)))
}
