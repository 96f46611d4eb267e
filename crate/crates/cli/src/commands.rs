use std::fs;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde_json::{json, Map, Value};

use momray_core::johnop::{
    canonical_chains, john_residuals_exact, john_residuals_fd, lifted_psi, negative_control as run_negative_control,
    sample_points, select_chains, ChainResidual, ChainSelection, DEFAULT_FD_MAX_LEN,
};
use momray_core::lift::Evaluator;
use momray_core::planar2d::{
    chi_moment_conditions, chi_recursion, chi_residual, consistency_check, inner_derivative_residual,
    moment_conditions, sample_line_points, MomentRow,
};
use momray_core::reduction::{
    check_recovery, check_reduction_properties, collapse_residual, max_relative_difference, reduce_via_transport,
    reduce_via_tuple, transform_tuple, MAX_RANK,
};
use momray_core::symtensor::multi_indices;
use momray_core::weyl::{verify_collapse_family, verify_commutator_family, verify_john_transport_commute};
use momray_core::xray::{ray_transform_i, sample_ts_points};
use momray_core::{Complex64, GaussField, MomentTable, MomentumDataSet, TSPoint, TransformRep};

use crate::report::{Check, Report, Table};
use crate::{Backend, ChainMode, FieldArgs, IdentityArgs, MomentsArgs, NegativeArgs, OutputArgs, RangeArgs, ReduceArgs, TransformArgs};

const LINE_SALT: u64 = 0x11;
const TS_SALT: u64 = 0x22;
const POTENTIAL_SALT: u64 = 0x33;

fn load_field(args: &FieldArgs, default_n: usize) -> Result<(GaussField, Value)> {
    match &args.field {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let f = GaussField::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok((f, json!(path.display().to_string())))
        }
        None => {
            let n = args.n.unwrap_or(default_n);
            let f = GaussField::random(args.m, n, args.seed, args.terms)?;
            Ok((f, json!("random")))
        }
    }
}

fn params(field: Value, f: &GaussField, args: &FieldArgs, output: &OutputArgs, extra: Value) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("field".into(), field);
    map.insert("m".into(), json!(f.rank()));
    map.insert("n".into(), json!(f.dim()));
    map.insert("seed".into(), json!(args.seed));
    if args.field.is_none() {
        map.insert("terms".into(), json!(args.terms));
    }
    map.insert("points".into(), json!(output.points));
    map.insert("tol".into(), json!(output.tol));
    if let Value::Object(extra) = extra {
        map.extend(extra);
    }
    map
}

fn parity_check(data: &MomentumDataSet, points: &[TSPoint], tol: f64) -> Result<Check> {
    Ok(Check::residual(
        "parity",
        "phi^k(x, -xi) = (-1)^(m-k) phi^k(x, xi)",
        data.evenness_residual(points)?,
        tol,
    ))
}

pub fn transform(args: &TransformArgs) -> Result<Report> {
    let (f, source) = load_field(&args.field, 3)?;
    let (m, n) = (f.rank(), f.dim());
    let out = &args.output;
    let mut report = Report::new("transform", params(source, &f, &args.field, out, json!({})));
    let data = MomentumDataSet::from_field(&f);
    let ts = sample_ts_points(n, out.points, 1.0, args.field.seed ^ TS_SALT);

    let mut values = Vec::new();
    for p in &ts {
        let phi: Vec<Complex64> = (0..=m).map(|k| ray_transform_i(k, &f, p)).collect::<momray_core::Result<_>>()?;
        values.push(json!({ "x": p.x(), "xi": p.xi(), "phi": phi }));
    }
    report.details = Some(json!({ "values": values }));

    report.push(parity_check(&data, &ts, out.tol)?);
    let pts = sample_points(n, out.points, args.field.seed ^ LINE_SALT);
    let mut lift: f64 = 0.0;
    for k in 0..=m {
        let compiled = TransformRep::transform(k, &f).compile();
        for (x, xi) in &pts {
            let a = data.lift_psi(k, x, xi)?;
            let b = compiled.evaluate_detailed(x, xi)?;
            lift = lift.max((a - b.value).norm() / b.magnitude.max(1.0));
        }
    }
    report.push(Check::residual("lift", "homogeneous lift of I^k f equals J^k f off the sphere bundle", lift, out.tol));
    Ok(report)
}

fn perturbed(data: &MomentumDataSet, eps: f64) -> Result<MomentumDataSet> {
    let m = data.rank();
    let base = data.clone();
    let bump: Evaluator = Arc::new(move |p: &TSPoint| {
        let r2: f64 = p.x().iter().map(|v| v * v).sum();
        let xi = p.xi();
        Ok(base.phi(m, p)? + eps * (-r2).exp() * (xi[0] * xi[0] - xi[1] * xi[1]))
    });
    Ok(data.clone().with_evaluator(m, bump)?)
}

fn worst(res: &[ChainResidual]) -> f64 {
    res.iter().map(|r| r.max_rel).fold(0.0, f64::max)
}

pub fn range_check(args: &RangeArgs) -> Result<Report> {
    let (f, source) = load_field(&args.field, 3)?;
    let (m, n) = (f.rank(), f.dim());
    let out = &args.output;
    let extra = json!({
        "chains": format!("{:?}", args.chains).to_lowercase(),
        "max_chains": args.max_chains,
        "backend": format!("{:?}", args.backend).to_lowercase(),
        "step": args.step,
        "perturb": args.perturb,
    });
    let mut report = Report::new("range-check", params(source, &f, &args.field, out, extra));
    let all = canonical_chains(n, m + 1);
    let chains = match args.chains {
        ChainMode::All => all,
        ChainMode::Sample => select_chains(all, args.max_chains, ChainSelection::Spread),
    };
    let valid = MomentumDataSet::from_field(&f);
    let data = match args.perturb {
        Some(eps) => {
            if args.backend == Backend::Exact {
                bail!("--perturb needs --backend fd: perturbed data has no exact transform");
            }
            if n < 2 {
                bail!("--perturb needs n >= 2");
            }
            perturbed(&valid, eps)?
        }
        None => valid.clone(),
    };
    let ts = sample_ts_points(n, out.points, 1.0, args.field.seed ^ TS_SALT);
    report.push(parity_check(&data, &ts, out.tol)?);

    let pts = sample_points(n, out.points, args.field.seed ^ LINE_SALT);
    let residuals = match args.backend {
        Backend::Exact => john_residuals_exact(&TransformRep::transform(m, &f), &chains, &pts)?,
        Backend::Fd => john_residuals_fd(&lifted_psi(&data), &chains, &pts, args.step, DEFAULT_FD_MAX_LEN)?,
    };
    if args.perturb.is_some() {
        let baseline = john_residuals_fd(&lifted_psi(&valid), &chains, &pts, args.step, DEFAULT_FD_MAX_LEN)?;
        let (v, p) = (worst(&baseline), worst(&residuals));
        report.details = Some(json!({
            "valid_residual": v,
            "perturbed_residual": p,
            "ratio": p / v,
        }));
    }
    for r in &residuals {
        report.push(Check::residual(
            format!("john {}", r.chain),
            format!("chain of {} John operators annihilates psi^m", m + 1),
            r.max_rel,
            out.tol,
        ));
    }
    Ok(report)
}

pub fn reduce(args: &ReduceArgs) -> Result<Report> {
    let (f, source) = load_field(&args.field, 3)?;
    let (m, n) = (f.rank(), f.dim());
    if m > MAX_RANK {
        bail!("reduce supports rank <= {MAX_RANK}, got {m}");
    }
    let out = &args.output;
    let mut report = Report::new("reduce", params(source, &f, &args.field, out, json!({})));
    let tuple = transform_tuple(&f);
    let pts = sample_points(n, out.points, args.field.seed ^ LINE_SALT);
    let (mut agree, mut symmetry, mut homogeneity, mut transport, mut john, mut collapse) =
        (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for idx in multi_indices(m, n) {
        let target = idx.as_slice();
        let psi = reduce_via_transport(&tuple[m], target)?;
        let compiled = psi.compile();
        agree = agree.max(max_relative_difference(&compiled, &reduce_via_tuple(&tuple, target)?.compile(), &pts)?);
        let reversed: Vec<usize> = target.iter().rev().copied().collect();
        let other = reduce_via_transport(&tuple[m], &reversed)?.compile();
        symmetry = symmetry.max(max_relative_difference(&compiled, &other, &pts)?);
        let props = check_reduction_properties(&psi, &pts)?;
        homogeneity = homogeneity.max(props.homogeneity);
        transport = transport.max(props.transport);
        john = john.max(props.john);
        collapse = collapse.max(collapse_residual(&tuple[m], &idx, &pts)?);
    }
    let recovery = check_recovery(&f, &pts)?;
    let tol = out.tol;
    report.push(Check::residual("agreement", "psi_I from psi^m equals psi_I from psi^0..psi^m", agree, tol));
    report.push(Check::residual("symmetry", "psi_I is symmetric in I", symmetry, tol));
    report.push(Check::residual("homogeneity", "psi_I(x, t xi) = psi_I(x, xi) / |t|", homogeneity, tol));
    report.push(Check::residual("transport", "<xi, d_x> psi_I = 0", transport, tol));
    report.push(Check::residual("john", "J_ij psi_I = 0 for all i < j", john, tol));
    report.push(Check::residual("collapse", "d_xi^m <xi, d_x>^(m+1) psi^m = 0", collapse, tol));
    report.push(Check::residual("components", "psi_I = J^0 f_I", recovery.component_recovery, tol));
    report.push(Check::residual(
        "contracted-derivatives",
        "d_x^k J^k f = sum_I xi^I d_xi^k psi_I",
        recovery.contracted_derivatives,
        tol,
    ));
    report.push(Check::residual(
        "coefficient-expansion",
        "d_x^k J^k f = sigma sum_p a(m,k,p) d_x^p d_xi^(k-p) psi^p",
        recovery.coefficient_expansion,
        tol,
    ));
    report.push(Check::exact(
        "coefficient-collapse",
        "a(m,k,p) = 1 for p = k and 0 for p < k",
        recovery.coefficients_collapse,
    ));
    report.push(Check::residual("lift", "homogeneous lift of I^k f equals J^k f", recovery.lift_agreement, tol));
    Ok(report)
}

fn complex_list(values: &[Complex64]) -> String {
    values
        .iter()
        .map(|c| format!("{}{:+}i", c.re, c.im))
        .collect::<Vec<_>>()
        .join(";")
}

fn moment_table(rows: &[MomentRow]) -> Table {
    Table {
        header: ["r", "k", "degree", "fit_residual", "coefficient_error", "fitted", "predicted"]
            .map(String::from)
            .to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.r.to_string(),
                    r.k.to_string(),
                    r.degree.to_string(),
                    r.fit_residual.to_string(),
                    r.coefficient_error.to_string(),
                    complex_list(&r.fitted),
                    complex_list(&r.predicted),
                ]
            })
            .collect(),
    }
}

pub fn moments2d(args: &MomentsArgs) -> Result<Report> {
    let (f, source) = load_field(&args.field, 2)?;
    if f.dim() != 2 {
        bail!("moments2d needs a planar field (n = 2), got n = {}", f.dim());
    }
    let m = f.rank();
    let out = &args.output;
    let tol = out.tol;
    let mut report = Report::new("moments2d", params(source, &f, &args.field, out, json!({ "rmax": args.rmax })));
    let rows = moment_conditions(&f, args.rmax)?;
    for r in &rows {
        report.push(Check::residual(
            format!("fit r={} k={}", r.r, r.k),
            format!("moment integral of I^{} f is homogeneous of degree {} on the circle", r.k, r.degree),
            r.fit_residual,
            tol,
        ));
        report.push(Check::residual(
            format!("prediction r={} k={}", r.r, r.k),
            "fitted coefficients equal the prediction from the complex momenta",
            r.coefficient_error,
            tol,
        ));
    }
    let order = args.rmax + m + 1;
    let mu = MomentTable::new(&f, order)?;
    let same = MomentTable::new(&f, order)?;
    report.push(Check::residual(
        "consistency self",
        "alternating momenta relations with g = f",
        consistency_check(&mu, &same, args.rmax)?.max_abs,
        tol,
    ));
    let pts = sample_line_points(out.points, args.field.seed ^ LINE_SALT);
    report.push(Check::residual(
        "inner-derivative",
        "I^k(df) = -k I^(k-1) f",
        inner_derivative_residual(&f, &pts)?,
        tol,
    ));

    let mut details = json!({ "moments": rows });
    if m >= 1 {
        // g = f - dv has the same I^0 as f, and the recursion must return I^k v
        let v = GaussField::random(m - 1, 2, args.field.seed ^ POTENTIAL_SALT, 2)?;
        let g = f.add_scaled(&v.inner_derivative()?, Complex64::new(-1.0, 0.0))?;
        let rec = chi_recursion(&MomentumDataSet::from_field(&f), &g, &pts)?;
        report.push(Check::residual("chi base", "I^0 g = phi^0", rec.base_mismatch, tol));
        report.push(Check::residual("chi", "chi^k = I^k v for f = g + dv", chi_residual(&rec.chi, &v, &pts)?, tol));
        let nu = MomentTable::new(&g, order)?;
        let report_gv = consistency_check(&mu, &nu, args.rmax)?;
        report.push(Check::residual(
            "consistency potential",
            "alternating momenta relations for fields with equal I^0",
            report_gv.max_abs,
            tol,
        ));
        let chi_rows = chi_moment_conditions(&f, &g, Some(&v), args.rmax)?;
        for r in &chi_rows {
            report.push(Check::residual(
                format!("chi fit r={} k={}", r.r, r.k),
                format!("moment integral of chi^{} is homogeneous of degree {}", r.k, r.degree),
                r.fit_residual,
                tol,
            ));
            report.push(Check::residual(
                format!("chi prediction r={} k={}", r.r, r.k),
                "chi moment coefficients equal the prediction from the momenta of v",
                r.coefficient_error,
                tol,
            ));
        }
        details["chi_moments"] = json!(chi_rows);
    }
    report.table = Some(moment_table(&rows));
    report.details = Some(details);
    Ok(report)
}

pub fn identities(args: &IdentityArgs) -> Result<Report> {
    let mut params = Map::new();
    for (k, v) in [
        ("nmax", json!(args.nmax)),
        ("kmax", json!(args.kmax)),
        ("lmax", json!(args.lmax)),
        ("mmax", json!(args.mmax)),
        ("oracles", json!(args.oracles)),
        ("seed", json!(args.seed)),
    ] {
        params.insert(k.into(), v);
    }
    let mut report = Report::new("identities", params);
    for o in verify_commutator_family(args.nmax, args.kmax, args.lmax, args.oracles, args.seed)? {
        let holds = o.holds();
        report.push(Check::exact(o.label, "commutator of <xi,d_x>^l with symmetrized xi-derivatives", holds));
    }
    for o in verify_collapse_family(args.nmax, args.mmax, args.oracles, args.seed)? {
        let holds = o.holds();
        report.push(Check::exact(o.label, "symmetrized xi-derivatives of <xi,d_x>^(m+1) collapse", holds));
    }
    for n in 1..=args.nmax {
        for o in verify_john_transport_commute(n) {
            let holds = o.holds();
            report.push(Check::exact(o.label, "[J_ij, <xi,d_x>] = 0", holds));
        }
    }
    Ok(report)
}

pub fn negative_control(args: &NegativeArgs) -> Result<Report> {
    if args.min_ratio <= 0.0 {
        bail!("--min-ratio must be positive");
    }
    let mut params = Map::new();
    for (k, v) in [
        ("seed", json!(args.seed)),
        ("perturb", json!(args.perturb)),
        ("points", json!(args.points)),
        ("step", json!(args.step)),
        ("min_ratio", json!(args.min_ratio)),
    ] {
        params.insert(k.into(), v);
    }
    let mut report = Report::new("negative-control", params);
    let nc = run_negative_control(args.seed, args.perturb, args.points, args.step)?;
    report.push(Check::residual(
        "separation",
        "valid/perturbed FD John residual ratio is at most 1/min_ratio",
        nc.valid_residual / nc.perturbed_residual,
        1.0 / args.min_ratio,
    ));
    report.details = Some(serde_json::to_value(&nc)?);
    Ok(report)
}
